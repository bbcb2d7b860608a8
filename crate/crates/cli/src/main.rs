use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spqn::experiment::{
    check, emit_plots, parse_config_text, run_compare, run_train, write_comparison_csv, write_record, RunConfig,
};
use spqn::metrics::OptimizerKind;

const WORKERS_ENV: &str = "SPQN_WORKERS";

#[derive(Parser)]
#[command(
    name = "spqn",
    about = "Train physics-informed networks with Schwarz-preconditioned quasi-Newton methods"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one network and write its CSV and checkpoint.
    Train(RunArgs),
    /// Run several optimizers to a shared update-cost budget.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Update-cost budget shared by every optimizer.
        #[arg(long)]
        budget: f64,
        /// Comma-separated optimizer list.
        #[arg(long, value_delimiter = ',', default_value = "adam,lbfgs,aspqn,mspqn")]
        optimizers: Vec<String>,
        /// Directory for the per-optimizer CSV files.
        #[arg(long, default_value = "compare")]
        out_dir: PathBuf,
    },
    /// Write a matplotlib script plotting the given run CSVs.
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        /// Script path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the quick invariant suite.
    Check,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    subdomains: Option<usize>,
    #[arg(long)]
    local_iters: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    target_e_rel: Option<f64>,
    #[arg(long)]
    eval_every: Option<usize>,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Directory where reference grids are cached.
    #[arg(long)]
    reference_cache: Option<PathBuf>,
    /// Flat key=value file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, String> {
        let mut pairs = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                parse_config_text(&text).map_err(|e| e.to_string())?
            }
            None => Vec::new(),
        };
        if let Ok(w) = std::env::var(WORKERS_ENV) {
            pairs.push(("workers".into(), w));
        }
        let mut flag = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((k.to_string(), v));
            }
        };
        let s = |v: &Option<PathBuf>| v.as_ref().map(|p| p.display().to_string());
        flag("problem", self.problem.clone());
        flag("optimizer", self.optimizer.clone());
        flag("subdomains", self.subdomains.map(|v| v.to_string()));
        flag("local_iters", self.local_iters.map(|v| v.to_string()));
        flag("iters", self.iters.map(|v| v.to_string()));
        flag("points", self.points.map(|v| v.to_string()));
        flag("seed", self.seed.map(|v| v.to_string()));
        flag("depth", self.depth.map(|v| v.to_string()));
        flag("width", self.width.map(|v| v.to_string()));
        flag("lr", self.lr.map(|v| v.to_string()));
        flag("target_e_rel", self.target_e_rel.map(|v| v.to_string()));
        flag("eval_every", self.eval_every.map(|v| v.to_string()));
        flag("out", s(&self.out));
        flag("checkpoint", s(&self.checkpoint));
        flag("reference_cache", s(&self.reference_cache));
        let cfg = RunConfig::from_pairs(&pairs).map_err(|e| e.to_string())?;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let out = run_train(&cfg).map_err(|e| e.to_string())?;
            if let Some(last) = out.record.last() {
                let e = out.record.final_e_rel().map_or("n/a".into(), |e| format!("{e:.3e}"));
                println!(
                    "{} {}: {} iterations, loss {:.3e}, E_rel {e}, stop: {}",
                    cfg.problem,
                    cfg.optimizer,
                    last.iter,
                    last.loss,
                    out.record.stop.as_deref().unwrap_or("-")
                );
            }
            match out.error {
                Some(e) => Err(format!("training aborted: {e}")),
                None => Ok(()),
            }
        }
        Command::Compare {
            run,
            budget,
            optimizers,
            out_dir,
        } => {
            let cfg = run.resolve()?;
            let kinds = optimizers
                .iter()
                .map(|s| s.parse::<OptimizerKind>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            let runs = run_compare(&cfg, &kinds, budget).map_err(|e| e.to_string())?;
            std::fs::create_dir_all(&out_dir).map_err(|e| e.to_string())?;
            for (kind, rec) in &runs {
                let path = out_dir.join(format!("{}.csv", kind.name()));
                write_record(rec, &path).map_err(|e| e.to_string())?;
                let last = rec.last().map_or(f64::NAN, |r| r.loss);
                println!(
                    "{kind}: {} rows, final loss {last:.3e} -> {}",
                    rec.rows.len(),
                    path.display()
                );
            }
            let path = out_dir.join("comparison.csv");
            let file = std::fs::File::create(&path).map_err(|e| e.to_string())?;
            write_comparison_csv(&runs, std::io::BufWriter::new(file)).map_err(|e| e.to_string())?;
            Ok(())
        }
        Command::Plot { csv, out } => {
            let script = emit_plots(&csv).map_err(|e| e.to_string())?;
            match out {
                Some(p) => std::fs::write(&p, script).map_err(|e| format!("{}: {e}", p.display())),
                None => {
                    print!("{script}");
                    Ok(())
                }
            }
        }
        Command::Check => {
            let results = check();
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            if results.iter().all(|r| r.passed) {
                Ok(())
            } else {
                Err("invariant checks failed".into())
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
