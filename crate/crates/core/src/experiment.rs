//! Run configuration, experiment orchestration and plot-script emission.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::autodiff::{loss_and_grad, PinnObjective};
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::jet::Jet2;
use crate::metrics::{OptimizerKind, RunRecord, CSV_COLUMNS};
use crate::network::{forward, init_xavier, MlpConfig, ParamVector};
use crate::optimizer::{Adam, Lbfgs, LineSearchParams, Optimizer, QnSettings};
use crate::partition::make_partition;
use crate::problems::ProblemKind;
use crate::reference::{EvalGrid, ReferenceField, EVAL_GRID};
use crate::sampling::hammersley;
use crate::spqn::{Spqn, SpqnConfig, Variant};
use crate::training::{train, TrainOptions, TrainOutcome};

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub optimizer: OptimizerKind,
    pub depth: usize,
    pub width: usize,
    pub lr: f64,
    pub subdomains: usize,
    pub local_iters: usize,
    pub iters: usize,
    pub points: usize,
    pub seed: u64,
    pub memory: usize,
    pub mu: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_ls: usize,
    pub workers: usize,
    pub eval_every: usize,
    pub eval_grid: usize,
    pub target_e_rel: Option<f64>,
    pub uc_budget: Option<f64>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub reference_cache: Option<PathBuf>,
}

/// Depth, width, Adam learning rate, subdomains and local iterations per
/// benchmark.
pub fn table_defaults(problem: ProblemKind) -> (usize, usize, f64, usize, usize) {
    match problem {
        ProblemKind::Burgers => (8, 20, 5e-4, 8, 50),
        ProblemKind::DiffusionAdvection => (10, 50, 1e-4, 10, 10),
        ProblemKind::KleinGordon => (6, 50, 1e-3, 6, 50),
        ProblemKind::AllenCahn => (6, 64, 2.5e-4, 6, 50),
    }
}

const ECHO_KEYS: [&str; 19] = [
    "problem",
    "optimizer",
    "depth",
    "width",
    "lr",
    "subdomains",
    "local_iters",
    "iters",
    "points",
    "seed",
    "memory",
    "mu",
    "c1",
    "c2",
    "max_ls",
    "workers",
    "eval_every",
    "eval_grid",
    "target_e_rel",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value '{value}' for '{key}'")))
}

fn parse_opt(key: &str, value: &str) -> Result<Option<f64>> {
    if value.is_empty() || value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

impl RunConfig {
    pub fn defaults(problem: ProblemKind, optimizer: OptimizerKind) -> Self {
        let (depth, width, lr, subdomains, local_iters) = table_defaults(problem);
        let search = LineSearchParams::default();
        Self {
            problem,
            optimizer,
            depth,
            width,
            lr,
            subdomains,
            local_iters,
            iters: 1000,
            points: 10_000,
            seed: 0,
            memory: 3,
            mu: 1.0,
            c1: search.c1,
            c2: search.c2,
            max_ls: search.max_trials,
            workers: 1,
            eval_every: 10,
            eval_grid: EVAL_GRID,
            target_e_rel: None,
            uc_budget: None,
            out: None,
            checkpoint: None,
            reference_cache: None,
        }
    }

    /// Defaults, then `pairs` applied in order. `problem` and `optimizer`
    /// are taken from the pairs first so the table row is right.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let find = |k: &str| pairs.iter().rev().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
        let problem: ProblemKind = find("problem")
            .ok_or_else(|| Error::InvalidConfig("no problem given".into()))?
            .parse()?;
        let optimizer: OptimizerKind = find("optimizer").unwrap_or("mspqn").parse()?;
        let mut cfg = Self::defaults(problem, optimizer);
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "problem" => self.problem = v.parse()?,
            "optimizer" => self.optimizer = v.parse()?,
            "depth" => self.depth = parse(key, v)?,
            "width" => self.width = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "subdomains" => self.subdomains = parse(key, v)?,
            "local_iters" => self.local_iters = parse(key, v)?,
            "iters" => self.iters = parse(key, v)?,
            "points" => self.points = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "memory" => self.memory = parse(key, v)?,
            "mu" => self.mu = parse(key, v)?,
            "c1" => self.c1 = parse(key, v)?,
            "c2" => self.c2 = parse(key, v)?,
            "max_ls" => self.max_ls = parse(key, v)?,
            "workers" => self.workers = parse(key, v)?,
            "eval_every" => self.eval_every = parse(key, v)?,
            "eval_grid" => self.eval_grid = parse(key, v)?,
            "target_e_rel" => self.target_e_rel = parse_opt(key, v)?,
            "uc_budget" => self.uc_budget = parse_opt(key, v)?,
            "out" => self.out = Some(v.into()),
            "checkpoint" => self.checkpoint = Some(v.into()),
            "reference_cache" => self.reference_cache = Some(v.into()),
            // written by the trainer, not configuration
            "train_s" | "n" | "reference" | "eval_points" => {}
            other => return Err(Error::InvalidConfig(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Configuration echo; enough to re-run the experiment.
    pub fn echo(&self) -> Vec<(String, String)> {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| x.to_string());
        let values = [
            self.problem.name().to_string(),
            self.optimizer.name().to_string(),
            self.depth.to_string(),
            self.width.to_string(),
            self.lr.to_string(),
            self.subdomains.to_string(),
            self.local_iters.to_string(),
            self.iters.to_string(),
            self.points.to_string(),
            self.seed.to_string(),
            self.memory.to_string(),
            self.mu.to_string(),
            self.c1.to_string(),
            self.c2.to_string(),
            self.max_ls.to_string(),
            self.workers.to_string(),
            self.eval_every.to_string(),
            self.eval_grid.to_string(),
            opt(self.target_e_rel),
        ];
        let mut out: Vec<(String, String)> = ECHO_KEYS.iter().zip(values).map(|(k, v)| (k.to_string(), v)).collect();
        out.push(("uc_budget".into(), opt(self.uc_budget)));
        out
    }

    pub fn network(&self) -> MlpConfig {
        MlpConfig::new(2, self.width, self.depth)
    }

    pub fn qn_settings(&self) -> QnSettings {
        QnSettings {
            memory: self.memory,
            mu: self.mu,
            search: LineSearchParams {
                c1: self.c1,
                c2: self.c2,
                max_trials: self.max_ls,
                ..LineSearchParams::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.network().validate()?;
        self.qn_settings().validate()?;
        if self.points == 0 {
            return Err(Error::InvalidConfig("need at least one collocation point".into()));
        }
        if self.memory == 0 {
            return Err(Error::InvalidConfig("memory must be at least 1".into()));
        }
        if self.eval_grid < 2 {
            return Err(Error::InvalidConfig(
                "evaluation grid needs at least 2 points per axis".into(),
            ));
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!("lr must be positive (got {})", self.lr)));
        }
        if self.optimizer.is_spqn() {
            if self.subdomains == 0 || self.subdomains > self.depth {
                return Err(Error::InvalidConfig(format!(
                    "subdomains must lie in 1..={} for depth {} (got {})",
                    self.depth, self.depth, self.subdomains
                )));
            }
            if self.local_iters == 0 {
                return Err(Error::InvalidConfig("local_iters must be at least 1".into()));
            }
        }
        Ok(())
    }

    pub fn build_optimizer(&self) -> Result<Box<dyn Optimizer>> {
        let net = self.network();
        let n = net.param_count();
        Ok(match self.optimizer {
            OptimizerKind::Adam => Box::new(Adam::new(n, self.lr)),
            OptimizerKind::Lbfgs => {
                self.qn_settings().validate()?;
                Box::new(Lbfgs::new(n, self.qn_settings()))
            }
            OptimizerKind::Aspqn | OptimizerKind::Mspqn => {
                let variant = if self.optimizer == OptimizerKind::Aspqn {
                    Variant::Additive
                } else {
                    Variant::Multiplicative
                };
                let mut sc = SpqnConfig::new(variant, self.local_iters);
                sc.qn = self.qn_settings();
                sc.workers = self.workers.max(1);
                Box::new(Spqn::new(sc, make_partition(&net, self.subdomains)?)?)
            }
        })
    }
}

/// Parse a flat `key=value` file. Blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("config line {}: expected key=value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Objective and error grid for one problem and architecture.
pub struct Setup {
    pub objective: PinnObjective,
    pub eval: EvalGrid,
    pub reference: ReferenceField,
}

impl Setup {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let problem = cfg.problem.problem();
        let points = hammersley(cfg.points, &problem.bounds)?;
        let objective = PinnObjective::new(cfg.network(), problem, &points)?;
        let reference = ReferenceField::load_or_build(cfg.problem, cfg.reference_cache.as_deref())?;
        reference.self_check()?;
        let eval = EvalGrid::new(&reference, cfg.eval_grid);
        Ok(Self {
            objective,
            eval,
            reference,
        })
    }
}

fn record_header(cfg: &RunConfig, setup: &Setup) -> Vec<(String, String)> {
    let mut h = cfg.echo();
    h.push(("n".into(), cfg.network().param_count().to_string()));
    h.push(("reference".into(), setup.reference.provenance().to_string()));
    h.push(("eval_points".into(), format!("{0}x{0}", cfg.eval_grid)));
    h
}

/// Train with an already built setup. Nothing is written to disk.
pub fn train_with(cfg: &RunConfig, setup: &Setup) -> Result<TrainOutcome> {
    cfg.validate()?;
    if setup.objective.config() != &cfg.network() || setup.objective.problem().kind != cfg.problem {
        return Err(Error::InvalidConfig(
            "setup does not match the run configuration".into(),
        ));
    }
    let theta0 = init_xavier(&cfg.network(), cfg.seed)?.data;
    let mut opt = cfg.build_optimizer()?;
    let err = |theta: &[f64]| setup.eval.e_rel(&setup.objective, theta);
    let opts = TrainOptions {
        max_iters: cfg.iters,
        target_e_rel: cfg.target_e_rel,
        uc_budget: cfg.uc_budget,
        eval_every: cfg.eval_every,
    };
    train(
        opt.as_mut(),
        &setup.objective,
        theta0,
        Some(&err),
        &opts,
        record_header(cfg, setup),
    )
}

/// Train and write the CSV and checkpoint named in the configuration.
pub fn run_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let setup = Setup::new(cfg)?;
    let outcome = train_with(cfg, &setup)?;
    if let Some(path) = &cfg.out {
        write_record(&outcome.record, path)?;
    }
    if let Some(path) = &cfg.checkpoint {
        let ck = Checkpoint {
            params: ParamVector::from_vec(cfg.network(), outcome.iterate.theta.clone())?,
            seed: cfg.seed,
            iteration: outcome.record.last().map_or(0, |r| r.iter),
            extra: cfg.echo(),
        };
        ck.save(path)?;
    }
    Ok(outcome)
}

pub fn write_record(record: &RunRecord, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    record.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_record(path: &Path) -> Result<RunRecord> {
    RunRecord::read_csv(BufReader::new(File::open(path)?))
}

/// Loss of a checkpoint on the configuration stored in it.
pub fn checkpoint_loss(ck: &Checkpoint) -> Result<f64> {
    let pairs = ck.extra.clone();
    let cfg = RunConfig::from_pairs(&pairs)?;
    let problem = cfg.problem.problem();
    let points = hammersley(cfg.points, &problem.bounds)?;
    let obj = PinnObjective::new(ck.params.config, problem, &points)?;
    let mut g = vec![0.0; ck.params.len()];
    crate::objective::Objective::eval(&obj, &ck.params.data, &mut g)
}

/// Runs each optimizer to the same UC budget on a shared setup. A zero
/// budget gives empty series.
pub fn run_compare(
    base: &RunConfig,
    optimizers: &[OptimizerKind],
    budget: f64,
) -> Result<Vec<(OptimizerKind, RunRecord)>> {
    if !(budget >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "budget must be non-negative (got {budget})"
        )));
    }
    if budget == 0.0 {
        return Ok(optimizers.iter().map(|k| (*k, RunRecord::default())).collect());
    }
    let setup = Setup::new(base)?;
    let mut out = Vec::with_capacity(optimizers.len());
    for &kind in optimizers {
        let mut cfg = base.clone();
        cfg.optimizer = kind;
        cfg.uc_budget = Some(budget);
        cfg.out = None;
        cfg.checkpoint = None;
        let (_, record) = train_with(&cfg, &setup)?.into_result()?;
        out.push((kind, record));
    }
    Ok(out)
}

/// Long-format comparison table: one row per optimizer and iteration.
pub fn write_comparison_csv(runs: &[(OptimizerKind, RunRecord)], mut w: impl Write) -> Result<()> {
    if let Some((_, first)) = runs.iter().find(|(_, r)| !r.header.is_empty()) {
        for (k, v) in first.header.iter().filter(|(k, _)| k != "optimizer" && k != "train_s") {
            writeln!(w, "# {k}={v}")?;
        }
    }
    writeln!(w, "optimizer,{CSV_COLUMNS}")?;
    for (kind, rec) in runs {
        for r in &rec.rows {
            let e = r.e_rel.map_or_else(|| "nan".to_string(), |e| format!("{e:e}"));
            writeln!(
                w,
                "{},{},{:e},{},{},{},{:e},{:.6}",
                kind.name(),
                r.iter,
                r.loss,
                e,
                r.loss_evals,
                r.grad_evals,
                r.uc,
                r.wall_s
            )?;
        }
    }
    Ok(())
}

/// Matplotlib script drawing loss and error against iterations, gradient
/// evaluations and update cost for each run CSV.
pub fn emit_plots(paths: &[PathBuf]) -> Result<String> {
    if paths.is_empty() {
        return Err(Error::InvalidConfig("no CSV files given".into()));
    }
    let mut runs = Vec::new();
    for p in paths {
        let rec = read_record(p).map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?;
        let label = match (rec.header_value("optimizer"), rec.header_value("seed")) {
            (Some(o), Some(s)) => format!("{o} (seed {s})"),
            (Some(o), None) => o.to_string(),
            _ => p
                .file_stem()
                .map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into()),
        };
        runs.push((p.display().to_string(), label));
    }
    let mut s = String::new();
    s.push_str(
        "import csv\nimport math\nimport matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n",
    );
    s.push_str("RUNS = [\n");
    for (path, label) in &runs {
        let _ = writeln!(s, "    ({path:?}, {label:?}),");
    }
    s.push_str("]\n\n");
    s.push_str(
        r##"def load(path):
    with open(path) as f:
        rows = [r for r in csv.DictReader(line for line in f if not line.startswith("#"))]
    return {k: [float(r[k]) for r in rows] for k in rows[0]} if rows else {}

PANELS = [
    ("iter", "loss", "iteration", "loss"),
    ("iter", "e_rel", "iteration", "E_rel"),
    ("grad_evals", "loss", "#g_e", "loss"),
    ("uc", "e_rel", "UC", "E_rel"),
]

fig, axes = plt.subplots(2, 2, figsize=(10, 8))
for ax, (x, y, xl, yl) in zip(axes.flat, PANELS):
    for path, label in RUNS:
        d = load(path)
        if not d:
            continue
        pts = [(a, b) for a, b in zip(d[x], d[y]) if not math.isnan(b)]
        ax.semilogy([p[0] for p in pts], [p[1] for p in pts], label=label)
    ax.set_xlabel(xl)
    ax.set_ylabel(yl)
    ax.grid(True, which="both", alpha=0.3)
axes[0][0].legend()
fig.tight_layout()
fig.savefig("runs.png", dpi=150)
"##,
    );
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &str, value: f64, tol: f64) -> CheckOutcome {
    CheckOutcome {
        name: name.to_string(),
        passed: value.is_finite() && value <= tol,
        detail: format!("{value:.3e} (tolerance {tol:.0e})"),
    }
}

/// Quick invariant suite: gradients against finite differences, partition
/// identities, hard boundary conditions and reference self-checks.
pub fn check() -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let run = |name: &str, f: &dyn Fn() -> Result<(f64, f64)>| match f() {
        Ok((v, tol)) => outcome(name, v, tol),
        Err(e) => CheckOutcome {
            name: name.to_string(),
            passed: false,
            detail: e.to_string(),
        },
    };
    for kind in ProblemKind::ALL {
        out.push(run(&format!("gradient {kind}"), &|| {
            Ok((gradient_fd_error(kind, 3)?, 1e-6))
        }));
        out.push(run(&format!("hard bc {kind}"), &|| {
            Ok((hard_bc_violation(kind, 1000, 3)?, 1e-12))
        }));
        out.push(run(&format!("reference {kind}"), &|| {
            let f = ReferenceField::build(kind)?;
            let tol = match kind {
                ProblemKind::KleinGordon => crate::reference::KLEIN_GORDON_TOL,
                ProblemKind::Burgers => crate::reference::COLE_HOPF_TOL,
                _ => crate::reference::GRID_TOL,
            };
            Ok((f.self_check()?, tol))
        }));
    }
    out.push(run("partition identities", &|| Ok((partition_identity_error()?, 0.0))));
    out
}

/// Largest relative mismatch between the parameter gradient and central
/// differences (step 1e-5) on a width-10, depth-3 network.
pub fn gradient_fd_error(kind: ProblemKind, seed: u64) -> Result<f64> {
    let cfg = MlpConfig::new(2, 10, 3);
    let problem = kind.problem();
    let points = hammersley(64, &problem.bounds)?;
    let mut theta = init_xavier(&cfg, seed)?.data;
    // perturb the slopes and biases away from their initial values
    for (i, v) in theta.iter_mut().enumerate() {
        *v += 0.05 * ((i as f64 * 0.7).sin());
    }
    let (_, g) = loss_and_grad(&cfg, &theta, &problem, &points)?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..theta.len() {
        let mut tp = theta.clone();
        let mut tm = theta.clone();
        tp[i] += h;
        tm[i] -= h;
        let fd = (loss_and_grad(&cfg, &tp, &problem, &points)?.0 - loss_and_grad(&cfg, &tm, &problem, &points)?.0)
            / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / scale.max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Largest boundary-condition violation of the transformed network output.
pub fn hard_bc_violation(kind: ProblemKind, n: usize, seed: u64) -> Result<f64> {
    let cfg = MlpConfig::new(2, 10, 3);
    let problem = kind.problem();
    let theta = init_xavier(&cfg, seed)?.data;
    let mut worst: f64 = 0.0;
    for bp in problem.boundary_points(n, seed) {
        let x = [Jet2::variable(bp.x[0], 0), Jet2::variable(bp.x[1], 1)];
        let raw = forward(&cfg, &theta, &x)?;
        let u = problem.transform(&bp.x, &raw);
        worst = worst.max(bp.condition.violation(&u));
    }
    Ok(worst)
}

/// Largest entry of `R_s E_s − I` and `Σ E_s R_s − I` over the benchmark
/// architectures and every admissible group count.
pub fn partition_identity_error() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for kind in ProblemKind::ALL {
        let (depth, width, ..) = table_defaults(kind);
        let cfg = MlpConfig::new(2, width, depth);
        let n = cfg.param_count();
        let theta: Vec<f64> = (0..n).map(|i| i as f64 + 0.5).collect();
        for groups in 2..=depth {
            let p = make_partition(&cfg, groups)?;
            let mut sum = vec![0.0; n];
            for s in 0..p.num_groups() {
                let local = p.restrict(&theta, s)?;
                let back = p.restrict(&p.embed(&local, s)?, s)?;
                for (a, b) in local.iter().zip(&back) {
                    worst = worst.max((a - b).abs());
                }
                for (acc, v) in sum.iter_mut().zip(p.embed(&local, s)?) {
                    *acc += v;
                }
            }
            for (a, b) in sum.iter().zip(&theta) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    Ok(worst)
}
