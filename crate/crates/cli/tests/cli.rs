use std::path::PathBuf;
use std::process::{Command, Output};

fn spqn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spqn"))
        .args(args)
        .env_remove("SPQN_WORKERS")
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("spqn-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const TINY: &[&str] = &[
    "--width",
    "6",
    "--depth",
    "2",
    "--points",
    "64",
    "--subdomains",
    "2",
    "--local-iters",
    "3",
];

#[test]
fn train_writes_outputs_and_config_file_is_honoured() {
    let dir = scratch("train");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "problem=klein_gordon\noptimizer=lbfgs\niters=50\neval_grid=8\n").unwrap();
    let csv = dir.join("out.csv");
    let ck = dir.join("out.ckpt");
    let mut args = vec!["train", "--config", cfg.to_str().unwrap(), "--iters", "3"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--out", csv.to_str().unwrap(), "--checkpoint", ck.to_str().unwrap()]);
    let out = spqn(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("klein_gordon lbfgs"), "{stdout}");

    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.contains("# optimizer=lbfgs"));
    // flag beats config file
    assert!(text.contains("# iters=3"));
    assert!(text.contains("# eval_grid=8"));
    assert!(ck.exists());
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn compare_writes_one_file_per_optimizer() {
    let dir = scratch("compare");
    let out_dir = dir.join("cmp");
    let mut args = vec![
        "compare",
        "--problem",
        "burgers",
        "--budget",
        "200000",
        "--optimizers",
        "lbfgs,mspqn",
    ];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--eval-every", "0", "--out-dir", out_dir.to_str().unwrap()]);
    let out = spqn(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["lbfgs.csv", "mspqn.csv", "comparison.csv"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn plot_prints_script() {
    let dir = scratch("plot");
    let csv = dir.join("a.csv");
    let mut args = vec!["train", "--problem", "burgers", "--optimizer", "adam", "--iters", "2"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--out", csv.to_str().unwrap()]);
    assert!(spqn(&args).status.success());
    let out = spqn(&["plot", csv.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("import matplotlib"));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn bad_input_fails_with_message() {
    for args in [
        vec!["train", "--problem", "heat"],
        vec!["train", "--problem", "burgers", "--subdomains", "9"],
        vec![
            "compare",
            "--problem",
            "burgers",
            "--budget",
            "10",
            "--optimizers",
            "sgd",
        ],
        vec!["plot", "/nonexistent/run.csv"],
    ] {
        let out = spqn(&args);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"), "{args:?}");
    }
}
