use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn aoimec(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aoimec"))
        .args(args)
        .env("AOIMEC_OUT", out)
        .output()
        .expect("binary runs")
}

const TINY: [&str; 12] = [
    "--override",
    "system.horizon=12",
    "--override",
    "train.episodes=3",
    "--override",
    "train.eval_episodes=2",
    "--override",
    "agent.trunk=[16]",
    "--override",
    "agent.batch_size=8",
    "--override",
    "scenario=cli",
];

fn with_tiny<'a>(verb: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![verb];
    v.extend_from_slice(&TINY);
    v.extend_from_slice(extra);
    v
}

#[test]
fn train_rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = with_tiny("train", &["--seed-list", "4,5"]);
    assert!(aoimec(&args, a.path()).status.success());
    assert!(aoimec(&args, b.path()).status.success());
    for f in ["train_bd3qn_seed4.csv", "train_bd3qn_seed5.csv", "results.csv", "checkpoint_bd3qn_seed4.json"] {
        let x = fs::read(a.path().join("cli").join(f)).unwrap();
        let y = fs::read(b.path().join("cli").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn out_flag_beats_environment() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let mut args = with_tiny("train", &["--agent", "greedy"]);
    let flag = flag_dir.path().to_str().unwrap().to_string();
    args.extend(["--out", flag.as_str()]);
    assert!(aoimec(&args, env_dir.path()).status.success());
    assert!(flag_dir.path().join("cli/results.csv").exists());
    assert!(!env_dir.path().join("cli").exists());
}

#[test]
fn unknown_keys_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "system.num_device = 3\nagent.gama = 0.5\n").unwrap();
    let out = aoimec(&["train", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("system.num_device") && err.contains("agent.gama"), "{err}");
}

#[test]
fn oversized_flat_agent_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "train",
        "--agent",
        "d3qn",
        "--override",
        "system.num_devices=8",
        "--override",
        "system.num_bs=3",
    ];
    let out = aoimec(&args, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exponentially"));
}

#[test]
fn eval_uses_a_trained_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    assert!(aoimec(&with_tiny("train", &["--seed-list", "1"]), dir.path()).status.success());
    let ck = dir.path().join("cli/checkpoint_bd3qn_seed1.json");
    let out = aoimec(&with_tiny("eval", &["--seed-list", "1", "--checkpoint", ck.to_str().unwrap()]), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("cli/eval.csv").exists());
}

#[test]
fn compare_and_sweep_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = aoimec(&with_tiny("compare", &["--agent", "greedy,random"]), dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("sign test"));
    let out = aoimec(
        &with_tiny("sweep", &["--agent", "greedy", "--override", "sweep.variable=lambda", "--override", "sweep.values=[0.3,0.7]"]),
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("cli/summary.csv").exists());
}

#[test]
fn check_reports_every_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = aoimec(&["check"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() >= 7);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}
