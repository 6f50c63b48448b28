use std::process::{Command, Output};

fn dualband(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualband")).args(args).output().expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn unknown_subcommand_and_flag_exit_with_usage() {
    for args in [&["frobnicate"][..], &["--bogus", "check"][..]] {
        let o = dualband(args);
        assert_eq!(o.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    }
}

#[test]
fn missing_config_exits_one_and_names_the_path() {
    let o = dualband(&["run", "no-such-dir/missing.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.toml"));
}

#[test]
fn bad_override_is_a_config_error() {
    let o = dualband(&["--override", "env.m_dt=0", "run", "desk"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("m_dt"));
}

#[test]
fn check_passes_on_a_clean_build() {
    let o = dualband(&["check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("[PASS]")).count(), 7);
}

#[test]
fn override_shows_in_header_and_outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = dualband(&[
        "--out-dir",
        out.to_str().unwrap(),
        "--policy",
        "genie",
        "--policy",
        "greedy",
        "--override",
        "env.m_dt=5",
        "--override",
        "env.episode_len_decisions=10",
        "--override",
        "experiment.n_episodes=2",
        "--override",
        "mmwave.kappa_rvq=3",
        "run",
        "desk",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.trim_start_matches('#').trim() == "m_dt = 5"), "{text}");
    for f in ["metrics.csv", "summary.csv", "scatter.csv", "config.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let plot = dualband(&["plot-data", out.join("summary.csv").to_str().unwrap()]);
    assert_eq!(plot.status.code(), Some(0));
    assert!(stdout(&plot).starts_with("# sweep_value genie greedy"));
}

#[test]
fn sweep_sets_axis_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = dualband(&[
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--policy",
        "greedy",
        "--override",
        "env.episode_len_decisions=5",
        "--override",
        "experiment.n_episodes=1",
        "sweep",
        "desk",
        "--axis",
        "rvq-bits",
        "--values",
        "2,3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn trace_gen_then_info() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.bin");
    let p = path.to_str().unwrap();
    let g = dualband(&["--override", "env.episode_len_decisions=5", "--override", "mmwave.kappa_rvq=3", "trace", "gen", p, "--band", "sub6"]);
    assert_eq!(g.status.code(), Some(0), "{}", String::from_utf8_lossy(&g.stderr));
    let i = dualband(&["trace", "info", p]);
    assert_eq!(i.status.code(), Some(0));
    let text = stdout(&i);
    assert!(text.contains("band: sub6"));
    assert!(text.contains("subcarriers: 8"));
    let bad = dualband(&["trace", "info", dir.path().join("none.bin").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
}
