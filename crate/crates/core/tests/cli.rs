use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ris-twoway"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

#[test]
fn simulate_writes_header_and_rows() {
    let out = run(&[
        "simulate",
        "--profile",
        "tiny",
        "--schemes",
        "optPSG,oracleTiny",
        "--trials",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "scheme,R,B,trial,seed,min_sumrate_bpshz,dir1_sumrate,dir2_sumrate,outer_iters,wall_ms"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("optPSG,2,1,0,42,"));
    assert!(lines[2].starts_with("oracleTiny,2,1,0,42,"));
    assert!(lines[1..].iter().all(|l| l.ends_with(",0")));
}

#[test]
fn unknown_scheme_is_a_config_error() {
    let out = run(&[
        "simulate",
        "--profile",
        "tiny",
        "--schemes",
        "bogus",
        "--trials",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown scheme"));
}

#[test]
fn unknown_profile_is_a_config_error() {
    let out = run(&["simulate", "--profile", "fig9", "--trials", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exhaustive_search_needs_a_small_discrete_codebook() {
    let out = run(&[
        "simulate",
        "--R",
        "2",
        "--B",
        "inf",
        "--schemes",
        "oracleTiny",
        "--trials",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "simulate",
        "--R",
        "20",
        "--B",
        "1",
        "--schemes",
        "oracleTiny",
        "--trials",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_overrides_profile_fields() {
    let path = tmp("override.toml");
    std::fs::write(&path, "pairs = 2\nsubbands = 8\nseed = 5\n").unwrap();
    let out = run(&[
        "simulate",
        "--config",
        path.to_str().unwrap(),
        "--R",
        "4",
        "--B",
        "2",
        "--schemes",
        "noRIS",
        "--trials",
        "1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("noRIS,4,2,0,5,"));

    std::fs::write(&path, "pairs = 5\nsubbands = 8\n").unwrap();
    let out = run(&[
        "simulate",
        "--config",
        path.to_str().unwrap(),
        "--trials",
        "1",
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "too few sub-bands for the pairs"
    );

    std::fs::write(&path, "no_such_field = 1\n").unwrap();
    let out = run(&[
        "simulate",
        "--config",
        path.to_str().unwrap(),
        "--trials",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_arguments_exit_with_config_code() {
    assert_eq!(run(&["simulate", "--B", "0"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--trials", "0"]).status.code(), Some(2));
}

#[test]
fn verify_passes() {
    let out = run(&["verify"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn timing_flag_only_changes_the_last_column() {
    let args = [
        "simulate",
        "--profile",
        "tiny",
        "--schemes",
        "optPSG",
        "--trials",
        "3",
        "--seed",
        "11",
    ];
    let plain = run(&args);
    let mut timed_args = args.to_vec();
    timed_args.push("--timing");
    let timed = run(&timed_args);
    let strip = |o: &Output| -> Vec<String> {
        String::from_utf8_lossy(&o.stdout)
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(strip(&plain), strip(&timed));
}
