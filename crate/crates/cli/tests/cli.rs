use std::path::PathBuf;
use std::process::{Command, Output};

use hyra_core::modelio::parse_witness;

fn model(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/models").join(format!("{name}.hna"));
    p.to_str().expect("utf-8 path").to_string()
}

fn hyra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyra")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

#[test]
fn toy_is_delta_sat() {
    let o = hyra(&["--model", &model("toy")]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("verdict: delta-sat"));
    assert!(out.lines().nth(1).is_some_and(|l| l.starts_with("stats: runs=")), "{out}");
}

#[test]
fn unreachable_goal_exits_one_in_every_mode() {
    for mode in ["plain", "heuristic", "heuristic-learn"] {
        let o = hyra(&["--model", &model("toy_unsat"), "--mode", mode]);
        assert_eq!(o.status.code(), Some(1), "{mode}");
        assert_eq!(stdout(&o).lines().next(), Some("verdict: unsat"), "{mode}");
    }
}

#[test]
fn missing_model_is_a_usage_error() {
    let o = hyra(&["--model", "missing.hna"]);
    assert_eq!(o.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.hna"));
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(hyra(&["--model", &model("toy"), "--mode", "fast"]).status.code(), Some(64));
    assert_eq!(hyra(&["--model", &model("toy"), "--delta", "0"]).status.code(), Some(64));
    assert_eq!(hyra(&[]).status.code(), Some(64));
}

#[test]
fn invalid_model_is_a_usage_error() {
    let dir = std::env::temp_dir().join(format!("hyra-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("bad.hna");
    std::fs::write(&p, "(network (automaton A (mode a) (init b))) (goal)").unwrap();
    let o = hyra(&["--model", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn bundled_names_resolve_without_a_file() {
    let o = hyra(&["--model", "toy"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn zero_timeout_gives_unknown() {
    let o = hyra(&["--model", &model("dribble"), "-k", "8", "--timeout", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("verdict: unknown"));
    assert!(out.contains("reason: timeout"), "{out}");
}

#[test]
fn witness_and_encoding_files_are_written() {
    let dir = std::env::temp_dir().join(format!("hyra-cli-w-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let (w, e, t) = (dir.join("w.run"), dir.join("enc.txt"), dir.join("trace.txt"));
    let o = hyra(&[
        "--model",
        &model("generator_linear_0"),
        "--witness-out",
        w.to_str().unwrap(),
        "--dump-encoding",
        e.to_str().unwrap(),
        "--trace",
        t.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains(&format!("witness: {}", w.display())));
    let run = parse_witness(&std::fs::read_to_string(&w).unwrap()).unwrap();
    assert_eq!(run.steps(), 3);
    assert!(!std::fs::read_to_string(&e).unwrap().is_empty());
    assert!(t.exists());
}
