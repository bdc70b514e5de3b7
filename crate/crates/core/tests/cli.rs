mod common;

use std::path::{Path, PathBuf};

use common::corpus_dir;
use shadow_arena::cli::{run_cli, EXIT_OK, EXIT_PARSE, EXIT_REJECTED, EXIT_STUCK};

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("arena").chain(args.iter().copied());
    let code = run_cli(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn corpus_file(name: &str) -> String {
    corpus_dir().join(name).to_string_lossy().into_owned()
}

/// Writes `src` to a file private to this test process.
fn scratch(name: &str, src: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("arena-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, src).unwrap();
    path
}

#[test]
fn corpus_command_passes_everything() {
    let (code, out, err) = run(&["corpus", &corpus_dir().to_string_lossy()]);
    assert_eq!(code, EXIT_OK, "{out}{err}");
    assert!(out.lines().last().unwrap().ends_with(" 0 failed"), "{out}");
    assert!(!out.contains("FAIL"));
}

#[test]
fn check_accepts_and_rejects() {
    let (code, out, _) = run(&["check", &corpus_file("intro.arn")]);
    assert_eq!(code, EXIT_OK);
    assert!(out.lines().any(|l| l.starts_with("ACCEPT ")), "{out}");
    assert!(out.lines().any(|l| l.starts_with("ARENA ")), "{out}");

    for (file, kind) in [
        ("neg_escape.arn", "EscapeViolation"),
        ("neg_telescope.arn", "SubsumptionFailure"),
    ] {
        let (code, out, err) = run(&["check", &corpus_file(file)]);
        assert_eq!(code, EXIT_REJECTED, "{file}: {out}{err}");
        assert!(out.contains(&format!("REJECT {kind}")), "{file}: {out}");
        assert!(!err.is_empty());
    }
    let (code, out, _) = run(&["check", "--ext-int", &corpus_file("neg_overlap.arn")]);
    assert_eq!(code, EXIT_REJECTED);
    assert!(out.contains("REJECT OverlapViolation"));
}

#[test]
fn run_prints_value_and_store() {
    let (code, out, _) = run(&["run", "--trace", &corpus_file("scoped_simple.arn")]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.lines().any(|l| l.starts_with("TRACE ")));
    assert!(out.lines().any(|l| l.starts_with("VALUE ")));
    assert!(out.lines().any(|l| l == "STORE live=0 killed=1"), "{out}");
}

#[test]
fn unchecked_run_can_get_stuck() {
    let path = scratch("stuck.core", "!1");
    let path = path.to_string_lossy();
    let (code, out, _) = run(&["run", "--core", "--unsafe", &path]);
    assert_eq!(code, EXIT_STUCK, "{out}");
    assert!(out.starts_with("STUCK "), "{out}");
    let (code, _, _) = run(&["run", "--core", &path]);
    assert_eq!(code, EXIT_REJECTED);
}

#[test]
fn front_end_failures_use_the_parse_code() {
    let missing = Path::new(&corpus_dir()).join("does-not-exist.arn");
    assert_eq!(run(&["check", &missing.to_string_lossy()]).0, EXIT_PARSE);
    let garbled = scratch("garbled.arn", "val = = 3");
    assert_eq!(run(&["check", &garbled.to_string_lossy()]).0, EXIT_PARSE);
    assert_eq!(run(&["frobnicate"]).0, EXIT_PARSE);
    assert_eq!(run(&["--help"]).0, EXIT_OK);
}

#[test]
fn meta_reports_ok_on_a_positive_program() {
    let (code, out, _) = run(&["meta", &corpus_file("scoped_block.arn")]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.lines().any(|l| l.starts_with("META ") && l.contains(" OK ")), "{out}");
    assert!(out.lines().any(|l| l.starts_with("PROGRESS ") && l.contains(" OK ")), "{out}");
}
