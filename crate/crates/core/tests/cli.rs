mod common;

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use common::fixture;

const SCRIPTS: [&str; 5] = [
    "lisa_walkthrough",
    "practice_task",
    "novice_task",
    "advanced_task",
    "telemetry_session",
];

fn convo() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_convo"));
    for (key, _) in std::env::vars() {
        if key.starts_with("CONVO_") {
            cmd.env_remove(key);
        }
    }
    cmd.env("RUST_LOG", "off");
    cmd
}

fn run(args: &[&str]) -> (i32, String) {
    let Output { status, stdout, .. } = convo().args(args).output().unwrap();
    (status.code().unwrap(), String::from_utf8(stdout).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn every_fixture_replays_against_its_golden() {
    for name in SCRIPTS {
        let script = fixture(&format!("{name}.script"));
        let golden = fixture(&format!("{name}.golden.json"));
        let (code, out) = run(&["--replay", p(&script), "--assert", p(&golden)]);
        assert_eq!(code, 0, "{name}:\n{out}");
        assert!(out.ends_with(&format!("ok: matches {}\n", golden.display())), "{name}:\n{out}");
    }
}

#[test]
fn replay_output_is_deterministic() {
    let script = fixture("lisa_walkthrough.script");
    let (_, first) = run(&["--replay", p(&script)]);
    let (_, second) = run(&["--replay", p(&script)]);
    assert_eq!(first, second);
    assert!(first.contains("> Hey Convo, I want to make a game."));
    assert!(first.contains("  [plays] dog"));
}

#[test]
fn a_changed_golden_fails_with_a_diff() {
    let dir = tempfile::tempdir().unwrap();
    let golden = dir.path().join("walkthrough.json");
    let original = std::fs::read_to_string(fixture("lisa_walkthrough.golden.json")).unwrap();
    std::fs::write(&golden, original.replacen("\"horse\"", "\"zebra\"", 1)).unwrap();

    let (code, out) = run(&["--replay", p(&fixture("lisa_walkthrough.script")), "--assert", p(&golden)]);
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("-") && out.contains("zebra"), "{out}");
    assert!(out.lines().any(|l| l.starts_with('+') && l.contains("horse")), "{out}");
}

#[test]
fn bless_writes_the_golden_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let golden = dir.path().join("practice.json");
    let script = fixture("practice_task.script");
    let (code, _) = run(&["--replay", p(&script), "--assert", p(&golden), "--bless"]);
    assert_eq!(code, 0);
    assert_eq!(
        std::fs::read(&golden).unwrap(),
        std::fs::read(fixture("practice_task.golden.json")).unwrap()
    );
    let (code, _) = run(&["--replay", p(&script), "--assert", p(&golden)]);
    assert_eq!(code, 0);
}

#[test]
fn usage_problems_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let script = fixture("practice_task.script");
    let missing = dir.path().join("nope.script");
    let bad_script = dir.path().join("bad.script");
    std::fs::write(&bad_script, "> fine\n? what is this\n").unwrap();
    let bad_config = dir.path().join("convo.toml");
    std::fs::write(&bad_config, "max_sessions = \"many\"\n").unwrap();

    let cases: Vec<Vec<&str>> = vec![
        vec!["--replay", p(&missing)],
        vec!["--replay", p(&bad_script)],
        vec!["--replay", p(&script), "--assert", p(&missing)],
        vec!["--assert", p(&script)],
        vec!["--replay", p(&script), "--serve"],
        vec!["--frobnicate"],
        vec!["--config", p(&bad_config), "--replay", p(&script)],
    ];
    for args in cases {
        let (code, out) = run(&args);
        assert_eq!(code, 2, "{args:?}:\n{out}");
    }
}

#[test]
fn a_bad_env_override_exits_two() {
    let out = convo()
        .env("CONVO_FUEL", "lots")
        .args(["--replay", p(&fixture("practice_task.script"))])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CONVO_FUEL"));
}

#[test]
fn telemetry_export_matches_the_golden_and_appends() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("telemetry.csv");
    let script = fixture("telemetry_session.script");
    let golden = std::fs::read_to_string(fixture("telemetry_session.golden.csv")).unwrap();

    assert_eq!(run(&["--replay", p(&script), "--export-telemetry", p(&csv)]).0, 0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), golden);

    assert_eq!(run(&["--replay", p(&script), "--export-telemetry", p(&csv)]).0, 0);
    let lines: Vec<String> = std::fs::read_to_string(&csv).unwrap().lines().map(String::from).collect();
    let expected: Vec<&str> = golden.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], expected[0]);
    assert_eq!(lines[1], expected[1]);
    assert_eq!(lines[2], expected[1]);
}

#[test]
fn the_repl_reads_stdin_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let export = dir.path().join("hello.json");
    let input = format!(
        "create a program\nhello\nsay hello world\ndone\n/export {}\n/quit\n",
        export.display()
    );
    let mut child = convo()
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("/help"), "{text}");
    assert!(text.contains("say \"hello world\""), "{text}");
    let program: serde_json::Value = serde_json::from_slice(&std::fs::read(&export).unwrap()).unwrap();
    assert_eq!(program["name"], "hello");
}

#[test]
fn serve_prints_its_address() {
    let mut child = convo()
        .env("CONVO_LISTEN", "127.0.0.1:0")
        .arg("--serve")
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    let addr = line.trim().strip_prefix("listening on ws://").unwrap();
    assert!(addr.starts_with("127.0.0.1:") && addr.ends_with("/session"), "{line}");
    assert!(!addr.contains(":0/"), "{line}");
}
