#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn manifest_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

pub fn command(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_erlangr"));
    cmd.args(args).current_dir(manifest_dir()).env_remove("ERLANGR_SEED");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    command(args).output().expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Runs and requires exit 0, returning stdout.
pub fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert_eq!(code(&out), 0, "{args:?} failed: {}", stderr(&out));
    stdout(&out)
}

pub fn json(args: &[&str]) -> serde_json::Value {
    serde_json::from_str(&ok(args)).expect("valid json")
}

pub fn golden_dir() -> PathBuf {
    manifest_dir().join("tests").join("golden")
}

pub const BLOCKING_ANALYZE: &[&str] =
    &["analyze", "--model", "blocking", "--lambda", "2", "--mu", "1", "--delta", "0.25", "--p", "0.75", "--s", "9", "--n", "40"];
pub const HOLDING_ANALYZE: &[&str] =
    &["analyze", "--model", "holding", "--lambda", "2", "--mu", "1", "--delta", "0.5", "--p", "0.3", "--s", "9", "--n", "40"];
pub const MU_PARAMS: &[&str] = &["--lambda", "0.32", "--mu", "4", "--delta", "0.4", "--p", "0.975"];
