//! Runs the binary against a scratch copy of the demo fixtures.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const DEMO_FILES: [&str; 5] = ["cmudict-slice.txt", "corpus.txt", "tags.tsv", "embeddings.txt", "votes.csv"];

pub fn demo_source() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/demo")
}

pub fn punster(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_punster"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = punster(dir, args);
    assert!(
        out.status.success(),
        "punster {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Copies the fixtures into a temp dir and builds every resource there with
/// relative paths, so reports are byte-for-byte reproducible.
pub fn demo_workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for f in DEMO_FILES {
        std::fs::copy(demo_source().join(f), dir.path().join(f)).unwrap();
    }
    let d = dir.path();
    ok(d, &["mine-puns", "--dict", "cmudict-slice.txt", "-o", "puns.tsv"]);
    for dir_name in ["forward", "reverse"] {
        let out = format!("{dir_name}.json");
        ok(d, &["train-lm", "--corpus", "corpus.txt", "--direction", dir_name, "--min-count", "1", "-o", &out]);
    }
    ok(d, &["index-corpus", "--corpus", "corpus.txt", "--line-mode", "-o", "corpus.idx"]);
    dir
}

pub const RESOURCE_FLAGS: [&str; 10] = [
    "--lexicon",
    "puns.tsv",
    "--lm-forward",
    "forward.json",
    "--lm-reverse",
    "reverse.json",
    "--index",
    "corpus.idx",
    "--embeddings",
    "embeddings.txt",
];

pub fn run_demo_pipeline(dir: &Path) -> String {
    let mut args = vec!["pipeline", "--tags", "tags.tsv"];
    args.extend(RESOURCE_FLAGS);
    String::from_utf8(ok(dir, &args).stdout).unwrap()
}

pub fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/demo_report.json")
}

pub fn schema() -> serde_json::Value {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/schema/report.schema.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}
