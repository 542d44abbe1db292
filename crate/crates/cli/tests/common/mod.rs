#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .canonicalize()
        .unwrap()
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// A copy of a fixture config inside `dir`: fixture inputs by absolute path,
/// index and outputs under `dir`, then `patch` merged on top.
pub fn config_in(dir: &Path, fixture: &str, patch: Value) -> PathBuf {
    let mut cfg: Value = serde_json::from_str(&read(&fixtures().join(fixture))).unwrap();
    let abs = |p: &Value| Value::String(fixtures().join(p.as_str().unwrap()).display().to_string());
    cfg["corpus"]["path"] = abs(&cfg["corpus"]["path"]);
    cfg["question_bank_path"] = abs(&cfg["question_bank_path"]);
    if let Some(dir) = cfg.pointer("/gateway/fixtures_dir").cloned() {
        cfg["gateway"]["fixtures_dir"] = abs(&dir);
    }
    cfg["index_path"] = Value::String(dir.join("index.qsi").display().to_string());
    cfg["output_dir"] = Value::String(dir.join("out").display().to_string());
    merge(&mut cfg, patch);
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                if v.is_null() {
                    b.remove(&k);
                } else {
                    merge(b.entry(k).or_insert(Value::Null), v);
                }
            }
        }
        (b, p) => *b = p,
    }
}

pub fn qasum(args: &[&str]) -> Output {
    qasum_env(args, &[])
}

pub fn qasum_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qasum"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("run qasum")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Runs and insists on success, returning stdout.
pub fn ok(args: &[&str]) -> String {
    let out = qasum(args);
    assert!(out.status.success(), "qasum {args:?} failed:\n{}", stderr(&out));
    stdout(&out)
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
