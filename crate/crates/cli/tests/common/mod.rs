#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_stereo-noise");

pub fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn stereo-noise")
}

/// Runs the binary and panics with its stderr unless it exits with 0.
pub fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "stereo-noise {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 output")
}

pub fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// `(window, k, se_k, lambda, se_lambda)` rows of a fit CSV.
pub fn fit_rows(csv: &str) -> Vec<(String, [f64; 4])> {
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("window,k,se_k,lambda,se_lambda"));
    lines
        .map(|l| {
            let mut f = l.split(',');
            let w = f.next().unwrap().to_string();
            let v: Vec<f64> = f.map(|s| s.parse().unwrap()).collect();
            (w, [v[0], v[1], v[2], v[3]])
        })
        .collect()
}

/// Every file under `dir` with its contents, sorted by relative path.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
