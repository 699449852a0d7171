#![allow(dead_code)]

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

pub const STEP_MEASURE: &str = "# name: recurrence\nrecurrence(10)\n";
pub const AGG_MEASURE: &str = "# name: order\nmean(S)\n";

/// The `orderscope` binary with every `ORDERSCOPE_*` variable cleared.
pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_orderscope"));
    for (key, _) in std::env::vars() {
        if key.starts_with("ORDERSCOPE_") {
            cmd.env_remove(key);
        }
    }
    cmd
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// Default 5 x 6 grid with the given step count.
pub fn grid_spec(steps: usize, seed: u64) -> String {
    format!(
        r#"{{"k":7,"steps":{steps},"dt":2.5,"seed":{seed},"d":[1.0,1.5,2.0,2.5,3.0],"beta":[-4.5,-3.4,-2.7,-2.3,-1.0,0.0]}}"#
    )
}

/// Same grid, every run periodic with period `period`.
pub fn periodic_spec(steps: usize, period: usize) -> String {
    format!(
        r#"{{"k":7,"steps":{steps},"dt":2.5,"seed":3,"d":[1.0,1.5,2.0,2.5,3.0],"beta":[-4.5,-3.4,-2.7,-2.3,-1.0,0.0],
            "rule":{{"kind":"uniform","mode":"periodic","period_steps":{period}}}}}"#
    )
}

/// Writes `spec` and the two measure files into `dir`, returning their paths.
pub struct Workspace {
    pub spec: PathBuf,
    pub step: PathBuf,
    pub agg: PathBuf,
}

pub fn workspace(dir: &Path, spec: &str) -> Workspace {
    let ws = Workspace {
        spec: dir.join("spec.json"),
        step: dir.join("recurrence.measure"),
        agg: dir.join("order.measure"),
    };
    fs::write(&ws.spec, spec).unwrap();
    fs::write(&ws.step, STEP_MEASURE).unwrap();
    fs::write(&ws.agg, AGG_MEASURE).unwrap();
    ws
}

pub fn gen(spec: &Path, out: &Path) {
    let o = run(&["gen", "--spec", p(spec), "--out", p(out)]);
    assert!(o.status.success(), "gen failed: {}", stderr(&o));
}

/// Every file under `dir` with its bytes, sorted by relative path.
pub fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

/// A k = 1 ensemble whose run `broken` has norm 0.6 at row 2.
pub fn write_bad_norm(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    fs::write(
        dir.join("manifest.json"),
        r#"{"k":1,"runs":[{"id":"ok","d":1,"beta":0,"file":"ok.csv"},{"id":"broken","d":2,"beta":0,"file":"broken.csv"}]}"#,
    )
    .unwrap();
    fs::write(dir.join("ok.csv"), "t,p0x,p0y,p0z\n0,1,0,0\n1,0,1,0\n").unwrap();
    fs::write(dir.join("broken.csv"), "t,p0x,p0y,p0z\n0,1,0,0\n1,0,1,0\n2,0.6,0,0\n").unwrap();
}

/// `orderscope serve` on an ephemeral port; killed on drop.
pub struct Server {
    child: Child,
    pub base: String,
}

impl Server {
    pub fn start(data_root: &Path) -> Server {
        let mut child = bin()
            .args([
                "serve",
                "--host",
                "127.0.0.1",
                "--port",
                "0",
                "--data-root",
                p(data_root),
            ])
            .env("RUST_LOG", "warn")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("serve starts");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let base = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
            .to_string();
        Server { child, base }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
