#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use leadopt::data::synthetic_records;

pub const LIGHT_CONFIG: &str = r#"
schema = "leadopt-config"
version = 1

[campaign]
initial_shots = 120
max_iterations = 5
batch_size = 20
early_stop_after = 50
seed = 0

[campaign.backend]
kind = "mock"
seed = 0

[campaign.gbt]
n_trees = 60

[campaign.embedding]
dim = 32
epochs = 3

[modify]
vocab_corpus = 60

[modify.backend]
kind = "scripted"
rules = [{ pattern = "(?s).*", response = '{"smiles": "Oc1ccccc1"}' }]
"#;

pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        let w = Workspace { dir: tempfile::tempdir().unwrap() };
        std::fs::write(w.config(), LIGHT_CONFIG).unwrap();
        let mut csv = String::from("smiles,activity\n");
        for r in synthetic_records(200, 0.3, 4) {
            writeln!(csv, "{},{}", r.smiles, r.activity).unwrap();
        }
        csv.push_str("not-a-molecule,5.5\n");
        std::fs::write(w.path("actives.csv"), csv).unwrap();
        w
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn config(&self) -> PathBuf {
        self.path("config.toml")
    }

    pub fn data(&self) -> PathBuf {
        self.path("data")
    }

    pub fn command(&self, args: &[&str]) -> Command {
        let mut c = Command::new(env!("CARGO_BIN_EXE_leadopt"));
        c.arg("--config").arg(self.config()).arg("--data-dir").arg(self.data()).args(args);
        c
    }

    /// Runs to completion; fails with stderr on a non-zero exit.
    pub fn run(&self, args: &[&str]) -> Result<String, String> {
        let out: Output = self.command(args).output().map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("leadopt {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }

    pub fn state_path(&self, id: &str) -> PathBuf {
        self.data().join("campaigns").join(id).join("run").join("state.json")
    }
}

fn persisted_iterations(state: &Path) -> usize {
    std::fs::read_to_string(state)
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .and_then(|v| v["reports"].as_array().map(Vec::len))
        .unwrap_or(0)
}

/// prep → train → campaign run → report → eval → modify.
pub fn end_to_end(w: &Workspace) -> Result<(), String> {
    let input = w.path("actives.csv");
    let prep = w.run(&["prep", "--input", input.to_str().unwrap(), "--name", "t1"])?;
    if !prep.contains("200 records, 1 rejected rows") || !prep.contains("best20 20, pool50 50, allminus20 180") {
        return Err(format!("prep: {prep}"));
    }
    let train = w.run(&["train", "--dataset", "t1", "--folds", "5"])?;
    if train.lines().filter(|l| l.contains("mean r2")).count() != 3 {
        return Err(format!("train: {train}"));
    }
    if !w.data().join("models/t1/cv.tsv").exists() {
        return Err("train wrote no cv.tsv".into());
    }
    let run = w.run(&["campaign", "run", "--dataset", "t1", "--id", "e2e"])?;
    if !run.contains("campaign e2e Finished") {
        return Err(format!("campaign run: {run}"));
    }
    let report = w.run(&["campaign", "report", "--id", "e2e"])?;
    if report.lines().count() != 6 {
        return Err(format!("report: {report}"));
    }
    let json = w.run(&["campaign", "report", "--id", "e2e", "--format", "json"])?;
    let v: serde_json::Value = serde_json::from_str(&json).map_err(|e| e.to_string())?;
    if v["status"] != "finished" {
        return Err(format!("report json: {json}"));
    }
    std::fs::write(w.path("gen.smi"), "CCO\nc1ccccc1O\nnot a molecule\nCCO\n").unwrap();
    let eval = w.run(&["eval", "--input", w.path("gen.smi").to_str().unwrap(), "--dataset", "t1"])?;
    let m: serde_json::Value = serde_json::from_str(&eval).map_err(|e| format!("eval: {e}: {eval}"))?;
    if m["total"] != 4 || m["valid"] != 3 || m["unique"] != 2 {
        return Err(format!("eval: {eval}"));
    }
    let modify = w.run(&["modify", "--molecule", "c1ccccc1", "--instruction", "add a hydroxyl group"])?;
    let r: serde_json::Value = serde_json::from_str(&modify).map_err(|e| e.to_string())?;
    let dt = r["deltas"]["tpsa"].as_f64().unwrap_or(f64::NAN);
    if (dt - 20.23).abs() >= 0.01 {
        return Err(format!("modify: {modify}"));
    }
    Ok(())
}

/// Kills a campaign process after two persisted iterations, resumes it,
/// and compares the outcome with an uninterrupted run.
pub fn crash_resume(w: &Workspace) -> Result<(), String> {
    let input = w.path("actives.csv");
    w.run(&["prep", "--input", input.to_str().unwrap(), "--name", "t1"])?;
    let mut child = w
        .command(&["campaign", "run", "--dataset", "t1", "--id", "crash", "--throttle-ms", "400"])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let state = w.state_path("crash");
    let t = Instant::now();
    while persisted_iterations(&state) < 2 {
        if t.elapsed() > Duration::from_secs(120) {
            let _ = child.kill();
            return Err("campaign never reached two iterations".into());
        }
        if let Ok(Some(s)) = child.try_wait() {
            return Err(format!("campaign exited early: {s}"));
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    child.kill().map_err(|e| e.to_string())?;
    child.wait().map_err(|e| e.to_string())?;
    let at_kill = persisted_iterations(&state);
    if at_kill >= 5 {
        return Err(format!("campaign finished before the kill ({at_kill} iterations)"));
    }
    let resumed = w.run(&["campaign", "resume", "--id", "crash"])?;
    if !resumed.contains("Finished") {
        return Err(format!("resume: {resumed}"));
    }
    w.run(&["campaign", "run", "--dataset", "t1", "--id", "clean"])?;
    let a = w.run(&["campaign", "report", "--id", "crash"])?;
    let b = w.run(&["campaign", "report", "--id", "clean"])?;
    if a != b {
        return Err(format!("transcripts differ:\n{a}\n---\n{b}"));
    }
    let sa = std::fs::read_to_string(&state).unwrap();
    let sb = std::fs::read_to_string(w.state_path("clean")).unwrap();
    if sa != sb {
        return Err("final states differ".into());
    }
    Ok(())
}
