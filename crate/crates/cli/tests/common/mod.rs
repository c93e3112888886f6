#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use posform::payoff_space::{GrowthDirection, Payoff};
use serde_json::{json, Value};

pub const BIN: &str = env!("CARGO_BIN_EXE_posform");

pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the binary with `--out-dir dir` and no inherited output directory.
pub fn posform(dir: &Path, args: &[&str]) -> Outcome {
    let out = Command::new(BIN)
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .env_remove("POSFORM_OUT_DIR")
        .output()
        .expect("spawn posform");
    Outcome {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn ensure_parent(path: &Path) {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).unwrap();
    }
}

pub fn write_json(path: &Path, v: &Value) -> PathBuf {
    ensure_parent(path);
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path.to_path_buf()
}

/// `Call(K) = a + (S0 - a)·exp(-K/S0)` on integer strikes `0..=k_max`.
pub fn intro_curve(path: &Path, spot: f64, a: f64, k_max: usize) -> PathBuf {
    let mut s = String::from("strike,price\n");
    for i in 0..=k_max {
        let k = i as f64;
        s.push_str(&format!("{k},{:?}\n", a + (spot - a) * (-k / spot).exp()));
    }
    ensure_parent(path);
    fs::write(path, s).unwrap();
    path.to_path_buf()
}

pub fn bond_stock_market(path: &Path, slope: bool) -> PathBuf {
    let directions: Vec<GrowthDirection> = if slope {
        vec![GrowthDirection::LinearAtInfinity]
    } else {
        vec![]
    };
    write_json(
        path,
        &json!({
            "schema_version": 1,
            "grid": [0.0, 50.0, 100.0, 150.0, 200.0],
            "directions": directions,
            "instruments": [
                {"name": "bond", "payoff": Payoff::<f64>::bond(), "price": 1.0},
                {"name": "stock", "payoff": Payoff::<f64>::forward(0.0).unwrap(), "price": 100.0},
            ],
        }),
    )
}

pub fn payoff_file(path: &Path, p: &Payoff<f64>) -> PathBuf {
    write_json(path, &serde_json::to_value(p).unwrap())
}

/// Black–Scholes call scenario on a uniform grid, r = 0.
pub fn bs_scenario(path: &Path, nodes: usize, steps: usize) -> PathBuf {
    write_json(
        path,
        &json!({
            "schema_version": 1,
            "r": 0.0,
            "sigma": 0.2,
            "grid": {"kind": "uniform", "lo": 0.0, "hi": 800.0, "nodes": nodes},
            "horizon": 1.0,
            "steps": steps,
            "payoff": Payoff::<f64>::call(100.0).unwrap(),
            "spot": 100.0,
        }),
    )
}

pub fn preset_config(path: &Path, preset: &str) -> PathBuf {
    write_json(path, &json!({"schema_version": 1, "preset": preset}))
}
