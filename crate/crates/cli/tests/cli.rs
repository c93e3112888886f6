mod common;

use std::fs;

use common::*;
use posform::payoff_space::Payoff;
use serde_json::json;
use tempfile::tempdir;

#[test]
fn validate_curve_exit_codes() {
    let dir = tempdir().unwrap();
    let ok = intro_curve(&dir.path().join("a5.csv"), 100.0, 5.0, 500);
    let bad = intro_curve(&dir.path().join("a120.csv"), 100.0, 120.0, 500);
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();

    assert_eq!(
        posform(
            dir.path(),
            &["validate-curve", "--curve", ok.to_str().unwrap(), "--spot", "100"]
        )
        .code,
        0
    );
    let r = posform(
        dir.path(),
        &["validate-curve", "--curve", bad.to_str().unwrap(), "--spot", "100"],
    );
    assert_eq!(r.code, 2);
    let verdict = read_json(&dir.path().join("validate-curve.json"));
    assert_eq!(verdict["ok"], json!(false));
    let r = posform(
        dir.path(),
        &["validate-curve", "--curve", empty.to_str().unwrap(), "--spot", "100"],
    );
    assert_eq!(r.code, 64);
    assert!(!r.stderr.is_empty());
}

#[test]
fn usage_errors_exit_64() {
    let dir = tempdir().unwrap();
    assert_eq!(posform(dir.path(), &["no-such-command"]).code, 64);
    assert_eq!(
        posform(dir.path(), &["martingality", "--config", "x.json"]).code,
        64,
        "seed is required"
    );
    assert_eq!(posform(dir.path(), &["--help"]).code, 0);
    let missing = posform(dir.path(), &["kernel-check", "--scenario", "missing.json"]);
    assert_eq!(missing.code, 64);
}

#[test]
fn implied_form_reports_representability() {
    let dir = tempdir().unwrap();
    for (a, representable) in [(0.0, true), (5.0, false)] {
        let curve = intro_curve(&dir.path().join(format!("c{a}.csv")), 100.0, a, 2000);
        let out = format!("form{a}.json");
        let r = posform(
            dir.path(),
            &[
                "implied-form",
                "--curve",
                curve.to_str().unwrap(),
                "--spot",
                "100",
                "--out",
                &out,
            ],
        );
        assert_eq!(r.code, 0, "{}", r.stderr);
        let form = read_json(&dir.path().join(&out));
        assert_eq!(form["representable_by_probability"], json!(representable));
        assert!((form["tail_limit"].as_f64().unwrap() - a).abs() < 1e-3);
        assert!(dir.path().join(format!("form{a}.manifest.json")).exists());
    }

    // the implied form prices the forward at the spot
    let payoff = payoff_file(&dir.path().join("fwd.json"), &Payoff::forward(0.0).unwrap());
    let form = dir.path().join("form5.json");
    let r = posform(
        dir.path(),
        &[
            "price",
            "--form",
            form.to_str().unwrap(),
            "--payoff",
            payoff.to_str().unwrap(),
        ],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let price = read_json(&dir.path().join("price.json"));
    // sampled density, truncated at the last strike
    assert!((price["price"].as_f64().unwrap() - 100.0).abs() < 1e-4, "{price}");
    assert_eq!(price["form_positive"], json!(true));
}

#[test]
fn implied_form_rejects_arbitrage() {
    let dir = tempdir().unwrap();
    let curve = intro_curve(&dir.path().join("bad.csv"), 100.0, 120.0, 2000);
    let r = posform(
        dir.path(),
        &["implied-form", "--curve", curve.to_str().unwrap(), "--spot", "100"],
    );
    assert_eq!(r.code, 2);
    let rejected = read_json(&dir.path().join("implied-form.rejected.json"));
    assert!(rejected["reason"].is_string());
    assert!(!dir.path().join("implied-form.json").exists());
}

#[test]
fn bounds_with_and_without_slope() {
    let dir = tempdir().unwrap();
    let target = payoff_file(&dir.path().join("call.json"), &Payoff::call(100.0).unwrap());
    for (slope, upper) in [(true, 100.0), (false, 50.0)] {
        let market = bond_stock_market(&dir.path().join(format!("m{slope}.json")), slope);
        let out = format!("bounds_{slope}.json");
        let r = posform(
            dir.path(),
            &[
                "bounds",
                "--market",
                market.to_str().unwrap(),
                "--target",
                target.to_str().unwrap(),
                "--out",
                &out,
            ],
        );
        assert_eq!(r.code, 0, "{}", r.stderr);
        let b = read_json(&dir.path().join(&out));
        assert!(b["lower"]["value"].as_f64().unwrap().abs() < 1e-8);
        assert!((b["upper"]["value"].as_f64().unwrap() - upper).abs() < 1e-8, "{b}");
        assert!(b["lower"]["residual"].as_f64().unwrap() < 1e-8);
        assert!(b["upper"]["residual"].as_f64().unwrap() < 1e-8);
    }
}

#[test]
fn bounds_detects_mispriced_market() {
    let dir = tempdir().unwrap();
    let market = write_json(
        &dir.path().join("m.json"),
        &json!({
            "grid": [0.0, 50.0, 100.0],
            "instruments": [
                {"name": "bond", "payoff": Payoff::<f64>::bond(), "price": 1.0},
                {"name": "stock", "payoff": Payoff::<f64>::forward(0.0).unwrap(), "price": 150.0},
            ],
        }),
    );
    let target = write_json(&dir.path().join("t.json"), &json!({"vector": [1.0, 1.0, 1.0]}));
    let r = posform(
        dir.path(),
        &[
            "bounds",
            "--market",
            market.to_str().unwrap(),
            "--target",
            target.to_str().unwrap(),
        ],
    );
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(dir.path().join("bounds.arbitrage.json").exists());
}

#[test]
fn schema_version_is_checked() {
    let dir = tempdir().unwrap();
    let cfg = write_json(
        &dir.path().join("sv.json"),
        &json!({"schema_version": 7, "preset": "benign"}),
    );
    let r = posform(
        dir.path(),
        &[
            "martingality",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "1",
            "--paths",
            "100",
        ],
    );
    assert_eq!(r.code, 64);
    assert!(r.stderr.contains("schema_version"), "{}", r.stderr);
}

#[test]
fn kernel_check_prices_the_call() {
    let dir = tempdir().unwrap();
    let sc = bs_scenario(&dir.path().join("sc.json"), 401, 100);
    let r = posform(dir.path(), &["kernel-check", "--scenario", sc.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = read_json(&dir.path().join("kernel-check.json"));
    assert!((rep["value_at_spot"].as_f64().unwrap() - 7.9656).abs() < 0.05, "{rep}");
    assert!(rep["short_rate_max"].as_f64().unwrap().abs() < 1e-10);
    assert!(rep["forward_leak"].as_f64().unwrap() < 1e-6);
    let csv = fs::read_to_string(dir.path().join("kernel-check.csv")).unwrap();
    assert!(csv.starts_with("coordinate,payoff,value\n"));
    assert_eq!(csv.lines().count(), 1 + 402);
}

#[test]
fn kernel_check_rejects_central_drift_on_coarse_grid() {
    let dir = tempdir().unwrap();
    let sc = write_json(
        &dir.path().join("sc.json"),
        &json!({
            "r": 0.5,
            "sigma": 0.05,
            "grid": {"kind": "uniform", "lo": 0.0, "hi": 400.0, "nodes": 9},
            "drift_scheme": "central",
            "horizon": 1.0,
            "steps": 10,
            "payoff": Payoff::<f64>::call(100.0).unwrap(),
            "spot": 100.0,
        }),
    );
    let r = posform(dir.path(), &["kernel-check", "--scenario", sc.to_str().unwrap()]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(dir.path().join("kernel-check.rejected.json").exists());
}

#[test]
fn out_dir_from_environment() {
    let dir = tempdir().unwrap();
    let curve = intro_curve(&dir.path().join("c.csv"), 100.0, 5.0, 500);
    let status = std::process::Command::new(BIN)
        .args(["validate-curve", "--curve", curve.to_str().unwrap(), "--spot", "100"])
        .env("POSFORM_OUT_DIR", dir.path().join("env_out"))
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(dir.path().join("env_out/validate-curve.json").exists());
    assert!(dir.path().join("env_out/validate-curve.manifest.json").exists());
}

#[test]
fn manifest_replays_bit_identically() {
    let dir = tempdir().unwrap();
    let cfg = preset_config(&dir.path().join("sv.json"), "explosive");
    let first = dir.path().join("first");
    let r = posform(
        &first,
        &[
            "barrier-sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--barriers",
            "1,2,4",
            "--steps",
            "8,16,32",
            "--seed",
            "3",
            "--paths",
            "3000",
            "--workers",
            "3",
        ],
    );
    assert_eq!(r.code, 2, "{}", r.stderr);
    let manifest = read_json(&first.join("barrier-sweep.manifest.json"));
    assert_eq!(manifest["seed"], json!(3));
    assert_eq!(manifest["exit_code"], json!(2));
    assert!(!manifest["args"].as_array().unwrap().iter().any(|a| a == "--workers"));

    let second = dir.path().join("second");
    let r = posform(
        &second,
        &[
            "replay",
            "--manifest",
            first.join("barrier-sweep.manifest.json").to_str().unwrap(),
            "--workers",
            "1",
        ],
    );
    assert_eq!(r.code, 2, "{}", r.stderr);
    for f in ["barrier-sweep.json", "barrier-sweep.csv"] {
        assert_eq!(
            fs::read(first.join(f)).unwrap(),
            fs::read(second.join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(
        read_json(&second.join("barrier-sweep.manifest.json"))["workers"],
        json!(1)
    );
}
