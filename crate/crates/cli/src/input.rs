//! Input files: call curves (CSV) and versioned JSON documents.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use posform::pricing_form::CallCurve;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::output::SCHEMA_VERSION;

#[derive(Debug, Deserialize)]
struct CurveRow {
    strike: f64,
    price: f64,
}

/// CSV with header `strike,price`.
pub fn read_curve(path: &Path) -> anyhow::Result<CallCurve<f64>> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let headers = rd.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "strike" || &headers[1] != "price" {
        bail!("{}: expected header `strike,price`", path.display());
    }
    let mut strikes = Vec::new();
    let mut prices = Vec::new();
    for (i, rec) in rd.deserialize::<CurveRow>().enumerate() {
        let row = rec.with_context(|| format!("{}: bad record {}", path.display(), i + 1))?;
        strikes.push(row.strike);
        prices.push(row.price);
    }
    Ok(CallCurve::new(strikes, prices)?)
}

#[derive(Deserialize)]
struct Versioned<T> {
    #[serde(default)]
    schema_version: Option<u32>,
    #[serde(flatten)]
    body: T,
}

/// JSON document with an optional `schema_version` (must be 1 if present).
pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: Versioned<T> = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    match v.schema_version {
        None | Some(SCHEMA_VERSION) => Ok(v.body),
        Some(other) => bail!("{}: unsupported schema_version {other}", path.display()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve_file(text: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        fs::write(&p, text).unwrap();
        (dir, p)
    }

    #[test]
    fn reads_trimmed_curve() {
        let (_d, p) = curve_file("strike, price\n0, 100\n 50,60\n100 ,30\n");
        let c = read_curve(&p).unwrap();
        assert_eq!(c.strikes, vec![0.0, 50.0, 100.0]);
        assert_eq!(c.prices, vec![100.0, 60.0, 30.0]);
    }

    #[test]
    fn rejects_bad_headers_and_records() {
        for text in ["", "k,c\n0,1\n", "strike,price\n0,abc\n", "strike,price,extra\n0,1,2\n"] {
            let (_d, p) = curve_file(text);
            assert!(read_curve(&p).is_err(), "{text:?}");
        }
    }

    #[derive(Debug, Deserialize, PartialEq)]
    struct Doc {
        a: u32,
    }

    #[test]
    fn schema_version_is_optional_but_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.json");
        fs::write(&p, r#"{"a": 3}"#).unwrap();
        assert_eq!(read_json::<Doc>(&p).unwrap(), Doc { a: 3 });
        fs::write(&p, r#"{"schema_version": 1, "a": 3}"#).unwrap();
        assert_eq!(read_json::<Doc>(&p).unwrap(), Doc { a: 3 });
        fs::write(&p, r#"{"schema_version": 2, "a": 3}"#).unwrap();
        assert!(read_json::<Doc>(&p).is_err());
    }
}
