//! Result files, their read-back validation, and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Writes pretty JSON, then reads it back as `T` and checks the round trip
/// reproduces the same document.
pub fn write_json<T: Serialize + DeserializeOwned>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    ensure_parent(path)?;
    fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    let back: T = serde_json::from_str(&fs::read_to_string(path)?)
        .with_context(|| format!("{} does not match its schema", path.display()))?;
    if serde_json::to_string_pretty(&back)? + "\n" != text {
        bail!("{} does not round-trip", path.display());
    }
    Ok(())
}

/// Writes rows with a header line, then re-reads every record as `R`.
pub fn write_csv<R: Serialize + DeserializeOwned>(path: &Path, rows: &[R]) -> anyhow::Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    drop(w);
    let mut rd = csv::Reader::from_path(path)?;
    let mut count = 0;
    for rec in rd.deserialize::<R>() {
        rec.with_context(|| format!("{} does not match its schema", path.display()))?;
        count += 1;
    }
    if count != rows.len() {
        bail!("{}: wrote {} rows, read back {count}", path.display(), rows.len());
    }
    Ok(())
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    Ok(())
}

/// `dir/name.json` → `dir/name.manifest.json`.
pub fn manifest_path(primary: &Path) -> PathBuf {
    let stem = primary
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    primary.with_file_name(format!("{stem}.manifest.json"))
}

/// Everything needed to rerun a subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub subcommand: String,
    /// Subcommand arguments without `--out-dir` and `--workers`.
    pub args: Vec<String>,
    pub inputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub outputs: Vec<PathBuf>,
    pub exit_code: i32,
    pub elapsed_seconds: f64,
}

impl RunManifest {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let m: RunManifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if m.schema_version != SCHEMA_VERSION {
            bail!("unsupported manifest schema_version {}", m.schema_version);
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Serialize, Deserialize)]
    struct Row {
        x: f64,
        label: String,
    }

    #[test]
    fn manifest_sits_next_to_primary() {
        assert_eq!(
            manifest_path(Path::new("out/sweep.json")),
            PathBuf::from("out/sweep.manifest.json")
        );
    }

    #[test]
    fn awkward_floats_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/v.json");
        let v = vec![0.1 + 0.2, 5.000000195809594, 1e-300, -0.0, 2.0f64.sqrt()];
        write_json(&p, &v).unwrap();
        let back: Vec<f64> = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
        assert!(v.iter().zip(&back).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn non_finite_values_fail_validation() {
        let dir = tempfile::tempdir().unwrap();
        assert!(write_json(&dir.path().join("bad.json"), &vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn csv_rows_are_reread() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            Row {
                x: 1.5,
                label: "a,b".into(),
            },
            Row {
                x: -2.0,
                label: "c".into(),
            },
        ];
        write_csv(&dir.path().join("t.csv"), &rows).unwrap();
        let text = fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert!(text.starts_with("x,label\n"));
    }

    #[test]
    fn manifest_rejects_other_versions() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest {
            schema_version: 2,
            tool: "posform".into(),
            tool_version: "0".into(),
            subcommand: "price".into(),
            args: vec![],
            inputs: vec![],
            seed: None,
            workers: None,
            outputs: vec![],
            exit_code: 0,
            elapsed_seconds: 0.0,
        };
        let p = dir.path().join("m.json");
        write_json(&p, &m).unwrap();
        assert!(RunManifest::read(&p).is_err());
    }
}
