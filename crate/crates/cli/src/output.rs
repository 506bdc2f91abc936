//! Output files and run metadata.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use qline::linalg::CMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::scenario::Scenario;
use crate::CliError;

/// Write via a temporary file and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

/// First 16 hex digits of the SHA-256 of the canonical scenario JSON.
pub fn scenario_hash(s: &Scenario) -> String {
    let text = serde_json::to_string(s).expect("scenario serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Row-major [re, im] pairs.
pub fn flat_complex(m: &CMatrix) -> Vec<[f64; 2]> {
    qline::linalg::flatten(m).iter().map(|z: &Complex64| [z.re, z.im]).collect()
}

pub fn fmt_or_nan(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.12e}"),
        None => "nan".into(),
    }
}
