//! CSV and JSON writers. Every float is written with 17 significant digits
//! so that outputs round-trip exactly.

use std::fs;
use std::path::Path;

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{BenchError, Result};

/// `d.dddddddddddddddde±x`; `NaN`, `inf` and `-inf` for non-finite values.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// A float serialized to JSON with 17 significant digits, or `null` when
/// not finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F17(pub f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            RawValue::from_string(format_float(self.0))
                .map_err(serde::ser::Error::custom)?
                .serialize(serializer)
        } else {
            serializer.serialize_none()
        }
    }
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))
}

/// Writes rows of already formatted fields.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let csv_err = |source| BenchError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer.write_record(header).map_err(csv_err)?;
    for row in rows {
        writer.write_record(row).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| BenchError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

/// Crate versions recorded in every metadata file.
#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub landmark_bench: &'static str,
    pub landmark_core: &'static str,
}

impl Versions {
    pub fn current() -> Self {
        Versions {
            landmark_bench: env!("CARGO_PKG_VERSION"),
            landmark_core: landmark_core::VERSION,
        }
    }
}
