//! File formats: the GFR1 float raster, PNG encodings for image-like
//! data, the gloss-curve CSV, and checksummed manifests.
//!
//! Everything here is bit-exact and deterministic: identical data always
//! serializes to identical bytes.

pub mod gfr;
pub mod png_io;

use crate::error::{GlossError, Result};
use crate::fabrication::CurveSample;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

/// Reads the two-column gloss calibration CSV. The `print_value,g60`
/// header is required.
pub fn read_curve_csv(path: &Path) -> Result<Vec<CurveSample>> {
    if !path.exists() {
        return Err(GlossError::MissingInput {
            path: path.to_path_buf(),
        });
    }
    let mut reader = csv::Reader::from_path(path)?;
    {
        let headers = reader.headers()?;
        if headers.len() < 2 || &headers[0] != "print_value" || &headers[1] != "g60" {
            return Err(GlossError::InvalidFormat(format!(
                "gloss curve CSV must start with a 'print_value,g60' header, got {:?}",
                headers
            )));
        }
    }
    let mut samples = Vec::new();
    for record in reader.deserialize() {
        let (print_value, g60): (f64, f64) = record?;
        samples.push(CurveSample { print_value, g60 });
    }
    Ok(samples)
}

pub fn write_curve_csv(path: &Path, samples: &[CurveSample]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["print_value", "g60"])?;
    for s in samples {
        writer.write_record([s.print_value.to_string(), s.g60.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// SHA-256 of a file, hex encoded.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Checksums of every regular file directly inside `dir`, keyed by file
/// name (sorted by construction).
pub fn dir_checksums(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut entries: Vec<_> = fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|e| e.path().is_file())
        .collect();
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let name = e.file_name().to_string_lossy().into_owned();
        out.insert(name, file_sha256(&e.path())?);
    }
    Ok(out)
}

/// SHA-256 over a serializable value's canonical JSON, for provenance.
pub fn json_sha256<T: serde::Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Serializes to pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(GlossError::MissingInput {
            path: path.to_path_buf(),
        });
    }
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabrication::CurveSample;

    #[test]
    fn curve_csv_round_trip_and_header_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let samples = vec![
            CurveSample {
                print_value: 0.0,
                g60: 2.5,
            },
            CurveSample {
                print_value: 50.0,
                g60: 31.0,
            },
            CurveSample {
                print_value: 100.0,
                g60: 88.0,
            },
        ];
        write_curve_csv(&path, &samples).unwrap();
        let back = read_curve_csv(&path).unwrap();
        assert_eq!(back, samples);

        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(
            read_curve_csv(&path),
            Err(GlossError::InvalidFormat(_))
        ));

        assert!(matches!(
            read_curve_csv(&dir.path().join("absent.csv")),
            Err(GlossError::MissingInput { .. })
        ));
    }

    #[test]
    fn checksums_are_stable() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.bin"), b"hello").unwrap();
        std::fs::write(dir.path().join("b.bin"), b"world").unwrap();
        let c1 = dir_checksums(dir.path()).unwrap();
        let c2 = dir_checksums(dir.path()).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(c1.len(), 2);
        assert_eq!(
            c1["a.bin"],
            "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        );
    }
}
