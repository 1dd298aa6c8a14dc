//! Point-cloud and report file formats.
//!
//! Two cloud formats are supported: whitespace-separated XYZ (3 floats per
//! row, or 6 for position plus normal; rows may mix) and PLY in ascii or
//! binary-little-endian flavor. Normals are renormalized to unit length on
//! load and `normal_given` is set per point. Run reports are a documented
//! key/value text format with stable key order.

pub mod ply;
pub mod report;
pub mod xyz;

use std::fs;
use std::path::Path;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

pub use ply::{write_cloud, PlyFlavor};
pub use report::{parse_report, read_report, write_report, EvalReport};

/// Format tag of a parsed cloud file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    XyzAscii,
    PlyAscii,
    PlyBinaryLittleEndian,
}

/// Metadata of a parsed cloud file.
#[derive(Debug, Clone, Copy)]
pub struct CloudFile {
    pub format: CloudFormat,
    pub points: usize,
    pub has_normals: bool,
    pub has_colors: bool,
}

/// Parse a cloud from disk, detecting PLY by its magic bytes and treating
/// everything else as XYZ text.
pub fn parse_cloud(path: impl AsRef<Path>) -> Result<(PointCloud, CloudFile)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"ply") {
        ply::parse(&bytes)
    } else {
        xyz::parse(&bytes)
    }
}

/// Read a sidecar confidence file: one real in [0,1] per line, one line per
/// cloud point.
pub fn read_confidence_file(path: impl AsRef<Path>, expected: usize) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::with_capacity(expected);
    for (line_no, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: f64 = trimmed.parse().map_err(|_| Error::MalformedLine {
            row: line_no + 1,
            message: format!("expected a confidence value, got '{trimmed}'"),
        })?;
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::MalformedLine {
                row: line_no + 1,
                message: format!("confidence {value} outside [0,1]"),
            });
        }
        values.push(value);
    }
    if values.len() != expected {
        return Err(Error::SizeMismatch {
            expected,
            got: values.len(),
        });
    }
    Ok(values)
}
