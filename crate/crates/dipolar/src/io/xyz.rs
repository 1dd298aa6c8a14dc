//! Whitespace-separated XYZ text: 3 floats per row for a bare position, 6
//! for position plus normal. Rows may mix; `#` lines are comments.

use std::fs;
use std::path::Path;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::io::{CloudFile, CloudFormat};

pub fn parse(bytes: &[u8]) -> Result<(PointCloud, CloudFile)> {
    let text = std::str::from_utf8(bytes).map_err(|_| {
        Error::UnsupportedFormat("xyz input is not valid utf-8".into())
    })?;
    let mut positions = Vec::new();
    let mut normals: Vec<Vec3> = Vec::new();
    let mut given: Vec<bool> = Vec::new();
    let mut any_normal = false;

    for (line_no, line) in text.lines().enumerate() {
        let row = line_no + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 3 && fields.len() != 6 {
            return Err(Error::MalformedLine {
                row,
                message: format!("expected 3 or 6 fields, got {}", fields.len()),
            });
        }
        let mut values = [0.0f64; 6];
        for (slot, field) in values.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| Error::MalformedLine {
                row,
                message: format!("'{field}' is not a number"),
            })?;
        }
        let p = Vec3::new(values[0], values[1], values[2]);
        if !p.is_finite() {
            return Err(Error::NonFiniteCoordinate { row });
        }
        positions.push(p);
        if fields.len() == 6 {
            let n = Vec3::new(values[3], values[4], values[5]);
            if !n.is_finite() {
                return Err(Error::NonFiniteCoordinate { row });
            }
            let unit = n.normalized().ok_or(Error::ZeroLengthNormal { row })?;
            normals.push(unit);
            given.push(true);
            any_normal = true;
        } else {
            normals.push(Vec3::ZERO);
            given.push(false);
        }
    }

    if positions.is_empty() {
        return Err(Error::EmptyCloud);
    }

    let n = positions.len();
    let cloud = PointCloud {
        positions,
        normals: if any_normal { normals } else { Vec::new() },
        confidence: Vec::new(),
        normal_given: if any_normal { given } else { Vec::new() },
        flipped_by_diffusion: vec![false; n],
    };
    let file = CloudFile {
        format: CloudFormat::XyzAscii,
        points: n,
        has_normals: any_normal,
        has_colors: false,
    };
    Ok((cloud, file))
}

/// Write XYZ text: 6 fields per row when the cloud has normals (unless
/// `strip_normals`), 3 otherwise.
pub fn write(cloud: &PointCloud, path: impl AsRef<Path>, strip_normals: bool) -> Result<()> {
    let path = path.as_ref();
    let with_normals = cloud.has_normals() && !strip_normals;
    let mut out = String::with_capacity(cloud.len() * 48);
    for i in 0..cloud.len() {
        let p = cloud.positions[i];
        if with_normals {
            let n = cloud.normals[i];
            out.push_str(&format!(
                "{} {} {} {} {} {}\n",
                p.x, p.y, p.z, n.x, n.y, n.z
            ));
        } else {
            out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_two_point_file() {
        let (cloud, file) = parse(b"0 0 0\n1 0 0\n").unwrap();
        assert_eq!(cloud.len(), 2);
        assert!(!file.has_normals);
        assert!(!cloud.has_normals());
    }

    #[test]
    fn six_field_row_renormalizes() {
        let (cloud, file) = parse(b"0 0 0 0 0 2\n").unwrap();
        assert_eq!(cloud.len(), 1);
        assert!(file.has_normals);
        assert_eq!(cloud.normals[0], Vec3::new(0.0, 0.0, 1.0));
        assert!(cloud.normal_given[0]);
    }

    #[test]
    fn mixed_rows_set_per_point_flags() {
        let (cloud, file) = parse(b"0 0 0 0 0 1\n1 0 0\n").unwrap();
        assert!(file.has_normals);
        assert!(cloud.normal_given[0]);
        assert!(!cloud.normal_given[1]);
        assert_eq!(cloud.normals[1], Vec3::ZERO);
    }

    #[test]
    fn wrong_field_count_reports_row() {
        let err = parse(b"0 0 0\n1 2\n").unwrap_err();
        assert!(matches!(err, Error::MalformedLine { row: 2, .. }), "{err}");
    }

    #[test]
    fn nan_is_rejected_with_row() {
        let err = parse(b"0 0 0\nnan 0 0\n").unwrap_err();
        assert!(matches!(err, Error::NonFiniteCoordinate { row: 2 }), "{err}");
    }

    #[test]
    fn zero_normal_is_rejected_with_row() {
        let err = parse(b"1 1 1 0 0 0\n").unwrap_err();
        assert!(matches!(err, Error::ZeroLengthNormal { row: 1 }), "{err}");
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let (cloud, _) = parse(b"# header\n\n0 0 0\n").unwrap();
        assert_eq!(cloud.len(), 1);
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(parse(b"# nothing\n"), Err(Error::EmptyCloud)));
    }
}
