//! PLY reader and writer (ascii and binary-little-endian).
//!
//! The reader consumes the vertex element (positions, optional normals,
//! optional colors) and ignores any elements after it. Big-endian files
//! are rejected. The writer emits double-precision properties so binary
//! round trips preserve positions bit-exactly.

use std::fs;
use std::path::Path;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::evaluation;
use crate::geometry::Vec3;
use crate::io::{CloudFile, CloudFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFlavor {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn read(self, bytes: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => bytes[0] as i8 as f64,
            ScalarType::U8 => bytes[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            ScalarType::I32 => {
                i32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64
            }
            ScalarType::U32 => {
                u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64
            }
            ScalarType::F32 => {
                f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64
            }
            ScalarType::F64 => f64::from_le_bytes([
                bytes[0], bytes[1], bytes[2], bytes[3], bytes[4], bytes[5], bytes[6], bytes[7],
            ]),
        }
    }
}

struct VertexLayout {
    properties: Vec<(String, ScalarType)>,
    x: usize,
    y: usize,
    z: usize,
    nx: Option<usize>,
    ny: Option<usize>,
    nz: Option<usize>,
    has_colors: bool,
}

impl VertexLayout {
    fn stride(&self) -> usize {
        self.properties.iter().map(|(_, t)| t.size()).sum()
    }

    fn has_normals(&self) -> bool {
        self.nx.is_some() && self.ny.is_some() && self.nz.is_some()
    }
}

pub fn parse(bytes: &[u8]) -> Result<(PointCloud, CloudFile)> {
    // Header is ascii text terminated by an `end_header` line.
    let header_end = find_header_end(bytes)?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::UnsupportedFormat("ply header is not valid utf-8".into()))?;

    let mut flavor: Option<PlyFlavor> = None;
    let mut vertex_count: Option<usize> = None;
    let mut layout = VertexLayout {
        properties: Vec::new(),
        x: usize::MAX,
        y: usize::MAX,
        z: usize::MAX,
        nx: None,
        ny: None,
        nz: None,
        has_colors: false,
    };
    let mut in_vertex_element = false;
    let mut saw_vertex_element = false;

    for line in header.lines() {
        let line = line.trim_end_matches('\r');
        let mut words = line.split_whitespace();
        match words.next() {
            Some("ply") | Some("comment") | Some("obj_info") | None => {}
            Some("format") => {
                flavor = Some(match words.next() {
                    Some("ascii") => PlyFlavor::Ascii,
                    Some("binary_little_endian") => PlyFlavor::BinaryLittleEndian,
                    Some("binary_big_endian") => {
                        return Err(Error::UnsupportedFormat(
                            "big-endian ply is not supported".into(),
                        ))
                    }
                    other => {
                        return Err(Error::UnsupportedFormat(format!(
                            "unknown ply format {other:?}"
                        )))
                    }
                });
            }
            Some("element") => {
                let name = words.next().unwrap_or_default();
                let count: usize = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| Error::UnsupportedFormat("bad element line".into()))?;
                if name == "vertex" {
                    if saw_vertex_element {
                        return Err(Error::UnsupportedFormat(
                            "multiple vertex elements".into(),
                        ));
                    }
                    vertex_count = Some(count);
                    in_vertex_element = true;
                    saw_vertex_element = true;
                } else {
                    in_vertex_element = false;
                    if !saw_vertex_element {
                        return Err(Error::UnsupportedFormat(format!(
                            "element '{name}' precedes vertex data"
                        )));
                    }
                }
            }
            Some("property") => {
                if !in_vertex_element {
                    continue; // trailing elements are never read
                }
                let type_name = words.next().unwrap_or_default();
                if type_name == "list" {
                    return Err(Error::UnsupportedFormat(
                        "list property on vertex element".into(),
                    ));
                }
                let scalar = ScalarType::from_name(type_name).ok_or_else(|| {
                    Error::UnsupportedFormat(format!("unknown property type '{type_name}'"))
                })?;
                let prop_name = words.next().unwrap_or_default().to_string();
                let slot = layout.properties.len();
                match prop_name.as_str() {
                    "x" => layout.x = slot,
                    "y" => layout.y = slot,
                    "z" => layout.z = slot,
                    "nx" => layout.nx = Some(slot),
                    "ny" => layout.ny = Some(slot),
                    "nz" => layout.nz = Some(slot),
                    "red" | "green" | "blue" => layout.has_colors = true,
                    _ => {}
                }
                layout.properties.push((prop_name, scalar));
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(Error::UnsupportedFormat(format!(
                    "unexpected header keyword '{other}'"
                )))
            }
        }
    }

    let flavor = flavor.ok_or_else(|| Error::UnsupportedFormat("missing format line".into()))?;
    let vertex_count =
        vertex_count.ok_or_else(|| Error::UnsupportedFormat("missing vertex element".into()))?;
    if layout.x == usize::MAX || layout.y == usize::MAX || layout.z == usize::MAX {
        return Err(Error::UnsupportedFormat(
            "vertex element lacks x/y/z properties".into(),
        ));
    }
    if vertex_count == 0 {
        return Err(Error::EmptyCloud);
    }

    let body = &bytes[header_end..];
    let values = match flavor {
        PlyFlavor::Ascii => parse_ascii_rows(body, vertex_count, layout.properties.len())?,
        PlyFlavor::BinaryLittleEndian => parse_binary_rows(body, vertex_count, &layout)?,
    };

    let has_normals = layout.has_normals();
    let mut positions = Vec::with_capacity(vertex_count);
    let mut normals = Vec::with_capacity(if has_normals { vertex_count } else { 0 });
    for (row_index, row) in values.chunks(layout.properties.len()).enumerate() {
        let row_no = row_index + 1;
        let p = Vec3::new(row[layout.x], row[layout.y], row[layout.z]);
        if !p.is_finite() {
            return Err(Error::NonFiniteCoordinate { row: row_no });
        }
        positions.push(p);
        if has_normals {
            let n = Vec3::new(
                row[layout.nx.unwrap()],
                row[layout.ny.unwrap()],
                row[layout.nz.unwrap()],
            );
            if !n.is_finite() {
                return Err(Error::NonFiniteCoordinate { row: row_no });
            }
            normals.push(n.normalized().ok_or(Error::ZeroLengthNormal { row: row_no })?);
        }
    }

    let n = positions.len();
    let cloud = PointCloud {
        positions,
        normals,
        confidence: Vec::new(),
        normal_given: if has_normals { vec![true; n] } else { Vec::new() },
        flipped_by_diffusion: vec![false; n],
    };
    let file = CloudFile {
        format: match flavor {
            PlyFlavor::Ascii => CloudFormat::PlyAscii,
            PlyFlavor::BinaryLittleEndian => CloudFormat::PlyBinaryLittleEndian,
        },
        points: n,
        has_normals,
        has_colors: layout.has_colors,
    };
    Ok((cloud, file))
}

fn find_header_end(bytes: &[u8]) -> Result<usize> {
    let needle = b"end_header";
    let mut i = 0;
    while i + needle.len() <= bytes.len() {
        if &bytes[i..i + needle.len()] == needle {
            // Consume through the end of that line.
            let mut j = i + needle.len();
            while j < bytes.len() && bytes[j] != b'\n' {
                j += 1;
            }
            return Ok((j + 1).min(bytes.len()));
        }
        i += 1;
    }
    Err(Error::UnsupportedFormat("missing end_header".into()))
}

fn parse_ascii_rows(body: &[u8], rows: usize, columns: usize) -> Result<Vec<f64>> {
    let text = std::str::from_utf8(body)
        .map_err(|_| Error::UnsupportedFormat("ascii ply body is not valid utf-8".into()))?;
    let mut values = Vec::with_capacity(rows * columns);
    let mut row_no = 0usize;
    for line in text.lines() {
        if row_no == rows {
            break; // trailing elements (faces etc.) are ignored
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        row_no += 1;
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != columns {
            return Err(Error::MalformedLine {
                row: row_no,
                message: format!("expected {columns} values, got {}", fields.len()),
            });
        }
        for field in fields {
            values.push(field.parse().map_err(|_| Error::MalformedLine {
                row: row_no,
                message: format!("'{field}' is not a number"),
            })?);
        }
    }
    if row_no != rows {
        return Err(Error::MalformedLine {
            row: row_no + 1,
            message: format!("header promises {rows} vertices, data ends early"),
        });
    }
    Ok(values)
}

fn parse_binary_rows(body: &[u8], rows: usize, layout: &VertexLayout) -> Result<Vec<f64>> {
    let stride = layout.stride();
    if body.len() < rows * stride {
        let complete = body.len() / stride;
        return Err(Error::MalformedLine {
            row: complete + 1,
            message: format!("header promises {rows} vertices, data ends early"),
        });
    }
    let mut values = Vec::with_capacity(rows * layout.properties.len());
    for row in 0..rows {
        let mut offset = row * stride;
        for (_, scalar) in &layout.properties {
            values.push(scalar.read(&body[offset..offset + scalar.size()]));
            offset += scalar.size();
        }
    }
    Ok(values)
}

/// Write the cloud as PLY with double-precision positions and normals.
///
/// The cloud must carry normals. With `colorize`, per-point colors mark
/// agreement with the given ground truth after global-sign resolution:
/// correct points gray (128,128,128), incorrect points red (255,0,0).
pub fn write_cloud(
    cloud: &PointCloud,
    path: impl AsRef<Path>,
    flavor: PlyFlavor,
    colorize: Option<&PointCloud>,
) -> Result<()> {
    let path = path.as_ref();
    if !cloud.has_normals() {
        return Err(Error::MissingNormals);
    }
    let colors: Option<Vec<bool>> = match colorize {
        Some(truth) => {
            let a = evaluation::accuracy(cloud, truth)?;
            let sign = a.sign as f64;
            Some(
                cloud
                    .normals
                    .iter()
                    .zip(&truth.normals)
                    .map(|(e, t)| sign * e.dot(*t) > 0.0)
                    .collect(),
            )
        }
        None => None,
    };

    let mut out: Vec<u8> = Vec::with_capacity(cloud.len() * 56 + 256);
    out.extend_from_slice(b"ply\n");
    out.extend_from_slice(match flavor {
        PlyFlavor::Ascii => b"format ascii 1.0\n".as_slice(),
        PlyFlavor::BinaryLittleEndian => b"format binary_little_endian 1.0\n".as_slice(),
    });
    out.extend_from_slice(format!("element vertex {}\n", cloud.len()).as_bytes());
    for name in ["x", "y", "z", "nx", "ny", "nz"] {
        out.extend_from_slice(format!("property double {name}\n").as_bytes());
    }
    if colors.is_some() {
        for name in ["red", "green", "blue"] {
            out.extend_from_slice(format!("property uchar {name}\n").as_bytes());
        }
    }
    out.extend_from_slice(b"end_header\n");

    for i in 0..cloud.len() {
        let p = cloud.positions[i];
        let n = cloud.normals[i];
        let rgb = colors.as_ref().map(|c| {
            if c[i] {
                [128u8, 128, 128]
            } else {
                [255u8, 0, 0]
            }
        });
        match flavor {
            PlyFlavor::Ascii => {
                let mut line = format!("{} {} {} {} {} {}", p.x, p.y, p.z, n.x, n.y, n.z);
                if let Some([r, g, b]) = rgb {
                    line.push_str(&format!(" {r} {g} {b}"));
                }
                line.push('\n');
                out.extend_from_slice(line.as_bytes());
            }
            PlyFlavor::BinaryLittleEndian => {
                for v in [p.x, p.y, p.z, n.x, n.y, n.z] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                if let Some(rgb) = rgb {
                    out.extend_from_slice(&rgb);
                }
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
