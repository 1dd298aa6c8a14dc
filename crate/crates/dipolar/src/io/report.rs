//! Run reports: a line-oriented `key value` text format with a stable key
//! order, so two runs of the same configuration differ only in their
//! `time.*` lines.
//!
//! Layout, in order:
//!
//! ```text
//! dipolar-report v1
//! mode <orient|interpolate|eval|synth>
//! param.<name> <value>          (one line per parameter, insertion order)
//! points <n>
//! patches <n>
//! planar_patches <n>
//! flips.propagation <n>         (patches flipped during propagation)
//! flips.diffusion <n>           (points flipped by diffusion passes)
//! diffusion_passes_run <n>
//! low_confidence <n>
//! clamped_pairs <n>
//! degenerate_normals <n>
//! accuracy <percent>            (absent when no ground truth was scored)
//! global_sign <1|-1>            (absent with accuracy)
//! time.<phase> <seconds>        (one line per phase)
//! trace <seq> <patch> <interaction> <0|1>
//! diffusion_flip <point> <dot>
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::propagation::{DiffusionEntry, TraceEntry};

/// Everything a run reports. Counters default to zero; optional fields stay
/// absent in the file when unset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub mode: String,
    pub params: Vec<(String, String)>,
    pub points: usize,
    pub patches: usize,
    pub planar_patches: usize,
    pub flips_propagation: usize,
    pub flips_diffusion: usize,
    pub diffusion_passes_run: usize,
    pub low_confidence: usize,
    pub clamped_pairs: u64,
    pub degenerate_normals: usize,
    pub accuracy: Option<f64>,
    pub global_sign: Option<i8>,
    pub timings: Vec<(String, f64)>,
    pub trace: Vec<TraceEntry>,
    pub diffusion_flips: Vec<DiffusionEntry>,
}

impl EvalReport {
    pub fn new(mode: &str) -> Self {
        EvalReport {
            mode: mode.to_string(),
            ..Default::default()
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.params.push((key.to_string(), value.to_string()));
    }

    pub fn timing(&mut self, phase: &str, seconds: f64) {
        self.timings.push((phase.to_string(), seconds));
    }

    /// Render to the documented text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("dipolar-report v1\n");
        out.push_str(&format!("mode {}\n", self.mode));
        for (k, v) in &self.params {
            out.push_str(&format!("param.{k} {v}\n"));
        }
        out.push_str(&format!("points {}\n", self.points));
        out.push_str(&format!("patches {}\n", self.patches));
        out.push_str(&format!("planar_patches {}\n", self.planar_patches));
        out.push_str(&format!("flips.propagation {}\n", self.flips_propagation));
        out.push_str(&format!("flips.diffusion {}\n", self.flips_diffusion));
        out.push_str(&format!(
            "diffusion_passes_run {}\n",
            self.diffusion_passes_run
        ));
        out.push_str(&format!("low_confidence {}\n", self.low_confidence));
        out.push_str(&format!("clamped_pairs {}\n", self.clamped_pairs));
        out.push_str(&format!("degenerate_normals {}\n", self.degenerate_normals));
        if let Some(a) = self.accuracy {
            out.push_str(&format!("accuracy {a}\n"));
        }
        if let Some(s) = self.global_sign {
            out.push_str(&format!("global_sign {s}\n"));
        }
        for (phase, seconds) in &self.timings {
            out.push_str(&format!("time.{phase} {seconds}\n"));
        }
        for (seq, e) in self.trace.iter().enumerate() {
            out.push_str(&format!(
                "trace {seq} {} {} {}\n",
                e.patch,
                e.interaction,
                e.flipped as u8
            ));
        }
        for e in &self.diffusion_flips {
            out.push_str(&format!("diffusion_flip {} {}\n", e.point, e.dot));
        }
        out
    }
}

/// Write the report file.
pub fn write_report(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, report.to_text()).map_err(|e| Error::io(path, e))
}

/// Parse a report file back into its struct form.
pub fn read_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_report(&text)
}

pub fn parse_report(text: &str) -> Result<EvalReport> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "dipolar-report v1")) => {}
        _ => {
            return Err(Error::UnsupportedFormat(
                "not a dipolar-report v1 file".into(),
            ))
        }
    }
    let mut report = EvalReport::default();
    for (line_no, line) in lines {
        let row = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line.split_once(' ').ok_or_else(|| Error::MalformedLine {
            row,
            message: "expected 'key value'".into(),
        })?;
        let bad = |message: String| Error::MalformedLine { row, message };
        let parse_usize =
            |v: &str| v.parse::<usize>().map_err(|_| bad(format!("bad count '{v}'")));
        match key {
            "mode" => report.mode = value.to_string(),
            "points" => report.points = parse_usize(value)?,
            "patches" => report.patches = parse_usize(value)?,
            "planar_patches" => report.planar_patches = parse_usize(value)?,
            "flips.propagation" => report.flips_propagation = parse_usize(value)?,
            "flips.diffusion" => report.flips_diffusion = parse_usize(value)?,
            "diffusion_passes_run" => report.diffusion_passes_run = parse_usize(value)?,
            "low_confidence" => report.low_confidence = parse_usize(value)?,
            "clamped_pairs" => {
                report.clamped_pairs = value
                    .parse()
                    .map_err(|_| bad(format!("bad count '{value}'")))?
            }
            "degenerate_normals" => report.degenerate_normals = parse_usize(value)?,
            "accuracy" => {
                report.accuracy =
                    Some(value.parse().map_err(|_| bad(format!("bad accuracy '{value}'")))?)
            }
            "global_sign" => {
                report.global_sign =
                    Some(value.parse().map_err(|_| bad(format!("bad sign '{value}'")))?)
            }
            "trace" => {
                let fields: Vec<&str> = value.split(' ').collect();
                if fields.len() != 4 {
                    return Err(bad("trace needs 4 fields".into()));
                }
                report.trace.push(TraceEntry {
                    patch: fields[1]
                        .parse()
                        .map_err(|_| bad("bad trace patch".into()))?,
                    interaction: fields[2]
                        .parse()
                        .map_err(|_| bad("bad trace interaction".into()))?,
                    flipped: fields[3] == "1",
                });
            }
            "diffusion_flip" => {
                let (point, dot) = value
                    .split_once(' ')
                    .ok_or_else(|| bad("diffusion_flip needs 2 fields".into()))?;
                report.diffusion_flips.push(DiffusionEntry {
                    point: point.parse().map_err(|_| bad("bad point".into()))?,
                    dot: dot.parse().map_err(|_| bad("bad dot".into()))?,
                });
            }
            _ if key.starts_with("param.") => {
                report
                    .params
                    .push((key["param.".len()..].to_string(), value.to_string()));
            }
            _ if key.starts_with("time.") => {
                report.timings.push((
                    key["time.".len()..].to_string(),
                    value.parse().map_err(|_| bad(format!("bad time '{value}'")))?,
                ));
            }
            other => {
                return Err(bad(format!("unknown report key '{other}'")));
            }
        }
    }
    Ok(report)
}
