//! Trajectory logs and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gait::Phase;
use crate::geometry::SPINE_COUNT;
use crate::sim::Snapshot;

/// Marker in the phase column of the row that records a divergence.
pub const DIVERGED: &str = "DIVERGED";

/// One logged instant. Every float is already rounded to 9 significant
/// digits, so the CSV form reproduces it exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t_s: f64,
    pub position: [f64; 3],
    /// Roll, pitch, yaw in radians.
    pub euler: [f64; 3],
    pub velocity: [f64; 3],
    pub extensions_mm: [f64; SPINE_COUNT],
    pub contact_count: usize,
    pub stability_margin_m: f64,
    pub phase: Phase,
}

impl TrajectoryRow {
    pub fn from_snapshot(s: &Snapshot) -> Self {
        Self {
            t_s: round9(s.time_s),
            position: s.position.map(round9).into(),
            euler: [round9(s.euler.roll), round9(s.euler.pitch), round9(s.euler.yaw)],
            velocity: s.velocity.map(round9).into(),
            extensions_mm: s.extensions_mm.map(round9),
            contact_count: s.contact_count,
            stability_margin_m: round9(s.stability_margin_m),
            phase: s.phase,
        }
    }
}

/// The point where a run stopped because the integrator blew up.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub t_s: f64,
    /// Free text without commas or newlines.
    pub message: String,
}

impl Failure {
    pub fn new(t_s: f64, message: &str) -> Self {
        Self { t_s: round9(t_s), message: message.replace([',', '\n', '\r'], ";") }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub rows: Vec<TrajectoryRow>,
    pub failure: Option<Failure>,
}

pub fn csv_header() -> String {
    let mut cols: Vec<String> = ["t_s", "x_m", "y_m", "z_m", "roll_rad", "pitch_rad", "yaw_rad", "vx_m_s", "vy_m_s", "vz_m_s"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend((0..SPINE_COUNT).map(|i| format!("ext{i}_mm")));
    cols.extend(["contact_count", "stability_margin_m", "phase"].map(String::from));
    cols.join(",")
}

pub const CSV_COLUMNS: usize = 10 + SPINE_COUNT + 3;

/// Format like C's `%.9g`.
pub fn fmt9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.') } else { s }
}

/// Round to the value that `fmt9` prints.
pub fn round9(x: f64) -> f64 {
    if x.is_finite() { fmt9(x).parse().expect("fmt9 output parses") } else { x }
}

impl TrajectoryLog {
    pub fn to_csv(&self) -> String {
        let mut out = csv_header();
        out.push('\n');
        for r in &self.rows {
            let mut fields: Vec<String> = Vec::with_capacity(CSV_COLUMNS);
            fields.push(fmt9(r.t_s));
            fields.extend(r.position.iter().chain(&r.euler).chain(&r.velocity).chain(&r.extensions_mm).map(|v| fmt9(*v)));
            fields.push(r.contact_count.to_string());
            fields.push(fmt9(r.stability_margin_m));
            fields.push(r.phase.as_str().to_string());
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        if let Some(f) = &self.failure {
            let _ = write!(out, "{},{}", fmt9(f.t_s), f.message);
            out.push_str(&",".repeat(CSV_COLUMNS - 2));
            out.push_str(DIVERGED);
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(csv_header().as_str()) {
            return Err(Error::Parse("missing or unexpected CSV header".into()));
        }
        let mut log = TrajectoryLog::default();
        for (n, line) in lines.enumerate() {
            let row_no = n + 2;
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != CSV_COLUMNS {
                return Err(Error::Parse(format!("line {row_no}: expected {CSV_COLUMNS} columns, found {}", cols.len())));
            }
            if log.failure.is_some() {
                return Err(Error::Parse(format!("line {row_no}: row after the divergence record")));
            }
            let num = |i: usize| -> Result<f64> {
                cols[i].parse().map_err(|_| Error::Parse(format!("line {row_no} column {}: bad number `{}`", i + 1, cols[i])))
            };
            if cols[CSV_COLUMNS - 1] == DIVERGED {
                log.failure = Some(Failure { t_s: num(0)?, message: cols[1].to_string() });
                continue;
            }
            let mut v = [0.0; 10 + SPINE_COUNT];
            for (i, slot) in v.iter_mut().enumerate() {
                *slot = num(i)?;
            }
            let phase = Phase::parse(cols[CSV_COLUMNS - 1])
                .ok_or_else(|| Error::Parse(format!("line {row_no}: unknown phase `{}`", cols[CSV_COLUMNS - 1])))?;
            let contact_count = cols[10 + SPINE_COUNT]
                .parse()
                .map_err(|_| Error::Parse(format!("line {row_no}: bad contact count")))?;
            log.rows.push(TrajectoryRow {
                t_s: v[0],
                position: [v[1], v[2], v[3]],
                euler: [v[4], v[5], v[6]],
                velocity: [v[7], v[8], v[9]],
                extensions_mm: std::array::from_fn(|i| v[10 + i]),
                contact_count,
                stability_margin_m: num(11 + SPINE_COUNT)?,
                phase,
            });
        }
        Ok(log)
    }
}

pub fn write_csv(log: &TrajectoryLog, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, log.to_csv()).map_err(|e| Error::Io { path: path.display().to_string(), reason: e.to_string() })
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<TrajectoryLog> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), reason: e.to_string() })?;
    TrajectoryLog::parse_csv(&text)
}
