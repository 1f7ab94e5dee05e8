//! File emitters for render and scan results.
//!
//! PGM is plain-text P2, 16-bit range, scaled so the brightest bin maps to
//! 65535; rows are written top edge first, matching [`IrradianceMap`]
//! storage order. Scan CSVs are exactly one header line plus one line per
//! sample point, so a 3-point scan is a 4-line file.

use crate::experiments::ScanResult;
use crate::tracer::IrradianceMap;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("scan has no points")]
    EmptyScan,
    #[error("line {line}: malformed csv")]
    Malformed { line: usize },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub fn pgm_string(map: &IrradianceMap) -> String {
    let peak = map.max_bin();
    let mut out = format!("P2\n{} {}\n65535\n", map.bins_u, map.bins_v);
    for row in map.data.chunks(map.bins_u) {
        let mut sep = "";
        for &value in row {
            let level = if peak > 0.0 {
                (value / peak * 65535.0).round() as u32
            } else {
                0
            };
            write!(out, "{sep}{level}").expect("string write");
            sep = " ";
        }
        out.push('\n');
    }
    out
}

pub fn write_pgm(path: &Path, map: &IrradianceMap) -> Result<(), OutputError> {
    std::fs::write(path, pgm_string(map))?;
    Ok(())
}

pub fn csv_string(scan: &ScanResult) -> Result<String, OutputError> {
    if scan.points.is_empty() {
        return Err(OutputError::EmptyScan);
    }
    let mut out = String::from("parameter,value\n");
    for (x, y) in &scan.points {
        writeln!(out, "{x:.12e},{y:.12e}").expect("string write");
    }
    Ok(out)
}

pub fn write_csv(path: &Path, scan: &ScanResult) -> Result<(), OutputError> {
    std::fs::write(path, csv_string(scan)?)?;
    Ok(())
}

/// Reads back a scan CSV produced by [`csv_string`].
pub fn parse_scan_csv(text: &str) -> Result<Vec<(f64, f64)>, OutputError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "parameter,value")) => {}
        _ => return Err(OutputError::Malformed { line: 1 }),
    }
    let mut points = Vec::new();
    for (i, line) in lines {
        let malformed = || OutputError::Malformed { line: i + 1 };
        let (x, y) = line.split_once(',').ok_or_else(malformed)?;
        let x: f64 = x.parse().map_err(|_| malformed())?;
        let y: f64 = y.parse().map_err(|_| malformed())?;
        points.push((x, y));
    }
    if points.is_empty() {
        return Err(OutputError::EmptyScan);
    }
    Ok(points)
}
