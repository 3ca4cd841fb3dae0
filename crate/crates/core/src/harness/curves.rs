use std::path::Path;

use super::{EvalReport, HarnessError};

pub const CURVE_HEADER: &str = "arch,n_antennas,snr_db,accuracy";

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub arch: String,
    pub n_antennas: usize,
    pub snr_db: f32,
    pub accuracy: f64,
}

/// One point per (report, SNR), sorted by arch, antenna count, then SNR.
pub fn curve_points(reports: &[EvalReport]) -> Vec<CurvePoint> {
    let mut points: Vec<CurvePoint> = reports
        .iter()
        .flat_map(|r| {
            r.by_snr.iter().map(|s| CurvePoint {
                arch: r.label.clone(),
                n_antennas: r.n_antennas,
                snr_db: s.snr_db,
                accuracy: s.accuracy(),
            })
        })
        .collect();
    points.sort_by(|a, b| {
        a.arch
            .cmp(&b.arch)
            .then(a.n_antennas.cmp(&b.n_antennas))
            .then(a.snr_db.total_cmp(&b.snr_db))
    });
    points
}

pub fn format_curves(reports: &[EvalReport]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for p in curve_points(reports) {
        out.push_str(&format!("{},{},{},{:.6}\n", p.arch, p.n_antennas, p.snr_db, p.accuracy));
    }
    out
}

pub fn export_curves(reports: &[EvalReport], path: impl AsRef<Path>) -> Result<(), HarnessError> {
    if reports.is_empty() {
        return Err(HarnessError::Config("no reports to export".into()));
    }
    let path = path.as_ref();
    std::fs::write(path, format_curves(reports)).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_curves(text: &str) -> Result<Vec<CurvePoint>, HarnessError> {
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err(HarnessError::Config("curve file: missing header".into()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let bad = || HarnessError::Config(format!("curve file line {}: `{line}`", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(CurvePoint {
                arch: f[0].to_string(),
                n_antennas: f[1].parse().map_err(|_| bad())?,
                snr_db: f[2].parse().map_err(|_| bad())?,
                accuracy: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
