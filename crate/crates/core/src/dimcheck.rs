//! Relative dimensional error of printed samples against the nominal layout.
//!
//! Measurements come as CSV rows `sample,feature,measured_mm`; `#` lines are
//! comments. Each feature id must name a layout feature.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::design::PlanarLayout;

/// Rows above this absolute relative error are flagged.
pub const FLAG_THRESHOLD_PCT: f64 = 50.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DimError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown feature '{feature}'")]
    UnknownFeature { line: usize, feature: String },
    #[error("no measurements")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub sample: String,
    pub feature: String,
    pub measured_mm: f64,
    pub line: usize,
}

pub fn parse_measurements(text: &str) -> Result<Vec<Measurement>, DimError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') || l.starts_with("sample,") {
            continue;
        }
        let cols: Vec<&str> = l.split(',').map(str::trim).collect();
        let [sample, feature, value] = cols[..] else {
            return Err(DimError::Parse {
                line,
                message: format!("expected 3 columns, found {}", cols.len()),
            });
        };
        let measured_mm: f64 = value
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v >= 0.0)
            .ok_or_else(|| DimError::Parse {
                line,
                message: format!("bad length '{value}'"),
            })?;
        out.push(Measurement {
            sample: sample.to_string(),
            feature: feature.to_string(),
            measured_mm,
            line,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimErrorRow {
    pub sample: String,
    pub feature: String,
    pub nominal_mm: f64,
    pub measured_mm: f64,
    /// Signed, percent of nominal.
    pub error_pct: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub sample: String,
    pub features: usize,
    pub mean_abs_error_pct: f64,
    pub max_abs_error_pct: f64,
    pub worst_feature: String,
    pub flagged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimErrorReport {
    pub rows: Vec<DimErrorRow>,
    pub samples: Vec<SampleSummary>,
}

impl DimErrorReport {
    pub fn sample(&self, name: &str) -> Option<&SampleSummary> {
        self.samples.iter().find(|s| s.sample == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample,feature,nominal_mm,measured_mm,error_pct,flagged\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{}",
                r.sample, r.feature, r.nominal_mm, r.measured_mm, r.error_pct, r.flagged
            );
        }
        out.push_str("\nsample,features,mean_abs_error_pct,max_abs_error_pct,worst_feature,flagged\n");
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{},{}",
                s.sample, s.features, s.mean_abs_error_pct, s.max_abs_error_pct, s.worst_feature, s.flagged
            );
        }
        out
    }
}

/// Per-row relative errors and per-sample mean and max of their magnitudes.
/// Samples keep their first-appearance order.
pub fn dim_error_report(layout: &PlanarLayout, measured: &[Measurement]) -> Result<DimErrorReport, DimError> {
    if measured.is_empty() {
        return Err(DimError::Empty);
    }
    let mut rows = Vec::with_capacity(measured.len());
    for m in measured {
        let f = layout.feature(&m.feature).ok_or_else(|| DimError::UnknownFeature {
            line: m.line,
            feature: m.feature.clone(),
        })?;
        let nominal = f.nominal_length();
        let error_pct = (m.measured_mm - nominal) / nominal * 100.0;
        rows.push(DimErrorRow {
            sample: m.sample.clone(),
            feature: m.feature.clone(),
            nominal_mm: nominal,
            measured_mm: m.measured_mm,
            error_pct,
            flagged: error_pct.abs() > FLAG_THRESHOLD_PCT,
        });
    }
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&DimErrorRow>> = BTreeMap::new();
    for r in &rows {
        if !groups.contains_key(r.sample.as_str()) {
            order.push(&r.sample);
        }
        groups.entry(&r.sample).or_default().push(r);
    }
    let samples = order
        .iter()
        .map(|name| {
            let g = &groups[name];
            let worst = g
                .iter()
                .max_by(|a, b| a.error_pct.abs().total_cmp(&b.error_pct.abs()))
                .expect("group is non-empty");
            SampleSummary {
                sample: name.to_string(),
                features: g.len(),
                mean_abs_error_pct: g.iter().map(|r| r.error_pct.abs()).sum::<f64>() / g.len() as f64,
                max_abs_error_pct: worst.error_pct.abs(),
                worst_feature: worst.feature.clone(),
                flagged: g.iter().filter(|r| r.flagged).count(),
            }
        })
        .collect();
    Ok(DimErrorReport { rows, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{patch_layout, synthesize_patch};

    fn layout() -> PlanarLayout {
        patch_layout(&synthesize_patch(3e9, 2.7, 1.5).unwrap(), 10.0).unwrap()
    }

    #[test]
    fn nominal_measurements_have_zero_error() {
        let lay = layout();
        let text: String = lay
            .features
            .iter()
            .map(|f| format!("s1,{},{}\n", f.id, f.nominal_length()))
            .collect();
        let rep = dim_error_report(&lay, &parse_measurements(&text).unwrap()).unwrap();
        assert_eq!(rep.samples.len(), 1);
        assert!(rep.samples[0].max_abs_error_pct < 1e-12);
        assert!(rep.rows.iter().all(|r| r.error_pct.abs() < 1e-12 && !r.flagged));
    }

    #[test]
    fn groups_and_flags() {
        let lay = layout();
        let w = lay.feature("patch_width").unwrap().nominal_length();
        let text = format!("sample,feature,measured_mm\nb,patch_width,{}\na,patch_width,{}\n", w * 1.1, w * 0.4);
        let rep = dim_error_report(&lay, &parse_measurements(&text).unwrap()).unwrap();
        assert_eq!(rep.samples[0].sample, "b");
        assert!((rep.sample("b").unwrap().mean_abs_error_pct - 10.0).abs() < 1e-9);
        assert!((rep.rows[1].error_pct + 60.0).abs() < 1e-9);
        assert_eq!(rep.sample("a").unwrap().flagged, 1);
    }

    #[test]
    fn unknown_feature_names_its_line() {
        let lay = layout();
        let m = parse_measurements("# c\ns,patch_width,30\ns,nope,1\n").unwrap();
        assert_eq!(
            dim_error_report(&lay, &m).unwrap_err(),
            DimError::UnknownFeature {
                line: 3,
                feature: "nope".into()
            }
        );
        assert!(matches!(parse_measurements("s,x\n"), Err(DimError::Parse { line: 1, .. })));
    }
}
