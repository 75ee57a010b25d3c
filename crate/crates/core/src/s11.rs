//! Reflection curves: resonance extraction, curve comparison, and Touchstone
//! and CSV input/output.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Lower bound applied to predicted |S11|, dB.
pub const S11_FLOOR_DB: f64 = -80.0;
/// Resonances are local minima deeper than this, dB.
pub const RESONANCE_THRESHOLD_DB: f64 = -6.0;
/// Largest relative frequency offset for two resonances to be paired.
pub const MATCH_TOLERANCE: f64 = 0.15;

#[derive(Debug, thiserror::Error)]
pub enum S11Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("curves share no frequency range")]
    NoOverlap,
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S11Curve {
    pub freqs_hz: Vec<f64>,
    pub s11_db: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub freq_hz: f64,
    pub depth_db: f64,
}

impl S11Curve {
    pub fn validate(&self) -> Result<(), S11Error> {
        if self.freqs_hz.len() != self.s11_db.len() {
            return Err(S11Error::InvalidCurve("frequency and value counts differ".into()));
        }
        if self.freqs_hz.len() < 2 {
            return Err(S11Error::InvalidCurve("need at least two points".into()));
        }
        if self.freqs_hz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(S11Error::InvalidCurve("frequencies must increase".into()));
        }
        if self.s11_db.iter().any(|v| !v.is_finite()) {
            return Err(S11Error::InvalidCurve("non-finite S11 value".into()));
        }
        Ok(())
    }

    /// Lowest sample, `(freq, dB)`.
    pub fn global_min(&self) -> (f64, f64) {
        self.freqs_hz
            .iter()
            .zip(&self.s11_db)
            .fold((f64::NAN, f64::INFINITY), |acc, (&f, &s)| {
                if s < acc.1 {
                    (f, s)
                } else {
                    acc
                }
            })
    }

    /// Lowest sample with frequency in `[lo, hi]`.
    pub fn min_in(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        self.freqs_hz
            .iter()
            .zip(&self.s11_db)
            .filter(|(f, _)| (lo..=hi).contains(*f))
            .fold(None, |acc: Option<(f64, f64)>, (&f, &s)| match acc {
                Some(a) if a.1 <= s => Some(a),
                _ => Some((f, s)),
            })
    }

    /// Interior local minima below [`RESONANCE_THRESHOLD_DB`], ascending.
    pub fn resonances(&self) -> Vec<Resonance> {
        let s = &self.s11_db;
        (1..s.len().saturating_sub(1))
            .filter(|&i| s[i] < RESONANCE_THRESHOLD_DB && s[i] < s[i - 1] && s[i] <= s[i + 1])
            .map(|i| Resonance {
                freq_hz: self.freqs_hz[i],
                depth_db: s[i],
            })
            .collect()
    }

    /// Linear interpolation; `None` outside the sampled range.
    pub fn interpolate(&self, f: f64) -> Option<f64> {
        let fs = &self.freqs_hz;
        if f < fs[0] || f > fs[fs.len() - 1] {
            return None;
        }
        let i = fs.partition_point(|&x| x <= f).clamp(1, fs.len() - 1);
        let (f0, f1) = (fs[i - 1], fs[i]);
        let t = (f - f0) / (f1 - f0);
        Some(self.s11_db[i - 1] + t * (self.s11_db[i] - self.s11_db[i - 1]))
    }

    fn mean_step(&self) -> f64 {
        let n = self.freqs_hz.len();
        (self.freqs_hz[n - 1] - self.freqs_hz[0]) / (n - 1) as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,s11_db\n");
        for (f, s) in self.freqs_hz.iter().zip(&self.s11_db) {
            let _ = writeln!(out, "{f:.1},{s:.6}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceMatch {
    pub reference: Resonance,
    pub other: Resonance,
    pub freq_shift_pct: f64,
    pub depth_diff_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S11Comparison {
    pub matches: Vec<ResonanceMatch>,
    pub unmatched_reference: Vec<Resonance>,
    pub unmatched_other: Vec<Resonance>,
    /// RMS dB difference on the coarser grid over the shared band.
    pub rms_diff_db: f64,
}

/// Pairs each reference resonance with the nearest unused resonance of
/// `other` within [`MATCH_TOLERANCE`], and measures the overall curve misfit.
pub fn compare_s11(reference: &S11Curve, other: &S11Curve) -> Result<S11Comparison, S11Error> {
    reference.validate()?;
    other.validate()?;
    let lo = reference.freqs_hz[0].max(other.freqs_hz[0]);
    let hi = reference.freqs_hz[reference.freqs_hz.len() - 1]
        .min(other.freqs_hz[other.freqs_hz.len() - 1]);
    if !(hi > lo) {
        return Err(S11Error::NoOverlap);
    }
    let (coarse, fine) = if reference.mean_step() >= other.mean_step() {
        (reference, other)
    } else {
        (other, reference)
    };
    let diffs: Vec<f64> = coarse
        .freqs_hz
        .iter()
        .zip(&coarse.s11_db)
        .filter(|(f, _)| (lo..=hi).contains(*f))
        .filter_map(|(&f, &s)| fine.interpolate(f).map(|g| s - g))
        .collect();
    if diffs.is_empty() {
        return Err(S11Error::NoOverlap);
    }
    let rms = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();

    let refs = reference.resonances();
    let others = other.resonances();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, r) in refs.iter().enumerate() {
        for (j, o) in others.iter().enumerate() {
            let rel = (o.freq_hz - r.freq_hz).abs() / r.freq_hz;
            if rel <= MATCH_TOLERANCE {
                candidates.push((rel, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_r = vec![false; refs.len()];
    let mut used_o = vec![false; others.len()];
    let mut matches = Vec::new();
    for (_, i, j) in candidates {
        if used_r[i] || used_o[j] {
            continue;
        }
        used_r[i] = true;
        used_o[j] = true;
        matches.push(ResonanceMatch {
            reference: refs[i],
            other: others[j],
            freq_shift_pct: 100.0 * (others[j].freq_hz - refs[i].freq_hz) / refs[i].freq_hz,
            depth_diff_db: others[j].depth_db - refs[i].depth_db,
        });
    }
    matches.sort_by(|a, b| a.reference.freq_hz.total_cmp(&b.reference.freq_hz));
    Ok(S11Comparison {
        matches,
        unmatched_reference: refs
            .iter()
            .zip(&used_r)
            .filter(|(_, u)| !**u)
            .map(|(r, _)| *r)
            .collect(),
        unmatched_other: others
            .iter()
            .zip(&used_o)
            .filter(|(_, u)| !**u)
            .map(|(r, _)| *r)
            .collect(),
        rms_diff_db: rms,
    })
}

fn perr(line: usize, message: impl Into<String>) -> S11Error {
    S11Error::Parse {
        line,
        message: message.into(),
    }
}

/// Two-column CSV: frequency in Hz and |S11| in dB. Lines starting with `#`
/// and a non-numeric header row are skipped.
pub fn parse_csv(text: &str) -> Result<S11Curve, S11Error> {
    let mut curve = S11Curve {
        freqs_hz: Vec::new(),
        s11_db: Vec::new(),
    };
    let mut seen_data = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 2 {
            return Err(perr(i + 1, format!("expected 2 columns, found {}", cols.len())));
        }
        match (cols[0].parse::<f64>(), cols[1].parse::<f64>()) {
            (Ok(f), Ok(s)) => {
                seen_data = true;
                curve.freqs_hz.push(f);
                curve.s11_db.push(s);
            }
            _ if !seen_data && curve.freqs_hz.is_empty() => {}
            _ => return Err(perr(i + 1, format!("bad number in `{line}`"))),
        }
    }
    curve.validate()?;
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TouchstoneFormat {
    Ri,
    Db,
    Ma,
}

/// One-port Touchstone (`.s1p`) data converted to dB.
pub fn parse_touchstone(text: &str) -> Result<S11Curve, S11Error> {
    let mut scale = 1e9;
    let mut format = TouchstoneFormat::Ma;
    let mut saw_option = false;
    let mut curve = S11Curve {
        freqs_hz: Vec::new(),
        s11_db: Vec::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('!').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(opts) = line.strip_prefix('#') {
            if saw_option {
                return Err(perr(ln, "second option line"));
            }
            saw_option = true;
            let toks: Vec<String> = opts.split_whitespace().map(|t| t.to_ascii_uppercase()).collect();
            let mut k = 0;
            while k < toks.len() {
                match toks[k].as_str() {
                    "HZ" => scale = 1.0,
                    "KHZ" => scale = 1e3,
                    "MHZ" => scale = 1e6,
                    "GHZ" => scale = 1e9,
                    "S" => {}
                    "RI" => format = TouchstoneFormat::Ri,
                    "DB" => format = TouchstoneFormat::Db,
                    "MA" => format = TouchstoneFormat::Ma,
                    "R" => {
                        k += 1;
                        let z0: f64 = toks
                            .get(k)
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| perr(ln, "missing reference impedance"))?;
                        if z0 != 50.0 {
                            log::warn!("Touchstone reference impedance {z0} ohm, not 50");
                        }
                    }
                    "Y" | "Z" | "H" | "G" => {
                        return Err(perr(ln, format!("unsupported parameter type {}", toks[k])))
                    }
                    other => return Err(perr(ln, format!("unknown option `{other}`"))),
                }
                k += 1;
            }
            continue;
        }
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| perr(ln, format!("bad number `{t}`"))))
            .collect::<Result<_, _>>()?;
        if nums.len() != 3 {
            return Err(perr(ln, format!("expected 3 values, found {}", nums.len())));
        }
        let db = match format {
            TouchstoneFormat::Db => nums[1],
            TouchstoneFormat::Ma => 20.0 * nums[1].log10(),
            TouchstoneFormat::Ri => 20.0 * nums[1].hypot(nums[2]).log10(),
        };
        curve.freqs_hz.push(nums[0] * scale);
        curve.s11_db.push(db);
    }
    curve.validate()?;
    Ok(curve)
}

/// Reads `.s1p` files as Touchstone and anything else as CSV.
pub fn load_curve(path: impl AsRef<Path>) -> Result<S11Curve, S11Error> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| S11Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let is_touchstone = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("s1p"));
    if is_touchstone {
        parse_touchstone(&text)
    } else {
        parse_csv(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dip(f0: f64, depth: f64, width: f64) -> impl Fn(f64) -> f64 {
        move |f| depth * (-((f - f0) / width).powi(2)).exp()
    }

    fn curve(step: f64, dips: &[(f64, f64)]) -> S11Curve {
        let n = ((6e9 - 1e9) / step).round() as usize;
        let freqs: Vec<f64> = (0..=n).map(|i| 1e9 + i as f64 * step).collect();
        let s11 = freqs
            .iter()
            .map(|&f| -0.5 + dips.iter().map(|&(f0, d)| dip(f0, d, 0.05e9)(f)).sum::<f64>())
            .collect();
        S11Curve {
            freqs_hz: freqs,
            s11_db: s11,
        }
    }

    #[test]
    fn resonances_found_at_grid_minima() {
        let c = curve(1e6, &[(3e9, -20.0), (4.4e9, -15.0), (5.5e9, -3.0)]);
        let r = c.resonances();
        assert_eq!(r.len(), 2);
        assert_relative_eq!(r[0].freq_hz, 3e9, epsilon = 1.0);
        assert_relative_eq!(r[0].depth_db, -20.5, epsilon = 1e-9);
    }

    #[test]
    fn comparison_pairs_nearest() {
        let a = curve(1e6, &[(3e9, -20.0), (4.4e9, -15.0)]);
        let b = curve(5e6, &[(3.03e9, -18.0), (4.5e9, -10.0)]);
        let cmp = compare_s11(&a, &b).unwrap();
        assert_eq!(cmp.matches.len(), 2);
        assert_relative_eq!(cmp.matches[0].freq_shift_pct, 1.0, epsilon = 1e-9);
        assert_relative_eq!(cmp.matches[0].depth_diff_db, 2.0, epsilon = 1e-9);
        assert!(cmp.unmatched_reference.is_empty());
        assert!(cmp.rms_diff_db > 0.0);
        let same = compare_s11(&a, &a).unwrap();
        assert_eq!(same.rms_diff_db, 0.0);
    }

    #[test]
    fn far_resonances_stay_unmatched() {
        let a = curve(1e6, &[(3e9, -20.0)]);
        let b = curve(1e6, &[(4e9, -20.0)]);
        let cmp = compare_s11(&a, &b).unwrap();
        assert!(cmp.matches.is_empty());
        assert_eq!(cmp.unmatched_reference.len(), 1);
        assert_eq!(cmp.unmatched_other.len(), 1);
    }

    #[test]
    fn disjoint_ranges_rejected() {
        let a = S11Curve {
            freqs_hz: vec![1e9, 2e9],
            s11_db: vec![-1.0, -2.0],
        };
        let b = S11Curve {
            freqs_hz: vec![3e9, 4e9],
            s11_db: vec![-1.0, -2.0],
        };
        assert!(matches!(compare_s11(&a, &b), Err(S11Error::NoOverlap)));
    }

    #[test]
    fn touchstone_formats_agree() {
        let ma = "! one port\n# GHz S MA R 50\n1.0 0.5 30\n2.0 0.1 -10\n";
        let db = "# MHz S DB R 50\n1000 -6.0205999 30\n2000 -20 -10\n";
        let ri = "# Hz S RI R 50\n1e9 0.3 0.4\n2e9 0.06 0.08\n";
        let a = parse_touchstone(ma).unwrap();
        let b = parse_touchstone(db).unwrap();
        let c = parse_touchstone(ri).unwrap();
        assert_eq!(a.freqs_hz, vec![1e9, 2e9]);
        assert_eq!(b.freqs_hz, a.freqs_hz);
        for i in 0..2 {
            assert_relative_eq!(a.s11_db[i], b.s11_db[i], epsilon = 1e-6);
            assert_relative_eq!(a.s11_db[i], c.s11_db[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn touchstone_errors_carry_line() {
        let e = parse_touchstone("# GHz S MA R 50\n1.0 0.5\n2.0 0.1 0\n").unwrap_err();
        assert!(matches!(e, S11Error::Parse { line: 2, .. }));
        let e = parse_touchstone("# GHz Z MA R 50\n").unwrap_err();
        assert!(matches!(e, S11Error::Parse { line: 1, .. }));
    }

    #[test]
    fn csv_round_trip_with_comments() {
        let c = curve(50e6, &[(3e9, -20.0)]);
        let text = format!("# synthetic test curve\n{}", c.to_csv());
        let back = parse_csv(&text).unwrap();
        assert_eq!(back.freqs_hz, c.freqs_hz);
        for (a, b) in back.s11_db.iter().zip(&c.s11_db) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(matches!(
            parse_csv("freq_hz,s11_db\n1e9,-3\n2e9,x\n"),
            Err(S11Error::Parse { line: 3, .. })
        ));
    }
}
