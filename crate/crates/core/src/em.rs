//! Cavity-model input impedance and S11 of an inset-fed rectangular patch.
//!
//! Each TMmn mode of the effective (fringe-extended) cavity is a parallel RLC
//! branch. Its stored energy comes from the edge capacitance, its losses from
//! radiation through the slot edges, the printed conductor (surface
//! resistance from the conductivity seen along the mode's current), and the
//! dielectric loss tangent. The inset feed couples to each mode by the modal
//! field at the feed point averaged across the feed strip; the branches are
//! summed in series with a feed-line inductance.

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::design::{fringing_extension, slot_conductance, PatchDims};
use crate::materials::{effective_conductivity, eval_permittivity, MaterialError, MaterialModel};
use crate::quad::golden_min;
use crate::s11::{S11Curve, S11_FLOOR_DB};
use crate::SPEED_OF_LIGHT_MM_S;

const MU0: f64 = 4e-7 * PI;
const EPS0: f64 = 8.854_187_812_8e-12;
/// Modes whose squared feed coupling falls below this are not excited.
const MIN_COUPLING_SQ: f64 = 1e-12;
const TUNE_BAND: f64 = 0.05;
const TUNE_STEP_HZ: f64 = 0.2e6;
const TUNE_GRID: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum EmError {
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("invalid patch: {0}")]
    InvalidDims(String),
    #[error(transparent)]
    Material(#[from] MaterialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencySweep {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub step_hz: f64,
}

impl FrequencySweep {
    pub fn new(start_hz: f64, stop_hz: f64, step_hz: f64) -> Result<Self, EmError> {
        let s = Self {
            start_hz,
            stop_hz,
            step_hz,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), EmError> {
        if !(self.start_hz > 0.0 && self.stop_hz > self.start_hz && self.step_hz > 0.0) {
            return Err(EmError::InvalidSweep(format!(
                "need 0 < start < stop and step > 0 (got {} .. {} step {})",
                self.start_hz, self.stop_hz, self.step_hz
            )));
        }
        Ok(())
    }

    /// Grid points from start to stop inclusive (stop is kept when it lands
    /// within half a step).
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop_hz - self.start_hz) / self.step_hz + 0.5).floor() as usize;
        (0..=n)
            .map(|i| self.start_hz + i as f64 * self.step_hz)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    pub m_max: usize,
    pub n_max: usize,
    pub port_impedance_ohm: f64,
    pub feed_inductance_nh_per_mm: f64,
    pub feed_length_mm: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            m_max: 3,
            n_max: 3,
            port_impedance_ohm: 50.0,
            feed_inductance_nh_per_mm: 0.01,
            feed_length_mm: 10.0,
        }
    }
}

/// One cavity mode with its loss budget and lumped equivalent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityMode {
    /// Half-wave count along the patch length (y).
    pub m: usize,
    /// Half-wave count along the patch width (x).
    pub n: usize,
    pub freq_hz: f64,
    /// Unit surface-current direction in layout coordinates.
    pub current_dir: [f64; 2],
    pub sigma_eff_s_per_m: f64,
    pub q_rad: f64,
    pub q_cond: f64,
    pub q_diel: f64,
    /// Capacitance seen at the radiating edge, F.
    pub c_edge_f: f64,
}

impl CavityMode {
    pub fn q_total(&self) -> f64 {
        1.0 / (1.0 / self.q_rad + 1.0 / self.q_cond + 1.0 / self.q_diel)
    }
}

/// Normalized sinc, `sin(πx)/(πx)`.
fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Cavity dimensions extended by the fringing fields: (length, width), mm.
pub fn effective_cavity(dims: &PatchDims) -> (f64, f64) {
    let le = dims.length_mm + 2.0 * dims.delta_l_mm;
    let we = dims.width_mm
        + 2.0 * fringing_extension(dims.eps_eff, dims.substrate_height_mm, dims.length_mm);
    (le, we)
}

/// Modes up to (`m_max`, `n_max`) in ascending frequency.
pub fn cavity_modes(
    dims: &PatchDims,
    dielectric: &MaterialModel,
    conductor: &MaterialModel,
    raster: &Vector2<f64>,
    options: &EmOptions,
) -> Result<Vec<CavityMode>, EmError> {
    dims.validate()
        .map_err(|e| EmError::InvalidDims(e.to_string()))?;
    let tensor = conductor.conductivity()?;
    let raster = raster
        .try_normalize(1e-12)
        .ok_or_else(|| EmError::InvalidDims("zero raster direction".into()))?;
    let raster_perp = Vector2::new(-raster.y, raster.x);
    let (le, we) = effective_cavity(dims);
    let h = dims.substrate_height_mm;
    let ee = dims.eps_eff;

    let mut modes = Vec::new();
    for m in 0..=options.m_max {
        for n in 0..=options.n_max {
            if m + n == 0 {
                continue;
            }
            let (km, kn) = (m as f64 / le, n as f64 / we);
            let freq = SPEED_OF_LIGHT_MM_S / (2.0 * ee.sqrt()) * (km * km + kn * kn).sqrt();
            let dir = Vector2::new(kn, km).normalize();
            let local = Vector3::new(dir.dot(&raster), dir.dot(&raster_perp), 0.0);
            let sigma = effective_conductivity(tensor, &local.normalize())?;
            let skin_depth_mm = 1e3 / (PI * freq * MU0 * sigma).sqrt();
            let (_, tan_d) = eval_permittivity(dielectric, freq)?;
            let g = dir.y * dir.y * slot_conductance(dims.width_mm, h, freq)
                + dir.x * dir.x * slot_conductance(dims.length_mm, h, freq);
            let chi = if m == 0 { 1.0 } else { 2.0 } * if n == 0 { 1.0 } else { 2.0 };
            let c_edge = EPS0 * ee * le * we * 1e-3 / (h * chi);
            modes.push(CavityMode {
                m,
                n,
                freq_hz: freq,
                current_dir: [dir.x, dir.y],
                sigma_eff_s_per_m: sigma,
                q_rad: 2.0 * PI * freq * c_edge / (2.0 * g),
                q_cond: h / skin_depth_mm,
                q_diel: 1.0 / tan_d,
                c_edge_f: c_edge,
            });
        }
    }
    modes.sort_by(|a, b| a.freq_hz.total_cmp(&b.freq_hz));
    Ok(modes)
}

/// Modal field at the inset feed, averaged across the feed strip.
pub fn feed_coupling(dims: &PatchDims, mode: &CavityMode) -> f64 {
    let (le, we) = effective_cavity(dims);
    let (m, n) = (mode.m as f64, mode.n as f64);
    (m * PI * (dims.feed_inset_mm + dims.delta_l_mm) / le).cos()
        * (n * PI * 0.5).cos()
        * sinc(n * dims.feed_line_width_mm / (2.0 * we))
}

pub fn input_impedance(
    dims: &PatchDims,
    modes: &[CavityMode],
    freq_hz: f64,
    options: &EmOptions,
) -> Complex64 {
    let w = 2.0 * PI * freq_hz;
    let l_feed = options.feed_inductance_nh_per_mm * 1e-9 * options.feed_length_mm;
    let mut z = Complex64::new(0.0, w * l_feed);
    for mode in modes {
        let psi = feed_coupling(dims, mode);
        if psi * psi < MIN_COUPLING_SQ {
            continue;
        }
        let w0 = 2.0 * PI * mode.freq_hz;
        let c = mode.c_edge_f / (psi * psi);
        let r = mode.q_total() / (w0 * c);
        let l = 1.0 / (w0 * w0 * c);
        let y = Complex64::new(1.0 / r, w * c - 1.0 / (w * l));
        z += y.inv();
    }
    z
}

pub fn reflection(z: Complex64, z0: f64) -> Complex64 {
    (z - z0) / (z + z0)
}

pub fn s11_db(z: Complex64, z0: f64) -> f64 {
    (20.0 * reflection(z, z0).norm().log10()).max(S11_FLOOR_DB)
}

/// Predicted |S11| of the patch on `dielectric` with a `conductor` trace
/// deposited along `raster` (layout coordinates).
pub fn predict_s11(
    dims: &PatchDims,
    dielectric: &MaterialModel,
    conductor: &MaterialModel,
    raster: &Vector2<f64>,
    sweep: &FrequencySweep,
    options: &EmOptions,
) -> Result<S11Curve, EmError> {
    sweep.validate()?;
    let modes = cavity_modes(dims, dielectric, conductor, raster, options)?;
    let freqs = sweep.points();
    let s11 = freqs
        .iter()
        .map(|&f| s11_db(input_impedance(dims, &modes, f, options), options.port_impedance_ohm))
        .collect();
    Ok(S11Curve {
        freqs_hz: freqs,
        s11_db: s11,
    })
}

/// Re-tunes the feed inset so the lossy model is best matched within ±5% of
/// the design frequency. Returns the updated dimensions and the achieved
/// minimum |Γ| in dB.
pub fn tune_feed_inset(
    dims: &PatchDims,
    dielectric: &MaterialModel,
    conductor: &MaterialModel,
    raster: &Vector2<f64>,
    options: &EmOptions,
) -> Result<(PatchDims, f64), EmError> {
    let modes = cavity_modes(dims, dielectric, conductor, raster, options)?;
    let band = FrequencySweep::new(
        dims.f_target_hz * (1.0 - TUNE_BAND),
        dims.f_target_hz * (1.0 + TUNE_BAND),
        TUNE_STEP_HZ,
    )?
    .points();
    let worst = |inset: f64| {
        let d = PatchDims {
            feed_inset_mm: inset,
            ..*dims
        };
        band.iter()
            .map(|&f| {
                reflection(input_impedance(&d, &modes, f, options), options.port_impedance_ohm)
                    .norm()
            })
            .fold(f64::INFINITY, f64::min)
    };
    // the inset must stay below L/2 to remain a valid layout
    let hi = 0.5 * dims.length_mm * (1.0 - 1e-9);
    let step = hi / TUNE_GRID as f64;
    let (best_i, _) = (0..=TUNE_GRID)
        .map(|i| (i, worst(i as f64 * step)))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let lo = (best_i as f64 - 1.0).max(0.0) * step;
    let up = ((best_i as f64 + 1.0) * step).min(hi);
    let (inset, gamma) = golden_min(worst, lo, up, 1e-9);
    Ok((
        PatchDims {
            feed_inset_mm: inset,
            ..*dims
        },
        (20.0 * gamma.log10()).max(S11_FLOOR_DB),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::synthesize_patch;
    use crate::materials::{ConductivityTensor, MaterialDb};
    use approx::assert_relative_eq;

    fn setup() -> (PatchDims, MaterialModel, MaterialModel) {
        let db = MaterialDb::bundled();
        (
            synthesize_patch(3e9, 2.7, 1.5).unwrap(),
            db.dielectric().unwrap().clone(),
            db.conductor().unwrap().clone(),
        )
    }

    fn isotropic(c: &MaterialModel) -> MaterialModel {
        let mut c = c.clone();
        let s = c.conductivity().unwrap().parallel;
        c.conductivity = Some(ConductivityTensor::isotropic(s));
        c
    }

    #[test]
    fn fundamental_mode_frequency() {
        let (d, pla, cond) = setup();
        let modes = cavity_modes(&d, &pla, &cond, &Vector2::y(), &EmOptions::default()).unwrap();
        let tm10 = modes.iter().find(|m| m.m == 1 && m.n == 0).unwrap();
        // L + 2ΔL is the half-wave length at the design frequency
        assert_relative_eq!(tm10.freq_hz, 3e9, max_relative = 1e-12);
        assert_eq!(modes.len(), 15);
        assert!(modes.windows(2).all(|w| w[0].freq_hz <= w[1].freq_hz));
    }

    #[test]
    fn quality_factors_hand_checked() {
        let (d, pla, cond) = setup();
        let modes = cavity_modes(&d, &pla, &cond, &Vector2::y(), &EmOptions::default()).unwrap();
        let tm10 = modes.iter().find(|m| m.m == 1 && m.n == 0).unwrap();
        assert_relative_eq!(tm10.q_diel, 125.0, max_relative = 1e-12);
        // skin depth at 3 GHz, 1.6e4 S/m: 1/sqrt(π·3e9·μ0·1.6e4) = 72.6 µm
        let delta = 1.0 / (PI * 3e9 * MU0 * 1.6e4).sqrt();
        assert_relative_eq!(tm10.q_cond, 1.5e-3 / delta, max_relative = 1e-9);
        assert_eq!(tm10.current_dir, [0.0, 1.0]);
        assert_eq!(tm10.sigma_eff_s_per_m, 1.6e4);
    }

    #[test]
    fn centered_feed_skips_odd_width_modes() {
        let (d, pla, cond) = setup();
        let modes = cavity_modes(&d, &pla, &cond, &Vector2::y(), &EmOptions::default()).unwrap();
        for m in &modes {
            let psi = feed_coupling(&d, m);
            if m.n % 2 == 1 {
                assert!(psi.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sinc_is_normalized() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(1.0).abs() < 1e-15);
        assert_relative_eq!(sinc(0.5), 2.0 / PI, epsilon = 1e-15);
    }

    #[test]
    fn sweep_points_inclusive() {
        let s = FrequencySweep::new(1e9, 2e9, 0.25e9).unwrap();
        assert_eq!(s.points(), vec![1e9, 1.25e9, 1.5e9, 1.75e9, 2e9]);
        assert!(FrequencySweep::new(2e9, 1e9, 1e6).is_err());
    }

    #[test]
    fn tuned_patch_resonates_near_target() {
        let (d, pla, cond) = setup();
        let cond = isotropic(&cond);
        let opts = EmOptions::default();
        let (tuned, depth) = tune_feed_inset(&d, &pla, &cond, &Vector2::y(), &opts).unwrap();
        assert!(depth < -40.0, "depth {depth}");
        assert!(tuned.feed_inset_mm > 0.0 && tuned.feed_inset_mm < 0.5 * d.length_mm);
        let sweep = FrequencySweep::new(2.5e9, 3.5e9, 1e6).unwrap();
        let curve = predict_s11(&tuned, &pla, &cond, &Vector2::y(), &sweep, &opts).unwrap();
        let (f, db) = curve.global_min();
        assert!((f / 3e9 - 1.0).abs() < 0.02, "min at {f}");
        assert!(db < -30.0);
    }

    #[test]
    fn s11_floor_applied() {
        assert_eq!(s11_db(Complex64::new(50.0, 0.0), 50.0), S11_FLOOR_DB);
        assert_relative_eq!(
            s11_db(Complex64::new(150.0, 0.0), 50.0),
            20.0 * 0.5f64.log10(),
            epsilon = 1e-12
        );
    }
}
