//! Parametric antenna layouts: an inset-fed rectangular patch synthesized from
//! a target frequency, and an elliptical UWB monopole with a power-law taper
//! and coplanar ground stubs.
//!
//! Layout frame: x across the patch width, y along the patch length (the
//! resonant direction of the fundamental). The feed enters from −y.

use std::f64::consts::PI;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::geom2d::{BBox, Polygon, P2};
use crate::SPEED_OF_LIGHT_MM_S;

const FEATURE_TOL: f64 = 1e-9;
const ELLIPSE_SEGMENTS: usize = 96;
const TAPER_SEGMENTS: usize = 16;
/// Ellipse angle, measured from its lowest point, where the taper joins.
const TAPER_JUNCTION_RAD: f64 = PI / 3.0;
const UWB_MARGIN_MM: f64 = 5.0;
const UWB_LOWEST_HZ: f64 = 3.0e9;
const DEFAULT_NOTCH_GAP_MM: f64 = 1.0;
const PORT_IMPEDANCE_OHM: f64 = 50.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DesignError {
    #[error("invalid design input: {0}")]
    InvalidInput(String),
    #[error("non-physical patch: {0}")]
    NonPhysical(String),
    #[error("margin {margin} mm is too small for a {needed} mm feed pad")]
    MarginTooSmall { margin: f64, needed: f64 },
    #[error("layout polygons self-intersect: {0}")]
    SelfIntersection(String),
    #[error("layout invariant violated: {0}")]
    InvalidLayout(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Patch,
    Uwb,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchDims {
    pub width_mm: f64,
    pub length_mm: f64,
    pub substrate_height_mm: f64,
    pub eps_r: f64,
    pub eps_eff: f64,
    pub delta_l_mm: f64,
    pub feed_inset_mm: f64,
    pub feed_line_width_mm: f64,
    pub notch_gap_mm: f64,
    pub f_target_hz: f64,
}

impl PatchDims {
    pub fn validate(&self) -> Result<(), DesignError> {
        let bad = |m: String| Err(DesignError::InvalidInput(m));
        if !(self.length_mm > 0.0 && self.width_mm > self.length_mm) {
            return bad(format!(
                "need W > L > 0 (W = {}, L = {})",
                self.width_mm, self.length_mm
            ));
        }
        if !(self.substrate_height_mm > 0.0) {
            return bad("substrate height must be > 0".into());
        }
        if !(self.eps_eff >= 1.0) {
            return bad("eps_eff must be >= 1".into());
        }
        if !(self.feed_inset_mm >= 0.0 && self.feed_inset_mm < 0.5 * self.length_mm) {
            return bad(format!("feed inset {} outside [0, L/2)", self.feed_inset_mm));
        }
        if !(self.delta_l_mm > 0.0) {
            return bad("fringing extension must be > 0".into());
        }
        if !(self.feed_line_width_mm > 0.0 && self.notch_gap_mm >= 0.0) {
            return bad("feed line width must be > 0".into());
        }
        Ok(())
    }
}

/// Effective permittivity of a microstrip of width `w` on height `h`.
pub fn microstrip_eps_eff(eps_r: f64, h: f64, w: f64) -> f64 {
    0.5 * (eps_r + 1.0) + 0.5 * (eps_r - 1.0) / (1.0 + 12.0 * h / w).sqrt()
}

/// Fringing-field length extension for an open edge of width `w`.
pub fn fringing_extension(eps_eff: f64, h: f64, w: f64) -> f64 {
    0.412 * h * (eps_eff + 0.3) * (w / h + 0.264) / ((eps_eff - 0.258) * (w / h + 0.8))
}

/// Conductance of one radiating slot of length `edge_mm` at `freq_hz`, S.
pub fn slot_conductance(edge_mm: f64, h_mm: f64, freq_hz: f64) -> f64 {
    let lambda = SPEED_OF_LIGHT_MM_S / freq_hz;
    let k0h = 2.0 * PI / lambda * h_mm;
    edge_mm / (120.0 * lambda) * (1.0 - k0h * k0h / 24.0)
}

/// Microstrip width for characteristic impedance `z0` (Hammerstad synthesis).
pub fn microstrip_width(z0: f64, eps_r: f64, h: f64) -> f64 {
    let a = z0 / 60.0 * (0.5 * (eps_r + 1.0)).sqrt()
        + (eps_r - 1.0) / (eps_r + 1.0) * (0.23 + 0.11 / eps_r);
    let narrow = 8.0 * a.exp() / ((2.0 * a).exp() - 2.0);
    let ratio = if narrow < 2.0 {
        narrow
    } else {
        let b = 377.0 * PI / (2.0 * z0 * eps_r.sqrt());
        2.0 / PI
            * (b - 1.0 - (2.0 * b - 1.0).ln()
                + (eps_r - 1.0) / (2.0 * eps_r) * ((b - 1.0).ln() + 0.39 - 0.61 / eps_r))
    };
    ratio * h
}

/// Rectangular patch dimensions for a TM10 resonance at `f_target_hz`.
///
/// The inset places the radiation-only edge resistance, scaled by
/// `cos²(π·inset/L)`, at 50 Ω.
pub fn synthesize_patch(f_target_hz: f64, eps_r: f64, h_mm: f64) -> Result<PatchDims, DesignError> {
    if !(f_target_hz > 0.0) || !f_target_hz.is_finite() {
        return Err(DesignError::InvalidInput(format!(
            "target frequency must be > 0 (got {f_target_hz})"
        )));
    }
    if !(eps_r >= 1.0) {
        return Err(DesignError::InvalidInput(format!("eps_r {eps_r} < 1")));
    }
    if !(h_mm > 0.0 && h_mm <= 5.0) {
        return Err(DesignError::InvalidInput(format!(
            "substrate height {h_mm} mm outside (0, 5]"
        )));
    }
    let c = SPEED_OF_LIGHT_MM_S;
    let width = c / (2.0 * f_target_hz) * (2.0 / (eps_r + 1.0)).sqrt();
    let eps_eff = microstrip_eps_eff(eps_r, h_mm, width);
    let delta_l = fringing_extension(eps_eff, h_mm, width);
    let length = c / (2.0 * f_target_hz * eps_eff.sqrt()) - 2.0 * delta_l;
    if !(length > 0.0) {
        return Err(DesignError::NonPhysical(format!("patch length {length} mm")));
    }
    let edge_r = 1.0 / (2.0 * slot_conductance(width, h_mm, f_target_hz));
    let inset = if edge_r > PORT_IMPEDANCE_OHM {
        length / PI * (PORT_IMPEDANCE_OHM / edge_r).sqrt().acos()
    } else {
        0.0
    };
    Ok(PatchDims {
        width_mm: width,
        length_mm: length,
        substrate_height_mm: h_mm,
        eps_r,
        eps_eff,
        delta_l_mm: delta_l,
        feed_inset_mm: inset,
        feed_line_width_mm: microstrip_width(PORT_IMPEDANCE_OHM, eps_r, h_mm),
        notch_gap_mm: DEFAULT_NOTCH_GAP_MM,
        f_target_hz,
    })
}

/// A named straight-line dimension used for distortion and measurement reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub id: String,
    pub start: P2,
    pub end: P2,
}

impl Feature {
    fn new(id: &str, start: P2, end: P2) -> Self {
        Self {
            id: id.to_string(),
            start,
            end,
        }
    }

    pub fn nominal_length(&self) -> f64 {
        (self.end - self.start).norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarLayout {
    pub kind: DesignKind,
    pub substrate_outline: Polygon,
    pub conductive_regions: Vec<Polygon>,
    pub feed_point: P2,
    pub raster_direction: Vector2<f64>,
    pub features: Vec<Feature>,
}

impl PlanarLayout {
    pub fn feature(&self, id: &str) -> Option<&Feature> {
        self.features.iter().find(|f| f.id == id)
    }

    pub fn bbox(&self) -> BBox {
        self.substrate_outline.bbox()
    }

    /// Copy with a different deposition direction for the conductive fill.
    pub fn with_raster_direction(&self, dir: Vector2<f64>) -> PlanarLayout {
        PlanarLayout {
            raster_direction: dir.normalize(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        if !self.substrate_outline.is_simple() {
            return Err(DesignError::SelfIntersection("substrate outline".into()));
        }
        for (i, region) in self.conductive_regions.iter().enumerate() {
            if !region.is_simple() {
                return Err(DesignError::SelfIntersection(format!("conductive region {i}")));
            }
            if let Some(p) = region
                .vertices
                .iter()
                .find(|p| !self.substrate_outline.covers(p, FEATURE_TOL))
            {
                return Err(DesignError::InvalidLayout(format!(
                    "region {i} vertex ({:.3}, {:.3}) outside substrate",
                    p.x, p.y
                )));
            }
            for (j, other) in self.conductive_regions.iter().enumerate().skip(i + 1) {
                if region.edges_cross(other) {
                    return Err(DesignError::SelfIntersection(format!(
                        "conductive regions {i} and {j} overlap"
                    )));
                }
            }
        }
        let on_boundary = self
            .conductive_regions
            .iter()
            .any(|r| r.boundary_distance(&self.feed_point) <= FEATURE_TOL);
        if !on_boundary {
            return Err(DesignError::InvalidLayout(
                "feed point is not on a conductive boundary".into(),
            ));
        }
        if (self.raster_direction.norm() - 1.0).abs() > 1e-9 {
            return Err(DesignError::InvalidLayout("raster direction is not unit".into()));
        }
        Ok(())
    }
}

/// Patch rectangle with an inset microstrip feed running to the substrate edge.
///
/// The feed pad outside the patch must be at least one line width long, so
/// `margin_mm` ≥ feed line width.
pub fn patch_layout(dims: &PatchDims, margin_mm: f64) -> Result<PlanarLayout, DesignError> {
    dims.validate()?;
    let wf = dims.feed_line_width_mm;
    if !(margin_mm >= wf) {
        return Err(DesignError::MarginTooSmall {
            margin: margin_mm,
            needed: wf,
        });
    }
    let (w, l) = (dims.width_mm, dims.length_mm);
    let (hw, hf, g, inset) = (0.5 * w, 0.5 * wf, dims.notch_gap_mm, dims.feed_inset_mm);
    if hf + g >= hw {
        return Err(DesignError::InvalidInput("feed and notch wider than patch".into()));
    }

    let mut v = vec![P2::new(-hw, 0.0)];
    if inset > 0.0 && g > 0.0 {
        v.extend([
            P2::new(-hf - g, 0.0),
            P2::new(-hf - g, inset),
            P2::new(-hf, inset),
            P2::new(-hf, -margin_mm),
            P2::new(hf, -margin_mm),
            P2::new(hf, inset),
            P2::new(hf + g, inset),
            P2::new(hf + g, 0.0),
        ]);
    } else {
        v.extend([
            P2::new(-hf, 0.0),
            P2::new(-hf, -margin_mm),
            P2::new(hf, -margin_mm),
            P2::new(hf, 0.0),
        ]);
    }
    v.extend([P2::new(hw, 0.0), P2::new(hw, l), P2::new(-hw, l)]);
    let patch = Polygon::new(v);

    let outline_box = BBox {
        min: P2::new(-hw, 0.0),
        max: P2::new(hw, l),
    }
    .expand(margin_mm);
    let outline = Polygon::rect(outline_box.min, outline_box.max);

    let x_len = -0.5 * hw;
    let mut features = vec![
        Feature::new("patch_width", P2::new(-hw, 0.5 * l), P2::new(hw, 0.5 * l)),
        Feature::new("patch_length", P2::new(x_len, 0.0), P2::new(x_len, l)),
        Feature::new(
            "feed_width",
            P2::new(-hf, -0.5 * margin_mm),
            P2::new(hf, -0.5 * margin_mm),
        ),
    ];
    if inset > 0.0 {
        let xg = -hf - 0.5 * g;
        features.push(Feature::new("feed_inset", P2::new(xg, 0.0), P2::new(xg, inset)));
        let yg = 0.5 * inset;
        features.push(Feature::new("notch_gap", P2::new(-hf - g, yg), P2::new(-hf, yg)));
    }
    features.extend([
        Feature::new(
            "substrate_width",
            P2::new(outline_box.min.x, outline_box.max.y),
            P2::new(outline_box.max.x, outline_box.max.y),
        ),
        Feature::new(
            "substrate_length",
            P2::new(outline_box.max.x, outline_box.min.y),
            P2::new(outline_box.max.x, outline_box.max.y),
        ),
    ]);

    let layout = PlanarLayout {
        kind: DesignKind::Patch,
        substrate_outline: outline,
        conductive_regions: vec![patch],
        feed_point: P2::new(0.0, -margin_mm),
        raster_direction: Vector2::y(),
        features,
    };
    layout.validate()?;
    Ok(layout)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UwbParams {
    /// Semi-axes of the radiator ellipse (across, along the feed), mm.
    pub radiator_axes_mm: (f64, f64),
    pub feed_gap_mm: f64,
    pub feed_line_width_mm: f64,
    /// Ground stub (width, length), mm.
    pub ground_stub_mm: (f64, f64),
    pub taper_exponent: f64,
}

impl Default for UwbParams {
    fn default() -> Self {
        Self {
            radiator_axes_mm: (12.0, 15.0),
            feed_gap_mm: 0.3,
            feed_line_width_mm: 3.0,
            ground_stub_mm: (10.0, 12.0),
            taper_exponent: 1.0,
        }
    }
}

impl UwbParams {
    pub fn validate(&self) -> Result<(), DesignError> {
        let lengths = [
            self.radiator_axes_mm.0,
            self.radiator_axes_mm.1,
            self.feed_gap_mm,
            self.feed_line_width_mm,
            self.ground_stub_mm.0,
            self.ground_stub_mm.1,
        ];
        if lengths.iter().any(|v| !(*v > 0.0)) {
            return Err(DesignError::InvalidInput("UWB lengths must be > 0".into()));
        }
        if !(0.5..=3.0).contains(&self.taper_exponent) {
            return Err(DesignError::InvalidInput(format!(
                "taper exponent {} outside [0.5, 3]",
                self.taper_exponent
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DesignWarning {
    /// Radiator shorter than a quarter wavelength at the lowest band edge.
    RadiatorTooSmall { height_mm: f64, quarter_wave_mm: f64 },
}

impl std::fmt::Display for DesignWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DesignWarning::RadiatorTooSmall {
                height_mm,
                quarter_wave_mm,
            } => write!(
                f,
                "radiator height {height_mm:.2} mm is below a quarter wavelength \
                 ({quarter_wave_mm:.2} mm) at the lowest band frequency"
            ),
        }
    }
}

/// Point on the taper edge at parameter `t` ∈ [0, 1].
fn taper_point(t: f64, exponent: f64, start: P2, end: P2) -> P2 {
    P2::new(
        start.x + (end.x - start.x) * t.powf(exponent),
        start.y + (end.y - start.y) * t,
    )
}

pub fn uwb_layout(params: &UwbParams) -> Result<(PlanarLayout, Vec<DesignWarning>), DesignError> {
    params.validate()?;
    let (a, b) = params.radiator_axes_mm;
    let (stub_w, stub_l) = params.ground_stub_mm;
    let hf = 0.5 * params.feed_line_width_mm;
    let gap = params.feed_gap_mm;
    let yc = stub_l + gap + b;

    let ellipse = |theta: f64| P2::new(a * theta.sin(), yc - b * theta.cos());
    let junction = ellipse(TAPER_JUNCTION_RAD);
    let taper_start = P2::new(hf, stub_l);

    let mut v = vec![P2::new(-hf, 0.0), P2::new(hf, 0.0), taper_start];
    for i in 1..=TAPER_SEGMENTS {
        let t = i as f64 / TAPER_SEGMENTS as f64;
        v.push(taper_point(t, params.taper_exponent, taper_start, junction));
    }
    let arc_end = 2.0 * PI - TAPER_JUNCTION_RAD;
    let steps = ((arc_end - TAPER_JUNCTION_RAD) / (2.0 * PI) * ELLIPSE_SEGMENTS as f64).ceil() as usize;
    for i in 1..steps {
        let theta = TAPER_JUNCTION_RAD + (arc_end - TAPER_JUNCTION_RAD) * i as f64 / steps as f64;
        v.push(ellipse(theta));
    }
    let left_junction = P2::new(-junction.x, junction.y);
    let left_start = P2::new(-hf, stub_l);
    for i in (0..=TAPER_SEGMENTS).rev() {
        let t = i as f64 / TAPER_SEGMENTS as f64;
        v.push(taper_point(t, params.taper_exponent, left_start, left_junction));
    }
    let radiator = Polygon::new(v);

    let stub_in = hf + gap;
    let right_stub = Polygon::rect(P2::new(stub_in, 0.0), P2::new(stub_in + stub_w, stub_l));
    let left_stub = Polygon::rect(P2::new(-stub_in - stub_w, 0.0), P2::new(-stub_in, stub_l));

    let conductors = BBox {
        min: P2::new(-(a.max(stub_in + stub_w)), 0.0),
        max: P2::new(a.max(stub_in + stub_w), yc + b),
    };
    let outline_box = BBox {
        min: P2::new(conductors.min.x - UWB_MARGIN_MM, 0.0),
        max: P2::new(conductors.max.x + UWB_MARGIN_MM, conductors.max.y + UWB_MARGIN_MM),
    };
    let outline = Polygon::rect(outline_box.min, outline_box.max);

    let ym = 0.5 * stub_l;
    let xs = stub_in + 0.5 * stub_w;
    let features = vec![
        Feature::new("radiator_width", P2::new(-a, yc), P2::new(a, yc)),
        Feature::new("radiator_height", P2::new(0.0, yc - b), P2::new(0.0, yc + b)),
        Feature::new("feed_width", P2::new(-hf, ym), P2::new(hf, ym)),
        Feature::new("feed_gap", P2::new(hf, ym), P2::new(stub_in, ym)),
        Feature::new("stub_width", P2::new(stub_in, ym), P2::new(stub_in + stub_w, ym)),
        Feature::new("stub_length", P2::new(xs, 0.0), P2::new(xs, stub_l)),
        Feature::new(
            "substrate_width",
            P2::new(outline_box.min.x, outline_box.max.y),
            P2::new(outline_box.max.x, outline_box.max.y),
        ),
        Feature::new(
            "substrate_length",
            P2::new(outline_box.max.x, outline_box.min.y),
            P2::new(outline_box.max.x, outline_box.max.y),
        ),
    ];

    let layout = PlanarLayout {
        kind: DesignKind::Uwb,
        substrate_outline: outline,
        conductive_regions: vec![radiator, left_stub, right_stub],
        feed_point: P2::new(0.0, 0.0),
        raster_direction: Vector2::y(),
        features,
    };
    layout.validate()?;

    let mut warnings = Vec::new();
    let quarter_wave = SPEED_OF_LIGHT_MM_S / UWB_LOWEST_HZ / 4.0;
    if 2.0 * b < quarter_wave {
        let w = DesignWarning::RadiatorTooSmall {
            height_mm: 2.0 * b,
            quarter_wave_mm: quarter_wave,
        };
        log::warn!("{w}");
        warnings.push(w);
    }
    Ok((layout, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// The four closed-form design equations evaluated independently.
    fn oracle(f: f64, er: f64, h: f64) -> (f64, f64, f64, f64) {
        let c = 299_792_458.0e3;
        let w = c / (2.0 * f) * (2.0 / (er + 1.0)).sqrt();
        let ee = (er + 1.0) / 2.0 + (er - 1.0) / 2.0 * (1.0 + 12.0 * h / w).powf(-0.5);
        let dl = 0.412 * h * (ee + 0.3) * (w / h + 0.264) / ((ee - 0.258) * (w / h + 0.8));
        let l = c / (2.0 * f * ee.sqrt()) - 2.0 * dl;
        (w, ee, dl, l)
    }

    #[test]
    fn air_patch_is_half_wave() {
        let d = synthesize_patch(3e9, 1.0, 1e-6).unwrap();
        assert_relative_eq!(d.width_mm, 49.965, epsilon = 1e-3);
        assert_relative_eq!(d.length_mm, 49.965, epsilon = 1e-3);
        assert!(d.delta_l_mm < 1e-5);
        assert_eq!(d.eps_eff, 1.0);
    }

    #[test]
    fn pla_patch_matches_oracle() {
        let d = synthesize_patch(3e9, 2.7, 1.5).unwrap();
        let (w, ee, dl, l) = oracle(3e9, 2.7, 1.5);
        assert_relative_eq!(d.width_mm, w, max_relative = 1e-12);
        assert_relative_eq!(d.eps_eff, ee, max_relative = 1e-12);
        assert_relative_eq!(d.delta_l_mm, dl, max_relative = 1e-12);
        assert_relative_eq!(d.length_mm, l, max_relative = 1e-12);
        // frozen from the oracle: W = 36.735, L = 29.807
        assert_relative_eq!(d.width_mm, 36.735, epsilon = 1e-3);
        assert_relative_eq!(d.length_mm, 29.807, epsilon = 1e-3);
        assert!(d.feed_inset_mm > 8.0 && d.feed_inset_mm < 10.0);
        d.validate().unwrap();
    }

    #[test]
    fn synthesis_rejects_bad_inputs() {
        assert!(synthesize_patch(0.0, 2.7, 1.5).is_err());
        assert!(synthesize_patch(3e9, 0.5, 1.5).is_err());
        assert!(synthesize_patch(3e9, 2.7, 6.0).is_err());
    }

    #[test]
    fn microstrip_width_for_pla() {
        // Hammerstad wide-strip branch, hand-evaluated: W/h ≈ 2.698
        let w = microstrip_width(50.0, 2.7, 1.5);
        assert_relative_eq!(w / 1.5, 2.698, epsilon = 2e-3);
    }

    fn dims_fixture() -> PatchDims {
        PatchDims {
            width_mm: 36.8,
            length_mm: 29.8,
            substrate_height_mm: 1.5,
            eps_r: 2.7,
            eps_eff: 2.55,
            delta_l_mm: 0.75,
            feed_inset_mm: 9.0,
            feed_line_width_mm: 4.0,
            notch_gap_mm: 1.0,
            f_target_hz: 3e9,
        }
    }

    #[test]
    fn patch_layout_outline_and_area() {
        let d = dims_fixture();
        let lay = patch_layout(&d, 10.0).unwrap();
        let bb = lay.substrate_outline.bbox();
        assert_relative_eq!(bb.width(), 56.8, epsilon = 1e-12);
        assert_relative_eq!(bb.height(), 49.8, epsilon = 1e-12);
        assert_eq!(lay.conductive_regions.len(), 1);
        // W·L plus the external feed pad, minus the two notch slots
        let expected = 36.8 * 29.8 + 4.0 * 10.0 - 2.0 * 1.0 * 9.0;
        assert_relative_eq!(lay.conductive_regions[0].area(), expected, max_relative = 1e-9);
        assert!(lay.conductive_regions[0].signed_area() > 0.0);
        assert_eq!(lay.feed_point.y, bb.min.y);
    }

    #[test]
    fn patch_layout_without_inset() {
        let mut d = dims_fixture();
        d.feed_inset_mm = 0.0;
        let lay = patch_layout(&d, 10.0).unwrap();
        assert_relative_eq!(
            lay.conductive_regions[0].area(),
            36.8 * 29.8 + 40.0,
            max_relative = 1e-9
        );
    }

    #[test]
    fn zero_margin_rejected() {
        let d = dims_fixture();
        assert!(matches!(
            patch_layout(&d, 0.0),
            Err(DesignError::MarginTooSmall { .. })
        ));
    }

    #[test]
    fn uwb_default_is_simple_and_quiet() {
        let (lay, warnings) = uwb_layout(&UwbParams::default()).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(lay.conductive_regions.len(), 3);
        for r in &lay.conductive_regions {
            assert!(r.is_simple());
        }
        assert_eq!(lay.feed_point, P2::new(0.0, 0.0));
    }

    #[test]
    fn uwb_linear_taper_is_straight() {
        let p = UwbParams::default();
        let start = P2::new(1.5, 12.0);
        let end = P2::new(5.0, 20.0);
        for i in 0..=10 {
            let q = taper_point(i as f64 / 10.0, 1.0, start, end);
            let cross = (end - start).perp(&(q - start));
            assert!(cross.abs() < 1e-12);
        }
        let (lay, _) = uwb_layout(&p).unwrap();
        // the right taper edge vertices are collinear for exponent 1
        let v = &lay.conductive_regions[0].vertices;
        let (s, e) = (v[2], v[2 + TAPER_SEGMENTS]);
        for q in &v[2..=2 + TAPER_SEGMENTS] {
            assert!((e - s).perp(&(q - s)).abs() < 1e-9);
        }
    }

    #[test]
    fn tiny_radiator_warns() {
        let p = UwbParams {
            radiator_axes_mm: (2.0, 2.0),
            ground_stub_mm: (1.0, 3.0),
            ..UwbParams::default()
        };
        let (_, warnings) = uwb_layout(&p).unwrap();
        assert_eq!(warnings.len(), 1);
        match &warnings[0] {
            DesignWarning::RadiatorTooSmall { height_mm, quarter_wave_mm } => {
                assert_eq!(*height_mm, 4.0);
                assert_relative_eq!(*quarter_wave_mm, 24.98, epsilon = 0.01);
            }
        }
    }

    #[test]
    fn taper_exponent_range_enforced() {
        let p = UwbParams {
            taper_exponent: 4.0,
            ..UwbParams::default()
        };
        assert!(uwb_layout(&p).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn width_decreases_with_frequency(f in 1e9..10e9f64, er in 1.0..10.0f64) {
                let a = synthesize_patch(f, er, 1.0).unwrap();
                let b = synthesize_patch(f * 1.01, er, 1.0).unwrap();
                let c = synthesize_patch(f, er * 1.01, 1.0).unwrap();
                prop_assert!(b.width_mm < a.width_mm);
                prop_assert!(c.width_mm < a.width_mm);
                let bare = SPEED_OF_LIGHT_MM_S / (2.0 * f * a.eps_eff.sqrt());
                prop_assert!(a.length_mm < bare);
            }

            #[test]
            fn patch_layouts_valid(f in 2e9..6e9f64, er in 2.0..4.0f64, h in 0.8..2.0f64, extra in 0.0..10.0f64) {
                let d = synthesize_patch(f, er, h).unwrap();
                let m = d.feed_line_width_mm + extra;
                let lay = patch_layout(&d, m).unwrap();
                lay.validate().unwrap();
                let expected = d.width_mm * d.length_mm + d.feed_line_width_mm * m
                    - 2.0 * d.notch_gap_mm * d.feed_inset_mm;
                prop_assert!((lay.conductive_regions[0].area() - expected).abs() <= 1e-9 * expected);
            }

            #[test]
            fn uwb_layouts_valid(a in 6.0..20.0f64, b in 6.0..20.0f64, gap in 0.1..1.0f64,
                                 wf in 1.0..4.0f64, sw in 2.0..10.0f64, sl in 4.0..15.0f64,
                                 p in 0.5..3.0f64) {
                let params = UwbParams {
                    radiator_axes_mm: (a, b),
                    feed_gap_mm: gap,
                    feed_line_width_mm: wf,
                    ground_stub_mm: (sw, sl),
                    taper_exponent: p,
                };
                let (lay, _) = uwb_layout(&params).unwrap();
                lay.validate().unwrap();
            }
        }
    }
}
