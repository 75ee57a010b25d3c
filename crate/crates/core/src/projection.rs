//! Mapping a planar layout onto a curved substrate.
//!
//! The layout bounding-box center lands on the surface parameter `(½, ½)`.
//! Two maps are offered:
//!
//! * `ArcLength`: x and y distances from the center become arc lengths along
//!   the central `v = ½` and `u = ½` isocurves. On developable surfaces with a
//!   constant metric (plane, cylinder) every length is preserved.
//! * `NormalDrop`: each layout point is dropped vertically onto the surface,
//!   so the xy footprint is preserved and slopes stretch features.

use nalgebra::{Matrix2, Matrix3x2, Vector2};
use serde::{Deserialize, Serialize};

use crate::design::{Feature, PlanarLayout};
use crate::geom2d::{resample_segment, P2};
use crate::quad::{gauss5, gauss5_composite};
use crate::surface::{Surface, SurfaceError, SurfaceFrame, V3};

/// Longest layout-domain step used when resampling edges and integrating.
pub const MAX_STEP_MM: f64 = 0.5;
const NEWTON_TOL: f64 = 1e-14;
const NEWTON_ITERS: usize = 60;
const DOMAIN_SLACK: f64 = 1e-9;
/// Smallest |n_z|-like ratio accepted at a normal-drop solution.
const MIN_DROP_COS: f64 = 1e-6;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProjectionError {
    #[error("layout point ({x:.3}, {y:.3}) falls outside the surface")]
    OutsideSurface { x: f64, y: f64 },
    #[error("surface is vertical under ({x:.3}, {y:.3}); normal drop is undefined")]
    DegenerateJacobian { x: f64, y: f64 },
    #[error("inverse map did not converge at ({x:.3}, {y:.3})")]
    NoConvergence { x: f64, y: f64 },
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    ArcLength,
    NormalDrop,
}

/// Layout-to-surface parameter map.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMap {
    pub surface: Surface,
    pub mode: ProjectionMode,
    /// Layout point that maps to `(½, ½)`.
    pub center: P2,
}

fn in_domain(t: f64) -> bool {
    (-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&t)
}

impl ProjectionMap {
    pub fn new(surface: &Surface, mode: ProjectionMode, center: P2) -> Self {
        Self {
            surface: surface.clone(),
            mode,
            center,
        }
    }

    fn speed_u(&self, u: f64) -> f64 {
        self.surface.frame_unchecked(u, 0.5, 0.0).du.norm()
    }

    fn speed_v(&self, v: f64) -> f64 {
        self.surface.frame_unchecked(0.5, v, 0.0).dv.norm()
    }

    /// Signed arc length from parameter ½ to `t` with speed `speed`.
    fn arc_from_center(speed: &dyn Fn(f64) -> f64, t: f64) -> f64 {
        let panels = ((t - 0.5).abs() * 64.0).ceil() as usize + 1;
        gauss5_composite(speed, 0.5, t, panels)
    }

    /// Parameter whose arc length from ½ equals `s`.
    fn invert_arc(speed: &dyn Fn(f64) -> f64, s: f64) -> Option<f64> {
        let mut t = 0.5 + s / speed(0.5);
        for _ in 0..NEWTON_ITERS {
            let r = Self::arc_from_center(speed, t) - s;
            let dt = r / speed(t);
            if !dt.is_finite() {
                return None;
            }
            t -= dt;
            if dt.abs() < NEWTON_TOL {
                return Some(t);
            }
        }
        None
    }

    /// Surface parameters of a layout point.
    pub fn to_uv(&self, p: &P2) -> Result<(f64, f64), ProjectionError> {
        let d = p - self.center;
        let outside = || ProjectionError::OutsideSurface { x: p.x, y: p.y };
        let (u, v) = match self.mode {
            ProjectionMode::ArcLength => {
                let su = |u: f64| self.speed_u(u);
                let sv = |v: f64| self.speed_v(v);
                let u = Self::invert_arc(&su, d.x).ok_or(ProjectionError::NoConvergence {
                    x: p.x,
                    y: p.y,
                })?;
                let v = Self::invert_arc(&sv, d.y).ok_or(ProjectionError::NoConvergence {
                    x: p.x,
                    y: p.y,
                })?;
                (u, v)
            }
            ProjectionMode::NormalDrop => {
                let c = self.surface.frame_unchecked(0.5, 0.5, 0.0).point;
                let target = Vector2::new(c.x + d.x, c.y + d.y);
                let (mut u, mut v) = (0.5, 0.5);
                let mut converged = false;
                for _ in 0..NEWTON_ITERS {
                    let f = self.surface.frame_unchecked(u, v, 0.0);
                    let r = Vector2::new(f.point.x, f.point.y) - target;
                    let jac = Matrix2::new(f.du.x, f.dv.x, f.du.y, f.dv.y);
                    let scale = f.du.norm() * f.dv.norm();
                    if !(jac.determinant().abs() > 1e-9 * scale) {
                        return Err(ProjectionError::DegenerateJacobian { x: p.x, y: p.y });
                    }
                    let step = jac.try_inverse().ok_or(ProjectionError::DegenerateJacobian {
                        x: p.x,
                        y: p.y,
                    })? * r;
                    if !(step.x.is_finite() && step.y.is_finite()) {
                        return Err(outside());
                    }
                    u -= step.x;
                    v -= step.y;
                    if step.norm() < NEWTON_TOL {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    return Err(ProjectionError::NoConvergence { x: p.x, y: p.y });
                }
                let f = self.surface.frame_unchecked(u, v, 0.0);
                let det = f.du.x * f.dv.y - f.dv.x * f.du.y;
                if !(det.abs() > MIN_DROP_COS * f.du.norm() * f.dv.norm()) {
                    return Err(ProjectionError::DegenerateJacobian { x: p.x, y: p.y });
                }
                (u, v)
            }
        };
        if !(in_domain(u) && in_domain(v)) {
            return Err(outside());
        }
        Ok((u.clamp(0.0, 1.0), v.clamp(0.0, 1.0)))
    }

    /// Jacobian `∂(u, v)/∂(x, y)` at a layout point with known parameters.
    pub fn jacobian(&self, uv: (f64, f64)) -> Result<Matrix2<f64>, ProjectionError> {
        let (u, v) = uv;
        match self.mode {
            ProjectionMode::ArcLength => Ok(Matrix2::new(
                1.0 / self.speed_u(u),
                0.0,
                0.0,
                1.0 / self.speed_v(v),
            )),
            ProjectionMode::NormalDrop => {
                let f = self.surface.frame_unchecked(u, v, 0.0);
                Matrix2::new(f.du.x, f.dv.x, f.du.y, f.dv.y)
                    .try_inverse()
                    .ok_or(ProjectionError::DegenerateJacobian { x: u, y: v })
            }
        }
    }

    /// Tangent vector on the surface (at normal offset `w`) for a layout
    /// direction `dir` at a point with parameters `uv`.
    pub fn push_forward(
        &self,
        uv: (f64, f64),
        dir: &Vector2<f64>,
        w: f64,
    ) -> Result<V3, ProjectionError> {
        let f = self.surface.frame_at_offset(uv.0, uv.1, w)?;
        Ok(tangent_matrix(&f) * (self.jacobian(uv)? * dir))
    }

    /// Length on the surface of the image of a layout segment.
    pub fn segment_length(&self, a: &P2, b: &P2) -> Result<f64, ProjectionError> {
        let d = b - a;
        let panels = ((d.norm() / MAX_STEP_MM).ceil() as usize).max(1);
        let h = 1.0 / panels as f64;
        let mut total = 0.0;
        let mut err = None;
        for i in 0..panels {
            let lo = i as f64 * h;
            total += gauss5(
                |t| {
                    let p = a + d * t;
                    match self
                        .to_uv(&p)
                        .and_then(|uv| self.push_forward(uv, &d, 0.0))
                    {
                        Ok(v) => v.norm(),
                        Err(e) => {
                            err.get_or_insert(e);
                            0.0
                        }
                    }
                },
                lo,
                lo + h,
            );
        }
        match err {
            Some(e) => Err(e),
            None => Ok(total),
        }
    }
}

fn tangent_matrix(f: &SurfaceFrame) -> Matrix3x2<f64> {
    Matrix3x2::from_columns(&[f.du, f.dv])
}

/// A layout carried onto a surface: every boundary resampled at
/// [`MAX_STEP_MM`] and expressed in surface parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalLayout {
    pub layout: PlanarLayout,
    pub map: ProjectionMap,
    pub outline_uv: Vec<(f64, f64)>,
    pub regions_uv: Vec<Vec<(f64, f64)>>,
    pub feed_uv: (f64, f64),
}

impl ConformalLayout {
    /// Unit surface direction of the conductive raster at a layout point.
    pub fn raster_at(&self, p: &P2) -> Result<V3, ProjectionError> {
        let uv = self.map.to_uv(p)?;
        Ok(self
            .map
            .push_forward(uv, &self.layout.raster_direction, 0.0)?
            .normalize())
    }
}

fn map_loop(map: &ProjectionMap, pts: &[P2]) -> Result<Vec<(f64, f64)>, ProjectionError> {
    let n = pts.len();
    let mut out = Vec::new();
    for i in 0..n {
        let seg = resample_segment(&pts[i], &pts[(i + 1) % n], MAX_STEP_MM);
        for p in &seg[..seg.len() - 1] {
            out.push(map.to_uv(p)?);
        }
    }
    Ok(out)
}

pub fn project_layout(
    layout: &PlanarLayout,
    surface: &Surface,
    mode: ProjectionMode,
) -> Result<ConformalLayout, ProjectionError> {
    surface.validate()?;
    let map = ProjectionMap::new(surface, mode, layout.bbox().center());
    let outline_uv = map_loop(&map, &layout.substrate_outline.vertices)?;
    let regions_uv = layout
        .conductive_regions
        .iter()
        .map(|r| map_loop(&map, &r.vertices))
        .collect::<Result<Vec<_>, _>>()?;
    let feed_uv = map.to_uv(&layout.feed_point)?;
    Ok(ConformalLayout {
        layout: layout.clone(),
        map,
        outline_uv,
        regions_uv,
        feed_uv,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionRow {
    pub feature: String,
    pub nominal_mm: f64,
    pub conformal_mm: f64,
    /// Signed relative error, percent.
    pub error_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub mode: ProjectionMode,
    pub rows: Vec<DistortionRow>,
    pub mean_abs_error_pct: f64,
    pub max_abs_error_pct: f64,
}

impl DistortionReport {
    pub fn row(&self, feature: &str) -> Option<&DistortionRow> {
        self.rows.iter().find(|r| r.feature == feature)
    }
}

pub fn feature_length(map: &ProjectionMap, feature: &Feature) -> Result<f64, ProjectionError> {
    map.segment_length(&feature.start, &feature.end)
}

pub fn distortion_report(conformal: &ConformalLayout) -> Result<DistortionReport, ProjectionError> {
    let mut rows = Vec::new();
    for f in &conformal.layout.features {
        let nominal = f.nominal_length();
        let got = feature_length(&conformal.map, f)?;
        rows.push(DistortionRow {
            feature: f.id.clone(),
            nominal_mm: nominal,
            conformal_mm: got,
            error_pct: 100.0 * (got - nominal) / nominal,
        });
    }
    let abs: Vec<f64> = rows.iter().map(|r| r.error_pct.abs()).collect();
    let mean = if abs.is_empty() {
        0.0
    } else {
        abs.iter().sum::<f64>() / abs.len() as f64
    };
    Ok(DistortionReport {
        mode: conformal.map.mode,
        rows,
        mean_abs_error_pct: mean,
        max_abs_error_pct: abs.iter().cloned().fold(0.0, f64::max),
    })
}
