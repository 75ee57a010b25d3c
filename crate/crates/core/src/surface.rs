//! Parametric substrate surfaces on the unit square `(u, v) ∈ [0, 1]²`.
//!
//! The surface is the bed-side face of the substrate; material occupies the
//! normal offsets `w ∈ [0, thickness]`. Normals point away from the bed.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix2, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::quad::gauss5;

pub type P3 = Point3<f64>;
pub type V3 = Vector3<f64>;

const DOMAIN_TOL: f64 = 1e-9;
const FD_STEP: f64 = 1e-6;
const CURVATURE_GRID: usize = 16;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SurfaceError {
    #[error("parameter ({u}, {v}) outside the unit square")]
    OutOfDomain { u: f64, v: f64 },
    #[error("invalid surface: {0}")]
    InvalidShape(String),
    #[error("offset {offset} mm collapses a radius of curvature {radius} mm")]
    CurvatureViolation { offset: f64, radius: f64 },
    #[error("{count} shells of {layer_height} mm exceed the {thickness} mm substrate")]
    ThicknessExceeded {
        count: usize,
        layer_height: f64,
        thickness: f64,
    },
    #[error("closest-point search did not converge near ({x}, {y}, {z})")]
    LocateFailed { x: f64, y: f64, z: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceShape {
    Plane {
        width_mm: f64,
        length_mm: f64,
    },
    /// Cylinder with its axis along y; `u` runs around the arc, crown at u = ½.
    Cylinder {
        radius_mm: f64,
        arc_angle_rad: f64,
        length_mm: f64,
    },
    /// Spherical cap graphed over the largest square inscribed in its base
    /// circle. The sphere center is the surface origin.
    SphereCap {
        radius_mm: f64,
        cap_angle_rad: f64,
    },
    /// Tensor-product quadratic Bézier patch; `control[i][j]` has u index i.
    Biquadratic { control: [[[f64; 3]; 3]; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub shape: SurfaceShape,
    pub thickness_mm: f64,
    #[serde(default = "zero_origin")]
    pub origin: [f64; 3],
}

fn zero_origin() -> [f64; 3] {
    [0.0; 3]
}

/// Point, unit normal, tangents and first fundamental form at one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFrame {
    pub point: P3,
    pub normal: V3,
    pub du: V3,
    pub dv: V3,
    pub e: f64,
    pub f: f64,
    pub g: f64,
}

impl SurfaceFrame {
    fn new(point: P3, du: V3, dv: V3, normal: V3) -> Self {
        Self {
            point,
            normal,
            du,
            dv,
            e: du.dot(&du),
            f: du.dot(&dv),
            g: dv.dot(&dv),
        }
    }

    /// Metric length of the parameter step `(du, dv)`.
    pub fn metric_length(&self, du: f64, dv: f64) -> f64 {
        (self.e * du * du + 2.0 * self.f * du * dv + self.g * dv * dv)
            .max(0.0)
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetSide {
    Outward,
    Inward,
}

/// A surface displaced along its normal by `offset_mm`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetSurface {
    pub base: Surface,
    pub offset_mm: f64,
}

impl OffsetSurface {
    pub fn evaluate(&self, u: f64, v: f64) -> Result<SurfaceFrame, SurfaceError> {
        self.base.frame_at_offset(u, v, self.offset_mm)
    }
}

fn bernstein2(t: f64) -> [f64; 3] {
    let s = 1.0 - t;
    [s * s, 2.0 * s * t, t * t]
}

fn bernstein2_d(t: f64) -> [f64; 3] {
    [-2.0 * (1.0 - t), 2.0 - 4.0 * t, 2.0 * t]
}

impl Surface {
    pub fn new(shape: SurfaceShape, thickness_mm: f64) -> Result<Self, SurfaceError> {
        let s = Self {
            shape,
            thickness_mm,
            origin: [0.0; 3],
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_origin(mut self, origin: [f64; 3]) -> Self {
        self.origin = origin;
        self
    }

    pub fn origin(&self) -> V3 {
        V3::from(self.origin)
    }

    pub fn validate(&self) -> Result<(), SurfaceError> {
        let bad = |m: &str| Err(SurfaceError::InvalidShape(m.to_string()));
        if !(self.thickness_mm > 0.0) {
            return bad("thickness must be > 0");
        }
        match &self.shape {
            SurfaceShape::Plane {
                width_mm,
                length_mm,
            } => {
                if !(*width_mm > 0.0 && *length_mm > 0.0) {
                    return bad("plane extents must be > 0");
                }
            }
            SurfaceShape::Cylinder {
                radius_mm,
                arc_angle_rad,
                length_mm,
            } => {
                if !(*radius_mm > 0.0 && *length_mm > 0.0) {
                    return bad("cylinder radius and length must be > 0");
                }
                if !(*arc_angle_rad > 0.0 && *arc_angle_rad <= std::f64::consts::PI) {
                    return bad("cylinder arc must be in (0, π]");
                }
            }
            SurfaceShape::SphereCap {
                radius_mm,
                cap_angle_rad,
            } => {
                if !(*radius_mm > 0.0) {
                    return bad("sphere radius must be > 0");
                }
                if !(*cap_angle_rad > 0.0 && *cap_angle_rad < FRAC_PI_2) {
                    return bad("cap half-angle must be in (0, π/2)");
                }
            }
            SurfaceShape::Biquadratic { control } => {
                if control.iter().flatten().flatten().any(|c| !c.is_finite()) {
                    return bad("control points must be finite");
                }
                for i in 0..=CURVATURE_GRID {
                    for j in 0..=CURVATURE_GRID {
                        let (u, v) = (
                            i as f64 / CURVATURE_GRID as f64,
                            j as f64 / CURVATURE_GRID as f64,
                        );
                        let (_, du, dv) = self.biquad_raw(u, v);
                        if du.cross(&dv).norm() < 1e-9 {
                            return bad("biquadratic patch is degenerate");
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Half-side of the square parameter domain of a sphere cap.
    fn cap_half_side(radius: f64, cap: f64) -> f64 {
        radius * cap.sin() / std::f64::consts::SQRT_2
    }

    fn biquad_raw(&self, u: f64, v: f64) -> (P3, V3, V3) {
        let SurfaceShape::Biquadratic { control } = &self.shape else {
            unreachable!()
        };
        let (bu, bv, dbu, dbv) = (bernstein2(u), bernstein2(v), bernstein2_d(u), bernstein2_d(v));
        let mut p = V3::zeros();
        let mut pu = V3::zeros();
        let mut pv = V3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let c = V3::from(control[i][j]);
                p += c * (bu[i] * bv[j]);
                pu += c * (dbu[i] * bv[j]);
                pv += c * (bu[i] * dbv[j]);
            }
        }
        (P3::from(p), pu, pv)
    }

    /// Point, tangents, normal and normal derivatives with no domain check.
    fn raw(&self, u: f64, v: f64) -> (P3, V3, V3, V3, V3, V3) {
        let o = self.origin();
        match &self.shape {
            SurfaceShape::Plane {
                width_mm,
                length_mm,
            } => {
                let p = P3::new(u * width_mm, v * length_mm, 0.0) + o;
                let z = V3::zeros();
                (p, V3::x() * *width_mm, V3::y() * *length_mm, V3::z(), z, z)
            }
            SurfaceShape::Cylinder {
                radius_mm: r,
                arc_angle_rad: arc,
                length_mm: len,
            } => {
                let phi = FRAC_PI_2 + arc * (0.5 - u);
                let (s, c) = phi.sin_cos();
                let p = P3::new(r * c, (v - 0.5) * len, r * s) + o;
                let du = V3::new(s, 0.0, -c) * (arc * r);
                let dv = V3::new(0.0, *len, 0.0);
                let n = V3::new(c, 0.0, s);
                (p, du, dv, n, du / *r, V3::zeros())
            }
            SurfaceShape::SphereCap {
                radius_mm: r,
                cap_angle_rad: cap,
            } => {
                let a = Self::cap_half_side(*r, *cap);
                let x = a * (2.0 * u - 1.0);
                let y = a * (2.0 * v - 1.0);
                let z = (r * r - x * x - y * y).sqrt();
                let du = V3::new(2.0 * a, 0.0, -2.0 * a * x / z);
                let dv = V3::new(0.0, 2.0 * a, -2.0 * a * y / z);
                let n = V3::new(x, y, z) / *r;
                (P3::new(x, y, z) + o, du, dv, n, du / *r, dv / *r)
            }
            SurfaceShape::Biquadratic { .. } => {
                let (p, du, dv) = self.biquad_raw(u, v);
                let n = du.cross(&dv).normalize();
                let normal_at = |u: f64, v: f64| {
                    let (_, a, b) = self.biquad_raw(u, v);
                    a.cross(&b).normalize()
                };
                let nu = (normal_at(u + FD_STEP, v) - normal_at(u - FD_STEP, v)) / (2.0 * FD_STEP);
                let nv = (normal_at(u, v + FD_STEP) - normal_at(u, v - FD_STEP)) / (2.0 * FD_STEP);
                (p + o, du, dv, n, nu, nv)
            }
        }
    }

    fn check_domain(u: f64, v: f64) -> Result<(f64, f64), SurfaceError> {
        let ok = |t: f64| (-DOMAIN_TOL..=1.0 + DOMAIN_TOL).contains(&t);
        if !(ok(u) && ok(v)) {
            return Err(SurfaceError::OutOfDomain { u, v });
        }
        Ok((u.clamp(0.0, 1.0), v.clamp(0.0, 1.0)))
    }

    pub fn evaluate(&self, u: f64, v: f64) -> Result<SurfaceFrame, SurfaceError> {
        self.frame_at_offset(u, v, 0.0)
    }

    /// Frame of the parallel surface at normal distance `offset` (negative
    /// offsets move against the normal).
    pub fn frame_at_offset(&self, u: f64, v: f64, offset: f64) -> Result<SurfaceFrame, SurfaceError> {
        let (u, v) = Self::check_domain(u, v)?;
        Ok(self.frame_unchecked(u, v, offset))
    }

    /// Same as [`Surface::frame_at_offset`] but extrapolates outside the domain.
    pub fn frame_unchecked(&self, u: f64, v: f64, offset: f64) -> SurfaceFrame {
        let (p, du, dv, n, nu, nv) = self.raw(u, v);
        if offset == 0.0 {
            SurfaceFrame::new(p, du, dv, n)
        } else {
            SurfaceFrame::new(p + n * offset, du + nu * offset, dv + nv * offset, n)
        }
    }

    /// Principal curvatures (eigenvalues of the shape operator, positive where
    /// the surface bends away from its normal) at `(u, v)`.
    pub fn principal_curvatures(&self, u: f64, v: f64) -> (f64, f64) {
        let (_, du, dv, _, nu, nv) = self.raw(u, v);
        let first = Matrix2::new(du.dot(&du), du.dot(&dv), dv.dot(&du), dv.dot(&dv));
        let second = Matrix2::new(nu.dot(&du), nu.dot(&dv), nv.dot(&du), nv.dot(&dv));
        let shape = first.try_inverse().unwrap_or_else(Matrix2::zeros) * second;
        let tr = shape.trace();
        let det = shape.determinant();
        let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
        (0.5 * tr + disc, 0.5 * tr - disc)
    }

    /// Largest curvature over a sample grid; offsets below `-1/κ` collapse.
    pub fn max_curvature(&self) -> f64 {
        match &self.shape {
            SurfaceShape::Plane { .. } => 0.0,
            SurfaceShape::Cylinder { radius_mm, .. } | SurfaceShape::SphereCap { radius_mm, .. } => {
                1.0 / radius_mm
            }
            SurfaceShape::Biquadratic { .. } => {
                let mut k: f64 = 0.0;
                for i in 0..=CURVATURE_GRID {
                    for j in 0..=CURVATURE_GRID {
                        let (k1, k2) = self.principal_curvatures(
                            i as f64 / CURVATURE_GRID as f64,
                            j as f64 / CURVATURE_GRID as f64,
                        );
                        k = k.max(k1).max(k2);
                    }
                }
                k
            }
        }
    }

    /// Stack of `count` parallel surfaces spaced by `layer_height`.
    ///
    /// Outward shells sit at `k·layer_height` (k = 1..=count), the nozzle
    /// height of each deposited layer; inward shells mirror them.
    pub fn offset_shells(
        &self,
        layer_height: f64,
        count: usize,
        side: OffsetSide,
    ) -> Result<Vec<OffsetSurface>, SurfaceError> {
        if !(layer_height > 0.0) || count as f64 * layer_height > self.thickness_mm + 1e-9 {
            return Err(SurfaceError::ThicknessExceeded {
                count,
                layer_height,
                thickness: self.thickness_mm,
            });
        }
        let sign = match side {
            OffsetSide::Outward => 1.0,
            OffsetSide::Inward => -1.0,
        };
        let deepest = sign * count as f64 * layer_height;
        let kmax = self.max_curvature();
        if deepest < 0.0 && 1.0 + deepest * kmax <= 0.0 {
            return Err(SurfaceError::CurvatureViolation {
                offset: -deepest,
                radius: 1.0 / kmax,
            });
        }
        Ok((1..=count)
            .map(|k| OffsetSurface {
                base: self.clone(),
                offset_mm: sign * k as f64 * layer_height,
            })
            .collect())
    }

    /// Closest base-surface parameters and normal offset of a point.
    /// Parameters may fall outside `[0, 1]` for points beyond the edges.
    pub fn locate(&self, p: &P3) -> Result<(f64, f64, f64), SurfaceError> {
        let q = p - self.origin();
        match &self.shape {
            SurfaceShape::Plane {
                width_mm,
                length_mm,
            } => Ok((q.x / width_mm, q.y / length_mm, q.z)),
            SurfaceShape::Cylinder {
                radius_mm,
                arc_angle_rad,
                length_mm,
            } => {
                let phi = q.z.atan2(q.x);
                let u = 0.5 - (phi - FRAC_PI_2) / arc_angle_rad;
                let rho = (q.x * q.x + q.z * q.z).sqrt();
                Ok((u, q.y / length_mm + 0.5, rho - radius_mm))
            }
            SurfaceShape::SphereCap {
                radius_mm,
                cap_angle_rad,
            } => {
                let rho = q.coords.norm();
                if rho == 0.0 {
                    return Ok((0.5, 0.5, -radius_mm));
                }
                let a = Self::cap_half_side(*radius_mm, *cap_angle_rad);
                let s = radius_mm / rho;
                Ok((
                    0.5 * (q.x * s / a + 1.0),
                    0.5 * (q.y * s / a + 1.0),
                    rho - radius_mm,
                ))
            }
            SurfaceShape::Biquadratic { .. } => self.locate_numeric(p),
        }
    }

    fn locate_numeric(&self, p: &P3) -> Result<(f64, f64, f64), SurfaceError> {
        // coarse seed, then Gauss-Newton on the tangential residual
        let mut best = (0.5, 0.5, f64::INFINITY);
        let n = 8;
        for i in 0..=n {
            for j in 0..=n {
                let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
                let d = (self.raw(u, v).0 - p).norm_squared();
                if d < best.2 {
                    best = (u, v, d);
                }
            }
        }
        let (mut u, mut v) = (best.0, best.1);
        for _ in 0..50 {
            let (s, du, dv, _, _, _) = self.raw(u, v);
            let r = p - s;
            let jt = Matrix2::new(du.dot(&du), du.dot(&dv), dv.dot(&du), dv.dot(&dv));
            let rhs = nalgebra::Vector2::new(r.dot(&du), r.dot(&dv));
            let Some(step) = jt.try_inverse().map(|m| m * rhs) else {
                break;
            };
            u += step.x;
            v += step.y;
            if step.norm() < 1e-13 {
                let (s, _, _, n, _, _) = self.raw(u, v);
                return Ok((u, v, (p - s).dot(&n)));
            }
        }
        Err(SurfaceError::LocateFailed {
            x: p.x,
            y: p.y,
            z: p.z,
        })
    }

    /// Axis-aligned bounds of the solid substrate from an `n × n` sampling of
    /// its two faces.
    pub fn sampled_bounds(&self, n: usize) -> (P3, P3) {
        let mut lo = P3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = P3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for i in 0..=n {
            for j in 0..=n {
                for w in [0.0, self.thickness_mm] {
                    let f = self.frame_unchecked(i as f64 / n as f64, j as f64 / n as f64, w);
                    lo = lo.inf(&f.point);
                    hi = hi.sup(&f.point);
                }
            }
        }
        (lo, hi)
    }
}

/// Length on the surface of the parameter-space polyline `curve`, using a
/// five-point Gauss rule on each segment.
pub fn surface_arc_length(surface: &Surface, curve: &[(f64, f64)]) -> Result<f64, SurfaceError> {
    for &(u, v) in curve {
        Surface::check_domain(u, v)?;
    }
    Ok(curve
        .windows(2)
        .map(|w| {
            let (d_u, d_v) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            gauss5(
                |t| {
                    surface
                        .frame_unchecked(w[0].0 + t * d_u, w[0].1 + t * d_v, 0.0)
                        .metric_length(d_u, d_v)
                },
                0.0,
                1.0,
            )
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn plane() -> Surface {
        Surface::new(
            SurfaceShape::Plane {
                width_mm: 100.0,
                length_mm: 100.0,
            },
            1.5,
        )
        .unwrap()
    }

    fn cylinder() -> Surface {
        Surface::new(
            SurfaceShape::Cylinder {
                radius_mm: 40.0,
                arc_angle_rad: PI,
                length_mm: 60.0,
            },
            1.5,
        )
        .unwrap()
    }

    fn cap() -> Surface {
        Surface::new(
            SurfaceShape::SphereCap {
                radius_mm: 60.0,
                cap_angle_rad: PI / 4.0,
            },
            1.5,
        )
        .unwrap()
    }

    fn saddle() -> Surface {
        let mut control = [[[0.0; 3]; 3]; 3];
        for (i, row) in control.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                let (x, y) = (i as f64 * 20.0, j as f64 * 20.0);
                let z = if i == 1 && j == 1 {
                    4.0
                } else if i == 1 {
                    6.0
                } else {
                    0.0
                };
                *c = [x, y, z];
            }
        }
        Surface::new(SurfaceShape::Biquadratic { control }, 1.0).unwrap()
    }

    #[test]
    fn plane_center() {
        let f = plane().evaluate(0.5, 0.5).unwrap();
        assert_eq!(f.point, P3::new(50.0, 50.0, 0.0));
        assert_eq!(f.normal, V3::z());
    }

    #[test]
    fn cylinder_crown_and_sides() {
        let s = cylinder();
        let f = s.evaluate(0.5, 0.5).unwrap();
        assert_relative_eq!(f.point, P3::new(0.0, 0.0, 40.0), epsilon = 1e-12);
        assert_relative_eq!(f.normal, V3::z(), epsilon = 1e-15);
        let side = s.evaluate(1.0, 0.5).unwrap();
        assert_relative_eq!(side.point, P3::new(40.0, 0.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(side.normal, V3::x(), epsilon = 1e-15);
    }

    #[test]
    fn out_of_domain_rejected() {
        assert!(matches!(
            plane().evaluate(1.2, 0.5),
            Err(SurfaceError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn cap_geometry() {
        let s = cap();
        let top = s.evaluate(0.5, 0.5).unwrap();
        assert_relative_eq!(top.point, P3::new(0.0, 0.0, 60.0), epsilon = 1e-12);
        let corner = s.evaluate(1.0, 1.0).unwrap();
        assert_relative_eq!(corner.point.coords.norm(), 60.0, epsilon = 1e-12);
        assert_relative_eq!(corner.point.x, 30.0, epsilon = 1e-12);
        assert_relative_eq!(corner.normal.dot(&corner.du), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cylinder_isocurve_length() {
        let s = cylinder();
        let pts: Vec<_> = (0..=8).map(|i| (i as f64 / 8.0, 0.3)).collect();
        let l = surface_arc_length(&s, &pts).unwrap();
        assert_relative_eq!(l, 40.0 * PI, max_relative = 1e-14);
    }

    #[test]
    fn offsets_for_each_kind() {
        let s = cylinder();
        let shells = s.offset_shells(0.3, 5, OffsetSide::Outward).unwrap();
        assert_eq!(shells.len(), 5);
        let top = shells[4].evaluate(0.5, 0.5).unwrap();
        assert_relative_eq!(top.point.z, 41.5, epsilon = 1e-12);
        // circumference scales with radius
        let f = shells[4].evaluate(0.2, 0.5).unwrap();
        assert_relative_eq!(f.du.norm(), PI * 41.5, max_relative = 1e-12);
        assert!(matches!(
            s.offset_shells(0.3, 6, OffsetSide::Outward),
            Err(SurfaceError::ThicknessExceeded { .. })
        ));
    }

    #[test]
    fn inward_offset_past_radius_fails() {
        let tiny = Surface::new(
            SurfaceShape::Cylinder {
                radius_mm: 1.0,
                arc_angle_rad: PI,
                length_mm: 10.0,
            },
            2.0,
        )
        .unwrap();
        assert!(matches!(
            tiny.offset_shells(0.5, 2, OffsetSide::Inward),
            Err(SurfaceError::CurvatureViolation { .. })
        ));
        assert!(tiny.offset_shells(0.4, 2, OffsetSide::Inward).is_ok());
    }

    #[test]
    fn biquadratic_offset_is_parallel() {
        let s = saddle();
        let d = 0.7;
        for &(u, v) in &[(0.2, 0.3), (0.5, 0.5), (0.8, 0.1)] {
            let base = s.evaluate(u, v).unwrap();
            let off = s.frame_at_offset(u, v, d).unwrap();
            assert_relative_eq!((off.point - base.point).norm(), d, epsilon = 1e-12);
            // first-order offset tangents stay orthogonal to the shared normal
            assert!(off.du.dot(&base.normal).abs() < 1e-6);
            assert!(off.dv.dot(&base.normal).abs() < 1e-6);
        }
    }

    #[test]
    fn sphere_curvature() {
        let (k1, k2) = cap().principal_curvatures(0.3, 0.6);
        assert_relative_eq!(k1, 1.0 / 60.0, epsilon = 1e-8);
        assert_relative_eq!(k2, 1.0 / 60.0, epsilon = 1e-8);
    }

    #[test]
    fn locate_inverts_evaluate() {
        for s in [plane(), cylinder(), cap(), saddle()] {
            let s = s.with_origin([1.0, -2.0, 3.0]);
            for &(u, v, w) in &[(0.2, 0.3, 0.1), (0.5, 0.5, 0.0), (0.9, 0.7, 1.2)] {
                let p = s.frame_at_offset(u, v, w).unwrap().point;
                let (lu, lv, lw) = s.locate(&p).unwrap();
                assert_relative_eq!(lu, u, epsilon = 1e-9);
                assert_relative_eq!(lv, v, epsilon = 1e-9);
                assert_relative_eq!(lw, w, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn toml_shape_round_trip() {
        let text = r#"
thickness_mm = 1.5
origin = [0.0, 0.0, -42.0]
[shape]
kind = "sphere_cap"
radius_mm = 60.0
cap_angle_rad = 0.7853981633974483
"#;
        let s: Surface = toml::from_str(text).unwrap();
        assert!(matches!(s.shape, SurfaceShape::SphereCap { .. }));
        s.validate().unwrap();
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn frame_normal_is_unit_and_orthogonal(u in 0.0..1.0f64, v in 0.0..1.0f64, w in 0.0..1.5f64) {
                for s in [plane(), cylinder(), cap(), saddle()] {
                    let f = s.frame_at_offset(u, v, w).unwrap();
                    prop_assert!((f.normal.norm() - 1.0).abs() < 1e-12);
                    prop_assert!(f.normal.dot(&f.du).abs() < 1e-6 * f.du.norm());
                    prop_assert!(f.normal.dot(&f.dv).abs() < 1e-6 * f.dv.norm());
                    prop_assert!(f.e > 0.0 && f.g > 0.0 && f.e * f.g - f.f * f.f > 0.0);
                }
            }
        }
    }
}
