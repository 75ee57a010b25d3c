//! Five-axis kinematics for a printer with a fixed vertical nozzle and a
//! tilting rotary table: C spins the part about the table normal and rides
//! on B, which tilts about machine X.
//!
//! A part-frame point `p` sits at machine position
//! `pivot + Rx(B)·Rz(C)·(p − part_origin)`, and the nozzle axis in the part
//! frame is `(Rx(B)·Rz(C))ᵀ·ẑ = (sin C sin B, cos C sin B, cos B)`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3};
use serde::{Deserialize, Serialize};

use crate::quad::gauss5_composite;
use crate::surface::{P3, V3};

const SINGULAR_RHO: f64 = 1e-12;
const LIMIT_TOL: f64 = 1e-9;
/// Below this xyz travel a move is fed by its rotary distance.
pub const MIN_LINEAR_MM: f64 = 1e-3;
const GAUSS_PANELS: usize = 8;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum KinematicsError {
    #[error("{joint} = {value:.6} outside [{min:.6}, {max:.6}]")]
    JointLimit {
        joint: Joint,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("segment moves neither the tip nor any joint")]
    ZeroLengthSegment,
    #[error("tool axis must be a nonzero finite vector")]
    InvalidAxis,
    #[error("invalid machine configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Joint {
    X,
    Y,
    Z,
    B,
    C,
}

impl Joint {
    pub const ALL: [Joint; 5] = [Joint::X, Joint::Y, Joint::Z, Joint::B, Joint::C];

    pub fn is_rotary(self) -> bool {
        matches!(self, Joint::B | Joint::C)
    }
}

impl std::fmt::Display for Joint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Joint::X => "X",
            Joint::Y => "Y",
            Joint::Z => "Z",
            Joint::B => "B",
            Joint::C => "C",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineConfig {
    pub x_limits_mm: (f64, f64),
    pub y_limits_mm: (f64, f64),
    pub z_limits_mm: (f64, f64),
    pub b_limits_deg: (f64, f64),
    /// `None` for an unbounded C axis.
    pub c_limits_deg: Option<(f64, f64)>,
    pub pivot_mm: [f64; 3],
    pub part_origin_mm: [f64; 3],
    pub max_linear_mm_s: f64,
    pub max_b_rad_s: f64,
    pub max_c_rad_s: f64,
    pub min_feed_mm_min: f64,
    pub tool_change_s: f64,
}

impl Default for MachineConfig {
    fn default() -> Self {
        Self {
            x_limits_mm: (-200.0, 200.0),
            y_limits_mm: (-200.0, 200.0),
            z_limits_mm: (-50.0, 250.0),
            b_limits_deg: (-45.0, 45.0),
            c_limits_deg: None,
            pivot_mm: [0.0; 3],
            part_origin_mm: [0.0; 3],
            max_linear_mm_s: 200.0,
            max_b_rad_s: 6.0,
            max_c_rad_s: 12.0,
            min_feed_mm_min: 1.0,
            tool_change_s: 30.0,
        }
    }
}

impl MachineConfig {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let ordered = |(a, b): (f64, f64)| a < b;
        let mut ranges = vec![
            self.x_limits_mm,
            self.y_limits_mm,
            self.z_limits_mm,
            self.b_limits_deg,
        ];
        ranges.extend(self.c_limits_deg);
        if !ranges.into_iter().all(ordered) {
            return Err(KinematicsError::InvalidConfig("joint limits must be ordered".into()));
        }
        if !(self.b_limits_deg.0 >= -90.0 && self.b_limits_deg.1 <= 90.0) {
            return Err(KinematicsError::InvalidConfig("B limits exceed ±90°".into()));
        }
        let rates = [
            self.max_linear_mm_s,
            self.max_b_rad_s,
            self.max_c_rad_s,
            self.min_feed_mm_min,
        ];
        if rates.iter().any(|r| !(*r > 0.0)) || !(self.tool_change_s >= 0.0) {
            return Err(KinematicsError::InvalidConfig("rates must be > 0".into()));
        }
        Ok(())
    }

    pub fn pivot(&self) -> V3 {
        V3::from(self.pivot_mm)
    }

    pub fn part_origin(&self) -> V3 {
        V3::from(self.part_origin_mm)
    }

    /// Joint range in internal units (mm, rad); `None` when unbounded.
    pub fn limits(&self, joint: Joint) -> Option<(f64, f64)> {
        match joint {
            Joint::X => Some(self.x_limits_mm),
            Joint::Y => Some(self.y_limits_mm),
            Joint::Z => Some(self.z_limits_mm),
            Joint::B => Some((self.b_limits_deg.0.to_radians(), self.b_limits_deg.1.to_radians())),
            Joint::C => self
                .c_limits_deg
                .map(|(a, b)| (a.to_radians(), b.to_radians())),
        }
    }

    /// Speed limit of one joint, mm/s or rad/s.
    pub fn max_rate(&self, joint: Joint) -> f64 {
        match joint {
            Joint::X | Joint::Y | Joint::Z => self.max_linear_mm_s,
            Joint::B => self.max_b_rad_s,
            Joint::C => self.max_c_rad_s,
        }
    }

    /// First joint of `state` outside its limits.
    pub fn check(&self, state: &JointState) -> Result<(), KinematicsError> {
        for joint in Joint::ALL {
            if let Some((min, max)) = self.limits(joint) {
                let value = state.get(joint);
                let tol = LIMIT_TOL * (1.0 + value.abs());
                if value < min - tol || value > max + tol {
                    return Err(KinematicsError::JointLimit {
                        joint,
                        value,
                        min,
                        max,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Machine coordinates: linear axes in mm, rotary axes in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub b: f64,
    pub c: f64,
}

impl JointState {
    pub fn get(&self, joint: Joint) -> f64 {
        match joint {
            Joint::X => self.x,
            Joint::Y => self.y,
            Joint::Z => self.z,
            Joint::B => self.b,
            Joint::C => self.c,
        }
    }

    pub fn xyz(&self) -> V3 {
        V3::new(self.x, self.y, self.z)
    }

    fn lerp(&self, other: &JointState, t: f64) -> JointState {
        let l = |a: f64, b: f64| a + (b - a) * t;
        JointState {
            x: l(self.x, other.x),
            y: l(self.y, other.y),
            z: l(self.z, other.z),
            b: l(self.b, other.b),
            c: l(self.c, other.c),
        }
    }
}

/// Nozzle tip position and tool axis, both in the part frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToolPose {
    pub position: P3,
    pub axis: V3,
}

/// Part-to-machine rotation `Rx(B)·Rz(C)`.
pub fn table_rotation(b: f64, c: f64) -> Matrix3<f64> {
    (Rotation3::from_axis_angle(&V3::x_axis(), b) * Rotation3::from_axis_angle(&V3::z_axis(), c))
        .into_inner()
}

/// `a + 2πk` closest to `target`.
pub fn unwrap_toward(a: f64, target: f64) -> f64 {
    a + 2.0 * PI * ((target - a) / (2.0 * PI)).round()
}

pub fn fk(state: &JointState, machine: &MachineConfig) -> ToolPose {
    let r = table_rotation(state.b, state.c);
    let rt = r.transpose();
    ToolPose {
        position: P3::from(machine.part_origin() + rt * (state.xyz() - machine.pivot())),
        axis: rt * V3::z(),
    }
}

/// Joint state that places the nozzle tip at `pose.position` with the part
/// oriented so `pose.axis` is vertical. Of the two (B, C) solutions, the one
/// with the smaller C move from `prev` wins; at the vertical singularity C
/// holds its previous value.
pub fn ik(
    pose: &ToolPose,
    prev: &JointState,
    machine: &MachineConfig,
) -> Result<JointState, KinematicsError> {
    let a = pose
        .axis
        .try_normalize(1e-300)
        .filter(|a| a.iter().all(|v| v.is_finite()))
        .ok_or(KinematicsError::InvalidAxis)?;
    let rho = a.x.hypot(a.y);
    let candidates: Vec<(f64, f64)> = if rho < SINGULAR_RHO {
        vec![(0.0, prev.c)]
    } else {
        let c1 = a.x.atan2(a.y);
        let b1 = rho.atan2(a.z);
        vec![
            (b1, unwrap_toward(c1, prev.c)),
            (-b1, unwrap_toward(c1 + PI, prev.c)),
        ]
    };
    let to_state = |(b, c): (f64, f64)| {
        let xyz = machine.pivot() + table_rotation(b, c) * (pose.position.coords - machine.part_origin());
        JointState {
            x: xyz.x,
            y: xyz.y,
            z: xyz.z,
            b,
            c,
        }
    };
    let mut best: Option<JointState> = None;
    let mut first_err = None;
    for cand in candidates {
        let s = to_state(cand);
        match machine.check(&s) {
            Ok(()) => {
                let better = best.is_none_or(|b| (s.c - prev.c).abs() < (b.c - prev.c).abs());
                if better {
                    best = Some(s);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one candidate"))
}

/// Tip speed in the part frame along the linear joint interpolation, mm per
/// unit segment parameter.
fn tip_speed(a: &JointState, b: &JointState, machine: &MachineConfig, t: f64) -> f64 {
    let s = a.lerp(b, t);
    let (db, dc) = (b.b - a.b, b.c - a.c);
    let dxyz = b.xyz() - a.xyz();
    let rx = Rotation3::from_axis_angle(&V3::x_axis(), s.b).into_inner();
    let rz = Rotation3::from_axis_angle(&V3::z_axis(), s.c).into_inner();
    let (sb, cb) = s.b.sin_cos();
    let (sc, cc) = s.c.sin_cos();
    let drx = Matrix3::new(0.0, 0.0, 0.0, 0.0, -sb, -cb, 0.0, cb, -sb);
    let drz = Matrix3::new(-sc, -cc, 0.0, cc, -sc, 0.0, 0.0, 0.0, 0.0);
    let r = rx * rz;
    let r_dot = drx * rz * db + rx * drz * dc;
    let q = s.xyz() - machine.pivot();
    (r_dot.transpose() * q + r.transpose() * dxyz).norm()
}

/// Length of the tip path relative to the part between two joint states.
pub fn tip_path_length(a: &JointState, b: &JointState, machine: &MachineConfig) -> f64 {
    gauss5_composite(|t| tip_speed(a, b, machine, t), 0.0, 1.0, GAUSS_PANELS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedFlavor {
    /// G94, F in mm/min of xyz travel (rotary degrees/min for pure rotations).
    DesktopMmMin,
    /// G93, F is the reciprocal of the move time in minutes.
    InverseTime,
}

/// Travel of one move for the feed word: xyz distance in mm, or rotary
/// distance in degrees when the linear axes barely move.
pub fn feed_distance(a: &JointState, b: &JointState) -> (f64, bool) {
    let lin = (b.xyz() - a.xyz()).norm();
    if lin >= MIN_LINEAR_MM {
        (lin, false)
    } else {
        let db = (b.b - a.b).to_degrees();
        let dc = (b.c - a.c).to_degrees();
        (db.hypot(dc), true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentTiming {
    pub tip_length_mm: f64,
    pub duration_s: f64,
    pub feed: f64,
    /// A joint speed limit stretched the move.
    pub joint_limited: bool,
}

/// Time and feed word for moving between two joint states with the tip at
/// `tip_speed_mm_s` relative to the part.
pub fn retime(
    a: &JointState,
    b: &JointState,
    tip_speed_mm_s: f64,
    machine: &MachineConfig,
    flavor: FeedFlavor,
) -> Result<SegmentTiming, KinematicsError> {
    let tip = tip_path_length(a, b, machine);
    let lin = (b.xyz() - a.xyz()).norm();
    let joint_dt = (lin / machine.max_linear_mm_s)
        .max((b.b - a.b).abs() / machine.max_b_rad_s)
        .max((b.c - a.c).abs() / machine.max_c_rad_s);
    if tip < 1e-12 && joint_dt == 0.0 {
        return Err(KinematicsError::ZeroLengthSegment);
    }
    let nominal = tip / tip_speed_mm_s;
    let joint_limited = joint_dt > nominal;
    let mut dt = nominal.max(joint_dt);
    let (dist, _) = feed_distance(a, b);
    let feed = match flavor {
        FeedFlavor::DesktopMmMin => {
            let f = dist / dt * 60.0;
            if f < machine.min_feed_mm_min {
                // the controller cannot go slower; the move takes less time
                dt = dist / machine.min_feed_mm_min * 60.0;
                machine.min_feed_mm_min
            } else {
                f
            }
        }
        FeedFlavor::InverseTime => 60.0 / dt,
    };
    Ok(SegmentTiming {
        tip_length_mm: tip,
        duration_s: dt,
        feed,
        joint_limited,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn wide() -> MachineConfig {
        MachineConfig {
            b_limits_deg: (-90.0, 90.0),
            z_limits_mm: (-200.0, 250.0),
            ..MachineConfig::default()
        }
    }

    #[test]
    fn vertical_axis_is_singular() {
        let m = MachineConfig::default();
        let prev = JointState {
            c: 1.3,
            ..Default::default()
        };
        let s = ik(
            &ToolPose {
                position: P3::new(1.0, 2.0, 3.0),
                axis: V3::z(),
            },
            &prev,
            &m,
        )
        .unwrap();
        assert_eq!(s.b, 0.0);
        assert_eq!(s.c, 1.3);
        let back = fk(&s, &m);
        assert_relative_eq!(back.position, P3::new(1.0, 2.0, 3.0), epsilon = 1e-12);
    }

    #[test]
    fn tilted_axis_round_trip() {
        let m = MachineConfig::default();
        let axis = V3::new(0.3, -0.2, 0.9).normalize();
        let pose = ToolPose {
            position: P3::new(10.0, -5.0, 2.0),
            axis,
        };
        let s = ik(&pose, &JointState::default(), &m).unwrap();
        let back = fk(&s, &m);
        assert_relative_eq!(back.position, pose.position, epsilon = 1e-12);
        assert_relative_eq!(back.axis, axis, epsilon = 1e-12);
    }

    #[test]
    fn branch_keeps_c_continuous_through_pole() {
        let m = MachineConfig::default();
        let mut prev = JointState::default();
        let mut max_step: f64 = 0.0;
        // sweep the axis across the pole along the y-z plane
        for i in -20..=20 {
            let t = i as f64 * 0.02;
            let axis = V3::new(0.0, t.sin(), t.cos());
            let s = ik(
                &ToolPose {
                    position: P3::origin(),
                    axis,
                },
                &prev,
                &m,
            )
            .unwrap();
            max_step = max_step.max((s.c - prev.c).abs());
            prev = s;
        }
        assert!(max_step < 1e-12, "C jumped by {max_step}");
    }

    #[test]
    fn b_limit_enforced() {
        let m = MachineConfig::default();
        let pose = ToolPose {
            position: P3::origin(),
            axis: V3::new(1.0, 0.0, 0.2).normalize(),
        };
        assert!(matches!(
            ik(&pose, &JointState::default(), &m),
            Err(KinematicsError::JointLimit { joint: Joint::B, .. })
        ));
        assert!(ik(&pose, &JointState::default(), &wide()).is_ok());
    }

    #[test]
    fn pure_rotation_tip_length() {
        let m = MachineConfig::default();
        // tip 50 mm from the C axis; 0.1 rad of C sweeps 5 mm of part surface
        let a = JointState {
            x: 50.0,
            ..Default::default()
        };
        let b = JointState { c: 0.1, ..a };
        assert_relative_eq!(tip_path_length(&a, &b, &m), 5.0, epsilon = 1e-12);
        let t = retime(&a, &b, 10.0, &m, FeedFlavor::DesktopMmMin).unwrap();
        assert_relative_eq!(t.duration_s, 0.5, epsilon = 1e-12);
        // no xyz motion: feed is rotary degrees per minute
        assert_relative_eq!(t.feed, 0.1f64.to_degrees() / 0.5 * 60.0, epsilon = 1e-9);
    }

    #[test]
    fn joint_speed_clamp_flags() {
        let m = MachineConfig::default();
        let a = JointState::default();
        // rotation about the tip itself: zero tip motion, joint-limited time
        let b = JointState { c: 1.2, ..a };
        let t = retime(&a, &b, 10.0, &m, FeedFlavor::InverseTime).unwrap();
        assert!(t.joint_limited);
        assert_relative_eq!(t.duration_s, 0.1, epsilon = 1e-12);
        assert_relative_eq!(t.feed, 600.0, epsilon = 1e-9);
        assert_eq!(
            retime(&a, &a, 10.0, &m, FeedFlavor::DesktopMmMin),
            Err(KinematicsError::ZeroLengthSegment)
        );
    }

    #[test]
    fn linear_move_feed() {
        let m = MachineConfig::default();
        let a = JointState::default();
        let b = JointState {
            x: 3.0,
            y: 4.0,
            ..a
        };
        let t = retime(&a, &b, 25.0, &m, FeedFlavor::DesktopMmMin).unwrap();
        assert_relative_eq!(t.duration_s, 0.2, epsilon = 1e-12);
        assert_relative_eq!(t.feed, 1500.0, epsilon = 1e-9);
        assert!(!t.joint_limited);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(256))]

            #[test]
            fn round_trip(px in -50.0..50.0f64, py in -50.0..50.0f64, pz in 0.0..60.0f64,
                          theta in 0.0..1.5f64, phi in -PI..PI, c0 in -10.0..10.0f64) {
                let m = wide();
                let axis = V3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
                let pose = ToolPose { position: P3::new(px, py, pz), axis };
                let prev = JointState { c: c0, ..Default::default() };
                let s = ik(&pose, &prev, &m).unwrap();
                let back = fk(&s, &m);
                prop_assert!((back.position - pose.position).norm() < 1e-9);
                prop_assert!((back.axis - axis).norm() < 1e-9);
                prop_assert!((s.c - c0).abs() <= PI / 2.0 + 1e-9);
            }
        }
    }
}
