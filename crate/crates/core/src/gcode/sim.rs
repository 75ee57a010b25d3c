//! Machine-state walk over a parsed program.
//!
//! Time follows the feed convention of the active mode: under `G94` a move
//! lasts its feed distance over `F`, under `G93` it lasts `1/F` minutes.
//! Problems are collected as report rows rather than errors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ExtrusionMode, GProgram, Instruction, Move};
use crate::kinematics::{feed_distance, FeedFlavor, Joint, JointState, MachineConfig};
use crate::materials::MaterialDb;

/// Relative slack on joint speed checks, covering five-decimal rounding.
const SPEED_SLACK: f64 = 1e-3;
/// Extruding this far below the material print temperature is cold.
const COLD_MARGIN_C: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    /// Joint target outside its range; rotary values in degrees.
    JointLimit { joint: Joint, value: f64 },
    /// Joint speed above its limit, mm/s or rad/s.
    JointSpeed { joint: Joint, value: f64, max: f64 },
    ColdExtrusion { tool: usize, temp_c: f64 },
    UnknownTool { tool: usize },
    NoActiveTool,
    ExtrusionModeUnset,
    MotionBeforeHome,
    UnitsUnset,
    MissingFeed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub line: usize,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ToolUsage {
    pub material: String,
    pub filament_length_mm: f64,
    pub volume_mm3: f64,
    pub mass_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub total_time_s: f64,
    pub motion_time_s: f64,
    pub tool_change_time_s: f64,
    pub moves: usize,
    pub mass_g: f64,
    pub per_tool: BTreeMap<usize, ToolUsage>,
    /// Peak speed per joint, mm/s for linear joints and rad/s for rotary.
    pub max_joint_speed: BTreeMap<Joint, f64>,
    pub violations: Vec<Violation>,
    pub final_pose: JointState,
}

struct State {
    pose: JointState,
    homed: bool,
    units: bool,
    e_mode: Option<ExtrusionMode>,
    feed_mode: FeedFlavor,
    feed: Option<f64>,
    tool: Option<usize>,
    targets: BTreeMap<usize, f64>,
    last_e: f64,
}

fn target(pose: &JointState, m: &Move) -> JointState {
    JointState {
        x: m.x.unwrap_or(pose.x),
        y: m.y.unwrap_or(pose.y),
        z: m.z.unwrap_or(pose.z),
        b: m.b.map_or(pose.b, f64::to_radians),
        c: m.c.map_or(pose.c, f64::to_radians),
    }
}

/// Walks `prog` on `machine`, integrating time and extrusion per tool.
pub fn simulate(prog: &GProgram, machine: &MachineConfig, db: &MaterialDb) -> SimReport {
    let mut st = State {
        pose: JointState::default(),
        homed: false,
        units: false,
        e_mode: None,
        feed_mode: FeedFlavor::DesktopMmMin,
        feed: None,
        tool: None,
        targets: BTreeMap::new(),
        last_e: 0.0,
    };
    let mut report = SimReport {
        total_time_s: 0.0,
        motion_time_s: 0.0,
        tool_change_time_s: 0.0,
        moves: 0,
        mass_g: 0.0,
        per_tool: BTreeMap::new(),
        max_joint_speed: Joint::ALL.iter().map(|j| (*j, 0.0)).collect(),
        violations: Vec::new(),
        final_pose: JointState::default(),
    };
    let flag = |report: &mut SimReport, index: usize, kind: ViolationKind| {
        report.violations.push(Violation {
            index,
            line: prog.line_of(index),
            kind,
        });
    };

    for (index, ins) in prog.instructions.iter().enumerate() {
        match ins {
            Instruction::Comment(_) => {}
            Instruction::UnitsMm => st.units = true,
            Instruction::Home => {
                st.homed = true;
                st.pose = JointState::default();
            }
            Instruction::ExtrusionMode(m) => {
                st.e_mode = Some(*m);
                st.last_e = 0.0;
            }
            Instruction::FeedMode(f) => {
                st.feed_mode = *f;
                st.feed = None;
            }
            Instruction::SetTemp { tool, celsius, .. } => match tool.or(st.tool) {
                Some(t) => {
                    st.targets.insert(t, *celsius);
                }
                None => flag(&mut report, index, ViolationKind::NoActiveTool),
            },
            Instruction::ToolChange(t) => {
                if db.for_tool(*t).is_err() {
                    flag(&mut report, index, ViolationKind::UnknownTool { tool: *t });
                }
                if st.tool.is_some_and(|cur| cur != *t) {
                    report.tool_change_time_s += machine.tool_change_s;
                }
                st.tool = Some(*t);
            }
            Instruction::Move(m) => {
                if !st.homed {
                    flag(&mut report, index, ViolationKind::MotionBeforeHome);
                }
                if !st.units {
                    flag(&mut report, index, ViolationKind::UnitsUnset);
                }
                if m.f.is_some() {
                    st.feed = m.f;
                }
                let next = target(&st.pose, m);
                for joint in Joint::ALL {
                    if let Some((lo, hi)) = machine.limits(joint) {
                        let v = next.get(joint);
                        let tol = 1e-9 * (1.0 + v.abs());
                        if v < lo - tol || v > hi + tol {
                            let value = if joint.is_rotary() { v.to_degrees() } else { v };
                            flag(&mut report, index, ViolationKind::JointLimit { joint, value });
                        }
                    }
                }
                let dt = match st.feed {
                    None => {
                        flag(&mut report, index, ViolationKind::MissingFeed);
                        0.0
                    }
                    Some(f) => match st.feed_mode {
                        FeedFlavor::DesktopMmMin => feed_distance(&st.pose, &next).0 / f * 60.0,
                        FeedFlavor::InverseTime => 60.0 / f,
                    },
                };
                if dt > 0.0 {
                    for joint in Joint::ALL {
                        let rate = (next.get(joint) - st.pose.get(joint)).abs() / dt;
                        let peak = report.max_joint_speed.entry(joint).or_insert(0.0);
                        *peak = peak.max(rate);
                        let max = machine.max_rate(joint);
                        if rate > max * (1.0 + SPEED_SLACK) {
                            flag(&mut report, index, ViolationKind::JointSpeed { joint, value: rate, max });
                        }
                    }
                }
                if let Some(e) = m.e {
                    let de = match st.e_mode {
                        Some(ExtrusionMode::Relative) => e,
                        Some(ExtrusionMode::Absolute) => {
                            let d = e - st.last_e;
                            st.last_e = e;
                            d
                        }
                        None => {
                            flag(&mut report, index, ViolationKind::ExtrusionModeUnset);
                            e
                        }
                    };
                    match st.tool.map(|t| (t, db.for_tool(t))) {
                        None => flag(&mut report, index, ViolationKind::NoActiveTool),
                        Some((t, Err(_))) => flag(&mut report, index, ViolationKind::UnknownTool { tool: t }),
                        Some((t, Ok(mat))) => {
                            let temp = st.targets.get(&t).copied().unwrap_or(0.0);
                            if de > 0.0 && temp < mat.print_temp_c - COLD_MARGIN_C {
                                flag(&mut report, index, ViolationKind::ColdExtrusion { tool: t, temp_c: temp });
                            }
                            let usage = report.per_tool.entry(t).or_insert_with(|| ToolUsage {
                                material: mat.name.clone(),
                                ..ToolUsage::default()
                            });
                            let volume = de * mat.filament_area_mm2();
                            usage.filament_length_mm += de;
                            usage.volume_mm3 += volume;
                            usage.mass_g += mat.mass_g(volume);
                        }
                    }
                }
                report.motion_time_s += dt;
                report.moves += 1;
                st.pose = next;
            }
        }
    }
    report.mass_g = report.per_tool.values().map(|u| u.mass_g).sum();
    report.total_time_s = report.motion_time_s + report.tool_change_time_s;
    report.final_pose = st.pose;
    report
}
