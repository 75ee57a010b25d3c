//! G-code for the five-axis tool-changer: typed programs, canonical text
//! emission from a planned toolpath, a parser for the supported subset and a
//! machine-state simulator that re-derives time, material and limit checks.
//!
//! Supported words: `G0`/`G1` with `X Y Z B C E F`, `G21`, `G28`, `G93`/`G94`,
//! `M82`/`M83`, `M104`/`M109` with `T S`, `T<n>`, and `;` comments. Rotary
//! words are in degrees. Every number is written with five decimals.

mod parse;
mod sim;

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::kinematics::{ik, retime, FeedFlavor, JointState, KinematicsError, MachineConfig, ToolPose};
use crate::materials::{MaterialDb, MaterialError};
use crate::pathplan::{SegmentKind, Toolpath};

pub use parse::parse;
pub use sim::{simulate, SimReport, ToolUsage, Violation, ViolationKind};

#[derive(Debug, thiserror::Error)]
pub enum GcodeError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: unsupported code {code}")]
    UnsupportedCode { line: usize, code: String },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Material(#[from] MaterialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtrusionMode {
    Absolute,
    Relative,
}

/// Optional axis words of one linear move. B and C are in degrees.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub rapid: bool,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub e: Option<f64>,
    pub f: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Instruction {
    Move(Move),
    ToolChange(usize),
    /// `tool: None` targets the active tool.
    SetTemp {
        tool: Option<usize>,
        celsius: f64,
        wait: bool,
    },
    ExtrusionMode(ExtrusionMode),
    FeedMode(FeedFlavor),
    Comment(String),
    Home,
    UnitsMm,
}

/// Canonical fixed-point formatting used for every number.
pub(crate) fn num(v: f64) -> String {
    let s = format!("{v:.5}");
    if s == "-0.00000" {
        "0.00000".into()
    } else {
        s
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Move(m) => {
                f.write_str(if m.rapid { "G0" } else { "G1" })?;
                let words = [
                    ('X', m.x),
                    ('Y', m.y),
                    ('Z', m.z),
                    ('B', m.b),
                    ('C', m.c),
                    ('E', m.e),
                    ('F', m.f),
                ];
                for (letter, v) in words {
                    if let Some(v) = v {
                        write!(f, " {letter}{}", num(v))?;
                    }
                }
                Ok(())
            }
            Instruction::ToolChange(t) => write!(f, "T{t}"),
            Instruction::SetTemp { tool, celsius, wait } => {
                f.write_str(if *wait { "M109" } else { "M104" })?;
                if let Some(t) = tool {
                    write!(f, " T{t}")?;
                }
                write!(f, " S{}", num(*celsius))
            }
            Instruction::ExtrusionMode(ExtrusionMode::Absolute) => f.write_str("M82"),
            Instruction::ExtrusionMode(ExtrusionMode::Relative) => f.write_str("M83"),
            Instruction::FeedMode(FeedFlavor::DesktopMmMin) => f.write_str("G94"),
            Instruction::FeedMode(FeedFlavor::InverseTime) => f.write_str("G93"),
            Instruction::Comment(text) if text.is_empty() => f.write_str(";"),
            Instruction::Comment(text) => write!(f, "; {text}"),
            Instruction::Home => f.write_str("G28"),
            Instruction::UnitsMm => f.write_str("G21"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GProgram {
    pub instructions: Vec<Instruction>,
    /// Source line of each instruction when parsed from text.
    pub lines: Vec<usize>,
}

impl GProgram {
    pub fn push(&mut self, ins: Instruction) {
        self.instructions.push(ins);
    }

    /// Canonical text, one instruction per line, LF terminated.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for ins in &self.instructions {
            let _ = writeln!(out, "{ins}");
        }
        out
    }

    /// Source line of instruction `index`; emitted programs count from 1.
    pub fn line_of(&self, index: usize) -> usize {
        self.lines.get(index).copied().unwrap_or(index + 1)
    }
}

/// Hex SHA-256 of a configuration text, recorded in program headers.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmitOptions {
    pub flavor: FeedFlavor,
    pub job_name: String,
    pub config_hash: String,
}

/// Joint states for every toolpath point, solved in order so that each IK
/// call continues from the previous pose.
pub fn solve_poses(
    toolpath: &Toolpath,
    machine: &MachineConfig,
) -> Result<Vec<Vec<JointState>>, KinematicsError> {
    let mut prev = JointState::default();
    toolpath
        .segments
        .iter()
        .map(|seg| {
            seg.points
                .iter()
                .map(|p| {
                    let s = ik(
                        &ToolPose {
                            position: p.position,
                            axis: p.axis,
                        },
                        &prev,
                        machine,
                    )?;
                    prev = s;
                    Ok(s)
                })
                .collect()
        })
        .collect()
}

fn move_to(s: &JointState, e: Option<f64>, f: f64) -> Instruction {
    Instruction::Move(Move {
        rapid: false,
        x: Some(s.x),
        y: Some(s.y),
        z: Some(s.z),
        b: Some(s.b.to_degrees()),
        c: Some(s.c.to_degrees()),
        e,
        f: Some(f),
    })
}

fn same_pose(a: &JointState, b: &JointState) -> bool {
    (a.xyz() - b.xyz()).norm() < 1e-9 && (a.b - b.b).abs() < 1e-12 && (a.c - b.c).abs() < 1e-12
}

/// Program for a planned toolpath and its solved joint states. Every move is
/// a `G1` with a feed word; extruding moves carry relative `E` equal to the
/// deposited volume over the filament cross-section.
pub fn emit(
    toolpath: &Toolpath,
    poses: &[Vec<JointState>],
    machine: &MachineConfig,
    db: &MaterialDb,
    opts: &EmitOptions,
) -> Result<GProgram, GcodeError> {
    let mut prog = GProgram::default();
    let flavor_name = match opts.flavor {
        FeedFlavor::DesktopMmMin => "desktop_mm_min",
        FeedFlavor::InverseTime => "inverse_time",
    };
    for text in [
        "generated by antfab".to_string(),
        format!("job: {}", opts.job_name),
        format!("design: {:?}", toolpath.design).to_lowercase(),
        format!("mode: {:?}", toolpath.mode).to_lowercase(),
        format!("flavor: {flavor_name}"),
        format!("config sha256: {}", opts.config_hash),
    ] {
        prog.push(Instruction::Comment(text));
    }
    prog.push(Instruction::UnitsMm);
    prog.push(Instruction::FeedMode(opts.flavor));
    prog.push(Instruction::ExtrusionMode(ExtrusionMode::Relative));
    prog.push(Instruction::Home);

    let mut here = JointState::default();
    let mut active: Option<usize> = None;
    let mut heated: Vec<usize> = Vec::new();
    let mut residue: std::collections::BTreeMap<usize, f64> = Default::default();
    let mut select = |prog: &mut GProgram, tool: usize, active: &mut Option<usize>| -> Result<(), GcodeError> {
        if *active == Some(tool) {
            return Ok(());
        }
        prog.push(Instruction::ToolChange(tool));
        if !heated.contains(&tool) {
            let m = db.for_tool(tool)?;
            prog.push(Instruction::SetTemp {
                tool: Some(tool),
                celsius: m.print_temp_c,
                wait: true,
            });
            heated.push(tool);
        }
        *active = Some(tool);
        Ok(())
    };

    for (seg, states) in toolpath.segments.iter().zip(poses) {
        if seg.kind == SegmentKind::ToolChange {
            prog.push(Instruction::Comment(format!("tool change to T{}", seg.tool)));
            select(&mut prog, seg.tool, &mut active)?;
            continue;
        }
        if seg.points.is_empty() {
            continue;
        }
        select(&mut prog, seg.tool, &mut active)?;
        if !same_pose(&here, &states[0]) {
            let t = retime(&here, &states[0], seg.speed_mm_s.max(1e-9), machine, opts.flavor)?;
            prog.push(move_to(&states[0], None, t.feed));
            here = states[0];
        }
        if seg.kind != SegmentKind::Travel {
            prog.push(Instruction::Comment(format!("{} layer {}", seg.kind.name(), seg.layer)));
        }
        let area = db.for_tool(seg.tool)?.filament_area_mm2();
        let carry = residue.entry(seg.tool).or_insert(0.0);
        for (w, s) in seg.points.windows(2).zip(states.windows(2)) {
            let t = match retime(&s[0], &s[1], seg.speed_mm_s, machine, opts.flavor) {
                Ok(t) => t,
                Err(KinematicsError::ZeroLengthSegment) => continue,
                Err(e) => return Err(e.into()),
            };
            // carry the five-decimal rounding residue so cumulative E stays exact
            let e = (seg.flow_mm3_per_mm > 0.0).then(|| {
                let exact = seg.flow_mm3_per_mm * (w[1].position - w[0].position).norm() / area + *carry;
                let rounded = (exact * 1e5).round() / 1e5;
                *carry = exact - rounded;
                rounded
            });
            prog.push(move_to(&s[1], e, t.feed));
            here = s[1];
        }
    }

    for tool in heated {
        prog.push(Instruction::SetTemp {
            tool: Some(tool),
            celsius: 0.0,
            wait: false,
        });
    }
    prog.push(Instruction::Comment("end".into()));
    Ok(prog)
}
