//! Toolpath planning for the substrate and the conductive traces.
//!
//! Two strategies share one toolpath representation: a conformal plan that
//! lays beads along offset shells of the surface with the nozzle on the local
//! normal, and a planar baseline that slices the same solid into horizontal
//! layers with perimeters, rectilinear infill and sparse support.

mod conformal;
mod planar;
mod voxel;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::design::DesignKind;
use crate::geom2d::{line_intervals, resample_segment, P2};
use crate::materials::{MaterialDb, MaterialError, MaterialKind};
use crate::projection::{ConformalLayout, ProjectionError};
use crate::surface::{SurfaceError, P3, V3};

pub use conformal::plan_conformal;
pub use planar::plan_planar;

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("invalid plan settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error("conductive region {region} is {width_mm:.3} mm wide, narrower than one line")]
    RasterFailure { region: usize, width_mm: f64 },
    #[error("no tool is assigned to a {0:?} material")]
    MissingTool(MaterialKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Substrate,
    Trace,
    Support,
    Travel,
    ToolChange,
}

impl SegmentKind {
    pub fn name(&self) -> &'static str {
        match self {
            SegmentKind::Substrate => "substrate",
            SegmentKind::Trace => "traces",
            SegmentKind::Support => "support",
            SegmentKind::Travel => "travel",
            SegmentKind::ToolChange => "tool_changes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    Conformal,
    Planar,
}

/// Nozzle tip position and tool axis in the part frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub position: P3,
    pub axis: V3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolpathSegment {
    pub kind: SegmentKind,
    pub tool: usize,
    pub layer: usize,
    pub points: Vec<PathPoint>,
    /// Deposited volume per mm of path; zero for travel.
    pub flow_mm3_per_mm: f64,
    pub speed_mm_s: f64,
}

impl ToolpathSegment {
    pub fn length_mm(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].position - w[0].position).norm())
            .sum()
    }

    pub fn volume_mm3(&self) -> f64 {
        self.length_mm() * self.flow_mm3_per_mm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Toolpath {
    pub mode: PlanMode,
    pub design: DesignKind,
    pub segments: Vec<ToolpathSegment>,
}

impl Toolpath {
    /// Debug dump, one segment per line:
    /// `kind tool layer speed flow | x y z ax ay az ; x y z ax ay az ; ...`.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# toolpath mode={:?} design={:?} segments={}\n",
            self.mode,
            self.design,
            self.segments.len()
        )
        .to_lowercase();
        for s in &self.segments {
            let _ = write!(
                out,
                "{} {} {} {:.5} {:.5} |",
                s.kind.name(),
                s.tool,
                s.layer,
                s.speed_mm_s,
                s.flow_mm3_per_mm
            );
            for (k, p) in s.points.iter().enumerate() {
                let sep = if k == 0 { " " } else { " ; " };
                let (q, a) = (p.position, p.axis);
                let _ = write!(
                    out,
                    "{sep}{:.5} {:.5} {:.5} {:.6} {:.6} {:.6}",
                    q.x, q.y, q.z, a.x, a.y, a.z
                );
            }
            out.push('\n');
        }
        out
    }

    pub fn tool_changes(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::ToolChange)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanSettings {
    pub line_width_mm: f64,
    /// Conformal substrate shell spacing.
    pub substrate_shell_mm: f64,
    /// Planar baseline layer height.
    pub planar_layer_mm: f64,
    pub trace_layer_mm: f64,
    pub trace_layers: usize,
    pub perimeters: usize,
    pub infill_density: f64,
    pub support_angle_deg: f64,
    pub support_density: f64,
    pub travel_speed_mm_s: f64,
    pub travel_lift_mm: f64,
    pub max_step_mm: f64,
}

impl Default for PlanSettings {
    fn default() -> Self {
        Self {
            line_width_mm: 0.4,
            substrate_shell_mm: 0.3,
            planar_layer_mm: 0.2,
            trace_layer_mm: 0.2,
            trace_layers: 2,
            perimeters: 2,
            infill_density: 1.0,
            support_angle_deg: 45.0,
            support_density: 0.15,
            travel_speed_mm_s: 120.0,
            travel_lift_mm: 1.0,
            max_step_mm: 0.5,
        }
    }
}

impl PlanSettings {
    pub fn validate(&self) -> Result<(), PlanError> {
        let positive = [
            ("line_width_mm", self.line_width_mm),
            ("substrate_shell_mm", self.substrate_shell_mm),
            ("planar_layer_mm", self.planar_layer_mm),
            ("trace_layer_mm", self.trace_layer_mm),
            ("travel_speed_mm_s", self.travel_speed_mm_s),
            ("max_step_mm", self.max_step_mm),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PlanError::InvalidSettings(format!("{name} must be > 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.infill_density) || !(0.0..=1.0).contains(&self.support_density) {
            return Err(PlanError::InvalidSettings("densities must be in [0, 1]".into()));
        }
        if !(0.0..90.0).contains(&self.support_angle_deg) {
            return Err(PlanError::InvalidSettings("support angle must be in [0, 90)".into()));
        }
        if self.trace_layers == 0 {
            return Err(PlanError::InvalidSettings("need at least one trace layer".into()));
        }
        if !(self.travel_lift_mm >= 0.0) {
            return Err(PlanError::InvalidSettings("travel lift must be >= 0".into()));
        }
        Ok(())
    }
}

/// Tools and speeds of the two materials.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tools {
    pub substrate: usize,
    pub substrate_speed: f64,
    pub trace: usize,
    pub trace_speed: f64,
}

impl Tools {
    pub fn from_db(db: &MaterialDb) -> Result<Self, PlanError> {
        let substrate = db
            .tool_of_kind(MaterialKind::Dielectric)
            .ok_or(PlanError::MissingTool(MaterialKind::Dielectric))?;
        let trace = db
            .tool_of_kind(MaterialKind::Conductor)
            .ok_or(PlanError::MissingTool(MaterialKind::Conductor))?;
        Ok(Self {
            substrate,
            substrate_speed: db.for_tool(substrate)?.print_speed_mm_per_s,
            trace,
            trace_speed: db.for_tool(trace)?.print_speed_mm_per_s,
        })
    }
}

/// Rows kept by a rectilinear pattern of the given density: row `i` is
/// printed when `floor((i+1)·f) > floor(i·f)`.
pub(crate) fn row_selected(i: usize, density: f64) -> bool {
    ((i + 1) as f64 * density + 1e-9).floor() > (i as f64 * density + 1e-9).floor()
}

/// Conductive raster lines in the layout plane, one list of passes per
/// region. Passes are parallel to the layout raster direction, `line_width`
/// apart and centered on the region; consecutive passes alternate direction.
pub(crate) fn trace_rasters(
    conformal: &ConformalLayout,
    settings: &PlanSettings,
) -> Result<Vec<Vec<P2>>, PlanError> {
    let layout = &conformal.layout;
    let dir = layout.raster_direction.normalize();
    let across = nalgebra::Vector2::new(-dir.y, dir.x);
    let lw = settings.line_width_mm;
    let mut lines = Vec::new();
    for (r, region) in layout.conductive_regions.iter().enumerate() {
        let offsets: Vec<f64> = region.vertices.iter().map(|p| p.coords.dot(&across)).collect();
        let (lo, hi) = offsets
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &o| (a.min(o), b.max(o)));
        if hi - lo < lw - 1e-9 {
            return Err(PlanError::RasterFailure {
                region: r,
                width_mm: hi - lo,
            });
        }
        let passes = ((hi - lo) / lw - 1e-9).ceil() as usize;
        let mid = 0.5 * (lo + hi);
        let mut forward = true;
        for k in 0..passes {
            let s = mid + (k as f64 - 0.5 * (passes as f64 - 1.0)) * lw;
            let origin = P2::from(across * s);
            let mut intervals = line_intervals(region, &origin, &dir);
            if !forward {
                intervals.reverse();
            }
            for (a, b) in intervals {
                let (a, b) = if forward { (a, b) } else { (b, a) };
                lines.push(resample_segment(
                    &(origin + dir * a),
                    &(origin + dir * b),
                    settings.max_step_mm,
                ));
            }
            forward = !forward;
        }
    }
    Ok(lines)
}

/// Non-extruding move from the end of one path to the start of the next,
/// lifting along the tool axis at both ends.
pub(crate) fn travel(from: &PathPoint, to: &PathPoint, settings: &PlanSettings, tool: usize, layer: usize) -> ToolpathSegment {
    let lift = settings.travel_lift_mm;
    let mut points = vec![*from];
    if lift > 0.0 {
        points.push(PathPoint {
            position: from.position + from.axis * lift,
            axis: from.axis,
        });
        points.push(PathPoint {
            position: to.position + to.axis * lift,
            axis: to.axis,
        });
    }
    points.push(*to);
    ToolpathSegment {
        kind: SegmentKind::Travel,
        tool,
        layer,
        points,
        flow_mm3_per_mm: 0.0,
        speed_mm_s: settings.travel_speed_mm_s,
    }
}

/// Appends `seg`, inserting a travel from the previous path end when the two
/// do not meet.
pub(crate) fn push_with_travel(
    segments: &mut Vec<ToolpathSegment>,
    seg: ToolpathSegment,
    settings: &PlanSettings,
) {
    if seg.points.is_empty() {
        return;
    }
    let last = segments
        .iter()
        .rev()
        .find_map(|s| s.points.last().copied());
    if let Some(prev) = last {
        let start = seg.points[0];
        if (prev.position - start.position).norm() > 1e-9 || (prev.axis - start.axis).norm() > 1e-9 {
            segments.push(travel(&prev, &start, settings, seg.tool, seg.layer));
        }
    }
    segments.push(seg);
}

pub(crate) fn tool_change(tool: usize, layer: usize) -> ToolpathSegment {
    ToolpathSegment {
        kind: SegmentKind::ToolChange,
        tool,
        layer,
        points: Vec::new(),
        flow_mm3_per_mm: 0.0,
        speed_mm_s: 0.0,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub length_mm: f64,
    pub time_s: f64,
    pub volume_mm3: f64,
    pub mass_g: f64,
    pub filament_length_mm: f64,
    pub count: usize,
}

impl Totals {
    fn add(&mut self, other: &Totals) {
        self.length_mm += other.length_mm;
        self.time_s += other.time_s;
        self.volume_mm3 += other.volume_mm3;
        self.mass_g += other.mass_g;
        self.filament_length_mm += other.filament_length_mm;
        self.count += other.count;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub time_s: f64,
    pub mass_g: f64,
    pub by_kind: BTreeMap<String, Totals>,
    /// Keyed by material name; tool changes count against the incoming tool.
    pub by_material: BTreeMap<String, Totals>,
}

/// Print time as path length over speed plus tool-change overhead; mass as
/// deposited volume times density.
pub fn estimate(
    toolpath: &Toolpath,
    db: &MaterialDb,
    tool_change_s: f64,
) -> Result<Estimate, PlanError> {
    let mut by_kind: BTreeMap<String, Totals> = BTreeMap::new();
    let mut by_material: BTreeMap<String, Totals> = BTreeMap::new();
    for seg in &toolpath.segments {
        let material = db.for_tool(seg.tool)?;
        let length = seg.length_mm();
        let volume = length * seg.flow_mm3_per_mm;
        let time = match seg.kind {
            SegmentKind::ToolChange => tool_change_s,
            _ if length == 0.0 => 0.0,
            _ => length / seg.speed_mm_s,
        };
        let t = Totals {
            length_mm: length,
            time_s: time,
            volume_mm3: volume,
            mass_g: material.mass_g(volume),
            filament_length_mm: volume / material.filament_area_mm2(),
            count: 1,
        };
        by_kind.entry(seg.kind.name().to_string()).or_default().add(&t);
        by_material.entry(material.name.clone()).or_default().add(&t);
    }
    let mut total = Totals::default();
    for t in by_kind.values() {
        total.add(t);
    }
    Ok(Estimate {
        time_s: total.time_s,
        mass_g: total.mass_g,
        by_kind,
        by_material,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_selection_density() {
        let full = (0..100).filter(|&i| row_selected(i, 1.0)).count();
        let sparse = (0..100).filter(|&i| row_selected(i, 0.15)).count();
        let none = (0..100).filter(|&i| row_selected(i, 0.0)).count();
        assert_eq!((full, sparse, none), (100, 15, 0));
    }

    #[test]
    fn settings_validation() {
        PlanSettings::default().validate().unwrap();
        let bad = PlanSettings {
            line_width_mm: 0.0,
            ..PlanSettings::default()
        };
        assert!(bad.validate().is_err());
        let bad = PlanSettings {
            support_density: 1.5,
            ..PlanSettings::default()
        };
        assert!(bad.validate().is_err());
    }
}

#[cfg(test)]
mod plan_tests;
