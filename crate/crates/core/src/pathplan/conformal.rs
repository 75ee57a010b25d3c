//! Conformal plan: serpentine beads on each offset shell with the nozzle
//! along the local normal, then the projected trace rasters on the top face.

use super::{
    push_with_travel, tool_change, trace_rasters, PathPoint, PlanError, PlanMode, PlanSettings,
    SegmentKind, Toolpath, ToolpathSegment, Tools,
};
use crate::materials::MaterialDb;
use crate::projection::ConformalLayout;
use crate::quad::gauss5_composite;
use crate::surface::{OffsetSide, Surface};

const LENGTH_SAMPLES: usize = 17;
const LENGTH_PANELS: usize = 32;

/// Longest `u`-direction isocurve of the shell at offset `w`.
fn max_u_length(surface: &Surface, w: f64) -> f64 {
    (0..LENGTH_SAMPLES)
        .map(|j| {
            let v = j as f64 / (LENGTH_SAMPLES - 1) as f64;
            gauss5_composite(
                |u| surface.frame_unchecked(u, v, w).du.norm(),
                0.0,
                1.0,
                LENGTH_PANELS,
            )
        })
        .fold(0.0, f64::max)
}

/// Largest `|∂p/∂v|` along the pass at `u`.
fn max_v_speed(surface: &Surface, u: f64, w: f64) -> f64 {
    (0..=4 * LENGTH_SAMPLES)
        .map(|j| {
            let v = j as f64 / (4 * LENGTH_SAMPLES) as f64;
            surface.frame_unchecked(u, v, w).dv.norm()
        })
        .fold(0.0, f64::max)
}

pub fn plan_conformal(
    conformal: &ConformalLayout,
    db: &MaterialDb,
    settings: &PlanSettings,
) -> Result<Toolpath, PlanError> {
    settings.validate()?;
    let tools = Tools::from_db(db)?;
    let surface = &conformal.map.surface;
    let t = surface.thickness_mm;
    let lw = settings.line_width_mm;
    let count = ((t / settings.substrate_shell_mm).round() as usize).max(1);
    let shell_h = t / count as f64;
    let shells = surface.offset_shells(shell_h, count, OffsetSide::Outward)?;

    let mut segments: Vec<ToolpathSegment> = Vec::new();
    for (k, shell) in shells.iter().enumerate() {
        let w = shell.offset_mm;
        let passes = ((max_u_length(surface, w) / lw - 1e-9).ceil() as usize).max(1);
        let mut order: Vec<usize> = (0..passes).collect();
        if k % 2 == 1 {
            order.reverse();
        }
        let mut points = Vec::new();
        for (n, &i) in order.iter().enumerate() {
            let u = (i as f64 + 0.5) / passes as f64;
            let steps = ((max_v_speed(surface, u, w) / settings.max_step_mm).ceil() as usize).max(1);
            // alternate pass direction so consecutive passes join end to end
            let up = (n + k * passes).is_multiple_of(2);
            for s in 0..=steps {
                let v = if up { s } else { steps - s } as f64 / steps as f64;
                let f = shell.evaluate(u, v)?;
                points.push(PathPoint {
                    position: f.point,
                    axis: f.normal,
                });
            }
        }
        let seg = ToolpathSegment {
            kind: SegmentKind::Substrate,
            tool: tools.substrate,
            layer: k,
            points,
            flow_mm3_per_mm: lw * shell_h,
            speed_mm_s: tools.substrate_speed,
        };
        push_with_travel(&mut segments, seg, settings);
    }

    let rasters = trace_rasters(conformal, settings)?;
    if !rasters.is_empty() {
        segments.push(tool_change(tools.trace, count));
    }
    for layer in 0..settings.trace_layers {
        let w = t + (layer + 1) as f64 * settings.trace_layer_mm;
        let ordered: Vec<Vec<_>> = if layer % 2 == 0 {
            rasters.clone()
        } else {
            rasters
                .iter()
                .rev()
                .map(|l| l.iter().rev().copied().collect())
                .collect()
        };
        for line in ordered {
            let points = line
                .iter()
                .map(|p| {
                    let (u, v) = conformal.map.to_uv(p)?;
                    let f = surface.frame_at_offset(u, v, w)?;
                    Ok(PathPoint {
                        position: f.point,
                        axis: f.normal,
                    })
                })
                .collect::<Result<Vec<_>, PlanError>>()?;
            let seg = ToolpathSegment {
                kind: SegmentKind::Trace,
                tool: tools.trace,
                layer: count + layer,
                points,
                flow_mm3_per_mm: lw * settings.trace_layer_mm,
                speed_mm_s: tools.trace_speed,
            };
            push_with_travel(&mut segments, seg, settings);
        }
    }

    Ok(Toolpath {
        mode: PlanMode::Conformal,
        design: conformal.layout.kind,
        segments,
    })
}
