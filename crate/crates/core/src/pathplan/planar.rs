//! Three-axis baseline: horizontal slices of the substrate solid on a voxel
//! grid, then stair-stepped traces over the finished top face.

use super::voxel::{CellPath, Grid};
use super::{
    push_with_travel, row_selected, tool_change, trace_rasters, PathPoint, PlanError, PlanMode,
    PlanSettings, SegmentKind, Toolpath, ToolpathSegment, Tools,
};
use crate::materials::MaterialDb;
use crate::projection::ConformalLayout;
use crate::surface::{Surface, P3, V3};

const BOUNDS_SAMPLES: usize = 128;
const MEMBER_TOL: f64 = 1e-9;

struct Slicer<'a> {
    surface: &'a Surface,
    origin: P3,
    cell: f64,
    layer: f64,
    nx: usize,
    ny: usize,
    nz: usize,
}

impl Slicer<'_> {
    fn inside(&self, i: usize, j: usize, k: usize) -> Option<(f64, f64)> {
        let p = P3::new(
            self.origin.x + (i as f64 + 0.5) * self.cell,
            self.origin.y + (j as f64 + 0.5) * self.cell,
            self.origin.z + (k as f64 + 0.5) * self.layer,
        );
        let (u, v, w) = self.surface.locate(&p).ok()?;
        let t = self.surface.thickness_mm;
        let ok = (-MEMBER_TOL..=1.0 + MEMBER_TOL).contains(&u)
            && (-MEMBER_TOL..=1.0 + MEMBER_TOL).contains(&v)
            && (-MEMBER_TOL..=t + MEMBER_TOL).contains(&w);
        ok.then_some((u.clamp(0.0, 1.0), v.clamp(0.0, 1.0)))
    }

    fn to_points(&self, path: &CellPath, z: f64) -> Vec<PathPoint> {
        path.points
            .iter()
            .map(|&(x, y)| PathPoint {
                position: P3::new(
                    self.origin.x + x * self.cell,
                    self.origin.y + y * self.cell,
                    z,
                ),
                axis: V3::z(),
            })
            .collect()
    }
}

/// Planar slicing of the substrate followed by planar traces.
pub fn plan_planar(
    conformal: &ConformalLayout,
    db: &MaterialDb,
    settings: &PlanSettings,
) -> Result<Toolpath, PlanError> {
    settings.validate()?;
    let tools = Tools::from_db(db)?;
    let surface = &conformal.map.surface;
    let (lo, hi) = surface.sampled_bounds(BOUNDS_SAMPLES);
    let (lw, lh) = (settings.line_width_mm, settings.planar_layer_mm);
    let n = |span: f64, step: f64| ((span / step - 1e-9).ceil() as usize).max(1);
    let slicer = Slicer {
        surface,
        origin: lo,
        cell: lw,
        layer: lh,
        nx: n(hi.x - lo.x, lw),
        ny: n(hi.y - lo.y, lw),
        nz: n(hi.z - lo.z, lh),
    };

    let mut occupied = Vec::with_capacity(slicer.nz);
    let mut params = Vec::with_capacity(slicer.nz);
    for k in 0..slicer.nz {
        let mut g = Grid::new(slicer.nx, slicer.ny);
        let mut uv = vec![None; slicer.nx * slicer.ny];
        for j in 0..slicer.ny {
            for i in 0..slicer.nx {
                if let Some(p) = slicer.inside(i, j, k) {
                    g.set(i, j, true);
                    uv[j * slicer.nx + i] = Some(p);
                }
            }
        }
        occupied.push(g);
        params.push(uv);
    }

    // downward-facing cells steeper than the threshold get sparse columns
    // below them, one empty layer short of the cell
    let min_sin = settings.support_angle_deg.to_radians().sin();
    let mut support: Vec<Grid> = (0..slicer.nz)
        .map(|_| Grid::new(slicer.nx, slicer.ny))
        .collect();
    for k in 2..slicer.nz {
        for j in 0..slicer.ny {
            for i in 0..slicer.nx {
                let (ii, jj) = (i as isize, j as isize);
                if !occupied[k].get(ii, jj) || occupied[k - 1].get(ii, jj) {
                    continue;
                }
                let (u, v) = params[k][j * slicer.nx + i].expect("occupied cell has parameters");
                let nz = surface.evaluate(u, v)?.normal.z.abs();
                if nz <= min_sin {
                    continue;
                }
                for kk in (0..k - 1).rev() {
                    if occupied[kk].get(ii, jj) || support[kk].get(ii, jj) {
                        break;
                    }
                    support[kk].set(i, j, true);
                }
            }
        }
    }

    let mut segments: Vec<ToolpathSegment> = Vec::new();
    let sub = |points, layer, kind, flow| ToolpathSegment {
        kind,
        tool: tools.substrate,
        layer,
        points,
        flow_mm3_per_mm: flow,
        speed_mm_s: tools.substrate_speed,
    };
    let flow = lw * lh;
    for k in 0..slicer.nz {
        let z = lo.z + (k + 1) as f64 * lh;
        let mut mask = occupied[k].clone();
        for _ in 0..settings.perimeters {
            if mask.count() == 0 {
                break;
            }
            for path in mask.contour_paths() {
                let seg = sub(slicer.to_points(&path, z), k, SegmentKind::Substrate, flow);
                push_with_travel(&mut segments, seg, settings);
            }
            mask = mask.minus(&mask.boundary());
        }
        let along_x = k % 2 == 0;
        for path in mask.raster_runs(along_x, |r| row_selected(r, settings.infill_density)) {
            let seg = sub(slicer.to_points(&path, z), k, SegmentKind::Substrate, flow);
            push_with_travel(&mut segments, seg, settings);
        }
        for path in support[k].raster_runs(along_x, |r| row_selected(r, settings.support_density)) {
            let seg = sub(slicer.to_points(&path, z), k, SegmentKind::Support, flow);
            push_with_travel(&mut segments, seg, settings);
        }
    }

    let rasters = trace_rasters(conformal, settings)?;
    if !rasters.is_empty() {
        segments.push(tool_change(tools.trace, slicer.nz));
    }
    let t = surface.thickness_mm;
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
            let mut points: Vec<PathPoint> = Vec::with_capacity(line.len());
            for p in &line {
                let uv = conformal.map.to_uv(p)?;
                let q = surface.frame_at_offset(uv.0, uv.1, w)?.point;
                let zq = lo.z + lh * ((q.z - lo.z) / lh - 1e-9).ceil();
                if let Some(prev) = points.last().copied() {
                    if (prev.position.z - zq).abs() > 1e-12 {
                        // vertical riser at the new xy
                        points.push(PathPoint {
                            position: P3::new(q.x, q.y, prev.position.z),
                            axis: V3::z(),
                        });
                    }
                }
                points.push(PathPoint {
                    position: P3::new(q.x, q.y, zq),
                    axis: V3::z(),
                });
            }
            let seg = ToolpathSegment {
                kind: SegmentKind::Trace,
                tool: tools.trace,
                layer: slicer.nz + layer,
                points,
                flow_mm3_per_mm: lw * settings.trace_layer_mm,
                speed_mm_s: tools.trace_speed,
            };
            push_with_travel(&mut segments, seg, settings);
        }
    }

    Ok(Toolpath {
        mode: PlanMode::Planar,
        design: conformal.layout.kind,
        segments,
    })
}
