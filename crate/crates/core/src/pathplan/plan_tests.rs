use std::f64::consts::PI;

use nalgebra::Vector2;

use super::*;
use crate::design::{patch_layout, synthesize_patch, Feature, PlanarLayout};
use crate::geom2d::Polygon;
use crate::projection::{project_layout, ProjectionMode};
use crate::surface::{Surface, SurfaceShape};

fn strip_layout() -> PlanarLayout {
    PlanarLayout {
        kind: DesignKind::Patch,
        substrate_outline: Polygon::rect(P2::new(-8.0, -8.0), P2::new(8.0, 8.0)),
        conductive_regions: vec![Polygon::rect(P2::new(-5.0, -2.0), P2::new(5.0, 2.0))],
        feed_point: P2::new(0.0, -2.0),
        raster_direction: Vector2::y(),
        features: vec![Feature {
            id: "strip_width".into(),
            start: P2::new(-5.0, 0.0),
            end: P2::new(5.0, 0.0),
        }],
    }
}

fn plate() -> Surface {
    Surface::new(
        SurfaceShape::Plane {
            width_mm: 20.0,
            length_mm: 20.0,
        },
        1.0,
    )
    .unwrap()
}

#[test]
fn flat_plate_volume_is_exact() {
    let db = MaterialDb::bundled();
    let c = project_layout(&strip_layout(), &plate(), ProjectionMode::ArcLength).unwrap();
    let settings = PlanSettings::default();
    let tp = plan_planar(&c, &db, &settings).unwrap();
    let est = estimate(&tp, &db, 30.0).unwrap();
    let sub = &est.by_kind["substrate"];
    assert!((sub.volume_mm3 - 400.0).abs() < 1e-9, "{}", sub.volume_mm3);
    assert!(!est.by_kind.contains_key("support"));
    assert_eq!(tp.tool_changes(), 1);
}

#[test]
fn conformal_plate_volume_and_sequence() {
    let db = MaterialDb::bundled();
    let c = project_layout(&strip_layout(), &plate(), ProjectionMode::ArcLength).unwrap();
    let tp = plan_conformal(&c, &db, &PlanSettings::default()).unwrap();
    // substrate first, one change, traces last
    let change = tp
        .segments
        .iter()
        .position(|s| s.kind == SegmentKind::ToolChange)
        .unwrap();
    assert!(tp.segments[..change]
        .iter()
        .all(|s| matches!(s.kind, SegmentKind::Substrate | SegmentKind::Travel)));
    assert!(tp.segments[change + 1..]
        .iter()
        .all(|s| matches!(s.kind, SegmentKind::Trace | SegmentKind::Travel)));
    let est = estimate(&tp, &db, 30.0).unwrap();
    // 50 passes of 20 mm at 0.4 × (1/3) mm per shell, three shells
    let sub = &est.by_kind["substrate"];
    let passes_and_links = 3.0 * (50.0 * 20.0 + 49.0 * 0.4) * 0.4 / 3.0;
    assert!((sub.volume_mm3 - passes_and_links).abs() < 1e-9);
    // 4 mm wide strip: ten passes of 10 mm, two layers
    let tr = &est.by_kind["traces"];
    assert!((tr.volume_mm3 - 2.0 * 10.0 * 10.0 * 0.4 * 0.2).abs() < 1e-9);
    assert!(est.by_material.contains_key("PLA") && est.by_material.contains_key("Electrifi"));
    assert!((est.by_kind["tool_changes"].time_s - 30.0).abs() < 1e-12);
}

#[test]
fn conformal_points_follow_cylinder_normals() {
    let db = MaterialDb::bundled();
    let cyl = Surface::new(
        SurfaceShape::Cylinder {
            radius_mm: 40.0,
            arc_angle_rad: PI,
            length_mm: 60.0,
        },
        1.5,
    )
    .unwrap();
    let lay = patch_layout(&synthesize_patch(3e9, 2.7, 1.5).unwrap(), 10.0).unwrap();
    let c = project_layout(&lay, &cyl, ProjectionMode::ArcLength).unwrap();
    let tp = plan_conformal(&c, &db, &PlanSettings::default()).unwrap();
    let shells = tp
        .segments
        .iter()
        .filter(|s| s.kind == SegmentKind::Substrate)
        .count();
    assert_eq!(shells, 5);
    for s in tp.segments.iter().filter(|s| s.kind != SegmentKind::Travel) {
        for w in s.points.windows(2) {
            assert!((w[1].position - w[0].position).norm() <= 0.5 + 1e-9);
        }
        for p in &s.points {
            let radial = Vector2::new(p.position.x, p.position.z);
            assert!((p.axis.y).abs() < 1e-12);
            assert!((radial.normalize() - Vector2::new(p.axis.x, p.axis.z)).norm() < 1e-9);
        }
    }
    let traces: Vec<_> = tp
        .segments
        .iter()
        .filter(|s| s.kind == SegmentKind::Trace)
        .collect();
    let r_top = Vector2::new(traces[0].points[0].position.x, traces[0].points[0].position.z).norm();
    assert!((r_top - 41.7).abs() < 1e-9);
}

#[test]
fn planar_cylinder_needs_support() {
    let db = MaterialDb::bundled();
    let cyl = Surface::new(
        SurfaceShape::Cylinder {
            radius_mm: 15.0,
            arc_angle_rad: PI,
            length_mm: 20.0,
        },
        1.2,
    )
    .unwrap();
    let c = project_layout(&strip_layout(), &cyl, ProjectionMode::ArcLength).unwrap();
    let planar = plan_planar(&c, &db, &PlanSettings::default()).unwrap();
    let conformal = plan_conformal(&c, &db, &PlanSettings::default()).unwrap();
    let ep = estimate(&planar, &db, 30.0).unwrap();
    let ec = estimate(&conformal, &db, 30.0).unwrap();
    assert!(ep.by_kind["support"].volume_mm3 > 0.0);
    assert!(ec.mass_g < ep.mass_g);
    // planar traces sit on layer boundaries
    for s in planar.segments.iter().filter(|s| s.kind == SegmentKind::Trace) {
        for p in &s.points {
            let k = p.position.z / 0.2;
            assert!((k - k.round()).abs() < 1e-6, "z = {}", p.position.z);
        }
    }
}

fn with_region(region: Polygon) -> PlanarLayout {
    PlanarLayout {
        conductive_regions: vec![region],
        ..strip_layout()
    }
}

#[test]
fn three_line_wide_region_gets_three_passes() {
    let db = MaterialDb::bundled();
    let lay = with_region(Polygon::rect(P2::new(-5.0, -0.6), P2::new(5.0, 0.6)))
        .with_raster_direction(Vector2::x());
    let c = project_layout(&lay, &plate(), ProjectionMode::ArcLength).unwrap();
    let tp = plan_conformal(&c, &db, &PlanSettings {
        trace_layers: 1,
        ..PlanSettings::default()
    })
    .unwrap();
    let traces: Vec<_> = tp.segments.iter().filter(|s| s.kind == SegmentKind::Trace).collect();
    assert_eq!(traces.len(), 3);
    let ys: Vec<f64> = traces.iter().map(|s| s.points[0].position.y).collect();
    // plane parameters span [0, 20], so the layout origin sits at 10
    for (y, want) in ys.iter().zip([9.6, 10.0, 10.4]) {
        assert!((y - want).abs() < 1e-12, "{ys:?}");
    }
}

#[test]
fn narrow_region_is_rejected() {
    let db = MaterialDb::bundled();
    let lay = with_region(Polygon::rect(P2::new(-5.0, -0.1), P2::new(5.0, 0.1)))
        .with_raster_direction(Vector2::x());
    let c = project_layout(&lay, &plate(), ProjectionMode::ArcLength).unwrap();
    let err = plan_conformal(&c, &db, &PlanSettings::default()).unwrap_err();
    assert!(matches!(err, PlanError::RasterFailure { region: 0, .. }));
}

#[test]
fn flat_traces_match_between_modes() {
    let db = MaterialDb::bundled();
    let c = project_layout(&strip_layout(), &plate(), ProjectionMode::ArcLength).unwrap();
    let s = PlanSettings::default();
    let traces = |tp: Toolpath| -> Vec<ToolpathSegment> {
        tp.segments.into_iter().filter(|s| s.kind == SegmentKind::Trace).collect()
    };
    let a = traces(plan_conformal(&c, &db, &s).unwrap());
    let b = traces(plan_planar(&c, &db, &s).unwrap());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.points.len(), y.points.len());
        for (p, q) in x.points.iter().zip(&y.points) {
            assert!((p.position - q.position).norm() < 1e-6);
            assert!((p.axis - q.axis).norm() < 1e-12);
        }
    }
}

#[test]
fn planning_is_deterministic() {
    let db = MaterialDb::bundled();
    let c = project_layout(&strip_layout(), &plate(), ProjectionMode::ArcLength).unwrap();
    let s = PlanSettings::default();
    assert_eq!(plan_planar(&c, &db, &s).unwrap(), plan_planar(&c, &db, &s).unwrap());
    assert_eq!(plan_conformal(&c, &db, &s).unwrap(), plan_conformal(&c, &db, &s).unwrap());
}

#[test]
fn no_traces_means_no_tool_change() {
    let db = MaterialDb::bundled();
    let lay = PlanarLayout {
        conductive_regions: vec![],
        ..strip_layout()
    };
    let c = project_layout(&lay, &plate(), ProjectionMode::ArcLength).unwrap();
    let tp = plan_planar(&c, &db, &PlanSettings::default()).unwrap();
    assert_eq!(tp.tool_changes(), 0);
    assert!(tp.segments.iter().all(|s| s.tool == tp.segments[0].tool));
    // five 0.2 mm layers
    let layers: std::collections::BTreeSet<usize> = tp.segments.iter().map(|s| s.layer).collect();
    assert_eq!(layers.len(), 5);
}

#[test]
fn estimate_arithmetic() {
    let db = MaterialDb::bundled();
    let pla = db.tool_of_kind(crate::materials::MaterialKind::Dielectric).unwrap();
    let seg = ToolpathSegment {
        kind: SegmentKind::Substrate,
        tool: pla,
        layer: 0,
        points: vec![
            PathPoint { position: P3::origin(), axis: V3::z() },
            PathPoint { position: P3::new(100.0, 0.0, 0.0), axis: V3::z() },
        ],
        flow_mm3_per_mm: 10.0,
        speed_mm_s: 5.0,
    };
    let tp = Toolpath {
        mode: PlanMode::Planar,
        design: DesignKind::Patch,
        segments: vec![seg],
    };
    let est = estimate(&tp, &db, 30.0).unwrap();
    assert!((est.time_s - 20.0).abs() < 1e-12);
    assert!((est.mass_g - 1.24).abs() < 1e-12);
    let sum: f64 = est.by_material.values().map(|t| t.mass_g).sum();
    assert!((sum - est.mass_g).abs() < 1e-9);
}

#[test]
fn text_dump_has_one_line_per_segment() {
    let db = MaterialDb::bundled();
    let c = project_layout(&strip_layout(), &plate(), ProjectionMode::ArcLength).unwrap();
    let tp = plan_conformal(&c, &db, &PlanSettings::default()).unwrap();
    let text = tp.to_text();
    assert_eq!(text.lines().count(), tp.segments.len() + 1);
    assert!(text.lines().nth(1).unwrap().starts_with("substrate "));
    assert!(text.contains("\ntool_changes 0 "));
}
