//! End-to-end run of a job: design, projection, both plans, G-code emission
//! and re-verification, S11 prediction and comparison tables.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::design::{patch_layout, synthesize_patch, uwb_layout, PatchDims, PlanarLayout};
use crate::dimcheck::{dim_error_report, parse_measurements, DimErrorReport};
use crate::em::{predict_s11, tune_feed_inset, EmOptions};
use crate::gcode::{config_hash, emit, parse, simulate, solve_poses, EmitOptions, GProgram, SimReport};
use crate::job::{DesignSpec, JobConfig};
use crate::kinematics::JointState;
use crate::layout_io::{layout_to_svg, layout_to_text};
use crate::materials::{eval_permittivity, MaterialDb};
use crate::pathplan::{estimate, plan_conformal, plan_planar, Estimate, PlanMode, Toolpath};
use crate::projection::{distortion_report, project_layout, ConformalLayout, DistortionReport};
use crate::s11::{compare_s11, load_curve, S11Curve, S11Error};

/// Simulated mass must match the planner within this fraction.
pub const MASS_TOLERANCE: f64 = 1e-3;
/// Simulated time must match the planner within this fraction.
pub const TIME_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Design,
    Project,
    Plan,
    Kinematics,
    Emit,
    Verify,
    Predict,
    Compare,
    Dimcheck,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format!("{self:?}").to_lowercase())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

/// Labels any error with the stage it came from.
pub fn at<E: fmt::Display>(stage: Stage) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError {
        stage,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct DesignOutput {
    pub layout: PlanarLayout,
    /// Final patch dimensions; `None` for designs without a cavity model.
    pub patch: Option<PatchDims>,
}

/// Synthesizes the job's layout. Patches take `eps_r` from the dielectric
/// at the target frequency and the substrate height from the surface.
pub fn design_stage(job: &JobConfig, db: &MaterialDb) -> Result<DesignOutput, PipelineError> {
    match &job.design {
        DesignSpec::Patch {
            f_target_hz,
            margin_mm,
            raster,
            tune_inset,
        } => {
            let diel = db.dielectric().map_err(at(Stage::Design))?;
            let cond = db.conductor().map_err(at(Stage::Design))?;
            let (eps_r, _) = eval_permittivity(diel, *f_target_hz).map_err(at(Stage::Design))?;
            let mut dims =
                synthesize_patch(*f_target_hz, eps_r, job.surface.thickness_mm).map_err(at(Stage::Design))?;
            let dir = raster.direction();
            if *tune_inset {
                dims = tune_feed_inset(&dims, diel, cond, &dir, &EmOptions::default())
                    .map_err(at(Stage::Design))?
                    .0;
            }
            let layout = patch_layout(&dims, *margin_mm)
                .map_err(at(Stage::Design))?
                .with_raster_direction(dir);
            Ok(DesignOutput {
                layout,
                patch: Some(dims),
            })
        }
        DesignSpec::Uwb(params) => {
            let (layout, warnings) = uwb_layout(params).map_err(at(Stage::Design))?;
            for w in warnings {
                log::warn!("{w}");
            }
            Ok(DesignOutput { layout, patch: None })
        }
    }
}

pub fn plan_stage(
    conformal: &ConformalLayout,
    db: &MaterialDb,
    job: &JobConfig,
    mode: PlanMode,
) -> Result<Toolpath, PipelineError> {
    match mode {
        PlanMode::Planar => plan_planar(conformal, db, &job.settings),
        PlanMode::Conformal => plan_conformal(conformal, db, &job.settings),
    }
    .map_err(at(Stage::Plan))
}

/// Largest change of C between consecutive solved poses, rad.
pub fn max_c_step(poses: &[Vec<JointState>]) -> f64 {
    let flat: Vec<&JointState> = poses.iter().flatten().collect();
    flat.windows(2)
        .map(|w| (w[1].c - w[0].c).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct ModeRun {
    pub mode: PlanMode,
    pub toolpath: Toolpath,
    pub estimate: Estimate,
    pub program: GProgram,
    pub text: String,
    pub sim: SimReport,
    pub roundtrip_identical: bool,
    pub max_c_step_rad: f64,
}

/// Plans one mode, emits its program, parses it back and simulates it.
pub fn run_mode(
    conformal: &ConformalLayout,
    db: &MaterialDb,
    job: &JobConfig,
    mode: PlanMode,
) -> Result<ModeRun, PipelineError> {
    let toolpath = plan_stage(conformal, db, job, mode)?;
    let est = estimate(&toolpath, db, job.machine.tool_change_s).map_err(at(Stage::Plan))?;
    let poses = solve_poses(&toolpath, &job.machine).map_err(at(Stage::Kinematics))?;
    let opts = EmitOptions {
        flavor: job.flavor,
        job_name: job.name.clone(),
        config_hash: config_hash(&job.source),
    };
    let program = emit(&toolpath, &poses, &job.machine, db, &opts).map_err(at(Stage::Emit))?;
    let text = program.to_text();
    let parsed = parse(&text).map_err(at(Stage::Verify))?;
    let roundtrip_identical = parsed.to_text() == text;
    let sim = simulate(&parsed, &job.machine, db);
    Ok(ModeRun {
        mode,
        max_c_step_rad: max_c_step(&poses),
        toolpath,
        estimate: est,
        program,
        text,
        sim,
        roundtrip_identical,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub metric: String,
    pub planar: f64,
    pub conformal: f64,
    /// `100·(planar − conformal)/planar`.
    pub reduction_pct: f64,
    pub reference_reduction_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub mode: PlanMode,
    pub est_time_s: f64,
    pub sim_time_s: f64,
    pub time_diff_pct: f64,
    pub est_mass_g: f64,
    pub sim_mass_g: f64,
    pub mass_diff_pct: f64,
    pub violations: usize,
    pub roundtrip_identical: bool,
    pub max_c_step_rad: f64,
}

impl VerifyRow {
    pub fn from_run(run: &ModeRun) -> Self {
        let rel = |a: f64, b: f64| if b == 0.0 { 0.0 } else { 100.0 * (a - b) / b };
        Self {
            mode: run.mode,
            est_time_s: run.estimate.time_s,
            sim_time_s: run.sim.total_time_s,
            time_diff_pct: rel(run.sim.total_time_s, run.estimate.time_s),
            est_mass_g: run.estimate.mass_g,
            sim_mass_g: run.sim.mass_g,
            mass_diff_pct: rel(run.sim.mass_g, run.estimate.mass_g),
            violations: run.sim.violations.len(),
            roundtrip_identical: run.roundtrip_identical,
            max_c_step_rad: run.max_c_step_rad,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S11Row {
    pub reference: String,
    pub other: String,
    /// `matched`, `only_reference` or `only_other`.
    pub status: String,
    pub reference_freq_ghz: Option<f64>,
    pub reference_depth_db: Option<f64>,
    pub other_freq_ghz: Option<f64>,
    pub other_depth_db: Option<f64>,
    pub freq_shift_pct: Option<f64>,
    pub depth_diff_db: Option<f64>,
    pub rms_diff_db: f64,
}

/// Pairwise resonance table over labelled curves; every earlier curve is the
/// reference for every later one. Rows of a pair are sorted by frequency.
pub fn s11_table(curves: &[(String, S11Curve)]) -> Result<Vec<S11Row>, S11Error> {
    let mut rows = Vec::new();
    for (i, (la, a)) in curves.iter().enumerate() {
        for (lb, b) in &curves[i + 1..] {
            let cmp = compare_s11(a, b)?;
            let base = S11Row {
                reference: la.clone(),
                other: lb.clone(),
                status: String::new(),
                reference_freq_ghz: None,
                reference_depth_db: None,
                other_freq_ghz: None,
                other_depth_db: None,
                freq_shift_pct: None,
                depth_diff_db: None,
                rms_diff_db: cmp.rms_diff_db,
            };
            let mut pair: Vec<S11Row> = Vec::new();
            for m in &cmp.matches {
                pair.push(S11Row {
                    status: "matched".into(),
                    reference_freq_ghz: Some(m.reference.freq_hz / 1e9),
                    reference_depth_db: Some(m.reference.depth_db),
                    other_freq_ghz: Some(m.other.freq_hz / 1e9),
                    other_depth_db: Some(m.other.depth_db),
                    freq_shift_pct: Some(m.freq_shift_pct),
                    depth_diff_db: Some(m.depth_diff_db),
                    ..base.clone()
                });
            }
            for r in &cmp.unmatched_reference {
                pair.push(S11Row {
                    status: "only_reference".into(),
                    reference_freq_ghz: Some(r.freq_hz / 1e9),
                    reference_depth_db: Some(r.depth_db),
                    ..base.clone()
                });
            }
            for r in &cmp.unmatched_other {
                pair.push(S11Row {
                    status: "only_other".into(),
                    other_freq_ghz: Some(r.freq_hz / 1e9),
                    other_depth_db: Some(r.depth_db),
                    ..base.clone()
                });
            }
            let key = |r: &S11Row| r.reference_freq_ghz.or(r.other_freq_ghz).unwrap_or(0.0);
            pair.sort_by(|x, y| key(x).total_cmp(&key(y)));
            rows.extend(pair);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonBundle {
    pub job: String,
    pub config_sha256: String,
    pub plan_table: Vec<PlanRow>,
    pub verification: Vec<VerifyRow>,
    pub distortion: DistortionReport,
    pub s11_table: Vec<S11Row>,
    pub dim_error_table: Option<DimErrorReport>,
    pub checks: Vec<Check>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl ComparisonBundle {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn plan_row(&self, metric: &str) -> Option<&PlanRow> {
        self.plan_table.iter().find(|r| r.metric == metric)
    }

    pub fn plan_csv(&self) -> String {
        let mut out = String::from("metric,planar,conformal,reduction_pct,reference_reduction_pct\n");
        for r in &self.plan_table {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{}",
                r.metric,
                r.planar,
                r.conformal,
                r.reduction_pct,
                opt(r.reference_reduction_pct)
            );
        }
        out
    }

    pub fn verification_csv(&self) -> String {
        let mut out = String::from(
            "mode,est_time_s,sim_time_s,time_diff_pct,est_mass_g,sim_mass_g,mass_diff_pct,violations,roundtrip_identical,max_c_step_rad\n",
        );
        for r in &self.verification {
            let _ = writeln!(
                out,
                "{:?},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{:.6}",
                r.mode,
                r.est_time_s,
                r.sim_time_s,
                r.time_diff_pct,
                r.est_mass_g,
                r.sim_mass_g,
                r.mass_diff_pct,
                r.violations,
                r.roundtrip_identical,
                r.max_c_step_rad
            );
        }
        out.to_lowercase()
    }

    pub fn s11_csv(&self) -> String {
        s11_rows_csv(&self.s11_table)
    }

    pub fn distortion_csv(&self) -> String {
        let mut out = String::from("feature,nominal_mm,conformal_mm,error_pct\n");
        for r in &self.distortion.rows {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6}",
                r.feature, r.nominal_mm, r.conformal_mm, r.error_pct
            );
        }
        out
    }
}

pub fn s11_rows_csv(rows: &[S11Row]) -> String {
    let mut out = String::from(
        "reference,other,status,reference_freq_ghz,reference_depth_db,other_freq_ghz,other_depth_db,freq_shift_pct,depth_diff_db,rms_diff_db\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{:.6}",
            r.reference,
            r.other,
            r.status,
            opt(r.reference_freq_ghz),
            opt(r.reference_depth_db),
            opt(r.other_freq_ghz),
            opt(r.other_depth_db),
            opt(r.freq_shift_pct),
            opt(r.depth_diff_db),
            r.rms_diff_db
        );
    }
    out
}

fn plan_table(job: &JobConfig, planar: &Estimate, conformal: &Estimate) -> Vec<PlanRow> {
    let row = |metric: &str, p: f64, c: f64, reference| PlanRow {
        metric: metric.into(),
        planar: p,
        conformal: c,
        reduction_pct: if p == 0.0 { 0.0 } else { 100.0 * (p - c) / p },
        reference_reduction_pct: reference,
    };
    let mut rows = vec![
        row("time_s", planar.time_s, conformal.time_s, job.reference.time_reduction_pct),
        row("mass_g", planar.mass_g, conformal.mass_g, job.reference.mass_reduction_pct),
    ];
    let kinds: std::collections::BTreeSet<&String> =
        planar.by_kind.keys().chain(conformal.by_kind.keys()).collect();
    for k in kinds {
        let get = |e: &Estimate| e.by_kind.get(k).cloned().unwrap_or_default();
        let (p, c) = (get(planar), get(conformal));
        rows.push(row(&format!("time_s:{k}"), p.time_s, c.time_s, None));
        rows.push(row(&format!("mass_g:{k}"), p.mass_g, c.mass_g, None));
    }
    rows
}

fn checks_for(run: &ModeRun) -> Vec<Check> {
    let v = VerifyRow::from_run(run);
    let mode = format!("{:?}", run.mode).to_lowercase();
    let support = run
        .estimate
        .by_kind
        .get("support")
        .map_or(0.0, |t| t.volume_mm3);
    let mut checks = vec![
        Check {
            name: format!("{mode}: emit/parse/emit identical"),
            ok: v.roundtrip_identical,
            detail: format!("{} bytes", run.text.len()),
        },
        Check {
            name: format!("{mode}: simulator violations"),
            ok: v.violations == 0,
            detail: run
                .sim
                .violations
                .iter()
                .take(5)
                .map(|x| format!("line {}: {:?}", x.line, x.kind))
                .collect::<Vec<_>>()
                .join("; "),
        },
        Check {
            name: format!("{mode}: simulated mass vs estimate"),
            ok: v.mass_diff_pct.abs() <= 100.0 * MASS_TOLERANCE,
            detail: format!("{:+.4}%", v.mass_diff_pct),
        },
        Check {
            name: format!("{mode}: simulated time vs estimate"),
            ok: v.time_diff_pct.abs() <= 100.0 * TIME_TOLERANCE,
            detail: format!("{:+.4}%", v.time_diff_pct),
        },
        Check {
            name: format!("{mode}: C continuity"),
            ok: v.max_c_step_rad < std::f64::consts::PI,
            detail: format!("max step {:.6} rad", v.max_c_step_rad),
        },
    ];
    if run.mode == PlanMode::Conformal {
        checks.push(Check {
            name: "conformal: no support".into(),
            ok: support == 0.0,
            detail: format!("{support:.3} mm3"),
        });
    }
    checks
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    fs::write(dir.join(name), contents).map_err(|e| PipelineError {
        stage: Stage::Write,
        message: format!("{}: {e}", dir.join(name).display()),
    })
}

/// Everything computed by a pipeline run, with the bundle on top.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub bundle: ComparisonBundle,
    pub design: DesignOutput,
    pub planar: ModeRun,
    pub conformal: ModeRun,
    pub predicted: Option<S11Curve>,
}

/// Runs every stage and writes the artifacts into `out_dir`.
pub fn run_pipeline(job: &JobConfig, out_dir: &Path) -> Result<PipelineRun, PipelineError> {
    let run = compute(job)?;
    fs::create_dir_all(out_dir).map_err(at(Stage::Write))?;
    write(out_dir, "layout.txt", layout_to_text(&run.design.layout))?;
    write(out_dir, "layout.svg", layout_to_svg(&run.design.layout))?;
    for m in [&run.planar, &run.conformal] {
        let mode = format!("{:?}", m.mode).to_lowercase();
        write(out_dir, &format!("{mode}.gcode"), &m.text)?;
        let sim = serde_json::to_string_pretty(&m.sim).map_err(at(Stage::Write))?;
        write(out_dir, &format!("sim_{mode}.json"), sim)?;
    }
    if let Some(curve) = &run.predicted {
        write(out_dir, "s11_predicted.csv", curve.to_csv())?;
    }
    let b = &run.bundle;
    let json = serde_json::to_string_pretty(b).map_err(at(Stage::Write))?;
    write(out_dir, "comparison.json", json)?;
    write(out_dir, "plan_table.csv", b.plan_csv())?;
    write(out_dir, "verification.csv", b.verification_csv())?;
    write(out_dir, "distortion.csv", b.distortion_csv())?;
    write(out_dir, "s11_table.csv", b.s11_csv())?;
    if let Some(d) = &b.dim_error_table {
        write(out_dir, "dim_error_table.csv", d.to_csv())?;
    }
    Ok(run)
}

/// The pipeline without writing anything.
pub fn compute(job: &JobConfig) -> Result<PipelineRun, PipelineError> {
    job.validate().map_err(at(Stage::Config))?;
    let db = job.material_db().map_err(at(Stage::Config))?;
    let design = design_stage(job, &db)?;
    let conformal_layout =
        project_layout(&design.layout, &job.surface, job.projection).map_err(at(Stage::Project))?;
    let distortion = distortion_report(&conformal_layout).map_err(at(Stage::Project))?;
    let planar = run_mode(&conformal_layout, &db, job, PlanMode::Planar)?;
    let conformal = run_mode(&conformal_layout, &db, job, PlanMode::Conformal)?;

    let predicted = match &design.patch {
        Some(dims) => {
            let diel = db.dielectric().map_err(at(Stage::Predict))?;
            let cond = db.conductor().map_err(at(Stage::Predict))?;
            let sweep = job.sweep.sweep().map_err(at(Stage::Predict))?;
            let curve = predict_s11(
                dims,
                diel,
                cond,
                &design.layout.raster_direction,
                &sweep,
                &EmOptions::default(),
            )
            .map_err(at(Stage::Predict))?;
            Some(curve)
        }
        None => None,
    };

    let mut curves: Vec<(String, S11Curve)> = predicted.iter().map(|c| ("predicted".to_string(), c.clone())).collect();
    for r in &job.reference.s11 {
        let c = load_curve(job.resolve(&r.path)).map_err(at(Stage::Compare))?;
        curves.push((r.label.clone(), c));
    }
    let s11 = s11_table(&curves).map_err(at(Stage::Compare))?;

    let dims_table = match &job.reference.measured_dims {
        Some(p) => {
            let path = job.resolve(p);
            let text = fs::read_to_string(&path).map_err(at(Stage::Dimcheck))?;
            let m = parse_measurements(&text).map_err(at(Stage::Dimcheck))?;
            Some(dim_error_report(&design.layout, &m).map_err(at(Stage::Dimcheck))?)
        }
        None => None,
    };

    let mut checks = checks_for(&planar);
    checks.extend(checks_for(&conformal));
    let bundle = ComparisonBundle {
        job: job.name.clone(),
        config_sha256: config_hash(&job.source),
        plan_table: plan_table(job, &planar.estimate, &conformal.estimate),
        verification: vec![VerifyRow::from_run(&planar), VerifyRow::from_run(&conformal)],
        distortion,
        s11_table: s11,
        dim_error_table: dims_table,
        checks,
    };
    Ok(PipelineRun {
        bundle,
        design,
        planar,
        conformal,
        predicted,
    })
}
