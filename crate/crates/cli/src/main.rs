//! `antfab`: command-line driver for the conformal antenna fabrication
//! pipeline.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use antfab::dimcheck::{dim_error_report, parse_measurements};
use antfab::em::{cavity_modes, predict_s11, EmOptions};
use antfab::gcode::{config_hash, emit, parse, simulate, solve_poses, EmitOptions};
use antfab::job::{JobConfig, JobError};
use antfab::kinematics::FeedFlavor;
use antfab::layout_io::{layout_to_svg, layout_to_text};
use antfab::pathplan::{estimate, PlanMode};
use antfab::pipeline::{design_stage, plan_stage, run_pipeline, s11_rows_csv, s11_table, Stage};
use antfab::projection::{distortion_report, project_layout};
use antfab::s11::load_curve;

#[derive(Parser)]
#[command(name = "antfab", version, about = "Conformal antenna design to five-axis G-code")]
struct Cli {
    /// Reserved; every stage is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Planar,
    Conformal,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<PlanMode> {
        match self {
            ModeArg::Planar => vec![PlanMode::Planar],
            ModeArg::Conformal => vec![PlanMode::Conformal],
            ModeArg::Both => vec![PlanMode::Planar, PlanMode::Conformal],
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FlavorArg {
    DesktopMmMin,
    InverseTime,
}

impl From<FlavorArg> for FeedFlavor {
    fn from(f: FlavorArg) -> Self {
        match f {
            FlavorArg::DesktopMmMin => FeedFlavor::DesktopMmMin,
            FlavorArg::InverseTime => FeedFlavor::InverseTime,
        }
    }
}

#[derive(clap::Args)]
struct JobArgs {
    /// Job file (TOML).
    #[arg(long)]
    job: PathBuf,
    /// Output directory; defaults to the job's `output_dir` or `out/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the layout and write text and SVG exports.
    Design(JobArgs),
    /// Project the layout onto the substrate and report feature distortion.
    Project(JobArgs),
    /// Plan toolpaths and print time and mass estimates.
    Plan {
        #[command(flatten)]
        job: JobArgs,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
    },
    /// Plan, solve kinematics and write G-code.
    Emit {
        #[command(flatten)]
        job: JobArgs,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        #[arg(long, value_enum)]
        flavor: Option<FlavorArg>,
    },
    /// Parse and simulate a G-code file on the job's machine.
    Verify {
        #[arg(long)]
        job: PathBuf,
        #[arg(long)]
        gcode: PathBuf,
    },
    /// Predict S11 of a patch design.
    Predict(JobArgs),
    /// Compare two or more S11 files (CSV or Touchstone).
    Compare {
        #[arg(required = true, num_args = 2..)]
        files: Vec<PathBuf>,
        /// Comma-separated labels, one per file.
        #[arg(long, value_delimiter = ',')]
        labels: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Relative dimensional error of measured samples.
    Dimcheck {
        #[command(flatten)]
        job: JobArgs,
        /// CSV of `sample,feature,measured_mm`; defaults to the job's reference.
        #[arg(long)]
        measured: Option<PathBuf>,
    },
    /// Run every stage and write the comparison bundle.
    Pipeline {
        #[command(flatten)]
        job: JobArgs,
        #[arg(long, value_enum)]
        flavor: Option<FlavorArg>,
    },
}

/// Invalid jobs already name their stage; read and parse failures get one.
fn load_job(path: &Path) -> Result<JobConfig> {
    JobConfig::load(path).map_err(|e| match e {
        JobError::Invalid { .. } => anyhow::anyhow!("{e}"),
        other => anyhow::anyhow!("{}: {other}", Stage::Config),
    })
}

fn load(args: &JobArgs) -> Result<(JobConfig, PathBuf)> {
    let job = load_job(&args.job)?;
    let out = match (&args.out, &job.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => job.resolve(o),
        (None, None) => PathBuf::from("out").join(&job.name),
    };
    Ok((job, out))
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn mode_name(m: PlanMode) -> &'static str {
    match m {
        PlanMode::Planar => "planar",
        PlanMode::Conformal => "conformal",
    }
}

fn run(cli: Cli) -> Result<bool> {
    if cli.seed.is_some() {
        log::info!("--seed is accepted but unused; the pipeline is deterministic");
    }
    match cli.command {
        Command::Design(args) => {
            let (job, out) = load(&args)?;
            let db = job.material_db()?;
            let d = design_stage(&job, &db)?;
            if let Some(p) = &d.patch {
                println!(
                    "patch W {:.4} mm, L {:.4} mm, inset {:.4} mm, feed {:.4} mm",
                    p.width_mm, p.length_mm, p.feed_inset_mm, p.feed_line_width_mm
                );
            }
            println!("{:<18} {:>20}", "feature", "nominal_mm");
            for f in &d.layout.features {
                println!("{:<18} {:>20.12}", f.id, f.nominal_length());
            }
            write(&out, "layout.txt", layout_to_text(&d.layout))?;
            write(&out, "layout.svg", layout_to_svg(&d.layout))?;
        }
        Command::Project(args) => {
            let (job, out) = load(&args)?;
            let db = job.material_db()?;
            let d = design_stage(&job, &db)?;
            let c = project_layout(&d.layout, &job.surface, job.projection)?;
            let rep = distortion_report(&c)?;
            println!("{:<18} {:>12} {:>12} {:>10}", "feature", "nominal_mm", "conformal_mm", "error_%");
            for r in &rep.rows {
                println!("{:<18} {:>12.6} {:>12.6} {:>10.6}", r.feature, r.nominal_mm, r.conformal_mm, r.error_pct);
            }
            println!("mean |error| {:.6}%  max |error| {:.6}%", rep.mean_abs_error_pct, rep.max_abs_error_pct);
            write(&out, "distortion.json", serde_json::to_string_pretty(&rep)?)?;
        }
        Command::Plan { job: args, mode } => {
            let (job, out) = load(&args)?;
            let db = job.material_db()?;
            let d = design_stage(&job, &db)?;
            let c = project_layout(&d.layout, &job.surface, job.projection)?;
            for m in mode.modes() {
                let tp = plan_stage(&c, &db, &job, m)?;
                let est = estimate(&tp, &db, job.machine.tool_change_s)?;
                println!("{}: {:.1} s, {:.4} g", mode_name(m), est.time_s, est.mass_g);
                for (k, t) in &est.by_kind {
                    println!("  {k:<13} {:>10.1} s {:>10.4} g {:>12.3} mm3", t.time_s, t.mass_g, t.volume_mm3);
                }
                write(&out, &format!("toolpath_{}.txt", mode_name(m)), tp.to_text())?;
                write(&out, &format!("estimate_{}.json", mode_name(m)), serde_json::to_string_pretty(&est)?)?;
            }
        }
        Command::Emit { job: args, mode, flavor } => {
            let (mut job, out) = load(&args)?;
            if let Some(f) = flavor {
                job.flavor = f.into();
            }
            let db = job.material_db()?;
            let d = design_stage(&job, &db)?;
            let c = project_layout(&d.layout, &job.surface, job.projection)?;
            for m in mode.modes() {
                let tp = plan_stage(&c, &db, &job, m)?;
                let poses = solve_poses(&tp, &job.machine)?;
                let opts = EmitOptions {
                    flavor: job.flavor,
                    job_name: job.name.clone(),
                    config_hash: config_hash(&job.source),
                };
                let prog = emit(&tp, &poses, &job.machine, &db, &opts)?;
                write(&out, &format!("{}.gcode", mode_name(m)), prog.to_text())?;
            }
        }
        Command::Verify { job, gcode } => {
            let job = load_job(&job)?;
            let db = job.material_db()?;
            let text = fs::read_to_string(&gcode).with_context(|| format!("reading {}", gcode.display()))?;
            let prog = parse(&text)?;
            let rep = simulate(&prog, &job.machine, &db);
            println!("{}", serde_json::to_string_pretty(&rep)?);
            return Ok(rep.violations.is_empty());
        }
        Command::Predict(args) => {
            let (job, out) = load(&args)?;
            let db = job.material_db()?;
            let d = design_stage(&job, &db)?;
            let Some(dims) = d.patch else {
                bail!("{}: S11 prediction needs a patch design", Stage::Predict);
            };
            let (diel, cond) = (db.dielectric()?, db.conductor()?);
            let dir = d.layout.raster_direction;
            for m in cavity_modes(&dims, diel, cond, &dir, &EmOptions::default())?.iter().take(4) {
                println!(
                    "TM{}{}: {:.4} GHz, Q {:.1}, sigma_eff {:.0} S/m",
                    m.m,
                    m.n,
                    m.freq_hz / 1e9,
                    m.q_total(),
                    m.sigma_eff_s_per_m
                );
            }
            let curve = predict_s11(&dims, diel, cond, &dir, &job.sweep.sweep()?, &EmOptions::default())?;
            for r in curve.resonances() {
                println!("resonance {:.4} GHz, {:.2} dB", r.freq_hz / 1e9, r.depth_db);
            }
            write(&out, "s11_predicted.csv", curve.to_csv())?;
        }
        Command::Compare { files, labels, out } => {
            if !labels.is_empty() && labels.len() != files.len() {
                bail!("got {} labels for {} files", labels.len(), files.len());
            }
            let mut curves = Vec::new();
            for (i, f) in files.iter().enumerate() {
                let label = labels.get(i).cloned().unwrap_or_else(|| {
                    f.file_stem().map_or(format!("curve{i}"), |s| s.to_string_lossy().into_owned())
                });
                curves.push((label, load_curve(f).with_context(|| format!("loading {}", f.display()))?));
            }
            let csv = s11_rows_csv(&s11_table(&curves)?);
            match out {
                Some(dir) => write(&dir, "s11_table.csv", csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Dimcheck { job: args, measured } => {
            let (job, out) = load(&args)?;
            let db = job.material_db()?;
            let path = match (measured, &job.reference.measured_dims) {
                (Some(p), _) => p,
                (None, Some(p)) => job.resolve(p),
                (None, None) => bail!("{}: no measurement file given", Stage::Dimcheck),
            };
            let d = design_stage(&job, &db)?;
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let rep = dim_error_report(&d.layout, &parse_measurements(&text)?)?;
            for s in &rep.samples {
                println!(
                    "{}: {} features, mean |error| {:.4}%, max |error| {:.4}% ({}), flagged {}",
                    s.sample, s.features, s.mean_abs_error_pct, s.max_abs_error_pct, s.worst_feature, s.flagged
                );
            }
            write(&out, "dim_error_table.csv", rep.to_csv())?;
            write(&out, "dim_error_table.json", serde_json::to_string_pretty(&rep)?)?;
        }
        Command::Pipeline { job: args, flavor } => {
            let (mut job, out) = load(&args)?;
            if let Some(f) = flavor {
                job.flavor = f.into();
            }
            let run = run_pipeline(&job, &out)?;
            let b = &run.bundle;
            println!("{:<22} {:>14} {:>14} {:>12} {:>12}", "metric", "planar", "conformal", "reduction_%", "reference_%");
            for r in b.plan_table.iter().take(2) {
                let reference = r.reference_reduction_pct.map_or("-".to_string(), |v| format!("{v:.1}"));
                println!(
                    "{:<22} {:>14.3} {:>14.3} {:>12.2} {:>12}",
                    r.metric, r.planar, r.conformal, r.reduction_pct, reference
                );
            }
            for c in &b.checks {
                println!("[{}] {} ({})", if c.ok { "ok" } else { "FAIL" }, c.name, c.detail);
            }
            println!("artifacts in {}", out.display());
            return Ok(b.ok());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
