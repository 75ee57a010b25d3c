//! Job files: one TOML document naming the design, substrate surface,
//! planner settings, machine and optional reference data for a full run.
//!
//! Relative paths inside a job resolve against the job file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::design::UwbParams;
use crate::em::FrequencySweep;
use crate::kinematics::{FeedFlavor, MachineConfig};
use crate::materials::{load_material_db, MaterialDb, MATERIALS_ENV};
use crate::pathplan::PlanSettings;
use crate::projection::ProjectionMode;
use crate::surface::Surface;

#[derive(Debug, thiserror::Error)]
pub enum JobError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("job file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{stage}: {message}")]
    Invalid { stage: &'static str, message: String },
}

fn invalid(stage: &'static str, message: impl ToString) -> JobError {
    JobError::Invalid {
        stage,
        message: message.to_string(),
    }
}

/// Patch raster along the resonant length (`y`) or across it (`x`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RasterAlong {
    #[default]
    Length,
    Width,
}

impl RasterAlong {
    pub fn direction(self) -> Vector2<f64> {
        match self {
            RasterAlong::Length => Vector2::y(),
            RasterAlong::Width => Vector2::x(),
        }
    }
}

fn default_margin() -> f64 {
    10.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignSpec {
    Patch {
        f_target_hz: f64,
        #[serde(default = "default_margin")]
        margin_mm: f64,
        #[serde(default)]
        raster: RasterAlong,
        /// Re-tune the feed inset against the cavity network.
        #[serde(default = "yes")]
        tune_inset: bool,
    },
    Uwb(UwbParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub step_hz: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            start_hz: 1.0e9,
            stop_hz: 8.0e9,
            step_hz: 5.0e6,
        }
    }
}

impl SweepSpec {
    pub fn sweep(&self) -> Result<FrequencySweep, crate::em::EmError> {
        FrequencySweep::new(self.start_hz, self.stop_hz, self.step_hz)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveRef {
    pub label: String,
    pub path: PathBuf,
}

/// Reference data compared against the run. Reduction percentages are only
/// printed beside the computed ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    #[serde(default)]
    pub s11: Vec<CurveRef>,
    pub measured_dims: Option<PathBuf>,
    pub time_reduction_pct: Option<f64>,
    pub mass_reduction_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub name: String,
    pub materials: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub projection: ProjectionMode,
    #[serde(default = "default_flavor")]
    pub flavor: FeedFlavor,
    pub design: DesignSpec,
    pub surface: Surface,
    #[serde(default)]
    pub settings: PlanSettings,
    pub machine: MachineConfig,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub reference: ReferenceSpec,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
    /// Raw job text, hashed into program headers.
    #[serde(skip)]
    pub source: String,
}

fn default_flavor() -> FeedFlavor {
    FeedFlavor::DesktopMmMin
}

impl JobConfig {
    pub fn from_text(text: &str, base_dir: &Path) -> Result<Self, JobError> {
        let mut job: JobConfig = toml::from_str(text)?;
        job.base_dir = base_dir.to_path_buf();
        job.source = text.to_string();
        job.validate()?;
        Ok(job)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, JobError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| JobError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_text(&text, base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Explicit `materials` path, then the environment override, then the
    /// bundled database.
    pub fn material_db(&self) -> Result<MaterialDb, JobError> {
        let path = match &self.materials {
            Some(p) => Some(self.resolve(p)),
            None => std::env::var_os(MATERIALS_ENV).map(PathBuf::from),
        };
        match path {
            Some(p) => load_material_db(&p).map_err(|e| invalid("materials", e)),
            None => Ok(MaterialDb::bundled()),
        }
    }

    pub fn validate(&self) -> Result<(), JobError> {
        match &self.design {
            DesignSpec::Patch { f_target_hz, margin_mm, .. } => {
                if !(*f_target_hz > 0.0 && f_target_hz.is_finite()) {
                    return Err(invalid("design", "f_target_hz must be > 0"));
                }
                if !(*margin_mm > 0.0) {
                    return Err(invalid("design", "margin_mm must be > 0"));
                }
            }
            DesignSpec::Uwb(_) => {}
        }
        self.surface.validate().map_err(|e| invalid("surface", e))?;
        self.settings.validate().map_err(|e| invalid("settings", e))?;
        self.machine.validate().map_err(|e| invalid("machine", e))?;
        self.sweep.sweep().map_err(|e| invalid("sweep", e))?;
        let mut files: Vec<(&'static str, &PathBuf)> = Vec::new();
        files.extend(self.materials.iter().map(|p| ("materials", p)));
        files.extend(self.reference.s11.iter().map(|c| ("reference", &c.path)));
        files.extend(self.reference.measured_dims.iter().map(|p| ("reference", p)));
        for (stage, p) in files {
            let full = self.resolve(p);
            if !full.is_file() {
                return Err(invalid(stage, format!("missing file {}", full.display())));
            }
        }
        Ok(())
    }
}
