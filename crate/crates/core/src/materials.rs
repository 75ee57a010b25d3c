//! Material models for printed dielectrics and conductive filaments.
//!
//! Dielectrics carry a frequency table of `(f, eps_r, tan_delta)` rows that is
//! interpolated piecewise-linearly and clamped to the end rows outside its
//! range. Conductors carry a diagonal conductivity tensor expressed in the
//! trace-local frame: along the deposition direction, across it in-plane, and
//! through the layer stack.
//!
//! Databases are loaded from TOML. Fields omitted from a material block are
//! filled from the defaults table below (looked up by material name first,
//! then by kind):
//!
//! | key                      | PLA   | Electrifi | other dielectric | other conductor |
//! |--------------------------|-------|-----------|------------------|-----------------|
//! | `density_g_per_cm3`      | 1.24  | 1.80      | 1.24             | 1.80            |
//! | `filament_diameter_mm`   | 1.75  | 1.75      | 1.75             | 1.75            |
//! | `print_temp_c`           | 225   | 145       | 215              | 145             |
//! | `print_speed_mm_per_s`   | 40    | 5         | 40               | 5               |

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Environment variable naming the default material database file.
pub const MATERIALS_ENV: &str = "ANTFAB_MATERIALS";

/// Bundled default database (PLA on tool 1, Electrifi on tool 0).
pub const DEFAULT_DB_TOML: &str = include_str!("../data/materials.toml");

const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum MaterialError {
    #[error("material '{0}' is not a dielectric")]
    NonDielectric(String),
    #[error("material '{0}' has an empty permittivity table")]
    EmptyTable(String),
    #[error("material '{0}' is not a conductor")]
    NonConductor(String),
    #[error("current direction is not a unit vector (|d| = {0})")]
    NonUnitDirection(f64),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for {field}: {reason}")]
    InvariantViolation { field: String, reason: String },
    #[error("unknown material '{0}'")]
    UnknownMaterial(String),
    #[error("no material assigned to tool {0}")]
    UnassignedTool(usize),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    Dielectric,
    Conductor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermittivityPoint {
    pub freq_hz: f64,
    pub eps_r: f64,
    pub tan_delta: f64,
}

/// Diagonal conductivity in the trace-local frame, S/m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConductivityTensor {
    pub parallel: f64,
    pub transverse: f64,
    pub vertical: f64,
}

impl ConductivityTensor {
    pub fn isotropic(sigma: f64) -> Self {
        Self {
            parallel: sigma,
            transverse: sigma,
            vertical: sigma,
        }
    }

    pub fn min(&self) -> f64 {
        self.parallel.min(self.transverse).min(self.vertical)
    }

    pub fn max(&self) -> f64 {
        self.parallel.max(self.transverse).max(self.vertical)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaterialModel {
    pub name: String,
    pub kind: MaterialKind,
    pub permittivity: Vec<PermittivityPoint>,
    pub conductivity: Option<ConductivityTensor>,
    pub density_g_per_cm3: f64,
    pub filament_diameter_mm: f64,
    pub print_temp_c: f64,
    pub print_speed_mm_per_s: f64,
}

impl MaterialModel {
    /// Filament cross-section area in mm².
    pub fn filament_area_mm2(&self) -> f64 {
        let r = 0.5 * self.filament_diameter_mm;
        std::f64::consts::PI * r * r
    }

    /// Mass in grams of `volume_mm3` of deposited material.
    pub fn mass_g(&self, volume_mm3: f64) -> f64 {
        volume_mm3 * self.density_g_per_cm3 * 1e-3
    }

    pub fn conductivity(&self) -> Result<&ConductivityTensor, MaterialError> {
        match (self.kind, &self.conductivity) {
            (MaterialKind::Conductor, Some(t)) => Ok(t),
            _ => Err(MaterialError::NonConductor(self.name.clone())),
        }
    }

    /// Checks every model invariant, naming the offending field.
    pub fn validate(&self) -> Result<(), MaterialError> {
        let field = |f: &str| format!("materials.{}.{}", self.name, f);
        let bad = |f: &str, reason: String| MaterialError::InvariantViolation {
            field: field(f),
            reason,
        };
        match self.kind {
            MaterialKind::Dielectric => {
                if self.permittivity.is_empty() {
                    return Err(MaterialError::EmptyTable(self.name.clone()));
                }
                for (i, row) in self.permittivity.iter().enumerate() {
                    if !(row.freq_hz > 0.0) {
                        return Err(bad(
                            &format!("permittivity[{i}].freq_hz"),
                            "must be > 0".into(),
                        ));
                    }
                    if !(row.eps_r >= 1.0) {
                        return Err(bad(
                            &format!("permittivity[{i}].eps_r"),
                            format!("{} < 1", row.eps_r),
                        ));
                    }
                    if !(row.tan_delta >= 0.0) {
                        return Err(bad(
                            &format!("permittivity[{i}].tan_delta"),
                            format!("{} is negative", row.tan_delta),
                        ));
                    }
                }
                for (i, w) in self.permittivity.windows(2).enumerate() {
                    if !(w[1].freq_hz > w[0].freq_hz) {
                        return Err(bad(
                            &format!("permittivity[{}].freq_hz", i + 1),
                            "table must be strictly ascending in frequency".into(),
                        ));
                    }
                }
            }
            MaterialKind::Conductor => {
                let t = self.conductivity.ok_or_else(|| {
                    bad("sigma_parallel_s_per_m", "conductor needs a conductivity tensor".into())
                })?;
                for (name, v) in [
                    ("sigma_parallel_s_per_m", t.parallel),
                    ("sigma_transverse_s_per_m", t.transverse),
                    ("sigma_vertical_s_per_m", t.vertical),
                ] {
                    if !(v > 0.0) {
                        return Err(bad(name, format!("{v} must be > 0")));
                    }
                }
                if t.parallel < t.transverse {
                    return Err(bad(
                        "sigma_transverse_s_per_m",
                        "must not exceed sigma_parallel_s_per_m".into(),
                    ));
                }
            }
        }
        if !(self.density_g_per_cm3 > 0.0) {
            return Err(bad("density_g_per_cm3", "must be > 0".into()));
        }
        if !(self.filament_diameter_mm > 0.0 && self.filament_diameter_mm <= 3.0) {
            return Err(bad("filament_diameter_mm", "must be in (0, 3]".into()));
        }
        if !(self.print_speed_mm_per_s > 0.0) {
            return Err(bad("print_speed_mm_per_s", "must be > 0".into()));
        }
        Ok(())
    }
}

/// Relative permittivity and loss tangent at `freq_hz`.
///
/// Linear interpolation between table rows, clamped to the nearest end row
/// outside the tabulated range.
pub fn eval_permittivity(model: &MaterialModel, freq_hz: f64) -> Result<(f64, f64), MaterialError> {
    if model.kind != MaterialKind::Dielectric {
        return Err(MaterialError::NonDielectric(model.name.clone()));
    }
    let table = &model.permittivity;
    let (first, last) = match (table.first(), table.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(MaterialError::EmptyTable(model.name.clone())),
    };
    if freq_hz <= first.freq_hz {
        return Ok((first.eps_r, first.tan_delta));
    }
    if freq_hz >= last.freq_hz {
        return Ok((last.eps_r, last.tan_delta));
    }
    let i = table.partition_point(|p| p.freq_hz <= freq_hz);
    let (a, b) = (&table[i - 1], &table[i]);
    if freq_hz == a.freq_hz {
        return Ok((a.eps_r, a.tan_delta));
    }
    let t = (freq_hz - a.freq_hz) / (b.freq_hz - a.freq_hz);
    Ok((
        a.eps_r + t * (b.eps_r - a.eps_r),
        a.tan_delta + t * (b.tan_delta - a.tan_delta),
    ))
}

/// Conductivity seen by a current flowing along `current_dir`, given in the
/// trace-local frame (x along deposition, y across it, z through layers).
///
/// Quadratic-form mixing: `σ∥·dx² + σ⊥·dy² + σz·dz²`.
pub fn effective_conductivity(
    tensor: &ConductivityTensor,
    current_dir: &Vector3<f64>,
) -> Result<f64, MaterialError> {
    let norm = current_dir.norm();
    if (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(MaterialError::NonUnitDirection(norm));
    }
    let d = current_dir;
    Ok(tensor.parallel * d.x * d.x + tensor.transverse * d.y * d.y + tensor.vertical * d.z * d.z)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaterialDb {
    pub materials: BTreeMap<String, MaterialModel>,
    pub tool_assignment: BTreeMap<usize, String>,
}

impl MaterialDb {
    pub fn get(&self, name: &str) -> Result<&MaterialModel, MaterialError> {
        self.materials
            .get(name)
            .ok_or_else(|| MaterialError::UnknownMaterial(name.to_string()))
    }

    pub fn for_tool(&self, tool: usize) -> Result<&MaterialModel, MaterialError> {
        let name = self
            .tool_assignment
            .get(&tool)
            .ok_or(MaterialError::UnassignedTool(tool))?;
        self.get(name)
    }

    /// Tool index printing the first material of `kind`, if any.
    pub fn tool_of_kind(&self, kind: MaterialKind) -> Option<usize> {
        self.tool_assignment
            .iter()
            .find(|(_, name)| self.materials.get(*name).map(|m| m.kind) == Some(kind))
            .map(|(t, _)| *t)
    }

    pub fn dielectric(&self) -> Result<&MaterialModel, MaterialError> {
        let tool = self
            .tool_of_kind(MaterialKind::Dielectric)
            .ok_or_else(|| MaterialError::UnknownMaterial("<dielectric>".into()))?;
        self.for_tool(tool)
    }

    pub fn conductor(&self) -> Result<&MaterialModel, MaterialError> {
        let tool = self
            .tool_of_kind(MaterialKind::Conductor)
            .ok_or_else(|| MaterialError::UnknownMaterial("<conductor>".into()))?;
        self.for_tool(tool)
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        for m in self.materials.values() {
            m.validate()?;
        }
        let mut seen = BTreeMap::new();
        for (tool, name) in &self.tool_assignment {
            let m = self.materials.get(name).ok_or_else(|| MaterialError::InvariantViolation {
                field: format!("tools.{tool}"),
                reason: format!("unknown material '{name}'"),
            })?;
            if let Some(other) = seen.insert(m.kind, *tool) {
                return Err(MaterialError::InvariantViolation {
                    field: format!("tools.{tool}"),
                    reason: format!("tool {other} already prints a {:?}", m.kind).to_lowercase(),
                });
            }
        }
        Ok(())
    }

    /// The bundled database.
    pub fn bundled() -> Self {
        parse_material_db(DEFAULT_DB_TOML).expect("bundled material database is valid")
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDb {
    #[serde(default)]
    tools: BTreeMap<String, String>,
    materials: BTreeMap<String, RawMaterial>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterial {
    kind: MaterialKind,
    #[serde(default)]
    permittivity: Vec<PermittivityPoint>,
    sigma_parallel_s_per_m: Option<f64>,
    sigma_transverse_s_per_m: Option<f64>,
    sigma_vertical_s_per_m: Option<f64>,
    density_g_per_cm3: Option<f64>,
    filament_diameter_mm: Option<f64>,
    print_temp_c: Option<f64>,
    print_speed_mm_per_s: Option<f64>,
}

struct Defaults {
    density: f64,
    temp: f64,
    speed: f64,
}

fn defaults_for(name: &str, kind: MaterialKind) -> Defaults {
    match (name.to_ascii_lowercase().as_str(), kind) {
        ("pla", _) => Defaults { density: 1.24, temp: 225.0, speed: 40.0 },
        ("electrifi", _) => Defaults { density: 1.8, temp: 145.0, speed: 5.0 },
        (_, MaterialKind::Dielectric) => Defaults { density: 1.24, temp: 215.0, speed: 40.0 },
        (_, MaterialKind::Conductor) => Defaults { density: 1.8, temp: 145.0, speed: 5.0 },
    }
}

const DEFAULT_FILAMENT_DIAMETER_MM: f64 = 1.75;

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a database from TOML text.
pub fn parse_material_db(text: &str) -> Result<MaterialDb, MaterialError> {
    let raw: RawDb = toml::from_str(text).map_err(|e| MaterialError::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;

    let mut materials = BTreeMap::new();
    for (name, r) in raw.materials {
        let d = defaults_for(&name, r.kind);
        let conductivity = match r.kind {
            MaterialKind::Conductor => {
                let p = r.sigma_parallel_s_per_m.ok_or_else(|| MaterialError::InvariantViolation {
                    field: format!("materials.{name}.sigma_parallel_s_per_m"),
                    reason: "required for conductors".into(),
                })?;
                Some(ConductivityTensor {
                    parallel: p,
                    transverse: r.sigma_transverse_s_per_m.unwrap_or(p / 4.0),
                    vertical: r.sigma_vertical_s_per_m.unwrap_or(p / 16.0),
                })
            }
            MaterialKind::Dielectric => None,
        };
        let model = MaterialModel {
            name: name.clone(),
            kind: r.kind,
            permittivity: r.permittivity,
            conductivity,
            density_g_per_cm3: r.density_g_per_cm3.unwrap_or(d.density),
            filament_diameter_mm: r.filament_diameter_mm.unwrap_or(DEFAULT_FILAMENT_DIAMETER_MM),
            print_temp_c: r.print_temp_c.unwrap_or(d.temp),
            print_speed_mm_per_s: r.print_speed_mm_per_s.unwrap_or(d.speed),
        };
        materials.insert(name, model);
    }

    let mut tool_assignment = BTreeMap::new();
    for (key, name) in raw.tools {
        let tool: usize = key.parse().map_err(|_| MaterialError::InvariantViolation {
            field: format!("tools.{key}"),
            reason: "tool key must be a non-negative integer".into(),
        })?;
        tool_assignment.insert(tool, name);
    }

    let db = MaterialDb {
        materials,
        tool_assignment,
    };
    db.validate()?;
    Ok(db)
}

pub fn load_material_db(path: impl AsRef<Path>) -> Result<MaterialDb, MaterialError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| MaterialError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_material_db(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_row() -> MaterialModel {
        MaterialModel {
            name: "test".into(),
            kind: MaterialKind::Dielectric,
            permittivity: vec![
                PermittivityPoint { freq_hz: 1e9, eps_r: 2.70, tan_delta: 0.008 },
                PermittivityPoint { freq_hz: 6e9, eps_r: 2.60, tan_delta: 0.010 },
            ],
            conductivity: None,
            density_g_per_cm3: 1.24,
            filament_diameter_mm: 1.75,
            print_temp_c: 225.0,
            print_speed_mm_per_s: 40.0,
        }
    }

    #[test]
    fn permittivity_at_node_and_midpoint() {
        let m = two_row();
        assert_eq!(eval_permittivity(&m, 1e9).unwrap(), (2.70, 0.008));
        assert_eq!(eval_permittivity(&m, 6e9).unwrap(), (2.60, 0.010));
        let (e, t) = eval_permittivity(&m, 3.5e9).unwrap();
        assert_relative_eq!(e, 2.65, epsilon = 1e-12);
        assert_relative_eq!(t, 0.009, epsilon = 1e-12);
    }

    #[test]
    fn permittivity_clamps_outside_table() {
        let m = two_row();
        assert_eq!(eval_permittivity(&m, 1e6).unwrap(), (2.70, 0.008));
        assert_eq!(eval_permittivity(&m, 40e9).unwrap(), (2.60, 0.010));
    }

    #[test]
    fn single_row_is_constant() {
        let mut m = two_row();
        m.permittivity = vec![PermittivityPoint { freq_hz: 3e9, eps_r: 2.7, tan_delta: 0.008 }];
        for f in [1e8, 3e9, 9e9] {
            assert_eq!(eval_permittivity(&m, f).unwrap(), (2.7, 0.008));
        }
    }

    #[test]
    fn permittivity_errors() {
        let mut m = two_row();
        m.permittivity.clear();
        assert!(matches!(eval_permittivity(&m, 1e9), Err(MaterialError::EmptyTable(_))));
        m.kind = MaterialKind::Conductor;
        assert!(matches!(eval_permittivity(&m, 1e9), Err(MaterialError::NonDielectric(_))));
    }

    #[test]
    fn conductivity_axes_and_diagonal() {
        let t = ConductivityTensor { parallel: 1.6e4, transverse: 4e3, vertical: 1e3 };
        assert_eq!(effective_conductivity(&t, &Vector3::x()).unwrap(), 1.6e4);
        assert_eq!(effective_conductivity(&t, &Vector3::y()).unwrap(), 4e3);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // 1.6e4/2 + 4e3/2
        assert_relative_eq!(
            effective_conductivity(&t, &Vector3::new(s, s, 0.0)).unwrap(),
            1.0e4,
            max_relative = 1e-12
        );
        assert!(matches!(
            effective_conductivity(&t, &Vector3::new(1.0, 1.0, 0.0)),
            Err(MaterialError::NonUnitDirection(_))
        ));
    }

    #[test]
    fn bundled_db_assigns_tools() {
        let db = MaterialDb::bundled();
        assert_eq!(db.for_tool(1).unwrap().name, "PLA");
        assert_eq!(db.for_tool(0).unwrap().name, "Electrifi");
        assert_eq!(db.for_tool(1).unwrap().print_temp_c, 225.0);
        assert_eq!(db.for_tool(0).unwrap().print_speed_mm_per_s, 5.0);
    }

    #[test]
    fn negative_loss_is_rejected() {
        let text = r#"
[materials.PLA]
kind = "dielectric"
permittivity = [{ freq_hz = 1e9, eps_r = 2.7, tan_delta = -0.1 }]
"#;
        match parse_material_db(text) {
            Err(MaterialError::InvariantViolation { field, .. }) => {
                assert_eq!(field, "materials.PLA.permittivity[0].tan_delta")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn omitted_density_uses_defaults_table() {
        let text = r#"
[tools]
1 = "PLA"
0 = "Ink"

[materials.PLA]
kind = "dielectric"
permittivity = [{ freq_hz = 1e9, eps_r = 2.7, tan_delta = 0.008 }]

[materials.Ink]
kind = "conductor"
sigma_parallel_s_per_m = 2e4
"#;
        let db = parse_material_db(text).unwrap();
        assert_eq!(db.get("PLA").unwrap().density_g_per_cm3, 1.24);
        assert_eq!(db.get("Ink").unwrap().density_g_per_cm3, 1.8);
        assert_eq!(db.get("Ink").unwrap().filament_diameter_mm, 1.75);
        let t = db.get("Ink").unwrap().conductivity.unwrap();
        assert_eq!((t.transverse, t.vertical), (5e3, 1.25e3));
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "[materials.PLA]\nkind = \"dielectric\"\ndensity_g_per_cm3 = oops\n";
        match parse_material_db(text) {
            Err(MaterialError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn two_conductors_on_tools_rejected() {
        let text = r#"
[tools]
0 = "A"
1 = "B"
[materials.A]
kind = "conductor"
sigma_parallel_s_per_m = 1e4
[materials.B]
kind = "conductor"
sigma_parallel_s_per_m = 1e4
"#;
        assert!(matches!(
            parse_material_db(text),
            Err(MaterialError::InvariantViolation { .. })
        ));
    }

    #[test]
    fn transverse_above_parallel_rejected() {
        let text = r#"
[materials.A]
kind = "conductor"
sigma_parallel_s_per_m = 1e4
sigma_transverse_s_per_m = 2e4
"#;
        assert!(parse_material_db(text).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn unit() -> impl Strategy<Value = Vector3<f64>> {
            (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
                .prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 1e-3)
                .prop_map(|(x, y, z)| Vector3::new(x, y, z).normalize())
        }

        proptest! {
            #[test]
            fn sign_flip_invariant(d in unit(), p in 1e3..1e5f64, r in 1.0..20.0f64) {
                let t = ConductivityTensor { parallel: p, transverse: p / r, vertical: p / (r * r) };
                let a = effective_conductivity(&t, &d).unwrap();
                let b = effective_conductivity(&t, &(-d)).unwrap();
                prop_assert!((a - b).abs() <= 1e-9 * a);
                prop_assert!(a >= t.min() * (1.0 - 1e-12) && a <= t.max() * (1.0 + 1e-12));
            }

            #[test]
            fn isotropic_is_direction_free(d in unit(), s in 1e2..1e6f64) {
                let t = ConductivityTensor::isotropic(s);
                prop_assert!((effective_conductivity(&t, &d).unwrap() - s).abs() <= 1e-9 * s);
            }

            #[test]
            fn interpolation_stays_between_nodes(f in 1e9..6e9f64) {
                let m = two_row();
                let (e, t) = eval_permittivity(&m, f).unwrap();
                prop_assert!((2.60 - 1e-12..=2.70 + 1e-12).contains(&e));
                prop_assert!((0.008 - 1e-12..=0.010 + 1e-12).contains(&t));
            }
        }
    }
}
