//! Experiment configuration: TOML schema, canned defaults, and resolution.
//!
//! A user file is merged key by key over the defaults of its `experiment`
//! kind. The `[material]` table is the exception: if present it replaces the
//! default table as a whole, so unit variants never mix.

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::layouts::{self, GeometryConfig, Layout};
use crate::error::{Error, Result};
use crate::geometry::PartialVolumeRule;
use crate::linsolve::SolverConfig;
use crate::lps::{InfluenceKind, MaterialParams};
use crate::optim::OptimizerConfig;
use crate::verification::{DeltaPolicy, MmsName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    PatchTest,
    Converge,
    BarDirichlet,
    BarNeumann,
    Custom,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::PatchTest => "patch-test",
            Self::Converge => "converge",
            Self::BarDirichlet => "bar-dirichlet",
            Self::BarNeumann => "bar-neumann",
            Self::Custom => "custom",
        }
    }
}

/// Minimum η layer thickness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerRule {
    /// Layers at least 2δ thick.
    #[default]
    Strict,
    /// Layers at least δ thick; thinner than 2δ only warns.
    Horizon,
}

impl LayerRule {
    pub fn min_thickness(self, delta: f64) -> f64 {
        match self {
            Self::Strict => 2.0 * delta,
            Self::Horizon => delta,
        }
    }
}

/// Elastic constants. Exactly one pair must be given: a bulk modulus with a
/// shear modulus or Poisson ratio, or the two Lamé parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialInput {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bulk_modulus_gpa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bulk_modulus_mpa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shear_modulus_gpa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shear_modulus_mpa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poisson_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lame_lambda_mpa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lame_mu_mpa: Option<f64>,
}

impl MaterialInput {
    pub fn bulk_poisson_gpa(k: f64, nu: f64) -> Self {
        Self { bulk_modulus_gpa: Some(k), poisson_ratio: Some(nu), ..Self::default() }
    }

    /// Canonical form: bulk and shear moduli in MPa.
    pub fn from_params(p: &MaterialParams<f64>) -> Self {
        Self { bulk_modulus_mpa: Some(p.bulk), shear_modulus_mpa: Some(p.shear), ..Self::default() }
    }

    pub fn params(&self) -> std::result::Result<MaterialParams<f64>, String> {
        let one = |gpa: Option<f64>, mpa: Option<f64>, what: &str| match (gpa, mpa) {
            (Some(_), Some(_)) => Err(format!("{what} given in both GPa and MPa")),
            (Some(g), None) => Ok(Some(g * 1000.0)),
            (None, m) => Ok(m),
        };
        let k = one(self.bulk_modulus_gpa, self.bulk_modulus_mpa, "bulk modulus")?;
        let g = one(self.shear_modulus_gpa, self.shear_modulus_mpa, "shear modulus")?;
        let p = match (k, g, self.poisson_ratio, self.lame_lambda_mpa, self.lame_mu_mpa) {
            (Some(k), Some(g), None, None, None) => MaterialParams::new(k, g),
            (Some(k), None, Some(nu), None, None) => MaterialParams::from_bulk_poisson(k, nu),
            (None, None, None, Some(l), Some(m)) => MaterialParams::from_lame(l, m),
            _ => {
                return Err("give exactly one of: bulk + shear modulus, bulk modulus + poisson_ratio, lame_lambda_mpa + lame_mu_mpa".into())
            }
        };
        p.map_err(|e| e.to_string())
    }
}

/// Dirichlet value: a constant vector or the manufactured solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DirichletValue {
    Constant([f64; 3]),
    Named(ValueSource),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueSource {
    Manufactured,
}

fn all_components() -> [bool; 3] {
    [true; 3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletConfig {
    pub node_set: String,
    #[serde(default = "all_components")]
    pub components: [bool; 3],
    pub value: DirichletValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TractionConfig {
    pub face_set: String,
    /// MPa
    pub traction: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadsConfig {
    /// Drives body forces, η_D data and `"manufactured"` Dirichlet values.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manufactured: Option<MmsName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonlocal_body: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonlocal_data: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local_body: Option<[f64; 3]>,
    pub dirichlet: Vec<DirichletConfig>,
    pub tractions: Vec<TractionConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeConfig {
    pub h_levels: Vec<f64>,
    pub delta_policy: DeltaPolicy,
    /// The horizon under `fixed-delta`, the ratio δ/h under `fixed-ratio`.
    pub delta: f64,
    pub fit_rate: bool,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        Self {
            h_levels: vec![1.0 / 9.0, 1.0 / 12.0, 1.0 / 15.0],
            delta_policy: DeltaPolicy::FixedDelta,
            delta: 1.0 / 3.0,
            fit_rate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradientCheckConfig {
    pub components: usize,
    /// Controls are drawn uniformly from `[-amplitude, amplitude]`.
    pub amplitude: f64,
    /// Difference step relative to the largest control magnitude.
    pub relative_step: f64,
    pub seed: u64,
}

impl Default for GradientCheckConfig {
    fn default() -> Self {
        Self { components: 10, amplitude: 0.1, relative_step: 1e-3, seed: 7 }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub output_dir: String,
    /// Lattice spacing (mm).
    pub h: f64,
    /// Horizon δ (mm).
    pub horizon: f64,
    pub layer_rule: LayerRule,
    pub influence: InfluenceKind,
    pub partial_volume: PartialVolumeRule,
    /// Whether η_c points inside the overlap enter the objective.
    pub sample_control_points: bool,
    pub material: MaterialInput,
    pub solver: SolverConfig,
    pub optimizer: OptimizerConfig,
    pub geometry: GeometryConfig,
    pub loads: LoadsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeConfig>,
    pub gradient_check: GradientCheckConfig,
}

/// Schema of a user file; everything optional.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct ConfigFile {
    experiment: Option<ExperimentKind>,
    output_dir: Option<String>,
    h: Option<f64>,
    horizon: Option<f64>,
    layer_rule: Option<LayerRule>,
    influence: Option<InfluenceKind>,
    partial_volume: Option<PartialVolumeRule>,
    sample_control_points: Option<bool>,
    material: Option<MaterialInput>,
    solver: Option<SolverConfig>,
    optimizer: Option<OptimizerConfig>,
    geometry: Option<GeometryConfig>,
    loads: Option<LoadsConfig>,
    converge: Option<ConvergeConfig>,
    gradient_check: Option<GradientCheckConfig>,
}

fn base(kind: ExperimentKind, h: f64, horizon: f64) -> ExperimentConfig {
    ExperimentConfig {
        experiment: kind,
        output_dir: format!("out/{}", kind.name()),
        h,
        horizon,
        layer_rule: LayerRule::Strict,
        influence: InfluenceKind::Constant,
        partial_volume: PartialVolumeRule::Linear,
        sample_control_points: true,
        material: MaterialInput::bulk_poisson_gpa(140.0, 0.3),
        solver: SolverConfig::default(),
        optimizer: OptimizerConfig::default(),
        geometry: GeometryConfig::default(),
        loads: LoadsConfig::default(),
        converge: None,
        gradient_check: GradientCheckConfig::default(),
    }
}

fn dirichlet(set: &str, components: [bool; 3], value: [f64; 3]) -> DirichletConfig {
    DirichletConfig { node_set: set.into(), components, value: DirichletValue::Constant(value) }
}

fn manufactured_loads(name: MmsName) -> LoadsConfig {
    LoadsConfig {
        manufactured: Some(name),
        dirichlet: vec![DirichletConfig {
            node_set: crate::geometry::GAMMA_D.into(),
            components: [true; 3],
            value: DirichletValue::Named(ValueSource::Manufactured),
        }],
        ..LoadsConfig::default()
    }
}

/// The bars match in the overlap only up to discretization error, so the
/// gradient test is looser than the default.
fn bar(kind: ExperimentKind) -> ExperimentConfig {
    let mut c = base(kind, 1.0, 1.0);
    c.layer_rule = LayerRule::Horizon;
    c.optimizer.gradient_tolerance = 1e-6;
    c.optimizer.max_iterations = 5000;
    c
}

const X: [bool; 3] = [true, false, false];
const Y: [bool; 3] = [false, true, false];
const Z: [bool; 3] = [false, false, true];

/// Defaults for a canned experiment; `None` for `custom`.
pub fn canned(kind: ExperimentKind) -> Option<ExperimentConfig> {
    let cfg = match kind {
        ExperimentKind::PatchTest => {
            let mut c = base(kind, 0.125, 0.375);
            c.geometry.layout = Layout::UnitCube;
            c.loads = manufactured_loads(MmsName::LinearI);
            // the exact trace is the unique minimizer; run to roundoff
            c.optimizer.gradient_tolerance = 1e-14;
            c.optimizer.objective_tolerance = 1e-30;
            c.optimizer.max_iterations = 5000;
            c
        }
        ExperimentKind::Converge => {
            let conv = ConvergeConfig::default();
            let mut c = base(kind, conv.h_levels[0], conv.delta);
            c.geometry.layout = Layout::UnitCube;
            c.loads = manufactured_loads(MmsName::QuadraticII);
            c.converge = Some(conv);
            c
        }
        ExperimentKind::BarDirichlet => {
            let mut c = bar(kind);
            c.geometry = layouts::bar_dirichlet();
            c.loads.dirichlet = vec![
                dirichlet("left_end", X, [-0.05, 0.0, 0.0]),
                dirichlet("right_end", X, [0.05, 0.0, 0.0]),
                dirichlet("fix_y_left", Y, [0.0; 3]),
                dirichlet("fix_y_right", Y, [0.0; 3]),
                dirichlet("fix_z_left", Z, [0.0; 3]),
                dirichlet("fix_z_right", Z, [0.0; 3]),
            ];
            c.gradient_check.amplitude = 0.01;
            c
        }
        ExperimentKind::BarNeumann => {
            // the end-to-end force balance needs the finer lattice
            let mut c = bar(kind);
            c.h = 0.5;
            c.optimizer.max_iterations = 2000;
            c.geometry = layouts::bar_neumann();
            c.loads.dirichlet = vec![
                dirichlet("right_end", X, [0.0; 3]),
                dirichlet("fix_y_right", Y, [0.0; 3]),
                dirichlet("fix_z_right", Z, [0.0; 3]),
            ];
            c.loads.tractions = vec![TractionConfig { face_set: "left_face".into(), traction: [-1700.0, 0.0, 0.0] }];
            c.gradient_check.amplitude = 0.01;
            c
        }
        ExperimentKind::Custom => return None,
    };
    Some(cfg)
}

/// Defaults for a canned experiment, already validated.
pub fn canned_config(kind: ExperimentKind) -> Result<ExperimentConfig> {
    let cfg = canned(kind).ok_or_else(|| config_error("experiment", None, "`custom` has no defaults"))?;
    cfg.validate(None)?;
    Ok(cfg)
}

fn config_error(key: &str, line: Option<usize>, message: impl Into<String>) -> Error {
    Error::Config { key: key.into(), line, message: message.into() }
}

/// 1-based line of the first assignment or header naming the last segment of `key`.
fn line_of(text: Option<&str>, key: &str) -> Option<usize> {
    let text = text?;
    let last = key.rsplit('.').next().unwrap_or(key);
    let last = last.split('[').next().unwrap_or(last);
    if last.is_empty() {
        return None;
    }
    text.lines().position(|l| {
        let t = l.trim_start();
        let t = t.trim_start_matches('[').trim_start();
        let dotted_tail = t.split(['=', ']']).next().unwrap_or("").trim();
        dotted_tail == last || dotted_tail.ends_with(&format!(".{last}"))
    })
    .map(|i| i + 1)
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn merge(base: &mut Value, user: Value) {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            for (k, v) in u {
                match b.get_mut(&k) {
                    Some(slot) if k != "material" => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parses and resolves a configuration file's text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = toml::Deserializer::new(text);
    let raw: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let inner = e.into_inner();
        let line = inner.span().map(|s| line_at(text, s.start)).or_else(|| line_of(Some(text), &key));
        config_error(&key, line, inner.message().to_string())
    })?;
    let kind = raw.experiment.unwrap_or(ExperimentKind::Custom);
    let user: toml::Value = toml::from_str(text).map_err(|e| config_error("", None, e.to_string()))?;
    let user = serde_json::to_value(user).map_err(|e| config_error("", None, e.to_string()))?;

    let mut merged = match canned(kind) {
        Some(c) => serde_json::to_value(c).expect("config serializes"),
        None => {
            let mut v = serde_json::to_value(base(kind, 0.0, 0.0)).expect("config serializes");
            let obj = v.as_object_mut().expect("object");
            for k in ["h", "horizon", "material", "geometry", "loads"] {
                obj.remove(k);
            }
            v
        }
    };
    merge(&mut merged, user);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(merged).map_err(|e| {
        let mut key = e.path().to_string();
        let message = e.inner().to_string();
        if let Some(field) = message.strip_prefix("missing field `").and_then(|m| m.split('`').next()) {
            key = if key == "." { field.to_string() } else { format!("{key}.{field}") };
        }
        let line = line_of(Some(text), &key);
        config_error(&key, line, message)
    })?;
    cfg.validate(Some(text))?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}

impl ExperimentConfig {
    pub fn material_params(&self) -> Result<MaterialParams<f64>> {
        self.material.params().map_err(|m| config_error("material", None, m))
    }

    /// Canonical form with the material in MPa; parses back to itself.
    pub fn resolved(&self) -> Result<Self> {
        let mut c = self.clone();
        c.material = MaterialInput::from_params(&self.material_params()?);
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_error("", None, e.to_string()))
    }

    /// Geometry at spacing `h` and horizon `delta`.
    pub fn geometry_at(&self, h: f64, delta: f64) -> Result<GeometryConfig> {
        match self.geometry.layout {
            Layout::UnitCube => layouts::unit_cube(h, delta),
            Layout::Boxes => Ok(self.geometry.clone()),
        }
    }

    /// Semantic checks beyond the schema. `text` is used for line numbers only.
    pub fn validate(&self, text: Option<&str>) -> Result<()> {
        let err = |key: &str, msg: String| config_error(key, line_of(text, key), msg);
        let positive = |key: &str, v: f64| if v > 0.0 && v.is_finite() { Ok(()) } else { Err(err(key, format!("must be positive, got {v}"))) };
        positive("h", self.h)?;
        positive("horizon", self.horizon)?;
        self.material.params().map_err(|m| err("material", m))?;
        self.solver.validate().map_err(|e| err("solver", e.to_string()))?;
        self.optimizer.validate().map_err(|e| err("optimizer", e.to_string()))?;
        if self.gradient_check.components == 0 || !(self.gradient_check.relative_step > 0.0) {
            return Err(err("gradient_check", "needs at least one component and a positive step".into()));
        }

        let mut levels = vec![(self.h, self.horizon)];
        if self.experiment == ExperimentKind::Converge {
            let conv = self.converge.as_ref().ok_or_else(|| err("converge", "missing [converge] table".into()))?;
            if conv.h_levels.is_empty() {
                return Err(err("converge.h_levels", "no refinement levels".into()));
            }
            if conv.h_levels.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(err("converge.h_levels", "h must strictly decrease".into()));
            }
            if conv.fit_rate && conv.h_levels.len() < 3 {
                return Err(err("converge.h_levels", "a fitted rate needs at least three levels".into()));
            }
            positive("converge.delta", conv.delta)?;
            levels = conv
                .h_levels
                .iter()
                .map(|&h| match conv.delta_policy {
                    DeltaPolicy::FixedDelta => (h, conv.delta),
                    DeltaPolicy::FixedRatio => (h, conv.delta * h),
                })
                .collect();
        }
        for (h, delta) in levels {
            if !(h > 0.0) {
                return Err(err("converge.h_levels", format!("must be positive, got {h}")));
            }
            if delta < 2.0 * h - 1e-12 {
                warn!("horizon {delta} is below 2h = {}; the discretization is coarse", 2.0 * h);
            }
            let g = self.geometry_at(h, delta).map_err(|e| err("horizon", e.to_string()))?;
            self.check_geometry(&g, delta, text)?;
        }

        if let Some(m) = self.loads.manufactured {
            for (key, v) in [
                ("loads.nonlocal_body", self.loads.nonlocal_body),
                ("loads.nonlocal_data", self.loads.nonlocal_data),
                ("loads.local_body", self.loads.local_body),
            ] {
                if v.is_some() {
                    return Err(err(key, format!("conflicts with manufactured = \"{}\"", mms_label(m))));
                }
            }
        } else if self.loads.dirichlet.iter().any(|d| matches!(d.value, DirichletValue::Named(_))) {
            return Err(err("loads.dirichlet", "\"manufactured\" values need loads.manufactured".into()));
        }
        Ok(())
    }

    fn check_geometry(&self, g: &GeometryConfig, delta: f64, text: Option<&str>) -> Result<()> {
        let err = |key: &str, msg: String| config_error(key, line_of(text, key), msg);
        for (key, boxes) in [
            ("geometry.nonlocal_domain", &g.nonlocal_domain),
            ("geometry.local_domain", &g.local_domain),
            ("geometry.omega_n", &g.omega_n),
        ] {
            if boxes.is_empty() {
                return Err(err(key, "at least one box is required".into()));
            }
        }
        for (key, boxes) in [
            ("geometry.nonlocal_domain", &g.nonlocal_domain),
            ("geometry.local_domain", &g.local_domain),
            ("geometry.body", &g.body),
            ("geometry.omega_n", &g.omega_n),
            ("geometry.eta_d", &g.eta_d),
            ("geometry.eta_c", &g.eta_c),
            ("geometry.overlap", &g.overlap),
            ("geometry.gamma_d", &g.gamma_d),
            ("geometry.gamma_c", &g.gamma_c),
        ] {
            if let Some(b) = boxes.iter().find(|b| !b.is_ordered()) {
                return Err(err(key, format!("box {:?}..{:?} has lo > hi", b.lo, b.hi)));
            }
        }
        let min = self.layer_rule.min_thickness(delta);
        let tol = 1e-9 * delta.max(1.0);
        for (key, boxes) in [("geometry.eta_d", &g.eta_d), ("geometry.eta_c", &g.eta_c)] {
            for b in boxes.iter() {
                let t = b.min_extent();
                if t < min - tol {
                    return Err(err(
                        key,
                        format!("layer thickness {t} is below {min} required for horizon {delta} ({:?} rule)", self.layer_rule),
                    ));
                }
                if t < 2.0 * delta - tol {
                    warn!("{key}: layer thickness {t} is below 2δ = {}", 2.0 * delta);
                }
            }
        }
        if g.eta_c.is_empty() && g.gamma_c.is_empty() {
            return Err(err("geometry.eta_c", "no control region on either side".into()));
        }
        if let Some(p) = g.prenotch {
            crate::geometry::PrenotchPlane::new(p.axis, p.value, p.bounds).map_err(|e| err("geometry.prenotch", e.to_string()))?;
        }
        Ok(())
    }
}

pub(crate) fn mms_label(m: MmsName) -> &'static str {
    match m {
        MmsName::LinearI => "linear-I",
        MmsName::QuadraticII => "quadratic-II",
    }
}
