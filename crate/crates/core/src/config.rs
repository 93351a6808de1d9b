//! Run configuration: a strict JSON schema that builds the walk, the
//! catalytic system and the solver, front and simulation settings.
//!
//! Unknown keys are rejected everywhere. Missing optional sections take
//! their defaults, and `parse_config` writes the defaults back into the
//! returned value so that serializing it echoes every setting in use.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::front::FrontModel;
use crate::lattice_walk::{JumpLaw, JumpModel, Marginal};
use crate::malthus::{Catalyst, CatalyticSystem, OffspringLaw, SolverSettings};
use crate::resolvent::Quadrature;
use crate::simulate::{Caps, DEFAULT_MAX_EVENTS, DEFAULT_MAX_POPULATION};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at `{key}`: {message}")]
    Schema { key: String, message: String },
}

fn schema(key: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Schema {
        key: key.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub catalysts: Vec<CatalystSpec>,
    /// Starting site of the first particle; the origin when omitted.
    #[serde(default)]
    pub start: Vec<i64>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub front: FrontSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub dimension: usize,
    pub q: f64,
    pub law: LawSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawSpec {
    /// `+-e_i` with probability `1/(2d)` each.
    NearestNeighbor,
    FiniteSupport { atoms: Vec<JumpAtom> },
    AxisMixture { axes: Vec<AxisSpec> },
    Product { marginals: Vec<MarginalSpec> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpAtom {
    pub jump: Vec<i64>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub weight: f64,
    pub marginal: MarginalSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MarginalSpec {
    Rademacher,
    DisplacedPoisson {
        sigma_plus: f64,
        sigma_minus: f64,
        p_plus: f64,
        p_minus: f64,
    },
    FiniteList { atoms: Vec<ValueAtom> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueAtom {
    pub value: i64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalystSpec {
    pub position: Vec<i64>,
    pub alpha: f64,
    pub offspring: OffspringSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OffspringSpec {
    Deterministic { count: u64 },
    /// 0 w.p. `p0`, 2 otherwise.
    Binary { p0: f64 },
    /// Failures before the first success.
    Geometric { p: f64 },
    Poisson { mean: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub lambda_min: f64,
    pub class_margin: f64,
    pub rho_tol: f64,
    pub bracket_tol: f64,
    pub quad_tol: f64,
    pub start_grid: usize,
    pub start_grid_3d: usize,
    pub max_grid: usize,
    pub max_grid_3d: usize,
    pub perron_tol: f64,
    pub perron_max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverSettings::<f64>::default();
        Self {
            lambda_min: s.lambda_min,
            class_margin: s.class_margin,
            rho_tol: s.rho_tol,
            bracket_tol: s.bracket_tol,
            quad_tol: s.quadrature.tol,
            start_grid: s.quadrature.start_grid,
            start_grid_3d: s.quadrature.start_grid_3d,
            max_grid: s.quadrature.max_grid,
            max_grid_3d: s.quadrature.max_grid_3d,
            perron_tol: s.perron_tol,
            perron_max_iter: s.perron_max_iter,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontSection {
    /// Directions per angle; 720 in d = 2 and 64 in d = 3 when omitted.
    pub resolution: Option<usize>,
    /// `|H(r) - nu|` accepted on the level set; `1e-10 (1 + nu)` when omitted.
    pub level_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub horizon: f64,
    pub checkpoints: Vec<f64>,
    pub runs: u64,
    pub seed: u64,
    pub max_population: u64,
    pub max_events: u64,
    /// Shell half-widths as fractions of `nu` for the spread report.
    pub epsilon_fracs: Vec<f64>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            horizon: 10.0,
            checkpoints: Vec::new(),
            runs: 10,
            seed: 0,
            max_population: DEFAULT_MAX_POPULATION,
            max_events: DEFAULT_MAX_EVENTS,
            epsilon_fracs: vec![0.15],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    #[default]
    Json,
    Svg,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "svg" => Ok(Self::Svg),
            other => Err(format!("unknown format `{other}`, expected csv, json or svg")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub format: OutputFormat,
    pub path: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            format: OutputFormat::Json,
            path: PathBuf::from("out"),
        }
    }
}

fn marginal(spec: &MarginalSpec) -> Marginal {
    match spec {
        MarginalSpec::Rademacher => Marginal::Rademacher,
        MarginalSpec::DisplacedPoisson {
            sigma_plus,
            sigma_minus,
            p_plus,
            p_minus,
        } => Marginal::DisplacedPoisson {
            sigma_plus: *sigma_plus,
            sigma_minus: *sigma_minus,
            p_plus: *p_plus,
            p_minus: *p_minus,
        },
        MarginalSpec::FiniteList { atoms } => {
            Marginal::FiniteList(atoms.iter().map(|a| (a.value, a.p)).collect())
        }
    }
}

impl LawSpec {
    pub fn to_law(&self, dimension: usize) -> JumpLaw {
        match self {
            Self::NearestNeighbor => {
                let p = 0.5 / dimension as f64;
                let atoms = (0..dimension)
                    .flat_map(|i| {
                        [1, -1].map(|s| {
                            let mut e = vec![0; dimension];
                            e[i] = s;
                            (e, p)
                        })
                    })
                    .collect();
                JumpLaw::FiniteSupport(atoms)
            }
            Self::FiniteSupport { atoms } => {
                JumpLaw::FiniteSupport(atoms.iter().map(|a| (a.jump.clone(), a.p)).collect())
            }
            Self::AxisMixture { axes } => {
                JumpLaw::AxisMixture(axes.iter().map(|a| (a.weight, marginal(&a.marginal))).collect())
            }
            Self::Product { marginals } => {
                JumpLaw::ProductMarginals(marginals.iter().map(marginal).collect())
            }
        }
    }
}

impl OffspringSpec {
    pub fn to_law(&self) -> OffspringLaw {
        match *self {
            Self::Deterministic { count } => OffspringLaw::Deterministic(count),
            Self::Binary { p0 } => OffspringLaw::Binary { p0 },
            Self::Geometric { p } => OffspringLaw::Geometric { p },
            Self::Poisson { mean } => OffspringLaw::Poisson { mean },
        }
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config_str(&text)
}

/// Parses and validates configuration text; see [`parse_config`].
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let inner = e.into_inner();
        match inner.classify() {
            serde_json::error::Category::Data => schema(key, inner.to_string()),
            _ => ConfigError::Parse {
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            },
        }
    })?;
    config.apply_defaults();
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    fn apply_defaults(&mut self) {
        let d = self.model.dimension;
        if self.start.is_empty() {
            self.start = vec![0; d];
        }
        if self.front.resolution.is_none() {
            self.front.resolution = Some(if d == 3 { 64 } else { 720 });
        }
    }

    /// Checks ranges and builds the system once, so later builds cannot fail.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = self.model.dimension;
        if d == 0 {
            return Err(schema("model.dimension", "dimension must be at least 1"));
        }
        if !(self.model.q > 0.0 && self.model.q.is_finite()) {
            return Err(schema("model.q", "q must be positive and finite"));
        }
        if self.catalysts.is_empty() {
            return Err(schema("catalysts", "at least one catalyst is required"));
        }
        for (k, c) in self.catalysts.iter().enumerate() {
            if !(c.alpha >= 0.0 && c.alpha < 1.0) {
                return Err(schema(
                    format!("catalysts[{k}].alpha"),
                    format!("alpha = {} must lie in [0, 1)", c.alpha),
                ));
            }
            if c.position.len() != d {
                return Err(schema(
                    format!("catalysts[{k}].position"),
                    format!("position must have {d} coordinates"),
                ));
            }
        }
        if self.start.len() != d {
            return Err(schema("start", format!("start must have {d} coordinates")));
        }
        let s = &self.solver;
        for (key, v) in [
            ("solver.lambda_min", s.lambda_min),
            ("solver.rho_tol", s.rho_tol),
            ("solver.bracket_tol", s.bracket_tol),
            ("solver.quad_tol", s.quad_tol),
            ("solver.perron_tol", s.perron_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(schema(key, "must be positive and finite"));
            }
        }
        if !(s.class_margin >= 0.0 && s.class_margin.is_finite()) {
            return Err(schema("solver.class_margin", "must be nonnegative and finite"));
        }
        if s.start_grid < 4 || s.max_grid < s.start_grid {
            return Err(schema("solver.max_grid", "grid sizes need 4 <= start_grid <= max_grid"));
        }
        if s.start_grid_3d < 4 || s.max_grid_3d < s.start_grid_3d {
            return Err(schema(
                "solver.max_grid_3d",
                "grid sizes need 4 <= start_grid_3d <= max_grid_3d",
            ));
        }
        if self.front.resolution.is_some_and(|k| k < 4) {
            return Err(schema("front.resolution", "resolution must be at least 4"));
        }
        if let Some(tol) = self.front.level_tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(schema("front.level_tol", "must be positive and finite"));
            }
        }
        let sim = &self.simulate;
        if !(sim.horizon > 0.0 && sim.horizon.is_finite()) {
            return Err(schema("simulate.horizon", "horizon must be positive and finite"));
        }
        if sim
            .checkpoints
            .iter()
            .any(|&c| !(c >= 0.0 && c <= sim.horizon))
            || sim.checkpoints.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(schema(
                "simulate.checkpoints",
                "checkpoints must increase strictly within [0, horizon]",
            ));
        }
        if sim.runs == 0 {
            return Err(schema("simulate.runs", "at least one run is required"));
        }
        if sim.epsilon_fracs.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(schema("simulate.epsilon_fracs", "fractions must lie in (0, 1)"));
        }
        self.jump_model()?;
        self.system()?;
        Ok(())
    }

    pub fn jump_model(&self) -> Result<JumpModel, ConfigError> {
        let d = self.model.dimension;
        JumpModel::new(d, self.model.q, self.model.law.to_law(d))
            .map_err(|e| schema("model.law", e.to_string()))
    }

    pub fn system(&self) -> Result<CatalyticSystem, ConfigError> {
        let catalysts = self
            .catalysts
            .iter()
            .map(|c| Catalyst {
                position: c.position.clone(),
                alpha: c.alpha,
                offspring: c.offspring.to_law(),
            })
            .collect();
        CatalyticSystem::new(self.jump_model()?, catalysts, self.start.clone())
            .map_err(|e| schema("catalysts", e.to_string()))
    }

    pub fn solver_settings(&self) -> SolverSettings {
        let s = &self.solver;
        SolverSettings {
            lambda_min: s.lambda_min,
            class_margin: s.class_margin,
            rho_tol: s.rho_tol,
            bracket_tol: s.bracket_tol,
            perron_tol: s.perron_tol,
            perron_max_iter: s.perron_max_iter,
            quadrature: Quadrature {
                tol: s.quad_tol,
                start_grid: s.start_grid,
                start_grid_3d: s.start_grid_3d,
                max_grid: s.max_grid,
                max_grid_3d: s.max_grid_3d,
            },
        }
    }

    /// Front of the configured walk at level `nu`.
    pub fn front_model(&self, nu: f64) -> Result<FrontModel, crate::front::FrontError> {
        let model = self.jump_model().expect("validated configuration");
        let front = FrontModel::new(model, nu)?;
        match self.front.level_tol {
            Some(tol) => front.with_level_tol(tol),
            None => Ok(front),
        }
    }

    pub fn front_resolution(&self) -> usize {
        self.front
            .resolution
            .unwrap_or(if self.model.dimension == 3 { 64 } else { 720 })
    }

    pub fn caps(&self) -> Caps {
        Caps {
            max_population: self.simulate.max_population,
            max_events: self.simulate.max_events,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }
}
