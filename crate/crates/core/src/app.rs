//! Subcommand bodies. Each builds its output files in memory; the binary
//! writes them, and the determinism check compares them between runs.

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, OutputFormat, RunConfig};
use crate::export::{front_csv, front_svg, snapshots_csv, to_json};
use crate::malthus::{classify, solve_malthusian, MalthusSolution, Regime};
use crate::simulate::{run_replicates, spread_statistics, SimError, SimulationTrace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl AppError {
    /// 2 for configuration problems, 3 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

fn numerical(e: impl std::fmt::Display) -> AppError {
    AppError::Numerical(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

fn file(name: &str, contents: String) -> OutputFile {
    OutputFile {
        name: name.into(),
        contents,
    }
}

/// `result` as a JSON object with the effective configuration under `config`.
fn with_config<T: Serialize>(config: &RunConfig, result: &T) -> Value {
    let mut v = serde_json::to_value(result).expect("result serializes");
    let cfg = serde_json::to_value(config).expect("configuration serializes");
    match v.as_object_mut() {
        Some(obj) => {
            obj.insert("config".into(), cfg);
            v
        }
        None => json!({ "result": v, "config": cfg }),
    }
}

pub fn solve(config: &RunConfig) -> Result<MalthusSolution, AppError> {
    solve_malthusian(&config.system()?, &config.solver_settings()).map_err(numerical)
}

/// `malthus.json`.
pub fn malthus_outputs(config: &RunConfig) -> Result<Vec<OutputFile>, AppError> {
    let sol = solve(config)?;
    Ok(vec![file("malthus.json", to_json(&with_config(config, &sol)))])
}

/// Front at `nu`, or at the solver's `nu` when no override is given.
pub fn front_outputs(
    config: &RunConfig,
    nu: Option<f64>,
    format: OutputFormat,
) -> Result<Vec<OutputFile>, AppError> {
    let nu = match nu {
        Some(nu) => nu,
        None => solve(config)?.nu,
    };
    let front = config.front_model(nu).map_err(numerical)?;
    let sample = front
        .sample_front(config.front_resolution())
        .map_err(numerical)?;
    Ok(match format {
        OutputFormat::Csv => vec![file("front.csv", front_csv(&sample))],
        OutputFormat::Json => vec![file("front.json", to_json(&with_config(config, &sample)))],
        OutputFormat::Svg => match front_svg(&sample) {
            Some(svg) => vec![file("front.svg", svg)],
            None => return Err(numerical("SVG output needs a two-dimensional walk")),
        },
    })
}

#[derive(Debug, Clone, Serialize)]
struct TraceSummary<'a> {
    replicates: &'a [SimulationTrace],
}

/// `traces.json` (json) or `snapshots.csv` (csv), plus `spread.json` when
/// the system is supercritical and some replicate qualifies.
pub fn simulate_outputs(
    config: &RunConfig,
    seed: Option<u64>,
    format: OutputFormat,
) -> Result<Vec<OutputFile>, AppError> {
    if format == OutputFormat::Svg {
        return Err(AppError::Config(ConfigError::Schema {
            key: "output.format".into(),
            message: "simulate writes csv or json, not svg".into(),
        }));
    }
    let system = config.system()?;
    let sim = &config.simulate;
    let seed = seed.unwrap_or(sim.seed);
    let checkpoints = if sim.checkpoints.is_empty() {
        vec![sim.horizon]
    } else {
        sim.checkpoints.clone()
    };
    let mut traces = Vec::new();
    run_replicates(
        &system,
        sim.horizon,
        &checkpoints,
        config.caps(),
        seed,
        sim.runs,
        |_, tr| {
            match tr {
                Ok(t) => traces.push(t),
                Err(SimError::PopulationCapExceeded { trace } | SimError::EventCapExceeded { trace }) => {
                    traces.push(*trace)
                }
                Err(e) => return Err(e),
            }
            Ok(())
        },
    )
    .map_err(numerical)?;
    let mut files = match format {
        OutputFormat::Csv => vec![file(
            "snapshots.csv",
            snapshots_csv(
                traces
                    .iter()
                    .flat_map(|t| t.snapshots.iter().map(move |s| (t.replicate, s))),
            ),
        )],
        OutputFormat::Json => {
            let summary = TraceSummary { replicates: &traces };
            let mut v = with_config(config, &summary);
            v["seed"] = json!(seed);
            v["truncated_replicates"] = json!(traces.iter().filter(|t| t.truncated.is_some()).count());
            vec![file("traces.json", to_json(&v))]
        }
        OutputFormat::Svg => unreachable!("rejected above"),
    };
    let class = classify(&system, &config.solver_settings()).map_err(numerical)?;
    if class.regime == Regime::Supercritical {
        let nu = solve(config)?.nu;
        let front = config.front_model(nu).map_err(numerical)?;
        let finals: Vec<_> = traces
            .iter()
            .filter(|t| t.survived && t.visited_catalyst_late && t.truncated.is_none())
            .filter_map(|t| t.snapshots.last())
            .filter(|s| s.time > 0.0 && s.population() > 0)
            .cloned()
            .collect();
        if !finals.is_empty() {
            let report = spread_statistics(&finals, &front, &sim.epsilon_fracs).map_err(numerical)?;
            let mut v = with_config(config, &report);
            v["nu"] = json!(nu);
            v["truncated_replicates"] = json!(traces.iter().filter(|t| t.truncated.is_some()).count());
            files.push(file("spread.json", to_json(&v)));
        }
    }
    Ok(files)
}

/// `model-check.json`: validation summary of the walk and the catalysts.
pub fn model_check_outputs(config: &RunConfig) -> Result<Vec<OutputFile>, AppError> {
    let system = config.system()?;
    let model = system.model();
    let class = classify(&system, &config.solver_settings()).map_err(numerical)?;
    let betas: Vec<f64> = (0..system.len()).map(|k| system.beta(k)).collect();
    let means: Vec<f64> = (0..system.len()).map(|k| system.mean_offspring(k)).collect();
    let v = json!({
        "dimension": model.dimension(),
        "q": model.q(),
        "recurrent": model.is_recurrent(),
        "drift": model.drift(),
        "min_log_mgf": model.min_log_mgf(),
        "catalysts": system.len(),
        "beta": betas,
        "mean_offspring": means,
        "classification": class,
        "config": config,
    });
    Ok(vec![file("model-check.json", to_json(&v))])
}
