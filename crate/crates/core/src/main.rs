use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cbrw::app::{
    front_outputs, malthus_outputs, model_check_outputs, simulate_outputs, AppError, OutputFile,
};
use cbrw::config::{parse_config, OutputFormat, RunConfig};
use cbrw::export::to_json;
use cbrw::verify::{run_battery, VerifyOptions};

#[derive(Parser)]
#[command(name = "cbrw", version, about = "Catalytic branching random walks on Z^d")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; `output.path` of the configuration by default.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv, json or svg; `output.format` of the configuration by default.
    #[arg(long)]
    format: Option<OutputFormat>,
    /// Overrides `simulate.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the Malthusian parameter.
    Malthus(Common),
    /// Sample the propagation front.
    Front {
        #[command(flatten)]
        common: Common,
        /// Front level instead of the solver's nu.
        #[arg(long)]
        nu: Option<f64>,
    },
    /// Run replicates of the branching system.
    Simulate(Common),
    /// Run the acceptance battery.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Comma-separated criterion ids; all by default.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
    /// Validate the configuration and report the walk and its criticality.
    ModelCheck(Common),
}

fn load(common: &Common) -> Result<RunConfig, AppError> {
    Ok(parse_config(&common.config)?)
}

fn out_dir(common: &Common, config: &RunConfig) -> PathBuf {
    common.out.clone().unwrap_or_else(|| config.output.path.clone())
}

fn write_files(dir: &Path, files: &[OutputFile]) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    for f in files {
        let path = dir.join(&f.name);
        std::fs::write(&path, &f.contents).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, AppError> {
    let (common, files) = match &cli.command {
        Command::Malthus(c) => (c, malthus_outputs(&load(c)?)?),
        Command::Front { common, nu } => {
            let cfg = load(common)?;
            let format = common.format.unwrap_or(cfg.output.format);
            (common, front_outputs(&cfg, *nu, format)?)
        }
        Command::Simulate(c) => {
            let cfg = load(c)?;
            let format = c.format.unwrap_or(cfg.output.format);
            (c, simulate_outputs(&cfg, c.seed, format)?)
        }
        Command::ModelCheck(c) => (c, model_check_outputs(&load(c)?)?),
        Command::Verify { common, only } => {
            let cfg = load(common)?;
            let options = VerifyOptions {
                seed: common.seed.unwrap_or(cfg.simulate.seed),
                only: only.clone(),
            };
            let report = run_battery(&options, |r| println!("{}", r.line()));
            let files = vec![OutputFile {
                name: "verify.json".into(),
                contents: to_json(&report),
            }];
            write_files(&out_dir(common, &cfg), &files).map_err(AppError::Numerical)?;
            return Ok(if report.all_passed { 0 } else { 4 });
        }
    };
    let cfg = load(common)?;
    write_files(&out_dir(common, &cfg), &files).map_err(AppError::Numerical)?;
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
