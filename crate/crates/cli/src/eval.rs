use std::path::PathBuf;

use arda::eval::{aggregate_all, compare_policies, Fixtures, LiveProtocol, Tolerances};
use arda::simenv::{ResponseSurface, SimEnv};
use arda::symlang::FrameworkSchema;
use clap::Subcommand;

use crate::CliError;

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Recompute the benchmark tables from the score sheets.
    Aggregate {
        /// Fixture directory; the bundled fixtures when absent.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Compare utility and random proposals on the simulated surface.
    Live {
        /// Runs seeds 1 through N.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 8)]
        budget: usize,
        #[arg(long, default_value_t = 2)]
        width: usize,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        surface: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn write_json(path: Option<PathBuf>, json: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(&p, json).map_err(|e| CliError::Failed(format!("cannot write {}: {e}", p.display()))),
        None => Ok(()),
    }
}

pub fn cmd_eval(command: EvalCommand) -> Result<(), CliError> {
    match command {
        EvalCommand::Aggregate { fixtures, json } => {
            let fixtures = match fixtures {
                Some(dir) => Fixtures::load(dir),
                None => Fixtures::bundled(),
            }
            .map_err(CliError::failed)?;
            let report = aggregate_all(&fixtures, Tolerances::default()).map_err(CliError::failed)?;
            print!("{}", report.render_text());
            write_json(json, &report.to_json())?;
            if !report.all_within_tolerance() {
                return Err(CliError::Failed("some aggregates fall outside tolerance".into()));
            }
        }
        EvalCommand::Live { seeds, budget, width, schema, surface, json } => {
            if seeds == 0 || budget == 0 || width == 0 {
                return Err(CliError::Config("seeds, budget and width must be at least 1".into()));
            }
            let schema = match schema {
                Some(p) => FrameworkSchema::load(p).map_err(|e| CliError::Config(e.to_string()))?,
                None => FrameworkSchema::demo(),
            };
            let surface = match surface {
                Some(p) => ResponseSurface::load(p).map_err(|e| CliError::Config(e.to_string()))?,
                None => ResponseSurface::demo(),
            };
            let protocol = LiveProtocol { seeds: (1..=seeds).collect(), budget, width, ..LiveProtocol::default() };
            let comparison = compare_policies(&SimEnv::new(schema, surface), &protocol).map_err(CliError::failed)?;
            print!("{}", comparison.render_text());
            write_json(json, &serde_json::to_string_pretty(&comparison).map_err(CliError::failed)?)?;
        }
    }
    Ok(())
}
