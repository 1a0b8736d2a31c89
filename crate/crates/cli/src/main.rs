mod config;
mod eval;
mod kb;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use arda::agent::AgentError;
use clap::{Parser, Subcommand};
use thiserror::Error;
use tracing_subscriber::EnvFilter;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("requirement analysis failed: {0}")]
    Analysis(String),
    #[error("no experiment succeeded")]
    NoExperiments,
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Analysis(_) => 3,
            CliError::NoExperiments => 4,
        }
    }

    pub fn failed(e: impl std::fmt::Display) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<AgentError> for CliError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::UnknownTargetMetric(_) | AgentError::AnalysisFailed { .. } => CliError::Analysis(e.to_string()),
            AgentError::EmptyIntention | AgentError::InvalidConfig(_) => CliError::Config(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "arda", version, about = "Run and inspect autonomous R&D cycles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyze an intention and run propose, ground, execute and record.
    Run(run::RunArgs),
    /// Inspect a knowledge base without modifying it.
    Kb {
        /// Knowledge base directory.
        #[arg(long)]
        kb: PathBuf,
        /// Schema used to resolve template tags in constraints.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[command(subcommand)]
        command: kb::KbCommand,
    },
    /// Reproduce benchmark aggregates or score live runs.
    Eval {
        #[command(subcommand)]
        command: eval::EvalCommand,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run::cmd_run(args),
        Command::Kb { kb, schema, command } => kb::cmd_kb(&kb, schema.as_deref(), command),
        Command::Eval { command } => eval::cmd_eval(command),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("arda: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
