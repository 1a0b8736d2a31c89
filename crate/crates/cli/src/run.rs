use std::path::PathBuf;
use std::sync::Arc;

use arda::agent::{Agent, AgentError, ClockMode, CycleConfig, Intention, UtilityWeights};
use arda::knowledge::{InfraCorpus, KbConfig, KnowledgeBase, RecordStatus};
use arda::llm::{LlmBackend, PromptRegistry, RemoteBackend, Script, ScriptedBackend, ENDPOINT_ENV};
use arda::simenv::{ResponseSurface, SimEnv};
use arda::symlang::FrameworkSchema;
use clap::Args;
use tracing::info;

use crate::config::{BackendChoice, FileConfig, Overrides, RunConfig};
use crate::CliError;

#[derive(Debug, Args)]
pub struct RunArgs {
    /// The intention, in plain words.
    #[arg(required_unless_present = "print_config")]
    intention: Option<String>,
    /// TOML file with run settings; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Framework schema (TOML); the bundled demo schema when absent.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Knowledge base directory, created if missing; in memory when absent.
    #[arg(long)]
    kb: Option<PathBuf>,
    /// `scripted:<path>` or `remote`.
    #[arg(long)]
    backend: Option<String>,
    /// Chat completions endpoint for the remote backend.
    #[arg(long, env = ENDPOINT_ENV)]
    endpoint: Option<String>,
    /// Simulated response surface (TOML); the bundled demo surface when absent.
    #[arg(long)]
    surface: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of iterations.
    #[arg(long)]
    budget: Option<usize>,
    /// Experiments per iteration.
    #[arg(long)]
    width: Option<usize>,
    /// Utility weights `exploitation,exploration,future_value`.
    #[arg(long)]
    weights: Option<String>,
    /// Attempts per requirement analysis and per grounded slot.
    #[arg(long)]
    retries: Option<u32>,
    /// Where the JSON report is written.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Stamp records with wall-clock time instead of logical ticks.
    #[arg(long)]
    wall_clock: bool,
    /// Print the resolved settings and exit.
    #[arg(long)]
    print_config: bool,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let over = Overrides {
            schema: self.schema.clone(),
            kb: self.kb.clone(),
            backend: self.backend.clone(),
            endpoint: self.endpoint.clone(),
            surface: self.surface.clone(),
            seed: self.seed,
            budget: self.budget,
            width: self.width,
            weights: self.weights.clone(),
            retries: self.retries,
            report: self.report.clone(),
            clock: self.wall_clock.then_some(ClockMode::Wall),
        };
        RunConfig::resolve(over, file)
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn backend(choice: &BackendChoice) -> Result<Box<dyn LlmBackend>, CliError> {
    Ok(match choice {
        BackendChoice::Scripted { path } => Box::new(ScriptedBackend::new(Script::load(path).map_err(config_err)?)),
        BackendChoice::Remote { config } => Box::new(RemoteBackend::from_env(config.clone()).map_err(config_err)?),
    })
}

fn write_report(path: &PathBuf, json: &str) -> Result<(), CliError> {
    std::fs::write(path, json).map_err(|e| CliError::Failed(format!("cannot write report {}: {e}", path.display())))
}

pub fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let config = args.resolve()?;
    if args.print_config {
        println!("{}", serde_json::to_string_pretty(&config).map_err(CliError::failed)?);
        return Ok(());
    }
    let intention = Intention::new("cli", args.intention.unwrap_or_default())?;

    let schema = match &config.schema {
        Some(p) => FrameworkSchema::load(p).map_err(config_err)?,
        None => FrameworkSchema::demo(),
    };
    let surface = match &config.surface {
        Some(p) => ResponseSurface::load(p).map_err(config_err)?,
        None => ResponseSurface::demo(),
    };
    let kb = match &config.kb {
        Some(dir) => KnowledgeBase::open_or_create(dir, KbConfig::default()).map_err(config_err)?,
        None => KnowledgeBase::in_memory(KbConfig::default()).map_err(config_err)?,
    }
    .with_schema(Arc::new(schema.clone()));
    let llm = backend(&config.backend)?;
    let corpus = InfraCorpus::from_schema(&schema, kb.embedder().as_ref(), kb.config().chunk_chars).map_err(CliError::failed)?;
    let env = SimEnv::new(schema.clone(), surface).with_seed(config.seed);
    let prompts = PromptRegistry::bundled();

    let [x, r, f] = config.weights;
    let mut cycle = CycleConfig {
        budget: config.budget,
        width: config.width,
        seed: config.seed,
        clock: config.clock,
        analysis_attempts: config.retries,
        ..CycleConfig::default()
    };
    cycle.proposal.utility.weights = UtilityWeights::new(x, r, f)?;
    cycle.grounding.max_attempts = config.retries;

    let agent = Agent { schema: &schema, kb: &kb, llm: llm.as_ref(), env: &env, prompts: &prompts, corpus: &corpus, config: cycle };
    info!(budget = config.budget, width = config.width, "starting cycle");
    let report = match agent.run_cycle(&intention) {
        Ok(report) => report,
        Err(AgentError::AnalysisFailed { reason, transcript }) => {
            let json = serde_json::json!({ "error": format!("requirement analysis failed: {reason}"), "transcript": transcript });
            write_report(&config.report, &serde_json::to_string_pretty(&json).map_err(CliError::failed)?)?;
            return Err(CliError::Analysis(reason));
        }
        Err(e) => return Err(e.into()),
    };
    write_report(&config.report, &report.to_json())?;
    print!("{}", report.render_text());
    let succeeded = report
        .iterations
        .iter()
        .flat_map(|i| &i.outcomes)
        .filter(|o| o.status == RecordStatus::Succeeded)
        .count();
    if succeeded == 0 {
        return Err(CliError::NoExperiments);
    }
    Ok(())
}
