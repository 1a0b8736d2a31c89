use std::path::Path;
use std::sync::Arc;

use arda::knowledge::KnowledgeBase;
use arda::symlang::{ComponentPredicate, FrameworkSchema};
use clap::Subcommand;

use crate::CliError;

#[derive(Debug, Subcommand)]
pub enum KbCommand {
    /// One row per stored experiment.
    List,
    /// Experiments most similar to a goal, filtered by constraints.
    Query {
        #[arg(long)]
        goal: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// A constraint predicate as JSON, e.g. `{"kind":"tag","slot":"model","tag":"gpu","present":false}`.
        #[arg(long)]
        constraint: Vec<String>,
    },
    /// The full record as JSON.
    Show { id: String },
}

pub fn cmd_kb(dir: &Path, schema: Option<&Path>, command: KbCommand) -> Result<(), CliError> {
    if !dir.exists() {
        return Err(CliError::Config(format!("knowledge base {} does not exist", dir.display())));
    }
    let schema = match schema {
        Some(p) => FrameworkSchema::load(p).map_err(|e| CliError::Config(e.to_string()))?,
        None => FrameworkSchema::demo(),
    };
    let kb = KnowledgeBase::open(dir).map_err(CliError::failed)?.with_schema(Arc::new(schema));
    match command {
        KbCommand::List => {
            println!("{:<8} {:<10} {:<16} plan", "id", "status", "setting");
            for r in kb.experiments() {
                let status = serde_json::to_value(r.status).map_err(CliError::failed)?;
                println!(
                    "{:<8} {:<10} {:<16} {}",
                    r.id,
                    status.as_str().unwrap_or_default(),
                    r.results.evaluation_setting,
                    r.plan.render()
                );
            }
        }
        KbCommand::Query { goal, k, constraint } => {
            let constraints = constraint
                .iter()
                .map(|c| serde_json::from_str::<ComponentPredicate>(c))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Config(format!("invalid constraint: {e}")))?;
            let hits = kb.query_experiments(&goal, &constraints, k).map_err(|e| CliError::Config(e.to_string()))?;
            println!("{:<8} {:>10} plan", "id", "similarity");
            for h in hits {
                println!("{:<8} {:>10.6} {}", h.record.id, h.similarity, h.record.plan.render());
            }
        }
        KbCommand::Show { id } => {
            let record = kb.experiment(&id).ok_or_else(|| CliError::Failed(format!("no experiment `{id}`")))?;
            println!("{}", serde_json::to_string_pretty(record.as_ref()).map_err(CliError::failed)?);
        }
    }
    Ok(())
}
