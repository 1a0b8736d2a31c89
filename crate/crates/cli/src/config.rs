use std::path::{Path, PathBuf};

use arda::agent::ClockMode;
use arda::llm::RemoteConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Where the language model answers come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendChoice {
    Scripted { path: PathBuf },
    Remote { config: RemoteConfig },
}

impl BackendChoice {
    /// Parses `scripted:<path>` or `remote`.
    pub fn parse(text: &str, remote: RemoteConfig) -> Result<Self, CliError> {
        match text.split_once(':') {
            Some(("scripted", path)) if !path.is_empty() => Ok(BackendChoice::Scripted { path: PathBuf::from(path) }),
            _ if text == "remote" => Ok(BackendChoice::Remote { config: remote }),
            _ => Err(CliError::Config(format!("backend must be `scripted:<path>` or `remote`, got `{text}`"))),
        }
    }
}

/// The `run` settings as read from a TOML file. Every field is optional;
/// relative paths are taken from the file's directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub schema: Option<PathBuf>,
    pub kb: Option<PathBuf>,
    pub backend: Option<String>,
    pub surface: Option<PathBuf>,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub width: Option<usize>,
    pub weights: Option<String>,
    pub retries: Option<u32>,
    pub report: Option<PathBuf>,
    pub clock: Option<ClockMode>,
    pub remote: Option<RemoteConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: FileConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.schema, &mut config.kb, &mut config.surface, &mut config.report].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(b) = &mut config.backend {
            if let Some(rest) = b.strip_prefix("scripted:") {
                let p = Path::new(rest);
                if p.is_relative() {
                    *b = format!("scripted:{}", base.join(p).display());
                }
            }
        }
        Ok(config)
    }
}

/// Fully resolved settings for one `run`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    /// `None` selects the bundled demo schema.
    pub schema: Option<PathBuf>,
    /// `None` keeps the knowledge base in memory.
    pub kb: Option<PathBuf>,
    pub backend: BackendChoice,
    /// `None` selects the bundled demo surface.
    pub surface: Option<PathBuf>,
    pub seed: u64,
    pub budget: usize,
    pub width: usize,
    pub weights: [f64; 3],
    pub retries: u32,
    pub report: PathBuf,
    pub clock: ClockMode,
}

/// Values given on the command line or through the environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub schema: Option<PathBuf>,
    pub kb: Option<PathBuf>,
    pub backend: Option<String>,
    pub endpoint: Option<String>,
    pub surface: Option<PathBuf>,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub width: Option<usize>,
    pub weights: Option<String>,
    pub retries: Option<u32>,
    pub report: Option<PathBuf>,
    pub clock: Option<ClockMode>,
}

pub fn parse_weights(text: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Config(format!("weights must be three numbers `wx,wr,wf`, got `{text}`")))?;
    let [x, r, f] = parts[..] else {
        return Err(CliError::Config(format!("weights must be three numbers `wx,wr,wf`, got `{text}`")));
    };
    arda::agent::UtilityWeights::new(x, r, f).map_err(|e| CliError::Config(e.to_string()))?;
    Ok([x, r, f])
}

fn must_exist(what: &str, path: &Option<PathBuf>) -> Result<(), CliError> {
    match path {
        Some(p) if !p.exists() => Err(CliError::Config(format!("{what} path {} does not exist", p.display()))),
        _ => Ok(()),
    }
}

impl RunConfig {
    /// Merges flags and environment (already combined in `over`) over the
    /// config file, then checks the result.
    pub fn resolve(over: Overrides, file: FileConfig) -> Result<Self, CliError> {
        let mut remote = file.remote.unwrap_or_default();
        if let Some(e) = over.endpoint {
            remote.endpoint = e;
        }
        let backend_text = over.backend.or(file.backend).unwrap_or_else(|| "remote".to_string());
        let weights = match over.weights.or(file.weights) {
            Some(w) => parse_weights(&w)?,
            None => [0.5, 0.4, 0.1],
        };
        let config = RunConfig {
            schema: over.schema.or(file.schema),
            kb: over.kb.or(file.kb),
            backend: BackendChoice::parse(&backend_text, remote)?,
            surface: over.surface.or(file.surface),
            seed: over.seed.or(file.seed).unwrap_or(0),
            budget: over.budget.or(file.budget).unwrap_or(5),
            width: over.width.or(file.width).unwrap_or(2),
            weights,
            retries: over.retries.or(file.retries).unwrap_or(3),
            report: over.report.or(file.report).unwrap_or_else(|| PathBuf::from("arda-report.json")),
            clock: over.clock.or(file.clock).unwrap_or(ClockMode::Logical),
        };
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<(), CliError> {
        must_exist("schema", &self.schema)?;
        must_exist("surface", &self.surface)?;
        if let BackendChoice::Scripted { path } = &self.backend {
            must_exist("script", &Some(path.clone()))?;
        }
        if self.budget == 0 || self.width == 0 {
            return Err(CliError::Config("budget and width must be at least 1".into()));
        }
        if self.retries == 0 {
            return Err(CliError::Config("retries must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_values() {
        let file = FileConfig { budget: Some(9), width: Some(3), seed: Some(4), ..Default::default() };
        let over = Overrides { budget: Some(1), backend: Some("remote".into()), ..Default::default() };
        let c = RunConfig::resolve(over, file).unwrap();
        assert_eq!((c.budget, c.width, c.seed), (1, 3, 4));
    }

    #[test]
    fn endpoint_override_replaces_file_endpoint() {
        let file = FileConfig {
            remote: Some(RemoteConfig { endpoint: "http://file".into(), timeout_ms: 5, ..Default::default() }),
            ..Default::default()
        };
        let over = Overrides { endpoint: Some("http://flag".into()), ..Default::default() };
        match RunConfig::resolve(over, file).unwrap().backend {
            BackendChoice::Remote { config } => {
                assert_eq!(config.endpoint, "http://flag");
                assert_eq!(config.timeout_ms, 5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn weights_are_checked() {
        assert_eq!(parse_weights("0.6, 0.3, 0.1").unwrap(), [0.6, 0.3, 0.1]);
        assert!(parse_weights("0.6,0.3").is_err());
        assert!(parse_weights("0.6,0.6,0.1").is_err());
        assert!(parse_weights("a,b,c").is_err());
    }

    #[test]
    fn backend_text_is_parsed() {
        let r = RemoteConfig::default();
        assert_eq!(
            BackendChoice::parse("scripted:a/b.toml", r.clone()).unwrap(),
            BackendChoice::Scripted { path: "a/b.toml".into() }
        );
        assert!(BackendChoice::parse("scripted:", r.clone()).is_err());
        assert!(BackendChoice::parse("local", r).is_err());
    }

    #[test]
    fn zero_budget_is_a_config_error() {
        let over = Overrides { budget: Some(0), backend: Some("remote".into()), ..Default::default() };
        assert!(matches!(RunConfig::resolve(over, FileConfig::default()), Err(CliError::Config(_))));
    }
}
