use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genetic_ops::{MutationTable, OperatorLimits};
use crate::llm_ops::{LlmEndpoint, LlmOperator, TaskPrompt, TemplateId};
use crate::oracle::TaskSpec;

/// Which generator fills the crossover and mutation roles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wiring {
    /// Graph crossover and graph mutation.
    #[default]
    Graphga,
    /// LLM crossover with graph fallback, graph mutation.
    Gpt4,
    /// Graph crossover and mutation plus LLM mutation of the top `llm_top_y`.
    Biot5,
}

impl Wiring {
    pub fn templates(self) -> &'static [TemplateId] {
        match self {
            Wiring::Graphga => &[],
            Wiring::Gpt4 => &[TemplateId::Gpt4Crossover],
            Wiring::Biot5 => &[TemplateId::Biot5Mutation],
        }
    }
}

fn default_population() -> usize {
    120
}
fn default_offspring() -> usize {
    70
}
fn default_crossovers() -> usize {
    70
}
fn default_mutation_rate() -> f64 {
    0.067
}
fn default_top_y() -> usize {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaConfig {
    /// Survivors kept each generation.
    #[serde(default = "default_population")]
    pub population_size: usize,
    /// Offspring kept after the similarity prune and sent to the oracle.
    #[serde(default = "default_offspring")]
    pub offspring: usize,
    /// Crossover children proposed per generation.
    #[serde(default = "default_crossovers")]
    pub crossovers: usize,
    /// Probability that a crossover child is then mutated.
    #[serde(default = "default_mutation_rate")]
    pub mutation_rate: f64,
    /// Fittest individuals handed to the LLM mutation (biot5 wiring only).
    #[serde(default = "default_top_y")]
    pub llm_top_y: usize,
    #[serde(default)]
    pub max_generations: Option<u32>,
    #[serde(default)]
    pub limits: OperatorLimits,
    #[serde(default)]
    pub mutation_table: MutationTable,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: default_population(),
            offspring: default_offspring(),
            crossovers: default_crossovers(),
            mutation_rate: default_mutation_rate(),
            llm_top_y: default_top_y(),
            max_generations: None,
            limits: OperatorLimits::default(),
            mutation_table: MutationTable::default(),
        }
    }
}

fn yes() -> bool {
    true
}
fn default_window() -> usize {
    5
}
fn default_threshold() -> f64 {
    1e-3
}
fn default_top_n() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarlyStopConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Generations over which the improvement is measured.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Minimum improvement of the tracked mean required to keep going.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Size of the all-time best set whose mean is tracked.
    #[serde(default = "default_top_n")]
    pub top_n: usize,
}

impl Default for EarlyStopConfig {
    fn default() -> Self {
        EarlyStopConfig {
            enabled: true,
            window: default_window(),
            threshold: default_threshold(),
            top_n: default_top_n(),
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Parallel oracle calls per batch.
    #[serde(default = "one")]
    pub workers: usize,
    /// Charge budget for repeated molecules too.
    #[serde(default)]
    pub strict: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            workers: 1,
            strict: false,
        }
    }
}

/// Prompt slots: a built-in task id or explicit slot values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PromptRef {
    Task(String),
    Custom(TaskPrompt),
}

impl PromptRef {
    pub fn resolve(&self) -> Option<TaskPrompt> {
        match self {
            PromptRef::Task(id) => TaskPrompt::builtin(id),
            PromptRef::Custom(p) => Some(p.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmConfig {
    pub endpoint: LlmEndpoint,
    pub prompt: PromptRef,
}

fn default_budget() -> u64 {
    10_000
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Maximum number of molecules sent to the oracle.
    #[serde(default = "default_budget")]
    pub budget: u64,
    /// SMILES file for the initial population; the bundled pool if absent.
    #[serde(default)]
    pub seed_pool: Option<PathBuf>,
    #[serde(default)]
    pub wiring: Wiring,
    #[serde(default)]
    pub ga: GaConfig,
    #[serde(default)]
    pub early_stop: EarlyStopConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    pub task: TaskSpec,
    #[serde(default)]
    pub llm: Option<LlmConfig>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{origin}: cannot read: {message}")]
    Io { origin: String, message: String },
    #[error("{}{message}", location(origin, *line))]
    Syntax {
        origin: String,
        line: Option<usize>,
        message: String,
    },
    #[error("{}{key}: {message}", location(origin, *line))]
    Invalid {
        key: String,
        origin: String,
        line: Option<usize>,
        message: String,
    },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("bad override {0:?}: expected key=value")]
    Override(String),
}

fn location(origin: &str, line: Option<usize>) -> String {
    match line {
        Some(l) => format!("{origin}:{l}: "),
        None if origin.is_empty() => String::new(),
        None => format!("{origin}: "),
    }
}

impl ConfigError {
    fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            origin: String::new(),
            line: None,
            message: message.into(),
        }
    }

    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { key, .. } => Some(key),
            _ => None,
        }
    }
}

const PRESETS: &[(&str, &str)] = &[
    ("isomers_c7h8n2o2", include_str!("../../presets/isomers_c7h8n2o2.toml")),
    ("isomers_c9h10n2o2pf2cl", include_str!("../../presets/isomers_c9h10n2o2pf2cl.toml")),
    ("mestranol_similarity", include_str!("../../presets/mestranol_similarity.toml")),
    ("thiothixene_rediscovery", include_str!("../../presets/thiothixene_rediscovery.toml")),
    ("celecoxib_rediscovery", include_str!("../../presets/celecoxib_rediscovery.toml")),
    ("synthetic", include_str!("../../presets/synthetic.toml")),
    ("maxjnk3_maxqed_minsa", include_str!("../../presets/maxjnk3_maxqed_minsa.toml")),
    ("maxgsk3b_maxqed_minsa", include_str!("../../presets/maxgsk3b_maxqed_minsa.toml")),
    (
        "maxjnk3_maxqed_minsa_mindrd2_mingsk3b",
        include_str!("../../presets/maxjnk3_maxqed_minsa_mindrd2_mingsk3b.toml"),
    ),
    ("3pbl_docking", include_str!("../../presets/3pbl_docking.toml")),
    ("gpt4", include_str!("../../presets/gpt4.toml")),
    ("biot5", include_str!("../../presets/biot5.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Line (1-based) on which a dotted key is assigned in a TOML document,
/// following `[table]` headers and dotted keys.
pub fn locate_key(text: &str, dotted: &str) -> Option<usize> {
    let mut table = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with("[[") {
            table = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            table = rest.split(']').next().unwrap_or("").trim().to_string();
            if table == dotted {
                return Some(i + 1);
            }
            continue;
        }
        let Some((key, _)) = line.split_once('=') else { continue };
        let key: String = key.split('.').map(|k| k.trim().trim_matches('"')).collect::<Vec<_>>().join(".");
        if key.is_empty() || key.starts_with('#') {
            continue;
        }
        let full = if table.is_empty() { key } else { format!("{table}.{key}") };
        if full == dotted || dotted.starts_with(&format!("{full}.")) {
            return Some(i + 1);
        }
    }
    None
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_table(text: &str, origin: &str) -> Result<toml::Table, ConfigError> {
    text.parse::<toml::Table>().map_err(|e| ConfigError::Syntax {
        origin: origin.into(),
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().trim().to_string(),
    })
}

/// Recursively overlays `top` onto `base`; tables merge, other values replace.
pub fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (key, value) = spec.split_once('=').ok_or_else(|| ConfigError::Override(spec.into()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::Override(spec.into()));
    }
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("non-empty key");
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(ConfigError::Override(spec.into())),
        };
    }
    cur.insert(last.to_string(), parsed);
    Ok(())
}

/// Where configuration comes from, lowest precedence first.
#[derive(Debug, Clone, Default)]
pub struct ConfigSources {
    pub presets: Vec<String>,
    pub file: Option<PathBuf>,
    /// Config text applied after the file; relative paths resolve
    /// against the working directory.
    pub text: Option<String>,
    pub overrides: Vec<String>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg = parse_config(parse_table(text, "")?, Some((text, "")))?;
        cfg.validate().map_err(|e| attribute(e, &[("", text)], &[]))?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    /// Merges presets, a config file and `key=value` overrides, then
    /// validates. Relative `seed_pool` paths resolve against the file.
    pub fn load(sources: &ConfigSources) -> Result<RunConfig, ConfigError> {
        let mut table = toml::Table::new();
        let mut texts: Vec<(String, String)> = Vec::new();
        for name in &sources.presets {
            let text = preset_text(name).ok_or_else(|| ConfigError::UnknownPreset(name.clone()))?;
            let origin = format!("preset {name}");
            merge(&mut table, parse_table(text, &origin)?);
            texts.push((origin, text.to_string()));
        }
        let mut file_text = None;
        if let Some(path) = &sources.file {
            let origin = path.display().to_string();
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
                origin: origin.clone(),
                message: e.to_string(),
            })?;
            let mut t = parse_table(&text, &origin)?;
            if let Some(toml::Value::String(pool)) = t.get("seed_pool") {
                let resolved = path.parent().unwrap_or(Path::new(".")).join(pool);
                t.insert("seed_pool".into(), toml::Value::String(resolved.display().to_string()));
            }
            merge(&mut table, t);
            texts.push((origin.clone(), text.clone()));
            file_text = Some((text, origin));
        }
        if let Some(text) = &sources.text {
            let origin = "<config>".to_string();
            merge(&mut table, parse_table(text, &origin)?);
            texts.push((origin.clone(), text.clone()));
            file_text = Some((text.clone(), origin));
        }
        for o in &sources.overrides {
            apply_override(&mut table, o)?;
        }
        let cfg = parse_config(table, file_text.as_ref().map(|(t, o)| (t.as_str(), o.as_str())))?;
        let texts: Vec<(&str, &str)> = texts.iter().rev().map(|(o, t)| (o.as_str(), t.as_str())).collect();
        cfg.validate().map_err(|e| attribute(e, &texts, &sources.overrides))?;
        Ok(cfg)
    }

    /// LLM operator for the configured wiring, if it needs one.
    pub fn needs_llm(&self) -> bool {
        self.wiring != Wiring::Graphga
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let ga = &self.ga;
        if ga.population_size == 0 {
            return Err(ConfigError::invalid("ga.population_size", "must be positive"));
        }
        if !(0.0..=1.0).contains(&ga.mutation_rate) {
            return Err(ConfigError::invalid(
                "ga.mutation_rate",
                format!("must be in [0, 1], got {}", ga.mutation_rate),
            ));
        }
        if ga.offspring == 0 {
            return Err(ConfigError::invalid("ga.offspring", "must be positive"));
        }
        let y = if self.wiring == Wiring::Biot5 { ga.llm_top_y } else { 0 };
        if ga.offspring > ga.crossovers + y {
            return Err(ConfigError::invalid(
                "ga.offspring",
                format!(
                    "must not exceed crossovers + llm_top_y = {}, got {}",
                    ga.crossovers + y,
                    ga.offspring
                ),
            ));
        }
        if ga.limits.retries == 0 {
            return Err(ConfigError::invalid("ga.limits.retries", "must be positive"));
        }
        if self.budget == 0 {
            return Err(ConfigError::invalid("budget", "must be positive"));
        }
        if (self.budget as usize) < ga.population_size {
            return Err(ConfigError::invalid(
                "budget",
                format!("must cover the initial population of {}", ga.population_size),
            ));
        }
        let es = &self.early_stop;
        if es.window == 0 {
            return Err(ConfigError::invalid("early_stop.window", "must be positive"));
        }
        if es.top_n == 0 {
            return Err(ConfigError::invalid("early_stop.top_n", "must be positive"));
        }
        if !(es.threshold.is_finite() && es.threshold >= 0.0) {
            return Err(ConfigError::invalid("early_stop.threshold", "must be non-negative"));
        }
        if self.oracle.workers == 0 {
            return Err(ConfigError::invalid("oracle.workers", "must be positive"));
        }
        self.task
            .validate()
            .map_err(|e| ConfigError::invalid("task", e.to_string()))?;
        if self.needs_llm() {
            let Some(llm) = &self.llm else {
                return Err(ConfigError::invalid(
                    "llm",
                    format!("wiring {:?} needs an [llm] section", self.wiring),
                ));
            };
            llm.endpoint
                .validate()
                .map_err(|e| ConfigError::invalid("llm.endpoint", e.to_string()))?;
            let prompt = llm.prompt.resolve().ok_or_else(|| {
                ConfigError::invalid("llm.prompt", format!("unknown task prompt {:?}", llm.prompt))
            })?;
            let client = std::sync::Arc::new(crate::llm_ops::FnClient(|_: &[_]| Ok(String::new())));
            LlmOperator::new(client, prompt, self.wiring.templates())
                .map_err(|e| ConfigError::invalid("llm.prompt", e.to_string()))?;
        }
        Ok(())
    }
}

fn parse_config(table: toml::Table, file: Option<(&str, &str)>) -> Result<RunConfig, ConfigError> {
    toml::Value::Table(table).try_into::<RunConfig>().map_err(|merged| {
        // Re-parse the file alone so type errors point at its lines.
        if let Some((text, origin)) = file {
            if let Err(e) = toml::from_str::<RunConfig>(text) {
                if let Some(span) = e.span() {
                    if !e.message().contains("missing field") {
                        return ConfigError::Syntax {
                            origin: origin.into(),
                            line: Some(line_of(text, span.start)),
                            message: e.message().trim().to_string(),
                        };
                    }
                }
            }
        }
        ConfigError::Syntax {
            origin: file.map(|(_, o)| o.to_string()).unwrap_or_default(),
            line: None,
            message: merged.message().trim().to_string(),
        }
    })
}

/// Points a validation error at the override or file line that set the key.
fn attribute(err: ConfigError, texts: &[(&str, &str)], overrides: &[String]) -> ConfigError {
    let ConfigError::Invalid { key, message, .. } = err else {
        return err;
    };
    let matches = |k: &str| k == key || key.starts_with(&format!("{k}.")) || k.starts_with(&format!("{key}."));
    if let Some(o) = overrides
        .iter()
        .rev()
        .find(|o| o.split_once('=').is_some_and(|(k, _)| matches(k.trim())))
    {
        return ConfigError::Invalid {
            key,
            origin: format!("--override {o}"),
            line: None,
            message,
        };
    }
    for (origin, text) in texts {
        if let Some(line) = locate_key(text, &key) {
            return ConfigError::Invalid {
                key,
                origin: origin.to_string(),
                line: Some(line),
                message,
            };
        }
    }
    ConfigError::Invalid {
        key,
        origin: String::new(),
        line: None,
        message,
    }
}

/// True when the tracked mean failed to rise by at least `threshold` over
/// the last `window` generations.
pub fn check_early_stop(history: &[f64], window: usize, threshold: f64) -> bool {
    if history.len() <= window {
        return false;
    }
    let latest = history[history.len() - 1];
    let start = history[history.len() - 1 - window];
    latest - start < threshold
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
budget = 500

[ga]
population_size = 20
offspring = 10
crossovers = 10

[[task.objectives]]
name = "syn"
oracle = "synthetic"
params = { seed = 1 }
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.ga.mutation_rate, 0.067);
        assert_eq!(cfg.ga.llm_top_y, 30);
        assert_eq!(cfg.early_stop.window, 5);
        assert_eq!(cfg.wiring, Wiring::Graphga);
        let again = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn bad_mutation_rate_names_key_and_line() {
        let text = MINIMAL.replace("crossovers = 10", "crossovers = 10\nmutation_rate = 1.5");
        let err = RunConfig::from_toml_str(&text).unwrap_err();
        assert_eq!(err.key(), Some("ga.mutation_rate"));
        let ConfigError::Invalid { line, .. } = &err else { panic!() };
        assert_eq!(*line, Some(locate_key(&text, "ga.mutation_rate").unwrap()));
        assert_eq!(*line, Some(9));
    }

    #[test]
    fn type_errors_carry_lines() {
        let text = MINIMAL.replace("budget = 500", "budget = \"lots\"");
        match RunConfig::from_toml_str(&text).unwrap_err() {
            ConfigError::Syntax { line, .. } => assert_eq!(line, Some(3)),
            e => panic!("{e}"),
        }
        let text = MINIMAL.replace("seed = 3", "sede = 3");
        match RunConfig::from_toml_str(&text).unwrap_err() {
            ConfigError::Syntax { line, message, .. } => {
                assert_eq!(line, Some(2));
                assert!(message.contains("sede"), "{message}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn overrides_and_presets() {
        let sources = ConfigSources {
            presets: vec!["isomers_c7h8n2o2".into()],
            file: None,
            text: None,
            overrides: vec!["budget=50".into(), "ga.population_size=10".into(), "ga.offspring=5".into()],
        };
        let cfg = RunConfig::load(&sources).unwrap();
        assert_eq!(cfg.budget, 50);
        assert_eq!(cfg.ga.population_size, 10);
        let bad = ConfigSources {
            overrides: vec!["ga.mutation_rate=1.5".into()],
            ..sources
        };
        let err = RunConfig::load(&bad).unwrap_err();
        assert!(err.to_string().contains("--override ga.mutation_rate=1.5"), "{err}");
        assert!(matches!(
            RunConfig::load(&ConfigSources { presets: vec!["nope".into()], ..Default::default() }),
            Err(ConfigError::UnknownPreset(_))
        ));
    }

    #[test]
    fn every_preset_parses() {
        for name in preset_names() {
            let mut presets = vec![name.to_string()];
            if matches!(name, "gpt4" | "biot5") {
                presets.insert(0, "isomers_c9h10n2o2pf2cl".into());
            }
            let sources = ConfigSources { presets, ..Default::default() };
            RunConfig::load(&sources).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn llm_wiring_requires_endpoint() {
        let text = format!("wiring = \"gpt4\"\n{MINIMAL}");
        assert_eq!(RunConfig::from_toml_str(&text).unwrap_err().key(), Some("llm"));
    }

    #[test]
    fn early_stop_rule() {
        assert!(check_early_stop(&[0.5; 6], 5, 1e-3));
        let rising: Vec<f64> = (0..10).map(|i| 0.5 + 0.01 * f64::from(i)).collect();
        assert!(!check_early_stop(&rising, 5, 1e-3));
        assert!(!check_early_stop(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.001], 5, 1e-3));
        assert!(check_early_stop(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0009], 5, 1e-3));
        assert!(!check_early_stop(&[0.5; 5], 5, 1e-3));
    }

    #[test]
    fn locate_handles_dotted_and_inline_keys() {
        let text = "a = 1\n[ga]\nlimits.retries = 0\n[task]\n";
        assert_eq!(locate_key(text, "ga.limits.retries"), Some(3));
        assert_eq!(locate_key(text, "task"), Some(4));
        assert_eq!(locate_key(text, "b"), None);
    }
}
