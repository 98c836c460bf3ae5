use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::inference::InferenceConfig;
use crate::report::{ReportFormat, ReportOptions};
use crate::tsv::sha256_hex;

use super::{PipelineError, Stage};

pub const ENDPOINT_ENV: &str = "ELLDA_ENDPOINT";
pub const CACHE_DIR_ENV: &str = "ELLDA_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus_dir: PathBuf,
    pub manifest: PathBuf,
    /// One term per line; the bundled English list when absent.
    pub stopwords: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub blocklist: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            corpus_dir: "texts".into(),
            manifest: "manifest.csv".into(),
            stopwords: None,
            gazetteer: None,
            blocklist: None,
            cache_dir: None,
            output_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stemming {
    Snowball,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub min_count: u64,
    pub stemmer: Stemming,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            min_count: 1,
            stemmer: Stemming::Snowball,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkMethod {
    Gazetteer,
    Spotlight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub method: LinkMethod,
    pub endpoint: Option<String>,
    pub min_confidence: f64,
    pub max_doc_fraction: f64,
    pub max_in_flight: usize,
    pub max_retries: u32,
    pub backoff_ms: u64,
    /// Confidence sent to the service; filtering happens locally either way.
    pub request_confidence: f64,
    /// Extra form fields passed through to the service.
    pub params: BTreeMap<String, String>,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            method: LinkMethod::Gazetteer,
            endpoint: None,
            min_confidence: 0.1,
            max_doc_fraction: 0.8,
            max_in_flight: 4,
            max_retries: 4,
            backoff_ms: 250,
            request_confidence: 0.0,
            params: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    pub k: usize,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeConfig {
    /// Standard LDA only; Labeled LDA has one topic per label.
    pub topics: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub average_samples: bool,
}

impl Default for ModeConfig {
    fn default() -> Self {
        let d = InferenceConfig::default();
        Self {
            topics: None,
            alpha: d.alpha,
            beta: d.beta,
            iterations: d.iterations,
            burn_in: d.burn_in,
            average_samples: d.average_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    /// Words per topic kept in model files.
    pub save_top_words: usize,
    pub standard: ModeConfig,
    pub labeled: ModeConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            save_top_words: 20,
            standard: ModeConfig::default(),
            labeled: ModeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub threshold: f64,
    pub format: ReportFormat,
    pub top_words: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            threshold: 0.10,
            format: ReportFormat::Markdown,
            top_words: 5,
        }
    }
}

/// The whole pipeline configuration, one TOML table per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub ingest: IngestConfig,
    pub link: LinkConfig,
    pub label: LabelConfig,
    pub train: TrainConfig,
    pub report: ReportConfig,
}

/// Command-line settings that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub endpoint: Option<String>,
    pub format: Option<ReportFormat>,
    /// Force the gazetteer linker.
    pub offline: bool,
}

fn invalid(field: &str, message: impl std::fmt::Display) -> PipelineError {
    PipelineError::Config(format!("{field}: {message}"))
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e: toml::de::Error| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
            PipelineError::Config(match line {
                Some(line) => format!("line {line}: {}", e.message()),
                None => e.message().to_owned(),
            })
        })
    }

    /// Applies environment overrides (endpoint and cache dir) and then
    /// command-line overrides.
    pub fn apply_overrides(&mut self, overrides: &Overrides) {
        if let Ok(endpoint) = std::env::var(ENDPOINT_ENV) {
            self.link.endpoint = Some(endpoint);
        }
        if let Ok(dir) = std::env::var(CACHE_DIR_ENV) {
            self.paths.cache_dir = Some(dir.into());
        }
        if let Some(seed) = overrides.seed {
            self.train.seed = seed;
        }
        if let Some(endpoint) = &overrides.endpoint {
            self.link.endpoint = Some(endpoint.clone());
        }
        if let Some(format) = overrides.format {
            self.report.format = format;
        }
        if overrides.offline {
            self.link.method = LinkMethod::Gazetteer;
        }
    }

    /// Range checks, each error naming its field.
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.ingest.min_count == 0 {
            return Err(invalid("ingest.min_count", "must be at least 1"));
        }
        let l = &self.link;
        if !(0.0..=1.0).contains(&l.min_confidence) {
            return Err(invalid("link.min_confidence", "must be in [0, 1]"));
        }
        if !(l.max_doc_fraction > 0.0 && l.max_doc_fraction <= 1.0) {
            return Err(invalid("link.max_doc_fraction", "must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&l.request_confidence) {
            return Err(invalid("link.request_confidence", "must be in [0, 1]"));
        }
        if l.max_in_flight == 0 {
            return Err(invalid("link.max_in_flight", "must be at least 1"));
        }
        match l.method {
            LinkMethod::Gazetteer if self.paths.gazetteer.is_none() => {
                return Err(invalid("paths.gazetteer", "required when link.method = \"gazetteer\""));
            }
            LinkMethod::Spotlight if l.endpoint.is_none() => {
                return Err(invalid(
                    "link.endpoint",
                    format!("required when link.method = \"spotlight\" (or set {ENDPOINT_ENV} or --endpoint)"),
                ));
            }
            _ => {}
        }
        if self.label.k == 0 {
            return Err(invalid("label.k", "must be at least 1"));
        }
        if self.train.save_top_words == 0 {
            return Err(invalid("train.save_top_words", "must be at least 1"));
        }
        if self.train.labeled.topics.is_some() {
            return Err(invalid(
                "train.labeled.topics",
                "not allowed; Labeled LDA has one topic per label",
            ));
        }
        for (name, mode) in [("standard", self.standard_inference()), ("labeled", self.labeled_inference())] {
            mode.validate()
                .map_err(|e| invalid(&format!("train.{name}"), e.to_string().trim_start_matches("invalid inference configuration: ")))?;
        }
        let r = &self.report;
        if !(0.0..=1.0).contains(&r.threshold) {
            return Err(invalid("report.threshold", "must be in [0, 1]"));
        }
        if r.top_words > self.train.save_top_words {
            return Err(invalid(
                "report.top_words",
                format!("exceeds train.save_top_words ({})", self.train.save_top_words),
            ));
        }
        Ok(())
    }

    pub fn standard_inference(&self) -> InferenceConfig {
        let m = &self.train.standard;
        InferenceConfig {
            topics: m.topics.unwrap_or(InferenceConfig::default().topics),
            alpha: m.alpha,
            beta: m.beta,
            iterations: m.iterations,
            burn_in: m.burn_in,
            seed: self.train.seed,
            average_samples: m.average_samples,
        }
    }

    pub fn labeled_inference(&self) -> InferenceConfig {
        let m = &self.train.labeled;
        InferenceConfig {
            topics: InferenceConfig::default().topics,
            alpha: m.alpha,
            beta: m.beta,
            iterations: m.iterations,
            burn_in: m.burn_in,
            seed: self.train.seed,
            average_samples: m.average_samples,
        }
    }

    pub fn report_options(&self) -> ReportOptions {
        ReportOptions {
            threshold: self.report.threshold,
            top_words: self.report.top_words,
        }
    }

    /// Hash of the settings that determine a stage's output, chained with
    /// the hashes of the stages it reads from. Paths are left out; input
    /// file contents are tracked by the run records instead.
    pub fn stage_hash(&self, stage: Stage) -> String {
        let value = match stage {
            Stage::Ingest => json!({
                "stage": "ingest",
                "ingest": self.ingest,
                "custom_stopwords": self.paths.stopwords.is_some(),
            }),
            Stage::Link => json!({
                "stage": "link",
                "upstream": self.stage_hash(Stage::Ingest),
                "method": self.link.method,
                "endpoint": match self.link.method {
                    LinkMethod::Spotlight => self.link.endpoint.clone(),
                    LinkMethod::Gazetteer => None,
                },
                "request_confidence": self.link.request_confidence,
                "params": self.link.params,
                "min_confidence": self.link.min_confidence,
                "max_doc_fraction": self.link.max_doc_fraction,
            }),
            Stage::Label => json!({
                "stage": "label",
                "upstream": self.stage_hash(Stage::Link),
                "label": self.label,
            }),
            Stage::TrainStandard => json!({
                "stage": "train-standard",
                "upstream": self.stage_hash(Stage::Ingest),
                "seed": self.train.seed,
                "save_top_words": self.train.save_top_words,
                "mode": self.train.standard,
            }),
            Stage::TrainLabeled => json!({
                "stage": "train-labeled",
                "upstream": self.stage_hash(Stage::Label),
                "seed": self.train.seed,
                "save_top_words": self.train.save_top_words,
                "mode": self.train.labeled,
            }),
            Stage::Report => json!({
                "stage": "report",
                "upstream": [self.stage_hash(Stage::TrainStandard), self.stage_hash(Stage::TrainLabeled)],
                "report": self.report,
            }),
        };
        sha256_hex(&serde_json::to_vec(&value).expect("config serializes"))
    }
}

/// A validated configuration and the directory its relative paths are
/// resolved against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    /// Reads, overrides and validates a config file, then checks that every
    /// input path it names exists.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = PipelineConfig::parse(&text).map_err(|e| match e {
            PipelineError::Config(m) => PipelineError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        config.apply_overrides(overrides);
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::new(config, base_dir)
    }

    pub fn new(config: PipelineConfig, base_dir: PathBuf) -> Result<Self, PipelineError> {
        config.validate()?;
        let loaded = Self { config, base_dir };
        let p = &loaded.config.paths;
        let mut required = vec![("paths.corpus_dir", Some(&p.corpus_dir)), ("paths.manifest", Some(&p.manifest))];
        required.push(("paths.stopwords", p.stopwords.as_ref()));
        if loaded.config.link.method == LinkMethod::Gazetteer {
            required.push(("paths.gazetteer", p.gazetteer.as_ref()));
        }
        required.push(("paths.blocklist", p.blocklist.as_ref()));
        for (field, path) in required {
            if let Some(path) = path {
                let resolved = loaded.resolve(path);
                if !resolved.exists() {
                    return Err(invalid(field, format!("{} does not exist", resolved.display())));
                }
            }
        }
        Ok(loaded)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.paths.output_dir)
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.output_dir().join(name)
    }
}
