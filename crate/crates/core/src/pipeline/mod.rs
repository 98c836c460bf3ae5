//! Stage orchestration: ingest, link, label, train and report, each reading
//! the previous stages' artifacts from the output directory and writing its
//! own plus a run record.
//!
//! Before a stage runs, every stage it depends on (transitively) is checked:
//! its run record must exist, its configuration hash must match the current
//! configuration, and the inputs it recorded must still match the files on
//! disk. The label file is the one artifact that may be edited by hand.

mod config;
mod meta;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::{
    read_manifest, read_raw_documents, Corpus, CorpusError, IdentityNormalizer, SnowballStemmer, Stopwords,
    TextPipeline, TokenNormalizer,
};
use crate::inference::{run_inference_with, InferenceError, InferenceMode, ModelKind, TopicModelFile};
use crate::labels::{build_label_space, compute_entity_tfidf, read_labels, select_labels, write_labels, LabelError};
use crate::linking::{
    annotate_documents, filter_annotations, parse_blocklist, read_annotations, write_annotations, AnnotationCache,
    Annotator, DocAnnotations, FilterPolicy, Gazetteer, LinkError, RateLimit, SpotlightClient,
};
use crate::report::{emit_report, render, summary_json, ReportError};
use crate::tsv::sha256_hex;

pub use config::{
    IngestConfig, LabelConfig, LinkConfig, LinkMethod, LoadedConfig, ModeConfig, Overrides, PathsConfig,
    PipelineConfig, ReportConfig, Stemming, TrainConfig, CACHE_DIR_ENV, ENDPOINT_ENV,
};
pub use meta::RunRecord;

pub const CORPUS_FILE: &str = "corpus.txt";
pub const ANNOTATIONS_FILE: &str = "annotations.tsv";
pub const LABELS_FILE: &str = "labels.tsv";
pub const STANDARD_MODEL_FILE: &str = "model-standard.txt";
pub const LABELED_MODEL_FILE: &str = "model-labeled.txt";
pub const REPORT_SUMMARY_FILE: &str = "report-summary.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("missing {what} artifact {}: run `ellda {command}` first", path.display())]
    MissingArtifact {
        what: &'static str,
        path: PathBuf,
        command: &'static str,
    },
    #[error("stale {stage} artifacts ({reason}): re-run `ellda {command}`")]
    Stale {
        stage: &'static str,
        reason: String,
        command: &'static str,
    },
    #[error("external service failure: {0}")]
    Service(String),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for configuration, usage and data errors, 2 for missing or stale
    /// artifacts, 3 for external service failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Data(_) | PipelineError::Io { .. } => 1,
            PipelineError::MissingArtifact { .. } | PipelineError::Stale { .. } => 2,
            PipelineError::Service(_) => 3,
        }
    }
}

impl From<CorpusError> for PipelineError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { path, source } => PipelineError::Io { path, source },
            other => PipelineError::Data(other.to_string()),
        }
    }
}

impl From<LinkError> for PipelineError {
    fn from(e: LinkError) -> Self {
        match e {
            LinkError::Service { .. } | LinkError::Parse { .. } | LinkError::OutOfBounds { .. } => {
                PipelineError::Service(e.to_string())
            }
            LinkError::Policy(m) => PipelineError::Config(m),
            LinkError::Io { path, source } => PipelineError::Io { path, source },
            other => PipelineError::Data(other.to_string()),
        }
    }
}

impl From<LabelError> for PipelineError {
    fn from(e: LabelError) -> Self {
        PipelineError::Data(format!("{LABELS_FILE}: {e}"))
    }
}

impl From<InferenceError> for PipelineError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::Config(m) => PipelineError::Config(m),
            other => PipelineError::Data(other.to_string()),
        }
    }
}

impl From<ReportError> for PipelineError {
    fn from(e: ReportError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Link,
    Label,
    TrainStandard,
    TrainLabeled,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Ingest,
        Stage::Link,
        Stage::Label,
        Stage::TrainStandard,
        Stage::TrainLabeled,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Link => "link",
            Stage::Label => "label",
            Stage::TrainStandard => "train-standard",
            Stage::TrainLabeled => "train-labeled",
            Stage::Report => "report",
        }
    }

    /// The command that re-runs this stage.
    pub fn command(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Link => "link",
            Stage::Label => "label",
            Stage::TrainStandard => "train --mode standard",
            Stage::TrainLabeled => "train --mode labeled",
            Stage::Report => "report",
        }
    }

    fn artifact_kind(self) -> &'static str {
        match self {
            Stage::Ingest => "corpus",
            Stage::Link => "annotation",
            Stage::Label => "label",
            Stage::TrainStandard | Stage::TrainLabeled => "model",
            Stage::Report => "report",
        }
    }

    /// Stages whose artifacts this stage reads.
    pub fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Link => &[Stage::Ingest],
            Stage::Label => &[Stage::Ingest, Stage::Link],
            Stage::TrainStandard => &[Stage::Ingest],
            Stage::TrainLabeled => &[Stage::Ingest, Stage::Label],
            Stage::Report => &[Stage::Ingest, Stage::Label, Stage::TrainStandard, Stage::TrainLabeled],
        }
    }

    fn meta_file(self) -> String {
        format!("{}.meta", self.name())
    }
}

/// Source inputs are keyed by these names in run records; every other key
/// is an artifact file name in the output directory.
const SOURCE_MANIFEST: &str = "source:manifest";
const SOURCE_TEXTS: &str = "source:texts";
const SOURCE_STOPWORDS: &str = "source:stopwords";
const SOURCE_GAZETTEER: &str = "source:gazetteer";
const SOURCE_BLOCKLIST: &str = "source:blocklist";

/// Runs pipeline stages against one loaded configuration.
pub struct Pipeline {
    cfg: LoadedConfig,
}

impl Pipeline {
    pub fn new(cfg: LoadedConfig) -> Self {
        Self { cfg }
    }

    pub fn open(config_path: &Path, overrides: &Overrides) -> Result<Self, PipelineError> {
        LoadedConfig::load(config_path, overrides).map(Self::new)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg.config
    }

    pub fn output_dir(&self) -> PathBuf {
        self.cfg.output_dir()
    }

    /// Artifact files a stage writes.
    pub fn artifacts(&self, stage: Stage) -> Vec<String> {
        match stage {
            Stage::Ingest => vec![CORPUS_FILE.into()],
            Stage::Link => vec![ANNOTATIONS_FILE.into()],
            Stage::Label => vec![LABELS_FILE.into()],
            Stage::TrainStandard => vec![STANDARD_MODEL_FILE.into()],
            Stage::TrainLabeled => vec![LABELED_MODEL_FILE.into()],
            Stage::Report => vec![self.report_file(), REPORT_SUMMARY_FILE.into()],
        }
    }

    pub fn report_file(&self) -> String {
        format!("report.{}", self.cfg.config.report.format.extension())
    }

    pub fn run_record(&self, stage: Stage) -> Result<Option<RunRecord>, PipelineError> {
        RunRecord::read(&self.cfg.output(&stage.meta_file()))
    }

    fn source_hash(&self, key: &str) -> Result<Option<String>, PipelineError> {
        let paths = &self.cfg.config.paths;
        let file = |p: &Option<PathBuf>| -> Result<Option<String>, PipelineError> {
            match p {
                Some(p) => meta::hash_file(&self.cfg.resolve(p)).map(Some),
                None => Ok(None),
            }
        };
        match key {
            SOURCE_MANIFEST => file(&Some(paths.manifest.clone())),
            SOURCE_TEXTS => {
                let manifest = read_manifest(&self.cfg.resolve(&paths.manifest))?;
                let dir = self.cfg.resolve(&paths.corpus_dir);
                let mut listing = String::new();
                for e in &manifest {
                    let h = meta::hash_file(&dir.join(&e.filename))?;
                    listing.push_str(&format!("{}\t{h}\n", e.filename));
                }
                Ok(Some(sha256_hex(listing.as_bytes())))
            }
            SOURCE_STOPWORDS => file(&paths.stopwords),
            SOURCE_GAZETTEER => file(&paths.gazetteer),
            SOURCE_BLOCKLIST => file(&paths.blocklist),
            artifact => {
                let path = self.cfg.output(artifact);
                if path.is_file() {
                    meta::hash_file(&path).map(Some)
                } else {
                    Ok(None)
                }
            }
        }
    }

    fn stale(stage: Stage, reason: impl Into<String>) -> PipelineError {
        PipelineError::Stale {
            stage: stage.name(),
            reason: reason.into(),
            command: stage.command(),
        }
    }

    /// Checks that `stage` has run, that its configuration and recorded
    /// inputs are unchanged, and that its artifacts are intact; then does
    /// the same for everything upstream.
    pub fn ensure_fresh(&self, stage: Stage) -> Result<(), PipelineError> {
        let artifacts = self.artifacts(stage);
        let record = self.run_record(stage)?;
        let missing = |name: &str| PipelineError::MissingArtifact {
            what: stage.artifact_kind(),
            path: self.cfg.output(name),
            command: stage.command(),
        };
        let Some(record) = record else {
            return Err(missing(&artifacts[0]));
        };
        for name in &artifacts {
            let Some(current) = self.source_hash(name)? else {
                return Err(missing(name));
            };
            if record.outputs.get(name) != Some(&current) {
                if stage == Stage::Label {
                    log::warn!("{name} differs from what `ellda label` wrote; using the edited file");
                } else {
                    return Err(Self::stale(stage, format!("{name} was modified after it was written")));
                }
            }
        }
        if record.config_hash != self.cfg.config.stage_hash(stage) {
            return Err(Self::stale(stage, "configuration changed since it ran"));
        }
        for (key, recorded) in &record.inputs {
            let current = self.source_hash(key).ok().flatten();
            if current.as_ref() != Some(recorded) {
                let name = key.strip_prefix("source:").unwrap_or(key);
                return Err(Self::stale(stage, format!("input {name} changed since it ran")));
            }
        }
        for &up in stage.upstream() {
            self.ensure_fresh(up)?;
        }
        Ok(())
    }

    fn ensure_upstream(&self, stage: Stage) -> Result<(), PipelineError> {
        for &up in stage.upstream() {
            self.ensure_fresh(up)?;
        }
        Ok(())
    }

    fn write_artifact(&self, name: &str, bytes: &[u8]) -> Result<String, PipelineError> {
        let dir = self.output_dir();
        std::fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| PipelineError::io(&path, e))?;
        log::info!("wrote {}", path.display());
        Ok(sha256_hex(bytes))
    }

    fn record(
        &self,
        stage: Stage,
        started: u64,
        input_keys: &[&str],
        outputs: BTreeMap<String, String>,
        seed: Option<u64>,
    ) -> Result<(), PipelineError> {
        let mut inputs = BTreeMap::new();
        for &key in input_keys {
            if let Some(h) = self.source_hash(key)? {
                inputs.insert(key.to_owned(), h);
            }
        }
        RunRecord {
            stage: stage.name().into(),
            config_hash: self.cfg.config.stage_hash(stage),
            seed,
            inputs,
            outputs,
            started_unix: started,
            finished_unix: meta::unix_now(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
        }
        .write(&self.cfg.output(&stage.meta_file()))
    }

    fn open_artifact(&self, name: &str) -> Result<BufReader<File>, PipelineError> {
        let path = self.cfg.output(name);
        File::open(&path)
            .map(BufReader::new)
            .map_err(|e| PipelineError::io(&path, e))
    }

    fn load_corpus(&self) -> Result<Corpus, PipelineError> {
        Ok(Corpus::read_snapshot(self.open_artifact(CORPUS_FILE)?)?.0)
    }

    /// Tokenizes the manifest's documents into `corpus.txt`.
    pub fn ingest(&self) -> Result<Corpus, PipelineError> {
        let started = meta::unix_now();
        let c = &self.cfg.config;
        let stopwords = match &c.paths.stopwords {
            Some(p) => Stopwords::from_file(&self.cfg.resolve(p))?,
            None => Stopwords::english(),
        };
        let normalizer: Box<dyn TokenNormalizer> = match c.ingest.stemmer {
            Stemming::Snowball => Box::new(SnowballStemmer::default()),
            Stemming::None => Box::new(IdentityNormalizer),
        };
        let text = TextPipeline { stopwords, normalizer };
        let manifest = read_manifest(&self.cfg.resolve(&c.paths.manifest))?;
        let raw = read_raw_documents(&self.cfg.resolve(&c.paths.corpus_dir), &manifest)?;
        let corpus = Corpus::from_raw(raw, &text, c.ingest.min_count)?;
        log::info!("ingested {corpus}");
        let bytes = corpus.snapshot_bytes(&c.stage_hash(Stage::Ingest));
        let outputs = BTreeMap::from([(CORPUS_FILE.to_owned(), self.write_artifact(CORPUS_FILE, &bytes)?)]);
        self.record(
            Stage::Ingest,
            started,
            &[SOURCE_MANIFEST, SOURCE_TEXTS, SOURCE_STOPWORDS],
            outputs,
            None,
        )?;
        Ok(corpus)
    }

    /// Links entities in every document, filters them, and writes
    /// `annotations.tsv`.
    pub fn link(&self) -> Result<DocAnnotations, PipelineError> {
        self.ensure_upstream(Stage::Link)?;
        let started = meta::unix_now();
        let c = &self.cfg.config;
        let corpus = self.load_corpus()?;
        let limits = RateLimit {
            max_in_flight: c.link.max_in_flight,
            max_retries: c.link.max_retries,
            backoff_base: std::time::Duration::from_millis(c.link.backoff_ms),
        };
        let annotator: Box<dyn Annotator> = match c.link.method {
            LinkMethod::Gazetteer => {
                let path = c.paths.gazetteer.as_ref().expect("validated");
                Box::new(Gazetteer::from_file(&self.cfg.resolve(path))?)
            }
            LinkMethod::Spotlight => {
                let endpoint = c.link.endpoint.clone().expect("validated");
                let mut client = SpotlightClient::new(endpoint)
                    .with_confidence(c.link.request_confidence)
                    .with_params(c.link.params.clone());
                if let Some(dir) = &c.paths.cache_dir {
                    client = client.with_cache(AnnotationCache::new(self.cfg.resolve(dir)));
                }
                Box::new(client)
            }
        };
        let raw = annotate_documents(annotator.as_ref(), corpus.documents(), &limits)?;
        let blocklist = match &c.paths.blocklist {
            Some(p) => {
                let p = self.cfg.resolve(p);
                parse_blocklist(&std::fs::read_to_string(&p).map_err(|e| PipelineError::io(&p, e))?)
            }
            None => Default::default(),
        };
        let policy = FilterPolicy::new(c.link.min_confidence, blocklist, c.link.max_doc_fraction)?;
        let filtered = filter_annotations(&raw, &policy, corpus.len());
        log::info!(
            "linked {} annotations, {} kept after filtering",
            raw.values().map(Vec::len).sum::<usize>(),
            filtered.values().map(Vec::len).sum::<usize>()
        );
        let mut bytes = Vec::new();
        write_annotations(&mut bytes, &filtered, &c.stage_hash(Stage::Link))
            .map_err(|e| PipelineError::io(Path::new(ANNOTATIONS_FILE), e))?;
        let outputs = BTreeMap::from([(ANNOTATIONS_FILE.to_owned(), self.write_artifact(ANNOTATIONS_FILE, &bytes)?)]);
        let mut inputs = vec![CORPUS_FILE, SOURCE_BLOCKLIST];
        if c.link.method == LinkMethod::Gazetteer {
            inputs.push(SOURCE_GAZETTEER);
        }
        self.record(Stage::Link, started, &inputs, outputs, None)?;
        Ok(filtered)
    }

    /// Ranks entities by tf-idf and writes each document's top k to
    /// `labels.tsv`.
    pub fn label(&self) -> Result<Vec<crate::labels::LabelAssignment>, PipelineError> {
        self.ensure_upstream(Stage::Label)?;
        let started = meta::unix_now();
        let c = &self.cfg.config;
        let corpus = self.load_corpus()?;
        let ids: Vec<String> = corpus.documents().iter().map(|d| d.doc_id.clone()).collect();
        let annotations = read_annotations(self.open_artifact(ANNOTATIONS_FILE)?, &ids, ANNOTATIONS_FILE)?;
        let scores = compute_entity_tfidf(&annotations, corpus.len());
        let assignments = select_labels(&scores, c.label.k);
        let space = build_label_space(&assignments)?;
        log::info!("label space has {} labels", space.len());
        let mut bytes = Vec::new();
        write_labels(&mut bytes, &assignments, &scores, &c.stage_hash(Stage::Label))
            .map_err(|e| PipelineError::io(Path::new(LABELS_FILE), e))?;
        let outputs = BTreeMap::from([(LABELS_FILE.to_owned(), self.write_artifact(LABELS_FILE, &bytes)?)]);
        self.record(Stage::Label, started, &[CORPUS_FILE, ANNOTATIONS_FILE], outputs, None)?;
        Ok(assignments)
    }

    /// Trains one model, or both when `mode` is `None`.
    pub fn train(&self, mode: Option<ModelKind>) -> Result<(), PipelineError> {
        match mode {
            Some(kind) => self.train_one(kind),
            None => {
                self.train_one(ModelKind::Standard)?;
                self.train_one(ModelKind::Labeled)
            }
        }
    }

    fn train_one(&self, kind: ModelKind) -> Result<(), PipelineError> {
        let stage = match kind {
            ModelKind::Standard => Stage::TrainStandard,
            ModelKind::Labeled => Stage::TrainLabeled,
        };
        self.ensure_upstream(stage)?;
        let started = meta::unix_now();
        let c = &self.cfg.config;
        let corpus = self.load_corpus()?;
        let progress = |sweep: usize, _: &crate::inference::SamplerState| {
            if sweep % 100 == 0 {
                log::info!("{kind}: sweep {sweep}");
            }
        };
        let (model, inputs, file, config) = match kind {
            ModelKind::Standard => {
                let config = c.standard_inference();
                let model = run_inference_with(&corpus, InferenceMode::Standard, &config, progress)?;
                (model, vec![CORPUS_FILE], STANDARD_MODEL_FILE, config)
            }
            ModelKind::Labeled => {
                let config = c.labeled_inference();
                let assignments = read_labels(self.open_artifact(LABELS_FILE)?)?;
                let space = build_label_space(&assignments)?;
                let mode = InferenceMode::Labeled {
                    space: &space,
                    assignments: &assignments,
                };
                let model = run_inference_with(&corpus, mode, &config, progress)?;
                (model, vec![CORPUS_FILE, LABELS_FILE], LABELED_MODEL_FILE, config)
            }
        };
        let mut bytes = Vec::new();
        model
            .write(&mut bytes, c.train.save_top_words, &c.stage_hash(stage))
            .map_err(|e| PipelineError::io(Path::new(file), e))?;
        let outputs = BTreeMap::from([(file.to_owned(), self.write_artifact(file, &bytes)?)]);
        self.record(stage, started, &inputs, outputs, Some(config.seed))
    }

    /// Renders the comparison report in the configured format, plus
    /// `report-summary.json`.
    pub fn report(&self) -> Result<crate::report::Report, PipelineError> {
        self.ensure_upstream(Stage::Report)?;
        let started = meta::unix_now();
        let c = &self.cfg.config;
        let corpus = self.load_corpus()?;
        let assignments = read_labels(self.open_artifact(LABELS_FILE)?)?;
        let standard = TopicModelFile::read(self.open_artifact(STANDARD_MODEL_FILE)?)?;
        let labeled = TopicModelFile::read(self.open_artifact(LABELED_MODEL_FILE)?)?;
        let mut report = emit_report(&standard, &labeled, &assignments, &corpus, &c.report_options())?;
        report.summary.config_hash = c.stage_hash(Stage::Report);
        let name = self.report_file();
        let mut outputs = BTreeMap::new();
        outputs.insert(name.clone(), self.write_artifact(&name, &render(&report, c.report.format)?)?);
        outputs.insert(
            REPORT_SUMMARY_FILE.to_owned(),
            self.write_artifact(REPORT_SUMMARY_FILE, summary_json(&report.summary).as_bytes())?,
        );
        self.record(
            Stage::Report,
            started,
            &[CORPUS_FILE, LABELS_FILE, STANDARD_MODEL_FILE, LABELED_MODEL_FILE],
            outputs,
            None,
        )?;
        Ok(report)
    }

    /// Every stage in order.
    pub fn run_all(&self) -> Result<crate::report::Report, PipelineError> {
        self.ingest()?;
        self.link()?;
        self.label()?;
        self.train(None)?;
        self.report()
    }
}
