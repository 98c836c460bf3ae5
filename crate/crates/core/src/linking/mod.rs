//! Entity linking: annotation types, the offline gazetteer linker, the
//! Spotlight-compatible REST client, and the confidence/blocklist/frequency
//! filters applied before label selection.

mod cache;
mod filter;
mod gazetteer;
mod spotlight;

use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use indexmap::IndexMap;
use thiserror::Error;

use crate::corpus::Document;
use crate::tsv::{escape, unescape};

pub use cache::AnnotationCache;
pub use filter::{filter_annotations, parse_blocklist, FilterPolicy};
pub use gazetteer::{annotate_gazetteer, Gazetteer};
pub use spotlight::{annotate_remote, parse_spotlight_response, SpotlightClient, SpotlightParseError};

/// A linked mention. `offset` counts characters (not bytes) into the
/// document's raw text.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityAnnotation {
    pub entity_id: String,
    pub surface_form: String,
    pub offset: usize,
    pub confidence: f64,
}

/// Annotations per document, in corpus order.
pub type DocAnnotations = IndexMap<String, Vec<EntityAnnotation>>;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("document {doc_id:?}: annotation service failed: {message}")]
    Service {
        doc_id: String,
        message: String,
        retryable: bool,
    },
    #[error("document {doc_id:?}: malformed service response at byte {}: {}", .error.offset, .error.message)]
    Parse {
        doc_id: String,
        error: SpotlightParseError,
    },
    #[error("document {doc_id:?}: annotation {entity_id:?} at {offset} overruns the text")]
    OutOfBounds {
        doc_id: String,
        entity_id: String,
        offset: usize,
    },
    #[error("invalid filter policy: {0}")]
    Policy(String),
    #[error("{path}: line {line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl LinkError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, LinkError::Service { retryable: true, .. })
    }
}

/// Anything that can annotate a single document.
pub trait Annotator: Sync {
    fn annotate(&self, document: &Document) -> Result<Vec<EntityAnnotation>, LinkError>;
}

impl Annotator for Gazetteer {
    fn annotate(&self, document: &Document) -> Result<Vec<EntityAnnotation>, LinkError> {
        Ok(annotate_gazetteer(document, self))
    }
}

/// Concurrency and retry settings for corpus-wide annotation.
#[derive(Debug, Clone)]
pub struct RateLimit {
    pub max_in_flight: usize,
    pub max_retries: u32,
    pub backoff_base: Duration,
}

impl Default for RateLimit {
    fn default() -> Self {
        Self {
            max_in_flight: 4,
            max_retries: 4,
            backoff_base: Duration::from_millis(250),
        }
    }
}

/// Annotates every document with at most `limits.max_in_flight` concurrent
/// calls, retrying retryable failures with exponential backoff. Results are
/// returned in document order. Any document that still fails aborts the run
/// and nothing is returned for it.
pub fn annotate_documents<A: Annotator + ?Sized>(
    annotator: &A,
    documents: &[Document],
    limits: &RateLimit,
) -> Result<DocAnnotations, LinkError> {
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let results: Mutex<Vec<Option<Result<Vec<EntityAnnotation>, LinkError>>>> =
        Mutex::new((0..documents.len()).map(|_| None).collect());
    let workers = limits.max_in_flight.clamp(1, documents.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if failed.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(doc) = documents.get(i) else { break };
                let result = annotate_with_retry(annotator, doc, limits);
                if result.is_err() {
                    failed.store(true, Ordering::Relaxed);
                }
                results.lock().expect("poisoned result table")[i] = Some(result);
            });
        }
    });

    let mut results = results.into_inner().expect("poisoned result table");
    // documents left as None were skipped because another one failed
    if let Some(i) = results.iter().position(|r| matches!(r, Some(Err(_)))) {
        if let Some(Err(e)) = results.swap_remove(i) {
            return Err(e);
        }
    }
    Ok(documents
        .iter()
        .zip(results)
        .map(|(doc, r)| match r {
            Some(Ok(annotations)) => (doc.doc_id.clone(), annotations),
            _ => unreachable!("every document finished without error"),
        })
        .collect())
}

fn annotate_with_retry<A: Annotator + ?Sized>(
    annotator: &A,
    doc: &Document,
    limits: &RateLimit,
) -> Result<Vec<EntityAnnotation>, LinkError> {
    let mut attempt = 0;
    loop {
        match annotator.annotate(doc) {
            Err(e) if e.is_retryable() && attempt < limits.max_retries => {
                let delay = limits.backoff_base * 2u32.saturating_pow(attempt);
                log::warn!("{e}; retrying in {delay:?}");
                std::thread::sleep(delay);
                attempt += 1;
            }
            other => return other,
        }
    }
}

/// Checks that every annotation fits inside the document's text.
pub fn check_bounds(doc: &Document, annotations: &[EntityAnnotation]) -> Result<(), LinkError> {
    let len = doc.raw_text.chars().count();
    for a in annotations {
        if a.offset + a.surface_form.chars().count() > len {
            return Err(LinkError::OutOfBounds {
                doc_id: doc.doc_id.clone(),
                entity_id: a.entity_id.clone(),
                offset: a.offset,
            });
        }
    }
    Ok(())
}

const ANNOTATIONS_MAGIC: &str = "# ellda-annotations 1";

/// Writes annotations as tab-separated rows
/// `doc_id, entity_id, offset, confidence, surface_form` after two comment
/// header lines. Documents without annotations produce no rows.
pub fn write_annotations<W: Write>(
    mut w: W,
    annotations: &DocAnnotations,
    config_hash: &str,
) -> std::io::Result<()> {
    writeln!(w, "{ANNOTATIONS_MAGIC}")?;
    writeln!(w, "# config_hash={config_hash}")?;
    for (doc_id, list) in annotations {
        for a in list {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                escape(doc_id),
                escape(&a.entity_id),
                a.offset,
                a.confidence,
                escape(&a.surface_form)
            )?;
        }
    }
    Ok(())
}

/// Reads an annotation file back into a map holding every id in `doc_ids`
/// (in that order); rows for unknown documents are an error.
pub fn read_annotations<R: BufRead>(
    r: R,
    doc_ids: &[String],
    name: &str,
) -> Result<DocAnnotations, LinkError> {
    let mut out: DocAnnotations = doc_ids.iter().map(|id| (id.clone(), Vec::new())).collect();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|source| LinkError::Io {
            path: PathBuf::from(name),
            source,
        })?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let format_err = |message: &str| LinkError::Format {
            path: name.to_owned(),
            line: i + 1,
            message: message.to_owned(),
        };
        let fields: Vec<&str> = line.splitn(5, '\t').collect();
        let [doc_id, entity_id, offset, confidence, surface] = fields[..] else {
            return Err(format_err("expected 5 tab-separated fields"));
        };
        let doc_id = unescape(doc_id).ok_or_else(|| format_err("bad escape"))?;
        let annotation = EntityAnnotation {
            entity_id: unescape(entity_id).ok_or_else(|| format_err("bad escape"))?,
            offset: offset.parse().map_err(|_| format_err("bad offset"))?,
            confidence: confidence.parse().map_err(|_| format_err("bad confidence"))?,
            surface_form: unescape(surface).ok_or_else(|| format_err("bad escape"))?,
        };
        out.get_mut(&doc_id)
            .ok_or_else(|| format_err(&format!("unknown doc_id {doc_id:?}")))?
            .push(annotation);
    }
    Ok(out)
}
