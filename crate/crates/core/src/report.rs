//! Per-document comparison reports: tf-idf entities, Standard LDA topics and
//! entity-labeled topics side by side.
//!
//! Only topics whose proportion is strictly above the display threshold are
//! shown. Displayed proportions are never renormalized.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::inference::TopicModelFile;
use crate::labels::LabelAssignment;
use crate::tsv::{escape_token, unescape};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("document mismatch: {0}")]
    DocMismatch(String),
    #[error("expected a {0} model file")]
    WrongModelKind(&'static str),
    #[error("{format} report line {line}: {message}")]
    Parse {
        format: &'static str,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Csv,
    Jsonl,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
            ReportFormat::Jsonl => "jsonl",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "jsonl" | "json-lines" => Ok(ReportFormat::Jsonl),
            other => Err(format!("unknown report format {other:?} (expected markdown, csv or jsonl)")),
        }
    }
}

/// Entries of a θ row strictly above `threshold`, by descending proportion
/// (ties by topic index).
pub fn threshold_topics(row: &[f64], threshold: f64) -> Vec<(usize, f64)> {
    let mut kept: Vec<(usize, f64)> = row
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, p)| p > threshold)
        .collect();
    kept.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    kept
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedTopic {
    /// Topic name: `topic_<k>` for Standard LDA, the entity label otherwise.
    pub name: String,
    pub proportion: f64,
    pub top_words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartyReport {
    pub doc_id: String,
    pub party: String,
    pub entity_ranking: Vec<String>,
    pub standard_topics: Vec<ReportedTopic>,
    pub labeled_topics: Vec<ReportedTopic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEcho {
    pub topics: usize,
    pub documents: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub averaged: bool,
    pub config_hash: String,
}

impl ModelEcho {
    fn of(model: &TopicModelFile) -> Self {
        Self {
            topics: model.num_topics(),
            documents: model.doc_ids.len(),
            alpha: model.params.alpha,
            beta: model.params.beta,
            iterations: model.params.iterations,
            burn_in: model.params.burn_in,
            seed: model.params.seed,
            averaged: model.params.averaged,
            config_hash: model.config_hash.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    /// Hash of the configuration that produced the report; empty until the
    /// caller sets it.
    #[serde(default)]
    pub config_hash: String,
    pub documents: usize,
    /// L, the size of the label space.
    pub label_space: usize,
    /// K of the Standard LDA model.
    pub standard_topics: usize,
    pub threshold: f64,
    pub top_words: usize,
    pub standard: ModelEcho,
    pub labeled: ModelEcho,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub summary: ReportSummary,
    pub parties: Vec<PartyReport>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub threshold: f64,
    /// Words shown per topic.
    pub top_words: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            threshold: 0.10,
            top_words: 5,
        }
    }
}

fn reported(model: &TopicModelFile, row: &[f64], options: &ReportOptions) -> Vec<ReportedTopic> {
    threshold_topics(row, options.threshold)
        .into_iter()
        .map(|(k, p)| ReportedTopic {
            name: model.topics[k].name.clone(),
            proportion: p,
            top_words: model.topics[k]
                .top_words
                .iter()
                .take(options.top_words)
                .map(|(w, _)| w.clone())
                .collect(),
        })
        .collect()
}

/// Builds one [`PartyReport`] per corpus document.
///
/// The Standard model must cover exactly the corpus documents in corpus
/// order. The labeled model may omit documents that had no labels; those
/// get an empty labeled column. Any other disagreement is an error.
pub fn emit_report(
    standard: &TopicModelFile,
    labeled: &TopicModelFile,
    assignments: &[LabelAssignment],
    corpus: &Corpus,
    options: &ReportOptions,
) -> Result<Report, ReportError> {
    use crate::inference::ModelKind;
    if standard.kind != ModelKind::Standard {
        return Err(ReportError::WrongModelKind("standard"));
    }
    if labeled.kind != ModelKind::Labeled {
        return Err(ReportError::WrongModelKind("labeled"));
    }
    let corpus_ids: Vec<&str> = corpus.documents().iter().map(|d| d.doc_id.as_str()).collect();
    if standard.doc_ids.len() != corpus_ids.len() || standard.doc_ids.iter().zip(&corpus_ids).any(|(a, b)| a != b) {
        return Err(ReportError::DocMismatch(
            "the standard model's documents differ from the corpus".into(),
        ));
    }
    if let Some(id) = labeled.doc_ids.iter().find(|id| corpus.document(id).is_none()) {
        return Err(ReportError::DocMismatch(format!(
            "labeled model document {id:?} is not in the corpus"
        )));
    }
    if let Some(a) = assignments.iter().find(|a| corpus.document(&a.doc_id).is_none()) {
        return Err(ReportError::DocMismatch(format!(
            "label assignment for {:?}, which is not in the corpus",
            a.doc_id
        )));
    }

    let parties = corpus
        .documents()
        .iter()
        .enumerate()
        .map(|(d, doc)| {
            let entity_ranking = assignments
                .iter()
                .find(|a| a.doc_id == doc.doc_id)
                .map(|a| a.labels.clone())
                .unwrap_or_default();
            let labeled_topics = labeled
                .doc_index(&doc.doc_id)
                .map(|i| reported(labeled, &labeled.theta_row(i), options))
                .unwrap_or_default();
            PartyReport {
                doc_id: doc.doc_id.clone(),
                party: doc.party.clone(),
                entity_ranking,
                standard_topics: reported(standard, &standard.theta_row(d), options),
                labeled_topics,
            }
        })
        .collect();

    Ok(Report {
        summary: ReportSummary {
            config_hash: String::new(),
            documents: corpus.len(),
            label_space: labeled.num_topics(),
            standard_topics: standard.num_topics(),
            threshold: options.threshold,
            top_words: options.top_words,
            standard: ModelEcho::of(standard),
            labeled: ModelEcho::of(labeled),
        },
        parties,
    })
}

/// Whole percent, halves away from zero.
pub fn percent(p: f64) -> String {
    format!("{}%", (p * 100.0).round() as i64)
}

fn display_entity(id: &str) -> String {
    id.replace('_', " ")
}

fn md_cell(s: &str) -> String {
    s.replace('\\', "\\\\").replace('|', "\\|").replace('\n', " ")
}

/// Renders the report as Markdown: a summary, then one three-column table
/// per document.
pub fn render_markdown(report: &Report) -> String {
    let s = &report.summary;
    let mut out = String::new();
    out.push_str("# Topic report\n\n");
    if !s.config_hash.is_empty() {
        let _ = writeln!(out, "- config_hash: {}", s.config_hash);
    }
    let _ = writeln!(out, "- documents: {}", s.documents);
    let _ = writeln!(out, "- label space (L): {}", s.label_space);
    let _ = writeln!(out, "- standard topics (K): {}", s.standard_topics);
    let _ = writeln!(out, "- display threshold: proportion > {}", s.threshold);
    for (name, m) in [("standard", &s.standard), ("labeled", &s.labeled)] {
        let _ = writeln!(
            out,
            "- {name} model: alpha={} beta={} iterations={} burn_in={} seed={} averaged={} config_hash={}",
            m.alpha, m.beta, m.iterations, m.burn_in, m.seed, m.averaged, m.config_hash
        );
    }
    for p in &report.parties {
        let _ = write!(out, "\n## {}", md_cell(&p.party));
        if p.party != p.doc_id {
            let _ = write!(out, " ({})", md_cell(&p.doc_id));
        }
        out.push_str("\n\n| tf-idf entities | Standard LDA topics | Entity-labeled topics |\n|---|---|---|\n");
        let rows = p
            .entity_ranking
            .len()
            .max(p.standard_topics.len())
            .max(p.labeled_topics.len())
            .max(1);
        for i in 0..rows {
            let entity = p.entity_ranking.get(i).map(|e| display_entity(e)).unwrap_or_default();
            let standard = p
                .standard_topics
                .get(i)
                .map(|t| format!("{} {}", percent(t.proportion), t.top_words.join(", ")))
                .unwrap_or_default();
            let labeled = p
                .labeled_topics
                .get(i)
                .map(|t| format!("{}, {}", display_entity(&t.name), percent(t.proportion)))
                .unwrap_or_default();
            let _ = writeln!(out, "| {} | {} | {} |", md_cell(&entity), md_cell(&standard), md_cell(&labeled));
        }
    }
    out
}

/// CSV header; see [`write_csv`].
pub const CSV_HEADER: [&str; 7] = ["doc_id", "party", "column", "rank", "name", "proportion", "top_words"];

/// Writes one row per displayed cell. `column` is one of `document` (a
/// single marker row per document, so documents with nothing to show
/// survive a round trip), `entity`, `standard` or `labeled`. `rank` counts
/// from 1 within a column. `proportion` is empty for entities; `top_words`
/// is space-separated with spaces inside words escaped.
pub fn write_csv<W: Write>(w: W, parties: &[PartyReport]) -> Result<(), ReportError> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let map_err = |e: csv::Error| ReportError::Io(std::io::Error::other(e));
    out.write_record(CSV_HEADER).map_err(map_err)?;
    for p in parties {
        out.write_record([p.doc_id.as_str(), &p.party, "document", "0", "", "", ""])
            .map_err(map_err)?;
        for (i, e) in p.entity_ranking.iter().enumerate() {
            out.write_record([p.doc_id.as_str(), &p.party, "entity", &(i + 1).to_string(), e, "", ""])
                .map_err(map_err)?;
        }
        for (column, topics) in [("standard", &p.standard_topics), ("labeled", &p.labeled_topics)] {
            for (i, t) in topics.iter().enumerate() {
                let words: Vec<String> = t.top_words.iter().map(|w| escape_token(w)).collect();
                out.write_record([
                    p.doc_id.as_str(),
                    &p.party,
                    column,
                    &(i + 1).to_string(),
                    &t.name,
                    &t.proportion.to_string(),
                    &words.join(" "),
                ])
                .map_err(map_err)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<PartyReport>, ReportError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let err = |line: usize, message: String| ReportError::Parse {
        format: "csv",
        line,
        message,
    };
    let header = rdr.headers().map_err(|e| err(1, e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(err(1, format!("expected header {}", CSV_HEADER.join(","))));
    }
    let mut parties: Vec<PartyReport> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| err(line, e.to_string()))?;
        if rec.len() != CSV_HEADER.len() {
            return Err(err(line, format!("expected {} fields", CSV_HEADER.len())));
        }
        let (doc_id, party, column, rank, name) = (&rec[0], &rec[1], &rec[2], &rec[3], &rec[4]);
        if column == "document" {
            parties.push(PartyReport {
                doc_id: doc_id.to_owned(),
                party: party.to_owned(),
                entity_ranking: Vec::new(),
                standard_topics: Vec::new(),
                labeled_topics: Vec::new(),
            });
            continue;
        }
        let p = match parties.last_mut() {
            Some(p) if p.doc_id == doc_id => p,
            _ => return Err(err(line, format!("row for {doc_id:?} outside its document block"))),
        };
        let rank: usize = rank.parse().map_err(|_| err(line, format!("bad rank {rank:?}")))?;
        let expected = match column {
            "entity" => p.entity_ranking.len(),
            "standard" => p.standard_topics.len(),
            "labeled" => p.labeled_topics.len(),
            other => return Err(err(line, format!("unknown column {other:?}"))),
        } + 1;
        if rank != expected {
            return Err(err(line, format!("expected rank {expected}, found {rank}")));
        }
        if column == "entity" {
            p.entity_ranking.push(name.to_owned());
            continue;
        }
        let proportion: f64 = rec[5]
            .parse()
            .map_err(|_| err(line, format!("bad proportion {:?}", &rec[5])))?;
        let top_words = rec[6]
            .split_whitespace()
            .map(|w| unescape(w).ok_or_else(|| err(line, format!("bad escape in {w:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let topic = ReportedTopic {
            name: name.to_owned(),
            proportion,
            top_words,
        };
        if column == "standard" {
            p.standard_topics.push(topic);
        } else {
            p.labeled_topics.push(topic);
        }
    }
    Ok(parties)
}

/// One JSON object per line, one line per document.
pub fn write_jsonl<W: Write>(mut w: W, parties: &[PartyReport]) -> Result<(), ReportError> {
    for p in parties {
        serde_json::to_writer(&mut w, p).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<PartyReport>, ReportError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ReportError::Parse {
            format: "jsonl",
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// The report in the requested format.
pub fn render(report: &Report, format: ReportFormat) -> Result<Vec<u8>, ReportError> {
    let mut buf = Vec::new();
    match format {
        ReportFormat::Markdown => buf.extend_from_slice(render_markdown(report).as_bytes()),
        ReportFormat::Csv => write_csv(&mut buf, &report.parties)?,
        ReportFormat::Jsonl => write_jsonl(&mut buf, &report.parties)?,
    }
    Ok(buf)
}

/// The summary as pretty JSON, for the formats that carry only documents.
pub fn summary_json(summary: &ReportSummary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Vocabulary};
    use crate::inference::{ModelKind, ModelParams, TopicSummary};
    use proptest::prelude::*;

    #[test]
    fn threshold_keeps_strictly_greater() {
        let kept = threshold_topics(&[0.47, 0.34, 0.14, 0.05], 0.10);
        assert_eq!(kept, vec![(0, 0.47), (1, 0.34), (2, 0.14)]);
        assert_eq!(threshold_topics(&[0.1, 0.9], 0.1), vec![(1, 0.9)]);
        assert_eq!(threshold_topics(&[1.0], 0.10), vec![(0, 1.0)]);
        assert!(threshold_topics(&vec![1.0 / 300.0; 300], 0.10).is_empty());
        assert!(threshold_topics(&[1.0], 1.0).is_empty());
    }

    #[test]
    fn threshold_sorts_descending_with_index_ties() {
        let kept = threshold_topics(&[0.2, 0.4, 0.2, 0.2], 0.1);
        assert_eq!(kept, vec![(1, 0.4), (0, 0.2), (2, 0.2), (3, 0.2)]);
    }

    #[test]
    fn percent_rounds_to_nearest() {
        assert_eq!(percent(0.47), "47%");
        assert_eq!(percent(0.345), "35%");
        assert_eq!(percent(1.0), "100%");
        assert_eq!(percent(0.004), "0%");
    }

    fn params() -> ModelParams {
        ModelParams {
            alpha: 0.5,
            beta: 0.01,
            iterations: 10,
            burn_in: 2,
            seed: 42,
            averaged: false,
        }
    }

    fn model(kind: ModelKind, ids: &[&str], theta: Vec<Vec<(usize, f64)>>, names: &[&str]) -> TopicModelFile {
        TopicModelFile {
            kind,
            config_hash: "abc".into(),
            vocab_size: 3,
            params: params(),
            doc_ids: ids.iter().map(|s| s.to_string()).collect(),
            theta,
            topics: names
                .iter()
                .map(|n| TopicSummary {
                    name: n.to_string(),
                    top_words: vec![("farm".into(), 0.5), ("food".into(), 0.3), ("trade".into(), 0.2)],
                })
                .collect(),
        }
    }

    fn corpus(ids: &[(&str, &str)]) -> Corpus {
        let docs = ids
            .iter()
            .map(|(id, party)| Document {
                doc_id: id.to_string(),
                party: party.to_string(),
                raw_text: "farm".into(),
                tokens: vec![0],
            })
            .collect();
        Corpus::new(docs, Vocabulary::from_terms(["farm", "food", "trade"])).unwrap()
    }

    fn sample_report() -> Report {
        let c = corpus(&[("fr-verts", "Les Verts"), ("es-pnv", "PNV"), ("empty", "Nobody")]);
        let standard = model(
            ModelKind::Standard,
            &["fr-verts", "es-pnv", "empty"],
            vec![
                vec![(0, 0.6), (1, 0.4)],
                vec![(0, 0.05), (1, 0.95)],
                vec![(0, 0.5), (1, 0.5)],
            ],
            &["topic_0", "topic_1"],
        );
        let labeled = model(
            ModelKind::Labeled,
            &["fr-verts", "es-pnv"],
            vec![
                vec![(0, 0.47), (1, 0.34), (2, 0.14), (3, 0.05)],
                vec![(4, 1.0)],
            ],
            &["Consumer", "Genetically_modified_organism", "Development_aid", "Biodiversity", "Basque_people"],
        );
        let assignments = vec![
            LabelAssignment {
                doc_id: "fr-verts".into(),
                labels: vec!["Consumer".into(), "Genetically_modified_organism".into()],
            },
            LabelAssignment {
                doc_id: "es-pnv".into(),
                labels: vec!["Basque_people".into()],
            },
        ];
        emit_report(&standard, &labeled, &assignments, &c, &ReportOptions::default()).unwrap()
    }

    #[test]
    fn report_columns() {
        let r = sample_report();
        assert_eq!(r.summary.label_space, 5);
        assert_eq!(r.summary.standard_topics, 2);
        let verts = &r.parties[0];
        let labeled: Vec<&str> = verts.labeled_topics.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(labeled, ["Consumer", "Genetically_modified_organism", "Development_aid"]);
        assert_eq!(verts.standard_topics.len(), 2);
        let pnv = &r.parties[1];
        assert_eq!(pnv.labeled_topics.len(), 1);
        assert_eq!(pnv.labeled_topics[0].proportion, 1.0);
        assert_eq!(pnv.standard_topics[0].name, "topic_1");
        let empty = &r.parties[2];
        assert!(empty.labeled_topics.is_empty() && empty.entity_ranking.is_empty());
    }

    #[test]
    fn markdown_layout() {
        let md = render_markdown(&sample_report());
        assert!(md.contains("## Les Verts (fr-verts)"));
        assert!(md.contains("| tf-idf entities | Standard LDA topics | Entity-labeled topics |"));
        assert!(md.contains("| Consumer | 60% farm, food, trade | Consumer, 47% |"));
        assert!(md.contains("| Genetically modified organism | 40% farm, food, trade | Genetically modified organism, 34% |"));
        assert!(md.contains("|  |  | Development aid, 14% |"));
        assert!(md.contains("Basque people, 100%"));
        assert!(!md.contains("Biodiversity"));
    }

    #[test]
    fn single_document_report_has_one_section() {
        let c = corpus(&[("only", "Only")]);
        let s = model(ModelKind::Standard, &["only"], vec![vec![(0, 1.0)]], &["topic_0"]);
        let l = model(ModelKind::Labeled, &["only"], vec![vec![(0, 1.0)]], &["X"]);
        let r = emit_report(&s, &l, &[], &c, &ReportOptions::default()).unwrap();
        assert_eq!(render_markdown(&r).matches("\n## ").count(), 1);
    }

    #[test]
    fn mismatched_documents_are_fatal() {
        let c = corpus(&[("a", "A"), ("b", "B")]);
        let l = model(ModelKind::Labeled, &["a"], vec![vec![(0, 1.0)]], &["X"]);
        let s = model(ModelKind::Standard, &["b", "a"], vec![vec![(0, 1.0)]; 2], &["topic_0"]);
        assert!(matches!(
            emit_report(&s, &l, &[], &c, &ReportOptions::default()),
            Err(ReportError::DocMismatch(_))
        ));
        let s = model(ModelKind::Standard, &["a", "b"], vec![vec![(0, 1.0)]; 2], &["topic_0"]);
        let stray = model(ModelKind::Labeled, &["z"], vec![vec![(0, 1.0)]], &["X"]);
        assert!(matches!(
            emit_report(&s, &stray, &[], &c, &ReportOptions::default()),
            Err(ReportError::DocMismatch(_))
        ));
        assert!(matches!(
            emit_report(&l, &s, &[], &c, &ReportOptions::default()),
            Err(ReportError::WrongModelKind(_))
        ));
    }

    #[test]
    fn csv_and_jsonl_round_trip() {
        let r = sample_report();
        let mut buf = Vec::new();
        write_csv(&mut buf, &r.parties).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("doc_id,party,column,rank,name,proportion,top_words\n"));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), r.parties);
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &r.parties).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 3);
        assert_eq!(read_jsonl(buf.as_slice()).unwrap(), r.parties);
    }

    #[test]
    fn csv_rejects_orphan_rows() {
        let text = "doc_id,party,column,rank,name,proportion,top_words\na,A,entity,1,X,,\n";
        assert!(matches!(read_csv(text.as_bytes()), Err(ReportError::Parse { line: 2, .. })));
    }

    fn arb_topic() -> impl Strategy<Value = ReportedTopic> {
        ("[a-z_ ,\"]{1,8}", 0.0f64..1.0, prop::collection::vec("[a-z ]{1,6}", 0..4)).prop_map(
            |(name, proportion, top_words)| ReportedTopic {
                name,
                proportion,
                top_words,
            },
        )
    }

    fn arb_party() -> impl Strategy<Value = PartyReport> {
        (
            "[a-z0-9,\"-]{1,6}",
            "[A-Za-z ,]{0,10}",
            prop::collection::vec("[A-Za-z_,]{1,8}", 0..5),
            prop::collection::vec(arb_topic(), 0..4),
            prop::collection::vec(arb_topic(), 0..4),
        )
            .prop_map(|(doc_id, party, entity_ranking, standard_topics, labeled_topics)| PartyReport {
                doc_id,
                party,
                entity_ranking,
                standard_topics,
                labeled_topics,
            })
    }

    proptest! {
        #[test]
        fn formats_round_trip(mut parties in prop::collection::vec(arb_party(), 0..5)) {
            for (i, p) in parties.iter_mut().enumerate() {
                p.doc_id = format!("{i}{}", p.doc_id);
            }
            let mut buf = Vec::new();
            write_csv(&mut buf, &parties).unwrap();
            prop_assert_eq!(&read_csv(buf.as_slice()).unwrap(), &parties);
            let mut buf = Vec::new();
            write_jsonl(&mut buf, &parties).unwrap();
            prop_assert_eq!(&read_jsonl(buf.as_slice()).unwrap(), &parties);
        }

        #[test]
        fn threshold_soundness(raw in prop::collection::vec(0.0f64..1.0, 1..20), t in 0.0f64..1.0) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 0.0);
            let row: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let kept = threshold_topics(&row, t);
            prop_assert!(kept.iter().all(|&(_, p)| p > t));
            prop_assert!(kept.windows(2).all(|w| w[0].1 >= w[1].1));
            prop_assert!(kept.iter().map(|&(_, p)| p).sum::<f64>() <= 1.0 + 1e-9);
            prop_assert_eq!(kept.len(), row.iter().filter(|&&p| p > t).count());
        }
    }
}
