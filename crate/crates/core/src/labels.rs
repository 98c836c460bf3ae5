//! Per-document entity ranking by tf-idf, top-k label selection, and the
//! global label/topic index.
//!
//! tf is the number of annotations of an entity in a document, df the number
//! of documents with at least one, and idf = ln(N / df). Entities present in
//! every document score zero and are never selected.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::{BufRead, Write};

use indexmap::IndexMap;
use thiserror::Error;

use crate::linking::DocAnnotations;
use crate::tsv::{escape, unescape};

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("no labels in corpus")]
    NoLabels,
    #[error("label file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityScore {
    pub entity_id: String,
    pub tf: u32,
    pub df: u32,
    pub idf: f64,
    pub score: f64,
}

/// Entity scores per document, in corpus order.
pub type DocScores = IndexMap<String, Vec<EntityScore>>;

/// Descending score, then ascending entity id.
fn rank_order(a: &EntityScore, b: &EntityScore) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.entity_id.cmp(&b.entity_id))
}

/// Scores every entity of every document. Each document's list comes back
/// in rank order. `corpus_size` must cover every document in the map.
pub fn compute_entity_tfidf(annotations: &DocAnnotations, corpus_size: usize) -> DocScores {
    assert!(
        corpus_size >= annotations.len().max(1),
        "corpus_size {corpus_size} smaller than the {} annotated documents",
        annotations.len()
    );
    let tfs: Vec<IndexMap<&str, u32>> = annotations
        .values()
        .map(|list| {
            let mut tf = IndexMap::new();
            for a in list {
                *tf.entry(a.entity_id.as_str()).or_insert(0) += 1;
            }
            tf
        })
        .collect();
    let mut df: HashMap<&str, u32> = HashMap::new();
    for tf in &tfs {
        for &e in tf.keys() {
            *df.entry(e).or_default() += 1;
        }
    }
    let n = corpus_size as f64;
    annotations
        .keys()
        .zip(tfs)
        .map(|(doc_id, tf)| {
            let mut scores: Vec<EntityScore> = tf
                .into_iter()
                .map(|(e, tf)| {
                    let df = df[e];
                    let idf = (n / df as f64).ln();
                    EntityScore {
                        entity_id: e.to_owned(),
                        tf,
                        df,
                        idf,
                        score: tf as f64 * idf,
                    }
                })
                .collect();
            scores.sort_by(rank_order);
            (doc_id.clone(), scores)
        })
        .collect()
}

/// A document's selected labels, best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAssignment {
    pub doc_id: String,
    pub labels: Vec<String>,
}

/// Keeps the `k` highest-scoring entities per document (ties broken by
/// ascending entity id, zero scores excluded). Documents left with no label
/// are kept with an empty list and logged.
pub fn select_labels(scores: &DocScores, k: usize) -> Vec<LabelAssignment> {
    assert!(k >= 1, "k must be at least 1");
    scores
        .iter()
        .map(|(doc_id, list)| {
            let mut ranked: Vec<&EntityScore> = list.iter().filter(|s| s.score > 0.0).collect();
            ranked.sort_by(|a, b| rank_order(a, b));
            let labels: Vec<String> = ranked
                .into_iter()
                .take(k)
                .map(|s| s.entity_id.clone())
                .collect();
            if labels.is_empty() {
                log::warn!("document {doc_id:?} has no positive-score entity; it will be left out of Labeled LDA");
            }
            LabelAssignment {
                doc_id: doc_id.clone(),
                labels,
            }
        })
        .collect()
}

/// Dense bijection between label entity ids and topic indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSpace {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl LabelSpace {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, entity_id: &str) -> Option<u32> {
        self.index.get(entity_id).copied()
    }

    pub fn label(&self, topic: u32) -> Option<&str> {
        self.labels.get(topic as usize).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Indexes the union of all documents' labels in first-occurrence order.
pub fn build_label_space(assignments: &[LabelAssignment]) -> Result<LabelSpace, LabelError> {
    let mut space = LabelSpace::default();
    for label in assignments.iter().flat_map(|a| &a.labels) {
        if !space.index.contains_key(label) {
            space.index.insert(label.clone(), space.labels.len() as u32);
            space.labels.push(label.clone());
        }
    }
    if space.is_empty() {
        return Err(LabelError::NoLabels);
    }
    Ok(space)
}

const LABELS_MAGIC: &str = "# ellda-labels 1";

/// One row per document: `doc_id` then up to k `entity_id:score` fields,
/// tab-separated. The file is meant to be hand-editable: rows may lose
/// fields, and a score suffix is optional on read.
pub fn write_labels<W: Write>(
    mut w: W,
    assignments: &[LabelAssignment],
    scores: &DocScores,
    config_hash: &str,
) -> std::io::Result<()> {
    writeln!(w, "{LABELS_MAGIC}")?;
    writeln!(w, "# config_hash={config_hash}")?;
    for a in assignments {
        write!(w, "{}", escape(&a.doc_id))?;
        let doc_scores = scores.get(&a.doc_id);
        for label in &a.labels {
            let score = doc_scores
                .and_then(|s| s.iter().find(|e| &e.entity_id == label))
                .map(|e| e.score);
            match score {
                Some(s) => write!(w, "\t{}:{}", escape(label), s)?,
                None => write!(w, "\t{}", escape(label))?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads a label file. A trailing `:<number>` on a field is taken as its
/// score and dropped; anything else is part of the entity id.
pub fn read_labels<R: BufRead>(r: R) -> Result<Vec<LabelAssignment>, LabelError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: &str| LabelError::Format {
            line: i + 1,
            message: message.to_owned(),
        };
        let mut fields = line.split('\t');
        let doc_id = unescape(fields.next().unwrap_or_default()).ok_or_else(|| err("bad escape"))?;
        let mut labels = Vec::new();
        for f in fields.filter(|f| !f.is_empty()) {
            let entity = match f.rsplit_once(':') {
                Some((e, s)) if s.parse::<f64>().is_ok() => e,
                _ => f,
            };
            let entity = unescape(entity).ok_or_else(|| err("bad escape"))?;
            if labels.contains(&entity) {
                return Err(err(&format!("duplicate label {entity:?}")));
            }
            labels.push(entity);
        }
        out.push(LabelAssignment { doc_id, labels });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linking::EntityAnnotation;
    use proptest::prelude::*;

    fn ann(e: &str) -> EntityAnnotation {
        EntityAnnotation {
            entity_id: e.into(),
            surface_form: e.into(),
            offset: 0,
            confidence: 1.0,
        }
    }

    fn docs(spec: &[(&str, &[(&str, usize)])]) -> DocAnnotations {
        spec.iter()
            .map(|(d, ents)| {
                let list = ents
                    .iter()
                    .flat_map(|&(e, n)| std::iter::repeat_n(ann(e), n))
                    .collect();
                (d.to_string(), list)
            })
            .collect()
    }

    fn scored(pairs: &[(&str, f64)]) -> DocScores {
        let list = pairs
            .iter()
            .map(|&(e, s)| EntityScore {
                entity_id: e.into(),
                tf: 1,
                df: 1,
                idf: s,
                score: s,
            })
            .collect();
        [("d".to_string(), list)].into_iter().collect()
    }

    #[test]
    fn tfidf_worked_example() {
        let a = docs(&[("d1", &[("E", 4)]), ("d2", &[]), ("d3", &[("E", 1)])]);
        let s = compute_entity_tfidf(&a, 3);
        let e = &s["d1"][0];
        assert_eq!((e.tf, e.df), (4, 2));
        assert!((e.idf - 0.405465).abs() < 1e-6);
        assert!((e.score - 1.621860).abs() < 1e-6);
        assert!(s["d2"].is_empty());
    }

    #[test]
    fn ubiquitous_entity_scores_zero() {
        let a = docs(&[("d1", &[("E", 2)]), ("d2", &[("E", 1)])]);
        let s = compute_entity_tfidf(&a, 2);
        assert!(s.values().all(|l| l[0].idf == 0.0 && l[0].score == 0.0));
        assert!(select_labels(&s, 5).iter().all(|a| a.labels.is_empty()));
    }

    #[test]
    fn top_five_with_ties() {
        let s = scored(&[("A", 3.2), ("C", 2.1), ("B", 2.1), ("D", 0.9), ("E", 0.5), ("F", 0.1)]);
        assert_eq!(select_labels(&s, 5)[0].labels, ["A", "B", "C", "D", "E"]);
        let s = scored(&[("B", 1.0), ("A", 1.0)]);
        assert_eq!(select_labels(&s, 1)[0].labels, ["A"]);
    }

    #[test]
    fn label_space_sizes() {
        let a = |d: &str, ls: &[&str]| LabelAssignment {
            doc_id: d.into(),
            labels: ls.iter().map(|s| s.to_string()).collect(),
        };
        let disjoint = [a("1", &["A", "B"]), a("2", &["C", "D"])];
        assert_eq!(build_label_space(&disjoint).unwrap().len(), 4);
        let same = [a("1", &["A", "B"]), a("2", &["B", "A"])];
        let space = build_label_space(&same).unwrap();
        assert_eq!(space.len(), 2);
        assert_eq!(space.index_of("B"), Some(1));
        assert!(matches!(build_label_space(&[a("1", &[])]), Err(LabelError::NoLabels)));
    }

    #[test]
    fn paper_scale_label_space() {
        // 125 documents x 5 labels; the first 60 hold 300 distinct labels,
        // the rest reuse them
        let assignments: Vec<_> = (0..125)
            .map(|d| LabelAssignment {
                doc_id: format!("party{d}"),
                labels: (0..5).map(|j| format!("E{}", (d % 60) * 5 + j)).collect(),
            })
            .collect();
        let space = build_label_space(&assignments).unwrap();
        assert_eq!(space.len(), 300);
        for i in 0..300 {
            assert_eq!(space.index_of(space.label(i).unwrap()), Some(i));
        }
    }

    #[test]
    fn label_file_round_trip_and_hand_edits() {
        let a = docs(&[("d1", &[("Basque_people", 3), ("Spain", 1)]), ("d2", &[("Spain", 2), ("Star:Trek", 1)]), ("d3", &[])]);
        let scores = compute_entity_tfidf(&a, 3);
        let assignments = select_labels(&scores, 5);
        let mut buf = Vec::new();
        write_labels(&mut buf, &assignments, &scores, "h").unwrap();
        let back = read_labels(buf.as_slice()).unwrap();
        assert_eq!(back, assignments);
        let edited = "# comment\nd1\tBasque_people\nd2\tStar:Trek:0.5\tSpain\n";
        let back = read_labels(edited.as_bytes()).unwrap();
        assert_eq!(back[1].labels, ["Star:Trek", "Spain"]);
    }

    proptest! {
        #[test]
        fn scaling_tf_keeps_ranking(
            counts in prop::collection::vec((0usize..8, 1usize..5), 1..20),
            other in prop::collection::vec(0usize..8, 0..10),
            factor in 2usize..5,
        ) {
            let build = |mult: usize| -> DocAnnotations {
                let d1: Vec<_> = counts.iter().flat_map(|&(e, n)| std::iter::repeat_n(ann(&format!("E{e}")), n * mult)).collect();
                let d2: Vec<_> = other.iter().map(|&e| ann(&format!("E{e}"))).collect();
                [("d1".to_string(), d1), ("d2".to_string(), d2), ("d3".to_string(), vec![])].into_iter().collect()
            };
            let base = select_labels(&compute_entity_tfidf(&build(1), 3), 5);
            let scaled = select_labels(&compute_entity_tfidf(&build(factor), 3), 5);
            prop_assert_eq!(&base[0], &scaled[0]);
        }
    }
}
