//! Standard and Labeled LDA by collapsed Gibbs sampling.
//!
//! Both modes share one sampler. Standard LDA lets every document use all
//! K topics; Labeled LDA gives each topic an entity label and restricts a
//! document to the topics of its own labels.

mod model;
mod state;

use std::collections::HashSet;

use ndarray::Array2;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::labels::{LabelAssignment, LabelSpace};

pub use model::{estimate_model, ModelKind, ModelParams, TopicModel, TopicModelFile, TopicSummary};
pub use state::{SamplerState, Smoothing};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("invalid inference configuration: {0}")]
    Config(String),
    #[error("document {0} has an empty allowed topic set")]
    EmptyAllowedSet(String),
    #[error("labeled mode needs a non-empty label space")]
    EmptyLabelSpace,
    #[error("label assignment for unknown document {0:?}")]
    UnknownDocument(String),
    #[error("document {doc_id:?}: label {label:?} is not in the label space")]
    UnknownLabel { doc_id: String, label: String },
    #[error("model file line {line}: {message}")]
    ModelFile { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceConfig {
    /// K for Standard LDA; Labeled LDA takes its topic count from the label
    /// space instead.
    pub topics: usize,
    /// Document-topic smoothing; `None` means 50 / (total topic count).
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Estimate from counts averaged over every post-burn-in sweep instead
    /// of from the final state alone.
    pub average_samples: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            topics: 300,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            burn_in: 200,
            seed: 42,
            average_samples: false,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<(), InferenceError> {
        let bad = |m: String| Err(InferenceError::Config(m));
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return bad(format!("alpha must be positive, got {a}"));
            }
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if self.iterations < 1 {
            return bad("iterations must be at least 1".into());
        }
        if self.burn_in >= self.iterations {
            return bad(format!(
                "burn_in {} must be below iterations {}",
                self.burn_in, self.iterations
            ));
        }
        Ok(())
    }

    pub fn alpha_for(&self, total_topics: usize) -> f64 {
        self.alpha.unwrap_or(50.0 / total_topics as f64)
    }

    fn smoothing(&self, total_topics: usize) -> Smoothing {
        Smoothing {
            alpha: self.alpha_for(total_topics),
            beta: self.beta,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum InferenceMode<'a> {
    Standard,
    Labeled {
        space: &'a LabelSpace,
        assignments: &'a [LabelAssignment],
    },
}

/// Running sums of count tables over post-burn-in sweeps.
pub(crate) struct CountAverages {
    samples: usize,
    doc_topic: Array2<f64>,
    word_topic: Array2<f64>,
}

impl CountAverages {
    fn new(state: &SamplerState) -> Self {
        Self {
            samples: 0,
            doc_topic: Array2::zeros((state.num_docs(), state.num_topics())),
            word_topic: Array2::zeros((state.num_topics(), state.vocab_size())),
        }
    }

    fn add(&mut self, state: &SamplerState) {
        self.samples += 1;
        for d in 0..state.num_docs() {
            for (k, &n) in state.doc_topic_row(d).iter().enumerate() {
                self.doc_topic[[d, k]] += n as f64;
            }
        }
        for w in 0..state.vocab_size() {
            for &(k, n) in state.word_topic_entries(w) {
                self.word_topic[[k as usize, w]] += n as f64;
            }
        }
    }

    pub(crate) fn means(&self) -> (Array2<f64>, Array2<f64>) {
        let s = self.samples.max(1) as f64;
        (&self.doc_topic / s, &self.word_topic / s)
    }
}

/// Runs `config.iterations` sweeps, calling `observer(sweep, state)` after
/// each (sweeps numbered from 1).
pub fn run_chain<F>(
    state: &mut SamplerState,
    config: &InferenceConfig,
    mut observer: F,
) -> Option<(Array2<f64>, Array2<f64>)>
where
    F: FnMut(usize, &SamplerState),
{
    let smoothing = config.smoothing(state.num_topics());
    let mut averages = config.average_samples.then(|| CountAverages::new(state));
    for sweep in 1..=config.iterations {
        state.sweep(smoothing);
        if sweep > config.burn_in {
            if let Some(avg) = averages.as_mut() {
                avg.add(state);
            }
        }
        observer(sweep, state);
    }
    averages.map(|a| a.means())
}

/// Documents and admissible topics for a mode: (corpus index, allowed set).
fn plan(
    corpus: &Corpus,
    mode: &InferenceMode<'_>,
    config: &InferenceConfig,
) -> Result<(usize, Vec<String>, Vec<(usize, Vec<u32>)>), InferenceError> {
    match mode {
        InferenceMode::Standard => {
            if config.topics == 0 {
                return Err(InferenceError::Config("topics must be at least 1".into()));
            }
            let all: Vec<u32> = (0..config.topics as u32).collect();
            let names = (0..config.topics).map(|k| format!("topic_{k}")).collect();
            let docs = (0..corpus.len()).map(|d| (d, all.clone())).collect();
            Ok((config.topics, names, docs))
        }
        InferenceMode::Labeled { space, assignments } => {
            if space.is_empty() {
                return Err(InferenceError::EmptyLabelSpace);
            }
            let mut seen = HashSet::new();
            let mut docs = Vec::new();
            for a in assignments.iter() {
                let d = corpus
                    .documents()
                    .iter()
                    .position(|doc| doc.doc_id == a.doc_id)
                    .ok_or_else(|| InferenceError::UnknownDocument(a.doc_id.clone()))?;
                if !seen.insert(d) {
                    return Err(InferenceError::Config(format!(
                        "duplicate label assignment for {:?}",
                        a.doc_id
                    )));
                }
                if a.labels.is_empty() {
                    log::warn!("document {:?} has no labels and is left out of Labeled LDA", a.doc_id);
                    continue;
                }
                let allowed = a
                    .labels
                    .iter()
                    .map(|l| {
                        space.index_of(l).ok_or_else(|| InferenceError::UnknownLabel {
                            doc_id: a.doc_id.clone(),
                            label: l.clone(),
                        })
                    })
                    .collect::<Result<Vec<u32>, _>>()?;
                docs.push((d, allowed));
            }
            // corpus order, independent of assignment order
            docs.sort_by_key(|(d, _)| *d);
            if docs.is_empty() {
                return Err(InferenceError::EmptyLabelSpace);
            }
            Ok((space.len(), space.labels().to_vec(), docs))
        }
    }
}

/// Initializes a chain, runs every sweep, and estimates θ and φ.
pub fn run_inference(
    corpus: &Corpus,
    mode: InferenceMode<'_>,
    config: &InferenceConfig,
) -> Result<TopicModel, InferenceError> {
    run_inference_with(corpus, mode, config, |_, _| {})
}

/// [`run_inference`] with a per-sweep observer.
pub fn run_inference_with<F>(
    corpus: &Corpus,
    mode: InferenceMode<'_>,
    config: &InferenceConfig,
    observer: F,
) -> Result<TopicModel, InferenceError>
where
    F: FnMut(usize, &SamplerState),
{
    config.validate()?;
    let (total_topics, topic_names, plan) = plan(corpus, &mode, config)?;
    let docs: Vec<Vec<u32>> = plan
        .iter()
        .map(|(d, _)| corpus.documents()[*d].tokens.clone())
        .collect();
    let doc_ids: Vec<String> = plan
        .iter()
        .map(|(d, _)| corpus.documents()[*d].doc_id.clone())
        .collect();
    let allowed = plan.into_iter().map(|(_, a)| a).collect();
    let mut state = SamplerState::new(
        docs,
        corpus.vocabulary().len(),
        total_topics,
        allowed,
        config.seed,
    )
    .map_err(|e| match e {
        InferenceError::EmptyAllowedSet(i) => {
            let i: usize = i.parse().unwrap_or_default();
            InferenceError::EmptyAllowedSet(doc_ids.get(i).cloned().unwrap_or_default())
        }
        other => other,
    })?;
    let averaged = run_chain(&mut state, config, observer);
    let kind = match mode {
        InferenceMode::Standard => ModelKind::Standard,
        InferenceMode::Labeled { .. } => ModelKind::Labeled,
    };
    Ok(estimate_model(
        &state,
        averaged.as_ref(),
        config,
        kind,
        doc_ids,
        topic_names,
        corpus.vocabulary().terms().to_vec(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Vocabulary};
    use proptest::prelude::*;

    fn toy_corpus(docs: &[&[u32]], vocab: usize) -> Corpus {
        let documents = docs
            .iter()
            .enumerate()
            .map(|(i, t)| Document {
                doc_id: format!("d{i}"),
                party: format!("p{i}"),
                raw_text: String::new(),
                tokens: t.to_vec(),
            })
            .collect();
        Corpus::new(documents, Vocabulary::from_terms((0..vocab).map(|w| format!("w{w}")))).unwrap()
    }

    fn small_config(iterations: usize) -> InferenceConfig {
        InferenceConfig {
            topics: 3,
            alpha: Some(0.5),
            beta: 0.1,
            iterations,
            burn_in: 0,
            seed: 7,
            average_samples: false,
        }
    }

    #[test]
    fn config_validation() {
        assert!(InferenceConfig::default().validate().is_ok());
        let c = InferenceConfig { burn_in: 10, iterations: 10, ..Default::default() };
        assert!(c.validate().is_err());
        let c = InferenceConfig { beta: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = InferenceConfig { alpha: Some(-1.0), ..Default::default() };
        assert!(c.validate().is_err());
        assert!((InferenceConfig::default().alpha_for(300) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn singleton_allowed_set_pins_tokens() {
        let mut s = SamplerState::new(vec![vec![0, 1, 2, 1]], 3, 5, vec![vec![3]], 1).unwrap();
        assert!(s.assignments(0).iter().all(|&k| k == 3));
        s.sweep(Smoothing { alpha: 0.1, beta: 0.1 });
        assert!(s.assignments(0).iter().all(|&k| k == 3));
    }

    #[test]
    fn empty_allowed_set_rejected() {
        let err = SamplerState::new(vec![vec![0]], 1, 2, vec![vec![]], 1).unwrap_err();
        assert!(matches!(err, InferenceError::EmptyAllowedSet(_)));
        let err = SamplerState::new(vec![vec![0]], 1, 2, vec![vec![2]], 1).unwrap_err();
        assert!(matches!(err, InferenceError::Config(_)));
    }

    #[test]
    fn equal_seeds_equal_init() {
        let docs = vec![vec![0, 1, 2, 3, 4, 5], vec![5, 4, 3]];
        let a = SamplerState::new(docs.clone(), 6, 4, vec![vec![0, 1, 2, 3], vec![1, 2]], 9).unwrap();
        let b = SamplerState::new(docs, 6, 4, vec![vec![0, 1, 2, 3], vec![1, 2]], 9).unwrap();
        assert_eq!(a.assignments(0), b.assignments(0));
        assert_eq!(a.assignments(1), b.assignments(1));
        a.check_invariants().unwrap();
    }

    #[test]
    fn labeled_with_full_sets_matches_standard() {
        let corpus = toy_corpus(&[&[0, 1, 2, 0, 1], &[3, 4, 3, 4, 2], &[0, 4, 1, 3]], 5);
        let config = small_config(20);
        let standard = run_inference(&corpus, InferenceMode::Standard, &config).unwrap();
        let assignments: Vec<_> = corpus
            .documents()
            .iter()
            .map(|d| LabelAssignment {
                doc_id: d.doc_id.clone(),
                labels: vec!["c".into(), "a".into(), "b".into()],
            })
            .collect();
        // label order a, b, c -> indices 0, 1, 2 regardless of per-doc order
        let space = crate::labels::build_label_space(&[LabelAssignment {
            doc_id: "x".into(),
            labels: vec!["a".into(), "b".into(), "c".into()],
        }])
        .unwrap();
        let labeled = run_inference(
            &corpus,
            InferenceMode::Labeled { space: &space, assignments: &assignments },
            &config,
        )
        .unwrap();
        assert_eq!(standard.theta, labeled.theta);
        assert_eq!(standard.phi, labeled.phi);
    }

    #[test]
    fn standard_single_topic_theta_is_one() {
        let corpus = toy_corpus(&[&[0, 1], &[1, 1, 0]], 2);
        let config = InferenceConfig { topics: 1, ..small_config(3) };
        let m = run_inference(&corpus, InferenceMode::Standard, &config).unwrap();
        assert!(m.theta.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn labeled_skips_unlabeled_documents() {
        let corpus = toy_corpus(&[&[0, 1], &[1, 1, 0]], 2);
        let assignments = vec![
            LabelAssignment { doc_id: "d0".into(), labels: vec!["A".into()] },
            LabelAssignment { doc_id: "d1".into(), labels: vec![] },
        ];
        let space = crate::labels::build_label_space(&assignments).unwrap();
        let m = run_inference(
            &corpus,
            InferenceMode::Labeled { space: &space, assignments: &assignments },
            &small_config(2),
        )
        .unwrap();
        assert_eq!(m.doc_ids, ["d0"]);
        assert_eq!(m.topic_names, ["A"]);
    }

    #[test]
    fn labeled_unknown_label_or_document() {
        let corpus = toy_corpus(&[&[0, 1]], 2);
        let space = crate::labels::build_label_space(&[LabelAssignment {
            doc_id: "d0".into(),
            labels: vec!["A".into()],
        }])
        .unwrap();
        let bad_label = vec![LabelAssignment { doc_id: "d0".into(), labels: vec!["B".into()] }];
        let err = run_inference(
            &corpus,
            InferenceMode::Labeled { space: &space, assignments: &bad_label },
            &small_config(1),
        )
        .unwrap_err();
        assert!(matches!(err, InferenceError::UnknownLabel { .. }));
        let bad_doc = vec![LabelAssignment { doc_id: "zz".into(), labels: vec!["A".into()] }];
        let err = run_inference(
            &corpus,
            InferenceMode::Labeled { space: &space, assignments: &bad_doc },
            &small_config(1),
        )
        .unwrap_err();
        assert!(matches!(err, InferenceError::UnknownDocument(_)));
    }

    #[test]
    fn averaging_produces_normalized_model() {
        let corpus = toy_corpus(&[&[0, 1, 2, 0, 1], &[3, 4, 3, 4, 2]], 5);
        let config = InferenceConfig { average_samples: true, burn_in: 5, ..small_config(15) };
        let m = run_inference(&corpus, InferenceMode::Standard, &config).unwrap();
        for row in m.theta.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
        for row in m.phi.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn sweeps_preserve_counts_and_restrictions(
            docs in prop::collection::vec(prop::collection::vec(0u32..12, 0..25), 1..6),
            restrict in prop::collection::vec(prop::collection::vec(0u32..6, 1..4), 6),
            full_mask in prop::collection::vec(any::<bool>(), 6),
            seed in any::<u64>(),
        ) {
            let allowed: Vec<Vec<u32>> = (0..docs.len())
                .map(|d| if full_mask[d] { (0..6).collect() } else { restrict[d].clone() })
                .collect();
            let mut s = SamplerState::new(docs.clone(), 12, 6, allowed, seed).unwrap();
            let sm = Smoothing { alpha: 0.3, beta: 0.05 };
            for _ in 0..5 {
                s.sweep(sm);
                prop_assert!(s.check_invariants().is_ok());
                for (d, doc) in docs.iter().enumerate() {
                    let row_sum: u32 = s.doc_topic_row(d).iter().sum();
                    prop_assert_eq!(row_sum as usize, doc.len());
                }
                let totals: u32 = (0..6).map(|k| s.topic_total(k)).sum();
                prop_assert_eq!(totals as usize, docs.iter().map(Vec::len).sum::<usize>());
            }
        }
    }
}
