use std::cmp::Ordering;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use ndarray::Array2;

use crate::tsv::{escape, escape_token, unescape};

use super::{InferenceConfig, InferenceError, SamplerState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Standard,
    Labeled,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Standard => "standard",
            ModelKind::Labeled => "labeled",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(ModelKind::Standard),
            "labeled" => Ok(ModelKind::Labeled),
            other => Err(format!("unknown model kind {other:?}")),
        }
    }
}

/// Settings a model was trained with, echoed into its file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub averaged: bool,
}

/// Point estimates of θ (documents x topics) and φ (topics x words).
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub kind: ModelKind,
    pub doc_ids: Vec<String>,
    pub topic_names: Vec<String>,
    pub terms: Vec<String>,
    pub theta: Array2<f64>,
    pub phi: Array2<f64>,
    pub params: ModelParams,
}

/// θ and φ from the sampler's counts (or from averaged counts when given).
///
/// `theta[d][k] = (n_dk + α) / (n_d + |A_d| α)` for topics k in the
/// document's allowed set A_d and 0 elsewhere. For an unrestricted document
/// this is the usual smoothed estimate; for a labeled one it is that
/// estimate renormalized over the document's labels.
/// `phi[k][w] = (n_kw + β) / (n_k + V β)`.
pub fn estimate_model(
    state: &SamplerState,
    averaged: Option<&(Array2<f64>, Array2<f64>)>,
    config: &InferenceConfig,
    kind: ModelKind,
    doc_ids: Vec<String>,
    topic_names: Vec<String>,
    terms: Vec<String>,
) -> TopicModel {
    let k_total = state.num_topics();
    let v = state.vocab_size();
    let alpha = config.alpha_for(k_total);
    let beta = config.beta;

    let mut theta = Array2::zeros((state.num_docs(), k_total));
    for d in 0..state.num_docs() {
        let allowed = state.allowed(d);
        let denom = state.doc_len(d) as f64 + allowed.len() as f64 * alpha;
        for &k in allowed {
            let k = k as usize;
            let n = match averaged {
                Some((dt, _)) => dt[[d, k]],
                None => state.doc_topic_count(d, k) as f64,
            };
            theta[[d, k]] = (n + alpha) / denom;
        }
    }

    let mut phi = Array2::zeros((k_total, v));
    match averaged {
        Some((_, wt)) => {
            for k in 0..k_total {
                let total: f64 = wt.row(k).sum();
                let denom = total + v as f64 * beta;
                for w in 0..v {
                    phi[[k, w]] = (wt[[k, w]] + beta) / denom;
                }
            }
        }
        None => {
            for k in 0..k_total {
                let fill = beta / (state.topic_total(k) as f64 + v as f64 * beta);
                phi.row_mut(k).fill(fill);
            }
            for w in 0..v {
                for &(k, n) in state.word_topic_entries(w) {
                    let k = k as usize;
                    phi[[k, w]] = (n as f64 + beta) / (state.topic_total(k) as f64 + v as f64 * beta);
                }
            }
        }
    }

    TopicModel {
        kind,
        doc_ids,
        topic_names,
        terms,
        theta,
        phi,
        params: ModelParams {
            alpha,
            beta,
            iterations: config.iterations,
            burn_in: config.burn_in,
            seed: config.seed,
            averaged: averaged.is_some(),
        },
    }
}

/// Indices of the `n` largest values, ties broken by ascending `key`.
fn top_indices<K: Ord>(values: &[f64], n: usize, key: impl Fn(usize) -> K) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(Ordering::Equal)
            .then_with(|| key(a).cmp(&key(b)))
    });
    idx.truncate(n);
    idx
}

impl TopicModel {
    pub fn num_topics(&self) -> usize {
        self.topic_names.len()
    }

    pub fn doc_index(&self, doc_id: &str) -> Option<usize> {
        self.doc_ids.iter().position(|d| d == doc_id)
    }

    /// The `n` most probable terms of a topic with their probabilities;
    /// ties go to the lexicographically smaller term. Asking for more terms
    /// than the vocabulary holds returns them all.
    pub fn top_words_with_probs(&self, topic: usize, n: usize) -> Vec<(&str, f64)> {
        let row = self.phi.row(topic);
        let row = row.as_slice().expect("phi rows are contiguous");
        top_indices(row, n, |w| self.terms[w].as_str())
            .into_iter()
            .map(|w| (self.terms[w].as_str(), row[w]))
            .collect()
    }

    pub fn top_words(&self, topic: usize, n: usize) -> Vec<&str> {
        self.top_words_with_probs(topic, n).into_iter().map(|(t, _)| t).collect()
    }

    /// Writes the model file:
    ///
    /// ```text
    /// ellda-model<TAB>1
    /// mode<TAB>standard|labeled
    /// config_hash<TAB><hex>
    /// topics<TAB><K>
    /// vocabulary<TAB><V>
    /// alpha / beta / iterations / burn_in / seed / averaged<TAB><value>
    /// theta<TAB><N>
    /// <doc_id><TAB><k>:<p> <k>:<p> ...          non-zero entries, topic order
    /// phi<TAB><K><TAB><top_n>
    /// <k><TAB><name><TAB><word>:<p> ...          top_n words, best first
    /// ```
    ///
    /// Probabilities use Rust's shortest round-trip float formatting.
    pub fn write<W: Write>(&self, mut w: W, top_n: usize, config_hash: &str) -> std::io::Result<()> {
        writeln!(w, "ellda-model\t1")?;
        writeln!(w, "mode\t{}", self.kind)?;
        writeln!(w, "config_hash\t{config_hash}")?;
        writeln!(w, "topics\t{}", self.num_topics())?;
        writeln!(w, "vocabulary\t{}", self.terms.len())?;
        writeln!(w, "alpha\t{}", self.params.alpha)?;
        writeln!(w, "beta\t{}", self.params.beta)?;
        writeln!(w, "iterations\t{}", self.params.iterations)?;
        writeln!(w, "burn_in\t{}", self.params.burn_in)?;
        writeln!(w, "seed\t{}", self.params.seed)?;
        writeln!(w, "averaged\t{}", self.params.averaged)?;
        writeln!(w, "theta\t{}", self.doc_ids.len())?;
        for (d, doc_id) in self.doc_ids.iter().enumerate() {
            let entries: Vec<String> = self
                .theta
                .row(d)
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(k, p)| format!("{k}:{p}"))
                .collect();
            writeln!(w, "{}\t{}", escape(doc_id), entries.join(" "))?;
        }
        writeln!(w, "phi\t{}\t{}", self.num_topics(), top_n)?;
        for (k, name) in self.topic_names.iter().enumerate() {
            let words: Vec<String> = self
                .top_words_with_probs(k, top_n)
                .into_iter()
                .map(|(t, p)| format!("{}:{}", escape_token(t), p))
                .collect();
            writeln!(w, "{k}\t{}\t{}", escape(name), words.join(" "))?;
        }
        Ok(())
    }

    /// The file form of this model, as [`TopicModelFile::read`] would
    /// return it.
    pub fn to_file(&self, top_n: usize, config_hash: &str) -> TopicModelFile {
        let mut buf = Vec::new();
        self.write(&mut buf, top_n, config_hash).expect("writing to a Vec cannot fail");
        TopicModelFile::read(buf.as_slice()).expect("model file written by this crate parses")
    }
}

/// One topic as stored in a model file.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicSummary {
    pub name: String,
    pub top_words: Vec<(String, f64)>,
}

/// A model as loaded from its file: full θ, truncated φ.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModelFile {
    pub kind: ModelKind,
    pub config_hash: String,
    pub vocab_size: usize,
    pub params: ModelParams,
    pub doc_ids: Vec<String>,
    /// Non-zero `(topic, proportion)` entries per document, topic order.
    pub theta: Vec<Vec<(usize, f64)>>,
    pub topics: Vec<TopicSummary>,
}

impl TopicModelFile {
    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    pub fn doc_index(&self, doc_id: &str) -> Option<usize> {
        self.doc_ids.iter().position(|d| d == doc_id)
    }

    /// Dense θ row over all topics.
    pub fn theta_row(&self, doc: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.num_topics()];
        for &(k, p) in &self.theta[doc] {
            row[k] = p;
        }
        row
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self, InferenceError> {
        let mut p = Lines { inner: r.lines(), line: 0 };
        if p.next()? != "ellda-model\t1" {
            return Err(p.err("not an ellda model file"));
        }
        let kind: ModelKind = p.field("mode")?;
        let config_hash: String = p.field("config_hash")?;
        let topics: usize = p.field("topics")?;
        let vocab_size: usize = p.field("vocabulary")?;
        let params = ModelParams {
            alpha: p.field("alpha")?,
            beta: p.field("beta")?,
            iterations: p.field("iterations")?,
            burn_in: p.field("burn_in")?,
            seed: p.field("seed")?,
            averaged: p.field("averaged")?,
        };
        let n: usize = p.field("theta")?;
        let mut doc_ids = Vec::with_capacity(n);
        let mut theta = Vec::with_capacity(n);
        for _ in 0..n {
            let l = p.next()?;
            let (id, entries) = l.split_once('\t').ok_or_else(|| p.err("expected doc_id and entries"))?;
            doc_ids.push(unescape(id).ok_or_else(|| p.err("bad escape"))?);
            let row = entries
                .split_whitespace()
                .map(|e| {
                    let (k, v) = e.split_once(':')?;
                    let k: usize = k.parse().ok()?;
                    (k < topics).then_some(())?;
                    Some((k, v.parse::<f64>().ok()?))
                })
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| p.err("bad theta entry"))?;
            theta.push(row);
        }
        let header = p.next()?;
        let mut parts = header.split('\t');
        if parts.next() != Some("phi") || parts.next().and_then(|k| k.parse::<usize>().ok()) != Some(topics) {
            return Err(p.err("expected `phi` header matching the topic count"));
        }
        let mut summaries = Vec::with_capacity(topics);
        for k in 0..topics {
            let l = p.next()?;
            let mut f = l.splitn(3, '\t');
            let (Some(idx), Some(name), words) = (f.next(), f.next(), f.next().unwrap_or_default()) else {
                return Err(p.err("expected topic index and name"));
            };
            if idx.parse::<usize>().ok() != Some(k) {
                return Err(p.err("topics out of order"));
            }
            let top_words = words
                .split_whitespace()
                .map(|e| {
                    let (t, v) = e.rsplit_once(':')?;
                    Some((unescape(t)?, v.parse::<f64>().ok()?))
                })
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| p.err("bad phi entry"))?;
            summaries.push(TopicSummary {
                name: unescape(name).ok_or_else(|| p.err("bad escape"))?,
                top_words,
            });
        }
        Ok(Self {
            kind,
            config_hash,
            vocab_size,
            params,
            doc_ids,
            theta,
            topics: summaries,
        })
    }
}

struct Lines<I> {
    inner: I,
    line: usize,
}

impl<I: Iterator<Item = std::io::Result<String>>> Lines<I> {
    fn err(&self, message: &str) -> InferenceError {
        InferenceError::ModelFile {
            line: self.line,
            message: message.to_owned(),
        }
    }

    fn next(&mut self) -> Result<String, InferenceError> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn field<T: FromStr>(&mut self, key: &str) -> Result<T, InferenceError> {
        let l = self.next()?;
        match l.split_once('\t') {
            Some((k, v)) if k == key => v.parse().map_err(|_| self.err(&format!("bad `{key}` value"))),
            _ => Err(self.err(&format!("expected `{key}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::Smoothing;

    fn config(alpha: f64, beta: f64) -> InferenceConfig {
        InferenceConfig {
            topics: 2,
            alpha: Some(alpha),
            beta,
            iterations: 1,
            burn_in: 0,
            seed: 0,
            average_samples: false,
        }
    }

    fn model(state: &SamplerState, c: &InferenceConfig, terms: &[&str]) -> TopicModel {
        estimate_model(
            state,
            None,
            c,
            ModelKind::Standard,
            (0..state.num_docs()).map(|d| format!("d{d}")).collect(),
            (0..state.num_topics()).map(|k| format!("topic_{k}")).collect(),
            terms.iter().map(|t| t.to_string()).collect(),
        )
    }

    #[test]
    fn theta_formula() {
        // n_d = [3, 1], alpha = 0.5 -> (3.5/5, 1.5/5)
        let st = build_state(&[3, 1]);
        let m = model(&st, &config(0.5, 0.5), &["a", "b"]);
        assert!((m.theta[[0, 0]] - 0.7).abs() < 1e-12);
        assert!((m.theta[[0, 1]] - 0.3).abs() < 1e-12);
    }

    /// One document of word 0 with the requested topic split, found by
    /// searching initialization seeds (uniform draws over two topics).
    fn build_state(counts: &[u32; 2]) -> SamplerState {
        let n = (counts[0] + counts[1]) as usize;
        for seed in 0..10_000 {
            let s = SamplerState::new(vec![vec![0; n]], 2, 2, vec![vec![0, 1]], seed).unwrap();
            if s.doc_topic_row(0) == counts {
                return s;
            }
        }
        panic!("no seed produced the requested split");
    }

    #[test]
    fn phi_formula() {
        // topic 0 holds word 0 twice: phi = (2.5/3, 0.5/3)
        let s = SamplerState::new(vec![vec![0, 0]], 2, 2, vec![vec![0]], 0).unwrap();
        let m = model(&s, &config(1.0, 0.5), &["a", "b"]);
        assert!((m.phi[[0, 0]] - 2.5 / 3.0).abs() < 1e-12);
        assert!((m.phi[[0, 1]] - 0.5 / 3.0).abs() < 1e-12);
        // empty topic 1 is uniform
        assert!((m.phi[[1, 0]] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_topic_theta_is_one() {
        let s = SamplerState::new(vec![vec![0, 1, 1], vec![]], 2, 1, vec![vec![0], vec![0]], 0).unwrap();
        let m = model(&s, &config(0.1, 0.1), &["a", "b"]);
        assert_eq!(m.theta[[0, 0]], 1.0);
        assert_eq!(m.theta[[1, 0]], 1.0);
    }

    #[test]
    fn restricted_theta_zero_outside_labels() {
        let mut s = SamplerState::new(vec![vec![0, 1, 2]], 3, 4, vec![vec![1, 3]], 0).unwrap();
        s.sweep(Smoothing { alpha: 0.2, beta: 0.1 });
        let m = model(&s, &config(0.2, 0.1), &["a", "b", "c"]);
        assert_eq!(m.theta[[0, 0]], 0.0);
        assert_eq!(m.theta[[0, 2]], 0.0);
        assert!((m.theta.row(0).sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn top_words_order_and_ties() {
        let s = SamplerState::new(vec![vec![2, 2, 2, 0]], 4, 2, vec![vec![0]], 0).unwrap();
        let m = model(&s, &config(1.0, 0.1), &["delta", "alpha", "zulu", "bravo"]);
        assert_eq!(m.top_words(0, 2), ["zulu", "delta"]);
        // uniform empty topic: lexicographic
        assert_eq!(m.top_words(1, 3), ["alpha", "bravo", "delta"]);
        assert_eq!(m.top_words(1, 99).len(), 4);
    }

    #[test]
    fn file_round_trip() {
        let mut s = SamplerState::new(vec![vec![0, 1, 2, 1], vec![2, 2]], 3, 2, vec![vec![0, 1], vec![1]], 3).unwrap();
        s.sweep(Smoothing { alpha: 0.5, beta: 0.1 });
        let mut m = model(&s, &config(0.5, 0.1), &["x y", "b", "c"]);
        m.kind = ModelKind::Labeled;
        m.topic_names = vec!["Basque_people".into(), "Star:Trek\tX".into()];
        let f = m.to_file(2, "cfg");
        assert_eq!(f.kind, ModelKind::Labeled);
        assert_eq!(f.config_hash, "cfg");
        assert_eq!(f.doc_ids, m.doc_ids);
        for d in 0..2 {
            let row = f.theta_row(d);
            for k in 0..2 {
                assert_eq!(row[k], m.theta[[d, k]]);
            }
        }
        assert_eq!(f.topics[1].name, "Star:Trek\tX");
        assert_eq!(f.topics[0].top_words.len(), 2);
        let mut a = Vec::new();
        m.write(&mut a, 2, "cfg").unwrap();
        let mut b = Vec::new();
        m.write(&mut b, 2, "cfg").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncated_file_rejected() {
        let err = TopicModelFile::read("ellda-model\t1\nmode\tstandard\n".as_bytes()).unwrap_err();
        assert!(matches!(err, InferenceError::ModelFile { line: 3, .. }));
    }
}
