//! Collapsed Gibbs sampler state with per-document topic restrictions.
//!
//! Each token's topic is resampled from
//!
//! ```text
//! p(z = k | rest) ∝ (n_dk + α) (n_kw + β) / (n_k + Vβ),   k ∈ allowed(d)
//! ```
//!
//! Documents whose allowed set is the whole topic range go through a
//! bucketed sparse kernel (smoothing / document / word buckets, in the style
//! of SparseLDA) whose cost per token scales with the number of non-zero
//! counts rather than with K. Restricted documents evaluate the formula
//! directly over their allowed set. Which kernel runs depends only on the
//! allowed set, so a labeled run whose every document may use every topic
//! follows exactly the same trajectory as an unrestricted run.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::InferenceError;

/// Per-word topic counts, stored as `(topic, count)` pairs sorted by topic
/// with zero counts removed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct SparseCounts(Vec<(u32, u32)>);

impl SparseCounts {
    fn get(&self, topic: u32) -> u32 {
        match self.0.binary_search_by_key(&topic, |e| e.0) {
            Ok(i) => self.0[i].1,
            Err(_) => 0,
        }
    }

    fn increment(&mut self, topic: u32) {
        match self.0.binary_search_by_key(&topic, |e| e.0) {
            Ok(i) => self.0[i].1 += 1,
            Err(i) => self.0.insert(i, (topic, 1)),
        }
    }

    fn decrement(&mut self, topic: u32) {
        let i = self
            .0
            .binary_search_by_key(&topic, |e| e.0)
            .expect("decrementing a zero word-topic count");
        if self.0[i].1 == 1 {
            self.0.remove(i);
        } else {
            self.0[i].1 -= 1;
        }
    }
}

/// Scalar hyperparameters of the full conditional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothing {
    pub alpha: f64,
    pub beta: f64,
}

/// Token assignments plus the count tables derived from them.
#[derive(Debug, Clone)]
pub struct SamplerState {
    num_topics: usize,
    vocab_size: usize,
    docs: Vec<Vec<u32>>,
    /// z
    assignments: Vec<Vec<u32>>,
    /// n_dk, row-major N x K
    doc_topic: Vec<u32>,
    /// n_kw, indexed by word
    word_topic: Vec<SparseCounts>,
    /// n_k
    topic_totals: Vec<u32>,
    allowed: Vec<Vec<u32>>,
    unrestricted: Vec<bool>,
    rng: ChaCha8Rng,
}

/// Reusable buffers for one sweep.
struct Scratch {
    /// 1 / (n_k + Vβ)
    inv_denom: Vec<f64>,
    /// Σ_k αβ / (n_k + Vβ)
    smoothing_mass: f64,
    /// (α + n_dk) / (n_k + Vβ) for the current document
    coef: Vec<f64>,
    /// topics with n_dk > 0 in the current document
    doc_topics: Vec<u32>,
    doc_topic_pos: Vec<u32>,
    /// Σ_{k: n_dk>0} n_dk β / (n_k + Vβ)
    doc_mass: f64,
    weights: Vec<f64>,
}

const ABSENT: u32 = u32::MAX;

impl SamplerState {
    /// Assigns each token a topic drawn uniformly from its document's
    /// allowed set. Allowed sets are sorted and deduplicated.
    pub fn new(
        docs: Vec<Vec<u32>>,
        vocab_size: usize,
        num_topics: usize,
        allowed: Vec<Vec<u32>>,
        seed: u64,
    ) -> Result<Self, InferenceError> {
        if num_topics == 0 {
            return Err(InferenceError::Config("topic count must be at least 1".into()));
        }
        if num_topics > u32::MAX as usize - 1 {
            return Err(InferenceError::Config("too many topics".into()));
        }
        if allowed.len() != docs.len() {
            return Err(InferenceError::Config(format!(
                "{} allowed sets for {} documents",
                allowed.len(),
                docs.len()
            )));
        }
        let mut allowed = allowed;
        for (d, set) in allowed.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if set.is_empty() {
                return Err(InferenceError::EmptyAllowedSet(d.to_string()));
            }
            if let Some(&k) = set.last().filter(|&&k| k as usize >= num_topics) {
                return Err(InferenceError::Config(format!(
                    "document {d}: topic {k} out of range for {num_topics} topics"
                )));
            }
        }
        for (d, doc) in docs.iter().enumerate() {
            if let Some(&w) = doc.iter().find(|&&w| w as usize >= vocab_size) {
                return Err(InferenceError::Config(format!(
                    "document {d}: word {w} out of range for vocabulary of {vocab_size}"
                )));
            }
        }
        let unrestricted = allowed.iter().map(|s| s.len() == num_topics).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = Self {
            num_topics,
            vocab_size,
            doc_topic: vec![0; docs.len() * num_topics],
            word_topic: vec![SparseCounts::default(); vocab_size],
            topic_totals: vec![0; num_topics],
            assignments: Vec::with_capacity(docs.len()),
            docs: Vec::new(),
            allowed,
            unrestricted,
            rng: ChaCha8Rng::seed_from_u64(0),
        };
        for (d, doc) in docs.iter().enumerate() {
            let set = &state.allowed[d];
            let z: Vec<u32> = doc.iter().map(|_| set[rng.random_range(0..set.len())]).collect();
            for (&w, &k) in doc.iter().zip(&z) {
                state.doc_topic[d * num_topics + k as usize] += 1;
                state.word_topic[w as usize].increment(k);
                state.topic_totals[k as usize] += 1;
            }
            state.assignments.push(z);
        }
        state.docs = docs;
        state.rng = rng;
        Ok(state)
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn doc_len(&self, doc: usize) -> usize {
        self.docs[doc].len()
    }

    pub fn tokens(&self, doc: usize) -> &[u32] {
        &self.docs[doc]
    }

    /// z for one document.
    pub fn assignments(&self, doc: usize) -> &[u32] {
        &self.assignments[doc]
    }

    pub fn allowed(&self, doc: usize) -> &[u32] {
        &self.allowed[doc]
    }

    pub fn doc_topic_count(&self, doc: usize, topic: usize) -> u32 {
        self.doc_topic[doc * self.num_topics + topic]
    }

    pub fn doc_topic_row(&self, doc: usize) -> &[u32] {
        &self.doc_topic[doc * self.num_topics..(doc + 1) * self.num_topics]
    }

    pub fn word_topic_count(&self, word: usize, topic: usize) -> u32 {
        self.word_topic[word].get(topic as u32)
    }

    /// Non-zero `(topic, count)` pairs for a word, sorted by topic.
    pub fn word_topic_entries(&self, word: usize) -> &[(u32, u32)] {
        &self.word_topic[word].0
    }

    pub fn topic_total(&self, topic: usize) -> u32 {
        self.topic_totals[topic]
    }

    /// Recomputes every table from z and compares it with the incremental
    /// ones; also checks that z respects the allowed sets.
    pub fn check_invariants(&self) -> Result<(), String> {
        let k_total = self.num_topics;
        let mut doc_topic = vec![0u32; self.docs.len() * k_total];
        let mut word_topic = vec![SparseCounts::default(); self.vocab_size];
        let mut totals = vec![0u32; k_total];
        for (d, (doc, z)) in self.docs.iter().zip(&self.assignments).enumerate() {
            if doc.len() != z.len() {
                return Err(format!("document {d}: {} tokens but {} assignments", doc.len(), z.len()));
            }
            for (i, (&w, &k)) in doc.iter().zip(z).enumerate() {
                if self.allowed[d].binary_search(&k).is_err() {
                    return Err(format!("document {d} token {i}: topic {k} not allowed"));
                }
                doc_topic[d * k_total + k as usize] += 1;
                word_topic[w as usize].increment(k);
                totals[k as usize] += 1;
            }
        }
        if doc_topic != self.doc_topic {
            return Err("document-topic counts diverged from assignments".into());
        }
        if word_topic != self.word_topic {
            return Err("word-topic counts diverged from assignments".into());
        }
        if totals != self.topic_totals {
            return Err("topic totals diverged from assignments".into());
        }
        Ok(())
    }

    fn scratch(&self, s: Smoothing) -> Scratch {
        let vb = self.vocab_size as f64 * s.beta;
        let inv_denom: Vec<f64> = self.topic_totals.iter().map(|&n| 1.0 / (n as f64 + vb)).collect();
        let smoothing_mass = inv_denom.iter().map(|inv| s.alpha * s.beta * inv).sum();
        Scratch {
            inv_denom,
            smoothing_mass,
            coef: vec![0.0; self.num_topics],
            doc_topics: Vec::with_capacity(self.num_topics),
            doc_topic_pos: vec![ABSENT; self.num_topics],
            doc_mass: 0.0,
            weights: Vec::with_capacity(self.num_topics),
        }
    }

    /// Sets up the per-document buckets for the sparse kernel.
    fn enter_doc(&self, d: usize, s: Smoothing, sc: &mut Scratch) {
        for &k in &sc.doc_topics {
            sc.doc_topic_pos[k as usize] = ABSENT;
        }
        sc.doc_topics.clear();
        sc.doc_mass = 0.0;
        let row = self.doc_topic_row(d);
        for (k, &n) in row.iter().enumerate() {
            sc.coef[k] = (s.alpha + n as f64) * sc.inv_denom[k];
            if n > 0 {
                sc.doc_topic_pos[k] = sc.doc_topics.len() as u32;
                sc.doc_topics.push(k as u32);
                sc.doc_mass += n as f64 * s.beta * sc.inv_denom[k];
            }
        }
    }

    /// Moves one token into or out of topic `k`, keeping every table and
    /// every cached bucket consistent.
    fn update(&mut self, d: usize, w: u32, k: u32, add: bool, s: Smoothing, sc: &mut Scratch, sparse: bool) {
        let ku = k as usize;
        let idx = d * self.num_topics + ku;
        let n_dk_old = self.doc_topic[idx] as f64;
        sc.smoothing_mass -= s.alpha * s.beta * sc.inv_denom[ku];
        if sparse {
            sc.doc_mass -= n_dk_old * s.beta * sc.inv_denom[ku];
        }
        if add {
            self.doc_topic[idx] += 1;
            self.word_topic[w as usize].increment(k);
            self.topic_totals[ku] += 1;
        } else {
            debug_assert!(self.doc_topic[idx] > 0 && self.topic_totals[ku] > 0);
            self.doc_topic[idx] -= 1;
            self.word_topic[w as usize].decrement(k);
            self.topic_totals[ku] -= 1;
        }
        let vb = self.vocab_size as f64 * s.beta;
        sc.inv_denom[ku] = 1.0 / (self.topic_totals[ku] as f64 + vb);
        sc.smoothing_mass += s.alpha * s.beta * sc.inv_denom[ku];
        if sparse {
            let n_dk = self.doc_topic[idx];
            sc.doc_mass += n_dk as f64 * s.beta * sc.inv_denom[ku];
            sc.coef[ku] = (s.alpha + n_dk as f64) * sc.inv_denom[ku];
            if add && n_dk == 1 {
                sc.doc_topic_pos[ku] = sc.doc_topics.len() as u32;
                sc.doc_topics.push(k);
            } else if !add && n_dk == 0 {
                let pos = sc.doc_topic_pos[ku] as usize;
                sc.doc_topics.swap_remove(pos);
                if let Some(&moved) = sc.doc_topics.get(pos) {
                    sc.doc_topic_pos[moved as usize] = pos as u32;
                }
                sc.doc_topic_pos[ku] = ABSENT;
            }
        }
    }

    /// Draws a topic for word `w` in document `d` (whose own token has
    /// already been removed from the counts).
    fn draw(&mut self, d: usize, w: u32, s: Smoothing, sc: &mut Scratch) -> u32 {
        if self.unrestricted[d] {
            self.draw_sparse(d, w, s, sc)
        } else {
            self.draw_restricted(d, w, s, sc)
        }
    }

    fn draw_sparse(&mut self, d: usize, w: u32, s: Smoothing, sc: &mut Scratch) -> u32 {
        let base = d * self.num_topics;
        let entries = &self.word_topic[w as usize].0;
        sc.weights.clear();
        let mut word_mass = 0.0;
        for &(k, n) in entries {
            let v = sc.coef[k as usize] * n as f64;
            word_mass += v;
            sc.weights.push(v);
        }
        // The buckets are maintained incrementally; clamp tiny negative drift.
        let doc_mass = sc.doc_mass.max(0.0);
        let total = sc.smoothing_mass + doc_mass + word_mass;
        let mut u = self.rng.random::<f64>() * total;

        if u < word_mass {
            for (i, &v) in sc.weights.iter().enumerate() {
                u -= v;
                if u < 0.0 {
                    return entries[i].0;
                }
            }
            return entries.last().expect("word bucket has mass").0;
        }
        u -= word_mass;
        if u < doc_mass {
            let mut last = None;
            for &k in &sc.doc_topics {
                let n = self.doc_topic[base + k as usize] as f64;
                u -= n * s.beta * sc.inv_denom[k as usize];
                last = Some(k);
                if u < 0.0 {
                    return k;
                }
            }
            if let Some(k) = last {
                return k;
            }
            u = 0.0;
        } else {
            u -= doc_mass;
        }
        let ab = s.alpha * s.beta;
        for k in 0..self.num_topics {
            u -= ab * sc.inv_denom[k];
            if u < 0.0 {
                return k as u32;
            }
        }
        (self.num_topics - 1) as u32
    }

    fn draw_restricted(&mut self, d: usize, w: u32, s: Smoothing, sc: &mut Scratch) -> u32 {
        let base = d * self.num_topics;
        let counts = &self.word_topic[w as usize];
        sc.weights.clear();
        let mut total = 0.0;
        for &k in &self.allowed[d] {
            let ku = k as usize;
            let v = (self.doc_topic[base + ku] as f64 + s.alpha)
                * (counts.get(k) as f64 + s.beta)
                * sc.inv_denom[ku];
            total += v;
            sc.weights.push(v);
        }
        let mut u = self.rng.random::<f64>() * total;
        for (i, &v) in sc.weights.iter().enumerate() {
            u -= v;
            if u < 0.0 {
                return self.allowed[d][i];
            }
        }
        *self.allowed[d].last().expect("allowed sets are non-empty")
    }

    fn sweep_doc(&mut self, d: usize, s: Smoothing, sc: &mut Scratch) {
        let sparse = self.unrestricted[d];
        if sparse {
            self.enter_doc(d, s, sc);
        }
        for i in 0..self.docs[d].len() {
            let w = self.docs[d][i];
            let old = self.assignments[d][i];
            self.update(d, w, old, false, s, sc, sparse);
            let new = self.draw(d, w, s, sc);
            self.update(d, w, new, true, s, sc, sparse);
            self.assignments[d][i] = new;
        }
    }

    /// Resamples every token once, in document then position order.
    pub fn sweep(&mut self, s: Smoothing) {
        let mut sc = self.scratch(s);
        for d in 0..self.docs.len() {
            self.sweep_doc(d, s, &mut sc);
        }
        #[cfg(debug_assertions)]
        if let Err(e) = self.check_invariants() {
            panic!("sampler invariant violated after sweep: {e}");
        }
    }

    /// Resamples a single token and returns its new topic.
    pub fn resample_token(&mut self, doc: usize, pos: usize, s: Smoothing) -> u32 {
        let mut sc = self.scratch(s);
        let sparse = self.unrestricted[doc];
        if sparse {
            self.enter_doc(doc, s, &mut sc);
        }
        let w = self.docs[doc][pos];
        let old = self.assignments[doc][pos];
        self.update(doc, w, old, false, s, &mut sc, sparse);
        let new = self.draw(doc, w, s, &mut sc);
        self.update(doc, w, new, true, s, &mut sc, sparse);
        self.assignments[doc][pos] = new;
        new
    }
}
