//! Corpus ingestion: loading documents with party metadata, text
//! normalization, and the indexed vocabulary.
//!
//! Tokens are maximal runs of alphabetic characters, lowercased. A token is
//! dropped when its surface form or its normalized form is a stopword, so no
//! stored token ever decodes to a stopword. The normalization step sits
//! behind [`TokenNormalizer`]; the default is the Snowball English stemmer.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rust_stemmers::{Algorithm, Stemmer};
use thiserror::Error;

use crate::tsv::{escape, sha256_hex, sniff_delimiter, unescape};

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");
const SNAPSHOT_MAGIC: &str = "ellda-corpus\t1";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("manifest references missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("duplicate doc_id {0:?}")]
    DuplicateDocId(String),
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("min_count must be at least 1")]
    InvalidMinCount,
    #[error("manifest {}: {message}", path.display())]
    Manifest { path: PathBuf, message: String },
    #[error("corpus snapshot line {line}: {message}")]
    Snapshot { line: usize, message: String },
    #[error("document {doc_id:?}: token index {index} out of range for vocabulary of {vocab_size}")]
    TokenOutOfRange {
        doc_id: String,
        index: u32,
        vocab_size: usize,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Write(#[from] std::io::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Maps a lowercased token to its normalized form.
pub trait TokenNormalizer: Send + Sync {
    fn normalize(&self, token: &str) -> String;
}

/// Snowball English (Porter2) suffix stemmer.
pub struct SnowballStemmer(Stemmer);

impl Default for SnowballStemmer {
    fn default() -> Self {
        Self(Stemmer::create(Algorithm::English))
    }
}

impl TokenNormalizer for SnowballStemmer {
    fn normalize(&self, token: &str) -> String {
        self.0.stem(token).into_owned()
    }
}

/// Leaves tokens as they are.
#[derive(Debug, Default, Clone, Copy)]
pub struct IdentityNormalizer;

impl TokenNormalizer for IdentityNormalizer {
    fn normalize(&self, token: &str) -> String {
        token.to_owned()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// The bundled English list.
    pub fn english() -> Self {
        Self::parse(BUNDLED_STOPWORDS)
    }

    /// One term per line; blank lines and `#` comments are ignored. Terms are
    /// lowercased on load.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn from_file(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, term: &str) -> bool {
        self.0.contains(term)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

/// Splits `raw_text` into lowercased alphabetic runs, drops stopwords and
/// normalizes what remains. Order is preserved.
pub fn tokenize_and_normalize(
    raw_text: &str,
    stopwords: &Stopwords,
    normalizer: &dyn TokenNormalizer,
) -> Vec<String> {
    raw_text
        .split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
        .filter_map(|t| {
            let lower = t.to_lowercase();
            if stopwords.contains(&lower) {
                return None;
            }
            let normalized = normalizer.normalize(&lower);
            if normalized.is_empty() || stopwords.contains(&normalized) {
                None
            } else {
                Some(normalized)
            }
        })
        .collect()
}

/// Stopword set plus normalizer, the full text pipeline applied per document.
pub struct TextPipeline {
    pub stopwords: Stopwords,
    pub normalizer: Box<dyn TokenNormalizer>,
}

impl Default for TextPipeline {
    fn default() -> Self {
        Self {
            stopwords: Stopwords::english(),
            normalizer: Box::new(SnowballStemmer::default()),
        }
    }
}

impl TextPipeline {
    pub fn tokenize(&self, raw_text: &str) -> Vec<String> {
        tokenize_and_normalize(raw_text, &self.stopwords, self.normalizer.as_ref())
    }
}

/// Dense term/index bijection with corpus frequencies.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    frequencies: Vec<u64>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from distinct terms in index order, with zero
    /// frequencies. Later duplicates are ignored.
    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::default();
        for term in terms {
            vocab.insert(term.into(), 0);
        }
        vocab
    }

    fn insert(&mut self, term: String, frequency: u64) -> u32 {
        if let Some(&i) = self.index.get(&term) {
            return i;
        }
        let i = self.terms.len() as u32;
        self.index.insert(term.clone(), i);
        self.terms.push(term);
        self.frequencies.push(frequency);
        i
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: u32) -> Option<&str> {
        self.terms.get(index as usize).map(String::as_str)
    }

    pub fn frequency(&self, index: u32) -> u64 {
        self.frequencies.get(index as usize).copied().unwrap_or(0)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

/// Counts terms over all documents, keeps those seen at least `min_count`
/// times (indices in first-occurrence order) and re-encodes the documents,
/// dropping sub-threshold tokens.
pub fn build_vocabulary<S: AsRef<str>>(
    documents: &[Vec<S>],
    min_count: u64,
) -> Result<(Vocabulary, Vec<Vec<u32>>), CorpusError> {
    if min_count < 1 {
        return Err(CorpusError::InvalidMinCount);
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    let mut order: Vec<&str> = Vec::new();
    for doc in documents {
        for t in doc {
            let t = t.as_ref();
            let c = counts.entry(t).or_insert_with(|| {
                order.push(t);
                0
            });
            *c += 1;
        }
    }
    let mut vocab = Vocabulary::default();
    for term in order {
        let c = counts[term];
        if c >= min_count {
            vocab.insert(term.to_owned(), c);
        }
    }
    if vocab.is_empty() {
        return Err(CorpusError::EmptyVocabulary);
    }
    let encoded = documents
        .iter()
        .map(|doc| doc.iter().filter_map(|t| vocab.index_of(t.as_ref())).collect())
        .collect();
    Ok((vocab, encoded))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub party: String,
    pub raw_text: String,
    pub tokens: Vec<u32>,
}

impl Document {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// An unprocessed document as listed in a manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub doc_id: String,
    pub party: String,
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    vocabulary: Vocabulary,
}

impl Corpus {
    /// Validates unique doc ids, non-emptiness and token ranges.
    pub fn new(documents: Vec<Document>, vocabulary: Vocabulary) -> Result<Self, CorpusError> {
        if documents.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let mut seen = HashSet::new();
        for doc in &documents {
            if !seen.insert(doc.doc_id.as_str()) {
                return Err(CorpusError::DuplicateDocId(doc.doc_id.clone()));
            }
            if let Some(&index) = doc.tokens.iter().find(|&&t| t as usize >= vocabulary.len()) {
                return Err(CorpusError::TokenOutOfRange {
                    doc_id: doc.doc_id.clone(),
                    index,
                    vocab_size: vocabulary.len(),
                });
            }
        }
        Ok(Self {
            documents,
            vocabulary,
        })
    }

    /// Normalizes every document (in parallel) and builds the vocabulary.
    pub fn from_raw(
        raw: Vec<RawDocument>,
        pipeline: &TextPipeline,
        min_count: u64,
    ) -> Result<Self, CorpusError> {
        if raw.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let tokenized: Vec<Vec<String>> =
            raw.par_iter().map(|d| pipeline.tokenize(&d.raw_text)).collect();
        let (vocabulary, encoded) = build_vocabulary(&tokenized, min_count)?;
        let documents = raw
            .into_iter()
            .zip(encoded)
            .map(|(r, tokens)| Document {
                doc_id: r.doc_id,
                party: r.party,
                raw_text: r.raw_text,
                tokens,
            })
            .collect();
        Self::new(documents, vocabulary)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    pub fn total_tokens(&self) -> usize {
        self.documents.iter().map(Document::len).sum()
    }

    /// Decodes a document's token indices back to normalized strings.
    pub fn decode(&self, doc: &Document) -> Vec<&str> {
        doc.tokens
            .iter()
            .map(|&t| self.vocabulary.term(t).expect("token index validated at construction"))
            .collect()
    }

    /// Writes the line-oriented snapshot:
    ///
    /// ```text
    /// ellda-corpus<TAB>1
    /// config_hash<TAB><hex>
    /// vocabulary<TAB><V>
    /// <term><TAB><frequency>                        (V lines, index order)
    /// documents<TAB><N>
    /// <doc_id><TAB><party><TAB><i i i ...>          (N lines)
    /// texts<TAB><N>
    /// <doc_id><TAB><raw text, escaped>              (N lines)
    /// ```
    ///
    /// String fields are escaped with backslash sequences for `\\`, tab,
    /// newline and carriage return.
    pub fn write_snapshot<W: Write>(&self, mut w: W, config_hash: &str) -> std::io::Result<()> {
        writeln!(w, "{SNAPSHOT_MAGIC}")?;
        writeln!(w, "config_hash\t{config_hash}")?;
        writeln!(w, "vocabulary\t{}", self.vocabulary.len())?;
        for (term, freq) in self.vocabulary.terms.iter().zip(&self.vocabulary.frequencies) {
            writeln!(w, "{}\t{}", escape(term), freq)?;
        }
        writeln!(w, "documents\t{}", self.documents.len())?;
        for doc in &self.documents {
            let tokens: Vec<String> = doc.tokens.iter().map(u32::to_string).collect();
            writeln!(
                w,
                "{}\t{}\t{}",
                escape(&doc.doc_id),
                escape(&doc.party),
                tokens.join(" ")
            )?;
        }
        writeln!(w, "texts\t{}", self.documents.len())?;
        for doc in &self.documents {
            writeln!(w, "{}\t{}", escape(&doc.doc_id), escape(&doc.raw_text))?;
        }
        Ok(())
    }

    pub fn snapshot_bytes(&self, config_hash: &str) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_snapshot(&mut buf, config_hash)
            .expect("writing to a Vec cannot fail");
        buf
    }

    /// Reads a snapshot written by [`Corpus::write_snapshot`], returning the
    /// corpus and the embedded config hash.
    pub fn read_snapshot<R: BufRead>(r: R) -> Result<(Self, String), CorpusError> {
        let mut lines = SnapshotLines {
            inner: r.lines(),
            line: 0,
        };
        let magic = lines.next_line()?;
        if magic != SNAPSHOT_MAGIC {
            return Err(lines.err("not an ellda corpus snapshot"));
        }
        let config_hash = lines.keyed("config_hash")?;
        let v: usize = lines.count("vocabulary")?;
        let mut vocabulary = Vocabulary::default();
        for _ in 0..v {
            let l = lines.next_line()?;
            let (term, freq) = l
                .split_once('\t')
                .ok_or_else(|| lines.err("expected term and frequency"))?;
            let freq = freq.parse().map_err(|_| lines.err("bad frequency"))?;
            let term = unescape(term).ok_or_else(|| lines.err("bad escape"))?;
            vocabulary.insert(term, freq);
        }
        if vocabulary.len() != v {
            return Err(lines.err("duplicate vocabulary term"));
        }
        let n: usize = lines.count("documents")?;
        let mut documents = Vec::with_capacity(n);
        for _ in 0..n {
            let l = lines.next_line()?;
            let mut fields = l.splitn(3, '\t');
            let (Some(id), Some(party), Some(toks)) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(lines.err("expected doc_id, party and tokens"));
            };
            let tokens = toks
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<Vec<u32>, _>>()
                .map_err(|_| lines.err("bad token index"))?;
            documents.push(Document {
                doc_id: unescape(id).ok_or_else(|| lines.err("bad escape"))?,
                party: unescape(party).ok_or_else(|| lines.err("bad escape"))?,
                raw_text: String::new(),
                tokens,
            });
        }
        let m: usize = lines.count("texts")?;
        if m != n {
            return Err(lines.err("text block size differs from document block"));
        }
        for doc in &mut documents {
            let l = lines.next_line()?;
            let (id, text) = l
                .split_once('\t')
                .ok_or_else(|| lines.err("expected doc_id and text"))?;
            if unescape(id).as_deref() != Some(doc.doc_id.as_str()) {
                return Err(lines.err("text block out of document order"));
            }
            doc.raw_text = unescape(text).ok_or_else(|| lines.err("bad escape"))?;
        }
        Ok((Self::new(documents, vocabulary)?, config_hash))
    }
}

struct SnapshotLines<I> {
    inner: I,
    line: usize,
}

impl<I: Iterator<Item = std::io::Result<String>>> SnapshotLines<I> {
    fn err(&self, message: &str) -> CorpusError {
        CorpusError::Snapshot {
            line: self.line,
            message: message.to_owned(),
        }
    }

    fn next_line(&mut self) -> Result<String, CorpusError> {
        self.line += 1;
        match self.inner.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(CorpusError::Write(e)),
            None => Err(self.err("unexpected end of snapshot")),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<String, CorpusError> {
        let l = self.next_line()?;
        match l.split_once('\t') {
            Some((k, v)) if k == key => Ok(v.to_owned()),
            _ => Err(self.err(&format!("expected `{key}` header"))),
        }
    }

    fn count(&mut self, key: &str) -> Result<usize, CorpusError> {
        self.keyed(key)?
            .parse()
            .map_err(|_| self.err(&format!("bad `{key}` count")))
    }
}

/// One row of the corpus manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub filename: String,
    pub doc_id: String,
    pub party: String,
}

/// Reads a manifest with a required header naming the columns `filename`,
/// `doc_id` and `party` (comma- or tab-delimited, any column order).
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let manifest_err = |message: String| CorpusError::Manifest {
        path: path.to_path_buf(),
        message,
    };
    let header = text.lines().next().unwrap_or_default();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(sniff_delimiter(header))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| manifest_err(e.to_string()))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| manifest_err(format!("missing `{name}` column in header")))
    };
    let (fi, di, pi) = (column("filename")?, column("doc_id")?, column("party")?);
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| manifest_err(e.to_string()))?;
        let get = |i: usize| record.get(i).unwrap_or_default().to_owned();
        let entry = ManifestEntry {
            filename: get(fi),
            doc_id: get(di),
            party: get(pi),
        };
        if entry.doc_id.is_empty() || entry.filename.is_empty() {
            return Err(manifest_err(format!(
                "row {} has an empty filename or doc_id",
                entries.len() + 1
            )));
        }
        if !seen.insert(entry.doc_id.clone()) {
            return Err(CorpusError::DuplicateDocId(entry.doc_id));
        }
        entries.push(entry);
    }
    Ok(entries)
}

/// Reads the raw documents named by the manifest, in manifest order.
pub fn read_raw_documents(
    corpus_dir: &Path,
    manifest: &[ManifestEntry],
) -> Result<Vec<RawDocument>, CorpusError> {
    manifest
        .iter()
        .map(|e| {
            let path = corpus_dir.join(&e.filename);
            if !path.is_file() {
                return Err(CorpusError::MissingFile(path));
            }
            let raw_text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
            Ok(RawDocument {
                doc_id: e.doc_id.clone(),
                party: e.party.clone(),
                raw_text,
            })
        })
        .collect()
}

/// Loads and normalizes every document listed in `manifest_path`.
pub fn load_corpus(
    corpus_dir: &Path,
    manifest_path: &Path,
    pipeline: &TextPipeline,
    min_count: u64,
) -> Result<Corpus, CorpusError> {
    let manifest = read_manifest(manifest_path)?;
    let raw = read_raw_documents(corpus_dir, &manifest)?;
    Corpus::from_raw(raw, pipeline, min_count)
}

impl fmt::Display for Corpus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} documents, {} terms, {} tokens",
            self.len(),
            self.vocabulary.len(),
            self.total_tokens()
        )
    }
}

/// Hash of the raw snapshot text, used to detect stale downstream artifacts.
pub fn snapshot_hash(bytes: &[u8]) -> String {
    sha256_hex(bytes)
}
