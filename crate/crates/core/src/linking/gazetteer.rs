use std::collections::HashMap;
use std::path::Path;

use crate::corpus::Document;
use crate::tsv::sniff_delimiter;

use super::{EntityAnnotation, LinkError};

/// Lowercased multi-word surface forms mapped to entity ids.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    phrases: HashMap<String, String>,
    max_words: usize,
}

/// Splits text into maximal alphanumeric runs, as (char_start, char_end, text).
fn words(text: &str) -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut pos = 0;
    for c in text.chars() {
        if c.is_alphanumeric() {
            if current.is_empty() {
                start = pos;
            }
            current.push(c);
        } else if !current.is_empty() {
            out.push((start, pos, std::mem::take(&mut current)));
        }
        pos += 1;
    }
    if !current.is_empty() {
        out.push((start, pos, current));
    }
    out
}

/// Lowercases and folds English plural endings so "organisms" and
/// "organism" compare equal: `sses`→`ss`, `ies`→`y`, and a final `s` is
/// dropped unless the word ends in `ss`, `us` or `is`.
fn fold_word(word: &str) -> String {
    let w = word.to_lowercase();
    if w.chars().count() <= 3 {
        return w;
    }
    if let Some(stem) = w.strip_suffix("sses") {
        return format!("{stem}ss");
    }
    if let Some(stem) = w.strip_suffix("ies") {
        return format!("{stem}y");
    }
    if w.ends_with("ss") || w.ends_with("us") || w.ends_with("is") {
        return w;
    }
    match w.strip_suffix('s') {
        Some(stem) => stem.to_owned(),
        None => w,
    }
}

fn phrase_key<'a, I: IntoIterator<Item = &'a str>>(words: I) -> String {
    words.into_iter().map(fold_word).collect::<Vec<_>>().join(" ")
}

impl Gazetteer {
    /// Surface forms are split into words the same way document text is,
    /// so punctuation inside a surface form is ignored. Later duplicates
    /// overwrite earlier ones.
    pub fn new<I, S, E>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, E)>,
        S: AsRef<str>,
        E: Into<String>,
    {
        let mut g = Self::default();
        for (surface, entity) in entries {
            let ws = words(surface.as_ref());
            if ws.is_empty() {
                continue;
            }
            g.max_words = g.max_words.max(ws.len());
            g.phrases
                .insert(phrase_key(ws.iter().map(|w| w.2.as_str())), entity.into());
        }
        g
    }

    /// Reads a delimited file with header columns `surface_form` and
    /// `entity_id`.
    pub fn from_file(path: &Path) -> Result<Self, LinkError> {
        let text = std::fs::read_to_string(path).map_err(|source| LinkError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let format_err = |line: usize, message: String| LinkError::Format {
            path: path.display().to_string(),
            line,
            message,
        };
        let header = text.lines().next().unwrap_or_default();
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(sniff_delimiter(header))
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| format_err(1, e.to_string()))?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| format_err(1, format!("missing `{name}` column")))
        };
        let (si, ei) = (col("surface_form")?, col("entity_id")?);
        let mut entries = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| format_err(i + 2, e.to_string()))?;
            let (Some(s), Some(e)) = (rec.get(si), rec.get(ei)) else {
                return Err(format_err(i + 2, "missing field".into()));
            };
            if e.is_empty() {
                return Err(format_err(i + 2, "empty entity_id".into()));
            }
            entries.push((s.to_owned(), e.to_owned()));
        }
        Ok(Self::new(entries))
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    /// Case- and plural-insensitive, longest-match-first scan at word
    /// boundaries. Words of a multi-word match must be separated by
    /// whitespace only.
    pub fn annotate_text(&self, raw_text: &str) -> Vec<EntityAnnotation> {
        let chars: Vec<char> = raw_text.chars().collect();
        let ws = words(raw_text);
        let mut out = Vec::new();
        let mut i = 0;
        while i < ws.len() {
            let mut matched = None;
            // longest run of whitespace-joined words available from i
            let mut span = 1;
            while span < self.max_words
                && i + span < ws.len()
                && chars[ws[i + span - 1].1..ws[i + span].0]
                    .iter()
                    .all(|c| c.is_whitespace())
            {
                span += 1;
            }
            for n in (1..=span).rev() {
                let key = phrase_key(ws[i..i + n].iter().map(|w| w.2.as_str()));
                if let Some(entity) = self.phrases.get(&key) {
                    matched = Some((n, entity));
                    break;
                }
            }
            match matched {
                Some((n, entity)) => {
                    let (start, end) = (ws[i].0, ws[i + n - 1].1);
                    out.push(EntityAnnotation {
                        entity_id: entity.clone(),
                        surface_form: chars[start..end].iter().collect(),
                        offset: start,
                        confidence: 1.0,
                    });
                    i += n;
                }
                None => i += 1,
            }
        }
        out
    }
}

pub fn annotate_gazetteer(document: &Document, gazetteer: &Gazetteer) -> Vec<EntityAnnotation> {
    gazetteer.annotate_text(&document.raw_text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gmo() -> Gazetteer {
        Gazetteer::new([
            ("genetically modified organism", "Genetically_modified_organism"),
            ("organism", "Organism"),
            ("Basque people", "Basque_people"),
        ])
    }

    #[test]
    fn longest_match_wins() {
        let out = gmo().annotate_text("genetically modified organisms");
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].entity_id, "Genetically_modified_organism");
        assert_eq!(out[0].surface_form, "genetically modified organisms");
        let out = gmo().annotate_text("Genetically modified organism in food");
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].entity_id, "Genetically_modified_organism");
        assert_eq!(out[0].offset, 0);
        assert_eq!(out[0].surface_form, "Genetically modified organism");
        assert_eq!(out[0].confidence, 1.0);
    }

    #[test]
    fn no_phrase_no_annotation() {
        assert!(gmo().annotate_text("nothing to see here").is_empty());
    }

    #[test]
    fn repeated_phrase_twice() {
        let out = gmo().annotate_text("The Basque people, and again basque  people.");
        let offsets: Vec<_> = out.iter().map(|a| a.offset).collect();
        assert_eq!(offsets, vec![4, 29]);
        assert_eq!(out[1].surface_form, "basque  people");
    }

    #[test]
    fn punctuation_breaks_phrase() {
        let out = gmo().annotate_text("basque, people");
        assert!(out.is_empty());
    }

    #[test]
    fn plural_folding() {
        assert_eq!(fold_word("Organisms"), "organism");
        assert_eq!(fold_word("policies"), "policy");
        assert_eq!(fold_word("businesses"), "business");
        assert_eq!(fold_word("business"), "business");
        assert_eq!(fold_word("consensus"), "consensus");
        assert_eq!(fold_word("gas"), "gas");
    }

    #[test]
    fn word_boundaries_respected() {
        let g = Gazetteer::new([("aid", "Aid")]);
        assert!(g.annotate_text("said maid").is_empty());
        assert_eq!(g.annotate_text("development aid.").len(), 1);
    }

    #[test]
    fn char_offsets_with_multibyte_text() {
        let g = Gazetteer::new([("euskadi", "Basque_Country")]);
        let text = "Ñoño Euskadi";
        let out = g.annotate_text(text);
        assert_eq!(out[0].offset, 5);
        let slice: String = text.chars().skip(5).take(7).collect();
        assert_eq!(slice, out[0].surface_form);
    }

    #[test]
    fn reads_tsv_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.tsv");
        std::fs::write(&p, "surface_form\tentity_id\nBasque people\tBasque_people\nconsumers\tConsumer\n").unwrap();
        let g = Gazetteer::from_file(&p).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.annotate_text("Consumers")[0].entity_id, "Consumer");
    }

    proptest! {
        #[test]
        fn matches_never_overlap(text in "(basque|people|organism|genetically|modified| |, ){0,40}") {
            let out = gmo().annotate_text(&text);
            let again = gmo().annotate_text(&text);
            prop_assert_eq!(&out, &again);
            for pair in out.windows(2) {
                let end = pair[0].offset + pair[0].surface_form.chars().count();
                prop_assert!(end <= pair[1].offset);
            }
        }
    }
}
