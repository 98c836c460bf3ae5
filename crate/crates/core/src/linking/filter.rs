use std::collections::{BTreeSet, HashMap, HashSet};

use super::{DocAnnotations, LinkError};

/// Which annotations survive before label selection.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterPolicy {
    min_confidence: f64,
    blocklist: BTreeSet<String>,
    max_doc_fraction: f64,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            min_confidence: 0.1,
            blocklist: BTreeSet::new(),
            max_doc_fraction: 0.8,
        }
    }
}

impl FilterPolicy {
    pub fn new<I, S>(min_confidence: f64, blocklist: I, max_doc_fraction: f64) -> Result<Self, LinkError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if !(0.0..=1.0).contains(&min_confidence) {
            return Err(LinkError::Policy(format!(
                "min_confidence {min_confidence} outside [0, 1]"
            )));
        }
        if !(max_doc_fraction > 0.0 && max_doc_fraction <= 1.0) {
            return Err(LinkError::Policy(format!(
                "max_doc_fraction {max_doc_fraction} outside (0, 1]"
            )));
        }
        Ok(Self {
            min_confidence,
            blocklist: blocklist.into_iter().map(Into::into).collect(),
            max_doc_fraction,
        })
    }

    pub fn min_confidence(&self) -> f64 {
        self.min_confidence
    }

    pub fn max_doc_fraction(&self) -> f64 {
        self.max_doc_fraction
    }

    pub fn blocklist(&self) -> &BTreeSet<String> {
        &self.blocklist
    }
}

/// One entity id per line; blank lines and lines starting with `#` are
/// skipped.
pub fn parse_blocklist(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

/// Applies, in order: the confidence floor (annotations at exactly
/// `min_confidence` are kept), the blocklist, then removal of entities that
/// occur in more than `max_doc_fraction` of the `corpus_size` documents.
/// Document frequency is counted after the first two filters.
pub fn filter_annotations(
    annotations: &DocAnnotations,
    policy: &FilterPolicy,
    corpus_size: usize,
) -> DocAnnotations {
    assert!(corpus_size >= 1, "corpus_size must be at least 1");
    let mut kept: DocAnnotations = annotations
        .iter()
        .map(|(doc, list)| {
            let list = list
                .iter()
                .filter(|a| a.confidence >= policy.min_confidence)
                .filter(|a| !policy.blocklist.contains(&a.entity_id))
                .cloned()
                .collect();
            (doc.clone(), list)
        })
        .collect();

    let mut df: HashMap<&str, usize> = HashMap::new();
    for list in kept.values() {
        let distinct: HashSet<&str> = list.iter().map(|a| a.entity_id.as_str()).collect();
        for e in distinct {
            *df.entry(e).or_default() += 1;
        }
    }
    let too_frequent: HashSet<String> = df
        .into_iter()
        .filter(|&(_, n)| n as f64 / corpus_size as f64 > policy.max_doc_fraction)
        .map(|(e, _)| e.to_owned())
        .collect();
    if !too_frequent.is_empty() {
        let mut dropped: Vec<_> = too_frequent.iter().collect();
        dropped.sort();
        log::info!("dropping corpus-wide entities: {dropped:?}");
        for list in kept.values_mut() {
            list.retain(|a| !too_frequent.contains(&a.entity_id));
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linking::EntityAnnotation;
    use proptest::prelude::*;

    fn ann(entity: &str, confidence: f64) -> EntityAnnotation {
        EntityAnnotation {
            entity_id: entity.into(),
            surface_form: entity.to_lowercase(),
            offset: 0,
            confidence,
        }
    }

    fn one_doc(list: Vec<EntityAnnotation>) -> DocAnnotations {
        [("d".to_string(), list)].into_iter().collect()
    }

    #[test]
    fn confidence_floor() {
        let input = one_doc(vec![ann("Consumer", 0.45), ann("Biodiversity", 0.09)]);
        let out = filter_annotations(&input, &FilterPolicy::default(), 3);
        assert_eq!(out["d"], vec![ann("Consumer", 0.45)]);
    }

    #[test]
    fn boundary_is_kept() {
        let input = one_doc(vec![ann("A", 0.1), ann("B", 0.0999)]);
        let out = filter_annotations(&input, &FilterPolicy::default(), 3);
        assert_eq!(out["d"], vec![ann("A", 0.1)]);
    }

    #[test]
    fn blocklist_removes() {
        let policy = FilterPolicy::new(0.1, ["Country", "European_Union"], 0.8).unwrap();
        let input = one_doc(vec![ann("European_Union", 0.9)]);
        assert!(filter_annotations(&input, &policy, 3)["d"].is_empty());
    }

    #[test]
    fn corpus_wide_entity_removed() {
        let input: DocAnnotations = (0..5)
            .map(|i| (format!("d{i}"), vec![ann("Everywhere", 0.9), ann(&format!("E{i}"), 0.9)]))
            .collect();
        let out = filter_annotations(&input, &FilterPolicy::default(), 5);
        for list in out.values() {
            assert_eq!(list.len(), 1);
            assert_ne!(list[0].entity_id, "Everywhere");
        }
    }

    #[test]
    fn df_counted_after_confidence_filter() {
        // present in 5/5 docs, but below threshold in 2 of them: df = 3/5 = 0.6
        let input: DocAnnotations = (0..5)
            .map(|i| {
                let c = if i < 2 { 0.05 } else { 0.5 };
                (format!("d{i}"), vec![ann("X", c)])
            })
            .collect();
        let out = filter_annotations(&input, &FilterPolicy::default(), 5);
        assert_eq!(out.values().filter(|l| !l.is_empty()).count(), 3);
    }

    #[test]
    fn invalid_policy() {
        assert!(FilterPolicy::new(1.5, Vec::<String>::new(), 0.8).is_err());
        assert!(FilterPolicy::new(0.1, Vec::<String>::new(), 0.0).is_err());
    }

    #[test]
    fn blocklist_file_format() {
        let b = parse_blocklist("# general entities\nCountry\n\nEuropean_Union\n  \n");
        assert_eq!(b.into_iter().collect::<Vec<_>>(), ["Country", "European_Union"]);
    }

    proptest! {
        #[test]
        fn raising_threshold_is_monotone(
            confs in prop::collection::vec((0usize..4, 0.0f64..1.0), 0..30),
            lo in 0.0f64..1.0,
            delta in 0.0f64..0.5,
        ) {
            let list: Vec<_> = confs.iter().map(|&(e, c)| ann(&format!("E{e}"), c)).collect();
            let input = one_doc(list.clone());
            let hi = (lo + delta).min(1.0);
            let low = filter_annotations(&input, &FilterPolicy::new(lo, Vec::<String>::new(), 1.0).unwrap(), 1);
            let high = filter_annotations(&input, &FilterPolicy::new(hi, Vec::<String>::new(), 1.0).unwrap(), 1);
            for a in &high["d"] {
                prop_assert!(low["d"].contains(a));
            }
            for a in &low["d"] {
                prop_assert!(list.contains(a));
            }
        }
    }
}
