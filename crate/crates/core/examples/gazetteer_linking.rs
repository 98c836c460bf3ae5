// Link entities with the bundled gazetteer, then apply the confidence,
// blocklist and document-frequency filters.
//
// `cargo run --example gazetteer_linking`

use std::path::Path;

use ellda::corpus::{load_corpus, TextPipeline};
use ellda::linking::{annotate_documents, filter_annotations, parse_blocklist, FilterPolicy, Gazetteer, RateLimit};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let mini = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let gazetteer = Gazetteer::from_file(&mini.join("gazetteer.tsv"))?;
    for a in gazetteer.annotate_text("The European Parliament banned genetically modified organisms.") {
        println!("{:>3} {:<32} {}", a.offset, a.entity_id, a.surface_form);
    }

    let corpus = load_corpus(&mini.join("texts"), &mini.join("manifest.csv"), &TextPipeline::default(), 1)?;
    let raw = annotate_documents(&gazetteer, corpus.documents(), &RateLimit::default())?;
    let blocklist = parse_blocklist(&std::fs::read_to_string(mini.join("blocklist.txt"))?);
    let policy = FilterPolicy::new(0.1, blocklist, 0.8)?;
    let kept = filter_annotations(&raw, &policy, corpus.len());
    for (doc_id, list) in &raw {
        println!("{doc_id:<18} {:>3} raw  {:>3} kept", list.len(), kept[doc_id].len());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
