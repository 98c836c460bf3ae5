// Rank entities by tf-idf and pick each document's top-k labels.
//
// `cargo run --example tfidf_labels`

use ellda::labels::{build_label_space, compute_entity_tfidf, select_labels};
use ellda::linking::{DocAnnotations, EntityAnnotation};

fn mentions(entities: &[&str]) -> Vec<EntityAnnotation> {
    entities
        .iter()
        .enumerate()
        .map(|(i, e)| EntityAnnotation {
            entity_id: e.to_string(),
            surface_form: e.replace('_', " "),
            offset: i * 10,
            confidence: 1.0,
        })
        .collect()
}

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let mut annotations = DocAnnotations::new();
    annotations.insert(
        "greens".into(),
        mentions(&["Genetically_modified_organism", "Consumer", "Consumer", "Europe", "Farmer"]),
    );
    annotations.insert("basque".into(), mentions(&["Basque_people", "Basque_people", "Spain", "Europe"]));
    annotations.insert("labour".into(), mentions(&["Trade_union", "Employment", "Europe", "Spain"]));

    let scores = compute_entity_tfidf(&annotations, annotations.len());
    for (doc_id, list) in &scores {
        for s in list {
            println!("{doc_id:<8} {:<30} tf={} df={} score={:.3}", s.entity_id, s.tf, s.df, s.score);
        }
    }
    let labels = select_labels(&scores, 2);
    for a in &labels {
        println!("{:<8} -> {}", a.doc_id, a.labels.join(", "));
    }
    let space = build_label_space(&labels)?;
    println!("label space: {}", space.labels().join(", "));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
