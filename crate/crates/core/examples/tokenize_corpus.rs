// Tokenize the bundled manifest into a corpus and show a few documents.
//
// `cargo run --example tokenize_corpus`

use std::path::Path;

use ellda::corpus::{load_corpus, TextPipeline};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let mini = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let pipeline = TextPipeline::default();
    println!("{:?}", pipeline.tokenize("Farmers are farming GMO-free food for consumers."));

    let corpus = load_corpus(&mini.join("texts"), &mini.join("manifest.csv"), &pipeline, 1)?;
    println!("{corpus}");
    for doc in corpus.documents() {
        let head: Vec<&str> = corpus.decode(doc).into_iter().take(8).collect();
        println!("{:<18} {:>4} tokens  {}", doc.doc_id, doc.len(), head.join(" "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
