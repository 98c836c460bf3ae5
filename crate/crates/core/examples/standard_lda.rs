// Train unsupervised LDA on the bundled corpus and print its topics.
//
// `cargo run --release --example standard_lda`

use std::path::Path;

use ellda::corpus::{load_corpus, TextPipeline};
use ellda::inference::{run_inference, InferenceConfig, InferenceMode};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let mini = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let corpus = load_corpus(&mini.join("texts"), &mini.join("manifest.csv"), &TextPipeline::default(), 1)?;
    let config = InferenceConfig {
        topics: 6,
        alpha: Some(0.1),
        iterations: 300,
        burn_in: 50,
        ..InferenceConfig::default()
    };
    let model = run_inference(&corpus, InferenceMode::Standard, &config)?;
    for k in 0..model.num_topics() {
        println!("{:<8} {}", model.topic_names[k], model.top_words(k, 6).join(" "));
    }
    for (d, doc_id) in model.doc_ids.iter().enumerate() {
        let row = model.theta.row(d);
        let (best, p) = row
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (k, &p)| if p > acc.1 { (k, p) } else { acc });
        println!("{doc_id:<18} topic_{best} {p:.2}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
