// Train Labeled LDA on a small synthetic corpus where every label owns a
// block of words, and print what each label learned.
//
// `cargo run --release --example labeled_lda`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ellda::corpus::{Corpus, Document, Vocabulary};
use ellda::inference::{run_inference, InferenceConfig, InferenceMode};
use ellda::labels::{build_label_space, LabelAssignment};

const LABELS: [&str; 4] = ["Agriculture", "Energy", "Migration", "Taxation"];
const WORDS_PER_LABEL: usize = 10;

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let vocab = Vocabulary::from_terms(
        LABELS
            .iter()
            .flat_map(|l| (0..WORDS_PER_LABEL).map(move |i| format!("{}{i}", &l[..3].to_lowercase()))),
    );
    let mut documents = Vec::new();
    let mut assignments = Vec::new();
    for d in 0..12 {
        let pair = [d % 4, (d + 1 + d / 4) % 4];
        let tokens = (0..150)
            .map(|_| (pair[rng.random_range(0..2)] * WORDS_PER_LABEL + rng.random_range(0..WORDS_PER_LABEL)) as u32)
            .collect();
        documents.push(Document {
            doc_id: format!("doc{d:02}"),
            party: format!("Party {d}"),
            raw_text: String::new(),
            tokens,
        });
        assignments.push(LabelAssignment {
            doc_id: format!("doc{d:02}"),
            labels: pair.iter().map(|&l| LABELS[l].to_string()).collect(),
        });
    }
    let corpus = Corpus::new(documents, vocab)?;
    let space = build_label_space(&assignments)?;
    let config = InferenceConfig {
        iterations: 300,
        burn_in: 50,
        ..InferenceConfig::default()
    };
    let model = run_inference(
        &corpus,
        InferenceMode::Labeled {
            space: &space,
            assignments: &assignments,
        },
        &config,
    )?;
    for (k, name) in model.topic_names.iter().enumerate() {
        println!("{name:<12} {}", model.top_words(k, 5).join(" "));
    }
    let d = model.doc_index("doc00").unwrap();
    for (k, name) in model.topic_names.iter().enumerate() {
        if model.theta[[d, k]] > 0.0 {
            println!("doc00 {name:<12} {:.3}", model.theta[[d, k]]);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
