// Parse a recorded annotation-service response. With `ELLDA_ENDPOINT` set
// the same text is also sent to that live service.
//
// `ELLDA_ENDPOINT=https://api.dbpedia-spotlight.org/en cargo run --example spotlight_client`

use std::path::Path;

use ellda::corpus::Document;
use ellda::linking::{annotate_remote, parse_spotlight_response, SpotlightClient};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let body = std::fs::read(fixtures.join("spotlight_les_verts.json"))?;
    for a in parse_spotlight_response(&body)? {
        println!("{:>3} {:<32} {:<32} {:.4}", a.offset, a.entity_id, a.surface_form, a.confidence);
    }

    match parse_spotlight_response(&std::fs::read(fixtures.join("spotlight_truncated.json"))?) {
        Ok(_) => println!("truncated body parsed?"),
        Err(e) => println!("truncated body: {e}"),
    }

    if let Ok(endpoint) = std::env::var("ELLDA_ENDPOINT") {
        let doc = Document {
            doc_id: "fr-verts".into(),
            party: "Les Verts".into(),
            raw_text: std::fs::read_to_string(fixtures.join("spotlight_les_verts.txt"))?,
            tokens: Vec::new(),
        };
        let client = SpotlightClient::new(endpoint).with_confidence(0.0);
        for a in annotate_remote(&client, &doc)? {
            println!("live {:>3} {} {:.4}", a.offset, a.entity_id, a.confidence);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
