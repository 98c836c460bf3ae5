// Run every stage on a scratch copy of the bundled corpus and print the
// markdown report.
//
// `cargo run --release --example pipeline_report`

use std::path::Path;

use ellda::pipeline::{Overrides, Pipeline};
use ellda::report::{render, ReportFormat};

fn copy_tree(from: &Path, to: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(to)?;
    for entry in std::fs::read_dir(from)? {
        let entry = entry?;
        if entry.file_name() == "out" {
            continue;
        }
        let target = to.join(entry.file_name());
        if entry.file_type()?.is_dir() {
            copy_tree(&entry.path(), &target)?;
        } else {
            std::fs::copy(entry.path(), target)?;
        }
    }
    Ok(())
}

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let scratch = tempfile::tempdir()?;
    copy_tree(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini"), scratch.path())?;
    let pipeline = Pipeline::open(&scratch.path().join("config.toml"), &Overrides::default())?;
    let report = pipeline.run_all()?;
    print!("{}", String::from_utf8(render(&report, ReportFormat::Markdown)?)?);
    for name in std::fs::read_dir(pipeline.output_dir())? {
        println!("artifact: {}", name?.file_name().to_string_lossy());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
