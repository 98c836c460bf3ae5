use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ellda::inference::ModelKind;
use ellda::pipeline::{Overrides, Pipeline};
use ellda::report::ReportFormat;

#[derive(Parser)]
#[command(name = "ellda", version, about = "Entity-labeled topic models")]
struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true, default_value = "ellda.toml")]
    config: PathBuf,
    /// Sampler seed, overriding `train.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report format, overriding `report.format`.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Annotation service base URL, overriding `link.endpoint`.
    #[arg(long, global = true)]
    endpoint: Option<String>,
    /// Use the gazetteer linker regardless of `link.method`.
    #[arg(long, global = true)]
    offline: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize the corpus into corpus.txt.
    Ingest,
    /// Link entities and write the filtered annotations.tsv.
    Link,
    /// Select each document's top tf-idf entities into labels.tsv.
    Label,
    /// Train the Standard and/or Labeled LDA models.
    Train {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Render the comparison report.
    Report,
    /// Run every stage in order.
    Pipeline,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Standard,
    Labeled,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Markdown,
    Csv,
    Jsonl,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let overrides = Overrides {
        seed: cli.seed,
        endpoint: cli.endpoint,
        format: cli.format.map(|f| match f {
            Format::Markdown => ReportFormat::Markdown,
            Format::Csv => ReportFormat::Csv,
            Format::Jsonl => ReportFormat::Jsonl,
        }),
        offline: cli.offline,
    };
    let result = Pipeline::open(&cli.config, &overrides).and_then(|p| match cli.command {
        Command::Ingest => p.ingest().map(drop),
        Command::Link => p.link().map(drop),
        Command::Label => p.label().map(drop),
        Command::Train { mode } => p.train(mode.map(|m| match m {
            Mode::Standard => ModelKind::Standard,
            Mode::Labeled => ModelKind::Labeled,
        })),
        Command::Report => p.report().map(drop),
        Command::Pipeline => p.run_all().map(drop),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
