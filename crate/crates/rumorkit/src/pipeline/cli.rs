//! Command-line surface: ingest, query, evaluate, retrieval-eval,
//! dedup-frames, fuse-text, loss, and train.
//!
//! Structured output goes to stdout, diagnostics to stderr. Exit codes:
//! 0 success, 1 usage error, 2 data error.

use super::config::PipelineConfig;
use super::persist::{load_index, save_index};
use super::records;
use super::PipelineError;
use crate::classifier::{self, Prediction};
use crate::contrastive::{self, LossConfig};
use crate::hnsw::HnswIndex;
use crate::metrics::{self, MetricsReport};
use crate::model::{summarize, Label};
use crate::phash;
use crate::textfusion;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

/// Version line shown by `--version`; the format suffix must track
/// [`INDEX_FORMAT_VERSION`] (checked by a test).
const VERSION_LINE: &str = concat!(env!("CARGO_PKG_VERSION"), " (index format v1)");

#[derive(Debug, Parser)]
#[command(
    name = "rumorkit",
    version = VERSION_LINE,
    about = "Retrieval-augmented short-video rumor classification toolkit"
)]
struct Cli {
    /// JSON config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Records to ingest (JSON Lines).
    #[arg(long)]
    input: PathBuf,
    /// Output index file.
    #[arg(long)]
    index: PathBuf,
    /// Corpus vector dimension; inferred from the first record when omitted.
    #[arg(long)]
    dim: Option<usize>,
    /// Level-assignment RNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    /// JSON file holding the query vector as a plain array.
    #[arg(long)]
    vector: PathBuf,
    /// Neighbors to consult.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    index: PathBuf,
    /// Labeled test records (JSON Lines).
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    /// Also write per-record (actual, predicted, score) lines to this file.
    #[arg(long)]
    dump_pairs: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RetrievalEvalArgs {
    #[arg(long)]
    index: PathBuf,
    /// Event-tagged query records (JSON Lines).
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Debug, Args)]
struct DedupFramesArgs {
    /// Hash stream (JSON Lines with hex `hash`, `index`, `timestamp`).
    #[arg(long)]
    input: PathBuf,
    /// Lookback window in stream elements.
    #[arg(long)]
    window: Option<usize>,
    /// Hamming threshold below which two hashes count as similar.
    #[arg(long)]
    threshold: Option<u32>,
}

#[derive(Debug, Args)]
struct FuseTextArgs {
    /// Audio-text stream (JSON Lines).
    #[arg(long)]
    audio: PathBuf,
    /// Image-text stream (JSON Lines).
    #[arg(long)]
    image: PathBuf,
    /// Similarity at or above which image text is dropped.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct LossArgs {
    /// Sample pairs (JSON Lines with `a`, `b`, `pair_label`).
    #[arg(long)]
    pairs: PathBuf,
    /// Restrict the loss to mined hard pairs.
    #[arg(long)]
    online: bool,
    #[arg(long)]
    margin: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    epochs: usize,
    #[arg(long)]
    lr: f64,
    #[arg(long)]
    seed: u64,
    /// Trained records are written here (JSON Lines).
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    margin: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a knowledge index from embedding records.
    Ingest(IngestArgs),
    /// Classify one query vector and print the prediction.
    Query(QueryArgs),
    /// Classify a labeled test set and print the metrics report.
    Evaluate(EvaluateArgs),
    /// Same-event top-k hit rate over tagged queries.
    RetrievalEval(RetrievalEvalArgs),
    /// Sliding-window deduplication of a perceptual-hash stream.
    DedupFrames(DedupFramesArgs),
    /// Merge audio-text and image-text streams into the video text.
    FuseText(FuseTextArgs),
    /// Contrastive batch loss and per-pair gradients.
    Loss(LossArgs),
    /// Desk-scale contrastive training on stored vectors.
    Train(TrainArgs),
}

/// Parses `argv` and runs the selected command, writing structured output to
/// `out` and diagnostics to `err`. Returns the process exit code.
pub fn run_command<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    1
                }
            };
        }
    };
    let config = match &cli.config {
        Some(path) => match PipelineConfig::from_file(path) {
            Ok(config) => config,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return 2;
            }
        },
        None => PipelineConfig::default(),
    };
    match execute(cli.command, &config, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), PipelineError> {
    let line = serde_json::to_string(value).expect("output types serialize infallibly");
    writeln!(out, "{line}").map_err(|e| PipelineError::io("<stdout>", e))
}

fn execute(
    command: Command,
    config: &PipelineConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), PipelineError> {
    match command {
        Command::Ingest(args) => ingest(args, config, out, err),
        Command::Query(args) => query(args, config, out),
        Command::Evaluate(args) => evaluate(args, config, out, err),
        Command::RetrievalEval(args) => retrieval_eval(args, config, out),
        Command::DedupFrames(args) => dedup_frames(args, config, out, err),
        Command::FuseText(args) => fuse_text(args, config, out),
        Command::Loss(args) => loss(args, config, out),
        Command::Train(args) => train(args, config, out),
    }
}

fn ingest(
    args: IngestArgs,
    config: &PipelineConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), PipelineError> {
    let (records, dim) = match args.dim.or(config.dim) {
        Some(dim) => (records::load_records(&args.input, dim)?, dim),
        None => records::load_records_infer(&args.input)?,
    };
    let mut params = config.hnsw.clone();
    if let Some(seed) = args.seed {
        params.rng_seed = seed;
    }
    let mut index = HnswIndex::new(dim, params)?;
    for record in &records {
        index.insert(record.clone())?;
    }
    save_index(&index, &args.index)?;
    let _ = writeln!(err, "ingested {} records into {}", records.len(), args.index.display());

    #[derive(Serialize)]
    struct IngestSummary {
        index: PathBuf,
        dim: usize,
        records: crate::model::DatasetSummary,
    }
    print_json(
        out,
        &IngestSummary {
            index: args.index,
            dim,
            records: summarize(&records),
        },
    )
}

fn load_query_vector(path: &PathBuf) -> Result<Vec<f64>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Parse {
        path: path.clone(),
        line: 1,
        message: format!("expected a JSON array of numbers: {e}"),
    })
}

fn query(args: QueryArgs, config: &PipelineConfig, out: &mut dyn Write) -> Result<(), PipelineError> {
    let index = load_index(&args.index)?;
    let vector = load_query_vector(&args.vector)?;
    let k = args.k.unwrap_or(config.k);
    let prediction = classifier::predict(&index, &vector, k)?;
    print_json(out, &prediction)
}

#[derive(Serialize)]
struct EvaluatedPair {
    id: String,
    actual: Label,
    predicted: Label,
    rumor_score: f64,
}

fn evaluate(
    args: EvaluateArgs,
    config: &PipelineConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), PipelineError> {
    let index = load_index(&args.index)?;
    let test = records::load_records(&args.test, index.dim())?;
    let k = args.k.unwrap_or(config.k);
    // the index is immutable here, so records classify in parallel; collect
    // preserves input order
    let predictions: Vec<Prediction> = test
        .par_iter()
        .map(|record| classifier::predict(&index, &record.vector, k))
        .collect::<Result<_, _>>()?;

    let evaluated: Vec<EvaluatedPair> = test
        .iter()
        .zip(&predictions)
        .map(|(record, prediction)| EvaluatedPair {
            id: record.id.clone(),
            actual: record.label,
            predicted: prediction.label,
            rumor_score: prediction.rumor_score,
        })
        .collect();

    if let Some(path) = &args.dump_pairs {
        let mut file = std::fs::File::create(path).map_err(|e| PipelineError::io(path, e))?;
        for pair in &evaluated {
            let line = serde_json::to_string(pair).expect("output types serialize infallibly");
            writeln!(file, "{line}").map_err(|e| PipelineError::io(path, e))?;
        }
    }

    let pairs: Vec<(Label, Label)> = evaluated.iter().map(|p| (p.actual, p.predicted)).collect();
    let matrix = metrics::accumulate(&pairs);
    let scored: Vec<(f64, Label)> = evaluated.iter().map(|p| (p.rumor_score, p.actual)).collect();
    let report = MetricsReport::from_results(&matrix, &scored)?;
    let _ = write!(err, "{}", report.to_table());
    print_json(out, &report)
}

fn retrieval_eval(
    args: RetrievalEvalArgs,
    config: &PipelineConfig,
    out: &mut dyn Write,
) -> Result<(), PipelineError> {
    let index = load_index(&args.index)?;
    let queries = records::load_records(&args.queries, index.dim())?;
    let k = args.k.unwrap_or(config.k);
    let hit_rate = classifier::evaluate_retrieval(&index, &queries, k)?;

    #[derive(Serialize)]
    struct RetrievalSummary {
        hit_rate: f64,
        k: usize,
        queries: usize,
    }
    print_json(
        out,
        &RetrievalSummary {
            hit_rate,
            k,
            queries: queries.len(),
        },
    )
}

fn dedup_frames(
    args: DedupFramesArgs,
    config: &PipelineConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), PipelineError> {
    let frames = records::load_frame_hashes(&args.input)?;
    let window = args.window.unwrap_or(config.dedup.frame_window);
    let threshold = args.threshold.unwrap_or(config.dedup.hamming_threshold);
    let retained = phash::dedup_stream_with(&frames, window, threshold)?;
    let _ = writeln!(err, "retained {} of {} frames", retained.len(), frames.len());
    for frame in &retained {
        print_json(out, frame)?;
    }
    Ok(())
}

fn fuse_text(
    args: FuseTextArgs,
    config: &PipelineConfig,
    out: &mut dyn Write,
) -> Result<(), PipelineError> {
    let audio = records::load_timed_text(&args.audio)?;
    let image = records::load_timed_text(&args.image)?;
    let threshold = args
        .threshold
        .unwrap_or(config.dedup.text_similarity_threshold);
    let merged = textfusion::merge_streams(&audio, &image, threshold)?;
    let text = textfusion::concat_text(&merged);

    #[derive(Serialize)]
    struct FusionOutput {
        merged: Vec<textfusion::TimedText>,
        text: String,
    }
    print_json(out, &FusionOutput { merged, text })
}

fn loss(args: LossArgs, config: &PipelineConfig, out: &mut dyn Write) -> Result<(), PipelineError> {
    let batch = records::load_pairs(&args.pairs)?;
    let mut loss_config = config.loss;
    if let Some(margin) = args.margin {
        loss_config = LossConfig { margin };
    }
    let value = contrastive::batch_loss(&batch, &loss_config, args.online)?;
    let selected: Vec<usize> = if args.online {
        contrastive::mine_hard_indices(&batch, &loss_config)?
    } else {
        (0..batch.len()).collect()
    };

    #[derive(Serialize)]
    struct PairGradient {
        pair: usize,
        loss: f64,
        grad_a: Vec<f64>,
        grad_b: Vec<f64>,
    }
    #[derive(Serialize)]
    struct LossOutput {
        loss: f64,
        online: bool,
        selected: usize,
        gradients: Vec<PairGradient>,
    }
    let mut gradients = Vec::with_capacity(selected.len());
    for index in selected {
        let pair = &batch[index];
        let (grad_a, grad_b) = contrastive::loss_gradient(pair, &loss_config)?;
        gradients.push(PairGradient {
            pair: index,
            loss: contrastive::contrastive_loss(pair, &loss_config)?,
            grad_a,
            grad_b,
        });
    }
    print_json(
        out,
        &LossOutput {
            loss: value,
            online: args.online,
            selected: gradients.len(),
            gradients,
        },
    )
}

fn train(args: TrainArgs, config: &PipelineConfig, out: &mut dyn Write) -> Result<(), PipelineError> {
    let (input, _) = records::load_records_infer(&args.input)?;
    let mut loss_config = config.loss;
    if let Some(margin) = args.margin {
        loss_config = LossConfig { margin };
    }
    let outcome =
        contrastive::train_embeddings(&input, &loss_config, args.epochs, args.lr, args.seed)?;
    records::save_records(&args.output, &outcome.records)?;

    #[derive(Serialize)]
    struct TrainSummary {
        output: PathBuf,
        records: usize,
        epochs: usize,
        initial_loss: f64,
        final_loss: f64,
    }
    print_json(
        out,
        &TrainSummary {
            output: args.output,
            records: outcome.records.len(),
            epochs: args.epochs,
            initial_loss: outcome.initial_loss,
            final_loss: outcome.final_loss,
        },
    )
}

/// Convenience wrapper for one-off invocations from examples and tests.
pub fn run_to_string(argv: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_command(argv.iter().copied(), &mut out, &mut err);
    (
        code,
        String::from_utf8_lossy(&out).into_owned(),
        String::from_utf8_lossy(&err).into_owned(),
    )
}
