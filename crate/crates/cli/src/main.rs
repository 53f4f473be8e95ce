//! `dyad` — pipeline driver for dyadic call analysis.
//!
//! Subcommands map onto pipeline stages: `align`, `segment`,
//! `dialogue-features`, `rhythm-features`, `analyze`, `classify`,
//! `simulate`, and `pipeline` (which chains them). Every stage writes CSV
//! artifacts plus a run manifest; re-running with identical config and
//! inputs reproduces the CSVs byte for byte (only the manifest timestamp
//! moves).

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "dyad", version, about = "Turn-taking analysis of dyadic clinical calls")]
struct Cli {
    /// Config file (TOML); defaults to $DYAD_CONFIG, then built-ins.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for stage-parallel work (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct AlignArgs {
    /// Patient-side (cellphone) recording, mono PCM WAV.
    #[arg(long)]
    cellphone: PathBuf,
    /// Clinician-side (landline) recording containing both speakers.
    #[arg(long)]
    landline: PathBuf,
    /// Optional CSV to write the result to.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    cellphone: PathBuf,
    #[arg(long)]
    landline: PathBuf,
    /// Call identifier used in the timeline CSV.
    #[arg(long)]
    call_id: String,
    #[arg(long)]
    out_dir: PathBuf,
    /// Override segmentation merge gap (ms).
    #[arg(long)]
    merge_gap_ms: Option<u64>,
}

#[derive(Args)]
struct DialogueArgs {
    /// Timeline CSV (from `segment`, `simulate`, or pre-segmented data).
    #[arg(long)]
    timeline: PathBuf,
    /// Metadata sidecar CSV (ids, genders, scores, durations).
    #[arg(long)]
    meta: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RhythmArgs {
    /// Single recording to featurize (requires --call-id)...
    #[arg(long, conflicts_with = "audio_dir", requires = "call_id")]
    audio: Option<PathBuf>,
    #[arg(long)]
    call_id: Option<String>,
    /// ...or a directory of `<call_id>.wav` files.
    #[arg(long)]
    audio_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Dialogue feature CSV.
    #[arg(long)]
    features: PathBuf,
    /// Metadata sidecar with clinician genders (enables the reproduction
    /// filter).
    #[arg(long)]
    meta: Option<PathBuf>,
    /// euthymic-vs-depressed, euthymic-vs-manic, or both.
    #[arg(long, default_value = "both")]
    pair: String,
    #[arg(long)]
    alpha: Option<f64>,
    /// Keep calls from clinicians of any gender.
    #[arg(long)]
    all_clinicians: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Dialogue feature CSV.
    #[arg(long)]
    features: PathBuf,
    /// Rhythm feature CSV (required for rhythm/both feature sets).
    #[arg(long)]
    rhythm: Option<PathBuf>,
    #[arg(long)]
    meta: Option<PathBuf>,
    /// depression, mania, or both.
    #[arg(long, default_value = "depression")]
    task: String,
    /// Comma-separated: logreg,svm,mlp.
    #[arg(long, default_value = "logreg")]
    classifiers: String,
    /// Comma-separated: dialogue,rhythm,both.
    #[arg(long, default_value = "both")]
    feature_sets: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    out_dir: PathBuf,
    /// Named preset: `table1` ships the published effect estimates as the
    /// injected shifts.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    patients: Option<usize>,
    #[arg(long)]
    calls_per_patient: Option<usize>,
    /// Render paired WAV fixtures for the first N calls.
    #[arg(long)]
    render_audio: Option<usize>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Directory of `<call_id>_cell.wav` / `<call_id>_land.wav` pairs...
    #[arg(long, conflicts_with = "timeline")]
    input_dir: Option<PathBuf>,
    /// ...or a pre-segmented timeline CSV (skips audio stages).
    #[arg(long)]
    timeline: Option<PathBuf>,
    /// Metadata sidecar (required).
    #[arg(long)]
    meta: PathBuf,
    #[arg(long, default_value = "depression")]
    task: String,
    #[arg(long, default_value = "logreg")]
    classifiers: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the cellphone-to-landline alignment offset.
    Align(AlignArgs),
    /// Align, detect speech, and derive the speaker-turn timeline.
    Segment(SegmentArgs),
    /// Compute the 20 interaction features per call.
    DialogueFeatures(DialogueArgs),
    /// Compute the 70 rhythm statistics per call from audio.
    RhythmFeatures(RhythmArgs),
    /// Mixed-model analysis of mood effects with FDR control.
    Analyze(AnalyzeArgs),
    /// Leave-one-speaker-out mood-episode classification.
    Classify(ClassifyArgs),
    /// Generate a synthetic cohort with known ground truth.
    Simulate(SimulateArgs),
    /// Chain segment -> features -> analyze -> classify.
    Pipeline(PipelineArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) =
            rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()
        {
            eprintln!("dyad: failed to set --jobs: {e}");
            return ExitCode::FAILURE;
        }
    }
    let config = match RunConfig::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("dyad: config: {e:#}");
            return ExitCode::FAILURE;
        }
    };

    let (stage, result) = match cli.command {
        Command::Align(args) => ("align", commands::align(&config, args)),
        Command::Segment(args) => ("segment", commands::segment(&config, args)),
        Command::DialogueFeatures(args) => {
            ("dialogue-features", commands::dialogue_features(&config, args))
        }
        Command::RhythmFeatures(args) => {
            ("rhythm-features", commands::rhythm_features(&config, args))
        }
        Command::Analyze(args) => ("analyze", commands::analyze(&config, args)),
        Command::Classify(args) => ("classify", commands::classify(&config, args)),
        Command::Simulate(args) => ("simulate", commands::simulate(&config, args)),
        Command::Pipeline(args) => ("pipeline", commands::pipeline(&config, args)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dyad: stage {stage}: {e:#}");
            ExitCode::FAILURE
        }
    }
}
