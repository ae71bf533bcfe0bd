//! Command-line pipeline: synthetic data, ingestion, training of the
//! clustering variants, evaluation and export of plot-ready CSVs.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod model;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stdec::dec::LossWeights;

use crate::config::{KRange, ModelKind, RunConfig, SynthSource};
use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "stdec", version, about = "Spatio-temporal clustering of road sensor time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a planted-region dataset and its ground truth
    Synth(SynthArgs),
    /// Clean a flow CSV into the wide raster format
    Ingest(IngestArgs),
    /// Train one clustering variant
    Train(TrainArgs),
    /// Compare trained models on a dataset
    Evaluate(EvaluateArgs),
    /// Inertia curve and knee over a range of cluster counts
    Elbow(ElbowArgs),
    /// Latents, assignments and anomaly grid of one model
    Export(ExportArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u64).range(1..))]
    pub sensors: u64,
    #[arg(long, default_value_t = 14, value_parser = clap::value_parser!(u64).range(1..))]
    pub days: u64,
    /// Contiguous regions, each with its own daily pattern
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub regions: u64,
    /// Standard deviation of the additive noise
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, env = "STDEC_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Planted drop `sensor:start:len:factor` (repeatable)
    #[arg(long = "drop")]
    pub drops: Vec<String>,
    /// Output directory for raster.csv and ground_truth.csv
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LayoutArg {
    Auto,
    Wide,
    Long,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Wide `timestamp,s1,..` or long `timestamp,sensor_id,flow` CSV
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub layout: LayoutArg,
    /// File with one sensor id per line giving the road order
    #[arg(long)]
    pub sensor_order: Option<PathBuf>,
    /// Output CSV path
    #[arg(long)]
    pub out: PathBuf,
}

/// Data selection shared by every command that reads a dataset.
#[derive(Args, Debug, Clone, Default)]
pub struct DataFlags {
    /// JSON run configuration; flags take precedence over it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Flow CSV (wide or long)
    #[arg(long, conflicts_with = "synthetic")]
    pub data: Option<PathBuf>,
    /// Generated data `sensors=N,days=N,regions=N[,noise=X][,seed=N]`
    #[arg(long)]
    pub synthetic: Option<SynthSource>,
    /// Sliding window length
    #[arg(long)]
    pub w: Option<usize>,
    /// DTW band radius
    #[arg(long)]
    pub band: Option<usize>,
    /// Fit scaling on this leading fraction of time and hold out the rest
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long, env = "STDEC_SEED")]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct TrainFlags {
    #[arg(long, value_enum)]
    pub variant: Option<ModelKind>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Choose k at the knee of `min:max[:step]`
    #[arg(long)]
    pub elbow: Option<KRange>,
    /// Spatial loss weight
    #[arg(long)]
    pub alpha0: Option<f64>,
    /// Clustering loss weight
    #[arg(long)]
    pub alpha1: Option<f64>,
    /// Reconstruction loss weight
    #[arg(long)]
    pub alpha2: Option<f64>,
    #[arg(long = "batch")]
    pub batch_size: Option<usize>,
    /// Upper bound on joint-training epochs
    #[arg(long = "epochs")]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    /// Assignment-change fraction that ends training
    #[arg(long, conflicts_with = "no_early_stop")]
    pub early_stop: Option<f64>,
    #[arg(long)]
    pub no_early_stop: bool,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    /// k-means restarts for initialization and baselines
    #[arg(long = "restarts")]
    pub kmeans_restarts: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Rows sampled to fit DTW medoids
    #[arg(long)]
    pub max_fit: Option<usize>,
    /// Spatial weight matrix CSV replacing the line prior
    #[arg(long)]
    pub lambda: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataFlags,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ElbowSpace {
    /// Latents of the pretrained autoencoder
    Latent,
    /// The normalized windows
    Raw,
}

#[derive(Args, Debug)]
pub struct ElbowArgs {
    #[command(flatten)]
    pub data: DataFlags,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long, value_enum, default_value = "latent")]
    pub space: ElbowSpace,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataFlags,
    /// Trained checkpoint (repeatable)
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write each model's latents as `t,i,z0..`
    #[arg(long)]
    pub export_latent: bool,
    /// Inertia curve of the first model's latents over `min:max[:step]`
    #[arg(long)]
    pub elbow: Option<KRange>,
    /// Evaluate the held-out part instead of the training part
    #[arg(long)]
    pub test: bool,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[command(flatten)]
    pub data: DataFlags,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub test: bool,
}

/// Config file (or defaults) with flags applied on top. Returns the file
/// text too, for echoing into the output directory.
pub fn resolve(data: &DataFlags, train: Option<&TrainFlags>) -> CliResult<(RunConfig, Option<String>)> {
    let (mut cfg, text) = match &data.config {
        Some(path) => (RunConfig::from_file(path)?, Some(std::fs::read_to_string(path)?)),
        None => (RunConfig::default(), None),
    };
    if let Some(p) = &data.data {
        cfg.data = Some(p.clone());
        cfg.synthetic = None;
    }
    if let Some(s) = &data.synthetic {
        cfg.synthetic = Some(s.clone());
        cfg.data = None;
    }
    set(&mut cfg.w, data.w);
    set(&mut cfg.band, data.band);
    if data.train_fraction.is_some() {
        cfg.train_fraction = data.train_fraction;
    }
    set(&mut cfg.seed, data.seed);

    if let Some(t) = train {
        set(&mut cfg.variant, t.variant);
        set(&mut cfg.k, t.k);
        if t.elbow.is_some() {
            cfg.elbow = t.elbow;
        }
        if t.alpha0.is_some() || t.alpha1.is_some() || t.alpha2.is_some() {
            let base = cfg.weights();
            cfg.weights = Some(LossWeights {
                alpha0: t.alpha0.unwrap_or(base.alpha0),
                alpha1: t.alpha1.unwrap_or(base.alpha1),
                alpha2: t.alpha2.unwrap_or(base.alpha2),
            });
        }
        set(&mut cfg.batch_size, t.batch_size);
        set(&mut cfg.max_epochs, t.max_epochs);
        set(&mut cfg.pretrain_epochs, t.pretrain_epochs);
        if t.no_early_stop {
            cfg.early_stop = None;
        } else if t.early_stop.is_some() {
            cfg.early_stop = t.early_stop;
        }
        set(&mut cfg.learning_rate, t.learning_rate);
        set(&mut cfg.kmeans_restarts, t.kmeans_restarts);
        set(&mut cfg.dropout, t.dropout);
        set(&mut cfg.max_fit, t.max_fit);
        if t.lambda.is_some() {
            cfg.lambda = t.lambda.clone();
        }
        if t.out.is_some() {
            cfg.out = t.out.clone();
        }
    }
    cfg.validate()?;
    Ok((cfg, text))
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

pub fn run(cli: Cli, argv: &[String]) -> CliResult<()> {
    match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Ingest(a) => commands::ingest(&a),
        Command::Train(a) => commands::train(&a, argv),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Elbow(a) => commands::elbow(&a),
        Command::Export(a) => commands::export(&a),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            let label = match e {
                CliError::Usage(_) => "usage error",
                CliError::Runtime(_) => "error",
            };
            eprintln!("{label}: {e}");
            e.exit_code()
        }
    }
}
