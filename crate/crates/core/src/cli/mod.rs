//! The `headmotion` command-line tool.

mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use plot::render_svg;

use crate::data::{generate_synthetic, load_dataset, load_manifest, Coupling, SynthConfig};
use crate::error::{Error, Result};
use crate::eval::{benchmark_speed, mae, run_cross_validation, CvConfig, CvModel, FoldMode};
use crate::model::{
    load_checkpoint, model_forward, param_count, save_checkpoint, Architecture, FeatureConfig, ModelKind,
};
use crate::signal::{
    load_external_features, read_feature_file, read_wav, write_feature_file, MfccConfig, MfccExtractor, PoseSequence,
    WAV2VEC2_DIM,
};
use crate::training::{train, write_loss_history, TrainConfig};

/// Listener head-motion generation from speech.
#[derive(Debug, Parser)]
#[command(name = "headmotion", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic speech/head-motion corpus.
    Synth(SynthArgs),
    /// Extract MFCC features from a WAV file into a feature binary.
    Features(FeaturesArgs),
    /// Train with cross-validation (or once on all data with --no-cv).
    Train(TrainArgs),
    /// Generate a pose CSV from speech with a trained checkpoint.
    Generate(GenerateArgs),
    /// Mean absolute error between two pose CSVs.
    Eval(EvalArgs),
    /// Measure generation speed and latency against real-time targets.
    Bench(BenchArgs),
    /// Plot predicted and ground-truth poses as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CouplingArg {
    Affine,
    Nonlinear,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub pairs: usize,
    #[arg(long, default_value_t = 5)]
    pub sessions: usize,
    #[arg(long, default_value_t = 2)]
    pub subjects_per_session: usize,
    /// Shortest clip, seconds.
    #[arg(long, default_value_t = 2.0)]
    pub min_duration: f64,
    /// Longest clip, seconds.
    #[arg(long, default_value_t = 4.0)]
    pub max_duration: f64,
    /// Angle noise standard deviation, degrees.
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, value_enum, default_value_t = CouplingArg::Nonlinear)]
    pub coupling: CouplingArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub wav: PathBuf,
    /// Output feature binary.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Proposed,
    Lstm,
    Linear,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Proposed => ModelKind::Proposed,
            ModelArg::Lstm => ModelKind::LstmBaseline,
            ModelArg::Linear => ModelKind::LinearBaseline,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeatureArg {
    Mfcc,
    External,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Independent,
    Dependent,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Proposed)]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value_t = FeatureArg::Mfcc)]
    pub features: FeatureArg,
    /// Channels per frame of external features.
    #[arg(long)]
    pub feature_dim: Option<usize>,
    /// Frame rate of external features [default: 50 for 512 channels, else 30].
    #[arg(long)]
    pub frame_rate: Option<f64>,
    /// Extra per-frame channels appended from each entry's extra_feature_path.
    #[arg(long, default_value_t = 0)]
    pub extra_dim: usize,
    /// Disable the learnable output smoothing.
    #[arg(long)]
    pub no_smoothing: bool,
    /// Drop the cosine-similarity term from the loss.
    #[arg(long)]
    pub no_cosine: bool,
    /// Fold scheme [default: independent].
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Train once on every pair instead of cross-validating.
    #[arg(long)]
    pub no_cv: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    /// Folds trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["wav", "features_file"]))]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub wav: Option<PathBuf>,
    /// Precomputed feature binary.
    #[arg(long)]
    pub features_file: Option<PathBuf>,
    /// Extra channels to append (feature binary, one row or one per frame).
    #[arg(long)]
    pub extra_features: Option<PathBuf>,
    /// Output pose CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub wav: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Worker threads (1 gives the most stable latency).
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Also write the result as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Problems with the command line itself; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

enum Failure {
    Usage(UsageError),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e)
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code:
/// 0 success, 2 usage error, 1 runtime error.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("HM_LOG", "info")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(UsageError(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Features(a) => features(a),
        Command::Train(a) => train_cmd(a),
        Command::Generate(a) => generate(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Plot(a) => plot(a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn synth(a: SynthArgs) -> Result<(), Failure> {
    let config = SynthConfig {
        num_pairs: a.pairs,
        num_sessions: a.sessions,
        subjects_per_session: a.subjects_per_session,
        min_duration_s: a.min_duration,
        max_duration_s: a.max_duration,
        seed: a.seed,
        noise_deg: a.noise,
        coupling: match a.coupling {
            CouplingArg::Affine => Coupling::EnergyAffine,
            CouplingArg::Nonlinear => Coupling::EnergyNonlinear,
        },
        ..SynthConfig::default()
    };
    config.validate().map_err(|e| UsageError(e.to_string()))?;
    let manifest = generate_synthetic(&config, &a.out)?;
    println!(
        "wrote {} pairs in {} sessions to {}",
        manifest.len(),
        manifest.sessions().len(),
        a.out.join("manifest.json").display()
    );
    Ok(())
}

fn features(a: FeaturesArgs) -> Result<(), Failure> {
    let clip = read_wav(&a.wav)?;
    let seq = MfccExtractor::new(MfccConfig::default())?.extract(&clip)?;
    write_feature_file(&a.out, seq.frames(), seq.frame_rate() as f32)?;
    println!(
        "{} frames x {} coefficients at {} Hz -> {}",
        seq.num_frames(),
        seq.feature_dim(),
        seq.frame_rate(),
        a.out.display()
    );
    Ok(())
}

fn feature_config(a: &TrainArgs) -> Result<FeatureConfig, UsageError> {
    match a.features {
        FeatureArg::Mfcc => {
            if a.feature_dim.is_some() || a.frame_rate.is_some() {
                return Err(UsageError(
                    "--feature-dim/--frame-rate only apply to --features external".into(),
                ));
            }
            Ok(FeatureConfig::Mfcc(MfccConfig::default()))
        }
        FeatureArg::External => {
            let dim = a
                .feature_dim
                .ok_or_else(|| UsageError("--features external needs --feature-dim".into()))?;
            let frame_rate = a.frame_rate.unwrap_or(if dim == WAV2VEC2_DIM { 50.0 } else { 30.0 });
            Ok(FeatureConfig::External { dim, frame_rate })
        }
    }
}

fn train_cmd(a: TrainArgs) -> Result<(), Failure> {
    let kind = ModelKind::from(a.model);
    if kind == ModelKind::LinearBaseline && (a.no_smoothing || a.no_cosine) {
        return Err(UsageError(
            "--no-smoothing/--no-cosine are ablations of the smoothed models; the linear baseline has neither".into(),
        )
        .into());
    }
    if a.no_cv && a.mode.is_some() {
        return Err(UsageError("--mode selects a fold scheme and cannot be combined with --no-cv".into()).into());
    }
    let features = feature_config(&a)?;
    let train_config = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch_size,
        max_epochs: a.epochs,
        seed: a.seed,
        smoothing_enabled: !a.no_smoothing,
        cosine_enabled: !a.no_cosine,
        ..TrainConfig::default()
    };
    train_config.validate().map_err(|e| UsageError(e.to_string()))?;
    if a.jobs == 0 {
        return Err(UsageError("--jobs must be at least 1".into()).into());
    }

    let manifest = load_manifest(&a.manifest)?;
    let samples = load_dataset(&manifest, &features, a.extra_dim)?;
    let arch = Architecture::default_for(kind, features.dim(), a.extra_dim);
    create_dir(&a.out)?;

    if a.no_cv {
        let pairs: Vec<_> = samples.iter().map(|s| (s.features.clone(), s.pose.clone())).collect();
        let out = train(&pairs, &arch, &features, &train_config)?;
        save_checkpoint(&out.checkpoint, a.out.join("model.ckpt"))?;
        write_loss_history(a.out.join("loss.csv"), &out.history)?;
        println!(
            "trained {} ({} parameters) for {} epochs; final loss {:.5}",
            kind,
            param_count(&out.checkpoint),
            out.history.len(),
            out.history.last().map_or(f64::NAN, |r| r.loss)
        );
        return Ok(());
    }

    let config = CvConfig {
        mode: match a.mode.unwrap_or(ModeArg::Independent) {
            ModeArg::Independent => FoldMode::SubjectIndependent,
            ModeArg::Dependent => FoldMode::SubjectDependent,
        },
        train: train_config,
        jobs: a.jobs,
    };
    let outcome = run_cross_validation(&manifest, &samples, &CvModel::Network(arch), &features, &config)?;
    for fold in &outcome.folds {
        let dir = a.out.join(format!("fold{}", fold.split.fold_id));
        let pred_dir = dir.join("predictions");
        create_dir(&pred_dir)?;
        if let Some(ck) = &fold.checkpoint {
            save_checkpoint(ck, dir.join("model.ckpt"))?;
        }
        write_loss_history(dir.join("loss.csv"), &fold.history)?;
        for (pair_id, pose) in &fold.predictions {
            pose.write_csv(pred_dir.join(format!("{pair_id}.csv")))?;
        }
    }
    outcome.report.write_json(a.out.join("report.json"))?;
    let table = outcome.report.to_table();
    write_text(&a.out.join("report.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<(), Failure> {
    let checkpoint = load_checkpoint(&a.checkpoint)?;
    let mut seq = match (&a.wav, &a.features_file, &checkpoint.features) {
        (Some(wav), None, FeatureConfig::Mfcc(c)) => MfccExtractor::new(c.clone())?.extract(&read_wav(wav)?)?,
        (None, Some(file), FeatureConfig::External { dim, .. }) => load_external_features(file, *dim)?,
        (Some(_), None, FeatureConfig::External { .. }) => {
            return Err(
                Error::Config("checkpoint expects precomputed features (--features-file), not audio".into()).into(),
            )
        }
        (None, Some(_), FeatureConfig::Mfcc(_)) => {
            return Err(Error::Config("checkpoint was trained on MFCCs; pass --wav".into()).into())
        }
        _ => return Err(UsageError("pass exactly one of --wav and --features-file".into()).into()),
    };
    if let Some(extra) = &a.extra_features {
        seq = seq.with_extra_channels(&read_feature_file(extra)?.0)?;
    }
    let pose = model_forward(&seq, &checkpoint)?;
    pose.write_csv(&a.out)?;
    println!("{} poses at {} Hz -> {}", pose.len(), pose.rate(), a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    let m = mae(&PoseSequence::read_csv(&a.pred)?, &PoseSequence::read_csv(&a.truth)?)?;
    println!(
        "MAE (degrees): roll {:.4} pitch {:.4} yaw {:.4} all {:.4}",
        m.roll, m.pitch, m.yaw, m.all
    );
    Ok(())
}

fn bench(a: BenchArgs) -> Result<(), Failure> {
    if a.reps < 3 {
        return Err(UsageError("--reps must be at least 3".into()).into());
    }
    let checkpoint = load_checkpoint(&a.checkpoint)?;
    let clip = read_wav(&a.wav)?;
    let r = benchmark_speed(&checkpoint, &clip, a.reps, a.threads)?;
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    println!(
        "{} frames in {:.4} s (median of {}) -> {:.0} fps [{} >= 30 fps]",
        r.frames,
        r.median_s,
        r.repetitions,
        r.fps,
        verdict(r.meets_fps())
    );
    println!(
        "latency {:.1} ms = {:.1} ms processing + {:.1} ms look-ahead [{} <= 250 ms]",
        r.latency_ms,
        r.window_processing_ms,
        r.lookahead_ms,
        verdict(r.meets_latency())
    );
    println!(
        "environment: {} / {} / {} ({} threads of {})",
        r.environment.os, r.environment.arch, r.environment.cpu, r.environment.threads, r.environment.logical_cpus
    );
    if let Some(path) = &a.json {
        let json = serde_json::to_string_pretty(&r).map_err(|source| Error::Json {
            path: path.clone(),
            source,
        })?;
        write_text(path, &(json + "\n"))?;
    }
    Ok(())
}

fn plot(a: PlotArgs) -> Result<(), Failure> {
    let svg = render_svg(&PoseSequence::read_csv(&a.pred)?, &PoseSequence::read_csv(&a.truth)?)?;
    write_text(&a.out, &svg)?;
    Ok(())
}
