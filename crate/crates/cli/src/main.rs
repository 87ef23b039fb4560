use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info};

use lipmotion_core::audio::MfccConfig;
use lipmotion_core::landmarks::{DatasetManifest, Split, SynthSpec};
use lipmotion_core::model::ModelConfig;
use lipmotion_core::pipeline::{self, PipelineError};
use lipmotion_core::text::Frontend;
use lipmotion_core::training::TrainConfig;

/// Default location for datasets when no path is given.
const DATA_DIR_ENV: &str = "LIPMOTION_DATA_DIR";

#[derive(Parser)]
#[command(name = "lipmotion", version, about = "Text-driven lip landmark generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert text to a viseme sequence (JSON).
    Text2viseme(Text2VisemeArgs),
    /// Extract MFCC features from a 16-bit PCM WAV file.
    Mfcc(MfccArgs),
    /// Generate a synthetic GRID-style landmark dataset.
    SynthData(SynthArgs),
    /// Train a model with the audio-replacement curriculum.
    Train(TrainArgs),
    /// Generate landmarks from text with a trained checkpoint.
    Infer(InferArgs),
    /// Score predicted landmark files against references.
    Eval(EvalArgs),
    /// Render a landmark CSV as one SVG wireframe per frame.
    Preview(PreviewArgs),
}

#[derive(Args)]
struct Text2VisemeArgs {
    /// Text to convert; read from --file or stdin when absent.
    text: Option<String>,
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MfccArgs {
    wav: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write CSV instead of the binary feature format.
    #[arg(long)]
    csv: bool,
    #[arg(long, default_value_t = 13)]
    n_coeffs: usize,
    #[arg(long, default_value_t = 26)]
    n_mels: usize,
    #[arg(long, default_value_t = 25.0)]
    window_ms: f64,
    #[arg(long, default_value_t = 10.0)]
    hop_ms: f64,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory (defaults to $LIPMOTION_DATA_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    sentences: usize,
    #[arg(long, default_value_t = 0)]
    val: usize,
    #[arg(long, default_value_t = 0)]
    test: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON or key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest (defaults to $LIPMOTION_DATA_DIR/manifest.json).
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    p_start: Option<f64>,
    #[arg(long)]
    p_end: Option<f64>,
    #[arg(long)]
    grad_clip: Option<f64>,
    #[arg(long)]
    input_noise: Option<f64>,
    #[arg(long)]
    val_every: Option<u64>,
    #[arg(long)]
    checkpoint_every: Option<u64>,
    #[arg(long)]
    d_model: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    ffn_dim: Option<usize>,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Text to speak; use --manifest instead to process a dataset split.
    #[arg(long, conflicts_with = "manifest")]
    text: Option<String>,
    #[arg(long, requires = "out_dir")]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
    /// Number of frames (defaults to five per viseme).
    #[arg(long)]
    frames: Option<usize>,
    /// WAV or feature file conditioning a --text run.
    #[arg(long)]
    audio: Option<PathBuf>,
    /// Use each manifest entry's audio.
    #[arg(long)]
    with_audio: bool,
    /// Output CSV for --text.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output directory for --manifest.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Config file whose model section the checkpoint must match.
    #[arg(long)]
    expect_config: Option<PathBuf>,
    /// Accept a checkpoint whose config differs from --expect-config.
    #[arg(long)]
    migrate: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    /// Reference directory of <id>.csv files (defaults to the manifest's).
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
    /// id<TAB>text lines scored with BLEU and WER.
    #[arg(long)]
    transcripts: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PreviewArgs {
    csv: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

fn data_dir() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)
}

fn read_input(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))
}

fn text2viseme(a: Text2VisemeArgs, fe: &Frontend) -> Result<(), PipelineError> {
    let text = match (a.text, a.file) {
        (Some(t), _) => t,
        (None, Some(f)) => read_input(&f)?,
        (None, None) => std::io::read_to_string(std::io::stdin())
            .map_err(|e| PipelineError::Input(format!("stdin: {e}")))?,
    };
    let json = pipeline::cmd_text2viseme(&text, fe)?;
    match a.out {
        Some(p) => {
            pipeline::write_atomic(&p, format!("{json}\n").as_bytes())?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn mfcc(a: MfccArgs) -> Result<(), PipelineError> {
    let cfg = MfccConfig {
        window_s: a.window_ms / 1000.0,
        hop_s: a.hop_ms / 1000.0,
        n_mels: a.n_mels,
        n_coeffs: a.n_coeffs,
        ..MfccConfig::default()
    };
    pipeline::cmd_mfcc(&a.wav, &a.out, &cfg, a.csv)?;
    Ok(())
}

fn synth(a: SynthArgs, fe: &Frontend) -> Result<(), PipelineError> {
    let out = a
        .out
        .or_else(data_dir)
        .ok_or_else(|| PipelineError::Input(format!("no --out and {DATA_DIR_ENV} unset")))?;
    let spec = SynthSpec {
        n_sentences: a.sentences,
        val_sentences: a.val,
        test_sentences: a.test,
        seed: a.seed,
        ..SynthSpec::default()
    };
    let m = pipeline::cmd_synth_data(&spec, fe, &out)?;
    info!("{} entries in {}", m.entries.len(), out.display());
    Ok(())
}

fn train(a: TrainArgs, fe: &Frontend) -> Result<(), PipelineError> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    macro_rules! set {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = a.$flag { cfg.$($field).+ = v.into(); })*
        };
    }
    set!(
        steps => steps,
        seed => seed,
        batch_size => batch_size,
        lr => learning_rate,
        p_start => p_start,
        p_end => p_end,
        input_noise => input_noise,
        val_every => val_every,
        checkpoint_every => checkpoint_every,
        d_model => model.d_model,
        layers => model.layers,
        heads => model.heads,
        ffn_dim => model.ffn_dim,
        manifest => manifest,
        out => output_dir,
    );
    if let Some(c) = a.grad_clip {
        cfg.grad_clip = Some(c);
    }
    if cfg.manifest.is_none() {
        cfg.manifest = data_dir().map(|d| d.join("manifest.json"));
    }
    info!("seed {}", cfg.seed);
    pipeline::cmd_train(&cfg, fe)?;
    Ok(())
}

fn infer(a: InferArgs, fe: &Frontend) -> Result<(), PipelineError> {
    let expected: Option<ModelConfig> = match &a.expect_config {
        Some(p) => Some(TrainConfig::load(p)?.model),
        None => None,
    };
    let model = pipeline::load_model(&a.checkpoint, expected.as_ref(), a.migrate)?;
    match (a.text, a.manifest) {
        (Some(text), None) => {
            let out = a
                .out
                .ok_or_else(|| PipelineError::Input("--text needs --out".into()))?;
            pipeline::cmd_infer(&model, fe, &text, a.frames, a.audio.as_deref(), &out)?;
        }
        (None, Some(manifest)) => {
            let m = DatasetManifest::load(&manifest)?;
            let out_dir = a.out_dir.expect("clap requires --out-dir");
            let n = pipeline::cmd_infer_manifest(
                &model,
                fe,
                &m,
                a.split.map(Split::from),
                a.with_audio,
                &out_dir,
            )?;
            info!("wrote {n} sequences to {}", out_dir.display());
        }
        _ => return Err(PipelineError::Input("give exactly one of --text or --manifest".into())),
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), PipelineError> {
    let m = DatasetManifest::load(&a.manifest)?;
    let transcripts = match &a.transcripts {
        Some(p) => Some(pipeline::parse_transcripts(&read_input(p)?)?),
        None => None,
    };
    let report = pipeline::cmd_eval(
        &a.pred,
        a.gt.as_deref(),
        &m,
        a.split.map(Split::from),
        transcripts.as_ref(),
    )?;
    pipeline::write_report(&report, &a.out)?;
    print!("{}", report.to_table());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let fe = Frontend::bundled();
    let result = match cli.command {
        Command::Text2viseme(a) => text2viseme(a, &fe),
        Command::Mfcc(a) => mfcc(a),
        Command::SynthData(a) => synth(a, &fe),
        Command::Train(a) => train(a, &fe),
        Command::Infer(a) => infer(a, &fe),
        Command::Eval(a) => eval(a),
        Command::Preview(a) => pipeline::cmd_preview(&a.csv, &a.out).map(|files| {
            info!("wrote {} frames", files.len());
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
