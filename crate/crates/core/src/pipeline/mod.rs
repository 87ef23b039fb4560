//! End-to-end commands behind the `lipmotion` binary. Every command is
//! deterministic given its inputs, writes files atomically and logs the
//! SHA-256 of what it wrote.

mod preview;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use preview::{frame_svg, view_box};

use crate::audio::{load_wav, mfcc, AudioError, AudioFeatureSequence, MfccConfig};
use crate::landmarks::{
    denormalize_landmarks, synth_dataset, DatasetManifest, LandmarkError, LandmarkSequence, Split,
    SynthSpec, DEFAULT_FPS,
};
use crate::metrics::{bleu, dtw_p, mpjpe, wer, MetricError, MetricReport, SampleMetrics};
use crate::model::{Model, ModelConfig, ModelError};
use crate::tensor::Tensor;
use crate::text::{normalize_text, Frontend, TextError, VisemeDocument};
use crate::training::{load_split, train, ConfigError, TrainConfig, TrainingError};

/// Failure classes, each with its process exit code.
#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad or missing user input (exit 2).
    #[error("{0}")]
    Input(String),
    /// Configuration or persisted state that cannot be used (exit 3).
    #[error("{0}")]
    State(String),
    /// Numeric failure such as divergence (exit 4).
    #[error("{0}")]
    Numeric(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Input(_) => 2,
            PipelineError::State(_) => 3,
            PipelineError::Numeric(_) => 4,
        }
    }
}

impl From<TextError> for PipelineError {
    fn from(e: TextError) -> Self {
        PipelineError::Input(e.to_string())
    }
}

impl From<AudioError> for PipelineError {
    fn from(e: AudioError) -> Self {
        match e {
            AudioError::NonFinite => PipelineError::Numeric(e.to_string()),
            AudioError::InvalidConfig(_) => PipelineError::State(e.to_string()),
            _ => PipelineError::Input(e.to_string()),
        }
    }
}

impl From<LandmarkError> for PipelineError {
    fn from(e: LandmarkError) -> Self {
        PipelineError::Input(e.to_string())
    }
}

impl From<MetricError> for PipelineError {
    fn from(e: MetricError) -> Self {
        PipelineError::Input(e.to_string())
    }
}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => PipelineError::Input(e.to_string()),
            _ => PipelineError::State(e.to_string()),
        }
    }
}

impl From<ModelError> for PipelineError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::ConfigMismatch { .. }
            | ModelError::MissingParameter(_)
            | ModelError::InvalidConfig(_)
            | ModelError::Checkpoint(_) => PipelineError::State(e.to_string()),
            ModelError::IndexOutOfVocab { .. }
            | ModelError::MissingModality
            | ModelError::SequenceTooLong { .. }
            | ModelError::Shape { .. }
            | ModelError::MaskLength { .. } => PipelineError::Input(e.to_string()),
            ModelError::Tensor(_) => PipelineError::Numeric(e.to_string()),
        }
    }
}

impl From<TrainingError> for PipelineError {
    fn from(e: TrainingError) -> Self {
        match e {
            TrainingError::DataError { .. } | TrainingError::Io(_) => {
                PipelineError::Input(e.to_string())
            }
            TrainingError::TrainingDiverged { .. } => PipelineError::Numeric(e.to_string()),
            TrainingError::InvalidSchedule { .. } => PipelineError::State(e.to_string()),
            TrainingError::Config(c) => c.into(),
            TrainingError::Model(m) => m.into(),
        }
    }
}

fn io_input(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Input(format!("{}: {e}", path.display()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes through a sibling temp file and renames it into place; logs the
/// checksum and returns it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<String, PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_input(dir, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| PipelineError::Input(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| io_input(path, e))?;
    let sum = sha256_hex(bytes);
    info!("wrote {} sha256={sum}", path.display());
    Ok(sum)
}

/// Compiles `text` and returns the viseme document as JSON.
pub fn cmd_text2viseme(text: &str, frontend: &Frontend) -> Result<String, PipelineError> {
    let doc: VisemeDocument = frontend.compile(text)?.document();
    Ok(serde_json::to_string(&doc).expect("document serializes"))
}

/// MFCCs of a WAV file, written as a feature matrix (or CSV when `csv`).
pub fn cmd_mfcc(
    wav: &Path,
    out: &Path,
    config: &MfccConfig,
    csv: bool,
) -> Result<AudioFeatureSequence, PipelineError> {
    let w = load_wav(wav)?;
    let feats = mfcc(&w, config)?;
    info!("{}: {} frames of {} coefficients", wav.display(), feats.len(), feats.dim());
    if csv {
        let mut buf = Vec::new();
        feats.write_csv(&mut buf).map_err(|e| io_input(out, e))?;
        write_atomic(out, &buf)?;
    } else {
        feats.write(out)?;
        let bytes = std::fs::read(out).map_err(|e| io_input(out, e))?;
        info!("wrote {} sha256={}", out.display(), sha256_hex(&bytes));
    }
    Ok(feats)
}

pub fn cmd_synth_data(
    spec: &SynthSpec,
    frontend: &Frontend,
    out_dir: &Path,
) -> Result<DatasetManifest, PipelineError> {
    info!("synthesizing {} sentences with seed {}", spec.n_sentences, spec.seed);
    let manifest = synth_dataset(spec, frontend, out_dir)?;
    let bytes = manifest.to_json();
    info!(
        "manifest {} sha256={}",
        out_dir.join("manifest.json").display(),
        sha256_hex(bytes.as_bytes())
    );
    Ok(manifest)
}

pub const CHECKPOINT_FILE: &str = "checkpoint.lmc";
pub const METRICS_FILE: &str = "metrics.csv";

fn model_bytes(model: &Model) -> Result<Vec<u8>, PipelineError> {
    let mut buf = Vec::new();
    model.save(&mut buf)?;
    Ok(buf)
}

/// Trains on the manifest named in `config` and writes the final
/// checkpoint, any periodic checkpoints and the metrics log into
/// `config.output_dir`.
pub fn cmd_train(config: &TrainConfig, frontend: &Frontend) -> Result<Model, PipelineError> {
    let manifest_path = config
        .manifest
        .as_ref()
        .ok_or_else(|| PipelineError::Input("no manifest given".into()))?;
    let out_dir = config
        .output_dir
        .clone()
        .ok_or_else(|| PipelineError::Input("no output directory given".into()))?;
    if !manifest_path.is_file() {
        return Err(PipelineError::Input(format!(
            "manifest {} not found",
            manifest_path.display()
        )));
    }
    info!(
        "train config {}",
        serde_json::to_string(config).expect("config serializes")
    );
    let manifest = DatasetManifest::load(manifest_path)?;
    let train_set = load_split(&manifest, Split::Train, frontend)?;
    let val_set = load_split(&manifest, Split::Val, frontend)?;

    let mut log = Vec::new();
    let last = config.steps;
    let outcome = train(&train_set, &val_set, config, Some(&mut log), |step, model| {
        let name = if step == last {
            CHECKPOINT_FILE.to_string()
        } else {
            format!("checkpoint-{step:06}.lmc")
        };
        let to_io = |e: PipelineError| TrainingError::Io(std::io::Error::other(e.to_string()));
        let bytes = model_bytes(model).map_err(to_io)?;
        write_atomic(&out_dir.join(&name), &bytes).map_err(to_io)?;
        Ok(())
    })?;
    write_atomic(&out_dir.join(METRICS_FILE), &log)?;
    Ok(outcome.model)
}

pub fn load_model(
    checkpoint: &Path,
    expected: Option<&ModelConfig>,
    migrate: bool,
) -> Result<Model, PipelineError> {
    let f = std::fs::File::open(checkpoint).map_err(|e| io_input(checkpoint, e))?;
    Ok(Model::load(std::io::BufReader::new(f), expected, migrate)?)
}

/// Reads audio conditioning: WAV files go through MFCC extraction, other
/// paths are read as feature matrices.
pub fn load_audio_features(path: &Path) -> Result<Tensor, PipelineError> {
    let is_wav = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    let feats = if is_wav {
        mfcc(&load_wav(path)?, &MfccConfig::default())?
    } else {
        AudioFeatureSequence::read(path)?
    };
    Ok(feats.to_tensor())
}

/// Default output length: five frames per viseme.
pub fn default_frames(viseme_count: usize) -> usize {
    5 * viseme_count
}

/// Generates landmarks for `text` in pixel coordinates. Audio-free unless
/// `audio` is given.
pub fn infer_text(
    model: &Model,
    frontend: &Frontend,
    text: &str,
    frames: Option<usize>,
    audio: Option<&Tensor>,
) -> Result<LandmarkSequence, PipelineError> {
    let visemes = frontend.compile(text)?.visemes.visemes;
    if visemes.is_empty() {
        return Err(PipelineError::Input("text contains no words".into()));
    }
    let frames = frames.unwrap_or_else(|| default_frames(visemes.len()));
    let out = model.infer(&visemes, frames, audio)?;
    if !out.is_finite() {
        return Err(PipelineError::Numeric("inference produced non-finite values".into()));
    }
    let seq = LandmarkSequence::new(out.into_data(), DEFAULT_FPS)?;
    Ok(denormalize_landmarks(&seq, &model.denorm))
}

pub fn cmd_infer(
    model: &Model,
    frontend: &Frontend,
    text: &str,
    frames: Option<usize>,
    audio: Option<&Path>,
    out: &Path,
) -> Result<LandmarkSequence, PipelineError> {
    let audio = audio.map(load_audio_features).transpose()?;
    info!(
        "inferring {} '{text}'",
        if audio.is_some() { "audio-conditioned" } else { "audio-free" }
    );
    let seq = infer_text(model, frontend, text, frames, audio.as_ref())?;
    write_atomic(out, seq.to_csv().as_bytes())?;
    Ok(seq)
}

/// Runs inference for every entry of a split, with each entry's reference
/// frame count, writing `<id>.csv` files into `out_dir`.
pub fn cmd_infer_manifest(
    model: &Model,
    frontend: &Frontend,
    manifest: &DatasetManifest,
    split: Option<Split>,
    with_audio: bool,
    out_dir: &Path,
) -> Result<usize, PipelineError> {
    let mut count = 0;
    for e in manifest.entries.iter().filter(|e| split.is_none_or(|s| e.split == s)) {
        let reference = LandmarkSequence::read_csv(manifest.resolve(&e.landmark_path), DEFAULT_FPS)?;
        let audio = if with_audio {
            let path = e.features_path.as_ref().or(e.wav_path.as_ref()).ok_or_else(|| {
                PipelineError::Input(format!("{}: no audio for audio-conditioned inference", e.id))
            })?;
            Some(load_audio_features(&manifest.resolve(path))?)
        } else {
            None
        };
        let seq = infer_text(model, frontend, &e.text, Some(reference.len()), audio.as_ref())?;
        write_atomic(&out_dir.join(format!("{}.csv", e.id)), seq.to_csv().as_bytes())?;
        count += 1;
    }
    Ok(count)
}

/// Parses `id<TAB>text` transcript lines.
pub fn parse_transcripts(src: &str) -> Result<BTreeMap<String, String>, PipelineError> {
    let mut map = BTreeMap::new();
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = line
            .split_once('\t')
            .ok_or_else(|| PipelineError::Input(format!("transcripts line {}: expected id<TAB>text", i + 1)))?;
        map.insert(id.to_string(), text.to_string());
    }
    Ok(map)
}

/// Scores `<pred_dir>/<id>.csv` against the references of every manifest
/// entry in `split` (all entries when `None`). References come from
/// `gt_dir/<id>.csv` when given, otherwise from the manifest. Optional
/// transcripts add BLEU and WER against the manifest text.
pub fn cmd_eval(
    pred_dir: &Path,
    gt_dir: Option<&Path>,
    manifest: &DatasetManifest,
    split: Option<Split>,
    transcripts: Option<&BTreeMap<String, String>>,
) -> Result<MetricReport, PipelineError> {
    let mut samples = Vec::new();
    let mut pairs = Vec::new();
    let entries: Vec<_> = manifest
        .entries
        .iter()
        .filter(|e| split.is_none_or(|s| e.split == s))
        .collect();
    if entries.is_empty() {
        return Err(PipelineError::Input("no manifest entries to evaluate".into()));
    }
    for e in entries {
        let pred_path = pred_dir.join(format!("{}.csv", e.id));
        if !pred_path.is_file() {
            return Err(PipelineError::Input(format!(
                "no prediction for '{}' at {}",
                e.id,
                pred_path.display()
            )));
        }
        let gt_path = match gt_dir {
            Some(d) => d.join(format!("{}.csv", e.id)),
            None => manifest.resolve(&e.landmark_path),
        };
        let pred = LandmarkSequence::read_csv(&pred_path, DEFAULT_FPS)?;
        let gt = LandmarkSequence::read_csv(&gt_path, DEFAULT_FPS)?;
        let mut s = SampleMetrics {
            id: e.id.clone(),
            dtw_p: dtw_p(&pred, &gt)?,
            mpjpe: mpjpe(&pred, &gt)?,
            bleu1: None,
            bleu4: None,
            wer: None,
        };
        if let Some(t) = transcripts {
            let hyp = t.get(&e.id).ok_or_else(|| {
                PipelineError::Input(format!("no transcript for '{}'", e.id))
            })?;
            let (cand, reference) = (normalize_text(hyp), normalize_text(&e.text));
            s.bleu1 = Some(bleu(&cand, &reference, 1));
            s.bleu4 = Some(bleu(&cand, &reference, 4));
            s.wer = Some(wer(&cand, &reference)?);
            pairs.push((cand, reference));
        }
        samples.push(s);
    }
    Ok(MetricReport::new(samples, &pairs))
}

/// Writes `report.json` and `report.txt` into `out_dir`.
pub fn write_report(report: &MetricReport, out_dir: &Path) -> Result<(), PipelineError> {
    write_atomic(&out_dir.join("report.json"), report.to_json().as_bytes())?;
    write_atomic(&out_dir.join("report.txt"), report.to_table().as_bytes())?;
    Ok(())
}

/// One SVG wireframe per frame, named `frame_00000.svg` onwards.
pub fn cmd_preview(csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let seq = LandmarkSequence::read_csv(csv, DEFAULT_FPS)?;
    let vb = view_box(&seq);
    let mut written = Vec::with_capacity(seq.len());
    for m in 0..seq.len() {
        let path = out_dir.join(format!("frame_{m:05}.svg"));
        write_atomic(&path, frame_svg(&seq, m, vb).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(PipelineError::Input(String::new()).exit_code(), 2);
        assert_eq!(PipelineError::State(String::new()).exit_code(), 3);
        assert_eq!(PipelineError::Numeric(String::new()).exit_code(), 4);
        let e: PipelineError = TrainingError::TrainingDiverged { step: 3 }.into();
        assert_eq!(e.exit_code(), 4);
    }

    #[test]
    fn empty_text_is_an_empty_document() {
        let json = cmd_text2viseme("", &Frontend::bundled()).unwrap();
        assert_eq!(json, r#"{"version":1,"phonemes":[],"visemes":[],"boundaries":[]}"#);
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        let sum = write_atomic(&p, b"abc").unwrap();
        assert_eq!(sum, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn transcripts_parse() {
        let t = parse_transcripts("s0000\tbin blue at f two now\n\n").unwrap();
        assert_eq!(t["s0000"], "bin blue at f two now");
        assert!(parse_transcripts("no tab").is_err());
    }
}
