//! Audio-replacement curriculum, dataset loading and the training loop.

mod config;

use std::io::Write;
use std::path::Path;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use config::{ConfigError, TrainConfig};

use crate::audio::{load_wav, mfcc, AudioError, AudioFeatureSequence, MfccConfig};
use crate::landmarks::{
    normalize_landmarks, DatasetManifest, LandmarkError, LandmarkSequence, Normalization, Split,
    DEFAULT_FPS, FRAME_DIM,
};
use crate::metrics::mpjpe;
use crate::model::{Model, ModelError, Sample};
use crate::tensor::{Adam, AdamConfig, Graph, Tensor};
use crate::text::{Frontend, TextError};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("invalid schedule: p_start {p_start} > p_end {p_end} or step {t} outside 0..={total}")]
    InvalidSchedule {
        t: u64,
        total: u64,
        p_start: f64,
        p_end: f64,
    },
    #[error("bad training data ({id}): {message}")]
    DataError { id: String, message: String },
    #[error("training diverged at step {step}")]
    TrainingDiverged { step: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("log i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Audio drop probability at step `t` of `total`, moving linearly from
/// `p_start` to `p_end`.
pub fn p_drop_at(t: u64, total: u64, p_start: f64, p_end: f64) -> Result<f64, TrainingError> {
    let valid = (0.0..=1.0).contains(&p_start) && (0.0..=1.0).contains(&p_end);
    if !valid || p_start > p_end || total == 0 || t > total {
        return Err(TrainingError::InvalidSchedule {
            t,
            total,
            p_start,
            p_end,
        });
    }
    let p = p_start + (p_end - p_start) * t as f64 / total as f64;
    Ok(p.clamp(0.0, 1.0))
}

/// Independent keep decisions per frame, each true with probability
/// `1 - p_drop`.
pub fn draw_mask(n: usize, p_drop: f64, rng: &mut impl Rng) -> Vec<bool> {
    let keep = 1.0 - p_drop;
    (0..n).map(|_| rng.random::<f64>() < keep).collect()
}

/// A loaded dataset entry.
#[derive(Debug, Clone)]
pub struct LoadedSample {
    pub id: String,
    pub text: String,
    pub sample: Sample,
    pub normalization: Normalization,
}

fn data_error(id: &str, e: impl std::fmt::Display) -> TrainingError {
    TrainingError::DataError {
        id: id.to_string(),
        message: e.to_string(),
    }
}

/// Loads one split: visemes from the text, normalized landmarks, and audio
/// features from a feature file or, failing that, a WAV file.
pub fn load_split(
    manifest: &DatasetManifest,
    split: Split,
    frontend: &Frontend,
) -> Result<Vec<LoadedSample>, TrainingError> {
    manifest.split(split).map(|e| {
        let visemes = frontend
            .compile(&e.text)
            .map_err(|err: TextError| data_error(&e.id, err))?
            .visemes
            .visemes;
        if visemes.is_empty() {
            return Err(data_error(&e.id, "text yields no visemes"));
        }
        let raw = LandmarkSequence::read_csv(manifest.resolve(&e.landmark_path), DEFAULT_FPS)
            .map_err(|err: LandmarkError| data_error(&e.id, err))?;
        let (norm, normalization) = normalize_landmarks(&raw).map_err(|err| data_error(&e.id, err))?;
        let audio = if let Some(p) = &e.features_path {
            Some(AudioFeatureSequence::read(&manifest.resolve(p)).map_err(|err| data_error(&e.id, err))?)
        } else if let Some(p) = &e.wav_path {
            let wav = load_wav(manifest.resolve(p)).map_err(|err: AudioError| data_error(&e.id, err))?;
            Some(mfcc(&wav, &MfccConfig::default()).map_err(|err| data_error(&e.id, err))?)
        } else {
            None
        };
        let landmarks = Tensor::matrix(norm.len(), FRAME_DIM, norm.data().to_vec())
            .map_err(|err| data_error(&e.id, err))?;
        Ok(LoadedSample {
            id: e.id.clone(),
            text: e.text.clone(),
            sample: Sample {
                visemes,
                landmarks,
                audio: audio.map(|a| a.to_tensor()),
            },
            normalization,
        })
    })
    .collect()
}

/// One row of the metrics log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub step: u64,
    pub p_drop: f64,
    pub train_loss: f64,
    /// Fraction of audio frames kept in this step's masks.
    pub keep_rate: f64,
    pub val_mpjpe: Option<f64>,
}

pub const LOG_HEADER: &str = "step,p_drop,train_loss,val_mpjpe";

impl LogRow {
    pub fn to_csv(&self) -> String {
        let val = self.val_mpjpe.map_or(String::new(), |v| format!("{v}"));
        format!("{},{},{},{}", self.step, self.p_drop, self.train_loss, val)
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: Vec<LogRow>,
}

/// Mean of per-sample mean squared errors for a batch, plus an optional
/// velocity term on frame differences.
fn batch_loss(
    g: &mut Graph,
    preds: &[crate::tensor::Var],
    targets: &[&Tensor],
    velocity_weight: f64,
) -> Result<crate::tensor::Var, TrainingError> {
    let mut total = None;
    for (&p, t) in preds.iter().zip(targets) {
        let tv = g.constant((*t).clone());
        let diff = g.sub(p, tv).map_err(ModelError::from)?;
        let sq = g.mul(diff, diff).map_err(ModelError::from)?;
        let mut l = g.mean(sq);
        let m = t.rows();
        if velocity_weight > 0.0 && m > 1 {
            let a = g.slice(diff, 0, 1, m - 1).map_err(ModelError::from)?;
            let b = g.slice(diff, 0, 0, m - 1).map_err(ModelError::from)?;
            let dv = g.sub(a, b).map_err(ModelError::from)?;
            let dv2 = g.mul(dv, dv).map_err(ModelError::from)?;
            let v = g.mean(dv2);
            let v = g.scale(v, velocity_weight);
            l = g.add(l, v).map_err(ModelError::from)?;
        }
        total = Some(match total {
            None => l,
            Some(acc) => g.add(acc, l).map_err(ModelError::from)?,
        });
    }
    let total = total.expect("non-empty batch");
    Ok(g.scale(total, 1.0 / preds.len() as f64))
}

/// Audio-free autoregressive MPJPE, averaged over samples, in normalized
/// coordinates.
pub fn audio_free_mpjpe(model: &Model, samples: &[LoadedSample]) -> Result<f64, TrainingError> {
    let mut total = 0.0;
    for s in samples {
        let m = s.sample.landmarks.rows();
        let pred = model.infer(&s.sample.visemes, m, None)?;
        total += tensor_mpjpe(&pred, &s.sample.landmarks)?;
    }
    Ok(total / samples.len().max(1) as f64)
}

/// Teacher-forced MPJPE under a fixed audio regime (all kept or all dropped).
pub fn teacher_forced_mpjpe(
    model: &Model,
    samples: &[LoadedSample],
    with_audio: bool,
) -> Result<f64, TrainingError> {
    let mut total = 0.0;
    for s in samples {
        let mut g = Graph::new();
        let p = model.bind(&mut g, false);
        let n = s.sample.audio.as_ref().map_or(s.sample.landmarks.rows(), Tensor::rows);
        let mask = vec![with_audio && s.sample.audio.is_some(); n];
        let pred = model.forward_sample(&mut g, &p, &s.sample, &mask)?;
        total += tensor_mpjpe(g.value(pred), &s.sample.landmarks)?;
    }
    Ok(total / samples.len().max(1) as f64)
}

/// Teacher-forced mean squared error with all audio kept.
pub fn teacher_forced_mse(model: &Model, samples: &[LoadedSample]) -> Result<f64, TrainingError> {
    let mut total = 0.0;
    for s in samples {
        let mut g = Graph::new();
        let p = model.bind(&mut g, false);
        let n = s.sample.audio.as_ref().map_or(s.sample.landmarks.rows(), Tensor::rows);
        let mask = vec![s.sample.audio.is_some(); n];
        let pred = model.forward_sample(&mut g, &p, &s.sample, &mask)?;
        let d = g.value(pred).data().iter().zip(s.sample.landmarks.data());
        total += d.map(|(a, b)| (a - b).powi(2)).sum::<f64>() / s.sample.landmarks.numel() as f64;
    }
    Ok(total / samples.len().max(1) as f64)
}

fn tensor_mpjpe(pred: &Tensor, truth: &Tensor) -> Result<f64, TrainingError> {
    let to_seq = |t: &Tensor| LandmarkSequence::new(t.data().to_vec(), 25.0);
    let (p, t) = (
        to_seq(pred).map_err(|e| data_error("prediction", e))?,
        to_seq(truth).map_err(|e| data_error("reference", e))?,
    );
    mpjpe(&p, &t).map_err(|e| data_error("prediction", e))
}

/// Runs `config.steps` Adam steps on the scheduled teacher-forced loss.
/// `log_out` receives the CSV metrics log; `on_checkpoint` is called with
/// the model every `checkpoint_every` steps and after the last step.
pub fn train(
    train_set: &[LoadedSample],
    val_set: &[LoadedSample],
    config: &TrainConfig,
    mut log_out: Option<&mut dyn Write>,
    mut on_checkpoint: impl FnMut(u64, &Model) -> Result<(), TrainingError>,
) -> Result<TrainOutcome, TrainingError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(data_error("train split", "no training samples"));
    }
    p_drop_at(0, config.steps, config.p_start, config.p_end)?;
    info!(
        "training {} samples for {} steps, seed {}, schedule {} -> {}",
        train_set.len(),
        config.steps,
        config.seed,
        config.p_start,
        config.p_end
    );

    let mut model = Model::new(config.model.clone(), config.seed)?;
    let dim = model.config.landmark_dim;
    let frames: usize = train_set.iter().map(|s| s.sample.landmarks.rows()).sum();
    let mut neutral = vec![0.0; dim];
    for s in train_set {
        for row in s.sample.landmarks.data().chunks(dim) {
            for (n, x) in neutral.iter_mut().zip(row) {
                *n += x / frames as f64;
            }
        }
    }
    let mut dev = 0.0;
    for s in train_set {
        for row in s.sample.landmarks.data().chunks(dim) {
            dev += row.iter().zip(&neutral).map(|(x, n)| (x - n).powi(2)).sum::<f64>();
        }
    }
    let rms = (dev / (frames * dim) as f64).sqrt();
    model.frame_scale = if rms > 1e-12 { rms } else { 1.0 };
    model.neutral = neutral;
    let k = train_set.len() as f64;
    model.denorm = Normalization {
        scale: train_set.iter().map(|s| s.normalization.scale).sum::<f64>() / k,
        offset: [0, 1].map(|i| train_set.iter().map(|s| s.normalization.offset[i]).sum::<f64>() / k),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut adam = Adam::new(AdamConfig {
        lr: config.learning_rate,
        ..AdamConfig::default()
    });
    let batch = config.batch_size.min(train_set.len());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut cursor = order.len();
    if let Some(w) = log_out.as_deref_mut() {
        writeln!(w, "{LOG_HEADER}")?;
    }
    let mut log = Vec::with_capacity(config.steps as usize);

    for step in 0..config.steps {
        let p_drop = p_drop_at(step, config.steps, config.p_start, config.p_end)?;
        let mut picked = Vec::with_capacity(batch);
        while picked.len() < batch {
            if cursor == order.len() {
                if batch < train_set.len() {
                    order.shuffle(&mut rng);
                }
                cursor = 0;
            }
            picked.push(order[cursor]);
            cursor += 1;
        }

        let mut g = Graph::new();
        let p = model.bind(&mut g, true);
        let (mut kept, mut total) = (0usize, 0usize);
        let mut preds = Vec::with_capacity(batch);
        let mut targets = Vec::with_capacity(batch);
        for &i in &picked {
            let s = &train_set[i].sample;
            let out = model.forward_train(&mut g, &p, s, p_drop, config.input_noise, &mut rng)?;
            kept += out.mask.iter().filter(|&&m| m).count();
            total += out.mask.len();
            preds.push(out.prediction);
            targets.push(&s.landmarks);
        }
        let loss = batch_loss(&mut g, &preds, &targets, config.velocity_weight)?;
        let loss_value = g.value(loss).item();
        if !loss_value.is_finite() {
            return Err(TrainingError::TrainingDiverged { step });
        }
        let grads = g.backward(loss);
        let shapes: Vec<Vec<usize>> = model.params.tensors().iter().map(|t| t.shape().to_vec()).collect();
        let mut grad_list: Vec<Tensor> = p
            .vars()
            .iter()
            .zip(&shapes)
            .map(|(&v, s)| grads.get_or_zeros(v, s))
            .collect();
        drop(p);
        if grad_list.iter().any(|t| !t.is_finite()) {
            return Err(TrainingError::TrainingDiverged { step });
        }
        if let Some(max_norm) = config.grad_clip {
            let norm = grad_list
                .iter()
                .flat_map(|t| t.data())
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt();
            if norm > max_norm {
                info!("step {step}: clipping gradient norm {norm:.4} to {max_norm}");
                let s = max_norm / norm;
                for t in &mut grad_list {
                    *t = t.map(|x| x * s);
                }
            }
        }
        adam.step(model.params.tensors_mut(), &grad_list);
        if model.params.tensors().iter().any(|t| !t.is_finite()) {
            return Err(TrainingError::TrainingDiverged { step });
        }

        let last = step + 1 == config.steps;
        let val_mpjpe = if !val_set.is_empty()
            && config.val_every > 0
            && ((step + 1) % config.val_every == 0 || last)
        {
            Some(audio_free_mpjpe(&model, val_set)?)
        } else {
            None
        };
        let row = LogRow {
            step,
            p_drop,
            train_loss: loss_value,
            keep_rate: kept as f64 / total.max(1) as f64,
            val_mpjpe,
        };
        debug!("step {step} p_drop {p_drop:.4} loss {loss_value:.6}");
        if let Some(w) = log_out.as_deref_mut() {
            writeln!(w, "{}", row.to_csv())?;
        }
        log.push(row);
        if last || (config.checkpoint_every > 0 && (step + 1) % config.checkpoint_every == 0) {
            on_checkpoint(step + 1, &model)?;
        }
    }
    if let Some(row) = log.last() {
        info!("finished: final loss {:.6}", row.train_loss);
    }
    Ok(TrainOutcome { model, log })
}

/// Loads the train and validation splits named by a manifest file.
pub fn load_manifest_splits(
    path: &Path,
    frontend: &Frontend,
) -> Result<(Vec<LoadedSample>, Vec<LoadedSample>), TrainingError> {
    let manifest = DatasetManifest::load(path).map_err(|e| data_error(&path.display().to_string(), e))?;
    Ok((
        load_split(&manifest, Split::Train, frontend)?,
        load_split(&manifest, Split::Val, frontend)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        assert_eq!(p_drop_at(0, 100, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(p_drop_at(100, 100, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(p_drop_at(50, 100, 0.0, 1.0).unwrap(), 0.5);
        assert_eq!(p_drop_at(10, 100, 1.0, 1.0).unwrap(), 1.0);
        assert!(matches!(
            p_drop_at(0, 100, 0.6, 0.2),
            Err(TrainingError::InvalidSchedule { .. })
        ));
        assert!(p_drop_at(101, 100, 0.0, 1.0).is_err());
    }

    #[test]
    fn schedule_is_monotone() {
        let ps: Vec<f64> = (0..=37).map(|t| p_drop_at(t, 37, 0.1, 0.9).unwrap()).collect();
        assert!(ps.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn mask_extremes_and_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert!(draw_mask(500, 0.0, &mut rng).iter().all(|&m| m));
        assert!(draw_mask(500, 1.0, &mut rng).iter().all(|&m| !m));
        let m = draw_mask(10_000, 0.3, &mut rng);
        let rate = m.iter().filter(|&&x| x).count() as f64 / 1e4;
        assert!((rate - 0.7).abs() < 0.02, "{rate}");
    }

    #[test]
    fn mask_is_reproducible() {
        let a = draw_mask(64, 0.5, &mut ChaCha8Rng::seed_from_u64(5));
        let b = draw_mask(64, 0.5, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn log_row_csv() {
        let r = LogRow { step: 3, p_drop: 0.25, train_loss: 1.5, keep_rate: 0.75, val_mpjpe: None };
        assert_eq!(r.to_csv(), "3,0.25,1.5,");
    }
}
