//! The text-to-landmark network: viseme and audio encoders, the audio
//! dropout mask, viseme enhancement, pseudo-audio generation and the
//! autoregressive landmark decoder.

mod net;

use std::io::{Read, Write};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use net::{positional_encoding, BoundParams};

use crate::landmarks::{Normalization, FRAME_DIM};
use crate::tensor::{
    read_checkpoint, write_checkpoint, CheckpointError, Graph, NamedTensors, Tensor, TensorError,
    Var,
};

const NEUTRAL_KEY: &str = "state.neutral_frame";
const DENORM_KEY: &str = "state.denormalization";
const SCALE_KEY: &str = "state.frame_scale";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("viseme id {id} outside vocabulary of {vocab}")]
    IndexOutOfVocab { id: usize, vocab: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("expected a non-empty [n, {expected}] input, got {found:?}")]
    Shape { expected: usize, found: Vec<usize> },
    #[error("mask has {mask} entries for {frames} frames")]
    MaskLength { mask: usize, frames: usize },
    #[error("sequence of {len} frames exceeds max_len {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("sample has neither visemes nor audio")]
    MissingModality,
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint config differs from runtime config (expected {expected}, found {found})")]
    ConfigMismatch { expected: String, found: String },
    #[error("checkpoint is missing or misshapes parameter '{0}'")]
    MissingParameter(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub layers: usize,
    pub heads: usize,
    pub viseme_vocab: usize,
    pub mfcc_dim: usize,
    pub landmark_dim: usize,
    pub max_len: usize,
    /// Hidden width of the position-wise feed-forward blocks.
    pub ffn_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 512,
            layers: 2,
            heads: 4,
            viseme_vocab: 22,
            mfcc_dim: 13,
            landmark_dim: FRAME_DIM,
            max_len: 1024,
            ffn_dim: 2048,
        }
    }
}

impl ModelConfig {
    /// Small configuration used for fast experiments and tests.
    pub fn small(d_model: usize, heads: usize, layers: usize) -> Self {
        Self {
            d_model,
            heads,
            layers,
            ffn_dim: 2 * d_model,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("d_model", self.d_model),
            ("layers", self.layers),
            ("heads", self.heads),
            ("viseme_vocab", self.viseme_vocab),
            ("mfcc_dim", self.mfcc_dim),
            ("landmark_dim", self.landmark_dim),
            ("max_len", self.max_len),
            ("ffn_dim", self.ffn_dim),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::InvalidConfig(format!("{name} must be positive")));
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return Err(ModelError::InvalidConfig(format!(
                "d_model {} not divisible by heads {}",
                self.d_model, self.heads
            )));
        }
        Ok(())
    }

    /// Parameter names and shapes in canonical order.
    pub fn parameter_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let (d, f) = (self.d_model, self.ffn_dim);
        let mut out: Vec<(String, Vec<usize>)> = Vec::new();
        let mut push = |name: String, shape: &[usize]| out.push((name, shape.to_vec()));
        fn linear(push: &mut dyn FnMut(String, &[usize]), p: &str, i: usize, o: usize) {
            push(format!("{p}.weight"), &[i, o]);
            push(format!("{p}.bias"), &[o]);
        }
        fn norm(push: &mut dyn FnMut(String, &[usize]), p: &str, d: usize) {
            push(format!("{p}.gain"), &[d]);
            push(format!("{p}.bias"), &[d]);
        }
        fn attn(push: &mut dyn FnMut(String, &[usize]), p: &str, d: usize) {
            for w in ["q", "k", "v", "o"] {
                push(format!("{p}.w_{w}"), &[d, d]);
                push(format!("{p}.b_{w}"), &[d]);
            }
        }
        fn ffn(push: &mut dyn FnMut(String, &[usize]), p: &str, d: usize, f: usize) {
            push(format!("{p}.w1"), &[d, f]);
            push(format!("{p}.b1"), &[f]);
            push(format!("{p}.w2"), &[f, d]);
            push(format!("{p}.b2"), &[d]);
        }

        linear(&mut push, "viseme_embed", self.viseme_vocab, d);
        linear(&mut push, "audio_proj", self.mfcc_dim, d);
        linear(&mut push, "landmark_proj", self.landmark_dim, d);
        for enc in ["viseme_enc", "audio_enc"] {
            for l in 0..self.layers {
                norm(&mut push, &format!("{enc}.{l}.ln_attn"), d);
                attn(&mut push, &format!("{enc}.{l}.attn"), d);
                norm(&mut push, &format!("{enc}.{l}.ln_ffn"), d);
                ffn(&mut push, &format!("{enc}.{l}.ffn"), d, f);
            }
            norm(&mut push, &format!("{enc}.ln_out"), d);
        }
        linear(&mut push, "enhance.value", d, d);
        linear(&mut push, "enhance.gate", d, d);
        attn(&mut push, "pseudo.attn", d);
        linear(&mut push, "pseudo.value", d, d);
        linear(&mut push, "pseudo.gate", d, d);
        for l in 0..self.layers {
            for block in ["self", "audio", "viseme"] {
                norm(&mut push, &format!("decoder.{l}.ln_{block}"), d);
                attn(&mut push, &format!("decoder.{l}.{block}_attn"), d);
            }
            norm(&mut push, &format!("decoder.{l}.ln_ffn"), d);
            ffn(&mut push, &format!("decoder.{l}.ffn"), d, f);
        }
        norm(&mut push, "decoder.ln_out", d);
        linear(&mut push, "head", d, self.landmark_dim);
        out
    }
}

/// One training or evaluation example in model units.
#[derive(Debug, Clone)]
pub struct Sample {
    pub visemes: Vec<usize>,
    /// Normalized landmark frames, `[M, landmark_dim]`.
    pub landmarks: Tensor,
    /// Audio features, `[N_a, mfcc_dim]`.
    pub audio: Option<Tensor>,
}

/// Result of a teacher-forced pass over one sample.
pub struct TrainOutput {
    pub prediction: Var,
    pub mask: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: NamedTensors,
    /// Decoder input for the first step, in normalized coordinates.
    pub neutral: Vec<f64>,
    /// Typical deviation of frames from `neutral`. The decoder sees and
    /// predicts deviations divided by this.
    pub frame_scale: f64,
    /// Maps normalized output back to pixel space.
    pub denorm: Normalization,
}

impl Model {
    /// Xavier-uniform weights, zero biases, unit norm gains.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = NamedTensors::new();
        for (name, shape) in config.parameter_shapes() {
            let t = if name.ends_with(".gain") {
                Tensor::full(&shape, 1.0)
            } else if shape.len() == 1 {
                Tensor::zeros(&shape)
            } else {
                let limit = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
                let data = (0..shape[0] * shape[1])
                    .map(|_| rng.random_range(-limit..limit))
                    .collect();
                Tensor::new(shape, data)?
            };
            params.insert(name, t);
        }
        let neutral = vec![0.0; config.landmark_dim];
        Ok(Self {
            config,
            params,
            neutral,
            frame_scale: 1.0,
            denorm: Normalization::IDENTITY,
        })
    }

    /// Registers the parameters in `g`, as trainable leaves or constants.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> BoundParams<'_> {
        let vars = self
            .params
            .tensors()
            .iter()
            .map(|t| if trainable { g.param(t.clone()) } else { g.constant(t.clone()) })
            .collect();
        BoundParams::new(&self.config, self.params.names(), vars)
    }

    /// Wraps already-registered graph variables, one per parameter in
    /// canonical order, for building blocks on them.
    pub fn bind_vars(&self, vars: Vec<Var>) -> BoundParams<'_> {
        assert_eq!(vars.len(), self.params.len(), "one variable per parameter");
        BoundParams::new(&self.config, self.params.names(), vars)
    }

    /// Decoder pass on `rows` (`m` frames, neutral first) in normalized
    /// coordinates, returning predictions in the same coordinates.
    fn decode(
        &self,
        g: &mut Graph,
        p: &BoundParams<'_>,
        rows: &[f64],
        visemes: Var,
        pseudo: Var,
    ) -> Result<Var, ModelError> {
        let dim = self.config.landmark_dim;
        let inv = 1.0 / self.frame_scale;
        let centred = rows
            .chunks(dim)
            .flat_map(|r| r.iter().zip(&self.neutral).map(|(x, n)| (x - n) * inv))
            .collect();
        let prev = g.constant(Tensor::matrix(rows.len() / dim, dim, centred)?);
        let out = p.decode_landmarks(g, prev, visemes, pseudo)?;
        let out = g.scale(out, self.frame_scale);
        let neutral = g.constant(Tensor::new(vec![dim], self.neutral.clone())?);
        Ok(g.add_row(out, neutral)?)
    }

    /// Teacher-forced prediction of every frame of `sample` under the given
    /// audio mask. Without audio the mask is all false and has one entry
    /// per landmark frame.
    pub fn forward_sample(
        &self,
        g: &mut Graph,
        p: &BoundParams<'_>,
        sample: &Sample,
        mask: &[bool],
    ) -> Result<Var, ModelError> {
        self.forward_inputs(g, p, sample, mask, None)
    }

    fn forward_inputs(
        &self,
        g: &mut Graph,
        p: &BoundParams<'_>,
        sample: &Sample,
        mask: &[bool],
        noise: Option<(f64, &mut dyn rand::RngCore)>,
    ) -> Result<Var, ModelError> {
        if sample.visemes.is_empty() {
            return Err(ModelError::MissingModality);
        }
        let m = sample.landmarks.rows();
        let v = p.embed_visemes(g, &sample.visemes)?;
        let v = p.encode_visemes(g, v)?;
        let enhanced = p.enhance_visemes(g, v)?;
        let audio = self.audio_input(g, sample.audio.as_ref(), m)?;
        let a = p.encode_audio_masked(g, audio, mask)?;
        let pseudo = p.generate_pseudo_audio(g, a, enhanced)?;

        let dim = self.config.landmark_dim;
        let mut rows = self.neutral.clone();
        rows.extend_from_slice(&sample.landmarks.data()[..(m - 1) * dim]);
        if let Some((std, rng)) = noise {
            for x in &mut rows[dim..] {
                let z: f64 = rng.sample(StandardNormal);
                *x += std * self.frame_scale * z;
            }
        }
        self.decode(g, p, &rows, v, pseudo)
    }

    fn audio_input(&self, g: &mut Graph, audio: Option<&Tensor>, frames: usize) -> Result<Var, ModelError> {
        Ok(match audio {
            Some(a) => g.constant(a.clone()),
            None => g.constant(Tensor::zeros(&[frames, self.config.mfcc_dim])),
        })
    }

    /// Draws a frame mask keeping each audio frame with probability
    /// `1 - p_drop` and runs the teacher-forced pass. `input_noise` adds
    /// Gaussian noise, in units of `frame_scale`, to the ground-truth
    /// decoder inputs.
    pub fn forward_train(
        &self,
        g: &mut Graph,
        p: &BoundParams<'_>,
        sample: &Sample,
        p_drop: f64,
        input_noise: f64,
        rng: &mut impl Rng,
    ) -> Result<TrainOutput, ModelError> {
        let mask = match &sample.audio {
            Some(a) => crate::training::draw_mask(a.rows(), p_drop, rng),
            None => vec![false; sample.landmarks.rows()],
        };
        let noise = (input_noise > 0.0).then_some((input_noise, rng as &mut dyn rand::RngCore));
        let prediction = self.forward_inputs(g, p, sample, &mask, noise)?;
        Ok(TrainOutput { prediction, mask })
    }

    /// Autoregressively generates `frames` normalized frames. Without audio
    /// the audio stream is `frames` zero rows.
    pub fn infer(
        &self,
        visemes: &[usize],
        frames: usize,
        audio: Option<&Tensor>,
    ) -> Result<Tensor, ModelError> {
        if visemes.is_empty() {
            return Err(ModelError::MissingModality);
        }
        if frames == 0 || frames > self.config.max_len {
            return Err(ModelError::SequenceTooLong {
                len: frames,
                max: self.config.max_len,
            });
        }
        let (v, pseudo) = {
            let mut g = Graph::new();
            let p = self.bind(&mut g, false);
            let v = p.embed_visemes(&mut g, visemes)?;
            let v = p.encode_visemes(&mut g, v)?;
            let enhanced = p.enhance_visemes(&mut g, v)?;
            let n_audio = audio.map_or(frames, Tensor::rows);
            let a_in = self.audio_input(&mut g, audio, n_audio)?;
            let mask = vec![audio.is_some(); n_audio];
            let a = p.encode_audio_masked(&mut g, a_in, &mask)?;
            let pseudo = p.generate_pseudo_audio(&mut g, a, enhanced)?;
            (g.value(v).clone(), g.value(pseudo).clone())
        };

        let dim = self.config.landmark_dim;
        let mut inputs = self.neutral.clone();
        let mut out = Vec::with_capacity(frames * dim);
        for step in 0..frames {
            let mut g = Graph::new();
            let p = self.bind(&mut g, false);
            let vv = g.constant(v.clone());
            let pa = g.constant(pseudo.clone());
            let pred = self.decode(&mut g, &p, &inputs, vv, pa)?;
            let next = &g.value(pred).data()[step * dim..(step + 1) * dim];
            out.extend_from_slice(next);
            inputs.extend_from_slice(next);
        }
        Ok(Tensor::matrix(frames, dim, out)?)
    }

    fn header(&self) -> serde_json::Value {
        serde_json::json!({ "model": self.config })
    }

    pub fn save(&self, w: impl Write) -> Result<(), ModelError> {
        let mut all = self.params.clone();
        all.insert(NEUTRAL_KEY, Tensor::new(vec![self.neutral.len()], self.neutral.clone())?);
        let d = self.denorm;
        all.insert(DENORM_KEY, Tensor::new(vec![3], vec![d.scale, d.offset[0], d.offset[1]])?);
        all.insert(SCALE_KEY, Tensor::new(vec![1], vec![self.frame_scale])?);
        write_checkpoint(w, &self.header(), &all)?;
        Ok(())
    }

    /// Loads a checkpoint. When `expected` is given the stored config must
    /// equal it unless `migrate` is set, in which case the stored config wins.
    pub fn load(
        r: impl Read,
        expected: Option<&ModelConfig>,
        migrate: bool,
    ) -> Result<Self, ModelError> {
        let (header, mut tensors) = read_checkpoint(r)?;
        let config: ModelConfig = serde_json::from_value(header["model"].clone())
            .map_err(|e| ModelError::InvalidConfig(e.to_string()))?;
        config.validate()?;
        if let Some(exp) = expected {
            if *exp != config {
                let (e, f) = (
                    serde_json::to_string(exp).unwrap_or_default(),
                    serde_json::to_string(&config).unwrap_or_default(),
                );
                if !migrate {
                    return Err(ModelError::ConfigMismatch { expected: e, found: f });
                }
                warn!("checkpoint config {f} replaces runtime config {e}");
            }
        }
        let mut take = |name: &str, shape: &[usize]| -> Result<Tensor, ModelError> {
            match tensors.get_mut(name) {
                Some(t) if t.shape() == shape => Ok(std::mem::replace(t, Tensor::scalar(0.0))),
                _ => Err(ModelError::MissingParameter(name.to_string())),
            }
        };
        let mut params = NamedTensors::new();
        for (name, shape) in config.parameter_shapes() {
            let t = take(&name, &shape)?;
            params.insert(name, t);
        }
        let neutral = take(NEUTRAL_KEY, &[config.landmark_dim])?.into_data();
        let dn = take(DENORM_KEY, &[3])?.into_data();
        let frame_scale = take(SCALE_KEY, &[1])?.item();
        if !(frame_scale > 0.0) {
            return Err(ModelError::MissingParameter(SCALE_KEY.to_string()));
        }
        Ok(Self {
            config,
            params,
            neutral,
            frame_scale,
            denorm: Normalization {
                scale: dn[0],
                offset: [dn[1], dn[2]],
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Model {
        let cfg = ModelConfig {
            d_model: 8,
            heads: 2,
            layers: 1,
            viseme_vocab: 5,
            mfcc_dim: 3,
            landmark_dim: 4,
            max_len: 64,
            ffn_dim: 16,
        };
        Model::new(cfg, 3).unwrap()
    }

    fn sample(m: usize) -> Sample {
        let lm = (0..m * 4).map(|i| (i as f64 * 0.37).sin()).collect();
        let au = (0..m * 3).map(|i| (i as f64 * 0.11).cos()).collect();
        Sample {
            visemes: vec![0, 2, 4, 1],
            landmarks: Tensor::matrix(m, 4, lm).unwrap(),
            audio: Some(Tensor::matrix(m, 3, au).unwrap()),
        }
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::default().validate().is_ok());
        let bad = ModelConfig { heads: 3, ..ModelConfig::small(8, 2, 1) };
        assert!(matches!(bad.validate(), Err(ModelError::InvalidConfig(_))));
        let zero = ModelConfig { layers: 0, ..ModelConfig::default() };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn positional_encoding_first_row() {
        let pe = positional_encoding(3, 6);
        for i in (0..6).step_by(2) {
            assert_eq!(pe.row(0)[i], 0.0);
            assert_eq!(pe.row(0)[i + 1], 1.0);
        }
        assert!((pe.row(1)[0] - 1f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn equal_ids_differ_by_position_only() {
        let m = toy();
        let mut g = Graph::new();
        let p = m.bind(&mut g, false);
        let e = p.embed_visemes(&mut g, &[3, 3]).unwrap();
        let pe = positional_encoding(2, 8);
        let v = g.value(e);
        for k in 0..8 {
            let diff = v.row(1)[k] - v.row(0)[k];
            assert!((diff - (pe.row(1)[k] - pe.row(0)[k])).abs() < 1e-12);
        }
        assert!(matches!(
            p.embed_visemes(&mut g, &[5]),
            Err(ModelError::IndexOutOfVocab { id: 5, vocab: 5 })
        ));
    }

    #[test]
    fn mask_zeroes_rows_after_encoding() {
        let m = toy();
        let s = sample(3);
        let mut g = Graph::new();
        let p = m.bind(&mut g, false);
        let a = g.constant(s.audio.clone().unwrap());
        let full = p.encode_audio_masked(&mut g, a, &[true; 3]).unwrap();
        let part = p.encode_audio_masked(&mut g, a, &[true, false, true]).unwrap();
        let none = p.encode_audio_masked(&mut g, a, &[false; 3]).unwrap();
        let (f, q) = (g.value(full), g.value(part));
        assert!(q.row(1).iter().all(|&x| x == 0.0));
        assert_eq!(f.row(0), q.row(0));
        assert_eq!(f.row(2), q.row(2));
        assert!(g.value(none).data().iter().all(|&x| x == 0.0));
        assert!(p.encode_audio_masked(&mut g, a, &[true]).is_err());
    }

    #[test]
    fn teacher_forcing_matches_autoregression() {
        let m = toy();
        let s = sample(5);
        let produced = m.infer(&s.visemes, 5, s.audio.as_ref()).unwrap();
        let forced = Sample { landmarks: produced.clone(), ..s.clone() };
        let mut g = Graph::new();
        let p = m.bind(&mut g, false);
        let pred = m.forward_sample(&mut g, &p, &forced, &[true; 5]).unwrap();
        assert!(g.value(pred).max_abs_diff(&produced) < 1e-9);
    }

    #[test]
    fn audio_free_inference_is_deterministic() {
        let m = toy();
        let a = m.infer(&[1, 2], 6, None).unwrap();
        assert_eq!(a.shape(), &[6, 4]);
        assert!(a.is_finite());
        assert_eq!(a, m.infer(&[1, 2], 6, None).unwrap());
    }

    #[test]
    fn checkpoint_round_trip_and_config_check() {
        let mut m = toy();
        m.neutral = vec![0.5, -0.5, 0.25, 0.0];
        m.frame_scale = 0.125;
        m.denorm = Normalization { scale: 2.0, offset: [1.0, 3.0] };
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let back = Model::load(&buf[..], Some(&m.config), false).unwrap();
        assert_eq!(back, m);

        let other = ModelConfig { ffn_dim: 32, ..m.config.clone() };
        assert!(matches!(
            Model::load(&buf[..], Some(&other), false),
            Err(ModelError::ConfigMismatch { .. })
        ));
        assert_eq!(Model::load(&buf[..], Some(&other), true).unwrap().config, m.config);
    }
}
