//! Graph-building blocks of the network. Every block takes and returns
//! graph variables so the same code serves training, inference and
//! gradient checks.

use super::{ModelConfig, ModelError};
use crate::tensor::{causal_mask, multi_head_attention, AttentionParams, Graph, Tensor, Var};

const LN_EPS: f64 = 1e-5;

/// Sinusoidal position table, `[len, d]`.
pub fn positional_encoding(len: usize, d: usize) -> Tensor {
    let mut t = Tensor::zeros(&[len, d]);
    for n in 0..len {
        for i in (0..d).step_by(2) {
            let angle = n as f64 / 10_000f64.powf(i as f64 / d as f64);
            t.data_mut()[n * d + i] = angle.sin();
            if i + 1 < d {
                t.data_mut()[n * d + i + 1] = angle.cos();
            }
        }
    }
    t
}

/// Model parameters registered in one graph, looked up by name.
pub struct BoundParams<'a> {
    pub config: &'a ModelConfig,
    names: &'a [String],
    vars: Vec<Var>,
}

impl<'a> BoundParams<'a> {
    pub(super) fn new(config: &'a ModelConfig, names: &'a [String], vars: Vec<Var>) -> Self {
        Self { config, names, vars }
    }

    /// Graph variables in parameter order.
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn get(&self, name: &str) -> Var {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"));
        self.vars[i]
    }

    fn attention(&self, prefix: &str) -> AttentionParams {
        let p = |s: &str| self.get(&format!("{prefix}.{s}"));
        AttentionParams {
            w_q: p("w_q"),
            b_q: p("b_q"),
            w_k: p("w_k"),
            b_k: p("b_k"),
            w_v: p("w_v"),
            b_v: p("b_v"),
            w_o: p("w_o"),
            b_o: p("b_o"),
        }
    }

    fn norm(&self, g: &mut Graph, x: Var, prefix: &str) -> Result<Var, ModelError> {
        let n = g.layer_norm(x, 1, LN_EPS)?;
        let n = g.mul_row(n, self.get(&format!("{prefix}.gain")))?;
        Ok(g.add_row(n, self.get(&format!("{prefix}.bias")))?)
    }

    fn feed_forward(&self, g: &mut Graph, x: Var, prefix: &str) -> Result<Var, ModelError> {
        let h = g.linear(x, self.get(&format!("{prefix}.w1")), self.get(&format!("{prefix}.b1")))?;
        let h = g.gelu(h);
        Ok(g.linear(h, self.get(&format!("{prefix}.w2")), self.get(&format!("{prefix}.b2")))?)
    }

    fn add_positions(&self, g: &mut Graph, x: Var) -> Result<Var, ModelError> {
        let len = g.shape(x)[0];
        if len > self.config.max_len {
            return Err(ModelError::SequenceTooLong {
                len,
                max: self.config.max_len,
            });
        }
        let pe = g.constant(positional_encoding(len, self.config.d_model));
        Ok(g.add(x, pe)?)
    }

    /// Pre-norm self-attention encoder stack with a final norm.
    fn encoder(&self, g: &mut Graph, mut x: Var, prefix: &str) -> Result<Var, ModelError> {
        let heads = self.config.heads;
        for l in 0..self.config.layers {
            let p = format!("{prefix}.{l}");
            let h = self.norm(g, x, &format!("{p}.ln_attn"))?;
            let a = multi_head_attention(g, h, h, h, heads, &self.attention(&format!("{p}.attn")), None)?;
            x = g.add(x, a)?;
            let h = self.norm(g, x, &format!("{p}.ln_ffn"))?;
            let f = self.feed_forward(g, h, &format!("{p}.ffn"))?;
            x = g.add(x, f)?;
        }
        self.norm(g, x, &format!("{prefix}.ln_out"))
    }

    /// One-hot projection of viseme ids plus position encoding, `[N, d]`.
    pub fn embed_visemes(&self, g: &mut Graph, ids: &[usize]) -> Result<Var, ModelError> {
        let vocab = self.config.viseme_vocab;
        if let Some(&id) = ids.iter().find(|&&id| id >= vocab) {
            return Err(ModelError::IndexOutOfVocab { id, vocab });
        }
        let e = g.embedding(self.get("viseme_embed.weight"), ids)?;
        let e = g.add_row(e, self.get("viseme_embed.bias"))?;
        self.add_positions(g, e)
    }

    pub fn encode_visemes(&self, g: &mut Graph, embedded: Var) -> Result<Var, ModelError> {
        self.check_width(g, embedded, self.config.d_model)?;
        self.encoder(g, embedded, "viseme_enc")
    }

    /// Projects `[N, mfcc_dim]` features, encodes them, and zeroes the rows
    /// whose mask entry is false.
    pub fn encode_audio_masked(
        &self,
        g: &mut Graph,
        features: Var,
        mask: &[bool],
    ) -> Result<Var, ModelError> {
        self.check_width(g, features, self.config.mfcc_dim)?;
        let n = g.shape(features)[0];
        if mask.len() != n {
            return Err(ModelError::MaskLength { mask: mask.len(), frames: n });
        }
        let d = self.config.d_model;
        if mask.iter().all(|&m| !m) {
            return Ok(g.constant(Tensor::zeros(&[n, d])));
        }
        let x = g.linear(features, self.get("audio_proj.weight"), self.get("audio_proj.bias"))?;
        let x = self.add_positions(g, x)?;
        let enc = self.encoder(g, x, "audio_enc")?;
        if mask.iter().all(|&m| m) {
            return Ok(enc);
        }
        let keep: Vec<f64> = mask
            .iter()
            .flat_map(|&m| std::iter::repeat_n(if m { 1.0 } else { 0.0 }, d))
            .collect();
        let keep = g.constant(Tensor::matrix(n, d, keep)?);
        Ok(g.mul(enc, keep)?)
    }

    /// Gated linear unit followed by a plain layer norm.
    pub fn enhance_visemes(&self, g: &mut Graph, encoded: Var) -> Result<Var, ModelError> {
        self.check_width(g, encoded, self.config.d_model)?;
        let value = g.linear(encoded, self.get("enhance.value.weight"), self.get("enhance.value.bias"))?;
        let gate = g.linear(encoded, self.get("enhance.gate.weight"), self.get("enhance.gate.bias"))?;
        let gate = g.sigmoid(gate);
        let glu = g.mul(value, gate)?;
        Ok(g.layer_norm(glu, 1, LN_EPS)?)
    }

    /// Attends from the (masked) audio stream, with positions re-added,
    /// into the enhanced viseme features, then applies the gated fusion.
    pub fn generate_pseudo_audio(
        &self,
        g: &mut Graph,
        audio: Var,
        enhanced: Var,
    ) -> Result<Var, ModelError> {
        self.check_width(g, audio, self.config.d_model)?;
        self.check_width(g, enhanced, self.config.d_model)?;
        let query = self.add_positions(g, audio)?;
        let attended = multi_head_attention(
            g,
            query,
            enhanced,
            enhanced,
            self.config.heads,
            &self.attention("pseudo.attn"),
            None,
        )?;
        let value = g.linear(attended, self.get("pseudo.value.weight"), self.get("pseudo.value.bias"))?;
        let gate = g.linear(attended, self.get("pseudo.gate.weight"), self.get("pseudo.gate.bias"))?;
        let gate = g.sigmoid(gate);
        Ok(g.mul(value, gate)?)
    }

    /// Maps decoder inputs `[m, landmark_dim]` (neutral frame followed by
    /// the previous frames) to next-frame predictions `[m, landmark_dim]`.
    /// Row `i` depends only on input rows `0..=i`.
    pub fn decode_landmarks(
        &self,
        g: &mut Graph,
        previous: Var,
        visemes: Var,
        pseudo_audio: Var,
    ) -> Result<Var, ModelError> {
        self.check_width(g, previous, self.config.landmark_dim)?;
        self.check_width(g, visemes, self.config.d_model)?;
        self.check_width(g, pseudo_audio, self.config.d_model)?;
        let heads = self.config.heads;
        let m = g.shape(previous)[0];
        let causal = causal_mask(m);

        let x = g.linear(previous, self.get("landmark_proj.weight"), self.get("landmark_proj.bias"))?;
        let mut x = self.add_positions(g, x)?;
        for l in 0..self.config.layers {
            let p = format!("decoder.{l}");
            let h = self.norm(g, x, &format!("{p}.ln_self"))?;
            let a = multi_head_attention(g, h, h, h, heads, &self.attention(&format!("{p}.self_attn")), Some(&causal))?;
            x = g.add(x, a)?;
            let h = self.norm(g, x, &format!("{p}.ln_audio"))?;
            let a = multi_head_attention(g, h, pseudo_audio, pseudo_audio, heads, &self.attention(&format!("{p}.audio_attn")), None)?;
            x = g.add(x, a)?;
            let h = self.norm(g, x, &format!("{p}.ln_viseme"))?;
            let a = multi_head_attention(g, h, visemes, visemes, heads, &self.attention(&format!("{p}.viseme_attn")), None)?;
            x = g.add(x, a)?;
            let h = self.norm(g, x, &format!("{p}.ln_ffn"))?;
            let f = self.feed_forward(g, h, &format!("{p}.ffn"))?;
            x = g.add(x, f)?;
        }
        let x = self.norm(g, x, "decoder.ln_out")?;
        Ok(g.linear(x, self.get("head.weight"), self.get("head.bias"))?)
    }

    fn check_width(&self, g: &Graph, x: Var, width: usize) -> Result<(), ModelError> {
        let s = g.shape(x);
        if s.len() != 2 || s[1] != width || s[0] == 0 {
            return Err(ModelError::Shape {
                expected: width,
                found: s.to_vec(),
            });
        }
        Ok(())
    }
}
