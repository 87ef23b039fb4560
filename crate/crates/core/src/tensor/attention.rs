use super::{Graph, Tensor, TensorError, Var};

type Result<T> = std::result::Result<T, TensorError>;

/// Learned projections of one attention block. Weights are `[d, d]`
/// (input-major, applied as `x * w`), biases `[d]`.
#[derive(Debug, Clone, Copy)]
pub struct AttentionParams {
    pub w_q: Var,
    pub b_q: Var,
    pub w_k: Var,
    pub b_k: Var,
    pub w_v: Var,
    pub b_v: Var,
    pub w_o: Var,
    pub b_o: Var,
}

/// Scaled dot-product attention over `heads` column groups of the projected
/// query/key/value, concatenated and passed through the output projection.
///
/// `query` is `[Lq, d]`, `key` and `value` are `[Lk, d]`. `mask`, when
/// given, is `[Lq, Lk]` and added to every head's logits.
pub fn multi_head_attention(
    g: &mut Graph,
    query: Var,
    key: Var,
    value: Var,
    heads: usize,
    p: &AttentionParams,
    mask: Option<&Tensor>,
) -> Result<Var> {
    let d = g.shape(p.w_q)[0];
    if heads == 0 || !d.is_multiple_of(heads) {
        return Err(TensorError::InvalidHeads { d_model: d, heads });
    }
    for v in [query, key, value] {
        if g.shape(v).len() != 2 || g.shape(v)[1] != d {
            return Err(super::mismatch("attention", g.shape(v), &[0, d]));
        }
    }
    if g.shape(key)[0] != g.shape(value)[0] {
        return Err(super::mismatch("attention", g.shape(key), g.shape(value)));
    }
    let (lq, lk) = (g.shape(query)[0], g.shape(key)[0]);
    let mask = match mask {
        Some(m) if m.shape() != [lq, lk] => {
            return Err(super::mismatch("attention mask", m.shape(), &[lq, lk]))
        }
        Some(m) => Some(g.constant(m.clone())),
        None => None,
    };

    let q = g.linear(query, p.w_q, p.b_q)?;
    let k = g.linear(key, p.w_k, p.b_k)?;
    let v = g.linear(value, p.w_v, p.b_v)?;
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let (qh, kh, vh) = if heads == 1 {
            (q, k, v)
        } else {
            (
                g.slice(q, 1, h * dh, dh)?,
                g.slice(k, 1, h * dh, dh)?,
                g.slice(v, 1, h * dh, dh)?,
            )
        };
        let scores = g.matmul_ex(qh, false, kh, true)?;
        let mut scores = g.scale(scores, scale);
        if let Some(m) = mask {
            scores = g.add(scores, m)?;
        }
        let weights = g.softmax(scores, 1)?;
        outs.push(g.matmul(weights, vh)?);
    }
    let joined = if heads == 1 { outs[0] } else { g.concat(&outs, 1)? };
    g.linear(joined, p.w_o, p.b_o)
}

/// Additive mask letting query `i` see keys `0..=i` only.
pub fn causal_mask(len: usize) -> Tensor {
    let mut m = Tensor::zeros(&[len, len]);
    for i in 0..len {
        for j in i + 1..len {
            m.data_mut()[i * len + j] = -1e9;
        }
    }
    m
}
