#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use lipmotion_core::landmarks::{synth_dataset, LandmarkSequence, Split, SynthSpec, FRAME_DIM};
use lipmotion_core::model::{Model, ModelConfig, Sample};
use lipmotion_core::text::Frontend;
use lipmotion_core::training::{load_split, LoadedSample, TrainConfig};
use lipmotion_core::tensor::{causal_mask, multi_head_attention, AttentionParams, Graph, Tensor, Var};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

type Build<'a> = dyn Fn(&mut Graph, &[Var]) -> Var + 'a;

/// Scalar probe `sum(out * weights)` with fixed pseudo-random weights.
fn probe(inputs: &[Tensor], build: &Build) -> (Graph, Vec<Var>, Var) {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = build(&mut g, &vars);
    let shape = g.shape(out).to_vec();
    let w = g.constant(random_tensor(&shape, 0xC0FFEE));
    let prod = g.mul(out, w).unwrap();
    let loss = g.sum(prod);
    (g, vars, loss)
}

/// Norm-wise relative error between the analytic gradient and central
/// differences, over the inputs flagged in `checked`.
pub fn relative_error(inputs: &[Tensor], checked: &[bool], build: &Build) -> f64 {
    let (g, vars, loss) = probe(inputs, build);
    let grads = g.backward(loss);
    let (mut diff, mut an_norm, mut num_norm) = (0.0, 0.0, 0.0);
    let mut work = inputs.to_vec();
    for (i, t) in inputs.iter().enumerate() {
        if !checked[i] {
            continue;
        }
        let analytic = grads.get_or_zeros(vars[i], t.shape());
        for k in 0..t.numel() {
            let orig = t.data()[k];
            work[i].data_mut()[k] = orig + STEP;
            let (g1, _, l1) = probe(&work, build);
            work[i].data_mut()[k] = orig - STEP;
            let (g2, _, l2) = probe(&work, build);
            work[i].data_mut()[k] = orig;
            let numeric = (g1.value(l1).item() - g2.value(l2).item()) / (2.0 * STEP);
            let a = analytic.data()[k];
            diff += (a - numeric).powi(2);
            an_norm += a * a;
            num_norm += numeric * numeric;
        }
    }
    assert!(an_norm > 0.0, "gradient vanished; the check would be vacuous");
    diff.sqrt() / an_norm.sqrt().max(num_norm.sqrt())
}

pub fn check_all(inputs: &[Tensor], build: &Build) -> f64 {
    relative_error(inputs, &vec![true; inputs.len()], build)
}

/// Relative gradient error of every differentiable graph operation.
pub fn op_errors() -> Vec<(&'static str, f64)> {
    let r = random_tensor;
    let a34 = r(&[3, 4], 1);
    let b34 = r(&[3, 4], 2);
    let b45 = r(&[4, 5], 3);
    let row = r(&[4], 4);
    let mut out: Vec<(&'static str, f64)> = vec![
        ("matmul", check_all(&[a34.clone(), b45.clone()], &|g, v| g.matmul(v[0], v[1]).unwrap())),
        ("matmul_at", check_all(&[r(&[4, 3], 5), b45.clone()], &|g, v| g.matmul_ex(v[0], true, v[1], false).unwrap())),
        ("matmul_bt", check_all(&[a34.clone(), r(&[5, 4], 6)], &|g, v| g.matmul_ex(v[0], false, v[1], true).unwrap())),
        ("matmul_abt", check_all(&[r(&[4, 3], 7), r(&[5, 4], 8)], &|g, v| g.matmul_ex(v[0], true, v[1], true).unwrap())),
        ("add", check_all(&[a34.clone(), b34.clone()], &|g, v| g.add(v[0], v[1]).unwrap())),
        ("sub", check_all(&[a34.clone(), b34.clone()], &|g, v| g.sub(v[0], v[1]).unwrap())),
        ("mul", check_all(&[a34.clone(), b34.clone()], &|g, v| g.mul(v[0], v[1]).unwrap())),
        ("scale", check_all(std::slice::from_ref(&a34), &|g, v| g.scale(v[0], -2.5))),
        ("add_row", check_all(&[a34.clone(), row.clone()], &|g, v| g.add_row(v[0], v[1]).unwrap())),
        ("mul_row", check_all(&[a34.clone(), row.clone()], &|g, v| g.mul_row(v[0], v[1]).unwrap())),
        ("linear", check_all(&[a34.clone(), b45.clone(), r(&[5], 9)], &|g, v| g.linear(v[0], v[1], v[2]).unwrap())),
        ("sigmoid", check_all(std::slice::from_ref(&a34), &|g, v| g.sigmoid(v[0]))),
        ("tanh", check_all(std::slice::from_ref(&a34), &|g, v| g.tanh(v[0]))),
        ("gelu", check_all(std::slice::from_ref(&a34), &|g, v| g.gelu(v[0]))),
        ("softmax_rows", check_all(std::slice::from_ref(&a34), &|g, v| g.softmax(v[0], 1).unwrap())),
        ("softmax_cols", check_all(std::slice::from_ref(&a34), &|g, v| g.softmax(v[0], 0).unwrap())),
        ("layer_norm_rows", check_all(std::slice::from_ref(&a34), &|g, v| g.layer_norm(v[0], 1, 1e-5).unwrap())),
        ("layer_norm_cols", check_all(std::slice::from_ref(&a34), &|g, v| g.layer_norm(v[0], 0, 1e-5).unwrap())),
        ("embedding", check_all(&[r(&[5, 3], 10)], &|g, v| g.embedding(v[0], &[4, 0, 4, 2]).unwrap())),
        ("concat_rows", check_all(&[a34.clone(), r(&[2, 4], 11)], &|g, v| g.concat(&[v[0], v[1]], 0).unwrap())),
        ("concat_cols", check_all(&[a34.clone(), r(&[3, 2], 12)], &|g, v| g.concat(&[v[0], v[1]], 1).unwrap())),
        ("slice_rows", check_all(std::slice::from_ref(&a34), &|g, v| g.slice(v[0], 0, 1, 2).unwrap())),
        ("slice_cols", check_all(std::slice::from_ref(&a34), &|g, v| g.slice(v[0], 1, 1, 2).unwrap())),
        ("transpose", check_all(std::slice::from_ref(&a34), &|g, v| g.transpose(v[0]).unwrap())),
        ("mean", check_all(std::slice::from_ref(&a34), &|g, v| g.mean(v[0]))),
        ("sum", check_all(std::slice::from_ref(&a34), &|g, v| g.sum(v[0]))),
    ];
    let mut attn_inputs = vec![r(&[3, 4], 20), r(&[5, 4], 21)];
    for i in 0..8 {
        let shape: &[usize] = if i % 2 == 0 { &[4, 4] } else { &[4] };
        attn_inputs.push(r(shape, 30 + i));
    }
    let attention = |masked: bool| {
        move |g: &mut Graph, v: &[Var]| {
            let p = AttentionParams {
                w_q: v[2],
                b_q: v[3],
                w_k: v[4],
                b_k: v[5],
                w_v: v[6],
                b_v: v[7],
                w_o: v[8],
                b_o: v[9],
            };
            if masked {
                let mask = causal_mask(3);
                multi_head_attention(g, v[0], v[0], v[0], 2, &p, Some(&mask)).unwrap()
            } else {
                multi_head_attention(g, v[0], v[1], v[1], 2, &p, None).unwrap()
            }
        }
    };
    out.push(("attention", check_all(&attn_inputs, &attention(false))));
    out.push(("attention_causal", check_all(&attn_inputs, &attention(true))));
    out
}

pub fn toy_config(layers: usize) -> ModelConfig {
    ModelConfig {
        d_model: 8,
        heads: 2,
        layers,
        viseme_vocab: 5,
        mfcc_dim: 3,
        landmark_dim: 6,
        max_len: 32,
        ffn_dim: 12,
    }
}

pub fn toy_sample(frames: usize, seed: u64) -> Sample {
    Sample {
        visemes: vec![0, 3, 1, 4],
        landmarks: random_tensor(&[frames, 6], seed),
        audio: Some(random_tensor(&[frames, 3], seed + 1)),
    }
}

/// Model parameters followed by `extra` inputs; only parameters whose name
/// starts with one of `prefixes` (and all extras) are perturbed.
fn block_error(
    model: &Model,
    prefixes: &[&str],
    extra: Vec<Tensor>,
    build: &dyn Fn(&mut Graph, &Model, &[Var], &[Var]) -> Var,
) -> f64 {
    let n = model.params.len();
    let mut inputs = model.params.tensors().to_vec();
    inputs.extend(extra);
    let mut checked: Vec<bool> = model
        .params
        .names()
        .iter()
        .map(|name| prefixes.iter().any(|p| name.starts_with(p)))
        .collect();
    checked.resize(inputs.len(), true);
    relative_error(&inputs, &checked, &|g, v| build(g, model, &v[..n], &v[n..]))
}

/// Relative gradient error of each network block and the full pass.
pub fn block_errors() -> Vec<(&'static str, f64)> {
    let model = Model::new(toy_config(2), 17).unwrap();
    let d = 8;
    vec![
        (
            "viseme_encoder",
            block_error(&model, &["viseme_embed", "viseme_enc"], vec![], &|g, m, p, _| {
                let b = m.bind_vars(p.to_vec());
                let e = b.embed_visemes(g, &[1, 4, 4, 0]).unwrap();
                b.encode_visemes(g, e).unwrap()
            }),
        ),
        (
            "masked_audio_encoder",
            block_error(&model, &["audio_proj", "audio_enc"], vec![random_tensor(&[3, 3], 40)], &|g, m, p, x| {
                m.bind_vars(p.to_vec())
                    .encode_audio_masked(g, x[0], &[true, false, true])
                    .unwrap()
            }),
        ),
        (
            "viseme_enhancement",
            block_error(&model, &["enhance"], vec![random_tensor(&[4, d], 41)], &|g, m, p, x| {
                m.bind_vars(p.to_vec()).enhance_visemes(g, x[0]).unwrap()
            }),
        ),
        (
            "pseudo_audio",
            block_error(
                &model,
                &["pseudo"],
                vec![random_tensor(&[3, d], 42), random_tensor(&[3, d], 43)],
                &|g, m, p, x| m.bind_vars(p.to_vec()).generate_pseudo_audio(g, x[0], x[1]).unwrap(),
            ),
        ),
        (
            "landmark_decoder",
            block_error(
                &model,
                &["landmark_proj", "decoder", "head"],
                vec![random_tensor(&[4, 6], 44), random_tensor(&[3, d], 45), random_tensor(&[5, d], 46)],
                &|g, m, p, x| m.bind_vars(p.to_vec()).decode_landmarks(g, x[0], x[1], x[2]).unwrap(),
            ),
        ),
        ("full_pipeline", full_pipeline_error()),
    ]
}

fn full_pipeline_error() -> f64 {
    let model = Model::new(toy_config(1), 5).unwrap();
    let sample = toy_sample(3, 50);
    block_error(&model, &[""], vec![], &|g, m, p, _| {
        let b = m.bind_vars(p.to_vec());
        m.forward_sample(g, &b, &sample, &[true, false, true]).unwrap()
    })
}

/// Seeded synthetic dataset with `train` training and `val` validation
/// sentences, loaded into model units.
pub fn synthetic_splits(
    train: usize,
    val: usize,
) -> (tempfile::TempDir, Vec<LoadedSample>, Vec<LoadedSample>) {
    let fe = Frontend::bundled();
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec {
        n_sentences: train,
        val_sentences: val,
        seed: 7,
        ..SynthSpec::default()
    };
    let manifest = synth_dataset(&spec, &fe, dir.path()).unwrap();
    let t = load_split(&manifest, Split::Train, &fe).unwrap();
    let v = load_split(&manifest, Split::Val, &fe).unwrap();
    (dir, t, v)
}

pub fn small_train_config(steps: u64, seed: u64) -> TrainConfig {
    TrainConfig {
        model: ModelConfig { ffn_dim: 32, ..ModelConfig::small(16, 2, 1) },
        steps,
        seed,
        val_every: 0,
        ..TrainConfig::default()
    }
}

pub fn random_seq(frames: usize, rng: &mut ChaCha8Rng) -> LandmarkSequence {
    LandmarkSequence::new((0..frames * FRAME_DIM).map(|_| rng.random_range(-5.0..5.0)).collect(), 25.0).unwrap()
}

fn cost(a: &LandmarkSequence, i: usize, b: &LandmarkSequence, j: usize) -> f64 {
    let (p, q) = (a.frame(i), b.frame(j));
    p.chunks(2)
        .zip(q.chunks(2))
        .map(|(x, y)| ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt())
        .sum::<f64>()
        / 68.0
}

/// Enumerates every monotone alignment path and normalizes the cheapest
/// total by its length, preferring longer paths on ties.
pub fn brute_force_dtw(a: &LandmarkSequence, b: &LandmarkSequence) -> f64 {
    fn walk(a: &LandmarkSequence, b: &LandmarkSequence, i: usize, j: usize, acc: f64, len: usize, best: &mut (f64, usize)) {
        let acc = acc + cost(a, i, b, j);
        let len = len + 1;
        if i + 1 == a.len() && j + 1 == b.len() {
            if acc < best.0 || (acc == best.0 && len > best.1) {
                *best = (acc, len);
            }
            return;
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, acc, len, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, acc, len, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, acc, len, best);
        }
    }
    let mut best = (f64::INFINITY, 0);
    walk(a, b, 0, 0, 0.0, 0, &mut best);
    best.0 / best.1 as f64
}

pub fn levenshtein_oracle(a: &[String], b: &[String]) -> usize {
    fn go(a: &[String], b: &[String], memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if a.is_empty() || b.is_empty() {
            return a.len() + b.len();
        }
        if let Some(&v) = memo.get(&(a.len(), b.len())) {
            return v;
        }
        let sub = go(&a[1..], &b[1..], memo) + usize::from(a[0] != b[0]);
        let v = sub
            .min(go(&a[1..], b, memo) + 1)
            .min(go(a, &b[1..], memo) + 1);
        memo.insert((a.len(), b.len()), v);
        v
    }
    go(a, b, &mut HashMap::new())
}

pub fn tone(freq: f64, rate: u32, secs: f64, amp: f64) -> Vec<f64> {
    let n = (rate as f64 * secs) as usize;
    (0..n)
        .map(|i| amp * (2.0 * PI * freq * i as f64 / rate as f64).sin())
        .collect()
}

pub fn chirp(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64 / 16_000.0;
            0.3 * (2.0 * PI * (200.0 + 900.0 * t) * t).sin() + 0.1 * (2.0 * PI * 2500.0 * t).sin()
        })
        .collect()
}
