mod common;

use rand::SeedableRng;

use common::{random_tensor, small_train_config, synthetic_splits, toy_config, toy_sample};
use lipmotion_core::model::{positional_encoding, Model, ModelError};
use lipmotion_core::tensor::{Graph, Tensor};
use lipmotion_core::training::train;

fn toy_model() -> Model {
    Model::new(toy_config(2), 5).unwrap()
}

fn rows_equal(t: &Tensor, i: usize, j: usize) -> bool {
    t.row(i) == t.row(j)
}

#[test]
fn embedding_is_table_row_plus_bias_plus_position() {
    let model = toy_model();
    let ids = [2, 0, 2];
    let mut g = Graph::new();
    let p = model.bind(&mut g, false);
    let e = p.embed_visemes(&mut g, &ids).unwrap();
    let w = model.params.get("viseme_embed.weight").unwrap();
    let b = model.params.get("viseme_embed.bias").unwrap();
    let d = model.config.d_model;
    for (n, &id) in ids.iter().enumerate() {
        for k in 0..d {
            // closed-form sinusoid for position n, dimension k
            let angle = n as f64 / 10_000f64.powf((k - k % 2) as f64 / d as f64);
            let pe = if k % 2 == 0 { angle.sin() } else { angle.cos() };
            let expected = w.row(id)[k] + b.data()[k] + pe;
            assert!((g.value(e).row(n)[k] - expected).abs() < 1e-12);
        }
    }
    assert!(matches!(
        p.embed_visemes(&mut g, &[5]),
        Err(ModelError::IndexOutOfVocab { id: 5, vocab: 5 })
    ));
}

#[test]
fn single_viseme_encodes_to_one_finite_row() {
    let model = toy_model();
    let mut g = Graph::new();
    let p = model.bind(&mut g, false);
    let e = p.embed_visemes(&mut g, &[3]).unwrap();
    let v = p.encode_visemes(&mut g, e).unwrap();
    assert_eq!(g.value(v).shape(), &[1, 8]);
    assert!(g.value(v).is_finite());
}

#[test]
fn positions_break_permutation_symmetry() {
    let model = toy_model();
    let mut g = Graph::new();
    let p = model.bind(&mut g, false);
    let fwd = p.embed_visemes(&mut g, &[0, 1, 2]).unwrap();
    let fwd = p.encode_visemes(&mut g, fwd).unwrap();
    let rev = p.embed_visemes(&mut g, &[2, 1, 0]).unwrap();
    let rev = p.encode_visemes(&mut g, rev).unwrap();
    let (a, b) = (g.value(fwd), g.value(rev));
    let diff: f64 = (0..3)
        .flat_map(|i| a.row(i).iter().zip(b.row(2 - i)).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    assert!(diff > 1e-6);
}

#[test]
fn zero_gate_halves_the_value_path() {
    let mut model = toy_model();
    for name in ["enhance.gate.weight", "enhance.gate.bias"] {
        let t = model.params.get_mut(name).unwrap();
        *t = t.map(|_| 0.0);
    }
    let x = random_tensor(&[4, 8], 21);
    let mut g = Graph::new();
    let p = model.bind(&mut g, false);
    let xv = g.constant(x.clone());
    let out = p.enhance_visemes(&mut g, xv).unwrap();

    let w = model.params.get("enhance.value.weight").unwrap();
    let b = model.params.get("enhance.value.bias").unwrap();
    for r in 0..4 {
        let h: Vec<f64> = (0..8)
            .map(|j| 0.5 * ((0..8).map(|k| x.row(r)[k] * w.row(k)[j]).sum::<f64>() + b.data()[j]))
            .collect();
        let mean = h.iter().sum::<f64>() / 8.0;
        let var = h.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
        for j in 0..8 {
            let expected = (h[j] - mean) / (var + 1e-5).sqrt();
            assert!((g.value(out).row(r)[j] - expected).abs() < 1e-10);
        }
        let row_mean = g.value(out).row(r).iter().sum::<f64>() / 8.0;
        assert!(row_mean.abs() < 1e-12);
    }
}

#[test]
fn fully_dropped_audio_gives_defined_pseudo_audio() {
    let model = toy_model();
    let mut g = Graph::new();
    let p = model.bind(&mut g, false);
    let feats = g.constant(random_tensor(&[6, 3], 2));
    let a = p.encode_audio_masked(&mut g, feats, &[false; 6]).unwrap();
    assert!(g.value(a).data().iter().all(|&x| x == 0.0));
    let e = p.embed_visemes(&mut g, &[1, 2, 3]).unwrap();
    let v = p.encode_visemes(&mut g, e).unwrap();
    let enh = p.enhance_visemes(&mut g, v).unwrap();
    let pse = p.generate_pseudo_audio(&mut g, a, enh).unwrap();
    let t = g.value(pse);
    assert_eq!(t.shape(), &[6, 8]);
    assert!(t.is_finite());
    assert!(!rows_equal(t, 0, 1));

    let prev = g.constant(Tensor::zeros(&[6, 6]));
    let out = p.decode_landmarks(&mut g, prev, v, pse).unwrap();
    assert_eq!(g.value(out).shape(), &[6, 6]);
    assert!(g.value(out).is_finite());
}

#[test]
fn single_key_pseudo_audio_rows_coincide() {
    let model = toy_model();
    let mut g = Graph::new();
    let p = model.bind(&mut g, false);
    let a = g.constant(random_tensor(&[5, 8], 3));
    let enh = g.constant(random_tensor(&[1, 8], 4));
    let pse = p.generate_pseudo_audio(&mut g, a, enh).unwrap();
    let t = g.value(pse).clone();
    for i in 1..5 {
        let diff = t.row(0).iter().zip(t.row(i)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }
}

#[test]
fn perturbing_a_frame_leaves_earlier_predictions_untouched() {
    let model = toy_model();
    let sample = toy_sample(10, 8);
    let predict = |s: &lipmotion_core::model::Sample| {
        let mut g = Graph::new();
        let p = model.bind(&mut g, false);
        let out = model.forward_sample(&mut g, &p, s, &[true; 10]).unwrap();
        g.value(out).clone()
    };
    let base = predict(&sample);
    for k in [0, 4, 9] {
        let mut s = sample.clone();
        for x in &mut s.landmarks.data_mut()[k * 6..(k + 1) * 6] {
            *x += 0.7;
        }
        let out = predict(&s);
        for i in 0..=k {
            assert_eq!(out.row(i), base.row(i), "k={k} row {i}");
        }
        if k + 1 < 10 {
            assert_ne!(out.row(k + 1), base.row(k + 1));
        }
    }
}

#[test]
fn forward_train_mask_follows_the_regime() {
    let model = toy_model();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let sample = toy_sample(12, 9);
    let mut g = Graph::new();
    let p = model.bind(&mut g, true);
    let on = model.forward_train(&mut g, &p, &sample, 0.0, 0.0, &mut rng).unwrap();
    assert!(on.mask.iter().all(|&m| m));
    let off = model.forward_train(&mut g, &p, &sample, 1.0, 0.0, &mut rng).unwrap();
    assert!(off.mask.iter().all(|&m| !m));
    assert_eq!(g.value(off.prediction).shape(), &[12, 6]);

    let mut silent = sample.clone();
    silent.audio = None;
    let out = model.forward_train(&mut g, &p, &silent, 0.0, 0.0, &mut rng).unwrap();
    assert!(out.mask.iter().all(|&m| !m));

    let mut empty = sample;
    empty.visemes.clear();
    assert!(matches!(
        model.forward_train(&mut g, &p, &empty, 0.0, 0.0, &mut rng),
        Err(ModelError::MissingModality)
    ));
}

#[test]
fn inference_returns_requested_frames_deterministically() {
    let model = toy_model();
    let one = model.infer(&[1, 2], 1, None).unwrap();
    assert_eq!(one.shape(), &[1, 6]);
    assert!(one.is_finite());
    let a = model.infer(&[1, 2, 3], 9, None).unwrap();
    assert_eq!(a.shape(), &[9, 6]);
    assert_eq!(a, model.infer(&[1, 2, 3], 9, None).unwrap());
    let audio = random_tensor(&[7, 3], 1);
    assert_eq!(model.infer(&[1], 4, Some(&audio)).unwrap().shape(), &[4, 6]);
    assert!(matches!(model.infer(&[], 4, None), Err(ModelError::MissingModality)));
    assert!(model.infer(&[1], 0, None).is_err());
}

#[test]
fn position_table_matches_closed_form() {
    let t = positional_encoding(3, 4);
    assert_eq!(t.row(0), &[0.0, 1.0, 0.0, 1.0]);
    assert!((t.row(2)[2] - (2.0f64 / 100.0).sin()).abs() < 1e-15);
}

#[test]
fn early_loss_decreases_for_most_seeds() {
    let (_dir, train_set, _) = synthetic_splits(8, 0);
    let seeds = 10;
    let mut decreasing = 0;
    for seed in 0..seeds {
        let out = train(&train_set, &[], &small_train_config(50, seed), None, |_, _| Ok(())).unwrap();
        let first = out.log.first().unwrap().train_loss;
        let last = out.log.last().unwrap().train_loss;
        if last < first {
            decreasing += 1;
        }
    }
    assert!(decreasing * 10 >= seeds * 9, "{decreasing}/{seeds} seeds decreased");
}
