mod common;

use common::{brute_force_dtw, levenshtein_oracle, random_seq};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use lipmotion_core::landmarks::{LandmarkSequence, FRAME_DIM};
use lipmotion_core::metrics::{bleu, corpus_bleu, dtw_p, mpjpe, wer};


#[test]
fn dtw_matches_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=6 {
        for m in 1..=6 {
            let (a, b) = (random_seq(n, &mut rng), random_seq(m, &mut rng));
            assert_eq!(dtw_p(&a, &b).unwrap(), brute_force_dtw(&a, &b), "{n}x{m}");
        }
    }
}

#[test]
fn dtw_never_exceeds_mpjpe_and_both_are_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let n = rng.random_range(1..12);
        let (a, b) = (random_seq(n, &mut rng), random_seq(n, &mut rng));
        let (d, e) = (dtw_p(&a, &b).unwrap(), mpjpe(&a, &b).unwrap());
        assert!(d <= e + 1e-12);
        assert_eq!(e, mpjpe(&b, &a).unwrap());
        assert!((d - dtw_p(&b, &a).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn mpjpe_two_frame_toy_by_hand() {
    // point 0 moves by (3,4) in frame 0 and (6,8) in frame 1; others are exact
    let mut pred = vec![0.0; 2 * FRAME_DIM];
    let truth = pred.clone();
    pred[0] = 3.0;
    pred[1] = 4.0;
    pred[FRAME_DIM] = 6.0;
    pred[FRAME_DIM + 1] = 8.0;
    let p = LandmarkSequence::new(pred, 25.0).unwrap();
    let t = LandmarkSequence::new(truth, 25.0).unwrap();
    assert_eq!(mpjpe(&p, &t).unwrap(), (5.0 / 68.0 + 10.0 / 68.0) / 2.0);
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

#[test]
fn bleu_matches_hand_computation() {
    let reference = words("the cat is on the mat");
    // unigram counts clipped at the reference count of "the"
    assert_eq!(bleu(&words("the the the the the the the"), &reference, 1), 2.0 / 7.0);
    let cand = words("the cat sat on the mat");
    assert_eq!(bleu(&cand, &reference, 1), 5.0 / 6.0);
    assert_eq!(bleu(&cand, &reference, 2), (5.0f64 / 6.0 * (3.0 / 5.0)).powf(0.5));
    // shorter candidate: brevity penalty exp(1 - 6/3)
    let short = words("the cat is");
    assert_eq!(bleu(&short, &reference, 1), (1.0f64 - 2.0).exp() * 1.0);
    assert_eq!(corpus_bleu(&[(cand.clone(), reference.clone())], 2), bleu(&cand, &reference, 2));
}

fn pick(n: usize, vocab: &[&str], rng: &mut ChaCha8Rng) -> Vec<String> {
    (0..n).map(|_| vocab[rng.random_range(0..vocab.len())].to_string()).collect()
}

#[test]
fn wer_matches_recursive_oracle() {
    let vocab = ["bin", "lay", "red", "at", "two", "now", "soon"];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let (n, m) = (rng.random_range(0..8), rng.random_range(1..8));
        let c = pick(n, &vocab, &mut rng);
        let r = pick(m, &vocab, &mut rng);
        assert_eq!(wer(&c, &r).unwrap(), levenshtein_oracle(&c, &r) as f64 / r.len() as f64);
    }
}

#[test]
fn uniform_translation_gives_exact_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let truth = random_seq(4, &mut rng);
    let moved: Vec<f64> = truth
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| v + if i % 2 == 0 { 3.0 } else { 4.0 })
        .collect();
    let moved = LandmarkSequence::new(moved, 25.0).unwrap();
    assert!((mpjpe(&moved, &truth).unwrap() - 5.0).abs() < 1e-12);
    // integer grid keeps every step exact
    let grid = LandmarkSequence::new((0..FRAME_DIM).map(|i| i as f64).collect(), 25.0).unwrap();
    let shifted = LandmarkSequence::new(grid.data().iter().enumerate().map(|(i, v)| v + [3.0, 4.0][i % 2]).collect(), 25.0).unwrap();
    assert_eq!(mpjpe(&shifted, &grid).unwrap(), 5.0);
}
