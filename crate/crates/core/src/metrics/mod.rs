//! Landmark trajectory metrics (MPJPE, DTW-P) and text metrics (BLEU, WER).

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landmarks::LandmarkSequence;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {pred} predicted vs {truth} reference frames")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("empty reference")]
    EmptyReference,
}

/// Mean Euclidean distance between corresponding points of two frames.
fn frame_distance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() / 2;
    a.chunks(2)
        .zip(b.chunks(2))
        .map(|(p, q)| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
        .sum::<f64>()
        / n as f64
}

/// Mean per-point position error over all frames.
pub fn mpjpe(pred: &LandmarkSequence, truth: &LandmarkSequence) -> Result<f64, MetricError> {
    if pred.len() != truth.len() {
        return Err(MetricError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let total: f64 = (0..pred.len())
        .map(|m| frame_distance(pred.frame(m), truth.frame(m)))
        .sum();
    Ok(total / pred.len() as f64)
}

/// Dynamic time warping with steps (1,0), (0,1), (1,1) and per-frame cost
/// equal to the mean point distance. Returns the minimum total cost divided
/// by the number of cells on the optimal path; among equal-cost paths the
/// longest is used.
pub fn dtw_p(pred: &LandmarkSequence, truth: &LandmarkSequence) -> Result<f64, MetricError> {
    let (n, m) = (pred.len(), truth.len());
    if n == 0 || m == 0 {
        return Err(MetricError::EmptyInput);
    }
    // (cost, path length) per cell
    let mut acc = vec![(f64::INFINITY, 0usize); n * m];
    for i in 0..n {
        for j in 0..m {
            let c = frame_distance(pred.frame(i), truth.frame(j));
            let best = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                let mut best = (f64::INFINITY, 0usize);
                let prev = [
                    (i > 0).then(|| (i - 1) * m + j),
                    (j > 0).then(|| i * m + j - 1),
                    (i > 0 && j > 0).then(|| (i - 1) * m + j - 1),
                ];
                for cand in prev.into_iter().flatten().map(|k| acc[k]) {
                    if cand.0 < best.0 || (cand.0 == best.0 && cand.1 > best.1) {
                        best = cand;
                    }
                }
                best
            };
            acc[i * m + j] = (best.0 + c, best.1 + 1);
        }
    }
    let (cost, len) = acc[n * m - 1];
    Ok(cost / len as f64)
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches and candidate n-gram total.
fn modified_precision(candidate: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let matched = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, candidate.len().saturating_sub(n - 1))
}

fn brevity_penalty(cand_len: usize, ref_len: usize) -> f64 {
    if cand_len == 0 {
        0.0
    } else if cand_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    }
}

const SENTENCE_EPSILON: f64 = 0.1;

/// Sentence-level BLEU with uniform weights up to `n`. Orders with zero
/// matches use `0.1 / total` in place of zero.
pub fn bleu(candidate: &[String], reference: &[String], n: usize) -> f64 {
    assert!(n >= 1, "BLEU order must be at least 1");
    if candidate.is_empty() {
        return 0.0;
    }
    let mut product = 1.0;
    for k in 1..=n {
        let (matched, total) = modified_precision(candidate, reference, k);
        if total == 0 {
            return 0.0;
        }
        let p = if matched == 0 {
            if k == 1 {
                return 0.0;
            }
            SENTENCE_EPSILON / total as f64
        } else {
            matched as f64 / total as f64
        };
        product *= p;
    }
    brevity_penalty(candidate.len(), reference.len()) * product.powf(1.0 / n as f64)
}

/// Unsmoothed corpus BLEU over (candidate, reference) pairs.
pub fn corpus_bleu(pairs: &[(Vec<String>, Vec<String>)], n: usize) -> f64 {
    assert!(n >= 1, "BLEU order must be at least 1");
    let (mut cand_len, mut ref_len) = (0, 0);
    let mut matched = vec![0usize; n];
    let mut total = vec![0usize; n];
    for (c, r) in pairs {
        cand_len += c.len();
        ref_len += r.len();
        for k in 1..=n {
            let (m, t) = modified_precision(c, r, k);
            matched[k - 1] += m;
            total[k - 1] += t;
        }
    }
    if matched.contains(&0) {
        return 0.0;
    }
    let product: f64 = matched
        .iter()
        .zip(&total)
        .map(|(&m, &t)| m as f64 / t as f64)
        .product();
    brevity_penalty(cand_len, ref_len) * product.powf(1.0 / n as f64)
}

/// Word-level Levenshtein distance divided by the reference length.
pub fn wer(candidate: &[String], reference: &[String]) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let mut prev: Vec<usize> = (0..=candidate.len()).collect();
    for (i, r) in reference.iter().enumerate() {
        let mut cur = vec![i + 1; candidate.len() + 1];
        for (j, c) in candidate.iter().enumerate() {
            let sub = prev[j] + usize::from(r != c);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    Ok(prev[candidate.len()] as f64 / reference.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub id: String,
    pub dtw_p: f64,
    pub mpjpe: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu4: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wer: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub version: u32,
    pub samples: Vec<SampleMetrics>,
    /// Means over samples (corpus BLEU for the text metrics).
    pub aggregate: SampleMetrics,
}

impl MetricReport {
    /// Aggregates per-sample metrics; `text_pairs` feeds corpus BLEU.
    pub fn new(samples: Vec<SampleMetrics>, text_pairs: &[(Vec<String>, Vec<String>)]) -> Self {
        let n = samples.len().max(1) as f64;
        let mean = |f: &dyn Fn(&SampleMetrics) -> f64| samples.iter().map(f).sum::<f64>() / n;
        let has_text = !text_pairs.is_empty();
        let wers: Vec<f64> = samples.iter().filter_map(|s| s.wer).collect();
        let aggregate = SampleMetrics {
            id: "corpus".into(),
            dtw_p: mean(&|s| s.dtw_p),
            mpjpe: mean(&|s| s.mpjpe),
            bleu1: has_text.then(|| corpus_bleu(text_pairs, 1)),
            bleu4: has_text.then(|| corpus_bleu(text_pairs, 4)),
            wer: (!wers.is_empty()).then(|| wers.iter().sum::<f64>() / wers.len() as f64),
        };
        Self {
            version: 1,
            samples,
            aggregate,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width text table, one row per sample plus the aggregate.
    pub fn to_table(&self) -> String {
        let id_w = self
            .samples
            .iter()
            .map(|s| s.id.len())
            .chain([6])
            .max()
            .unwrap_or(6);
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<id_w$}  {:>12}  {:>12}  {:>10}  {:>10}  {:>10}",
            "id", "dtw_p", "mpjpe", "bleu1", "bleu4", "wer"
        );
        for s in self.samples.iter().chain([&self.aggregate]) {
            let _ = writeln!(
                out,
                "{:<id_w$}  {:>12.6}  {:>12.6}  {:>10}  {:>10}  {:>10}",
                s.id,
                s.dtw_p,
                s.mpjpe,
                fmt(s.bleu1),
                fmt(s.bleu4),
                fmt(s.wer)
            );
        }
        out
    }
}
