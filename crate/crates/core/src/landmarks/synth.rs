//! Deterministic GRID-style synthetic data: sentences from the six-slot
//! grammar, landmark motion built from per-viseme mouth templates, and
//! audio-like features keyed on viseme identity.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    DatasetManifest, LandmarkError, LandmarkSequence, ManifestEntry, Split, DEFAULT_FPS,
    FRAME_DIM,
};
use crate::audio::{AudioFeatureSequence, FeatureOrigin};
use crate::text::Frontend;

/// Maximum number of frames blended at the start of each viseme segment.
pub const FADE_FRAMES: usize = 2;

const FEATURE_TABLE_SEED: u64 = 0x5EED_A0D1;
const FEATURE_NOISE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grammar {
    /// command + color + preposition + letter + digit + adverb
    #[default]
    Grid,
}

impl Grammar {
    fn slots(self) -> [&'static [&'static str]; 6] {
        match self {
            Grammar::Grid => [
                &["bin", "lay", "place", "set"],
                &["blue", "green", "red", "white"],
                &["at", "by", "in", "with"],
                &[
                    "a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l", "m", "n", "o",
                    "p", "q", "r", "s", "t", "u", "v", "x", "y", "z",
                ],
                &[
                    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight",
                    "nine",
                ],
                &["again", "now", "please", "soon"],
            ],
        }
    }

    pub fn sample(self, rng: &mut impl Rng) -> String {
        self.slots()
            .iter()
            .map(|words| words[rng.random_range(0..words.len())])
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    /// Training sentences.
    pub n_sentences: usize,
    pub val_sentences: usize,
    pub test_sentences: usize,
    pub grammar: Grammar,
    pub seed: u64,
    pub frames: usize,
    pub feature_dim: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_sentences: 8,
            val_sentences: 0,
            test_sentences: 0,
            grammar: Grammar::Grid,
            seed: 7,
            frames: 75,
            feature_dim: 13,
        }
    }
}

// (width factor, lip opening in px) per viseme class
const MOUTH: [(f64, f64); 22] = [
    (1.00, 0.0),
    (1.05, 10.0),
    (1.00, 16.0),
    (0.85, 12.0),
    (1.10, 8.0),
    (0.90, 6.0),
    (1.20, 4.0),
    (0.65, 3.0),
    (0.75, 9.0),
    (0.90, 13.0),
    (0.80, 10.0),
    (1.05, 14.0),
    (1.00, 8.0),
    (0.80, 5.0),
    (1.00, 7.0),
    (1.15, 2.0),
    (0.85, 4.0),
    (1.05, 5.0),
    (1.10, 1.5),
    (1.05, 5.0),
    (1.00, 7.0),
    (0.95, 0.0),
];

fn mouth_params(class: usize) -> (f64, f64) {
    MOUTH.get(class).copied().unwrap_or_else(|| {
        // classes beyond the default table still get a fixed, distinct shape
        let h = (class as f64 * 0.618_033_988_75).fract();
        (0.7 + 0.5 * h, 14.0 * (1.0 - h))
    })
}

/// Pixel-space 68-point face for one viseme class on a 256 x 256 canvas.
pub fn face_template(class: usize) -> Vec<f64> {
    let (width, open) = mouth_params(class);
    let jaw_drop = 0.8 * open;
    let mut pts = vec![(0.0, 0.0); 68];

    for (i, p) in pts[0..=16].iter_mut().enumerate() {
        let t = PI - PI * i as f64 / 16.0;
        let drop = jaw_drop * t.sin().powi(2);
        *p = (128.0 + 72.0 * t.cos(), 120.0 + 90.0 * t.sin() + drop);
    }
    for i in 0..5 {
        let u = i as f64 / 4.0;
        let lift = 6.0 * (PI * u).sin();
        pts[17 + i] = (78.0 + 38.0 * u, 96.0 - lift);
        pts[22 + i] = (140.0 + 38.0 * u, 96.0 - lift);
    }
    for i in 0..4 {
        pts[27 + i] = (128.0, 104.0 + 11.0 * i as f64);
    }
    for i in 0..5 {
        let u = i as f64 / 4.0;
        pts[31 + i] = (116.0 + 24.0 * u, 146.0 + 3.0 * (PI * u).sin());
    }
    for (base, cx) in [(36, 98.0), (42, 158.0)] {
        for k in 0..6 {
            let phi = PI - 2.0 * PI * k as f64 / 6.0;
            pts[base + k] = (cx + 12.0 * phi.cos(), 110.0 - 5.0 * phi.sin());
        }
    }

    let half_w = 24.0 * width;
    let cy = 174.0 + 0.3 * jaw_drop;
    let (upper, lower) = (8.0 + 0.3 * open, 9.0 + 0.7 * open);
    for k in 0..12 {
        let phi = PI - 2.0 * PI * k as f64 / 12.0;
        let h = if phi.sin() > 0.0 { upper } else { lower };
        pts[48 + k] = (128.0 + half_w * phi.cos(), cy - h * phi.sin());
    }
    for k in 0..8 {
        let phi = PI - 2.0 * PI * k as f64 / 8.0;
        pts[60 + k] = (
            128.0 + 0.8 * half_w * phi.cos(),
            cy - 0.5 * open * phi.sin(),
        );
    }
    pts.iter().flat_map(|&(x, y)| [x, y]).collect()
}

/// Frame range `[start, end)` of viseme `i` out of `n` over `frames` frames.
pub fn segment_bounds(i: usize, n: usize, frames: usize) -> (usize, usize) {
    (i * frames / n, (i + 1) * frames / n)
}

/// Landmark motion for a viseme sequence: frames split evenly across the
/// visemes, each segment holding its class template after a cosine
/// cross-fade from the previous template.
pub fn render_visemes(visemes: &[usize], frames: usize) -> Result<LandmarkSequence, LandmarkError> {
    if visemes.is_empty() || visemes.len() > frames {
        return Err(LandmarkError::Manifest(format!(
            "cannot spread {} visemes over {frames} frames",
            visemes.len()
        )));
    }
    let templates: Vec<Vec<f64>> = visemes.iter().map(|&c| face_template(c)).collect();
    let mut data = Vec::with_capacity(frames * FRAME_DIM);
    for (s, tpl) in templates.iter().enumerate() {
        let (start, end) = segment_bounds(s, visemes.len(), frames);
        let len = end - start;
        let fade = if s == 0 { 0 } else { FADE_FRAMES.min(len - 1) };
        for o in 0..len {
            if o < fade {
                let alpha = 0.5 - 0.5 * (PI * (o + 1) as f64 / (fade + 1) as f64).cos();
                let prev = &templates[s - 1];
                data.extend(prev.iter().zip(tpl).map(|(a, b)| (1.0 - alpha) * a + alpha * b));
            } else {
                data.extend_from_slice(tpl);
            }
        }
    }
    LandmarkSequence::new(data, DEFAULT_FPS)
}

fn feature_table(classes: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(FEATURE_TABLE_SEED);
    (0..classes)
        .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

fn synth_features(
    visemes: &[usize],
    frames: usize,
    dim: usize,
    table: &[Vec<f64>],
    rng: &mut impl Rng,
) -> AudioFeatureSequence {
    let mut data = Vec::with_capacity(frames * dim);
    for s in 0..visemes.len() {
        let (start, end) = segment_bounds(s, visemes.len(), frames);
        for _ in start..end {
            for &e in &table[visemes[s]] {
                let noise: f64 = rng.sample(StandardNormal);
                data.push(e + FEATURE_NOISE * noise);
            }
        }
    }
    AudioFeatureSequence::new(frames, dim, data, 1.0 / DEFAULT_FPS, FeatureOrigin::Real)
        .expect("finite by construction")
}

/// Generates sentences, landmark CSVs, feature matrices and `manifest.json`
/// under `out_dir`. Output is a pure function of `spec`.
pub fn synth_dataset(
    spec: &SynthSpec,
    frontend: &Frontend,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest, LandmarkError> {
    let out = out_dir.as_ref();
    for sub in ["landmarks", "features"] {
        let d = out.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| LandmarkError::io(&d, e))?;
    }
    let mut sentence_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x00A0_D10F_EA70);
    let table = feature_table(frontend.table.class_count(), spec.feature_dim);

    let total = spec.n_sentences + spec.val_sentences + spec.test_sentences;
    let mut entries = Vec::with_capacity(total);
    for i in 0..total {
        let split = if i < spec.n_sentences {
            Split::Train
        } else if i < spec.n_sentences + spec.val_sentences {
            Split::Val
        } else {
            Split::Test
        };
        let text = spec.grammar.sample(&mut sentence_rng);
        let visemes = frontend.compile(&text)?.visemes.visemes;
        let landmarks = render_visemes(&visemes, spec.frames)?;
        let features =
            synth_features(&visemes, spec.frames, spec.feature_dim, &table, &mut noise_rng);

        let id = format!("s{i:04}");
        let lm_rel = Path::new("landmarks").join(format!("{id}.csv"));
        let ft_rel = Path::new("features").join(format!("{id}.feat"));
        landmarks.write_csv(out.join(&lm_rel))?;
        features.write(&out.join(&ft_rel))?;
        entries.push(ManifestEntry {
            id,
            text,
            landmark_path: lm_rel,
            wav_path: None,
            features_path: Some(ft_rel),
            split,
        });
    }
    let manifest = DatasetManifest::new(entries, out);
    manifest.save(out.join("manifest.json"))?;
    Ok(manifest)
}
