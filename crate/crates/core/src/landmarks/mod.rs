//! 68-point facial landmark sequences: normalization, CSV files, dataset
//! manifests and the synthetic GRID-style generator.

mod manifest;
mod synth;
pub mod topology;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use manifest::{DatasetManifest, ManifestEntry, Split};
pub use synth::{render_visemes, segment_bounds, synth_dataset, Grammar, SynthSpec, FADE_FRAMES};

pub const POINTS: usize = 68;
pub const FRAME_DIM: usize = POINTS * 2;
pub const DEFAULT_FPS: f64 = 25.0;

#[derive(Debug, Error)]
pub enum LandmarkError {
    #[error("landmark sequence has no frames")]
    Empty,
    #[error("landmark coordinates must be finite")]
    NonFinite,
    #[error("degenerate landmarks: RMS radius {0:e} below 1e-9")]
    DegenerateInput(f64),
    #[error("frame data length {0} is not a multiple of {FRAME_DIM}")]
    BadLength(usize),
    #[error("{path}:{line}: {message}")]
    Csv {
        path: String,
        line: usize,
        message: String,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Text(#[from] crate::text::TextError),
    #[error(transparent)]
    Audio(#[from] crate::audio::AudioError),
}

impl LandmarkError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        LandmarkError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// `M` frames of 68 `(x, y)` points, stored frame-major as
/// `x0, y0, …, x67, y67`.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSequence {
    data: Vec<f64>,
    pub fps: f64,
}

impl LandmarkSequence {
    pub fn new(data: Vec<f64>, fps: f64) -> Result<Self, LandmarkError> {
        if data.is_empty() {
            return Err(LandmarkError::Empty);
        }
        if !data.len().is_multiple_of(FRAME_DIM) {
            return Err(LandmarkError::BadLength(data.len()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(LandmarkError::NonFinite);
        }
        Ok(Self { data, fps })
    }

    pub fn from_frames(frames: &[Vec<f64>], fps: f64) -> Result<Self, LandmarkError> {
        if let Some(bad) = frames.iter().find(|f| f.len() != FRAME_DIM) {
            return Err(LandmarkError::BadLength(bad.len()));
        }
        Self::new(frames.concat(), fps)
    }

    pub fn len(&self) -> usize {
        self.data.len() / FRAME_DIM
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, m: usize) -> &[f64] {
        &self.data[m * FRAME_DIM..(m + 1) * FRAME_DIM]
    }

    pub fn point(&self, m: usize, p: usize) -> (f64, f64) {
        let f = self.frame(m);
        (f[2 * p], f[2 * p + 1])
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(FRAME_DIM)
    }

    /// Mean frame over the sequence.
    pub fn mean_frame(&self) -> Vec<f64> {
        let mut mean = vec![0.0; FRAME_DIM];
        for f in self.frames() {
            for (a, b) in mean.iter_mut().zip(f) {
                *a += b;
            }
        }
        let m = self.len() as f64;
        mean.iter_mut().for_each(|x| *x /= m);
        mean
    }

    pub fn read_csv(path: impl AsRef<Path>, fps: f64) -> Result<Self, LandmarkError> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|e| LandmarkError::io(path, e))?;
        Self::parse_csv(&src, &path.display().to_string(), fps)
    }

    /// Parses the `x0,y0,…,x67,y67` header plus one row per frame.
    pub fn parse_csv(src: &str, name: &str, fps: f64) -> Result<Self, LandmarkError> {
        let err = |line: usize, message: String| LandmarkError::Csv {
            path: name.to_string(),
            line,
            message,
        };
        let mut lines = src.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        if header.trim() != csv_header() {
            return Err(err(1, "expected header x0,y0,...,x67,y67".into()));
        }
        let mut data = Vec::new();
        for (i, line) in lines {
            let before = data.len();
            for field in line.split(',') {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| err(i + 1, format!("bad number '{}'", field.trim())))?;
                data.push(v);
            }
            if data.len() - before != FRAME_DIM {
                return Err(err(
                    i + 1,
                    format!("expected {FRAME_DIM} columns, got {}", data.len() - before),
                ));
            }
        }
        if data.is_empty() {
            return Err(err(2, "no frames".into()));
        }
        Self::new(data, fps).map_err(|e| err(0, e.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.data.len() * 12);
        out.push_str(&csv_header());
        out.push('\n');
        for f in self.frames() {
            for (i, x) in f.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                // shortest round-trip representation
                write!(out, "{x}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), LandmarkError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| LandmarkError::io(path, e))
    }
}

pub fn csv_header() -> String {
    (0..POINTS)
        .map(|i| format!("x{i},y{i}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Similarity transform removed by [`normalize_landmarks`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub scale: f64,
    pub offset: [f64; 2],
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization {
        scale: 1.0,
        offset: [0.0, 0.0],
    };
}

/// Subtracts the sequence centroid and divides by the RMS point radius,
/// both taken over every point of every frame.
pub fn normalize_landmarks(
    raw: &LandmarkSequence,
) -> Result<(LandmarkSequence, Normalization), LandmarkError> {
    let n = (raw.data.len() / 2) as f64;
    let (mut cx, mut cy) = (0.0, 0.0);
    for p in raw.data.chunks(2) {
        cx += p[0];
        cy += p[1];
    }
    cx /= n;
    cy /= n;
    let ms: f64 = raw
        .data
        .chunks(2)
        .map(|p| (p[0] - cx).powi(2) + (p[1] - cy).powi(2))
        .sum::<f64>()
        / n;
    let rms = ms.sqrt();
    if !(rms >= 1e-9) {
        return Err(LandmarkError::DegenerateInput(rms));
    }
    let data = raw
        .data
        .chunks(2)
        .flat_map(|p| [(p[0] - cx) / rms, (p[1] - cy) / rms])
        .collect();
    Ok((
        LandmarkSequence { data, fps: raw.fps },
        Normalization {
            scale: rms,
            offset: [cx, cy],
        },
    ))
}

pub fn denormalize_landmarks(l: &LandmarkSequence, t: &Normalization) -> LandmarkSequence {
    let data = l
        .data
        .chunks(2)
        .flat_map(|p| [p[0] * t.scale + t.offset[0], p[1] * t.scale + t.offset[1]])
        .collect();
    LandmarkSequence { data, fps: l.fps }
}
