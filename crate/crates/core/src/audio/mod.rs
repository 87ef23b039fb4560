//! Waveform ingestion and MFCC features.

mod mfcc;
mod resample;
mod wav;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::Tensor;

pub use mfcc::{log_mel_energies, mfcc, MelFilterbank, MfccConfig};
pub use resample::{decimate_by_3, resample_to_internal, INTERNAL_RATE};
pub use wav::{load_wav, write_wav_pcm16};

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("unsupported audio format: {0}")]
    Format(String),
    #[error("unsupported sample rate {0} Hz (expected 16000 or 48000)")]
    UnsupportedRate(u32),
    #[error("waveform of {len} samples is shorter than one {window}-sample window")]
    EmptyInput { len: usize, window: usize },
    #[error("invalid MFCC configuration: {0}")]
    InvalidConfig(String),
    #[error("waveform contains non-finite samples")]
    NonFinite,
    #[error("bad feature file: {0}")]
    Matrix(String),
}

impl AudioError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        AudioError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate != 16_000 && sample_rate != 48_000 {
            return Err(AudioError::UnsupportedRate(sample_rate));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(AudioError::NonFinite);
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureOrigin {
    Real,
    Pseudo,
    Zero,
}

/// `n` frames of `dim`-dimensional features, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioFeatureSequence {
    n: usize,
    dim: usize,
    data: Vec<f64>,
    pub frame_hop_s: f64,
    pub origin: FeatureOrigin,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    version: u32,
    n: usize,
    d: usize,
    hop_s: f64,
    origin: FeatureOrigin,
}

impl AudioFeatureSequence {
    pub fn new(
        n: usize,
        dim: usize,
        data: Vec<f64>,
        frame_hop_s: f64,
        origin: FeatureOrigin,
    ) -> Result<Self, AudioError> {
        if data.len() != n * dim {
            return Err(AudioError::Matrix(format!(
                "{} values for a {n}x{dim} matrix",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(AudioError::NonFinite);
        }
        Ok(Self {
            n,
            dim,
            data,
            frame_hop_s,
            origin,
        })
    }

    pub fn zeros(n: usize, dim: usize, frame_hop_s: f64) -> Self {
        Self {
            n,
            dim,
            data: vec![0.0; n * dim],
            frame_hop_s,
            origin: FeatureOrigin::Zero,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::matrix(self.n, self.dim, self.data.clone()).expect("consistent by construction")
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }

    /// Writes the raw little-endian `f64` matrix to `path` and the JSON
    /// sidecar `{version, n, d, hop_s, origin}` next to it.
    pub fn write(&self, path: &Path) -> Result<(), AudioError> {
        let mut bytes = Vec::with_capacity(self.data.len() * 8);
        for x in &self.data {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        fs::write(path, bytes).map_err(|e| AudioError::io(path, e))?;
        let sidecar = Sidecar {
            version: 1,
            n: self.n,
            d: self.dim,
            hop_s: self.frame_hop_s,
            origin: self.origin,
        };
        let side = Self::sidecar_path(path);
        let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        fs::write(&side, json + "\n").map_err(|e| AudioError::io(&side, e))
    }

    pub fn read(path: &Path) -> Result<Self, AudioError> {
        let side = Self::sidecar_path(path);
        let json = fs::read_to_string(&side).map_err(|e| AudioError::io(&side, e))?;
        let meta: Sidecar =
            serde_json::from_str(&json).map_err(|e| AudioError::Matrix(e.to_string()))?;
        if meta.version != 1 {
            return Err(AudioError::Matrix(format!("unsupported version {}", meta.version)));
        }
        let bytes = fs::read(path).map_err(|e| AudioError::io(path, e))?;
        if bytes.len() != meta.n * meta.d * 8 {
            return Err(AudioError::Matrix(format!(
                "{} bytes for a {}x{} matrix",
                bytes.len(),
                meta.n,
                meta.d
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(meta.n, meta.d, data, meta.hop_s, meta.origin)
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.dim).map(|i| format!("c{i}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.n {
            let row: Vec<String> = self.frame(i).iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}
