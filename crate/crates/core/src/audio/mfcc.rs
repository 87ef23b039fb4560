use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::resample::resample_to_internal;
use super::{AudioError, AudioFeatureSequence, FeatureOrigin, Waveform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfccConfig {
    pub window_s: f64,
    pub hop_s: f64,
    pub n_mels: usize,
    pub n_coeffs: usize,
    pub preemphasis: f64,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            window_s: 0.025,
            hop_s: 0.010,
            n_mels: 26,
            n_coeffs: 13,
            preemphasis: 0.97,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    fn validate(&self) -> Result<(), AudioError> {
        if !(self.hop_s > 0.0 && self.window_s >= self.hop_s) {
            return Err(AudioError::InvalidConfig(format!(
                "need window_s >= hop_s > 0, got {} / {}",
                self.window_s, self.hop_s
            )));
        }
        if self.n_mels == 0 || self.n_coeffs == 0 || self.n_coeffs > self.n_mels {
            return Err(AudioError::InvalidConfig(format!(
                "need 0 < n_coeffs <= n_mels, got {} / {}",
                self.n_coeffs, self.n_mels
            )));
        }
        if !(self.log_floor > 0.0) {
            return Err(AudioError::InvalidConfig("log_floor must be positive".into()));
        }
        Ok(())
    }

    pub fn window_samples(&self, rate: u32) -> usize {
        (self.window_s * rate as f64).round() as usize
    }

    pub fn hop_samples(&self, rate: u32) -> usize {
        (self.hop_s * rate as f64).round() as usize
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the HTK mel scale between 0 Hz
/// and Nyquist, evaluated at the FFT bin frequencies.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    n_bins: usize,
    weights: Vec<Vec<f64>>,
    centres_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32) -> Self {
        let n_bins = n_fft / 2 + 1;
        let nyquist = sample_rate as f64 / 2.0;
        let (lo, hi) = (hz_to_mel(0.0), hz_to_mel(nyquist));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = |b: usize| b as f64 * sample_rate as f64 / n_fft as f64;
        let weights = (0..n_mels)
            .map(|m| {
                let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
                (0..n_bins)
                    .map(|b| {
                        let f = bin_hz(b);
                        if f <= l || f >= r {
                            0.0
                        } else if f <= c {
                            (f - l) / (c - l)
                        } else {
                            (r - f) / (r - c)
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            n_bins,
            weights,
            centres_hz: edges[1..=n_mels].to_vec(),
        }
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn centre_hz(&self, filter: usize) -> f64 {
        self.centres_hz[filter]
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        debug_assert_eq!(power.len(), self.n_bins);
        self.weights
            .iter()
            .map(|w| w.iter().zip(power).map(|(a, b)| a * b).sum())
            .collect()
    }
}

struct Framer {
    rate: u32,
    window: usize,
    hop: usize,
    n_fft: usize,
    hann: Vec<f64>,
}

impl Framer {
    fn new(cfg: &MfccConfig, rate: u32) -> Result<Self, AudioError> {
        cfg.validate()?;
        let window = cfg.window_samples(rate);
        let hop = cfg.hop_samples(rate);
        if window == 0 || hop == 0 {
            return Err(AudioError::InvalidConfig("window or hop rounds to zero samples".into()));
        }
        let hann = (0..window)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / (window - 1).max(1) as f64).cos())
            .collect();
        Ok(Self {
            rate,
            window,
            hop,
            n_fft: window.next_power_of_two(),
            hann,
        })
    }

    /// Pre-emphasised, windowed frames' power spectra.
    fn power_spectra(&self, samples: &[f64], preemphasis: f64) -> Result<Vec<Vec<f64>>, AudioError> {
        if samples.len() < self.window {
            return Err(AudioError::EmptyInput {
                len: samples.len(),
                window: self.window,
            });
        }
        let emphasised: Vec<f64> = samples
            .iter()
            .enumerate()
            .map(|(i, &x)| if i == 0 { x } else { x - preemphasis * samples[i - 1] })
            .collect();
        let n_frames = (samples.len() - self.window) / self.hop + 1;
        let fft = FftPlanner::<f64>::new().plan_fft_forward(self.n_fft);
        let mut buf = vec![Complex::new(0.0, 0.0); self.n_fft];
        let mut out = Vec::with_capacity(n_frames);
        for f in 0..n_frames {
            let start = f * self.hop;
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for (i, (x, w)) in emphasised[start..start + self.window]
                .iter()
                .zip(&self.hann)
                .enumerate()
            {
                buf[i].re = x * w;
            }
            fft.process(&mut buf);
            out.push(buf[..self.n_fft / 2 + 1].iter().map(|c| c.norm_sqr()).collect());
        }
        Ok(out)
    }
}

/// Log mel-filterbank energies per frame, before the DCT.
pub fn log_mel_energies(w: &Waveform, cfg: &MfccConfig) -> Result<Vec<Vec<f64>>, AudioError> {
    let w = resample_to_internal(w)?;
    let framer = Framer::new(cfg, w.sample_rate())?;
    let bank = MelFilterbank::new(cfg.n_mels, framer.n_fft, framer.rate);
    Ok(framer
        .power_spectra(w.samples(), cfg.preemphasis)?
        .iter()
        .map(|p| {
            bank.apply(p)
                .into_iter()
                .map(|e| e.max(cfg.log_floor).ln())
                .collect()
        })
        .collect())
}

/// Orthonormal DCT-II, first `n_out` coefficients.
fn dct2(x: &[f64], n_out: usize) -> Vec<f64> {
    let k = x.len() as f64;
    (0..n_out)
        .map(|j| {
            let s = if j == 0 { (1.0 / k).sqrt() } else { (2.0 / k).sqrt() };
            s * x
                .iter()
                .enumerate()
                .map(|(i, v)| v * (PI * j as f64 * (i as f64 + 0.5) / k).cos())
                .sum::<f64>()
        })
        .collect()
}

/// MFCCs: pre-emphasis, Hann frames, power spectrum, mel filterbank, log,
/// DCT-II. Produces `floor((len - window) / hop) + 1` frames.
pub fn mfcc(w: &Waveform, cfg: &MfccConfig) -> Result<AudioFeatureSequence, AudioError> {
    let energies = log_mel_energies(w, cfg)?;
    let n = energies.len();
    let data: Vec<f64> = energies
        .iter()
        .flat_map(|e| dct2(e, cfg.n_coeffs))
        .collect();
    AudioFeatureSequence::new(n, cfg.n_coeffs, data, cfg.hop_s, FeatureOrigin::Real)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn silence(secs: f64) -> Waveform {
        Waveform::new(vec![0.0; (secs * 16_000.0) as usize], 16_000).unwrap()
    }

    #[test]
    fn frame_count_for_three_seconds() {
        let f = mfcc(&silence(3.0), &MfccConfig::default()).unwrap();
        assert_eq!(f.len(), 298);
        assert_eq!(f.dim(), 13);
    }

    #[test]
    fn silence_gives_constant_finite_frames() {
        let f = mfcc(&silence(0.5), &MfccConfig::default()).unwrap();
        assert!(f.data().iter().all(|x| x.is_finite()));
        for i in 1..f.len() {
            assert_eq!(f.frame(i), f.frame(0));
        }
    }

    #[test]
    fn too_short() {
        let w = Waveform::new(vec![0.0; 399], 16_000).unwrap();
        assert!(matches!(
            mfcc(&w, &MfccConfig::default()),
            Err(AudioError::EmptyInput { len: 399, window: 400 })
        ));
    }

    #[test]
    fn config_validation() {
        let bad = MfccConfig {
            n_coeffs: 30,
            ..MfccConfig::default()
        };
        assert!(mfcc(&silence(1.0), &bad).is_err());
        let bad = MfccConfig {
            hop_s: 0.05,
            ..MfccConfig::default()
        };
        assert!(mfcc(&silence(1.0), &bad).is_err());
    }

    #[test]
    fn dct_of_constant_is_dc_only() {
        let c = dct2(&[2.0; 8], 4);
        assert!((c[0] - 2.0 * 8f64.sqrt()).abs() < 1e-12);
        assert!(c[1..].iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn mel_scale_round_trip() {
        for hz in [0.0, 100.0, 1000.0, 7999.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
    }
}
