use std::f64::consts::PI;

use super::{AudioError, Waveform};

pub const INTERNAL_RATE: u32 = 16_000;

const TAPS: usize = 97;
// cutoff relative to the 48 kHz input rate (7.2 kHz)
const CUTOFF: f64 = 0.15;

fn lowpass() -> Vec<f64> {
    let mid = (TAPS - 1) as f64 / 2.0;
    let mut h: Vec<f64> = (0..TAPS)
        .map(|i| {
            let t = i as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * CUTOFF
            } else {
                (2.0 * PI * CUTOFF * t).sin() / (PI * t)
            };
            let x = 2.0 * PI * i as f64 / (TAPS - 1) as f64;
            let blackman = 0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos();
            sinc * blackman
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|x| *x /= sum);
    h
}

/// Low-pass filters and keeps every third sample; output length is
/// `ceil(len / 3)`. The filter is centered, so there is no group delay.
pub fn decimate_by_3(samples: &[f64]) -> Vec<f64> {
    let h = lowpass();
    let mid = (TAPS - 1) / 2;
    let n_out = samples.len().div_ceil(3);
    (0..n_out)
        .map(|n| {
            let centre = 3 * n;
            h.iter()
                .enumerate()
                .filter_map(|(k, hk)| {
                    (centre + k)
                        .checked_sub(mid)
                        .and_then(|i| samples.get(i))
                        .map(|x| hk * x)
                })
                .sum()
        })
        .collect()
}

/// Brings a waveform to the 16 kHz rate used for feature extraction.
pub fn resample_to_internal(w: &Waveform) -> Result<Waveform, AudioError> {
    match w.sample_rate() {
        INTERNAL_RATE => Ok(w.clone()),
        48_000 => Waveform::new(decimate_by_3(w.samples()), INTERNAL_RATE),
        other => Err(AudioError::UnsupportedRate(other)),
    }
}
