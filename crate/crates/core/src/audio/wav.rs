use std::path::Path;

use super::resample::resample_to_internal;
use super::{AudioError, Waveform};

/// Reads a 16-bit PCM WAV file, mixes it down to mono, scales samples to
/// [-1, 1] and resamples 48 kHz input to the internal 16 kHz rate.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform, AudioError> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => AudioError::io(path, io),
        other => AudioError::Format(other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(AudioError::Format(format!(
            "{:?} {}-bit samples, only 16-bit PCM is supported",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let channels = spec.channels as usize;
    if channels == 0 || channels > 2 {
        return Err(AudioError::Format(format!("{channels} channels")));
    }
    let raw: Vec<i16> = reader
        .into_samples::<i16>()
        .collect::<Result<_, _>>()
        .map_err(|e| AudioError::Format(e.to_string()))?;
    let samples: Vec<f64> = raw
        .chunks_exact(channels)
        .map(|frame| frame.iter().map(|&s| s as f64 / 32768.0).sum::<f64>() / channels as f64)
        .collect();
    resample_to_internal(&Waveform::new(samples, spec.sample_rate)?)
}

/// Writes mono samples in [-1, 1] as 16-bit PCM.
pub fn write_wav_pcm16(
    path: impl AsRef<Path>,
    samples: &[f64],
    sample_rate: u32,
    channels: u16,
) -> Result<(), AudioError> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let to_audio = |e: hound::Error| match e {
        hound::Error::IoError(io) => AudioError::io(path, io),
        other => AudioError::Format(other.to_string()),
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(to_audio)?;
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        for _ in 0..channels {
            w.write_sample(v).map_err(to_audio)?;
        }
    }
    w.finalize().map_err(to_audio)
}
