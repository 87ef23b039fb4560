//! Text-driven lip motion synthesis at the facial-landmark level.
//!
//! The crate is organised as a pipeline:
//!
//! * [`text`] compiles raw text into phoneme and viseme sequences.
//! * [`audio`] reads PCM WAV files and computes MFCC features.
//! * [`landmarks`] handles 68-point landmark sequences, datasets and synthetic data.
//! * [`tensor`] is a small reverse-mode autodiff engine over dense `f64` tensors.
//! * [`model`] is the cross-modal transformer that maps visemes (and optionally
//!   audio) to landmark frames, including the pseudo-audio generator.
//! * [`training`] runs the audio-dropout curriculum and writes checkpoints.
//! * [`metrics`] implements DTW-P, MPJPE, BLEU and WER.
//! * [`pipeline`] wires everything into the file-level commands used by the CLI.

pub mod audio;
pub mod landmarks;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod tensor;
pub mod text;
pub mod training;
