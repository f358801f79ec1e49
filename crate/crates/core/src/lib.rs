//! Mel-spectrogram vocoding by range-null space decomposition.
//!
//! The mel degradation `X = log(A |S|)` is linear in the magnitude once the
//! log is undone, so a magnitude estimate splits into a range-space part
//! `A⁺ exp(X)` that is fully determined by the mel input and a null-space
//! part `(I - A⁺A) N` that a network is free to generate without ever
//! changing the mel it reproduces. This crate provides:
//!
//! * [`dsp`]: STFT/iSTFT, mel filterbank, log-mel features, WAV I/O
//! * [`rnd`]: pseudo-inverse, range/null projections, spectrum assembly
//! * [`generator`]: band-split dual-path network forward pass and model accounting
//! * [`losses`]: reconstruction, omnidirectional phase, hinge and feature-matching losses
//! * [`model_io`]: weight file format, config document, seeded initialization
//! * [`cli`]: the command implementations behind the `rndvoc` binary

pub mod cli;
pub mod dsp;
pub mod error;
pub mod generator;
pub mod losses;
pub mod model_io;
pub mod rnd;
pub mod weights;

pub use error::{Error, Result};
pub use weights::{Tensor, WeightBundle};
