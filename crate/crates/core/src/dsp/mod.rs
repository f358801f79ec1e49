//! Waveform and time-frequency front end.

pub mod audio;
pub mod mel;
pub mod stft;

pub use audio::{decode_wav, encode_wav, read_wav, write_wav, AudioBuffer, WavFormat};
pub use mel::{
    build_mel_filterbank, exp_mel, magnitude_to_mel, mel_spectrogram, mel_weights, MelConfig, MelFilterbank,
    MelMatrix, MelNorm, MelScale, DEFAULT_LOG_FLOOR,
};
pub use stft::{istft, stft, ComplexSpectrogram, StftConfig};
