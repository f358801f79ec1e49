//! Triangular mel filterbank and the log-mel degradation `log(A |S|)`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::stft::ComplexSpectrogram;
use crate::error::{Error, Result};
use crate::rnd::{compute_pinv, PseudoInverseReport, DEFAULT_SV_FLOOR};

/// `n_mels x frames` log-mel (or linear mel) matrix.
pub type MelMatrix = Array2<f64>;

pub const DEFAULT_LOG_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MelScale {
    /// `2595 * log10(1 + f / 700)`
    #[default]
    Htk,
    /// Linear below 1 kHz, logarithmic above.
    Slaney,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MelNorm {
    None,
    /// Each triangle scaled to unit area: `2 / (f_right - f_left)`.
    #[default]
    Slaney,
}

impl MelScale {
    pub fn hz_to_mel(self, hz: f64) -> f64 {
        match self {
            MelScale::Htk => 2595.0 * (1.0 + hz / 700.0).log10(),
            MelScale::Slaney => {
                let f_sp = 200.0 / 3.0;
                let min_log_hz = 1000.0;
                let min_log_mel = min_log_hz / f_sp;
                let logstep = 6.4f64.ln() / 27.0;
                if hz >= min_log_hz {
                    min_log_mel + (hz / min_log_hz).ln() / logstep
                } else {
                    hz / f_sp
                }
            }
        }
    }

    pub fn mel_to_hz(self, mel: f64) -> f64 {
        match self {
            MelScale::Htk => 700.0 * (10f64.powf(mel / 2595.0) - 1.0),
            MelScale::Slaney => {
                let f_sp = 200.0 / 3.0;
                let min_log_hz = 1000.0;
                let min_log_mel = min_log_hz / f_sp;
                let logstep = 6.4f64.ln() / 27.0;
                if mel >= min_log_mel {
                    min_log_hz * (logstep * (mel - min_log_mel)).exp()
                } else {
                    mel * f_sp
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub sample_rate: u32,
    pub n_fft: usize,
    pub log_floor: f64,
    #[serde(default)]
    pub scale: MelScale,
    #[serde(default)]
    pub norm: MelNorm,
}

impl MelConfig {
    /// 22.05 kHz, 80 bands up to 8 kHz.
    pub fn ljspeech() -> Self {
        Self {
            n_mels: 80,
            f_min: 0.0,
            f_max: 8000.0,
            sample_rate: 22050,
            n_fft: 1024,
            log_floor: DEFAULT_LOG_FLOOR,
            scale: MelScale::Htk,
            norm: MelNorm::Slaney,
        }
    }

    /// 24 kHz, 100 bands up to 12 kHz.
    pub fn libritts() -> Self {
        Self {
            n_mels: 100,
            f_max: 12000.0,
            sample_rate: 24000,
            ..Self::ljspeech()
        }
    }

    pub fn n_freqs(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(0.0 <= self.f_min && self.f_min < self.f_max && self.f_max <= nyquist) {
            return Err(Error::Config(format!(
                "need 0 <= f_min < f_max <= {nyquist}, got f_min={} f_max={}",
                self.f_min, self.f_max
            )));
        }
        if self.n_mels == 0 || self.n_mels >= self.n_freqs() {
            return Err(Error::Config(format!(
                "need 0 < n_mels < {}, got {}",
                self.n_freqs(),
                self.n_mels
            )));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return Err(Error::Config("log_floor must be a positive real".into()));
        }
        Ok(())
    }
}

/// The degradation matrix `A` (`n_mels x n_freqs`) and its pseudo-inverse.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    pub a: Array2<f64>,
    pub a_pinv: Array2<f64>,
    pub report: PseudoInverseReport,
}

impl MelFilterbank {
    pub fn n_mels(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_freqs(&self) -> usize {
        self.a.ncols()
    }

    /// Wraps an arbitrary nonnegative degradation matrix.
    pub fn from_matrix(a: Array2<f64>) -> Result<Self> {
        if let Some((i, _)) = a
            .rows()
            .into_iter()
            .enumerate()
            .find(|(_, r)| !r.iter().any(|&v| v > 0.0))
        {
            return Err(Error::RankDeficient(format!("band {i} has no positive weight")));
        }
        let (a_pinv, report) = compute_pinv(&a, DEFAULT_SV_FLOOR)?;
        if report.rank < a.nrows() {
            return Err(Error::RankDeficient(format!(
                "rank {} < {} bands",
                report.rank,
                a.nrows()
            )));
        }
        Ok(Self { a, a_pinv, report })
    }
}

/// Triangle weights only, without the pseudo-inverse.
pub fn mel_weights(cfg: &MelConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    let n_freqs = cfg.n_freqs();
    let fft_freqs: Vec<f64> = (0..n_freqs)
        .map(|k| k as f64 * cfg.sample_rate as f64 / cfg.n_fft as f64)
        .collect();
    let lo = cfg.scale.hz_to_mel(cfg.f_min);
    let hi = cfg.scale.hz_to_mel(cfg.f_max);
    let pts: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| cfg.scale.mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();

    let mut a = Array2::zeros((cfg.n_mels, n_freqs));
    for m in 0..cfg.n_mels {
        let (left, center, right) = (pts[m], pts[m + 1], pts[m + 2]);
        let enorm = match cfg.norm {
            MelNorm::Slaney => 2.0 / (right - left),
            MelNorm::None => 1.0,
        };
        for (k, &f) in fft_freqs.iter().enumerate() {
            let rising = (f - left) / (center - left);
            let falling = (right - f) / (right - center);
            let w = rising.min(falling).max(0.0);
            a[[m, k]] = w * enorm;
        }
    }
    Ok(a)
}

pub fn build_mel_filterbank(cfg: &MelConfig) -> Result<MelFilterbank> {
    MelFilterbank::from_matrix(mel_weights(cfg)?)
}

/// `log(max(A |S|, log_floor))`, natural log.
pub fn mel_spectrogram(
    spec: &ComplexSpectrogram,
    fb: &MelFilterbank,
    log_floor: f64,
) -> Result<MelMatrix> {
    magnitude_to_mel(&spec.magnitude(), fb, log_floor)
}

pub fn magnitude_to_mel(mag: &Array2<f64>, fb: &MelFilterbank, log_floor: f64) -> Result<MelMatrix> {
    if mag.nrows() != fb.n_freqs() {
        return Err(Error::shape("mel_spectrogram", fb.n_freqs(), mag.nrows()));
    }
    Ok(fb.a.dot(mag).mapv(|v| v.max(log_floor).ln()))
}

/// Undoes the log of a log-mel matrix, giving `A |S|` up to flooring.
pub fn exp_mel(x_mel: &MelMatrix) -> MelMatrix {
    x_mel.mapv(f64::exp)
}
