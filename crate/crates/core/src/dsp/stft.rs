//! One-sided STFT and overlap-add inverse.
//!
//! Conventions: the forward transform is unnormalized, the inverse carries
//! the `1/n_fft` factor, and synthesis divides the overlap-added signal by
//! the overlap-added squared window. In centered mode the signal is
//! reflect-padded by `n_fft / 2` on both sides, so a signal of `len` samples
//! yields `len / hop + 1` frames.

use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Envelope values below this are treated as "not covered by any frame".
const ENVELOPE_EPS: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct StftConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub window: Vec<f64>,
    pub center: bool,
}

impl StftConfig {
    /// Periodic Hann window of length `n_fft`.
    pub fn hann(n_fft: usize, hop: usize, center: bool) -> Self {
        Self {
            n_fft,
            hop,
            window: hann_window(n_fft),
            center,
        }
    }

    /// 1024-point FFT, 1024-sample Hann window, hop 256, centered.
    pub fn vocoder_default() -> Self {
        Self::hann(1024, 256, true)
    }

    pub fn n_freqs(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn pad(&self) -> usize {
        if self.center {
            self.n_fft / 2
        } else {
            0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop > self.n_fft {
            return Err(Error::Config(format!(
                "need n_fft >= hop > 0, got n_fft={} hop={}",
                self.n_fft, self.hop
            )));
        }
        if self.window.len() != self.n_fft {
            return Err(Error::Config(format!(
                "window length {} != n_fft {}",
                self.window.len(),
                self.n_fft
            )));
        }
        if self.window.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("stft window"));
        }
        let dev = self.cola_deviation();
        if !(dev < 1e-10) {
            return Err(Error::Config(format!(
                "squared window is not overlap-add constant at hop {} (relative deviation {dev:.3e})",
                self.hop
            )));
        }
        Ok(())
    }

    /// Max relative deviation of the overlap-added squared window from its
    /// mean, measured over one hop period in steady state.
    pub fn cola_deviation(&self) -> f64 {
        let sums: Vec<f64> = (0..self.hop)
            .map(|n| {
                (n..self.n_fft)
                    .step_by(self.hop)
                    .map(|i| self.window[i] * self.window[i])
                    .sum()
            })
            .collect();
        let mean = sums.iter().sum::<f64>() / sums.len() as f64;
        if mean == 0.0 {
            return f64::INFINITY;
        }
        sums.iter()
            .map(|s| (s - mean).abs() / mean)
            .fold(0.0, f64::max)
    }

    /// Frame count for a signal of `len` samples.
    pub fn num_frames(&self, len: usize) -> Result<usize> {
        let padded = len + 2 * self.pad();
        if len == 0 || (self.center && len <= self.pad()) || padded < self.n_fft {
            let needed = if self.center {
                self.pad() + 1
            } else {
                self.n_fft
            };
            return Err(Error::InputTooShort { len, needed });
        }
        Ok((padded - self.n_fft) / self.hop + 1)
    }

    /// Longest output `istft` can produce from `frames` frames.
    pub fn synthesizable_len(&self, frames: usize) -> usize {
        if frames == 0 {
            return 0;
        }
        (self.n_fft + (frames - 1) * self.hop).saturating_sub(self.pad())
    }
}

pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// One-sided complex spectrogram, `n_freqs x frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub real: Array2<f64>,
    pub imag: Array2<f64>,
}

impl ComplexSpectrogram {
    pub fn new(real: Array2<f64>, imag: Array2<f64>) -> Result<Self> {
        if real.dim() != imag.dim() {
            return Err(Error::shape(
                "complex spectrogram",
                format!("{:?}", real.dim()),
                format!("{:?}", imag.dim()),
            ));
        }
        Ok(Self { real, imag })
    }

    pub fn zeros(freqs: usize, frames: usize) -> Self {
        Self {
            real: Array2::zeros((freqs, frames)),
            imag: Array2::zeros((freqs, frames)),
        }
    }

    pub fn n_freqs(&self) -> usize {
        self.real.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.real.ncols()
    }

    pub fn magnitude(&self) -> Array2<f64> {
        ndarray::Zip::from(&self.real)
            .and(&self.imag)
            .map_collect(|&re, &im| re.hypot(im))
    }

    /// Phase in (-pi, pi]; `atan2(0, 0)` is 0.
    pub fn phase(&self) -> Array2<f64> {
        ndarray::Zip::from(&self.real)
            .and(&self.imag)
            .map_collect(|&re, &im| wrapped_atan2(im, re))
    }
}

/// `atan2` folded into (-pi, pi]. The only adjustment over `f64::atan2` is
/// mapping -pi (from a negative-zero imaginary part) onto +pi.
pub fn wrapped_atan2(y: f64, x: f64) -> f64 {
    let p = y.atan2(x);
    if p <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else if p == 0.0 {
        0.0
    } else {
        p
    }
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    out.extend((1..=pad).rev().map(|i| x[i]));
    out.extend_from_slice(x);
    out.extend((1..=pad).map(|i| x[n - 1 - i]));
    out
}

pub fn stft(audio: &AudioBuffer, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    cfg.validate()?;
    let frames = cfg.num_frames(audio.len())?;
    let padded = if cfg.center {
        reflect_pad(&audio.samples, cfg.pad())
    } else {
        audio.samples.clone()
    };
    let n_freqs = cfg.n_freqs();
    let fft = plan(cfg.n_fft, false);

    let columns: Vec<Vec<Complex64>> = (0..frames)
        .into_par_iter()
        .map(|t| {
            let start = t * cfg.hop;
            let mut buf: Vec<Complex64> = padded[start..start + cfg.n_fft]
                .iter()
                .zip(&cfg.window)
                .map(|(&x, &w)| Complex64::new(x * w, 0.0))
                .collect();
            fft.process(&mut buf);
            buf.truncate(n_freqs);
            buf
        })
        .collect();

    let mut spec = ComplexSpectrogram::zeros(n_freqs, frames);
    for (t, col) in columns.iter().enumerate() {
        for (f, c) in col.iter().enumerate() {
            spec.real[[f, t]] = c.re;
            spec.imag[[f, t]] = c.im;
        }
    }
    Ok(spec)
}

pub fn istft(
    spec: &ComplexSpectrogram,
    cfg: &StftConfig,
    out_len: usize,
    sample_rate: u32,
) -> Result<AudioBuffer> {
    cfg.validate()?;
    let n_freqs = cfg.n_freqs();
    if spec.n_freqs() != n_freqs {
        return Err(Error::shape("istft rows", n_freqs, spec.n_freqs()));
    }
    let frames = spec.n_frames();
    let available = cfg.synthesizable_len(frames);
    if out_len > available {
        return Err(Error::OutputTooLong {
            requested: out_len,
            available,
        });
    }
    let n = cfg.n_fft;
    let ifft = plan(n, true);
    let scale = 1.0 / n as f64;

    let frames_td: Vec<Vec<f64>> = (0..frames)
        .into_par_iter()
        .map(|t| {
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            for f in 0..n_freqs {
                buf[f] = Complex64::new(spec.real[[f, t]], spec.imag[[f, t]]);
            }
            // irfft semantics: imaginary parts of DC and Nyquist are dropped
            buf[0].im = 0.0;
            if n % 2 == 0 {
                buf[n / 2].im = 0.0;
            }
            for f in 1..n.div_ceil(2) {
                buf[n - f] = buf[f].conj();
            }
            ifft.process(&mut buf);
            buf.iter()
                .zip(&cfg.window)
                .map(|(c, &w)| c.re * scale * w)
                .collect()
        })
        .collect();

    let total = n + frames.saturating_sub(1) * cfg.hop;
    let mut acc = vec![0.0; total];
    let mut env = vec![0.0; total];
    for (t, frame) in frames_td.iter().enumerate() {
        let start = t * cfg.hop;
        for (i, (&v, &w)) in frame.iter().zip(&cfg.window).enumerate() {
            acc[start + i] += v;
            env[start + i] += w * w;
        }
    }
    let offset = cfg.pad();
    let samples = (0..out_len)
        .map(|i| {
            let e = env[i + offset];
            if e > ENVELOPE_EPS {
                acc[i + offset] / e
            } else {
                0.0
            }
        })
        .collect();
    AudioBuffer::new(samples, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn audio(samples: Vec<f64>) -> AudioBuffer {
        AudioBuffer::new(samples, 22050).unwrap()
    }

    #[test]
    fn zero_frame_is_zero_spectrum() {
        let cfg = StftConfig::hann(1024, 256, false);
        let s = stft(&audio(vec![0.0; 1024]), &cfg).unwrap();
        assert_eq!(s.real.dim(), (513, 1));
        assert!(s.real.iter().chain(s.imag.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn frame_count_follows_center_convention() {
        let cfg = StftConfig::vocoder_default();
        assert_eq!(cfg.num_frames(22050).unwrap(), 87);
        assert_eq!(cfg.num_frames(256 * 100).unwrap(), 101);
        let plain = StftConfig::hann(1024, 256, false);
        assert_eq!(plain.num_frames(1024 + 3 * 256 + 5).unwrap(), 4);
    }

    #[test]
    fn too_short_input_is_rejected() {
        let cfg = StftConfig::hann(1024, 256, false);
        assert!(matches!(
            stft(&audio(vec![0.0; 1000]), &cfg),
            Err(Error::InputTooShort { .. })
        ));
        let centered = StftConfig::vocoder_default();
        assert!(matches!(
            stft(&audio(vec![0.1; 512]), &centered),
            Err(Error::InputTooShort { .. })
        ));
    }

    #[test]
    fn hann_squared_overlap_is_constant() {
        assert!(StftConfig::vocoder_default().cola_deviation() < 1e-10);
        let bad = StftConfig::hann(1024, 700, false);
        assert!(bad.validate().is_err());
        assert!(StftConfig::hann(1024, 0, false).validate().is_err());
    }

    #[test]
    fn bin_aligned_cosine_peaks_at_coherent_gain() {
        let n = 1024;
        let cfg = StftConfig::hann(n, 256, false);
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * 16.0 * i as f64 / n as f64).cos())
            .collect();
        let s = stft(&audio(x.clone()), &cfg).unwrap();
        let mag = s.magnitude();
        // direct DFT by summation at bin 16
        let (mut re, mut im) = (0.0, 0.0);
        for (i, (&xi, &w)) in x.iter().zip(&cfg.window).enumerate() {
            let ang = -2.0 * PI * 16.0 * i as f64 / n as f64;
            re += xi * w * ang.cos();
            im += xi * w * ang.sin();
        }
        let coherent_gain = cfg.window.iter().sum::<f64>() / n as f64;
        assert!((mag[[16, 0]] - coherent_gain * 512.0).abs() < 1e-6);
        assert!((mag[[16, 0]] - re.hypot(im)).abs() < 1e-9);
        let peak = (0..513)
            .max_by(|&a, &b| mag[[a, 0]].total_cmp(&mag[[b, 0]]))
            .unwrap();
        assert_eq!(peak, 16);
    }

    #[test]
    fn zero_spectrogram_synthesizes_silence() {
        let cfg = StftConfig::vocoder_default();
        let y = istft(&ComplexSpectrogram::zeros(513, 10), &cfg, 9 * 256, 22050).unwrap();
        assert!(y.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn windowed_impulse_is_reproduced_in_place() {
        let n = 1024;
        let cfg = StftConfig::hann(n, 256, false);
        let k = 300;
        let mut x = vec![0.0; n];
        x[k] = 1.0;
        let s = stft(&audio(x), &cfg).unwrap();
        let y = istft(&s, &cfg, n, 22050).unwrap();
        for (i, &v) in y.samples.iter().enumerate() {
            let expect = if i == k { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-6, "sample {i}: {v}");
        }
    }

    #[test]
    fn roundtrip_recovers_signal() {
        let cfg = StftConfig::vocoder_default();
        let x: Vec<f64> = (0..22050)
            .map(|i| ((i as f64 * 0.37).sin() + (i as f64 * 0.011).cos()) * 0.3)
            .collect();
        let s = stft(&audio(x.clone()), &cfg).unwrap();
        let y = istft(&s, &cfg, x.len(), 22050).unwrap();
        let err: f64 = x.iter().zip(&y.samples).map(|(a, b)| (a - b).powi(2)).sum();
        let sig: f64 = x.iter().map(|a| a * a).sum();
        assert!(10.0 * (sig / err).log10() > 60.0);
    }

    #[test]
    fn istft_rejects_overlong_output() {
        let cfg = StftConfig::vocoder_default();
        let spec = ComplexSpectrogram::zeros(513, 4);
        assert_eq!(cfg.synthesizable_len(4), 1024 + 3 * 256 - 512);
        assert!(matches!(
            istft(&spec, &cfg, 2000, 22050),
            Err(Error::OutputTooLong { .. })
        ));
        assert!(istft(&ComplexSpectrogram::zeros(100, 4), &cfg, 10, 22050).is_err());
    }

    #[test]
    fn phase_is_in_half_open_interval() {
        let re = Array2::from_shape_vec((1, 3), vec![-1.0, -1.0, 0.0]).unwrap();
        let im = Array2::from_shape_vec((1, 3), vec![0.0, -0.0, 0.0]).unwrap();
        let p = ComplexSpectrogram::new(re, im).unwrap().phase();
        assert_eq!(p[[0, 0]], PI);
        assert_eq!(p[[0, 1]], PI);
        assert_eq!(p[[0, 2]], 0.0);
    }
}
