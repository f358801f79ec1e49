//! Training objectives as plain evaluators (no gradients).

use std::f64::consts::PI;

use ndarray::{Array2, Array3, Zip};
use serde::{Deserialize, Serialize};

use crate::dsp::{
    build_mel_filterbank, istft, magnitude_to_mel, stft, AudioBuffer, ComplexSpectrogram,
    MelConfig, StftConfig,
};
use crate::error::{Error, Result};

/// The nine fixed 3x3 differential kernels, ordered row-major over the
/// neighbour offset `(df, dt)` in `{-1, 0, 1}²`. Kernel 5 (index 4) is the
/// centre tap and returns the phase itself; every other kernel is `+1` at the
/// centre and `-1` at its neighbour, i.e. `phi(f, t) - phi(f + df, t + dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseKernelBank {
    pub kernels: [[[f64; 3]; 3]; 9],
}

impl PhaseKernelBank {
    pub const IDENTITY: usize = 4;

    pub fn new() -> Self {
        let mut kernels = [[[0.0; 3]; 3]; 9];
        for (j, k) in kernels.iter_mut().enumerate() {
            k[1][1] = 1.0;
            if j != Self::IDENTITY {
                k[j / 3][j % 3] = -1.0;
            }
        }
        Self { kernels }
    }

    /// `(df, dt)` neighbour of kernel `j`, `(0, 0)` for the identity.
    pub fn offset(j: usize) -> (isize, isize) {
        (j as isize / 3 - 1, j as isize % 3 - 1)
    }
}

impl Default for PhaseKernelBank {
    fn default() -> Self {
        Self::new()
    }
}

/// Correlates `phase` with each kernel, replicating edge bins so the output
/// keeps the `F x T` size. Output is `9 x F x T`.
pub fn omni_phase_diff(phase: &Array2<f64>, bank: &PhaseKernelBank) -> Array3<f64> {
    let (f, t) = phase.dim();
    let mut out = Array3::zeros((9, f, t));
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    for (j, k) in bank.kernels.iter().enumerate() {
        for fi in 0..f {
            for ti in 0..t {
                let mut acc = 0.0;
                for (a, row) in k.iter().enumerate() {
                    for (b, &kv) in row.iter().enumerate() {
                        if kv == 0.0 {
                            continue;
                        }
                        let ff = clamp(fi as isize + a as isize - 1, f);
                        let tt = clamp(ti as isize + b as isize - 1, t);
                        acc += kv * phase[[ff, tt]];
                    }
                }
                out[[j, fi, ti]] = acc;
            }
        }
    }
    out
}

/// `|x - 2π round(x / 2π)|`, in `[0, π]`.
pub fn anti_wrap(x: f64) -> f64 {
    (x - 2.0 * PI * (x / (2.0 * PI)).round()).abs()
}

fn same_dim<D: ndarray::Dimension>(context: &'static str, a: &D, b: &D) -> Result<()> {
    if a != b {
        return Err(Error::shape(context, format!("{a:?}"), format!("{b:?}")));
    }
    Ok(())
}

/// Mean anti-wrapped difference over all nine directional channels.
pub fn loss_phase(phase_true: &Array2<f64>, phase_est: &Array2<f64>, bank: &PhaseKernelBank) -> Result<f64> {
    same_dim("loss_phase", &phase_true.raw_dim(), &phase_est.raw_dim())?;
    let a = omni_phase_diff(phase_true, bank);
    let b = omni_phase_diff(phase_est, bank);
    let sum = Zip::from(&a).and(&b).fold(0.0, |acc, &x, &y| acc + anti_wrap(x - y));
    Ok(sum / a.len() as f64)
}

/// Mean absolute difference of log magnitudes, floored at `floor`.
pub fn loss_log_amplitude(mag_true: &Array2<f64>, mag_est: &Array2<f64>, floor: f64) -> Result<f64> {
    same_dim("loss_log_amplitude", &mag_true.raw_dim(), &mag_est.raw_dim())?;
    let sum = Zip::from(mag_true).and(mag_est).fold(0.0, |acc, &x, &y| {
        acc + (x.max(floor).ln() - y.max(floor).ln()).abs()
    });
    Ok(sum / mag_true.len() as f64)
}

/// Mean absolute error over the real and imaginary planes together.
pub fn loss_ri(spec_true: &ComplexSpectrogram, spec_est: &ComplexSpectrogram) -> Result<f64> {
    same_dim("loss_ri", &spec_true.real.raw_dim(), &spec_est.real.raw_dim())?;
    let l1 = |a: &Array2<f64>, b: &Array2<f64>| {
        Zip::from(a).and(b).fold(0.0, |acc, &x, &y| acc + (x - y).abs())
    };
    let total = l1(&spec_true.real, &spec_est.real) + l1(&spec_true.imag, &spec_est.imag);
    Ok(total / (2 * spec_true.real.len()) as f64)
}

/// Mean absolute error between log-mel spectrograms of two waveforms.
pub fn loss_mel(
    audio_true: &AudioBuffer,
    audio_est: &AudioBuffer,
    mel_cfg: &MelConfig,
    stft_cfg: &StftConfig,
) -> Result<f64> {
    if audio_true.len() != audio_est.len() {
        return Err(Error::shape("loss_mel lengths", audio_true.len(), audio_est.len()));
    }
    let fb = build_mel_filterbank(mel_cfg)?;
    let a = magnitude_to_mel(&stft(audio_true, stft_cfg)?.magnitude(), &fb, mel_cfg.log_floor)?;
    let b = magnitude_to_mel(&stft(audio_est, stft_cfg)?.magnitude(), &fb, mel_cfg.log_floor)?;
    let sum = Zip::from(&a).and(&b).fold(0.0, |acc, &x, &y| acc + (x - y).abs());
    Ok(sum / a.len() as f64)
}

/// Mean squared distance (over real and imaginary planes) between a
/// spectrogram and its re-analysis `stft(istft(S))`. Synthesis length is
/// `(T - 1) * hop`, so spectrograms of hop-aligned signals are fixed points.
pub fn loss_consistency(spec_est: &ComplexSpectrogram, stft_cfg: &StftConfig) -> Result<f64> {
    let frames = spec_est.n_frames();
    if frames < 2 {
        return Err(Error::InputTooShort { len: frames, needed: 2 });
    }
    let len = (frames - 1) * stft_cfg.hop;
    let audio = istft(spec_est, stft_cfg, len, 1)?;
    let again = stft(&audio, stft_cfg)?;
    same_dim("loss_consistency", &spec_est.real.raw_dim(), &again.real.raw_dim())?;
    let sq = |a: &Array2<f64>, b: &Array2<f64>| {
        Zip::from(a).and(b).fold(0.0, |acc, &x, &y| acc + (x - y) * (x - y))
    };
    let total = sq(&spec_est.real, &again.real) + sq(&spec_est.imag, &again.imag);
    Ok(total / (2 * spec_est.real.len()) as f64)
}

/// One sub-discriminator's verdict: a score (scalar, or the mean of a score
/// map) and its intermediate feature maps.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorView {
    pub score: f64,
    pub features: Vec<Vec<f64>>,
}

impl DiscriminatorView {
    pub fn new(score: f64, features: Vec<Vec<f64>>) -> Self {
        Self { score, features }
    }

    pub fn from_score_map(map: &[f64], features: Vec<Vec<f64>>) -> Self {
        Self::new(map.iter().sum::<f64>() / map.len().max(1) as f64, features)
    }
}

fn check_congruent(real: &[DiscriminatorView], fake: &[DiscriminatorView]) -> Result<()> {
    if real.len() != fake.len() || real.is_empty() {
        return Err(Error::shape("discriminator count", real.len(), fake.len()));
    }
    for (r, f) in real.iter().zip(fake) {
        if r.features.len() != f.features.len() {
            return Err(Error::shape("feature layer count", r.features.len(), f.features.len()));
        }
        for (a, b) in r.features.iter().zip(&f.features) {
            if a.len() != b.len() {
                return Err(Error::shape("feature size", a.len(), b.len()));
            }
        }
    }
    Ok(())
}

/// `(1/M) Σ_m [max(0, 1 - D_m(real)) + max(0, 1 + D_m(fake))]`
pub fn hinge_discriminator(real: &[DiscriminatorView], fake: &[DiscriminatorView]) -> Result<f64> {
    if real.len() != fake.len() || real.is_empty() {
        return Err(Error::shape("discriminator count", real.len(), fake.len()));
    }
    let sum: f64 = real
        .iter()
        .zip(fake)
        .map(|(r, f)| (1.0 - r.score).max(0.0) + (1.0 + f.score).max(0.0))
        .sum();
    Ok(sum / real.len() as f64)
}

/// `(1/M) Σ_m max(0, 1 - D_m(fake))`
pub fn hinge_generator(fake: &[DiscriminatorView]) -> Result<f64> {
    if fake.is_empty() {
        return Err(Error::shape("discriminator count", ">= 1", 0));
    }
    let sum: f64 = fake.iter().map(|f| (1.0 - f.score).max(0.0)).sum();
    Ok(sum / fake.len() as f64)
}

/// Per-tensor mean absolute difference, averaged over all (layer,
/// sub-discriminator) pairs.
pub fn feature_match(real: &[DiscriminatorView], fake: &[DiscriminatorView]) -> Result<f64> {
    check_congruent(real, fake)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for (r, f) in real.iter().zip(fake) {
        for (a, b) in r.features.iter().zip(&f.features) {
            let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
            total += s / a.len().max(1) as f64;
            count += 1;
        }
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_a: f64,
    pub lambda_p: f64,
    pub lambda_ri: f64,
    pub lambda_mel: f64,
    pub lambda_c: f64,
    pub lambda_g: f64,
    pub lambda_fm: f64,
}

impl LossWeights {
    /// Unverified defaults; the published values were not available.
    pub fn unverified_defaults() -> Self {
        Self {
            lambda_a: 45.0,
            lambda_p: 100.0,
            lambda_ri: 45.0,
            lambda_mel: 45.0,
            lambda_c: 1.0,
            lambda_g: 1.0,
            lambda_fm: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("loss weights must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 7] {
        [
            self.lambda_a,
            self.lambda_p,
            self.lambda_ri,
            self.lambda_mel,
            self.lambda_c,
            self.lambda_g,
            self.lambda_fm,
        ]
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::unverified_defaults()
    }
}

/// Unweighted loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossComponents {
    pub amplitude: f64,
    pub phase: f64,
    pub real_imag: f64,
    pub mel: f64,
    pub consistency: f64,
    pub adversarial: f64,
    pub feature_match: f64,
}

impl LossComponents {
    pub const NAMES: [&'static str; 7] = [
        "amplitude",
        "phase",
        "real_imag",
        "mel",
        "consistency",
        "adversarial",
        "feature_match",
    ];

    pub fn as_array(&self) -> [f64; 7] {
        [
            self.amplitude,
            self.phase,
            self.real_imag,
            self.mel,
            self.consistency,
            self.adversarial,
            self.feature_match,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub total: f64,
    pub reconstruction: f64,
    /// `(name, raw value, weighted value)`
    pub terms: Vec<(&'static str, f64, f64)>,
}

/// `Σ λ_k L_k`, with the reconstruction part (the first five terms) reported
/// separately.
pub fn total_generator_loss(c: &LossComponents, w: &LossWeights) -> Result<LossReport> {
    w.validate()?;
    let raw = c.as_array();
    let lam = w.as_array();
    let terms: Vec<_> = LossComponents::NAMES
        .iter()
        .zip(raw.iter().zip(&lam))
        .map(|(&name, (&v, &l))| (name, v, l * v))
        .collect();
    let reconstruction = terms[..5].iter().map(|t| t.2).sum::<f64>();
    let total = reconstruction + terms[5].2 + terms[6].2;
    Ok(LossReport {
        total,
        reconstruction,
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_bank_structure() {
        let bank = PhaseKernelBank::new();
        let mut seen = std::collections::HashSet::new();
        for (j, k) in bank.kernels.iter().enumerate() {
            let sum: f64 = k.iter().flatten().sum();
            assert_eq!(k[1][1], 1.0);
            if j == PhaseKernelBank::IDENTITY {
                assert_eq!(sum, 1.0);
                assert_eq!(k.iter().flatten().filter(|&&v| v != 0.0).count(), 1);
            } else {
                assert_eq!(sum, 0.0);
                let (df, dt) = PhaseKernelBank::offset(j);
                assert_eq!(k[(df + 1) as usize][(dt + 1) as usize], -1.0);
                assert!(seen.insert((df, dt)));
            }
        }
        assert_eq!(seen.len(), 8);
    }

    #[test]
    fn constant_phase_has_no_differentials() {
        let p = Array2::from_elem((4, 5), 0.7);
        let d = omni_phase_diff(&p, &PhaseKernelBank::new());
        for j in 0..9 {
            let expect = if j == PhaseKernelBank::IDENTITY { 0.7 } else { 0.0 };
            assert!(d.index_axis(ndarray::Axis(0), j).iter().all(|&v| v == expect));
        }
    }

    #[test]
    fn time_ramp_gives_time_differentials_only() {
        let w = 0.3;
        let p = Array2::from_shape_fn((5, 6), |(_, t)| w * t as f64);
        let d = omni_phase_diff(&p, &PhaseKernelBank::new());
        for j in 0..9 {
            let (_, dt) = PhaseKernelBank::offset(j);
            if j == PhaseKernelBank::IDENTITY {
                continue;
            }
            for f in 1..4 {
                for t in 1..5 {
                    let expect = -(dt as f64) * w;
                    assert!((d[[j, f, t]] - expect).abs() < 1e-12, "j={j}");
                }
            }
        }
    }

    #[test]
    fn anti_wrap_values() {
        assert_eq!(anti_wrap(0.0), 0.0);
        assert!(anti_wrap(2.0 * PI).abs() < 1e-15);
        assert!((anti_wrap(2.5 * PI) - 0.5 * PI).abs() < 1e-12);
        assert!((anti_wrap(-PI) - PI).abs() < 1e-15);
    }

    #[test]
    fn phase_loss_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = Array2::from_shape_fn((6, 7), |_| rng.gen_range(-PI..PI));
        let bank = PhaseKernelBank::new();
        assert_eq!(loss_phase(&p, &p, &bank).unwrap(), 0.0);
        let shifted = p.mapv(|v| v + 2.0 * PI);
        assert!(loss_phase(&p, &shifted, &bank).unwrap() < 1e-10);
        assert!(loss_phase(&p, &Array2::zeros((6, 6)), &bank).is_err());
    }

    #[test]
    fn single_bin_flip_interior() {
        // interior bin: itself in 9 channels, plus one channel at each of 8 neighbours
        let (f, t) = (7, 7);
        let p = Array2::zeros((f, t));
        let mut q = p.clone();
        q[[3, 3]] = PI;
        let l = loss_phase(&p, &q, &PhaseKernelBank::new()).unwrap();
        assert!((l - 17.0 * PI / (9 * f * t) as f64).abs() < 1e-12);
    }

    #[test]
    fn amplitude_loss() {
        let a = Array2::from_elem((2, 3), 2.0);
        assert_eq!(loss_log_amplitude(&a, &a, 1e-5).unwrap(), 0.0);
        let b = a.mapv(|v| v * std::f64::consts::E);
        assert!((loss_log_amplitude(&a, &b, 1e-5).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ri_loss_of_negation() {
        let s = ComplexSpectrogram::new(
            Array2::from_shape_vec((1, 2), vec![1.0, -3.0]).unwrap(),
            Array2::from_shape_vec((1, 2), vec![2.0, 0.0]).unwrap(),
        )
        .unwrap();
        let neg = ComplexSpectrogram::new(-&s.real, -&s.imag).unwrap();
        // mean |true| over both planes = 6 / 4
        assert_eq!(loss_ri(&s, &s).unwrap(), 0.0);
        assert!((loss_ri(&s, &neg).unwrap() - 2.0 * 1.5).abs() < 1e-12);
    }

    #[test]
    fn hinge_hand_values() {
        let v = |s: f64| DiscriminatorView::new(s, vec![]);
        assert_eq!(hinge_discriminator(&[v(1.0), v(1.0)], &[v(-1.0), v(-1.0)]).unwrap(), 0.0);
        assert_eq!(hinge_discriminator(&[v(0.0)], &[v(0.0)]).unwrap(), 2.0);
        assert_eq!(hinge_discriminator(&[v(2.0), v(-3.0)], &[v(0.5), v(-0.5)]).unwrap(), 3.0);
        assert_eq!(hinge_generator(&[v(1.0), v(1.0)]).unwrap(), 0.0);
        assert_eq!(hinge_generator(&[v(0.0)]).unwrap(), 1.0);
        assert_eq!(hinge_generator(&[v(3.0), v(-1.0)]).unwrap(), 1.0);
    }

    #[test]
    fn feature_match_values() {
        let real = vec![DiscriminatorView::new(0.0, vec![vec![1.0, 2.0], vec![3.0]])];
        let plus_one = vec![DiscriminatorView::new(0.0, vec![vec![2.0, 3.0], vec![4.0]])];
        assert_eq!(feature_match(&real, &real).unwrap(), 0.0);
        assert_eq!(feature_match(&real, &plus_one).unwrap(), 1.0);
        let bad = vec![DiscriminatorView::new(0.0, vec![vec![1.0]])];
        assert!(feature_match(&real, &bad).is_err());
    }

    #[test]
    fn weighted_total() {
        let w = LossWeights::unverified_defaults();
        assert_eq!(total_generator_loss(&LossComponents::default(), &w).unwrap().total, 0.0);
        let c = LossComponents {
            phase: 0.5,
            ..Default::default()
        };
        assert_eq!(total_generator_loss(&c, &w).unwrap().total, 50.0);
        let bad = LossWeights {
            lambda_g: -1.0,
            ..w
        };
        assert!(total_generator_loss(&c, &bad).is_err());
    }
}
