//! Range-null decomposition of magnitude spectra.
//!
//! For a degradation `y = A x`, any `x` splits as
//! `x = A⁺A x + (I - A⁺A) x`. The first term is fixed by the observation
//! (`A⁺ y`); the second is invisible to `A` and is free for a network to fill
//! in without breaking `A x̂ = y`.

use ndarray::{Array2, Zip};

use crate::dsp::{exp_mel, ComplexSpectrogram, MelFilterbank, MelMatrix};
use crate::error::{Error, Result};

/// Relative singular value cutoff used for the mel filterbanks.
pub const DEFAULT_SV_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoInverseReport {
    pub rank: usize,
    /// `max |A A⁺ A - A|`
    pub max_reconstruction_error: f64,
    /// Relative cutoff; singular values below `floor * sigma_max` are dropped.
    pub singular_value_floor: f64,
}

/// Moore–Penrose pseudo-inverse by SVD.
pub fn compute_pinv(a: &Array2<f64>, sv_floor: f64) -> Result<(Array2<f64>, PseudoInverseReport)> {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return Err(Error::RankDeficient("empty matrix".into()));
    }
    if m > n {
        return Err(Error::shape("compute_pinv (rows <= cols)", format!("<= {n} rows"), m));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("pseudo-inverse input"));
    }
    if let Some(i) = a.rows().into_iter().position(|r| r.iter().all(|&v| v == 0.0)) {
        return Err(Error::RankDeficient(format!("row {i} is zero")));
    }

    let mat = nalgebra::DMatrix::from_fn(m, n, |i, j| a[[i, j]]);
    let svd = mat.svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = sv_floor * sigma_max;

    let mut pinv = Array2::<f64>::zeros((n, m));
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        rank += 1;
        let inv = 1.0 / s;
        for i in 0..n {
            let vik = v_t[(k, i)] * inv;
            for j in 0..m {
                pinv[[i, j]] += vik * u[(j, k)];
            }
        }
    }

    let recon = a.dot(&pinv).dot(a);
    let max_reconstruction_error = max_abs_diff(&recon, a);
    Ok((
        pinv,
        PseudoInverseReport {
            rank,
            max_reconstruction_error,
            singular_value_floor: sv_floor,
        },
    ))
}

pub(crate) fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    Zip::from(a)
        .and(b)
        .fold(0.0, |acc, &x, &y| f64::max(acc, (x - y).abs()))
}

pub(crate) fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |acc, v| f64::max(acc, v.abs()))
}

/// Range-space magnitude `A⁺ exp(X_mel)`. May contain negative entries.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeSpectrum {
    pub values: Array2<f64>,
}

pub fn range_project(x_mel: &MelMatrix, fb: &MelFilterbank) -> Result<RangeSpectrum> {
    if x_mel.nrows() != fb.n_mels() {
        return Err(Error::shape("range_project", fb.n_mels(), x_mel.nrows()));
    }
    if x_mel.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("log-mel input"));
    }
    Ok(RangeSpectrum {
        values: fb.a_pinv.dot(&exp_mel(x_mel)),
    })
}

/// `M - A⁺(A M)`, never forming the `F x F` projector.
pub fn null_project(m: &Array2<f64>, fb: &MelFilterbank) -> Result<Array2<f64>> {
    if m.nrows() != fb.n_freqs() {
        return Err(Error::shape("null_project", fb.n_freqs(), m.nrows()));
    }
    let range = fb.a_pinv.dot(&fb.a.dot(m));
    Ok(m - &range)
}

/// Explicit `I - A⁺A`. Only used to cross-check [`null_project`].
pub fn null_projector(fb: &MelFilterbank) -> Array2<f64> {
    let n = fb.n_freqs();
    Array2::eye(n) - fb.a_pinv.dot(&fb.a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeAssembly {
    /// `range + (I - A⁺A) null`, before clamping.
    pub unclamped: Array2<f64>,
    /// `max(unclamped, 0)`
    pub magnitude: Array2<f64>,
}

pub fn assemble_magnitude(
    range_part: &RangeSpectrum,
    null_estimate: &Array2<f64>,
    fb: &MelFilterbank,
) -> Result<MagnitudeAssembly> {
    if range_part.values.dim() != null_estimate.dim() {
        return Err(Error::shape(
            "assemble_magnitude",
            format!("{:?}", range_part.values.dim()),
            format!("{:?}", null_estimate.dim()),
        ));
    }
    let unclamped = &range_part.values + &null_project(null_estimate, fb)?;
    let magnitude = unclamped.mapv(|v| v.max(0.0));
    Ok(MagnitudeAssembly {
        unclamped,
        magnitude,
    })
}

pub fn assemble_spectrum(magnitude: &Array2<f64>, phase: &Array2<f64>) -> Result<ComplexSpectrogram> {
    if magnitude.dim() != phase.dim() {
        return Err(Error::shape(
            "assemble_spectrum",
            format!("{:?}", magnitude.dim()),
            format!("{:?}", phase.dim()),
        ));
    }
    if let Some(((row, col), &value)) = magnitude.indexed_iter().find(|(_, &v)| v < 0.0) {
        return Err(Error::NegativeMagnitude { row, col, value });
    }
    if phase.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("phase"));
    }
    let real = Zip::from(magnitude)
        .and(phase)
        .map_collect(|&m, &p| m * p.cos());
    let imag = Zip::from(magnitude)
        .and(phase)
        .map_collect(|&m, &p| m * p.sin());
    ComplexSpectrogram::new(real, imag)
}

/// `max |A mag - target| / max |target|`
pub fn degradation_error(fb: &MelFilterbank, magnitude: &Array2<f64>, target: &Array2<f64>) -> f64 {
    max_abs_diff(&fb.a.dot(magnitude), target) / max_abs(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{build_mel_filterbank, MelConfig};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn identity_pinv() {
        let (p, r) = compute_pinv(&Array2::eye(3), DEFAULT_SV_FLOOR).unwrap();
        assert!(max_abs_diff(&p, &Array2::eye(3)) < 1e-12);
        assert_eq!(r.rank, 3);
    }

    #[test]
    fn diagonal_pinv() {
        let a = array![[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]];
        let (p, _) = compute_pinv(&a, DEFAULT_SV_FLOOR).unwrap();
        let expect = array![[1.0, 0.0], [0.0, 0.5], [0.0, 0.0]];
        assert!(max_abs_diff(&p, &expect) < 1e-12);
    }

    #[test]
    fn zero_row_is_rank_deficient() {
        let a = array![[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        assert!(matches!(
            compute_pinv(&a, DEFAULT_SV_FLOOR),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn duplicate_rows_report_reduced_rank() {
        let a = array![[1.0, 2.0, 0.0], [1.0, 2.0, 0.0]];
        let (p, r) = compute_pinv(&a, DEFAULT_SV_FLOOR).unwrap();
        assert_eq!(r.rank, 1);
        assert!(max_abs_diff(&a.dot(&p).dot(&a), &a) < 1e-12);
    }

    #[test]
    fn range_vectors_are_annihilated() {
        let fb = build_mel_filterbank(&MelConfig::ljspeech()).unwrap();
        let m = fb.a_pinv.dot(&random(80, 4, 1));
        assert!(max_abs(&null_project(&m, &fb).unwrap()) < 1e-5);
        assert!(max_abs(&null_project(&Array2::zeros((513, 2)), &fb).unwrap()) == 0.0);
    }

    #[test]
    fn null_projection_is_idempotent_and_invisible() {
        let fb = build_mel_filterbank(&MelConfig::ljspeech()).unwrap();
        let m = random(513, 5, 2);
        let p1 = null_project(&m, &fb).unwrap();
        let p2 = null_project(&p1, &fb).unwrap();
        assert!(max_abs_diff(&p1, &p2) < 1e-5);
        assert!(max_abs(&fb.a.dot(&p1)) < 1e-5);
    }

    #[test]
    fn factored_and_explicit_projector_agree() {
        let fb = build_mel_filterbank(&MelConfig::libritts()).unwrap();
        let m = random(513, 3, 3);
        let explicit = null_projector(&fb).dot(&m);
        assert!(max_abs_diff(&explicit, &null_project(&m, &fb).unwrap()) < 1e-6);
    }

    #[test]
    fn floor_constant_mel_gives_rank_one_pattern() {
        let fb = build_mel_filterbank(&MelConfig::ljspeech()).unwrap();
        let floor: f64 = 1e-5;
        let x = Array2::from_elem((80, 3), floor.ln());
        let r = range_project(&x, &fb).unwrap();
        let col = fb.a_pinv.dot(&ndarray::Array1::from_elem(80, floor));
        for t in 0..3 {
            for f in 0..513 {
                assert!((r.values[[f, t]] - col[f]).abs() < 1e-15);
            }
        }
        assert!(range_project(&Array2::zeros((79, 3)), &fb).is_err());
    }

    #[test]
    fn assembly_with_zero_null_is_clamped_range() {
        let fb = build_mel_filterbank(&MelConfig::ljspeech()).unwrap();
        let x = random(80, 4, 4);
        let range = range_project(&x, &fb).unwrap();
        let out = assemble_magnitude(&range, &Array2::zeros((513, 4)), &fb).unwrap();
        assert_eq!(out.magnitude, range.values.mapv(|v| v.max(0.0)));
        assert!(degradation_error(&fb, &out.unclamped, &exp_mel(&x)) < 1e-4);
    }

    #[test]
    fn polar_assembly() {
        let s = assemble_spectrum(&array![[1.0, 2.0]], &array![[0.0, std::f64::consts::FRAC_PI_2]])
            .unwrap();
        assert_eq!((s.real[[0, 0]], s.imag[[0, 0]]), (1.0, 0.0));
        assert!(s.real[[0, 1]].abs() < 1e-12 && (s.imag[[0, 1]] - 2.0).abs() < 1e-12);
        assert!(matches!(
            assemble_spectrum(&array![[-1.0]], &array![[0.0]]),
            Err(Error::NegativeMagnitude { .. })
        ));
    }
}
