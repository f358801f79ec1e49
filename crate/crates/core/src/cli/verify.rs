//! Invariant suite behind `rndvoc verify`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::{build_mel_filterbank, exp_mel, istft, stft, AudioBuffer};
use crate::error::Result;
use crate::generator::{count_params, generator_forward};
use crate::losses::{loss_phase, omni_phase_diff, PhaseKernelBank};
use crate::model_io::{init_random, init_zeros, ConfigFile};
use crate::rnd::{degradation_error, null_project};
use crate::weights::WeightBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    /// value must be `<= limit`
    Max,
    /// value must be `>= limit`
    Min,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub bound: Bound,
}

impl Check {
    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::Max => self.value <= self.limit,
            Bound::Min => self.value >= self.limit,
        }
    }

    /// How far inside the limit the value sits, as a ratio (>= 1 passes).
    /// Exact-zero checks report `inf` when met.
    pub fn margin(&self) -> f64 {
        match self.bound {
            Bound::Max if self.value == 0.0 => f64::INFINITY,
            Bound::Max => self.limit / self.value,
            Bound::Min if self.limit == 0.0 => {
                if self.value >= 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Bound::Min => self.value / self.limit,
        }
    }

    pub fn report_line(&self) -> String {
        format!(
            "check={} value={:.6e} limit={:.6e} bound={} margin={:.3e} status={}",
            self.name,
            self.value,
            self.limit,
            match self.bound {
                Bound::Max => "max",
                Bound::Min => "min",
            },
            self.margin(),
            if self.passed() { "pass" } else { "fail" }
        )
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Multiplies every upper-bound tolerance; `< 1` tightens.
    pub tolerance_scale: f64,
    /// Mel length used for the forward-pass checks.
    pub seconds: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            tolerance_scale: 1.0,
            seconds: 1.0,
        }
    }
}

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
}

/// Runs every invariant check for a configuration. `weights` defaults to a
/// seeded random bundle.
pub fn run_checks(cfg: &ConfigFile, weights: Option<&WeightBundle>, opts: &VerifyOptions) -> Result<Vec<Check>> {
    cfg.validate()?;
    let scale = opts.tolerance_scale;
    let stft_cfg = cfg.stft();
    let mel_cfg = cfg.mel();
    let gen = cfg.generator();
    let fb = build_mel_filterbank(&mel_cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut checks = Vec::new();
    let max = |name, value, limit: f64| Check {
        name,
        value,
        limit: limit * scale,
        bound: Bound::Max,
    };

    checks.push(max("stft_cola_deviation", stft_cfg.cola_deviation(), 1e-10));

    let len = cfg.sample_rate as usize;
    let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let audio = AudioBuffer::new(x.clone(), cfg.sample_rate)?;
    let y = istft(&stft(&audio, &stft_cfg)?, &stft_cfg, len, cfg.sample_rate)?;
    let err: f64 = x.iter().zip(&y.samples).map(|(a, b)| (a - b).powi(2)).sum();
    let sig: f64 = x.iter().map(|a| a * a).sum();
    checks.push(Check {
        name: "stft_roundtrip_snr_db",
        value: 10.0 * (sig / err.max(f64::MIN_POSITIVE)).log10(),
        limit: 60.0,
        bound: Bound::Min,
    });

    let a = &fb.a;
    let p = &fb.a_pinv;
    let ap = a.dot(p);
    let pa = p.dot(a);
    let penrose = [
        max_abs(&(&ap.dot(a) - a)),
        max_abs(&(&pa.dot(p) - p)),
        max_abs(&(&ap - &ap.t())),
        max_abs(&(&pa - &pa.t())),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    checks.push(max("pinv_penrose_max_error", penrose, 1e-5));

    let f = fb.n_freqs();
    let u = Array2::from_shape_fn((f, 8), |_| rng.gen_range(-1.0..1.0));
    let v = Array2::from_shape_fn((f, 8), |_| rng.gen_range(-1.0..1.0));
    let range_u = p.dot(&a.dot(&u));
    let null_u = null_project(&u, &fb)?;
    let null_v = null_project(&v, &fb)?;
    let mut exact = 0.0f64;
    let mut ortho = 0.0f64;
    for k in 0..u.ncols() {
        let uk = u.column(k);
        let resid: Array1<f64> = &uk - &(&range_u.column(k) + &null_u.column(k));
        exact = exact.max(resid.dot(&resid).sqrt() / uk.dot(&uk).sqrt());
        let vk = v.column(k);
        ortho = ortho.max(range_u.column(k).dot(&null_v.column(k)).abs() / (uk.dot(&uk) * vk.dot(&vk)).sqrt());
    }
    checks.push(max("rnd_exactness", exact, 1e-6));
    checks.push(max("rnd_orthogonality", ortho, 1e-6));
    let twice = null_project(&null_u, &fb)?;
    checks.push(max("null_idempotence", max_abs(&(&twice - &null_u)), 1e-5));

    let owned;
    let w = match weights {
        Some(w) => w,
        None => {
            owned = init_random(&gen, opts.seed)?;
            &owned
        }
    };
    let frames = ((opts.seconds * cfg.sample_rate as f64) / cfg.hop as f64).ceil().max(3.0) as usize;
    let mel = Array2::from_shape_fn((gen.n_mels, frames), |_| rng.gen_range(-8.0..2.0));
    let out = generator_forward(&mel, &fb, &gen, w, &stft_cfg, cfg.sample_rate)?;
    checks.push(max(
        "degradation_consistency",
        degradation_error(&fb, &out.unclamped, &exp_mel(&mel)),
        1e-4,
    ));
    checks.push(Check {
        name: "hmdm_min_output",
        value: out.null_estimate.iter().cloned().fold(f64::INFINITY, f64::min),
        limit: f64::MIN_POSITIVE,
        bound: Bound::Min,
    });
    let phase_violation = out
        .phase
        .iter()
        .map(|&ph| if ph > -PI && ph <= PI { 0.0 } else { 1.0 })
        .sum::<f64>();
    checks.push(max("hpdm_phase_range_violations", phase_violation, 0.0));
    let again = generator_forward(&mel, &fb, &gen, w, &stft_cfg, cfg.sample_rate)?;
    let same = out.magnitude == again.magnitude && out.audio == again.audio;
    checks.push(max("forward_determinism_mismatch", if same { 0.0 } else { 1.0 }, 0.0));

    let zero = init_zeros(&gen);
    let z = generator_forward(&mel, &fb, &gen, &zero, &stft_cfg, cfg.sample_rate)?;
    let range = p.dot(&exp_mel(&mel));
    let ones_null = null_project(&Array2::ones((f, frames)), &fb)?;
    let expect = (&range + &ones_null).mapv(|v| v.max(0.0));
    let zero_err = max_abs(&(&z.magnitude - &expect)).max(max_abs(&z.phase));
    checks.push(max("zero_weight_closed_form", zero_err, 1e-9));

    let bank = PhaseKernelBank::new();
    let phase = Array2::from_shape_fn((32, 24), |_| rng.gen_range(-PI..PI));
    let diff = omni_phase_diff(&phase, &bank);
    let mut oracle_err = 0.0f64;
    for j in 0..9 {
        let (df, dt) = PhaseKernelBank::offset(j);
        let ch = diff.index_axis(Axis(0), j);
        for fi in 1..31 {
            for ti in 1..23 {
                let expect = if (df, dt) == (0, 0) {
                    phase[[fi, ti]]
                } else {
                    phase[[fi, ti]] - phase[[(fi as isize + df) as usize, (ti as isize + dt) as usize]]
                };
                oracle_err = oracle_err.max((ch[[fi, ti]] - expect).abs());
            }
        }
    }
    checks.push(max("phase_kernel_oracle", oracle_err, 0.0));
    let base = loss_phase(&phase, &phase.mapv(|v| v * 0.5), &bank)?;
    let mut wrap = 0.0f64;
    for k in -3..=3 {
        let shifted = phase.mapv(|v| v + 2.0 * PI * k as f64);
        wrap = wrap.max((loss_phase(&shifted, &phase.mapv(|v| v * 0.5), &bank)? - base).abs());
    }
    checks.push(max("phase_wrap_invariance", wrap, 1e-10));

    let scalars = w.num_scalars() as f64;
    checks.push(max(
        "manifest_param_count_mismatch",
        (scalars - count_params(&gen) as f64).abs(),
        0.0,
    ));
    Ok(checks)
}
