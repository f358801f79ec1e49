//! Helpers shared by the integration tests: scalar loop references for the
//! generator modules, a tiny configuration, synthetic clips and spectral
//! distance.

#![allow(dead_code)]

use std::f64::consts::PI;

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rndvoc::dsp::{stft, AudioBuffer, StftConfig};
use rndvoc::generator::{GeneratorConfig, RegionLayout};
use rndvoc::WeightBundle;

/// 3 sub-bands, 4 channels. Region 2 needs 2 pad bins.
pub fn tiny_config(decoder_time_kernel: usize) -> GeneratorConfig {
    let mut cfg = GeneratorConfig::ultralite();
    cfg.n_freqs = 11;
    cfg.n_mels = 4;
    cfg.channels = 4;
    cfg.squeezed_channels = 1;
    cfg.blocks = 1;
    cfg.convnext_per_block = 2;
    cfg.layout = RegionLayout {
        boundaries: vec![0, 2, 5, 11],
        freq_strides: vec![2, 3, 8],
        freq_kernels: vec![2, 3, 8],
    };
    cfg.decoder_time_kernel = decoder_time_kernel;
    cfg.validate().expect("tiny config is valid");
    cfg
}

/// Random bundle with every tensor, including norms, perturbed so that no
/// branch is trivially an identity.
pub fn random_bundle(cfg: &GeneratorConfig, seed: u64) -> WeightBundle {
    let mut b = rndvoc::model_io::init_random(cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for (_, t) in b.iter_mut() {
        for v in t.data.iter_mut() {
            *v += rng.gen_range(-0.3f32..0.3);
        }
    }
    b
}

fn w(b: &WeightBundle, name: &str) -> Vec<f64> {
    b.get(name).unwrap().data.iter().map(|&v| v as f64).collect()
}

fn erf_gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / 2f64.sqrt()))
}

fn sigmoid_linear(x: f64) -> f64 {
    x * (1.0 / (1.0 + (-x).exp()))
}

/// Layer norm over channels of a `[n][c][t]` nest.
fn ln(x: &mut [Vec<Vec<f64>>], g: &[f64], b: &[f64], eps: f64) {
    for band in x.iter_mut() {
        let c = band.len();
        let t = band[0].len();
        for ti in 0..t {
            let mut mean = 0.0;
            for ci in 0..c {
                mean += band[ci][ti];
            }
            mean /= c as f64;
            let mut var = 0.0;
            for ci in 0..c {
                var += (band[ci][ti] - mean) * (band[ci][ti] - mean);
            }
            var /= c as f64;
            for ci in 0..c {
                band[ci][ti] = (band[ci][ti] - mean) / (var + eps).sqrt() * g[ci] + b[ci];
            }
        }
    }
}

pub fn to_nest(a: &Array3<f64>) -> Vec<Vec<Vec<f64>>> {
    let (n, c, t) = a.dim();
    (0..n)
        .map(|i| (0..c).map(|j| (0..t).map(|k| a[[i, j, k]]).collect()).collect())
        .collect()
}

pub fn nest_max_diff(a: &[Vec<Vec<f64>>], b: &Array3<f64>) -> f64 {
    let mut m = 0.0f64;
    for (i, band) in a.iter().enumerate() {
        for (j, row) in band.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                m = m.max((v - b[[i, j, k]]).abs());
            }
        }
    }
    m
}

pub fn hsem_oracle(x: &Array2<f64>, cfg: &GeneratorConfig, b: &WeightBundle) -> Vec<Vec<Vec<f64>>> {
    let c = cfg.channels;
    let kt = cfg.hsem_time_kernel;
    let t = x.ncols();
    let mut out = Vec::new();
    for i in 0..cfg.layout.freq_strides.len() {
        let s = cfg.layout.freq_strides[i];
        let (lo, hi) = (cfg.layout.boundaries[i], cfg.layout.boundaries[i + 1]);
        let wt = w(b, &format!("hsem.region{i}.conv.weight"));
        let bias = w(b, &format!("hsem.region{i}.conv.bias"));
        let n_i = (hi - lo).div_ceil(s);
        let mut region = vec![vec![vec![0.0; t]; c]; n_i];
        for n in 0..n_i {
            for co in 0..c {
                for ti in 0..t {
                    let mut acc = bias[co];
                    for k in 0..s {
                        for d in 0..kt {
                            let bin = lo + n * s + k;
                            let src = ti as isize + d as isize - (kt / 2) as isize;
                            if bin < hi && src >= 0 && (src as usize) < t {
                                acc += wt[(co * s + k) * kt + d] * x[[bin, src as usize]];
                            }
                        }
                    }
                    region[n][co][ti] = acc;
                }
            }
        }
        ln(
            &mut region,
            &w(b, &format!("hsem.region{i}.norm.weight")),
            &w(b, &format!("hsem.region{i}.norm.bias")),
            cfg.norm_eps,
        );
        out.extend(region);
    }
    out
}

fn cbm_stage(x: &[Vec<Vec<f64>>], cfg: &GeneratorConfig, b: &WeightBundle, p: &str, st: usize) -> Vec<Vec<Vec<f64>>> {
    let (n, c, t) = (x.len(), x[0].len(), x[0][0].len());
    let k = cfg.cbm_band_kernel;
    let cg = c / cfg.cbm_groups;
    let mut z = x.to_vec();
    ln(&mut z, &w(b, &format!("{p}.norm{st}.weight")), &w(b, &format!("{p}.norm{st}.bias")), cfg.norm_eps);
    let wt = w(b, &format!("{p}.gconv{st}.weight"));
    let bias = w(b, &format!("{p}.gconv{st}.bias"));
    let slope = w(b, &format!("{p}.prelu{st}.weight"));
    let mut out = x.to_vec();
    for ni in 0..n {
        for co in 0..c {
            let g0 = (co / cg) * cg;
            for ti in 0..t {
                let mut acc = bias[co];
                for kk in 0..k {
                    let src = ni as isize + kk as isize - (k / 2) as isize;
                    if src < 0 || src >= n as isize {
                        continue;
                    }
                    for cj in 0..cg {
                        acc += wt[(co * cg + cj) * k + kk] * z[src as usize][g0 + cj][ti];
                    }
                }
                let act = if acc >= 0.0 { acc } else { slope[co] * acc };
                out[ni][co][ti] += act;
            }
        }
    }
    out
}

pub fn cbm_oracle(x: &[Vec<Vec<f64>>], cfg: &GeneratorConfig, b: &WeightBundle, block: usize) -> Vec<Vec<Vec<f64>>> {
    let p = format!("dpb{block}.cbm");
    let x1 = cbm_stage(x, cfg, b, &p, 1);
    let (n, c, t) = (x1.len(), x1[0].len(), x1[0][0].len());
    let cs = cfg.squeezed_channels;
    let mut y = x1.clone();
    ln(&mut y, &w(b, &format!("{p}.norm2.weight")), &w(b, &format!("{p}.norm2.bias")), cfg.norm_eps);
    let sq = w(b, &format!("{p}.squeeze.weight"));
    let sqb = w(b, &format!("{p}.squeeze.bias"));
    let mix = w(b, &format!("{p}.mixer.weight"));
    let rs = w(b, &format!("{p}.restore.weight"));
    let rsb = w(b, &format!("{p}.restore.bias"));
    let mut squeezed = vec![vec![vec![0.0; t]; cs]; n];
    for ni in 0..n {
        for o in 0..cs {
            for ti in 0..t {
                let mut acc = sqb[o];
                for ci in 0..c {
                    acc += sq[o * c + ci] * y[ni][ci][ti];
                }
                squeezed[ni][o][ti] = sigmoid_linear(acc);
            }
        }
    }
    let mut mixed = vec![vec![vec![0.0; t]; cs]; n];
    for ni in 0..n {
        for o in 0..cs {
            for ti in 0..t {
                for nj in 0..n {
                    mixed[ni][o][ti] += mix[ni * n + nj] * squeezed[nj][o][ti];
                }
            }
        }
    }
    let mut x2 = x1.clone();
    for ni in 0..n {
        for co in 0..c {
            for ti in 0..t {
                let mut acc = rsb[co];
                for o in 0..cs {
                    acc += rs[co * cs + o] * mixed[ni][o][ti];
                }
                x2[ni][co][ti] += sigmoid_linear(acc);
            }
        }
    }
    cbm_stage(&x2, cfg, b, &p, 3)
}

pub fn nbm_oracle(x: &[Vec<Vec<f64>>], cfg: &GeneratorConfig, b: &WeightBundle, block: usize) -> Vec<Vec<Vec<f64>>> {
    let (n, c, t) = (x.len(), x[0].len(), x[0][0].len());
    let k = cfg.nbm_time_kernel;
    let mut h = x.to_vec();
    for q in 0..cfg.convnext_per_block {
        let p = format!("dpb{block}.nbm.block{q}");
        let dw = w(b, &format!("{p}.dwconv.weight"));
        let dwb = w(b, &format!("{p}.dwconv.bias"));
        let mut y = vec![vec![vec![0.0; t]; c]; n];
        for ni in 0..n {
            for ci in 0..c {
                for ti in 0..t {
                    let mut acc = dwb[ci];
                    for kk in 0..k {
                        let src = ti as isize + kk as isize - (k / 2) as isize;
                        if src >= 0 && (src as usize) < t {
                            acc += dw[ci * k + kk] * h[ni][ci][src as usize];
                        }
                    }
                    y[ni][ci][ti] = acc;
                }
            }
        }
        ln(&mut y, &w(b, &format!("{p}.norm.weight")), &w(b, &format!("{p}.norm.bias")), cfg.norm_eps);
        let p1 = w(b, &format!("{p}.pwconv1.weight"));
        let p1b = w(b, &format!("{p}.pwconv1.bias"));
        let p2 = w(b, &format!("{p}.pwconv2.weight"));
        let p2b = w(b, &format!("{p}.pwconv2.bias"));
        let gg = w(b, &format!("{p}.grn.gamma"));
        let gb = w(b, &format!("{p}.grn.beta"));
        for ni in 0..n {
            let mut hid = vec![vec![0.0; t]; c];
            for o in 0..c {
                for ti in 0..t {
                    let mut acc = p1b[o];
                    for ci in 0..c {
                        acc += p1[o * c + ci] * y[ni][ci][ti];
                    }
                    hid[o][ti] = erf_gelu(acc);
                }
            }
            let gx: Vec<f64> = (0..c).map(|o| hid[o].iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
            let mean = gx.iter().sum::<f64>() / c as f64;
            for o in 0..c {
                for ti in 0..t {
                    let v = hid[o][ti];
                    hid[o][ti] = gg[o] * (v * (gx[o] / (mean + 1e-6))) + gb[o] + v;
                }
            }
            for o in 0..c {
                for ti in 0..t {
                    let mut acc = p2b[o];
                    for ci in 0..c {
                        acc += p2[o * c + ci] * hid[ci][ti];
                    }
                    h[ni][o][ti] += acc;
                }
            }
        }
    }
    h
}

/// `out_ch` maps of `F x T` from a decoder with the given prefix.
pub fn decoder_oracle(x: &[Vec<Vec<f64>>], cfg: &GeneratorConfig, b: &WeightBundle, prefix: &str, out_ch: usize) -> Vec<Array2<f64>> {
    let (c, t) = (x[0].len(), x[0][0].len());
    let kt = cfg.decoder_time_kernel;
    let mut maps = vec![Array2::zeros((cfg.n_freqs, t)); out_ch];
    let mut band0 = 0;
    for i in 0..cfg.layout.freq_strides.len() {
        let s = cfg.layout.freq_strides[i];
        let (lo, hi) = (cfg.layout.boundaries[i], cfg.layout.boundaries[i + 1]);
        let n_i = (hi - lo).div_ceil(s);
        let p = format!("{prefix}.region{i}");
        let pw = w(b, &format!("{p}.pw.weight"));
        let pwb = w(b, &format!("{p}.pw.bias"));
        let tw = w(b, &format!("{p}.trconv.weight"));
        let tb = w(b, &format!("{p}.trconv.bias"));
        let mut h = vec![vec![vec![0.0; t]; c]; n_i];
        for n in 0..n_i {
            for o in 0..c {
                for ti in 0..t {
                    let mut acc = pwb[o];
                    for ci in 0..c {
                        acc += pw[o * c + ci] * x[band0 + n][ci][ti];
                    }
                    h[n][o][ti] = acc;
                }
            }
        }
        ln(&mut h, &w(b, &format!("{p}.norm.weight")), &w(b, &format!("{p}.norm.bias")), cfg.norm_eps);
        for band in h.iter_mut() {
            for row in band.iter_mut() {
                for v in row.iter_mut() {
                    *v = erf_gelu(*v);
                }
            }
        }
        // scatter form of a transposed conv: input frame tau feeds outputs
        // tau - half + d
        for n in 0..n_i {
            for oc in 0..out_ch {
                for k in 0..s {
                    let f = lo + n * s + k;
                    if f >= hi {
                        continue;
                    }
                    for ti in 0..t {
                        maps[oc][[f, ti]] = tb[oc];
                    }
                    for ci in 0..c {
                        for d in 0..kt {
                            for tau in 0..t {
                                let o = tau as isize - (kt / 2) as isize + d as isize;
                                if o >= 0 && (o as usize) < t {
                                    maps[oc][[f, o as usize]] += tw[((ci * out_ch + oc) * s + k) * kt + d] * h[n][ci][tau];
                                }
                            }
                        }
                    }
                }
            }
        }
        band0 += n_i;
    }
    maps
}

/// Periodic-in-time test clip: a few harmonics with vibrato, an amplitude
/// envelope and a little noise.
pub fn synth_clip(seed: u64, seconds: f64, sr: u32) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (seconds * sr as f64) as usize;
    let f0 = rng.gen_range(90.0..320.0);
    let vib = rng.gen_range(2.0..7.0);
    let harmonics: Vec<(f64, f64)> = (1..=8).map(|h| (h as f64, rng.gen_range(0.2..1.0) / h as f64)).collect();
    let mut phase = 0.0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let tt = i as f64 / sr as f64;
        let f = f0 * (1.0 + 0.02 * (2.0 * PI * vib * tt).sin());
        phase += 2.0 * PI * f / sr as f64;
        let env = 0.6 + 0.4 * (2.0 * PI * 1.3 * tt).sin();
        let mut v = 0.0;
        for &(h, a) in &harmonics {
            if f * h < sr as f64 / 2.0 {
                v += a * (h * phase).sin();
            }
        }
        out.push(0.3 * env * v + 0.01 * rng.gen_range(-1.0..1.0));
    }
    AudioBuffer::new(out, sr).unwrap()
}

/// Log-spectral distance in dB, averaged over frames.
pub fn log_spectral_distance(a: &AudioBuffer, b: &AudioBuffer, cfg: &StftConfig) -> f64 {
    let pa = stft(a, cfg).unwrap().magnitude();
    let pb = stft(b, cfg).unwrap().magnitude();
    let (f, t) = pa.dim();
    let mut total = 0.0;
    for ti in 0..t {
        let mut acc = 0.0;
        for fi in 0..f {
            let x = 10.0 * ((pa[[fi, ti]].powi(2) + 1e-12) / (pb[[fi, ti]].powi(2) + 1e-12)).log10();
            acc += x * x;
        }
        total += (acc / f as f64).sqrt();
    }
    total / t as f64
}
