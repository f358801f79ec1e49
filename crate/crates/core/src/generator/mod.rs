//! Null-space generator: band-split encoder, dual-path blocks and the
//! magnitude/phase decoders, wired into the range-null reconstruction.

pub mod accounting;
pub mod config;
pub mod layers;
pub mod manifest;

use ndarray::{s, Array2, Array3, Axis};

use crate::dsp::{istft, AudioBuffer, MelFilterbank, MelMatrix, StftConfig};
use crate::dsp::stft::wrapped_atan2;
use crate::error::{Error, Result, StageExt};
use crate::rnd::{assemble_magnitude, assemble_spectrum, range_project};
use crate::weights::WeightBundle;

pub use accounting::{count_macs, frames_for, mac_breakdown, MacBreakdown};
pub use config::{GeneratorConfig, RegionLayout};
pub use manifest::{count_params, manifest, Init, ParamSpec, MANIFEST_VERSION};

use layers::{
    band_conv, band_mix, channel_norm, depthwise_time_conv, gelu, global_response_norm,
    pointwise, silu,
};

/// `[sub-band, channel, time]` features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub data: Array3<f64>,
}

impl FeatureTensor {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature tensor"));
        }
        Ok(Self { data })
    }

    pub fn dim(&self) -> (usize, usize, usize) {
        self.data.dim()
    }
}

/// Checks that `bundle` holds exactly the tensors `cfg` requires.
pub fn validate_bundle(cfg: &GeneratorConfig, bundle: &WeightBundle) -> Result<()> {
    let specs = manifest(cfg);
    for spec in &specs {
        let t = bundle.get(&spec.name)?;
        if t.shape != spec.shape {
            return Err(Error::TensorShape {
                name: spec.name.clone(),
                expected: spec.shape.clone(),
                got: t.shape.clone(),
            });
        }
    }
    if bundle.len() != specs.len() {
        let known: std::collections::HashSet<&str> =
            specs.iter().map(|s| s.name.as_str()).collect();
        if let Some((name, _)) = bundle.iter().find(|(n, _)| !known.contains(n.as_str())) {
            return Err(Error::UnexpectedTensor(name.clone()));
        }
    }
    Ok(())
}

fn vector(w: &WeightBundle, name: &str, len: usize) -> Result<Vec<f64>> {
    w.values(name, &[len])
}

fn matrix(w: &WeightBundle, name: &str, shape: &[usize], rows: usize, cols: usize) -> Result<Array2<f64>> {
    Ok(Array2::from_shape_vec((rows, cols), w.values(name, shape)?).expect("shape checked"))
}

fn check_features(x: &FeatureTensor, cfg: &GeneratorConfig) -> Result<()> {
    let (n, c, _) = x.dim();
    if n != cfg.n_subbands() || c != cfg.channels {
        return Err(Error::shape(
            "feature tensor",
            format!("[{}, {}, T]", cfg.n_subbands(), cfg.channels),
            format!("[{n}, {c}, T]"),
        ));
    }
    Ok(())
}

/// Band-split encoder: per region, zero-pad to a stride multiple, fold each
/// stride-wide patch into one sub-band token with `C` channels, then
/// layer-normalize over channels.
pub fn hsem_encode(range_mag: &Array2<f64>, cfg: &GeneratorConfig, w: &WeightBundle) -> Result<FeatureTensor> {
    let (f, t) = range_mag.dim();
    if f != cfg.n_freqs {
        return Err(Error::shape("hsem_encode rows", cfg.n_freqs, f));
    }
    let c = cfg.channels;
    let kt = cfg.hsem_time_kernel;
    let half = kt / 2;
    let layout = &cfg.layout;
    let counts = layout.subband_counts();
    let mut out = Array3::zeros((cfg.n_subbands(), c, t));

    let mut sb = 0;
    for (i, (&s, &n_i)) in layout.freq_strides.iter().zip(&counts).enumerate() {
        let p = format!("hsem.region{i}");
        let wm = matrix(w, &format!("{p}.conv.weight"), &[c, 1, s, kt], c, s * kt)?;
        let bias = vector(w, &format!("{p}.conv.bias"), c)?;
        let (lo, hi) = (layout.boundaries[i], layout.boundaries[i + 1]);
        let mut region = Array3::zeros((n_i, c, t));
        for n in 0..n_i {
            let mut patch = Array2::zeros((s * kt, t));
            for k in 0..s {
                let bin = lo + n * s + k;
                if bin >= hi {
                    break;
                }
                for d in 0..kt {
                    for ti in 0..t {
                        let src = ti as isize + d as isize - half as isize;
                        if src >= 0 && (src as usize) < t {
                            patch[[k * kt + d, ti]] = range_mag[[bin, src as usize]];
                        }
                    }
                }
            }
            let mut y = wm.dot(&patch);
            for (mut row, &b) in y.rows_mut().into_iter().zip(&bias) {
                row += b;
            }
            region.index_axis_mut(Axis(0), n).assign(&y);
        }
        let gamma = vector(w, &format!("{p}.norm.weight"), c)?;
        let beta = vector(w, &format!("{p}.norm.bias"), c)?;
        let normed = channel_norm(&region, &gamma, &beta, cfg.norm_eps);
        out.slice_mut(s![sb..sb + n_i, .., ..]).assign(&normed);
        sb += n_i;
    }
    FeatureTensor::new(out)
}

fn cbm_local_stage(x: &Array3<f64>, cfg: &GeneratorConfig, w: &WeightBundle, p: &str, stage: usize) -> Result<Array3<f64>> {
    let c = cfg.channels;
    let g = cfg.cbm_groups;
    let k = cfg.cbm_band_kernel;
    let gamma = vector(w, &format!("{p}.norm{stage}.weight"), c)?;
    let beta = vector(w, &format!("{p}.norm{stage}.bias"), c)?;
    let kernel = Array3::from_shape_vec(
        (c, c / g, k),
        w.values(&format!("{p}.gconv{stage}.weight"), &[c, c / g, k])?,
    )
    .expect("shape checked");
    let bias = vector(w, &format!("{p}.gconv{stage}.bias"), c)?;
    let slope = vector(w, &format!("{p}.prelu{stage}.weight"), c)?;

    let mut z = band_conv(&channel_norm(x, &gamma, &beta, cfg.norm_eps), &kernel, &bias, g);
    for mut plane in z.axis_iter_mut(Axis(0)) {
        for (mut row, &a) in plane.rows_mut().into_iter().zip(&slope) {
            row.mapv_inplace(|v| if v >= 0.0 { v } else { a * v });
        }
    }
    Ok(x + &z)
}

/// Cross-band module: local sub-band conv, global band mixing through a
/// squeezed channel space, local sub-band conv; each stage residual.
pub fn cbm_forward(x: &FeatureTensor, cfg: &GeneratorConfig, w: &WeightBundle, block_idx: usize) -> Result<FeatureTensor> {
    check_features(x, cfg)?;
    let p = format!("dpb{block_idx}.cbm");
    let c = cfg.channels;
    let cs = cfg.squeezed_channels;
    let n = cfg.n_subbands();

    let x1 = cbm_local_stage(&x.data, cfg, w, &p, 1)?;

    let mixer_name = format!("{p}.mixer.weight");
    let mixer_shape = w.get(&mixer_name)?.shape.clone();
    if mixer_shape.len() != 2 || mixer_shape[0] != n || mixer_shape[1] != n {
        return Err(Error::TensorShape {
            name: mixer_name,
            expected: vec![n, n],
            got: mixer_shape,
        });
    }
    let mixer = matrix(w, &mixer_name, &[n, n], n, n)?;
    let gamma = vector(w, &format!("{p}.norm2.weight"), c)?;
    let beta = vector(w, &format!("{p}.norm2.bias"), c)?;
    let squeeze = matrix(w, &format!("{p}.squeeze.weight"), &[cs, c, 1], cs, c)?;
    let squeeze_b = vector(w, &format!("{p}.squeeze.bias"), cs)?;
    let restore = matrix(w, &format!("{p}.restore.weight"), &[c, cs, 1], c, cs)?;
    let restore_b = vector(w, &format!("{p}.restore.bias"), c)?;

    let y = channel_norm(&x1, &gamma, &beta, cfg.norm_eps);
    let y = pointwise(&y, squeeze.view(), Some(&squeeze_b)).mapv(silu);
    let y = band_mix(&y, &mixer);
    let y = pointwise(&y, restore.view(), Some(&restore_b)).mapv(silu);
    let x2 = &x1 + &y;

    let x3 = cbm_local_stage(&x2, cfg, w, &p, 3)?;
    FeatureTensor::new(x3)
}

/// Narrow-band module: ConvNeXt-v2 style blocks along time, shared by all
/// sub-bands, hidden width kept at `C`.
pub fn nbm_forward(x: &FeatureTensor, cfg: &GeneratorConfig, w: &WeightBundle, block_idx: usize) -> Result<FeatureTensor> {
    check_features(x, cfg)?;
    let c = cfg.channels;
    let k = cfg.nbm_time_kernel;
    let mut h = x.data.clone();
    for q in 0..cfg.convnext_per_block {
        let p = format!("dpb{block_idx}.nbm.block{q}");
        let dw = matrix(w, &format!("{p}.dwconv.weight"), &[c, 1, k], c, k)?;
        let dw_b = vector(w, &format!("{p}.dwconv.bias"), c)?;
        let gamma = vector(w, &format!("{p}.norm.weight"), c)?;
        let beta = vector(w, &format!("{p}.norm.bias"), c)?;
        let pw1 = matrix(w, &format!("{p}.pwconv1.weight"), &[c, c], c, c)?;
        let pw1_b = vector(w, &format!("{p}.pwconv1.bias"), c)?;
        let grn_g = vector(w, &format!("{p}.grn.gamma"), c)?;
        let grn_b = vector(w, &format!("{p}.grn.beta"), c)?;
        let pw2 = matrix(w, &format!("{p}.pwconv2.weight"), &[c, c], c, c)?;
        let pw2_b = vector(w, &format!("{p}.pwconv2.bias"), c)?;

        let y = depthwise_time_conv(&h, &dw, &dw_b);
        let y = channel_norm(&y, &gamma, &beta, cfg.norm_eps);
        let y = pointwise(&y, pw1.view(), Some(&pw1_b)).mapv(gelu);
        let y = global_response_norm(&y, &grn_g, &grn_b);
        let y = pointwise(&y, pw2.view(), Some(&pw2_b));
        h += &y;
    }
    FeatureTensor::new(h)
}

/// One dual-path block: cross-band then narrow-band.
pub fn dpb_forward(x: &FeatureTensor, cfg: &GeneratorConfig, w: &WeightBundle, block_idx: usize) -> Result<FeatureTensor> {
    let y = cbm_forward(x, cfg, w, block_idx)?;
    nbm_forward(&y, cfg, w, block_idx)
}

/// Shared decoder body: per region pointwise conv, LN, GELU, then a
/// transposed conv with frequency stride `s_i` emitting `out_ch` maps, trimmed
/// back to the region width. Returns `out_ch` maps of `F x T`.
fn decode(o: &FeatureTensor, cfg: &GeneratorConfig, w: &WeightBundle, prefix: &str, out_ch: usize) -> Result<Vec<Array2<f64>>> {
    check_features(o, cfg)?;
    let (_, c, t) = o.dim();
    let layout = &cfg.layout;
    let counts = layout.subband_counts();
    let offsets = layout.subband_offsets();
    let kt = cfg.decoder_time_kernel;
    let half = kt / 2;
    let mut maps = vec![Array2::zeros((cfg.n_freqs, t)); out_ch];

    for (i, &s) in layout.freq_strides.iter().enumerate() {
        let p = format!("{prefix}.region{i}");
        let pw = matrix(w, &format!("{p}.pw.weight"), &[c, c, 1, 1], c, c)?;
        let pw_b = vector(w, &format!("{p}.pw.bias"), c)?;
        let gamma = vector(w, &format!("{p}.norm.weight"), c)?;
        let beta = vector(w, &format!("{p}.norm.bias"), c)?;
        let tw = w.values(&format!("{p}.trconv.weight"), &[c, out_ch, s, kt])?;
        let tb = vector(w, &format!("{p}.trconv.bias"), out_ch)?;

        let region = o.data.slice(s![offsets[i]..offsets[i] + counts[i], .., ..]).to_owned();
        let h = pointwise(&region, pw.view(), Some(&pw_b));
        let h = channel_norm(&h, &gamma, &beta, cfg.norm_eps).mapv(gelu);

        // per time tap: rows (oc, k), cols c
        let taps: Vec<Array2<f64>> = (0..kt)
            .map(|d| {
                Array2::from_shape_fn((out_ch * s, c), |(r, ci)| {
                    let (oc, k) = (r / s, r % s);
                    tw[((ci * out_ch + oc) * s + k) * kt + d]
                })
            })
            .collect();

        let lo = layout.boundaries[i];
        let width = layout.width(i);
        for n in 0..counts[i] {
            let hn = h.index_axis(Axis(0), n);
            let mut acc = Array2::<f64>::zeros((out_ch * s, t));
            for (d, wd) in taps.iter().enumerate() {
                // out[t] += W_d h[t + half - d]
                let shift = half as isize - d as isize;
                let t_lo = (-shift).max(0) as usize;
                let t_hi = (t as isize - shift).min(t as isize).max(0) as usize;
                if t_lo >= t_hi {
                    continue;
                }
                let src = hn.slice(s![.., (t_lo as isize + shift) as usize..(t_hi as isize + shift) as usize]);
                let mut dst = acc.slice_mut(s![.., t_lo..t_hi]);
                ndarray::linalg::general_mat_mul(1.0, wd, &src, 1.0, &mut dst);
            }
            for oc in 0..out_ch {
                for k in 0..s {
                    let local = n * s + k;
                    if local >= width {
                        break;
                    }
                    let mut row = maps[oc].row_mut(lo + local);
                    row.assign(&acc.row(oc * s + k));
                    row += tb[oc];
                }
            }
        }
    }
    Ok(maps)
}

/// Magnitude decoder; `exp` keeps the output strictly positive.
pub fn hmdm_decode(o: &FeatureTensor, cfg: &GeneratorConfig, w: &WeightBundle) -> Result<Array2<f64>> {
    let mut maps = decode(o, cfg, w, "hmdm", 1)?;
    Ok(maps.remove(0).mapv(f64::exp))
}

/// Phase decoder; `atan2` of the two emitted maps, in (-pi, pi].
pub fn hpdm_decode(o: &FeatureTensor, cfg: &GeneratorConfig, w: &WeightBundle) -> Result<Array2<f64>> {
    let maps = decode(o, cfg, w, "hpdm", 2)?;
    Ok(ndarray::Zip::from(&maps[0])
        .and(&maps[1])
        .map_collect(|&re, &im| wrapped_atan2(im, re)))
}

#[derive(Debug, Clone)]
pub struct GeneratorOutput {
    /// `A⁺ exp(X_mel)`
    pub range: Array2<f64>,
    /// Decoder magnitude before null-space projection.
    pub null_estimate: Array2<f64>,
    /// `(I - A⁺A) null_estimate`
    pub null_component: Array2<f64>,
    pub unclamped: Array2<f64>,
    pub magnitude: Array2<f64>,
    pub phase: Array2<f64>,
    pub audio: AudioBuffer,
}

/// Full vocoder pass from a log-mel matrix to audio of `T * hop` samples.
pub fn generator_forward(
    x_mel: &MelMatrix,
    fb: &MelFilterbank,
    cfg: &GeneratorConfig,
    w: &WeightBundle,
    stft_cfg: &StftConfig,
    sample_rate: u32,
) -> Result<GeneratorOutput> {
    cfg.validate().stage("config")?;
    if x_mel.nrows() != cfg.n_mels || fb.n_mels() != cfg.n_mels || fb.n_freqs() != cfg.n_freqs {
        return Err(Error::shape(
            "generator input",
            format!("{} mel rows, filterbank {}x{}", cfg.n_mels, cfg.n_mels, cfg.n_freqs),
            format!("{} mel rows, filterbank {}x{}", x_mel.nrows(), fb.n_mels(), fb.n_freqs()),
        ));
    }
    validate_bundle(cfg, w).stage("weights")?;

    let range = range_project(x_mel, fb).stage("range_project")?;
    let mut feats = hsem_encode(&range.values, cfg, w).stage("hsem_encode")?;
    for b in 0..cfg.blocks {
        feats = dpb_forward(&feats, cfg, w, b).stage("dpb_forward")?;
    }
    let null_estimate = hmdm_decode(&feats, cfg, w).stage("hmdm_decode")?;
    let phase = hpdm_decode(&feats, cfg, w).stage("hpdm_decode")?;
    let assembly = assemble_magnitude(&range, &null_estimate, fb).stage("assemble_magnitude")?;
    let spec = assemble_spectrum(&assembly.magnitude, &phase).stage("assemble_spectrum")?;
    let out_len = x_mel.ncols() * stft_cfg.hop;
    let audio = istft(&spec, stft_cfg, out_len, sample_rate).stage("istft")?;
    let null_component = &assembly.unclamped - &range.values;
    Ok(GeneratorOutput {
        range: range.values,
        null_estimate,
        null_component,
        unclamped: assembly.unclamped,
        magnitude: assembly.magnitude,
        phase,
        audio,
    })
}
