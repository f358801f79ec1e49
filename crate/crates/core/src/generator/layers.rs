//! Building blocks over `[sub-band, channel, time]` tensors.
//!
//! Work is split across sub-bands (or channels) only; each output element is
//! produced by the same sequential code whatever the thread count, so results
//! are bit-identical under any rayon pool size.

use ndarray::linalg::general_mat_mul;
use ndarray::parallel::prelude::*;
use ndarray::{s, Array2, Array3, ArrayView2, Axis};

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

pub fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

/// Layer norm over the channel axis at every (sub-band, frame).
pub fn channel_norm(x: &Array3<f64>, gamma: &[f64], beta: &[f64], eps: f64) -> Array3<f64> {
    let (_, c, t) = x.dim();
    let mut out = Array3::zeros(x.raw_dim());
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(x.axis_iter(Axis(0)))
        .for_each(|(mut o, xn)| {
            for ti in 0..t {
                let col = xn.column(ti);
                let mean = col.sum() / c as f64;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c as f64;
                let inv = 1.0 / (var + eps).sqrt();
                for ci in 0..c {
                    o[[ci, ti]] = (col[ci] - mean) * inv * gamma[ci] + beta[ci];
                }
            }
        });
    out
}

/// `out[n] = W x[n] + b` for every sub-band; `w` is `(out, in)`.
pub fn pointwise(x: &Array3<f64>, w: ArrayView2<f64>, bias: Option<&[f64]>) -> Array3<f64> {
    let (n, _, t) = x.dim();
    let out_ch = w.nrows();
    let mut out = Array3::zeros((n, out_ch, t));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(x.axis_iter(Axis(0)))
        .for_each(|(mut o, xn)| {
            if let Some(b) = bias {
                for (mut row, &bv) in o.rows_mut().into_iter().zip(b) {
                    row.fill(bv);
                }
            }
            general_mat_mul(1.0, &w, &xn, 1.0, &mut o);
        });
    out
}

/// Grouped 1-D convolution along the sub-band axis, zero padded, stride 1.
/// `w` is `[C_out, C_in / groups, K]`.
pub fn band_conv(x: &Array3<f64>, w: &Array3<f64>, bias: &[f64], groups: usize) -> Array3<f64> {
    let (n, c, t) = x.dim();
    let k = w.dim().2;
    let half = k / 2;
    let cg = c / groups;
    // per tap, per group weight blocks [cg_out, cg_in]
    let taps: Vec<Vec<Array2<f64>>> = (0..k)
        .map(|kk| {
            (0..groups)
                .map(|g| w.slice(s![g * cg..(g + 1) * cg, .., kk]).to_owned())
                .collect()
        })
        .collect();
    let mut out = Array3::zeros((n, c, t));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(ni, mut o)| {
            for (mut row, &bv) in o.rows_mut().into_iter().zip(bias) {
                row.fill(bv);
            }
            for (kk, blocks) in taps.iter().enumerate() {
                let src = ni as isize + kk as isize - half as isize;
                if src < 0 || src >= n as isize {
                    continue;
                }
                let xs = x.index_axis(Axis(0), src as usize);
                for (g, wg) in blocks.iter().enumerate() {
                    let rows = g * cg..(g + 1) * cg;
                    let mut og = o.slice_mut(s![rows.clone(), ..]);
                    general_mat_mul(1.0, wg, &xs.slice(s![rows, ..]), 1.0, &mut og);
                }
            }
        });
    out
}

/// `out[:, c, t] = M x[:, c, t]`, a dense map across sub-bands.
pub fn band_mix(x: &Array3<f64>, m: &Array2<f64>) -> Array3<f64> {
    let (n, c, t) = x.dim();
    let flat = x
        .view()
        .into_shape_with_order((n, c * t))
        .expect("standard layout");
    m.dot(&flat)
        .into_shape_with_order((m.nrows(), c, t))
        .expect("shape")
}

/// Depthwise convolution along time, zero padded to keep the length.
/// `w` is `[C, K]`.
pub fn depthwise_time_conv(x: &Array3<f64>, w: &Array2<f64>, bias: &[f64]) -> Array3<f64> {
    let (_, c, t) = x.dim();
    let k = w.ncols();
    let half = k / 2;
    let mut out = Array3::zeros(x.raw_dim());
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(x.axis_iter(Axis(0)))
        .for_each(|(mut o, xn)| {
            for ci in 0..c {
                let src = xn.row(ci);
                let wr = w.row(ci);
                for ti in 0..t {
                    let mut acc = bias[ci];
                    for kk in 0..k {
                        let s = ti as isize + kk as isize - half as isize;
                        if s >= 0 && (s as usize) < t {
                            acc += wr[kk] * src[s as usize];
                        }
                    }
                    o[[ci, ti]] = acc;
                }
            }
        });
    out
}

/// Global response normalization: per sub-band, the L2 norm of every channel
/// over time is divided by its mean across channels.
/// `y = gamma * (x * nx) + beta + x`.
pub fn global_response_norm(x: &Array3<f64>, gamma: &[f64], beta: &[f64]) -> Array3<f64> {
    let (_, c, _) = x.dim();
    let mut out = Array3::zeros(x.raw_dim());
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(x.axis_iter(Axis(0)))
        .for_each(|(mut o, xn)| {
            let gx: Vec<f64> = xn
                .rows()
                .into_iter()
                .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
                .collect();
            let mean = gx.iter().sum::<f64>() / c as f64;
            for ci in 0..c {
                let nx = gx[ci] / (mean + 1e-6);
                for (ov, &xv) in o.row_mut(ci).iter_mut().zip(xn.row(ci)) {
                    *ov = gamma[ci] * (xv * nx) + beta[ci] + xv;
                }
            }
        });
    out
}
