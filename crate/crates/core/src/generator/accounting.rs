//! Multiply-accumulate accounting.
//!
//! Per-layer rules, `T` frames:
//!
//! * convolution (including transposed): `out_elems * kernel_volume * in_ch / groups`
//! * dense / pointwise layers: `in * out` per position
//!
//! Normalization, activations and the fixed pseudo-inverse products are not
//! counted. For a strided transposed convolution the first rule counts every
//! kernel tap against every output element, which is the convention of the
//! common profiling tools the published figures were produced with.

use super::config::GeneratorConfig;

/// Frames covering `seconds` of audio: `ceil(seconds * sample_rate / hop)`.
pub fn frames_for(seconds: f64, sample_rate: u32, hop: usize) -> usize {
    (seconds * sample_rate as f64 / hop as f64).ceil() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MacBreakdown {
    pub hsem: u64,
    pub cbm: u64,
    pub nbm: u64,
    pub hmdm: u64,
    pub hpdm: u64,
}

impl MacBreakdown {
    pub fn total(&self) -> u64 {
        self.hsem + self.cbm + self.nbm + self.hmdm + self.hpdm
    }
}

pub fn mac_breakdown(cfg: &GeneratorConfig, frames: usize) -> MacBreakdown {
    let t = frames as u64;
    let c = cfg.channels as u64;
    let cs = cfg.squeezed_channels as u64;
    let n = cfg.n_subbands() as u64;
    let counts = cfg.layout.subband_counts();
    let strides = &cfg.layout.freq_strides;

    let mut m = MacBreakdown::default();
    for (&ni, &s) in counts.iter().zip(strides) {
        let (ni, s) = (ni as u64, s as u64);
        m.hsem += (ni * c * t) * (s * cfg.hsem_time_kernel as u64);
    }

    let gconv = (n * c * t) * cfg.cbm_band_kernel as u64 * (c / cfg.cbm_groups as u64);
    let squeeze = (n * t) * c * cs;
    let mixer = (cs * t) * n * n;
    let restore = (n * t) * cs * c;
    m.cbm = cfg.blocks as u64 * (2 * gconv + squeeze + mixer + restore);

    let dw = (n * c * t) * cfg.nbm_time_kernel as u64;
    let pw = (n * t) * c * c;
    m.nbm = (cfg.blocks * cfg.convnext_per_block) as u64 * (dw + 2 * pw);

    for (&ni, &s) in counts.iter().zip(strides) {
        let (ni, s) = (ni as u64, s as u64);
        let pointwise = (ni * t) * c * c;
        let kt = cfg.decoder_time_kernel as u64;
        let trconv = |k: u64| (k * ni * s * t) * (s * kt) * c;
        m.hmdm += pointwise + trconv(1);
        m.hpdm += pointwise + trconv(2);
    }
    m
}

pub fn count_macs(cfg: &GeneratorConfig, seconds: f64, sample_rate: u32, hop: usize) -> u64 {
    mac_breakdown(cfg, frames_for(seconds, sample_rate, hop)).total()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_seconds_is_431_frames() {
        assert_eq!(frames_for(5.0, 22050, 256), 431);
        assert_eq!(frames_for(1.0, 22050, 256), 87);
    }

    #[test]
    fn macs_are_linear_in_frames() {
        let cfg = GeneratorConfig::full();
        let one = mac_breakdown(&cfg, 1).total();
        assert_eq!(mac_breakdown(&cfg, 431).total(), 431 * one);
        let five = count_macs(&cfg, 5.0, 22050, 256);
        let ten = count_macs(&cfg, 10.0, 22050, 256);
        // 862 vs 431 frames, exact doubling here
        assert_eq!(ten, 2 * five);
    }

    #[test]
    fn hand_count_for_tiny_config() {
        let mut cfg = GeneratorConfig::ultralite();
        cfg.channels = 4;
        cfg.squeezed_channels = 1;
        cfg.blocks = 1;
        cfg.convnext_per_block = 1;
        let m = mac_breakdown(&cfg, 1);
        // hsem: sum_i N_i * C * s_i * 3 = 544 * 4 * 3
        assert_eq!(m.hsem, 544 * 4 * 3);
        // cbm: 2 * (24*4*3*2) + 24*4*1 + 1*24*24 + 24*1*4
        assert_eq!(m.cbm, 2 * 576 + 96 + 576 + 96);
        // nbm: 24*4*7 + 2 * 24*16
        assert_eq!(m.nbm, 672 + 768);
        // hmdm: 24*16 + sum_i N_i s_i^2 * 4
        let sq: u64 = 12 * 64 + 8 * 576 + 4 * 4096;
        assert_eq!(m.hmdm, 384 + sq * 4);
        assert_eq!(m.hpdm, 384 + 2 * sq * 4);
    }
}
