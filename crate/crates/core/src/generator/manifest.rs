//! Versioned name → shape table of every learnable tensor.
//!
//! Naming (v1), with `i` a region, `b` a dual-path block and `p` a ConvNeXt
//! block inside the narrow-band module:
//!
//! ```text
//! hsem.region{i}.conv.weight        [C, 1, s_i, hsem_time_kernel]
//! hsem.region{i}.conv.bias          [C]
//! hsem.region{i}.norm.{weight,bias} [C]
//! dpb{b}.cbm.norm{1,2,3}.{weight,bias}  [C]
//! dpb{b}.cbm.gconv{1,3}.weight      [C, C / groups, cbm_band_kernel]
//! dpb{b}.cbm.gconv{1,3}.bias        [C]
//! dpb{b}.cbm.prelu{1,3}.weight      [C]
//! dpb{b}.cbm.squeeze.weight         [C', C, 1]
//! dpb{b}.cbm.squeeze.bias           [C']
//! dpb{b}.cbm.mixer.weight           [N, N]
//! dpb{b}.cbm.restore.weight         [C, C', 1]
//! dpb{b}.cbm.restore.bias           [C]
//! dpb{b}.nbm.block{p}.dwconv.weight [C, 1, nbm_time_kernel]
//! dpb{b}.nbm.block{p}.dwconv.bias   [C]
//! dpb{b}.nbm.block{p}.norm.{weight,bias}    [C]
//! dpb{b}.nbm.block{p}.pwconv{1,2}.weight    [C, C]   (out, in)
//! dpb{b}.nbm.block{p}.pwconv{1,2}.bias      [C]
//! dpb{b}.nbm.block{p}.grn.{gamma,beta}      [C]
//! {hmdm,hpdm}.region{i}.pw.weight   [C, C, 1, 1]
//! {hmdm,hpdm}.region{i}.pw.bias     [C]
//! {hmdm,hpdm}.region{i}.norm.{weight,bias}  [C]
//! {hmdm,hpdm}.region{i}.trconv.weight [C, K, s_i, decoder_time_kernel]  (K = 1 or 2)
//! {hmdm,hpdm}.region{i}.trconv.bias   [K]
//! ```

use super::config::GeneratorConfig;

pub const MANIFEST_VERSION: u32 = 1;

/// How `init_random` fills a tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform in `±sqrt(1 / fan_in)`.
    Uniform { fan_in: usize },
    Ones,
    Zeros,
    Constant(f32),
    /// Identity plus uniform noise in `±0.1 * sqrt(1 / n)`.
    IdentityNoise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    fn new(name: String, shape: Vec<usize>, init: Init) -> Self {
        Self { name, shape, init }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

fn norm(out: &mut Vec<ParamSpec>, prefix: &str, c: usize) {
    out.push(ParamSpec::new(format!("{prefix}.weight"), vec![c], Init::Ones));
    out.push(ParamSpec::new(format!("{prefix}.bias"), vec![c], Init::Zeros));
}

fn conv(out: &mut Vec<ParamSpec>, prefix: &str, shape: Vec<usize>, bias: usize, fan_in: usize) {
    out.push(ParamSpec::new(format!("{prefix}.weight"), shape, Init::Uniform { fan_in }));
    out.push(ParamSpec::new(format!("{prefix}.bias"), vec![bias], Init::Uniform { fan_in }));
}

/// Every learnable tensor in forward order.
pub fn manifest(cfg: &GeneratorConfig) -> Vec<ParamSpec> {
    let c = cfg.channels;
    let cs = cfg.squeezed_channels;
    let n = cfg.n_subbands();
    let layout = &cfg.layout;
    let mut out = Vec::new();

    for (i, &s) in layout.freq_strides.iter().enumerate() {
        let kt = cfg.hsem_time_kernel;
        let p = format!("hsem.region{i}");
        conv(&mut out, &format!("{p}.conv"), vec![c, 1, s, kt], c, s * kt);
        norm(&mut out, &format!("{p}.norm"), c);
    }

    for b in 0..cfg.blocks {
        let p = format!("dpb{b}.cbm");
        let g = cfg.cbm_groups;
        let k = cfg.cbm_band_kernel;
        for stage in [1, 3] {
            if stage == 3 {
                norm(&mut out, &format!("{p}.norm2"), c);
                conv(&mut out, &format!("{p}.squeeze"), vec![cs, c, 1], cs, c);
                out.push(ParamSpec::new(
                    format!("{p}.mixer.weight"),
                    vec![n, n],
                    Init::IdentityNoise,
                ));
                conv(&mut out, &format!("{p}.restore"), vec![c, cs, 1], c, cs);
            }
            norm(&mut out, &format!("{p}.norm{stage}"), c);
            conv(&mut out, &format!("{p}.gconv{stage}"), vec![c, c / g, k], c, c / g * k);
            out.push(ParamSpec::new(
                format!("{p}.prelu{stage}.weight"),
                vec![c],
                Init::Constant(0.25),
            ));
        }
        for q in 0..cfg.convnext_per_block {
            let p = format!("dpb{b}.nbm.block{q}");
            let kt = cfg.nbm_time_kernel;
            conv(&mut out, &format!("{p}.dwconv"), vec![c, 1, kt], c, kt);
            norm(&mut out, &format!("{p}.norm"), c);
            conv(&mut out, &format!("{p}.pwconv1"), vec![c, c], c, c);
            out.push(ParamSpec::new(format!("{p}.grn.gamma"), vec![c], Init::Uniform { fan_in: c }));
            out.push(ParamSpec::new(format!("{p}.grn.beta"), vec![c], Init::Uniform { fan_in: c }));
            conv(&mut out, &format!("{p}.pwconv2"), vec![c, c], c, c);
        }
    }

    for (dec, k) in [("hmdm", 1), ("hpdm", 2)] {
        for (i, &s) in layout.freq_strides.iter().enumerate() {
            let p = format!("{dec}.region{i}");
            let kt = cfg.decoder_time_kernel;
            conv(&mut out, &format!("{p}.pw"), vec![c, c, 1, 1], c, c);
            norm(&mut out, &format!("{p}.norm"), c);
            conv(&mut out, &format!("{p}.trconv"), vec![c, k, s, kt], k, c * kt);
        }
    }
    out
}

/// Learnable scalar count; the sum of manifest shapes.
pub fn count_params(cfg: &GeneratorConfig) -> usize {
    manifest(cfg).iter().map(ParamSpec::numel).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn names_are_unique() {
        let m = manifest(&GeneratorConfig::full());
        let names: HashSet<_> = m.iter().map(|p| &p.name).collect();
        assert_eq!(names.len(), m.len());
    }

    #[test]
    fn closed_form_count() {
        // hand-expanded per-module totals for the layout (8, 24, 64), N = 24
        fn closed(c: usize, b: usize) -> usize {
            let cs = c / 4;
            let n = 24;
            let hsem = 3 * (3 * c) + 96 * 3 * c;
            let cbm_stage = 2 * c + 3 * c * c / 2 + c + c;
            let cbm_mid = 2 * c + c * cs + cs + n * n + cs * c + c;
            let nbm_block = 7 * c + c + 2 * c + c * c + c + 2 * c + c * c + c;
            let dec = |k: usize| 3 * (c * c + c + 2 * c + k) + 96 * c * k;
            hsem + b * (2 * cbm_stage + cbm_mid + 2 * nbm_block) + dec(1) + dec(2)
        }
        for cfg in [GeneratorConfig::full(), GeneratorConfig::lite(), GeneratorConfig::ultralite()] {
            assert_eq!(count_params(&cfg), closed(cfg.channels, cfg.blocks));
        }
    }

    #[test]
    fn dominant_terms_scale_quadratically() {
        let mut small = GeneratorConfig::full();
        small.channels = 128;
        small.squeezed_channels = 32;
        let big = GeneratorConfig::full();
        let ratio = count_params(&big) as f64 / count_params(&small) as f64;
        assert!(ratio > 3.5 && ratio < 4.0, "ratio {ratio}");
    }
}
