use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Split of the frequency axis into regions, each folded into sub-band
/// tokens by a strided convolution.
///
/// Region `i` covers bins `[boundaries[i], boundaries[i + 1])`. It is
/// right-padded with zeros up to a multiple of its stride, giving
/// `ceil(width / stride)` sub-bands.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionLayout {
    pub boundaries: Vec<usize>,
    pub freq_strides: Vec<usize>,
    pub freq_kernels: Vec<usize>,
}

impl RegionLayout {
    /// (0, 96, 288, 513) with strides (8, 24, 64): 12 + 8 + 4 = 24 sub-bands.
    pub fn default_513() -> Self {
        Self {
            boundaries: vec![0, 96, 288, 513],
            freq_strides: vec![8, 24, 64],
            freq_kernels: vec![8, 24, 64],
        }
    }

    pub fn n_regions(&self) -> usize {
        self.freq_strides.len()
    }

    pub fn width(&self, region: usize) -> usize {
        self.boundaries[region + 1] - self.boundaries[region]
    }

    pub fn subband_counts(&self) -> Vec<usize> {
        (0..self.n_regions())
            .map(|i| self.width(i).div_ceil(self.freq_strides[i]))
            .collect()
    }

    /// Zero bins appended to each region before compression.
    pub fn pad_per_region(&self) -> Vec<usize> {
        self.subband_counts()
            .iter()
            .zip(&self.freq_strides)
            .enumerate()
            .map(|(i, (n, s))| n * s - self.width(i))
            .collect()
    }

    pub fn n_subbands(&self) -> usize {
        self.subband_counts().iter().sum()
    }

    /// First sub-band index of every region.
    pub fn subband_offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.subband_counts()
            .iter()
            .map(|n| {
                let off = acc;
                acc += n;
                off
            })
            .collect()
    }

    pub fn validate(&self, n_freqs: usize) -> Result<()> {
        let i = self.n_regions();
        if i == 0 {
            return Err(Error::Config("region layout needs at least one region".into()));
        }
        if self.boundaries.len() != i + 1 || self.freq_kernels.len() != i {
            return Err(Error::Config(format!(
                "region layout needs {} boundaries and {i} kernels, got {} and {}",
                i + 1,
                self.boundaries.len(),
                self.freq_kernels.len()
            )));
        }
        if self.boundaries[0] != 0 || self.boundaries[i] != n_freqs {
            return Err(Error::Config(format!(
                "region boundaries must span [0, {n_freqs}], got {:?}",
                self.boundaries
            )));
        }
        if self.boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "region boundaries must be strictly increasing: {:?}",
                self.boundaries
            )));
        }
        if self.freq_strides.iter().any(|&s| s == 0) {
            return Err(Error::Config("frequency strides must be positive".into()));
        }
        if self.freq_kernels != self.freq_strides {
            return Err(Error::Config(
                "frequency kernels must equal strides (non-overlapping patches)".into(),
            ));
        }
        let w: Vec<usize> = (0..i).map(|r| self.width(r)).collect();
        if w.windows(2).any(|p| p[0] > p[1])
            || self.freq_strides.windows(2).any(|p| p[0] > p[1])
        {
            return Err(Error::Config(
                "region widths and strides must be non-decreasing (fine to coarse)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_freqs: usize,
    pub n_mels: usize,
    pub channels: usize,
    pub squeezed_channels: usize,
    pub blocks: usize,
    pub convnext_per_block: usize,
    pub layout: RegionLayout,
    pub nbm_time_kernel: usize,
    pub hsem_time_kernel: usize,
    pub decoder_time_kernel: usize,
    pub cbm_band_kernel: usize,
    pub cbm_groups: usize,
    pub norm_eps: f64,
}

impl GeneratorConfig {
    fn base(n_mels: usize, channels: usize, blocks: usize) -> Self {
        Self {
            n_freqs: 513,
            n_mels,
            channels,
            squeezed_channels: channels / 4,
            blocks,
            convnext_per_block: 2,
            layout: RegionLayout::default_513(),
            nbm_time_kernel: 7,
            hsem_time_kernel: 3,
            decoder_time_kernel: 1,
            cbm_band_kernel: 3,
            cbm_groups: 2,
            norm_eps: 1e-6,
        }
    }

    /// C = 256, B = 6, 80 mel bands.
    pub fn full() -> Self {
        Self::base(80, 256, 6)
    }

    /// C = 256, B = 6, 100 mel bands.
    pub fn full_100() -> Self {
        Self::base(100, 256, 6)
    }

    /// C = 128, B = 4.
    pub fn lite() -> Self {
        Self::base(80, 128, 4)
    }

    /// C = 32, B = 4.
    pub fn ultralite() -> Self {
        Self::base(80, 32, 4)
    }

    pub fn n_subbands(&self) -> usize {
        self.layout.n_subbands()
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate(self.n_freqs)?;
        let c = self.channels;
        if c == 0 || c % 4 != 0 || self.squeezed_channels != c / 4 {
            return Err(Error::Config(format!(
                "channels must be a positive multiple of 4 with squeezed_channels = channels / 4, got {c} and {}",
                self.squeezed_channels
            )));
        }
        if self.blocks == 0 || self.convnext_per_block == 0 {
            return Err(Error::Config("blocks and convnext_per_block must be >= 1".into()));
        }
        if self.n_mels == 0 || self.n_mels >= self.n_freqs {
            return Err(Error::Config("need 0 < n_mels < n_freqs".into()));
        }
        for (name, k) in [
            ("nbm_time_kernel", self.nbm_time_kernel),
            ("hsem_time_kernel", self.hsem_time_kernel),
            ("decoder_time_kernel", self.decoder_time_kernel),
            ("cbm_band_kernel", self.cbm_band_kernel),
        ] {
            if k % 2 == 0 {
                return Err(Error::Config(format!("{name} must be odd, got {k}")));
            }
        }
        if self.cbm_groups == 0 || c % self.cbm_groups != 0 {
            return Err(Error::Config(format!(
                "cbm_groups {} must divide channels {c}",
                self.cbm_groups
            )));
        }
        if !(self.norm_eps > 0.0) {
            return Err(Error::Config("norm_eps must be positive".into()));
        }
        Ok(())
    }
}
