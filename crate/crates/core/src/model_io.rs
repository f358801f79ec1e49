//! Weight/tensor files, the flat config document, and seeded initialization.
//!
//! Weight file layout (all integers little-endian):
//!
//! ```text
//! magic            8 bytes  "RNDVOC01"
//! tensor_count     u32
//! tensor_count records:
//!   name_len       u32
//!   name           name_len bytes, UTF-8
//!   rank           u8
//!   dims           rank x u32
//!   dtype          u8       0 = f32 little-endian (only value in v1)
//!   offset         u64      byte offset of the data from the payload start
//! payload          tensors back to back, in record order
//! ```
//!
//! Records are written in lexicographic name order. Single tensors (mel
//! matrices, dumped spectra) use the same format with one record.

use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{MelConfig, MelNorm, MelScale, StftConfig};
use crate::error::{Error, Result};
use crate::generator::{manifest, validate_bundle, GeneratorConfig, Init, RegionLayout};
use crate::losses::LossWeights;
use crate::weights::{Tensor, WeightBundle};

pub const MAGIC: &[u8; 8] = b"RNDVOC01";
pub const DTYPE_F32_LE: u8 = 0;

pub fn encode_weights(bundle: &WeightBundle) -> Result<Vec<u8>> {
    let count = u32::try_from(bundle.len()).map_err(|_| Error::Format("too many tensors".into()))?;
    let mut header = Vec::new();
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&count.to_le_bytes());
    let mut offset = 0u64;
    for (name, t) in bundle.iter() {
        let name_len = u32::try_from(name.len()).map_err(|_| Error::Format("name too long".into()))?;
        let rank = u8::try_from(t.shape.len()).map_err(|_| Error::Format(format!("`{name}`: rank too large")))?;
        header.extend_from_slice(&name_len.to_le_bytes());
        header.extend_from_slice(name.as_bytes());
        header.push(rank);
        for &d in &t.shape {
            let d = u32::try_from(d).map_err(|_| Error::Format(format!("`{name}`: dim too large")))?;
            header.extend_from_slice(&d.to_le_bytes());
        }
        header.push(DTYPE_F32_LE);
        header.extend_from_slice(&offset.to_le_bytes());
        offset += 4 * t.numel() as u64;
    }
    let mut out = header;
    out.reserve(offset as usize);
    for (_, t) in bundle.iter() {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("truncated file while reading {what}")))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Parses a weight/tensor file without checking it against any manifest.
pub fn decode_weights(bytes: &[u8]) -> Result<WeightBundle> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8, "magic")? != MAGIC {
        return Err(Error::Format("bad magic (expected RNDVOC01)".into()));
    }
    let count = r.u32("tensor count")? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u8("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dims")? as usize);
        }
        let dtype = r.u8("dtype")?;
        if dtype != DTYPE_F32_LE {
            return Err(Error::Format(format!("`{name}`: unsupported dtype tag {dtype}")));
        }
        let offset = r.u64("offset")?;
        records.push((name, shape, offset));
    }
    let payload = &bytes[r.pos..];

    let mut spans: Vec<(u64, u64, &str)> = Vec::with_capacity(records.len());
    let mut bundle = WeightBundle::new();
    for (name, shape, offset) in &records {
        let numel = shape
            .iter()
            .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
            .ok_or_else(|| Error::Format(format!("`{name}`: shape overflows")))?;
        let nbytes = numel
            .checked_mul(4)
            .ok_or_else(|| Error::Format(format!("`{name}`: shape overflows")))?;
        let end = offset
            .checked_add(nbytes)
            .filter(|&e| e <= payload.len() as u64)
            .ok_or_else(|| Error::Format(format!("`{name}`: data out of bounds (truncated file?)")))?;
        spans.push((*offset, end, name));
        let data = payload[*offset as usize..end as usize]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        bundle.insert(name.clone(), Tensor::new(shape.clone(), data)?)?;
    }
    spans.sort();
    for w in spans.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::Format(format!(
                "tensors `{}` and `{}` overlap",
                w[0].2, w[1].2
            )));
        }
    }
    Ok(bundle)
}

pub fn save_weights(bundle: &WeightBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_weights(bundle)?).map_err(|e| Error::io(path, e))
}

pub fn read_weight_file(path: impl AsRef<Path>) -> Result<WeightBundle> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&bytes)
}

/// Reads and validates a weight file against the manifest of `cfg`.
pub fn load_weights(path: impl AsRef<Path>, cfg: &GeneratorConfig) -> Result<WeightBundle> {
    let bundle = read_weight_file(path)?;
    validate_bundle(cfg, &bundle)?;
    Ok(bundle)
}

pub fn save_tensor(name: &str, tensor: Tensor, path: impl AsRef<Path>) -> Result<()> {
    let mut b = WeightBundle::new();
    b.insert(name, tensor)?;
    save_weights(&b, path)
}

/// Reads a single-tensor file, returning its name and contents.
pub fn load_tensor(path: impl AsRef<Path>) -> Result<(String, Tensor)> {
    let b = read_weight_file(path)?;
    if b.len() != 1 {
        return Err(Error::Format(format!("expected one tensor, found {}", b.len())));
    }
    let (name, t) = b.iter().next().unwrap();
    Ok((name.clone(), t.clone()))
}

/// Uniform in `[-1, 1)` from the top 53 bits of a 64-bit draw.
fn unit(rng: &mut ChaCha8Rng) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    2.0 * u - 1.0
}

/// Manifest-complete random bundle.
///
/// One `ChaCha8Rng::seed_from_u64(seed)` stream is consumed tensor by
/// tensor in manifest order, element by element in row-major order. A draw
/// `x` maps to `u = (x >> 11) * 2^-53`, `v = 2u - 1`, and the tensor value is
/// `v * sqrt(1 / fan_in)` (uniform), `δ_ij + 0.1 * v * sqrt(1 / n)` (band
/// mixer), or a constant (norm scale 1, norm shift 0, PReLU slope 0.25;
/// constants consume no draws).
pub fn init_random(cfg: &GeneratorConfig, seed: u64) -> Result<WeightBundle> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bundle = WeightBundle::new();
    for spec in manifest(cfg) {
        let n = spec.numel();
        let data: Vec<f32> = match spec.init {
            Init::Uniform { fan_in } => {
                let bound = (1.0 / fan_in as f64).sqrt();
                (0..n).map(|_| (unit(&mut rng) * bound) as f32).collect()
            }
            Init::Ones => vec![1.0; n],
            Init::Zeros => vec![0.0; n],
            Init::Constant(c) => vec![c; n],
            Init::IdentityNoise => {
                let side = spec.shape[0];
                let scale = 0.1 * (1.0 / side as f64).sqrt();
                (0..n)
                    .map(|k| {
                        let eye = if k / side == k % side { 1.0 } else { 0.0 };
                        (eye + unit(&mut rng) * scale) as f32
                    })
                    .collect()
            }
        };
        bundle.insert(spec.name, Tensor::new(spec.shape, data)?)?;
    }
    Ok(bundle)
}

/// Every tensor zero.
pub fn init_zeros(cfg: &GeneratorConfig) -> WeightBundle {
    let mut bundle = WeightBundle::new();
    for spec in manifest(cfg) {
        bundle
            .insert(spec.name, Tensor::zeros(&spec.shape))
            .expect("manifest names are unique");
    }
    bundle
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Ljspeech,
    Libritts,
    Lite,
    Ultralite,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Ljspeech, Preset::Libritts, Preset::Lite, Preset::Ultralite];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Ljspeech => "ljspeech",
            Preset::Libritts => "libritts",
            Preset::Lite => "lite",
            Preset::Ultralite => "ultralite",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset `{s}` (ljspeech, libritts, lite, ultralite)")))
    }

    pub fn config(self) -> ConfigFile {
        let (mel, gen) = match self {
            Preset::Ljspeech => (MelConfig::ljspeech(), GeneratorConfig::full()),
            Preset::Libritts => (MelConfig::libritts(), GeneratorConfig::full_100()),
            Preset::Lite => (MelConfig::ljspeech(), GeneratorConfig::lite()),
            Preset::Ultralite => (MelConfig::ljspeech(), GeneratorConfig::ultralite()),
        };
        ConfigFile::from_parts(self, &StftConfig::vocoder_default(), &mel, &gen, &LossWeights::unverified_defaults())
    }

    /// Published (#params in millions, GMACs per 5 s) for this configuration.
    pub fn published_targets(self) -> (f64, f64) {
        match self {
            Preset::Ljspeech | Preset::Libritts => (3.14, 34.10),
            Preset::Lite => (0.71, 9.54),
            Preset::Ultralite => (0.08, 1.66),
        }
    }
}

/// Flat, JSON-compatible document holding every configuration knob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub format_version: u32,
    pub preset: Preset,
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub center: bool,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub log_floor: f64,
    pub mel_scale: MelScale,
    pub mel_norm: MelNorm,
    pub channels: usize,
    pub squeezed_channels: usize,
    pub blocks: usize,
    pub convnext_per_block: usize,
    pub region_boundaries: Vec<usize>,
    pub region_strides: Vec<usize>,
    pub region_kernels: Vec<usize>,
    pub nbm_time_kernel: usize,
    pub hsem_time_kernel: usize,
    pub decoder_time_kernel: usize,
    pub cbm_band_kernel: usize,
    pub cbm_groups: usize,
    pub norm_eps: f64,
    pub lambda_a: f64,
    pub lambda_p: f64,
    pub lambda_ri: f64,
    pub lambda_mel: f64,
    pub lambda_c: f64,
    pub lambda_g: f64,
    pub lambda_fm: f64,
}

impl ConfigFile {
    pub fn from_parts(
        preset: Preset,
        stft: &StftConfig,
        mel: &MelConfig,
        gen: &GeneratorConfig,
        loss: &LossWeights,
    ) -> Self {
        Self {
            format_version: 1,
            preset,
            sample_rate: mel.sample_rate,
            n_fft: stft.n_fft,
            hop: stft.hop,
            center: stft.center,
            n_mels: mel.n_mels,
            f_min: mel.f_min,
            f_max: mel.f_max,
            log_floor: mel.log_floor,
            mel_scale: mel.scale,
            mel_norm: mel.norm,
            channels: gen.channels,
            squeezed_channels: gen.squeezed_channels,
            blocks: gen.blocks,
            convnext_per_block: gen.convnext_per_block,
            region_boundaries: gen.layout.boundaries.clone(),
            region_strides: gen.layout.freq_strides.clone(),
            region_kernels: gen.layout.freq_kernels.clone(),
            nbm_time_kernel: gen.nbm_time_kernel,
            hsem_time_kernel: gen.hsem_time_kernel,
            decoder_time_kernel: gen.decoder_time_kernel,
            cbm_band_kernel: gen.cbm_band_kernel,
            cbm_groups: gen.cbm_groups,
            norm_eps: gen.norm_eps,
            lambda_a: loss.lambda_a,
            lambda_p: loss.lambda_p,
            lambda_ri: loss.lambda_ri,
            lambda_mel: loss.lambda_mel,
            lambda_c: loss.lambda_c,
            lambda_g: loss.lambda_g,
            lambda_fm: loss.lambda_fm,
        }
    }

    /// Periodic Hann analysis window.
    pub fn stft(&self) -> StftConfig {
        StftConfig::hann(self.n_fft, self.hop, self.center)
    }

    pub fn mel(&self) -> MelConfig {
        MelConfig {
            n_mels: self.n_mels,
            f_min: self.f_min,
            f_max: self.f_max,
            sample_rate: self.sample_rate,
            n_fft: self.n_fft,
            log_floor: self.log_floor,
            scale: self.mel_scale,
            norm: self.mel_norm,
        }
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            n_freqs: self.n_fft / 2 + 1,
            n_mels: self.n_mels,
            channels: self.channels,
            squeezed_channels: self.squeezed_channels,
            blocks: self.blocks,
            convnext_per_block: self.convnext_per_block,
            layout: RegionLayout {
                boundaries: self.region_boundaries.clone(),
                freq_strides: self.region_strides.clone(),
                freq_kernels: self.region_kernels.clone(),
            },
            nbm_time_kernel: self.nbm_time_kernel,
            hsem_time_kernel: self.hsem_time_kernel,
            decoder_time_kernel: self.decoder_time_kernel,
            cbm_band_kernel: self.cbm_band_kernel,
            cbm_groups: self.cbm_groups,
            norm_eps: self.norm_eps,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda_a: self.lambda_a,
            lambda_p: self.lambda_p,
            lambda_ri: self.lambda_ri,
            lambda_mel: self.lambda_mel,
            lambda_c: self.lambda_c,
            lambda_g: self.lambda_g,
            lambda_fm: self.lambda_fm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != 1 {
            return Err(Error::Config(format!("unsupported config version {}", self.format_version)));
        }
        self.stft().validate()?;
        self.mel().validate()?;
        self.generator().validate()?;
        self.loss_weights().validate()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}
