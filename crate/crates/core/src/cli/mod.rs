//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 invariant violation.

pub mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array2, Axis};

use crate::dsp::audio::PRESET_RATES;
use crate::dsp::{
    build_mel_filterbank, istft, mel_spectrogram, read_wav, stft, write_wav, AudioBuffer, ComplexSpectrogram,
    StftConfig, WavFormat,
};
use crate::error::{Error, Result};
use crate::generator::{count_macs, count_params, frames_for, generator_forward};
use crate::losses::{
    loss_consistency, loss_log_amplitude, loss_mel, loss_phase, loss_ri, total_generator_loss, LossComponents, LossWeights,
    PhaseKernelBank,
};
use crate::model_io::{
    init_random, load_tensor, load_weights, save_tensor, save_weights, ConfigFile, Preset, MAGIC,
};
use crate::rnd::{assemble_spectrum, degradation_error, range_project};
use crate::weights::Tensor;

pub use verify::{run_checks, Bound, Check, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rndvoc", version, about = "Range-null space mel vocoder")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// ljspeech, libritts, lite or ultralite
    #[arg(long, default_value = "ljspeech")]
    pub preset: String,
    /// JSON config file; overrides --preset
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> std::result::Result<ConfigFile, CliError> {
        match &self.config {
            Some(p) => Ok(ConfigFile::load(p)?),
            None => Preset::parse(&self.preset)
                .map(Preset::config)
                .map_err(|e| CliError::Usage(e.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    F32,
    Pcm16,
}

impl From<OutFormat> for WavFormat {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::F32 => WavFormat::Float32,
            OutFormat::Pcm16 => WavFormat::Pcm16,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Log-mel spectrogram of a mono WAV, stored as tensor `mel` [n_mels, T]
    MelExtract {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Neural vocoding of a mel tensor
    Vocode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Directory for range / null / magnitude / phase tensors
        #[arg(long)]
        dump_spectra: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, value_enum, default_value = "f32")]
        format: OutFormat,
    },
    /// Weight-free baseline: clamped range-space magnitude with zero phase
    RangeVocode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum, default_value = "f32")]
        format: OutFormat,
    },
    /// Parameter and MAC counts against the published figures
    Count {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 5.0)]
        seconds: f64,
    },
    /// Reconstruction losses between two WAVs or two [2, F, T] spectrogram tensors
    LossEval {
        #[arg(long = "true")]
        reference: PathBuf,
        #[arg(long = "est")]
        estimate: PathBuf,
        /// Config JSON whose lambda_* fields weight the terms
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Seeded random weights for a configuration
    GenWeights {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the invariant suite
    Verify {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
        #[arg(long, default_value_t = 1.0)]
        seconds: f64,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Error),
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Invariant(_) => EXIT_INVARIANT,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "error: {e}"),
            CliError::Invariant(m) => write!(f, "invariant violated: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Data(Error::io("<stdout>", e))
}

/// Parses `args` (including the program name) and runs the command, writing
/// report lines to `out` and diagnostics to `err`. Returns the exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = write!(err, "{e}");
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match run(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}

pub fn run(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> std::result::Result<(), CliError> {
    match cmd {
        Command::MelExtract { input, out: dst, cfg } => mel_extract(&input, &dst, &cfg.resolve()?, out, err),
        Command::Vocode {
            input,
            weights,
            out: dst,
            cfg,
            dump_spectra,
            threads,
            format,
        } => {
            let cfg = cfg.resolve()?;
            let job = |out: &mut dyn Write| vocode(&input, &weights, &dst, &cfg, dump_spectra.as_deref(), format, out);
            match threads {
                Some(0) => Err(CliError::Usage("--threads must be positive".into())),
                Some(n) => {
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build()
                        .map_err(|e| CliError::Usage(e.to_string()))?;
                    let mut buf = Vec::new();
                    let res = pool.install(|| job(&mut buf));
                    out.write_all(&buf).map_err(io_err)?;
                    res
                }
                None => job(out),
            }
        }
        Command::RangeVocode {
            input,
            out: dst,
            cfg,
            format,
        } => range_vocode(&input, &dst, &cfg.resolve()?, format, out),
        Command::Count { cfg, seconds } => count(&cfg, seconds, out),
        Command::LossEval {
            reference,
            estimate,
            config,
        } => {
            let cfg = match config {
                Some(p) => ConfigFile::load(p)?,
                None => Preset::Ljspeech.config(),
            };
            loss_eval(&reference, &estimate, &cfg, out)
        }
        Command::GenWeights { cfg, seed, out: dst } => {
            let cfg = cfg.resolve()?;
            let bundle = init_random(&cfg.generator(), seed)?;
            save_weights(&bundle, &dst)?;
            writeln!(out, "tensors={}", bundle.len()).map_err(io_err)?;
            writeln!(out, "params={}", bundle.num_scalars()).map_err(io_err)?;
            writeln!(out, "seed={seed}").map_err(io_err)?;
            writeln!(out, "out={}", dst.display()).map_err(io_err)
        }
        Command::Verify {
            cfg,
            seed,
            weights,
            tolerance_scale,
            seconds,
        } => {
            if !(tolerance_scale.is_finite() && tolerance_scale > 0.0) {
                return Err(CliError::Usage("--tolerance-scale must be positive".into()));
            }
            let cfg = cfg.resolve()?;
            let bundle = match &weights {
                Some(p) => match load_weights(p, &cfg.generator()) {
                    Ok(b) => Some(b),
                    Err(e) => {
                        writeln!(out, "check=weights status=fail error=\"{e}\"").map_err(io_err)?;
                        writeln!(out, "result=fail checks=1 failed=1").map_err(io_err)?;
                        return Err(e.into());
                    }
                },
                None => None,
            };
            let opts = VerifyOptions {
                seed,
                tolerance_scale,
                seconds,
            };
            let checks = run_checks(&cfg, bundle.as_ref(), &opts)?;
            for c in &checks {
                writeln!(out, "{}", c.report_line()).map_err(io_err)?;
            }
            let failed: Vec<_> = checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
            writeln!(
                out,
                "result={} checks={} failed={}",
                if failed.is_empty() { "pass" } else { "fail" },
                checks.len(),
                failed.len()
            )
            .map_err(io_err)?;
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Invariant(failed.join(", ")))
            }
        }
    }
}

fn mel_tensor(mel: &Array2<f64>) -> Tensor {
    Tensor::from_matrix(mel)
}

fn mel_extract(
    input: &Path,
    dst: &Path,
    cfg: &ConfigFile,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> std::result::Result<(), CliError> {
    let audio = read_wav(input)?;
    if !audio.is_preset_rate() {
        let _ = writeln!(
            err,
            "warning: sample rate {} Hz is not one of {:?}",
            audio.sample_rate, PRESET_RATES
        );
    }
    if audio.sample_rate != cfg.sample_rate {
        return Err(Error::Config(format!(
            "input is {} Hz but the configuration expects {} Hz",
            audio.sample_rate, cfg.sample_rate
        ))
        .into());
    }
    let mel_cfg = cfg.mel();
    let fb = build_mel_filterbank(&mel_cfg)?;
    let mel = mel_spectrogram(&stft(&audio, &cfg.stft())?, &fb, mel_cfg.log_floor)?;
    save_tensor("mel", mel_tensor(&mel), dst)?;
    writeln!(out, "n_mels={}", mel.nrows()).map_err(io_err)?;
    writeln!(out, "frames={}", mel.ncols()).map_err(io_err)?;
    writeln!(out, "out={}", dst.display()).map_err(io_err)
}

fn read_mel(input: &Path, cfg: &ConfigFile) -> Result<Array2<f64>> {
    let (_, t) = load_tensor(input)?;
    let mel = t.to_matrix()?;
    if mel.nrows() != cfg.n_mels {
        return Err(Error::shape("mel rows", cfg.n_mels, mel.nrows()));
    }
    if mel.ncols() == 0 {
        return Err(Error::shape("mel frames", "at least 1", 0));
    }
    Ok(mel)
}

fn range_vocode(
    input: &Path,
    dst: &Path,
    cfg: &ConfigFile,
    format: OutFormat,
    out: &mut dyn Write,
) -> std::result::Result<(), CliError> {
    let mel = read_mel(input, cfg)?;
    let fb = build_mel_filterbank(&cfg.mel())?;
    let range = range_project(&mel, &fb)?;
    let target = crate::dsp::exp_mel(&mel);
    let consistency = degradation_error(&fb, &range.values, &target);
    let magnitude = range.values.mapv(|v| v.max(0.0));
    let clamped = degradation_error(&fb, &magnitude, &target);
    let spec = assemble_spectrum(&magnitude, &Array2::zeros(magnitude.raw_dim()))?;
    let stft_cfg = cfg.stft();
    let audio = istft(&spec, &stft_cfg, mel.ncols() * stft_cfg.hop, cfg.sample_rate)?;
    write_wav(dst, &audio, format.into())?;
    writeln!(out, "frames={}", mel.ncols()).map_err(io_err)?;
    writeln!(out, "samples={}", audio.len()).map_err(io_err)?;
    writeln!(out, "consistency_error={consistency:.6e}").map_err(io_err)?;
    writeln!(out, "clamped_consistency_error={clamped:.6e}").map_err(io_err)?;
    writeln!(out, "out={}", dst.display()).map_err(io_err)?;
    if consistency > 1e-4 {
        return Err(CliError::Invariant(format!("degradation consistency {consistency:.3e} > 1e-4")));
    }
    Ok(())
}

fn vocode(
    input: &Path,
    weights: &Path,
    dst: &Path,
    cfg: &ConfigFile,
    dump: Option<&Path>,
    format: OutFormat,
    out: &mut dyn Write,
) -> std::result::Result<(), CliError> {
    let mel = read_mel(input, cfg)?;
    let gen = cfg.generator();
    let bundle = load_weights(weights, &gen)?;
    let fb = build_mel_filterbank(&cfg.mel())?;
    let res = generator_forward(&mel, &fb, &gen, &bundle, &cfg.stft(), cfg.sample_rate)?;
    write_wav(dst, &res.audio, format.into())?;
    if let Some(dir) = dump {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, m) in [
            ("range", &res.range),
            ("null_estimate", &res.null_estimate),
            ("null_component", &res.null_component),
            ("magnitude", &res.magnitude),
            ("phase", &res.phase),
        ] {
            save_tensor(name, Tensor::from_matrix(m), dir.join(format!("{name}.bin")))?;
        }
    }
    let consistency = degradation_error(&fb, &res.unclamped, &crate::dsp::exp_mel(&mel));
    let clamped = res.unclamped.iter().filter(|&&v| v < 0.0).count();
    writeln!(out, "frames={}", mel.ncols()).map_err(io_err)?;
    writeln!(out, "samples={}", res.audio.len()).map_err(io_err)?;
    writeln!(out, "consistency_error={consistency:.6e}").map_err(io_err)?;
    writeln!(out, "clamped_bins={clamped}").map_err(io_err)?;
    writeln!(out, "out={}", dst.display()).map_err(io_err)?;
    if consistency > 1e-4 {
        return Err(CliError::Invariant(format!("degradation consistency {consistency:.3e} > 1e-4")));
    }
    Ok(())
}

fn count(args: &ConfigArgs, seconds: f64, out: &mut dyn Write) -> std::result::Result<(), CliError> {
    if !(seconds.is_finite() && seconds > 0.0) {
        return Err(CliError::Usage("--seconds must be positive".into()));
    }
    let cfg = args.resolve()?;
    let gen = cfg.generator();
    gen.validate()?;
    let params = count_params(&gen);
    let macs = count_macs(&gen, seconds, cfg.sample_rate, cfg.hop);
    let mut w = |s: String| writeln!(out, "{s}").map_err(io_err);
    w(format!("preset={}", cfg.preset.name()))?;
    w(format!("seconds={seconds}"))?;
    w(format!("frames={}", frames_for(seconds, cfg.sample_rate, cfg.hop)))?;
    w(format!("params={params}"))?;
    w(format!("macs={macs}"))?;
    if args.config.is_none() {
        let (p_target, m_target) = cfg.preset.published_targets();
        let p = params as f64 / 1e6;
        let m = macs as f64 / 1e9 * (5.0 / seconds);
        w(format!("params_target_m={p_target}"))?;
        w(format!("params_deviation_pct={:+.2}", 100.0 * (p - p_target) / p_target))?;
        w(format!("macs_per_5s_target_g={m_target}"))?;
        w(format!("macs_per_5s_deviation_pct={:+.2}", 100.0 * (m - m_target) / m_target))?;
    }
    Ok(())
}

enum Operand {
    Wav(AudioBuffer),
    Spec(ComplexSpectrogram),
}

fn load_operand(path: &Path) -> Result<Operand> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if !bytes.starts_with(MAGIC) {
        return Ok(Operand::Wav(crate::dsp::decode_wav(&bytes)?));
    }
    let (_, t) = load_tensor(path)?;
    if t.shape.len() != 3 || t.shape[0] != 2 {
        return Err(Error::shape("spectrogram tensor", "[2, F, T]", format!("{:?}", t.shape)));
    }
    let a = t.to_array();
    let plane = |i: usize| -> Result<Array2<f64>> {
        a.index_axis(Axis(0), i)
            .to_owned()
            .into_dimensionality()
            .map_err(|e| Error::Format(e.to_string()))
    };
    Ok(Operand::Spec(ComplexSpectrogram::new(plane(0)?, plane(1)?)?))
}

/// Brings both operands to (audio, spectrogram) pairs of equal size. Two
/// WAVs are cut to the shorter one; a tensor is synthesized to
/// `(T - 1) * hop` samples.
fn align_operands(
    r: Operand,
    e: Operand,
    cfg: &ConfigFile,
) -> Result<[(AudioBuffer, ComplexSpectrogram); 2]> {
    let stft_cfg = cfg.stft();
    let to_audio = |op: Operand| -> Result<AudioBuffer> {
        match op {
            Operand::Wav(a) => Ok(a),
            Operand::Spec(s) => istft(&s, &stft_cfg, s.n_frames().saturating_sub(1) * stft_cfg.hop, cfg.sample_rate),
        }
    };
    let keep_spec = |op: &Operand| match op {
        Operand::Spec(s) => Some(s.clone()),
        Operand::Wav(_) => None,
    };
    let (rs, es) = (keep_spec(&r), keep_spec(&e));
    let (ra, ea) = (to_audio(r)?, to_audio(e)?);
    if ra.sample_rate != ea.sample_rate {
        return Err(Error::Config(format!("sample rates differ: {} vs {}", ra.sample_rate, ea.sample_rate)));
    }
    let n = ra.len().min(ea.len());
    let cut = |a: &AudioBuffer| AudioBuffer::new(a.samples[..n].to_vec(), a.sample_rate);
    let (ra, ea) = (cut(&ra)?, cut(&ea)?);
    let rs = match rs {
        Some(s) => s,
        None => stft(&ra, &stft_cfg)?,
    };
    let es = match es {
        Some(s) => s,
        None => stft(&ea, &stft_cfg)?,
    };
    if rs.real.dim() != es.real.dim() {
        return Err(Error::shape(
            "loss-eval spectrograms",
            format!("{:?}", rs.real.dim()),
            format!("{:?}", es.real.dim()),
        ));
    }
    Ok([(ra, rs), (ea, es)])
}

fn loss_eval(reference: &Path, estimate: &Path, cfg: &ConfigFile, out: &mut dyn Write) -> std::result::Result<(), CliError> {
    let [(ra, rs), (ea, es)] = align_operands(load_operand(reference)?, load_operand(estimate)?, cfg)?;
    let stft_cfg: StftConfig = cfg.stft();
    let bank = PhaseKernelBank::new();
    let comps = LossComponents {
        amplitude: loss_log_amplitude(&rs.magnitude(), &es.magnitude(), cfg.log_floor)?,
        phase: loss_phase(&rs.phase(), &es.phase(), &bank)?,
        real_imag: loss_ri(&rs, &es)?,
        mel: loss_mel(&ra, &ea, &cfg.mel(), &stft_cfg)?,
        consistency: loss_consistency(&es, &stft_cfg)?,
        adversarial: 0.0,
        feature_match: 0.0,
    };
    let weights = cfg.loss_weights();
    let report = total_generator_loss(&comps, &weights)?;
    let label = if weights == LossWeights::unverified_defaults() { "unverified_defaults" } else { "custom" };
    writeln!(out, "loss_weights={label}").map_err(io_err)?;
    for (name, raw, weighted) in &report.terms[..5] {
        writeln!(out, "{name}={raw:.9e} weighted_{name}={weighted:.9e}").map_err(io_err)?;
    }
    writeln!(out, "adversarial=not_evaluated feature_match=not_evaluated").map_err(io_err)?;
    writeln!(out, "reconstruction_total={:.9e}", report.reconstruction).map_err(io_err)
}
