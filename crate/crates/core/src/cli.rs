//! `nvqutrit` command line.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{
    fft_rabi_frequency, fit_damped_sine_with, DampedSineFit, FitMode, FitOptions,
};
use crate::config::RunConfig;
use crate::dsl;
use crate::engine::{nutation_curve, run_sequence, SimOptions};
use crate::pulse::Channel;
use crate::rdj::{build_rdj_program, run_rdj, Classification, OracleId, RdjResult};
use crate::readout::{
    compensate_dephasing, fluorescence_signal, initialize_state, predicted_visibility,
    ReadoutConfig,
};
use crate::spin::Level;

#[derive(Debug, Parser)]
#[command(
    name = "nvqutrit",
    version,
    about = "NV-center spin qutrit pulse simulator"
)]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a nutation curve, fit it, and write CSV + fit JSON.
    Nutation(NutationArgs),
    /// Run the Deutsch-Jozsa programs.
    Rdj(RdjArgs),
    /// Execute a `.seq` file and print the final state as JSON.
    Run(RunArgs),
    /// Fit a damped cosine to a `t_s,signal` CSV.
    Fit(FitArgs),
    /// FFT Rabi-frequency estimate of a `t_s,signal` CSV.
    Fft(FftArgs),
    /// Print configuration.
    Config(ConfigArgs),
}

#[derive(Debug, Args)]
pub struct NutationArgs {
    #[arg(long, value_parser = parse_channel)]
    pub channel: Channel,
    /// Sweep length, seconds.
    #[arg(long, default_value_t = 1e-6)]
    pub t_max: f64,
    #[arg(long, default_value_t = 200)]
    pub n_points: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Fit with offset and amplitude fixed to 0.5.
    #[arg(long)]
    pub normalized: bool,
}

#[derive(Debug, Args)]
pub struct RdjArgs {
    /// 1, 2, 3, 4 or `all`.
    #[arg(long, default_value = "all", value_parser = parse_oracles)]
    pub oracle: OracleSelection,
    /// No dephasing, perfect initialization.
    #[arg(long, conflicts_with = "dephased")]
    pub ideal: bool,
    /// Configured dephasing with perfect initialization. Without `--ideal`
    /// or `--dephased` the full configured model is used.
    #[arg(long)]
    pub dephased: bool,
    /// Replace each signal by a Poisson-sampled one.
    #[arg(long)]
    pub shots: bool,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Add a column undoing the predicted dephasing visibility.
    #[arg(long)]
    pub compensate: bool,
    /// Directory for `rdj.csv` (and `rdj_shots.csv`).
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub sequence: PathBuf,
    /// Coherent evolution and perfect initialization.
    #[arg(long)]
    pub ideal: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub normalized: bool,
    #[arg(long)]
    pub free_phase: bool,
}

#[derive(Debug, Args)]
pub struct FftArgs {
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Built-in defaults instead of the effective configuration.
    #[arg(long)]
    pub print_defaults: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSelection(pub Vec<OracleId>);

fn parse_channel(s: &str) -> Result<Channel, String> {
    s.parse()
}

fn parse_oracles(s: &str) -> Result<OracleSelection, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(OracleSelection(OracleId::ALL.to_vec()));
    }
    s.parse::<u8>()
        .ok()
        .and_then(OracleId::new)
        .map(|id| OracleSelection(vec![id]))
        .ok_or_else(|| format!("unknown oracle `{s}` (expected 1, 2, 3, 4 or all)"))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Nutation(a) => cmd_nutation(&config, &a, out),
        Command::Rdj(a) => cmd_rdj(&config, &a, out),
        Command::Run(a) => cmd_run(&config, &a, out),
        Command::Fit(a) => cmd_fit(&a, out),
        Command::Fft(a) => cmd_fft(&a, out),
        Command::Config(a) => {
            let cfg = if a.print_defaults {
                RunConfig::default()
            } else {
                config
            };
            out.write_all(cfg.to_toml().as_bytes())?;
            Ok(())
        }
    }
}

fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("cannot create {}", path.display()))
}

fn write_json_line<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn read_signal_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t_s", "signal"] {
        bail!("{}: expected header `t_s,signal`", path.display());
    }
    let (mut t, mut y) = (Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: malformed row", path.display()))?;
        let field = |k: usize| -> Result<f64> {
            record
                .get(k)
                .and_then(|v| v.parse().ok())
                .with_context(|| format!("{}: line {}: not a number", path.display(), i + 2))
        };
        t.push(field(0)?);
        y.push(field(1)?);
    }
    Ok((t, y))
}

fn write_signal_csv(path: &Path, curve: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["t_s", "signal"])?;
    for (t, s) in curve {
        w.write_record([t.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct NutationReport {
    channel: Channel,
    #[serde(flatten)]
    fit: DampedSineFit,
    rabi_frequency_hz: f64,
    fft_frequency_hz: f64,
}

fn cmd_nutation(config: &RunConfig, a: &NutationArgs, out: &mut dyn Write) -> Result<()> {
    if a.n_points < 2 {
        bail!("≥ 2 points required (got {})", a.n_points);
    }
    let curve = nutation_curve(
        &config.to_device(),
        a.channel,
        a.t_max,
        a.n_points,
        &config.sim,
        &config.readout,
    )?;
    let (t, y): (Vec<f64>, Vec<f64>) = curve.iter().copied().unzip();
    let fft = fft_rabi_frequency(&t, &y)?;
    let opts = FitOptions {
        mode: if a.normalized {
            FitMode::Normalized
        } else {
            FitMode::Free
        },
        ..FitOptions::default()
    };
    let fit = fit_damped_sine_with(&t, &y, None, &opts)?;

    let stem = format!("nutation_{}", a.channel.name().to_ascii_lowercase());
    std::fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("cannot create {}", a.out_dir.display()))?;
    write_signal_csv(&a.out_dir.join(format!("{stem}.csv")), &curve)?;
    let report = NutationReport {
        channel: a.channel,
        fit,
        rabi_frequency_hz: fit.frequency_hz(),
        fft_frequency_hz: fft,
    };
    let json_path = a.out_dir.join(format!("{stem}_fit.json"));
    let mut f = create(&json_path)?;
    serde_json::to_writer_pretty(&mut f, &report)?;
    writeln!(f)?;
    write_json_line(out, &report)
}

#[derive(Serialize)]
struct RdjRecord {
    #[serde(flatten)]
    result: RdjResult,
    visibility: f64,
    signal_compensated: Option<f64>,
    compensation_clipped: Option<bool>,
    seed: Option<u64>,
}

fn cmd_rdj(config: &RunConfig, a: &RdjArgs, out: &mut dyn Write) -> Result<()> {
    let mut device = config.to_device();
    let (opts, readout_cfg) = if a.ideal {
        device.channels = device.channels.with_dephasing(0.0, 0.0);
        (SimOptions::ideal(), ReadoutConfig::ideal())
    } else if a.dephased {
        let readout_cfg = ReadoutConfig {
            init_fidelity: 1.0,
            ..config.readout
        };
        (config.sim, readout_cfg)
    } else {
        (config.sim, config.readout)
    };
    let base_seed = a.seed.unwrap_or(config.seed);

    let mut records = Vec::new();
    for &id in &a.oracle.0 {
        let mut result = run_rdj(id, &device, &opts, &readout_cfg)?;
        let mut seed = None;
        if a.shots {
            let s = base_seed.wrapping_add(u64::from(id.index()));
            result = result.with_shots(&readout_cfg, s)?;
            seed = Some(s);
        }
        let visibility = predicted_visibility(&build_rdj_program(id), &device.channels);
        let compensated = if a.compensate {
            Some(compensate_dephasing(result.signal, visibility)?)
        } else {
            None
        };
        records.push(RdjRecord {
            result,
            visibility,
            signal_compensated: compensated.map(|c| c.value),
            compensation_clipped: compensated.map(|c| c.clipped),
            seed,
        });
    }

    std::fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("cannot create {}", a.out_dir.display()))?;
    let mut w = csv::Writer::from_writer(create(&a.out_dir.join("rdj.csv"))?);
    w.write_record([
        "oracle",
        "p0",
        "signal",
        "signal_compensated",
        "classification",
    ])?;
    for r in &records {
        w.write_record([
            r.result.oracle.to_string(),
            r.result.p0.to_string(),
            r.result.signal.to_string(),
            r.signal_compensated
                .map(|v| v.to_string())
                .unwrap_or_default(),
            r.result.classification.to_string(),
        ])?;
    }
    w.flush()?;

    if a.shots {
        let mut w = csv::Writer::from_writer(create(&a.out_dir.join("rdj_shots.csv"))?);
        w.write_record(["oracle", "seed", "counts", "normalized"])?;
        for r in &records {
            w.write_record([
                r.result.oracle.to_string(),
                r.seed.unwrap_or_default().to_string(),
                r.result.raw_counts.unwrap_or_default().to_string(),
                r.result.signal.to_string(),
            ])?;
        }
        w.flush()?;
    }

    for r in &records {
        write_json_line(out, r)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FinalState {
    name: String,
    /// Basis order of the matrices and populations.
    basis: [&'static str; 3],
    rho_re: [[f64; 3]; 3],
    rho_im: [[f64; 3]; 3],
    populations: [f64; 3],
    signal: f64,
    classification: Classification,
}

fn cmd_run(config: &RunConfig, a: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let bytes = std::fs::read(&a.sequence)
        .with_context(|| format!("cannot read {}", a.sequence.display()))?;
    let mut seq = dsl::parse_bytes(&bytes).with_context(|| a.sequence.display().to_string())?;
    if seq.name.is_empty() {
        if let Some(stem) = a.sequence.file_stem() {
            seq.name = stem.to_string_lossy().into_owned();
        }
    }
    let mut device = config.to_device();
    if let Err(violations) = dsl::validate(&seq, &device.channels) {
        let list: Vec<String> = violations
            .iter()
            .map(|v| format!("event {}: {}", v.index + 1, v.message))
            .collect();
        bail!(
            "{}: invalid sequence:\n  {}",
            a.sequence.display(),
            list.join("\n  ")
        );
    }
    let (opts, readout_cfg) = if a.ideal {
        device.channels = device.channels.with_dephasing(0.0, 0.0);
        (SimOptions::ideal(), ReadoutConfig::ideal())
    } else {
        (config.sim, config.readout)
    };
    let rho0 = initialize_state(&readout_cfg);
    let rho = run_sequence(&rho0, &seq, &device, &opts, &readout_cfg)?;
    let m = rho.matrix();
    let signal = fluorescence_signal(&rho, &readout_cfg).normalized;
    let state = FinalState {
        name: seq.name.clone(),
        basis: ["+1", "0", "-1"],
        rho_re: std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)].re)),
        rho_im: std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)].im)),
        populations: Level::ALL.map(|l| rho.population(l)),
        signal,
        classification: crate::rdj::classify(signal, crate::rdj::DEFAULT_THRESHOLD),
    };
    write_json_line(out, &state)
}

fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let (t, y) = read_signal_csv(&a.input)?;
    let opts = FitOptions {
        mode: if a.normalized {
            FitMode::Normalized
        } else {
            FitMode::Free
        },
        free_phase: a.free_phase,
        ..FitOptions::default()
    };
    let fit = fit_damped_sine_with(&t, &y, None, &opts)?;
    write_json_line(out, &fit)
}

fn cmd_fft(a: &FftArgs, out: &mut dyn Write) -> Result<()> {
    let (t, y) = read_signal_csv(&a.input)?;
    let f = fft_rabi_frequency(&t, &y)?;
    write_json_line(out, &serde_json::json!({ "frequency_hz": f }))
}
