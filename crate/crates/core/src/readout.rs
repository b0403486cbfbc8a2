//! Optical initialization, fluorescence readout, shot noise and dephasing
//! compensation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::ChannelSet;
use crate::pulse::PulseSequence;
use crate::spin::{Level, Mat3, C64};
use crate::state::DensityMatrix3;

#[derive(Debug, Error, PartialEq)]
pub enum ReadoutError {
    #[error("initialization fidelity must be in (0, 1], got {0}")]
    InitFidelity(f64),
    #[error("count rates must satisfy rate_bright > rate_dark >= 0 (got {bright}, {dark})")]
    Rates { bright: f64, dark: f64 },
    #[error("readout window must be positive, got {0} s")]
    Window(f64),
    #[error("number of averages must be positive")]
    NoAverages,
    #[error("normalized signal {0} outside [0, 1]")]
    SignalOutOfRange(f64),
    #[error("visibility must be in (0, 1], got {0}")]
    Visibility(f64),
    #[error("target visibility {0} is not reachable")]
    Unreachable(f64),
}

/// Readout parameters.
///
/// Count rates and window are free defaults: every normalized quantity is
/// independent of them, only shot-noise magnitudes depend on them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutConfig {
    /// Probability of ending in `|0⟩` after the polarizing laser pulse.
    pub init_fidelity: f64,
    /// Count rate for `|0⟩`, 1/s.
    pub rate_bright_per_s: f64,
    /// Count rate for `|±1⟩`, 1/s.
    pub rate_dark_per_s: f64,
    pub window_s: f64,
    pub n_averages: u64,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self {
            init_fidelity: 0.9,
            rate_bright_per_s: 2.0e5,
            rate_dark_per_s: 1.4e5,
            window_s: 300e-9,
            n_averages: 50_000_000,
        }
    }
}

impl ReadoutConfig {
    /// Perfect polarization, otherwise default.
    pub fn ideal() -> Self {
        Self {
            init_fidelity: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ReadoutError> {
        if !(self.init_fidelity > 0.0 && self.init_fidelity <= 1.0) {
            return Err(ReadoutError::InitFidelity(self.init_fidelity));
        }
        if !(self.rate_dark_per_s >= 0.0
            && self.rate_bright_per_s > self.rate_dark_per_s
            && self.rate_bright_per_s.is_finite())
        {
            return Err(ReadoutError::Rates {
                bright: self.rate_bright_per_s,
                dark: self.rate_dark_per_s,
            });
        }
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            return Err(ReadoutError::Window(self.window_s));
        }
        if self.n_averages == 0 {
            return Err(ReadoutError::NoAverages);
        }
        Ok(())
    }

    /// Expected total counts for a normalized signal.
    pub fn mean_counts(&self, normalized: f64) -> f64 {
        let rate =
            self.rate_dark_per_s + normalized * (self.rate_bright_per_s - self.rate_dark_per_s);
        self.n_averages as f64 * self.window_s * rate
    }

    fn counts_to_normalized(&self, counts: f64) -> f64 {
        let rate = counts / (self.n_averages as f64 * self.window_s);
        (rate - self.rate_dark_per_s) / (self.rate_bright_per_s - self.rate_dark_per_s)
    }

    /// Standard deviation of the shot-sampled normalized signal.
    pub fn shot_sigma(&self, normalized: f64) -> f64 {
        self.mean_counts(normalized).sqrt()
            / (self.n_averages as f64
                * self.window_s
                * (self.rate_bright_per_s - self.rate_dark_per_s))
    }
}

/// State after the polarizing laser pulse: `p|0⟩⟨0|` plus the remainder
/// split evenly over `|±1⟩`, with no coherences.
pub fn initialize_state(cfg: &ReadoutConfig) -> DensityMatrix3 {
    let p = cfg.init_fidelity;
    let rest = 0.5 * (1.0 - p);
    let mut m = Mat3::zeros();
    m[(Level::Plus.index(), Level::Plus.index())] = C64::from(rest);
    m[(Level::Zero.index(), Level::Zero.index())] = C64::from(p);
    m[(Level::Minus.index(), Level::Minus.index())] = C64::from(rest);
    DensityMatrix3::from_matrix_unchecked(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fluorescence {
    /// Counts per second.
    pub raw_rate: f64,
    /// `(raw − dark)/(bright − dark)`, equal to the `|0⟩` population.
    pub normalized: f64,
}

pub fn fluorescence_signal(rho: &DensityMatrix3, cfg: &ReadoutConfig) -> Fluorescence {
    let p0 = rho.population(Level::Zero);
    let raw_rate = p0 * cfg.rate_bright_per_s + (1.0 - p0) * cfg.rate_dark_per_s;
    Fluorescence {
        raw_rate,
        normalized: p0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShotSample {
    pub counts: u64,
    pub normalized: f64,
}

/// Poisson-samples the photon total accumulated over `n_averages`
/// repetitions and renormalizes it. Deterministic for a given seed.
pub fn simulate_shots(
    normalized: f64,
    cfg: &ReadoutConfig,
    seed: u64,
) -> Result<ShotSample, ReadoutError> {
    if !(0.0..=1.0).contains(&normalized) {
        return Err(ReadoutError::SignalOutOfRange(normalized));
    }
    cfg.validate()?;
    let mean = cfg.mean_counts(normalized);
    let counts = if mean > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let poisson = Poisson::new(mean).expect("positive finite mean");
        poisson.sample(&mut rng) as u64
    } else {
        0
    };
    Ok(ShotSample {
        counts,
        normalized: cfg.counts_to_normalized(counts as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Compensated {
    pub value: f64,
    pub clipped: bool,
}

/// Undoes a contraction toward the midpoint: `0.5 + (s − 0.5)/V`, clipped
/// to `[0, 1]`.
pub fn compensate_dephasing(raw_signal: f64, visibility: f64) -> Result<Compensated, ReadoutError> {
    if !(visibility > 0.0 && visibility <= 1.0) {
        return Err(ReadoutError::Visibility(visibility));
    }
    let value = 0.5 + (raw_signal - 0.5) / visibility;
    let clamped = value.clamp(0.0, 1.0);
    Ok(Compensated {
        value: clamped,
        clipped: clamped != value,
    })
}

/// `exp(−Σ R_ch · duration)` over the microwave pulses of `program`.
pub fn predicted_visibility(program: &PulseSequence, channels: &ChannelSet) -> f64 {
    let exponent: f64 = program
        .mw_pulses()
        .map(|p| {
            let cal = channels.get(p.channel);
            cal.dephasing_rate_per_s * p.duration_s(cal.rabi_hz)
        })
        .sum();
    (-exponent).exp()
}

/// Mean predicted visibility over several programs.
pub fn mean_visibility(programs: &[PulseSequence], channels: &ChannelSet) -> f64 {
    programs
        .iter()
        .map(|p| predicted_visibility(p, channels))
        .sum::<f64>()
        / programs.len() as f64
}

/// Finds the common rate `R = R₁ = R₂` for which the mean predicted
/// visibility over `programs` equals `target`, by bisection.
pub fn calibrate_equal_rates(
    programs: &[PulseSequence],
    channels: &ChannelSet,
    target: f64,
) -> Result<f64, ReadoutError> {
    if !(target > 0.0 && target <= 1.0) || programs.is_empty() {
        return Err(ReadoutError::Visibility(target));
    }
    let at = |r: f64| mean_visibility(programs, &channels.with_dephasing(r, r));
    if target == 1.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while at(hi) > target {
        hi *= 2.0;
        if hi > 1e15 {
            return Err(ReadoutError::Unreachable(target));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
