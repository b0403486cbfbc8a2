//! Time evolution of the spin qutrit under piecewise-constant two-channel
//! microwave drive.
//!
//! Everything is expressed in the interaction picture of the zero-field
//! Hamiltonian, with the rotating-wave approximation applied to each
//! channel. A pulse on a channel with carrier `c` contributes the coupling
//! `(Ω/2)(e^{iφ}|0⟩⟨q| + h.c.)` on its target transition and the detuning
//! `f_q − c` on the target level. Propagators are `exp(−i 2π H t)` with `H`
//! in Hz; every event has a constant generator, so each is integrated by a
//! single matrix exponential.

use nalgebra::{DMatrix, SMatrix, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pulse::{Channel, MwPulse, PulseEvent, PulseSequence};
use crate::readout::{self, ReadoutConfig};
use crate::spin::{Level, LevelStructure, Mat3, ZfsParams, C64};
use crate::state::{DensityMatrix3, StateError};

type Super9 = SMatrix<C64, 9, 9>;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Tolerances applied to every propagated state.
const OUT_HERMITIAN_TOL: f64 = 1e-9;
const OUT_TRACE_TOL: f64 = 1e-9;
const OUT_POSITIVITY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("channel {0} is driven by more than one pulse at once")]
    ChannelBusy(Channel),
    #[error("invalid duration {0} s")]
    InvalidDuration(f64),
    #[error("propagated state left the physical set after {duration:e} s: {source}")]
    Integrator {
        duration: f64,
        #[source]
        source: StateError,
    },
    #[error("{0} events are not handled by apply_pulse")]
    UnsupportedEvent(&'static str),
    #[error("at least 2 points required, got {0}")]
    TooFewPoints(usize),
    #[error("invalid nutation window {0} s")]
    InvalidWindow(f64),
    #[error("event {index} ({keyword}): {source}")]
    AtEvent {
        index: usize,
        keyword: &'static str,
        #[source]
        source: Box<SimError>,
    },
}

/// Carrier, Rabi frequency and dephasing rate of one microwave channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelCalibration {
    pub channel: Channel,
    pub carrier_hz: f64,
    pub rabi_hz: f64,
    /// Dephasing rate while this channel drives, 1/s.
    pub dephasing_rate_per_s: f64,
}

impl ChannelCalibration {
    pub fn new(channel: Channel, carrier_hz: f64, rabi_hz: f64, dephasing_rate_per_s: f64) -> Self {
        Self {
            channel,
            carrier_hz,
            rabi_hz,
            dephasing_rate_per_s,
        }
    }

    /// π-pulse length `1/(2Ω)`, seconds.
    pub fn pi_time(&self) -> f64 {
        0.5 / self.rabi_hz
    }

    pub fn is_valid(&self) -> bool {
        self.rabi_hz.is_finite()
            && self.rabi_hz > 0.0
            && self.carrier_hz.is_finite()
            && self.dephasing_rate_per_s.is_finite()
            && self.dephasing_rate_per_s >= 0.0
    }
}

/// Calibrations for both channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSet {
    pub mw1: ChannelCalibration,
    pub mw2: ChannelCalibration,
}

impl ChannelSet {
    pub fn get(&self, channel: Channel) -> &ChannelCalibration {
        match channel {
            Channel::Mw1 => &self.mw1,
            Channel::Mw2 => &self.mw2,
        }
    }

    pub fn get_mut(&mut self, channel: Channel) -> &mut ChannelCalibration {
        match channel {
            Channel::Mw1 => &mut self.mw1,
            Channel::Mw2 => &mut self.mw2,
        }
    }

    pub fn with_dephasing(mut self, r1: f64, r2: f64) -> Self {
        self.mw1.dephasing_rate_per_s = r1;
        self.mw2.dephasing_rate_per_s = r2;
        self
    }
}

/// Level structure plus channel calibrations: everything needed to turn a
/// pulse event into a generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Device {
    pub levels: LevelStructure,
    pub channels: ChannelSet,
}

/// Rabi frequency measured on the `|0⟩ ↔ |−1⟩` line.
pub const NV_RABI_MW1_HZ: f64 = 7.87e6;
/// Rabi frequency measured on the `|0⟩ ↔ |+1⟩` line.
pub const NV_RABI_MW2_HZ: f64 = 4.26e6;

impl Device {
    /// Both channels resonant with their lines, no dephasing.
    pub fn resonant(zfs: &ZfsParams, rabi_mw1: f64, rabi_mw2: f64) -> Self {
        let levels = LevelStructure::from_zfs(zfs);
        Self {
            levels,
            channels: ChannelSet {
                mw1: ChannelCalibration::new(Channel::Mw1, levels.f_low, rabi_mw1, 0.0),
                mw2: ChannelCalibration::new(Channel::Mw2, levels.f_high, rabi_mw2, 0.0),
            },
        }
    }

    /// The experiment's sample and Rabi frequencies, no dephasing.
    pub fn nv_ideal() -> Self {
        Self::resonant(&ZfsParams::nv_sample(), NV_RABI_MW1_HZ, NV_RABI_MW2_HZ)
    }

    pub fn with_dephasing(mut self, r1: f64, r2: f64) -> Self {
        self.channels = self.channels.with_dephasing(r1, r2);
        self
    }

    /// `carrier − f_target` for a channel.
    pub fn detuning(&self, channel: Channel) -> f64 {
        self.channels.get(channel).carrier_hz - self.levels.transition_to(channel.target())
    }

    pub fn drive(&self, pulse: &MwPulse) -> Drive {
        let cal = self.channels.get(pulse.channel);
        Drive {
            channel: pulse.channel,
            rabi_hz: cal.rabi_hz,
            phase: pulse.phase,
            carrier_hz: cal.carrier_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DephasingModel {
    None,
    #[default]
    Lindblad,
    Quasistatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOptions {
    pub dephasing_model: DephasingModel,
    pub crosstalk: bool,
    /// Sampling step for nutation sweeps, seconds.
    pub time_step_s: f64,
    pub quasistatic_samples: usize,
    /// Standard deviation of the quasistatic detuning, Hz.
    pub quasistatic_sigma_hz: f64,
    /// Pure dephasing rate of the qubit during waits, 1/s.
    pub idle_dephasing_rate_per_s: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dephasing_model: DephasingModel::Lindblad,
            crosstalk: false,
            time_step_s: 1e-9,
            quasistatic_samples: 32,
            quasistatic_sigma_hz: 2e6,
            idle_dephasing_rate_per_s: 0.0,
        }
    }
}

impl SimOptions {
    /// Coherent evolution, no crosstalk.
    pub fn ideal() -> Self {
        Self {
            dephasing_model: DephasingModel::None,
            crosstalk: false,
            ..Self::default()
        }
    }

    pub fn lindblad() -> Self {
        Self {
            dephasing_model: DephasingModel::Lindblad,
            ..Self::ideal()
        }
    }
}

/// One active channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drive {
    pub channel: Channel,
    pub rabi_hz: f64,
    pub phase: f64,
    pub carrier_hz: f64,
}

fn set_coupling(h: &mut Mat3, target: Level, rabi_hz: f64, phase: f64) {
    let c = C64::from_polar(0.5 * rabi_hz, phase);
    let (z, q) = (Level::Zero.index(), target.index());
    h[(z, q)] += c;
    h[(q, z)] += c.conj();
}

/// Rotating-frame drive Hamiltonian (Hz).
///
/// With `crosstalk` set and a single channel active, the channel also
/// couples the other transition with the same amplitude, detuned by the
/// line separation. With both channels active the cross terms rotate at the
/// carrier difference and are dropped.
pub fn drive_hamiltonian(
    drives: &[Drive],
    levels: &LevelStructure,
    crosstalk: bool,
) -> Result<Mat3, SimError> {
    let mut h = Mat3::zeros();
    for (i, d) in drives.iter().enumerate() {
        if drives[..i].iter().any(|o| o.channel == d.channel) {
            return Err(SimError::ChannelBusy(d.channel));
        }
    }
    for d in drives {
        let q = d.channel.target();
        set_coupling(&mut h, q, d.rabi_hz, d.phase);
        h[(q.index(), q.index())] += C64::from(levels.transition_to(q) - d.carrier_hz);
    }
    if crosstalk && drives.len() == 1 {
        let d = drives[0];
        let q = d.channel.other().target();
        set_coupling(&mut h, q, d.rabi_hz, d.phase);
        h[(q.index(), q.index())] += C64::from(levels.transition_to(q) - d.carrier_hz);
    }
    Ok(h)
}

/// Which coherences dephase during an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dephasing {
    /// Free evolution: the qubit coherence `ρ(0,−1)` decays at `rate`.
    Idle { rate: f64 },
    /// A channel is driving. The dephasing generator commutes with that
    /// channel's resonant drive, so the coherent motion is contracted by
    /// exactly `e^{−rate·t}`: for MW1 it acts along the drive axis of the
    /// qubit transition (giving the damped nutation `e^{−Rt} cos 2πΩt`);
    /// for MW2 it dephases the driven pair `{|0⟩, |+1⟩}` against `|−1⟩`,
    /// which damps the qubit coherence without trapping population in the
    /// auxiliary level.
    Driven {
        channel: Channel,
        phase: f64,
        rate: f64,
    },
}

impl Dephasing {
    pub const NONE: Dephasing = Dephasing::Idle { rate: 0.0 };

    pub fn rate(&self) -> f64 {
        match *self {
            Dephasing::Idle { rate } | Dephasing::Driven { rate, .. } => rate,
        }
    }

    /// Jump operator with the rate folded in, or `None` if the rate is 0.
    pub fn jump_operator(&self) -> Option<Mat3> {
        let rate = self.rate();
        if rate == 0.0 {
            return None;
        }
        let amp = C64::from((0.5 * rate).sqrt());
        let (p, z, m) = (
            Level::Plus.index(),
            Level::Zero.index(),
            Level::Minus.index(),
        );
        let mut l = Mat3::zeros();
        match *self {
            Dephasing::Idle { .. } => {
                l[(z, z)] = C64::from(1.0);
                l[(m, m)] = C64::from(-1.0);
            }
            Dephasing::Driven {
                channel: Channel::Mw1,
                phase,
                ..
            } => {
                let e = C64::from_polar(1.0, phase);
                l[(z, m)] = e;
                l[(m, z)] = e.conj();
            }
            Dephasing::Driven {
                channel: Channel::Mw2,
                ..
            } => {
                l[(p, p)] = C64::from(1.0);
                l[(z, z)] = C64::from(1.0);
                l[(m, m)] = C64::from(-1.0);
            }
        }
        Some(l * amp)
    }
}

fn check_duration(duration: f64) -> Result<(), SimError> {
    if duration.is_finite() && duration >= 0.0 {
        Ok(())
    } else {
        Err(SimError::InvalidDuration(duration))
    }
}

/// `exp(−i 2π H t)`.
pub fn unitary(h: &Mat3, duration: f64) -> Mat3 {
    (h * C64::new(0.0, -TWO_PI * duration)).exp()
}

// Column-stacking: vec(A X B) = (Bᵀ ⊗ A) vec(X), index i + 3j for X[i, j].
fn kron(a: &Mat3, b: &Mat3) -> Super9 {
    Super9::from_fn(|r, c| a[(r / 3, c / 3)] * b[(r % 3, c % 3)])
}

fn vectorize(m: &Mat3) -> SMatrix<C64, 9, 1> {
    SMatrix::<C64, 9, 1>::from_fn(|k, _| m[(k % 3, k / 3)])
}

fn unvectorize(v: &SMatrix<C64, 9, 1>) -> Mat3 {
    Mat3::from_fn(|i, j| v[i + 3 * j])
}

/// Lindbladian superoperator (1/s) for `H` in Hz and the given jump
/// operators.
pub fn lindbladian(h: &Mat3, jumps: &[Mat3]) -> Super9 {
    let id = Mat3::identity();
    let mut g = (kron(&id, h) - kron(&h.transpose(), &id)) * C64::new(0.0, -TWO_PI);
    for l in jumps {
        let ldl = l.adjoint() * l;
        g += kron(&l.conjugate(), l)
            - kron(&id, &ldl) * C64::from(0.5)
            - kron(&ldl.transpose(), &id) * C64::from(0.5);
    }
    g
}

/// Gauss–Hermite nodes and weights for the standard normal law
/// (Golub–Welsch).
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let n = n.max(1);
    let jacobi = DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut nodes: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = nodes.iter().map(|(_, w)| w).sum();
    nodes.iter_mut().for_each(|(_, w)| *w /= total);
    nodes
}

/// Common-mode detuning of both `|±1⟩` levels relative to `|0⟩`.
fn detuning_shift(delta_hz: f64) -> Mat3 {
    Mat3::from_diagonal(&Vector3::new(
        C64::from(delta_hz),
        C64::from(0.0),
        C64::from(delta_hz),
    ))
}

fn checked(rho: DensityMatrix3, duration: f64) -> Result<DensityMatrix3, SimError> {
    rho.check(OUT_HERMITIAN_TOL, OUT_TRACE_TOL, OUT_POSITIVITY_TOL)
        .map_err(|source| SimError::Integrator { duration, source })?;
    Ok(rho)
}

/// Evolves `rho` for `duration` seconds under the constant Hamiltonian `h`.
///
/// * `None`: `U ρ U†` with `U = exp(−i 2π H t)`.
/// * `Lindblad`: exact exponential of the 9×9 Lindbladian with the jump
///   operator described by `dephasing`.
/// * `Quasistatic`: average of unitary evolutions over Gauss–Hermite
///   samples of a static common-mode detuning of width
///   `quasistatic_sigma_hz`; `dephasing` is ignored.
pub fn propagate(
    rho: &DensityMatrix3,
    h: &Mat3,
    duration: f64,
    dephasing: Dephasing,
    opts: &SimOptions,
) -> Result<DensityMatrix3, SimError> {
    check_duration(duration)?;
    let out = match opts.dephasing_model {
        DephasingModel::None => rho.conjugate(&unitary(h, duration)),
        DephasingModel::Lindblad => match dephasing.jump_operator() {
            None => rho.conjugate(&unitary(h, duration)),
            Some(l) => {
                let prop = (lindbladian(h, &[l]) * C64::from(duration)).exp();
                let v = prop * vectorize(rho.matrix());
                DensityMatrix3::from_matrix_unchecked(unvectorize(&v))
            }
        },
        DephasingModel::Quasistatic => {
            let nodes = gauss_hermite(opts.quasistatic_samples);
            let samples: Vec<DensityMatrix3> = nodes
                .iter()
                .map(|&(x, _)| {
                    let hk = h + detuning_shift(x * opts.quasistatic_sigma_hz);
                    rho.conjugate(&unitary(&hk, duration))
                })
                .collect();
            DensityMatrix3::mixture(nodes.iter().map(|n| n.1).zip(samples.iter()))
        }
    };
    checked(out, duration)
}

/// Ideal propagator of one microwave pulse.
pub fn pulse_unitary(pulse: &MwPulse, device: &Device, crosstalk: bool) -> Result<Mat3, SimError> {
    let cal = device.channels.get(pulse.channel);
    let duration = pulse.duration_s(cal.rabi_hz);
    check_duration(duration)?;
    let h = drive_hamiltonian(&[device.drive(pulse)], &device.levels, crosstalk)?;
    Ok(unitary(&h, duration))
}

/// Hamiltonian, duration and dephasing of a pulse or wait.
fn event_generator(
    ev: &PulseEvent,
    device: &Device,
    opts: &SimOptions,
) -> Result<(Mat3, f64, Dephasing), SimError> {
    match ev {
        PulseEvent::Mw(p) => {
            let cal = device.channels.get(p.channel);
            let h = drive_hamiltonian(&[device.drive(p)], &device.levels, opts.crosstalk)?;
            let dephasing = Dephasing::Driven {
                channel: p.channel,
                phase: p.phase,
                rate: cal.dephasing_rate_per_s,
            };
            Ok((h, p.duration_s(cal.rabi_hz), dephasing))
        }
        PulseEvent::Wait(t) => Ok((
            Mat3::zeros(),
            t.seconds(),
            Dephasing::Idle {
                rate: opts.idle_dephasing_rate_per_s,
            },
        )),
        PulseEvent::Laser(_) => Err(SimError::UnsupportedEvent("LASER")),
        PulseEvent::Readout(_) => Err(SimError::UnsupportedEvent("READOUT")),
    }
}

/// Applies a microwave pulse or a wait.
pub fn apply_pulse(
    rho: &DensityMatrix3,
    ev: &PulseEvent,
    device: &Device,
    opts: &SimOptions,
) -> Result<DensityMatrix3, SimError> {
    let (h, duration, dephasing) = event_generator(ev, device, opts)?;
    propagate(rho, &h, duration, dephasing, opts)
}

fn at_event(index: usize, ev: &PulseEvent) -> impl FnOnce(SimError) -> SimError + '_ {
    move |e| SimError::AtEvent {
        index,
        keyword: ev.keyword(),
        source: Box::new(e),
    }
}

/// Runs a whole sequence. `LASER` re-polarizes via
/// [`readout::initialize_state`]; `READOUT` leaves the state unchanged.
///
/// In the quasistatic model each detuning sample is held for the entire
/// sequence and the resulting states are averaged.
pub fn run_sequence(
    rho0: &DensityMatrix3,
    seq: &PulseSequence,
    device: &Device,
    opts: &SimOptions,
    readout_cfg: &ReadoutConfig,
) -> Result<DensityMatrix3, SimError> {
    if opts.dephasing_model == DephasingModel::Quasistatic {
        return run_quasistatic(rho0, seq, device, opts, readout_cfg);
    }
    seq.events
        .iter()
        .enumerate()
        .try_fold(*rho0, |rho, (i, ev)| match ev {
            PulseEvent::Laser(_) => Ok(readout::initialize_state(readout_cfg)),
            PulseEvent::Readout(_) => Ok(rho),
            _ => apply_pulse(&rho, ev, device, opts).map_err(at_event(i, ev)),
        })
}

fn run_quasistatic(
    rho0: &DensityMatrix3,
    seq: &PulseSequence,
    device: &Device,
    opts: &SimOptions,
    readout_cfg: &ReadoutConfig,
) -> Result<DensityMatrix3, SimError> {
    let nodes = gauss_hermite(opts.quasistatic_samples);
    let coherent = SimOptions {
        dephasing_model: DephasingModel::None,
        ..*opts
    };
    let finals = nodes
        .iter()
        .map(|&(x, _)| {
            let shift = detuning_shift(x * opts.quasistatic_sigma_hz);
            seq.events
                .iter()
                .enumerate()
                .try_fold(*rho0, |rho, (i, ev)| match ev {
                    PulseEvent::Laser(_) => Ok(readout::initialize_state(readout_cfg)),
                    PulseEvent::Readout(_) => Ok(rho),
                    _ => {
                        let (h, duration, _) =
                            event_generator(ev, device, &coherent).map_err(at_event(i, ev))?;
                        check_duration(duration).map_err(at_event(i, ev))?;
                        Ok(rho.conjugate(&unitary(&(h + shift), duration)))
                    }
                })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let out = DensityMatrix3::mixture(nodes.iter().map(|n| n.1).zip(finals.iter()));
    checked(out, 0.0)
}

/// Simulated nutation: initialize, drive `channel` for `t`, read out, for
/// `n_points` equally spaced `t ∈ [0, t_max]`. Returns `(t, signal)`.
pub fn nutation_curve(
    device: &Device,
    channel: Channel,
    t_max: f64,
    n_points: usize,
    opts: &SimOptions,
    readout_cfg: &ReadoutConfig,
) -> Result<Vec<(f64, f64)>, SimError> {
    if n_points < 2 {
        return Err(SimError::TooFewPoints(n_points));
    }
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(SimError::InvalidWindow(t_max));
    }
    let rho0 = readout::initialize_state(readout_cfg);
    let step = t_max / (n_points - 1) as f64;
    (0..n_points)
        .into_par_iter()
        .map(|k| {
            let t = k as f64 * step;
            let rho = drive_for(&rho0, channel, 0.0, t, device, opts)?;
            Ok((
                t,
                readout::fluorescence_signal(&rho, readout_cfg).normalized,
            ))
        })
        .collect()
}

/// Drives `channel` with phase `phase` for exactly `t` seconds, without the
/// picosecond rounding of sequence durations.
pub fn drive_for(
    rho: &DensityMatrix3,
    channel: Channel,
    phase: f64,
    t: f64,
    device: &Device,
    opts: &SimOptions,
) -> Result<DensityMatrix3, SimError> {
    let pulse = MwPulse {
        channel,
        angle: None,
        duration: None,
        phase,
    };
    let (h, _, dephasing) = event_generator(&PulseEvent::Mw(pulse), device, opts)?;
    propagate(rho, &h, t, dephasing, opts)
}
