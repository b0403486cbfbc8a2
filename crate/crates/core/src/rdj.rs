//! Refined Deutsch-Jozsa on the spin qutrit.
//!
//! The qubit is `{|0⟩, |−1⟩}` (z = 0 ↦ `|0⟩`, z = 1 ↦ `|−1⟩`) and `|+1⟩` is
//! the auxiliary level. Selective MW1 π/2 pulses stand in for the
//! Hadamards, which swaps the usual outcome: constant functions end dark
//! (`p0 = 0`), balanced ones bright (`p0 = 1`).
//!
//! Oracles are built from 2π pulses only. A 2π pulse on MW1 is `−I` on the
//! qubit; a 2π pulse on MW2 takes `|0⟩` around the auxiliary transition and
//! back with a sign flip, i.e. `diag(−1, 1)` on the qubit.

use std::fmt;

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::dsl::merge_adjacent;
use crate::engine::{pulse_unitary, run_sequence, Device, SimError, SimOptions};
use crate::pulse::{Channel, FlipAngle, PulseEvent, PulseSequence, TimeSpan};
use crate::readout::{self, ReadoutConfig, ReadoutError};
use crate::spin::{Level, Mat3, C64};

pub type Mat2 = Matrix2<C64>;

/// Selects one of the four one-bit functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OracleId(u8);

impl OracleId {
    pub const ALL: [OracleId; 4] = [OracleId(1), OracleId(2), OracleId(3), OracleId(4)];

    pub fn new(index: u8) -> Option<Self> {
        (1..=4).contains(&index).then_some(OracleId(index))
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// f₁ = 0, f₂ = 1, f₃(z) = z, f₄(z) = 1 − z.
    pub fn eval(self, z: u8) -> u8 {
        debug_assert!(z <= 1);
        match self.0 {
            1 => 0,
            2 => 1,
            3 => z,
            _ => 1 - z,
        }
    }

    pub fn is_constant(self) -> bool {
        self.eval(0) == self.eval(1)
    }

    pub fn expected(self) -> Classification {
        if self.is_constant() {
            Classification::Constant
        } else {
            Classification::Balanced
        }
    }
}

impl fmt::Display for OracleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for OracleId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Constant,
    Balanced,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Constant => "constant",
            Classification::Balanced => "balanced",
        })
    }
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Constant iff `signal < threshold`.
pub fn classify(signal: f64, threshold: f64) -> Classification {
    if signal < threshold {
        Classification::Constant
    } else {
        Classification::Balanced
    }
}

/// `V_f|z⟩ = (−1)^{f(z)}|z⟩` on `(|0⟩, |−1⟩)`.
pub fn oracle_matrix(id: OracleId) -> Mat2 {
    let sign = |z: u8| C64::from(if id.eval(z) == 0 { 1.0 } else { -1.0 });
    Mat2::new(sign(0), C64::from(0.0), C64::from(0.0), sign(1))
}

/// The 2π-pulse fragment realizing `V_f` up to a global phase.
pub fn oracle_sequence(id: OracleId) -> Vec<PulseEvent> {
    let two_pi = |ch| PulseEvent::mw_angle(ch, FlipAngle::TWO_PI);
    match id.0 {
        1 => vec![],
        2 => vec![two_pi(Channel::Mw1)],
        3 => vec![two_pi(Channel::Mw1), two_pi(Channel::Mw2)],
        _ => vec![two_pi(Channel::Mw2)],
    }
}

pub const INIT_LASER: TimeSpan = TimeSpan::from_us(5);
pub const INIT_WAIT: TimeSpan = TimeSpan::from_us(5);
pub const DETECTION_WINDOW: TimeSpan = TimeSpan::from_ns(300);

/// Polarize, π/2, oracle, π/2, detect; with adjacent pulses merged.
pub fn build_rdj_program(id: OracleId) -> PulseSequence {
    let half = PulseEvent::mw_angle(Channel::Mw1, FlipAngle::HALF_PI);
    let mut events = vec![
        PulseEvent::Laser(INIT_LASER),
        PulseEvent::Wait(INIT_WAIT),
        half,
    ];
    events.extend(oracle_sequence(id));
    events.push(half);
    events.push(PulseEvent::Readout(DETECTION_WINDOW));
    merge_adjacent(&PulseSequence::new(format!("rdj oracle {id}"), events))
}

pub fn all_programs() -> Vec<PulseSequence> {
    OracleId::ALL
        .iter()
        .map(|&id| build_rdj_program(id))
        .collect()
}

/// Ideal 3×3 propagator of the oracle fragment (no crosstalk).
pub fn oracle_unitary(id: OracleId, device: &Device) -> Result<Mat3, SimError> {
    oracle_sequence(id)
        .iter()
        .filter_map(PulseEvent::as_mw)
        .try_fold(Mat3::identity(), |acc, p| {
            Ok(pulse_unitary(p, device, false)? * acc)
        })
}

/// Block of `u` acting on `(|0⟩, |−1⟩)`.
pub fn qubit_block(u: &Mat3) -> Mat2 {
    let (z, m) = (Level::Zero.index(), Level::Minus.index());
    Mat2::new(u[(z, z)], u[(z, m)], u[(m, z)], u[(m, m)])
}

/// Largest probability of ending in `|+1⟩` from a qubit basis state.
pub fn auxiliary_leakage(u: &Mat3) -> f64 {
    let p = Level::Plus.index();
    [Level::Zero, Level::Minus]
        .iter()
        .map(|l| u[(p, l.index())].norm_sqr())
        .fold(0.0, f64::max)
}

/// `min_θ ‖a − e^{iθ} b‖_F`.
pub fn phase_aligned_distance(a: &Mat2, b: &Mat2) -> f64 {
    let overlap = (b.adjoint() * a).trace();
    let phase = if overlap.norm() > 0.0 {
        overlap / C64::from(overlap.norm())
    } else {
        C64::from(1.0)
    };
    (a - b * phase).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RdjResult {
    pub oracle: OracleId,
    /// Population of `|0⟩` at detection.
    pub p0: f64,
    /// Normalized fluorescence (shot-sampled when `raw_counts` is set).
    pub signal: f64,
    pub classification: Classification,
    pub raw_counts: Option<u64>,
}

impl RdjResult {
    /// Replaces the signal by a Poisson-sampled one and reclassifies.
    pub fn with_shots(self, cfg: &ReadoutConfig, seed: u64) -> Result<Self, ReadoutError> {
        let shot = readout::simulate_shots(self.signal.clamp(0.0, 1.0), cfg, seed)?;
        Ok(Self {
            signal: shot.normalized,
            classification: classify(shot.normalized, DEFAULT_THRESHOLD),
            raw_counts: Some(shot.counts),
            ..self
        })
    }
}

/// Simulates the full program for one oracle.
pub fn run_rdj(
    id: OracleId,
    device: &Device,
    opts: &SimOptions,
    readout_cfg: &ReadoutConfig,
) -> Result<RdjResult, SimError> {
    let program = build_rdj_program(id);
    let rho0 = readout::initialize_state(readout_cfg);
    let rho = run_sequence(&rho0, &program, device, opts, readout_cfg)?;
    let signal = readout::fluorescence_signal(&rho, readout_cfg).normalized;
    Ok(RdjResult {
        oracle: id,
        p0: rho.population(Level::Zero),
        signal,
        classification: classify(signal, DEFAULT_THRESHOLD),
        raw_counts: None,
    })
}

/// All four oracles, in index order.
pub fn run_all(
    device: &Device,
    opts: &SimOptions,
    readout_cfg: &ReadoutConfig,
) -> Result<Vec<RdjResult>, SimError> {
    OracleId::ALL
        .par_iter()
        .map(|&id| run_rdj(id, device, opts, readout_cfg))
        .collect()
}
