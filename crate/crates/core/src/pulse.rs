//! Pulse events and sequences shared by the sequence language and the
//! simulator.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::spin::Level;

/// Microwave channel. `Mw1` addresses `|0⟩ ↔ |−1⟩`, `Mw2` addresses
/// `|0⟩ ↔ |+1⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "MW1")]
    Mw1,
    #[serde(rename = "MW2")]
    Mw2,
}

impl Channel {
    pub const ALL: [Channel; 2] = [Channel::Mw1, Channel::Mw2];

    /// The level connected to `|0⟩` by this channel's carrier.
    pub const fn target(self) -> Level {
        match self {
            Channel::Mw1 => Level::Minus,
            Channel::Mw2 => Level::Plus,
        }
    }

    pub const fn other(self) -> Channel {
        match self {
            Channel::Mw1 => Channel::Mw2,
            Channel::Mw2 => Channel::Mw1,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Channel::Mw1 => "MW1",
            Channel::Mw2 => "MW2",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Channel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "MW1" => Ok(Channel::Mw1),
            "MW2" => Ok(Channel::Mw2),
            _ => Err(format!("unknown channel `{s}`")),
        }
    }
}

/// Non-negative time interval with 1 ps resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TimeSpan(u64);

impl TimeSpan {
    pub const ZERO: TimeSpan = TimeSpan(0);
    pub const PS_PER_SECOND: f64 = 1e12;

    pub const fn from_ps(ps: u64) -> Self {
        TimeSpan(ps)
    }

    pub const fn from_ns(ns: u64) -> Self {
        TimeSpan(ns * 1_000)
    }

    pub const fn from_us(us: u64) -> Self {
        TimeSpan(us * 1_000_000)
    }

    /// Rounds to the nearest picosecond. `None` for negative, non-finite or
    /// out-of-range input.
    pub fn from_seconds(s: f64) -> Option<Self> {
        if !s.is_finite() || s < 0.0 {
            return None;
        }
        let ps = (s * Self::PS_PER_SECOND).round();
        if ps > u64::MAX as f64 / 2.0 {
            return None;
        }
        Some(TimeSpan(ps as u64))
    }

    pub const fn ps(self) -> u64 {
        self.0
    }

    pub fn seconds(self) -> f64 {
        self.0 as f64 / Self::PS_PER_SECOND
    }

    pub fn checked_add(self, other: TimeSpan) -> Option<TimeSpan> {
        self.0.checked_add(other.0).map(TimeSpan)
    }
}

/// Flip angle stored as a multiple of π, so `0.5` is a π/2 pulse.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct FlipAngle(f64);

impl FlipAngle {
    pub const HALF_PI: FlipAngle = FlipAngle(0.5);
    pub const PI: FlipAngle = FlipAngle(1.0);
    pub const TWO_PI: FlipAngle = FlipAngle(2.0);

    pub fn from_pi_multiple(k: f64) -> Option<Self> {
        (k.is_finite() && k >= 0.0).then_some(FlipAngle(k))
    }

    pub const fn pi_multiple(self) -> f64 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0 * std::f64::consts::PI
    }

    /// Drive time producing this rotation at Rabi frequency `rabi_hz`:
    /// `angle / (2π Ω)`.
    pub fn duration_at(self, rabi_hz: f64) -> f64 {
        self.0 / (2.0 * rabi_hz)
    }

    pub fn sum(self, other: FlipAngle) -> FlipAngle {
        FlipAngle(self.0 + other.0)
    }
}

/// A rectangular microwave pulse.
///
/// At least one of `angle` / `duration` is set. If both are present the
/// explicit duration is what gets played; `validate` checks the two agree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MwPulse {
    pub channel: Channel,
    pub angle: Option<FlipAngle>,
    pub duration: Option<TimeSpan>,
    /// Drive phase φ, radians.
    pub phase: f64,
}

impl MwPulse {
    pub fn with_angle(channel: Channel, angle: FlipAngle) -> Self {
        Self {
            channel,
            angle: Some(angle),
            duration: None,
            phase: 0.0,
        }
    }

    pub fn with_duration(channel: Channel, duration: TimeSpan) -> Self {
        Self {
            channel,
            angle: None,
            duration: Some(duration),
            phase: 0.0,
        }
    }

    pub fn phased(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    /// Played duration in seconds at the given Rabi frequency.
    pub fn duration_s(&self, rabi_hz: f64) -> f64 {
        match (self.duration, self.angle) {
            (Some(d), _) => d.seconds(),
            (None, Some(a)) => a.duration_at(rabi_hz),
            (None, None) => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseEvent {
    /// Green excitation; re-polarizes the spin into `|0⟩`.
    Laser(TimeSpan),
    /// Free evolution.
    Wait(TimeSpan),
    /// Detection window. The signal is taken from the state at its onset and
    /// the state is left untouched.
    Readout(TimeSpan),
    Mw(MwPulse),
}

impl PulseEvent {
    pub fn mw_angle(channel: Channel, angle: FlipAngle) -> Self {
        PulseEvent::Mw(MwPulse::with_angle(channel, angle))
    }

    pub fn as_mw(&self) -> Option<&MwPulse> {
        match self {
            PulseEvent::Mw(p) => Some(p),
            _ => None,
        }
    }

    pub fn keyword(&self) -> &'static str {
        match self {
            PulseEvent::Laser(_) => "LASER",
            PulseEvent::Wait(_) => "WAIT",
            PulseEvent::Readout(_) => "READOUT",
            PulseEvent::Mw(p) => p.channel.name(),
        }
    }
}

/// Ordered, strictly sequential list of events.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PulseSequence {
    pub name: String,
    pub events: Vec<PulseEvent>,
}

impl PulseSequence {
    pub fn new(name: impl Into<String>, events: Vec<PulseEvent>) -> Self {
        Self {
            name: name.into(),
            events,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn mw_pulses(&self) -> impl Iterator<Item = &MwPulse> {
        self.events.iter().filter_map(PulseEvent::as_mw)
    }

    /// Total time the given channel is on, seconds.
    pub fn mw_time(&self, channel: Channel, rabi_hz: f64) -> f64 {
        self.mw_pulses()
            .filter(|p| p.channel == channel)
            .map(|p| p.duration_s(rabi_hz))
            .sum()
    }
}
