//! Pulse-level simulator of an NV-center spin-1 qutrit and the refined
//! Deutsch-Jozsa protocol run on it.
//!
//! Basis order everywhere is `(|+1⟩, |0⟩, |−1⟩)`. Frequencies are in Hz,
//! times in seconds unless a [`pulse::TimeSpan`] is used.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod dsl;
pub mod engine;
pub mod pulse;
pub mod rdj;
pub mod readout;
pub mod spin;
pub mod state;

pub use config::RunConfig;
pub use engine::{Device, SimError, SimOptions};
pub use pulse::{Channel, FlipAngle, MwPulse, PulseEvent, PulseSequence, TimeSpan};
pub use spin::{Level, ZfsParams};
pub use state::DensityMatrix3;
