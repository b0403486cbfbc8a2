#![allow(dead_code)]

use nalgebra::Matrix3;
use num_complex::Complex64 as C64;
use nvqutrit::engine::Device;
use nvqutrit::pulse::{Channel, FlipAngle, MwPulse, PulseEvent, PulseSequence, TimeSpan};
use proptest::prelude::*;
use rand::Rng;

pub type M3 = Matrix3<C64>;

fn idx(level: i32) -> usize {
    match level {
        1 => 0,
        0 => 1,
        _ => 2,
    }
}

/// Closed-form resonant rotation on `{|0⟩, |q⟩}`:
/// `(1 − P) + P cos(πΩt) − i sin(πΩt)(e^{iφ}|0⟩⟨q| + e^{−iφ}|q⟩⟨0|)`.
pub fn rabi_rotation(channel: Channel, rabi_hz: f64, phase: f64, t: f64) -> M3 {
    let q = match channel {
        Channel::Mw1 => idx(-1),
        Channel::Mw2 => idx(1),
    };
    let z = idx(0);
    let (s, c) = (std::f64::consts::PI * rabi_hz * t).sin_cos();
    let mut u = M3::identity();
    u[(z, z)] = C64::new(c, 0.0);
    u[(q, q)] = C64::new(c, 0.0);
    u[(z, q)] = C64::new(0.0, -s) * C64::from_polar(1.0, phase);
    u[(q, z)] = C64::new(0.0, -s) * C64::from_polar(1.0, -phase);
    u
}

/// Product of closed-form rotations over the microwave events, written out
/// one multiplication at a time. Waits are the identity in the resonant frame.
pub fn straight_line_product(events: &[PulseEvent], device: &Device) -> M3 {
    let mut u = M3::identity();
    for ev in events {
        if let PulseEvent::Mw(p) = ev {
            let rabi = device.channels.get(p.channel).rabi_hz;
            let t = match (p.duration, p.angle) {
                (Some(d), _) => d.ps() as f64 * 1e-12,
                (None, Some(a)) => a.pi_multiple() / (2.0 * rabi),
                (None, None) => 0.0,
            };
            let step = rabi_rotation(p.channel, rabi, p.phase, t);
            u = step * u;
        }
    }
    u
}

pub fn max_abs_diff(a: &M3, b: &M3) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Random microwave pulse or wait, never LASER/READOUT.
pub fn random_coherent_event<R: Rng>(rng: &mut R) -> PulseEvent {
    let channel = if rng.gen_bool(0.5) {
        Channel::Mw1
    } else {
        Channel::Mw2
    };
    let phase = if rng.gen_bool(0.5) {
        0.0
    } else {
        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)
    };
    match rng.gen_range(0..4) {
        0 => PulseEvent::Wait(TimeSpan::from_ps(rng.gen_range(0..500_000))),
        1 => PulseEvent::Mw(
            MwPulse::with_duration(channel, TimeSpan::from_ps(rng.gen_range(0..400_000)))
                .phased(phase),
        ),
        _ => {
            let k = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
            let k = if rng.gen_bool(0.3) {
                rng.gen_range(0.0..3.0)
            } else {
                k
            };
            PulseEvent::Mw(
                MwPulse::with_angle(channel, FlipAngle::from_pi_multiple(k).unwrap()).phased(phase),
            )
        }
    }
}

pub fn random_coherent_sequence<R: Rng>(rng: &mut R, max_len: usize) -> PulseSequence {
    let n = rng.gen_range(0..=max_len);
    PulseSequence::new(
        "random",
        (0..n).map(|_| random_coherent_event(rng)).collect(),
    )
}

fn time_span() -> impl Strategy<Value = TimeSpan> {
    prop_oneof![
        (0u64..10_000).prop_map(TimeSpan::from_ns),
        (0u64..20).prop_map(TimeSpan::from_us),
        (0u64..10_000_000_000).prop_map(TimeSpan::from_ps),
    ]
}

fn angle() -> impl Strategy<Value = FlipAngle> {
    prop_oneof![
        Just(FlipAngle::HALF_PI),
        Just(FlipAngle::PI),
        Just(FlipAngle::TWO_PI),
        (0.0f64..50.0).prop_map(|k| FlipAngle::from_pi_multiple(k).unwrap()),
    ]
}

fn phase() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(std::f64::consts::FRAC_PI_2), -10.0f64..10.0]
}

fn channel() -> impl Strategy<Value = Channel> {
    prop_oneof![Just(Channel::Mw1), Just(Channel::Mw2)]
}

pub fn mw_event() -> impl Strategy<Value = PulseEvent> {
    (
        channel(),
        prop::option::of(angle()),
        time_span(),
        phase(),
        0u8..3,
    )
        .prop_map(|(ch, a, d, ph, shape)| {
            let p = match (a, shape) {
                (Some(a), 0) => MwPulse::with_angle(ch, a),
                (Some(a), 1) => MwPulse {
                    duration: Some(d),
                    ..MwPulse::with_angle(ch, a)
                },
                _ => MwPulse::with_duration(ch, d),
            };
            PulseEvent::Mw(p.phased(ph))
        })
}

/// Any event the parser can produce.
pub fn any_event() -> impl Strategy<Value = PulseEvent> {
    prop_oneof![
        time_span().prop_map(PulseEvent::Laser),
        time_span().prop_map(PulseEvent::Wait),
        time_span().prop_map(PulseEvent::Readout),
        mw_event(),
        mw_event(),
    ]
}

pub fn any_sequence(max_len: usize) -> impl Strategy<Value = PulseSequence> {
    prop::collection::vec(any_event(), 0..=max_len).prop_map(|e| PulseSequence::new("", e))
}

/// Symbolic pulses on the two channels with a few phase values, so that
/// merges actually happen.
pub fn mergeable_sequence(max_len: usize) -> impl Strategy<Value = PulseSequence> {
    let ev = (channel(), 1u8..8, prop_oneof![Just(0.0), Just(1.0)], 0u8..6).prop_map(
        |(ch, quarter, ph, kind)| match kind {
            0 => PulseEvent::Wait(TimeSpan::from_ns(u64::from(quarter) * 10)),
            1 => PulseEvent::Mw(
                MwPulse::with_duration(ch, TimeSpan::from_ns(u64::from(quarter) * 7)).phased(ph),
            ),
            _ => PulseEvent::Mw(
                MwPulse::with_angle(
                    ch,
                    FlipAngle::from_pi_multiple(f64::from(quarter) * 0.25).unwrap(),
                )
                .phased(ph),
            ),
        },
    );
    prop::collection::vec(ev, 0..=max_len).prop_map(|e| PulseSequence::new("", e))
}
