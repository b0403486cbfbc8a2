use nvqutrit::engine::Device;
use nvqutrit::pulse::{Channel, FlipAngle, PulseEvent, PulseSequence, TimeSpan};
use nvqutrit::rdj::all_programs;
use nvqutrit::readout::{
    calibrate_equal_rates, compensate_dephasing, fluorescence_signal, initialize_state,
    mean_visibility, predicted_visibility, simulate_shots, ReadoutConfig,
};
use nvqutrit::spin::{zero_field_hamiltonian, Level, ZfsParams};
use nvqutrit::state::DensityMatrix3;
use proptest::prelude::*;

fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[test]
fn shot_noise_scales_as_inverse_square_root() {
    let ns: [f64; 5] = [1e3, 1e4, 1e5, 1e6, 1e7];
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .map(|&n| {
            let cfg = ReadoutConfig {
                n_averages: n as u64,
                ..ReadoutConfig::default()
            };
            let xs: Vec<f64> = (0..100)
                .map(|seed| simulate_shots(0.5, &cfg, seed).unwrap().normalized)
                .collect();
            (n.ln(), std_dev(&xs).ln())
        })
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.5).abs() < 0.05, "slope {slope}");
}

#[test]
fn shots_are_unbiased() {
    let cfg = ReadoutConfig {
        n_averages: 10_000,
        ..ReadoutConfig::default()
    };
    for truth in [0.0, 0.3, 0.85, 1.0] {
        let xs: Vec<f64> = (0..10_000)
            .map(|seed| simulate_shots(truth, &cfg, seed).unwrap().normalized)
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let se = cfg.shot_sigma(truth) / (xs.len() as f64).sqrt();
        assert!((mean - truth).abs() < 3.0 * se, "{truth}: {mean} (se {se})");
    }
}

#[test]
fn shots_are_deterministic_per_seed() {
    let cfg = ReadoutConfig::default();
    let a = simulate_shots(0.37, &cfg, 99).unwrap();
    let b = simulate_shots(0.37, &cfg, 99).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, simulate_shots(0.37, &cfg, 100).unwrap());
    assert!(simulate_shots(1.5, &cfg, 0).is_err());
}

#[test]
fn initialization_is_diagonal_in_the_energy_basis() {
    let h = zero_field_hamiltonian(&ZfsParams::nv_sample());
    for p in [0.9, 0.5, 1.0] {
        let cfg = ReadoutConfig {
            init_fidelity: p,
            ..ReadoutConfig::default()
        };
        let rho = initialize_state(&cfg);
        let m = rho.matrix();
        let comm = m * h - h * m;
        assert!(comm.iter().all(|z| z.norm() < 1e-12 * 3e9));
        assert!((rho.trace().re - 1.0).abs() < 1e-15);
    }
    let rho = initialize_state(&ReadoutConfig::default());
    let pops = rho.populations();
    assert!((pops[0] - 0.05).abs() < 1e-15 && (pops[1] - 0.9).abs() < 1e-15);
}

#[test]
fn visibility_examples() {
    let ch = Device::nv_ideal().channels;
    let seq = PulseSequence::new("", vec![PulseEvent::mw_angle(Channel::Mw1, FlipAngle::PI)]);
    assert_eq!(predicted_visibility(&seq, &ch), 1.0);
    let r = 1.7e6;
    let ch = ch.with_dephasing(r, 0.0);
    let v = predicted_visibility(&seq, &ch);
    assert!((v - (-r / (2.0 * 7.87e6)).exp()).abs() < 1e-15);
    let waits = PulseSequence::new("", vec![PulseEvent::Wait(TimeSpan::from_us(3))]);
    assert_eq!(predicted_visibility(&waits, &ch), 1.0);
}

#[test]
fn calibrated_rates_hit_target_contrast() {
    let ch = Device::nv_ideal().channels;
    let r = calibrate_equal_rates(&all_programs(), &ch, 0.596).unwrap();
    let v = mean_visibility(&all_programs(), &ch.with_dephasing(r, r));
    assert!((v - 0.596).abs() < 1e-9);
    assert!(calibrate_equal_rates(&all_programs(), &ch, 0.0).is_err());
}

#[test]
fn compensation_examples() {
    assert_eq!(compensate_dephasing(0.3, 1.0).unwrap().value, 0.3);
    assert_eq!(compensate_dephasing(0.5, 0.2).unwrap().value, 0.5);
    assert!(compensate_dephasing(0.5, 0.0).is_err());
    let lo = compensate_dephasing(0.5 - 0.569 / 2.0, 0.596)
        .unwrap()
        .value;
    let hi = compensate_dephasing(0.5 + 0.569 / 2.0, 0.596)
        .unwrap()
        .value;
    assert!((hi - lo - 0.569 / 0.596).abs() < 1e-12);
    assert!((hi - lo - 0.955).abs() < 5e-4);
    let c = compensate_dephasing(0.95, 0.5).unwrap();
    assert!(c.clipped && c.value == 1.0);
}

proptest! {
    #[test]
    fn compensation_inverts_contraction(s in 0.0f64..=1.0, v in 0.01f64..=1.0) {
        let raw = 0.5 + (s - 0.5) * v;
        let c = compensate_dephasing(raw, v).unwrap();
        prop_assert!(!c.clipped);
        prop_assert!((c.value - s).abs() < 1e-12);
    }

    #[test]
    fn normalized_fluorescence_is_zero_population(
        a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0,
        bright in 1e4f64..1e6, frac in 0.0f64..0.99,
    ) {
        let s = a + b + c + 1e-12;
        let rho = DensityMatrix3::diagonal([a / s, b / s, c / s]).unwrap();
        let cfg = ReadoutConfig {
            rate_bright_per_s: bright,
            rate_dark_per_s: bright * frac,
            ..ReadoutConfig::default()
        };
        let f = fluorescence_signal(&rho, &cfg);
        prop_assert!((f.normalized - rho.population(Level::Zero)).abs() < 1e-12);
    }
}
