//! Nutation analysis: FFT frequency estimate, damped-cosine fit, contrast.

mod fft;
mod fit;

pub use fft::{fft_rabi_frequency, MIN_FFT_SAMPLES, ZERO_PADDING};
pub use fit::{
    fit_damped_sine, fit_damped_sine_with, initial_guess, DampedSineFit, FitMode, FitOptions,
    MIN_FIT_SAMPLES,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("t and y have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("{got} samples given, at least {need} required")]
    TooFewSamples { got: usize, need: usize },
    #[error("sample times must be strictly increasing")]
    NotIncreasing,
    #[error("sample times are not uniformly spaced")]
    NonUniform,
    #[error("non-finite sample")]
    NonFinite,
    #[error("no dominant frequency")]
    NoDominantFrequency,
    #[error("no oscillation detected")]
    NoOscillation,
    #[error("empty signal list")]
    Empty,
}

/// `mean(balanced) − mean(constant)`.
pub fn contrast(signals_constant: &[f64], signals_balanced: &[f64]) -> Result<f64, AnalysisError> {
    if signals_constant.is_empty() || signals_balanced.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Ok(mean(signals_balanced) - mean(signals_constant))
}

/// Time of the first local minimum of a sampled curve.
pub fn first_minimum(curve: &[(f64, f64)]) -> Option<f64> {
    curve
        .windows(3)
        .find(|w| w[1].1 <= w[0].1 && w[1].1 < w[2].1)
        .map(|w| w[1].0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contrast_examples() {
        assert!((contrast(&[0.0, 0.0], &[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        let c = contrast(&[0.2155, 0.2155], &[0.7845, 0.7845]).unwrap();
        assert!((c - 0.569).abs() < 1e-12);
        assert_eq!(contrast(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert!(contrast(&[], &[0.1]).is_err());
    }

    #[test]
    fn first_minimum_of_cosine() {
        let curve: Vec<(f64, f64)> = (0..100)
            .map(|k| {
                let t = k as f64 * 0.1;
                (t, t.cos())
            })
            .collect();
        let tmin = first_minimum(&curve).unwrap();
        assert!((tmin - std::f64::consts::PI).abs() <= 0.1);
    }

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn fft_recovers_known_frequencies() {
        let t = grid(100, 10e-9);
        for f in [7.87e6, 4.26e6] {
            let y: Vec<f64> = t
                .iter()
                .map(|t| (2.0 * std::f64::consts::PI * f * t).cos())
                .collect();
            let est = fft_rabi_frequency(&t, &y).unwrap();
            assert!((est - f).abs() < 0.02e6, "{f}: {est}");
        }
    }

    #[test]
    fn fft_rejects_constant_and_bad_grids() {
        let t = grid(64, 1e-9);
        assert_eq!(
            fft_rabi_frequency(&t, &[0.5; 64]),
            Err(AnalysisError::NoDominantFrequency)
        );
        assert!(matches!(
            fft_rabi_frequency(&t[..8], &[0.0; 8]),
            Err(AnalysisError::TooFewSamples { .. })
        ));
        let mut bad = t.clone();
        bad[10] += 0.3e-9;
        let y: Vec<f64> = t.iter().map(|t| (1e8 * t).sin()).collect();
        assert_eq!(fft_rabi_frequency(&bad, &y), Err(AnalysisError::NonUniform));
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        let t = grid(50, 1e-9);
        assert_eq!(
            fit_damped_sine(&t, &[0.5; 50], None),
            Err(AnalysisError::NoOscillation)
        );
        assert!(matches!(
            fit_damped_sine(&t[..5], &[0.1, 0.2, 0.3, 0.4, 0.5], None),
            Err(AnalysisError::TooFewSamples { .. })
        ));
        let mut t2 = t.clone();
        t2[3] = t2[2];
        let y: Vec<f64> = t.iter().map(|t| (1e8 * t).cos()).collect();
        assert_eq!(
            fit_damped_sine(&t2, &y, None),
            Err(AnalysisError::NotIncreasing)
        );
    }
}
