//! Damped-cosine least squares, `y = y0 + A e^{−R t} cos(ω t [+ φ])`.
//!
//! Time is measured from the first sample. Internally the fit runs on
//! `τ = (t − t₀)/T` with `T` the record length, so `R` and `ω` enter as
//! `R·T` and `ω·T`, both of order one to a hundred.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::fft::fft_rabi_frequency;
use super::AnalysisError;

pub const MIN_FIT_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampedSineFit {
    pub y0: f64,
    #[serde(rename = "A")]
    pub a: f64,
    /// Decay rate, 1/s.
    #[serde(rename = "R")]
    pub r: f64,
    /// Angular frequency, rad/s.
    pub omega: f64,
    /// Zero unless fitted with a free phase.
    #[serde(default)]
    pub phase: f64,
    pub residual_rms: f64,
    pub converged: bool,
    #[serde(default)]
    pub iterations: usize,
}

impl DampedSineFit {
    pub fn frequency_hz(&self) -> f64 {
        self.omega / (2.0 * std::f64::consts::PI)
    }

    pub fn eval(&self, dt: f64) -> f64 {
        self.y0 + self.a * (-self.r * dt).exp() * (self.omega * dt + self.phase).cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitMode {
    /// Fit `y0`, `A`, `R`, `ω`.
    #[default]
    Free,
    /// `y0 = A = 0.5` held fixed; fit `R` and `ω` only.
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub mode: FitMode,
    pub free_phase: bool,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            mode: FitMode::Free,
            free_phase: false,
            max_iterations: 200,
            gradient_tolerance: 1e-10,
        }
    }
}

// Parameter slots in scaled units.
const Y0: usize = 0;
const AMP: usize = 1;
const RATE: usize = 2;
const OMEGA: usize = 3;
const PHASE: usize = 4;

struct Problem<'a> {
    tau: Vec<f64>,
    y: &'a [f64],
    active: Vec<usize>,
}

impl Problem<'_> {
    fn residuals(&self, p: &[f64; 5]) -> DVector<f64> {
        DVector::from_iterator(
            self.y.len(),
            self.tau.iter().zip(self.y).map(|(&t, &y)| {
                p[Y0] + p[AMP] * (-p[RATE] * t).exp() * (p[OMEGA] * t + p[PHASE]).cos() - y
            }),
        )
    }

    fn jacobian(&self, p: &[f64; 5]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.y.len(), self.active.len());
        for (row, &t) in self.tau.iter().enumerate() {
            let env = (-p[RATE] * t).exp();
            let arg = p[OMEGA] * t + p[PHASE];
            let (s, c) = arg.sin_cos();
            for (col, &k) in self.active.iter().enumerate() {
                j[(row, col)] = match k {
                    Y0 => 1.0,
                    AMP => env * c,
                    RATE => -p[AMP] * t * env * c,
                    OMEGA => -p[AMP] * t * env * s,
                    _ => -p[AMP] * env * s,
                };
            }
        }
        j
    }

    fn cost(&self, p: &[f64; 5]) -> f64 {
        0.5 * self.residuals(p).norm_squared()
    }
}

fn validate_samples(t: &[f64], y: &[f64]) -> Result<(), AnalysisError> {
    if t.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(t.len(), y.len()));
    }
    if t.len() < MIN_FIT_SAMPLES {
        return Err(AnalysisError::TooFewSamples {
            got: t.len(),
            need: MIN_FIT_SAMPLES,
        });
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AnalysisError::NotIncreasing);
    }
    Ok(())
}

/// Slope of `ln |y − y0|` at the local extrema, as a starting decay rate.
fn envelope_rate(t: &[f64], y: &[f64], y0: f64) -> f64 {
    let d: Vec<f64> = y.iter().map(|v| (v - y0).abs()).collect();
    let max = d.iter().cloned().fold(0.0, f64::max);
    let peaks: Vec<(f64, f64)> = (1..d.len() - 1)
        .filter(|&i| d[i] >= d[i - 1] && d[i] > d[i + 1] && d[i] > 0.05 * max)
        .map(|i| (t[i], d[i].ln()))
        .chain(std::iter::once((t[0], d[0].ln())).filter(|_| d[0] > 0.05 * max))
        .collect();
    if peaks.len() < 2 {
        return 0.0;
    }
    let n = peaks.len() as f64;
    let (mt, ml) = peaks
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, l)| (a + t / n, b + l / n));
    let (sxy, sxx) = peaks.iter().fold((0.0, 0.0), |(sxy, sxx), (t, l)| {
        (sxy + (t - mt) * (l - ml), sxx + (t - mt) * (t - mt))
    });
    if sxx > 0.0 {
        (-sxy / sxx).max(0.0)
    } else {
        0.0
    }
}

/// Starting point derived from the data alone.
pub fn initial_guess(t: &[f64], y: &[f64], mode: FitMode) -> Result<DampedSineFit, AnalysisError> {
    validate_samples(t, y)?;
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    if hi - lo <= 1e-12 * mean.abs().max(1.0) {
        return Err(AnalysisError::NoOscillation);
    }
    let freq = fft_rabi_frequency(t, y).map_err(|e| match e {
        AnalysisError::NoDominantFrequency => AnalysisError::NoOscillation,
        other => other,
    })?;
    let (y0, a) = match mode {
        FitMode::Normalized => (0.5, 0.5),
        FitMode::Free => {
            let half = 0.5 * (hi - lo);
            (mean, if y[0] >= mean { half } else { -half })
        }
    };
    let r = envelope_rate(t, y, y0);
    Ok(DampedSineFit {
        y0,
        a,
        r,
        omega: 2.0 * std::f64::consts::PI * freq,
        phase: 0.0,
        residual_rms: f64::NAN,
        converged: false,
        iterations: 0,
    })
}

/// Fits with default options (free amplitude/offset, phase pinned to 0).
pub fn fit_damped_sine(
    t: &[f64],
    y: &[f64],
    init: Option<DampedSineFit>,
) -> Result<DampedSineFit, AnalysisError> {
    fit_damped_sine_with(t, y, init, &FitOptions::default())
}

/// Best `(y0, A, R·T, ω·T)` on a coarse grid, with `y0` and `A` solved
/// linearly at each grid point. Catches records with only a cycle or two,
/// where the FFT peak says little about `ω`.
fn grid_seed(problem: &Problem, mode: FitMode) -> [f64; 5] {
    let n = problem.tau.len();
    let rates = [0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0];
    let mut best = (f64::INFINITY, [0.5, 0.5, 0.0, 0.0, 0.0]);
    let mut basis = vec![0.0; n];
    for k in 1..=(2 * n) {
        // ω·T from a quarter cycle per record up to the Nyquist limit
        let w = std::f64::consts::PI * k as f64 / 4.0;
        if w > std::f64::consts::PI * (n - 1) as f64 {
            break;
        }
        for &r in &rates {
            for (b, &t) in basis.iter_mut().zip(&problem.tau) {
                *b = (-r * t).exp() * (w * t).cos();
            }
            let (y0, a) = match mode {
                FitMode::Normalized => (0.5, 0.5),
                FitMode::Free => {
                    let (sb, sbb) = basis
                        .iter()
                        .fold((0.0, 0.0), |(s, ss), b| (s + b, ss + b * b));
                    let (sy, sby) = basis
                        .iter()
                        .zip(problem.y)
                        .fold((0.0, 0.0), |(s, sb), (b, y)| (s + y, sb + b * y));
                    let det = n as f64 * sbb - sb * sb;
                    if det.abs() < 1e-12 * (n as f64) * sbb.max(1e-300) {
                        continue;
                    }
                    (
                        (sbb * sy - sb * sby) / det,
                        (n as f64 * sby - sb * sy) / det,
                    )
                }
            };
            let cost: f64 = basis
                .iter()
                .zip(problem.y)
                .map(|(b, y)| (y0 + a * b - y).powi(2))
                .sum();
            if cost < best.0 {
                best = (cost, [y0, a, r, w, 0.0]);
            }
        }
    }
    best.1
}

struct LmOutcome {
    p: [f64; 5],
    cost: f64,
    converged: bool,
    iterations: usize,
}

fn levenberg_marquardt(problem: &Problem, mut p: [f64; 5], opts: &FitOptions) -> LmOutcome {
    let mut cost = problem.cost(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let n_active = problem.active.len();
    let rate_col = problem.active.iter().position(|&k| k == RATE);

    while iterations < opts.max_iterations {
        iterations += 1;
        let r = problem.residuals(&p);
        let j = problem.jacobian(&p);
        let mut g = j.transpose() * &r;
        // R pinned at its bound and pushing outward: drop it from this step.
        let pinned = rate_col.filter(|&c| p[RATE] <= 0.0 && g[c] > 0.0);
        if let Some(c) = pinned {
            g[c] = 0.0;
        }
        if g.amax() < opts.gradient_tolerance {
            converged = true;
            break;
        }
        let mut jtj = j.transpose() * &j;
        if let Some(c) = pinned {
            jtj.row_mut(c).fill(0.0);
            jtj.column_mut(c).fill(0.0);
            jtj[(c, c)] = 1.0;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for d in 0..n_active {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 4.0;
                continue;
            };
            let mut trial = p;
            for (col, &k) in problem.active.iter().enumerate() {
                trial[k] += step[col];
            }
            trial[RATE] = trial[RATE].max(0.0);
            let trial_cost = problem.cost(&trial);
            if trial_cost <= cost {
                let rel_step = problem
                    .active
                    .iter()
                    .map(|&k| (trial[k] - p[k]).abs() / p[k].abs().max(1e-3))
                    .fold(0.0, f64::max);
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-15);
                accepted = true;
                converged = rel_step < 1e-14;
                break;
            }
            lambda *= 2.0;
        }
        if !accepted {
            // No descent at any damping: stationary to round-off.
            converged = true;
        }
        if converged {
            break;
        }
    }
    LmOutcome {
        p,
        cost,
        converged,
        iterations,
    }
}

/// Levenberg–Marquardt with an analytic Jacobian. `R` is kept non-negative
/// by projection. Converged means the projected gradient fell below the
/// tolerance, or the step stalled at machine precision.
///
/// Without `init`, two starts are tried: the data-derived guess of
/// [`initial_guess`] and the best point of a coarse `(ω, R)` grid; the
/// lower-cost result is returned.
pub fn fit_damped_sine_with(
    t: &[f64],
    y: &[f64],
    init: Option<DampedSineFit>,
    opts: &FitOptions,
) -> Result<DampedSineFit, AnalysisError> {
    validate_samples(t, y)?;
    let start = match init {
        Some(f) => f,
        None => initial_guess(t, y, opts.mode)?,
    };
    let t0 = t[0];
    let span = t[t.len() - 1] - t0;
    let mut active = match opts.mode {
        FitMode::Free => vec![Y0, AMP, RATE, OMEGA],
        FitMode::Normalized => vec![RATE, OMEGA],
    };
    if opts.free_phase {
        active.push(PHASE);
    }
    let problem = Problem {
        tau: t.iter().map(|v| (v - t0) / span).collect(),
        y,
        active,
    };
    let (y0, a) = match opts.mode {
        FitMode::Normalized => (0.5, 0.5),
        FitMode::Free => (start.y0, start.a),
    };
    let p0 = [
        y0,
        a,
        start.r.max(0.0) * span,
        start.omega * span,
        if opts.free_phase { start.phase } else { 0.0 },
    ];

    let mut best = levenberg_marquardt(&problem, p0, opts);
    if init.is_none() {
        let mut seed = grid_seed(&problem, opts.mode);
        seed[PHASE] = p0[PHASE];
        let alt = levenberg_marquardt(&problem, seed, opts);
        if alt.cost < best.cost {
            best = alt;
        }
    }

    let mut p = best.p;
    if !opts.free_phase && super::fft::uniform_step(t).is_ok() {
        // On a uniform grid ω·T and 2π(n−1) − ω·T give identical samples.
        let period = 2.0 * std::f64::consts::PI * (t.len() - 1) as f64;
        let w = p[OMEGA].abs().rem_euclid(period);
        p[OMEGA] = if w > 0.5 * period { period - w } else { w };
    }
    Ok(DampedSineFit {
        y0: p[Y0],
        a: p[AMP],
        r: p[RATE] / span,
        omega: p[OMEGA] / span,
        phase: p[PHASE],
        residual_rms: (2.0 * best.cost / y.len() as f64).sqrt(),
        converged: best.converged,
        iterations: best.iterations,
    })
}
