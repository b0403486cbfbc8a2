//! Spin-1 operator algebra and the zero-field ground-state Hamiltonian of
//! the NV center.
//!
//! Every 3×3 matrix in this crate uses the ordered basis
//! `(|+1⟩, |0⟩, |−1⟩)`, i.e. row/column 0 is `m_s = +1`, 1 is `m_s = 0`
//! and 2 is `m_s = −1`. Energies are frequencies in Hz (`h = 1`).

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;
pub type Mat3 = Matrix3<C64>;

/// Measured axial splitting of the sample, Hz.
pub const NV_D_HZ: f64 = 2.8449e9;
/// Measured strain splitting of the sample, Hz.
pub const NV_E_HZ: f64 = 19.5e6;

/// One of the three ground-state sublevels.
///
/// In the dynamics, `Plus` and `Minus` label the upper and lower strain
/// eigenstates, which are the states actually addressed by the two
/// microwave lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    Plus,
    Zero,
    Minus,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Plus, Level::Zero, Level::Minus];

    #[inline]
    pub const fn index(self) -> usize {
        match self {
            Level::Plus => 0,
            Level::Zero => 1,
            Level::Minus => 2,
        }
    }

    /// Spin projection `m_s`.
    pub const fn ms(self) -> i32 {
        match self {
            Level::Plus => 1,
            Level::Zero => 0,
            Level::Minus => -1,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SpinError {
    #[error("zero-field parameters must be finite (D = {d}, E = {e})")]
    NonFinite { d: f64, e: f64 },
    #[error("axial splitting D must be non-negative, got {0}")]
    NegativeD(f64),
    #[error("strain splitting E must be non-negative, got {0}")]
    NegativeE(f64),
    #[error("strain splitting E = {e} must be smaller than D = {d}")]
    StrainTooLarge { d: f64, e: f64 },
}

/// Zero-field splitting constants (Hz).
///
/// `D ≥ 0`, `E ≥ 0` and `E < D`. The one exception to `E < D` is the
/// non-interacting limit `D = E = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ZfsRaw", into = "ZfsRaw")]
pub struct ZfsParams {
    d: f64,
    e: f64,
}

#[derive(Serialize, Deserialize)]
struct ZfsRaw {
    d_hz: f64,
    e_hz: f64,
}

impl TryFrom<ZfsRaw> for ZfsParams {
    type Error = SpinError;
    fn try_from(raw: ZfsRaw) -> Result<Self, SpinError> {
        ZfsParams::new(raw.d_hz, raw.e_hz)
    }
}

impl From<ZfsParams> for ZfsRaw {
    fn from(p: ZfsParams) -> Self {
        ZfsRaw {
            d_hz: p.d,
            e_hz: p.e,
        }
    }
}

impl ZfsParams {
    pub fn new(d: f64, e: f64) -> Result<Self, SpinError> {
        if !d.is_finite() || !e.is_finite() {
            return Err(SpinError::NonFinite { d, e });
        }
        if d < 0.0 {
            return Err(SpinError::NegativeD(d));
        }
        if e < 0.0 {
            return Err(SpinError::NegativeE(e));
        }
        if e >= d && !(d == 0.0 && e == 0.0) {
            return Err(SpinError::StrainTooLarge { d, e });
        }
        Ok(Self { d, e })
    }

    /// Values measured on the nanodiamond used in the experiment.
    pub fn nv_sample() -> Self {
        Self {
            d: NV_D_HZ,
            e: NV_E_HZ,
        }
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn e(&self) -> f64 {
        self.e
    }
}

/// Dimensionless spin-1 matrices (`ħ = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperators {
    pub sx: Mat3,
    pub sy: Mat3,
    pub sz: Mat3,
}

impl SpinOperators {
    /// `Sx² + Sy² + Sz²`.
    pub fn casimir(&self) -> Mat3 {
        self.sx * self.sx + self.sy * self.sy + self.sz * self.sz
    }
}

/// Canonical S = 1 matrices, ladder convention `⟨m±1|S±|m⟩ = √(2 − m(m±1))`.
pub fn spin1_operators() -> SpinOperators {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    let re = |x: f64| C64::new(x, 0.0);
    let im = |x: f64| C64::new(0.0, x);

    let sx = Mat3::new(
        z,
        re(r),
        z, //
        re(r),
        z,
        re(r), //
        z,
        re(r),
        z,
    );
    let sy = Mat3::new(
        z,
        im(-r),
        z, //
        im(r),
        z,
        im(-r), //
        z,
        im(r),
        z,
    );
    let sz = Mat3::from_diagonal(&nalgebra::Vector3::new(re(1.0), z, re(-1.0)));
    SpinOperators { sx, sy, sz }
}

/// `H_D = D[Sz² − S(S+1)/3] + E(Sx² − Sy²)` in Hz.
pub fn zero_field_hamiltonian(p: &ZfsParams) -> Mat3 {
    let ops = spin1_operators();
    let id = Mat3::identity();
    let sz2 = ops.sz * ops.sz;
    let sx2 = ops.sx * ops.sx;
    let sy2 = ops.sy * ops.sy;
    (sz2 - id * C64::from(2.0 / 3.0)) * C64::from(p.d) + (sx2 - sy2) * C64::from(p.e)
}

/// Eigenenergies and transition frequencies of the zero-field Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelStructure {
    pub e_zero: f64,
    /// Lower strain eigenstate, used as the effective `|−1⟩`.
    pub e_minus: f64,
    /// Upper strain eigenstate, used as the effective `|+1⟩`.
    pub e_plus: f64,
    /// `|0⟩ ↔ |−1⟩`, equal to `D − E`.
    pub f_low: f64,
    /// `|0⟩ ↔ |+1⟩`, equal to `D + E`.
    pub f_high: f64,
}

impl LevelStructure {
    pub fn from_zfs(p: &ZfsParams) -> Self {
        let (d, e) = (p.d, p.e);
        let (f_low, f_high) = transition_frequencies(p);
        Self {
            e_zero: -2.0 * d / 3.0,
            e_minus: d / 3.0 - e,
            e_plus: d / 3.0 + e,
            f_low,
            f_high,
        }
    }

    /// Energy of a level, Hz.
    pub fn energy(&self, level: Level) -> f64 {
        match level {
            Level::Plus => self.e_plus,
            Level::Zero => self.e_zero,
            Level::Minus => self.e_minus,
        }
    }

    /// Frequency of the `|0⟩ ↔ level` transition.
    pub fn transition_to(&self, level: Level) -> f64 {
        self.energy(level) - self.e_zero
    }

    /// `f_high − f_low = 2E`.
    pub fn line_separation(&self) -> f64 {
        self.f_high - self.f_low
    }
}

/// `(D − E, D + E)`.
pub fn transition_frequencies(p: &ZfsParams) -> (f64, f64) {
    (p.d - p.e, p.d + p.e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn max_abs(m: &Mat3) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn sz_is_diagonal_in_basis_order() {
        let ops = spin1_operators();
        assert_eq!(ops.sz[(0, 0)].re, 1.0);
        assert_eq!(ops.sz[(1, 1)].re, 0.0);
        assert_eq!(ops.sz[(2, 2)].re, -1.0);
        assert_eq!(Level::Plus.index(), 0);
        assert_eq!(Level::Zero.index(), 1);
        assert_eq!(Level::Minus.index(), 2);
        for l in Level::ALL {
            assert_eq!(ops.sz[(l.index(), l.index())].re, l.ms() as f64);
        }
    }

    #[test]
    fn angular_momentum_algebra() {
        let ops = spin1_operators();
        let i = C64::i();
        let comm = |a: &Mat3, b: &Mat3| a * b - b * a;
        assert!(max_abs(&(comm(&ops.sx, &ops.sy) - ops.sz * i)) < 1e-12);
        assert!(max_abs(&(comm(&ops.sy, &ops.sz) - ops.sx * i)) < 1e-12);
        assert!(max_abs(&(comm(&ops.sz, &ops.sx) - ops.sy * i)) < 1e-12);
        assert!(max_abs(&(ops.casimir() - Mat3::identity() * C64::from(2.0))) < 1e-12);
        for m in [&ops.sx, &ops.sy, &ops.sz] {
            assert!(max_abs(&(m - m.adjoint())) == 0.0);
        }
    }

    #[test]
    fn zero_params_give_zero_matrix() {
        let p = ZfsParams::new(0.0, 0.0).unwrap();
        assert!(max_abs(&zero_field_hamiltonian(&p)) < 1e-15);
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(matches!(
            ZfsParams::new(1e9, 1e9),
            Err(SpinError::StrainTooLarge { .. })
        ));
        assert!(matches!(
            ZfsParams::new(-1.0, 0.0),
            Err(SpinError::NegativeD(_))
        ));
        assert!(matches!(
            ZfsParams::new(1.0, -0.5),
            Err(SpinError::NegativeE(_))
        ));
        assert!(matches!(
            ZfsParams::new(f64::NAN, 0.0),
            Err(SpinError::NonFinite { .. })
        ));
    }

    #[test]
    fn sample_transition_frequencies() {
        let (lo, hi) = transition_frequencies(&ZfsParams::nv_sample());
        assert!((lo - 2.8254e9).abs() < 1e3);
        assert!((hi - 2.8644e9).abs() < 1e3);
        let (lo, hi) = transition_frequencies(&ZfsParams::new(2e9, 0.0).unwrap());
        assert_eq!(lo, hi);
    }

    #[test]
    fn hamiltonian_structure() {
        let p = ZfsParams::nv_sample();
        let h = zero_field_hamiltonian(&p);
        assert!(max_abs(&(h - h.adjoint())) < 1e-12 * p.d());
        assert!(h.trace().norm() < 1e-12 * p.d());
        // |0⟩ is an eigenvector with energy −2D/3
        assert_relative_eq!(h[(1, 1)].re, -2.0 * p.d() / 3.0, max_relative = 1e-15);
        assert_eq!(h[(0, 1)].norm(), 0.0);
        assert_eq!(h[(2, 1)].norm(), 0.0);
        // strain couples |+1⟩ and |−1⟩
        assert_relative_eq!(h[(0, 2)].re, p.e(), max_relative = 1e-12);
    }

    #[test]
    fn level_structure_gaps() {
        let ls = LevelStructure::from_zfs(&ZfsParams::nv_sample());
        assert_relative_eq!(
            ls.transition_to(Level::Minus),
            ls.f_low,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            ls.transition_to(Level::Plus),
            ls.f_high,
            max_relative = 1e-12
        );
        assert_relative_eq!(ls.line_separation(), 2.0 * NV_E_HZ, max_relative = 1e-9);
    }
}
