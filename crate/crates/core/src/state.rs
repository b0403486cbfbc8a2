//! Three-level density matrix.

use nalgebra::Vector3;
use thiserror::Error;

use crate::spin::{Level, Mat3, C64};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum StateError {
    #[error("density matrix is not Hermitian (max |ρ − ρ†| = {0:e})")]
    NotHermitian(f64),
    #[error("density matrix trace is {0}, expected 1")]
    BadTrace(f64),
    #[error("density matrix has negative eigenvalue {0:e}")]
    NotPositive(f64),
    #[error("density matrix has non-finite entries")]
    NonFinite,
    #[error("state vector has zero norm")]
    ZeroVector,
}

/// Hermitian, unit-trace, positive 3×3 matrix over `(|+1⟩, |0⟩, |−1⟩)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix3(Mat3);

impl DensityMatrix3 {
    /// Checks all invariants.
    pub fn new(m: Mat3) -> Result<Self, StateError> {
        let rho = DensityMatrix3(m);
        rho.check(HERMITIAN_TOL, TRACE_TOL, POSITIVITY_TOL)?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(m: Mat3) -> Self {
        DensityMatrix3(m)
    }

    /// `|l⟩⟨l|`.
    pub fn basis(level: Level) -> Self {
        let mut m = Mat3::zeros();
        m[(level.index(), level.index())] = C64::new(1.0, 0.0);
        DensityMatrix3(m)
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) ket.
    pub fn pure(ket: Vector3<C64>) -> Result<Self, StateError> {
        let n = ket.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(StateError::ZeroVector);
        }
        let k = ket / C64::from(n);
        Ok(DensityMatrix3(k * k.adjoint()))
    }

    /// Diagonal state from populations in `(|+1⟩, |0⟩, |−1⟩)` order.
    pub fn diagonal(pops: [f64; 3]) -> Result<Self, StateError> {
        let m = Mat3::from_diagonal(&Vector3::new(
            C64::from(pops[0]),
            C64::from(pops[1]),
            C64::from(pops[2]),
        ));
        Self::new(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn into_matrix(self) -> Mat3 {
        self.0
    }

    pub fn population(&self, level: Level) -> f64 {
        self.0[(level.index(), level.index())].re
    }

    /// Populations in `(|+1⟩, |0⟩, |−1⟩)` order.
    pub fn populations(&self) -> [f64; 3] {
        Level::ALL.map(|l| self.population(l))
    }

    /// `⟨a|ρ|b⟩`.
    pub fn coherence(&self, a: Level, b: Level) -> C64 {
        self.0[(a.index(), b.index())]
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.0 - self.0.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (self.0 + self.0.adjoint()) * C64::from(0.5);
        h.symmetric_eigenvalues().min()
    }

    /// Largest entrywise difference.
    pub fn distance(&self, other: &DensityMatrix3) -> f64 {
        (self.0 - other.0)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn check(&self, herm_tol: f64, trace_tol: f64, pos_tol: f64) -> Result<(), StateError> {
        if self
            .0
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(StateError::NonFinite);
        }
        let herm = self.hermiticity_error();
        if herm > herm_tol {
            return Err(StateError::NotHermitian(herm));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
            return Err(StateError::BadTrace(tr.re));
        }
        let min = self.min_eigenvalue();
        if min < -pos_tol {
            return Err(StateError::NotPositive(min));
        }
        Ok(())
    }

    /// `U ρ U†`.
    pub fn conjugate(&self, u: &Mat3) -> Self {
        DensityMatrix3(u * self.0 * u.adjoint())
    }

    /// Convex combination `Σ wᵢ ρᵢ`; weights are assumed to sum to one.
    pub fn mixture<'a>(parts: impl IntoIterator<Item = (f64, &'a DensityMatrix3)>) -> Self {
        let m = parts
            .into_iter()
            .fold(Mat3::zeros(), |acc, (w, r)| acc + r.0 * C64::from(w));
        DensityMatrix3(m)
    }
}
