use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CVector4 = Vector4<Complex64>;

const STATE_TOL: f64 = 1e-10;

/// Measurement basis of both analyzers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Basis {
    /// Rectilinear: outcomes H (u) and V (v).
    HV,
    /// Diagonal: outcomes D (u) and A (v), the ±45° superpositions.
    DA,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::HV, Basis::DA];

    /// Single-qubit vectors of the `u` and `v` outcomes.
    fn outcomes(self) -> [[Complex64; 2]; 2] {
        let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        match self {
            Basis::HV => [[one, zero], [zero, one]],
            Basis::DA => [[r, r], [r, -r]],
        }
    }

    /// Product states for outcome pairs `uu, uv, vu, vv`.
    pub fn projector_vectors(self) -> [CVector4; 4] {
        let o = self.outcomes();
        let kron = |a: [Complex64; 2], b: [Complex64; 2]| {
            CVector4::new(a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
        };
        [kron(o[0], o[0]), kron(o[0], o[1]), kron(o[1], o[0]), kron(o[1], o[1])]
    }

    /// Outcome labels in `uu, uv, vu, vv` order.
    pub fn labels(self) -> [&'static str; 4] {
        match self {
            Basis::HV => ["HH", "HV", "VH", "VV"],
            Basis::DA => ["DD", "DA", "AD", "AA"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Basis::HV => "HV",
            Basis::DA => "DA",
        }
    }
}

/// `(|HV⟩ − |VH⟩)/√2`
pub fn singlet_vector() -> CVector4 {
    let r = FRAC_1_SQRT_2;
    CVector4::new(
        Complex64::new(0.0, 0.0),
        Complex64::new(r, 0.0),
        Complex64::new(-r, 0.0),
        Complex64::new(0.0, 0.0),
    )
}

/// `(|HV⟩ + e^{iφ}|VH⟩)/√2`
pub fn phased_pair_vector(phase: f64) -> CVector4 {
    let r = FRAC_1_SQRT_2;
    CVector4::new(
        Complex64::new(0.0, 0.0),
        Complex64::new(r, 0.0),
        Complex64::from_polar(r, phase),
        Complex64::new(0.0, 0.0),
    )
}

/// Two-qubit density matrix; basis order `HH, HV, VH, VV`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    rho: Matrix4<Complex64>,
}

impl TwoQubitState {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(rho: Matrix4<Complex64>) -> Result<Self> {
        let state = Self { rho };
        state.validate()?;
        Ok(state)
    }

    pub fn pure(psi: &CVector4) -> Result<Self> {
        let norm = psi.norm_squared();
        if !(norm > 0.0) {
            return Err(Error::Domain("zero state vector".into()));
        }
        Self::new(psi * psi.adjoint() / Complex64::new(norm, 0.0))
    }

    pub fn singlet() -> Self {
        Self::pure(&singlet_vector()).expect("singlet is a valid state")
    }

    pub fn maximally_mixed() -> Self {
        Self {
            rho: Matrix4::identity() * Complex64::new(0.25, 0.0),
        }
    }

    /// `p·|Ψ⁻⟩⟨Ψ⁻| + (1−p)·I/4`
    pub fn werner(p: f64) -> Result<Self> {
        Self::noisy_pair(p, std::f64::consts::PI)
    }

    /// `p·|ψ_φ⟩⟨ψ_φ| + (1−p)·I/4` with `|ψ_φ⟩ ∝ |HV⟩ + e^{iφ}|VH⟩`.
    pub fn noisy_pair(p: f64, phase: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("mixing parameter {p} outside [0, 1]")));
        }
        let psi = phased_pair_vector(phase);
        let pure = psi * psi.adjoint();
        Self::new(pure * Complex64::new(p, 0.0) + Matrix4::identity() * Complex64::new((1.0 - p) / 4.0, 0.0))
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.rho
    }

    pub fn validate(&self) -> Result<()> {
        let rho = &self.rho;
        if (rho - rho.adjoint()).norm() > STATE_TOL {
            return Err(Error::Domain("density matrix is not Hermitian".into()));
        }
        let trace = rho.trace();
        if (trace.re - 1.0).abs() > STATE_TOL || trace.im.abs() > STATE_TOL {
            return Err(Error::Domain(format!("trace {trace} differs from 1")));
        }
        let min = self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -STATE_TOL {
            return Err(Error::Domain(format!("negative eigenvalue {min}")));
        }
        Ok(())
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        let h = (self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        let ev = h.symmetric_eigenvalues();
        [ev[0], ev[1], ev[2], ev[3]]
    }

    /// `⟨ψ|ρ|ψ⟩` for a normalized `psi`.
    pub fn expectation(&self, psi: &CVector4) -> f64 {
        (psi.adjoint() * self.rho * psi)[(0, 0)].re
    }

    /// Fidelity with the singlet.
    pub fn singlet_fidelity(&self) -> f64 {
        self.expectation(&singlet_vector())
    }
}

/// Born-rule probabilities of `uu, uv, vu, vv` in `basis`.
pub fn outcome_probabilities(state: &TwoQubitState, basis: Basis) -> Result<[f64; 4]> {
    state.validate()?;
    let vectors = basis.projector_vectors();
    let mut p = [0.0; 4];
    for (pk, v) in p.iter_mut().zip(&vectors) {
        *pk = state.expectation(v).max(0.0);
    }
    Ok(p)
}

/// Singlet fidelity of the Werner state with mixing `p`.
pub fn werner_fidelity(p: f64) -> f64 {
    (3.0 * p + 1.0) / 4.0
}
