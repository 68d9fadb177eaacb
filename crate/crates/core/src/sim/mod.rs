//! Qubit observables after a gate.
//!
//! Two engines produce the reduced qubit density matrix:
//! [`analytic`] uses the exact displacement-plus-phase solution of the
//! spin-boson drive and traces out thermal modes in closed form;
//! [`fock`] propagates the full spin ⊗ truncated-Fock state and exists to
//! check the first one. Both hand their density matrix (computational
//! basis, qubit 1 as the most significant bit) to [`GateObservables::from_density`].

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Basis;

pub mod analytic;
pub mod fock;

pub use analytic::{analytic_density, analytic_observables, direct_fidelity, parity_scan, single_ion_p1, ParityScan};
pub use fock::{fock_density, fock_oracle, FockOptions};

pub type Density = DMatrix<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub engine: &'static str,
    /// Largest weighted population seen in the top two Fock levels of any mode.
    pub truncation: Option<f64>,
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateObservables {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub parity_contrast: f64,
    /// (P₀ + P₂)/2 + π_c/2. Meaningful for two qubits only.
    pub bell_fidelity: f64,
    /// Ω·α_k(τ_g) per mode, unit coupling.
    pub per_mode_residual: Vec<Complex64>,
    pub diagnostics: Diagnostics,
}

impl GateObservables {
    /// Populations by excitation count, parity contrast 2|ρ₀₀,₁₁| and the
    /// fidelity estimate.
    pub fn from_density(rho: &Density, per_mode_residual: Vec<Complex64>, diagnostics: Diagnostics) -> Self {
        let dim = rho.nrows();
        let mut pops = [0.0; 3];
        for z in 0..dim {
            pops[(z as u32).count_ones() as usize] += rho[(z, z)].re;
        }
        let parity_contrast = if dim == 4 { (2.0 * rho[(0, 3)].norm()).min(1.0) } else { 0.0 };
        let bell_fidelity = ((pops[0] + pops[2]) / 2.0 + parity_contrast / 2.0).clamp(0.0, 1.0);
        Self {
            p0: pops[0],
            p1: pops[1],
            p2: pops[2],
            parity_contrast,
            bell_fidelity,
            per_mode_residual,
            diagnostics,
        }
    }
}

/// Columns are the σ_s eigenvectors (eigenvalue +1 then −1) in the |0⟩,|1⟩ basis.
pub(crate) fn eigenvectors(basis: Basis) -> [[Complex64; 2]; 2] {
    let h = FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| Complex64::new(re, im);
    match basis {
        // [component on |0⟩, component on |1⟩] for v₊, v₋
        Basis::X => [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]],
        Basis::Y => [[c(h, 0.0), c(0.0, h)], [c(h, 0.0), c(0.0, -h)]],
        Basis::Z => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
    }
}

/// Matrix V with V[z, b] = ⟨z|b⟩, b an eigen-branch index (bit set ⇔ eigenvalue −1).
pub(crate) fn branch_basis(basis: Basis, qubits: usize) -> Density {
    let v = eigenvectors(basis);
    let dim = 1 << qubits;
    DMatrix::from_fn(dim, dim, |z, b| {
        (0..qubits).fold(Complex64::new(1.0, 0.0), |acc, mu| {
            let shift = qubits - 1 - mu;
            let zb = (z >> shift) & 1;
            let bb = (b >> shift) & 1;
            acc * v[bb][zb]
        })
    })
}

/// Eigenvalue ±1 of qubit `mu` in branch `b`.
pub(crate) fn branch_sign(b: usize, mu: usize, qubits: usize) -> f64 {
    if (b >> (qubits - 1 - mu)) & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// State produced from |00⟩ by a perfect gate exp(i·sign·π/4 σ_s⊗σ_s).
pub fn ideal_bell_state(basis: Basis, sign: f64) -> DVector<Complex64> {
    let v = branch_basis(basis, 2);
    // σ_s⊗σ_s is diagonal in the branch basis with entries λ₁λ₂
    let theta = if sign < 0.0 { -std::f64::consts::FRAC_PI_4 } else { std::f64::consts::FRAC_PI_4 };
    let diag = DVector::from_fn(4, |b, _| {
        let lam = branch_sign(b, 0, 2) * branch_sign(b, 1, 2);
        Complex64::from_polar(1.0, theta * lam)
    });
    let coeffs = DVector::from_fn(4, |b, _| v[(0, b)].conj() * diag[b]);
    &v * coeffs
}

/// ⟨ψ|ρ|ψ⟩.
pub fn overlap(rho: &Density, psi: &DVector<Complex64>) -> f64 {
    (psi.adjoint() * rho * psi)[(0, 0)].re
}

/// Global π/2 analysis pulse about the equatorial axis at angle `phase`.
fn analysis_pulse(phase: f64, qubits: usize) -> Density {
    let h = FRAC_1_SQRT_2;
    let single = DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(h, 0.0),
            -I * Complex64::from_polar(h, -phase),
            -I * Complex64::from_polar(h, phase),
            Complex64::new(h, 0.0),
        ],
    );
    (1..qubits).fold(single.clone(), |acc, _| acc.kronecker(&single))
}

/// Parity P₀ + P₂ − P₁ after the analysis pulse.
pub fn parity_after_pulse(rho: &Density, phase: f64) -> f64 {
    let qubits = rho.nrows().trailing_zeros() as usize;
    let u = analysis_pulse(phase, qubits);
    let out = &u * rho * u.adjoint();
    (0..out.nrows())
        .map(|z| if (z as u32).count_ones() % 2 == 0 { out[(z, z)].re } else { -out[(z, z)].re })
        .sum()
}

/// Least-squares fit of c·sin(2φ + φ₀) + b; returns (c, φ₀, b).
pub fn fit_parity_fringe(phases: &[f64], parity: &[f64]) -> Result<(f64, f64, f64)> {
    if phases.len() < 8 || phases.len() != parity.len() {
        return Err(Error::invalid(format!("parity fit needs ≥ 8 phases, got {}", phases.len())));
    }
    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for (&p, &y) in phases.iter().zip(parity) {
        let row = Vector3::new((2.0 * p).sin(), (2.0 * p).cos(), 1.0);
        normal += row * row.transpose();
        rhs += row * y;
    }
    let sol = normal
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::invalid("analysis phases do not determine the fringe"))?;
    let (a, b, offset) = (sol[0], sol[1], sol[2]);
    Ok((a.hypot(b), b.atan2(a), offset))
}
