//! Closed-form gate evolution.
//!
//! The drive is linear in the mode operators, so the propagator is exactly
//! exp(iΩ² Σ_k A_k S_k²) Π_k D(Ω S_k α_k) with S_k = Σ_μ f_k^μ σ_s^μ. In the
//! σ_s eigenbasis every branch λ sees a plain displacement, and the thermal
//! trace of D(β)·D(β')† is exp(i Im β'*β − |β − β'|²(n̄ + ½)).

use num_complex::Complex64;
use serde::Serialize;

use super::{branch_basis, branch_sign, fit_parity_fringe, ideal_bell_state, overlap, parity_after_pulse};
use super::{Density, Diagnostics, GateObservables};
use crate::error::{Error, Result};
use crate::model::{GateConfig, ModeSpectrum, Noise, MAX_QUBITS};
use crate::quadrature::PathIntegral;
use crate::trajectory::{closed_path, noisy_path};

fn check_inputs(config: &GateConfig, spectrum: &ModeSpectrum, noise: Option<&Noise>) -> Result<()> {
    config.validate()?;
    spectrum.ensure_valid()?;
    if spectrum.qubit_count > MAX_QUBITS {
        return Err(Error::QubitCount { expected: "1 or 2", found: spectrum.qubit_count });
    }
    if let Some(n) = noise {
        n.validate()?;
    }
    Ok(())
}

/// Reduced qubit density matrix after the gate, computational basis, plus
/// Ω·α_k(τ_g) for each mode.
pub fn analytic_density(
    config: &GateConfig,
    spectrum: &ModeSpectrum,
    noise: Option<&Noise>,
) -> Result<(Density, Vec<Complex64>)> {
    check_inputs(config, spectrum, noise)?;
    let paths: Vec<PathIntegral> = spectrum
        .modes
        .iter()
        .map(|m| noisy_path(&config.sequence, m.detuning, noise))
        .collect::<Result<_>>()?;
    let n = spectrum.qubit_count;
    let dim = 1usize << n;
    let omega = config.rabi;

    // per branch: force S_k(λ) on each mode and geometric phase θ_λ
    let force = |b: usize, k: usize| -> f64 {
        spectrum.modes[k].couplings.iter().enumerate().map(|(mu, f)| f * branch_sign(b, mu, n)).sum()
    };
    let betas: Vec<Vec<Complex64>> = (0..dim)
        .map(|b| paths.iter().enumerate().map(|(k, p)| p.increment * (omega * force(b, k))).collect())
        .collect();
    let thetas: Vec<f64> = (0..dim)
        .map(|b| omega * omega * paths.iter().enumerate().map(|(k, p)| p.area * force(b, k).powi(2)).sum::<f64>())
        .collect();

    let v = branch_basis(config.basis, n);
    let c: Vec<Complex64> = (0..dim).map(|b| v[(0, b)].conj()).collect();
    let rho_branch = Density::from_fn(dim, dim, |b, bp| {
        let mut log = Complex64::new(0.0, thetas[b] - thetas[bp]);
        for (k, mode) in spectrum.modes.iter().enumerate() {
            let (beta, betap) = (betas[b][k], betas[bp][k]);
            log += Complex64::new(
                -(beta - betap).norm_sqr() * (mode.thermal_occupation + 0.5),
                (betap.conj() * beta).im,
            );
        }
        c[b] * c[bp].conj() * log.exp()
    });
    let rho = &v * rho_branch * v.adjoint();
    let residual = paths.iter().map(|p| p.increment * omega).collect();
    Ok((rho, residual))
}

fn analytic_diagnostics() -> Diagnostics {
    Diagnostics { engine: "analytic", truncation: None, reliable: true }
}

/// Populations, parity contrast and fidelity estimate from the exact solution.
pub fn analytic_observables(
    config: &GateConfig,
    spectrum: &ModeSpectrum,
    noise: Option<&Noise>,
) -> Result<GateObservables> {
    let (rho, residual) = analytic_density(config, spectrum, noise)?;
    Ok(GateObservables::from_density(&rho, residual, analytic_diagnostics()))
}

/// Thermally averaged P₁ of a single qubit.
pub fn single_ion_p1(config: &GateConfig, spectrum: &ModeSpectrum, noise: Option<&Noise>) -> Result<f64> {
    spectrum.require_qubits(1)?;
    Ok(analytic_observables(config, spectrum, noise)?.p1)
}

/// Sign of the noiseless entangling phase; positive when it vanishes.
fn entangling_sign(config: &GateConfig, spectrum: &ModeSpectrum) -> f64 {
    let s: f64 = spectrum
        .modes
        .iter()
        .map(|m| m.coupling_product() * closed_path(&config.sequence, m.detuning).area)
        .sum();
    if s < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// ⟨Ψ|ρ|Ψ⟩ against the Bell state an ideal gate of the same sign would make.
pub fn direct_fidelity(config: &GateConfig, spectrum: &ModeSpectrum, noise: Option<&Noise>) -> Result<f64> {
    spectrum.require_qubits(2)?;
    let (rho, _) = analytic_density(config, spectrum, noise)?;
    let target = ideal_bell_state(config.basis, entangling_sign(config, spectrum));
    Ok(overlap(&rho, &target))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParityScan {
    pub parity: Vec<f64>,
    pub contrast: f64,
    pub fitted_phase: f64,
    pub offset: f64,
    /// (P₀ + P₂)/2 + contrast/2.
    pub fidelity: f64,
}

/// Parity after a global π/2 pulse at each analysis phase, and the fitted fringe.
pub fn parity_scan(
    config: &GateConfig,
    spectrum: &ModeSpectrum,
    analysis_phases: &[f64],
    noise: Option<&Noise>,
) -> Result<ParityScan> {
    spectrum.require_qubits(2)?;
    if analysis_phases.len() < 8 {
        return Err(Error::invalid(format!("parity scan needs ≥ 8 analysis phases, got {}", analysis_phases.len())));
    }
    let (rho, residual) = analytic_density(config, spectrum, noise)?;
    let parity: Vec<f64> = analysis_phases.iter().map(|&p| parity_after_pulse(&rho, p)).collect();
    let (contrast, fitted_phase, offset) = fit_parity_fringe(analysis_phases, &parity)?;
    let obs = GateObservables::from_density(&rho, residual, analytic_diagnostics());
    let fidelity = ((obs.p0 + obs.p2) / 2.0 + contrast / 2.0).clamp(0.0, 1.0);
    Ok(ParityScan { parity, contrast, fitted_phase, offset, fidelity })
}
