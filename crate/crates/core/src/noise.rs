//! Robustness of a gate to detuning errors: static sweeps, modulated-noise
//! response and first-order filter functions.
//!
//! Linearizing the drive phase e^{iΦ(t)} for Φ from β(t) = d·sin(ωt + ϕ)
//! gives, after averaging over ϕ,
//!
//!   E[P₁] ≈ (d²/4)·(F(ω) + F(−ω)),
//!   F(ω) = Σ_k (Ω f_k^μ)² |G_k(δ_k + ω) − G_k(δ_k)|² / ω²,
//!
//! where G_k(x) is the noiseless endpoint displacement at detuning x. A line
//! S(ω) = π[δ(ω − ω_m) + δ(ω + ω_m)] corresponds to d² = 2.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::design::{solve_rabi, BELL_PHASE};
use crate::error::{Error, Result};
use crate::model::{GateConfig, ModeSpectrum, Noise};
use crate::parallel::map_ordered;
use crate::sequence::PhaseSequence;
use crate::sim::analytic_observables;
use crate::trajectory::{displacement, displacement_noisy};

/// Values this far below zero are numerical noise and get clamped.
const NEGATIVE_FLOOR: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    P1,
    Fidelity,
    FilterFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AbscissaUnit {
    RadPerSecond,
    /// ω τ_g / 2π.
    Dimensionless,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseCurve {
    pub abscissa: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: CurveKind,
    pub unit: AbscissaUnit,
    /// SHA-256 of the gate and spectrum the curve was computed for.
    pub digest: String,
}

fn clamp_value(v: f64) -> Result<f64> {
    if !v.is_finite() || v < NEGATIVE_FLOOR {
        return Err(Error::invalid(format!("response value {v} is not a finite non-negative number")));
    }
    Ok(v.max(0.0))
}

impl ResponseCurve {
    fn new(abscissa: Vec<f64>, values: Vec<f64>, kind: CurveKind, unit: AbscissaUnit, digest: String) -> Result<Self> {
        let values = values.into_iter().map(clamp_value).collect::<Result<_>>()?;
        Ok(Self { abscissa, values, kind, unit, digest })
    }
}

/// Hex SHA-256 of the JSON form of a gate and its spectrum.
pub fn config_digest(config: &GateConfig, spectrum: &ModeSpectrum) -> String {
    use sha2::{Digest, Sha256};
    let text = serde_json::to_string(&(config, spectrum)).unwrap_or_default();
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn check_qubit(spectrum: &ModeSpectrum, qubit: usize) -> Result<()> {
    if qubit >= spectrum.qubit_count {
        return Err(Error::invalid(format!(
            "qubit {} does not exist (spectrum has {})",
            qubit + 1,
            spectrum.qubit_count
        )));
    }
    Ok(())
}

/// Per-mode drive-scaled endpoint b_k = Ω f_k^μ α_k(τ_g).
fn endpoints(config: &GateConfig, spectrum: &ModeSpectrum, noise: Option<&Noise>, qubit: usize) -> Result<Vec<num_complex::Complex64>> {
    config.validate()?;
    spectrum.ensure_valid()?;
    check_qubit(spectrum, qubit)?;
    let tau = config.sequence.total_duration();
    spectrum
        .modes
        .iter()
        .map(|m| {
            let alpha = match noise {
                Some(n) => displacement_noisy(&config.sequence, m.detuning, n, tau)?,
                None => displacement(&config.sequence, m.detuning, tau)?,
            };
            Ok(alpha * (config.rabi * m.couplings[qubit]))
        })
        .collect()
}

/// Small-displacement P₁ ≈ Σ_k |Ω f_k^μ α_k(τ_g)|² for qubit `qubit` (zero-based).
pub fn residual_p1(config: &GateConfig, spectrum: &ModeSpectrum, noise: Option<&Noise>, qubit: usize) -> Result<f64> {
    Ok(endpoints(config, spectrum, noise, qubit)?.iter().map(|b| b.norm_sqr()).sum())
}

/// P₁ of one qubit driven alone, thermally averaged:
/// (1 − Π_k exp(−2|b_k|²(2n̄_k + 1)))/2.
pub fn single_qubit_p1(config: &GateConfig, spectrum: &ModeSpectrum, noise: Option<&Noise>, qubit: usize) -> Result<f64> {
    let b = endpoints(config, spectrum, noise, qubit)?;
    let exponent: f64 = b
        .iter()
        .zip(&spectrum.modes)
        .map(|(b, m)| 2.0 * b.norm_sqr() * (2.0 * m.thermal_occupation + 1.0))
        .sum();
    Ok(-0.5 * (-exponent).exp_m1())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StaticSweepOptions {
    /// Use the full thermal two-qubit P₁ instead of the quadratic estimate.
    pub exact: bool,
    /// Re-solve Ω at every offset so the gate stays maximally entangling.
    pub rescale_rabi: bool,
    /// Qubit used by the quadratic estimate.
    pub qubit: usize,
}

impl Default for StaticSweepOptions {
    fn default() -> Self {
        Self { exact: true, rescale_rabi: false, qubit: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticPoint {
    pub error: f64,
    pub p1: Option<f64>,
    pub gap: Option<String>,
}

fn static_point(config: &GateConfig, spectrum: &ModeSpectrum, error: f64, options: StaticSweepOptions) -> Result<f64> {
    let noise = Noise::static_offset(error);
    let config = if options.rescale_rabi {
        let rabi = solve_rabi(&config.sequence, &spectrum.shifted(error), BELL_PHASE)?;
        config.with_rabi(rabi)
    } else {
        config.clone()
    };
    let p1 = if options.exact {
        analytic_observables(&config, spectrum, Some(&noise))?.p1
    } else {
        residual_p1(&config, spectrum, Some(&noise), options.qubit)?
    };
    clamp_value(p1)
}

/// P₁ under a static detuning offset for every listed error (rad/s).
pub fn static_sweep_points(
    config: &GateConfig,
    spectrum: &ModeSpectrum,
    errors: &[f64],
    options: StaticSweepOptions,
    workers: usize,
) -> Result<Vec<StaticPoint>> {
    config.validate()?;
    spectrum.ensure_valid()?;
    map_ordered(workers, errors, |&e| match static_point(config, spectrum, e, options) {
        Ok(p1) => StaticPoint { error: e, p1: Some(p1), gap: None },
        Err(err) => StaticPoint { error: e, p1: None, gap: Some(err.to_string()) },
    })
}

/// As [`static_sweep_points`], failing on the first point without a value.
pub fn static_sweep(
    config: &GateConfig,
    spectrum: &ModeSpectrum,
    errors: &[f64],
    options: StaticSweepOptions,
    workers: usize,
) -> Result<ResponseCurve> {
    let points = static_sweep_points(config, spectrum, errors, options, workers)?;
    let mut values = Vec::with_capacity(points.len());
    for p in points {
        match p.p1 {
            Some(v) => values.push(v),
            None => return Err(Error::invalid(format!("static error {}: {}", p.error, p.gap.unwrap_or_default()))),
        }
    }
    ResponseCurve::new(errors.to_vec(), values, CurveKind::P1, AbscissaUnit::RadPerSecond, config_digest(config, spectrum))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterFunction {
    /// Angular frequencies, rad/s.
    pub omegas: Vec<f64>,
    /// Σ_k F_k(ω).
    pub total: Vec<f64>,
    /// F_k(ω), indexed [mode][frequency].
    pub per_mode: Vec<Vec<f64>>,
}

impl FilterFunction {
    pub fn to_curve(&self, gate_time: f64, digest: String) -> Result<ResponseCurve> {
        ResponseCurve::new(
            self.omegas.iter().map(|w| w * gate_time / TAU).collect(),
            self.total.clone(),
            CurveKind::FilterFunction,
            AbscissaUnit::Dimensionless,
            digest,
        )
    }
}

fn modal_filter(seq: &PhaseSequence, detuning: f64, scale: f64, omega: f64) -> Result<f64> {
    let tau = seq.total_duration();
    let g0 = displacement(seq, detuning, tau)?;
    let g1 = displacement(seq, detuning + omega, tau)?;
    clamp_value(scale * (g1 - g0).norm_sqr() / (omega * omega))
}

/// First-order modal filter functions at signed frequencies. Negative ω is
/// allowed here; the public entry points only take ω > 0.
fn filter_values(seq: &PhaseSequence, spectrum: &ModeSpectrum, rabi: f64, omegas: &[f64], qubit: usize) -> Result<FilterFunction> {
    let per_mode = spectrum
        .modes
        .iter()
        .map(|m| {
            let scale = (rabi * m.couplings[qubit]).powi(2);
            omegas.iter().map(|&w| modal_filter(seq, m.detuning, scale, w)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let total = (0..omegas.len()).map(|i| per_mode.iter().map(|f| f[i]).sum()).collect();
    Ok(FilterFunction { omegas: omegas.to_vec(), total, per_mode })
}

fn check_omegas(omegas: &[f64]) -> Result<()> {
    if let Some(w) = omegas.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::invalid(format!("filter-function frequencies must be positive, got {w}")));
    }
    Ok(())
}

/// F(ω) and its per-mode breakdown for qubit `qubit`.
pub fn filter_function_first_order(
    seq: &PhaseSequence,
    spectrum: &ModeSpectrum,
    rabi: f64,
    omegas: &[f64],
    qubit: usize,
) -> Result<FilterFunction> {
    spectrum.ensure_valid()?;
    check_qubit(spectrum, qubit)?;
    check_omegas(omegas)?;
    filter_values(seq, spectrum, rabi, omegas, qubit)
}

/// F(ω) + F(−ω), the combination a phase-averaged modulation measures.
pub fn filter_function_symmetric(
    seq: &PhaseSequence,
    spectrum: &ModeSpectrum,
    rabi: f64,
    omegas: &[f64],
    qubit: usize,
) -> Result<FilterFunction> {
    let pos = filter_function_first_order(seq, spectrum, rabi, omegas, qubit)?;
    let negated: Vec<f64> = omegas.iter().map(|w| -w).collect();
    let neg = filter_values(seq, spectrum, rabi, &negated, qubit)?;
    let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<f64>>();
    Ok(FilterFunction {
        omegas: omegas.to_vec(),
        total: add(&pos.total, &neg.total),
        per_mode: pos.per_mode.iter().zip(&neg.per_mode).map(|(a, b)| add(a, b)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseAverage {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

pub const MIN_PHASE_GRID: usize = 8;

/// Single-qubit P₁ under sinusoidal detuning noise, averaged over a uniform
/// grid of modulation start phases in [0, 2π).
pub fn phase_averaged_response(
    config: &GateConfig,
    spectrum: &ModeSpectrum,
    omega_mod: f64,
    depth: f64,
    phase_grid: usize,
    qubit: usize,
) -> Result<PhaseAverage> {
    if phase_grid < MIN_PHASE_GRID {
        return Err(Error::invalid(format!("phase grid needs ≥ {MIN_PHASE_GRID} points, got {phase_grid}")));
    }
    let mut values = Vec::with_capacity(phase_grid);
    for j in 0..phase_grid {
        let noise = Noise::sinusoid(depth, omega_mod, TAU * j as f64 / phase_grid as f64);
        values.push(clamp_value(single_qubit_p1(config, spectrum, Some(&noise), qubit)?)?);
    }
    Ok(PhaseAverage {
        mean: values.iter().sum::<f64>() / phase_grid as f64,
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// [`phase_averaged_response`] at every modulation frequency.
pub fn response_sweep(
    config: &GateConfig,
    spectrum: &ModeSpectrum,
    omegas: &[f64],
    depth: f64,
    phase_grid: usize,
    qubit: usize,
    workers: usize,
) -> Result<Vec<PhaseAverage>> {
    map_ordered(workers, omegas, |&w| phase_averaged_response(config, spectrum, w, depth, phase_grid, qubit))?
        .into_iter()
        .collect()
}
