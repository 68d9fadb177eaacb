//! Shared domain types: oscillator modes, spectra, gate configurations and
//! detuning noise models.
//!
//! Every frequency stored here is angular (rad/s). Conversion from the Hz
//! values found in input files happens once, in [`crate::io`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::PhaseSequence;

/// Largest number of qubits the toolkit models.
pub const MAX_QUBITS: usize = 2;

/// Largest drift polynomial order accepted by [`NoiseModel::validate`].
pub const MAX_DRIFT_ORDER: usize = 8;

/// Relative tolerance used when matching a sequence duration to a gate time.
pub const DURATION_RTOL: f64 = 1e-12;

/// One bosonic mode as seen by the drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    /// Drive detuning from this mode, rad/s.
    pub detuning: f64,
    /// Real coupling factor for each qubit.
    pub couplings: Vec<f64>,
    /// Mean phonon number of the initial thermal state.
    pub thermal_occupation: f64,
}

impl Mode {
    pub fn new(detuning: f64, couplings: Vec<f64>, thermal_occupation: f64) -> Self {
        Self { detuning, couplings, thermal_occupation }
    }

    /// Product of the two qubits' couplings; zero for single-qubit spectra.
    pub fn coupling_product(&self) -> f64 {
        match self.couplings.as_slice() {
            [a, b] => a * b,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrum {
    pub qubit_count: usize,
    pub modes: Vec<Mode>,
}

impl ModeSpectrum {
    /// Builds a spectrum and rejects it if [`validate_spectrum`] reports any violation.
    pub fn new(qubit_count: usize, modes: Vec<Mode>) -> Result<Self> {
        let spectrum = Self { qubit_count, modes };
        spectrum.ensure_valid()?;
        Ok(spectrum)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = validate_spectrum(self);
        if report.is_ok() {
            Ok(())
        } else {
            let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            Err(Error::invalid(msgs.join("; ")))
        }
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Copy with every detuning shifted by `offset` rad/s.
    pub fn shifted(&self, offset: f64) -> Self {
        let modes = self
            .modes
            .iter()
            .map(|m| Mode { detuning: m.detuning + offset, ..m.clone() })
            .collect();
        Self { qubit_count: self.qubit_count, modes }
    }

    pub fn detunings(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.detuning).collect()
    }

    pub(crate) fn require_qubits(&self, n: usize) -> Result<()> {
        if self.qubit_count != n {
            let expected = if n == 1 { "1" } else { "2" };
            return Err(Error::QubitCount { expected, found: self.qubit_count });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    QubitCount,
    NoModes,
    CouplingArity,
    NegativeOccupation,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub mode: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            Some(k) => write!(f, "mode {}: {}", k + 1, self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Non-fatal findings, e.g. two modes sharing a detuning.
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    fn push(&mut self, kind: ViolationKind, mode: Option<usize>, message: impl Into<String>) {
        self.violations.push(Violation { kind, mode, message: message.into() });
    }
}

/// Checks a spectrum for structural problems without failing.
pub fn validate_spectrum(spectrum: &ModeSpectrum) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = spectrum.qubit_count;
    if n == 0 || n > MAX_QUBITS {
        report.push(ViolationKind::QubitCount, None, format!("qubit count {n} not in 1..={MAX_QUBITS}"));
    }
    if spectrum.modes.is_empty() {
        report.push(ViolationKind::NoModes, None, "spectrum has no modes");
    }
    for (k, mode) in spectrum.modes.iter().enumerate() {
        if mode.couplings.len() != n {
            report.push(
                ViolationKind::CouplingArity,
                Some(k),
                format!("coupling arity {} does not match qubit count {n}", mode.couplings.len()),
            );
        }
        if mode.thermal_occupation < 0.0 {
            report.push(
                ViolationKind::NegativeOccupation,
                Some(k),
                format!("negative occupation {}", mode.thermal_occupation),
            );
        }
        let finite = mode.detuning.is_finite()
            && mode.thermal_occupation.is_finite()
            && mode.couplings.iter().all(|c| c.is_finite());
        if !finite {
            report.push(ViolationKind::NonFinite, Some(k), "non-finite value");
        }
    }
    for (i, a) in spectrum.modes.iter().enumerate() {
        for (j, b) in spectrum.modes.iter().enumerate().skip(i + 1) {
            if a.detuning == b.detuning {
                report.warnings.push(format!("modes {} and {} share detuning {} rad/s", i + 1, j + 1, a.detuning));
            }
        }
    }
    report
}

/// Spin basis of the state-dependent force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    #[default]
    X,
    Y,
    Z,
}

impl std::str::FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Basis::X),
            "y" => Ok(Basis::Y),
            "z" => Ok(Basis::Z),
            other => Err(Error::invalid(format!("unknown basis '{other}', expected x, y or z"))),
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::X => "x",
            Basis::Y => "y",
            Basis::Z => "z",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    /// Overall coupling strength Ω, rad/s.
    pub rabi: f64,
    /// Gate duration, s.
    pub gate_time: f64,
    pub basis: Basis,
    pub sequence: PhaseSequence,
}

impl GateConfig {
    pub fn new(rabi: f64, gate_time: f64, basis: Basis, sequence: PhaseSequence) -> Result<Self> {
        let config = Self { rabi, gate_time, basis, sequence };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi >= 0.0 && self.rabi.is_finite()) {
            return Err(Error::invalid(format!("rabi frequency must be finite and ≥ 0, got {}", self.rabi)));
        }
        if !(self.gate_time > 0.0 && self.gate_time.is_finite()) {
            return Err(Error::invalid(format!("gate time must be positive, got {}", self.gate_time)));
        }
        let total = self.sequence.total_duration();
        if ((total - self.gate_time) / self.gate_time).abs() > DURATION_RTOL {
            return Err(Error::invalid(format!(
                "sequence lasts {total} s but gate time is {} s",
                self.gate_time
            )));
        }
        Ok(())
    }

    pub fn with_rabi(&self, rabi: f64) -> Self {
        Self { rabi, ..self.clone() }
    }
}

/// Detuning error families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Constant offset ε (rad/s).
    StaticOffset { epsilon: f64 },
    /// β(t) = depth · sin(omega_mod · t + phase).
    Sinusoid { depth: f64, omega_mod: f64, phase: f64 },
    /// β(t) = Σ_j coefficients[j] · t^j.
    PolynomialDrift { coefficients: Vec<f64> },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::StaticOffset { epsilon } if !epsilon.is_finite() => {
                Err(Error::invalid("static offset must be finite"))
            }
            NoiseModel::Sinusoid { depth, omega_mod, phase } => {
                if !(*depth >= 0.0) || !depth.is_finite() {
                    return Err(Error::invalid(format!("sinusoid depth must be ≥ 0, got {depth}")));
                }
                if !omega_mod.is_finite() || !phase.is_finite() {
                    return Err(Error::invalid("sinusoid parameters must be finite"));
                }
                Ok(())
            }
            NoiseModel::PolynomialDrift { coefficients } => {
                if coefficients.is_empty() || coefficients.len() > MAX_DRIFT_ORDER + 1 {
                    return Err(Error::invalid(format!(
                        "drift polynomial needs 1..={} coefficients, got {}",
                        MAX_DRIFT_ORDER + 1,
                        coefficients.len()
                    )));
                }
                if coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(Error::invalid("drift coefficients must be finite"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Instantaneous value β(t).
    pub fn value(&self, t: f64) -> f64 {
        match self {
            NoiseModel::StaticOffset { epsilon } => *epsilon,
            NoiseModel::Sinusoid { depth, omega_mod, phase } => depth * (omega_mod * t + phase).sin(),
            NoiseModel::PolynomialDrift { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c)
            }
        }
    }

    /// Accumulated phase ∫₀ᵗ β(t') dt'.
    pub fn accumulated_phase(&self, t: f64) -> f64 {
        match self {
            NoiseModel::StaticOffset { epsilon } => epsilon * t,
            NoiseModel::Sinusoid { depth, omega_mod, phase } => {
                // depth/ω (cos φ − cos(ωt + φ)) written without the 1/ω singularity
                let half = 0.5 * omega_mod * t;
                let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
                depth * t * sinc * (half + phase).sin()
            }
            NoiseModel::PolynomialDrift { coefficients } => coefficients
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (j, c)| acc * t + c / (j as f64 + 1.0))
                * t,
        }
    }
}

/// How a noise model enters the drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Injection {
    /// β(t) adds to every mode detuning.
    Detuning,
    /// β(t) multiplies the coupling envelope (polynomial drift only).
    CouplingEnvelope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    pub model: NoiseModel,
    pub injection: Injection,
}

impl Noise {
    pub fn detuning(model: NoiseModel) -> Self {
        Self { model, injection: Injection::Detuning }
    }

    pub fn coupling_envelope(coefficients: Vec<f64>) -> Self {
        Self { model: NoiseModel::PolynomialDrift { coefficients }, injection: Injection::CouplingEnvelope }
    }

    pub fn static_offset(epsilon: f64) -> Self {
        Self::detuning(NoiseModel::StaticOffset { epsilon })
    }

    pub fn sinusoid(depth: f64, omega_mod: f64, phase: f64) -> Self {
        Self::detuning(NoiseModel::Sinusoid { depth, omega_mod, phase })
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.injection == Injection::CouplingEnvelope
            && !matches!(self.model, NoiseModel::PolynomialDrift { .. })
        {
            return Err(Error::UnsupportedNoise(
                "coupling-envelope injection is defined for polynomial drift only".into(),
            ));
        }
        Ok(())
    }

    /// Extra drive phase Φ(t) and real amplitude envelope at time `t`.
    pub(crate) fn modulation(&self, t: f64) -> (f64, f64) {
        match self.injection {
            Injection::Detuning => (self.model.accumulated_phase(t), 1.0),
            Injection::CouplingEnvelope => (0.0, self.model.value(t)),
        }
    }

    pub(crate) fn is_static(&self) -> bool {
        self.injection == Injection::Detuning && matches!(self.model, NoiseModel::StaticOffset { .. })
    }
}
