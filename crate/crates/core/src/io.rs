//! File formats. Frequencies are Hz on disk and rad/s in memory; this module
//! is the only place that converts between the two.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::design::{DesignResult, SweepPoint};
use crate::error::{Error, Result};
use crate::model::{Basis, GateConfig, Mode, ModeSpectrum, Noise, NoiseModel};
use crate::noise::{FilterFunction, PhaseAverage, StaticPoint};
use crate::sequence::{BichromaticSegment, PhaseSequence, Segment};
use crate::sim::GateObservables;
use crate::trajectory::Trajectory;

pub fn hz_to_rad(f: f64) -> f64 {
    f * TAU
}

pub fn rad_to_hz(w: f64) -> f64 {
    w / TAU
}

/// Shortest decimal that parses back to the same double, '.' separator.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn parse_error(what: &str, e: serde_json::Error) -> Error {
    Error::invalid(format!("{what}: {e}"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeEntry {
    detuning_hz: f64,
    couplings: Vec<f64>,
    #[serde(default)]
    nbar: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumFile {
    qubits: usize,
    modes: Vec<ModeEntry>,
}

impl From<&ModeSpectrum> for SpectrumFile {
    fn from(s: &ModeSpectrum) -> Self {
        Self {
            qubits: s.qubit_count,
            modes: s
                .modes
                .iter()
                .map(|m| ModeEntry {
                    detuning_hz: rad_to_hz(m.detuning),
                    couplings: m.couplings.clone(),
                    nbar: m.thermal_occupation,
                })
                .collect(),
        }
    }
}

impl SpectrumFile {
    fn into_spectrum(self) -> Result<ModeSpectrum> {
        let modes = self.modes.into_iter().map(|m| Mode::new(hz_to_rad(m.detuning_hz), m.couplings, m.nbar)).collect();
        ModeSpectrum::new(self.qubits, modes)
    }
}

/// `{"qubits": N, "modes": [{"detuning_hz", "couplings", "nbar"}]}`.
/// The spectrum stored inside a design file is accepted too.
pub fn spectrum_from_json(text: &str) -> Result<ModeSpectrum> {
    let embedded = match serde_json::from_str::<serde_json::Value>(text) {
        Ok(serde_json::Value::Object(mut map)) if map.contains_key("gate") => map.remove("spectrum"),
        _ => None,
    };
    let file: SpectrumFile = match embedded {
        Some(v) => serde_json::from_value(v),
        None => serde_json::from_str(text),
    }
    .map_err(|e| parse_error("spectrum", e))?;
    file.into_spectrum()
}

pub fn spectrum_to_json(spectrum: &ModeSpectrum) -> Result<String> {
    Ok(serde_json::to_string_pretty(&SpectrumFile::from(spectrum))?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentEntry {
    duration_s: f64,
    phase_rad: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateFile {
    rabi_hz: f64,
    gate_time_s: f64,
    #[serde(default)]
    basis: Basis,
    sequence: Vec<SegmentEntry>,
}

impl From<&GateConfig> for GateFile {
    fn from(c: &GateConfig) -> Self {
        Self {
            rabi_hz: rad_to_hz(c.rabi),
            gate_time_s: c.gate_time,
            basis: c.basis,
            sequence: c
                .sequence
                .segments()
                .iter()
                .map(|s| SegmentEntry { duration_s: s.duration, phase_rad: s.phase })
                .collect(),
        }
    }
}

impl GateFile {
    fn into_config(self) -> Result<GateConfig> {
        let segments = self.sequence.into_iter().map(|s| Segment { duration: s.duration_s, phase: s.phase_rad }).collect();
        GateConfig::new(hz_to_rad(self.rabi_hz), self.gate_time_s, self.basis, PhaseSequence::new(segments)?)
    }
}

/// `{"rabi_hz", "gate_time_s", "basis", "sequence": [{"duration_s", "phase_rad"}]}`.
/// Design files are accepted too; their extra fields are ignored.
pub fn gate_from_json(text: &str) -> Result<GateConfig> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| parse_error("gate", e))?;
    let gate = match value {
        serde_json::Value::Object(mut map) if map.contains_key("gate") => map.remove("gate").unwrap_or_default(),
        other => other,
    };
    let file: GateFile = serde_json::from_value(gate).map_err(|e| parse_error("gate", e))?;
    file.into_config()
}

pub fn gate_to_json(config: &GateConfig) -> Result<String> {
    Ok(serde_json::to_string_pretty(&GateFile::from(config))?)
}

/// Noise description in Hz.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum NoiseFile {
    StaticOffset {
        epsilon_hz: f64,
    },
    Sinusoid {
        depth_hz: f64,
        omega_mod_hz: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    /// Coefficients of β(t) = Σ c_j t^j in Hz/s^j; with `envelope` they are
    /// dimensionless factors on the coupling instead.
    PolynomialDrift {
        coefficients: Vec<f64>,
        #[serde(default)]
        envelope: bool,
    },
}

/// Reads a noise description, e.g. `{"kind": "sinusoid", "depth_hz": 10, "omega_mod_hz": 4000}`.
pub fn noise_from_json(text: &str) -> Result<Noise> {
    let file: NoiseFile = serde_json::from_str(text).map_err(|e| parse_error("noise", e))?;
    let noise = match file {
        NoiseFile::StaticOffset { epsilon_hz } => Noise::static_offset(hz_to_rad(epsilon_hz)),
        NoiseFile::Sinusoid { depth_hz, omega_mod_hz, phase_rad } => {
            Noise::sinusoid(hz_to_rad(depth_hz), hz_to_rad(omega_mod_hz), phase_rad)
        }
        NoiseFile::PolynomialDrift { coefficients, envelope: true } => Noise::coupling_envelope(coefficients),
        NoiseFile::PolynomialDrift { coefficients, envelope: false } => Noise::detuning(NoiseModel::PolynomialDrift {
            coefficients: coefficients.into_iter().map(hz_to_rad).collect(),
        }),
    };
    noise.validate()?;
    Ok(noise)
}

#[derive(Serialize)]
struct ComplexEntry {
    re: f64,
    im: f64,
}

impl From<&Complex64> for ComplexEntry {
    fn from(z: &Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

#[derive(Serialize)]
struct DiagnosticsEntry {
    truncation: Option<f64>,
    engine: &'static str,
    reliable: bool,
}

#[derive(Serialize)]
struct ObservablesFile {
    p0: f64,
    p1: f64,
    p2: f64,
    parity_contrast: f64,
    bell_fidelity: f64,
    per_mode_residual: Vec<ComplexEntry>,
    diagnostics: DiagnosticsEntry,
}

pub fn observables_to_json(obs: &GateObservables) -> Result<String> {
    let file = ObservablesFile {
        p0: obs.p0,
        p1: obs.p1,
        p2: obs.p2,
        parity_contrast: obs.parity_contrast,
        bell_fidelity: obs.bell_fidelity,
        per_mode_residual: obs.per_mode_residual.iter().map(ComplexEntry::from).collect(),
        diagnostics: DiagnosticsEntry {
            truncation: obs.diagnostics.truncation,
            engine: obs.diagnostics.engine,
            reliable: obs.diagnostics.reliable,
        },
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

#[derive(Serialize)]
struct CandidateEntry {
    modes: Vec<usize>,
    detunings_hz: Vec<f64>,
    rabi_hz: Option<f64>,
}

#[derive(Serialize)]
struct ModeDiagnostics {
    mode: usize,
    detuning_hz: f64,
    entangling_phase_rad: f64,
    residual_displacement: ComplexEntry,
}

#[derive(Serialize)]
struct DesignFile {
    gate: GateFile,
    spectrum: SpectrumFile,
    entangling_phase_rad: f64,
    ordering_hz: Vec<f64>,
    modes: Vec<ModeDiagnostics>,
    candidates: Vec<CandidateEntry>,
}

/// Design output: the gate (readable by [`gate_from_json`]), the spectrum it
/// was designed for and per-mode diagnostics.
pub fn design_to_json(result: &DesignResult, spectrum: &ModeSpectrum) -> Result<String> {
    let tau = result.config.sequence.total_duration();
    let modes = spectrum
        .modes
        .iter()
        .zip(&result.entangling_phase_per_mode)
        .enumerate()
        .map(|(k, (m, &theta))| {
            let alpha = crate::trajectory::displacement(&result.config.sequence, m.detuning, tau)?;
            Ok(ModeDiagnostics {
                mode: k + 1,
                detuning_hz: rad_to_hz(m.detuning),
                entangling_phase_rad: theta,
                residual_displacement: ComplexEntry::from(&(alpha * result.config.rabi)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let file = DesignFile {
        gate: GateFile::from(&result.config),
        spectrum: SpectrumFile::from(spectrum),
        entangling_phase_rad: result.entangling_phase_per_mode.iter().sum(),
        ordering_hz: result.ordering.iter().map(|&d| rad_to_hz(d)).collect(),
        modes,
        candidates: result
            .candidates
            .iter()
            .map(|c| CandidateEntry {
                modes: c.modes.iter().map(|k| k + 1).collect(),
                detunings_hz: c.detunings.iter().map(|&d| rad_to_hz(d)).collect(),
                rabi_hz: c.rabi.map(rad_to_hz),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

fn csv(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn headers(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

/// Gaps may hold arbitrary text; keep it on one CSV field.
fn gap_text(gap: &Option<String>) -> String {
    gap.as_deref().map(|g| g.replace([',', '\n'], ";")).unwrap_or_default()
}

pub fn sequence_csv(seq: &PhaseSequence) -> String {
    let rows = seq.segments().iter().zip(seq.starts()).enumerate().map(|(n, (s, t0))| {
        vec![(n + 1).to_string(), format_number(t0), format_number(s.duration), format_number(s.phase)]
    });
    csv(&headers(&["segment", "start_s", "duration_s", "phase_rad"]), rows)
}

/// Waveform-generator export; fixed 17 significant digits in scientific notation.
pub fn bichromatic_csv(segments: &[BichromaticSegment]) -> String {
    let sci = |x: f64| format!("{x:.16e}");
    let rows = segments.iter().map(|s| vec![sci(s.duration), sci(s.phase_blue), sci(s.phase_red)]);
    csv(&headers(&["duration_s", "phase_blue_rad", "phase_red_rad"]), rows)
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let rows = traj.samples.iter().map(|s| {
        vec![format_number(s.time), format_number(s.displacement.re), format_number(s.displacement.im)]
    });
    csv(&headers(&["time_s", "re_alpha", "im_alpha"]), rows)
}

pub fn detuning_sweep_csv(points: &[SweepPoint]) -> String {
    let rows = points.iter().map(|p| {
        let ordering = p.ordering.iter().map(|&d| format_number(rad_to_hz(d))).collect::<Vec<_>>().join(";");
        vec![
            format_number(rad_to_hz(p.offset)),
            opt(p.fidelity),
            opt(p.rabi.map(rad_to_hz)),
            ordering,
            gap_text(&p.gap),
        ]
    });
    csv(&headers(&["offset_hz", "fidelity", "rabi_hz", "ordering", "gap"]), rows)
}

pub fn static_sweep_csv(points: &[StaticPoint]) -> String {
    let rows = points
        .iter()
        .map(|p| vec![format_number(rad_to_hz(p.error)), opt(p.p1), gap_text(&p.gap)]);
    csv(&headers(&["error_hz", "p1", "gap"]), rows)
}

pub fn filter_function_csv(filter: &FilterFunction, gate_time: f64) -> String {
    let mut header = headers(&["omega_taug_over_2pi", "f_total"]);
    header.extend((1..=filter.per_mode.len()).map(|k| format!("f_mode_{k}")));
    let rows = filter.omegas.iter().enumerate().map(|(i, w)| {
        let mut row = vec![format_number(w * gate_time / TAU), format_number(filter.total[i])];
        row.extend(filter.per_mode.iter().map(|m| format_number(m[i])));
        row
    });
    csv(&header, rows)
}

pub fn response_csv(omegas: &[f64], gate_time: f64, values: &[Option<PhaseAverage>], gaps: &[Option<String>]) -> String {
    let rows = omegas.iter().zip(values).zip(gaps).map(|((w, v), g)| {
        vec![
            format_number(w * gate_time / TAU),
            opt(v.map(|v| v.mean)),
            opt(v.map(|v| v.min)),
            opt(v.map(|v| v.max)),
            gap_text(g),
        ]
    });
    csv(&headers(&["omega_taug_over_2pi", "p1_mean", "p1_min", "p1_max", "gap"]), rows)
}

/// Renders a small table for terminal output.
pub fn describe_sequence(seq: &PhaseSequence) -> String {
    let mut out = String::new();
    for (n, s) in seq.segments().iter().enumerate() {
        let _ = writeln!(out, "{:>3}  {:>12.6e} s  {:+.4}π", n + 1, s.duration, s.phase / std::f64::consts::PI);
    }
    out
}
