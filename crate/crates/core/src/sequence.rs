//! Piecewise-constant coupling-phase schedules.
//!
//! A [`PhaseSequence`] is an ordered list of segments, each holding a
//! constant phase φ. The drive envelope is r(t) = e^{−iφ_n} inside segment n
//! (half-open interval) and zero outside the sequence window.
//!
//! Sequences that close a set of oscillator modes are grown by
//! [`PhaseSequence::repeat_shifted`]: the sequence is followed by a copy of
//! itself with every phase advanced by δT − π, where T is the current
//! duration. That cancels the mode-δ displacement accumulated in the first
//! half. [`construct`] applies it once per listed detuning, innermost first,
//! so a sequence written right-to-left as R_b R_a r₀ is entered as `[a, b]`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of closing repetitions accepted by [`construct`].
pub const MAX_APPLICATIONS: usize = 20;

/// Highest time moment evaluated by [`PhaseSequence::moment`].
pub const MAX_MOMENT_ORDER: usize = 8;

/// Wraps an angle to [−π, π). Values already in range are returned untouched.
pub fn wrap_phase(phase: f64) -> f64 {
    if (-PI..PI).contains(&phase) {
        return phase;
    }
    let mut r = (phase + PI).rem_euclid(TAU);
    if r >= TAU {
        r = 0.0;
    }
    let w = r - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Segment length, s.
    pub duration: f64,
    /// Coupling phase φ, rad, wrapped to [−π, π).
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Segment>", into = "Vec<Segment>")]
pub struct PhaseSequence {
    segments: Vec<Segment>,
}

impl TryFrom<Vec<Segment>> for PhaseSequence {
    type Error = Error;

    fn try_from(segments: Vec<Segment>) -> Result<Self> {
        PhaseSequence::new(segments)
    }
}

impl From<PhaseSequence> for Vec<Segment> {
    fn from(seq: PhaseSequence) -> Self {
        seq.segments
    }
}

/// One segment of a two-tone drive: blue and red sideband tone phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BichromaticSegment {
    pub duration: f64,
    pub phase_blue: f64,
    pub phase_red: f64,
}

impl BichromaticSegment {
    /// Coupling phase carried by the tone pair, (φ_b − φ_r)/2.
    pub fn coupling_phase(&self) -> f64 {
        0.5 * (self.phase_blue - self.phase_red)
    }
}

impl PhaseSequence {
    /// Validates durations and wraps phases.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::invalid("a phase sequence needs at least one segment"));
        }
        let mut out = Vec::with_capacity(segments.len());
        for (n, s) in segments.into_iter().enumerate() {
            if !(s.duration > 0.0 && s.duration.is_finite()) {
                return Err(Error::invalid(format!("segment {n}: duration must be positive, got {}", s.duration)));
            }
            if !s.phase.is_finite() {
                return Err(Error::invalid(format!("segment {n}: phase must be finite")));
            }
            out.push(Segment { duration: s.duration, phase: wrap_phase(s.phase) });
        }
        Ok(Self { segments: out })
    }

    /// Single zero-phase segment.
    pub fn base(segment_time: f64) -> Result<Self> {
        Self::new(vec![Segment { duration: segment_time, phase: 0.0 }])
    }

    /// Unmodulated drive of the given length (the standard gate).
    pub fn unmodulated(gate_time: f64) -> Result<Self> {
        Self::base(gate_time)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn phases(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.phase).collect()
    }

    /// Start time of every segment.
    pub fn starts(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.segments
            .iter()
            .map(|s| {
                let start = t;
                t += s.duration;
                start
            })
            .collect()
    }

    /// Drive envelope r(t).
    pub fn envelope(&self, t: f64) -> Complex64 {
        if t < 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let mut start = 0.0;
        for s in &self.segments {
            if t < start + s.duration {
                return Complex64::from_polar(1.0, -s.phase);
            }
            start += s.duration;
        }
        Complex64::new(0.0, 0.0)
    }

    /// Appends a copy of the sequence whose phases are advanced by
    /// `detuning · T − π`, closing the trajectory of a mode at `detuning`.
    pub fn repeat_shifted(&self, detuning: f64) -> Result<Self> {
        if !detuning.is_finite() {
            return Err(Error::invalid("detuning must be finite"));
        }
        let shift = wrap_phase(detuning * self.total_duration() - PI);
        let mut segments = self.segments.clone();
        segments.extend(
            self.segments
                .iter()
                .map(|s| Segment { duration: s.duration, phase: wrap_phase(s.phase + shift) }),
        );
        Ok(Self { segments })
    }

    /// M_j = ∫ r(t) e^{iδt} t^j dt over the whole sequence, in closed form.
    pub fn moment(&self, detuning: f64, order: usize) -> Result<Complex64> {
        if order > MAX_MOMENT_ORDER {
            return Err(Error::invalid(format!("moment order {order} exceeds {MAX_MOMENT_ORDER}")));
        }
        let mut total = Complex64::new(0.0, 0.0);
        let mut start = 0.0_f64;
        let mut local = [Complex64::new(0.0, 0.0); MAX_MOMENT_ORDER + 1];
        for s in &self.segments {
            local_moments(detuning, s.duration, order, &mut local);
            // expand (start + u)^order binomially around the segment start
            let mut acc = Complex64::new(0.0, 0.0);
            let mut binom = 1.0;
            for m in 0..=order {
                acc += local[m] * binom * start.powi((order - m) as i32);
                binom = binom * (order - m) as f64 / (m + 1) as f64;
            }
            let carrier = Complex64::from_polar(1.0, detuning * start - s.phase);
            total += carrier * acc;
            start += s.duration;
        }
        Ok(total)
    }

    /// Tone phases for a two-tone drive with common spin phase `spin_phase`.
    /// Phases are left unwrapped so the coupling phase is recovered exactly.
    pub fn to_bichromatic(&self, spin_phase: f64) -> Vec<BichromaticSegment> {
        self.segments
            .iter()
            .map(|s| BichromaticSegment {
                duration: s.duration,
                phase_blue: spin_phase + s.phase,
                phase_red: spin_phase - s.phase,
            })
            .collect()
    }
}

/// Builds the sequence closing every listed detuning within `gate_time`.
/// Element 0 is applied first (innermost). Repeats raise the suppression order.
pub fn construct(detunings: &[f64], gate_time: f64) -> Result<PhaseSequence> {
    let q = detunings.len();
    if q == 0 {
        return Err(Error::invalid("at least one detuning is required"));
    }
    if q > MAX_APPLICATIONS {
        return Err(Error::TooManyApplications { count: q, max: MAX_APPLICATIONS });
    }
    if !(gate_time > 0.0 && gate_time.is_finite()) {
        return Err(Error::invalid(format!("gate time must be positive, got {gate_time}")));
    }
    let segment_time = gate_time / (1u64 << q) as f64;
    detunings
        .iter()
        .try_fold(PhaseSequence::base(segment_time)?, |seq, &d| seq.repeat_shifted(d))
}

/// J_m = ∫₀^h u^m e^{iδu} du for m = 0..=order.
fn local_moments(detuning: f64, h: f64, order: usize, out: &mut [Complex64]) {
    let x = detuning * h;
    if x.abs() < 2.0 {
        // power series in iδh; |x| < 2 keeps every term positive-weighted and short
        for (m, slot) in out.iter_mut().enumerate().take(order + 1) {
            let mut term = Complex64::new(1.0, 0.0);
            let mut sum = Complex64::new(1.0 / (m as f64 + 1.0), 0.0);
            for n in 1..60 {
                term *= Complex64::new(0.0, x / n as f64);
                let add = term / (m + n + 1) as f64;
                sum += add;
                if add.norm() < 1e-18 * sum.norm().max(1e-300) {
                    break;
                }
            }
            *slot = sum * h.powi(m as i32 + 1);
        }
    } else {
        let e = Complex64::from_polar(1.0, x);
        let inv = Complex64::new(0.0, -1.0 / detuning);
        out[0] = (e - 1.0) * inv;
        for m in 1..=order {
            out[m] = (e * h.powi(m as i32) - out[m - 1] * m as f64) * inv;
        }
    }
}
