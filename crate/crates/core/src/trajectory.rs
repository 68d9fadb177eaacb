//! Unit-coupling phase-space trajectories α(t) = ∫₀ᵗ e^{iδt'} r(t') dt'.
//!
//! Noiseless quantities are evaluated segment by segment in closed form.
//! Under detuning noise the integrand picks up e^{iΦ(t)}, Φ the accumulated
//! noise phase, and is integrated adaptively without crossing a segment
//! boundary. The drive prefactor Ω·f is left to callers.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Injection, Noise, DURATION_RTOL};
use crate::quadrature::{adaptive_gauss_kronrod, path_integral, PathIntegral};
use crate::sequence::PhaseSequence;

/// Relative tolerance of the noisy-path quadrature.
pub const NOISY_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub time: f64,
    pub displacement: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub detuning: f64,
    pub samples: Vec<TrajectorySample>,
    pub endpoint: Complex64,
    /// Im ∫ α* dα over the full sequence, s².
    pub area: f64,
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// (x − sin x)/x², series below |x| = 0.5.
fn area_kernel(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let x2 = x * x;
        x * (1.0 / 6.0 - x2 * (1.0 / 120.0 - x2 * (1.0 / 5040.0 - x2 * (1.0 / 362_880.0 - x2 / 39_916_800.0))))
    } else {
        (x - x.sin()) / (x * x)
    }
}

/// Closed-form (increment, area) of a constant-phase piece [start, start + h].
fn piece(detuning: f64, phase: f64, start: f64, h: f64) -> PathIntegral {
    let x = detuning * h;
    let increment = Complex64::from_polar(h * sinc(0.5 * x), detuning * start + 0.5 * x - phase);
    PathIntegral { increment, area: h * h * area_kernel(x) }
}

/// Accepts t within rounding of the window and clamps it inside.
fn check_time(seq: &PhaseSequence, t: f64) -> Result<f64> {
    let duration = seq.total_duration();
    let slack = DURATION_RTOL * duration;
    if !(t >= -slack && t <= duration + slack) {
        return Err(Error::TimeOutOfRange { t, duration });
    }
    Ok(t.clamp(0.0, duration))
}

/// Visits (phase, start, length) for every piece of `seq` inside [0, t].
fn pieces_until(seq: &PhaseSequence, t: f64, mut visit: impl FnMut(f64, f64, f64)) {
    let mut start = 0.0;
    for s in seq.segments() {
        if start >= t {
            break;
        }
        let h = s.duration.min(t - start);
        visit(s.phase, start, h);
        start += s.duration;
    }
}

/// Noiseless α(t), exact.
pub fn displacement(seq: &PhaseSequence, detuning: f64, t: f64) -> Result<Complex64> {
    let t = check_time(seq, t)?;
    let mut acc = Complex64::new(0.0, 0.0);
    pieces_until(seq, t, |phase, start, h| acc += piece(detuning, phase, start, h).increment);
    Ok(acc)
}

/// Noiseless endpoint and area over the whole sequence.
pub fn closed_path(seq: &PhaseSequence, detuning: f64) -> PathIntegral {
    let mut acc = PathIntegral::ZERO;
    let end = seq.total_duration();
    pieces_until(seq, end, |phase, start, h| acc = acc.then(piece(detuning, phase, start, h)));
    acc
}

/// Im ∫ α* dα over the full sequence (s²).
pub fn enclosed_area(seq: &PhaseSequence, detuning: f64) -> f64 {
    closed_path(seq, detuning).area
}

/// Drive integrand e^{i(δt + Φ(t)) − iφ}·envelope(t) inside one segment.
fn noisy_integrand<'a>(detuning: f64, phase: f64, noise: &'a Noise) -> impl Fn(f64) -> Complex64 + 'a {
    move |t| {
        let (extra, env) = noise.modulation(t);
        Complex64::from_polar(env, detuning * t + extra - phase)
    }
}

/// Largest |envelope| on [0, t], sampled densely; 1 for detuning noise.
fn envelope_scale(noise: &Noise, t: f64) -> f64 {
    match noise.injection {
        Injection::Detuning => 1.0,
        Injection::CouplingEnvelope => (0..=64)
            .map(|i| noise.model.value(t * i as f64 / 64.0).abs())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE),
    }
}

/// α(t) under a noise model. Static detuning offsets are exact; every other
/// case is integrated adaptively per segment.
pub fn displacement_noisy(seq: &PhaseSequence, detuning: f64, noise: &Noise, t: f64) -> Result<Complex64> {
    noise.validate()?;
    let t = check_time(seq, t)?;
    if noise.is_static() {
        return displacement(seq, detuning + noise.model.value(0.0), t);
    }
    Ok(quadrature_displacement(seq, detuning, noise, t))
}

pub(crate) fn quadrature_displacement(seq: &PhaseSequence, detuning: f64, noise: &Noise, t: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    pieces_until(seq, t, |phase, start, h| {
        let g = noisy_integrand(detuning, phase, noise);
        acc += adaptive_gauss_kronrod(g, start, start + h, NOISY_RTOL).value;
    });
    acc
}

/// Endpoint and area over the whole sequence under optional noise.
pub fn noisy_path(seq: &PhaseSequence, detuning: f64, noise: Option<&Noise>) -> Result<PathIntegral> {
    let Some(noise) = noise else {
        return Ok(closed_path(seq, detuning));
    };
    noise.validate()?;
    if noise.is_static() {
        return Ok(closed_path(seq, detuning + noise.model.value(0.0)));
    }
    Ok(quadrature_path(seq, detuning, noise))
}

pub(crate) fn quadrature_path(seq: &PhaseSequence, detuning: f64, noise: &Noise) -> PathIntegral {
    let end = seq.total_duration();
    let scale = envelope_scale(noise, end);
    let mut acc = PathIntegral::ZERO;
    pieces_until(seq, end, |phase, start, h| {
        let g = noisy_integrand(detuning, phase, noise);
        acc = acc.then(path_integral(g, start, start + h, scale, NOISY_RTOL));
    });
    acc
}

/// Samples α(t) on a uniform grid inside every segment, boundaries included.
pub fn sample_trajectory(seq: &PhaseSequence, detuning: f64, points_per_segment: usize) -> Result<Trajectory> {
    if points_per_segment == 0 {
        return Err(Error::invalid("points_per_segment must be ≥ 1"));
    }
    let mut samples = Vec::with_capacity(seq.len() * points_per_segment + 1);
    let mut path = PathIntegral::ZERO;
    let mut start = 0.0;
    samples.push(TrajectorySample { time: 0.0, displacement: path.increment });
    for s in seq.segments() {
        for i in 1..points_per_segment {
            let dt = s.duration * i as f64 / points_per_segment as f64;
            let partial = path.increment + piece(detuning, s.phase, start, dt).increment;
            samples.push(TrajectorySample { time: start + dt, displacement: partial });
        }
        path = path.then(piece(detuning, s.phase, start, s.duration));
        start += s.duration;
        samples.push(TrajectorySample { time: start, displacement: path.increment });
    }
    Ok(Trajectory { detuning, samples, endpoint: path.increment, area: path.area })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{PI, TAU};

    use super::*;
    use crate::sequence::construct;

    #[test]
    fn full_loop_closes_and_half_loop_spans_diameter() {
        let tau = 1e-4;
        let d = TAU / tau;
        let seq = PhaseSequence::base(tau).unwrap();
        assert!(displacement(&seq, d, tau).unwrap().norm() < 1e-12 * tau);
        let half = displacement(&seq, d, PI / d).unwrap();
        assert!((half.norm() - 2.0 / d).abs() < 1e-15 * tau);
        assert!(displacement(&seq, d, 1.1 * tau).is_err());
        assert!(displacement(&seq, d, -1e-9).is_err());
    }

    #[test]
    fn loop_areas() {
        let tau = 2e-4;
        let d = TAU / tau;
        let seq = PhaseSequence::base(tau).unwrap();
        let a = enclosed_area(&seq, d);
        assert!((a - TAU / (d * d)).abs() < 1e-12 * a);
        let d2 = 2.0 * TAU / tau;
        let a2 = enclosed_area(&seq, d2);
        assert!((a2 - 4.0 * PI / (d2 * d2)).abs() < 1e-12 * a2);
        // opposite detuning winds the other way
        assert!((enclosed_area(&seq, -d) + a).abs() < 1e-12 * a);
    }

    #[test]
    fn near_zero_detuning_is_continuous() {
        let tau = 3e-4;
        let seq = construct(&[1.0e4, 0.0], tau).unwrap();
        let at_zero = displacement(&seq, 0.0, tau).unwrap();
        let near = displacement(&seq, 1e-13 / tau, tau).unwrap();
        let scale = at_zero.norm().max(tau);
        assert!((at_zero - near).norm() <= 1e-10 * scale);
        let a0 = enclosed_area(&seq, 0.0);
        let a1 = enclosed_area(&seq, 1e-13 / tau);
        assert!((a0 - a1).abs() <= 1e-10 * tau * tau);
    }

    #[test]
    fn sampled_circle() {
        let tau = 1e-4;
        let d = TAU / tau;
        let traj = sample_trajectory(&PhaseSequence::base(tau).unwrap(), d, 64).unwrap();
        assert_eq!(traj.samples.len(), 65);
        assert_eq!(traj.samples[0].displacement, Complex64::new(0.0, 0.0));
        let centre = Complex64::new(0.0, 1.0 / d);
        for s in &traj.samples {
            assert!(((s.displacement - centre).norm() - 1.0 / d).abs() < 1e-15 * tau * 10.0);
        }
        assert_eq!(traj.endpoint, traj.samples.last().unwrap().displacement);
        assert!(traj.samples.windows(2).all(|w| w[0].time < w[1].time));
    }

    #[test]
    fn boundary_only_sampling() {
        let seq = construct(&[1.0e4, 3.0e4], 1e-4).unwrap();
        let traj = sample_trajectory(&seq, 1.0e4, 1).unwrap();
        assert_eq!(traj.samples.len(), seq.len() + 1);
        let starts = seq.starts();
        for (s, t0) in traj.samples.iter().zip(starts) {
            assert_eq!(s.time, t0);
        }
        assert!(sample_trajectory(&seq, 1.0, 0).is_err());
    }

    #[test]
    fn zero_depth_sinusoid_matches_closed_form() {
        let seq = construct(&[2.0e4, -1.3e4], 2e-4).unwrap();
        let noise = Noise::sinusoid(0.0, 5e3, 0.3);
        for &t in &[0.0, 7.3e-5, 2e-4] {
            let q = displacement_noisy(&seq, 1.7e4, &noise, t).unwrap();
            let c = displacement(&seq, 1.7e4, t).unwrap();
            assert!((q - c).norm() < 1e-12 * 2e-4);
        }
    }

    #[test]
    fn static_offset_quadrature_equals_shifted_detuning() {
        let seq = construct(&[2.0e4, -1.3e4], 2e-4).unwrap();
        let eps = 2.1e3;
        let noise = Noise::static_offset(eps);
        let q = quadrature_displacement(&seq, 1.7e4, &noise, 2e-4);
        let c = displacement(&seq, 1.7e4 + eps, 2e-4).unwrap();
        assert!((q - c).norm() < 1e-10 * 2e-4);
        let p = quadrature_path(&seq, 1.7e4, &noise);
        let cp = closed_path(&seq, 1.7e4 + eps);
        assert!((p.area - cp.area).abs() < 1e-10 * 4e-8);
        assert!((p.increment - cp.increment).norm() < 1e-10 * 2e-4);
    }
}
