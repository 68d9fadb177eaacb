//! Gate synthesis: entangling phase, drive strength and ordering search.

use std::cmp::Ordering as CmpOrdering;
use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Basis, GateConfig, ModeSpectrum};
use crate::parallel::map_ordered;
use crate::sequence::{construct, PhaseSequence, MAX_APPLICATIONS};
use crate::sim::analytic_observables;
use crate::trajectory::enclosed_area;

/// Θ = c₀ Ω² Σ_k f_k¹ f_k² A_k. The value 2 follows from the second-order
/// Magnus term and is pinned by the Fock-oracle regression test.
pub const ENTANGLING_CONSTANT: f64 = 2.0;

/// Phase of a maximally entangling gate.
pub const BELL_PHASE: f64 = FRAC_PI_4;

/// |Σ_k f_k¹ f_k² A_k| below this (s²) counts as no solution.
pub const AREA_FLOOR: f64 = 1e-18;

pub const MAX_ORDERINGS: usize = 720;

/// f_k¹ f_k² A_k per mode (s²).
fn weighted_areas(seq: &PhaseSequence, spectrum: &ModeSpectrum) -> Result<Vec<f64>> {
    spectrum.require_qubits(2)?;
    Ok(spectrum.modes.iter().map(|m| m.coupling_product() * enclosed_area(seq, m.detuning)).collect())
}

/// Contribution of every mode to Θ.
pub fn entangling_phase_per_mode(config: &GateConfig, spectrum: &ModeSpectrum) -> Result<Vec<f64>> {
    let scale = ENTANGLING_CONSTANT * config.rabi * config.rabi;
    Ok(weighted_areas(&config.sequence, spectrum)?.into_iter().map(|a| scale * a).collect())
}

pub fn entangling_phase(config: &GateConfig, spectrum: &ModeSpectrum) -> Result<f64> {
    Ok(entangling_phase_per_mode(config, spectrum)?.iter().sum())
}

/// Ω giving |Θ| = |target_phase|.
pub fn solve_rabi(seq: &PhaseSequence, spectrum: &ModeSpectrum, target_phase: f64) -> Result<f64> {
    let area: f64 = weighted_areas(seq, spectrum)?.iter().sum();
    if area.abs() < AREA_FLOOR {
        return Err(Error::NoSolution { area });
    }
    Ok((target_phase.abs() / (ENTANGLING_CONSTANT * area.abs())).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Standard,
    PhaseModulated,
}

/// Order of R applications, as mode indices applied innermost first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    Explicit(Vec<usize>),
    MinimizeRabi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    /// Zero-based mode index.
    pub mode: usize,
    /// Number of R applications at this mode.
    pub order: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRequest {
    pub spectrum: ModeSpectrum,
    pub gate_time: f64,
    pub targets: Vec<Target>,
    pub scheme: Scheme,
    pub ordering: Ordering,
    pub basis: Basis,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub modes: Vec<usize>,
    pub detunings: Vec<f64>,
    /// None when the entangling area cancels.
    pub rabi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignResult {
    pub config: GateConfig,
    pub entangling_phase_per_mode: Vec<f64>,
    /// Applied detunings of the chosen ordering; empty for the standard gate.
    pub ordering: Vec<f64>,
    pub candidates: Vec<Candidate>,
}

impl DesignRequest {
    fn validate(&self) -> Result<()> {
        self.spectrum.ensure_valid()?;
        self.spectrum.require_qubits(2)?;
        if !(self.gate_time > 0.0 && self.gate_time.is_finite()) {
            return Err(Error::invalid(format!("gate time must be positive, got {}", self.gate_time)));
        }
        let mut total = 0usize;
        for t in &self.targets {
            if t.mode >= self.spectrum.mode_count() {
                return Err(Error::invalid(format!(
                    "target mode {} does not exist (spectrum has {})",
                    t.mode + 1,
                    self.spectrum.mode_count()
                )));
            }
            if t.order == 0 {
                return Err(Error::invalid(format!("target mode {}: order must be ≥ 1", t.mode + 1)));
            }
            total += t.order as usize;
        }
        if total > MAX_APPLICATIONS {
            return Err(Error::TooManyApplications { count: total, max: MAX_APPLICATIONS });
        }
        if self.scheme == Scheme::PhaseModulated && self.targets.is_empty() {
            return Err(Error::invalid("phase-modulated design needs at least one target mode"));
        }
        Ok(())
    }

    /// Sorted multiset of mode indices, one entry per application.
    fn applications(&self) -> Vec<usize> {
        let mut apps: Vec<usize> =
            self.targets.iter().flat_map(|t| std::iter::repeat(t.mode).take(t.order as usize)).collect();
        apps.sort_unstable();
        apps
    }
}

/// Distinct permutations of a multiset: n! / Π m_i!.
fn permutation_count(sorted: &[usize]) -> u128 {
    let fact = |n: usize| (1..=n as u128).product::<u128>();
    let mut count = fact(sorted.len());
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&x| x == sorted[i]).count();
        count /= fact(j);
        i += j;
    }
    count
}

/// Steps to the next lexicographic permutation; false after the last.
fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap_or(i);
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

fn lexicographic(a: &[f64], b: &[f64]) -> CmpOrdering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(a.len().cmp(&b.len()))
}

fn finish(request: &DesignRequest, seq: PhaseSequence, rabi: f64, ordering: Vec<f64>, candidates: Vec<Candidate>) -> Result<DesignResult> {
    let config = GateConfig::new(rabi, request.gate_time, request.basis, seq)?;
    let entangling_phase_per_mode = entangling_phase_per_mode(&config, &request.spectrum)?;
    Ok(DesignResult { config, entangling_phase_per_mode, ordering, candidates })
}

/// Builds a maximally entangling gate for the request.
pub fn design_gate(request: &DesignRequest) -> Result<DesignResult> {
    request.validate()?;
    let detuning = |k: usize| request.spectrum.modes[k].detuning;
    if request.scheme == Scheme::Standard {
        let seq = PhaseSequence::unmodulated(request.gate_time)?;
        let rabi = solve_rabi(&seq, &request.spectrum, BELL_PHASE)?;
        let cand = Candidate { modes: vec![], detunings: vec![], rabi: Some(rabi) };
        return finish(request, seq, rabi, vec![], vec![cand]);
    }

    let apps = request.applications();
    let orderings: Vec<Vec<usize>> = match &request.ordering {
        Ordering::Explicit(list) => {
            let mut sorted = list.clone();
            sorted.sort_unstable();
            if sorted != apps {
                return Err(Error::invalid(format!(
                    "explicit ordering {:?} does not match the target orders",
                    list.iter().map(|k| k + 1).collect::<Vec<_>>()
                )));
            }
            vec![list.clone()]
        }
        Ordering::MinimizeRabi => {
            let count = permutation_count(&apps);
            if count > MAX_ORDERINGS as u128 {
                return Err(Error::TooManyOrderings { count: count.min(usize::MAX as u128) as usize, max: MAX_ORDERINGS });
            }
            let mut all = Vec::with_capacity(count as usize);
            let mut perm = apps.clone();
            loop {
                all.push(perm.clone());
                if !next_permutation(&mut perm) {
                    break;
                }
            }
            all
        }
    };

    let mut candidates = Vec::with_capacity(orderings.len());
    let mut best: Option<(usize, f64, PhaseSequence)> = None;
    let mut last_error = None;
    for modes in orderings {
        let detunings: Vec<f64> = modes.iter().map(|&k| detuning(k)).collect();
        let seq = construct(&detunings, request.gate_time)?;
        let rabi = match solve_rabi(&seq, &request.spectrum, BELL_PHASE) {
            Ok(r) => Some(r),
            Err(e @ Error::NoSolution { .. }) => {
                last_error = Some(e);
                None
            }
            Err(e) => return Err(e),
        };
        let index = candidates.len();
        candidates.push(Candidate { modes, detunings, rabi });
        let Some(rabi) = rabi else { continue };
        let better = match &best {
            None => true,
            Some((bi, brabi, _)) => {
                let tie = (rabi - brabi).abs() <= 1e-12 * rabi.max(*brabi);
                if tie {
                    lexicographic(&candidates[index].detunings, &candidates[*bi].detunings).is_lt()
                } else {
                    rabi < *brabi
                }
            }
        };
        if better {
            best = Some((index, rabi, seq));
        }
    }
    let Some((index, rabi, seq)) = best else {
        return Err(last_error.unwrap_or(Error::NoSolution { area: 0.0 }));
    };
    let ordering = candidates[index].detunings.clone();
    finish(request, seq, rabi, ordering, candidates)
}

/// Design parameters shared by every point of a detuning sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRequest {
    pub gate_time: f64,
    pub targets: Vec<Target>,
    pub scheme: Scheme,
    pub ordering: Ordering,
    pub basis: Basis,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub offset: f64,
    pub fidelity: Option<f64>,
    pub rabi: Option<f64>,
    pub ordering: Vec<f64>,
    /// Why the point has no design.
    pub gap: Option<String>,
}

fn sweep_point(template: &ModeSpectrum, offset: f64, params: &SweepRequest) -> SweepPoint {
    let request = DesignRequest {
        spectrum: template.shifted(offset),
        gate_time: params.gate_time,
        targets: params.targets.clone(),
        scheme: params.scheme,
        ordering: params.ordering.clone(),
        basis: params.basis,
    };
    let outcome = design_gate(&request).and_then(|d| {
        let obs = analytic_observables(&d.config, &request.spectrum, None)?;
        Ok((obs.bell_fidelity, d))
    });
    match outcome {
        Ok((fidelity, d)) => SweepPoint {
            offset,
            fidelity: Some(fidelity),
            rabi: Some(d.config.rabi),
            ordering: d.ordering,
            gap: None,
        },
        Err(e) => SweepPoint { offset, fidelity: None, rabi: None, ordering: vec![], gap: Some(e.to_string()) },
    }
}

/// Noiseless Bell fidelity of the best design at each uniform drive offset.
/// Points that cannot be designed are returned as gaps.
pub fn detuning_sweep(
    template: &ModeSpectrum,
    offsets: &[f64],
    params: &SweepRequest,
    workers: usize,
) -> Result<Vec<SweepPoint>> {
    template.ensure_valid()?;
    map_ordered(workers, offsets, |&o| sweep_point(template, o, params))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::TAU;

    use super::*;
    use crate::model::Mode;
    use crate::trajectory::displacement;

    fn two_modes(d1: f64, d2: f64) -> ModeSpectrum {
        ModeSpectrum::new(2, vec![Mode::new(d1, vec![1.0, 1.0], 0.0), Mode::new(d2, vec![1.0, -1.0], 0.0)]).unwrap()
    }

    fn request(spectrum: ModeSpectrum, tau: f64, targets: &[(usize, u32)]) -> DesignRequest {
        DesignRequest {
            spectrum,
            gate_time: tau,
            targets: targets.iter().map(|&(mode, order)| Target { mode, order }).collect(),
            scheme: Scheme::PhaseModulated,
            ordering: Ordering::MinimizeRabi,
            basis: Basis::X,
        }
    }

    #[test]
    fn phase_scales_quadratically() {
        let tau = 1e-4;
        let d = TAU / tau;
        let spec = ModeSpectrum::new(2, vec![Mode::new(d, vec![1.0, 1.0], 0.0)]).unwrap();
        let cfg = GateConfig::new(1e4, tau, Basis::X, PhaseSequence::unmodulated(tau).unwrap()).unwrap();
        let t1 = entangling_phase(&cfg, &spec).unwrap();
        let t2 = entangling_phase(&cfg.with_rabi(2e4), &spec).unwrap();
        assert!((t2 - 4.0 * t1).abs() < 1e-12 * t2.abs());
        assert_eq!(entangling_phase(&cfg.with_rabi(0.0), &spec).unwrap(), 0.0);
        let expected = ENTANGLING_CONSTANT * 1e8 * TAU / (d * d);
        assert!((t1 - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn rabi_round_trip_and_loop_ratio() {
        let tau = 1e-4;
        let d = TAU / tau;
        let seq = PhaseSequence::unmodulated(tau).unwrap();
        let one = ModeSpectrum::new(2, vec![Mode::new(d, vec![1.0, 1.0], 0.0)]).unwrap();
        let two = ModeSpectrum::new(2, vec![Mode::new(2.0 * d, vec![1.0, 1.0], 0.0)]).unwrap();
        let r1 = solve_rabi(&seq, &one, BELL_PHASE).unwrap();
        let r2 = solve_rabi(&seq, &two, BELL_PHASE).unwrap();
        assert!((r2 / r1 - 2f64.sqrt()).abs() < 1e-12);
        let cfg = GateConfig::new(r1, tau, Basis::X, seq).unwrap();
        assert!((entangling_phase(&cfg, &one).unwrap() - BELL_PHASE).abs() < 1e-12 * BELL_PHASE);
    }

    #[test]
    fn cancelling_modes_have_no_solution() {
        let tau = 1e-4;
        let d = TAU / tau;
        let spec =
            ModeSpectrum::new(2, vec![Mode::new(d, vec![1.0, 1.0], 0.0), Mode::new(d, vec![1.0, -1.0], 0.0)]).unwrap();
        let seq = PhaseSequence::unmodulated(tau).unwrap();
        let err = solve_rabi(&seq, &spec, BELL_PHASE).unwrap_err();
        assert!(err.to_string().contains("entangling area ≈ 0"));
    }

    #[test]
    fn dimensional_scaling() {
        let spec = two_modes(3.1e4, -2.2e4);
        let seq = construct(&[3.1e4, -2.2e4], 3e-4).unwrap();
        let r = solve_rabi(&seq, &spec, BELL_PHASE).unwrap();
        let lam = 2.5;
        let scaled = two_modes(3.1e4 * lam, -2.2e4 * lam);
        let seq2 = construct(&[3.1e4 * lam, -2.2e4 * lam], 3e-4 / lam).unwrap();
        let r2 = solve_rabi(&seq2, &scaled, BELL_PHASE).unwrap();
        assert!((r2 / r - lam).abs() < 1e-10);
    }

    #[test]
    fn minimize_rabi_picks_smallest_and_closes() {
        let spec = two_modes(1.1e4, -4.7e4);
        let req = request(spec.clone(), 4e-4, &[(0, 2), (1, 1)]);
        let res = design_gate(&req).unwrap();
        assert_eq!(res.candidates.len(), 3);
        for c in &res.candidates {
            assert!(res.config.rabi <= c.rabi.unwrap() * (1.0 + 1e-15));
        }
        for m in &spec.modes {
            assert!(displacement(&res.config.sequence, m.detuning, 4e-4).unwrap().norm() < 1e-12 * 4e-4);
        }
        let theta: f64 = res.entangling_phase_per_mode.iter().sum();
        assert!((theta.abs() - BELL_PHASE).abs() < 1e-12);
    }

    #[test]
    fn symmetric_tie_uses_lexicographic_detunings() {
        let spec = two_modes(2.0e4, -2.0e4);
        let res = design_gate(&request(spec, 3e-4, &[(0, 1), (1, 1)])).unwrap();
        let (a, b) = (res.candidates[0].rabi.unwrap(), res.candidates[1].rabi.unwrap());
        assert!((a - b).abs() < 1e-12 * a);
        assert_eq!(res.ordering, vec![-2.0e4, 2.0e4]);
    }

    #[test]
    fn explicit_ordering_is_checked() {
        let spec = two_modes(1.0e4, -3.0e4);
        let mut req = request(spec, 3e-4, &[(0, 1), (1, 1)]);
        req.ordering = Ordering::Explicit(vec![1, 0]);
        let res = design_gate(&req).unwrap();
        assert_eq!(res.ordering, vec![-3.0e4, 1.0e4]);
        req.ordering = Ordering::Explicit(vec![1, 1]);
        assert!(design_gate(&req).is_err());
    }

    #[test]
    fn ordering_limits() {
        let spec = ModeSpectrum::new(
            2,
            (0..4).map(|k| Mode::new(1.0e4 * (k as f64 + 1.0), vec![1.0, 1.0], 0.0)).collect(),
        )
        .unwrap();
        // 7!/(2!·2!·2!·1!) = 630 orderings are fine, 8!/(2!⁴) = 2520 are not
        assert_eq!(permutation_count(&[0, 0, 1, 1, 2, 2, 3]), 630);
        let too_many = request(spec.clone(), 1e-3, &[(0, 2), (1, 2), (2, 2), (3, 2)]);
        assert!(matches!(design_gate(&too_many), Err(Error::TooManyOrderings { .. })));
        let too_deep = request(spec, 1e-3, &[(0, 21)]);
        assert!(matches!(design_gate(&too_deep), Err(Error::TooManyApplications { .. })));
    }

    #[test]
    fn single_target_standard_vs_modulated() {
        let tau = 1e-4;
        let d = TAU / tau;
        let spec = ModeSpectrum::new(2, vec![Mode::new(d, vec![1.0, 1.0], 0.0)]).unwrap();
        let mut req = request(spec, tau, &[(0, 1)]);
        let pm = design_gate(&req).unwrap();
        req.scheme = Scheme::Standard;
        let std = design_gate(&req).unwrap();
        assert!(displacement(&pm.config.sequence, d, tau).unwrap().norm() < 1e-12 * tau);
        assert!(displacement(&std.config.sequence, d, tau).unwrap().norm() < 1e-12 * tau);
        let ratio = pm.config.rabi / std.config.rabi;
        assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn sweep_gaps_do_not_abort() {
        let tau = 1e-4;
        let d = TAU / tau;
        // offset −d puts the single mode at zero detuning: the area vanishes
        let spec = ModeSpectrum::new(2, vec![Mode::new(d, vec![1.0, 1.0], 0.0)]).unwrap();
        let params = SweepRequest {
            gate_time: tau,
            targets: vec![Target { mode: 0, order: 1 }],
            scheme: Scheme::PhaseModulated,
            ordering: Ordering::MinimizeRabi,
            basis: Basis::X,
        };
        let pts = detuning_sweep(&spec, &[0.0, -d, 0.5 * d], &params, 1).unwrap();
        assert!(pts[0].fidelity.unwrap() > 1.0 - 1e-12);
        assert!(pts[1].gap.is_some() && pts[1].fidelity.is_none());
        assert!(pts[2].fidelity.is_some());
    }
}
