//! Brute-force propagation in spin ⊗ truncated Fock space.
//!
//! Works in the frame rotating with the mode detunings, where
//! H(t) = Σ_k δ_k n_k + i Σ_k S_k (c_k(t) a_k† − c_k(t)* a_k) and
//! c_k(t) = Ω·e^{i(Φ(t) − φ_n)}·env(t). Without time-dependent noise H is
//! constant inside each segment. Otherwise each step is a fourth-order
//! commutator-free Magnus step. Every exponential is applied with a
//! Chebyshev expansion. Steps never straddle a segment boundary and are
//! halved until the reduced density matrix stops moving.
//!
//! Thermal modes are sampled as a weighted ensemble of Fock product states.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{Density, Diagnostics, GateObservables};
use crate::error::{Error, Result};
use crate::model::{Basis, GateConfig, ModeSpectrum, Noise, NoiseModel, MAX_QUBITS};
use crate::trajectory::noisy_path;

/// Smallest accepted phonon cutoff.
pub const MIN_CUTOFF: usize = 5;
/// Largest joint mode-space dimension (cutoff+1)^M.
pub const MAX_MODE_DIM: usize = 400;
/// Ensemble members are kept until their weights sum to this.
pub const ENSEMBLE_WEIGHT: f64 = 1.0 - 1e-8;
/// Top-two-level population above which a result is flagged unreliable.
pub const TRUNCATION_LIMIT: f64 = 1e-6;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct FockOptions {
    /// Highest Fock level kept per mode.
    pub cutoff: usize,
    /// Step halving stops once P₀, P₁, P₂ and F move less than this.
    pub step_tolerance: f64,
    pub max_steps_per_segment: usize,
}

impl FockOptions {
    pub fn new(cutoff: usize) -> Self {
        Self { cutoff, step_tolerance: 1e-8, max_steps_per_segment: 4096 }
    }
}

/// Oracle with default stepping options.
pub fn fock_oracle(
    config: &GateConfig,
    spectrum: &ModeSpectrum,
    noise: Option<&Noise>,
    cutoff: usize,
) -> Result<GateObservables> {
    fock_oracle_with(config, spectrum, noise, &FockOptions::new(cutoff))
}

pub fn fock_oracle_with(
    config: &GateConfig,
    spectrum: &ModeSpectrum,
    noise: Option<&Noise>,
    options: &FockOptions,
) -> Result<GateObservables> {
    let (rho, diagnostics) = fock_density(config, spectrum, noise, options)?;
    let residual = spectrum
        .modes
        .iter()
        .map(|m| noisy_path(&config.sequence, m.detuning, noise).map(|p| p.increment * config.rabi))
        .collect::<Result<Vec<_>>>()?;
    Ok(GateObservables::from_density(&rho, residual, diagnostics))
}

/// Reduced spin density matrix in the computational basis, with diagnostics.
pub fn fock_density(
    config: &GateConfig,
    spectrum: &ModeSpectrum,
    noise: Option<&Noise>,
    options: &FockOptions,
) -> Result<(Density, Diagnostics)> {
    config.validate()?;
    spectrum.ensure_valid()?;
    if spectrum.qubit_count > MAX_QUBITS {
        return Err(Error::QubitCount { expected: "1 or 2", found: spectrum.qubit_count });
    }
    if options.cutoff < MIN_CUTOFF {
        return Err(Error::invalid(format!("cutoff must be ≥ {MIN_CUTOFF}, got {}", options.cutoff)));
    }
    if let Some(n) = noise {
        n.validate()?;
    }
    let mode_dim = (options.cutoff + 1)
        .checked_pow(spectrum.mode_count() as u32)
        .filter(|&d| d <= MAX_MODE_DIM);
    let spin_dim = 1usize << spectrum.qubit_count;
    let Some(mode_dim) = mode_dim else {
        return Err(Error::DimensionTooLarge {
            dim: spin_dim.saturating_mul((options.cutoff + 1).saturating_pow(spectrum.mode_count() as u32)),
            limit: spin_dim * MAX_MODE_DIM,
        });
    };

    // a static offset is just a shifted detuning; anything else is time dependent
    let (spectrum_eff, drive_noise) = match noise {
        Some(n) if n.is_static() => (spectrum.shifted(n.model.value(0.0)), None),
        other => (spectrum.clone(), other),
    };
    let space = Space::new(&spectrum_eff, config.basis, options.cutoff, mode_dim);
    let members = thermal_ensemble(&spectrum_eff, options.cutoff, &space);
    let drive = Drive { config, noise: drive_noise };

    let mut steps = initial_steps(config, drive_noise, options.max_steps_per_segment);
    let mut previous = propagate_ensemble(&space, &drive, &members, steps);
    let mut converged = false;
    while 2 * steps <= options.max_steps_per_segment {
        steps *= 2;
        let next = propagate_ensemble(&space, &drive, &members, steps);
        let change = observable_change(&previous.0, &next.0);
        previous = next;
        if change < options.step_tolerance {
            converged = true;
            break;
        }
    }
    let (rho, truncation) = previous;
    let diagnostics = Diagnostics {
        engine: "fock",
        truncation: Some(truncation),
        reliable: converged && truncation <= TRUNCATION_LIMIT,
    };
    Ok((rho, diagnostics))
}

/// Halving from a single step can alias a modulation that completes whole
/// periods within a segment, so start at four steps per period or finer.
fn initial_steps(config: &GateConfig, noise: Option<&Noise>, max_steps: usize) -> usize {
    let Some(NoiseModel::Sinusoid { omega_mod, .. }) = noise.map(|n| &n.model) else {
        return 1;
    };
    if *omega_mod == 0.0 {
        return 1;
    }
    let longest = config.sequence.segments().iter().map(|s| s.duration).fold(0.0, f64::max);
    let needed = (4.0 * longest * omega_mod.abs() / TAU).ceil().max(1.0) as usize;
    needed.next_power_of_two().min(max_steps.max(1))
}

/// Largest move of P₀, P₁, P₂ or the Bell fidelity between two densities.
fn observable_change(a: &Density, b: &Density) -> f64 {
    let empty = || Diagnostics { engine: "fock", truncation: None, reliable: true };
    let oa = GateObservables::from_density(a, vec![], empty());
    let ob = GateObservables::from_density(b, vec![], empty());
    [(oa.p0, ob.p0), (oa.p1, ob.p1), (oa.p2, ob.p2), (oa.bell_fidelity, ob.bell_fidelity)]
        .iter()
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Index bookkeeping for spin ⊗ modes. State index = spin·mode_dim + m,
/// with mode 1 the most significant digit of m.
struct Space {
    spin_dim: usize,
    mode_dim: usize,
    cutoff: usize,
    /// Σ_k δ_k n_k for each mode index.
    diagonal: Vec<f64>,
    diag_range: (f64, f64),
    /// Per mode: (m, m + stride, √(n+1)) for every n < cutoff.
    ladders: Vec<Vec<(usize, usize, f64)>>,
    /// Per mode and spin state: targets of S_k with their amplitudes.
    spin_action: Vec<Vec<Vec<(usize, Complex64)>>>,
    /// Σ_μ |f_k^μ| per mode.
    coupling_norm: Vec<f64>,
    /// Per mode: mode indices whose occupation is in the top two levels.
    top_levels: Vec<Vec<usize>>,
}

impl Space {
    fn new(spectrum: &ModeSpectrum, basis: Basis, cutoff: usize, mode_dim: usize) -> Self {
        let modes = spectrum.mode_count();
        let qubits = spectrum.qubit_count;
        let spin_dim = 1usize << qubits;
        let strides: Vec<usize> = (0..modes).map(|k| (cutoff + 1).pow((modes - 1 - k) as u32)).collect();
        let occupation = |m: usize, k: usize| (m / strides[k]) % (cutoff + 1);

        let diagonal: Vec<f64> = (0..mode_dim)
            .map(|m| spectrum.modes.iter().enumerate().map(|(k, md)| md.detuning * occupation(m, k) as f64).sum())
            .collect();
        let lo = diagonal.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = diagonal.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let ladders = (0..modes)
            .map(|k| {
                (0..mode_dim)
                    .filter(|&m| occupation(m, k) < cutoff)
                    .map(|m| (m, m + strides[k], ((occupation(m, k) + 1) as f64).sqrt()))
                    .collect()
            })
            .collect();

        let spin_action = spectrum
            .modes
            .iter()
            .map(|mode| {
                (0..spin_dim)
                    .map(|s| {
                        let mut targets: Vec<(usize, Complex64)> = Vec::new();
                        for (mu, &f) in mode.couplings.iter().enumerate() {
                            let bit = 1usize << (qubits - 1 - mu);
                            let up = s & bit == 0;
                            let (target, amp) = match basis {
                                Basis::X => (s ^ bit, Complex64::new(1.0, 0.0)),
                                // σ_y|0⟩ = i|1⟩, σ_y|1⟩ = −i|0⟩
                                Basis::Y => (s ^ bit, if up { I } else { -I }),
                                Basis::Z => (s, Complex64::new(if up { 1.0 } else { -1.0 }, 0.0)),
                            };
                            match targets.iter_mut().find(|(t, _)| *t == target) {
                                Some(slot) => slot.1 += amp * f,
                                None => targets.push((target, amp * f)),
                            }
                        }
                        targets
                    })
                    .collect()
            })
            .collect();

        let coupling_norm = spectrum.modes.iter().map(|m| m.couplings.iter().map(|f| f.abs()).sum()).collect();
        let top_levels = (0..modes)
            .map(|k| (0..mode_dim).filter(|&m| occupation(m, k) + 2 > cutoff).collect())
            .collect();
        Self {
            spin_dim,
            mode_dim,
            cutoff,
            diagonal,
            diag_range: (lo, hi),
            ladders,
            spin_action,
            coupling_norm,
            top_levels,
        }
    }

    fn len(&self) -> usize {
        self.spin_dim * self.mode_dim
    }

    /// y = (w·D − shift + i Σ_k S_k (c_k a_k† − c_k* a_k)) x.
    fn apply(&self, gen: &Generator, shift: f64, x: &[Complex64], y: &mut [Complex64]) {
        let md = self.mode_dim;
        for s in 0..self.spin_dim {
            let base = s * md;
            for m in 0..md {
                y[base + m] = x[base + m] * (gen.weight * self.diagonal[m] - shift);
            }
        }
        for (k, ladder) in self.ladders.iter().enumerate() {
            let c = gen.couplings[k];
            if c == ZERO {
                continue;
            }
            for s in 0..self.spin_dim {
                for &(target, amp) in &self.spin_action[k][s] {
                    let up = I * amp * c;
                    let down = -I * amp * c.conj();
                    let (src, dst) = (s * md, target * md);
                    for &(lo, hi, sq) in ladder {
                        y[dst + hi] += up * (sq * x[src + lo]);
                        y[dst + lo] += down * (sq * x[src + hi]);
                    }
                }
            }
        }
    }

    /// Gershgorin bounds of the generator's spectrum.
    fn bounds(&self, gen: &Generator) -> (f64, f64) {
        let (lo, hi) = self.diag_range;
        let (lo, hi) = if gen.weight >= 0.0 { (gen.weight * lo, gen.weight * hi) } else { (gen.weight * hi, gen.weight * lo) };
        let radius: f64 = gen
            .couplings
            .iter()
            .zip(&self.coupling_norm)
            .map(|(c, f)| c.norm() * f * 2.0 * (self.cutoff as f64).sqrt())
            .sum();
        (lo - radius, hi + radius)
    }

    fn top_population(&self, psi: &[Complex64]) -> f64 {
        self.top_levels
            .iter()
            .map(|levels| {
                (0..self.spin_dim)
                    .map(|s| levels.iter().map(|&m| psi[s * self.mode_dim + m].norm_sqr()).sum::<f64>())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// Coefficient of the diagonal part and effective mode couplings.
struct Generator {
    weight: f64,
    couplings: Vec<Complex64>,
}

struct Drive<'a> {
    config: &'a GateConfig,
    noise: Option<&'a Noise>,
}

impl Drive<'_> {
    fn coupling(&self, phase: f64, t: f64) -> Complex64 {
        let (extra, env) = self.noise.map_or((0.0, 1.0), |n| n.modulation(t));
        Complex64::from_polar(self.config.rabi * env, extra - phase)
    }
}

/// J_0..J_n(x) by Miller's backward recurrence, trimmed where negligible.
fn bessel_coefficients(x: f64) -> Vec<f64> {
    if x < 1e-14 {
        return vec![1.0];
    }
    let start = (x + 12.0 * x.cbrt() + 30.0).ceil() as usize;
    let mut j = vec![0.0; start + 2];
    j[start] = 1e-30;
    for k in (1..=start).rev() {
        j[k - 1] = 2.0 * k as f64 / x * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in &mut j[k - 1..] {
                *v *= 1e-250;
            }
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    for v in &mut j {
        *v /= norm;
    }
    let mut keep = j.len();
    while keep > 1 && (keep as f64 - 1.0) > x && j[keep - 1].abs() < 1e-17 {
        keep -= 1;
    }
    j.truncate(keep);
    j
}

/// Scratch buffers reused across exponentials.
struct Work {
    prev: Vec<Complex64>,
    cur: Vec<Complex64>,
    next: Vec<Complex64>,
    acc: Vec<Complex64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Self { prev: vec![ZERO; n], cur: vec![ZERO; n], next: vec![ZERO; n], acc: vec![ZERO; n] }
    }
}

/// psi ← exp(−i h K) psi via a Chebyshev series on the Gershgorin interval.
fn expm_apply(space: &Space, gen: &Generator, h: f64, psi: &mut [Complex64], w: &mut Work) {
    let (lo, hi) = space.bounds(gen);
    let centre = 0.5 * (lo + hi);
    let half = (0.5 * (hi - lo)).max(1e-300);
    let coeffs = bessel_coefficients(half * h);
    // T_j((K − centre)/half) ψ with (−i)^j weights
    w.prev.copy_from_slice(psi);
    for (a, p) in w.acc.iter_mut().zip(&w.prev) {
        *a = p * coeffs[0];
    }
    if coeffs.len() > 1 {
        space.apply(gen, centre, &w.prev, &mut w.cur);
        for v in w.cur.iter_mut() {
            *v /= half;
        }
        let mut phase = -I;
        for (a, c) in w.acc.iter_mut().zip(&w.cur) {
            *a += c * (phase * 2.0 * coeffs[1]);
        }
        for &cj in &coeffs[2..] {
            space.apply(gen, centre, &w.cur, &mut w.next);
            for (n, p) in w.next.iter_mut().zip(&w.prev) {
                *n = *n * (2.0 / half) - p;
            }
            phase *= -I;
            let weight = phase * (2.0 * cj);
            for (a, n) in w.acc.iter_mut().zip(&w.next) {
                *a += n * weight;
            }
            std::mem::swap(&mut w.prev, &mut w.cur);
            std::mem::swap(&mut w.cur, &mut w.next);
        }
    }
    let global = Complex64::from_polar(1.0, -centre * h);
    for (p, a) in psi.iter_mut().zip(&w.acc) {
        *p = a * global;
    }
}

/// Weighted initial Fock product states, heaviest first.
fn thermal_ensemble(spectrum: &ModeSpectrum, cutoff: usize, space: &Space) -> Vec<(usize, f64)> {
    let modes = spectrum.mode_count();
    let level = |nbar: f64, n: usize| {
        if nbar == 0.0 {
            if n == 0 { 1.0 } else { 0.0 }
        } else {
            (nbar / (nbar + 1.0)).powi(n as i32) / (nbar + 1.0)
        }
    };
    let mut members: Vec<(usize, f64)> = (0..space.mode_dim)
        .map(|m| {
            let mut rest = m;
            let mut w = 1.0;
            for k in (0..modes).rev() {
                w *= level(spectrum.modes[k].thermal_occupation, rest % (cutoff + 1));
                rest /= cutoff + 1;
            }
            (m, w)
        })
        .filter(|&(_, w)| w > 0.0)
        .collect();
    members.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut total = 0.0;
    let mut keep = 0;
    for (_, w) in &members {
        total += w;
        keep += 1;
        if total >= ENSEMBLE_WEIGHT {
            break;
        }
    }
    members.truncate(keep);
    for m in &mut members {
        m.1 /= total;
    }
    members
}

const CF4_SMALL: f64 = 0.25 - 0.288_675_134_594_812_9;
const CF4_BIG: f64 = 0.25 + 0.288_675_134_594_812_9;
const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9;

/// Propagates one initial mode state; returns the final state and the
/// largest top-level population seen at step ends.
fn propagate_member(space: &Space, drive: &Drive, mode_index: usize, steps: usize) -> (Vec<Complex64>, f64) {
    let mut psi = vec![ZERO; space.len()];
    psi[mode_index] = Complex64::new(1.0, 0.0);
    let mut work = Work::new(space.len());
    let modes = space.ladders.len();
    let mut top = space.top_population(&psi);
    let mut start = 0.0;
    for seg in drive.config.sequence.segments() {
        let h = seg.duration / steps as f64;
        for i in 0..steps {
            let t = start + i as f64 * h;
            if drive.noise.is_none() {
                let gen = Generator { weight: 1.0, couplings: vec![drive.coupling(seg.phase, t); modes] };
                expm_apply(space, &gen, h, &mut psi, &mut work);
            } else {
                let c1 = drive.coupling(seg.phase, t + (0.5 - GAUSS_OFFSET) * h);
                let c2 = drive.coupling(seg.phase, t + (0.5 + GAUSS_OFFSET) * h);
                let first = Generator { weight: 0.5, couplings: vec![c1 * CF4_BIG + c2 * CF4_SMALL; modes] };
                let second = Generator { weight: 0.5, couplings: vec![c1 * CF4_SMALL + c2 * CF4_BIG; modes] };
                expm_apply(space, &first, h, &mut psi, &mut work);
                expm_apply(space, &second, h, &mut psi, &mut work);
            }
            top = top.max(space.top_population(&psi));
        }
        start += seg.duration;
    }
    (psi, top)
}

/// Ensemble-averaged reduced density matrix and weighted truncation diagnostic.
fn propagate_ensemble(space: &Space, drive: &Drive, members: &[(usize, f64)], steps: usize) -> (Density, f64) {
    let results: Vec<(Vec<Complex64>, f64)> =
        members.par_iter().map(|&(m, _)| propagate_member(space, drive, m, steps)).collect();
    let md = space.mode_dim;
    let mut rho = Density::zeros(space.spin_dim, space.spin_dim);
    let mut truncation = 0.0;
    for ((psi, top), &(_, w)) in results.iter().zip(members) {
        truncation += w * top;
        for s in 0..space.spin_dim {
            for sp in 0..space.spin_dim {
                let sum: Complex64 =
                    psi[s * md..(s + 1) * md].iter().zip(&psi[sp * md..(sp + 1) * md]).map(|(a, b)| a * b.conj()).sum();
                rho[(s, sp)] += sum * w;
            }
        }
    }
    (rho, truncation)
}
