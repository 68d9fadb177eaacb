use std::f64::consts::{PI, TAU};
use std::path::Path;

use phasemod::design::{detuning_sweep, entangling_phase, SweepRequest};
use phasemod::io::{
    bichromatic_csv, describe_sequence, design_to_json, detuning_sweep_csv, filter_function_csv, format_number,
    gate_from_json, hz_to_rad, noise_from_json, observables_to_json, rad_to_hz, response_csv, spectrum_from_json,
    static_sweep_csv, trajectory_csv,
};
use phasemod::noise::{
    filter_function_first_order, filter_function_symmetric, phase_averaged_response, static_sweep_points,
    StaticSweepOptions,
};
use phasemod::parallel::map_ordered;
use phasemod::sim::{analytic_observables, fock_oracle};
use phasemod::trajectory::sample_trajectory;
use phasemod::{design_gate, Basis, DesignRequest, Error, GateConfig, ModeSpectrum, Ordering, Scheme, Target};

use crate::manifest::Run;
use crate::{
    BasisArg, BichromaticArgs, DesignArgs, Engine, SchemeArg, SimulateArgs, SweepArgs, SweepKind, TrajectoryArgs,
};

/// Optional cap on worker threads, whatever --parallel asks for.
const WORKER_CAP_VAR: &str = "PHASEMOD_MAX_WORKERS";

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    fn no_solution(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn unreliable(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NoSolution { .. } => CliError::no_solution(e.to_string()),
            other => CliError::input(other.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn basis(b: BasisArg) -> Basis {
    match b {
        BasisArg::X => Basis::X,
        BasisArg::Y => Basis::Y,
        BasisArg::Z => Basis::Z,
    }
}

fn scheme(s: SchemeArg) -> Scheme {
    match s {
        SchemeArg::Standard => Scheme::Standard,
        SchemeArg::PhaseModulated => Scheme::PhaseModulated,
    }
}

fn mode_index(text: &str, modes: usize) -> CliResult<usize> {
    let k: usize = text.trim().parse().map_err(|_| CliError::input(format!("bad mode index {text:?}")))?;
    if k == 0 || k > modes {
        return Err(CliError::input(format!("mode {k} out of range 1..={modes}")));
    }
    Ok(k - 1)
}

/// "1:1,2:2" → targets; empty means every mode once.
fn parse_targets(text: &str, modes: usize) -> CliResult<Vec<Target>> {
    if text.trim().is_empty() {
        return Ok((0..modes).map(|mode| Target { mode, order: 1 }).collect());
    }
    text.split(',')
        .map(|pair| {
            let (k, q) = pair
                .split_once(':')
                .ok_or_else(|| CliError::input(format!("target {pair:?} is not mode:order")))?;
            let order = q.trim().parse().map_err(|_| CliError::input(format!("bad order in target {pair:?}")))?;
            Ok(Target { mode: mode_index(k, modes)?, order })
        })
        .collect()
}

fn parse_ordering(text: &str, modes: usize) -> CliResult<Ordering> {
    match text.trim() {
        "min-rabi" | "minimize-rabi" => Ok(Ordering::MinimizeRabi),
        list => Ok(Ordering::Explicit(list.split(',').map(|k| mode_index(k, modes)).collect::<CliResult<_>>()?)),
    }
}

fn workers(requested: usize) -> usize {
    let cap = std::env::var(WORKER_CAP_VAR).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&c| c > 0);
    let n = requested.max(1);
    cap.map_or(n, |c| n.min(c))
}

/// Evenly spaced abscissae with the end points hit exactly.
fn grid(from: f64, to: f64, points: usize, log: bool) -> CliResult<Vec<f64>> {
    if !(from.is_finite() && to.is_finite() && from < to) {
        return Err(CliError::input(format!("range needs --from < --to, got {from} and {to}")));
    }
    if points < 2 {
        return Err(CliError::input(format!("need at least 2 points, got {points}")));
    }
    if log && from <= 0.0 {
        return Err(CliError::input("logarithmic spacing needs a positive range"));
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            if i + 1 == points {
                to
            } else if log {
                from * (to / from).powf(i as f64 / last)
            } else {
                from + (to - from) * (i as f64 / last)
            }
        })
        .collect())
}

fn load_gate(run: &mut Run, gate: &Path, spectrum: Option<&Path>) -> CliResult<(GateConfig, ModeSpectrum)> {
    let gate_text = run.read(gate)?;
    let config = gate_from_json(&gate_text)?;
    let spectrum = match spectrum {
        Some(p) => spectrum_from_json(&run.read(p)?)?,
        None => spectrum_from_json(&gate_text).map_err(|e| {
            CliError::input(format!("{} holds no spectrum; pass --spectrum ({e})", gate.display()))
        })?,
    };
    Ok((config, spectrum))
}

fn qubit_index(q: usize, spectrum: &ModeSpectrum) -> CliResult<usize> {
    if q == 0 || q > spectrum.qubit_count {
        return Err(CliError::input(format!("qubit {q} out of range 1..={}", spectrum.qubit_count)));
    }
    Ok(q - 1)
}

pub fn design(args: DesignArgs) -> CliResult {
    let mut run = Run::start("design", &args.output.out)?;
    let spectrum = spectrum_from_json(&run.read(&args.spectrum)?)?;
    let p = &args.params;
    let modes = spectrum.mode_count();
    let request = DesignRequest {
        targets: parse_targets(&p.targets, modes)?,
        ordering: parse_ordering(&p.ordering, modes)?,
        spectrum,
        gate_time: p.gate_time,
        scheme: scheme(p.scheme),
        basis: basis(p.basis),
    };
    let result = design_gate(&request)?;
    run.write("design.json", &(design_to_json(&result, &request.spectrum)? + "\n"))?;
    run.write("sequence.csv", &phasemod::io::sequence_csv(&result.config.sequence))?;
    let theta = entangling_phase(&result.config, &request.spectrum)?;
    println!("Ω/2π = {} Hz, Θ = {:+.6}π", format_number(rad_to_hz(result.config.rabi)), theta / PI);
    print!("{}", describe_sequence(&result.config.sequence));
    run.finish("design")
}

/// Fails only when no point produced a value.
fn check_gaps(gaps: &[Option<String>]) -> CliResult {
    if gaps.is_empty() || gaps.iter().any(Option::is_none) {
        return Ok(());
    }
    let first = gaps[0].clone().unwrap_or_default();
    let message = format!("all {} points failed; first: {first}", gaps.len());
    if gaps.iter().flatten().all(|g| g.contains("entangling area")) {
        Err(CliError::no_solution(message))
    } else {
        Err(CliError::input(message))
    }
}

pub fn sweep(args: SweepArgs) -> CliResult {
    let kind = match args.kind {
        SweepKind::Detuning => "detuning",
        SweepKind::StaticError => "static_error",
        SweepKind::FilterFunction => "filter_function",
        SweepKind::Response => "response",
    };
    let stem = format!("sweep_{kind}");
    let mut run = Run::start("sweep", &args.output.out)?;
    let xs = grid(args.from, args.to, args.points, args.log)?;
    let workers = workers(args.parallel);

    let (csv, gaps) = match args.kind {
        SweepKind::Detuning => {
            let path = args.spectrum.as_deref().ok_or_else(|| CliError::input("detuning sweep needs --spectrum"))?;
            let template = spectrum_from_json(&run.read(path)?)?;
            let gate_time = args.gate_time.ok_or_else(|| CliError::input("detuning sweep needs --gate-time"))?;
            let modes = template.mode_count();
            let params = SweepRequest {
                gate_time,
                targets: parse_targets(&args.targets, modes)?,
                scheme: scheme(args.scheme),
                ordering: parse_ordering(&args.ordering, modes)?,
                basis: basis(args.basis),
            };
            let offsets: Vec<f64> = xs.iter().map(|&f| hz_to_rad(f)).collect();
            let points = detuning_sweep(&template, &offsets, &params, workers)?;
            (detuning_sweep_csv(&points), points.into_iter().map(|p| p.gap).collect::<Vec<_>>())
        }
        SweepKind::StaticError => {
            let gate = args.gate.as_deref().ok_or_else(|| CliError::input("static-error sweep needs --gate"))?;
            let (config, spectrum) = load_gate(&mut run, gate, args.spectrum.as_deref())?;
            let options = StaticSweepOptions {
                exact: args.exact,
                rescale_rabi: args.rescale_rabi,
                qubit: qubit_index(args.qubit, &spectrum)?,
            };
            let errors: Vec<f64> = xs.iter().map(|&f| hz_to_rad(f)).collect();
            let points = static_sweep_points(&config, &spectrum, &errors, options, workers)?;
            (static_sweep_csv(&points), points.into_iter().map(|p| p.gap).collect())
        }
        SweepKind::FilterFunction => {
            let gate = args.gate.as_deref().ok_or_else(|| CliError::input("filter-function sweep needs --gate"))?;
            let (config, spectrum) = load_gate(&mut run, gate, args.spectrum.as_deref())?;
            let qubit = qubit_index(args.qubit, &spectrum)?;
            let omegas: Vec<f64> = xs.iter().map(|x| x * TAU / config.gate_time).collect();
            let filter = if args.symmetric {
                filter_function_symmetric(&config.sequence, &spectrum, config.rabi, &omegas, qubit)?
            } else {
                filter_function_first_order(&config.sequence, &spectrum, config.rabi, &omegas, qubit)?
            };
            (filter_function_csv(&filter, config.gate_time), vec![])
        }
        SweepKind::Response => {
            let gate = args.gate.as_deref().ok_or_else(|| CliError::input("response sweep needs --gate"))?;
            let (config, spectrum) = load_gate(&mut run, gate, args.spectrum.as_deref())?;
            let depth = hz_to_rad(args.depth_hz.ok_or_else(|| CliError::input("response sweep needs --depth-hz"))?);
            let qubit = qubit_index(args.qubit, &spectrum)?;
            let omegas: Vec<f64> = xs.iter().map(|x| x * TAU / config.gate_time).collect();
            let results = map_ordered(workers, &omegas, |&w| {
                phase_averaged_response(&config, &spectrum, w, depth, args.phase_grid, qubit)
            })?;
            let values: Vec<_> = results.iter().map(|r| r.as_ref().ok().copied()).collect();
            let gaps: Vec<_> = results.iter().map(|r| r.as_ref().err().map(|e| e.to_string())).collect();
            (response_csv(&omegas, config.gate_time, &values, &gaps), gaps)
        }
    };
    let path = run.write(&format!("{stem}.csv"), &csv)?;
    let failed = gaps.iter().filter(|g| g.is_some()).count();
    println!("{} points written to {} ({failed} gaps)", xs.len(), path.display());
    run.finish(&stem)?;
    check_gaps(&gaps)
}

pub fn trajectory(args: TrajectoryArgs) -> CliResult {
    let mut run = Run::start("trajectory", &args.output.out)?;
    let (config, spectrum) = load_gate(&mut run, &args.gate, args.spectrum.as_deref())?;
    let modes: Vec<usize> = match args.mode {
        Some(k) => vec![mode_index(&k.to_string(), spectrum.mode_count())?],
        None => (0..spectrum.mode_count()).collect(),
    };
    for k in modes {
        let traj = sample_trajectory(&config.sequence, spectrum.modes[k].detuning, args.points)?;
        run.write(&format!("trajectory_mode_{}.csv", k + 1), &trajectory_csv(&traj))?;
        println!("mode {}: |α(τ)| = {} s", k + 1, format_number(traj.endpoint.norm()));
    }
    run.finish("trajectory")
}

pub fn simulate(args: SimulateArgs) -> CliResult {
    let mut run = Run::start("simulate", &args.output.out)?;
    let (config, spectrum) = load_gate(&mut run, &args.gate, args.spectrum.as_deref())?;
    let noise = match &args.noise {
        Some(p) => Some(noise_from_json(&run.read(p)?)?),
        None => None,
    };
    let obs = match args.engine {
        Engine::Analytic => analytic_observables(&config, &spectrum, noise.as_ref())?,
        Engine::Fock => fock_oracle(&config, &spectrum, noise.as_ref(), args.cutoff)?,
    };
    run.write("observables.json", &(observables_to_json(&obs)? + "\n"))?;
    println!(
        "P0 = {}, P1 = {}, P2 = {}, F = {}",
        format_number(obs.p0),
        format_number(obs.p1),
        format_number(obs.p2),
        format_number(obs.bell_fidelity)
    );
    run.finish("simulate")?;
    if obs.diagnostics.reliable {
        Ok(())
    } else {
        Err(CliError::unreliable(format!(
            "result flagged unreliable (truncation diagnostic {}); raise --cutoff",
            obs.diagnostics.truncation.map_or("n/a".to_string(), format_number)
        )))
    }
}

pub fn export_bichromatic(args: BichromaticArgs) -> CliResult {
    let mut run = Run::start("export-bichromatic", &args.output.out)?;
    let config = gate_from_json(&run.read(&args.gate)?)?;
    let segments = config.sequence.to_bichromatic(args.spin_phase);
    let path = run.write("bichromatic.csv", &bichromatic_csv(&segments))?;
    println!("{} segments written to {}", segments.len(), path.display());
    run.finish("bichromatic")
}
