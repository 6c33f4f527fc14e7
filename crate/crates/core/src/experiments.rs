//! Protocol drivers: Ramsey and Hahn-echo envelopes, optical pumping, Raman
//! population transfer, and the calibrations that pin their presets.
//!
//! Every driver runs each (delay, phase, emitter) combination as an
//! independent job through an [`Executor`] and reduces in job order.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

// inherent std float methods shadow these when std is linked
#[allow(unused_imports)]
use num_traits::Float;

use crate::ensemble::{average_states, detuning_nodes, map_nodes, DetuningNode, EnsembleSpec};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::fit::{fit_decay, DecayFit, DecayModel};
use crate::integrate::{evolve, EvolveOptions, ExcitationDephasing, Stepping};
use crate::levels::{LevelSystem, Transition, EXCITED};
use crate::pulses::{
    gaussian_pulse, raman_pair, square_pulse, PulseTimeline, RamanPair, GAUSSIAN_WINDOW_FWHM,
};
use crate::state::{thermal_ground_state, DensityMatrix};

/// Calibrated and reference parameter values.
pub mod presets {
    /// Optical pulse FWHM of the Ramsey and echo sequences (ns).
    pub const COHERENCE_PULSE_FWHM: f64 = 0.012;
    /// Excitation-induced dephasing per radian of total pulse area (GHz/rad):
    /// 0.45 GHz for the two π/2 pulses of a Ramsey sequence, 0.9 GHz for the
    /// π/2–π–π/2 echo.
    pub const EID_PER_RADIAN: f64 = 0.45 / core::f64::consts::PI;
    /// Optical-pumping pulse length (ns) and readout delay after it (ns).
    pub const PUMP_DURATION: f64 = 100.0;
    pub const PUMP_READOUT_DELAY: f64 = 6.0;
    /// Resonant Rabi frequency (rad/ns) of the square pump on D that leaves
    /// ρ₂₂ = 0.19 at the readout time with default rates and a 10 GHz
    /// Gauss–Hermite ensemble; output of [`calibrate_pump_rabi`](super::calibrate_pump_rabi).
    pub const PUMP_RABI: f64 = 24.22;
    pub const RAMAN_DETUNING: f64 = 70.0;
    pub const RAMAN_FWHM: f64 = 0.05;
    /// Equal signal and control area (rad) giving η = 0.48 after the pump
    /// preset; output of [`calibrate_raman_area`](super::calibrate_raman_area).
    pub const RAMAN_AREA: f64 = 10.36;
    /// Equal area maximising η with decoherence switched off during the
    /// pair; output of [`find_ideal_raman_area`](super::find_ideal_raman_area).
    pub const IDEAL_RAMAN_AREA: f64 = 15.27;
}

/// Fluorescence rate `Σₑ ρₑₑ·γₑ` over the excited levels, with `γₑ` the
/// total radiative rate of level `e` (1/ns).
pub fn fluorescence_observable(rho: &DensityMatrix, system: &LevelSystem) -> f64 {
    EXCITED
        .iter()
        .map(|&e| rho.population(e) * system.radiative_rate(e))
        .sum()
}

/// `η = (ρᶠ₂₂ − ρⁱ₂₂)/(1 − 2ρⁱ₂₂)`: the fraction of the population
/// difference moved from `|1⟩` to `|2⟩`.
pub fn transfer_efficiency(rho_i22: f64, rho_f22: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&rho_i22) {
        return Err(Error::invalid("rho_i22", "must lie in [0, 0.5)"));
    }
    if !(0.0..=1.0).contains(&rho_f22) {
        return Err(Error::invalid("rho_f22", "must lie in [0, 1]"));
    }
    Ok((rho_f22 - rho_i22) / (1.0 - 2.0 * rho_i22))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sequence {
    /// π/2 – τ – π/2(φ).
    Ramsey,
    /// π/2 – τ – π – τ – π/2(φ).
    HahnEcho,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceConfig {
    pub pulse_fwhm: f64,
    pub transition: Transition,
    /// Carrier detuning of all pulses (GHz).
    pub carrier_detuning: f64,
    /// Extra excited-level linewidth while the sequence runs (GHz).
    pub excitation_dephasing: f64,
    pub fit_model: DecayModel,
    pub initial_state: DensityMatrix,
    pub stepping: Stepping,
}

impl CoherenceConfig {
    /// 12 ps pulses on C from the 5 K thermal state, EID scaled to the total
    /// pulse area of the sequence.
    pub fn reference(sequence: Sequence, ground_splitting: f64) -> Result<Self> {
        Ok(CoherenceConfig {
            pulse_fwhm: presets::COHERENCE_PULSE_FWHM,
            transition: Transition::C,
            carrier_detuning: 0.0,
            excitation_dephasing: presets::EID_PER_RADIAN * total_area(sequence),
            fit_model: match sequence {
                Sequence::Ramsey => DecayModel::GaussianTimesExponential,
                Sequence::HahnEcho => DecayModel::Exponential,
            },
            initial_state: thermal_ground_state(5.0, ground_splitting)?,
            stepping: Stepping::default(),
        })
    }
}

/// Sum of the nominal pulse areas of a sequence (rad).
pub fn total_area(sequence: Sequence) -> f64 {
    match sequence {
        Sequence::Ramsey => PI,
        Sequence::HahnEcho => 2.0 * PI,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeResult {
    pub sequence: Sequence,
    pub delays: Vec<f64>,
    /// Ensemble excited population at readout, bright and dark final phase.
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    /// `upper − lower`, the fringe envelope.
    pub contrast: Vec<f64>,
    /// Readout time of each delay relative to the first pulse centre (ns):
    /// τ for Ramsey, 2τ for the echo.
    pub readout_times: Vec<f64>,
    pub fit: Result<DecayFit>,
}

fn coherence_timeline(
    sequence: Sequence,
    cfg: &CoherenceConfig,
    tau: f64,
    final_phase: f64,
) -> Result<PulseTimeline> {
    let pulse = |area, center, phase| {
        gaussian_pulse(
            area,
            cfg.pulse_fwhm,
            center,
            cfg.transition,
            cfg.carrier_detuning,
            phase,
        )
    };
    let drives = match sequence {
        Sequence::Ramsey => alloc::vec![
            pulse(FRAC_PI_2, 0.0, 0.0)?,
            pulse(FRAC_PI_2, tau, final_phase)?
        ],
        Sequence::HahnEcho => alloc::vec![
            pulse(FRAC_PI_2, 0.0, 0.0)?,
            pulse(PI, tau, 0.0)?,
            pulse(FRAC_PI_2, 2.0 * tau, final_phase)?,
        ],
    };
    PulseTimeline::new(drives)
}

/// Runs a two- or three-pulse coherence sequence for every delay in `taus`
/// and fits the fringe envelope against τ.
pub fn run_coherence_sequence<E: Executor>(
    exec: &E,
    sequence: Sequence,
    system: &LevelSystem,
    spec: &EnsembleSpec,
    cfg: &CoherenceConfig,
    taus: &[f64],
) -> Result<EnvelopeResult> {
    if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::invalid(
            "tau_grid",
            "delays must be positive and finite",
        ));
    }
    if taus.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(
            "tau_grid",
            "delays must be strictly ascending",
        ));
    }
    if !(cfg.excitation_dephasing >= 0.0) {
        return Err(Error::invalid(
            "excitation_dephasing",
            "must be nonnegative",
        ));
    }
    let nodes = detuning_nodes(spec)?;
    let n_nodes = nodes.len();
    // job = (delay, final phase, node), node fastest
    let jobs = taus.len() * 2 * n_nodes;
    let results = exec.map_indexed(jobs, |j| -> Result<f64> {
        let node = &nodes[j % n_nodes];
        let phase = if (j / n_nodes) % 2 == 0 { 0.0 } else { PI };
        let tau = taus[j / (2 * n_nodes)];
        let timeline = coherence_timeline(sequence, cfg, tau, phase)?;
        let (t0, t1) = timeline.span().expect("sequence has pulses");
        let opts = EvolveOptions {
            stepping: cfg.stepping,
            emitter_detuning: node.detuning,
            excitation_dephasing: (cfg.excitation_dephasing > 0.0).then_some(ExcitationDephasing {
                linewidth: cfg.excitation_dephasing,
                start: t0,
                stop: t1,
            }),
            ..Default::default()
        };
        let traj = evolve(&cfg.initial_state, system, &timeline, (t0, t1), &opts).map_err(|e| {
            Error::Node {
                index: j % n_nodes,
                detuning: node.detuning,
                source: alloc::boxed::Box::new(e),
            }
        })?;
        Ok(traj.final_state().excited_population())
    });
    let mut excited = Vec::with_capacity(jobs);
    for r in results {
        excited.push(r?);
    }
    let mean = |block: usize| -> f64 {
        let vals = &excited[block * n_nodes..(block + 1) * n_nodes];
        nodes.iter().zip(vals).map(|(n, v)| n.weight * v).sum()
    };
    // the echo's π pulse inverts which final phase is bright
    let bright_is_zero = sequence == Sequence::Ramsey;
    let mut upper = Vec::with_capacity(taus.len());
    let mut lower = Vec::with_capacity(taus.len());
    for k in 0..taus.len() {
        let (p0, ppi) = (mean(2 * k), mean(2 * k + 1));
        let (u, l) = if bright_is_zero { (p0, ppi) } else { (ppi, p0) };
        upper.push(u);
        lower.push(l);
    }
    let contrast: Vec<f64> = upper.iter().zip(&lower).map(|(u, l)| u - l).collect();
    let readout_times = taus
        .iter()
        .map(|t| match sequence {
            Sequence::Ramsey => *t,
            Sequence::HahnEcho => 2.0 * t,
        })
        .collect();
    let fit = fit_decay(taus, &contrast, cfg.fit_model);
    Ok(EnvelopeResult {
        sequence,
        delays: taus.to_vec(),
        upper,
        lower,
        contrast,
        readout_times,
        fit,
    })
}

pub fn run_ramsey<E: Executor>(
    exec: &E,
    system: &LevelSystem,
    spec: &EnsembleSpec,
    cfg: &CoherenceConfig,
    taus: &[f64],
) -> Result<EnvelopeResult> {
    run_coherence_sequence(exec, Sequence::Ramsey, system, spec, cfg, taus)
}

pub fn run_hahn_echo<E: Executor>(
    exec: &E,
    system: &LevelSystem,
    spec: &EnsembleSpec,
    cfg: &CoherenceConfig,
    taus: &[f64],
) -> Result<EnvelopeResult> {
    run_coherence_sequence(exec, Sequence::HahnEcho, system, spec, cfg, taus)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PumpConfig {
    /// Peak Rabi frequency of the square pump (rad/ns).
    pub rabi: f64,
    pub duration: f64,
    pub transition: Transition,
    pub detuning: f64,
    /// Readout time after the end of the pump (ns).
    pub readout_delay: f64,
    pub temperature: f64,
    /// Number of evenly spaced trace samples.
    pub trace_points: usize,
    pub stepping: Stepping,
}

impl Default for PumpConfig {
    fn default() -> Self {
        PumpConfig {
            rabi: presets::PUMP_RABI,
            duration: presets::PUMP_DURATION,
            transition: Transition::D,
            detuning: 0.0,
            readout_delay: presets::PUMP_READOUT_DELAY,
            temperature: 5.0,
            trace_points: 201,
            stepping: Stepping::default(),
        }
    }
}

impl PumpConfig {
    fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("pump_duration", "must be positive"));
        }
        if !(self.readout_delay >= 0.0 && self.readout_delay.is_finite()) {
            return Err(Error::invalid("readout_delay", "must be nonnegative"));
        }
        Ok(())
    }

    pub fn readout_time(&self) -> f64 {
        self.duration + self.readout_delay
    }

    fn timeline(&self) -> Result<PulseTimeline> {
        PulseTimeline::new(alloc::vec![square_pulse(
            self.rabi,
            self.duration,
            0.0,
            self.transition,
            self.detuning,
            0.0
        )?])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PumpResult {
    pub times: Vec<f64>,
    /// Ensemble populations at each trace time.
    pub populations: Vec<[f64; 4]>,
    pub fluorescence: Vec<f64>,
    pub rho22_at_pump_end: f64,
    pub rho22_at_readout: f64,
    /// Per-node states at the readout time.
    pub node_states: Vec<DensityMatrix>,
    pub nodes: Vec<DetuningNode>,
}

fn trace_times(t_end: f64, points: usize, extra: &[f64]) -> Vec<f64> {
    let mut ts: Vec<f64> = if points >= 2 {
        (0..points)
            .map(|k| t_end * k as f64 / (points - 1) as f64)
            .collect()
    } else {
        alloc::vec![t_end]
    };
    ts.extend_from_slice(extra);
    ts.sort_by(|a, b| a.total_cmp(b));
    ts.dedup();
    ts
}

/// Square pump from the thermal state, followed by free relaxation up to the
/// readout time.
pub fn run_optical_pumping<E: Executor>(
    exec: &E,
    system: &LevelSystem,
    spec: &EnsembleSpec,
    cfg: &PumpConfig,
) -> Result<PumpResult> {
    cfg.validate()?;
    let rho0 = thermal_ground_state(cfg.temperature, system.ground_splitting())?;
    let timeline = cfg.timeline()?;
    let t_end = cfg.readout_time();
    let times = trace_times(t_end, cfg.trace_points, &[cfg.duration]);
    let nodes = detuning_nodes(spec)?;
    let runs = map_nodes(exec, &nodes, |detuning| {
        let opts = EvolveOptions {
            stepping: cfg.stepping,
            sample_times: times.clone(),
            emitter_detuning: detuning,
            ..Default::default()
        };
        evolve(&rho0, system, &timeline, (0.0, t_end), &opts).map(|t| t.states)
    })?;
    let mean = average_states(&nodes, &runs);
    let at = |t: f64| times.iter().position(|&s| s == t).expect("sampled");
    let node_states = runs.iter().map(|r| *r.last().expect("sampled")).collect();
    Ok(PumpResult {
        populations: mean.iter().map(|s| s.populations()).collect(),
        fluorescence: mean
            .iter()
            .map(|s| fluorescence_observable(s, system))
            .collect(),
        rho22_at_pump_end: mean[at(cfg.duration)].population(1),
        rho22_at_readout: mean[at(t_end)].population(1),
        times,
        node_states,
        nodes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RamanConfig {
    pub pair: RamanPair,
    /// Switch every rate off while the pair is on.
    pub lossless: bool,
    pub trace_points: usize,
    pub stepping: Stepping,
}

impl RamanConfig {
    /// Δ = 70 GHz, δ₂ = 0, zero delay, 50 ps pulses of the calibrated area.
    pub fn reference() -> Self {
        RamanConfig {
            pair: RamanPair {
                common_detuning: presets::RAMAN_DETUNING,
                two_photon_detuning: 0.0,
                relative_delay: 0.0,
                signal_area: presets::RAMAN_AREA,
                control_area: presets::RAMAN_AREA,
                fwhm: presets::RAMAN_FWHM,
                signal_phase: 0.0,
                control_phase: 0.0,
                center: 0.0,
            },
            lossless: false,
            trace_points: 101,
            stepping: Stepping::default(),
        }
    }

    pub fn with_area(&self, area: f64) -> Self {
        let mut c = self.clone();
        c.pair.signal_area = area;
        c.pair.control_area = area;
        c
    }

    /// Window of the pair when the earlier pulse window opens at `start`.
    fn placed(&self, start: f64) -> RamanPair {
        let lead = GAUSSIAN_WINDOW_FWHM * self.pair.fwhm + (-self.pair.relative_delay).max(0.0);
        RamanPair {
            center: start + lead,
            ..self.pair
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RamanResult {
    pub times: Vec<f64>,
    pub populations: Vec<[f64; 4]>,
    pub rho22_initial: f64,
    pub rho22_final: f64,
    pub efficiency: f64,
}

/// Applies the Raman pair to given per-node states, the pair's earlier
/// window opening at `start`, and reads ρ₂₂ when the later window closes.
pub fn raman_transfer<E: Executor>(
    exec: &E,
    system: &LevelSystem,
    nodes: &[DetuningNode],
    states: &[DensityMatrix],
    start: f64,
    cfg: &RamanConfig,
) -> Result<RamanResult> {
    if states.len() != nodes.len() {
        return Err(Error::invalid(
            "states",
            "one state per ensemble node is required",
        ));
    }
    let pair = cfg.placed(start);
    let timeline = PulseTimeline::new(raman_pair(&pair)?.to_vec())?;
    let (_, end) = timeline.span().expect("two pulses");
    let raman_system = if cfg.lossless {
        system.lossless()
    } else {
        *system
    };
    let times: Vec<f64> = trace_times(end - start, cfg.trace_points, &[])
        .into_iter()
        .map(|t| start + t)
        .collect();
    let runs = exec
        .map_indexed(nodes.len(), |k| {
            let opts = EvolveOptions {
                stepping: cfg.stepping,
                sample_times: times.clone(),
                emitter_detuning: nodes[k].detuning,
                ..Default::default()
            };
            evolve(&states[k], &raman_system, &timeline, (start, end), &opts).map(|t| t.states)
        })
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::Node {
                index,
                detuning: nodes[index].detuning,
                source: alloc::boxed::Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = average_states(nodes, &runs);
    let rho22_initial = nodes
        .iter()
        .zip(states)
        .map(|(n, s)| n.weight * s.population(1))
        .sum();
    let rho22_final = mean.last().expect("sampled").population(1);
    Ok(RamanResult {
        populations: mean.iter().map(|s| s.populations()).collect(),
        efficiency: transfer_efficiency(rho22_initial, rho22_final.clamp(0.0, 1.0))?,
        rho22_initial,
        rho22_final,
        times,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StirapResult {
    pub pump: PumpResult,
    pub raman: RamanResult,
}

/// Pump, wait for the readout delay, then apply the Raman pair.
pub fn run_stirap<E: Executor>(
    exec: &E,
    system: &LevelSystem,
    spec: &EnsembleSpec,
    pump: &PumpConfig,
    raman: &RamanConfig,
) -> Result<StirapResult> {
    let pumped = run_optical_pumping(exec, system, spec, pump)?;
    let raman = raman_transfer(
        exec,
        system,
        &pumped.nodes,
        &pumped.node_states,
        pump.readout_time(),
        raman,
    )?;
    Ok(StirapResult {
        pump: pumped,
        raman,
    })
}

/// Root of `f` on a sign-changing bracket by the Illinois false-position
/// method; stops once successive estimates agree to `tol`.
fn solve_bracketed<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    let mut flo = f(lo)?;
    let mut fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::invalid(
            "calibration",
            "target is not bracketed by the search interval",
        ));
    }
    let mut x = 0.5 * (lo + hi);
    // which end was kept on the previous step: -1 low, +1 high
    let mut kept = 0;
    for _ in 0..200 {
        let next = (lo * fhi - hi * flo) / (fhi - flo);
        let next = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        let converged = (next - x).abs() < tol || hi - lo < tol;
        x = next;
        if converged {
            return Ok(x);
        }
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
            if kept == 1 {
                fhi *= 0.5;
            }
            kept = 1;
        } else {
            hi = x;
            fhi = fx;
            if kept == -1 {
                flo *= 0.5;
            }
            kept = -1;
        }
    }
    Ok(x)
}

/// Pump Rabi frequency (rad/ns) for which ρ₂₂ at the readout time equals
/// `target`; bracketed root search in log Ω over `[lo, hi]` rad/ns. Run time
/// grows with `hi`, since the integrator resolves every Rabi cycle.
pub fn calibrate_pump_rabi<E: Executor>(
    exec: &E,
    system: &LevelSystem,
    spec: &EnsembleSpec,
    cfg: &PumpConfig,
    target: f64,
    (lo, hi): (f64, f64),
) -> Result<f64> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::invalid("rabi_bracket", "need 0 < lo < hi < inf"));
    }
    let residual = |log_rabi: f64| -> Result<f64> {
        let c = PumpConfig {
            rabi: log_rabi.exp(),
            trace_points: 0,
            ..cfg.clone()
        };
        Ok(run_optical_pumping(exec, system, spec, &c)?.rho22_at_readout - target)
    };
    solve_bracketed(residual, lo.ln(), hi.ln(), 1e-4).map(f64::exp)
}

/// Equal Raman area maximising η (golden-section search over `[lo, hi]`).
pub fn find_ideal_raman_area<E: Executor>(
    exec: &E,
    system: &LevelSystem,
    nodes: &[DetuningNode],
    states: &[DensityMatrix],
    start: f64,
    cfg: &RamanConfig,
    (mut lo, mut hi): (f64, f64),
) -> Result<(f64, f64)> {
    let eta = |area: f64| -> Result<f64> {
        let c = RamanConfig {
            trace_points: 0,
            ..cfg.with_area(area)
        };
        Ok(raman_transfer(exec, system, nodes, states, start, &c)?.efficiency)
    };
    let g = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let mut fa = eta(a)?;
    let mut fb = eta(b)?;
    while hi - lo > 1e-3 {
        if fa > fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = eta(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = eta(b)?;
        }
    }
    let best = 0.5 * (lo + hi);
    Ok((best, eta(best)?))
}

/// Equal Raman area below `max_area` for which η equals `target`.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_raman_area<E: Executor>(
    exec: &E,
    system: &LevelSystem,
    nodes: &[DetuningNode],
    states: &[DensityMatrix],
    start: f64,
    cfg: &RamanConfig,
    target: f64,
    max_area: f64,
) -> Result<f64> {
    let residual = |area: f64| -> Result<f64> {
        let c = RamanConfig {
            trace_points: 0,
            ..cfg.with_area(area)
        };
        Ok(raman_transfer(exec, system, nodes, states, start, &c)?.efficiency - target)
    };
    solve_bracketed(residual, 0.0, max_area, 1e-4)
}
