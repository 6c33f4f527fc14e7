//! Time integration of the master equation for one emitter.
//!
//! Dormand–Prince 5(4) with either adaptive or fixed steps. The interval is cut
//! at every drive-window edge, at the switching times of excitation-induced
//! dephasing and at every requested sample time, so the right-hand side is
//! smooth inside each piece and samples are hit exactly rather than
//! interpolated. Inside a drive window the step never exceeds a quarter of
//! the drive's timescale, which keeps short pulses from being stepped over.
//!
//! After every accepted step the state is checked for trace, Hermiticity and
//! positivity; a violation aborts the run with diagnostics.

use alloc::vec::Vec;

// inherent std float methods shadow these when std is linked
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hamiltonian::DrivenHamiltonian;
use crate::levels::LevelSystem;
use crate::linalg::CMatrix4;
use crate::lindblad::{rhs_with, Dissipator};
use crate::pulses::PulseTimeline;
use crate::state::{validate_state, DensityMatrix, StateTolerance};

/// Extra pure dephasing of the excited levels while the drives are on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationDephasing {
    /// Added optical linewidth (GHz).
    pub linewidth: f64,
    pub start: f64,
    pub stop: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepping {
    Adaptive {
        rtol: f64,
        atol: f64,
    },
    /// Constant step (ns), shortened where needed to land on cut points.
    Fixed {
        step: f64,
    },
}

impl Stepping {
    pub const DEFAULT_RTOL: f64 = 1e-9;
    pub const DEFAULT_ATOL: f64 = 1e-12;

    pub fn adaptive(rtol: f64) -> Self {
        Stepping::Adaptive {
            rtol,
            atol: Self::DEFAULT_ATOL.min(rtol),
        }
    }
}

impl Default for Stepping {
    fn default() -> Self {
        Stepping::adaptive(Self::DEFAULT_RTOL)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    pub stepping: Stepping,
    /// Times (ns, ascending, inside the span) at which the state is
    /// recorded. Empty records only the final state.
    pub sample_times: Vec<f64>,
    /// Inhomogeneous detuning of this emitter (GHz).
    pub emitter_detuning: f64,
    pub excitation_dephasing: Option<ExcitationDephasing>,
    /// Upper bound on attempted steps (accepted plus rejected).
    pub max_steps: usize,
    pub state_tolerance: StateTolerance,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            stepping: Stepping::default(),
            sample_times: Vec::new(),
            emitter_detuning: 0.0,
            excitation_dephasing: None,
            max_steps: 2_000_000,
            state_tolerance: StateTolerance::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &DensityMatrix {
        self.states
            .last()
            .expect("a trajectory holds at least one state")
    }
}

// Dormand–Prince coefficients
const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn combine(y: &CMatrix4, h: f64, coeffs: &[f64], ks: &[CMatrix4]) -> CMatrix4 {
    let mut out = *y;
    for (c, k) in coeffs.iter().zip(ks) {
        if *c != 0.0 {
            out = out.add_scaled(h * c, k);
        }
    }
    out
}

/// Smooth right-hand side on one piece of the time axis.
struct Piece<'a> {
    ham: &'a DrivenHamiltonian<'a>,
    active: Vec<usize>,
    dissipator: Dissipator,
}

impl Piece<'_> {
    fn rhs(&self, t: f64, rho: &CMatrix4) -> CMatrix4 {
        rhs_with(&self.ham.at_active(t, &self.active), &self.dissipator, rho)
    }

    /// One Dormand–Prince step from `(t, y)` with `k1 = f(t, y)`. Returns
    /// the fifth-order solution, its derivative and the embedded error.
    fn step(&self, t: f64, y: &CMatrix4, k1: &CMatrix4, h: f64) -> (CMatrix4, CMatrix4, CMatrix4) {
        let mut k = [*k1; 7];
        k[1] = self.rhs(t + C[0] * h, &combine(y, h, &A2, &k[..1]));
        k[2] = self.rhs(t + C[1] * h, &combine(y, h, &A3, &k[..2]));
        k[3] = self.rhs(t + C[2] * h, &combine(y, h, &A4, &k[..3]));
        k[4] = self.rhs(t + C[3] * h, &combine(y, h, &A5, &k[..4]));
        k[5] = self.rhs(t + C[4] * h, &combine(y, h, &A6, &k[..5]));
        let y_new = combine(y, h, &B, &k[..6]);
        k[6] = self.rhs(t + h, &y_new);
        let err = combine(&CMatrix4::zeros(), h, &E, &k);
        (y_new, k[6], err)
    }
}

fn error_norm(err: &CMatrix4, y: &CMatrix4, y_new: &CMatrix4, rtol: f64, atol: f64) -> f64 {
    let mut worst = 0.0f64;
    for ((e, a), b) in err.iter().zip(y.iter()).zip(y_new.iter()) {
        let scale = atol + rtol * a.norm().max(b.norm());
        worst = worst.max(e.norm() / scale);
    }
    worst
}

fn check_invariants(rho: &CMatrix4, t: f64, tol: &StateTolerance) -> Result<()> {
    let trace_ok = (rho.trace() - crate::C64::new(1.0, 0.0)).norm() <= tol.trace;
    let herm_ok = rho.hermiticity_error() <= tol.hermiticity;
    if trace_ok && herm_ok && rho.hermitian_part_exceeds(tol.positivity) {
        return Ok(());
    }
    let diagnostics = validate_state(&DensityMatrix::from_matrix(*rho));
    if diagnostics.within(tol) {
        // the Cholesky test is strict at the boundary; defer to the spectrum
        return Ok(());
    }
    Err(Error::InvariantViolation {
        time: t,
        diagnostics,
    })
}

/// Integrates `rho0` from `t_span.0` to `t_span.1` under `timeline`.
pub fn evolve(
    rho0: &DensityMatrix,
    system: &LevelSystem,
    timeline: &PulseTimeline,
    t_span: (f64, f64),
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
        return Err(Error::invalid("t_span", "must be finite with end >= start"));
    }
    if !opts.emitter_detuning.is_finite() {
        return Err(Error::invalid("emitter_detuning", "must be finite"));
    }
    if opts.sample_times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::invalid("sample_times", "must be ascending"));
    }
    if let (Some(&first), Some(&last)) = (opts.sample_times.first(), opts.sample_times.last()) {
        if first < t0 || last > t1 {
            return Err(Error::invalid(
                "sample_times",
                "must lie inside the time span",
            ));
        }
    }
    match opts.stepping {
        Stepping::Adaptive { rtol, atol } => {
            if !(rtol > 0.0 && atol > 0.0) {
                return Err(Error::invalid("tolerance", "must be positive"));
            }
        }
        Stepping::Fixed { step } => {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::invalid("step", "must be positive"));
            }
        }
    }
    let eid = opts.excitation_dephasing;
    if let Some(e) = eid {
        if !(e.linewidth >= 0.0 && e.linewidth.is_finite()) {
            return Err(Error::invalid(
                "excitation_dephasing",
                "linewidth must be nonnegative",
            ));
        }
    }
    check_invariants(rho0.matrix(), t0, &opts.state_tolerance)?;

    let mut cuts = timeline.breakpoints();
    if let Some(e) = eid {
        cuts.extend([e.start, e.stop]);
    }
    cuts.extend(opts.sample_times.iter().copied());
    cuts.push(t1);
    cuts.retain(|&c| c > t0 && c <= t1);
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();

    let drives = timeline.drives();
    let ham = DrivenHamiltonian::new(drives, opts.emitter_detuning);
    let base = Dissipator::new(*system.rates());
    let with_eid = eid.map(|e| base.with_excited_dephasing(e.linewidth));

    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        accepted_steps: 0,
        rejected_steps: 0,
    };
    let mut samples = opts.sample_times.iter().copied().peekable();
    let mut record = |traj: &mut Trajectory, t: f64, rho: &CMatrix4| {
        while samples.peek().is_some_and(|&s| s <= t) {
            samples.next();
            traj.times.push(t);
            traj.states.push(DensityMatrix::from_matrix(*rho));
        }
    };

    let mut t = t0;
    let mut y = *rho0.matrix();
    record(&mut traj, t, &y);
    let mut h_next = f64::INFINITY;
    for &end in &cuts {
        let mid = 0.5 * (t + end);
        let active: Vec<usize> = (0..drives.len())
            .filter(|&k| {
                let (lo, hi) = drives[k].window();
                lo <= mid && mid <= hi
            })
            .collect();
        let dissipator = match (eid, with_eid) {
            (Some(e), Some(d)) if e.start <= mid && mid <= e.stop => d,
            _ => base,
        };
        let cap = active
            .iter()
            .map(|&k| 0.25 * drives[k].envelope.timescale())
            .fold(f64::INFINITY, f64::min);
        let piece = Piece {
            ham: &ham,
            active,
            dissipator,
        };
        let mut k1 = piece.rhs(t, &y);
        match opts.stepping {
            Stepping::Fixed { step } => {
                let n = ((end - t) / step.min(cap) - 1e-9).ceil().max(1.0) as usize;
                let h = (end - t) / n as f64;
                for i in 0..n {
                    if traj.accepted_steps >= opts.max_steps {
                        return Err(Error::StepBudget { time: t });
                    }
                    let (y_new, k_new, _) = piece.step(t, &y, &k1, h);
                    t = if i + 1 == n { end } else { t + h };
                    y = y_new;
                    k1 = k_new;
                    traj.accepted_steps += 1;
                    check_invariants(&y, t, &opts.state_tolerance)?;
                }
            }
            Stepping::Adaptive { rtol, atol } => {
                if !h_next.is_finite() {
                    h_next = (end - t).min(cap) * 1e-2;
                }
                while t < end {
                    if traj.accepted_steps + traj.rejected_steps >= opts.max_steps {
                        return Err(Error::StepBudget { time: t });
                    }
                    let mut h = h_next.min(cap);
                    let remaining = end - t;
                    let last = h >= remaining * (1.0 - 1e-12);
                    if last {
                        h = remaining;
                    }
                    let (y_new, k_new, err) = piece.step(t, &y, &k1, h);
                    let norm = error_norm(&err, &y, &y_new, rtol, atol);
                    let factor = if norm == 0.0 {
                        5.0
                    } else {
                        (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    if norm <= 1.0 {
                        t = if last { end } else { t + h };
                        y = y_new;
                        k1 = k_new;
                        traj.accepted_steps += 1;
                        check_invariants(&y, t, &opts.state_tolerance)?;
                        // a step shortened to hit a cut says nothing about the next one
                        h_next = if last {
                            h_next.max(h * factor)
                        } else {
                            h * factor
                        };
                    } else {
                        traj.rejected_steps += 1;
                        h_next = h * factor.min(1.0);
                        if h_next <= 1e-13 * t.abs().max(1.0) {
                            return Err(Error::StepUnderflow {
                                time: t,
                                step: h_next,
                            });
                        }
                    }
                }
            }
        }
        record(&mut traj, t, &y);
    }
    if opts.sample_times.is_empty() {
        traj.times.push(t);
        traj.states.push(DensityMatrix::from_matrix(y));
    }
    Ok(traj)
}
