//! Four-wave mixing in a thin medium with an undepleted control field.
//!
//! With the excited states adiabatically eliminated, the signal `S`, the
//! conjugate Stokes envelope `K*` and the ground-state spin wave `B` obey
//!
//! ```text
//! ∂z S  =  i c_s f(t) B
//! ∂z K* = −i c_k f(t) B
//! ∂t B  =  i f(t) (c_s S + c_k K*) − (γ_B + i δ₂′(t)) B
//! ```
//!
//! on `z ∈ [0, 1]`, where `f(t)` is the control envelope normalised to unit
//! peak, `c_s, c_k` already include the population-inversion factor and
//! `δ₂′(t) = 2π(δ₂ + (s_s − s_k) f(t)²)` adds the differential light shift.
//!
//! The Stokes field is carried as its conjugate `K*` throughout, the form in
//! which it enters the equations; with that convention the map from seeds to
//! outputs is complex-linear. Intensities are the same either way.
//!
//! The solver marches slab by slab in z with a predictor–corrector (midpoint)
//! step; inside each slab the spin wave is integrated along t with
//! Crank–Nicolson. Both are second order.

use alloc::vec::Vec;
use core::f64::consts::TAU;

// inherent std float methods shadow these when std is linked
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::levels::{boltzmann_ratio, LevelSystem};
use crate::linalg::{C64, I, ZERO};

/// Which excited level the Stokes arm is detuned from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StokesAnchor {
    /// `|4⟩`: Stokes detuning Δ + δg.
    Upper,
    /// `|3⟩`: Stokes detuning Δ + δg + δe.
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwmMedium {
    /// Effective signal coupling (ns^-1/2 per unit length), before the
    /// inversion factor.
    pub coupling_signal: f64,
    pub coupling_stokes: f64,
    /// Light shift of the signal and Stokes arms at peak control (GHz).
    pub stark_shifts: [f64; 2],
    /// Spin-wave decay rate γ_B (1/ns).
    pub spin_wave_decay: f64,
    /// GHz.
    pub two_photon_detuning: f64,
    /// `ρ₁₁ − ρ₂₂` when the fields arrive; scales both couplings.
    pub population_inversion_factor: f64,
}

/// Spin-wave decay for a ground-state dephasing time of 100 ps.
pub const DEFAULT_SPIN_WAVE_DECAY: f64 = 10.0;

impl FwmMedium {
    pub fn validate(&self) -> Result<()> {
        if !(self.coupling_signal >= 0.0 && self.coupling_stokes >= 0.0)
            || !self.coupling_signal.is_finite()
            || !self.coupling_stokes.is_finite()
        {
            return Err(Error::invalid(
                "coupling",
                "couplings must be finite and nonnegative",
            ));
        }
        if !(self.spin_wave_decay >= 0.0 && self.spin_wave_decay.is_finite()) {
            return Err(Error::invalid(
                "spin_wave_decay",
                "must be finite and nonnegative",
            ));
        }
        if !(self.population_inversion_factor.abs() <= 1.0) {
            return Err(Error::invalid(
                "population_inversion_factor",
                "must lie in [-1, 1]",
            ));
        }
        if !self.two_photon_detuning.is_finite() || self.stark_shifts.iter().any(|s| !s.is_finite())
        {
            return Err(Error::invalid(
                "two_photon_detuning",
                "detunings must be finite",
            ));
        }
        Ok(())
    }

    fn effective_couplings(&self) -> (f64, f64) {
        let w = self.population_inversion_factor;
        (w * self.coupling_signal, w * self.coupling_stokes)
    }
}

/// Couplings and light shifts for a control of peak Rabi frequency
/// `control_rabi` (rad/ns) detuned by `detuning` (GHz) from the signal's
/// excited level, with `optical_depth` setting the medium density.
///
/// `c = Ω·sqrt(d·γ_rad)/(2π Δ_arm)` and `s = Ω²/(4 (2π)² Δ_arm)` per arm, with
/// γ_rad the radiative rate of `|4⟩`. The inversion factor starts at 1.
pub fn adiabatic_couplings(
    control_rabi: f64,
    detuning: f64,
    system: &LevelSystem,
    optical_depth: f64,
    anchor: StokesAnchor,
) -> Result<FwmMedium> {
    if detuning == 0.0 || !detuning.is_finite() {
        return Err(Error::invalid(
            "detuning",
            "must be finite and nonzero for adiabatic elimination",
        ));
    }
    if !(control_rabi >= 0.0 && control_rabi.is_finite()) {
        return Err(Error::invalid(
            "control_rabi",
            "must be finite and nonnegative",
        ));
    }
    if !(optical_depth >= 0.0 && optical_depth.is_finite()) {
        return Err(Error::invalid(
            "optical_depth",
            "must be finite and nonnegative",
        ));
    }
    let stokes_detuning = match anchor {
        StokesAnchor::Upper => detuning + system.ground_splitting(),
        StokesAnchor::Lower => detuning + system.ground_splitting() + system.excited_splitting(),
    };
    let amp = control_rabi * (optical_depth * system.radiative_rate(3)).sqrt() / TAU;
    let stark = control_rabi * control_rabi / (4.0 * TAU * TAU);
    Ok(FwmMedium {
        coupling_signal: (amp / detuning).abs(),
        coupling_stokes: (amp / stokes_detuning).abs(),
        stark_shifts: [stark / detuning, stark / stokes_detuning],
        spin_wave_decay: DEFAULT_SPIN_WAVE_DECAY,
        two_photon_detuning: 0.0,
        population_inversion_factor: 1.0,
    })
}

/// `|Δ|` in units of the optical linewidth of `|4⟩`; adiabatic elimination
/// wants this large.
pub fn adiabaticity_ratio(detuning: f64, system: &LevelSystem) -> f64 {
    detuning.abs() / (system.radiative_rate(3) / TAU)
}

/// Boundary data of one propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct FwmInput {
    /// Uniformly spaced sample times (ns).
    pub times: Vec<f64>,
    /// Control envelope `f(t)`, unit peak.
    pub control: Vec<f64>,
    /// `S(0, t)`.
    pub signal: Vec<C64>,
    /// `K*(0, t)`.
    pub stokes_conj: Vec<C64>,
    /// `B(z, 0)` sampled uniformly on `[0, 1]` (one value means uniform);
    /// empty means no initial spin wave.
    pub spin_wave: Vec<C64>,
}

impl FwmInput {
    fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if n < 3 {
            return Err(Error::invalid("times", "need at least 3 samples"));
        }
        if self.control.len() != n || self.signal.len() != n || self.stokes_conj.len() != n {
            return Err(Error::invalid(
                "seeds",
                "seeds and control must share the time grid",
            ));
        }
        let dt = (self.times[n - 1] - self.times[0]) / (n - 1) as f64;
        if !(dt > 0.0)
            || self
                .times
                .windows(2)
                .any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt)
        {
            return Err(Error::invalid(
                "times",
                "must be uniformly spaced and ascending",
            ));
        }
        let finite = |z: &C64| z.re.is_finite() && z.im.is_finite();
        if !self
            .signal
            .iter()
            .chain(&self.stokes_conj)
            .chain(&self.spin_wave)
            .all(finite)
            || self.control.iter().any(|c| !c.is_finite())
        {
            return Err(Error::invalid("seeds", "must be finite"));
        }
        Ok(())
    }

    fn spin_wave_at(&self, z: f64) -> C64 {
        match self.spin_wave.len() {
            0 => ZERO,
            1 => self.spin_wave[0],
            n => {
                let x = z * (n - 1) as f64;
                let k = (x.floor() as usize).min(n - 2);
                let f = x - k as f64;
                self.spin_wave[k] * (1.0 - f) + self.spin_wave[k + 1] * f
            }
        }
    }

    /// Same grid and control with the seeds replaced.
    pub fn with_seeds(&self, signal: Vec<C64>, stokes_conj: Vec<C64>, spin_wave: Vec<C64>) -> Self {
        FwmInput {
            times: self.times.clone(),
            control: self.control.clone(),
            signal,
            stokes_conj,
            spin_wave,
        }
    }
}

/// Gaussian time grid and envelope: `n` samples over `±4·fwhm`, intensity
/// FWHM `fwhm` (ns), unit peak.
pub fn gaussian_profile(fwhm: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(fwhm > 0.0 && fwhm.is_finite()) || n < 3 {
        return Err(Error::invalid(
            "fwhm",
            "need a positive width and at least 3 samples",
        ));
    }
    let half = crate::pulses::GAUSSIAN_WINDOW_FWHM * fwhm;
    let times: Vec<f64> = (0..n)
        .map(|k| -half + 2.0 * half * k as f64 / (n - 1) as f64)
        .collect();
    let env = times
        .iter()
        .map(|t| (-4.0 * core::f64::consts::LN_2 * (t / fwhm).powi(2)).exp())
        .collect();
    Ok((times, env))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwmGridSpec {
    pub slabs: usize,
    /// Largest slab count the automatic refinement may reach; equal to
    /// `slabs` to disable refinement.
    pub max_slabs: usize,
    /// Relative change in output energies below which a slab count is
    /// accepted when compared against twice as many slabs.
    pub refine_tol: f64,
}

impl Default for FwmGridSpec {
    fn default() -> Self {
        FwmGridSpec {
            slabs: 32,
            max_slabs: 4096,
            refine_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FwmGrid {
    /// Slab boundaries, `slabs + 1` points on `[0, 1]`.
    pub z: Vec<f64>,
    pub times: Vec<f64>,
    /// `S(z, t)`, indexed `[z][t]`.
    pub signal: Vec<Vec<C64>>,
    /// `K*(z, t)`, indexed `[z][t]`.
    pub stokes_conj: Vec<Vec<C64>>,
    /// Slab midpoints where the spin wave is resolved.
    pub z_mid: Vec<f64>,
    /// `B(z_mid, t)`, indexed `[slab][t]`.
    pub spin_wave: Vec<Vec<C64>>,
}

impl FwmGrid {
    pub fn signal_out(&self) -> &[C64] {
        self.signal.last().expect("grid has z = 1")
    }

    pub fn stokes_conj_out(&self) -> &[C64] {
        self.stokes_conj.last().expect("grid has z = 1")
    }

    pub fn slabs(&self) -> usize {
        self.z.len() - 1
    }
}

struct Solver<'a> {
    input: &'a FwmInput,
    cs: f64,
    ck: f64,
    /// γ_B + iδ₂′(t) on the time grid.
    damping: Vec<C64>,
    dt: f64,
}

impl Solver<'_> {
    fn new<'a>(medium: &FwmMedium, input: &'a FwmInput) -> Solver<'a> {
        let (cs, ck) = medium.effective_couplings();
        let shift = medium.stark_shifts[0] - medium.stark_shifts[1];
        let damping = input
            .control
            .iter()
            .map(|f| {
                C64::new(
                    medium.spin_wave_decay,
                    TAU * (medium.two_photon_detuning + shift * f * f),
                )
            })
            .collect();
        let n = input.times.len();
        Solver {
            input,
            cs,
            ck,
            damping,
            dt: (input.times[n - 1] - input.times[0]) / (n - 1) as f64,
        }
    }

    fn spin_wave(&self, b0: C64, u: &[C64], v: &[C64]) -> Vec<C64> {
        let f = &self.input.control;
        let h = 0.5 * self.dt;
        let src = |j: usize| I * f[j] * (u[j] * self.cs + v[j] * self.ck);
        let mut b = Vec::with_capacity(u.len());
        b.push(b0);
        let mut s_prev = src(0);
        for j in 0..u.len() - 1 {
            let s_next = src(j + 1);
            let next = (b[j] * (C64::new(1.0, 0.0) - self.damping[j] * h) + (s_prev + s_next) * h)
                / (C64::new(1.0, 0.0) + self.damping[j + 1] * h);
            b.push(next);
            s_prev = s_next;
        }
        b
    }

    fn advance(&self, dz: f64, u: &[C64], v: &[C64], b: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let f = &self.input.control;
        let un = (0..u.len())
            .map(|j| u[j] + I * (dz * self.cs * f[j]) * b[j])
            .collect();
        let vn = (0..v.len())
            .map(|j| v[j] - I * (dz * self.ck * f[j]) * b[j])
            .collect();
        (un, vn)
    }

    fn run(&self, slabs: usize) -> FwmGrid {
        let dz = 1.0 / slabs as f64;
        let mut u = self.input.signal.clone();
        let mut v = self.input.stokes_conj.clone();
        let mut grid = FwmGrid {
            z: (0..=slabs).map(|k| k as f64 * dz).collect(),
            times: self.input.times.clone(),
            signal: Vec::with_capacity(slabs + 1),
            stokes_conj: Vec::with_capacity(slabs + 1),
            z_mid: (0..slabs).map(|k| (k as f64 + 0.5) * dz).collect(),
            spin_wave: Vec::with_capacity(slabs),
        };
        grid.signal.push(u.clone());
        grid.stokes_conj.push(v.clone());
        for k in 0..slabs {
            let b0 = self.input.spin_wave_at(grid.z_mid[k]);
            // predictor from the entry fields, corrector from the midpoint
            let b1 = self.spin_wave(b0, &u, &v);
            let (u1, v1) = self.advance(dz, &u, &v, &b1);
            let um: Vec<C64> = u.iter().zip(&u1).map(|(a, b)| (a + b) * 0.5).collect();
            let vm: Vec<C64> = v.iter().zip(&v1).map(|(a, b)| (a + b) * 0.5).collect();
            let b2 = self.spin_wave(b0, &um, &vm);
            let (un, vn) = self.advance(dz, &u, &v, &b2);
            u = un;
            v = vn;
            grid.signal.push(u.clone());
            grid.stokes_conj.push(v.clone());
            grid.spin_wave.push(b2);
        }
        grid
    }
}

fn energy(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// Propagates the seeds through the medium, doubling the slab count until
/// the output energies change by less than `grid.refine_tol`.
pub fn propagate_fwm(medium: &FwmMedium, input: &FwmInput, grid: &FwmGridSpec) -> Result<FwmGrid> {
    medium.validate()?;
    input.validate()?;
    if grid.slabs == 0 || grid.max_slabs < grid.slabs {
        return Err(Error::invalid("slabs", "need 1 <= slabs <= max_slabs"));
    }
    let solver = Solver::new(medium, input);
    let mut slabs = grid.slabs;
    let mut coarse = solver.run(slabs);
    if grid.max_slabs == grid.slabs {
        // refinement disabled
        return Ok(coarse);
    }
    while 2 * slabs <= grid.max_slabs {
        let fine = solver.run(2 * slabs);
        let change = |a: &[C64], b: &[C64]| {
            let (ea, eb) = (energy(a), energy(b));
            if ea.max(eb) == 0.0 {
                0.0
            } else {
                (ea - eb).abs() / ea.max(eb)
            }
        };
        let worst = change(coarse.signal_out(), fine.signal_out())
            .max(change(coarse.stokes_conj_out(), fine.stokes_conj_out()));
        if !worst.is_finite() {
            break;
        }
        if worst <= grid.refine_tol {
            return Ok(coarse);
        }
        slabs *= 2;
        coarse = fine;
    }
    Err(Error::GridUnstable {
        reason: alloc::format!(
            "output energies still changing beyond {} at {} slabs",
            grid.refine_tol,
            slabs
        ),
    })
}

/// `Σ|S_out|² / Σ|S_in|²` over a shared uniform time grid.
pub fn signal_gain(s_in: &[C64], s_out: &[C64]) -> Result<f64> {
    if s_in.len() != s_out.len() {
        return Err(Error::invalid("signal", "input and output grids differ"));
    }
    let e_in = energy(s_in);
    if !(e_in > 0.0) {
        return Err(Error::invalid("signal", "input energy must be nonzero"));
    }
    Ok(energy(s_out) / e_in)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseResponse {
    pub phases: Vec<f64>,
    pub signal_gain: Vec<f64>,
    /// `None` when there is no Stokes seed to normalise against.
    pub stokes_gain: Option<Vec<f64>>,
    pub slabs: usize,
}

impl PhaseResponse {
    pub fn min_index(&self) -> usize {
        argmax(&self.signal_gain, |a, b| b.total_cmp(a))
    }

    pub fn max_index(&self) -> usize {
        argmax(&self.signal_gain, |a, b| a.total_cmp(b))
    }
}

fn argmax(v: &[f64], cmp: impl Fn(&f64, &f64) -> core::cmp::Ordering) -> usize {
    let mut best = 0;
    for k in 1..v.len() {
        if cmp(&v[k], &v[best]).is_gt() {
            best = k;
        }
    }
    best
}

/// Signal (and Stokes) gain with the signal seed multiplied by `e^{iφ}` for
/// each φ. By linearity two propagations suffice: signal alone, and Stokes
/// plus initial spin wave alone.
pub fn phase_response<E: Executor>(
    exec: &E,
    medium: &FwmMedium,
    input: &FwmInput,
    phases: &[f64],
    grid: &FwmGridSpec,
) -> Result<PhaseResponse> {
    if phases.is_empty() || phases.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("phases", "need at least one finite phase"));
    }
    let n = input.times.len();
    let signal_only = input.with_seeds(input.signal.clone(), alloc::vec![ZERO; n], Vec::new());
    let rest = input.with_seeds(
        alloc::vec![ZERO; n],
        input.stokes_conj.clone(),
        input.spin_wave.clone(),
    );
    let mut runs = exec
        .map_indexed(2, |k| {
            propagate_fwm(medium, if k == 0 { &signal_only } else { &rest }, grid)
        })
        .into_iter();
    let a = runs.next().expect("two runs")?;
    let b = runs.next().expect("two runs")?;
    // both runs refine independently; report the finer one
    let slabs = a.slabs().max(b.slabs());
    let e_signal = energy(&input.signal);
    if !(e_signal > 0.0) {
        return Err(Error::invalid("signal", "input energy must be nonzero"));
    }
    let e_stokes = energy(&input.stokes_conj);
    let mut signal_gain = Vec::with_capacity(phases.len());
    let mut stokes_gain = Vec::with_capacity(phases.len());
    for &phi in phases {
        let rot = C64::from_polar(1.0, phi);
        let s: f64 = a
            .signal_out()
            .iter()
            .zip(b.signal_out())
            .map(|(x, y)| (x * rot + y).norm_sqr())
            .sum();
        let k: f64 = a
            .stokes_conj_out()
            .iter()
            .zip(b.stokes_conj_out())
            .map(|(x, y)| (x * rot + y).norm_sqr())
            .sum();
        signal_gain.push(s / e_signal);
        stokes_gain.push(k / e_stokes);
    }
    Ok(PhaseResponse {
        phases: phases.to_vec(),
        signal_gain,
        stokes_gain: (e_stokes > 0.0).then_some(stokes_gain),
        slabs,
    })
}

/// Reference operating point. The optical depth and Stokes seed are
/// calibrated: with the depth fixed, the seed amplitude is bisected so the
/// largest signal gain over a 64-point phase grid is 1.8 at the pumped
/// inversion.
pub mod presets {
    /// rad/ns.
    pub const CONTROL_RABI: f64 = 100.0;
    /// GHz, blue of the signal's excited level.
    pub const DETUNING: f64 = 70.0;
    /// ns, intensity FWHM of control, signal and Stokes envelopes.
    pub const PULSE_FWHM: f64 = 0.012;
    pub const TIME_SAMPLES: usize = 401;
    pub const PHASE_POINTS: usize = 64;
    pub const OPTICAL_DEPTH: f64 = 1.37e5;
    /// Stokes seed amplitude relative to the signal seed.
    pub const STOKES_SEED: f64 = 0.5455;
    /// `ρ₁₁ − ρ₂₂` right after pumping to ρ₂₂ = 0.19.
    pub const PUMPED_INVERSION: f64 = 0.62;
}

#[derive(Debug, Clone, PartialEq)]
pub struct FwmConfig {
    pub control_rabi: f64,
    pub detuning: f64,
    pub optical_depth: f64,
    pub anchor: StokesAnchor,
    pub pulse_fwhm: f64,
    pub time_samples: usize,
    pub spin_wave_decay: f64,
    pub two_photon_detuning: f64,
    pub inversion: f64,
    /// Stokes seed amplitude relative to the signal seed.
    pub stokes_seed: f64,
    /// rad, on the Stokes seed.
    pub stokes_phase: f64,
    /// Uniform initial spin wave.
    pub initial_spin_wave: C64,
    pub grid: FwmGridSpec,
}

impl Default for FwmConfig {
    fn default() -> Self {
        FwmConfig {
            control_rabi: presets::CONTROL_RABI,
            detuning: presets::DETUNING,
            optical_depth: presets::OPTICAL_DEPTH,
            anchor: StokesAnchor::Upper,
            pulse_fwhm: presets::PULSE_FWHM,
            time_samples: presets::TIME_SAMPLES,
            spin_wave_decay: DEFAULT_SPIN_WAVE_DECAY,
            two_photon_detuning: 0.0,
            inversion: presets::PUMPED_INVERSION,
            stokes_seed: presets::STOKES_SEED,
            stokes_phase: 0.0,
            initial_spin_wave: ZERO,
            grid: FwmGridSpec::default(),
        }
    }
}

impl FwmConfig {
    /// Medium and seeds; signal and Stokes seeds share the control's shape.
    pub fn build(&self, system: &LevelSystem) -> Result<(FwmMedium, FwmInput)> {
        let mut medium = adiabatic_couplings(
            self.control_rabi,
            self.detuning,
            system,
            self.optical_depth,
            self.anchor,
        )?;
        medium.spin_wave_decay = self.spin_wave_decay;
        medium.two_photon_detuning = self.two_photon_detuning;
        medium.population_inversion_factor = self.inversion;
        medium.validate()?;
        if !(self.stokes_seed >= 0.0 && self.stokes_seed.is_finite())
            || !self.stokes_phase.is_finite()
        {
            return Err(Error::invalid(
                "stokes_seed",
                "must be finite and nonnegative",
            ));
        }
        let (times, control) = gaussian_profile(self.pulse_fwhm, self.time_samples)?;
        let signal: Vec<C64> = control.iter().map(|&f| C64::new(f, 0.0)).collect();
        let k = C64::from_polar(self.stokes_seed, self.stokes_phase);
        let stokes_conj = signal.iter().map(|s| s * k).collect();
        let spin_wave = if self.initial_spin_wave == ZERO {
            Vec::new()
        } else {
            alloc::vec![self.initial_spin_wave]
        };
        Ok((
            medium,
            FwmInput {
                times,
                control,
                signal,
                stokes_conj,
                spin_wave,
            },
        ))
    }
}

/// Evenly spaced phases on `[0, 2π)`.
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}

/// Inversion `ρ₁₁ − ρ₂₂` a time `delay` after pumping to `rho22_pumped`,
/// relaxing toward the thermal value with time constant `t1`.
pub fn rethermalized_inversion(
    rho22_pumped: f64,
    delay: f64,
    t1: f64,
    temperature: f64,
    ground_splitting: f64,
) -> Result<f64> {
    if !(delay >= 0.0) {
        return Err(Error::invalid("delay", "must be nonnegative"));
    }
    if !(0.0..=1.0).contains(&rho22_pumped) {
        return Err(Error::invalid("rho22_pumped", "must lie in [0, 1]"));
    }
    if !(t1 > 0.0) {
        return Err(Error::invalid("t1", "must be positive"));
    }
    if !(temperature > 0.0) {
        return Err(Error::invalid("temperature", "must be positive"));
    }
    let b = boltzmann_ratio(temperature, ground_splitting);
    let thermal = (1.0 - b) / (1.0 + b);
    let pumped = 1.0 - 2.0 * rho22_pumped;
    Ok(thermal + (pumped - thermal) * (-delay / t1).exp())
}

/// Stokes seed amplitude (relative to the signal seed) for which the largest
/// signal gain over `phases` equals `target`, by bisection on `[lo, hi]`.
/// The Stokes seed takes the signal seed's shape.
pub fn calibrate_stokes_seed<E: Executor>(
    exec: &E,
    medium: &FwmMedium,
    input: &FwmInput,
    phases: &[f64],
    grid: &FwmGridSpec,
    target: f64,
    (mut lo, mut hi): (f64, f64),
) -> Result<f64> {
    let max_gain = |a: f64| -> Result<f64> {
        let seeded = input.with_seeds(
            input.signal.clone(),
            input.signal.iter().map(|s| s * a).collect(),
            input.spin_wave.clone(),
        );
        let r = phase_response(exec, medium, &seeded, phases, grid)?;
        Ok(r.signal_gain[r.max_index()] - target)
    };
    let f_lo = max_gain(lo)?;
    let f_hi = max_gain(hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::invalid(
            "calibration",
            "target gain is not bracketed",
        ));
    }
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if max_gain(mid)?.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
