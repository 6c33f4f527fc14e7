//! Scenario files.
//!
//! A scenario is a TOML document naming one experiment and the sections it
//! reads. Every key carries its unit in the name (`pulse_fwhm_ns`,
//! `detuning_ghz`, ...). Unknown keys, misspelled sections and sections the
//! experiment does not use are errors; omitted keys take the documented
//! defaults, and the fully resolved document is echoed into every summary.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use dlambda_core::ensemble::{EnsembleSpec, Sampling};
use dlambda_core::experiments::{
    presets, total_area, CoherenceConfig, PumpConfig, RamanConfig, Sequence,
};
use dlambda_core::fit::DecayModel;
use dlambda_core::fwm::{self, FwmConfig, FwmGridSpec, StokesAnchor};
use dlambda_core::integrate::Stepping;
use dlambda_core::levels::RateConfig;
use dlambda_core::pulses::RamanPair;
use dlambda_core::state::thermal_ground_state;
use dlambda_core::{LevelSystem, Transition};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Ramsey,
    Echo,
    Pump,
    Stirap,
    Fwm,
    SpectrumFit,
    Sweep,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Ramsey => "ramsey",
            Experiment::Echo => "echo",
            Experiment::Pump => "pump",
            Experiment::Stirap => "stirap",
            Experiment::Fwm => "fwm",
            Experiment::SpectrumFit => "spectrum-fit",
            Experiment::Sweep => "sweep",
        }
    }

    /// Sections read by this experiment besides `system`, `ensemble` and
    /// `integrator`.
    fn sections(self) -> &'static [&'static str] {
        match self {
            Experiment::Ramsey | Experiment::Echo => &["coherence"],
            Experiment::Pump => &["pump"],
            Experiment::Stirap => &["pump", "raman"],
            Experiment::Fwm => &["fwm"],
            Experiment::SpectrumFit => &["spectrum"],
            Experiment::Sweep => &["sweep"],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionName {
    A,
    B,
    C,
    D,
}

impl From<TransitionName> for Transition {
    fn from(t: TransitionName) -> Self {
        match t {
            TransitionName::A => Transition::A,
            TransitionName::B => Transition::B,
            TransitionName::C => Transition::C,
            TransitionName::D => Transition::D,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    GaussianDecay,
    ExponentialDecay,
    GaussianTimesExponential,
}

impl From<FitModel> for DecayModel {
    fn from(m: FitModel) -> Self {
        match m {
            FitModel::GaussianDecay => DecayModel::Gaussian,
            FitModel::ExponentialDecay => DecayModel::Exponential,
            FitModel::GaussianTimesExponential => DecayModel::GaussianTimesExponential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingName {
    GaussHermite,
    Uniform,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorName {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub ground_splitting_ghz: f64,
    pub excited_splitting_ghz: f64,
    pub excited_lifetime_ns: f64,
    pub ground_t1_ns: f64,
    pub temperature_k: f64,
    /// Pure dephasing rate of each excited level.
    pub excited_dephasing_per_ns: f64,
    /// Switch every incoherent rate off.
    pub lossless: bool,
}

impl Default for SystemSection {
    fn default() -> Self {
        let r = RateConfig::default();
        SystemSection {
            ground_splitting_ghz: LevelSystem::DEFAULT_GROUND_SPLITTING,
            excited_splitting_ghz: LevelSystem::DEFAULT_EXCITED_SPLITTING,
            excited_lifetime_ns: r.excited_lifetime,
            ground_t1_ns: r.ground_t1,
            temperature_k: r.temperature,
            excited_dephasing_per_ns: 0.0,
            lossless: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub fwhm_ghz: f64,
    pub emitters: usize,
    pub sampling: SamplingName,
    /// Half-width of the uniform grid in standard deviations.
    pub span_sigmas: f64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            fwhm_ghz: 10.0,
            emitters: 10,
            sampling: SamplingName::GaussHermite,
            span_sigmas: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        IntegratorSection {
            rtol: Stepping::DEFAULT_RTOL,
            atol: Stepping::DEFAULT_ATOL,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoherenceSection {
    pub pulse_fwhm_ns: Option<f64>,
    pub transition: Option<TransitionName>,
    pub carrier_detuning_ghz: Option<f64>,
    /// Extra excited-level linewidth while the sequence runs; defaults to
    /// 0.45 GHz per π of total pulse area.
    pub eid_ghz: Option<f64>,
    pub fit_model: Option<FitModel>,
    pub delay_start_ns: Option<f64>,
    pub delay_step_ns: Option<f64>,
    pub delay_count: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PumpSection {
    pub rabi_rad_per_ns: Option<f64>,
    pub duration_ns: Option<f64>,
    pub readout_delay_ns: Option<f64>,
    pub transition: Option<TransitionName>,
    pub detuning_ghz: Option<f64>,
    pub trace_points: Option<usize>,
    /// When set, the Rabi frequency is first calibrated so ρ₂₂ at readout
    /// hits this value.
    pub calibrate_rho22: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RamanSection {
    pub common_detuning_ghz: Option<f64>,
    pub two_photon_detuning_ghz: Option<f64>,
    /// Control centre minus signal centre.
    pub relative_delay_ns: Option<f64>,
    pub signal_area_rad: Option<f64>,
    pub control_area_rad: Option<f64>,
    pub fwhm_ns: Option<f64>,
    pub signal_phase_rad: Option<f64>,
    pub control_phase_rad: Option<f64>,
    /// Switch every incoherent rate off while the pair is on.
    pub lossless: Option<bool>,
    pub trace_points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FwmSection {
    pub control_rabi_rad_per_ns: Option<f64>,
    pub detuning_ghz: Option<f64>,
    pub optical_depth: Option<f64>,
    pub stokes_anchor: Option<AnchorName>,
    pub pulse_fwhm_ns: Option<f64>,
    pub time_samples: Option<usize>,
    pub spin_wave_decay_per_ns: Option<f64>,
    pub two_photon_detuning_ghz: Option<f64>,
    /// ρ₂₂ right after pumping; with `delay_ns` and the system T₁ this sets
    /// the population inversion.
    pub pumped_rho22: Option<f64>,
    pub delay_ns: Option<f64>,
    pub stokes_seed: Option<f64>,
    pub stokes_phase_rad: Option<f64>,
    /// Phase applied to the signal seed for the single-phase gain.
    pub signal_phase_rad: Option<f64>,
    pub phase_points: Option<usize>,
    pub slabs: Option<usize>,
    pub max_slabs: Option<usize>,
    pub refine_tol: Option<f64>,
    /// When set, the Stokes seed is first calibrated so the largest signal
    /// gain over the phase grid equals this value.
    pub calibrate_max_gain: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    /// CSV with `frequency_ghz,intensity` columns, relative to the scenario.
    pub input: String,
    pub lines: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub experiment: Experiment,
    /// Dotted path of a scalar key, e.g. `raman.two_photon_detuning_ghz`.
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherence: Option<CoherenceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump: Option<PumpSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raman: Option<RamanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fwm: Option<FwmSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioError {
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.field) {
            (Some(l), Some(k)) => write!(f, "line {l}, field `{k}`: {}", self.message),
            (None, Some(k)) => write!(f, "field `{k}`: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ScenarioError {}

impl ScenarioError {
    fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError {
            line: None,
            field: Some(field.into()),
            message: message.into(),
        }
    }
}

/// Line (1-based) of `key` inside `[section]`, or of a top-level key when
/// `section` is empty.
fn locate(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim().to_string();
            if key.is_empty() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        let name = line.split('=').next().unwrap_or("").trim();
        if current == section && !key.is_empty() && name == key {
            return Some(i + 1);
        }
    }
    None
}

fn located(source: &str, mut e: ScenarioError) -> ScenarioError {
    if e.line.is_none() {
        if let Some(f) = &e.field {
            let (section, key) = f.rsplit_once('.').unwrap_or(("", f.as_str()));
            e.line = locate(source, section, key).or_else(|| locate(source, section, ""));
        }
    }
    e
}

fn byte_to_line(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

impl Scenario {
    /// Parses, checks section use against the experiment, fills defaults and
    /// validates every value.
    pub fn parse(source: &str) -> Result<Scenario, ScenarioError> {
        if source.trim().is_empty() {
            return Err(ScenarioError {
                line: None,
                field: Some("experiment".into()),
                message: "empty scenario; the `experiment` key is required".into(),
            });
        }
        let doc: toml::Table = toml::from_str(source).map_err(|e| de_error(source, e))?;
        let scenario: Scenario =
            toml::Value::Table(doc.clone())
                .try_into()
                .map_err(|e: toml::de::Error| {
                    // re-parse against the source for a span
                    match toml::from_str::<Scenario>(source) {
                        Err(e2) => de_error(source, e2),
                        Ok(_) => ScenarioError {
                            line: None,
                            field: None,
                            message: e.message().to_string(),
                        },
                    }
                })?;
        let known = ["experiment", "seed", "system", "ensemble", "integrator"];
        let mut allowed: Vec<&str> = scenario.experiment.sections().to_vec();
        if let Some(sw) = &scenario.sweep {
            if sw.experiment == Experiment::Sweep {
                return Err(located(
                    source,
                    ScenarioError::field("sweep.experiment", "a sweep cannot sweep a sweep"),
                ));
            }
            allowed.extend(sw.experiment.sections());
        }
        for key in doc.keys() {
            if !known.contains(&key.as_str()) && !allowed.contains(&key.as_str()) {
                return Err(ScenarioError {
                    line: locate(source, key, ""),
                    field: Some(key.clone()),
                    message: format!(
                        "section is not used by experiment `{}`",
                        scenario.experiment
                    ),
                });
            }
        }
        let resolved = scenario.resolved().map_err(|e| located(source, e))?;
        resolved.validate().map_err(|e| located(source, e))?;
        Ok(resolved)
    }

    pub fn from_path(path: &Path) -> Result<Scenario, ScenarioError> {
        let source = std::fs::read_to_string(path).map_err(|e| ScenarioError {
            line: None,
            field: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Scenario::parse(&source)
    }

    /// The experiment whose physics actually runs (the swept one for sweeps).
    pub fn target(&self) -> Experiment {
        match (&self.experiment, &self.sweep) {
            (Experiment::Sweep, Some(s)) => s.experiment,
            (e, _) => *e,
        }
    }

    /// Fills every optional key the target experiment reads with its default.
    fn resolved(mut self) -> Result<Scenario, ScenarioError> {
        if self.experiment == Experiment::Sweep && self.sweep.is_none() {
            return Err(ScenarioError::field(
                "sweep",
                "the sweep experiment needs a [sweep] section",
            ));
        }
        match self.target() {
            Experiment::Ramsey | Experiment::Echo => {
                let seq = if self.target() == Experiment::Ramsey {
                    Sequence::Ramsey
                } else {
                    Sequence::HahnEcho
                };
                let c = self.coherence.get_or_insert_with(Default::default);
                c.pulse_fwhm_ns.get_or_insert(presets::COHERENCE_PULSE_FWHM);
                c.transition.get_or_insert(TransitionName::C);
                c.carrier_detuning_ghz.get_or_insert(0.0);
                c.eid_ghz
                    .get_or_insert(presets::EID_PER_RADIAN * total_area(seq));
                let (model, start, step, count) = match seq {
                    Sequence::Ramsey => (FitModel::GaussianTimesExponential, 0.015, 0.01, 13),
                    Sequence::HahnEcho => (FitModel::ExponentialDecay, 0.02, 0.03, 16),
                };
                c.fit_model.get_or_insert(model);
                c.delay_start_ns.get_or_insert(start);
                c.delay_step_ns.get_or_insert(step);
                c.delay_count.get_or_insert(count);
            }
            Experiment::Pump => self.fill_pump(),
            Experiment::Stirap => {
                self.fill_pump();
                let d = RamanConfig::reference();
                let r = self.raman.get_or_insert_with(Default::default);
                r.common_detuning_ghz.get_or_insert(d.pair.common_detuning);
                r.two_photon_detuning_ghz
                    .get_or_insert(d.pair.two_photon_detuning);
                r.relative_delay_ns.get_or_insert(d.pair.relative_delay);
                r.signal_area_rad.get_or_insert(d.pair.signal_area);
                r.control_area_rad.get_or_insert(d.pair.control_area);
                r.fwhm_ns.get_or_insert(d.pair.fwhm);
                r.signal_phase_rad.get_or_insert(d.pair.signal_phase);
                r.control_phase_rad.get_or_insert(d.pair.control_phase);
                r.lossless.get_or_insert(d.lossless);
                r.trace_points.get_or_insert(d.trace_points);
            }
            Experiment::Fwm => {
                let d = FwmConfig::default();
                let f = self.fwm.get_or_insert_with(Default::default);
                f.control_rabi_rad_per_ns.get_or_insert(d.control_rabi);
                f.detuning_ghz.get_or_insert(d.detuning);
                f.optical_depth.get_or_insert(d.optical_depth);
                f.stokes_anchor.get_or_insert(AnchorName::Upper);
                f.pulse_fwhm_ns.get_or_insert(d.pulse_fwhm);
                f.time_samples.get_or_insert(d.time_samples);
                f.spin_wave_decay_per_ns.get_or_insert(d.spin_wave_decay);
                f.two_photon_detuning_ghz
                    .get_or_insert(d.two_photon_detuning);
                f.pumped_rho22.get_or_insert(0.19);
                f.delay_ns.get_or_insert(0.0);
                f.stokes_seed.get_or_insert(d.stokes_seed);
                f.stokes_phase_rad.get_or_insert(d.stokes_phase);
                f.signal_phase_rad.get_or_insert(0.0);
                f.phase_points.get_or_insert(fwm::presets::PHASE_POINTS);
                f.slabs.get_or_insert(d.grid.slabs);
                f.max_slabs.get_or_insert(d.grid.max_slabs);
                f.refine_tol.get_or_insert(d.grid.refine_tol);
            }
            Experiment::SpectrumFit => {
                if self.spectrum.is_none() {
                    return Err(ScenarioError::field(
                        "spectrum",
                        "spectrum-fit needs a [spectrum] section with `input` and `lines`",
                    ));
                }
            }
            Experiment::Sweep => unreachable!("target is never a sweep"),
        }
        Ok(self)
    }

    fn fill_pump(&mut self) {
        let d = PumpConfig::default();
        let p = self.pump.get_or_insert_with(Default::default);
        p.rabi_rad_per_ns.get_or_insert(d.rabi);
        p.duration_ns.get_or_insert(d.duration);
        p.readout_delay_ns.get_or_insert(d.readout_delay);
        p.transition.get_or_insert(TransitionName::D);
        p.detuning_ghz.get_or_insert(d.detuning);
        p.trace_points.get_or_insert(d.trace_points);
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ScenarioError::field(
                    field,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        };
        let nonnegative = |field: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ScenarioError::field(
                    field,
                    format!("must be nonnegative and finite, got {v}"),
                ))
            }
        };
        let finite = |field: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ScenarioError::field(field, "must be finite"))
            }
        };
        let s = &self.system;
        positive("system.ground_splitting_ghz", s.ground_splitting_ghz)?;
        positive("system.excited_splitting_ghz", s.excited_splitting_ghz)?;
        positive("system.excited_lifetime_ns", s.excited_lifetime_ns)?;
        if s.ground_t1_ns.is_nan() || s.ground_t1_ns <= 0.0 {
            return Err(ScenarioError::field(
                "system.ground_t1_ns",
                "must be positive (inf disables relaxation)",
            ));
        }
        positive("system.temperature_k", s.temperature_k)?;
        nonnegative(
            "system.excited_dephasing_per_ns",
            s.excited_dephasing_per_ns,
        )?;
        let e = &self.ensemble;
        nonnegative("ensemble.fwhm_ghz", e.fwhm_ghz)?;
        positive("ensemble.span_sigmas", e.span_sigmas)?;
        dlambda_core::ensemble::detuning_nodes(&self.ensemble_spec())
            .map_err(|err| ScenarioError::field("ensemble.emitters", err.to_string()))?;
        positive("integrator.rtol", self.integrator.rtol)?;
        positive("integrator.atol", self.integrator.atol)?;

        if let Some(c) = &self.coherence {
            positive("coherence.pulse_fwhm_ns", c.pulse_fwhm_ns.unwrap_or(1.0))?;
            finite(
                "coherence.carrier_detuning_ghz",
                c.carrier_detuning_ghz.unwrap_or(0.0),
            )?;
            nonnegative("coherence.eid_ghz", c.eid_ghz.unwrap_or(0.0))?;
            positive("coherence.delay_start_ns", c.delay_start_ns.unwrap_or(1.0))?;
            positive("coherence.delay_step_ns", c.delay_step_ns.unwrap_or(1.0))?;
            if c.delay_count.is_some_and(|n| n < 5) {
                return Err(ScenarioError::field(
                    "coherence.delay_count",
                    "the envelope fit needs at least 5 delays",
                ));
            }
        }
        if let Some(p) = &self.pump {
            nonnegative("pump.rabi_rad_per_ns", p.rabi_rad_per_ns.unwrap_or(0.0))?;
            positive("pump.duration_ns", p.duration_ns.unwrap_or(1.0))?;
            nonnegative("pump.readout_delay_ns", p.readout_delay_ns.unwrap_or(0.0))?;
            finite("pump.detuning_ghz", p.detuning_ghz.unwrap_or(0.0))?;
            if let Some(t) = p.calibrate_rho22 {
                if !(0.0..0.5).contains(&t) {
                    return Err(ScenarioError::field(
                        "pump.calibrate_rho22",
                        "must lie in [0, 0.5)",
                    ));
                }
            }
        }
        if let Some(r) = &self.raman {
            finite(
                "raman.common_detuning_ghz",
                r.common_detuning_ghz.unwrap_or(1.0),
            )?;
            finite(
                "raman.two_photon_detuning_ghz",
                r.two_photon_detuning_ghz.unwrap_or(0.0),
            )?;
            finite(
                "raman.relative_delay_ns",
                r.relative_delay_ns.unwrap_or(0.0),
            )?;
            nonnegative("raman.signal_area_rad", r.signal_area_rad.unwrap_or(0.0))?;
            nonnegative("raman.control_area_rad", r.control_area_rad.unwrap_or(0.0))?;
            positive("raman.fwhm_ns", r.fwhm_ns.unwrap_or(1.0))?;
            finite("raman.signal_phase_rad", r.signal_phase_rad.unwrap_or(0.0))?;
            finite(
                "raman.control_phase_rad",
                r.control_phase_rad.unwrap_or(0.0),
            )?;
        }
        if let Some(f) = &self.fwm {
            nonnegative(
                "fwm.control_rabi_rad_per_ns",
                f.control_rabi_rad_per_ns.unwrap_or(0.0),
            )?;
            if f.detuning_ghz == Some(0.0) {
                return Err(ScenarioError::field(
                    "fwm.detuning_ghz",
                    "must be nonzero for adiabatic elimination",
                ));
            }
            finite("fwm.detuning_ghz", f.detuning_ghz.unwrap_or(1.0))?;
            nonnegative("fwm.optical_depth", f.optical_depth.unwrap_or(0.0))?;
            positive("fwm.pulse_fwhm_ns", f.pulse_fwhm_ns.unwrap_or(1.0))?;
            if f.time_samples.is_some_and(|n| n < 3) {
                return Err(ScenarioError::field(
                    "fwm.time_samples",
                    "need at least 3 samples",
                ));
            }
            nonnegative(
                "fwm.spin_wave_decay_per_ns",
                f.spin_wave_decay_per_ns.unwrap_or(0.0),
            )?;
            finite(
                "fwm.two_photon_detuning_ghz",
                f.two_photon_detuning_ghz.unwrap_or(0.0),
            )?;
            if !f.pumped_rho22.is_none_or(|r| (0.0..=1.0).contains(&r)) {
                return Err(ScenarioError::field(
                    "fwm.pumped_rho22",
                    "must lie in [0, 1]",
                ));
            }
            nonnegative("fwm.delay_ns", f.delay_ns.unwrap_or(0.0))?;
            nonnegative("fwm.stokes_seed", f.stokes_seed.unwrap_or(0.0))?;
            finite("fwm.stokes_phase_rad", f.stokes_phase_rad.unwrap_or(0.0))?;
            finite("fwm.signal_phase_rad", f.signal_phase_rad.unwrap_or(0.0))?;
            if f.phase_points == Some(0) {
                return Err(ScenarioError::field(
                    "fwm.phase_points",
                    "must be at least 1",
                ));
            }
            if f.slabs == Some(0) || f.max_slabs < f.slabs {
                return Err(ScenarioError::field(
                    "fwm.max_slabs",
                    "need 1 <= slabs <= max_slabs",
                ));
            }
            positive("fwm.refine_tol", f.refine_tol.unwrap_or(1.0))?;
            if let Some(g) = f.calibrate_max_gain {
                positive("fwm.calibrate_max_gain", g)?;
            }
        }
        if let Some(sp) = &self.spectrum {
            if sp.lines == 0 {
                return Err(ScenarioError::field("spectrum.lines", "must be at least 1"));
            }
            if sp.input.is_empty() {
                return Err(ScenarioError::field(
                    "spectrum.input",
                    "must name a CSV file",
                ));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(ScenarioError::field(
                    "sweep.values",
                    "must list at least one value",
                ));
            }
            if sw.values.iter().any(|v| !v.is_finite()) {
                return Err(ScenarioError::field("sweep.values", "must be finite"));
            }
            // every row must itself be a valid scenario
            for &v in &sw.values {
                self.row(v)?;
            }
        }
        // the physics layer re-checks combinations the per-key checks cannot see
        self.level_system()
            .map_err(|e| ScenarioError::field("system", e.to_string()))?;
        if self.target() == Experiment::Fwm {
            self.fwm_config()?
                .build(&self.level_system().expect("checked above"))
                .map_err(|e| ScenarioError::field("fwm", e.to_string()))?;
        }
        Ok(())
    }

    /// The scenario for one sweep value: the target experiment with the
    /// parameter replaced.
    pub fn row(&self, value: f64) -> Result<Scenario, ScenarioError> {
        let sw = self
            .sweep
            .as_ref()
            .ok_or_else(|| ScenarioError::field("sweep", "not a sweep scenario"))?;
        let mut doc = toml::Value::try_from(self).expect("scenario serialises");
        let table = doc.as_table_mut().expect("table");
        table.remove("sweep");
        table.insert(
            "experiment".into(),
            toml::Value::String(sw.experiment.name().into()),
        );
        let field = || ScenarioError::field(format!("sweep.parameter ({})", sw.parameter), "");
        let mut slot: &mut toml::Value = &mut doc;
        for part in sw.parameter.split('.') {
            slot = slot
                .as_table_mut()
                .and_then(|t| t.get_mut(part))
                .ok_or_else(|| ScenarioError {
                    message: "does not name a key of the resolved scenario".into(),
                    ..field()
                })?;
        }
        *slot = match slot {
            toml::Value::Float(_) => toml::Value::Float(value),
            toml::Value::Integer(_) if value.fract() == 0.0 && value.abs() < 9.0e15 => {
                toml::Value::Integer(value as i64)
            }
            toml::Value::Integer(_) => {
                return Err(ScenarioError {
                    message: format!("integer key cannot take the value {value}"),
                    ..field()
                })
            }
            _ => {
                return Err(ScenarioError {
                    message: "is not a numeric scalar".into(),
                    ..field()
                })
            }
        };
        let row: Scenario = doc.try_into().map_err(|e: toml::de::Error| ScenarioError {
            message: e.message().to_string(),
            ..field()
        })?;
        let row = row.resolved()?;
        row.validate().map_err(|e| ScenarioError {
            message: format!("value {value}: {}", e),
            ..field()
        })?;
        Ok(row)
    }

    /// Overrides applied from the command line.
    pub fn with_overrides(
        mut self,
        seed: Option<u64>,
        rtol: Option<f64>,
    ) -> Result<Scenario, ScenarioError> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(t) = rtol {
            self.integrator.rtol = t;
        }
        self.validate()?;
        Ok(self)
    }

    /// Replaces the swept parameter and/or its values.
    pub fn with_sweep(
        mut self,
        parameter: Option<String>,
        values: Option<Vec<f64>>,
    ) -> Result<Scenario, ScenarioError> {
        let sw = self
            .sweep
            .as_mut()
            .ok_or_else(|| ScenarioError::field("sweep", "not a sweep scenario"))?;
        if let Some(p) = parameter {
            sw.parameter = p;
        }
        if let Some(v) = values {
            sw.values = v;
        }
        self.validate()?;
        Ok(self)
    }

    /// The resolved scenario as TOML, as echoed into summaries.
    pub fn to_toml(&self) -> toml::Table {
        match toml::Value::try_from(self).expect("scenario serialises") {
            toml::Value::Table(t) => t,
            _ => unreachable!(),
        }
    }

    pub fn level_system(&self) -> dlambda_core::error::Result<LevelSystem> {
        let s = &self.system;
        let mut sys = LevelSystem::from_config(
            s.ground_splitting_ghz,
            s.excited_splitting_ghz,
            &RateConfig {
                excited_lifetime: s.excited_lifetime_ns,
                ground_t1: s.ground_t1_ns,
                temperature: s.temperature_k,
            },
        )?;
        sys.set_rate(2, 2, s.excited_dephasing_per_ns)?;
        sys.set_rate(3, 3, s.excited_dephasing_per_ns)?;
        Ok(if s.lossless { sys.lossless() } else { sys })
    }

    pub fn ensemble_spec(&self) -> EnsembleSpec {
        let e = &self.ensemble;
        EnsembleSpec {
            fwhm: e.fwhm_ghz,
            n_emitters: e.emitters,
            sampling: match e.sampling {
                SamplingName::GaussHermite => Sampling::GaussHermite,
                SamplingName::Uniform => Sampling::Uniform {
                    span_sigmas: e.span_sigmas,
                },
                SamplingName::MonteCarlo => Sampling::MonteCarlo { seed: self.seed },
            },
        }
    }

    pub fn stepping(&self) -> Stepping {
        Stepping::Adaptive {
            rtol: self.integrator.rtol,
            atol: self.integrator.atol,
        }
    }

    pub fn coherence_config(&self) -> Result<(Sequence, CoherenceConfig, Vec<f64>), ScenarioError> {
        let c = self
            .coherence
            .as_ref()
            .ok_or_else(|| ScenarioError::field("coherence", "missing section"))?;
        let sequence = if self.target() == Experiment::Ramsey {
            Sequence::Ramsey
        } else {
            Sequence::HahnEcho
        };
        let cfg = CoherenceConfig {
            pulse_fwhm: c.pulse_fwhm_ns.expect("resolved"),
            transition: c.transition.expect("resolved").into(),
            carrier_detuning: c.carrier_detuning_ghz.expect("resolved"),
            excitation_dephasing: c.eid_ghz.expect("resolved"),
            fit_model: c.fit_model.expect("resolved").into(),
            initial_state: thermal_ground_state(
                self.system.temperature_k,
                self.system.ground_splitting_ghz,
            )
            .map_err(|e| ScenarioError::field("system.temperature_k", e.to_string()))?,
            stepping: self.stepping(),
        };
        let (start, step) = (
            c.delay_start_ns.expect("resolved"),
            c.delay_step_ns.expect("resolved"),
        );
        let taus = (0..c.delay_count.expect("resolved"))
            .map(|k| start + step * k as f64)
            .collect();
        Ok((sequence, cfg, taus))
    }

    pub fn pump_config(&self) -> Result<PumpConfig, ScenarioError> {
        let p = self
            .pump
            .as_ref()
            .ok_or_else(|| ScenarioError::field("pump", "missing section"))?;
        Ok(PumpConfig {
            rabi: p.rabi_rad_per_ns.expect("resolved"),
            duration: p.duration_ns.expect("resolved"),
            transition: p.transition.expect("resolved").into(),
            detuning: p.detuning_ghz.expect("resolved"),
            readout_delay: p.readout_delay_ns.expect("resolved"),
            temperature: self.system.temperature_k,
            trace_points: p.trace_points.expect("resolved"),
            stepping: self.stepping(),
        })
    }

    pub fn raman_config(&self) -> Result<RamanConfig, ScenarioError> {
        let r = self
            .raman
            .as_ref()
            .ok_or_else(|| ScenarioError::field("raman", "missing section"))?;
        Ok(RamanConfig {
            pair: RamanPair {
                common_detuning: r.common_detuning_ghz.expect("resolved"),
                two_photon_detuning: r.two_photon_detuning_ghz.expect("resolved"),
                relative_delay: r.relative_delay_ns.expect("resolved"),
                signal_area: r.signal_area_rad.expect("resolved"),
                control_area: r.control_area_rad.expect("resolved"),
                fwhm: r.fwhm_ns.expect("resolved"),
                signal_phase: r.signal_phase_rad.expect("resolved"),
                control_phase: r.control_phase_rad.expect("resolved"),
                center: 0.0,
            },
            lossless: r.lossless.expect("resolved"),
            trace_points: r.trace_points.expect("resolved"),
            stepping: self.stepping(),
        })
    }

    pub fn fwm_config(&self) -> Result<FwmConfig, ScenarioError> {
        let f = self
            .fwm
            .as_ref()
            .ok_or_else(|| ScenarioError::field("fwm", "missing section"))?;
        let sys = self
            .level_system()
            .map_err(|e| ScenarioError::field("system", e.to_string()))?;
        let inversion = fwm::rethermalized_inversion(
            f.pumped_rho22.expect("resolved"),
            f.delay_ns.expect("resolved"),
            // the lossless switch must not freeze the inversion here
            self.system.ground_t1_ns,
            self.system.temperature_k,
            sys.ground_splitting(),
        )
        .map_err(|e| ScenarioError::field("fwm.delay_ns", e.to_string()))?;
        Ok(FwmConfig {
            control_rabi: f.control_rabi_rad_per_ns.expect("resolved"),
            detuning: f.detuning_ghz.expect("resolved"),
            optical_depth: f.optical_depth.expect("resolved"),
            anchor: match f.stokes_anchor.expect("resolved") {
                AnchorName::Upper => StokesAnchor::Upper,
                AnchorName::Lower => StokesAnchor::Lower,
            },
            pulse_fwhm: f.pulse_fwhm_ns.expect("resolved"),
            time_samples: f.time_samples.expect("resolved"),
            spin_wave_decay: f.spin_wave_decay_per_ns.expect("resolved"),
            two_photon_detuning: f.two_photon_detuning_ghz.expect("resolved"),
            inversion,
            stokes_seed: f.stokes_seed.expect("resolved"),
            stokes_phase: f.stokes_phase_rad.expect("resolved"),
            initial_spin_wave: dlambda_core::C64::new(0.0, 0.0),
            grid: FwmGridSpec {
                slabs: f.slabs.expect("resolved"),
                max_slabs: f.max_slabs.expect("resolved"),
                refine_tol: f.refine_tol.expect("resolved"),
            },
        })
    }
}

fn de_error(source: &str, e: toml::de::Error) -> ScenarioError {
    let line = e.span().map(|s| byte_to_line(source, s.start));
    let message = e.message().to_string();
    // serde names the offending key in backticks for unknown fields
    let field = line.and_then(|l| {
        source
            .lines()
            .nth(l - 1)
            .and_then(|text| text.split('=').next())
            .map(|k| k.trim().to_string())
            .filter(|k| !k.is_empty() && !k.starts_with('['))
    });
    ScenarioError {
        line,
        field,
        message,
    }
}
