//! Runs a resolved scenario and collects its tables and headline numbers.

use std::path::Path;

use dlambda_core::exec::Executor;
use dlambda_core::experiments::{
    calibrate_pump_rabi, run_coherence_sequence, run_optical_pumping, run_stirap, PumpResult,
    Sequence,
};
use dlambda_core::fit::{fit_ple_spectrum, FitStatus};
use dlambda_core::fwm::{calibrate_stokes_seed, phase_grid, phase_response, propagate_fwm};
use dlambda_core::C64;

use crate::report::{Outcome, Table};
use crate::scenario::{Experiment, Scenario};

/// Search interval of the pump calibration (rad/ns).
const PUMP_RABI_BRACKET: (f64, f64) = (0.5, 200.0);

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Scenario(#[from] crate::scenario::ScenarioError),
    #[error("{0}")]
    Physics(#[from] dlambda_core::Error),
    #[error("{context}: {message}")]
    Input { context: String, message: String },
    #[error("sweep row {index} ({parameter} = {value}): {source}")]
    SweepRow {
        index: usize,
        parameter: String,
        value: f64,
        source: Box<RunError>,
    },
}

/// Runs `scenario`; relative input paths resolve against `base_dir`.
pub fn run<E: Executor>(
    exec: &E,
    scenario: &Scenario,
    base_dir: &Path,
) -> Result<Outcome, RunError> {
    match scenario.experiment {
        Experiment::Ramsey | Experiment::Echo => coherence(exec, scenario),
        Experiment::Pump => pump(exec, scenario),
        Experiment::Stirap => stirap(exec, scenario),
        Experiment::Fwm => fwm(exec, scenario),
        Experiment::SpectrumFit => spectrum(scenario, base_dir),
        Experiment::Sweep => sweep(exec, scenario, base_dir),
    }
}

fn coherence<E: Executor>(exec: &E, s: &Scenario) -> Result<Outcome, RunError> {
    let (sequence, cfg, taus) = s.coherence_config()?;
    let r = run_coherence_sequence(
        exec,
        sequence,
        &s.level_system()?,
        &s.ensemble_spec(),
        &cfg,
        &taus,
    )?;
    let mut o = Outcome::default();
    let mut t = Table::new(
        "envelope.csv",
        &[
            "delay_ns",
            "readout_time_ns",
            "bright_excited_population",
            "dark_excited_population",
            "contrast",
            "fit_contrast",
        ],
    );
    for k in 0..r.delays.len() {
        t.rows.push(vec![
            Some(r.delays[k]),
            Some(r.readout_times[k]),
            Some(r.upper[k]),
            Some(r.lower[k]),
            Some(r.contrast[k]),
            r.fit.as_ref().ok().map(|f| f.evaluate(r.delays[k])),
        ]);
    }
    o.tables.push(t);
    let label = match sequence {
        Sequence::Ramsey => "t2_star",
        Sequence::HahnEcho => "t2_echo",
    };
    match &r.fit {
        Ok(f) => {
            o.set("fit_model", f.model.name());
            o.set(
                "fit_status",
                match f.status {
                    FitStatus::Converged => "converged",
                    FitStatus::NotConverged => "not-converged",
                    FitStatus::NonIdentifiable => "non-identifiable",
                },
            );
            o.set(&format!("{label}_ns"), f.time_constant);
            o.set(&format!("{label}_uncertainty_ns"), f.uncertainty);
            o.set("exponential_time_ns", f.exponential_time);
            o.set("one_over_e_time_ns", f.one_over_e_time);
            o.set("fit_amplitude", f.amplitude);
            o.set("fit_residual_norm", f.residual_norm);
            if f.is_flagged() {
                o.flag(format!(
                    "envelope fit {}",
                    o.results["fit_status"].as_str().unwrap_or("failed")
                ));
            }
        }
        Err(e) => o.flag(format!("envelope fit failed: {e}")),
    }
    o.set("initial_contrast", r.contrast[0]);
    Ok(o)
}

fn population_table(
    file: &str,
    times: &[f64],
    pops: &[[f64; 4]],
    extra: Option<(&str, &[f64])>,
) -> Table {
    let mut header = vec!["time_ns", "rho11", "rho22", "rho33", "rho44"];
    if let Some((name, _)) = extra {
        header.push(name);
    }
    let mut t = Table::new(file, &header);
    for (k, (time, p)) in times.iter().zip(pops).enumerate() {
        let mut row = vec![*time, p[0], p[1], p[2], p[3]];
        if let Some((_, v)) = extra {
            row.push(v[k]);
        }
        t.push(row);
    }
    t
}

fn pump_outputs(o: &mut Outcome, r: &PumpResult) {
    o.tables.push(population_table(
        "pump_trace.csv",
        &r.times,
        &r.populations,
        Some(("fluorescence_per_ns", &r.fluorescence)),
    ));
    o.set("rho22_at_pump_end", r.rho22_at_pump_end);
    o.set("rho22_at_readout", r.rho22_at_readout);
}

fn pump_config_calibrated<E: Executor>(
    exec: &E,
    s: &Scenario,
    o: &mut Outcome,
) -> Result<dlambda_core::experiments::PumpConfig, RunError> {
    let mut cfg = s.pump_config()?;
    if let Some(target) = s.pump.as_ref().and_then(|p| p.calibrate_rho22) {
        cfg.rabi = calibrate_pump_rabi(
            exec,
            &s.level_system()?,
            &s.ensemble_spec(),
            &cfg,
            target,
            PUMP_RABI_BRACKET,
        )?;
        o.set("calibrated_pump_rabi_rad_per_ns", cfg.rabi);
    }
    Ok(cfg)
}

fn pump<E: Executor>(exec: &E, s: &Scenario) -> Result<Outcome, RunError> {
    let mut o = Outcome::default();
    let cfg = pump_config_calibrated(exec, s, &mut o)?;
    let r = run_optical_pumping(exec, &s.level_system()?, &s.ensemble_spec(), &cfg)?;
    pump_outputs(&mut o, &r);
    Ok(o)
}

fn stirap<E: Executor>(exec: &E, s: &Scenario) -> Result<Outcome, RunError> {
    let mut o = Outcome::default();
    let pump_cfg = pump_config_calibrated(exec, s, &mut o)?;
    let raman = s.raman_config()?;
    let r = run_stirap(
        exec,
        &s.level_system()?,
        &s.ensemble_spec(),
        &pump_cfg,
        &raman,
    )?;
    pump_outputs(&mut o, &r.pump);
    o.tables.push(population_table(
        "raman_trace.csv",
        &r.raman.times,
        &r.raman.populations,
        None,
    ));
    o.set("rho22_initial", r.raman.rho22_initial);
    o.set("rho22_final", r.raman.rho22_final);
    o.set("efficiency", r.raman.efficiency);
    if raman.pair.near_resonance(s.ensemble.fwhm_ghz) {
        o.set(
            "warning",
            "common detuning within five inhomogeneous linewidths of resonance",
        );
    }
    Ok(o)
}

fn fwm<E: Executor>(exec: &E, s: &Scenario) -> Result<Outcome, RunError> {
    let mut o = Outcome::default();
    let section = s.fwm.as_ref().expect("resolved");
    let system = s.level_system()?;
    let mut cfg = s.fwm_config()?;
    let phases = phase_grid(section.phase_points.expect("resolved"));
    if let Some(target) = section.calibrate_max_gain {
        let (m, inp) = cfg.build(&system)?;
        let unit = inp.with_seeds(inp.signal.clone(), inp.signal.clone(), Vec::new());
        cfg.stokes_seed =
            calibrate_stokes_seed(exec, &m, &unit, &phases, &cfg.grid, target, (1e-3, 10.0))?;
        o.set("calibrated_stokes_seed", cfg.stokes_seed);
    }
    let (medium, input) = cfg.build(&system)?;
    let r = phase_response(exec, &medium, &input, &phases, &cfg.grid)?;
    let mut t = Table::new(
        "gain_vs_phase.csv",
        &["signal_phase_rad", "signal_gain", "stokes_gain"],
    );
    for k in 0..phases.len() {
        t.rows.push(vec![
            Some(phases[k]),
            Some(r.signal_gain[k]),
            r.stokes_gain.as_ref().map(|g| g[k]),
        ]);
    }
    o.tables.push(t);

    let (lo, hi) = (r.min_index(), r.max_index());
    let stokes_at = |k: usize| r.stokes_gain.as_ref().map(|g| g[k]);
    o.set("population_inversion", cfg.inversion);
    o.set(
        "coupling_signal",
        medium.coupling_signal * medium.population_inversion_factor,
    );
    o.set(
        "coupling_stokes",
        medium.coupling_stokes * medium.population_inversion_factor,
    );
    o.set("slabs", r.slabs as i64);
    o.set("min_signal_gain", r.signal_gain[lo]);
    o.set("min_gain_phase_rad", phases[lo]);
    o.set("max_signal_gain", r.signal_gain[hi]);
    o.set("max_gain_phase_rad", phases[hi]);
    if let (Some(klo), Some(khi)) = (stokes_at(lo), stokes_at(hi)) {
        o.set("stokes_gain_at_min", klo);
        o.set("stokes_gain_at_max", khi);
        o.set(
            "co_moving",
            (r.signal_gain[lo] < 1.0) == (klo < 1.0) && (r.signal_gain[hi] > 1.0) == (khi > 1.0),
        );
    }

    let phi = section.signal_phase_rad.expect("resolved");
    let single = phase_response(exec, &medium, &input, &[phi], &cfg.grid)?;
    o.set("signal_gain", single.signal_gain[0]);
    if let Some(g) = &single.stokes_gain {
        o.set("stokes_gain", g[0]);
    }

    // output pulse shapes at the two extremes
    let rotated = |p: f64| {
        let rot = C64::from_polar(1.0, p);
        input.with_seeds(
            input.signal.iter().map(|x| x * rot).collect(),
            input.stokes_conj.clone(),
            input.spin_wave.clone(),
        )
    };
    let runs = exec.map_indexed(2, |k| {
        propagate_fwm(
            &medium,
            &rotated(phases[if k == 0 { lo } else { hi }]),
            &cfg.grid,
        )
    });
    let mut grids = Vec::with_capacity(2);
    for g in runs {
        grids.push(g?);
    }
    let mut pulses = Table::new(
        "output_pulses.csv",
        &[
            "time_ns",
            "control_envelope",
            "signal_in_intensity",
            "signal_out_intensity_at_min",
            "signal_out_intensity_at_max",
            "stokes_in_intensity",
            "stokes_out_intensity_at_min",
            "stokes_out_intensity_at_max",
        ],
    );
    for j in 0..input.times.len() {
        pulses.push([
            input.times[j],
            input.control[j],
            input.signal[j].norm_sqr(),
            grids[0].signal_out()[j].norm_sqr(),
            grids[1].signal_out()[j].norm_sqr(),
            input.stokes_conj[j].norm_sqr(),
            grids[0].stokes_conj_out()[j].norm_sqr(),
            grids[1].stokes_conj_out()[j].norm_sqr(),
        ]);
    }
    o.tables.push(pulses);
    Ok(o)
}

fn read_spectrum(path: &Path) -> Result<(Vec<f64>, Vec<f64>), RunError> {
    let err = |message: String| RunError::Input {
        context: path.display().to_string(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let header = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| err(format!("missing column `{name}`")))
    };
    let (fc, ic) = (col("frequency_ghz")?, col("intensity")?);
    let (mut fs, mut ys) = (Vec::new(), Vec::new());
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let num = |c: usize| {
            rec.get(c)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| err(format!("row {}: column {} is not a number", k + 2, c + 1)))
        };
        fs.push(num(fc)?);
        ys.push(num(ic)?);
    }
    Ok((fs, ys))
}

fn spectrum(s: &Scenario, base_dir: &Path) -> Result<Outcome, RunError> {
    let sp = s.spectrum.as_ref().expect("resolved");
    let (fs, ys) = read_spectrum(&base_dir.join(&sp.input))?;
    let fit = fit_ple_spectrum(&fs, &ys, sp.lines)?;
    let mut o = Outcome::default();
    let mut lines = Table::new("fitted_lines.csv", &["center_ghz", "fwhm_ghz", "amplitude"]);
    for l in &fit.lines {
        lines.push([l.center, l.fwhm, l.amplitude]);
    }
    let mut curve = Table::new(
        "spectrum_fit.csv",
        &["frequency_ghz", "intensity", "model_intensity"],
    );
    for (f, y) in fs.iter().zip(&ys) {
        let model: f64 = fit
            .lines
            .iter()
            .map(|l| {
                l.amplitude
                    * (-4.0 * std::f64::consts::LN_2 * ((f - l.center) / l.fwhm).powi(2)).exp()
            })
            .sum();
        curve.push([*f, *y, model]);
    }
    o.tables.push(lines);
    o.tables.push(curve);
    o.set("requested_lines", sp.lines as i64);
    o.set("fitted_lines", fit.lines.len() as i64);
    o.set("residual_norm", fit.residual_norm);
    o.set("converged", fit.converged);
    if fit.flagged {
        o.flag(format!(
            "spectrum fit flagged: {} of {} lines detected, converged = {}",
            fit.lines.len(),
            sp.lines,
            fit.converged
        ));
    }
    Ok(o)
}

fn sweep<E: Executor>(exec: &E, s: &Scenario, base_dir: &Path) -> Result<Outcome, RunError> {
    let sw = s.sweep.as_ref().expect("resolved");
    let rows: Vec<Scenario> = sw
        .values
        .iter()
        .map(|&v| s.row(v))
        .collect::<Result<_, _>>()?;
    // rows run in parallel; each row's inner work shares the same pool
    let outcomes = exec.map_indexed(rows.len(), |k| run(exec, &rows[k], base_dir));
    let mut done = Vec::with_capacity(rows.len());
    for (index, r) in outcomes.into_iter().enumerate() {
        done.push(r.map_err(|e| RunError::SweepRow {
            index,
            parameter: sw.parameter.clone(),
            value: sw.values[index],
            source: Box::new(e),
        })?);
    }
    // numeric results common to every row, in key order
    let keys: Vec<String> = done[0]
        .results
        .keys()
        .filter(|k| done.iter().all(|o| o.number(k).is_some()))
        .cloned()
        .collect();
    let mut header = vec![sw.parameter.as_str()];
    header.extend(keys.iter().map(String::as_str));
    let mut t = Table::new("sweep.csv", &header);
    let mut o = Outcome::default();
    for (k, row) in done.iter().enumerate() {
        let mut cells = vec![sw.values[k]];
        cells.extend(keys.iter().map(|key| row.number(key).expect("filtered")));
        t.push(cells);
        for f in &row.flags {
            o.flag(format!(
                "row {k} ({} = {}): {f}",
                sw.parameter, sw.values[k]
            ));
        }
    }
    o.tables.push(t);
    o.set("rows", done.len() as i64);
    o.set("parameter", sw.parameter.as_str());
    o.set("experiment", sw.experiment.name());
    Ok(o)
}
