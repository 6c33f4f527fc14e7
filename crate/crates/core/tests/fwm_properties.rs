use dlambda_core::exec::Sequential;
use dlambda_core::fwm::{
    phase_grid, phase_response, presets, rethermalized_inversion, FwmConfig, FwmGridSpec,
};
use dlambda_core::LevelSystem;

#[test]
fn halving_both_steps_changes_gains_below_a_permille() {
    let sys = LevelSystem::default();
    let coarse = FwmConfig::default();
    let fine = FwmConfig {
        time_samples: 2 * coarse.time_samples - 1,
        grid: FwmGridSpec {
            slabs: 256,
            max_slabs: 256,
            refine_tol: 1e-4,
        },
        ..coarse.clone()
    };
    let phases = phase_grid(presets::PHASE_POINTS);
    let run = |cfg: &FwmConfig| {
        let (m, inp) = cfg.build(&sys).unwrap();
        phase_response(&Sequential, &m, &inp, &phases, &cfg.grid).unwrap()
    };
    let (a, b) = (run(&coarse), run(&fine));
    for (x, y) in a.signal_gain.iter().zip(&b.signal_gain) {
        assert!((x - y).abs() < 1e-3 * y.max(1.0), "{x} {y}");
    }
}

#[test]
fn response_is_periodic_in_phase() {
    let cfg = FwmConfig::default();
    let (m, inp) = cfg.build(&LevelSystem::default()).unwrap();
    let phases: Vec<f64> = (0..8).map(|k| 0.4 * k as f64).collect();
    let shifted: Vec<f64> = phases.iter().map(|p| p + std::f64::consts::TAU).collect();
    let a = phase_response(&Sequential, &m, &inp, &phases, &cfg.grid).unwrap();
    let b = phase_response(&Sequential, &m, &inp, &shifted, &cfg.grid).unwrap();
    for (x, y) in a.signal_gain.iter().zip(&b.signal_gain) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn rethermalized_medium_loses_phase_contrast() {
    let sys = LevelSystem::default();
    let phases = phase_grid(presets::PHASE_POINTS);
    let mut contrast = Vec::new();
    for delay in [0.0, 10.0, 30.0, 1000.0] {
        let inversion = rethermalized_inversion(0.19, delay, sys.ground_t1(), 5.0, 48.0).unwrap();
        let cfg = FwmConfig {
            inversion,
            ..FwmConfig::default()
        };
        let (m, inp) = cfg.build(&sys).unwrap();
        let r = phase_response(&Sequential, &m, &inp, &phases, &cfg.grid).unwrap();
        contrast.push(r.signal_gain[r.max_index()] - r.signal_gain[r.min_index()]);
    }
    // the gain is not monotone in coupling strength, but once the inversion
    // relaxes to its thermal value the phase dependence has largely gone
    assert!(contrast[3] < 0.1 * contrast[0], "{contrast:?}");
}
