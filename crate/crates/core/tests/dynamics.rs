use dlambda_core::integrate::{evolve, EvolveOptions, Stepping};
use dlambda_core::levels::RateConfig;
use dlambda_core::linalg::CMatrix4;
use dlambda_core::pulses::{gaussian_pulse, square_pulse, PulseTimeline};
use dlambda_core::state::thermal_ground_state;
use dlambda_core::{DensityMatrix, LevelSystem, Transition, C64};
use proptest::prelude::*;

fn random_state(diag: [f64; 4], coh: [(f64, f64); 6]) -> DensityMatrix {
    // A·A† / tr is a valid density matrix for any A
    let mut a = CMatrix4::zeros();
    let mut k = 0;
    for i in 0..4 {
        a[(i, i)] = C64::new(diag[i], 0.0);
        for j in 0..i {
            a[(i, j)] = C64::new(coh[k].0, coh[k].1);
            k += 1;
        }
    }
    let m = a.matmul(&a.adjoint());
    let tr = m.trace().re;
    DensityMatrix::from_matrix(m.scale(C64::new(1.0 / tr, 0.0)))
}

fn transition(k: usize) -> Transition {
    Transition::ALL[k % 4]
}

prop_compose! {
    fn drives()(
        specs in prop::collection::vec(
            (0usize..4, 0.0f64..8.0, 0.01f64..0.08, 0.0f64..0.4, -30.0f64..30.0, 0.0f64..6.3, any::<bool>()),
            1..4,
        )
    ) -> PulseTimeline {
        let mut tl = PulseTimeline::empty();
        for (tr, area, width, center, det, phase, square) in specs {
            let d = if square {
                square_pulse(area / width, width, center, transition(tr), det, phase).unwrap()
            } else {
                gaussian_pulse(area, width, center, transition(tr), det, phase).unwrap()
            };
            // overlapping drives with different carriers on one transition are rejected
            let _ = tl.push(d);
        }
        tl
    }
}

fn system(lifetime: f64, t1: f64, temperature: f64, dephasing: f64) -> LevelSystem {
    let mut s = LevelSystem::with_rate_config(&RateConfig {
        excited_lifetime: lifetime,
        ground_t1: t1,
        temperature,
    })
    .unwrap();
    s.set_rate(2, 2, dephasing).unwrap();
    s.set_rate(3, 3, dephasing).unwrap();
    s
}

fn samples(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64)
        .map(|t| t.min(t1))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 48,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn states_stay_physical(
        tl in drives(),
        diag in prop::array::uniform4(0.05f64..1.0),
        coh in prop::array::uniform6((-0.5f64..0.5, -0.5f64..0.5)),
        lifetime in 0.5f64..5.0,
        t1 in 1.0f64..100.0,
        deph in 0.0f64..5.0,
        detuning in -20.0f64..20.0,
    ) {
        let rho0 = random_state(diag, coh);
        let opts = EvolveOptions {
            emitter_detuning: detuning,
            sample_times: samples(-0.4, 0.9, 14),
            ..Default::default()
        };
        let traj = evolve(&rho0, &system(lifetime, t1, 5.0, deph), &tl, (-0.4, 0.9), &opts).unwrap();
        for s in &traj.states {
            let d = s.diagnostics();
            prop_assert!(d.trace_error <= 1e-9, "{d:?}");
            prop_assert!(d.hermiticity_error <= 1e-10, "{d:?}");
            prop_assert!(d.min_eigenvalue >= -1e-8, "{d:?}");
        }
    }

    #[test]
    fn common_drive_phase_leaves_populations_unchanged(
        tl in drives(),
        phase in 0.0f64..6.3,
        detuning in -20.0f64..20.0,
        p in prop::array::uniform4(0.0f64..1.0),
    ) {
        let total: f64 = p.iter().sum::<f64>() + 1e-3;
        let rho0 = DensityMatrix::from_populations(p.map(|x| (x + 2.5e-4) / total)).unwrap();
        let sys = LevelSystem::default();
        let opts = EvolveOptions { emitter_detuning: detuning, ..Default::default() };
        let a = evolve(&rho0, &sys, &tl, (-0.4, 0.9), &opts).unwrap();
        let b = evolve(&rho0, &sys, &tl.with_common_phase(phase), (-0.4, 0.9), &opts).unwrap();
        let (pa, pb) = (a.final_state().populations(), b.final_state().populations());
        for k in 0..4 {
            prop_assert!((pa[k] - pb[k]).abs() < 1e-7, "{pa:?} {pb:?}");
        }
    }

    #[test]
    fn time_shift_is_covariant(
        area in 0.5f64..6.0,
        width in 0.01f64..0.05,
        det_c in -20.0f64..20.0,
        det_d in -20.0f64..20.0,
        delay in -0.05f64..0.05,
        shift in -3.0f64..3.0,
    ) {
        // C and D share level 3, so the drive graph is a tree and the frame
        // carries no residual time dependence
        let tl = PulseTimeline::new(vec![
            gaussian_pulse(area, width, 0.0, Transition::C, det_c, 0.3).unwrap(),
            gaussian_pulse(area, width, delay, Transition::D, det_d, 1.1).unwrap(),
        ]).unwrap();
        let sys = LevelSystem::default();
        let rho0 = thermal_ground_state(5.0, 48.0).unwrap();
        let opts = EvolveOptions { emitter_detuning: 2.0, ..Default::default() };
        let a = evolve(&rho0, &sys, &tl, (-0.3, 0.4), &opts).unwrap();
        let b = evolve(&rho0, &sys, &tl.shifted(shift), (-0.3 + shift, 0.4 + shift), &opts).unwrap();
        let diff = a.final_state().matrix().add_scaled(-1.0, b.final_state().matrix()).max_abs();
        prop_assert!(diff < 1e-7, "{diff}");
    }
}

/// `exp(A)` for a small real matrix by scaling and squaring a Taylor series.
fn expm(a: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let norm: f64 = a
        .iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = (norm.max(1.0).log2().ceil() as i32 + 4).max(0);
    let s = 2f64.powi(-squarings);
    let mul = |x: &[[f64; 4]; 4], y: &[[f64; 4]; 4]| {
        let mut r = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                r[i][j] = (0..4).map(|k| x[i][k] * y[k][j]).sum();
            }
        }
        r
    };
    let scaled = a.map(|r| r.map(|x| x * s));
    let mut result = [[0.0; 4]; 4];
    let mut term = [[0.0; 4]; 4];
    for i in 0..4 {
        result[i][i] = 1.0;
        term[i][i] = 1.0;
    }
    for k in 1..30 {
        term = mul(&term, &scaled).map(|r| r.map(|x| x / k as f64));
        for i in 0..4 {
            for j in 0..4 {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = mul(&result, &result);
    }
    result
}

#[test]
#[allow(clippy::needless_range_loop)]
fn undriven_populations_follow_classical_master_equation() {
    let sys = system(1.7, 27.0, 5.0, 0.7);
    let rates = sys.rates();
    // dp_j/dt = Σ_i Γ_ij p_i − p_j Σ_i Γ_ji
    let mut gen = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                gen[j][i] += rates[i][j];
                gen[i][i] -= rates[i][j];
            }
        }
    }
    let p0 = [0.2, 0.1, 0.4, 0.3];
    let rho0 = DensityMatrix::from_populations(p0).unwrap();
    let times = [0.1, 0.7, 2.0, 5.0, 30.0];
    let opts = EvolveOptions {
        sample_times: times.to_vec(),
        stepping: Stepping::adaptive(1e-11),
        ..Default::default()
    };
    let traj = evolve(&rho0, &sys, &PulseTimeline::empty(), (0.0, 30.0), &opts).unwrap();
    for (t, state) in times.iter().zip(&traj.states) {
        let e = expm(&gen.map(|r| r.map(|x| x * t)));
        for j in 0..4 {
            let expected: f64 = (0..4).map(|i| e[j][i] * p0[i]).sum();
            approx::assert_abs_diff_eq!(state.population(j), expected, epsilon = 1e-8);
        }
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(state.coherence(i, j), C64::new(0.0, 0.0));
                }
            }
        }
    }
}

#[test]
fn thermal_state_is_stationary_without_drives() {
    let sys = LevelSystem::default();
    let rho0 = thermal_ground_state(5.0, 48.0).unwrap();
    let traj = evolve(
        &rho0,
        &sys,
        &PulseTimeline::empty(),
        (0.0, 200.0),
        &EvolveOptions::default(),
    )
    .unwrap();
    approx::assert_abs_diff_eq!(
        traj.final_state().population(1),
        rho0.population(1),
        epsilon = 1e-9
    );
}
