use dlambda_core::fit::fit_ple_spectrum;

const ABUNDANCE: [f64; 3] = [92.2, 4.7, 3.1];
const ISOTOPE_SHIFT: f64 = -85.0;

fn gaussian(f: f64, center: f64, fwhm: f64) -> f64 {
    (-4.0 * std::f64::consts::LN_2 * ((f - center) / fwhm).powi(2)).exp()
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

#[test]
fn twelve_line_spectrum_recovers_centres() {
    // four transitions (C, D, B, A) for each of three isotopes
    let transitions = [(0.0, 1.0), (-48.0, 0.6), (211.0, 0.5), (259.0, 0.8)];
    let mut lines = Vec::new();
    for (iso, abundance) in ABUNDANCE.iter().enumerate() {
        for &(pos, strength) in &transitions {
            lines.push((pos + ISOTOPE_SHIFT * iso as f64, strength * abundance));
        }
    }
    let fs = grid(-300.0, 320.0, 3101);
    let ys: Vec<f64> = fs
        .iter()
        .map(|&f| lines.iter().map(|&(c, a)| a * gaussian(f, c, 10.0)).sum())
        .collect();
    let fit = fit_ple_spectrum(&fs, &ys, 12).unwrap();
    assert!(!fit.flagged && fit.converged);
    let mut centres: Vec<f64> = lines.iter().map(|l| l.0).collect();
    centres.sort_by(f64::total_cmp);
    for (line, c) in fit.lines.iter().zip(&centres) {
        assert!((line.center - c).abs() < 0.2, "{} vs {c}", line.center);
        assert!((line.fwhm - 10.0).abs() < 0.1);
    }
}

#[test]
fn isotope_triplet_ratios_match_abundances() {
    let fs = grid(-250.0, 80.0, 1201);
    let ys: Vec<f64> = fs
        .iter()
        .map(|&f| {
            ABUNDANCE
                .iter()
                .enumerate()
                .map(|(k, a)| a * gaussian(f, ISOTOPE_SHIFT * k as f64, 10.0))
                .sum()
        })
        .collect();
    let fit = fit_ple_spectrum(&fs, &ys, 3).unwrap();
    assert!(!fit.flagged);
    // ascending centre: heaviest isotope first
    let amps: Vec<f64> = fit.lines.iter().rev().map(|l| l.amplitude).collect();
    for k in 1..3 {
        let ratio = amps[k] / amps[0];
        let expected = ABUNDANCE[k] / ABUNDANCE[0];
        assert!(
            (ratio / expected - 1.0).abs() < 0.05,
            "{ratio} vs {expected}"
        );
    }
}

#[test]
fn single_line_and_missing_peaks() {
    let fs = grid(-50.0, 50.0, 401);
    let ys: Vec<f64> = fs.iter().map(|&f| 3.0 * gaussian(f, 4.0, 12.0)).collect();
    let fit = fit_ple_spectrum(&fs, &ys, 1).unwrap();
    let l = fit.lines[0];
    assert!(
        (l.center - 4.0).abs() < 1e-3
            && (l.fwhm / 12.0 - 1.0).abs() < 1e-3
            && (l.amplitude / 3.0 - 1.0).abs() < 1e-3
    );
    // asking for more lines than are present flags the fit but still fits one
    let fit = fit_ple_spectrum(&fs, &ys, 3).unwrap();
    assert!(fit.flagged);
    assert_eq!(fit.lines.len(), 1);
}
