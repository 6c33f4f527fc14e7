//! Least-squares fitting: a small Levenberg–Marquardt solver, decay-envelope
//! models and multi-Gaussian line fits.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

// inherent std float methods shadow these when std is linked
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, spd_inverse};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative decrease of the residual sum of squares falls
    /// below this.
    pub rss_tol: f64,
    /// Stop when the relative parameter update falls below this.
    pub step_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 500,
            rss_tol: 1e-15,
            step_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmSolution {
    pub params: Vec<f64>,
    /// Row-major parameter covariance, `(JᵀJ)⁻¹·RSS/(m − n)`; `None` when
    /// singular or when there are no spare degrees of freedom.
    pub covariance: Option<Vec<f64>>,
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LmSolution {
    pub fn std_error(&self, k: usize) -> f64 {
        let n = self.params.len();
        self.covariance
            .as_ref()
            .map_or(f64::INFINITY, |c| c[k * n + k].max(0.0).sqrt())
    }
}

fn residuals<M: Fn(f64, &[f64]) -> f64>(
    model: &M,
    xs: &[f64],
    ys: &[f64],
    p: &[f64],
    out: &mut [f64],
) {
    for ((r, &x), &y) in out.iter_mut().zip(xs).zip(ys) {
        *r = y - model(x, p);
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|r| r * r).sum()
}

/// Jacobian of the model (not the residual), central differences,
/// column-major: `jac[k*m + i] = ∂f(xᵢ)/∂p_k`.
fn jacobian<M: Fn(f64, &[f64]) -> f64>(model: &M, xs: &[f64], p: &[f64], jac: &mut [f64]) {
    let m = xs.len();
    let mut q = p.to_vec();
    for k in 0..p.len() {
        let h = 1e-6 * p[k].abs().max(1e-6);
        q[k] = p[k] + h;
        let up: Vec<f64> = xs.iter().map(|&x| model(x, &q)).collect();
        q[k] = p[k] - h;
        for (i, &x) in xs.iter().enumerate() {
            jac[k * m + i] = (up[i] - model(x, &q)) / (2.0 * h);
        }
        q[k] = p[k];
    }
}

/// Minimises `Σ (yᵢ − model(xᵢ, p))²` from `p0`.
pub fn levenberg_marquardt<M>(
    model: M,
    xs: &[f64],
    ys: &[f64],
    p0: &[f64],
    opts: &LmOptions,
) -> LmSolution
where
    M: Fn(f64, &[f64]) -> f64,
{
    let m = xs.len();
    let n = p0.len();
    let mut p = p0.to_vec();
    let mut r = vec![0.0; m];
    residuals(&model, xs, ys, &p, &mut r);
    let mut rss = sum_sq(&r);
    let mut jac = vec![0.0; n * m];
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let mut trial = vec![0.0; m];
    while iterations < opts.max_iterations && rss.is_finite() {
        iterations += 1;
        jacobian(&model, xs, &p, &mut jac);
        let mut jtj = vec![0.0; n * n];
        let mut jtr = vec![0.0; n];
        for a in 0..n {
            let ja = &jac[a * m..(a + 1) * m];
            jtr[a] = ja.iter().zip(&r).map(|(j, r)| j * r).sum();
            for b in 0..=a {
                let jb = &jac[b * m..(b + 1) * m];
                let v: f64 = ja.iter().zip(jb).map(|(x, y)| x * y).sum();
                jtj[a * n + b] = v;
                jtj[b * n + a] = v;
            }
        }
        if jtr.iter().all(|g| *g == 0.0) {
            converged = true;
            break;
        }
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[k * n + k] += lambda * jtj[k * n + k].max(1e-300);
            }
            let mut step = jtr.clone();
            if cholesky_solve(&a, &mut step, n).is_none() {
                lambda *= 10.0;
                continue;
            }
            let q: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
            residuals(&model, xs, ys, &q, &mut trial);
            let new_rss = sum_sq(&trial);
            if new_rss.is_finite() && new_rss <= rss {
                let rel_rss = (rss - new_rss) / rss.max(f64::MIN_POSITIVE);
                let rel_step = step
                    .iter()
                    .zip(&q)
                    .map(|(s, v)| s.abs() / v.abs().max(1e-12))
                    .fold(0.0, f64::max);
                p = q;
                core::mem::swap(&mut r, &mut trial);
                rss = new_rss;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel_rss < opts.rss_tol || rel_step < opts.step_tol || rss == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no downhill step at any damping: at a minimum to working precision
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    jacobian(&model, xs, &p, &mut jac);
    let mut jtj = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            jtj[a * n + b] = (0..m).map(|i| jac[a * m + i] * jac[b * m + i]).sum();
        }
    }
    let covariance = if m > n {
        spd_inverse(&jtj, n).map(|inv| {
            let s2 = rss / (m - n) as f64;
            inv.into_iter().map(|v| v * s2).collect()
        })
    } else {
        None
    };
    LmSolution {
        params: p,
        covariance,
        rss,
        iterations,
        converged,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecayModel {
    /// `A·exp(−(t/T)²)`.
    Gaussian,
    /// `A·exp(−t/T)`.
    Exponential,
    /// `A·exp(−(t/T_g)² − t/T_e)`.
    GaussianTimesExponential,
}

impl DecayModel {
    pub fn name(self) -> &'static str {
        match self {
            DecayModel::Gaussian => "gaussian-decay",
            DecayModel::Exponential => "exponential-decay",
            DecayModel::GaussianTimesExponential => "gaussian-times-exponential",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "gaussian-decay" => Some(DecayModel::Gaussian),
            "exponential-decay" => Some(DecayModel::Exponential),
            "gaussian-times-exponential" => Some(DecayModel::GaussianTimesExponential),
            _ => None,
        }
    }
}

impl fmt::Display for DecayModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    NotConverged,
    /// The data carry no decay (or the fit ran to an infinite time constant).
    NonIdentifiable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub model: DecayModel,
    /// Headline constant (ns): `T`, or the Gaussian `T_g` for the mixed model.
    pub time_constant: f64,
    /// One standard error of `time_constant` (ns).
    pub uncertainty: f64,
    pub amplitude: f64,
    /// Exponential component `T_e` of the mixed model (ns); infinite otherwise.
    pub exponential_time: f64,
    /// Time at which the fitted envelope falls to `A/e` (ns).
    pub one_over_e_time: f64,
    /// `sqrt(RSS / Σy²)`; infinite when flagged.
    pub residual_norm: f64,
    pub status: FitStatus,
}

impl DecayFit {
    pub fn is_flagged(&self) -> bool {
        self.status != FitStatus::Converged
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let g = if self.model == DecayModel::Exponential {
            0.0
        } else {
            self.time_constant.powi(-2)
        };
        let k = match self.model {
            DecayModel::Gaussian => 0.0,
            DecayModel::Exponential => 1.0 / self.time_constant,
            DecayModel::GaussianTimesExponential => 1.0 / self.exponential_time,
        };
        self.amplitude * (-g * t * t - k * t).exp()
    }
}

fn decay_value(model: DecayModel, t: f64, p: &[f64]) -> f64 {
    // rates enter squared so that they stay nonnegative
    match model {
        DecayModel::Gaussian => p[0] * (-(p[1] * p[1]) * t * t).exp(),
        DecayModel::Exponential => p[0] * (-(p[1] * p[1]) * t).exp(),
        DecayModel::GaussianTimesExponential => {
            p[0] * (-(p[1] * p[1]) * t * t - p[2] * p[2] * t).exp()
        }
    }
}

/// Weighted linear least squares of `ln y` on the model's basis, used as the
/// deterministic starting point.
fn log_linear_prefit(model: DecayModel, ts: &[f64], ys: &[f64]) -> Vec<f64> {
    let basis = |t: f64| -> Vec<f64> {
        match model {
            DecayModel::Gaussian => vec![1.0, -t * t],
            DecayModel::Exponential => vec![1.0, -t],
            DecayModel::GaussianTimesExponential => vec![1.0, -t * t, -t],
        }
    };
    let n = match model {
        DecayModel::GaussianTimesExponential => 3,
        _ => 2,
    };
    let peak = ys.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for (&t, &y) in ts.iter().zip(ys) {
        if y <= 1e-6 * peak {
            continue;
        }
        // weight y² compensates the noise amplification of the logarithm
        let w = y * y;
        let phi = basis(t);
        for i in 0..n {
            b[i] += w * phi[i] * y.ln();
            for j in 0..n {
                a[i * n + j] += w * phi[i] * phi[j];
            }
        }
    }
    let coeffs = if cholesky_solve(&a, &mut b, n).is_some() {
        b
    } else {
        let mut c = vec![0.0; n];
        c[0] = peak.max(f64::MIN_POSITIVE).ln();
        c
    };
    let span = ts
        .iter()
        .fold(0.0f64, |m, t| m.max(t.abs()))
        .max(f64::MIN_POSITIVE);
    // floor keeps the square-root parametrisation off its stationary point
    let g_floor = 1e-4 / (span * span);
    let k_floor = 1e-4 / span;
    let mut p = vec![coeffs[0].exp()];
    match model {
        DecayModel::Gaussian => p.push(coeffs[1].max(g_floor).sqrt()),
        DecayModel::Exponential => p.push(coeffs[1].max(k_floor).sqrt()),
        DecayModel::GaussianTimesExponential => {
            p.push(coeffs[1].max(g_floor).sqrt());
            p.push(coeffs[2].max(k_floor).sqrt());
        }
    }
    p
}

/// Fits a decay envelope to `(t, y)` samples.
pub fn fit_decay(ts: &[f64], ys: &[f64], model: DecayModel) -> Result<DecayFit> {
    if ts.len() != ys.len() {
        return Err(Error::invalid(
            "series",
            "time and value columns differ in length",
        ));
    }
    if ts.len() < 5 {
        return Err(Error::invalid(
            "series",
            "a decay fit needs at least 5 points",
        ));
    }
    if ts.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("series", "contains non-finite values"));
    }
    if !ys.iter().any(|&y| y > 0.0) {
        return Err(Error::invalid("series", "needs a positive value"));
    }
    let p0 = log_linear_prefit(model, ts, ys);
    let sol = levenberg_marquardt(
        |t, p| decay_value(model, t, p),
        ts,
        ys,
        &p0,
        &LmOptions::default(),
    );
    let p = &sol.params;
    let sum_y2: f64 = ys.iter().map(|y| y * y).sum();
    let mut fit = DecayFit {
        model,
        time_constant: f64::INFINITY,
        uncertainty: f64::INFINITY,
        amplitude: p[0],
        exponential_time: f64::INFINITY,
        one_over_e_time: f64::INFINITY,
        residual_norm: (sol.rss / sum_y2).sqrt(),
        status: if sol.converged {
            FitStatus::Converged
        } else {
            FitStatus::NotConverged
        },
    };
    // T = 1/a (Gaussian) or 1/a² (exponential); uncertainties by the delta method
    let a = p[1].abs();
    let sa = sol.std_error(1);
    let (g, k) = match model {
        DecayModel::Gaussian => {
            fit.time_constant = 1.0 / a;
            fit.uncertainty = sa / (a * a);
            (a * a, 0.0)
        }
        DecayModel::Exponential => {
            fit.time_constant = 1.0 / (a * a);
            fit.uncertainty = 2.0 * sa / (a * a * a);
            (0.0, a * a)
        }
        DecayModel::GaussianTimesExponential => {
            let b = p[2].abs();
            fit.time_constant = 1.0 / a;
            fit.uncertainty = sa / (a * a);
            fit.exponential_time = 1.0 / (b * b);
            (a * a, b * b)
        }
    };
    fit.one_over_e_time = if g > 0.0 {
        (-k + (k * k + 4.0 * g).sqrt()) / (2.0 * g)
    } else if k > 0.0 {
        1.0 / k
    } else {
        f64::INFINITY
    };
    // the decay must be resolved by the data: a time constant beyond a
    // thousand sampling spans is indistinguishable from no decay
    let span = ts.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if !(fit.one_over_e_time < 1e3 * span) || !(fit.amplitude > 0.0) {
        fit.status = FitStatus::NonIdentifiable;
    }
    if fit.status != FitStatus::Converged {
        fit.residual_norm = f64::INFINITY;
    }
    Ok(fit)
}

/// One Gaussian line `amplitude·exp(−4 ln2 (f − center)²/fwhm²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralLine {
    /// GHz.
    pub center: f64,
    /// GHz.
    pub fwhm: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFit {
    /// Ascending in centre frequency.
    pub lines: Vec<SpectralLine>,
    pub requested_lines: usize,
    /// Set when fewer peaks than requested were detected, or the fit failed.
    pub flagged: bool,
    pub converged: bool,
    pub residual_norm: f64,
}

fn gaussian_sum(f: f64, p: &[f64]) -> f64 {
    p.chunks_exact(3)
        .map(|c| {
            let x = (f - c[1]) / c[2];
            c[0] * (-4.0 * core::f64::consts::LN_2 * x * x).exp()
        })
        .sum()
}

/// Local maxima of `ys`, highest first, at most `n`.
fn detect_peaks(ys: &[f64], n: usize) -> Vec<usize> {
    let mut peaks: Vec<usize> = (1..ys.len().saturating_sub(1))
        .filter(|&i| ys[i] > ys[i - 1] && ys[i] >= ys[i + 1] && ys[i] > 0.0)
        .collect();
    peaks.sort_by(|&a, &b| ys[b].total_cmp(&ys[a]).then(a.cmp(&b)));
    peaks.truncate(n);
    peaks
}

fn half_width_estimate(fs: &[f64], ys: &[f64], i: usize) -> f64 {
    let half = 0.5 * ys[i];
    let mut lo = i;
    while lo > 0 && ys[lo] > half {
        lo -= 1;
    }
    let mut hi = i;
    while hi + 1 < ys.len() && ys[hi] > half {
        hi += 1;
    }
    let spacing = (fs[fs.len() - 1] - fs[0]) / (fs.len() - 1) as f64;
    (fs[hi] - fs[lo]).max(2.0 * spacing)
}

/// Fits `n_lines` Gaussian lines to a spectrum, starting from its highest
/// local maxima.
pub fn fit_ple_spectrum(freqs: &[f64], intensity: &[f64], n_lines: usize) -> Result<SpectrumFit> {
    if n_lines == 0 {
        return Err(Error::invalid("n_lines", "must be at least 1"));
    }
    if freqs.len() != intensity.len() || freqs.len() < 3 {
        return Err(Error::invalid(
            "spectrum",
            "needs at least 3 points in matching columns",
        ));
    }
    if freqs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(
            "spectrum",
            "frequencies must be strictly ascending",
        ));
    }
    if intensity.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(
            "spectrum",
            "contains non-finite intensities",
        ));
    }
    let peaks = detect_peaks(intensity, n_lines);
    let mut p0 = Vec::with_capacity(3 * peaks.len());
    for &i in &peaks {
        p0.extend([
            intensity[i],
            freqs[i],
            half_width_estimate(freqs, intensity, i),
        ]);
    }
    let sum_y2: f64 = intensity.iter().map(|y| y * y).sum();
    if peaks.is_empty() {
        return Ok(SpectrumFit {
            lines: Vec::new(),
            requested_lines: n_lines,
            flagged: true,
            converged: false,
            residual_norm: f64::INFINITY,
        });
    }
    let sol = levenberg_marquardt(gaussian_sum, freqs, intensity, &p0, &LmOptions::default());
    let mut lines: Vec<SpectralLine> = sol
        .params
        .chunks_exact(3)
        .map(|c| SpectralLine {
            center: c[1],
            fwhm: c[2].abs(),
            amplitude: c[0],
        })
        .collect();
    lines.sort_by(|a, b| a.center.total_cmp(&b.center));
    let sane = lines.iter().all(|l| l.amplitude >= 0.0 && l.fwhm > 0.0);
    let converged = sol.converged && sane;
    Ok(SpectrumFit {
        lines,
        requested_lines: n_lines,
        flagged: peaks.len() < n_lines || !converged,
        converged,
        residual_norm: if converged {
            (sol.rss / sum_y2).sqrt()
        } else {
            f64::INFINITY
        },
    })
}
