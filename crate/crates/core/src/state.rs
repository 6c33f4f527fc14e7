use core::fmt;

use crate::error::{Error, Result};
use crate::levels::boltzmann_ratio;
use crate::linalg::{CMatrix4, C64};

/// Density matrix of a single emitter class.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DensityMatrix(CMatrix4);

/// Tolerances a state must satisfy after every accepted integrator step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateTolerance {
    pub trace: f64,
    pub hermiticity: f64,
    pub positivity: f64,
}

impl Default for StateTolerance {
    fn default() -> Self {
        StateTolerance {
            trace: 1e-9,
            hermiticity: 1e-10,
            positivity: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDiagnostics {
    /// `|Tr ρ − 1|`.
    pub trace_error: f64,
    /// `max |ρᵢⱼ − conj(ρⱼᵢ)|`.
    pub hermiticity_error: f64,
    /// Smallest eigenvalue of the Hermitian part of ρ.
    pub min_eigenvalue: f64,
}

impl StateDiagnostics {
    pub fn within(&self, tol: &StateTolerance) -> bool {
        self.trace_error <= tol.trace
            && self.hermiticity_error <= tol.hermiticity
            && self.min_eigenvalue >= -tol.positivity
    }
}

impl fmt::Display for StateDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "trace error {:.3e}, hermiticity error {:.3e}, min eigenvalue {:.3e}",
            self.trace_error, self.hermiticity_error, self.min_eigenvalue
        )
    }
}

impl DensityMatrix {
    /// Wraps a raw matrix without checking it; use [`validate_state`] to
    /// inspect the result.
    pub fn from_matrix(m: CMatrix4) -> Self {
        DensityMatrix(m)
    }

    /// The pure state `|level⟩⟨level|` (zero-based level index).
    pub fn pure(level: usize) -> Self {
        let mut d = [0.0; 4];
        d[level] = 1.0;
        DensityMatrix(CMatrix4::from_diagonal(d))
    }

    pub fn from_populations(p: [f64; 4]) -> Result<Self> {
        if p.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("populations", "must be nonnegative"));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("populations", "must sum to one"));
        }
        Ok(DensityMatrix(CMatrix4::from_diagonal(p)))
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(CMatrix4::from_diagonal([0.25; 4]))
    }

    pub fn matrix(&self) -> &CMatrix4 {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix4 {
        self.0
    }

    pub fn population(&self, level: usize) -> f64 {
        self.0[(level, level)].re
    }

    pub fn populations(&self) -> [f64; 4] {
        core::array::from_fn(|i| self.population(i))
    }

    pub fn coherence(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn excited_population(&self) -> f64 {
        self.population(2) + self.population(3)
    }

    pub fn diagnostics(&self) -> StateDiagnostics {
        validate_state(self)
    }
}

/// Trace, Hermiticity and positivity diagnostics of `rho`. Never mutates.
pub fn validate_state(rho: &DensityMatrix) -> StateDiagnostics {
    let m = rho.matrix();
    StateDiagnostics {
        trace_error: (m.trace() - C64::new(1.0, 0.0)).norm(),
        hermiticity_error: m.hermiticity_error(),
        min_eigenvalue: m.hermitian_eigenvalues()[0],
    }
}

/// Undriven equilibrium of the ground doublet: diagonal, excited levels empty,
/// `ρ₂₂/ρ₁₁ = exp(−h·δg/(k_B·T))`.
pub fn thermal_ground_state(temperature: f64, ground_splitting: f64) -> Result<DensityMatrix> {
    if !(temperature > 0.0) {
        return Err(Error::invalid("temperature", "must be positive"));
    }
    let b = boltzmann_ratio(temperature, ground_splitting);
    let p2 = b / (1.0 + b);
    Ok(DensityMatrix(CMatrix4::from_diagonal([
        1.0 - p2,
        p2,
        0.0,
        0.0,
    ])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagnostics_of_reference_states() {
        let d = validate_state(&DensityMatrix::maximally_mixed());
        assert!(d.trace_error < 1e-15 && d.hermiticity_error == 0.0);
        assert!((d.min_eigenvalue - 0.25).abs() < 1e-14);

        let d = validate_state(&DensityMatrix::pure(0));
        assert!(d.trace_error == 0.0 && d.hermiticity_error == 0.0);
        assert!(d.min_eigenvalue.abs() < 1e-15);
    }

    #[test]
    fn hermiticity_error_is_max_deviation() {
        let mut m = *DensityMatrix::maximally_mixed().matrix();
        m[(0, 1)] = C64::new(0.1, 0.02);
        m[(1, 0)] = C64::new(0.1, 0.05); // conj would be 0.1 − 0.02i
        m[(2, 3)] = C64::new(0.0, 0.01);
        m[(3, 2)] = C64::new(0.0, -0.01);
        let d = validate_state(&DensityMatrix::from_matrix(m));
        let want = (C64::new(0.1, 0.02) - C64::new(0.1, 0.05).conj()).norm();
        assert!((d.hermiticity_error - want).abs() < 1e-16);
        assert!((d.hermiticity_error - 0.07).abs() < 1e-15);
    }

    #[test]
    fn thermal_limits() {
        let hot = thermal_ground_state(1e6, 48.0).unwrap();
        assert!((hot.population(0) - 0.5).abs() < 1e-6 && (hot.population(1) - 0.5).abs() < 1e-6);
        let cold = thermal_ground_state(1e-3, 48.0).unwrap();
        assert!(cold.population(1) < 1e-6);
        assert!(thermal_ground_state(0.0, 48.0).is_err());
        assert!(thermal_ground_state(-1.0, 48.0).is_err());
    }

    #[test]
    fn thermal_population_at_five_kelvin() {
        let rho = thermal_ground_state(5.0, 48.0).unwrap();
        // ratio exp(−0.047992·48/5)
        let b = (-0.047_992_430_73f64 * 48.0 / 5.0).exp();
        assert!((rho.population(1) - b / (1.0 + b)).abs() < 1e-15);
        assert!((0.37..=0.39).contains(&rho.population(1)));
        assert_eq!(rho.excited_population(), 0.0);
    }
}
