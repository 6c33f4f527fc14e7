//! Discretisation of the inhomogeneous line and ensemble averages.
//!
//! Emitters are independent, so the ensemble density matrix is the weighted
//! mean of single-emitter solutions at a set of detuning nodes drawn from a
//! Gaussian of the configured FWHM. Nodes are evaluated through an
//! [`Executor`] and reduced in node order.

use alloc::boxed::Box;
use alloc::vec::Vec;

// inherent std float methods shadow these when std is linked
#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::integrate::{evolve, EvolveOptions};
use crate::levels::LevelSystem;
use crate::linalg::CMatrix4;
use crate::pulses::PulseTimeline;
use crate::quadrature::gauss_hermite;
use crate::state::DensityMatrix;
use crate::FWHM_PER_SIGMA;

/// Largest node count accepted for grid and Monte-Carlo sampling.
pub const MAX_NODES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    /// Gauss–Hermite rule; exact for detuning-polynomial observables up to
    /// degree `2n − 1`.
    GaussHermite,
    /// Evenly spaced nodes over `±span_sigmas·σ`, weighted by the Gaussian.
    Uniform { span_sigmas: f64 },
    /// Independent Gaussian draws with equal weights.
    MonteCarlo { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    /// FWHM of the inhomogeneous distribution (GHz); zero gives a single
    /// emitter at zero detuning.
    pub fwhm: f64,
    pub n_emitters: usize,
    pub sampling: Sampling,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            fwhm: 10.0,
            n_emitters: 10,
            sampling: Sampling::GaussHermite,
        }
    }
}

impl EnsembleSpec {
    pub fn homogeneous() -> Self {
        EnsembleSpec {
            fwhm: 0.0,
            n_emitters: 1,
            sampling: Sampling::GaussHermite,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.fwhm / FWHM_PER_SIGMA
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetuningNode {
    /// GHz.
    pub detuning: f64,
    pub weight: f64,
}

fn standard_normal_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    // Box–Muller on two uniforms in (0, 1]
    let uniform =
        |rng: &mut ChaCha8Rng| ((rng.next_u64() >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
    let u1 = uniform(rng);
    let u2 = uniform(rng);
    let r = (-2.0 * u1.ln()).sqrt();
    let a = core::f64::consts::TAU * u2;
    (r * a.cos(), r * a.sin())
}

/// Detuning nodes and normalised weights for `spec`, ascending in detuning
/// except for Monte-Carlo sampling, which keeps draw order.
pub fn detuning_nodes(spec: &EnsembleSpec) -> Result<Vec<DetuningNode>> {
    if !(spec.fwhm >= 0.0 && spec.fwhm.is_finite()) {
        return Err(Error::invalid("fwhm", "must be finite and nonnegative"));
    }
    if spec.n_emitters == 0 {
        return Err(Error::invalid("n_emitters", "must be at least 1"));
    }
    if spec.fwhm == 0.0 {
        return Ok(alloc::vec![DetuningNode {
            detuning: 0.0,
            weight: 1.0
        }]);
    }
    let sigma = spec.sigma();
    let n = spec.n_emitters;
    match spec.sampling {
        Sampling::GaussHermite => {
            let (x, w) = gauss_hermite(n)?;
            Ok(x.into_iter()
                .zip(w)
                .map(|(x, weight)| DetuningNode {
                    detuning: x * sigma,
                    weight,
                })
                .collect())
        }
        Sampling::Uniform { span_sigmas } => {
            if n > MAX_NODES {
                return Err(Error::invalid(
                    "n_emitters",
                    alloc::format!("at most {MAX_NODES}"),
                ));
            }
            if !(span_sigmas > 0.0 && span_sigmas.is_finite()) {
                return Err(Error::invalid("span_sigmas", "must be positive"));
            }
            let xs: Vec<f64> = if n == 1 {
                alloc::vec![0.0]
            } else {
                (0..n)
                    .map(|k| span_sigmas * (2.0 * k as f64 / (n - 1) as f64 - 1.0))
                    .collect()
            };
            let raw: Vec<f64> = xs.iter().map(|x| (-0.5 * x * x).exp()).collect();
            let total: f64 = raw.iter().sum();
            Ok(xs
                .iter()
                .zip(raw)
                .map(|(x, r)| DetuningNode {
                    detuning: x * sigma,
                    weight: r / total,
                })
                .collect())
        }
        Sampling::MonteCarlo { seed } => {
            if n > MAX_NODES {
                return Err(Error::invalid(
                    "n_emitters",
                    alloc::format!("at most {MAX_NODES}"),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut nodes = Vec::with_capacity(n);
            while nodes.len() < n {
                let (a, b) = standard_normal_pair(&mut rng);
                for x in [a, b].into_iter().take(n - nodes.len()) {
                    nodes.push(DetuningNode {
                        detuning: x * sigma,
                        weight: 1.0 / n as f64,
                    });
                }
            }
            Ok(nodes)
        }
    }
}

/// Evaluates `f` at every node and returns the per-node results in node
/// order. The first failing node (lowest index) is reported.
pub fn map_nodes<E, T, F>(exec: &E, nodes: &[DetuningNode], f: F) -> Result<Vec<T>>
where
    E: Executor,
    T: Send,
    F: Fn(f64) -> Result<T> + Sync,
{
    exec.map_indexed(nodes.len(), |k| f(nodes[k].detuning))
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::Node {
                index,
                detuning: nodes[index].detuning,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Weighted mean of scalars, summed in node order.
pub fn weighted_mean(nodes: &[DetuningNode], values: &[f64]) -> f64 {
    nodes.iter().zip(values).map(|(n, v)| n.weight * v).sum()
}

/// Weighted mean of per-node state sequences of equal length.
pub fn average_states(
    nodes: &[DetuningNode],
    per_node: &[Vec<DensityMatrix>],
) -> Vec<DensityMatrix> {
    let len = per_node.first().map_or(0, Vec::len);
    (0..len)
        .map(|i| {
            let mut acc = CMatrix4::zeros();
            for (node, states) in nodes.iter().zip(per_node) {
                acc = acc.add_scaled(node.weight, states[i].matrix());
            }
            DensityMatrix::from_matrix(acc)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub nodes: Vec<DetuningNode>,
    /// Accepted integrator steps summed over nodes.
    pub accepted_steps: usize,
}

/// Ensemble-averaged ρ(t). The `emitter_detuning` in `opts` is replaced by
/// each node's detuning.
pub fn ensemble_run<E: Executor>(
    exec: &E,
    rho0: &DensityMatrix,
    system: &LevelSystem,
    timeline: &PulseTimeline,
    t_span: (f64, f64),
    opts: &EvolveOptions,
    spec: &EnsembleSpec,
) -> Result<EnsembleTrajectory> {
    let nodes = detuning_nodes(spec)?;
    let runs = map_nodes(exec, &nodes, |detuning| {
        let o = EvolveOptions {
            emitter_detuning: detuning,
            ..opts.clone()
        };
        evolve(rho0, system, timeline, t_span, &o)
    })?;
    let times = runs[0].times.clone();
    let accepted_steps = runs.iter().map(|r| r.accepted_steps).sum();
    let per_node: Vec<Vec<DensityMatrix>> = runs.into_iter().map(|r| r.states).collect();
    Ok(EnsembleTrajectory {
        times,
        states: average_states(&nodes, &per_node),
        nodes,
        accepted_steps,
    })
}
