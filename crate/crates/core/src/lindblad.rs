//! Lindblad generator with population-transfer and pure-dephasing rates.
//!
//! ```text
//! dρ/dt = −i[H, ρ] + Σᵢⱼ Γᵢⱼ (ρᵢᵢ |j⟩⟨j| − ½{|i⟩⟨i|, ρ})
//! ```
//!
//! With `Gᵢ = Σⱼ Γᵢⱼ` (the diagonal included) the dissipator damps every
//! element as `−½(G_a + G_b) ρ_ab` and feeds populations
//! `+Σᵢ Γᵢⱼ ρᵢᵢ` into `ρⱼⱼ`. The generator is trace preserving and maps
//! Hermitian matrices to Hermitian matrices.

use core::f64::consts::TAU;

use crate::levels::EXCITED;
use crate::linalg::{CMatrix4, C64};

/// Rate matrix with its row sums cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipator {
    rates: [[f64; 4]; 4],
    outflow: [f64; 4],
}

impl Dissipator {
    pub fn new(rates: [[f64; 4]; 4]) -> Self {
        let outflow = core::array::from_fn(|i| rates[i].iter().sum());
        Dissipator { rates, outflow }
    }

    /// Adds excitation-induced pure dephasing of linewidth `linewidth` (GHz)
    /// to both excited levels; optical coherences then decay at an extra
    /// `π·linewidth` per ns.
    pub fn with_excited_dephasing(&self, linewidth: f64) -> Self {
        let mut rates = self.rates;
        for e in EXCITED {
            rates[e][e] += TAU * linewidth;
        }
        Dissipator::new(rates)
    }

    pub fn rates(&self) -> &[[f64; 4]; 4] {
        &self.rates
    }

    /// Adds the dissipator applied to `rho` into `out`.
    pub fn apply(&self, rho: &CMatrix4, out: &mut CMatrix4) {
        for a in 0..4 {
            for b in 0..4 {
                out.0[a][b] -= rho.0[a][b] * (0.5 * (self.outflow[a] + self.outflow[b]));
            }
        }
        for j in 0..4 {
            let gain: f64 = (0..4).map(|i| self.rates[i][j] * rho.0[i][i].re).sum();
            out.0[j][j] += C64::new(gain, 0.0);
        }
    }
}

/// `dρ/dt` for Hamiltonian `h` (rad/ns) and rate matrix `rates` (1/ns).
pub fn lindblad_rhs(h: &CMatrix4, rates: &[[f64; 4]; 4], rho: &CMatrix4) -> CMatrix4 {
    rhs_with(h, &Dissipator::new(*rates), rho)
}

pub(crate) fn rhs_with(h: &CMatrix4, dissipator: &Dissipator, rho: &CMatrix4) -> CMatrix4 {
    // −i(Hρ − ρH)
    let comm = h.commutator(rho);
    let mut out = CMatrix4::zeros();
    for (o, c) in out.0.iter_mut().flatten().zip(comm.0.iter().flatten()) {
        *o = C64::new(c.im, -c.re);
    }
    dissipator.apply(rho, &mut out);
    out
}
