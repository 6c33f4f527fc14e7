//! The four orbital levels, their optical transitions and the Lindblad rates.
//!
//! Levels are numbered 1..4 in physics notation and indexed 0..3 in code:
//! `|1⟩`, `|2⟩` are the lower and upper ground orbitals (split by
//! `ground_splitting`), `|3⟩`, `|4⟩` the lower and upper excited orbitals
//! (split by `excited_splitting`).

use core::fmt;
use core::str::FromStr;

// inherent std float methods shadow these when std is linked
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::H_OVER_KB;

pub const GROUND: [usize; 2] = [0, 1];
pub const EXCITED: [usize; 2] = [2, 3];

pub fn is_excited(level: usize) -> bool {
    level >= 2
}

/// One of the four optical lines of the double-Λ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Transition {
    /// `|1⟩ ↔ |4⟩`, highest energy line.
    A,
    /// `|2⟩ ↔ |4⟩`.
    B,
    /// `|1⟩ ↔ |3⟩`.
    C,
    /// `|2⟩ ↔ |3⟩`, lowest energy line.
    D,
}

impl Transition {
    pub const ALL: [Transition; 4] = [Transition::A, Transition::B, Transition::C, Transition::D];

    /// Zero-based `(ground, excited)` level indices.
    pub const fn levels(self) -> (usize, usize) {
        match self {
            Transition::A => (0, 3),
            Transition::B => (1, 3),
            Transition::C => (0, 2),
            Transition::D => (1, 2),
        }
    }

    pub const fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Transition::A => "A",
            Transition::B => "B",
            Transition::C => "C",
            Transition::D => "D",
        };
        f.write_str(s)
    }
}

impl FromStr for Transition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Transition::A),
            "B" | "b" => Ok(Transition::B),
            "C" | "c" => Ok(Transition::C),
            "D" | "d" => Ok(Transition::D),
            _ => Err(Error::invalid(
                "transition",
                alloc::format!("unknown line {s:?}"),
            )),
        }
    }
}

/// Physical inputs from which the default rate matrix is built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConfig {
    /// Radiative lifetime of each excited level, split equally between its
    /// two optical decay channels (ns).
    pub excited_lifetime: f64,
    /// Orbital relaxation time of the ground doublet (ns).
    pub ground_t1: f64,
    /// Temperature setting the ground-doublet detailed balance (K).
    pub temperature: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            excited_lifetime: 1.7,
            ground_t1: 27.0,
            temperature: 5.0,
        }
    }
}

/// Energy structure and incoherent rates of one emitter.
///
/// `rates[i][j]` is Γᵢⱼ in 1/ns: for `i != j` the population transfer rate
/// from level `i` to level `j`, for `i == j` the pure dephasing rate of level
/// `i`, exactly as they enter the Lindblad generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSystem {
    ground_splitting: f64,
    excited_splitting: f64,
    rates: [[f64; 4]; 4],
}

impl Default for LevelSystem {
    fn default() -> Self {
        Self::with_rate_config(&RateConfig::default()).expect("default rates are valid")
    }
}

impl LevelSystem {
    pub const DEFAULT_GROUND_SPLITTING: f64 = 48.0;
    pub const DEFAULT_EXCITED_SPLITTING: f64 = 259.0;

    pub fn new(
        ground_splitting: f64,
        excited_splitting: f64,
        rates: [[f64; 4]; 4],
    ) -> Result<Self> {
        if !(ground_splitting > 0.0 && ground_splitting.is_finite()) {
            return Err(Error::invalid(
                "ground_splitting",
                "must be positive and finite",
            ));
        }
        if !(excited_splitting > 0.0 && excited_splitting.is_finite()) {
            return Err(Error::invalid(
                "excited_splitting",
                "must be positive and finite",
            ));
        }
        for (i, row) in rates.iter().enumerate() {
            for (j, &r) in row.iter().enumerate() {
                if !(r >= 0.0 && r.is_finite()) {
                    return Err(Error::invalid(
                        "rates",
                        alloc::format!(
                            "Γ[{}][{}] = {r} is not a finite nonnegative rate",
                            i + 1,
                            j + 1
                        ),
                    ));
                }
                let uphill = (!is_excited(i) && is_excited(j)) || (i == 2 && j == 3);
                if uphill && r > 0.0 {
                    return Err(Error::invalid(
                        "rates",
                        alloc::format!(
                            "Γ[{}][{}] pumps population uphill into an excited level",
                            i + 1,
                            j + 1
                        ),
                    ));
                }
            }
        }
        Ok(LevelSystem {
            ground_splitting,
            excited_splitting,
            rates,
        })
    }

    /// Splittings at their default values with rates built from `cfg`: each
    /// excited level decays to both ground levels at `1/(2·lifetime)`, and the
    /// ground doublet relaxes with `1/T₁ = Γ₁₂ + Γ₂₁` in detailed balance at
    /// the configured temperature.
    pub fn with_rate_config(cfg: &RateConfig) -> Result<Self> {
        Self::from_config(
            Self::DEFAULT_GROUND_SPLITTING,
            Self::DEFAULT_EXCITED_SPLITTING,
            cfg,
        )
    }

    pub fn from_config(
        ground_splitting: f64,
        excited_splitting: f64,
        cfg: &RateConfig,
    ) -> Result<Self> {
        if !(cfg.excited_lifetime > 0.0) {
            return Err(Error::invalid("excited_lifetime", "must be positive"));
        }
        if !(cfg.ground_t1 > 0.0) {
            return Err(Error::invalid(
                "ground_t1",
                "must be positive (use infinity to disable)",
            ));
        }
        if !(cfg.temperature > 0.0) {
            return Err(Error::invalid("temperature", "must be positive"));
        }
        let mut rates = [[0.0; 4]; 4];
        let channel = 0.5 / cfg.excited_lifetime;
        for e in EXCITED {
            for g in GROUND {
                rates[e][g] = channel;
            }
        }
        let b = boltzmann_ratio(cfg.temperature, ground_splitting);
        let total = 1.0 / cfg.ground_t1;
        rates[1][0] = total / (1.0 + b);
        rates[0][1] = total * b / (1.0 + b);
        Self::new(ground_splitting, excited_splitting, rates)
    }

    /// Same splittings, every rate zero.
    pub fn lossless(&self) -> Self {
        LevelSystem {
            rates: [[0.0; 4]; 4],
            ..*self
        }
    }

    pub fn ground_splitting(&self) -> f64 {
        self.ground_splitting
    }

    pub fn excited_splitting(&self) -> f64 {
        self.excited_splitting
    }

    pub fn rates(&self) -> &[[f64; 4]; 4] {
        &self.rates
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rates[from][to]
    }

    pub fn set_rate(&mut self, from: usize, to: usize, rate: f64) -> Result<()> {
        let mut rates = self.rates;
        rates[from][to] = rate;
        *self = Self::new(self.ground_splitting, self.excited_splitting, rates)?;
        Ok(())
    }

    /// Total radiative (optical) decay rate of `level` into the ground doublet.
    pub fn radiative_rate(&self, level: usize) -> f64 {
        if !is_excited(level) {
            return 0.0;
        }
        GROUND.iter().map(|&g| self.rates[level][g]).sum()
    }

    /// Relaxation time of the ground doublet, `1/(Γ₁₂ + Γ₂₁)`.
    pub fn ground_t1(&self) -> f64 {
        1.0 / (self.rates[0][1] + self.rates[1][0])
    }
}

/// Boltzmann factor `exp(−h·δ/(k_B·T))` for a splitting `δ` in GHz.
pub fn boltzmann_ratio(temperature: f64, splitting: f64) -> f64 {
    (-H_OVER_KB * splitting / temperature).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transitions_form_a_double_lambda() {
        // each ground level couples to both excited levels exactly once
        let mut seen = [[false; 4]; 4];
        for t in Transition::ALL {
            let (g, e) = t.levels();
            assert!(!is_excited(g) && is_excited(e));
            assert!(!seen[g][e]);
            seen[g][e] = true;
        }
    }

    #[test]
    fn default_rates_obey_detailed_balance() {
        let sys = LevelSystem::default();
        let b = boltzmann_ratio(5.0, 48.0);
        assert!((sys.rate(0, 1) / sys.rate(1, 0) - b).abs() < 1e-14);
        assert!((sys.ground_t1() - 27.0).abs() < 1e-12);
        assert!((sys.radiative_rate(2) - 1.0 / 1.7).abs() < 1e-14);
        assert_eq!(sys.radiative_rate(0), 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(LevelSystem::new(0.0, 259.0, [[0.0; 4]; 4]).is_err());
        assert!(LevelSystem::new(48.0, -1.0, [[0.0; 4]; 4]).is_err());
        let mut r = [[0.0; 4]; 4];
        r[2][0] = -0.1;
        assert!(LevelSystem::new(48.0, 259.0, r).is_err());
        let mut r = [[0.0; 4]; 4];
        r[0][2] = 0.1;
        assert!(LevelSystem::new(48.0, 259.0, r).is_err());
        let mut r = [[0.0; 4]; 4];
        r[3][2] = 0.1;
        assert!(LevelSystem::new(48.0, 259.0, r).is_ok());
    }

    #[test]
    fn transition_parsing() {
        assert_eq!("C".parse::<Transition>().unwrap(), Transition::C);
        assert!("E".parse::<Transition>().is_err());
    }
}
