//! Rotating-wave Hamiltonian of one emitter under a set of drives.
//!
//! Each level `i` is viewed in a frame rotating at its nominal energy plus an
//! offset `dᵢ` (GHz). The offsets are chosen so that every drive that is part
//! of a spanning tree of the drive graph becomes static: for a drive on
//! `g ↔ e` with carrier detuning Δ, `d_e − d_g = Δ`. With a Raman pair on
//! A (Δ) and B (Δ + δ₂) this leaves `2π·δ₂` on `|2⟩`, the two-photon
//! detuning. A drive that closes a loop with an inconsistent carrier keeps
//! an explicit residual phase `e^{i2π r t}` in its matrix element, so the
//! Hamiltonian stays exact for any drive set.
//!
//! With `δ` the emitter's inhomogeneous detuning (its transitions sit `δ`
//! below nominal, i.e. δ is laser-minus-emitter), the matrix is
//!
//! ```text
//! H_ii = −2π (δ·[i excited] + dᵢ)
//! H_ge = Ω(t)/2 · e^{iφ} · e^{i2π r t}
//! ```
//!
//! in rad/ns (ħ = 1).

use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::levels::is_excited;
use crate::linalg::{CMatrix4, C64};
use crate::pulses::DriveField;

#[derive(Debug, Clone, PartialEq)]
pub struct RotatingFrame {
    offsets: [f64; 4],
    residuals: Vec<f64>,
}

impl RotatingFrame {
    pub fn new(drives: &[DriveField]) -> Self {
        let mut assigned: [Option<f64>; 4] = [Some(0.0), None, None, None];
        loop {
            let mut progressed = false;
            for d in drives {
                let (g, e) = d.transition.levels();
                match (assigned[g], assigned[e]) {
                    (Some(dg), None) => {
                        assigned[e] = Some(dg + d.detuning);
                        progressed = true;
                    }
                    (None, Some(de)) => {
                        assigned[g] = Some(de - d.detuning);
                        progressed = true;
                    }
                    _ => {}
                }
            }
            if progressed {
                continue;
            }
            // a component not connected to |1⟩ is anchored at its lowest level
            let seed = drives
                .iter()
                .flat_map(|d| {
                    let (g, e) = d.transition.levels();
                    [g, e]
                })
                .filter(|&l| assigned[l].is_none())
                .min();
            match seed {
                Some(l) => assigned[l] = Some(0.0),
                None => break,
            }
        }
        let offsets = assigned.map(|o| o.unwrap_or(0.0));
        let residuals = drives
            .iter()
            .map(|d| {
                let (g, e) = d.transition.levels();
                d.detuning - (offsets[e] - offsets[g])
            })
            .collect();
        RotatingFrame { offsets, residuals }
    }

    /// Frame offset of each level (GHz).
    pub fn offsets(&self) -> [f64; 4] {
        self.offsets
    }

    /// Carrier mismatch left on each drive (GHz); zero for drives the frame
    /// makes static.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }
}

/// A drive set together with its frame, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct DrivenHamiltonian<'a> {
    drives: &'a [DriveField],
    frame: RotatingFrame,
    diagonal: [f64; 4],
}

impl<'a> DrivenHamiltonian<'a> {
    pub fn new(drives: &'a [DriveField], emitter_detuning: f64) -> Self {
        let frame = RotatingFrame::new(drives);
        let diagonal = core::array::from_fn(|i| {
            let shift = if is_excited(i) { emitter_detuning } else { 0.0 };
            -TAU * (shift + frame.offsets[i])
        });
        DrivenHamiltonian {
            drives,
            frame,
            diagonal,
        }
    }

    pub fn frame(&self) -> &RotatingFrame {
        &self.frame
    }

    pub fn at(&self, t: f64) -> CMatrix4 {
        let mut h = CMatrix4::from_diagonal(self.diagonal);
        for (d, &r) in self.drives.iter().zip(&self.frame.residuals) {
            let omega = d.rabi(t);
            if omega == 0.0 {
                continue;
            }
            let (g, e) = d.transition.levels();
            let v = C64::from_polar(0.5 * omega, d.phase + TAU * r * t);
            h[(g, e)] += v;
            h[(e, g)] += v.conj();
        }
        h
    }

    /// As [`at`](Self::at) but with the on/off state of each drive supplied
    /// by the caller (indices into the drive slice), so that a drive is
    /// continuous up to and including its window edges.
    pub fn at_active(&self, t: f64, active: &[usize]) -> CMatrix4 {
        let mut h = CMatrix4::from_diagonal(self.diagonal);
        for &k in active {
            let d = &self.drives[k];
            let (g, e) = d.transition.levels();
            let v = C64::from_polar(
                0.5 * d.envelope.profile(t),
                d.phase + TAU * self.frame.residuals[k] * t,
            );
            h[(g, e)] += v;
            h[(e, g)] += v.conj();
        }
        h
    }
}

/// Rotating-wave Hamiltonian (rad/ns) at time `t` for one emitter with
/// inhomogeneous detuning `emitter_detuning` (GHz).
///
/// Two drives on the same transition with different carriers that are both
/// on at `t` have no common frame and are rejected.
pub fn build_rwa_hamiltonian(
    drives: &[DriveField],
    emitter_detuning: f64,
    t: f64,
) -> Result<CMatrix4> {
    let active: Vec<&DriveField> = drives.iter().filter(|d| d.is_active(t)).collect();
    for (k, a) in active.iter().enumerate() {
        for b in &active[k + 1..] {
            if a.transition == b.transition && (a.detuning - b.detuning).abs() > 1e-12 {
                return Err(Error::FrameConflict {
                    transition: a.transition,
                    time: t,
                    first: a.detuning,
                    second: b.detuning,
                });
            }
        }
    }
    Ok(DrivenHamiltonian::new(drives, emitter_detuning).at(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levels::Transition;
    use crate::pulses::{gaussian_pulse, raman_pair, square_pulse, RamanPair};
    use core::f64::consts::PI;

    #[test]
    fn empty_drive_set() {
        let h = build_rwa_hamiltonian(&[], 0.0, 0.0).unwrap();
        assert_eq!(h, CMatrix4::zeros());
        let h = build_rwa_hamiltonian(&[], 2.0, 0.0).unwrap();
        assert!((h[(2, 2)].re + TAU * 2.0).abs() < 1e-12);
        assert!((h[(3, 3)].re + TAU * 2.0).abs() < 1e-12);
        assert_eq!(h[(0, 1)], C64::new(0.0, 0.0));
    }

    #[test]
    fn resonant_square_drive_on_c() {
        let d = square_pulse(3.0, 1.0, 0.0, Transition::C, 0.0, 0.0).unwrap();
        let h = build_rwa_hamiltonian(&[d], 0.0, 0.5).unwrap();
        assert_eq!(h[(0, 2)], C64::new(1.5, 0.0));
        assert_eq!(h[(2, 0)], C64::new(1.5, 0.0));
        for i in 0..4 {
            for j in 0..4 {
                if (i, j) != (0, 2) && (i, j) != (2, 0) {
                    assert_eq!(h[(i, j)], C64::new(0.0, 0.0), "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn emitter_detuning_shifts_excited_diagonal() {
        let d = square_pulse(3.0, 1.0, 0.0, Transition::C, 0.0, 0.0).unwrap();
        let h0 = build_rwa_hamiltonian(&[d], 0.0, 0.5).unwrap();
        let h5 = build_rwa_hamiltonian(&[d], 5.0, 0.5).unwrap();
        let diff = h5 - h0;
        assert!((diff[(2, 2)].re + TAU * 5.0).abs() < 1e-12);
        assert_eq!(diff[(0, 0)], C64::new(0.0, 0.0));
        assert_eq!(diff[(0, 2)], C64::new(0.0, 0.0));
    }

    #[test]
    fn raman_frame_puts_two_photon_detuning_on_level_two() {
        let p = RamanPair {
            common_detuning: 70.0,
            two_photon_detuning: 3.0,
            relative_delay: 0.0,
            signal_area: 1.0,
            control_area: 1.0,
            fwhm: 0.05,
            signal_phase: 0.0,
            control_phase: 0.0,
            center: 0.0,
        };
        let drives = raman_pair(&p).unwrap();
        let frame = RotatingFrame::new(&drives);
        assert_eq!(frame.residuals(), &[0.0, 0.0]);
        let h = build_rwa_hamiltonian(&drives, 0.0, 0.0).unwrap();
        assert!((h[(1, 1)].re - TAU * 3.0).abs() < 1e-12);
        assert!((h[(3, 3)].re + TAU * 70.0).abs() < 1e-12);
        assert!(h[(0, 3)].im.abs() < 1e-15 && h[(1, 3)].im.abs() < 1e-15);
    }

    #[test]
    fn inconsistent_loop_keeps_residual_phase() {
        // A, B, C fix all offsets; D then closes a loop with a mismatched carrier
        let mk = |t, det| gaussian_pulse(1.0, 0.1, 0.0, t, det, 0.0).unwrap();
        let drives = [
            mk(Transition::A, 10.0),
            mk(Transition::B, 10.0),
            mk(Transition::C, 0.0),
            mk(Transition::D, 1.0),
        ];
        let frame = RotatingFrame::new(&drives);
        assert_eq!(&frame.residuals()[..3], &[0.0, 0.0, 0.0]);
        assert!((frame.residuals()[3] - 1.0).abs() < 1e-12);
        let h = build_rwa_hamiltonian(&drives, 0.0, 0.05).unwrap();
        let v = h[(1, 2)];
        assert!((v.arg() - TAU * 0.05).abs() < 1e-12);
        assert!((h - h.adjoint()).max_abs() < 1e-15);
    }

    #[test]
    fn overlapping_conflicting_carriers_are_rejected() {
        let a = gaussian_pulse(PI, 0.012, 0.0, Transition::C, 0.0, 0.0).unwrap();
        let b = gaussian_pulse(PI, 0.012, 0.0, Transition::C, 2.0, 0.0).unwrap();
        assert!(matches!(
            build_rwa_hamiltonian(&[a, b], 0.0, 0.0),
            Err(Error::FrameConflict { .. })
        ));
        // outside both windows there is nothing to conflict
        assert!(build_rwa_hamiltonian(&[a, b], 0.0, 1.0).is_ok());
    }
}
