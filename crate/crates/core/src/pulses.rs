//! Drive envelopes, drive fields and pulse timelines.
//!
//! A drive is specified by its pulse area or peak Rabi frequency (rad/ns); the
//! optical power that produced it is bookkeeping for the caller. New envelope
//! shapes are added as [`Envelope`] variants together with their window,
//! characteristic time scale and closed-form area.

use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

// inherent std float methods shadow these when std is linked
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::levels::Transition;
use crate::linalg::C64;
use crate::quadrature;

/// Half-width of a Gaussian drive window in units of its FWHM. The envelope
/// outside is below 1e-19 of the peak and is treated as exactly zero.
pub const GAUSSIAN_WINDOW_FWHM: f64 = 4.0;
/// Half-width of a hyperbolic-secant window in units of its width parameter.
pub const SECH_WINDOW_WIDTHS: f64 = 40.0;

fn gaussian_area_factor() -> f64 {
    (PI / (4.0 * LN_2)).sqrt()
}

/// Real, nonnegative Rabi-frequency envelope (rad/ns).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    /// Constant `peak` on `[start, start + duration]`.
    Square {
        peak: f64,
        start: f64,
        duration: f64,
    },
    /// `peak·exp(−4 ln2 (t − center)²/fwhm²)` on `center ± 4·fwhm`.
    Gaussian { peak: f64, center: f64, fwhm: f64 },
    /// `peak·sech((t − center)/width)` on `center ± 40·width`.
    Sech { peak: f64, center: f64, width: f64 },
}

impl Envelope {
    pub fn window(&self) -> (f64, f64) {
        match *self {
            Envelope::Square {
                start, duration, ..
            } => (start, start + duration),
            Envelope::Gaussian { center, fwhm, .. } => {
                let h = GAUSSIAN_WINDOW_FWHM * fwhm;
                (center - h, center + h)
            }
            Envelope::Sech { center, width, .. } => {
                let h = SECH_WINDOW_WIDTHS * width;
                (center - h, center + h)
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let (lo, hi) = self.window();
        if t < lo || t > hi {
            return 0.0;
        }
        self.profile(t)
    }

    /// The shape without its window, used when the caller already knows the
    /// drive is on.
    pub fn profile(&self, t: f64) -> f64 {
        match *self {
            Envelope::Square { peak, .. } => peak,
            Envelope::Gaussian { peak, center, fwhm } => {
                let x = (t - center) / fwhm;
                peak * (-4.0 * LN_2 * x * x).exp()
            }
            Envelope::Sech {
                peak,
                center,
                width,
            } => peak / ((t - center) / width).cosh(),
        }
    }

    pub fn peak(&self) -> f64 {
        match *self {
            Envelope::Square { peak, .. }
            | Envelope::Gaussian { peak, .. }
            | Envelope::Sech { peak, .. } => peak,
        }
    }

    /// Shortest time over which the envelope changes appreciably; the
    /// integrator caps its step at a fraction of this inside the window.
    pub fn timescale(&self) -> f64 {
        match *self {
            Envelope::Square { duration, .. } => duration,
            Envelope::Gaussian { fwhm, .. } => fwhm,
            Envelope::Sech { width, .. } => width,
        }
    }

    /// Closed-form `∫Ω dt` of the untruncated shape.
    pub fn nominal_area(&self) -> f64 {
        match *self {
            Envelope::Square { peak, duration, .. } => peak * duration,
            Envelope::Gaussian { peak, fwhm, .. } => peak * fwhm * gaussian_area_factor(),
            Envelope::Sech { peak, width, .. } => peak * PI * width,
        }
    }

    pub fn shifted(&self, dt: f64) -> Self {
        match *self {
            Envelope::Square {
                peak,
                start,
                duration,
            } => Envelope::Square {
                peak,
                start: start + dt,
                duration,
            },
            Envelope::Gaussian { peak, center, fwhm } => Envelope::Gaussian {
                peak,
                center: center + dt,
                fwhm,
            },
            Envelope::Sech {
                peak,
                center,
                width,
            } => Envelope::Sech {
                peak,
                center: center + dt,
                width,
            },
        }
    }

    fn scaled(&self, s: f64) -> Self {
        let mut e = *self;
        match &mut e {
            Envelope::Square { peak, .. }
            | Envelope::Gaussian { peak, .. }
            | Envelope::Sech { peak, .. } => *peak *= s,
        }
        e
    }
}

/// One classical field driving one optical transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveField {
    pub transition: Transition,
    pub envelope: Envelope,
    /// Carrier offset from the transition's nominal centre (GHz), positive
    /// for a blue-detuned carrier.
    pub detuning: f64,
    /// Carrier phase (rad).
    pub phase: f64,
}

impl DriveField {
    pub fn rabi(&self, t: f64) -> f64 {
        self.envelope.value(t)
    }

    pub fn window(&self) -> (f64, f64) {
        self.envelope.window()
    }

    /// `Ω(t)·e^{iφ}/2`, the upper-right RWA matrix element before any frame
    /// phase is applied.
    pub fn half_coupling(&self, t: f64) -> C64 {
        C64::from_polar(0.5 * self.rabi(t), self.phase)
    }

    pub fn is_active(&self, t: f64) -> bool {
        let (lo, hi) = self.window();
        t >= lo && t <= hi
    }

    pub fn shifted(&self, dt: f64) -> Self {
        DriveField {
            envelope: self.envelope.shifted(dt),
            ..*self
        }
    }

    pub fn with_phase(&self, phase: f64) -> Self {
        DriveField { phase, ..*self }
    }

    /// Same shape with the area multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        DriveField {
            envelope: self.envelope.scaled(s),
            ..*self
        }
    }
}

fn check_carrier(detuning: f64, phase: f64) -> Result<()> {
    if !detuning.is_finite() {
        return Err(Error::invalid("detuning", "must be finite"));
    }
    if !phase.is_finite() {
        return Err(Error::invalid("phase", "must be finite"));
    }
    Ok(())
}

/// Gaussian drive with the given pulse area (rad) and intensity-envelope FWHM (ns).
pub fn gaussian_pulse(
    area: f64,
    fwhm: f64,
    center: f64,
    transition: Transition,
    detuning: f64,
    phase: f64,
) -> Result<DriveField> {
    if !(fwhm > 0.0 && fwhm.is_finite()) {
        return Err(Error::invalid("fwhm", "must be positive"));
    }
    if !(area >= 0.0 && area.is_finite()) {
        return Err(Error::invalid("area", "must be nonnegative"));
    }
    check_carrier(detuning, phase)?;
    Ok(DriveField {
        transition,
        envelope: Envelope::Gaussian {
            peak: area / (fwhm * gaussian_area_factor()),
            center,
            fwhm,
        },
        detuning,
        phase,
    })
}

/// Flat-top drive of constant Rabi frequency `peak_rabi` (rad/ns).
pub fn square_pulse(
    peak_rabi: f64,
    duration: f64,
    start: f64,
    transition: Transition,
    detuning: f64,
    phase: f64,
) -> Result<DriveField> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid("duration", "must be positive"));
    }
    if !(peak_rabi >= 0.0 && peak_rabi.is_finite()) {
        return Err(Error::invalid("peak_rabi", "must be nonnegative"));
    }
    check_carrier(detuning, phase)?;
    Ok(DriveField {
        transition,
        envelope: Envelope::Square {
            peak: peak_rabi,
            start,
            duration,
        },
        detuning,
        phase,
    })
}

/// Hyperbolic-secant drive with the given area.
pub fn sech_pulse(
    area: f64,
    width: f64,
    center: f64,
    transition: Transition,
    detuning: f64,
    phase: f64,
) -> Result<DriveField> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::invalid("width", "must be positive"));
    }
    if !(area >= 0.0 && area.is_finite()) {
        return Err(Error::invalid("area", "must be nonnegative"));
    }
    check_carrier(detuning, phase)?;
    Ok(DriveField {
        transition,
        envelope: Envelope::Sech {
            peak: area / (PI * width),
            center,
            width,
        },
        detuning,
        phase,
    })
}

/// `∫Ω(t) dt` over the drive window by adaptive quadrature.
pub fn pulse_area(d: &DriveField) -> f64 {
    let (lo, hi) = d.window();
    if d.envelope.peak() == 0.0 {
        return 0.0;
    }
    match d.envelope {
        // the integrand is discontinuous only at the window edges
        Envelope::Square { .. } => quadrature::integrate(|t| d.rabi(t), lo, hi, 1e-13, 0.0),
        _ => {
            let c = 0.5 * (lo + hi);
            quadrature::integrate(|t| d.rabi(t), lo, c, 1e-13, 0.0)
                + quadrature::integrate(|t| d.rabi(t), c, hi, 1e-13, 0.0)
        }
    }
}

/// Ordered set of drives.
///
/// Drives on the same transition may overlap in time only if they share a
/// carrier; otherwise no single rotating frame describes the overlap.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PulseTimeline {
    drives: Vec<DriveField>,
}

impl PulseTimeline {
    pub fn new(drives: Vec<DriveField>) -> Result<Self> {
        let mut tl = PulseTimeline { drives: Vec::new() };
        for d in drives {
            tl.push(d)?;
        }
        Ok(tl)
    }

    pub fn empty() -> Self {
        PulseTimeline::default()
    }

    pub fn push(&mut self, drive: DriveField) -> Result<()> {
        let (lo, hi) = drive.window();
        for other in self
            .drives
            .iter()
            .filter(|o| o.transition == drive.transition)
        {
            let (olo, ohi) = other.window();
            let overlap = lo < ohi && olo < hi;
            if overlap && (other.detuning - drive.detuning).abs() > 1e-12 {
                return Err(Error::FrameConflict {
                    transition: drive.transition,
                    time: lo.max(olo),
                    first: other.detuning,
                    second: drive.detuning,
                });
            }
        }
        self.drives.push(drive);
        Ok(())
    }

    pub fn extend(&mut self, drives: impl IntoIterator<Item = DriveField>) -> Result<()> {
        for d in drives {
            self.push(d)?;
        }
        Ok(())
    }

    pub fn drives(&self) -> &[DriveField] {
        &self.drives
    }

    pub fn is_empty(&self) -> bool {
        self.drives.is_empty()
    }

    /// Earliest window start and latest window end, `None` when empty.
    pub fn span(&self) -> Option<(f64, f64)> {
        self.drives
            .iter()
            .map(|d| d.window())
            .fold(None, |acc, (lo, hi)| match acc {
                None => Some((lo, hi)),
                Some((a, b)) => Some((a.min(lo), b.max(hi))),
            })
    }

    /// Window edges of every drive, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .drives
            .iter()
            .flat_map(|d| {
                let (lo, hi) = d.window();
                [lo, hi]
            })
            .collect();
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.dedup();
        pts
    }

    pub fn shifted(&self, dt: f64) -> Self {
        PulseTimeline {
            drives: self.drives.iter().map(|d| d.shifted(dt)).collect(),
        }
    }

    /// Adds `phase` to every drive.
    pub fn with_common_phase(&self, phase: f64) -> Self {
        PulseTimeline {
            drives: self
                .drives
                .iter()
                .map(|d| d.with_phase(d.phase + phase))
                .collect(),
        }
    }
}

/// Parameters of a simultaneous off-resonant signal/control pair forming a
/// Raman Λ through the upper excited level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamanPair {
    /// Common single-photon detuning Δ from `|4⟩` (GHz, positive = blue).
    pub common_detuning: f64,
    /// Two-photon detuning δ₂ (GHz); the control carrier sits at Δ + δ₂.
    pub two_photon_detuning: f64,
    /// Control centre minus signal centre (ns).
    pub relative_delay: f64,
    pub signal_area: f64,
    pub control_area: f64,
    pub fwhm: f64,
    pub signal_phase: f64,
    pub control_phase: f64,
    /// Signal centre time (ns).
    pub center: f64,
}

impl RamanPair {
    /// The pair is meant to stay far from single-photon resonance; true when
    /// `|Δ|` is within five inhomogeneous linewidths.
    pub fn near_resonance(&self, inhomogeneous_fwhm: f64) -> bool {
        self.common_detuning.abs() < 5.0 * inhomogeneous_fwhm
    }
}

/// Signal on A (`|1⟩↔|4⟩`, carrier Δ) and control on B (`|2⟩↔|4⟩`, carrier
/// Δ + δ₂); both Gaussian with the same FWHM.
pub fn raman_pair(p: &RamanPair) -> Result<[DriveField; 2]> {
    let signal = gaussian_pulse(
        p.signal_area,
        p.fwhm,
        p.center,
        Transition::A,
        p.common_detuning,
        p.signal_phase,
    )?;
    let control = gaussian_pulse(
        p.control_area,
        p.fwhm,
        p.center + p.relative_delay,
        Transition::B,
        p.common_detuning + p.two_photon_detuning,
        p.control_phase,
    )?;
    Ok([signal, control])
}
