//! All-pass and add-drop microring resonators.
//!
//! Rings are parameterised by loaded Q and a coupling regime; the field
//! coupling and round-trip loss coefficients are solved internally. The
//! round-trip phase is linear in frequency (no group-velocity dispersion), so
//! every resonance sits at `anchor + offset + heater_shift + k·FSR`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::exec::Exec;
use crate::spectral::{linear_from_db, ComplexSpectrum, FrequencyGrid, SPEED_OF_LIGHT};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingRegime {
    Critical,
    OverCoupled,
    UnderCoupled,
    /// Field self-coupling of the input (t1) and drop (t2) couplers and the
    /// single-pass amplitude `a`. All-pass rings ignore `t2`.
    Explicit {
        t1: f64,
        t2: f64,
        a: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingKind {
    AllPass,
    AddDrop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingParams {
    pub radius_m: f64,
    pub group_index: f64,
    pub loaded_q: f64,
    pub coupling: CouplingRegime,
    /// All-pass only: ratio of coupling loss to intrinsic loss per round
    /// trip. Over-coupled rings use it directly, under-coupled its inverse.
    pub coupling_ratio: f64,
    /// Design resonance the comb is anchored to.
    pub anchor_hz: f64,
    /// Static fabrication detuning of the whole comb.
    pub resonance_offset_hz: f64,
    /// Add-drop only: drop-port loss on resonance.
    pub drop_insertion_loss_db: f64,
    /// Forces the intrinsic round-trip amplitude to exactly 1.
    pub lossless: bool,
}

/// Default group index, from a 6 nm FSR at 15 µm radius.
pub const DEFAULT_GROUP_INDEX: f64 = 4.1;

impl RingParams {
    /// The 15 µm pair-generation ring with loaded Q 4×10⁴.
    pub fn generation_ring(anchor_hz: f64) -> Self {
        RingParams {
            radius_m: 15e-6,
            group_index: DEFAULT_GROUP_INDEX,
            loaded_q: 4e4,
            coupling: CouplingRegime::OverCoupled,
            coupling_ratio: 4.0,
            anchor_hz,
            resonance_offset_hz: 0.0,
            drop_insertion_loss_db: 0.0,
            lossless: false,
        }
    }

    /// Over-coupled add-drop filter: loaded Q 4×10³, 1.5 dB drop loss and an
    /// FSR 2.5× that of the generation ring.
    pub fn add_drop_filter(anchor_hz: f64) -> Self {
        RingParams {
            radius_m: 15e-6 / 2.5,
            group_index: DEFAULT_GROUP_INDEX,
            loaded_q: 4e3,
            coupling: CouplingRegime::OverCoupled,
            coupling_ratio: 4.0,
            anchor_hz,
            resonance_offset_hz: 0.0,
            drop_insertion_loss_db: 1.5,
            lossless: false,
        }
    }

    pub fn round_trip_time_s(&self) -> f64 {
        self.group_index * 2.0 * PI * self.radius_m / SPEED_OF_LIGHT
    }

    pub fn fsr_hz(&self) -> f64 {
        1.0 / self.round_trip_time_s()
    }

    /// FSR expressed in wavelength at the anchor.
    pub fn fsr_m(&self) -> f64 {
        let lambda = SPEED_OF_LIGHT / self.anchor_hz;
        lambda * lambda * self.fsr_hz() / SPEED_OF_LIGHT
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius_m > 0.0) {
            return Err(Error::Domain(format!("ring radius must be positive, got {}", self.radius_m)));
        }
        if !(self.group_index > 1.0 && self.group_index < 6.0) {
            return Err(Error::Domain(format!("group index {} outside (1, 6)", self.group_index)));
        }
        if !(self.anchor_hz > 0.0) {
            return Err(Error::Domain("ring anchor frequency must be positive".into()));
        }
        if !matches!(self.coupling, CouplingRegime::Explicit { .. }) && !(self.loaded_q > 10.0) {
            return Err(Error::Domain(format!("loaded Q must exceed 10, got {}", self.loaded_q)));
        }
        if !(self.coupling_ratio > 0.0) {
            return Err(Error::Domain("coupling ratio must be positive".into()));
        }
        if self.drop_insertion_loss_db < 0.0 {
            return Err(Error::Domain("drop insertion loss must be non-negative".into()));
        }
        Ok(())
    }
}

/// Field coefficients of a solved ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingCoefficients {
    pub t1: f64,
    pub t2: f64,
    pub a: f64,
}

impl CouplingCoefficients {
    /// Round-trip amplitude product seen by the circulating field.
    pub fn round_trip(&self, kind: RingKind) -> f64 {
        match kind {
            RingKind::AllPass => self.t1 * self.a,
            RingKind::AddDrop => self.t1 * self.t2 * self.a,
        }
    }
}

/// Finesse of an Airy resonance with round-trip product `x`, using the exact
/// half-depth condition `4x·sin²(φ/2) = (1−x)²`.
pub fn finesse_from_round_trip(x: f64) -> f64 {
    let half = 2.0 * ((1.0 - x) / (2.0 * x.sqrt())).asin();
    2.0 * PI / (2.0 * half)
}

fn round_trip_from_finesse(finesse: f64) -> Result<f64> {
    if !(finesse > 1.0) {
        return Err(Error::Calibration(format!("finesse {finesse} too low to form a resonance")));
    }
    let s = (PI / (2.0 * finesse)).sin();
    let y = (s * s + 1.0).sqrt() - s;
    Ok(y * y)
}

/// Inverts loaded Q and coupling regime into `(t1, t2, a)`.
pub fn solve_coupling(params: &RingParams, kind: RingKind) -> Result<CouplingCoefficients> {
    params.validate()?;
    if let CouplingRegime::Explicit { t1, t2, a } = params.coupling {
        let t2 = if kind == RingKind::AllPass { 1.0 } else { t2 };
        for (name, v) in [("t1", t1), ("t2", t2), ("a", a)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Calibration(format!("{name} = {v} outside (0, 1]")));
            }
        }
        if params.lossless && a != 1.0 {
            return Err(Error::Calibration("lossless ring with explicit a < 1".into()));
        }
        return Ok(CouplingCoefficients { t1, t2, a });
    }

    let finesse = params.fsr_hz() * params.loaded_q / params.anchor_hz;
    let x = round_trip_from_finesse(finesse)?;
    let regime = params.coupling;

    match kind {
        RingKind::AllPass => {
            let ln_x = x.ln();
            let (ln_t, ln_a) = if params.lossless {
                match regime {
                    CouplingRegime::Critical => {
                        return Err(Error::Calibration(
                            "critical coupling requires intrinsic loss; ring is lossless".into(),
                        ))
                    }
                    CouplingRegime::UnderCoupled => {
                        return Err(Error::Calibration("a lossless ring cannot be under-coupled".into()))
                    }
                    _ => (ln_x, 0.0),
                }
            } else {
                let k = params.coupling_ratio;
                match regime {
                    CouplingRegime::Critical => (0.5 * ln_x, 0.5 * ln_x),
                    CouplingRegime::OverCoupled if k > 1.0 => (k / (1.0 + k) * ln_x, ln_x / (1.0 + k)),
                    CouplingRegime::UnderCoupled if k > 1.0 => (ln_x / (1.0 + k), k / (1.0 + k) * ln_x),
                    _ => {
                        return Err(Error::Calibration(format!(
                            "coupling ratio {k} must exceed 1 to separate over/under coupling"
                        )))
                    }
                }
            };
            Ok(CouplingCoefficients { t1: ln_t.exp(), t2: 1.0, a: ln_a.exp() })
        }
        RingKind::AddDrop => {
            let drop_peak = linear_from_db(-params.drop_insertion_loss_db);
            match regime {
                CouplingRegime::Critical => {
                    // t1 = t2·a nulls the through port
                    let d1 = drop_peak * (1.0 - x);
                    let a = 0.5 * (d1 + (d1 * d1 + 4.0 * x).sqrt());
                    if params.lossless || a >= 1.0 {
                        return Err(Error::Calibration(
                            "critical coupling requires intrinsic loss; ring is lossless".into(),
                        ));
                    }
                    let t2 = x.sqrt() / a;
                    if t2 > 1.0 {
                        return Err(Error::Calibration("critical add-drop needs t2 > 1".into()));
                    }
                    Ok(CouplingCoefficients { t1: x.sqrt(), t2, a })
                }
                CouplingRegime::OverCoupled | CouplingRegime::UnderCoupled => {
                    let a = if params.lossless || drop_peak >= 1.0 {
                        1.0
                    } else {
                        // symmetric couplers; drop peak (1−x/a)²·a/(1−x)² fixes a
                        let b = 2.0 * x + drop_peak * (1.0 - x).powi(2);
                        (0.5 * (b + (b * b - 4.0 * x * x).max(0.0).sqrt())).min(1.0)
                    };
                    let t = (x / a).sqrt();
                    let coupling_loss = 2.0 * (1.0 - t * t);
                    let intrinsic_loss = 1.0 - a * a;
                    let over = coupling_loss > intrinsic_loss;
                    if over != (regime == CouplingRegime::OverCoupled) {
                        return Err(Error::Calibration(format!(
                            "drop loss {} dB at Q {} gives a{} ring, not the requested regime",
                            params.drop_insertion_loss_db,
                            params.loaded_q,
                            if over { "n over-coupled" } else { "n under-coupled" }
                        )));
                    }
                    Ok(CouplingCoefficients { t1: t, t2: t, a })
                }
                CouplingRegime::Explicit { .. } => unreachable!(),
            }
        }
    }
}

/// Ohmic heater on a ring. Dissipated power red-shifts the comb.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeaterState {
    pub current_a: f64,
    pub shift_coefficient_hz_per_w: f64,
    pub resistance_ohm: f64,
}

impl HeaterState {
    pub fn off() -> Self {
        HeaterState::default()
    }

    pub fn power_w(&self) -> f64 {
        self.current_a * self.current_a * self.resistance_ohm
    }

    /// Resonance shift in Hz; negative for positive heating.
    pub fn shift_hz(&self) -> f64 {
        -self.shift_coefficient_hz_per_w * self.power_w()
    }

    pub fn with_current(self, current_a: f64) -> Self {
        HeaterState { current_a, ..self }
    }

    /// Current needed to red-shift by `shift_hz` (positive magnitude).
    pub fn current_for_shift(&self, shift_hz: f64) -> Option<f64> {
        let k = self.shift_coefficient_hz_per_w * self.resistance_ohm;
        (k > 0.0 && shift_hz >= 0.0).then(|| (shift_hz / k).sqrt())
    }
}

/// A ring with solved coefficients, ready for evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ring {
    params: RingParams,
    kind: RingKind,
    coeffs: CouplingCoefficients,
}

impl Ring {
    pub fn new(params: RingParams, kind: RingKind) -> Result<Self> {
        let coeffs = solve_coupling(&params, kind)?;
        Ok(Ring { params, kind, coeffs })
    }

    pub fn params(&self) -> &RingParams {
        &self.params
    }

    pub fn kind(&self) -> RingKind {
        self.kind
    }

    pub fn coefficients(&self) -> CouplingCoefficients {
        self.coeffs
    }

    pub fn fsr_hz(&self) -> f64 {
        self.params.fsr_hz()
    }

    /// Resonance of the anchored comb tooth for a given heater shift.
    pub fn resonance_hz(&self, heater_shift_hz: f64) -> f64 {
        self.params.anchor_hz + self.params.resonance_offset_hz + heater_shift_hz
    }

    /// Comb tooth closest to `freq_hz`.
    pub fn nearest_resonance_hz(&self, freq_hz: f64, heater_shift_hz: f64) -> f64 {
        let f0 = self.resonance_hz(heater_shift_hz);
        let fsr = self.fsr_hz();
        f0 + ((freq_hz - f0) / fsr).round() * fsr
    }

    /// Smallest red shift (≥ 0) that brings a comb tooth onto `freq_hz`.
    pub fn red_shift_to(&self, freq_hz: f64, heater_shift_hz: f64) -> f64 {
        let fsr = self.fsr_hz();
        (self.resonance_hz(heater_shift_hz) - freq_hz).rem_euclid(fsr)
    }

    pub fn finesse(&self) -> f64 {
        finesse_from_round_trip(self.coeffs.round_trip(self.kind))
    }

    pub fn fwhm_hz(&self) -> f64 {
        self.fsr_hz() / self.finesse()
    }

    /// Loaded Q regenerated from the solved coefficients.
    pub fn loaded_q(&self) -> f64 {
        self.params.anchor_hz / self.fwhm_hz()
    }

    /// Photon lifetime Q/ω at the anchor.
    pub fn photon_lifetime_s(&self) -> f64 {
        self.loaded_q() / (2.0 * PI * self.params.anchor_hz)
    }

    fn phasor(&self, freq_hz: f64, heater_shift_hz: f64) -> Complex64 {
        let phi = 2.0 * PI * (freq_hz - self.resonance_hz(heater_shift_hz)) / self.fsr_hz();
        Complex64::from_polar(1.0, phi)
    }

    pub fn through(&self, freq_hz: f64, heater_shift_hz: f64) -> Complex64 {
        let e = self.phasor(freq_hz, heater_shift_hz);
        let CouplingCoefficients { t1, t2, a } = self.coeffs;
        match self.kind {
            RingKind::AllPass => (t1 - a * e) / (1.0 - t1 * a * e),
            RingKind::AddDrop => (t1 - t2 * a * e) / (1.0 - t1 * t2 * a * e),
        }
    }

    /// Drop-port field; identically zero for an all-pass ring.
    pub fn drop(&self, freq_hz: f64, heater_shift_hz: f64) -> Complex64 {
        if self.kind == RingKind::AllPass {
            return Complex64::new(0.0, 0.0);
        }
        let e = self.phasor(freq_hz, heater_shift_hz);
        let CouplingCoefficients { t1, t2, a } = self.coeffs;
        let k1k2 = ((1.0 - t1 * t1) * (1.0 - t2 * t2)).sqrt();
        -k1k2 * a.sqrt() * e.sqrt() / (1.0 - t1 * t2 * a * e)
    }

    /// Fraction of photons created inside the ring that leave through the
    /// input bus rather than being absorbed or dropped.
    pub fn escape_efficiency(&self) -> f64 {
        let x = self.coeffs.round_trip(self.kind);
        if x >= 1.0 {
            return 1.0;
        }
        self.coeffs.t1.ln() / x.ln()
    }

    /// Circulating-to-bus power ratio on resonance.
    pub fn buildup(&self) -> f64 {
        let x = self.coeffs.round_trip(self.kind);
        (1.0 - self.coeffs.t1 * self.coeffs.t1) / (1.0 - x).powi(2)
    }
}

pub fn ring_all_pass(params: &RingParams, heater: &HeaterState, grid: &FrequencyGrid) -> Result<ComplexSpectrum> {
    let ring = Ring::new(*params, RingKind::AllPass)?;
    let shift = heater.shift_hz();
    Ok(ComplexSpectrum::from_fn(*grid, Exec::default(), |f| ring.through(f, shift)))
}

pub fn ring_add_drop(
    params: &RingParams,
    heater: &HeaterState,
    grid: &FrequencyGrid,
) -> Result<(ComplexSpectrum, ComplexSpectrum)> {
    let ring = Ring::new(*params, RingKind::AddDrop)?;
    let shift = heater.shift_hz();
    let through = ComplexSpectrum::from_fn(*grid, Exec::default(), |f| ring.through(f, shift));
    let drop = ComplexSpectrum::from_fn(*grid, Exec::default(), |f| ring.drop(f, shift));
    Ok((through, drop))
}
