//! Optical element models.

mod coupler;
mod dbr;
mod ring;
mod stray;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

pub use coupler::{fixed_elements, grating_coupler, FixedElement, GratingCouplerParams};
pub use dbr::{
    center_extinction_db, dbr_center_transmission_cmt, dbr_response_tmm, dbr_response_tmm_with, Dbr, DbrParams,
    CALIBRATED_DELTA_N, DEFAULT_CENTER_OFFSET_M,
};
pub use ring::{
    finesse_from_round_trip, ring_add_drop, ring_all_pass, solve_coupling, CouplingCoefficients, CouplingRegime,
    HeaterState, Ring, RingKind, RingParams, DEFAULT_GROUP_INDEX,
};
pub use stray::{apply_stray_path, StrayMode, StrayPathParams, DEFAULT_STRAY_FLOOR_DB};

use crate::spectral::amplitude_from_loss_db;
use crate::{Error, Result};

/// Named output port of a component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutPort {
    Out,
    Through,
    Drop,
    Tap,
}

impl OutPort {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutPort::Out => "out",
            OutPort::Through => "through",
            OutPort::Drop => "drop",
            OutPort::Tap => "tap",
        }
    }
}

impl fmt::Display for OutPort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OutPort {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "out" => Ok(OutPort::Out),
            "through" => Ok(OutPort::Through),
            "drop" => Ok(OutPort::Drop),
            "tap" => Ok(OutPort::Tap),
            other => Err(Error::Netlist(format!("unknown port name `{other}`"))),
        }
    }
}

/// Heater attached to a ring; the drive current lives in the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeaterSpec {
    pub shift_coefficient_hz_per_w: f64,
    pub resistance_ohm: f64,
}

impl HeaterSpec {
    pub fn state(&self, current_a: f64) -> HeaterState {
        HeaterState {
            current_a,
            shift_coefficient_hz_per_w: self.shift_coefficient_hz_per_w,
            resistance_ohm: self.resistance_ohm,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ComponentModel {
    GratingCoupler(GratingCouplerParams),
    AllPassRing { ring: Ring, heater: HeaterSpec },
    AddDropRing { ring: Ring, heater: HeaterSpec },
    Dbr(Dbr),
    Tap { fraction: f64 },
    Attenuator { loss_db: f64 },
}

impl ComponentModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ComponentModel::GratingCoupler(_) => "grating_coupler",
            ComponentModel::AllPassRing { .. } => "ring_all_pass",
            ComponentModel::AddDropRing { .. } => "ring_add_drop",
            ComponentModel::Dbr(_) => "dbr",
            ComponentModel::Tap { .. } => "tap",
            ComponentModel::Attenuator { .. } => "attenuator",
        }
    }

    pub fn output_ports(&self) -> &'static [OutPort] {
        match self {
            ComponentModel::AddDropRing { .. } => &[OutPort::Through, OutPort::Drop],
            ComponentModel::Tap { .. } => &[OutPort::Out, OutPort::Tap],
            _ => &[OutPort::Out],
        }
    }

    pub fn has_port(&self, port: OutPort) -> bool {
        self.output_ports().contains(&port)
    }

    pub fn heater(&self) -> Option<HeaterSpec> {
        match self {
            ComponentModel::AllPassRing { heater, .. } | ComponentModel::AddDropRing { heater, .. } => Some(*heater),
            _ => None,
        }
    }

    pub fn ring(&self) -> Option<&Ring> {
        match self {
            ComponentModel::AllPassRing { ring, .. } | ComponentModel::AddDropRing { ring, .. } => Some(ring),
            _ => None,
        }
    }

    /// Field transfer from `in` to `port` at `freq_hz`; `heater_shift_hz` is
    /// ignored by components without a heater.
    pub fn transfer(&self, port: OutPort, freq_hz: f64, heater_shift_hz: f64) -> Complex64 {
        let real = |x: f64| Complex64::new(x, 0.0);
        match (self, port) {
            (ComponentModel::GratingCoupler(p), OutPort::Out) => real(p.amplitude(freq_hz)),
            (ComponentModel::AllPassRing { ring, .. }, OutPort::Out) => ring.through(freq_hz, heater_shift_hz),
            (ComponentModel::AddDropRing { ring, .. }, OutPort::Through) => ring.through(freq_hz, heater_shift_hz),
            (ComponentModel::AddDropRing { ring, .. }, OutPort::Drop) => ring.drop(freq_hz, heater_shift_hz),
            (ComponentModel::Dbr(d), OutPort::Out) => d.response(freq_hz).0,
            (ComponentModel::Tap { fraction }, OutPort::Out) => real((1.0 - fraction).sqrt()),
            (ComponentModel::Tap { fraction }, OutPort::Tap) => real(fraction.sqrt()),
            (ComponentModel::Attenuator { loss_db }, OutPort::Out) => real(amplitude_from_loss_db(*loss_db)),
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// Non-resonant part of the transmission on `port`: everything except
    /// the ring and Bragg filtering. Extinction is quoted against this.
    pub fn baseline_amplitude(&self, port: OutPort, freq_hz: f64) -> f64 {
        match (self, port) {
            (ComponentModel::GratingCoupler(p), OutPort::Out) => p.amplitude(freq_hz),
            (ComponentModel::Dbr(d), OutPort::Out) => amplitude_from_loss_db(d.params().insertion_loss_db),
            (ComponentModel::Tap { fraction }, OutPort::Out) => (1.0 - fraction).sqrt(),
            (ComponentModel::Tap { fraction }, OutPort::Tap) => fraction.sqrt(),
            (ComponentModel::Attenuator { loss_db }, _) => amplitude_from_loss_db(*loss_db),
            _ => 1.0,
        }
    }

    /// True for rings and gratings, the elements that carve the spectrum.
    pub fn is_filter(&self) -> bool {
        matches!(self, ComponentModel::AllPassRing { .. } | ComponentModel::AddDropRing { .. } | ComponentModel::Dbr(_))
    }
}
