//! The single-chip source and the two-chip fibre link.

use std::fmt;
use std::str::FromStr;

use crate::components::{
    ComponentModel, Dbr, DbrParams, GratingCouplerParams, HeaterSpec, OutPort, Ring, RingKind, RingParams,
};
use crate::spectral::SPEED_OF_LIGHT;
use crate::Error;

use super::{Endpoint, Netlist, PortRef};

/// Pump wavelength the chips are anchored to.
pub const PUMP_WAVELENGTH_M: f64 = 1524.7e-9;

/// Generation-ring drive current that brings a resonance onto the pump.
pub const GENERATION_HEATER_CURRENT_A: f64 = 11.2e-3;

/// 4 GHz/mW into 200 Ω: 720 GHz of reach at 30 mA, just under one FSR.
pub const GENERATION_HEATER: HeaterSpec = HeaterSpec { shift_coefficient_hz_per_w: 4e12, resistance_ohm: 200.0 };

/// 10 GHz/mW into 200 Ω: 1.8 THz of reach, just under the add-drop FSR.
pub const ADD_DROP_HEATER: HeaterSpec = HeaterSpec { shift_coefficient_hz_per_w: 1e13, resistance_ohm: 200.0 };

/// Fabrication detuning of the add-drop combs above the pump. The add-drop
/// comb repeats every half generation FSR (388 GHz) modulo the emission
/// lines, so offsets near a quarter of that keep untuned filters off every
/// line.
const AD1_OFFSET_HZ: f64 = 190e9;
const AD2_OFFSET_HZ: f64 = 580e9;

/// Grating-coupler passband centre, a little red of the pump.
pub const COUPLER_CENTER_M: f64 = 1529.3e-9;

/// Fibre loss between the chips that brings the two-chip budget (ring to
/// detectors, efficiencies included) to 68 dB.
pub const FIBER_LOSS_DB: f64 = 1.4605;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    ChipA,
    ChipB,
    TwoChipLink,
}

impl PresetKind {
    pub const ALL: [PresetKind; 3] = [PresetKind::ChipA, PresetKind::ChipB, PresetKind::TwoChipLink];

    pub fn name(&self) -> &'static str {
        match self {
            PresetKind::ChipA => "chip_a",
            PresetKind::ChipB => "chip_b",
            PresetKind::TwoChipLink => "two_chip_link",
        }
    }
}

impl fmt::Display for PresetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PresetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        PresetKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset `{s}` (chip_a, chip_b, two_chip_link)")))
    }
}

fn pump_hz() -> f64 {
    SPEED_OF_LIGHT / PUMP_WAVELENGTH_M
}

fn generation_ring() -> ComponentModel {
    let mut p = RingParams::generation_ring(pump_hz());
    p.resonance_offset_hz = GENERATION_HEATER.state(GENERATION_HEATER_CURRENT_A).shift_hz().abs();
    ComponentModel::AllPassRing {
        ring: Ring::new(p, RingKind::AllPass).expect("default generation ring solves"),
        heater: GENERATION_HEATER,
    }
}

fn add_drop(offset_hz: f64) -> ComponentModel {
    let mut p = RingParams::add_drop_filter(pump_hz());
    p.resonance_offset_hz = offset_hz;
    ComponentModel::AddDropRing {
        ring: Ring::new(p, RingKind::AddDrop).expect("default add-drop ring solves"),
        heater: ADD_DROP_HEATER,
    }
}

fn coupler() -> ComponentModel {
    ComponentModel::GratingCoupler(GratingCouplerParams {
        center_wavelength_m: COUPLER_CENTER_M,
        ..GratingCouplerParams::default()
    })
}

/// Components of one chip in light order, with the port feeding the next.
const CHAIN: [(&str, OutPort); 7] = [
    ("gc_in", OutPort::Out),
    ("gen_ring", OutPort::Out),
    ("tap", OutPort::Out),
    ("dbr", OutPort::Out),
    ("ad1", OutPort::Through),
    ("ad2", OutPort::Through),
    ("gc_out", OutPort::Out),
];

/// Adds one chip with component names prefixed by `prefix`, fed by `from`.
/// Returns the chip's four outputs as (name, port).
fn add_chip(n: &mut Netlist, prefix: &str, from: Endpoint) -> Vec<(&'static str, PortRef)> {
    let name = |s: &str| format!("{prefix}{s}");
    let parts: [(&str, ComponentModel); 7] = [
        ("gc_in", coupler()),
        ("gen_ring", generation_ring()),
        ("tap", ComponentModel::Tap { fraction: 0.2 }),
        ("dbr", ComponentModel::Dbr(Dbr::new(DbrParams::default()).expect("default DBR is valid"))),
        ("ad1", add_drop(AD1_OFFSET_HZ)),
        ("ad2", add_drop(AD2_OFFSET_HZ)),
        ("gc_out", coupler()),
    ];
    for (c, m) in parts {
        n.add_component(&name(c), m).expect("preset names are unique");
    }
    n.connect(from, &name(CHAIN[0].0)).expect("preset wiring is valid");
    for pair in CHAIN.windows(2) {
        let (c, port) = pair[0];
        n.connect(Endpoint::Port(PortRef::new(name(c), port)), &name(pair[1].0)).expect("preset wiring is valid");
    }
    vec![
        ("common_through", PortRef::new(name("gc_out"), OutPort::Out)),
        ("drop_1", PortRef::new(name("ad1"), OutPort::Drop)),
        ("drop_2", PortRef::new(name("ad2"), OutPort::Drop)),
        ("monitor", PortRef::new(name("tap"), OutPort::Tap)),
    ]
}

pub fn chip_preset(kind: PresetKind) -> Netlist {
    let mut n = Netlist::new();
    let outputs = match kind {
        PresetKind::ChipA | PresetKind::ChipB => add_chip(&mut n, "", Endpoint::Input),
        PresetKind::TwoChipLink => {
            let a = add_chip(&mut n, "a_", Endpoint::Input);
            let a_out = a.into_iter().find(|(k, _)| *k == "common_through").expect("chip has a through port").1;
            n.add_component("fiber", ComponentModel::Attenuator { loss_db: FIBER_LOSS_DB })
                .expect("preset names are unique");
            n.connect(Endpoint::Port(a_out), "fiber").expect("preset wiring is valid");
            add_chip(&mut n, "b_", Endpoint::Port(PortRef::new("fiber", OutPort::Out)))
        }
    };
    for (name, at) in outputs {
        n.expose(name, Endpoint::Port(at)).expect("preset ports are unique");
    }
    n
}
