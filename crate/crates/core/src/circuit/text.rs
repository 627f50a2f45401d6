//! Line-oriented netlist format.
//!
//! ```text
//! component gen_ring ring_all_pass radius_um=15 q=40000 offset_ghz=100.352
//! connect gc_in.out gen_ring.in
//! port input gc_in.in
//! port common_through gc_out.out
//! ```
//!
//! Values use engineering units (nm, µm, GHz, THz, dB). `port <name> input`
//! wires an output straight to the external input.

use indexmap::IndexMap;

use crate::components::{
    ComponentModel, CouplingRegime, Dbr, DbrParams, GratingCouplerParams, HeaterSpec, Ring, RingKind, RingParams,
};
use crate::spectral::SPEED_OF_LIGHT;
use crate::{Error, Result};

use super::presets::PUMP_WAVELENGTH_M;
use super::{Endpoint, Netlist, PortRef, INPUT};

/// Shortest form after rounding to 12 significant digits, so unit
/// conversions do not leave `1527.0000000000002` in files.
pub(crate) fn fmt(x: f64) -> String {
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    let a = rounded.abs();
    if a != 0.0 && a.is_finite() && !(1e-3..1e9).contains(&a) {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

/// Key/value parameters of a component, in emission order.
pub fn component_params(model: &ComponentModel) -> IndexMap<&'static str, String> {
    let mut kv = IndexMap::new();
    match model {
        ComponentModel::GratingCoupler(p) => {
            kv.insert("center_nm", fmt(p.center_wavelength_m * 1e9));
            kv.insert("loss_db", fmt(p.peak_insertion_loss_db));
            kv.insert("bw_1db_nm", fmt(p.bandwidth_1db_m * 1e9));
        }
        ComponentModel::AllPassRing { ring, heater } | ComponentModel::AddDropRing { ring, heater } => {
            let p = ring.params();
            kv.insert("radius_um", fmt(p.radius_m * 1e6));
            kv.insert("ng", fmt(p.group_index));
            kv.insert("q", fmt(p.loaded_q));
            let regime = match p.coupling {
                CouplingRegime::Critical => "critical",
                CouplingRegime::OverCoupled => "over",
                CouplingRegime::UnderCoupled => "under",
                CouplingRegime::Explicit { t1, t2, a } => {
                    kv.insert("t1", fmt(t1));
                    kv.insert("t2", fmt(t2));
                    kv.insert("a", fmt(a));
                    "explicit"
                }
            };
            kv.insert("coupling", regime.to_string());
            if ring.kind() == RingKind::AllPass {
                kv.insert("ratio", fmt(p.coupling_ratio));
            } else {
                kv.insert("drop_loss_db", fmt(p.drop_insertion_loss_db));
            }
            kv.insert("anchor_nm", fmt(SPEED_OF_LIGHT / p.anchor_hz * 1e9));
            kv.insert("offset_ghz", fmt(p.resonance_offset_hz * 1e-9));
            kv.insert("lossless", p.lossless.to_string());
            kv.insert("heater_ghz_per_mw", fmt(heater.shift_coefficient_hz_per_w * 1e-12));
            kv.insert("heater_ohm", fmt(heater.resistance_ohm));
        }
        ComponentModel::Dbr(d) => {
            let p = d.params();
            kv.insert("period_nm", fmt(p.period_m * 1e9));
            kv.insert("periods", p.n_periods.to_string());
            kv.insert("n_eff", fmt(p.n_eff));
            kv.insert("delta_n", fmt(p.delta_n));
            kv.insert("gap_nm", fmt(p.bend_gap_m * 1e9));
            kv.insert("loss_db", fmt(p.insertion_loss_db));
            kv.insert("offset_nm", fmt(p.center_offset_m * 1e9));
        }
        ComponentModel::Tap { fraction } => {
            kv.insert("fraction", fmt(*fraction));
        }
        ComponentModel::Attenuator { loss_db } => {
            kv.insert("loss_db", fmt(*loss_db));
        }
    }
    kv
}

struct Kv<'a> {
    kind: &'a str,
    map: IndexMap<String, String>,
}

impl Kv<'_> {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.shift_remove(key)
    }

    fn num(&mut self, key: &str, default: f64, scale: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .map(|x| x * scale)
                .map_err(|_| Error::Config(format!("{}: `{key}` expects a number, got `{v}`", self.kind))),
        }
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            None => Ok(()),
            Some(k) => Err(Error::Config(format!("{}: unknown parameter `{k}`", self.kind))),
        }
    }
}

/// Builds a component of `kind` from key/value strings; missing keys take
/// the preset defaults.
pub fn build_component(kind: &str, params: &IndexMap<String, String>) -> Result<ComponentModel> {
    let mut kv = Kv { kind, map: params.clone() };
    let model = match kind {
        "grating_coupler" => {
            let d = GratingCouplerParams::default();
            let p = GratingCouplerParams {
                center_wavelength_m: kv.num("center_nm", d.center_wavelength_m, 1e-9)?,
                peak_insertion_loss_db: kv.num("loss_db", d.peak_insertion_loss_db, 1.0)?,
                bandwidth_1db_m: kv.num("bw_1db_nm", d.bandwidth_1db_m, 1e-9)?,
            };
            p.validate()?;
            ComponentModel::GratingCoupler(p)
        }
        "ring_all_pass" | "ring_add_drop" => {
            let all_pass = kind == "ring_all_pass";
            let anchor_m = kv.num("anchor_nm", PUMP_WAVELENGTH_M, 1e-9)?;
            let anchor = SPEED_OF_LIGHT / anchor_m;
            let d = if all_pass { RingParams::generation_ring(anchor) } else { RingParams::add_drop_filter(anchor) };
            let coupling = match kv.take("coupling").as_deref() {
                None => d.coupling,
                Some("critical") => CouplingRegime::Critical,
                Some("over") => CouplingRegime::OverCoupled,
                Some("under") => CouplingRegime::UnderCoupled,
                Some("explicit") => CouplingRegime::Explicit {
                    t1: kv.num("t1", f64::NAN, 1.0)?,
                    t2: kv.num("t2", 1.0, 1.0)?,
                    a: kv.num("a", f64::NAN, 1.0)?,
                },
                Some(other) => return Err(Error::Config(format!("{kind}: unknown coupling `{other}`"))),
            };
            let lossless = match kv.take("lossless").as_deref() {
                None | Some("false") => false,
                Some("true") => true,
                Some(other) => {
                    return Err(Error::Config(format!("{kind}: `lossless` expects true/false, got `{other}`")))
                }
            };
            let p = RingParams {
                radius_m: kv.num("radius_um", d.radius_m, 1e-6)?,
                group_index: kv.num("ng", d.group_index, 1.0)?,
                loaded_q: kv.num("q", d.loaded_q, 1.0)?,
                coupling,
                coupling_ratio: if all_pass { kv.num("ratio", d.coupling_ratio, 1.0)? } else { d.coupling_ratio },
                anchor_hz: anchor,
                resonance_offset_hz: kv.num("offset_ghz", 0.0, 1e9)?,
                drop_insertion_loss_db: if all_pass {
                    0.0
                } else {
                    kv.num("drop_loss_db", d.drop_insertion_loss_db, 1.0)?
                },
                lossless,
            };
            let heater = HeaterSpec {
                shift_coefficient_hz_per_w: kv.num("heater_ghz_per_mw", 0.0, 1e12)?,
                resistance_ohm: kv.num("heater_ohm", 0.0, 1.0)?,
            };
            if all_pass {
                ComponentModel::AllPassRing { ring: Ring::new(p, RingKind::AllPass)?, heater }
            } else {
                ComponentModel::AddDropRing { ring: Ring::new(p, RingKind::AddDrop)?, heater }
            }
        }
        "dbr" => {
            let d = DbrParams::default();
            let periods = match kv.take("periods") {
                None => d.n_periods,
                Some(v) => {
                    v.parse().map_err(|_| Error::Config(format!("dbr: `periods` expects an integer, got `{v}`")))?
                }
            };
            let p = DbrParams {
                period_m: kv.num("period_nm", d.period_m, 1e-9)?,
                n_periods: periods,
                n_eff: kv.num("n_eff", d.n_eff, 1.0)?,
                delta_n: kv.num("delta_n", d.delta_n, 1.0)?,
                bend_gap_m: kv.num("gap_nm", d.bend_gap_m, 1e-9)?,
                insertion_loss_db: kv.num("loss_db", d.insertion_loss_db, 1.0)?,
                center_offset_m: kv.num("offset_nm", d.center_offset_m, 1e-9)?,
            };
            ComponentModel::Dbr(Dbr::new(p)?)
        }
        "tap" => {
            let fraction = kv.num("fraction", 0.2, 1.0)?;
            if !(0.0..1.0).contains(&fraction) {
                return Err(Error::Domain(format!("tap fraction must lie in [0, 1), got {fraction}")));
            }
            ComponentModel::Tap { fraction }
        }
        "attenuator" => {
            let loss_db = kv.num("loss_db", 0.0, 1.0)?;
            if !(loss_db >= 0.0) {
                return Err(Error::Domain(format!("attenuator loss must be non-negative, got {loss_db}")));
            }
            ComponentModel::Attenuator { loss_db }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown component kind `{other}` (grating_coupler, ring_all_pass, ring_add_drop, dbr, tap, attenuator)"
            )))
        }
    };
    kv.finish()?;
    Ok(model)
}

/// Rebuilds `model` with one parameter changed.
pub fn set_component_param(model: &ComponentModel, key: &str, value: &str) -> Result<ComponentModel> {
    let mut kv: IndexMap<String, String> =
        component_params(model).into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let explicit_key = matches!(key, "t1" | "t2" | "a");
    if !kv.contains_key(key) && !explicit_key {
        return Err(Error::Config(format!("{}: unknown parameter `{key}`", model.kind_name())));
    }
    kv.insert(key.to_string(), value.to_string());
    build_component(model.kind_name(), &kv)
}

pub fn emit_netlist(n: &Netlist) -> String {
    let mut out = String::new();
    for (name, model) in n.components() {
        out.push_str(&format!("component {name} {}", model.kind_name()));
        for (k, v) in component_params(model) {
            out.push_str(&format!(" {k}={v}"));
        }
        out.push('\n');
    }
    let mut input = None;
    for (to, from) in n.drivers() {
        match from {
            Endpoint::Input => input = Some(to),
            Endpoint::Port(p) => out.push_str(&format!("connect {p} {to}.in\n")),
        }
    }
    if let Some(to) = input {
        out.push_str(&format!("port {INPUT} {to}.in\n"));
    }
    for (name, at) in n.outputs() {
        out.push_str(&format!("port {name} {at}\n"));
    }
    out
}

pub fn parse_netlist(text: &str) -> Result<Netlist> {
    parse_netlist_lines(text.lines().enumerate().map(|(i, l)| (i + 1, l)))
}

fn input_of(s: &str) -> Option<&str> {
    s.strip_suffix(".in")
}

/// Parses numbered lines; components are created first so wiring may refer
/// to components declared later in the file.
pub fn parse_netlist_lines<'a>(lines: impl IntoIterator<Item = (usize, &'a str)>) -> Result<Netlist> {
    let mut n = Netlist::new();
    let mut wiring = Vec::new();
    for (line, raw) in lines {
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line, msg };
        let words: Vec<&str> = text.split_whitespace().collect();
        match words[0] {
            "component" => {
                if words.len() < 3 {
                    return Err(err("expected `component <name> <kind> key=value ...`".into()));
                }
                let mut kv = IndexMap::new();
                for w in &words[3..] {
                    let (k, v) = w.split_once('=').ok_or_else(|| err(format!("expected key=value, got `{w}`")))?;
                    kv.insert(k.to_string(), v.to_string());
                }
                let model = build_component(words[2], &kv).map_err(|e| err(e.to_string()))?;
                n.add_component(words[1], model).map_err(|e| err(e.to_string()))?;
            }
            "connect" | "port" if words.len() == 3 => wiring.push((line, words[0], words[1], words[2])),
            "connect" => return Err(err("expected `connect <name.port> <name.in>`".into())),
            "port" => return Err(err("expected `port <external> <name.port>`".into())),
            other => return Err(err(format!("unknown directive `{other}`"))),
        }
    }
    for (line, directive, a, b) in wiring {
        let err = |e: Error| Error::Parse { line, msg: e.to_string() };
        match directive {
            "connect" => {
                let to =
                    input_of(b).ok_or_else(|| err(Error::Netlist(format!("`{b}` is not an input (`name.in`)"))))?;
                let from = if a == INPUT { Endpoint::Input } else { Endpoint::Port(a.parse().map_err(err)?) };
                n.connect(from, to).map_err(err)?;
            }
            _ if a == INPUT => {
                let to =
                    input_of(b).ok_or_else(|| err(Error::Netlist(format!("`{b}` is not an input (`name.in`)"))))?;
                n.connect(Endpoint::Input, to).map_err(err)?;
            }
            _ => {
                let at = if b == INPUT { Endpoint::Input } else { Endpoint::Port(b.parse::<PortRef>().map_err(err)?) };
                n.expose(a, at).map_err(err)?;
            }
        }
    }
    Ok(n)
}
