//! Feed-forward composition of components into chips and links.
//!
//! Every component has a single input `in`; each output port drives at most
//! one downstream input or one external port. The graph is therefore a tree
//! rooted at the external input and the path to any port is unique.

mod presets;
mod text;

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use num_complex::Complex64;

use crate::components::{ComponentModel, HeaterState, OutPort, StrayPathParams};
use crate::exec::Exec;
use crate::optimize::scan_then_golden;
use crate::spectral::{
    db_from_linear, linear_from_db, power_db, wavelength_to_frequency, ComplexSpectrum, FrequencyGrid, PowerSpectrumDb,
    DEFAULT_DB_FLOOR,
};
use crate::{Error, Result};

pub use presets::{
    chip_preset, PresetKind, ADD_DROP_HEATER, COUPLER_CENTER_M, FIBER_LOSS_DB, GENERATION_HEATER,
    GENERATION_HEATER_CURRENT_A, PUMP_WAVELENGTH_M,
};
pub(crate) use text::fmt as fmt_number;
pub use text::{
    build_component, component_params, emit_netlist, parse_netlist, parse_netlist_lines, set_component_param,
};

/// Name of the single external input.
pub const INPUT: &str = "input";

/// Heater current ceiling used by the tuner.
pub const DEFAULT_MAX_CURRENT_A: f64 = 30e-3;

/// An output port of a named component, written `name.port`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PortRef {
    pub component: String,
    pub port: OutPort,
}

impl PortRef {
    pub fn new(component: impl Into<String>, port: OutPort) -> Self {
        PortRef { component: component.into(), port }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.component, self.port)
    }
}

impl FromStr for PortRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (c, p) =
            s.rsplit_once('.').ok_or_else(|| Error::Netlist(format!("expected `component.port`, got `{s}`")))?;
        Ok(PortRef::new(c, p.parse()?))
    }
}

/// Where a signal comes from: the external input or a component output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Input,
    Port(PortRef),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Input => f.write_str(INPUT),
            Endpoint::Port(p) => p.fmt(f),
        }
    }
}

/// One hop of a path: light enters `component` and leaves by `port`.
pub type Stage = PortRef;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Netlist {
    components: IndexMap<String, ComponentModel>,
    /// Source feeding each component's `in`.
    drivers: IndexMap<String, Endpoint>,
    outputs: IndexMap<String, Endpoint>,
}

fn check_name(name: &str) -> Result<()> {
    let ok =
        !name.is_empty() && name != INPUT && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(Error::Netlist(format!("invalid name `{name}`")))
    }
}

impl Netlist {
    pub fn new() -> Self {
        Netlist::default()
    }

    pub fn add_component(&mut self, name: &str, model: ComponentModel) -> Result<()> {
        check_name(name)?;
        if self.components.contains_key(name) {
            return Err(Error::Netlist(format!("duplicate component `{name}`")));
        }
        self.components.insert(name.to_string(), model);
        Ok(())
    }

    /// Swaps the model of an existing component. Ports in use must survive.
    pub fn replace_component(&mut self, name: &str, model: ComponentModel) -> Result<()> {
        let used: Vec<OutPort> = self.used_ports().filter(|p| p.component == name).map(|p| p.port).collect();
        if let Some(p) = used.iter().find(|p| !model.has_port(**p)) {
            return Err(Error::Netlist(format!(
                "`{name}` is wired through port `{p}` which a {} lacks",
                model.kind_name()
            )));
        }
        let slot =
            self.components.get_mut(name).ok_or_else(|| Error::Netlist(format!("unknown component `{name}`")))?;
        *slot = model;
        Ok(())
    }

    fn used_ports(&self) -> impl Iterator<Item = &PortRef> {
        self.drivers.values().chain(self.outputs.values()).filter_map(|e| match e {
            Endpoint::Port(p) => Some(p),
            Endpoint::Input => None,
        })
    }

    fn check_source(&self, from: &Endpoint) -> Result<()> {
        if let Endpoint::Port(p) = from {
            let model = self
                .components
                .get(&p.component)
                .ok_or_else(|| Error::Netlist(format!("unknown component `{}`", p.component)))?;
            if !model.has_port(p.port) {
                return Err(Error::Netlist(format!(
                    "{} `{}` has no port `{}`",
                    model.kind_name(),
                    p.component,
                    p.port
                )));
            }
            if self.used_ports().any(|u| u == p) {
                return Err(Error::Netlist(format!("port `{p}` is already wired")));
            }
        }
        Ok(())
    }

    /// Feeds `to`'s input from `from`.
    pub fn connect(&mut self, from: Endpoint, to: &str) -> Result<()> {
        if !self.components.contains_key(to) {
            return Err(Error::Netlist(format!("unknown component `{to}`")));
        }
        if self.drivers.contains_key(to) {
            return Err(Error::Netlist(format!("`{to}.in` already has a driver")));
        }
        if from == Endpoint::Input && self.drivers.values().any(|e| *e == Endpoint::Input) {
            return Err(Error::Netlist("the external input is already wired".into()));
        }
        self.check_source(&from)?;
        self.drivers.insert(to.to_string(), from);
        Ok(())
    }

    /// Publishes `at` as the external output `name`.
    pub fn expose(&mut self, name: &str, at: Endpoint) -> Result<()> {
        check_name(name)?;
        if self.outputs.contains_key(name) {
            return Err(Error::Netlist(format!("duplicate external port `{name}`")));
        }
        self.check_source(&at)?;
        self.outputs.insert(name.to_string(), at);
        Ok(())
    }

    pub fn components(&self) -> &IndexMap<String, ComponentModel> {
        &self.components
    }

    pub fn component(&self, name: &str) -> Option<&ComponentModel> {
        self.components.get(name)
    }

    pub fn drivers(&self) -> &IndexMap<String, Endpoint> {
        &self.drivers
    }

    pub fn outputs(&self) -> &IndexMap<String, Endpoint> {
        &self.outputs
    }

    pub fn output_names(&self) -> Vec<String> {
        self.outputs.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    fn trace(&self, mut at: Endpoint) -> Result<Vec<Stage>> {
        let mut path = Vec::new();
        while let Endpoint::Port(p) = at {
            if path.len() > self.components.len() {
                return Err(Error::Netlist(format!("feedback loop through `{}`", p.component)));
            }
            at = self
                .drivers
                .get(&p.component)
                .cloned()
                .ok_or_else(|| Error::Disconnected(format!("{}.in", p.component)))?;
            path.push(p);
        }
        path.reverse();
        Ok(path)
    }

    /// Stages from the input to the external port `port`, in light order.
    pub fn path(&self, port: &str) -> Result<Vec<Stage>> {
        let at = self
            .outputs
            .get(port)
            .ok_or_else(|| Error::UnknownPort { port: port.to_string(), valid: self.output_names().join(", ") })?;
        self.trace(at.clone())
    }

    /// Path from the input to the output `port` of `component`.
    pub fn path_to(&self, component: &str, port: OutPort) -> Result<Vec<Stage>> {
        let model =
            self.components.get(component).ok_or_else(|| Error::Netlist(format!("unknown component `{component}`")))?;
        if !model.has_port(port) {
            return Err(Error::Netlist(format!("`{component}` has no port `{port}`")));
        }
        self.trace(Endpoint::Port(PortRef::new(component, port)))
    }

    /// Checks the DAG and input reachability of every external output.
    pub fn validate(&self) -> Result<()> {
        if self.outputs.is_empty() {
            return Err(Error::Netlist("netlist exposes no external output".into()));
        }
        for name in self.components.keys() {
            if let Some(d) = self.drivers.get(name) {
                self.trace(d.clone())?;
            }
        }
        for name in self.outputs.keys() {
            self.path(name)?;
        }
        Ok(())
    }
}

/// A netlist plus the operating point it is evaluated at.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub netlist: Netlist,
    pub pump_wavelength_m: f64,
    /// Pump power in the bus waveguide, after the input coupler.
    pub pump_power_w: f64,
    pub heater_currents_a: IndexMap<String, f64>,
    pub grid: FrequencyGrid,
    pub stray: StrayPathParams,
}

impl Scenario {
    pub fn new(netlist: Netlist, pump_wavelength_m: f64, pump_power_w: f64, grid: FrequencyGrid) -> Self {
        Scenario {
            netlist,
            pump_wavelength_m,
            pump_power_w,
            heater_currents_a: IndexMap::new(),
            grid,
            stray: StrayPathParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.netlist.validate()?;
        let fp = self.pump_hz()?;
        if !self.grid.contains(fp) {
            return Err(Error::Config(format!(
                "pump at {:.4} nm lies outside the frequency grid",
                self.pump_wavelength_m * 1e9
            )));
        }
        if !(self.pump_power_w >= 0.0) {
            return Err(Error::Config("pump power must be non-negative".into()));
        }
        for (name, &current) in &self.heater_currents_a {
            self.heater_spec(name)?;
            if !(current >= 0.0) {
                return Err(Error::Config(format!("heater current for `{name}` must be non-negative")));
            }
        }
        if self.stray.is_enabled() {
            self.stray.validate()?;
        }
        Ok(())
    }

    pub fn pump_hz(&self) -> Result<f64> {
        wavelength_to_frequency(self.pump_wavelength_m)
    }

    fn heater_spec(&self, name: &str) -> Result<crate::components::HeaterSpec> {
        self.netlist
            .component(name)
            .ok_or_else(|| Error::Config(format!("unknown component `{name}`")))?
            .heater()
            .ok_or_else(|| Error::Config(format!("component `{name}` has no heater")))
    }

    /// Heater state of `name`, current 0 if unset.
    pub fn heater_state(&self, name: &str) -> Result<HeaterState> {
        let spec = self.heater_spec(name)?;
        Ok(spec.state(self.heater_currents_a.get(name).copied().unwrap_or(0.0)))
    }

    pub fn set_heater_current(&mut self, name: &str, current_a: f64) -> Result<()> {
        self.heater_spec(name)?;
        self.heater_currents_a.insert(name.to_string(), current_a);
        Ok(())
    }

    fn shift_hz(&self, name: &str) -> f64 {
        self.heater_state(name).map(|h| h.shift_hz()).unwrap_or(0.0)
    }

    fn model(&self, name: &str) -> &ComponentModel {
        &self.netlist.components[name]
    }

    pub fn stage_transfer(&self, stage: &Stage, freq_hz: f64) -> Complex64 {
        self.model(&stage.component).transfer(stage.port, freq_hz, self.shift_hz(&stage.component))
    }

    /// Ordered product of stage responses, without stray light.
    pub fn path_transfer(&self, path: &[Stage], freq_hz: f64) -> Complex64 {
        path.iter().fold(Complex64::new(1.0, 0.0), |acc, s| acc * self.stage_transfer(s, freq_hz))
    }

    /// Product of the non-filtering parts of each stage.
    pub fn path_baseline(&self, path: &[Stage], freq_hz: f64) -> f64 {
        path.iter().map(|s| self.model(&s.component).baseline_amplitude(s.port, freq_hz)).product()
    }

    /// Path response with the stray path added at the chip output. The stray
    /// level is referenced to the path baseline so `floor_db` is the deepest
    /// extinction an output can show.
    pub fn path_transfer_with_stray(&self, path: &[Stage], freq_hz: f64) -> Complex64 {
        let main = self.path_transfer(path, freq_hz);
        if path.is_empty() || !self.stray.is_enabled() {
            return main;
        }
        self.stray.combine(main, Complex64::new(self.path_baseline(path, freq_hz), 0.0))
    }

    /// Field transfer from the input to external port `port` at one frequency.
    pub fn port_transfer(&self, port: &str, freq_hz: f64) -> Result<Complex64> {
        let path = self.netlist.path(port)?;
        Ok(self.path_transfer_with_stray(&path, freq_hz))
    }
}

/// Spectrum seen at an external port.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResponse {
    pub port: String,
    pub spectrum: ComplexSpectrum,
}

impl PathResponse {
    /// Transfer at `lambda_m`, interpolated linearly between grid samples.
    pub fn at(&self, lambda_m: f64) -> Result<Complex64> {
        let f = wavelength_to_frequency(lambda_m)?;
        let grid = self.spectrum.grid();
        if !grid.contains(f) {
            return Err(Error::Domain(format!("{:.4} nm lies outside the grid", lambda_m * 1e9)));
        }
        let pos = (f - grid.start_hz()) / grid.spacing();
        let i = (pos.floor() as usize).min(grid.len() - 2);
        let w = pos - i as f64;
        let v = self.spectrum.values();
        Ok(v[i] * (1.0 - w) + v[i + 1] * w)
    }

    pub fn power_db(&self) -> PowerSpectrumDb {
        power_db(&self.spectrum)
    }
}

pub fn evaluate_port(scenario: &Scenario, port: &str) -> Result<PathResponse> {
    evaluate_port_with(scenario, port, Exec::default())
}

pub fn evaluate_port_with(scenario: &Scenario, port: &str, exec: Exec) -> Result<PathResponse> {
    let path = scenario.netlist.path(port)?;
    let spectrum = ComplexSpectrum::from_fn(scenario.grid, exec, |f| scenario.path_transfer_with_stray(&path, f));
    Ok(PathResponse { port: port.to_string(), spectrum })
}

/// Product spectrum of an arbitrary run of stages on the scenario grid.
pub fn evaluate_stages(scenario: &Scenario, stages: &[Stage], exec: Exec) -> ComplexSpectrum {
    ComplexSpectrum::from_fn(scenario.grid, exec, |f| scenario.path_transfer(stages, f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TuneObjective {
    MinimizeThrough,
    MaximizeDrop,
}

impl FromStr for TuneObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minimize_through" | "through" => Ok(TuneObjective::MinimizeThrough),
            "maximize_drop" | "drop" => Ok(TuneObjective::MaximizeDrop),
            other => Err(Error::Config(format!("unknown tuning objective `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneOptions {
    pub max_current_a: f64,
    pub current_tol_a: f64,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions { max_current_a: DEFAULT_MAX_CURRENT_A, current_tol_a: 1e-8 }
    }
}

pub fn auto_tune(
    scenario: &Scenario,
    component: &str,
    target_wavelength_m: f64,
    objective: TuneObjective,
) -> Result<HeaterState> {
    auto_tune_with(scenario, component, target_wavelength_m, objective, TuneOptions::default())
}

/// Golden-section search over heater current for the best objective at the
/// target wavelength. Only the tuned component depends on its current, so
/// optimising its own response is the same as optimising any port through it.
pub fn auto_tune_with(
    scenario: &Scenario,
    component: &str,
    target_wavelength_m: f64,
    objective: TuneObjective,
    opts: TuneOptions,
) -> Result<HeaterState> {
    let model = scenario
        .netlist
        .component(component)
        .ok_or_else(|| Error::Config(format!("unknown component `{component}`")))?;
    let base = scenario.heater_state(component)?;
    let ring = model.ring().expect("heated components are rings");
    let port = match (objective, model) {
        (TuneObjective::MinimizeThrough, ComponentModel::AllPassRing { .. }) => OutPort::Out,
        (TuneObjective::MinimizeThrough, _) => OutPort::Through,
        (TuneObjective::MaximizeDrop, ComponentModel::AddDropRing { .. }) => OutPort::Drop,
        (TuneObjective::MaximizeDrop, _) => {
            return Err(Error::Config(format!("`{component}` has no drop port to maximise")))
        }
    };
    let target = wavelength_to_frequency(target_wavelength_m)?;
    let max_shift = base.with_current(opts.max_current_a).shift_hz().abs();
    let needed = ring.red_shift_to(target, 0.0);
    let fwhm = ring.fwhm_hz();
    if needed > max_shift + fwhm && ring.fsr_hz() - needed > fwhm {
        return Err(Error::Tuning(format!(
            "`{component}` needs a {:.1} GHz red shift but {:.1} mA only reaches {:.1} GHz",
            needed * 1e-9,
            opts.max_current_a * 1e3,
            max_shift * 1e-9
        )));
    }
    let sign = if objective == TuneObjective::MaximizeDrop { -1.0 } else { 1.0 };
    let f = |i: f64| sign * model.transfer(port, target, base.with_current(i).shift_hz()).norm_sqr();
    // shift grows as I², so the scan step near I_max must stay below the linewidth
    let n = ((8.0 * max_shift / fwhm).ceil() as usize + 1).clamp(64, 1_000_000);
    let best = scan_then_golden(f, 0.0, opts.max_current_a, n, opts.current_tol_a)
        .map_err(|e| Error::Tuning(format!("`{component}`: {e}")))?;
    Ok(base.with_current(best.x))
}

/// Pump extinction per filtering stage along one output path.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtinctionReport {
    pub port: String,
    /// Component name → extinction in dB at the pump, relative to the
    /// component's non-resonant transmission.
    pub stages: IndexMap<String, f64>,
    /// Whole-path extinction without the stray path.
    pub cumulative_db: f64,
    /// Whole-path extinction with the stray path, when enabled.
    pub cumulative_with_stray_db: Option<f64>,
    /// Deepest Bragg-stage extinction readable through the stray floor.
    pub dbr_floor_db: Option<f64>,
}

impl ExtinctionReport {
    pub fn to_map(&self) -> IndexMap<String, f64> {
        let mut m = self.stages.clone();
        m.insert("cumulative".into(), self.cumulative_db);
        if let Some(v) = self.cumulative_with_stray_db {
            m.insert("cumulative_with_stray".into(), v);
        }
        if let Some(v) = self.dbr_floor_db {
            m.insert("dbr_floor_with_stray".into(), v);
        }
        m
    }
}

fn extinction_db(power_ratio: f64) -> f64 {
    (-db_from_linear(power_ratio)).min(-DEFAULT_DB_FLOOR)
}

pub fn extinction_report(scenario: &Scenario, port: &str) -> Result<ExtinctionReport> {
    let path = scenario.netlist.path(port)?;
    let fp = scenario.pump_hz()?;
    let mut stages = IndexMap::new();
    for stage in &path {
        let model = scenario.model(&stage.component);
        if !model.is_filter() {
            continue;
        }
        let t = scenario.stage_transfer(stage, fp).norm() / model.baseline_amplitude(stage.port, fp);
        stages.insert(stage.component.clone(), extinction_db(t * t));
    }
    let base = scenario.path_baseline(&path, fp);
    let ratio = (scenario.path_transfer(&path, fp).norm() / base).powi(2);
    let cumulative_db = extinction_db(ratio);
    let (with_stray, dbr_floor) = if scenario.stray.is_enabled() {
        let floor = linear_from_db(scenario.stray.floor_db);
        let dbr = path.iter().find_map(|s| match scenario.model(&s.component) {
            ComponentModel::Dbr(d) => Some(d),
            _ => None,
        });
        let dbr_floor = dbr.map(|d| {
            let t = d.grating_response(d.params().center_hz()).0.norm_sqr();
            extinction_db(t + floor)
        });
        (Some(extinction_db(ratio + floor)), dbr_floor)
    } else {
        (None, None)
    };
    Ok(ExtinctionReport {
        port: port.to_string(),
        stages,
        cumulative_db,
        cumulative_with_stray_db: with_stray,
        dbr_floor_db: dbr_floor,
    })
}
