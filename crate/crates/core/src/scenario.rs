//! Complete run descriptions: a netlist plus pump, grid, heater, pair
//! source, detector, counting and loss-budget settings.
//!
//! The file format is the netlist text format followed by `[section]`
//! blocks of `key = value` lines:
//!
//! ```text
//! component gc_in grating_coupler center_nm=1529.3
//! ...
//! [pump]
//! wavelength_nm = 1524.7
//! power_mw = 1
//! [heaters]
//! gen_ring = 11.2
//! ```
//!
//! Heater currents are in mA. Settings are addressed as `section.key`
//! (`counting.seed`, `detectors.signal.efficiency`) and component
//! parameters as `component.param`, where the component name may contain
//! `*` wildcards (`*dbr.delta_n`).

use indexmap::IndexMap;

use crate::circuit::{
    chip_preset, emit_netlist, fmt_number as fmt, parse_netlist_lines, set_component_param, PresetKind, Scenario,
    GENERATION_HEATER_CURRENT_A, PUMP_WAVELENGTH_M,
};
use crate::components::{ComponentModel, HeaterState, Ring, StrayMode, StrayPathParams, DEFAULT_STRAY_FLOOR_DB};
use crate::counting::{
    analytic_coincidences, simulate_coincidences_with, CoincidenceConfig, CoincidenceResult, DetectorParams, LossBudget,
};
use crate::exec::Exec;
use crate::pairsource::{self, PairFlux, PortFlux, SfwmParams};
use crate::spectral::{db_from_linear, frequency_to_wavelength, FrequencyGrid, SPEED_OF_LIGHT};
use crate::{Error, Result};

/// Section names, in emission order.
pub const SECTIONS: [&str; 8] = ["pump", "grid", "heaters", "stray", "sfwm", "detectors", "counting", "budget"];

/// Wavelength span and sample count of the spectral grid. One point is
/// allowed; evaluation then uses the start wavelength only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start_m: f64,
    pub stop_m: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { start_m: 1485e-9, stop_m: 1565e-9, points: 40_001 }
    }
}

impl GridSpec {
    /// Frequency grid with at least two points; a one-point spec maps to a
    /// grid whose first sample is the start wavelength.
    pub fn grid(&self) -> Result<FrequencyGrid> {
        if self.points == 0 {
            return Err(Error::Config("grid needs at least one point".into()));
        }
        let (lo, hi) = (self.start_m.min(self.stop_m), self.start_m.max(self.stop_m));
        if self.points == 1 || lo == hi {
            let f = SPEED_OF_LIGHT / self.start_m;
            return FrequencyGrid::new(f, f * (1.0 + 1e-9), 2);
        }
        FrequencyGrid::from_wavelengths(lo, hi, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BudgetSpec {
    /// Arm losses read from the netlist at the line frequencies.
    Derived,
    /// A fixed combined loss split between the arms.
    Split { combined_db: f64, signal_share: f64 },
}

/// One row of a pump-power sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub power_w: f64,
    pub internal_rate_hz: f64,
    pub signal_port_rate_hz: f64,
    pub idler_port_rate_hz: f64,
    pub coincidence_rate_hz: f64,
    pub car: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub circuit: Scenario,
    pub grid: GridSpec,
    /// All-pass ring that generates the pairs.
    pub source: String,
    pub sfwm: SfwmParams,
    pub detectors: [DetectorParams; 2],
    pub counting: CoincidenceConfig,
    /// Take the correlation time from the source ring's photon lifetime.
    pub correlation_from_ring: bool,
    pub signal_port: String,
    pub idler_port: String,
    /// Triplet order used for coincidences.
    pub triplet: u32,
    pub budget: BudgetSpec,
    /// Stray level kept while the stray path is switched off.
    pub stray_floor_db: f64,
}

fn heater_current_for(sc: &Scenario, name: &str, freq_hz: f64) -> f64 {
    let model = sc.netlist.component(name).expect("preset component");
    let ring = model.ring().expect("preset ring");
    let heater = sc.heater_state(name).expect("preset heater");
    heater.current_for_shift(ring.red_shift_to(freq_hz, 0.0)).expect("preset heater has a positive coefficient")
}

impl ScenarioConfig {
    /// Wraps a netlist with default settings.
    pub fn from_netlist(netlist: crate::circuit::Netlist) -> Result<Self> {
        let grid = GridSpec::default();
        let circuit = Scenario::new(netlist, PUMP_WAVELENGTH_M, 1e-3, grid.grid()?);
        let source = circuit
            .netlist
            .components()
            .iter()
            .find(|(_, m)| matches!(m, ComponentModel::AllPassRing { .. }))
            .map(|(n, _)| n.clone())
            .unwrap_or_else(|| "gen_ring".to_string());
        let outputs = circuit.netlist.output_names();
        let pick = |want: &str, k: usize| {
            if outputs.iter().any(|o| o == want) {
                want.to_string()
            } else {
                outputs.get(k.min(outputs.len().saturating_sub(1))).cloned().unwrap_or_default()
            }
        };
        let (signal_port, idler_port) = (pick("drop_1", 0), pick("drop_2", 1));
        Ok(ScenarioConfig {
            circuit,
            grid,
            source,
            sfwm: SfwmParams::default(),
            detectors: crate::counting::default_detectors(),
            counting: CoincidenceConfig::default(),
            correlation_from_ring: true,
            signal_port,
            idler_port,
            triplet: 1,
            budget: BudgetSpec::Derived,
            stray_floor_db: DEFAULT_STRAY_FLOOR_DB,
        })
    }

    /// Full run settings for a preset.
    ///
    /// `chip_a`: generation ring on the pump, both add-drops tuned to the
    /// pump, stray path on. `chip_b`: the same chip with its add-drops tuned
    /// to the m = 1 signal and idler. `two_chip_link`: chip A with untuned
    /// add-drops feeding chip B's demultiplexer, stray path off, 0.3 mW.
    pub fn preset(kind: PresetKind) -> Self {
        let mut cfg = Self::from_netlist(chip_preset(kind)).expect("preset netlist is valid");
        let sc = &mut cfg.circuit;
        let fp = SPEED_OF_LIGHT / PUMP_WAVELENGTH_M;
        let prefix = if kind == PresetKind::TwoChipLink { "a_" } else { "" };
        cfg.source = format!("{prefix}gen_ring");
        sc.set_heater_current(&cfg.source, GENERATION_HEATER_CURRENT_A).expect("preset heater");
        let fsr = sc.netlist.component(&cfg.source).and_then(|m| m.ring()).expect("source ring").fsr_hz();
        let targets = match kind {
            PresetKind::ChipA => vec![("ad1", fp), ("ad2", fp)],
            PresetKind::ChipB => vec![("ad1", fp + fsr), ("ad2", fp - fsr)],
            PresetKind::TwoChipLink => vec![("b_ad1", fp + fsr), ("b_ad2", fp - fsr)],
        };
        for (name, f) in targets {
            let i = heater_current_for(sc, name, f);
            sc.set_heater_current(name, i).expect("preset heater");
        }
        if kind == PresetKind::TwoChipLink {
            sc.stray = StrayPathParams::disabled();
            sc.pump_power_w = 0.3e-3;
        }
        if kind == PresetKind::ChipA {
            cfg.signal_port = "common_through".into();
            cfg.idler_port = "common_through".into();
        }
        cfg.sync_correlation();
        cfg
    }

    fn sync_correlation(&mut self) {
        if self.correlation_from_ring {
            if let Ok((ring, _)) = self.source_ring() {
                self.counting.correlation_time_s = ring.photon_lifetime_s();
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.circuit.validate()?;
        self.sfwm.validate()?;
        for d in &self.detectors {
            d.validate()?;
        }
        self.counting.validate()?;
        for p in [&self.signal_port, &self.idler_port] {
            self.circuit.netlist.path(p)?;
        }
        if self.triplet == 0 || self.triplet as usize > self.sfwm.n_triplets {
            return Err(Error::Config(format!("triplet {} outside 1..={}", self.triplet, self.sfwm.n_triplets)));
        }
        if let BudgetSpec::Split { combined_db, signal_share } = self.budget {
            LossBudget::split(combined_db, signal_share, &self.detectors)?;
        }
        Ok(())
    }

    pub fn source_ring(&self) -> Result<(&Ring, HeaterState)> {
        let model = self
            .circuit
            .netlist
            .component(&self.source)
            .ok_or_else(|| Error::Config(format!("pair source `{}` is not in the netlist", self.source)))?;
        match model {
            ComponentModel::AllPassRing { ring, .. } => Ok((ring, self.circuit.heater_state(&self.source)?)),
            _ => Err(Error::Config(format!("pair source `{}` is not an all-pass ring", self.source))),
        }
    }

    pub fn with_power(&self, power_w: f64) -> Self {
        let mut c = self.clone();
        c.circuit.pump_power_w = power_w;
        c
    }

    pub fn pair_fluxes(&self) -> Result<Vec<PairFlux>> {
        let (ring, heater) = self.source_ring()?;
        pairsource::pair_fluxes(&self.sfwm, ring, &heater, self.circuit.pump_wavelength_m, self.circuit.pump_power_w)
    }

    /// Internal rate of each triplet at the current pump power.
    pub fn internal_rate_hz(&self) -> Result<f64> {
        let (ring, _) = self.source_ring()?;
        Ok(pairsource::internal_pair_rate(&self.sfwm, ring.params(), self.circuit.pump_power_w))
    }

    pub fn port_fluxes(&self) -> Result<IndexMap<String, PortFlux>> {
        pairsource::port_fluxes(&self.circuit, &self.source, &self.pair_fluxes()?)
    }

    fn port_flux<'a>(fluxes: &'a IndexMap<String, PortFlux>, port: &str) -> Result<&'a PortFlux> {
        fluxes.get(port).ok_or_else(|| Error::Config(format!("port `{port}` is not downstream of the pair source")))
    }

    /// Ring-to-detector budget for the configured triplet, with residual
    /// pump rates taken from the netlist.
    pub fn loss_budget(&self) -> Result<LossBudget> {
        let fluxes = self.port_fluxes()?;
        let internal = self.internal_rate_hz()?;
        let (sig, idl) = (Self::port_flux(&fluxes, &self.signal_port)?, Self::port_flux(&fluxes, &self.idler_port)?);
        let m = self.triplet as i32;
        let mut budget = match self.budget {
            BudgetSpec::Derived => {
                let transmission = |pf: &PortFlux, m: i32| -> Result<f64> {
                    let line = pf.line(m).ok_or_else(|| Error::Config(format!("no line m = {m}")))?;
                    if internal > 0.0 {
                        Ok(line.rate_hz / internal)
                    } else {
                        let mut unit = self.with_power(self.sfwm.p_sat_w);
                        unit.budget = BudgetSpec::Derived;
                        let f = unit.port_fluxes()?;
                        let port = if m > 0 { &self.signal_port } else { &self.idler_port };
                        Ok(Self::port_flux(&f, port)?.line(m).map_or(0.0, |l| l.rate_hz) / unit.internal_rate_hz()?)
                    }
                };
                let path_db = [-db_from_linear(transmission(sig, m)?), -db_from_linear(transmission(idl, -m)?)];
                if path_db.iter().any(|p| !p.is_finite()) {
                    return Err(Error::Config(format!(
                        "triplet {m} does not reach `{}`/`{}`",
                        self.signal_port, self.idler_port
                    )));
                }
                LossBudget::new(path_db, &self.detectors)
            }
            BudgetSpec::Split { combined_db, signal_share } => {
                LossBudget::split(combined_db, signal_share, &self.detectors)?
            }
        };
        budget.residual_pump_hz = [sig.residual_pump_rate_hz(), idl.residual_pump_rate_hz()];
        Ok(budget)
    }

    /// Counting settings with the correlation time resolved.
    pub fn coincidence_config(&self) -> Result<CoincidenceConfig> {
        let mut c = self.counting;
        if self.correlation_from_ring {
            c.correlation_time_s = self.source_ring()?.0.photon_lifetime_s();
        }
        Ok(c)
    }

    pub fn analytic(&self) -> Result<CoincidenceResult> {
        analytic_coincidences(
            self.internal_rate_hz()?,
            &self.loss_budget()?,
            &self.detectors,
            &self.coincidence_config()?,
        )
    }

    pub fn simulate(&self, exec: Exec) -> Result<CoincidenceResult> {
        simulate_coincidences_with(
            self.internal_rate_hz()?,
            &self.loss_budget()?,
            &self.detectors,
            &self.coincidence_config()?,
            exec,
        )
    }

    pub fn sweep_row(&self, power_w: f64) -> Result<SweepRow> {
        let at = self.with_power(power_w);
        let fluxes = at.port_fluxes()?;
        let side = |port: &str, signal: bool| -> Result<f64> {
            Ok(Self::port_flux(&fluxes, port)?.lines.iter().filter(|l| (l.m > 0) == signal).map(|l| l.rate_hz).sum())
        };
        let r = at.analytic()?;
        Ok(SweepRow {
            power_w,
            internal_rate_hz: at.internal_rate_hz()?,
            signal_port_rate_hz: side(&self.signal_port, true)?,
            idler_port_rate_hz: side(&self.idler_port, false)?,
            coincidence_rate_hz: r.true_rate_hz,
            car: r.car,
        })
    }

    /// Sets one setting or component parameter. Errors when the key matches
    /// nothing.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.set_inner(key, value)? {
            0 => Err(Error::Config(format!("`{key}` matches no setting or component"))),
            _ => Ok(()),
        }
    }

    /// Returns how many targets were changed.
    fn set_inner(&mut self, key: &str, value: &str) -> Result<usize> {
        let (head, rest) = key
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("`{key}` must be `section.key` or `component.param`")))?;
        if SECTIONS.contains(&head) {
            self.set_section(head, rest, value.trim())?;
            self.sync_correlation();
            return Ok(1);
        }
        let names: Vec<String> =
            self.circuit.netlist.components().keys().filter(|n| wildcard_match(head, n)).cloned().collect();
        for name in &names {
            let model = self.circuit.netlist.component(name).expect("listed component");
            let updated = set_component_param(model, rest, value.trim())?;
            self.circuit.netlist.replace_component(name, updated)?;
        }
        self.sync_correlation();
        Ok(names.len())
    }

    fn set_section(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let num = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{section}.{key}: expected a number, got `{value}`")))
        };
        let int = || -> Result<u64> {
            value
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("{section}.{key}: expected an integer, got `{value}`")))
        };
        let unknown = || Error::Config(format!("unknown setting `{section}.{key}`"));
        match section {
            "pump" => match key {
                "wavelength_nm" => self.circuit.pump_wavelength_m = num()? * 1e-9,
                "power_mw" => self.circuit.pump_power_w = num()? * 1e-3,
                _ => return Err(unknown()),
            },
            "grid" => {
                match key {
                    "start_nm" => self.grid.start_m = num()? * 1e-9,
                    "stop_nm" => self.grid.stop_m = num()? * 1e-9,
                    "points" => self.grid.points = int()? as usize,
                    _ => return Err(unknown()),
                }
                self.circuit.grid = self.grid.grid()?;
            }
            "heaters" => self.circuit.set_heater_current(key, num()? * 1e-3)?,
            "stray" => match key {
                "enabled" => {
                    let on = value
                        .parse::<bool>()
                        .map_err(|_| Error::Config(format!("stray.enabled: expected true or false, got `{value}`")))?;
                    self.circuit.stray.floor_db = if on { self.stray_floor_db } else { f64::NEG_INFINITY };
                }
                "floor_db" if value == "off" => self.circuit.stray.floor_db = f64::NEG_INFINITY,
                "floor_db" => {
                    self.stray_floor_db = num()?;
                    if self.circuit.stray.is_enabled() {
                        self.circuit.stray.floor_db = self.stray_floor_db;
                    }
                }
                "mode" => {
                    self.circuit.stray.mode = match value {
                        "incoherent" => StrayMode::IncoherentPower,
                        "coherent" => StrayMode::CoherentAmplitude { phase_rad: 0.0 },
                        _ => return Err(Error::Config(format!("stray.mode: `{value}` (incoherent, coherent)"))),
                    }
                }
                "phase_rad" => {
                    let phase = num()?;
                    self.circuit.stray.mode = StrayMode::CoherentAmplitude { phase_rad: phase };
                }
                _ => return Err(unknown()),
            },
            "sfwm" => match key {
                "source" => self.source = value.to_string(),
                "rate_scale" => self.sfwm.rate_scale = num()?,
                "p_sat_mw" => self.sfwm.p_sat_w = num()? * 1e-3,
                "saturation_order" => self.sfwm.saturation_order = num()?,
                "n_triplets" => self.sfwm.n_triplets = int()? as usize,
                "ase_w_per_hz" => self.sfwm.ase_background_w_per_hz = num()?,
                _ => return Err(unknown()),
            },
            "detectors" => {
                let (arm, field) = key.split_once('.').ok_or_else(unknown)?;
                let d = match arm {
                    "signal" => &mut self.detectors[0],
                    "idler" => &mut self.detectors[1],
                    _ => return Err(unknown()),
                };
                match field {
                    "efficiency" => d.efficiency = num()?,
                    "dark_hz" => d.dark_rate_hz = num()?,
                    "jitter_ps" => d.jitter_sigma_s = num()? * 1e-12,
                    "dead_ns" => d.dead_time_s = num()? * 1e-9,
                    _ => return Err(unknown()),
                }
            }
            "counting" => match key {
                "bin_ps" => self.counting.bin_width_s = num()? * 1e-12,
                "window_ns" => self.counting.window_s = num()? * 1e-9,
                "acquisition_s" => self.counting.acquisition_s = num()?,
                "seed" => self.counting.seed = int()?,
                "span_ns" => self.counting.span_s = num()? * 1e-9,
                "segment_s" => self.counting.segment_s = num()?,
                "correlation_ps" if value == "auto" => self.correlation_from_ring = true,
                "correlation_ps" => {
                    self.correlation_from_ring = false;
                    self.counting.correlation_time_s = num()? * 1e-12;
                }
                "signal_port" => self.signal_port = value.to_string(),
                "idler_port" => self.idler_port = value.to_string(),
                "triplet" => self.triplet = int()? as u32,
                _ => return Err(unknown()),
            },
            "budget" => match (key, &mut self.budget) {
                ("mode", b) => {
                    *b = match value {
                        "derived" => BudgetSpec::Derived,
                        "split" => BudgetSpec::Split { combined_db: 68.0, signal_share: 0.5 },
                        _ => return Err(Error::Config(format!("budget.mode: `{value}` (derived, split)"))),
                    }
                }
                ("combined_db", BudgetSpec::Split { combined_db, .. }) => *combined_db = num()?,
                ("signal_share", BudgetSpec::Split { signal_share, .. }) => *signal_share = num()?,
                ("combined_db" | "signal_share", BudgetSpec::Derived) => {
                    return Err(Error::Config(format!("budget.{key} needs `budget.mode = split` first")))
                }
                _ => return Err(unknown()),
            },
            _ => return Err(unknown()),
        }
        Ok(())
    }

    /// Applies a parameter file (`key = value` lines). Component keys that
    /// match nothing are skipped, so one file serves every preset. Returns
    /// the keys that were applied.
    pub fn apply_params(&mut self, text: &str) -> Result<Vec<String>> {
        let mut applied = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected key = value, got `{line}`") })?;
            let (k, v) = (k.trim(), v.trim());
            if self.set_inner(k, v).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })? > 0 {
                applied.push(k.to_string());
            }
        }
        Ok(applied)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut netlist_lines = Vec::new();
        let mut settings = Vec::new();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if let Some(name) = body.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim();
                if name != "netlist" && !SECTIONS.contains(&name) {
                    return Err(Error::Parse { line, msg: format!("unknown section [{name}]") });
                }
                section = (name != "netlist").then(|| name.to_string());
                continue;
            }
            match &section {
                None => netlist_lines.push((line, raw)),
                Some(s) if !body.is_empty() => {
                    let (k, v) = body
                        .split_once('=')
                        .ok_or_else(|| Error::Parse { line, msg: format!("expected key = value, got `{body}`") })?;
                    settings.push((line, format!("{s}.{}", k.trim()), v.trim().to_string()));
                }
                Some(_) => {}
            }
        }
        let mut cfg = Self::from_netlist(parse_netlist_lines(netlist_lines)?)?;
        for (line, k, v) in settings {
            cfg.set(&k, &v).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        }
        Ok(cfg)
    }

    pub fn emit(&self) -> String {
        let mut s = String::from("# ppcs scenario\n");
        s.push_str(&emit_netlist(&self.circuit.netlist));
        let sc = &self.circuit;
        s.push_str(&format!(
            "\n[pump]\nwavelength_nm = {}\npower_mw = {}\n",
            fmt(sc.pump_wavelength_m * 1e9),
            fmt(sc.pump_power_w * 1e3)
        ));
        s.push_str(&format!(
            "\n[grid]\nstart_nm = {}\nstop_nm = {}\npoints = {}\n",
            fmt(self.grid.start_m * 1e9),
            fmt(self.grid.stop_m * 1e9),
            self.grid.points
        ));
        s.push_str("\n[heaters]  # mA\n");
        for (name, i) in &sc.heater_currents_a {
            s.push_str(&format!("{name} = {}\n", fmt(i * 1e3)));
        }
        s.push_str(&format!(
            "\n[stray]\nenabled = {}\nfloor_db = {}\n",
            sc.stray.is_enabled(),
            fmt(self.stray_floor_db)
        ));
        match sc.stray.mode {
            StrayMode::IncoherentPower => s.push_str("mode = incoherent\n"),
            StrayMode::CoherentAmplitude { phase_rad } => {
                s.push_str(&format!("mode = coherent\nphase_rad = {}\n", fmt(phase_rad)))
            }
        }
        let p = &self.sfwm;
        s.push_str(&format!(
            "\n[sfwm]\nsource = {}\nrate_scale = {}\np_sat_mw = {}\nsaturation_order = {}\nn_triplets = {}\nase_w_per_hz = {}\n",
            self.source,
            fmt(p.rate_scale),
            fmt(p.p_sat_w * 1e3),
            fmt(p.saturation_order),
            p.n_triplets,
            fmt(p.ase_background_w_per_hz)
        ));
        s.push_str("\n[detectors]\n");
        for (arm, d) in ["signal", "idler"].iter().zip(&self.detectors) {
            s.push_str(&format!(
                "{arm}.efficiency = {}\n{arm}.dark_hz = {}\n{arm}.jitter_ps = {}\n{arm}.dead_ns = {}\n",
                fmt(d.efficiency),
                fmt(d.dark_rate_hz),
                fmt(d.jitter_sigma_s * 1e12),
                fmt(d.dead_time_s * 1e9)
            ));
        }
        let c = &self.counting;
        let corr = if self.correlation_from_ring { "auto".to_string() } else { fmt(c.correlation_time_s * 1e12) };
        s.push_str(&format!(
            "\n[counting]\nbin_ps = {}\nwindow_ns = {}\nacquisition_s = {}\nseed = {}\nspan_ns = {}\nsegment_s = {}\ncorrelation_ps = {corr}\nsignal_port = {}\nidler_port = {}\ntriplet = {}\n",
            fmt(c.bin_width_s * 1e12),
            fmt(c.window_s * 1e9),
            fmt(c.acquisition_s),
            c.seed,
            fmt(c.span_s * 1e9),
            fmt(c.segment_s),
            self.signal_port,
            self.idler_port,
            self.triplet
        ));
        match self.budget {
            BudgetSpec::Derived => s.push_str("\n[budget]\nmode = derived\n"),
            BudgetSpec::Split { combined_db, signal_share } => s.push_str(&format!(
                "\n[budget]\nmode = split\ncombined_db = {}\nsignal_share = {}\n",
                fmt(combined_db),
                fmt(signal_share)
            )),
        }
        s
    }

    /// Wavelength of line `m` of the source ring (negative `m` for idlers).
    pub fn line_wavelength_m(&self, m: i32) -> Result<f64> {
        let (ring, _) = self.source_ring()?;
        frequency_to_wavelength(self.circuit.pump_hz()? + m as f64 * ring.fsr_hz())
    }
}

/// Glob match with `*` as the only wildcard.
fn wildcard_match(pattern: &str, name: &str) -> bool {
    match pattern.split_once('*') {
        None => pattern == name,
        Some((pre, rest)) => {
            let Some(tail) = name.strip_prefix(pre) else { return false };
            if rest.is_empty() {
                return true;
            }
            (0..=tail.len()).filter(|&i| tail.is_char_boundary(i)).any(|i| wildcard_match(rest, &tail[i..]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn presets_round_trip() {
        for kind in PresetKind::ALL {
            let cfg = ScenarioConfig::preset(kind);
            cfg.validate().unwrap();
            let text = cfg.emit();
            let back = ScenarioConfig::parse(&text).unwrap();
            assert_eq!(back.emit(), text, "{kind}");
        }
    }

    #[test]
    fn chip_a_heaters_align_add_drops_with_pump() {
        let cfg = ScenarioConfig::preset(PresetKind::ChipA);
        let fp = cfg.circuit.pump_hz().unwrap();
        for name in ["gen_ring", "ad1", "ad2"] {
            let ring = cfg.circuit.netlist.component(name).unwrap().ring().unwrap();
            let shift = cfg.circuit.heater_state(name).unwrap().shift_hz();
            let f = ring.nearest_resonance_hz(fp, shift);
            assert!((f - fp).abs() < 1e-3 * ring.fwhm_hz(), "{name}");
        }
        assert_relative_eq!(cfg.circuit.heater_currents_a["gen_ring"], 11.2e-3);
    }

    #[test]
    fn overrides_reach_sections_and_components() {
        let mut cfg = ScenarioConfig::preset(PresetKind::TwoChipLink);
        cfg.set("pump.power_mw", "0.5").unwrap();
        cfg.set("counting.seed", "9").unwrap();
        cfg.set("detectors.idler.dark_hz", "100").unwrap();
        cfg.set("*dbr.periods", "2000").unwrap();
        cfg.set("fiber.loss_db", "4").unwrap();
        assert_relative_eq!(cfg.circuit.pump_power_w, 0.5e-3);
        assert_eq!(cfg.counting.seed, 9);
        assert_eq!(cfg.detectors[1].dark_rate_hz, 100.0);
        for n in ["a_dbr", "b_dbr"] {
            match cfg.circuit.netlist.component(n).unwrap() {
                ComponentModel::Dbr(d) => assert_eq!(d.params().n_periods, 2000),
                _ => unreachable!(),
            }
        }
        assert!(cfg.set("nothing.loss_db", "1").is_err());
        assert!(cfg.set("pump.colour", "1").is_err());
        assert!(cfg.set("counting.seed", "x").is_err());
    }

    #[test]
    fn params_skip_missing_components() {
        let mut cfg = ScenarioConfig::preset(PresetKind::ChipA);
        let applied = cfg.apply_params("fiber.loss_db = 3\nsfwm.rate_scale = 1e-11 # new\n").unwrap();
        assert_eq!(applied, vec!["sfwm.rate_scale".to_string()]);
        assert_eq!(cfg.sfwm.rate_scale, 1e-11);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "port out input\n[pump]\npower_mw = lots\n";
        match ScenarioConfig::parse(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(ScenarioConfig::parse("[nope]\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn one_point_grid_starts_at_requested_wavelength() {
        let g = GridSpec { start_m: 1524.7e-9, stop_m: 1524.7e-9, points: 1 }.grid().unwrap();
        assert_relative_eq!(g.wavelength(0), 1524.7e-9, max_relative = 1e-12);
    }

    #[test]
    fn stray_level_survives_switching() {
        let mut cfg = ScenarioConfig::preset(PresetKind::TwoChipLink);
        cfg.set("stray.floor_db", "-70").unwrap();
        assert!(!cfg.circuit.stray.is_enabled());
        cfg.set("stray.enabled", "true").unwrap();
        assert_eq!(cfg.circuit.stray.floor_db, -70.0);
        cfg.set("stray.floor_db", "off").unwrap();
        assert!(!cfg.circuit.stray.is_enabled());
    }

    #[test]
    fn wildcards() {
        assert!(wildcard_match("*dbr", "a_dbr"));
        assert!(wildcard_match("*dbr", "dbr"));
        assert!(wildcard_match("a_*", "a_ad1"));
        assert!(!wildcard_match("*dbr", "dbr2"));
        assert!(wildcard_match("b_ad*", "b_ad2"));
    }

    #[test]
    fn derived_budget_covers_both_arms() {
        let cfg = ScenarioConfig::preset(PresetKind::TwoChipLink);
        let b = cfg.loss_budget().unwrap();
        assert!(b.path_db.iter().all(|&p| p > 10.0 && p < 40.0), "{:?}", b.path_db);
        let eff = cfg.detectors.map(|d| d.efficiency_db());
        assert_relative_eq!(b.combined_db(), b.path_db[0] + b.path_db[1] + eff[0] + eff[1], max_relative = 1e-12);
        let dark = cfg.with_power(0.0).loss_budget().unwrap();
        assert_relative_eq!(dark.path_db[0], b.path_db[0], max_relative = 1e-9);
    }

    #[test]
    fn split_budget_is_used_when_requested() {
        let mut cfg = ScenarioConfig::preset(PresetKind::TwoChipLink);
        cfg.set("budget.mode", "split").unwrap();
        cfg.set("budget.combined_db", "70").unwrap();
        assert_relative_eq!(cfg.loss_budget().unwrap().combined_db(), 70.0, max_relative = 1e-12);
    }

    #[test]
    fn correlation_time_follows_source_ring() {
        let mut cfg = ScenarioConfig::preset(PresetKind::ChipA);
        let tau = cfg.coincidence_config().unwrap().correlation_time_s;
        assert!((tau - 32.4e-12).abs() < 0.5e-12);
        cfg.set("gen_ring.q", "80000").unwrap();
        assert_relative_eq!(cfg.coincidence_config().unwrap().correlation_time_s, 2.0 * tau, max_relative = 0.01);
        cfg.set("counting.correlation_ps", "10").unwrap();
        assert_relative_eq!(cfg.coincidence_config().unwrap().correlation_time_s, 10e-12, max_relative = 1e-12);
    }
}
