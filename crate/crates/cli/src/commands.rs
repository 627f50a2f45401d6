use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ppcs_core::calibrate::{calibrate, CalibrationTargets};
use ppcs_core::circuit::{auto_tune, evaluate_port, PresetKind, TuneObjective};
use ppcs_core::components::{ComponentModel, OutPort};
use ppcs_core::counting::histogram_csv;
use ppcs_core::exec::Exec;
use ppcs_core::scenario::ScenarioConfig;
use ppcs_core::spectral::{db_from_linear, wavelength_to_frequency, SPEED_OF_LIGHT};
use ppcs_core::Error;

use crate::output::{sci, write_file, RunInfo};
use crate::svg::{envelope, Plot, Series};

/// Pump powers of the default sweep, mW.
pub const DEFAULT_SWEEP_MW: [f64; 12] = [0.01, 0.02, 0.03, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.5, 2.0];

/// Scenario selection and overrides shared by every command.
pub struct Inputs<'a> {
    pub scenario: Option<&'a Path>,
    pub preset: Option<PresetKind>,
    pub params: Option<&'a Path>,
    pub overrides: &'a [String],
    pub seed: Option<u64>,
}

pub fn load(command: &str, inputs: &Inputs) -> Result<(ScenarioConfig, RunInfo)> {
    let (mut cfg, source) = match (inputs.scenario, inputs.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read scenario {}", path.display()))?;
            (
                ScenarioConfig::parse(&text).with_context(|| format!("in {}", path.display()))?,
                path.display().to_string(),
            )
        }
        (None, kind) => {
            let kind = kind.unwrap_or(PresetKind::TwoChipLink);
            (ScenarioConfig::preset(kind), format!("preset:{kind}"))
        }
    };
    if let Some(path) = inputs.params {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read parameters {}", path.display()))?;
        cfg.apply_params(&text).with_context(|| format!("in {}", path.display()))?;
    }
    for o in inputs.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = inputs.seed {
        cfg.counting.seed = seed;
    }
    cfg.validate()?;
    let info = RunInfo {
        command: command.to_string(),
        source,
        params: inputs.params.map(|p| p.display().to_string()),
        overrides: inputs.overrides.to_vec(),
        seed: cfg.counting.seed,
        config: cfg.emit(),
    };
    Ok((cfg, info))
}

pub fn spectrum(cfg: &ScenarioConfig, info: &RunInfo, ports: &[String], out: &Path) -> Result<()> {
    let ports = if ports.is_empty() { cfg.circuit.netlist.output_names() } else { ports.to_vec() };
    let rows = cfg.grid.points.min(cfg.circuit.grid.len());
    for port in &ports {
        let db = evaluate_port(&cfg.circuit, port)?.power_db();
        let grid = &db.grid;
        let mut points: Vec<(f64, f64)> =
            (0..rows).map(|i| (SPEED_OF_LIGHT / grid.frequency(i) * 1e9, db.values_db[i])).collect();
        points.reverse();
        let mut csv = info.comment_block(&[("port", port.clone())]);
        csv.push_str("wavelength_nm,transmission_db\n");
        for (l, t) in &points {
            csv.push_str(&format!("{l:.6},{t:.4}\n"));
        }
        let path = write_file(out, &format!("spectrum_{port}.csv"), &csv)?;
        let plot = Plot {
            title: format!("Transmission at {port}"),
            x_label: "wavelength (nm)".into(),
            y_label: "transmission (dB)".into(),
            series: vec![Series::new(port, envelope(&points, 2000))],
            markers: vec![(cfg.circuit.pump_wavelength_m * 1e9, "pump".into())],
            ..Default::default()
        };
        write_file(out, &format!("spectrum_{port}.svg"), &plot.render(&info.comment_lines(&[("port", port.clone())])))?;
        let min = points.iter().copied().fold((f64::NAN, f64::INFINITY), |a, p| if p.1 < a.1 { p } else { a });
        println!("{port}: minimum {:.2} dB at {:.4} nm -> {}", min.1, min.0, path.display());
    }
    Ok(())
}

/// Least-squares slope of log(y) against log(x).
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn power_sweep(cfg: &ScenarioConfig, info: &RunInfo, powers_mw: &[f64], out: &Path) -> Result<()> {
    let powers = if powers_mw.is_empty() { DEFAULT_SWEEP_MW.to_vec() } else { powers_mw.to_vec() };
    if powers.iter().any(|p| !(p.is_finite() && *p > 0.0)) || powers.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("powers must be positive and strictly ascending".into()).into());
    }
    let rows = powers.iter().map(|p| cfg.sweep_row(p * 1e-3)).collect::<ppcs_core::Result<Vec<_>>>()?;
    let mut csv = info.comment_block(&[]);
    csv.push_str("power_mw,internal_rate_hz,signal_port_rate_hz,idler_port_rate_hz,coincidence_rate_hz,car_analytic\n");
    for (p, r) in powers.iter().zip(&rows) {
        csv.push_str(&format!(
            "{p},{},{},{},{},{}\n",
            sci(r.internal_rate_hz),
            sci(r.signal_port_rate_hz),
            sci(r.idler_port_rate_hz),
            sci(r.coincidence_rate_hz),
            sci(r.car)
        ));
    }
    let path = write_file(out, "power_sweep.csv", &csv)?;

    let column = |f: fn(&ppcs_core::scenario::SweepRow) -> f64| -> Vec<(f64, f64)> {
        powers.iter().zip(&rows).map(|(p, r)| (*p, f(r))).collect()
    };
    let internal = column(|r| r.internal_rate_hz);
    let (p0, r0) = internal[0];
    let guide = powers.iter().map(|p| (*p, r0 * (p / p0).powi(2))).collect();
    let plot = Plot {
        title: "Pair and coincidence rates against pump power".into(),
        x_label: "on-chip pump power (mW)".into(),
        y_label: "rate (Hz)".into(),
        log_x: true,
        log_y: true,
        series: vec![
            Series::new("internal", internal.clone()),
            Series::new("signal port", column(|r| r.signal_port_rate_hz)),
            Series::new("idler port", column(|r| r.idler_port_rate_hz)),
            Series::new("coincidences", column(|r| r.coincidence_rate_hz)),
            Series::new("P^2 guide", guide).dashed(),
        ],
        ..Default::default()
    };
    write_file(out, "power_sweep.svg", &plot.render(&info.comment_lines(&[])))?;

    let low: Vec<(f64, f64)> = internal.iter().copied().filter(|p| p.0 <= 0.1 + 1e-12).collect();
    if let Some(s) = log_log_slope(&low) {
        println!("low-power slope (P <= 0.1 mW): {s:.4}");
    }
    for (p, r) in powers.iter().zip(&rows) {
        println!(
            "{p:>7} mW  internal {:.4e} Hz  coincidences {:.4e} Hz  CAR {:.2}",
            r.internal_rate_hz, r.coincidence_rate_hz, r.car
        );
    }
    println!("-> {}", path.display());
    Ok(())
}

pub fn coincidence(cfg: &ScenarioConfig, info: &RunInfo, out: &Path) -> Result<()> {
    let ccfg = cfg.coincidence_config()?;
    if let Some(w) = ccfg.window_warning(&cfg.detectors) {
        eprintln!("warning: {w}");
    }
    let analytic = cfg.analytic()?;
    let mc = cfg.simulate(Exec::default())?;
    let hist = mc.histogram.as_ref().expect("Monte Carlo runs return a histogram");
    let extra = [
        ("acquisition_s", ccfg.acquisition_s.to_string()),
        ("car_histogram", format!("{:.4}", mc.car)),
        ("car_histogram_sigma", format!("{:.4}", mc.car_sigma)),
        ("car_analytic", format!("{:.4}", analytic.car)),
        ("car_analytic_sigma", format!("{:.4}", analytic.car_sigma)),
        ("singles_hz", format!("{:.3} {:.3}", mc.singles_hz[0], mc.singles_hz[1])),
        ("coincidence_rate_hz", format!("{:.6e}", mc.true_rate_hz)),
    ];
    let meta: Vec<(String, String)> = info.metadata(&extra);
    let path = write_file(out, "coincidence_histogram.csv", &histogram_csv(hist, &ccfg, &meta))?;
    let points = hist.counts.iter().enumerate().map(|(i, &c)| (ccfg.bin_center(i) * 1e9, c as f64)).collect();
    let w = ccfg.window_s * 1e9;
    let plot = Plot {
        title: format!("Coincidence histogram, CAR {:.1} ± {:.1}", mc.car, mc.car_sigma),
        x_label: "delay t_idler - t_signal (ns)".into(),
        y_label: format!("counts per {:.0} ps bin", ccfg.bin_width_s * 1e12),
        series: vec![Series::new("coincidences", points)],
        markers: vec![(0.0, "zero delay".into()), (-w, "window".into()), (w, String::new())],
        ..Default::default()
    };
    write_file(out, "coincidence_histogram.svg", &plot.render(&info.comment_lines(&extra)))?;
    let fmt_car = |car: f64, sigma: f64, zero: bool| {
        if zero {
            "no accidentals".to_string()
        } else {
            format!("{car:.2} ± {sigma:.2}")
        }
    };
    println!("CAR (histogram): {}", fmt_car(mc.car, mc.car_sigma, mc.zero_background));
    println!("CAR (analytic):  {}", fmt_car(analytic.car, analytic.car_sigma, analytic.zero_background));
    println!(
        "singles: {:.1} Hz / {:.1} Hz, coincidences {:.4} Hz",
        mc.singles_hz[0], mc.singles_hz[1], mc.true_rate_hz
    );
    println!("-> {}", path.display());
    Ok(())
}

pub struct TuneRequest<'a> {
    pub component: &'a str,
    pub target_nm: Option<f64>,
    pub objective: TuneObjective,
    pub port: Option<&'a str>,
    pub scenario_name: String,
}

fn component_db(cfg: &ScenarioConfig, name: &str, objective: TuneObjective, freq: f64) -> Result<f64> {
    let model =
        cfg.circuit.netlist.component(name).ok_or_else(|| Error::Config(format!("unknown component `{name}`")))?;
    let port = match (objective, model) {
        (_, ComponentModel::AllPassRing { .. }) => OutPort::Out,
        (TuneObjective::MinimizeThrough, _) => OutPort::Through,
        (TuneObjective::MaximizeDrop, _) => OutPort::Drop,
    };
    let shift = cfg.circuit.heater_state(name)?.shift_hz();
    Ok(db_from_linear(model.transfer(port, freq, shift).norm_sqr()))
}

pub fn tune(cfg: &mut ScenarioConfig, info: &RunInfo, req: &TuneRequest, out: &Path) -> Result<PathBuf> {
    let target_m = req.target_nm.map_or(cfg.circuit.pump_wavelength_m, |nm| nm * 1e-9);
    let freq = wavelength_to_frequency(target_m)?;
    let before_state = cfg.circuit.heater_state(req.component)?;
    let measure = |cfg: &ScenarioConfig| -> Result<(f64, Option<f64>)> {
        let own = component_db(cfg, req.component, req.objective, freq)?;
        let port = match req.port {
            Some(p) => Some(db_from_linear(cfg.circuit.port_transfer(p, freq)?.norm_sqr())),
            None => None,
        };
        Ok((own, port))
    };
    let before = measure(cfg)?;
    let state = auto_tune(&cfg.circuit, req.component, target_m, req.objective)?;
    cfg.circuit.set_heater_current(req.component, state.current_a)?;
    let after = measure(cfg)?;

    let extra = [
        ("tuned_component", req.component.to_string()),
        ("target_nm", format!("{}", target_m * 1e9)),
        ("heater_ma", format!("{:.6}", state.current_a * 1e3)),
    ];
    let text = format!("{}{}", info.comment_block(&extra), cfg.emit());
    let path = write_file(out, &req.scenario_name, &text)?;
    println!("{} at {:.4} nm", req.component, target_m * 1e9);
    println!("  heater: {:.4} mA -> {:.4} mA", before_state.current_a * 1e3, state.current_a * 1e3);
    println!("  component: {:.2} dB -> {:.2} dB", before.0, after.0);
    if let (Some(p), Some(b), Some(a)) = (req.port, before.1, after.1) {
        println!("  port {p}: {b:.2} dB -> {a:.2} dB");
    }
    println!("-> {}", path.display());
    Ok(path)
}

pub fn run_calibration(cfg: &ScenarioConfig, info: &RunInfo, targets: Option<&Path>, out: &Path) -> Result<()> {
    let targets = match targets {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read targets {}", path.display()))?;
            CalibrationTargets::parse(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => CalibrationTargets::default(),
    };
    let cal = calibrate(cfg, &targets)?;
    let target_lines: Vec<(&str, String)> = targets.emit().lines().map(|l| ("target", l.to_string())).collect();
    let text = format!("{}{}", info.comment_block(&target_lines), cal.to_params_text());
    let path = write_file(out, "calibration.params", &text)?;
    for a in &cal.anchors {
        println!("{:<20} = {:<24} achieved {:.6} (target {})", a.key, a.value, a.achieved, a.target);
    }
    println!("-> {}", path.display());
    Ok(())
}

pub fn write_presets(out: &Path) -> Result<()> {
    for kind in PresetKind::ALL {
        let text = format!(
            "# tool: ppcs {}\n# preset: {kind}\n{}",
            env!("CARGO_PKG_VERSION"),
            ScenarioConfig::preset(kind).emit()
        );
        let path = write_file(out, &format!("{kind}.ppcs"), &text)?;
        println!("{kind} -> {}", path.display());
    }
    Ok(())
}
