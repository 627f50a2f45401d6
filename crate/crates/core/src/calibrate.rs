//! Scalar anchors solved by bisection and written out as a parameter file.
//!
//! Anchors are solved in order, each on top of the previous ones:
//!
//! | key | solved so that |
//! |---|---|
//! | `*dbr.delta_n` | a continuous test grating of `dbr_periods` periods has `dbr_extinction_db` centre extinction |
//! | `sfwm.rate_scale` | the internal rate per triplet at `rate_power_mw` is `internal_rate_hz` |
//! | `stray.floor_db` | the Chip A Bragg stage reads `stray_floor_db` through the stray path |
//! | `fiber.loss_db` | the two-chip ring-to-detector loss (efficiencies included) is `combined_loss_db` |
//! | `counting.window_ns` | the analytic CAR at `car_power_mw` is `car` |

use std::cell::RefCell;
use std::fmt::Write;

use crate::circuit::{extinction_report, PresetKind};
use crate::components::{center_extinction_db, DbrParams};
use crate::optimize::bisect;
use crate::scenario::{BudgetSpec, ScenarioConfig};
use crate::{Error, Result};

/// Relative tolerance of every anchor solve.
pub const ANCHOR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTargets {
    pub dbr_extinction_db: f64,
    pub dbr_periods: usize,
    pub internal_rate_hz: f64,
    pub rate_power_w: f64,
    /// Bragg-stage extinction seen through the stray path, dB.
    pub stray_floor_db: f64,
    pub combined_loss_db: f64,
    pub car: f64,
    pub car_power_w: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        CalibrationTargets {
            dbr_extinction_db: 22.5,
            dbr_periods: 2000,
            internal_rate_hz: 5e6,
            rate_power_w: 1e-3,
            stray_floor_db: 65.0,
            combined_loss_db: 68.0,
            car: 50.0,
            car_power_w: 0.3e-3,
        }
    }
}

impl CalibrationTargets {
    /// Reads `key = value` lines; missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut t = CalibrationTargets::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            let x: f64 = v.parse().map_err(|_| err(format!("{k}: expected a number, got `{v}`")))?;
            if !x.is_finite() {
                return Err(err(format!("{k}: value must be finite")));
            }
            match k {
                "dbr_extinction_db" => t.dbr_extinction_db = x,
                "dbr_periods" if x >= 1.0 && x.fract() == 0.0 => t.dbr_periods = x as usize,
                "dbr_periods" => return Err(err(format!("dbr_periods: expected a positive integer, got `{v}`"))),
                "internal_rate_hz" => t.internal_rate_hz = x,
                "rate_power_mw" => t.rate_power_w = x * 1e-3,
                "stray_floor_db" => t.stray_floor_db = x,
                "combined_loss_db" => t.combined_loss_db = x,
                "car" => t.car = x,
                "car_power_mw" => t.car_power_w = x * 1e-3,
                _ => return Err(err(format!("unknown target `{k}`"))),
            }
        }
        t.validate()?;
        Ok(t)
    }

    pub fn emit(&self) -> String {
        format!(
            "dbr_extinction_db = {}\ndbr_periods = {}\ninternal_rate_hz = {}\nrate_power_mw = {}\nstray_floor_db = {}\n\
             combined_loss_db = {}\ncar = {}\ncar_power_mw = {}\n",
            self.dbr_extinction_db,
            self.dbr_periods,
            self.internal_rate_hz,
            self.rate_power_w * 1e3,
            self.stray_floor_db,
            self.combined_loss_db,
            self.car,
            self.car_power_w * 1e3
        )
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dbr_extinction_db", self.dbr_extinction_db),
            ("internal_rate_hz", self.internal_rate_hz),
            ("rate_power_mw", self.rate_power_w),
            ("stray_floor_db", self.stray_floor_db),
            ("combined_loss_db", self.combined_loss_db),
            ("car", self.car),
            ("car_power_mw", self.car_power_w),
        ];
        for (k, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("calibration target {k} must be positive, got {v}")));
            }
        }
        if self.dbr_periods == 0 {
            return Err(Error::Config("calibration target dbr_periods must be positive".into()));
        }
        Ok(())
    }
}

/// One solved parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    /// Parameter key as accepted by [`ScenarioConfig::set`].
    pub key: String,
    /// Value in the units of the key.
    pub value: f64,
    pub achieved: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub anchors: Vec<Anchor>,
}

impl Calibration {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.anchors.iter().find(|a| a.key == key).map(|a| a.value)
    }

    /// Parameter file for [`ScenarioConfig::apply_params`].
    pub fn to_params_text(&self) -> String {
        let mut s = String::from("# calibrated parameters\n");
        for a in &self.anchors {
            let _ = writeln!(s, "# achieved {} (target {})", a.achieved, a.target);
            let _ = writeln!(s, "{} = {}", a.key, a.value);
        }
        s
    }

    pub fn apply(&self, cfg: &mut ScenarioConfig) -> Result<()> {
        cfg.apply_params(&self.to_params_text()).map(|_| ())
    }
}

/// Bisection over a fallible model; the first model error aborts the solve.
fn solve<F>(key: &str, f: F, target: f64, lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let failure = RefCell::new(None);
    let g = |x: f64| match f(x) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let x = bisect(g, target, lo, hi, ANCHOR_TOLERANCE);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    x.map_err(|e| Error::Calibration(format!("{key}: {e}")))
}

fn set_number(cfg: &mut ScenarioConfig, key: &str, value: f64) -> Result<()> {
    cfg.set(key, &value.to_string())
}

/// Solves every anchor against `base`, which must be a two-chip scenario
/// with a derived budget and a `fiber` attenuator.
pub fn calibrate(base: &ScenarioConfig, targets: &CalibrationTargets) -> Result<Calibration> {
    targets.validate()?;
    if base.budget != BudgetSpec::Derived || base.circuit.netlist.component("fiber").is_none() {
        return Err(Error::Config(
            "calibration needs a derived budget and a `fiber` attenuator (the two_chip_link preset)".into(),
        ));
    }
    let mut cfg = base.clone();
    let mut anchors = Vec::new();
    let mut record = |cfg: &mut ScenarioConfig, key: &str, value: f64, achieved: f64, target: f64| -> Result<()> {
        set_number(cfg, key, value)?;
        anchors.push(Anchor { key: key.to_string(), value, achieved, target });
        Ok(())
    };

    let test_grating = |dn: f64| DbrParams { delta_n: dn, ..DbrParams::test_structure(targets.dbr_periods) };
    let extinction = |dn: f64| center_extinction_db(&test_grating(dn));
    let dn = solve("*dbr.delta_n", extinction, targets.dbr_extinction_db, 1e-6, 0.05)?;
    record(&mut cfg, "*dbr.delta_n", dn, extinction(dn)?, targets.dbr_extinction_db)?;

    let rate = |cfg: &ScenarioConfig, scale: f64| {
        let mut c = cfg.with_power(targets.rate_power_w);
        c.sfwm.rate_scale = scale;
        c.internal_rate_hz()
    };
    let current = cfg.sfwm.rate_scale;
    let scale = solve("sfwm.rate_scale", |s| rate(&cfg, s), targets.internal_rate_hz, current * 1e-6, current * 1e6)?;
    let achieved = rate(&cfg, scale)?;
    record(&mut cfg, "sfwm.rate_scale", scale, achieved, targets.internal_rate_hz)?;

    let mut chip_a = ScenarioConfig::preset(PresetKind::ChipA);
    set_number(&mut chip_a, "*dbr.delta_n", dn)?;
    let floor_reading = |level: f64| -> Result<f64> {
        let mut sc = chip_a.circuit.clone();
        sc.stray.floor_db = level;
        extinction_report(&sc, &chip_a.signal_port)?
            .dbr_floor_db
            .ok_or_else(|| Error::Config("Chip A common_through has no Bragg stage".into()))
    };
    let level = solve("stray.floor_db", floor_reading, targets.stray_floor_db, -200.0, -1.0)?;
    record(&mut cfg, "stray.floor_db", level, floor_reading(level)?, targets.stray_floor_db)?;

    let combined = |cfg: &ScenarioConfig, loss: f64| -> Result<f64> {
        let mut c = cfg.with_power(targets.car_power_w);
        set_number(&mut c, "fiber.loss_db", loss)?;
        Ok(c.loss_budget()?.combined_db())
    };
    let loss = solve("fiber.loss_db", |l| combined(&cfg, l), targets.combined_loss_db, 0.0, 100.0)?;
    let achieved = combined(&cfg, loss)?;
    record(&mut cfg, "fiber.loss_db", loss, achieved, targets.combined_loss_db)?;

    let car = |cfg: &ScenarioConfig, window_ns: f64| -> Result<f64> {
        let mut c = cfg.with_power(targets.car_power_w);
        c.counting.window_s = window_ns * 1e-9;
        Ok(c.analytic()?.car)
    };
    let max_window_ns = 0.2 * cfg.counting.span_s * 1e9;
    let window = solve("counting.window_ns", |w| car(&cfg, w), targets.car, 0.05, max_window_ns)?;
    let achieved = car(&cfg, window)?;
    record(&mut cfg, "counting.window_ns", window, achieved, targets.car)?;

    Ok(Calibration { anchors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::components::CALIBRATED_DELTA_N;

    fn base() -> ScenarioConfig {
        ScenarioConfig::preset(PresetKind::TwoChipLink)
    }

    #[test]
    fn targets_round_trip() {
        let t = CalibrationTargets { car: 40.0, dbr_periods: 1000, ..Default::default() };
        assert_eq!(CalibrationTargets::parse(&t.emit()).unwrap(), t);
        assert_eq!(CalibrationTargets::parse("").unwrap(), CalibrationTargets::default());
        assert!(matches!(CalibrationTargets::parse("car = 50\nfoo = 1").unwrap_err(), Error::Parse { line: 2, .. }));
        assert!(CalibrationTargets::parse("dbr_periods = 2.5").is_err());
    }

    #[test]
    fn default_anchors_hit_their_targets() {
        let cal = calibrate(&base(), &CalibrationTargets::default()).unwrap();
        assert_eq!(cal.anchors.len(), 5);
        for a in &cal.anchors {
            assert!((a.achieved / a.target - 1.0).abs() < 1e-6, "{a:?}");
        }
        let dn = cal.get("*dbr.delta_n").unwrap();
        assert!((dn / CALIBRATED_DELTA_N - 1.0).abs() < 1e-3);
        let ext = center_extinction_db(&DbrParams { delta_n: dn, ..DbrParams::test_structure(2000) }).unwrap();
        assert!((ext - 22.5).abs() < 0.1);
        assert!((cal.get("stray.floor_db").unwrap() + 65.0).abs() < 0.1);
        assert!((cal.get("fiber.loss_db").unwrap() - crate::circuit::FIBER_LOSS_DB).abs() < 1e-3);
        let w = cal.get("counting.window_ns").unwrap();
        assert!(w > 3.0 && w < 3.5);
    }

    #[test]
    fn rerun_on_own_output_is_stable() {
        let t = CalibrationTargets::default();
        let first = calibrate(&base(), &t).unwrap();
        let mut cfg = base();
        first.apply(&mut cfg).unwrap();
        assert!(!cfg.circuit.stray.is_enabled());
        let second = calibrate(&cfg, &t).unwrap();
        for (a, b) in first.anchors.iter().zip(&second.anchors) {
            assert_eq!(a.key, b.key);
            assert!((a.value / b.value - 1.0).abs() < 1e-3, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn params_text_applies_to_every_preset() {
        let cal = calibrate(&base(), &CalibrationTargets::default()).unwrap();
        for kind in PresetKind::ALL {
            let mut cfg = ScenarioConfig::preset(kind);
            cfg.apply_params(&cal.to_params_text()).unwrap();
            assert_eq!(cfg.sfwm.rate_scale, cal.get("sfwm.rate_scale").unwrap());
        }
    }

    #[test]
    fn unreachable_target_reports_bounds() {
        let t = CalibrationTargets { car: 1e6, ..Default::default() };
        match calibrate(&base(), &t).unwrap_err() {
            Error::Calibration(msg) => assert!(msg.contains("counting.window_ns") && msg.contains("not bracketed")),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn needs_two_chip_scenario() {
        let err = calibrate(&ScenarioConfig::preset(PresetKind::ChipA), &CalibrationTargets::default()).unwrap_err();
        assert!(err.is_config());
    }
}
