//! End-to-end acceptance checks. Runs every criterion, prints one PASS/FAIL
//! line each and exits non-zero if any fails.

use std::time::{Duration, Instant};

use ppcs_core::calibrate::{calibrate, CalibrationTargets};
use ppcs_core::circuit::{extinction_report, PresetKind};
use ppcs_core::components::{dbr_center_transmission_cmt, dbr_response_tmm, Dbr, DbrParams};
use ppcs_core::counting::histogram_csv;
use ppcs_core::exec::Exec;
use ppcs_core::pairsource::{enumerate_triplets, internal_pair_rate, SfwmParams};
use ppcs_core::scenario::ScenarioConfig;
use ppcs_core::spectral::{db_from_linear, FrequencyGrid, SPEED_OF_LIGHT};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn calibrated_delta_n() -> f64 {
    let cal = calibrate(&ScenarioConfig::preset(PresetKind::TwoChipLink), &CalibrationTargets::default()).unwrap();
    cal.get("*dbr.delta_n").unwrap()
}

fn test_grating(n: usize, delta_n: f64) -> DbrParams {
    DbrParams { delta_n, ..DbrParams::test_structure(n) }
}

/// Grid of `points` samples spanning ±`half_nm` around the stop-band centre.
fn grid_around(p: &DbrParams, half_nm: f64, points: usize) -> FrequencyGrid {
    let c = p.center_m();
    FrequencyGrid::from_wavelengths(c - half_nm * 1e-9, c + half_nm * 1e-9, points).unwrap()
}

fn linear_fit_r2(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

fn log_log_slope(pts: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = pts.iter().map(|p| (p.0.ln(), p.1.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn dbr_extinction_scaling() -> Outcome {
    let start = Instant::now();
    let dn = calibrated_delta_n();
    let mut pts = Vec::new();
    for n in [1000, 2000, 4000, 8000] {
        let p = test_grating(n, dn);
        let (t, _) = dbr_response_tmm(&p, &grid_around(&p, 3.0, 60_001)).unwrap();
        let deepest = t.power().into_iter().fold(f64::INFINITY, f64::min);
        pts.push((n as f64, -db_from_linear(deepest)));
    }
    let elapsed = start.elapsed();
    let r2 = linear_fit_r2(&pts);
    let e8000 = pts[3].1;
    let pass = e8000 >= 80.0 && r2 > 0.999 && elapsed < Duration::from_secs(10);
    let list: Vec<String> = pts.iter().map(|(n, e)| format!("{n}: {e:.2} dB")).collect();
    outcome(
        pass,
        format!(
            "delta_n {dn:.5e}; {}; N=8000 {e8000:.1} dB (>= 80), R^2 {r2:.5} (> 0.999), {:.2} s (< 10 s)",
            list.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

/// Full width of the reflection band at half its peak reflectance, nm.
fn reflection_fwhm_nm(p: &DbrParams) -> f64 {
    let grid = grid_around(p, 4.0, 40_001);
    let (_, r) = dbr_response_tmm(p, &grid).unwrap();
    let refl = r.power();
    let peak = refl.iter().enumerate().fold(0, |b, (i, &v)| if v > refl[b] { i } else { b });
    let half = 0.5 * refl[peak];
    let (mut lo, mut hi) = (peak, peak);
    while lo > 0 && refl[lo - 1] >= half {
        lo -= 1;
    }
    while hi + 1 < refl.len() && refl[hi + 1] >= half {
        hi += 1;
    }
    (SPEED_OF_LIGHT / grid.frequency(lo) - SPEED_OF_LIGHT / grid.frequency(hi)) * 1e9
}

fn stop_band_width() -> Outcome {
    let dn = calibrated_delta_n();
    let test = reflection_fwhm_nm(&test_grating(2000, dn));
    let chip = reflection_fwhm_nm(&DbrParams { delta_n: dn, ..DbrParams::default() });
    let ok = |w: f64| (0.8..=2.2).contains(&w);
    outcome(
        ok(test) && ok(chip),
        format!("FWHM {test:.3} nm (2000-period test grating), {chip:.3} nm (chip grating); range [0.8, 2.2] nm"),
    )
}

fn composite_pump_rejection() -> Outcome {
    let cfg = ScenarioConfig::preset(PresetKind::ChipA);
    let report = extinction_report(&cfg.circuit, "common_through").unwrap();
    let floor = report.dbr_floor_db.unwrap_or(f64::NAN);
    let total = report.cumulative_db;
    let stages: Vec<String> = report.stages.iter().map(|(k, v)| format!("{k} {v:.1}")).collect();
    outcome(
        (95.0..=100.0).contains(&total) && (floor - 65.0).abs() <= 2.0,
        format!(
            "ideal-path extinction {total:.2} dB (95..100) [{}]; DBR stage through stray path {floor:.2} dB (65 ± 2)",
            stages.join(", ")
        ),
    )
}

fn quadratic_law() -> Outcome {
    let cfg = ScenarioConfig::preset(PresetKind::TwoChipLink);
    let ring = *cfg.source_ring().unwrap().0.params();
    let sfwm = SfwmParams { p_sat_w: 1e-3, ..cfg.sfwm };
    let rate = |p_mw: f64| internal_pair_rate(&sfwm, &ring, p_mw * 1e-3);
    let pts: Vec<(f64, f64)> = (0..=20).map(|i| 0.01 * 10f64.powf(i as f64 / 20.0)).map(|p| (p, rate(p))).collect();
    let low = log_log_slope(&pts);
    let high = (rate(1.0) / rate(0.5)).ln() / 2f64.ln();
    outcome(
        (low - 2.0).abs() <= 0.05 && high < 1.9,
        format!("slope over [0.01, 0.1] mW {low:.4} (2.00 ± 0.05); slope 0.5 to 1 mW {high:.3} (< 1.9)"),
    )
}

fn two_chip() -> ScenarioConfig {
    ScenarioConfig::preset(PresetKind::TwoChipLink)
}

fn car_reproduction() -> Outcome {
    let cfg = two_chip();
    let budget = cfg.loss_budget().unwrap().combined_db();
    let car03 = cfg.with_power(0.3e-3).analytic().unwrap().car;
    let powers: Vec<f64> = (0..=34).map(|i| 0.3 + 0.05 * i as f64).collect();
    let cars: Vec<f64> = powers.iter().map(|p| cfg.with_power(p * 1e-3).analytic().unwrap().car).collect();
    let worst = cars.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    outcome(
        (44.0..=56.0).contains(&car03) && worst <= 0.0,
        format!(
            "budget {budget:.2} dB; CAR(0.3 mW) {car03:.2} (44..56); CAR(2 mW) {:.2}; largest step over [0.3, 2] mW {worst:.3} (<= 0)",
            cars.last().unwrap()
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let cfg = two_chip();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut slowest = Duration::ZERO;
    for p in [0.1, 0.3, 1.0] {
        let at = cfg.with_power(p * 1e-3);
        let an = at.analytic().unwrap();
        let start = Instant::now();
        let mc = at.simulate(Exec::default()).unwrap();
        slowest = slowest.max(start.elapsed());
        let sigma = mc.car_sigma.hypot(an.car_sigma);
        let z = (mc.car - an.car).abs() / sigma;
        pass &= z < 3.0;
        parts.push(format!("{p} mW: MC {:.2} ± {:.2} vs analytic {:.2} ({z:.2} sigma)", mc.car, mc.car_sigma, an.car));
    }
    pass &= slowest < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "{}; {} s acquisitions, slowest {:.2} s (< 60 s)",
            parts.join("; "),
            cfg.counting.acquisition_s,
            slowest.as_secs_f64()
        ),
    )
}

fn tmm_vs_cmt() -> Outcome {
    let base = DbrParams::test_structure(2000);
    let kl_per_dn = base.kappa_l() / base.delta_n;
    let mut worst = (0.0, 0.0);
    for i in 0..=60 {
        let kl = 0.5 * 30f64.powf(i as f64 / 60.0);
        let p = DbrParams { delta_n: kl / kl_per_dn, ..base };
        let tmm = db_from_linear(Dbr::new(p).unwrap().grating_response(p.center_hz()).0.norm_sqr());
        let cmt = db_from_linear(dbr_center_transmission_cmt(&p));
        let diff = (tmm - cmt).abs();
        if diff > worst.1 {
            worst = (kl, diff);
        }
    }
    outcome(
        worst.1 < 1.0,
        format!(
            "61 gratings with kappa*L in [0.5, 15]; largest gap {:.4} dB at kappa*L = {:.2} (< 1 dB)",
            worst.1, worst.0
        ),
    )
}

fn demultiplexing() -> Outcome {
    let cfg = ScenarioConfig::preset(PresetKind::ChipB);
    let (ring, heater) = cfg.source_ring().unwrap();
    let t = enumerate_triplets(ring, &heater, cfg.circuit.pump_wavelength_m, 1).unwrap()[0];
    let db =
        |c: &ScenarioConfig, port: &str, f: f64| db_from_linear(c.circuit.port_transfer(port, f).unwrap().norm_sqr());
    let idler_in_signal = db(&cfg, "drop_1", t.f_idler) - db(&cfg, "drop_2", t.f_idler);
    let signal_in_idler = db(&cfg, "drop_2", t.f_signal) - db(&cfg, "drop_1", t.f_signal);

    let mut rest = cfg.clone();
    rest.set("heaters.ad1", "0").unwrap();
    rest.set("heaters.ad2", "0").unwrap();
    let through_s = db(&cfg, "common_through", t.f_signal) - db(&rest, "common_through", t.f_signal);
    let through_i = db(&cfg, "common_through", t.f_idler) - db(&rest, "common_through", t.f_idler);

    let pass = idler_in_signal < -30.0 && signal_in_idler < -30.0 && through_s <= -10.0 && through_i <= -10.0;
    outcome(
        pass,
        format!(
            "m = 1 cross-port leakage: idler into drop_1 {idler_in_signal:.2} dB, signal into drop_2 {signal_in_idler:.2} dB (< -30 dB); \
             common_through vs untuned filters: signal {through_s:.2} dB, idler {through_i:.2} dB (<= -10 dB)"
        ),
    )
}

fn energy_and_q_law() -> Outcome {
    let cfg = ScenarioConfig::preset(PresetKind::ChipA);
    let (ring, heater) = cfg.source_ring().unwrap();
    let triplets = enumerate_triplets(ring, &heater, cfg.circuit.pump_wavelength_m, 50).unwrap();
    let worst = triplets.iter().map(|t| t.mismatch_hz().abs()).fold(0.0, f64::max);
    let mut params = *ring.params();
    let r1 = internal_pair_rate(&cfg.sfwm, &params, 1e-3);
    params.loaded_q *= 2.0;
    let r2 = internal_pair_rate(&cfg.sfwm, &params, 1e-3);
    let ratio = r2 / r1;
    outcome(
        worst == 0.0 && (ratio - 8.0).abs() <= 8.0 * f64::EPSILON,
        format!("max |f_s + f_i - 2 f_p| over {} triplets {worst:e} Hz; rate(2Q)/rate(Q) = {ratio}", triplets.len()),
    )
}

fn determinism() -> Outcome {
    let cfg = two_chip();
    let ccfg = cfg.coincidence_config().unwrap();
    let run = |exec| {
        let r = cfg.simulate(exec).unwrap();
        histogram_csv(r.histogram.as_ref().unwrap(), &ccfg, &[("seed".into(), ccfg.seed.to_string())])
    };
    let (a, b) = (run(Exec::default()), run(Exec::default()));
    let serial = run(Exec::Serial);
    outcome(
        a == b && a == serial,
        format!(
            "seed {}: two runs {} ({} bytes), serial run {}",
            ccfg.seed,
            if a == b { "identical" } else { "differ" },
            a.len(),
            if a == serial { "identical" } else { "differs" }
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("DBR extinction scaling", dbr_extinction_scaling),
        ("stop-band width", stop_band_width),
        ("composite pump rejection", composite_pump_rejection),
        ("quadratic law", quadratic_law),
        ("CAR reproduction", car_reproduction),
        ("oracle equivalence", oracle_equivalence),
        ("TMM vs CMT", tmm_vs_cmt),
        ("demultiplexing", demultiplexing),
        ("energy conservation and Q law", energy_and_q_law),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{} {:>2}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
