//! Event-level Monte Carlo of the two detector streams.
//!
//! The acquisition is cut into equal segments. Segment `k` draws from a
//! ChaCha8 generator seeded with `cfg.seed` on stream `k`, so the merged
//! histogram does not depend on how segments are scheduled.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};

use super::{
    car_from_histogram, singles_rates, CoincidenceConfig, CoincidenceResult, DetectorParams, Histogram, LossBudget,
};
use crate::exec::Exec;
use crate::{Error, Result};

/// Expected detections above which a run is refused.
pub const MAX_DETECTIONS: f64 = 1e9;

fn poisson<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean > 0.0 {
        Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
    } else {
        0
    }
}

fn jitter<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("positive sigma").sample(rng)
    } else {
        0.0
    }
}

/// Drops events closer than `dead` to the last kept one.
fn apply_dead_time(times: &mut Vec<f64>, dead: f64) {
    if dead <= 0.0 || times.is_empty() {
        return;
    }
    let mut last = f64::NEG_INFINITY;
    times.retain(|&t| {
        let keep = t - last >= dead;
        if keep {
            last = t;
        }
        keep
    });
}

struct Segment {
    hist: Histogram,
    detections: [u64; 2],
}

struct Rates {
    both: f64,
    only: [f64; 2],
    background: [f64; 2],
}

fn run_segment(
    index: usize,
    length: f64,
    rates: &Rates,
    det: &[DetectorParams; 2],
    cfg: &CoincidenceConfig,
) -> Segment {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let mut arms: [Vec<f64>; 2] = [Vec::new(), Vec::new()];

    let n_both = poisson(&mut rng, rates.both * length);
    let lifetime =
        (cfg.correlation_time_s > 0.0).then(|| Exp::new(1.0 / cfg.correlation_time_s).expect("positive rate"));
    for _ in 0..n_both {
        let t = rng.random::<f64>() * length;
        let delay = match &lifetime {
            Some(e) => {
                let d: f64 = e.sample(&mut rng);
                if rng.random::<bool>() {
                    d
                } else {
                    -d
                }
            }
            None => 0.0,
        };
        arms[0].push(t + jitter(&mut rng, det[0].jitter_sigma_s));
        arms[1].push(t + delay + jitter(&mut rng, det[1].jitter_sigma_s));
    }
    for arm in 0..2 {
        let n = poisson(&mut rng, (rates.only[arm] + rates.background[arm]) * length);
        arms[arm].extend((0..n).map(|_| rng.random::<f64>() * length));
        arms[arm].sort_by(f64::total_cmp);
        apply_dead_time(&mut arms[arm], det[arm].dead_time_s);
    }

    let n_bins = cfg.n_bins();
    let mut hist = Histogram::zeros(n_bins);
    let span = cfg.span_s;
    let (signal, idler) = (&arms[0], &arms[1]);
    let mut lo = 0;
    for &t1 in signal {
        while lo < idler.len() && idler[lo] < t1 - span {
            lo += 1;
        }
        for &t2 in &idler[lo..] {
            let d = t2 - t1;
            if d >= span {
                break;
            }
            let bin = ((d + span) / cfg.bin_width_s).floor();
            if bin >= 0.0 && (bin as usize) < n_bins {
                hist.counts[bin as usize] += 1;
            }
        }
    }
    Segment { hist, detections: [signal.len() as u64, idler.len() as u64] }
}

pub fn simulate_coincidences(
    pair_rate_hz: f64,
    budget: &LossBudget,
    det: &[DetectorParams; 2],
    cfg: &CoincidenceConfig,
) -> Result<CoincidenceResult> {
    simulate_coincidences_with(pair_rate_hz, budget, det, cfg, Exec::default())
}

/// Monte Carlo coincidence run. Correlated detections come from thinning
/// the pair stream; unpaired detections, darks and residual pump photons
/// are independent Poisson streams.
pub fn simulate_coincidences_with(
    pair_rate_hz: f64,
    budget: &LossBudget,
    det: &[DetectorParams; 2],
    cfg: &CoincidenceConfig,
    exec: Exec,
) -> Result<CoincidenceResult> {
    cfg.validate()?;
    budget.validate()?;
    for d in det {
        d.validate()?;
    }
    if !(pair_rate_hz >= 0.0) || !pair_rate_hz.is_finite() {
        return Err(Error::Domain("pair rate must be finite and non-negative".into()));
    }
    let expected = singles_rates(pair_rate_hz, budget, det);
    let total = (expected[0] + expected[1]) * cfg.acquisition_s;
    if total > MAX_DETECTIONS {
        return Err(Error::Overflow(format!(
            "about {total:.3e} detections expected (limit {MAX_DETECTIONS:.0e}); shorten acquisition_s"
        )));
    }

    let p = [budget.detection_probability(0), budget.detection_probability(1)];
    let rates = Rates {
        both: pair_rate_hz * p[0] * p[1],
        only: [pair_rate_hz * p[0] * (1.0 - p[1]), pair_rate_hz * p[1] * (1.0 - p[0])],
        background: [0, 1].map(|i| det[i].dark_rate_hz + budget.pump_detection_rate(i)),
    };
    let n_seg = (cfg.acquisition_s / cfg.segment_s).ceil().max(1.0) as usize;
    let length = cfg.acquisition_s / n_seg as f64;
    let segments = exec.map_indexed(n_seg, |k| run_segment(k, length, &rates, det, cfg));

    let mut hist = Histogram::zeros(cfg.n_bins());
    let mut detections = [0u64; 2];
    for s in &segments {
        hist.add(&s.hist);
        detections[0] += s.detections[0];
        detections[1] += s.detections[1];
    }
    let est = car_from_histogram(&hist, cfg)?;
    let acq = cfg.acquisition_s;
    Ok(CoincidenceResult {
        histogram: Some(hist),
        singles_hz: detections.map(|n| n as f64 / acq),
        true_rate_hz: (est.peak_counts as f64 - est.background_counts) / acq,
        accidental_rate_hz: est.background_counts / acq,
        car: est.car,
        car_sigma: est.car_sigma,
        raw_ratio: est.raw_ratio,
        zero_background: est.zero_background,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{analytic_coincidences, default_detectors};
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn budget() -> LossBudget {
        LossBudget::split(40.0, 0.5, &default_detectors()).unwrap()
    }

    #[test]
    fn dark_only_histogram_is_flat() {
        let mut det = default_detectors();
        det[0].dark_rate_hz = 5e4;
        det[1].dark_rate_hz = 5e4;
        let cfg = CoincidenceConfig { acquisition_s: 100.0, ..Default::default() };
        let r = simulate_coincidences(0.0, &budget(), &det, &cfg).unwrap();
        let h = r.histogram.unwrap();
        let mean = h.total() as f64 / h.counts.len() as f64;
        assert!(mean > 20.0);
        let chi2: f64 = h.counts.iter().map(|&c| (c as f64 - mean).powi(2) / mean).sum();
        let dof = (h.counts.len() - 1) as f64;
        let p = 1.0 - ChiSquared::new(dof).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 = {chi2}, p = {p}");
        assert!(r.car.abs() < 3.0 * r.car_sigma);
    }

    #[test]
    fn serial_and_parallel_are_bit_identical() {
        let det = default_detectors();
        let cfg = CoincidenceConfig { acquisition_s: 200.0, seed: 42, ..Default::default() };
        let a = simulate_coincidences_with(2e5, &budget(), &det, &cfg, Exec::Serial).unwrap();
        let b = simulate_coincidences_with(2e5, &budget(), &det, &cfg, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        let c = simulate_coincidences_with(2e5, &budget(), &det, &CoincidenceConfig { seed: 43, ..cfg }, Exec::Serial)
            .unwrap();
        assert_ne!(a.histogram, c.histogram);
    }

    #[test]
    fn singles_within_four_sigma() {
        let det = default_detectors();
        let mut b = budget();
        b.residual_pump_hz = [2000.0, 500.0];
        let cfg = CoincidenceConfig { acquisition_s: 100.0, ..Default::default() };
        let rate = 1e6;
        let r = simulate_coincidences(rate, &b, &det, &cfg).unwrap();
        let expected = singles_rates(rate, &b, &det);
        for (i, e) in expected.iter().enumerate() {
            let n = e * cfg.acquisition_s;
            let got = r.singles_hz[i] * cfg.acquisition_s;
            assert!((got - n).abs() < 4.0 * n.sqrt(), "arm {i}: {got} vs {n}");
        }
    }

    #[test]
    fn peak_sits_at_zero_delay_and_follows_jitter() {
        let mut det = default_detectors();
        det[0].jitter_sigma_s = 300e-12;
        det[1].jitter_sigma_s = 300e-12;
        let cfg = CoincidenceConfig { acquisition_s: 50.0, window_s: 3e-9, ..Default::default() };
        let r = simulate_coincidences(1e7, &budget(), &det, &cfg).unwrap();
        let h = r.histogram.unwrap();
        let peak = cfg.bin_center(h.peak_bin());
        assert!(peak.abs() < 0.3e-9, "peak at {peak}");
        // Spread of the excess counts around zero delay.
        let bg = h.counts[..50].iter().sum::<u64>() as f64 / 50.0;
        let (mut w, mut m2) = (0.0, 0.0);
        for (i, &c) in h.counts.iter().enumerate() {
            let x = cfg.bin_center(i);
            if x.abs() < 2e-9 {
                let e = c as f64 - bg;
                w += e;
                m2 += e * x * x;
            }
        }
        let sigma = (m2 / w).sqrt();
        let expected =
            (2.0 * 300e-12f64.powi(2) + 2.0 * cfg.correlation_time_s.powi(2) + 100e-12f64.powi(2) / 12.0).sqrt();
        assert!((sigma / expected - 1.0).abs() < 0.1, "{sigma} vs {expected}");
    }

    #[test]
    fn dead_time_thins_fast_streams() {
        let mut det = default_detectors();
        det[0].dead_time_s = 50e-6;
        let cfg = CoincidenceConfig { acquisition_s: 2.0, ..Default::default() };
        let r = simulate_coincidences(1e8, &budget(), &det, &cfg).unwrap();
        let incident = singles_rates(1e8, &budget(), &det)[0];
        let expected = incident / (1.0 + incident * det[0].dead_time_s);
        assert!((r.singles_hz[0] / expected - 1.0).abs() < 0.02);
        assert!(r.singles_hz[0] < 0.9 * incident);
    }

    #[test]
    fn overflow_guard() {
        let cfg = CoincidenceConfig { acquisition_s: 1e6, ..Default::default() };
        let err = simulate_coincidences(1e9, &budget(), &default_detectors(), &cfg).unwrap_err();
        assert!(matches!(err, Error::Overflow(_)));
    }

    #[test]
    fn agrees_with_analytic() {
        let det = default_detectors();
        let cfg = CoincidenceConfig { acquisition_s: 1000.0, ..Default::default() };
        for rate in [1e5, 1e6] {
            let mc = simulate_coincidences(rate, &budget(), &det, &cfg).unwrap();
            let an = analytic_coincidences(rate, &budget(), &det, &cfg).unwrap();
            let sigma = mc.car_sigma.hypot(an.car_sigma);
            assert!((mc.car - an.car).abs() < 3.0 * sigma, "{} vs {} ± {sigma}", mc.car, an.car);
        }
    }
}
