//! Detector and coincidence statistics.
//!
//! Arm 0 is the signal detector, arm 1 the idler detector. Delays in the
//! histogram are `t_idler − t_signal`.

mod histogram;
mod monte_carlo;

use statrs::function::erf::erfc;

pub use histogram::{car_from_histogram, histogram_csv, CarEstimate, Histogram};
pub use monte_carlo::{simulate_coincidences, simulate_coincidences_with, MAX_DETECTIONS};

use crate::spectral::{db_from_linear, linear_from_db};
use crate::{Error, Result};

pub const DEFAULT_DARK_RATE_HZ: f64 = 300.0;
pub const DEFAULT_JITTER_S: f64 = 50e-12;

/// Coincidence half-width that puts CAR at 50 for 0.3 mW on the default
/// two-chip link (3.265 ns), rounded to whole 100 ps bins.
pub const CALIBRATED_WINDOW_S: f64 = 3.3e-9;

/// Photon lifetime of the default generation ring.
pub const DEFAULT_CORRELATION_TIME_S: f64 = 32.4e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    pub efficiency: f64,
    pub dark_rate_hz: f64,
    /// Gaussian timing jitter, one standard deviation.
    pub jitter_sigma_s: f64,
    /// Non-paralysable dead time; only the Monte Carlo applies it.
    pub dead_time_s: f64,
}

impl DetectorParams {
    pub fn with_efficiency(efficiency: f64) -> Self {
        DetectorParams {
            efficiency,
            dark_rate_hz: DEFAULT_DARK_RATE_HZ,
            jitter_sigma_s: DEFAULT_JITTER_S,
            dead_time_s: 0.0,
        }
    }

    pub fn signal_default() -> Self {
        Self::with_efficiency(0.10)
    }

    pub fn idler_default() -> Self {
        Self::with_efficiency(0.05)
    }

    /// Detector efficiency as a loss in dB.
    pub fn efficiency_db(&self) -> f64 {
        -db_from_linear(self.efficiency)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::Config(format!("detector efficiency {} outside [0, 1]", self.efficiency)));
        }
        if !(self.dark_rate_hz >= 0.0) || !(self.jitter_sigma_s >= 0.0) || !(self.dead_time_s >= 0.0) {
            return Err(Error::Config("dark rate, jitter and dead time must be non-negative".into()));
        }
        Ok(())
    }
}

pub fn default_detectors() -> [DetectorParams; 2] {
    [DetectorParams::signal_default(), DetectorParams::idler_default()]
}

/// Losses from the ring to each detector, plus the uncorrelated pump
/// photons reaching each detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBudget {
    /// Optical path loss, ring to detector input (dB).
    pub path_db: [f64; 2],
    /// Detector efficiency expressed as loss (dB).
    pub efficiency_db: [f64; 2],
    /// Residual pump photon rate at each detector input.
    pub residual_pump_hz: [f64; 2],
}

impl LossBudget {
    pub fn new(path_db: [f64; 2], det: &[DetectorParams; 2]) -> Self {
        LossBudget {
            path_db,
            efficiency_db: [det[0].efficiency_db(), det[1].efficiency_db()],
            residual_pump_hz: [0.0; 2],
        }
    }

    /// Splits `combined_db` between the arms, `signal_share` of it to the
    /// signal arm, each share including its detector efficiency.
    pub fn split(combined_db: f64, signal_share: f64, det: &[DetectorParams; 2]) -> Result<Self> {
        if !(0.0..=1.0).contains(&signal_share) {
            return Err(Error::Config(format!("signal share {signal_share} outside [0, 1]")));
        }
        let eff = [det[0].efficiency_db(), det[1].efficiency_db()];
        let arms = [combined_db * signal_share, combined_db * (1.0 - signal_share)];
        let path_db = [arms[0] - eff[0], arms[1] - eff[1]];
        if path_db.iter().any(|&p| p < 0.0) {
            return Err(Error::Config(format!(
                "a {combined_db} dB budget cannot cover detector efficiencies of {:.2} and {:.2} dB",
                eff[0], eff[1]
            )));
        }
        Ok(LossBudget { path_db, efficiency_db: eff, residual_pump_hz: [0.0; 2] })
    }

    pub fn arm_db(&self, arm: usize) -> f64 {
        self.path_db[arm] + self.efficiency_db[arm]
    }

    pub fn combined_db(&self) -> f64 {
        self.arm_db(0) + self.arm_db(1)
    }

    /// Probability that a photon leaving the ring is detected in `arm`.
    pub fn detection_probability(&self, arm: usize) -> f64 {
        linear_from_db(-self.arm_db(arm))
    }

    pub fn efficiency(&self, arm: usize) -> f64 {
        linear_from_db(-self.efficiency_db[arm])
    }

    /// Detected rate of uncorrelated background in `arm`, darks excluded.
    pub fn pump_detection_rate(&self, arm: usize) -> f64 {
        self.residual_pump_hz[arm] * self.efficiency(arm)
    }

    pub fn swapped(&self) -> Self {
        LossBudget {
            path_db: [self.path_db[1], self.path_db[0]],
            efficiency_db: [self.efficiency_db[1], self.efficiency_db[0]],
            residual_pump_hz: [self.residual_pump_hz[1], self.residual_pump_hz[0]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.path_db.iter().chain(&self.efficiency_db).chain(&self.residual_pump_hz);
        if all.into_iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::Config("loss budget entries must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceConfig {
    pub bin_width_s: f64,
    /// Half-width of the zero-delay acceptance window.
    pub window_s: f64,
    pub acquisition_s: f64,
    pub seed: u64,
    /// Histogram covers delays in `[-span_s, span_s)`.
    pub span_s: f64,
    /// Time constant of the two-sided exponential pair delay.
    pub correlation_time_s: f64,
    /// Length of each independently seeded Monte Carlo segment.
    pub segment_s: f64,
}

impl Default for CoincidenceConfig {
    fn default() -> Self {
        CoincidenceConfig {
            bin_width_s: 100e-12,
            window_s: CALIBRATED_WINDOW_S,
            acquisition_s: 3000.0,
            seed: 1,
            span_s: 20e-9,
            correlation_time_s: DEFAULT_CORRELATION_TIME_S,
            segment_s: 10.0,
        }
    }
}

impl CoincidenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width_s > 0.0) {
            return Err(Error::Config("bin width must be positive".into()));
        }
        if !(self.window_s >= 0.5 * self.bin_width_s) {
            return Err(Error::Config("window half-width must be at least half a bin".into()));
        }
        if !(self.acquisition_s > 0.0) || !(self.segment_s > 0.0) {
            return Err(Error::Config("acquisition and segment times must be positive".into()));
        }
        if !(self.span_s > self.window_s) {
            return Err(Error::Config("histogram span must exceed the window".into()));
        }
        if !(self.correlation_time_s >= 0.0) {
            return Err(Error::Config("correlation time must be non-negative".into()));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        2 * ((self.span_s / self.bin_width_s).round() as usize).max(1)
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        let half = (self.n_bins() / 2) as f64;
        (i as f64 - half + 0.5) * self.bin_width_s
    }

    /// Bins whose centres lie inside the window.
    pub fn is_peak_bin(&self, i: usize) -> bool {
        self.bin_center(i).abs() <= self.window_s
    }

    /// Bins used for the accidental background, well clear of the peak.
    pub fn is_background_bin(&self, i: usize) -> bool {
        self.bin_center(i).abs() > 2.0 * self.window_s
    }

    pub fn peak_bins(&self) -> usize {
        (0..self.n_bins()).filter(|&i| self.is_peak_bin(i)).count()
    }

    pub fn background_bins(&self) -> usize {
        (0..self.n_bins()).filter(|&i| self.is_background_bin(i)).count()
    }

    /// A note when the window does not comfortably contain the peak.
    pub fn window_warning(&self, det: &[DetectorParams; 2]) -> Option<String> {
        let width = self.correlation_time_s + jitter_total(det);
        (self.window_s < 5.0 * width).then(|| {
            format!(
                "window half-width {:.3e} s is not much larger than the correlation peak ({:.3e} s)",
                self.window_s, width
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceResult {
    /// Delay histogram; `None` for analytic results.
    pub histogram: Option<Histogram>,
    pub singles_hz: [f64; 2],
    pub true_rate_hz: f64,
    pub accidental_rate_hz: f64,
    /// Background-subtracted peak over background.
    pub car: f64,
    pub car_sigma: f64,
    /// Raw peak over background.
    pub raw_ratio: f64,
    /// Set when there were no accidentals; `car` is then infinite.
    pub zero_background: bool,
}

/// Detected singles per arm.
pub fn singles_rates(pair_rate_hz: f64, budget: &LossBudget, det: &[DetectorParams; 2]) -> [f64; 2] {
    [0, 1].map(|i| pair_rate_hz * budget.detection_probability(i) + det[i].dark_rate_hz + budget.pump_detection_rate(i))
}

fn jitter_total(det: &[DetectorParams; 2]) -> f64 {
    det[0].jitter_sigma_s.hypot(det[1].jitter_sigma_s)
}

fn ln_norm_cdf(z: f64) -> f64 {
    if z > -30.0 {
        (0.5 * erfc(-z / std::f64::consts::SQRT_2)).ln()
    } else {
        let z2 = z * z;
        -0.5 * z2 - (-z).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

/// CDF of a Gaussian (σ = `s`) plus an exponential of mean `tau`.
fn emg_cdf(y: f64, s: f64, tau: f64) -> f64 {
    if tau == 0.0 {
        return if s == 0.0 { f64::from(u8::from(y >= 0.0)) } else { 0.5 * erfc(-y / (s * std::f64::consts::SQRT_2)) };
    }
    let lambda = 1.0 / tau;
    if s == 0.0 {
        return if y < 0.0 { 0.0 } else { -(-lambda * y).exp_m1() };
    }
    let gauss = 0.5 * erfc(-y / (s * std::f64::consts::SQRT_2));
    let tail = (-lambda * y + 0.5 * (lambda * s).powi(2) + ln_norm_cdf(y / s - lambda * s)).exp();
    (gauss - tail).clamp(0.0, 1.0)
}

/// Fraction of the correlation peak inside `[-window, window]` for a
/// two-sided exponential delay convolved with the combined jitter.
pub fn true_fraction(window_s: f64, correlation_time_s: f64, jitter_sigma_s: f64) -> f64 {
    (emg_cdf(window_s, jitter_sigma_s, correlation_time_s) - emg_cdf(-window_s, jitter_sigma_s, correlation_time_s))
        .clamp(0.0, 1.0)
}

/// CAR and its Poisson uncertainty from peak counts `p` and the expected
/// background `b` in the window, with the background estimated from
/// `n_bg` bins against `n_peak` peak bins.
pub(crate) fn car_with_sigma(p: f64, b: f64, n_peak: usize, n_bg: usize) -> (f64, f64) {
    let car = (p - b) / b;
    let var = p / (b * b) + (p / (b * b)).powi(2) * b * n_peak as f64 / n_bg as f64;
    (car, var.sqrt())
}

/// Closed-form true and accidental rates and CAR.
pub fn analytic_coincidences(
    pair_rate_hz: f64,
    budget: &LossBudget,
    det: &[DetectorParams; 2],
    cfg: &CoincidenceConfig,
) -> Result<CoincidenceResult> {
    cfg.validate()?;
    budget.validate()?;
    for d in det {
        d.validate()?;
    }
    if !(pair_rate_hz >= 0.0) {
        return Err(Error::Domain("pair rate must be non-negative".into()));
    }
    let singles = singles_rates(pair_rate_hz, budget, det);
    let frac = true_fraction(cfg.window_s, cfg.correlation_time_s, jitter_total(det));
    let true_rate = pair_rate_hz * budget.detection_probability(0) * budget.detection_probability(1) * frac;
    let acc = singles[0] * singles[1] * 2.0 * cfg.window_s;
    let (n_peak, n_bg) = (cfg.peak_bins(), cfg.background_bins().max(1));
    let (car, car_sigma, raw, zero) = if acc > 0.0 {
        let (p, b) = ((true_rate + acc) * cfg.acquisition_s, acc * cfg.acquisition_s);
        let (car, sigma) = car_with_sigma(p, b, n_peak, n_bg);
        (car, sigma, p / b, false)
    } else {
        (f64::INFINITY, 0.0, f64::INFINITY, true)
    };
    Ok(CoincidenceResult {
        histogram: None,
        singles_hz: singles,
        true_rate_hz: true_rate,
        accidental_rate_hz: acc,
        car,
        car_sigma,
        raw_ratio: raw,
        zero_background: zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dets() -> [DetectorParams; 2] {
        default_detectors()
    }

    fn lossless() -> LossBudget {
        LossBudget { path_db: [0.0; 2], efficiency_db: [0.0; 2], residual_pump_hz: [0.0; 2] }
    }

    #[test]
    fn zero_pairs_leaves_darks() {
        let b = LossBudget::split(68.0, 0.5, &dets()).unwrap();
        assert_eq!(singles_rates(0.0, &b, &dets()), [300.0, 300.0]);
    }

    #[test]
    fn lossless_ideal_detectors_see_every_pair() {
        let mut d = dets();
        for x in &mut d {
            x.efficiency = 1.0;
            x.dark_rate_hz = 0.0;
        }
        assert_eq!(singles_rates(1234.0, &lossless(), &d), [1234.0, 1234.0]);
    }

    #[test]
    fn sixty_eight_db_budget_rate() {
        let b = LossBudget::split(68.0, 0.5, &dets()).unwrap();
        assert_relative_eq!(b.combined_db(), 68.0, max_relative = 1e-12);
        let cfg = CoincidenceConfig { window_s: 2e-9, ..Default::default() };
        let r = analytic_coincidences(5e6, &b, &dets(), &cfg).unwrap();
        let expect = 5e6 * 10f64.powf(-6.8);
        assert_relative_eq!(r.true_rate_hz, expect, max_relative = 0.01);
        assert!((r.true_rate_hz - 0.79).abs() < 0.02);
    }

    #[test]
    fn split_rejects_budget_below_efficiencies() {
        assert!(LossBudget::split(20.0, 0.5, &dets()).is_err());
    }

    #[test]
    fn dark_only_car_is_zero() {
        let b = LossBudget::split(68.0, 0.5, &dets()).unwrap();
        let r = analytic_coincidences(0.0, &b, &dets(), &CoincidenceConfig::default()).unwrap();
        assert_eq!(r.car, 0.0);
        assert!(!r.zero_background);
    }

    #[test]
    fn no_accidentals_flags_infinite_car() {
        let mut d = dets();
        d[0].dark_rate_hz = 0.0;
        d[1].dark_rate_hz = 0.0;
        let r = analytic_coincidences(0.0, &lossless(), &d, &CoincidenceConfig::default()).unwrap();
        assert!(r.zero_background && r.car.is_infinite());
    }

    #[test]
    fn true_fraction_limits() {
        assert_relative_eq!(true_fraction(1e-9, 30e-12, 0.0), 1.0 - (-1e-9f64 / 30e-12).exp(), max_relative = 1e-12);
        let w = 50e-12;
        assert_relative_eq!(
            true_fraction(w, 0.0, 50e-12),
            statrs::function::erf::erf(1.0 / 2f64.sqrt()),
            max_relative = 1e-12
        );
        assert!(true_fraction(3e-9, 32e-12, 70e-12) > 0.999_999);
        assert_eq!(true_fraction(1e-9, 0.0, 0.0), 1.0);
    }

    #[test]
    fn true_fraction_matches_numerical_convolution() {
        let (tau, s, w) = (32e-12, 70e-12, 80e-12);
        let n = 40_000;
        let lo = -2e-9;
        let h = 4e-9 / n as f64;
        let mut inside = 0.0;
        for i in 0..n {
            let x = lo + (i as f64 + 0.5) * h;
            let lap = (-x.abs() / tau).exp() / (2.0 * tau);
            let mass_in = 0.5
                * (statrs::function::erf::erf((w - x) / (s * 2f64.sqrt()))
                    - statrs::function::erf::erf((-w - x) / (s * 2f64.sqrt())));
            inside += lap * mass_in * h;
        }
        assert_relative_eq!(true_fraction(w, tau, s), inside, max_relative = 1e-5);
    }

    #[test]
    fn analytic_sigma_matches_estimator_arithmetic() {
        let (car, sigma) = car_with_sigma(510.0, 10.0, 10, 40);
        assert_relative_eq!(car, 50.0);
        assert!((sigma / car - 0.167).abs() < 0.01);
    }

    #[test]
    fn warning_for_narrow_window() {
        let cfg = CoincidenceConfig { window_s: 100e-12, ..Default::default() };
        assert!(cfg.window_warning(&dets()).is_some());
        assert!(CoincidenceConfig::default().window_warning(&dets()).is_none());
    }

    #[test]
    fn bin_geometry() {
        let cfg = CoincidenceConfig::default();
        assert_eq!(cfg.n_bins(), 400);
        assert_relative_eq!(cfg.bin_center(200), 50e-12, max_relative = 1e-9);
        assert_eq!(cfg.peak_bins(), 66);
        assert!(cfg.background_bins() >= 10);
    }

    proptest! {
        #[test]
        fn car_nonincreasing_in_window(w1 in 0.2e-9f64..10e-9, dw in 0.0f64..10e-9, rate in 1e3f64..1e8) {
            let b = LossBudget::split(68.0, 0.5, &dets()).unwrap();
            let c1 = CoincidenceConfig { window_s: w1, span_s: 50e-9, ..Default::default() };
            let c2 = CoincidenceConfig { window_s: w1 + dw, ..c1 };
            let a = analytic_coincidences(rate, &b, &dets(), &c1).unwrap().car;
            let z = analytic_coincidences(rate, &b, &dets(), &c2).unwrap().car;
            prop_assert!(z <= a * (1.0 + 1e-12));
        }

        #[test]
        fn car_symmetric_under_arm_swap(l0 in 5.0f64..40.0, l1 in 5.0f64..40.0, rate in 1e3f64..1e7, pump in 0.0f64..1e4) {
            let d = [DetectorParams { dark_rate_hz: 120.0, ..DetectorParams::signal_default() }, DetectorParams::idler_default()];
            let mut b = LossBudget::new([l0, l1], &d);
            b.residual_pump_hz = [pump, 2.0 * pump];
            let cfg = CoincidenceConfig::default();
            let a = analytic_coincidences(rate, &b, &d, &cfg).unwrap();
            let s = analytic_coincidences(rate, &b.swapped(), &[d[1], d[0]], &cfg).unwrap();
            prop_assert!((a.car - s.car).abs() <= 1e-12 * a.car.abs());
            prop_assert!(a.car >= 0.0);
        }

        #[test]
        fn budget_combines_in_db(l0 in 0.0f64..50.0, l1 in 0.0f64..50.0) {
            let b = LossBudget::new([l0, l1], &dets());
            let eff = 10.0 + 10.0 * 20f64.log10();
            prop_assert!((b.combined_db() - (l0 + l1 + eff)).abs() < 1e-9);
        }
    }
}
