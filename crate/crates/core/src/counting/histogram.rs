use std::fmt::Write;

use super::{car_with_sigma, CoincidenceConfig};
use crate::{Error, Result};

/// Coincidence counts per delay bin over `[-span_s, span_s)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn zeros(n_bins: usize) -> Self {
        Histogram { counts: vec![0; n_bins] }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn add(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// Index of the fullest bin (first one on ties).
    pub fn peak_bin(&self) -> usize {
        self.counts.iter().enumerate().fold(0, |best, (i, &c)| if c > self.counts[best] { i } else { best })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarEstimate {
    pub car: f64,
    pub car_sigma: f64,
    pub raw_ratio: f64,
    pub peak_counts: u64,
    /// Accidentals expected inside the window, from the off-peak mean.
    pub background_counts: f64,
    pub zero_background: bool,
}

/// CAR from a measured histogram: peak-window counts against the off-peak
/// mean scaled to the window.
pub fn car_from_histogram(hist: &Histogram, cfg: &CoincidenceConfig) -> Result<CarEstimate> {
    if hist.counts.len() != cfg.n_bins() {
        return Err(Error::Shape(format!("histogram has {} bins, config expects {}", hist.counts.len(), cfg.n_bins())));
    }
    let n_bg = cfg.background_bins();
    if n_bg < 10 {
        return Err(Error::Config(format!("only {n_bg} off-peak bins; widen the histogram span")));
    }
    let n_peak = cfg.peak_bins();
    let (mut peak, mut bg) = (0u64, 0u64);
    for (i, &c) in hist.counts.iter().enumerate() {
        if cfg.is_peak_bin(i) {
            peak += c;
        } else if cfg.is_background_bin(i) {
            bg += c;
        }
    }
    let b = bg as f64 * n_peak as f64 / n_bg as f64;
    if b == 0.0 {
        return Ok(CarEstimate {
            car: f64::INFINITY,
            car_sigma: 0.0,
            raw_ratio: f64::INFINITY,
            peak_counts: peak,
            background_counts: 0.0,
            zero_background: true,
        });
    }
    let (car, car_sigma) = car_with_sigma(peak as f64, b, n_peak, n_bg);
    Ok(CarEstimate {
        car,
        car_sigma,
        raw_ratio: peak as f64 / b,
        peak_counts: peak,
        background_counts: b,
        zero_background: false,
    })
}

/// CSV with `delay_s,counts` columns under `#`-prefixed metadata lines.
pub fn histogram_csv(hist: &Histogram, cfg: &CoincidenceConfig, metadata: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in metadata {
        let _ = writeln!(out, "# {k}: {v}");
    }
    out.push_str("delay_s,counts\n");
    for (i, c) in hist.counts.iter().enumerate() {
        let _ = writeln!(out, "{:.6e},{c}", cfg.bin_center(i));
    }
    out
}
