//! Frequency grids, complex transfer spectra and decibel arithmetic.

use num_complex::Complex64;

use crate::exec::Exec;
use crate::{Error, Result};

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Planck constant, J·s (exact).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Floor applied when converting a zero amplitude to decibels.
pub const DEFAULT_DB_FLOOR: f64 = -200.0;

pub fn wavelength_to_frequency(lambda_m: f64) -> Result<f64> {
    if !(lambda_m > 0.0) || !lambda_m.is_finite() {
        return Err(Error::Domain(format!("wavelength must be positive, got {lambda_m}")));
    }
    Ok(SPEED_OF_LIGHT / lambda_m)
}

pub fn frequency_to_wavelength(freq_hz: f64) -> Result<f64> {
    if !(freq_hz > 0.0) || !freq_hz.is_finite() {
        return Err(Error::Domain(format!("frequency must be positive, got {freq_hz}")));
    }
    Ok(SPEED_OF_LIGHT / freq_hz)
}

/// Photon energy hν in joules.
pub fn photon_energy(freq_hz: f64) -> f64 {
    PLANCK * freq_hz
}

/// Power ratio to decibels.
pub fn db_from_linear(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Decibels to power ratio.
pub fn linear_from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Field amplitude for a power loss given in dB (positive = loss).
pub fn amplitude_from_loss_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 20.0)
}

/// Uniform grid in optical frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    start_hz: f64,
    stop_hz: f64,
    n_points: usize,
}

impl FrequencyGrid {
    pub fn new(start_hz: f64, stop_hz: f64, n_points: usize) -> Result<Self> {
        if !(start_hz.is_finite() && stop_hz.is_finite()) || start_hz <= 0.0 {
            return Err(Error::Domain(format!("grid bounds must be positive and finite, got [{start_hz}, {stop_hz}]")));
        }
        if start_hz >= stop_hz {
            return Err(Error::Domain(format!("grid start {start_hz} must be below stop {stop_hz}")));
        }
        if n_points < 2 {
            return Err(Error::Domain(format!("grid needs at least 2 points, got {n_points}")));
        }
        let grid = FrequencyGrid { start_hz, stop_hz, n_points };
        if !(grid.spacing() > 0.0) {
            return Err(Error::Domain("grid spacing underflows to zero".into()));
        }
        Ok(grid)
    }

    /// Grid covering the wavelength interval `[lambda_lo_m, lambda_hi_m]`.
    pub fn from_wavelengths(lambda_lo_m: f64, lambda_hi_m: f64, n_points: usize) -> Result<Self> {
        let f_hi = wavelength_to_frequency(lambda_lo_m)?;
        let f_lo = wavelength_to_frequency(lambda_hi_m)?;
        Self::new(f_lo, f_hi, n_points)
    }

    /// Grid of `n_points` centred on `center_hz` with total span `span_hz`.
    pub fn centered(center_hz: f64, span_hz: f64, n_points: usize) -> Result<Self> {
        Self::new(center_hz - span_hz / 2.0, center_hz + span_hz / 2.0, n_points)
    }

    pub fn start_hz(&self) -> f64 {
        self.start_hz
    }

    pub fn stop_hz(&self) -> f64 {
        self.stop_hz
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.stop_hz - self.start_hz) / (self.n_points - 1) as f64
    }

    pub fn frequency(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.stop_hz
        } else {
            self.start_hz + i as f64 * self.spacing()
        }
    }

    pub fn frequencies(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.frequency(i))
    }

    pub fn wavelength(&self, i: usize) -> f64 {
        SPEED_OF_LIGHT / self.frequency(i)
    }

    pub fn contains(&self, freq_hz: f64) -> bool {
        freq_hz >= self.start_hz && freq_hz <= self.stop_hz
    }

    /// Index of the sample closest to `freq_hz`, clamped to the grid.
    pub fn nearest_index(&self, freq_hz: f64) -> usize {
        let x = ((freq_hz - self.start_hz) / self.spacing()).round();
        x.clamp(0.0, (self.n_points - 1) as f64) as usize
    }
}

/// Complex field transmission sampled on a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    grid: FrequencyGrid,
    values: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn new(grid: FrequencyGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!("{} values for a grid of {} points", values.len(), grid.len())));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Domain(format!("non-finite amplitude at sample {i}")));
        }
        Ok(ComplexSpectrum { grid, values })
    }

    /// Samples `f(freq)` at every grid point.
    pub fn from_fn<F>(grid: FrequencyGrid, exec: Exec, f: F) -> Self
    where
        F: Fn(f64) -> Complex64 + Sync + Send,
    {
        let values = exec.map_indexed(grid.len(), |i| f(grid.frequency(i)));
        ComplexSpectrum { grid, values }
    }

    pub fn constant(grid: FrequencyGrid, value: Complex64) -> Self {
        ComplexSpectrum { grid, values: vec![value; grid.len()] }
    }

    pub fn ones(grid: FrequencyGrid) -> Self {
        Self::constant(grid, Complex64::new(1.0, 0.0))
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// |value|² at every sample.
    pub fn power(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn max_amplitude(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Element-wise product; both spectra must share a grid.
    pub fn multiply(&self, other: &ComplexSpectrum) -> Result<ComplexSpectrum> {
        if self.grid != other.grid {
            return Err(Error::Shape("cannot multiply spectra on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(ComplexSpectrum { grid: self.grid, values })
    }

    pub fn scale(&self, factor: f64) -> ComplexSpectrum {
        ComplexSpectrum { grid: self.grid, values: self.values.iter().map(|v| v * factor).collect() }
    }
}

/// Free-function form of [`ComplexSpectrum::multiply`].
pub fn multiply(a: &ComplexSpectrum, b: &ComplexSpectrum) -> Result<ComplexSpectrum> {
    a.multiply(b)
}

/// Power spectrum in decibels, clamped below at `floor_db`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrumDb {
    pub grid: FrequencyGrid,
    pub values_db: Vec<f64>,
    pub floor_db: f64,
}

impl PowerSpectrumDb {
    /// Builds a dB spectrum from linear power values.
    pub fn from_power(grid: FrequencyGrid, power: &[f64], floor_db: f64) -> Result<Self> {
        if power.len() != grid.len() {
            return Err(Error::Shape(format!("{} values for a grid of {} points", power.len(), grid.len())));
        }
        let values_db = power.iter().map(|&p| clamp_db(db_from_linear(p), floor_db)).collect();
        Ok(PowerSpectrumDb { grid, values_db, floor_db })
    }

    pub fn min_db(&self) -> f64 {
        self.values_db.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_db(&self) -> f64 {
        self.values_db.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn clamp_db(db: f64, floor_db: f64) -> f64 {
    if db.is_nan() || db < floor_db {
        floor_db
    } else {
        db
    }
}

/// 20·log10|field| at every sample, clamped at [`DEFAULT_DB_FLOOR`].
pub fn power_db(spectrum: &ComplexSpectrum) -> PowerSpectrumDb {
    power_db_with_floor(spectrum, DEFAULT_DB_FLOOR)
}

pub fn power_db_with_floor(spectrum: &ComplexSpectrum, floor_db: f64) -> PowerSpectrumDb {
    let values_db = spectrum.values.iter().map(|v| clamp_db(20.0 * v.norm().log10(), floor_db)).collect();
    PowerSpectrumDb { grid: spectrum.grid, values_db, floor_db }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid() -> FrequencyGrid {
        FrequencyGrid::new(190e12, 200e12, 11).unwrap()
    }

    #[test]
    fn wavelength_examples() {
        // c/λ evaluated by hand
        assert_relative_eq!(wavelength_to_frequency(1536e-9).unwrap(), 195.177e12, max_relative = 5e-6);
        assert_relative_eq!(wavelength_to_frequency(1525e-9).unwrap(), 196.585e12, max_relative = 5e-6);
        assert_eq!(wavelength_to_frequency(299_792_458.0).unwrap(), 1.0);
        assert!(matches!(wavelength_to_frequency(0.0), Err(Error::Domain(_))));
        assert!(matches!(wavelength_to_frequency(-1e-6), Err(Error::Domain(_))));
    }

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::new(2.0, 1.0, 10).is_err());
        assert!(FrequencyGrid::new(1.0, 2.0, 1).is_err());
        assert!(FrequencyGrid::new(1.0, 1.0, 2).is_err());
        let g = grid();
        assert_eq!(g.spacing(), 1e12);
        assert_eq!(g.frequency(10), 200e12);
        assert_eq!(g.nearest_index(194.4e12), 4);
        assert_eq!(g.nearest_index(1.0), 0);
    }

    #[test]
    fn power_db_examples() {
        let g = FrequencyGrid::new(1.0, 2.0, 3).unwrap();
        let s =
            ComplexSpectrum::new(g, vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.5), Complex64::new(0.0, 0.0)])
                .unwrap();
        let db = power_db(&s);
        assert_relative_eq!(db.values_db[0], 0.0);
        assert_relative_eq!(db.values_db[1], -6.0206, epsilon = 1e-4);
        assert_eq!(db.values_db[2], -200.0);
    }

    #[test]
    fn multiply_examples() {
        let g = grid();
        let a = ComplexSpectrum::from_fn(g, Exec::Serial, |f| Complex64::from_polar(0.5, f * 1e-12));
        let ones = ComplexSpectrum::ones(g);
        assert_eq!(a.multiply(&ones).unwrap(), a);

        let half = ComplexSpectrum::constant(g, Complex64::new(amplitude_from_loss_db(3.0), 0.0));
        let total = power_db(&half.multiply(&half).unwrap());
        for v in total.values_db {
            assert_relative_eq!(v, -6.0, epsilon = 1e-12);
        }

        let other = FrequencyGrid::new(190e12, 200e12, 12).unwrap();
        assert!(matches!(a.multiply(&ComplexSpectrum::ones(other)), Err(Error::Shape(_))));
    }

    #[test]
    fn rejects_bad_values() {
        let g = FrequencyGrid::new(1.0, 2.0, 2).unwrap();
        assert!(ComplexSpectrum::new(g, vec![Complex64::new(1.0, 0.0)]).is_err());
        assert!(ComplexSpectrum::new(g, vec![Complex64::new(f64::NAN, 0.0); 2]).is_err());
    }

    proptest! {
        #[test]
        fn db_round_trip(x in 1e-10f64..=1.0) {
            let back = linear_from_db(db_from_linear(x));
            prop_assert!(((back - x) / x).abs() < 1e-12);
        }

        #[test]
        fn wavelength_round_trip(lambda in 1e-7f64..1e-4) {
            let back = frequency_to_wavelength(wavelength_to_frequency(lambda).unwrap()).unwrap();
            prop_assert!(((back - lambda) / lambda).abs() < 1e-12);
        }

        #[test]
        fn cascade_is_associative_and_commutative(
            seeds in proptest::collection::vec((0.0f64..1.0, -3.2f64..3.2), 33)
        ) {
            let g = FrequencyGrid::new(1e14, 2e14, 11).unwrap();
            let mk = |k: usize| {
                let v = (0..11).map(|i| {
                    let (m, p) = seeds[k * 11 + i];
                    Complex64::from_polar(m, p)
                }).collect();
                ComplexSpectrum::new(g, v).unwrap()
            };
            let (a, b, c) = (mk(0), mk(1), mk(2));
            let left = a.multiply(&b).unwrap().multiply(&c).unwrap();
            let right = a.multiply(&b.multiply(&c).unwrap()).unwrap();
            for (l, r) in left.values().iter().zip(right.values()) {
                prop_assert!((l - r).norm() <= 1e-12);
            }
            prop_assert_eq!(a.multiply(&b).unwrap(), b.multiply(&a).unwrap());
        }
    }
}
