//! Light scattered from the input fibre straight into the output fibre.

use num_complex::Complex64;

use crate::spectral::{linear_from_db, ComplexSpectrum};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrayMode {
    IncoherentPower,
    CoherentAmplitude { phase_rad: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrayPathParams {
    /// Stray power relative to the reference; `-inf` disables the path.
    pub floor_db: f64,
    pub mode: StrayMode,
}

/// Stray floor calibrated so the Bragg stop band reads 65 dB deep.
pub const DEFAULT_STRAY_FLOOR_DB: f64 = -65.0;

impl Default for StrayPathParams {
    fn default() -> Self {
        StrayPathParams { floor_db: DEFAULT_STRAY_FLOOR_DB, mode: StrayMode::IncoherentPower }
    }
}

impl StrayPathParams {
    pub fn disabled() -> Self {
        StrayPathParams { floor_db: f64::NEG_INFINITY, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.floor_db < 0.0) {
            return Err(Error::Domain(format!("stray floor must be below 0 dB, got {}", self.floor_db)));
        }
        Ok(())
    }

    pub fn is_enabled(&self) -> bool {
        self.floor_db > f64::NEG_INFINITY
    }

    /// Combines one main-path sample with the matching reference sample.
    pub fn combine(&self, main: Complex64, reference: Complex64) -> Complex64 {
        if !self.is_enabled() {
            return main;
        }
        let floor = linear_from_db(self.floor_db);
        match self.mode {
            StrayMode::IncoherentPower => {
                let total = main.norm_sqr() + floor * reference.norm_sqr();
                let m = main.norm();
                if m > 0.0 {
                    main * (total.sqrt() / m)
                } else {
                    Complex64::new(total.sqrt(), 0.0)
                }
            }
            StrayMode::CoherentAmplitude { phase_rad } => {
                main + reference * Complex64::from_polar(floor.sqrt(), phase_rad)
            }
        }
    }
}

pub fn apply_stray_path(
    main: &ComplexSpectrum,
    stray: &StrayPathParams,
    input_reference: &ComplexSpectrum,
) -> Result<ComplexSpectrum> {
    stray.validate()?;
    if main.grid() != input_reference.grid() {
        return Err(Error::Shape("stray reference grid differs from main path grid".into()));
    }
    let values = main.values().iter().zip(input_reference.values()).map(|(&m, &r)| stray.combine(m, r)).collect();
    ComplexSpectrum::new(*main.grid(), values)
}
