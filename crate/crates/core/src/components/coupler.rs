//! Grating couplers and spectrally flat elements (taps, attenuators).

use num_complex::Complex64;

use crate::exec::Exec;
use crate::spectral::{amplitude_from_loss_db, ComplexSpectrum, FrequencyGrid, SPEED_OF_LIGHT};
use crate::{Error, Result};

/// Fibre-to-chip grating coupler with a Gaussian-in-dB passband.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GratingCouplerParams {
    pub center_wavelength_m: f64,
    pub peak_insertion_loss_db: f64,
    /// Full width over which the loss stays within 1 dB of the peak.
    pub bandwidth_1db_m: f64,
}

impl Default for GratingCouplerParams {
    fn default() -> Self {
        GratingCouplerParams { center_wavelength_m: 1525e-9, peak_insertion_loss_db: 5.0, bandwidth_1db_m: 30e-9 }
    }
}

impl GratingCouplerParams {
    pub fn validate(&self) -> Result<()> {
        if self.peak_insertion_loss_db < 0.0 {
            return Err(Error::Domain("grating coupler loss must be non-negative".into()));
        }
        if !(self.bandwidth_1db_m > 0.0) || !(self.center_wavelength_m > 0.0) {
            return Err(Error::Domain("grating coupler bandwidth and centre must be positive".into()));
        }
        Ok(())
    }

    /// Power loss in dB at `freq_hz`: a parabola in wavelength.
    pub fn loss_db(&self, freq_hz: f64) -> f64 {
        let lambda = SPEED_OF_LIGHT / freq_hz;
        let u = (lambda - self.center_wavelength_m) / (0.5 * self.bandwidth_1db_m);
        self.peak_insertion_loss_db + u * u
    }

    pub fn amplitude(&self, freq_hz: f64) -> f64 {
        amplitude_from_loss_db(self.loss_db(freq_hz))
    }
}

pub fn grating_coupler(params: &GratingCouplerParams, grid: &FrequencyGrid) -> Result<ComplexSpectrum> {
    params.validate()?;
    Ok(ComplexSpectrum::from_fn(*grid, Exec::default(), |f| Complex64::new(params.amplitude(f), 0.0)))
}

/// Spectrally flat two-port elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixedElement {
    /// Directional-coupler tap removing `fraction` of the power.
    Tap { fraction: f64 },
    /// Flat attenuation in dB.
    Loss { loss_db: f64 },
}

impl FixedElement {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FixedElement::Tap { fraction } if !(0.0..1.0).contains(&fraction) => {
                Err(Error::Domain(format!("tap fraction {fraction} outside [0, 1)")))
            }
            FixedElement::Loss { loss_db } if !(loss_db >= 0.0) => {
                Err(Error::Domain(format!("loss {loss_db} dB must be non-negative")))
            }
            _ => Ok(()),
        }
    }

    /// Amplitude on the main (through) path.
    pub fn amplitude(&self) -> f64 {
        match *self {
            FixedElement::Tap { fraction } => (1.0 - fraction).sqrt(),
            FixedElement::Loss { loss_db } => amplitude_from_loss_db(loss_db),
        }
    }

    /// Amplitude on the tapped (monitor) port; zero for attenuators.
    pub fn tap_amplitude(&self) -> f64 {
        match *self {
            FixedElement::Tap { fraction } => fraction.sqrt(),
            FixedElement::Loss { .. } => 0.0,
        }
    }
}

pub fn fixed_elements(element: FixedElement, grid: &FrequencyGrid) -> Result<ComplexSpectrum> {
    element.validate()?;
    Ok(ComplexSpectrum::constant(*grid, Complex64::new(element.amplitude(), 0.0)))
}
