//! Frequency-domain and photon-counting simulation of an integrated
//! silicon photon-pair source: ring resonators, Bragg reflectors, grating
//! couplers, spontaneous four-wave mixing and coincidence statistics.
//!
//! Every optical element maps a [`FrequencyGrid`](spectral::FrequencyGrid) to a
//! [`ComplexSpectrum`](spectral::ComplexSpectrum) of field transmission. The
//! [`circuit`] module multiplies those responses along netlist paths, the
//! [`pairsource`] module turns a pumped ring into per-line photon fluxes, and
//! [`counting`] converts fluxes into singles, coincidences and CAR.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod circuit;
pub mod components;
pub mod counting;
mod error;
pub mod exec;
pub mod optimize;
pub mod pairsource;
pub mod scenario;
pub mod spectral;

pub use error::{Error, Result};
