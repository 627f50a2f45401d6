//! Spontaneous four-wave mixing in the generation ring.
//!
//! The internal pair rate follows `rate_scale · Q³/R² · P_eff²` with a
//! two-photon-absorption roll-off `P_eff = P/(1 + (P/p_sat)^k)^(1/k)`.
//! Order `k = 1` is the plain rational form; the default `k = 2` keeps the
//! law quadratic to within 1% up to `p_sat/10` while still bending over near
//! `p_sat`. Every triplet gets the same internal rate; the spectral envelope
//! seen at a port comes entirely from the path response.

use std::f64::consts::PI;

use indexmap::IndexMap;

use crate::circuit::{Scenario, Stage};
use crate::components::{HeaterState, Ring, RingParams};
use crate::exec::Exec;
use crate::spectral::{photon_energy, wavelength_to_frequency, FrequencyGrid, PowerSpectrumDb, DEFAULT_DB_FLOOR};
use crate::{Error, Result};

/// `rate_scale` giving 5 MHz per triplet at 1 mW in the default 15 µm,
/// Q = 4×10⁴ ring with `p_sat` = 1 mW and order 2 (`P_eff² = 0.5 mW²`).
pub const CALIBRATED_RATE_SCALE: f64 = 5e6 / (6.4e13 / 2.25e-10 * 0.5e-6);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfwmParams {
    /// Pairs/s per W² per (Q³/m²).
    pub rate_scale: f64,
    pub p_sat_w: f64,
    /// Sharpness `k` of the saturation knee.
    pub saturation_order: f64,
    pub n_triplets: usize,
    /// Flat background in the emitted spectrum (laser ASE), W/Hz.
    pub ase_background_w_per_hz: f64,
}

impl Default for SfwmParams {
    fn default() -> Self {
        SfwmParams {
            rate_scale: CALIBRATED_RATE_SCALE,
            p_sat_w: 1e-3,
            saturation_order: 2.0,
            n_triplets: 5,
            ase_background_w_per_hz: 0.0,
        }
    }
}

impl SfwmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_scale > 0.0) || !(self.p_sat_w > 0.0) || !(self.saturation_order > 0.0) {
            return Err(Error::Domain("rate_scale, p_sat and saturation order must be positive".into()));
        }
        if self.n_triplets == 0 {
            return Err(Error::Domain("need at least one triplet".into()));
        }
        if !(self.ase_background_w_per_hz >= 0.0) {
            return Err(Error::Domain("ASE background must be non-negative".into()));
        }
        Ok(())
    }

    /// Pump power after two-photon-absorption saturation.
    pub fn effective_power(&self, p_w: f64) -> f64 {
        let k = self.saturation_order;
        p_w / (1.0 + (p_w / self.p_sat_w).powf(k)).powf(1.0 / k)
    }
}

pub fn q3_over_r2(ring: &RingParams) -> f64 {
    ring.loaded_q.powi(3) / (ring.radius_m * ring.radius_m)
}

/// Pairs per second created inside the ring for each triplet.
pub fn internal_pair_rate(params: &SfwmParams, ring: &RingParams, p_on_chip_w: f64) -> f64 {
    let p = params.effective_power(p_on_chip_w.max(0.0));
    params.rate_scale * q3_over_r2(ring) * p * p
}

/// Pump, signal and idler frequencies of one resonance triplet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceTriplet {
    pub m: u32,
    pub f_pump: f64,
    pub f_signal: f64,
    pub f_idler: f64,
}

impl ResonanceTriplet {
    /// The idler is formed as `2·f_pump − f_signal`. With the signal between
    /// `f_pump` and `2·f_pump` that subtraction is exact in floating point,
    /// so `f_signal + f_idler == 2·f_pump` holds bit for bit.
    pub fn new(f_pump: f64, fsr_hz: f64, m: u32) -> Self {
        let f_signal = f_pump + m as f64 * fsr_hz;
        ResonanceTriplet { m, f_pump, f_signal, f_idler: 2.0 * f_pump - f_signal }
    }

    pub fn mismatch_hz(&self) -> f64 {
        self.f_signal + self.f_idler - 2.0 * self.f_pump
    }
}

/// Triplets m = 1..=n around the pump. The pump must sit within a quarter
/// linewidth of a ring resonance.
pub fn enumerate_triplets(
    ring: &Ring,
    heater: &HeaterState,
    pump_wavelength_m: f64,
    n: usize,
) -> Result<Vec<ResonanceTriplet>> {
    let fp = wavelength_to_frequency(pump_wavelength_m)?;
    let shift = heater.shift_hz();
    let detuning = fp - ring.nearest_resonance_hz(fp, shift);
    if detuning.abs() > 0.25 * ring.fwhm_hz() {
        return Err(Error::Alignment(format!(
            "pump is {:.2} GHz from the nearest ring resonance (linewidth {:.2} GHz); run auto_tune on the \
             generation ring with objective minimize_through first",
            detuning * 1e-9,
            ring.fwhm_hz() * 1e-9
        )));
    }
    Ok((1..=n as u32).map(|m| ResonanceTriplet::new(fp, ring.fsr_hz(), m)).collect())
}

/// Internal generation for one triplet; both lines carry `internal_rate_hz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFlux {
    pub triplet: ResonanceTriplet,
    pub internal_rate_hz: f64,
    /// Lorentzian FWHM of each emitted line.
    pub linewidth_hz: f64,
}

pub fn pair_fluxes(
    params: &SfwmParams,
    ring: &Ring,
    heater: &HeaterState,
    pump_wavelength_m: f64,
    p_on_chip_w: f64,
) -> Result<Vec<PairFlux>> {
    params.validate()?;
    let rate = internal_pair_rate(params, ring.params(), p_on_chip_w);
    Ok(enumerate_triplets(ring, heater, pump_wavelength_m, params.n_triplets)?
        .into_iter()
        .map(|triplet| PairFlux { triplet, internal_rate_hz: rate, linewidth_hz: ring.fwhm_hz() })
        .collect())
}

/// One emission line at a port. Positive `m` is a signal line, negative an
/// idler line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineRate {
    pub m: i32,
    pub frequency_hz: f64,
    pub rate_hz: f64,
    pub linewidth_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortFlux {
    pub lines: Vec<LineRate>,
    pub pump_frequency_hz: f64,
    pub residual_pump_w: f64,
}

impl PortFlux {
    pub fn residual_pump_rate_hz(&self) -> f64 {
        self.residual_pump_w / photon_energy(self.pump_frequency_hz)
    }

    pub fn line(&self, m: i32) -> Option<&LineRate> {
        self.lines.iter().find(|l| l.m == m)
    }

    /// Total power in the first `n` lines on one side (`signal = true` for
    /// m > 0).
    pub fn side_power_w(&self, signal: bool, n: usize) -> f64 {
        self.lines
            .iter()
            .filter(|l| (l.m > 0) == signal && l.m.unsigned_abs() as usize <= n)
            .map(|l| l.rate_hz * photon_energy(l.frequency_hz))
            .sum()
    }
}

/// Splits the path to `port` at the source ring: stages before it and
/// stages after it.
fn split_at_source(scenario: &Scenario, port: &str, source: &str) -> Result<Option<(Vec<Stage>, Vec<Stage>)>> {
    let path = scenario.netlist.path(port)?;
    Ok(path.iter().position(|s| s.component == source).map(|i| (path[..i].to_vec(), path[i + 1..].to_vec())))
}

/// Pair and residual-pump flux at every external port downstream of the
/// generation ring `source`.
pub fn port_fluxes(scenario: &Scenario, source: &str, fluxes: &[PairFlux]) -> Result<IndexMap<String, PortFlux>> {
    let ring = scenario
        .netlist
        .component(source)
        .and_then(|c| c.ring())
        .ok_or_else(|| Error::Config(format!("pair source `{source}` is not a ring in the netlist")))?;
    let escape = ring.escape_efficiency();
    let fp = scenario.pump_hz()?;
    let mut out = IndexMap::new();
    for port in scenario.netlist.output_names() {
        let Some((before, after)) = split_at_source(scenario, &port, source)? else {
            continue;
        };
        let mut lines = Vec::with_capacity(2 * fluxes.len());
        for fx in fluxes {
            let t = fx.triplet;
            for (m, f) in [(t.m as i32, t.f_signal), (-(t.m as i32), t.f_idler)] {
                let gain = escape * scenario.path_transfer(&after, f).norm_sqr();
                lines.push(LineRate {
                    m,
                    frequency_hz: f,
                    rate_hz: fx.internal_rate_hz * gain,
                    linewidth_hz: fx.linewidth_hz,
                });
            }
        }
        lines.sort_by(|a, b| a.frequency_hz.total_cmp(&b.frequency_hz));
        let full = scenario.netlist.path(&port)?;
        let into_chip = scenario.path_transfer(&before, fp).norm_sqr();
        let residual = if into_chip > 0.0 {
            scenario.pump_power_w * scenario.path_transfer_with_stray(&full, fp).norm_sqr() / into_chip
        } else {
            0.0
        };
        out.insert(port, PortFlux { lines, pump_frequency_hz: fp, residual_pump_w: residual });
    }
    Ok(out)
}

/// Circulating pump power relative to the total pair power in all lines.
/// The circulating power is built up from the saturated pump.
pub fn in_ring_pump_to_pair_ratio(params: &SfwmParams, ring: &Ring, fluxes: &[PairFlux], p_on_chip_w: f64) -> f64 {
    let pairs: f64 = fluxes
        .iter()
        .map(|fx| fx.internal_rate_hz * (photon_energy(fx.triplet.f_signal) + photon_energy(fx.triplet.f_idler)))
        .sum();
    ring.buildup() * params.effective_power(p_on_chip_w) / pairs
}

fn lorentzian(f: f64, f0: f64, fwhm: f64) -> f64 {
    let g = 0.5 * fwhm;
    g / (PI * ((f - f0).powi(2) + g * g))
}

/// Power spectral density (W/Hz) at a port: Lorentzian lines whose areas
/// are the line powers, the residual pump with width `pump_linewidth_hz`,
/// and a flat background.
pub fn emitted_psd(
    flux: &PortFlux,
    grid: &FrequencyGrid,
    pump_linewidth_hz: f64,
    background_w_per_hz: f64,
) -> Vec<f64> {
    Exec::default().map_indexed(grid.len(), |i| {
        let f = grid.frequency(i);
        let lines: f64 = flux
            .lines
            .iter()
            .map(|l| l.rate_hz * photon_energy(l.frequency_hz) * lorentzian(f, l.frequency_hz, l.linewidth_hz))
            .sum();
        lines + flux.residual_pump_w * lorentzian(f, flux.pump_frequency_hz, pump_linewidth_hz) + background_w_per_hz
    })
}

/// The same spectrum in dBm per GHz of optical bandwidth.
pub fn emitted_spectrum(
    flux: &PortFlux,
    grid: &FrequencyGrid,
    pump_linewidth_hz: f64,
    background_w_per_hz: f64,
) -> Result<PowerSpectrumDb> {
    let mw_per_ghz: Vec<f64> =
        emitted_psd(flux, grid, pump_linewidth_hz, background_w_per_hz).into_iter().map(|p| p * 1e12).collect();
    PowerSpectrumDb::from_power(*grid, &mw_per_ghz, DEFAULT_DB_FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{chip_preset, PresetKind, GENERATION_HEATER, GENERATION_HEATER_CURRENT_A, PUMP_WAVELENGTH_M};
    use crate::components::{RingKind, StrayPathParams};
    use proptest::prelude::*;

    fn gen_ring() -> (Ring, HeaterState) {
        let s = chip_a();
        let ring = *s.netlist.component("gen_ring").unwrap().ring().unwrap();
        (ring, GENERATION_HEATER.state(GENERATION_HEATER_CURRENT_A))
    }

    fn chip_a() -> Scenario {
        let grid = FrequencyGrid::from_wavelengths(1490e-9, 1560e-9, 2001).unwrap();
        let mut s = Scenario::new(chip_preset(PresetKind::ChipA), PUMP_WAVELENGTH_M, 1e-3, grid);
        s.set_heater_current("gen_ring", GENERATION_HEATER_CURRENT_A).unwrap();
        s
    }

    #[test]
    fn calibration_anchor() {
        let (ring, _) = gen_ring();
        let p = SfwmParams::default();
        assert_eq!(internal_pair_rate(&p, ring.params(), 0.0), 0.0);
        let r = internal_pair_rate(&p, ring.params(), 1e-3);
        assert!((r / 5e6 - 1.0).abs() < 1e-12);
        assert!(r / internal_pair_rate(&p, ring.params(), 0.5e-3) < 4.0);
    }

    #[test]
    fn rational_form_is_order_one() {
        let p = SfwmParams { saturation_order: 1.0, ..Default::default() };
        assert!((p.effective_power(1e-3) - 0.5e-3).abs() < 1e-18);
        assert!((p.effective_power(3e-3) - 0.75e-3).abs() < 1e-18);
    }

    #[test]
    fn knee_bends_near_saturation() {
        let (ring, _) = gen_ring();
        let p = SfwmParams::default();
        let slope =
            (internal_pair_rate(&p, ring.params(), 1e-3) / internal_pair_rate(&p, ring.params(), 0.5e-3)).log2();
        assert!(slope < 1.9, "{slope}");
    }

    #[test]
    fn small_signal_slope_is_two() {
        let (ring, _) = gen_ring();
        let p = SfwmParams::default();
        let (lo, hi) = (1e-5, 1e-4);
        let slope = (internal_pair_rate(&p, ring.params(), hi) / internal_pair_rate(&p, ring.params(), lo)).ln()
            / (hi / lo).ln();
        assert!((slope - 2.0).abs() < 0.01, "{slope}");
    }

    #[test]
    fn q_and_radius_scaling() {
        let (ring, _) = gen_ring();
        let p = SfwmParams::default();
        let base = internal_pair_rate(&p, ring.params(), 1e-3);
        let mut q2 = *ring.params();
        q2.loaded_q *= 2.0;
        assert_eq!(internal_pair_rate(&p, &q2, 1e-3) / base, 8.0);
        let mut r2 = *ring.params();
        r2.radius_m *= 2.0;
        assert_eq!(base / internal_pair_rate(&p, &r2, 1e-3), 4.0);
    }

    #[test]
    fn triplets_conserve_energy_and_sit_one_fsr_apart() {
        let (ring, heater) = gen_ring();
        let t = enumerate_triplets(&ring, &heater, PUMP_WAVELENGTH_M, 5).unwrap();
        assert_eq!(t.len(), 5);
        for x in &t {
            assert_eq!(x.mismatch_hz(), 0.0);
        }
        let ls = crate::spectral::frequency_to_wavelength(t[0].f_signal).unwrap();
        assert!((ls - 1518.8e-9).abs() < 0.3e-9, "{ls}");
    }

    #[test]
    fn misaligned_pump_is_rejected() {
        let (ring, heater) = gen_ring();
        let e = enumerate_triplets(&ring, &HeaterState { current_a: 0.0, ..heater }, PUMP_WAVELENGTH_M, 5);
        match e {
            Err(Error::Alignment(msg)) => assert!(msg.contains("auto_tune")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lossless_path_passes_internal_rate() {
        use crate::circuit::{Endpoint, Netlist, PortRef};
        use crate::components::{ComponentModel, OutPort};
        let mut params = RingParams::generation_ring(wavelength_to_frequency(PUMP_WAVELENGTH_M).unwrap());
        params.coupling = crate::components::CouplingRegime::OverCoupled;
        params.lossless = true;
        let ring = Ring::new(params, RingKind::AllPass).unwrap();
        let mut n = Netlist::new();
        n.add_component("ring", ComponentModel::AllPassRing { ring, heater: GENERATION_HEATER }).unwrap();
        n.connect(Endpoint::Input, "ring").unwrap();
        n.expose("out", Endpoint::Port(PortRef::new("ring", OutPort::Out))).unwrap();
        let grid = FrequencyGrid::from_wavelengths(1500e-9, 1550e-9, 11).unwrap();
        let mut s = Scenario::new(n, PUMP_WAVELENGTH_M, 1e-3, grid);
        s.stray = StrayPathParams::disabled();
        let fx = pair_fluxes(&SfwmParams::default(), &ring, &HeaterState::off(), PUMP_WAVELENGTH_M, 1e-3).unwrap();
        let out = port_fluxes(&s, "ring", &fx).unwrap();
        for l in &out["out"].lines {
            assert!((l.rate_hz / fx[0].internal_rate_hz - 1.0).abs() < 1e-12);
        }
        assert!((out["out"].residual_pump_w - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn in_ring_ratio_is_in_expected_decade() {
        let (ring, heater) = gen_ring();
        let fx = pair_fluxes(&SfwmParams::default(), &ring, &heater, PUMP_WAVELENGTH_M, 1e-3).unwrap();
        let r = in_ring_pump_to_pair_ratio(&SfwmParams::default(), &ring, &fx, 1e-3);
        assert!((1e9..=1e10).contains(&r), "{r:e}");
    }

    #[test]
    fn line_integrates_to_its_power() {
        let (ring, heater) = gen_ring();
        let fx = pair_fluxes(&SfwmParams::default(), &ring, &heater, PUMP_WAVELENGTH_M, 1e-3).unwrap();
        let line =
            LineRate { m: 1, frequency_hz: fx[0].triplet.f_signal, rate_hz: 1e6, linewidth_hz: fx[0].linewidth_hz };
        let flux = PortFlux { lines: vec![line], pump_frequency_hz: fx[0].triplet.f_pump, residual_pump_w: 0.0 };
        let grid = FrequencyGrid::centered(line.frequency_hz, 400.0 * line.linewidth_hz, 400_001).unwrap();
        let psd = emitted_psd(&flux, &grid, 1e6, 0.0);
        let h = grid.spacing();
        let area: f64 = psd.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
        let expected = 1e6 * photon_energy(line.frequency_hz);
        assert!((area / expected - 1.0).abs() < 0.01, "{}", area / expected);
        assert_eq!(fx[0].linewidth_hz, ring.fwhm_hz());
        assert!((ring.params().anchor_hz / fx[0].linewidth_hz / 4e4 - 1.0).abs() < 0.005);
    }

    #[test]
    fn envelope_falls_away_from_pump() {
        let mut s = chip_a();
        s.stray = StrayPathParams::disabled();
        let (ring, heater) = gen_ring();
        let fx = pair_fluxes(&SfwmParams::default(), &ring, &heater, PUMP_WAVELENGTH_M, 1e-3).unwrap();
        let out = port_fluxes(&s, "gen_ring", &fx).unwrap();
        let lines = &out["common_through"];
        for side in [1, -1] {
            let rates: Vec<f64> = (1..=4).map(|m| lines.line(side * m).unwrap().rate_hz).collect();
            assert!(rates.windows(2).all(|w| w[1] < w[0]), "{rates:?}");
        }
        for l in &lines.lines {
            assert!(l.rate_hz <= fx[0].internal_rate_hz);
        }
    }

    proptest! {
        #[test]
        fn triplet_energy_exact(fp in 150e12f64..250e12, fsr in 1e9f64..2e12, m in 1u32..40) {
            let t = ResonanceTriplet::new(fp, fsr, m);
            prop_assert_eq!(t.f_signal + t.f_idler - 2.0 * t.f_pump, 0.0);
        }

        #[test]
        fn rate_is_monotone(p1 in 0.0f64..5e-3, dp in 0.0f64..5e-3) {
            let (ring, _) = gen_ring();
            let s = SfwmParams::default();
            prop_assert!(internal_pair_rate(&s, ring.params(), p1 + dp) >= internal_pair_rate(&s, ring.params(), p1));
        }

        #[test]
        fn q_cube_over_radius_squared(q in 1e3f64..1e6, r_um in 2.0f64..100.0, p in 1e-6f64..5e-3) {
            let s = SfwmParams::default();
            let mut a = *gen_ring().0.params();
            a.loaded_q = q;
            a.radius_m = r_um * 1e-6;
            let base = internal_pair_rate(&s, &a, p);
            let doubled_q = RingParams { loaded_q: 2.0 * q, ..a };
            let doubled_r = RingParams { radius_m: 2.0 * a.radius_m, ..a };
            prop_assert!((internal_pair_rate(&s, &doubled_q, p) / base - 8.0).abs() <= 8.0 * 4.0 * f64::EPSILON);
            prop_assert!((base / internal_pair_rate(&s, &doubled_r, p) - 4.0).abs() <= 4.0 * 4.0 * f64::EPSILON);
        }

        #[test]
        fn port_rates_stay_below_internal(p in 1e-5f64..3e-3) {
            let s = chip_a();
            let (ring, heater) = gen_ring();
            let fx = pair_fluxes(&SfwmParams::default(), &ring, &heater, PUMP_WAVELENGTH_M, p).unwrap();
            let out = port_fluxes(&s, "gen_ring", &fx).unwrap();
            for pf in out.values() {
                for l in &pf.lines {
                    prop_assert!(l.rate_hz >= 0.0 && l.rate_hz <= fx[0].internal_rate_hz);
                }
            }
        }
    }
}
