//! Phase mismatch and conversion efficiency of the four-wave-mixing process
//! versus pressure, for focused-Gaussian and plane-wave geometries.
//!
//! The absolute efficiency scale is handled by one calibration constant per
//! channel, anchored to a reference efficiency measurement; everything else
//! is a relative-shape prediction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::constants::{vacuum_frequency_thz, vacuum_wavelength_nm};
use crate::error::{Error, Result};
use crate::gas::{wavevector, DispersionModel, GasState, WAVELENGTH_RANGE_NM};
use crate::lineshape::{linewidth, raman_response, ProcessKind, RamanLine};
use crate::quad::integrate_complex;

/// Relative tolerance of the overlap quadrature.
pub const OVERLAP_QUAD_REL_TOL: f64 = 1e-6;

/// Beam, power, and cell geometry of one conversion channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessConfig {
    pub kind: ProcessKind,
    pub signal_wavelength_nm: f64,
    pub pump_hi_wavelength_nm: f64,
    pub pump_lo_wavelength_nm: f64,
    pub pump_hi_power_w: f64,
    pub pump_lo_power_w: f64,
    pub signal_power_w: f64,
    /// Shared beam waist radius at the focus, um.
    pub waist_um: f64,
    pub cell_length_mm: f64,
    /// Global calibration constant; see [`calibrate_scale`].
    pub scale_k: f64,
}

impl ProcessConfig {
    pub fn defaults(kind: ProcessKind) -> Self {
        ProcessConfig {
            kind,
            signal_wavelength_nm: 863.0,
            pump_hi_wavelength_nm: 938.0,
            pump_lo_wavelength_nm: 1538.0,
            pump_hi_power_w: 0.65,
            pump_lo_power_w: 15.0,
            signal_power_w: 1e-6,
            waist_um: 80.0,
            cell_length_mm: 140.0,
            scale_k: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pump_hi_power_w", self.pump_hi_power_w),
            ("pump_lo_power_w", self.pump_lo_power_w),
            ("signal_power_w", self.signal_power_w),
        ] {
            if v < 0.0 {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.waist_um > 0.0) {
            return Err(Error::Config("waist must be positive".into()));
        }
        if !(self.cell_length_mm > 0.0) {
            return Err(Error::Config("cell length must be positive".into()));
        }
        let lam_c = converted_wavelength_nm(self)?;
        let (lo, hi) = WAVELENGTH_RANGE_NM;
        if !(lo..=hi).contains(&lam_c) {
            return Err(Error::Config(format!(
                "converted wavelength {lam_c:.1} nm outside validated range [{lo}, {hi}] nm"
            )));
        }
        Ok(())
    }

    pub fn cell_length_m(&self) -> f64 {
        self.cell_length_mm * 1e-3
    }
}

/// One point of a pressure scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPoint {
    pub pressure_bar: f64,
    pub eta_internal: f64,
    pub eta_external: f64,
    pub delta_k_rad_per_m: f64,
    /// Internal efficiency divided by the scan maximum.
    pub normalized: f64,
}

/// One multiplicative factor of the detection chain (transmission or quantum
/// efficiency), each in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainFactor {
    pub name: String,
    pub value: f64,
}

/// Converted frequency from energy conservation, THz.
pub fn converted_frequency_thz(config: &ProcessConfig) -> Result<f64> {
    let nu_s = vacuum_frequency_thz(config.signal_wavelength_nm);
    let nu_hi = vacuum_frequency_thz(config.pump_hi_wavelength_nm);
    let nu_lo = vacuum_frequency_thz(config.pump_lo_wavelength_nm);
    let nu_c = match config.kind {
        ProcessKind::Cars => nu_s + nu_hi - nu_lo,
        ProcessKind::Csrs => nu_s - nu_hi + nu_lo,
    };
    if !(nu_c > 0.0) {
        return Err(Error::domain(format!(
            "converted frequency {nu_c} THz is not positive"
        )));
    }
    let lam_c = vacuum_wavelength_nm(nu_c);
    let (lo, hi) = WAVELENGTH_RANGE_NM;
    if !(lo..=hi).contains(&lam_c) {
        return Err(Error::domain(format!(
            "converted wavelength {lam_c:.1} nm outside dispersion validity [{lo}, {hi}] nm"
        )));
    }
    Ok(nu_c)
}

/// Converted vacuum wavelength, nm.
pub fn converted_wavelength_nm(config: &ProcessConfig) -> Result<f64> {
    Ok(vacuum_wavelength_nm(converted_frequency_thz(config)?))
}

/// Collinear phase mismatch in rad/m, evaluated with pressure-dependent
/// refractive indices. Signs: anti-Stokes channel k_s + k_hi - k_lo - k_c,
/// Stokes channel k_s + k_lo - k_hi - k_c.
pub fn phase_mismatch(
    config: &ProcessConfig,
    state: &GasState,
    model: &DispersionModel,
) -> Result<f64> {
    let lam_c = converted_wavelength_nm(config)?;
    let k_s = wavevector(config.signal_wavelength_nm, state, model)?;
    let k_hi = wavevector(config.pump_hi_wavelength_nm, state, model)?;
    let k_lo = wavevector(config.pump_lo_wavelength_nm, state, model)?;
    let k_c = wavevector(lam_c, state, model)?;
    Ok(match config.kind {
        ProcessKind::Cars => k_s + k_hi - k_lo - k_c,
        ProcessKind::Csrs => k_s + k_lo - k_hi - k_c,
    })
}

/// Shared confocal parameter b = 2*pi*w0^2/lambda_mean (twice the Rayleigh
/// range at the mean of the four wavelengths), in m.
pub fn confocal_parameter_m(config: &ProcessConfig) -> Result<f64> {
    let lam_c = converted_wavelength_nm(config)?;
    let mean_nm = (config.signal_wavelength_nm
        + config.pump_hi_wavelength_nm
        + config.pump_lo_wavelength_nm
        + lam_c)
        / 4.0;
    let w0_m = config.waist_um * 1e-6;
    Ok(2.0 * PI * w0_m * w0_m / (mean_nm * 1e-9))
}

/// Focused-beam overlap integral
///
/// J(dk, b, L) = Integral_{-L/2}^{+L/2} exp(i dk z) / (1 + (2z/b)^2) dz
///
/// The even Lorentzian weight is the on-axis mode-overlap window of four
/// co-focused TEM00 beams sharing one confocal parameter (their Gouy phases
/// cancel for a sum/difference process, leaving no odd phase term). For
/// b >> L the weight is flat and J reduces to the plane-wave L*sinc(dk*L/2).
pub fn gaussian_overlap(delta_k_rad_per_m: f64, b_m: f64, length_m: f64) -> Result<Complex64> {
    if !(b_m > 0.0) {
        return Err(Error::domain("confocal parameter must be positive"));
    }
    if !(length_m > 0.0) {
        return Err(Error::domain("interaction length must be positive"));
    }
    let half = 0.5 * length_m;
    integrate_complex(
        |z| {
            let u = 2.0 * z / b_m;
            Complex64::new(0.0, delta_k_rad_per_m * z).exp() / (1.0 + u * u)
        },
        -half,
        half,
        OVERLAP_QUAD_REL_TOL,
    )
}

/// Plane-wave limit of the overlap, L*sinc(dk*L/2).
pub fn plane_wave_overlap(delta_k_rad_per_m: f64, length_m: f64) -> f64 {
    let x = 0.5 * delta_k_rad_per_m * length_m;
    if x.abs() < 1e-8 {
        length_m * (1.0 - x * x / 6.0)
    } else {
        length_m * x.sin() / x
    }
}

/// Internal conversion efficiency at detuning `delta_mhz` from resonance:
///
/// eta = K * P_hi * P_lo * |chi(delta, p)|^2 * |J(dk(p), b, L)|^2
///
/// clamped to [0, 1]. `K` is the channel's calibration constant.
pub fn internal_efficiency(
    config: &ProcessConfig,
    state: &GasState,
    line: &RamanLine,
    model: &DispersionModel,
    delta_mhz: f64,
) -> Result<f64> {
    let chi = raman_response(line, state, delta_mhz)?;
    let dk = phase_mismatch(config, state, model)?;
    let b = confocal_parameter_m(config)?;
    let j = gaussian_overlap(dk, b, config.cell_length_m())?;
    let eta = config.scale_k
        * config.pump_hi_power_w
        * config.pump_lo_power_w
        * chi.norm_sqr()
        * j.norm_sqr();
    Ok(eta.clamp(0.0, 1.0))
}

/// External efficiency: internal efficiency times the product of the chain
/// factors (optics transmissions and detector quantum efficiency).
pub fn external_efficiency(eta_internal: f64, chain: &[ChainFactor]) -> Result<f64> {
    let mut eta = eta_internal;
    for factor in chain {
        if !(0.0..=1.0).contains(&factor.value) {
            return Err(Error::domain(format!(
                "chain factor '{}' = {} outside [0, 1]",
                factor.name, factor.value
            )));
        }
        eta *= factor.value;
    }
    Ok(eta)
}

/// Calibration anchor: the channel's internal efficiency at one pressure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub pressure_bar: f64,
    pub internal_efficiency: f64,
}

/// Solve for the scale constant K that makes the on-resonance internal
/// efficiency at the target pressure equal the target value exactly.
pub fn calibrate_scale(
    config: &ProcessConfig,
    line: &RamanLine,
    model: &DispersionModel,
    temperature_k: f64,
    target: &CalibrationTarget,
) -> Result<f64> {
    if !(target.internal_efficiency > 0.0) {
        return Err(Error::Calibration(
            "target efficiency must be positive".into(),
        ));
    }
    let mut unit = *config;
    unit.scale_k = 1.0;
    let state = GasState::new(target.pressure_bar, temperature_k)?;
    let response = internal_efficiency(&unit, &state, line, model, 0.0)?;
    if !(response > 0.0) {
        return Err(Error::Calibration(format!(
            "model response vanishes at the {} bar anchor",
            target.pressure_bar
        )));
    }
    Ok(target.internal_efficiency / response)
}

/// Locate the on-resonance efficiency maximum on (0, max_pressure] with a
/// dense-grid search (the shape is smooth at the plotted resolution).
pub fn find_peak_pressure(
    config: &ProcessConfig,
    line: &RamanLine,
    model: &DispersionModel,
    temperature_k: f64,
    max_pressure_bar: f64,
) -> Result<f64> {
    let mut unit = *config;
    unit.scale_k = 1.0;
    let n = 1200;
    let mut best = (0.0f64, f64::MIN);
    for i in 1..=n {
        let p = max_pressure_bar * i as f64 / n as f64;
        let state = GasState::new(p, temperature_k)?;
        let eta = internal_efficiency(&unit, &state, line, model, 0.0)?;
        if eta > best.1 {
            best = (p, eta);
        }
    }
    Ok(best.0)
}

/// On-resonance pressure scan. Each point carries the internal and external
/// efficiency, the phase mismatch, and the curve normalized to its maximum.
pub fn efficiency_scan(
    config: &ProcessConfig,
    line: &RamanLine,
    model: &DispersionModel,
    chain: &[ChainFactor],
    temperature_k: f64,
    pressures_bar: &[f64],
) -> Result<Vec<EfficiencyPoint>> {
    if pressures_bar.is_empty() {
        return Err(Error::domain("pressure grid is empty"));
    }
    let mut points = Vec::with_capacity(pressures_bar.len());
    for &p in pressures_bar {
        if !(p > 0.0) {
            return Err(Error::domain(format!(
                "scan pressure {p} bar must be positive"
            )));
        }
        let state = GasState::new(p, temperature_k)?;
        let eta_int = internal_efficiency(config, &state, line, model, 0.0)?;
        let eta_ext = external_efficiency(eta_int, chain)?;
        let dk = phase_mismatch(config, &state, model)?;
        points.push(EfficiencyPoint {
            pressure_bar: p,
            eta_internal: eta_int,
            eta_external: eta_ext,
            delta_k_rad_per_m: dk,
            normalized: 0.0,
        });
    }
    let max = points
        .iter()
        .map(|pt| pt.eta_internal)
        .fold(f64::MIN, f64::max);
    if max > 0.0 {
        for pt in &mut points {
            pt.normalized = pt.eta_internal / max;
        }
    }
    Ok(points)
}

/// Mean linewidth helper used when sizing detuning grids.
pub fn linewidth_mhz(line: &RamanLine, pressure_bar: f64) -> Result<f64> {
    linewidth(line, pressure_bar)
}
