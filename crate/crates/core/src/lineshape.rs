//! Pressure-dependent Q1(1) resonance of molecular hydrogen: collisionally
//! shifted center, motional-narrowing linewidth, and the relative complex
//! Raman response versus two-photon detuning.
//!
//! The line profile is Lorentzian at every pressure; motional narrowing only
//! enters through the width law Gamma(p) = A/p + B*p (soft-collision form).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gas::{GasState, MAX_PRESSURE_BAR};

/// Density used to express the Raman response in relative units.
pub const RESPONSE_DENSITY_UNIT_M3: f64 = 1e25;

/// Which four-wave-mixing channel is being driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessKind {
    Cars,
    Csrs,
}

impl ProcessKind {
    pub fn label(self) -> &'static str {
        match self {
            ProcessKind::Cars => "cars",
            ProcessKind::Csrs => "csrs",
        }
    }
}

impl std::fmt::Display for ProcessKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for ProcessKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cars" => Ok(ProcessKind::Cars),
            "csrs" => Ok(ProcessKind::Csrs),
            other => Err(Error::Config(format!("unknown process kind '{other}'"))),
        }
    }
}

/// Line parameters for one conversion channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamanLine {
    /// Zero-pressure resonance frequency in THz.
    #[serde(rename = "nu0_THz")]
    pub nu0_thz: f64,
    /// Collisional shift d(nu)/dP in MHz/bar (negative).
    #[serde(rename = "shift_MHz_per_bar")]
    pub shift_mhz_per_bar: f64,
    /// Motional-narrowing (diffusion) coefficient A in MHz*bar.
    #[serde(rename = "A_MHz_bar")]
    pub diffusion_a_mhz_bar: f64,
    /// Density-broadening slope B in MHz/bar.
    #[serde(rename = "B_MHz_per_bar")]
    pub broadening_b_mhz_per_bar: f64,
}

impl RamanLine {
    /// Default line for the anti-Stokes channel.
    pub fn cars_default() -> Self {
        RamanLine {
            nu0_thz: 124.571257,
            shift_mhz_per_bar: -94.0,
            diffusion_a_mhz_bar: 339.0,
            broadening_b_mhz_per_bar: 42.7,
        }
    }

    /// Default line for the Stokes channel.
    pub fn csrs_default() -> Self {
        RamanLine {
            nu0_thz: 124.571304,
            shift_mhz_per_bar: -93.0,
            diffusion_a_mhz_bar: 339.0,
            broadening_b_mhz_per_bar: 46.9,
        }
    }

    pub fn for_kind(kind: ProcessKind) -> Self {
        match kind {
            ProcessKind::Cars => Self::cars_default(),
            ProcessKind::Csrs => Self::csrs_default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu0_thz > 0.0) {
            return Err(Error::Config("nu0 must be positive".into()));
        }
        if !(self.broadening_b_mhz_per_bar > 0.0) {
            return Err(Error::Config("broadening slope B must be positive".into()));
        }
        if self.diffusion_a_mhz_bar < 0.0 {
            return Err(Error::Config("diffusion coefficient A must be >= 0".into()));
        }
        Ok(())
    }
}

fn check_pressure(p: f64) -> Result<()> {
    if !(0.0..=MAX_PRESSURE_BAR).contains(&p) {
        return Err(Error::domain(format!(
            "pressure {p} bar outside [0, {MAX_PRESSURE_BAR}] bar"
        )));
    }
    Ok(())
}

/// Pressure-shifted center frequency nu(p) = nu0 + (dnu/dP) * p, in THz.
pub fn resonance_center(line: &RamanLine, pressure_bar: f64) -> Result<f64> {
    check_pressure(pressure_bar)?;
    Ok(line.nu0_thz + line.shift_mhz_per_bar * pressure_bar * 1e-6)
}

/// FWHM in MHz: Gamma(p) = A/p + B*p. Diverges at p = 0 (Doppler regime is
/// outside this model), so zero pressure is rejected.
pub fn linewidth(line: &RamanLine, pressure_bar: f64) -> Result<f64> {
    check_pressure(pressure_bar)?;
    if pressure_bar == 0.0 {
        return Err(Error::domain(
            "linewidth model diverges at zero pressure".into(),
        ));
    }
    Ok(line.diffusion_a_mhz_bar / pressure_bar + line.broadening_b_mhz_per_bar * pressure_bar)
}

/// Relative complex Raman response at detuning `delta_mhz` from the
/// pressure-shifted center (positive = pump difference above resonance).
///
/// chi(delta) = rho_rel / (delta + i*Gamma/2) with rho_rel the density in
/// units of [`RESPONSE_DENSITY_UNIT_M3`]; the absolute scale is a caller
/// concern (one global calibration constant per channel).
pub fn raman_response(line: &RamanLine, state: &GasState, delta_mhz: f64) -> Result<Complex64> {
    let gamma = linewidth(line, state.pressure_bar)?;
    let rho_rel = state.density_m3 / RESPONSE_DENSITY_UNIT_M3;
    Ok(rho_rel / Complex64::new(delta_mhz, 0.5 * gamma))
}
