//! Hydrogen number density and refractive index as functions of wavelength,
//! pressure, and temperature.
//!
//! The equation of state is ideal-gas: at cell pressures (<= 60 bar) and room
//! temperature the density error is at the percent level, far below the
//! uncertainty of the overall conversion-efficiency scale. Refractivity uses
//! a two-term Sellmeier-type fit evaluated at a reference density and scaled
//! linearly with density.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use crate::constants::BOLTZMANN_J_PER_K;
use crate::error::{Error, Result};

/// Maximum cell pressure in bar.
pub const MAX_PRESSURE_BAR: f64 = 60.0;

/// Wavelength range over which the shipped dispersion data is validated, nm.
pub const WAVELENGTH_RANGE_NM: (f64, f64) = (500.0, 1700.0);

/// Gas state with the derived number density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasState {
    pub pressure_bar: f64,
    pub temperature_k: f64,
    /// Ideal-gas number density in 1/m^3, derived on construction.
    pub density_m3: f64,
}

impl GasState {
    pub fn new(pressure_bar: f64, temperature_k: f64) -> Result<Self> {
        Ok(GasState {
            pressure_bar,
            temperature_k,
            density_m3: number_density(pressure_bar, temperature_k)?,
        })
    }
}

/// Ideal-gas number density in 1/m^3 for pressure in bar and temperature in K.
pub fn number_density(pressure_bar: f64, temperature_k: f64) -> Result<f64> {
    if !(0.0..=MAX_PRESSURE_BAR).contains(&pressure_bar) {
        return Err(Error::domain(format!(
            "pressure {pressure_bar} bar outside [0, {MAX_PRESSURE_BAR}] bar cell limit"
        )));
    }
    if !(temperature_k > 0.0) {
        return Err(Error::domain(format!(
            "temperature {temperature_k} K must be positive"
        )));
    }
    Ok(pressure_bar * 1e5 / (BOLTZMANN_J_PER_K * temperature_k))
}

/// One term of the refractivity fit: B * lam^2 / (lam^2 - C), lam in um.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SellmeierTerm {
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C_um2")]
    pub c_um2: f64,
}

/// Refractivity model: (n - 1) at a reference density, scaled linearly in
/// density. Coefficients live in a JSON data file so alternative literature
/// values can be swapped without code changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionModel {
    pub reference_density_m3: f64,
    #[serde(default)]
    pub notes: String,
    pub terms: Vec<SellmeierTerm>,
}

/// Shipped coefficients: Peck & Hudson (1968) H2 fit recast as
/// (n-1) = sum_i B_i lam^2/(lam^2 - C_i) at 273.15 K, 101.325 kPa.
pub const H2_DISPERSION_JSON: &str = include_str!("../data/h2_dispersion.json");

impl Default for DispersionModel {
    fn default() -> Self {
        serde_json::from_str(H2_DISPERSION_JSON).expect("embedded dispersion data parses")
    }
}

impl DispersionModel {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let model: DispersionModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reference_density_m3 > 0.0) {
            return Err(Error::Config(
                "dispersion reference density must be positive".into(),
            ));
        }
        if self.terms.is_empty() {
            return Err(Error::Config("dispersion model has no terms".into()));
        }
        for probe in [500.0, 800.0, 1100.0, 1400.0, 1700.0] {
            if self.refractivity_at_reference(probe)? <= 0.0 {
                return Err(Error::Config(format!(
                    "dispersion model gives non-positive refractivity at {probe} nm"
                )));
            }
        }
        Ok(())
    }

    /// (n - 1) at the reference density for a vacuum wavelength in nm.
    pub fn refractivity_at_reference(&self, wavelength_nm: f64) -> Result<f64> {
        let (lo, hi) = WAVELENGTH_RANGE_NM;
        if !(lo..=hi).contains(&wavelength_nm) {
            return Err(Error::domain(format!(
                "wavelength {wavelength_nm} nm outside validated range [{lo}, {hi}] nm"
            )));
        }
        let lam2 = (wavelength_nm * 1e-3).powi(2);
        Ok(self
            .terms
            .iter()
            .map(|t| t.b * lam2 / (lam2 - t.c_um2))
            .sum())
    }
}

/// Refractive index at the given wavelength and gas state.
pub fn refractive_index(
    wavelength_nm: f64,
    state: &GasState,
    model: &DispersionModel,
) -> Result<f64> {
    let base = model.refractivity_at_reference(wavelength_nm)?;
    Ok(1.0 + base * state.density_m3 / model.reference_density_m3)
}

/// Wavevector magnitude 2*pi*n/lambda in rad/m.
pub fn wavevector(wavelength_nm: f64, state: &GasState, model: &DispersionModel) -> Result<f64> {
    let n = refractive_index(wavelength_nm, state, model)?;
    Ok(2.0 * PI * n / (wavelength_nm * 1e-9))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn vacuum() -> GasState {
        GasState::new(0.0, 296.0).unwrap()
    }

    #[test]
    fn zero_pressure_gives_zero_density() {
        assert_eq!(number_density(0.0, 296.0).unwrap(), 0.0);
    }

    #[test]
    fn density_at_one_bar() {
        // hand evaluation of P/(kB T) with P = 1.0e5 Pa
        assert_relative_eq!(
            number_density(1.0, 296.0).unwrap(),
            2.4469494986621355e25,
            max_relative = 1e-12
        );
    }

    #[test]
    fn density_at_eight_bar_is_eight_times_one_bar() {
        assert_relative_eq!(
            number_density(8.0, 296.0).unwrap(),
            1.9575595989297084e26,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            number_density(8.0, 296.0).unwrap(),
            8.0 * number_density(1.0, 296.0).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn out_of_range_inputs_rejected() {
        assert!(number_density(-0.1, 296.0).is_err());
        assert!(number_density(60.5, 296.0).is_err());
        assert!(number_density(1.0, 0.0).is_err());
        assert!(number_density(1.0, -10.0).is_err());
        assert!(GasState::new(61.0, 296.0).is_err());
    }

    #[test]
    fn vacuum_index_is_exactly_one() {
        let model = DispersionModel::default();
        assert_eq!(refractive_index(863.0, &vacuum(), &model).unwrap(), 1.0);
    }

    #[test]
    fn refractivity_at_one_bar_ice_point() {
        // regression value from the shipped coefficient file
        let model = DispersionModel::default();
        let state = GasState::new(1.0, 273.15).unwrap();
        let delta = refractive_index(863.0, &state, &model).unwrap() - 1.0;
        assert!(delta > 1.0e-4 && delta < 1.6e-4, "delta = {delta:.6e}");
        assert_relative_eq!(delta, 1.3534703192297215e-4, max_relative = 1e-10);
    }

    #[test]
    fn normal_dispersion() {
        let model = DispersionModel::default();
        let state = GasState::new(5.0, 296.0).unwrap();
        let n_blue = refractive_index(635.0, &state, &model).unwrap();
        let n_red = refractive_index(1346.0, &state, &model).unwrap();
        assert!(n_blue > n_red);
    }

    #[test]
    fn wavelength_outside_range_rejected() {
        let model = DispersionModel::default();
        let state = GasState::new(1.0, 296.0).unwrap();
        assert!(refractive_index(499.0, &state, &model).is_err());
        assert!(refractive_index(1701.0, &state, &model).is_err());
    }

    #[test]
    fn vacuum_wavevectors() {
        let model = DispersionModel::default();
        assert_relative_eq!(
            wavevector(1000.0, &vacuum(), &model).unwrap(),
            6.283185307179586e6,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            wavevector(500.0, &vacuum(), &model).unwrap(),
            1.2566370614359172e7,
            max_relative = 1e-12
        );
    }

    #[test]
    fn wavevector_at_pressure_regression() {
        let model = DispersionModel::default();
        let state = GasState::new(8.0, 296.0).unwrap();
        let n = refractive_index(863.0, &state, &model).unwrap();
        assert_relative_eq!(n, 1.0009991903181021, max_relative = 1e-12);
        assert_relative_eq!(
            wavevector(863.0, &state, &model).unwrap(),
            7.287906610782574e6,
            max_relative = 1e-12
        );
    }

    #[test]
    fn dispersion_file_roundtrip() {
        let model = DispersionModel::default();
        let text = serde_json::to_string(&model).unwrap();
        let back = DispersionModel::from_json_str(&text).unwrap();
        assert_eq!(model, back);
    }

    proptest! {
        #[test]
        fn density_linear_in_pressure(p in 0.0f64..30.0, a in 0.1f64..2.0) {
            let d1 = number_density(p, 296.0).unwrap();
            let d2 = number_density(a * p, 296.0).unwrap();
            prop_assert!((d2 - a * d1).abs() <= 1e-14 * d1.abs().max(1e-20) * a.max(1.0));
        }

        #[test]
        fn refractivity_linear_in_pressure(p in 0.01f64..60.0, lam in 500.0f64..1700.0) {
            let model = DispersionModel::default();
            let s1 = GasState::new(p, 296.0).unwrap();
            let s2 = GasState::new(p / 2.0, 296.0).unwrap();
            let d1 = refractive_index(lam, &s1, &model).unwrap() - 1.0;
            let d2 = refractive_index(lam, &s2, &model).unwrap() - 1.0;
            prop_assert!((d1 - 2.0 * d2).abs() < 1e-12 * d1.abs());
        }

        #[test]
        fn wavevector_decreasing_in_wavelength(p in 0.0f64..60.0, lam in 500.0f64..1690.0) {
            let model = DispersionModel::default();
            let state = GasState::new(p, 296.0).unwrap();
            let k1 = wavevector(lam, &state, &model).unwrap();
            let k2 = wavevector(lam + 10.0, &state, &model).unwrap();
            prop_assert!(k1 > k2);
        }
    }
}
