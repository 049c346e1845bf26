//! Physical constants (SI 2019 exact values) and small unit helpers.

/// Boltzmann constant in J/K.
pub const BOLTZMANN_J_PER_K: f64 = 1.380649e-23;

/// Speed of light in vacuum in m/s.
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299792458.0;

/// Vacuum frequency in THz of light with the given vacuum wavelength in nm.
pub fn vacuum_frequency_thz(wavelength_nm: f64) -> f64 {
    SPEED_OF_LIGHT_M_PER_S / (wavelength_nm * 1e-9) / 1e12
}

/// Vacuum wavelength in nm of light with the given frequency in THz.
pub fn vacuum_wavelength_nm(frequency_thz: f64) -> f64 {
    SPEED_OF_LIGHT_M_PER_S / (frequency_thz * 1e12) * 1e9
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavelength_frequency_roundtrip() {
        let nu = vacuum_frequency_thz(863.0);
        assert!((vacuum_wavelength_nm(nu) - 863.0).abs() < 1e-9);
    }
}
