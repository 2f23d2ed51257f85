//! Frequency grids, pump and phasematching functions, and composition of the
//! joint spectral amplitude `f(νs, νi) = φ(νs, νi) · α(νs + νi)`.
//!
//! Detunings `ν = ω − ω̄` are angular frequencies in rad/ps around the central
//! frequency of each beam. The pump envelope depends only on `νs + νi` and so
//! is always a ridge along the anti-diagonal; the phasematching ridge is the
//! line `νi = tan θ · νs`.

mod grid;
mod jsa;
mod model;

pub use grid::{make_grid, Axis, FrequencyGrid, GridSpec, MIN_GRID_POINTS};
pub use jsa::{
    compose_jsa, marginal_spectrum, Beam, JointSpectralAmplitude, MarginalSpectrum,
    SpectralAmplitude, BOUNDARY_WARNING_RATIO,
};
pub use model::{build_phasematching, build_pump, GaussianSourceModel, Phasematching, PhasematchingShape, PumpEnvelope};

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Speed of light in nm/ps.
pub const SPEED_OF_LIGHT_NM_PER_PS: f64 = 299_792.458;

/// Ratio between the amplitude standard deviation and the intensity FWHM of a
/// Gaussian: `σ = FWHM · √2 / (2√(2 ln 2)) = FWHM / (2√ln 2)`.
pub const AMPLITUDE_SIGMA_PER_FWHM: f64 = 0.600_561_204_393_224_9;

/// `2√(2 ln 2)`: intensity FWHM of a unit-variance Gaussian.
pub const FWHM_PER_STD: f64 = 2.354_820_045_030_949_3;

/// Angular-frequency intensity FWHM (rad/ps) of a wavelength FWHM at `lambda0_nm`.
pub fn nm_to_angular_fwhm(fwhm_nm: f64, lambda0_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT_NM_PER_PS * fwhm_nm / (lambda0_nm * lambda0_nm)
}

/// Inverse of [`nm_to_angular_fwhm`].
pub fn angular_to_nm_fwhm(fwhm_rad_ps: f64, lambda0_nm: f64) -> f64 {
    fwhm_rad_ps * lambda0_nm * lambda0_nm / (2.0 * PI * SPEED_OF_LIGHT_NM_PER_PS)
}

/// Amplitude standard deviation (rad/ps) of a Gaussian whose intensity FWHM is
/// `fwhm_nm` at the central wavelength `lambda0_nm`.
pub fn nm_fwhm_to_sigma(fwhm_nm: f64, lambda0_nm: f64) -> Result<f64> {
    if !(fwhm_nm > 0.0 && fwhm_nm.is_finite()) || !(lambda0_nm > 0.0 && lambda0_nm.is_finite()) {
        return Err(Error::domain(format!(
            "widths and wavelengths must be positive (fwhm = {fwhm_nm} nm, λ0 = {lambda0_nm} nm)"
        )));
    }
    Ok(nm_to_angular_fwhm(fwhm_nm, lambda0_nm) * AMPLITUDE_SIGMA_PER_FWHM)
}

/// Intensity FWHM in nm of an amplitude Gaussian with standard deviation `sigma`.
pub fn sigma_to_nm_fwhm(sigma: f64, lambda0_nm: f64) -> f64 {
    angular_to_nm_fwhm(sigma / AMPLITUDE_SIGMA_PER_FWHM, lambda0_nm)
}

/// Central angular frequency (rad/ps) of a wavelength.
pub fn angular_frequency(lambda_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT_NM_PER_PS / lambda_nm
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn sigma_constants_are_consistent() {
        assert!((AMPLITUDE_SIGMA_PER_FWHM - 1.0 / (2.0 * LN_2.sqrt())).abs() < 1e-15);
        assert!((FWHM_PER_STD - 2.0 * (2.0 * LN_2).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn one_nm_at_1536() {
        // 2πc·Δλ/λ² · √2/2.3548
        let s = nm_fwhm_to_sigma(1.0, 1536.0).unwrap();
        assert!((s - 0.4795).abs() < 5e-5, "{s}");
    }

    #[test]
    fn reference_field_width() {
        let s = nm_fwhm_to_sigma(4.5, 1536.0).unwrap();
        assert!((s - 2.158).abs() < 5e-4, "{s}");
    }

    #[test]
    fn zero_width_is_domain_error() {
        assert!(matches!(nm_fwhm_to_sigma(0.0, 1536.0), Err(Error::Domain(_))));
        assert!(nm_fwhm_to_sigma(1.0, -3.0).is_err());
    }

    #[test]
    fn sigma_round_trip() {
        let s = nm_fwhm_to_sigma(3.9, 1536.0).unwrap();
        assert!((sigma_to_nm_fwhm(s, 1536.0) - 3.9).abs() < 1e-12);
    }
}
