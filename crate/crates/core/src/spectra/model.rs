use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{nm_fwhm_to_sigma, FrequencyGrid, AMPLITUDE_SIGMA_PER_FWHM};
use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA_S_NM: f64 = 1536.0;
pub const DEFAULT_LAMBDA_I_NM: f64 = 1536.0;
pub const DEFAULT_LAMBDA_P_NM: f64 = 768.0;
pub const DEFAULT_CRYSTAL_LENGTH_MM: f64 = 8.0;
pub const DEFAULT_POLING_PERIOD_UM: f64 = 117.0;

/// `x` at which `sinc²(x) = 1/2`.
pub const SINC_HALF_POWER_POINT: f64 = 1.391_557_378_251_510_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhasematchingShape {
    #[default]
    Gaussian,
    Sinc,
}

impl fmt::Display for PhasematchingShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhasematchingShape::Gaussian => "gaussian",
            PhasematchingShape::Sinc => "sinc",
        })
    }
}

impl FromStr for PhasematchingShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(PhasematchingShape::Gaussian),
            "sinc" => Ok(PhasematchingShape::Sinc),
            other => Err(Error::domain(format!("unknown phasematching shape `{other}`"))),
        }
    }
}

/// Parameterization of a PDC source from which JSAs are generated.
///
/// The phasematching function is linearized: a ridge at angle `pm_angle_deg`
/// in the `(νs, νi)` plane with intensity FWHM `pm_fwhm` (rad/ps) measured
/// perpendicular to the ridge. Crystal length and poling period are carried as
/// descriptive metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSourceModel {
    /// Pump intensity FWHM at the pump wavelength (nm).
    pub pump_fwhm_nm: f64,
    pub pm_angle_deg: f64,
    /// Phasematching intensity FWHM across the ridge (rad/ps).
    pub pm_fwhm: f64,
    pub pm_shape: PhasematchingShape,
    pub lambda0_s_nm: f64,
    pub lambda0_i_nm: f64,
    pub lambda0_p_nm: f64,
    pub crystal_length_mm: f64,
    pub poling_period_um: f64,
}

impl GaussianSourceModel {
    /// Degenerate type-II source at 1536 nm pumped at 768 nm.
    pub fn new(pump_fwhm_nm: f64, pm_angle_deg: f64, pm_fwhm: f64) -> Result<Self> {
        let m = Self {
            pump_fwhm_nm,
            pm_angle_deg,
            pm_fwhm,
            pm_shape: PhasematchingShape::Gaussian,
            lambda0_s_nm: DEFAULT_LAMBDA_S_NM,
            lambda0_i_nm: DEFAULT_LAMBDA_I_NM,
            lambda0_p_nm: DEFAULT_LAMBDA_P_NM,
            crystal_length_mm: DEFAULT_CRYSTAL_LENGTH_MM,
            poling_period_um: DEFAULT_POLING_PERIOD_UM,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_shape(mut self, shape: PhasematchingShape) -> Self {
        self.pm_shape = shape;
        self
    }

    pub fn with_pump_fwhm(mut self, pump_fwhm_nm: f64) -> Self {
        self.pump_fwhm_nm = pump_fwhm_nm;
        self
    }

    pub fn with_pm_fwhm(mut self, pm_fwhm: f64) -> Self {
        self.pm_fwhm = pm_fwhm;
        self
    }

    pub fn with_pm_angle(mut self, pm_angle_deg: f64) -> Self {
        self.pm_angle_deg = pm_angle_deg;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.pump_fwhm_nm) {
            return Err(Error::domain(format!("pump_fwhm_nm must be > 0, got {}", self.pump_fwhm_nm)));
        }
        if !positive(self.pm_fwhm) {
            return Err(Error::domain(format!("pm_fwhm must be > 0, got {}", self.pm_fwhm)));
        }
        if !(self.pm_angle_deg > -90.0 && self.pm_angle_deg < 90.0) {
            return Err(Error::domain(format!(
                "pm_angle_deg must lie in (-90, 90), got {}",
                self.pm_angle_deg
            )));
        }
        for (name, v) in [
            ("lambda0_s_nm", self.lambda0_s_nm),
            ("lambda0_i_nm", self.lambda0_i_nm),
            ("lambda0_p_nm", self.lambda0_p_nm),
            ("crystal_length_mm", self.crystal_length_mm),
            ("poling_period_um", self.poling_period_um),
        ] {
            if !positive(v) {
                return Err(Error::domain(format!("{name} must be > 0, got {v}")));
            }
        }
        let inv_p = 1.0 / self.lambda0_p_nm;
        let inv_sum = 1.0 / self.lambda0_s_nm + 1.0 / self.lambda0_i_nm;
        if ((inv_p - inv_sum) / inv_p).abs() > 1e-6 {
            return Err(Error::domain(format!(
                "central wavelengths violate energy conservation: 1/{} != 1/{} + 1/{}",
                self.lambda0_p_nm, self.lambda0_s_nm, self.lambda0_i_nm
            )));
        }
        Ok(())
    }

    /// Pump amplitude σ in pump frequency (rad/ps).
    pub fn pump_sigma(&self) -> Result<f64> {
        nm_fwhm_to_sigma(self.pump_fwhm_nm, self.lambda0_p_nm)
    }

    /// Amplitude σ of a Gaussian phasematching function with the model's
    /// intensity FWHM.
    pub fn pm_sigma(&self) -> f64 {
        self.pm_fwhm * AMPLITUDE_SIGMA_PER_FWHM
    }

    /// Marginal amplitude σ of signal and idler predicted by the all-Gaussian
    /// model; sinc phasematching is replaced by the Gaussian of equal FWHM.
    pub fn predicted_marginal_sigmas(&self) -> Result<(f64, f64)> {
        let p = self.pump_sigma()?.powi(-2);
        let q = self.pm_sigma().powi(-2);
        let (s, c) = self.pm_angle_deg.to_radians().sin_cos();
        let a = p + s * s * q;
        let cc = p + c * c * q;
        let b = p - s * c * q;
        let det = a * cc - b * b;
        if !(det > 1e-12 * a * cc) {
            return Err(Error::domain(format!(
                "phasematching ridge at {}° is parallel to the pump ridge; the JSA is not normalizable",
                self.pm_angle_deg
            )));
        }
        Ok(((cc / det).sqrt(), (a / det).sqrt()))
    }
}

/// Pump envelope `α(νs, νi) = exp(-(νs + νi)² / (2σp²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpEnvelope {
    pub sigma: f64,
}

impl PumpEnvelope {
    pub fn eval(&self, nu_s: f64, nu_i: f64) -> f64 {
        let nu_p = nu_s + nu_i;
        (-nu_p * nu_p / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Linearized phasematching function around the ridge `νi = tan θ · νs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phasematching {
    sin: f64,
    cos: f64,
    shape: PhasematchingShape,
    /// σφ for the Gaussian shape, the sinc argument scale `b` otherwise.
    width: f64,
}

impl Phasematching {
    pub fn new(angle_deg: f64, fwhm: f64, shape: PhasematchingShape) -> Self {
        let (sin, cos) = angle_deg.to_radians().sin_cos();
        let width = match shape {
            PhasematchingShape::Gaussian => fwhm * AMPLITUDE_SIGMA_PER_FWHM,
            PhasematchingShape::Sinc => 2.0 * SINC_HALF_POWER_POINT / fwhm,
        };
        Self {
            sin,
            cos,
            shape,
            width,
        }
    }

    /// Signed distance `u` from the phasematching ridge.
    pub fn ridge_coordinate(&self, nu_s: f64, nu_i: f64) -> f64 {
        nu_s * self.sin - nu_i * self.cos
    }

    /// Gaussian σφ, or the sinc scale `b` in `sinc(b·u)`.
    pub fn width_parameter(&self) -> f64 {
        self.width
    }

    pub fn eval(&self, nu_s: f64, nu_i: f64) -> f64 {
        let u = self.ridge_coordinate(nu_s, nu_i);
        match self.shape {
            PhasematchingShape::Gaussian => (-u * u / (2.0 * self.width * self.width)).exp(),
            PhasematchingShape::Sinc => sinc(self.width * u),
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

pub fn build_pump(model: &GaussianSourceModel, _grid: &FrequencyGrid) -> Result<PumpEnvelope> {
    model.validate()?;
    Ok(PumpEnvelope {
        sigma: model.pump_sigma()?,
    })
}

pub fn build_phasematching(model: &GaussianSourceModel, _grid: &FrequencyGrid) -> Result<Phasematching> {
    model.validate()?;
    Ok(Phasematching::new(model.pm_angle_deg, model.pm_fwhm, model.pm_shape))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::make_grid;

    fn model() -> GaussianSourceModel {
        GaussianSourceModel::new(2.1, 59.0, 4.5).unwrap()
    }

    #[test]
    fn validation() {
        assert!(GaussianSourceModel::new(0.0, 59.0, 1.0).is_err());
        assert!(GaussianSourceModel::new(1.0, 90.0, 1.0).is_err());
        assert!(GaussianSourceModel::new(1.0, -90.0, 1.0).is_err());
        assert!(GaussianSourceModel::new(1.0, 59.0, -1.0).is_err());
        let mut m = model();
        m.lambda0_p_nm = 770.0;
        assert!(m.validate().is_err());
        m.lambda0_s_nm = 1500.0;
        m.lambda0_i_nm = 1.0 / (1.0 / 770.0 - 1.0 / 1500.0);
        assert!(m.validate().is_ok());
    }

    #[test]
    fn pump_ridge_is_exactly_anti_diagonal() {
        let m = model();
        let grid = make_grid(&m, 16, 4.0).unwrap();
        let pump = build_pump(&m, &grid).unwrap();
        for nu in [-7.3, -1.0, 0.0, 0.25, 3.0, 100.0] {
            assert_eq!(pump.eval(nu, -nu), pump.eval(0.0, 0.0));
            assert_eq!(pump.eval(nu, -nu), 1.0);
        }
        let s = pump.sigma;
        assert!((pump.eval(s, 0.0) - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn pump_sigma_at_768() {
        // 2.1 nm at 768 nm is 2.1 × 1.918 rad/ps per nm
        let s = model().pump_sigma().unwrap();
        assert!((s - 4.03).abs() < 5e-3, "{s}");
    }

    #[test]
    fn phasematching_ridge_and_width() {
        let pm = Phasematching::new(59.0, 3.0, PhasematchingShape::Gaussian);
        let t = 59f64.to_radians().tan();
        for nu in [-2.0, 0.3, 5.0] {
            assert!((pm.eval(nu, nu * t) - 1.0).abs() < 1e-12);
        }
        // u = σφ along the unit normal (sin θ, -cos θ)
        let sigma = pm.width_parameter();
        let (s, c) = 59f64.to_radians().sin_cos();
        let v = pm.eval(sigma * s, -sigma * c);
        assert!((v - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn sinc_first_zero_and_half_power() {
        let pm = Phasematching::new(30.0, 2.0, PhasematchingShape::Sinc);
        let b = pm.width_parameter();
        let (s, c) = 30f64.to_radians().sin_cos();
        let u = std::f64::consts::PI / b;
        assert!(pm.eval(u * s, -u * c).abs() < 1e-12);
        // intensity FWHM across the ridge equals the requested 2.0 rad/ps
        let h = 1.0;
        let v = pm.eval(h * s, -h * c);
        assert!((v * v - 0.5).abs() < 1e-12);
        let x = SINC_HALF_POWER_POINT;
        assert!(((x.sin() / x).powi(2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn shape_parsing() {
        assert_eq!("sinc".parse::<PhasematchingShape>().unwrap(), PhasematchingShape::Sinc);
        assert_eq!(" Gaussian ".parse::<PhasematchingShape>().unwrap(), PhasematchingShape::Gaussian);
        assert!("box".parse::<PhasematchingShape>().is_err());
    }

    #[test]
    fn parallel_ridges_are_rejected() {
        let m = GaussianSourceModel::new(2.0, -45.0, 1.0).unwrap();
        assert!(m.predicted_marginal_sigmas().is_err());
    }
}
