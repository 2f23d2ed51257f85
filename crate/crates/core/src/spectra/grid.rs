use serde::{Deserialize, Serialize};

use super::{angular_frequency, GaussianSourceModel, SPEED_OF_LIGHT_NM_PER_PS};
use crate::error::{Error, Result};
use crate::numeric::linspace;

pub const MIN_GRID_POINTS: usize = 8;

/// Uniform detuning axis (rad/ps) around a central wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    detunings: Vec<f64>,
    lambda0_nm: f64,
}

impl Axis {
    /// Symmetric axis on `[-half_span, half_span]`.
    pub fn uniform(half_span: f64, n: usize, lambda0_nm: f64) -> Result<Self> {
        if !(half_span > 0.0 && half_span.is_finite()) {
            return Err(Error::domain(format!("axis half span must be positive, got {half_span}")));
        }
        Self::from_detunings(linspace(-half_span, half_span, n), lambda0_nm)
    }

    pub fn from_detunings(detunings: Vec<f64>, lambda0_nm: f64) -> Result<Self> {
        if detunings.len() < MIN_GRID_POINTS {
            return Err(Error::domain(format!(
                "axis needs at least {MIN_GRID_POINTS} points, got {}",
                detunings.len()
            )));
        }
        if !(lambda0_nm > 0.0 && lambda0_nm.is_finite()) {
            return Err(Error::domain(format!("central wavelength must be positive, got {lambda0_nm}")));
        }
        let step = (detunings[detunings.len() - 1] - detunings[0]) / (detunings.len() - 1) as f64;
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::domain("detunings must be strictly increasing"));
        }
        for w in detunings.windows(2) {
            let d = w[1] - w[0];
            if !(d > 0.0) || (d - step).abs() > 1e-9 * step.max(1.0) {
                return Err(Error::domain("detunings must be strictly increasing and uniformly spaced"));
            }
        }
        Ok(Self {
            detunings,
            lambda0_nm,
        })
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn len(&self) -> usize {
        self.detunings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings.is_empty()
    }

    pub fn lambda0_nm(&self) -> f64 {
        self.lambda0_nm
    }

    pub fn step(&self) -> f64 {
        (self.detunings[self.len() - 1] - self.detunings[0]) / (self.len() - 1) as f64
    }

    pub fn span(&self) -> f64 {
        self.detunings[self.len() - 1] - self.detunings[0]
    }

    /// Wavelength (nm) of every grid point.
    pub fn wavelengths_nm(&self) -> Vec<f64> {
        let w0 = angular_frequency(self.lambda0_nm);
        self.detunings
            .iter()
            .map(|nu| 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT_NM_PER_PS / (w0 + nu))
            .collect()
    }

    /// Whether `ν_k = -ν_{n-1-k}` holds for every point.
    pub fn is_symmetric(&self) -> bool {
        let n = self.len();
        let tol = 1e-9 * self.step();
        (0..n / 2).all(|k| (self.detunings[k] + self.detunings[n - 1 - k]).abs() <= tol)
    }

    /// Same points and central wavelength as `other`.
    pub fn same_as(&self, other: &Axis) -> bool {
        self.len() == other.len()
            && self.lambda0_nm == other.lambda0_nm
            && self
                .detunings
                .iter()
                .zip(&other.detunings)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0))
    }
}

/// Signal (rows) and idler (columns) detuning axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub signal: Axis,
    pub idler: Axis,
}

impl FrequencyGrid {
    pub fn new(signal: Axis, idler: Axis) -> Self {
        Self { signal, idler }
    }

    /// Same axis on both beams.
    pub fn square(axis: Axis) -> Self {
        Self {
            signal: axis.clone(),
            idler: axis,
        }
    }

    pub fn n_s(&self) -> usize {
        self.signal.len()
    }

    pub fn n_i(&self) -> usize {
        self.idler.len()
    }

    pub fn cell_area(&self) -> f64 {
        self.signal.step() * self.idler.step()
    }

    /// Identical signal and idler axes, as required for exchange operations.
    pub fn is_square(&self) -> bool {
        self.signal.same_as(&self.idler)
    }
}

/// Point count and half-span (in predicted marginal σ) of a generated grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub span_sigmas: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n: 256,
            span_sigmas: 5.0,
        }
    }
}

impl GridSpec {
    pub fn new(n: usize, span_sigmas: f64) -> Self {
        Self { n, span_sigmas }
    }

    pub fn build(&self, model: &GaussianSourceModel) -> Result<FrequencyGrid> {
        make_grid(model, self.n, self.span_sigmas)
    }
}

/// Symmetric uniform grid covering `±span_sigmas` predicted marginal σ.
///
/// Both axes share the half-span of the wider marginal so that signal and
/// idler detunings coincide, which exchange-based quantities (HOM overlap,
/// symmetry checks) need.
pub fn make_grid(model: &GaussianSourceModel, n: usize, span_sigmas: f64) -> Result<FrequencyGrid> {
    if n < MIN_GRID_POINTS {
        return Err(Error::domain(format!("grid needs at least {MIN_GRID_POINTS} points, got {n}")));
    }
    if !(span_sigmas > 0.0 && span_sigmas.is_finite()) {
        return Err(Error::domain(format!("span must be positive, got {span_sigmas}")));
    }
    model.validate()?;
    let (sigma_s, sigma_i) = model.predicted_marginal_sigmas()?;
    let half = span_sigmas * sigma_s.max(sigma_i);
    Ok(FrequencyGrid::new(
        Axis::uniform(half, n, model.lambda0_s_nm)?,
        Axis::uniform(half, n, model.lambda0_i_nm)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_rejects_too_few_points() {
        assert!(Axis::uniform(1.0, 7, 1536.0).is_err());
        assert!(Axis::uniform(1.0, 8, 1536.0).is_ok());
    }

    #[test]
    fn axis_rejects_non_uniform() {
        let mut d = linspace(-1.0, 1.0, 10);
        d[3] += 0.01;
        assert!(Axis::from_detunings(d, 1536.0).is_err());
        let d: Vec<f64> = linspace(1.0, -1.0, 10);
        assert!(Axis::from_detunings(d, 1536.0).is_err());
    }

    #[test]
    fn axis_spacing_is_span_over_n_minus_one() {
        let a = Axis::uniform(3.0, 13, 1536.0).unwrap();
        assert!((a.step() - 6.0 / 12.0).abs() < 1e-15);
        assert!(a.is_symmetric());
    }

    #[test]
    fn wavelengths_centered() {
        let a = Axis::uniform(1.0, 9, 1536.0).unwrap();
        let l = a.wavelengths_nm();
        assert!((l[4] - 1536.0).abs() < 1e-9);
        // positive detuning is a higher frequency, hence a shorter wavelength
        assert!(l[8] < l[0]);
    }
}
