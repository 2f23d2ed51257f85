//! Models of the measurement chain: finite-resolution spectrometers, width
//! deconvolution, background-contaminated `g2`, Klyshko heralding efficiency
//! and pump-energy budgets.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{
    marginal_spectrum, nm_to_angular_fwhm, Axis, Beam, FrequencyGrid, JointSpectralAmplitude, MarginalSpectrum,
    FWHM_PER_STD,
};

/// Spectrometer resolutions as intensity FWHM in nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionModel {
    pub jsi_res_nm: f64,
    pub marginal_res_nm: f64,
}

impl Default for ResolutionModel {
    /// Fiber spectrometer gated at about 1.5 ns.
    fn default() -> Self {
        Self {
            jsi_res_nm: 1.8,
            marginal_res_nm: 0.9,
        }
    }
}

impl ResolutionModel {
    pub fn new(jsi_res_nm: f64, marginal_res_nm: f64) -> Result<Self> {
        let r = Self {
            jsi_res_nm,
            marginal_res_nm,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.jsi_res_nm > 0.0 && self.marginal_res_nm > 0.0) {
            return Err(Error::domain(format!(
                "resolutions must be positive (jsi {} nm, marginal {} nm)",
                self.jsi_res_nm, self.marginal_res_nm
            )));
        }
        Ok(())
    }
}

/// A JSI as recorded by a spectrometer: cell probabilities summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredJsi {
    pub grid: FrequencyGrid,
    pub values: DMatrix<f64>,
}

impl MeasuredJsi {
    pub fn marginal(&self, beam: Beam) -> Result<MarginalSpectrum> {
        let (axis, profile): (Axis, Vec<f64>) = match beam {
            Beam::Signal => (
                self.grid.signal.clone(),
                self.values.row_iter().map(|r| r.sum() / self.grid.signal.step()).collect(),
            ),
            Beam::Idler => (
                self.grid.idler.clone(),
                self.values.column_iter().map(|c| c.sum() / self.grid.idler.step()).collect(),
            ),
        };
        MarginalSpectrum::from_profile(beam, axis, profile)
    }
}

/// Normalized discrete Gaussian blur kernel of intensity FWHM `fwhm` (rad/ps)
/// on an axis with spacing `step`, as offsets `-m..=m`.
fn blur_kernel(fwhm: f64, axis: &Axis) -> Result<Vec<f64>> {
    if fwhm > axis.span() {
        return Err(Error::KernelTooWide {
            kernel: fwhm,
            span: axis.span(),
        });
    }
    let sigma = fwhm / FWHM_PER_STD;
    let step = axis.step();
    let reach = ((6.0 * sigma / step).ceil() as usize).min(axis.len() - 1);
    let mut k: Vec<f64> = (0..=2 * reach)
        .map(|j| {
            let x = (j as f64 - reach as f64) * step;
            (-0.5 * x * x / (sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    Ok(k)
}

/// Zero-padded 1-D convolution with a centered kernel.
fn convolve(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    let reach = kernel.len() / 2;
    let n = signal.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(reach);
            let hi = (i + reach).min(n - 1);
            (lo..=hi).map(|j| signal[j] * kernel[j + reach - i]).sum()
        })
        .collect()
}

/// `|f|²` blurred by an isotropic Gaussian of intensity FWHM `jsi_res_nm`
/// (converted per axis at its central wavelength), renormalized to unit sum.
pub fn simulate_jsi_measurement(jsa: &JointSpectralAmplitude, res: &ResolutionModel) -> Result<MeasuredJsi> {
    res.validate()?;
    let grid = jsa.grid().clone();
    let ks = blur_kernel(nm_to_angular_fwhm(res.jsi_res_nm, grid.signal.lambda0_nm()), &grid.signal)?;
    let ki = blur_kernel(nm_to_angular_fwhm(res.jsi_res_nm, grid.idler.lambda0_nm()), &grid.idler)?;

    let mut m = jsa.intensity();
    for mut row in m.row_iter_mut() {
        let blurred = convolve(&row.iter().copied().collect::<Vec<_>>(), &ki);
        row.iter_mut().zip(blurred).for_each(|(v, b)| *v = b);
    }
    for mut col in m.column_iter_mut() {
        let blurred = convolve(col.as_slice(), &ks);
        col.iter_mut().zip(blurred).for_each(|(v, b)| *v = b);
    }
    let total = m.sum();
    if !(total > 0.0) {
        return Err(Error::EmptyJsa);
    }
    m /= total;
    Ok(MeasuredJsi { grid, values: m })
}

/// Marginal spectrum of `beam` blurred by the marginal spectrometer resolution.
pub fn simulate_marginal_measurement(
    jsa: &JointSpectralAmplitude,
    beam: Beam,
    res: &ResolutionModel,
) -> Result<MarginalSpectrum> {
    res.validate()?;
    let m = marginal_spectrum(jsa, beam)?;
    let kernel = blur_kernel(nm_to_angular_fwhm(res.marginal_res_nm, m.axis.lambda0_nm()), &m.axis)?;
    let blurred = convolve(&m.intensity, &kernel);
    let total: f64 = blurred.iter().sum::<f64>() * m.axis.step();
    MarginalSpectrum::from_profile(beam, m.axis, blurred.into_iter().map(|v| v / total).collect())
}

/// True Gaussian width from one measured through a Gaussian resolution:
/// `√(measured² − resolution²)`.
pub fn deconvolve_width(measured_fwhm_nm: f64, resolution_fwhm_nm: f64) -> Result<f64> {
    if !(resolution_fwhm_nm >= 0.0) {
        return Err(Error::domain(format!("resolution must be non-negative, got {resolution_fwhm_nm}")));
    }
    if !(measured_fwhm_nm > resolution_fwhm_nm) {
        return Err(Error::ResolutionLimited {
            measured_nm: measured_fwhm_nm,
            resolution_nm: resolution_fwhm_nm,
        });
    }
    Ok((measured_fwhm_nm.powi(2) - resolution_fwhm_nm.powi(2)).sqrt())
}

fn check_background(beta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::domain(format!("background fraction must lie in [0, 1), got {beta}")));
    }
    Ok(())
}

/// `g2` of a PDC marginal mixed with independent Poissonian background that
/// makes up the fraction `beta` of all counts:
///
/// `g2_meas = (1−β)² g2_true + 2β(1−β) + β²`
pub fn g2_background(g2_true: f64, beta: f64) -> Result<f64> {
    check_background(beta)?;
    if !(g2_true >= 1.0) {
        return Err(Error::domain(format!("g2 must be >= 1, got {g2_true}")));
    }
    let s = 1.0 - beta;
    Ok(s * s * g2_true + 2.0 * beta * s + beta * beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundCorrection {
    pub g2_true: f64,
    /// The corrected value fell below 1, which no thermal-plus-Poisson
    /// mixture can produce.
    pub model_inconsistent: bool,
}

/// Inverse of [`g2_background`]. Measured values below 1 (possible from
/// counting noise) are accepted and come back flagged.
pub fn g2_background_correct(g2_measured: f64, beta: f64) -> Result<BackgroundCorrection> {
    check_background(beta)?;
    if !(g2_measured > 0.0 && g2_measured.is_finite()) {
        return Err(Error::domain(format!("measured g2 must be positive, got {g2_measured}")));
    }
    let s = 1.0 - beta;
    let g2_true = (g2_measured - 2.0 * beta * s - beta * beta) / (s * s);
    Ok(BackgroundCorrection {
        g2_true,
        model_inconsistent: g2_true < 1.0,
    })
}

/// Counts from one acquisition used for heralding-efficiency estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRecord {
    pub coincidences: f64,
    pub singles_s: f64,
    pub singles_i: f64,
    pub eta_det_s: f64,
    pub eta_det_i: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlyshkoEfficiencies {
    pub eta_s: f64,
    pub eta_i: f64,
    pub eta_s_corrected: f64,
    pub eta_i_corrected: f64,
}

/// Heralding efficiencies as coincidence-to-singles ratios: the signal arm's
/// efficiency is seen by heralding on idler clicks and vice versa.
pub fn klyshko(record: &EfficiencyRecord) -> Result<KlyshkoEfficiencies> {
    let r = record;
    if !(r.coincidences >= 0.0 && r.singles_s > 0.0 && r.singles_i > 0.0) {
        return Err(Error::domain(format!(
            "counts must be non-negative with positive singles (coincidences {}, singles {} / {})",
            r.coincidences, r.singles_s, r.singles_i
        )));
    }
    for eta in [r.eta_det_s, r.eta_det_i] {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::domain(format!("detector efficiency must lie in (0, 1], got {eta}")));
        }
    }
    let eta_s = r.coincidences / r.singles_i;
    let eta_i = r.coincidences / r.singles_s;
    for eta in [eta_s, eta_i] {
        if eta > 1.0 {
            return Err(Error::InconsistentCounts(eta));
        }
    }
    Ok(KlyshkoEfficiencies {
        eta_s,
        eta_i,
        eta_s_corrected: eta_s / r.eta_det_s,
        eta_i_corrected: eta_i / r.eta_det_i,
    })
}

/// Low-gain pair generation efficiency of a source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrightnessModel {
    pub pairs_per_joule: f64,
    pub rep_rate_hz: f64,
    pub crystal_length_mm: f64,
}

impl Default for BrightnessModel {
    fn default() -> Self {
        Self {
            pairs_per_joule: 3e9,
            rep_rate_hz: 1e6,
            crystal_length_mm: 8.0,
        }
    }
}

impl BrightnessModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.pairs_per_joule > 0.0 && self.rep_rate_hz > 0.0 && self.crystal_length_mm > 0.0) {
            return Err(Error::domain(format!("brightness parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Mean pair numbers above this are outside the linear low-gain regime.
pub const LOW_GAIN_LIMIT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseBudget {
    pub pulse_energy_j: f64,
    pub cw_power_w: f64,
    /// The target exceeded [`LOW_GAIN_LIMIT`] and the single-mode gain
    /// scaling was inverted instead of the linear relation.
    pub high_gain: bool,
}

/// Pump pulse energy and cw-equivalent power for a target mean pair number.
pub fn pulse_energy_for_mean_n(n_target: f64, brightness: &BrightnessModel) -> Result<PulseBudget> {
    brightness.validate()?;
    if !(n_target >= 0.0 && n_target.is_finite()) {
        return Err(Error::domain(format!("target mean photon number must be >= 0, got {n_target}")));
    }
    let high_gain = n_target > LOW_GAIN_LIMIT;
    let pulse_energy_j = if high_gain {
        n_target.sqrt().asinh().powi(2) / brightness.pairs_per_joule
    } else {
        n_target / brightness.pairs_per_joule
    };
    Ok(PulseBudget {
        pulse_energy_j,
        cw_power_w: pulse_energy_j * brightness.rep_rate_hz,
        high_gain,
    })
}

/// Mean pairs per pulse of a single two-mode squeezer, `sinh²(√(ηE))` with `η`
/// the low-gain pairs per joule, so that `n → ηE` at low gain.
pub fn mean_n_high_gain(pulse_energy_j: f64, brightness: &BrightnessModel) -> Result<f64> {
    brightness.validate()?;
    if !(pulse_energy_j > 0.0) {
        return Err(Error::domain(format!("pulse energy must be positive, got {pulse_energy_j}")));
    }
    Ok((brightness.pairs_per_joule * pulse_energy_j).sqrt().sinh().powi(2))
}

/// Pair generation efficiency per unit crystal length, pairs/(J·m).
pub fn normalized_pair_efficiency(pairs_per_joule: f64, crystal_length_mm: f64) -> Result<f64> {
    if !(pairs_per_joule > 0.0 && crystal_length_mm > 0.0) {
        return Err(Error::domain("pair efficiency and crystal length must be positive"));
    }
    Ok(pairs_per_joule / (crystal_length_mm * 1e-3))
}
