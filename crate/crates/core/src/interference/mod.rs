//! Hong-Ou-Mandel interference: signal-idler traces from a JSA, the
//! reference-field dip width relation, and Gaussian dip fitting of data.

mod fit;

pub use fit::{fit_dip, DipFit, DipParameters, MIN_DIP_POINTS};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect, half_max_width, linspace};
use crate::optimize::{find_decorrelating_pump, PUMP_SEARCH_MAX_NM, PUMP_SEARCH_MIN_NM};
use crate::schmidt::schmidt_number;
use crate::spectra::{compose_jsa, nm_fwhm_to_sigma, GaussianSourceModel, GridSpec, JointSpectralAmplitude, FWHM_PER_STD};

/// Coincidence probability far outside the dip of an ideal 50/50 splitter.
pub const HOM_BASELINE: f64 = 0.5;

/// Delay window used when only the visibility of a trace is needed.
pub const VISIBILITY_WINDOW_PS: (f64, f64) = (-1.0, 1.0);
pub const VISIBILITY_WINDOW_POINTS: usize = 21;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomTrace {
    pub delays_ps: Vec<f64>,
    pub probability: Vec<f64>,
    pub baseline: f64,
    /// `(baseline − min p) / baseline`
    pub visibility: f64,
    /// Intensity FWHM of the dip, when both half-depth crossings lie inside
    /// the delay window.
    pub dip_fwhm_ps: Option<f64>,
}

/// Coincidence probability behind a 50/50 splitter versus signal-idler delay:
///
/// `p(τ) = 1/2 − 1/2 Re Σ f*(νs,νi) f(νi,νs) e^{−iτ(νs−νi)} Δνs Δνi`
///
/// The exchange `f(νi, νs)` needs identical signal and idler axes; with
/// `resample` set, other grids are first resampled onto a common axis.
pub fn hom_signal_idler(
    jsa: &JointSpectralAmplitude,
    tau_range_ps: (f64, f64),
    n_tau: usize,
    resample: bool,
) -> Result<HomTrace> {
    if n_tau < 3 {
        return Err(Error::domain(format!("HOM trace needs at least 3 delays, got {n_tau}")));
    }
    if !(tau_range_ps.0.is_finite() && tau_range_ps.1.is_finite() && tau_range_ps.0 < tau_range_ps.1) {
        return Err(Error::domain(format!("invalid delay range {tau_range_ps:?}")));
    }
    let resampled;
    let jsa = if jsa.grid().is_square() {
        jsa
    } else if resample {
        resampled = jsa.resample_square()?;
        &resampled
    } else {
        return Err(Error::NonSquareGrid);
    };

    let f = jsa.values();
    let n = f.nrows();
    let area = jsa.grid().cell_area();
    let nu = jsa.grid().signal.detunings();
    // overlap kernel f*(νs,νi) f(νi,νs) ΔνsΔνi
    let kernel: Vec<Complex64> = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .map(|(r, c)| f[(r, c)].conj() * f[(c, r)] * area)
        .collect();

    let delays = linspace(tau_range_ps.0, tau_range_ps.1, n_tau);
    let probability: Vec<f64> = delays
        .par_iter()
        .map(|&tau| {
            let phase: Vec<Complex64> = nu.iter().map(|&v| Complex64::from_polar(1.0, -tau * v)).collect();
            let mut overlap = Complex64::new(0.0, 0.0);
            for r in 0..n {
                let row = &kernel[r * n..(r + 1) * n];
                let inner: Complex64 = row.iter().zip(&phase).map(|(k, e)| k * e.conj()).sum();
                overlap += phase[r] * inner;
            }
            HOM_BASELINE - 0.5 * overlap.re
        })
        .collect();

    Ok(trace_from_probability(delays, probability))
}

fn trace_from_probability(delays_ps: Vec<f64>, probability: Vec<f64>) -> HomTrace {
    let min = probability.iter().copied().fold(f64::INFINITY, f64::min);
    let visibility = ((HOM_BASELINE - min) / HOM_BASELINE).clamp(0.0, 1.0);
    let depth: Vec<f64> = probability.iter().map(|p| HOM_BASELINE - p).collect();
    let dip_fwhm_ps = half_max_width(&delays_ps, &depth)
        .filter(|w| !w.truncated)
        .map(|w| w.width());
    HomTrace {
        delays_ps,
        probability,
        baseline: HOM_BASELINE,
        visibility,
        dip_fwhm_ps,
    }
}

/// Visibility of the signal-idler dip evaluated over [`VISIBILITY_WINDOW_PS`].
pub fn hom_visibility(jsa: &JointSpectralAmplitude) -> Result<f64> {
    Ok(hom_signal_idler(jsa, VISIBILITY_WINDOW_PS, VISIBILITY_WINDOW_POINTS, true)?.visibility)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub pump_fwhm_nm: f64,
    pub schmidt_number: f64,
    pub visibility: f64,
}

/// HOM visibilities on both sides of the decorrelation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchVisibilities {
    /// Pump broader than optimal: the JSA follows the phasematching ridge.
    pub positive: BranchPoint,
    pub decorrelated: BranchPoint,
    /// Pump narrower than optimal: the JSA follows the anti-diagonal pump ridge.
    pub negative: BranchPoint,
}

/// Tunes the pump width of `template` to reach Schmidt number `target_k` on
/// the broad- and narrow-pump branches and reports the signal-idler HOM
/// visibility there and at the decorrelation optimum.
pub fn correlation_branch_visibilities(
    template: &GaussianSourceModel,
    grid: GridSpec,
    target_k: f64,
) -> Result<BranchVisibilities> {
    if !(target_k > 1.0) {
        return Err(Error::domain(format!("target Schmidt number must exceed 1, got {target_k}")));
    }
    let optimum = find_decorrelating_pump(template, grid)?;
    let evaluate = |pump: f64| -> Result<BranchPoint> {
        let model = template.with_pump_fwhm(pump);
        let jsa = compose_jsa(&model, &grid.build(&model)?)?;
        Ok(BranchPoint {
            pump_fwhm_nm: pump,
            schmidt_number: schmidt_number(&jsa)?,
            visibility: hom_visibility(&jsa)?,
        })
    };
    let k_minus_target = |pump: f64| -> Result<f64> {
        let model = template.with_pump_fwhm(pump);
        Ok(schmidt_number(&compose_jsa(&model, &grid.build(&model)?)?)? - target_k)
    };
    let branch = |lo: f64, hi: f64, which: &str| -> Result<BranchPoint> {
        let pump = bisect(k_minus_target, lo, hi, 1e-6, true).map_err(|e| match e {
            Error::NoBracket { lo, hi, .. } => Error::NoBracket {
                lo,
                hi,
                what: format!("pump width reaching K = {target_k} on the {which} branch"),
            },
            other => other,
        })?;
        evaluate(pump)
    };

    Ok(BranchVisibilities {
        positive: branch(optimum.pump_fwhm_nm, PUMP_SEARCH_MAX_NM, "broad-pump")?,
        decorrelated: evaluate(optimum.pump_fwhm_nm)?,
        negative: branch(PUMP_SEARCH_MIN_NM, optimum.pump_fwhm_nm, "narrow-pump")?,
    })
}

/// Standard deviation `δ` (ps) of the HOM dip between a Gaussian state with
/// density-matrix minor axis `sigma2` and a reference field of width
/// `sigma_beta` (both amplitude σ in rad/ps):
///
/// `δ² = 1/(2σ₂²) + 1/(2σβ²)`
pub fn reference_dip_width(sigma2: f64, sigma_beta: f64) -> Result<f64> {
    if !(sigma2 > 0.0 && sigma_beta > 0.0) {
        return Err(Error::domain(format!(
            "widths must be positive (σ₂ = {sigma2}, σβ = {sigma_beta})"
        )));
    }
    Ok((0.5 / (sigma2 * sigma2) + 0.5 / (sigma_beta * sigma_beta)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipPurity {
    pub purity: f64,
    /// Density-matrix minor axis σ₂ (rad/ps).
    pub sigma2: f64,
    /// Marginal (major axis) σ₁ (rad/ps).
    pub sigma1: f64,
    pub sigma_beta: f64,
    /// `σ₂ > σ₁` was measured and the purity clamped to 1.
    pub clamped: bool,
}

/// Purity `σ₂/σ₁` from the intensity FWHM of a HOM dip against a reference
/// field, inverting [`reference_dip_width`]. Widths are intensity FWHM in nm at
/// `lambda0_nm`.
pub fn purity_from_dip(dip_fwhm_ps: f64, sigma_beta_nm: f64, sigma1_nm: f64, lambda0_nm: f64) -> Result<DipPurity> {
    if !(dip_fwhm_ps > 0.0) {
        return Err(Error::domain(format!("dip FWHM must be positive, got {dip_fwhm_ps}")));
    }
    let sigma_beta = nm_fwhm_to_sigma(sigma_beta_nm, lambda0_nm)?;
    let sigma1 = nm_fwhm_to_sigma(sigma1_nm, lambda0_nm)?;
    let delta = dip_fwhm_ps / FWHM_PER_STD;
    let denom = 2.0 * delta * delta - 1.0 / (sigma_beta * sigma_beta);
    if !(denom > 0.0) {
        return Err(Error::DipBelowReferenceLimit {
            dip_fwhm_ps,
            limit_fwhm_ps: FWHM_PER_STD / (std::f64::consts::SQRT_2 * sigma_beta),
        });
    }
    let sigma2 = denom.sqrt().recip();
    let raw = sigma2 / sigma1;
    Ok(DipPurity {
        purity: raw.min(1.0),
        sigma2,
        sigma1,
        sigma_beta,
        clamped: raw > 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{Axis, FrequencyGrid};

    fn gaussian_jsa(a: f64, b: f64, c: f64, n: usize, half: f64) -> JointSpectralAmplitude {
        let grid = FrequencyGrid::square(Axis::uniform(half, n, 1536.0).unwrap());
        JointSpectralAmplitude::from_fn(grid, |x, y| {
            Complex64::new((-0.5 * (a * x * x + 2.0 * b * x * y + c * y * y)).exp(), 0.0)
        })
        .unwrap()
    }

    #[test]
    fn symmetric_state_has_full_visibility() {
        let jsa = gaussian_jsa(1.0, 0.3, 1.0, 96, 10.0);
        let t = hom_signal_idler(&jsa, (-3.0, 3.0), 31, false).unwrap();
        assert!(t.probability[15].abs() < 1e-12);
        assert!((t.visibility - 1.0).abs() < 1e-12);
    }

    #[test]
    fn baseline_far_from_dip() {
        let jsa = gaussian_jsa(1.0, 0.0, 0.6, 128, 12.0);
        let t = hom_signal_idler(&jsa, (-30.0, 30.0), 7, false).unwrap();
        assert!((t.probability[0] - 0.5).abs() < 5e-3);
        assert!((t.probability[6] - 0.5).abs() < 5e-3);
    }

    #[test]
    fn trace_is_symmetric_for_real_jsa() {
        let jsa = gaussian_jsa(1.0, -0.4, 0.7, 96, 12.0);
        let t = hom_signal_idler(&jsa, (-4.0, 4.0), 41, false).unwrap();
        for k in 0..41 {
            assert!((t.probability[k] - t.probability[40 - k]).abs() < 1e-9);
            assert!(t.probability[k] >= -1e-12 && t.probability[k] <= 0.5 + 1e-9);
        }
        assert!(t.dip_fwhm_ps.is_some());
    }

    #[test]
    fn too_few_delays() {
        let jsa = gaussian_jsa(1.0, 0.0, 1.0, 16, 6.0);
        assert!(hom_signal_idler(&jsa, (-1.0, 1.0), 2, false).is_err());
    }

    #[test]
    fn non_square_grid_needs_resampling() {
        let grid = FrequencyGrid::new(
            Axis::uniform(8.0, 81, 1536.0).unwrap(),
            Axis::uniform(6.0, 61, 1536.0).unwrap(),
        );
        let jsa = JointSpectralAmplitude::from_fn(grid, |x, y| {
            Complex64::new((-0.5 * (x * x + y * y)).exp(), 0.0)
        })
        .unwrap();
        assert_eq!(hom_signal_idler(&jsa, (-1.0, 1.0), 5, false).unwrap_err(), Error::NonSquareGrid);
        let t = hom_signal_idler(&jsa, (-1.0, 1.0), 5, true).unwrap();
        assert!((t.visibility - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dip_width_symmetric_case() {
        assert!((reference_dip_width(1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let big = reference_dip_width(1.3, 1e9).unwrap();
        assert!((big - 1.0 / (2f64.sqrt() * 1.3)).abs() < 1e-12);
        assert!(reference_dip_width(0.0, 1.0).is_err());
    }

    #[test]
    fn dip_width_from_measured_purity() {
        let sigma2 = 0.821 * nm_fwhm_to_sigma(3.9, 1536.0).unwrap();
        let sigma_beta = nm_fwhm_to_sigma(4.5, 1536.0).unwrap();
        assert!((sigma2 - 1.535).abs() < 1e-3);
        let delta = reference_dip_width(sigma2, sigma_beta).unwrap();
        assert!((delta - 0.565).abs() < 1e-3, "{delta}");
        assert!((delta * FWHM_PER_STD - 1.331).abs() < 1e-3);
    }

    #[test]
    fn purity_from_measured_dips() {
        let p = purity_from_dip(1.33, 4.5, 3.9, 1536.0).unwrap();
        assert!((p.purity - 0.821).abs() < 0.02, "{}", p.purity);
        let p = purity_from_dip(1.28, 4.5, 3.9, 1536.0).unwrap();
        assert!((p.purity - 0.867).abs() < 0.05, "{}", p.purity);
        assert!(!p.clamped);
    }

    #[test]
    fn reference_limited_dip_is_rejected() {
        let sigma_beta = nm_fwhm_to_sigma(4.5, 1536.0).unwrap();
        let limit = FWHM_PER_STD / (2f64.sqrt() * sigma_beta);
        let e = purity_from_dip(limit, 4.5, 3.9, 1536.0).unwrap_err();
        assert!(matches!(e, Error::DipBelowReferenceLimit { .. }));
    }

    #[test]
    fn overly_wide_minor_axis_is_clamped() {
        // a very narrow dip relative to σ₁ gives σ₂ > σ₁
        let p = purity_from_dip(1.0, 4.5, 1.0, 1536.0).unwrap();
        assert!(p.clamped);
        assert_eq!(p.purity, 1.0);
    }
}
