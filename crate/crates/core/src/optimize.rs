//! Calibration of the phasematching width, search for the decorrelating pump
//! bandwidth, and one-parameter sweeps.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interference::hom_visibility;
use crate::numeric::{bisect, golden_section, linspace};
use crate::schmidt::{g2_from_k, number_from_coefficients, purity_from_k, schmidt_coefficients};
use crate::spectra::{compose_jsa, marginal_spectrum, Beam, GaussianSourceModel, GridSpec};

pub const PUMP_SEARCH_MIN_NM: f64 = 0.05;
pub const PUMP_SEARCH_MAX_NM: f64 = 20.0;
pub const PUMP_SEARCH_TOL_NM: f64 = 1e-3;
/// Bracket for the phasematching intensity FWHM (rad/ps).
pub const PM_FWHM_BRACKET: (f64, f64) = (0.01, 100.0);
pub const CALIBRATION_REL_TOL: f64 = 1e-4;
/// Largest minimal Schmidt number still called decorrelated.
pub const DECORRELATED_K: f64 = 1.02;

/// Operating point of the reference source: ridge angle, pump width and the
/// signal/idler marginal FWHMs it was calibrated against.
pub const REFERENCE_ANGLE_DEG: f64 = 59.0;
pub const REFERENCE_PUMP_FWHM_NM: f64 = 2.1;
pub const REFERENCE_MARGINALS_NM: (f64, f64) = (5.2, 4.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Phasematching intensity FWHM (rad/ps).
    pub pm_fwhm: f64,
    pub signal_fwhm_nm: f64,
    pub idler_fwhm_nm: f64,
    pub idler_target_nm: f64,
    /// `(idler − target) / target`; the idler is not fitted.
    pub idler_mismatch: f64,
}

fn marginal_fwhms(model: &GaussianSourceModel, grid: GridSpec) -> Result<(f64, f64)> {
    let jsa = compose_jsa(model, &grid.build(model)?)?;
    Ok((
        marginal_spectrum(&jsa, Beam::Signal)?.fwhm_nm,
        marginal_spectrum(&jsa, Beam::Idler)?.fwhm_nm,
    ))
}

/// Phasematching width at which the signal marginal of `template` (with its
/// own angle and pump width) has intensity FWHM `targets_nm.0`. The idler
/// target is only compared against.
pub fn calibrate_pm_width(template: &GaussianSourceModel, targets_nm: (f64, f64), grid: GridSpec) -> Result<Calibration> {
    let (signal_target, idler_target) = targets_nm;
    if !(signal_target > 0.0 && idler_target > 0.0) {
        return Err(Error::domain(format!(
            "target marginals must be positive, got {signal_target} / {idler_target} nm"
        )));
    }
    let angle = template.pm_angle_deg;
    if !(angle > 0.0 && angle < 90.0) {
        return Err(Error::domain(format!(
            "calibration needs a phasematching angle in (0°, 90°), got {angle}°"
        )));
    }
    let mismatch = |pm: f64| -> Result<f64> {
        let model = template.with_pm_fwhm(pm);
        model.validate()?;
        Ok(marginal_fwhms(&model, grid)?.0 - signal_target)
    };
    let (lo, hi) = PM_FWHM_BRACKET;
    let pm_fwhm = bisect(mismatch, lo, hi, CALIBRATION_REL_TOL, true).map_err(|e| match e {
        Error::NoBracket { lo, hi, .. } => Error::NoBracket {
            lo,
            hi,
            what: format!("phasematching width giving a {signal_target} nm signal marginal"),
        },
        other => other,
    })?;
    let (signal_fwhm_nm, idler_fwhm_nm) = marginal_fwhms(&template.with_pm_fwhm(pm_fwhm), grid)?;
    Ok(Calibration {
        pm_fwhm,
        signal_fwhm_nm,
        idler_fwhm_nm,
        idler_target_nm: idler_target,
        idler_mismatch: (idler_fwhm_nm - idler_target) / idler_target,
    })
}

/// The reference source: 59° ridge, 2.1 nm pump, phasematching calibrated to
/// a 5.2 nm signal marginal.
pub fn calibrated_reference_model(grid: GridSpec) -> Result<(GaussianSourceModel, Calibration)> {
    let template = GaussianSourceModel::new(REFERENCE_PUMP_FWHM_NM, REFERENCE_ANGLE_DEG, 1.0)?;
    let cal = calibrate_pm_width(&template, REFERENCE_MARGINALS_NM, grid)?;
    Ok((template.with_pm_fwhm(cal.pm_fwhm), cal))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decorrelation {
    pub pump_fwhm_nm: f64,
    pub k_min: f64,
    /// The minimizer sits at an edge of the search bracket.
    pub no_interior_optimum: bool,
    /// `k_min` exceeds [`DECORRELATED_K`]: no pump width separates the state.
    pub correlated: bool,
    pub evaluations: usize,
}

/// Schmidt number of `template` with its pump width replaced.
pub fn k_at_pump(template: &GaussianSourceModel, pump_fwhm_nm: f64, grid: GridSpec) -> Result<f64> {
    let model = template.with_pump_fwhm(pump_fwhm_nm);
    model.validate()?;
    let jsa = compose_jsa(&model, &grid.build(&model)?)?;
    Ok(number_from_coefficients(&schmidt_coefficients(&jsa)?))
}

/// Golden-section minimization of K over the pump width in
/// `[PUMP_SEARCH_MIN_NM, PUMP_SEARCH_MAX_NM]`.
pub fn find_decorrelating_pump(template: &GaussianSourceModel, grid: GridSpec) -> Result<Decorrelation> {
    if !(template.pm_fwhm > 0.0) {
        return Err(Error::domain(format!(
            "phasematching width must be positive, got {}",
            template.pm_fwhm
        )));
    }
    let m = golden_section(
        |pump| k_at_pump(template, pump, grid),
        PUMP_SEARCH_MIN_NM,
        PUMP_SEARCH_MAX_NM,
        PUMP_SEARCH_TOL_NM,
    )?;
    let edge = 2.0 * PUMP_SEARCH_TOL_NM;
    Ok(Decorrelation {
        pump_fwhm_nm: m.x,
        k_min: m.value,
        no_interior_optimum: m.x - PUMP_SEARCH_MIN_NM < edge || PUMP_SEARCH_MAX_NM - m.x < edge,
        correlated: m.value > DECORRELATED_K,
        evaluations: m.evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    PumpFwhm,
    PmAngle,
    PmFwhm,
}

impl SweepParameter {
    pub fn apply(self, template: &GaussianSourceModel, value: f64) -> GaussianSourceModel {
        match self {
            Self::PumpFwhm => template.with_pump_fwhm(value),
            Self::PmAngle => template.with_pm_angle(value),
            Self::PmFwhm => template.with_pm_fwhm(value),
        }
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PumpFwhm => "pump_fwhm",
            Self::PmAngle => "pm_angle",
            Self::PmFwhm => "pm_fwhm",
        })
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pump_fwhm" => Ok(Self::PumpFwhm),
            "pm_angle" => Ok(Self::PmAngle),
            "pm_fwhm" => Ok(Self::PmFwhm),
            other => Err(Error::domain(format!(
                "unknown sweep parameter '{other}' (expected pump_fwhm, pm_angle or pm_fwhm)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowValues {
    pub k: f64,
    pub purity: f64,
    pub g2: f64,
    pub visibility: f64,
    pub signal_fwhm_nm: f64,
    pub idler_fwhm_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub result: std::result::Result<RowValues, String>,
}

/// Everything a sweep row reports for one model.
pub fn evaluate_model(model: &GaussianSourceModel, grid: GridSpec) -> Result<RowValues> {
    model.validate()?;
    let jsa = compose_jsa(model, &grid.build(model)?)?;
    let k = number_from_coefficients(&schmidt_coefficients(&jsa)?);
    Ok(RowValues {
        k,
        purity: purity_from_k(k)?,
        g2: g2_from_k(k)?,
        visibility: hom_visibility(&jsa)?,
        signal_fwhm_nm: marginal_spectrum(&jsa, Beam::Signal)?.fwhm_nm,
        idler_fwhm_nm: marginal_spectrum(&jsa, Beam::Idler)?.fwhm_nm,
    })
}

/// Evaluates `template` at `n` evenly spaced values of `parameter` in
/// `[lo, hi]`. Rows are computed in parallel and returned in parameter order;
/// a failing row carries its error message.
pub fn sweep(
    template: &GaussianSourceModel,
    parameter: SweepParameter,
    range: (f64, f64),
    n: usize,
    grid: GridSpec,
) -> Result<Vec<SweepRow>> {
    let (lo, hi) = range;
    if n < 2 {
        return Err(Error::domain(format!("a sweep needs at least 2 points, got {n}")));
    }
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::domain(format!("invalid sweep range [{lo}, {hi}]")));
    }
    Ok(linspace(lo, hi, n)
        .into_par_iter()
        .map(|value| SweepRow {
            value,
            result: evaluate_model(&parameter.apply(template, value), grid).map_err(|e| e.to_string()),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schmidt::schmidt_number;

    fn coarse() -> GridSpec {
        GridSpec::new(128, 5.0)
    }

    /// Pump width that makes the all-Gaussian JSA separable:
    /// `σφ² = sinθ cosθ σp²`.
    fn analytic_decorrelating_pump(angle_deg: f64, pm_fwhm: f64) -> f64 {
        use crate::spectra::{sigma_to_nm_fwhm, AMPLITUDE_SIGMA_PER_FWHM};
        let (s, c) = angle_deg.to_radians().sin_cos();
        let sigma_p = pm_fwhm * AMPLITUDE_SIGMA_PER_FWHM / (s * c).sqrt();
        sigma_to_nm_fwhm(sigma_p, 768.0)
    }

    #[test]
    fn calibration_matches_signal_target() {
        let template = GaussianSourceModel::new(2.1, 59.0, 1.0).unwrap();
        let cal = calibrate_pm_width(&template, (5.2, 4.0), GridSpec::default()).unwrap();
        assert!((cal.signal_fwhm_nm - 5.2).abs() < 0.05, "{cal:?}");
        let (ps, _) = template.with_pm_fwhm(cal.pm_fwhm).predicted_marginal_sigmas().unwrap();
        let predicted = crate::spectra::sigma_to_nm_fwhm(ps, 1536.0);
        assert!((predicted - 5.2).abs() < 0.02, "{predicted}");
    }

    #[test]
    fn scaling_target_and_pump_scales_width() {
        // widths of the Gaussian model are homogeneous of degree one
        let grid = coarse();
        let a = calibrate_pm_width(&GaussianSourceModel::new(1.0, 59.0, 1.0).unwrap(), (3.0, 3.0), grid).unwrap();
        let b = calibrate_pm_width(&GaussianSourceModel::new(2.0, 59.0, 1.0).unwrap(), (6.0, 6.0), grid).unwrap();
        assert!((b.pm_fwhm / a.pm_fwhm - 2.0).abs() < 0.01, "{} {}", a.pm_fwhm, b.pm_fwhm);
    }

    #[test]
    fn unreachable_target_has_no_bracket() {
        let template = GaussianSourceModel::new(2.1, 59.0, 1.0).unwrap();
        assert!(matches!(
            calibrate_pm_width(&template, (0.001, 4.0), coarse()),
            Err(Error::NoBracket { .. })
        ));
    }

    #[test]
    fn calibration_rejects_out_of_range_angle() {
        let template = GaussianSourceModel::new(2.1, -59.0, 1.0).unwrap();
        assert!(matches!(
            calibrate_pm_width(&template, (5.2, 4.0), coarse()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn optimizer_agrees_with_analytic_separability() {
        let template = GaussianSourceModel::new(1.0, 59.0, 2.0).unwrap();
        let d = find_decorrelating_pump(&template, coarse()).unwrap();
        let expected = analytic_decorrelating_pump(59.0, 2.0);
        assert!((d.pump_fwhm_nm / expected - 1.0).abs() < 0.01, "{} vs {expected}", d.pump_fwhm_nm);
        assert!(d.k_min < 1.001);
        assert!(!d.no_interior_optimum && !d.correlated);
    }

    #[test]
    fn symmetric_point_is_separable() {
        let template = GaussianSourceModel::new(1.0, 45.0, 3.0).unwrap();
        let d = find_decorrelating_pump(&template, coarse()).unwrap();
        assert!((d.k_min - 1.0).abs() < 1e-3);
        let model = template.with_pump_fwhm(d.pump_fwhm_nm);
        let jsa = compose_jsa(&model, &coarse().build(&model).unwrap()).unwrap();
        assert!(jsa.exchange_asymmetry().unwrap() < 1e-9);
    }

    #[test]
    fn negative_slope_stays_correlated() {
        let template = GaussianSourceModel::new(1.0, -59.0, 2.7).unwrap();
        let d = find_decorrelating_pump(&template, coarse()).unwrap();
        assert!(d.k_min > 1.2);
        assert!(d.correlated);
    }

    #[test]
    fn edge_minimum_is_flagged() {
        // separable only for a pump far broader than the bracket allows
        let template = GaussianSourceModel::new(1.0, 59.0, 80.0).unwrap();
        let d = find_decorrelating_pump(&template, coarse()).unwrap();
        assert!(d.no_interior_optimum);
        assert!(PUMP_SEARCH_MAX_NM - d.pump_fwhm_nm < 0.01);
    }

    #[test]
    fn sweep_rows_are_ordered_and_errors_recorded() {
        let template = GaussianSourceModel::new(2.0, 59.0, 2.0).unwrap();
        let rows = sweep(&template, SweepParameter::PmAngle, (-60.0, 60.0), 9, coarse()).unwrap();
        assert_eq!(rows.len(), 9);
        assert!(rows.windows(2).all(|w| w[0].value < w[1].value));
        // -45° is non-normalizable
        assert!(rows[1].result.is_err());
        assert!(rows.iter().filter(|r| r.result.is_ok()).count() == 8);
    }

    #[test]
    fn degenerate_sweep_equals_direct_evaluation() {
        let template = GaussianSourceModel::new(2.0, 59.0, 2.0).unwrap();
        let rows = sweep(&template, SweepParameter::PumpFwhm, (1.5, 1.5), 2, coarse()).unwrap();
        let direct = evaluate_model(&template.with_pump_fwhm(1.5), coarse()).unwrap();
        for r in rows {
            assert_eq!(r.result.unwrap(), direct);
        }
        assert!(sweep(&template, SweepParameter::PumpFwhm, (1.0, 2.0), 1, coarse()).is_err());
    }

    #[test]
    fn sweep_k_matches_schmidt_number() {
        let template = GaussianSourceModel::new(2.0, 59.0, 2.0).unwrap();
        let rows = sweep(&template, SweepParameter::PmFwhm, (1.0, 3.0), 3, coarse()).unwrap();
        for r in rows {
            let model = template.with_pm_fwhm(r.value);
            let jsa = compose_jsa(&model, &coarse().build(&model).unwrap()).unwrap();
            let v = r.result.unwrap();
            assert!((v.k - schmidt_number(&jsa).unwrap()).abs() < 1e-12);
            assert!((v.purity * v.k - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn parameter_names_round_trip() {
        for p in [SweepParameter::PumpFwhm, SweepParameter::PmAngle, SweepParameter::PmFwhm] {
            assert_eq!(p.to_string().parse::<SweepParameter>().unwrap(), p);
        }
        assert!("length".parse::<SweepParameter>().is_err());
    }
}
