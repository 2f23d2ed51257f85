use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::FWHM_PER_STD;

pub const MIN_DIP_POINTS: usize = 8;
const MAX_ITERATIONS: usize = 200;
const STEP_TOLERANCE: f64 = 1e-8;
/// Largest fitted visibility accepted without a flag.
const VISIBILITY_FLAG_MAX: f64 = 1.05;

/// Parameters of `c(τ) = B (1 − V exp(−(τ−τ₀)²/(2δ²)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipParameters {
    pub baseline: f64,
    pub visibility: f64,
    pub center_ps: f64,
    /// Standard deviation δ of the Gaussian dip (ps).
    pub width_ps: f64,
}

impl DipParameters {
    pub fn eval(&self, tau: f64) -> f64 {
        let x = (tau - self.center_ps) / self.width_ps;
        self.baseline * (1.0 - self.visibility * (-0.5 * x * x).exp())
    }

    fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.baseline, self.visibility, self.center_ps, self.width_ps)
    }

    fn from_vector(v: &Vector4<f64>) -> Self {
        Self {
            baseline: v[0],
            visibility: v[1],
            center_ps: v[2],
            width_ps: v[3],
        }
    }

    pub fn fwhm_ps(&self) -> f64 {
        FWHM_PER_STD * self.width_ps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipFit {
    pub params: DipParameters,
    pub fwhm_ps: f64,
    /// Parameter covariance `s² (JᵀJ)⁻¹` in the order (B, V, τ₀, δ); `None`
    /// when the normal matrix is singular or there are no degrees of freedom.
    pub covariance: Option<[[f64; 4]; 4]>,
    /// `‖c(τ) − data‖₂`
    pub residual_norm: f64,
    pub iterations: usize,
    /// Fitted visibility outside `[0, 1.05]`.
    pub visibility_out_of_range: bool,
}

impl DipFit {
    pub fn standard_errors(&self) -> Option<[f64; 4]> {
        self.covariance
            .map(|c| [c[0][0].sqrt(), c[1][1].sqrt(), c[2][2].sqrt(), c[3][3].sqrt()])
    }
}

/// Levenberg-Marquardt fit of a Gaussian dip on a flat baseline to
/// `(delay_ps, counts)` samples.
pub fn fit_dip(data: &[(f64, f64)]) -> Result<DipFit> {
    if data.len() < MIN_DIP_POINTS {
        return Err(Error::domain(format!(
            "dip fit needs at least {MIN_DIP_POINTS} points, got {}",
            data.len()
        )));
    }
    if data.iter().any(|(t, c)| !t.is_finite() || !c.is_finite()) {
        return Err(Error::domain("dip data contains non-finite values"));
    }
    let mut pts = data.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let span = pts[pts.len() - 1].0 - pts[0].0;
    if !(span > 0.0) {
        return Err(Error::domain("dip delays are all equal"));
    }

    let mut p = initial_guess(&pts, span).to_vector();
    let mut cost = cost_of(&pts, &p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = normal_equations(&pts, &p);
        let mut accepted = None;
        for _ in 0..40 {
            let mut damped = jtj;
            for k in 0..4 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            if trial[3] > 0.0 {
                let trial_cost = cost_of(&pts, &trial);
                if trial_cost <= cost {
                    accepted = Some((trial, trial_cost, step));
                    break;
                }
            }
            lambda *= 10.0;
        }
        let Some((trial, trial_cost, step)) = accepted else {
            // no downhill step at any damping: at the minimum to rounding
            converged = true;
            break;
        };
        p = trial;
        cost = trial_cost;
        lambda = (lambda * 0.1).max(1e-15);
        let relative = (0..4)
            .map(|k| step[k].abs() / p[k].abs().max(1e-12))
            .fold(0.0, f64::max);
        if relative < STEP_TOLERANCE || cost == 0.0 {
            converged = true;
            break;
        }
    }

    let params = DipParameters::from_vector(&p);
    if !converged {
        return Err(Error::FitNotConverged {
            iterations,
            last: params,
        });
    }

    let (jtj, _) = normal_equations(&pts, &p);
    let dof = pts.len().saturating_sub(4);
    let covariance = (dof > 0)
        .then(|| jtj.try_inverse())
        .flatten()
        .map(|inv| {
            let s2 = 2.0 * cost / dof as f64;
            let m = inv * s2;
            let mut out = [[0.0; 4]; 4];
            for (r, row) in out.iter_mut().enumerate() {
                for (c, v) in row.iter_mut().enumerate() {
                    *v = m[(r, c)];
                }
            }
            out
        });

    Ok(DipFit {
        fwhm_ps: params.fwhm_ps(),
        visibility_out_of_range: !(0.0..=VISIBILITY_FLAG_MAX).contains(&params.visibility),
        params,
        covariance,
        residual_norm: (2.0 * cost).sqrt(),
        iterations,
    })
}

/// Baseline from the outer 20% of points, center at the minimum, visibility
/// from the depth, and δ as half the delay span below half depth.
fn initial_guess(pts: &[(f64, f64)], span: f64) -> DipParameters {
    let n = pts.len();
    let outer = ((n as f64 * 0.1).round() as usize).max(1);
    let outer_sum: f64 = pts[..outer].iter().chain(&pts[n - outer..]).map(|p| p.1).sum();
    let baseline = outer_sum / (2 * outer) as f64;
    let (center, min) = pts
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let visibility = if baseline != 0.0 { 1.0 - min / baseline } else { 0.0 };
    let half_depth = baseline * (1.0 - 0.5 * visibility);
    let below: Vec<f64> = pts.iter().filter(|p| p.1 <= half_depth).map(|p| p.0).collect();
    let spacing = span / (n - 1) as f64;
    let width = match (below.first(), below.last()) {
        (Some(a), Some(b)) if b > a => 0.5 * (b - a),
        _ => spacing,
    };
    DipParameters {
        baseline,
        visibility,
        center_ps: center,
        width_ps: width.max(spacing * 1e-3),
    }
}

/// Half the residual sum of squares.
fn cost_of(pts: &[(f64, f64)], p: &Vector4<f64>) -> f64 {
    let model = DipParameters::from_vector(p);
    0.5 * pts.iter().map(|(t, y)| (model.eval(*t) - y).powi(2)).sum::<f64>()
}

fn normal_equations(pts: &[(f64, f64)], p: &Vector4<f64>) -> (Matrix4<f64>, Vector4<f64>) {
    let (b, v, t0, d) = (p[0], p[1], p[2], p[3]);
    let mut jtj = Matrix4::zeros();
    let mut jtr = Vector4::zeros();
    for &(t, y) in pts {
        let x = t - t0;
        let g = (-0.5 * x * x / (d * d)).exp();
        let model = b * (1.0 - v * g);
        let j = Vector4::new(
            1.0 - v * g,
            -b * g,
            -b * v * g * x / (d * d),
            -b * v * g * x * x / (d * d * d),
        );
        jtj += j * j.transpose();
        jtr += j * (model - y);
    }
    (jtj, jtr)
}
