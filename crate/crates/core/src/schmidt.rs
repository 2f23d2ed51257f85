//! Schmidt decomposition of a JSA and the figures of merit derived from it.
//!
//! The discretized JSA is weighted by `√(Δνs Δνi)` before the SVD so that the
//! singular values approximate the continuum Schmidt coefficients `c_k` and
//! the mode functions are orthonormal in the `Σ φ* ψ Δν` inner product.

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{Axis, Beam, JointSpectralAmplitude, SpectralAmplitude};

/// Schmidt coefficients below this are treated as numerical noise.
pub const RANK_CUTOFF: f64 = 1e-12;

const SVD_MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtResult {
    /// Non-negative, descending, `Σ c² = 1`.
    pub coefficients: Vec<f64>,
    pub signal_modes: Vec<SpectralAmplitude>,
    pub idler_modes: Vec<SpectralAmplitude>,
    pub schmidt_number: f64,
    pub purity: f64,
    pub g2: f64,
}

impl SchmidtResult {
    /// `Σ c_k φ_k(νs) ψ_k(νi)` on the JSA grid.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let ns = self.signal_modes.first().map_or(0, |m| m.values.len());
        let ni = self.idler_modes.first().map_or(0, |m| m.values.len());
        let mut out = DMatrix::zeros(ns, ni);
        for ((c, phi), psi) in self.coefficients.iter().zip(&self.signal_modes).zip(&self.idler_modes) {
            for col in 0..ni {
                let b = psi.values[col] * *c;
                for row in 0..ns {
                    out[(row, col)] += phi.values[row] * b;
                }
            }
        }
        out
    }
}

/// Singular values of the quadrature-weighted JSA, descending, normalized to
/// `Σ c² = 1` and truncated at [`RANK_CUTOFF`].
pub fn schmidt_coefficients(jsa: &JointSpectralAmplitude) -> Result<Vec<f64>> {
    let w = jsa.grid().cell_area().sqrt();
    let raw = if jsa.is_real() {
        singular_values_real(jsa.values().map(|v| v.re * w))?
    } else {
        to_faer(jsa.values(), w)
            .singular_values()
            .map_err(|e| Error::Numeric(format!("SVD did not converge: {e:?}")))?
    };
    normalize_coefficients(raw)
}

/// `K = 1 / Σ c⁴`.
pub fn schmidt_number(jsa: &JointSpectralAmplitude) -> Result<f64> {
    Ok(number_from_coefficients(&schmidt_coefficients(jsa)?))
}

pub fn number_from_coefficients(c: &[f64]) -> f64 {
    1.0 / c.iter().map(|v| v.powi(4)).sum::<f64>()
}

pub fn schmidt_decompose(jsa: &JointSpectralAmplitude) -> Result<SchmidtResult> {
    let grid = jsa.grid();
    let (ds, di) = (grid.signal.step(), grid.idler.step());
    let w = (ds * di).sqrt();

    // (singular value, left vector, right vector as row of Vᴴ)
    let triplets: Vec<(f64, Vec<Complex64>, Vec<Complex64>)> = if jsa.is_real() {
        let svd = jsa
            .values()
            .map(|v| v.re * w)
            .try_svd(true, true, f64::EPSILON, SVD_MAX_ITERATIONS)
            .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        svd.singular_values
            .iter()
            .enumerate()
            .map(|(k, &s)| {
                (
                    s,
                    u.column(k).iter().map(|&x| Complex64::new(x, 0.0)).collect(),
                    vt.row(k).iter().map(|&x| Complex64::new(x, 0.0)).collect(),
                )
            })
            .collect()
    } else {
        let svd = to_faer(jsa.values(), w)
            .thin_svd()
            .map_err(|e| Error::Numeric(format!("SVD did not converge: {e:?}")))?;
        let (s, u, v) = (svd.S(), svd.U(), svd.V());
        (0..s.dim())
            .map(|k| {
                (
                    s[k].re,
                    u.col(k).iter().copied().collect(),
                    v.col(k).iter().map(|x| x.conj()).collect(),
                )
            })
            .collect()
    };

    let mut triplets = triplets;
    triplets.sort_by(|a, b| b.0.total_cmp(&a.0));
    let total: f64 = triplets.iter().map(|t| t.0 * t.0).sum::<f64>().sqrt();
    if !(total > 0.0) {
        return Err(Error::EmptyJsa);
    }

    let mut coefficients = Vec::new();
    let mut signal_modes = Vec::new();
    let mut idler_modes = Vec::new();
    let (sa, ia) = (ds.sqrt().recip(), di.sqrt().recip());
    for (s, u, v) in triplets {
        let c = s / total;
        if c < RANK_CUTOFF {
            break;
        }
        coefficients.push(c);
        signal_modes.push(SpectralAmplitude {
            axis: grid.signal.clone(),
            values: u.into_iter().map(|x| x * sa).collect(),
        });
        idler_modes.push(SpectralAmplitude {
            axis: grid.idler.clone(),
            values: v.into_iter().map(|x| x * ia).collect(),
        });
    }
    // renormalize after the cutoff
    let kept: f64 = coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
    coefficients.iter_mut().for_each(|c| *c /= kept);

    let schmidt_number = number_from_coefficients(&coefficients);
    Ok(SchmidtResult {
        purity: purity_from_k(schmidt_number)?,
        g2: g2_from_k(schmidt_number)?,
        schmidt_number,
        coefficients,
        signal_modes,
        idler_modes,
    })
}

fn to_faer(m: &DMatrix<Complex64>, w: f64) -> faer::Mat<Complex64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * w)
}

fn singular_values_real(m: DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(m.try_svd(false, false, f64::EPSILON, SVD_MAX_ITERATIONS)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?
        .singular_values
        .iter()
        .copied()
        .collect())
}

fn normalize_coefficients(mut raw: Vec<f64>) -> Result<Vec<f64>> {
    raw.sort_by(|a, b| b.total_cmp(a));
    let total = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::EmptyJsa);
    }
    let mut c: Vec<f64> = raw.into_iter().map(|v| v / total).take_while(|&v| v >= RANK_CUTOFF).collect();
    let kept = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    c.iter_mut().for_each(|v| *v /= kept);
    Ok(c)
}

// K is 1/Σc⁴ with Σc² = 1, so it can only dip below 1 by rounding.
const K_ROUNDING: f64 = 1e-9;

/// Heralded-state purity `P = 1/K`.
pub fn purity_from_k(k: f64) -> Result<f64> {
    check_k(k)?;
    Ok((1.0 / k).min(1.0))
}

/// Marginal `g2(0) = 1 + 1/K`.
pub fn g2_from_k(k: f64) -> Result<f64> {
    check_k(k)?;
    Ok(1.0 + (1.0 / k).min(1.0))
}

/// Inverse of [`g2_from_k`]: `K = 1/(g2 − 1)` for `1 < g2 ≤ 2`.
pub fn k_from_g2(g2: f64) -> Result<f64> {
    if !(g2 > 1.0 && g2 <= 2.0) {
        return Err(Error::domain(format!(
            "g2 = {g2} lies outside (1, 2]; background contamination or statistics beyond a pure PDC marginal"
        )));
    }
    Ok(1.0 / (g2 - 1.0))
}

fn check_k(k: f64) -> Result<()> {
    if !(k >= 1.0 - K_ROUNDING) || k.is_nan() {
        return Err(Error::domain(format!("Schmidt number must be >= 1, got {k}")));
    }
    Ok(())
}

/// Schmidt number of `√jsi`, i.e. assuming a flat spectral phase. The JSI
/// cannot see phase correlations, so this is a lower bound on the true `K`.
pub fn jsi_schmidt_lower_bound(jsi: &DMatrix<f64>) -> Result<f64> {
    if jsi.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("JSI contains non-finite values"));
    }
    if let Some(v) = jsi.iter().find(|v| **v < 0.0) {
        return Err(Error::domain(format!("JSI has a negative entry ({v})")));
    }
    let c = normalize_coefficients(singular_values_real(jsi.map(f64::sqrt))?)?;
    Ok(number_from_coefficients(&c))
}

/// Major and minor amplitude σ of a Gaussian reduced density matrix, taken
/// along the diagonal and anti-diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianAxes {
    pub major: f64,
    pub minor: f64,
}

impl GaussianAxes {
    /// `Tr ρ² = σ₂/σ₁` for a Gaussian state.
    pub fn purity(&self) -> f64 {
        self.minor / self.major
    }
}

/// Reduced density matrix kernel `ρ(ν, ν′)` of one beam, with `Σ ρ(ν,ν) Δν = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensityMatrix {
    pub beam: Beam,
    pub axis: Axis,
    pub values: DMatrix<Complex64>,
    pub gaussian_axes: Option<GaussianAxes>,
    /// A Gaussian fit was requested and diverged.
    pub fit_failed: bool,
}

impl ReducedDensityMatrix {
    pub fn trace(&self) -> f64 {
        self.values.diagonal().iter().map(|v| v.re).sum::<f64>() * self.axis.step()
    }

    /// `Tr ρ² = Σ |ρ(ν,ν′)|² Δν²` (ρ is Hermitian).
    pub fn purity(&self) -> f64 {
        let d = self.axis.step();
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * d * d
    }

    /// `‖ρ − ρ†‖` in the grid L² norm.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.axis.step();
        let diff = &self.values - self.values.adjoint();
        diff.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() * d
    }

    /// Fits `ln|ρ|` with a parabola along the diagonal and the anti-diagonal
    /// through the axis origin.
    pub fn fit_gaussian_axes(&self) -> Result<GaussianAxes> {
        if !self.axis.is_symmetric() {
            return Err(Error::Numeric("Gaussian axis fit needs a grid symmetric about zero".into()));
        }
        let n = self.axis.len();
        let nu = self.axis.detunings();
        let diag: Vec<f64> = (0..n).map(|k| self.values[(k, k)].norm()).collect();
        let anti: Vec<f64> = (0..n).map(|k| self.values[(k, n - 1 - k)].norm()).collect();
        let major = fit_log_parabola(nu, &diag)?;
        let minor = fit_log_parabola(nu, &anti)?;
        let (major, minor) = if minor > major { (minor, major) } else { (major, minor) };
        Ok(GaussianAxes { major, minor })
    }
}

/// σ of `exp(-x²/σ²)` from a least-squares parabola through `ln y`.
fn fit_log_parabola(x: &[f64], y: &[f64]) -> Result<f64> {
    let peak = y.iter().copied().fold(0.0, f64::max);
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    let mut used = 0;
    for (&xi, &yi) in x.iter().zip(y) {
        if yi <= 1e-6 * peak {
            continue;
        }
        let row = Vector3::new(1.0, xi, xi * xi);
        ata += row * row.transpose();
        atb += row * yi.ln();
        used += 1;
    }
    if used < 3 {
        return Err(Error::Numeric("too few points above threshold for a Gaussian fit".into()));
    }
    let coef = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::Numeric("singular Gaussian fit".into()))?;
    if !(coef[2] < 0.0) {
        return Err(Error::Numeric("Gaussian fit diverged (non-negative curvature)".into()));
    }
    Ok((-coef[2]).sqrt().recip())
}

/// Traces out the other beam: `ρ(ν, ν′) = Σ f(ν, ·) f*(ν′, ·) Δν_other`.
/// With `fit_axes` set, also fits the Gaussian major/minor axes; a diverging
/// fit leaves `gaussian_axes` empty and sets `fit_failed`.
pub fn reduced_density_matrix(jsa: &JointSpectralAmplitude, beam: Beam, fit_axes: bool) -> ReducedDensityMatrix {
    let f = jsa.values();
    let grid = jsa.grid();
    let (axis, values) = match beam {
        Beam::Signal => (grid.signal.clone(), f * f.adjoint() * Complex64::new(grid.idler.step(), 0.0)),
        Beam::Idler => (
            grid.idler.clone(),
            f.transpose() * f.conjugate() * Complex64::new(grid.signal.step(), 0.0),
        ),
    };
    let mut rdm = ReducedDensityMatrix {
        beam,
        axis,
        values,
        gaussian_axes: None,
        fit_failed: false,
    };
    if fit_axes {
        match rdm.fit_gaussian_axes() {
            Ok(a) => rdm.gaussian_axes = Some(a),
            Err(_) => rdm.fit_failed = true,
        }
    }
    rdm
}
