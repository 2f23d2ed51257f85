//! Small scalar numerics shared by the modules: uniform sampling, bracketing
//! root finding, golden-section minimization and half-maximum widths.

use crate::error::{Error, Result};

/// `n` uniformly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|k| if k == n - 1 { hi } else { lo + step * k as f64 })
                .collect()
        }
    }
}

/// Bisection for a sign change of `f` in `[lo, hi]`.
///
/// Stops once the bracket is narrower than `rel_tol` relative to its midpoint.
/// The search runs in `log(x)` when `log_scale` is set, which requires a
/// positive bracket.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, rel_tol: f64, log_scale: bool) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if log_scale && lo <= 0.0 {
        return Err(Error::domain("log-scale bisection needs a positive bracket"));
    }
    let identity: fn(f64) -> f64 = |x| x;
    let (to, from) = if log_scale {
        (f64::ln as fn(f64) -> f64, f64::exp as fn(f64) -> f64)
    } else {
        (identity, identity)
    };

    let mut a = to(lo);
    let mut b = to(hi);
    let mut fa = f(lo)?;
    let fb = f(hi)?;
    if fa == 0.0 {
        return Ok(lo);
    }
    if fb == 0.0 {
        return Ok(hi);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoBracket {
            lo,
            hi,
            what: format!("no sign change (f(lo) = {fa:.6e}, f(hi) = {fb:.6e})"),
        });
    }

    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let (xa, xb) = (from(a), from(b));
        if (xb - xa).abs() <= rel_tol * 0.5 * (xa + xb).abs() {
            break;
        }
        let fm = f(from(m))?;
        if fm == 0.0 {
            return Ok(from(m));
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(from(0.5 * (a + b)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Golden-section minimization of a unimodal `f` on `[lo, hi]` to absolute
/// tolerance `tol` in `x`.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<Minimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut evaluations = 2;

    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        evaluations += 1;
    }

    let (x, value) = if fc < fd { (c, fc) } else { (d, fd) };
    Ok(Minimum {
        x,
        value,
        evaluations,
    })
}

/// Width of a sampled profile at a given level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelCrossing {
    pub left: f64,
    pub right: f64,
    /// More than two crossings were found; `left`/`right` are the outermost.
    pub multiple: bool,
    /// The profile stays above the level at a boundary of the sample range.
    pub truncated: bool,
}

impl LevelCrossing {
    pub fn width(&self) -> f64 {
        self.right - self.left
    }
}

/// Full width at half maximum of a peaked profile, by linear interpolation of
/// the half-maximum crossings.
pub fn half_max_width(x: &[f64], y: &[f64]) -> Option<LevelCrossing> {
    let peak = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return None;
    }
    level_crossings(x, y, 0.5 * peak)
}

/// Outermost crossings of `level` by a profile whose maximum lies above it.
pub fn level_crossings(x: &[f64], y: &[f64], level: f64) -> Option<LevelCrossing> {
    assert_eq!(x.len(), y.len());
    let n = y.len();
    if n < 2 {
        return None;
    }
    let above: Vec<bool> = y.iter().map(|&v| v >= level).collect();
    let first = above.iter().position(|&a| a)?;
    let last = above.iter().rposition(|&a| a)?;

    let interp = |i: usize, j: usize| {
        let t = (level - y[i]) / (y[j] - y[i]);
        x[i] + t * (x[j] - x[i])
    };
    let left = if first == 0 { x[0] } else { interp(first - 1, first) };
    let right = if last == n - 1 {
        x[n - 1]
    } else {
        interp(last, last + 1)
    };
    let transitions = above.windows(2).filter(|w| w[0] != w[1]).count();

    Some(LevelCrossing {
        left,
        right,
        multiple: transitions > 2,
        truncated: first == 0 || last == n - 1,
    })
}
