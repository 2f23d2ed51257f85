use thiserror::Error;

use crate::interference::DipParameters;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the validity domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty JSA: pump and phasematching product vanishes on the grid")]
    EmptyJsa,

    #[error("grid axes differ between signal and idler; enable resampling")]
    NonSquareGrid,

    #[error("dip narrower than reference-limited width ({dip_fwhm_ps} ps <= {limit_fwhm_ps} ps)")]
    DipBelowReferenceLimit { dip_fwhm_ps: f64, limit_fwhm_ps: f64 },

    #[error("resolution-limited: measured width {measured_nm} nm <= resolution {resolution_nm} nm")]
    ResolutionLimited { measured_nm: f64, resolution_nm: f64 },

    #[error("blur kernel FWHM {kernel} rad/ps exceeds grid span {span} rad/ps")]
    KernelTooWide { kernel: f64, span: f64 },

    #[error("inconsistent counts: efficiency {0} exceeds 1")]
    InconsistentCounts(f64),

    #[error("no bracket found in [{lo}, {hi}]: {what}")]
    NoBracket { lo: f64, hi: f64, what: String },

    #[error("dip fit did not converge after {iterations} iterations")]
    FitNotConverged {
        iterations: usize,
        last: DipParameters,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
