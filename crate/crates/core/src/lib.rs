//! Simulation and analysis of spectrally engineered parametric down-conversion
//! (PDC) photon-pair sources.
//!
//! The crate is organized around the joint spectral amplitude (JSA) of a pair
//! source:
//!
//! - [`spectra`]: unit conversions, frequency grids, pump and phasematching
//!   functions and JSA composition.
//! - [`schmidt`]: Schmidt decomposition, Schmidt number, purity, `g2(0)` and
//!   reduced density matrices.
//! - [`interference`]: Hong-Ou-Mandel (HOM) traces, reference-field dip width
//!   and Gaussian dip fitting.
//! - [`measurement`]: finite-resolution spectrometer models, background
//!   corrected `g2`, Klyshko efficiencies and brightness budgets.
//! - [`optimize`]: phasematching calibration, decorrelating pump search and
//!   parameter sweeps.
//!
//! # Conventions
//!
//! User-facing widths are intensity FWHM in nanometres. Internally every `σ`
//! is the standard deviation of an *amplitude* Gaussian `exp(-ν²/(2σ²))`, with
//! detunings in rad/ps and delays in ps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod interference;
pub mod measurement;
pub mod numeric;
pub mod optimize;
pub mod schmidt;
pub mod spectra;

pub use error::{Error, Result};
pub use spectra::{
    Axis, FrequencyGrid, GaussianSourceModel, GridSpec, JointSpectralAmplitude, PhasematchingShape,
    SpectralAmplitude,
};
