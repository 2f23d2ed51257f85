//! `bpforge`: simulate and analyze photon-pair sources from the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use bpforge_core::spectra::PhasematchingShape;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{read_config_file, resolve, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "bpforge", version, about = "Photon-pair source simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Joint spectral intensity and marginal spectra.
    Jsa(Plain),
    /// Schmidt decomposition: coefficients, modes, K, purity, g2.
    Schmidt(SchmidtArgs),
    /// Signal-idler HOM interference trace.
    Hom(HomArgs),
    /// Purity from a HOM dip against a Gaussian reference field.
    Homref(HomrefArgs),
    /// Spectrometer-blurred JSI and its Schmidt-number lower bound.
    MeasureJsi(Plain),
    /// g2 from the model, or background correction of a measured g2.
    G2(G2Args),
    /// Decorrelating pump width and optional parameter sweep.
    Optimize(OptimizeArgs),
    /// Fit a Gaussian dip to `delay_ps,counts` data.
    FitDip(FitDipArgs),
    /// Pump energy budget and heralding efficiencies.
    Budget(BudgetArgs),
}

#[derive(Debug, Args, Serialize)]
struct Common {
    /// Flat `key = value` configuration file; flags take precedence.
    #[arg(long, global = true)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Output directory (default: $BPFORGE_OUT, else the working directory).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ModelFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pump_fwhm_nm: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pm_angle_deg: Option<f64>,
    /// Phasematching intensity FWHM (rad/ps); calibrated when omitted.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pm_fwhm: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pm_shape: Option<PhasematchingShape>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda0_s_nm: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda0_i_nm: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda0_p_nm: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    crystal_length_mm: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    poling_period_um: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    target_signal_nm: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    target_idler_nm: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_span: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    jsi_res_nm: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    marginal_res_nm: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct Plain {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelFlags,
}

#[derive(Debug, Args, Serialize)]
struct SchmidtArgs {
    #[command(flatten)]
    #[serde(flatten)]
    base: Plain,
    /// Number of Schmidt modes written per beam.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_modes: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct HomArgs {
    #[command(flatten)]
    #[serde(flatten)]
    base: Plain,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tau_min_ps: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tau_max_ps: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_tau: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct HomrefArgs {
    #[command(flatten)]
    #[serde(flatten)]
    base: Plain,
    /// Measured dip intensity FWHM (ps).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dip_fwhm_ps: Option<f64>,
    /// Reference field FWHM (nm).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    ref_nm: Option<f64>,
    /// Marginal FWHM of the heralded photon (nm).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sig_nm: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct G2Args {
    #[command(flatten)]
    #[serde(flatten)]
    base: Plain,
    /// Background share of all counts.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    background: Option<f64>,
    /// Measured g2 to correct; the model is used when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    g2_measured: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct OptimizeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    base: Plain,
    /// One of pump_fwhm, pm_angle, pm_fwhm.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_param: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_n: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct FitDipArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    /// CSV with header `delay_ps,counts`.
    #[serde(skip)]
    data: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct BudgetArgs {
    #[command(flatten)]
    #[serde(flatten)]
    base: Plain,
    /// Target mean pair number per pulse.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    target_n: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pairs_per_joule: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rep_rate_hz: Option<f64>,
    /// Pulse energy (J) for the high-gain pair number.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pulse_energy_j: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    coincidences: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    singles_s: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    singles_i: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    eta_det_s: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    eta_det_i: Option<f64>,
}

fn configure<T: Serialize>(config: Option<&PathBuf>, flags: &T) -> CliResult<RunConfig> {
    let file = match config {
        Some(path) => read_config_file(path)?,
        None => Map::new(),
    };
    let flags = match serde_json::to_value(flags).expect("flags serialize") {
        Value::Object(m) => m,
        _ => unreachable!("flag structs serialize to objects"),
    };
    resolve(file, flags)
}

fn run(cli: Cli) -> CliResult<PathBuf> {
    match cli.command {
        Command::Jsa(a) => commands::jsa(&configure(a.common.config.as_ref(), &a)?),
        Command::Schmidt(a) => commands::schmidt(&configure(a.base.common.config.as_ref(), &a)?),
        Command::Hom(a) => commands::hom(&configure(a.base.common.config.as_ref(), &a)?),
        Command::Homref(a) => commands::homref(&configure(a.base.common.config.as_ref(), &a)?),
        Command::MeasureJsi(a) => commands::measure_jsi(&configure(a.common.config.as_ref(), &a)?),
        Command::G2(a) => commands::g2(&configure(a.base.common.config.as_ref(), &a)?),
        Command::Optimize(a) => commands::optimize(&configure(a.base.common.config.as_ref(), &a)?),
        Command::FitDip(a) => commands::fit_dip_cmd(&configure(a.common.config.as_ref(), &a)?, &a.data),
        Command::Budget(a) => commands::budget(&configure(a.base.common.config.as_ref(), &a)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(CliError::invalid("").exit_code())
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(report) => {
            println!("{}", report.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("bpforge: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
