use std::fs;
use std::path::{Path, PathBuf};

use bpforge_core::interference::{fit_dip, hom_signal_idler, purity_from_dip, reference_dip_width};
use bpforge_core::measurement::{
    deconvolve_width, g2_background, g2_background_correct, klyshko, mean_n_high_gain, normalized_pair_efficiency,
    pulse_energy_for_mean_n, simulate_jsi_measurement, EfficiencyRecord, MeasuredJsi,
};
use bpforge_core::optimize::{calibrate_pm_width, find_decorrelating_pump, sweep, SweepParameter};
use bpforge_core::schmidt::{g2_from_k, jsi_schmidt_lower_bound, k_from_g2, purity_from_k, schmidt_decompose};
use bpforge_core::spectra::{compose_jsa, marginal_spectrum, Beam, MarginalSpectrum, FWHM_PER_STD};
use bpforge_core::{FrequencyGrid, GaussianSourceModel, GridSpec, JointSpectralAmplitude};
use nalgebra::DMatrix;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{num, OutputDir, Report};

fn require(value: Option<f64>, key: &str) -> CliResult<f64> {
    value.ok_or_else(|| CliError::invalid(format!("missing required value `{key}` (flag --{})", key.replace('_', "-"))))
}

/// Source model with the phasematching width either given or calibrated to
/// the target signal marginal.
fn resolve_model(cfg: &RunConfig, report: &mut Report) -> CliResult<(GaussianSourceModel, GridSpec)> {
    let grid = cfg.grid()?;
    let pm_fwhm = match cfg.pm_fwhm {
        Some(w) => w,
        None => {
            let template = cfg.model(1.0)?;
            let cal = calibrate_pm_width(&template, (cfg.target_signal_nm, cfg.target_idler_nm), grid)?;
            report.model("calibrated_signal_fwhm_nm", cal.signal_fwhm_nm, "nm");
            report.model("calibrated_idler_fwhm_nm", cal.idler_fwhm_nm, "nm");
            report.model("calibration_idler_mismatch", cal.idler_mismatch, "1");
            if cal.idler_mismatch.abs() > 0.05 {
                report.warn(format!(
                    "calibrated idler marginal {:.3} nm differs from the {} nm target by {:.1}%",
                    cal.idler_fwhm_nm,
                    cfg.target_idler_nm,
                    100.0 * cal.idler_mismatch
                ));
            }
            cal.pm_fwhm
        }
    };
    report.model("pm_fwhm", pm_fwhm, "rad/ps");
    Ok((cfg.model(pm_fwhm)?, grid))
}

fn composed(cfg: &RunConfig, report: &mut Report) -> CliResult<JointSpectralAmplitude> {
    let (model, grid) = resolve_model(cfg, report)?;
    let jsa = compose_jsa(&model, &grid.build(&model)?)?;
    if let Some(w) = jsa.boundary_warning() {
        report.warn(w);
    }
    report.model("boundary_ratio", jsa.boundary_ratio(), "1");
    Ok(jsa)
}

fn note_marginal(report: &mut Report, m: &MarginalSpectrum, key: &str) {
    report.model(&format!("{key}_fwhm_nm"), m.fwhm_nm, "nm");
    if m.multi_peak {
        report.warn(format!("{key} marginal has more than two half-maximum crossings; outermost used"));
    }
    if m.truncated {
        report.warn(format!("{key} marginal is above half maximum at the grid edge"));
    }
    report.flag(&format!("{key}_multi_peak"), m.multi_peak);
    report.flag(&format!("{key}_truncated"), m.truncated);
}

/// Matrix CSV: the first row holds the idler wavelengths, the first column
/// the signal wavelengths.
fn write_matrix(out: &mut OutputDir, name: &str, grid: &FrequencyGrid, values: &DMatrix<f64>) -> CliResult<()> {
    let mut header = vec!["lambda_s_nm\\lambda_i_nm".to_owned()];
    header.extend(grid.idler.wavelengths_nm().into_iter().map(num));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = grid.signal.wavelengths_nm().into_iter().enumerate().map(|(r, l)| {
        std::iter::once(num(l))
            .chain(values.row(r).iter().map(|v| num(*v)))
            .collect::<Vec<_>>()
    });
    out.csv(name, &header, rows)
}

fn marginal_rows(m: &MarginalSpectrum) -> impl Iterator<Item = Vec<String>> + '_ {
    let beam = match m.beam {
        Beam::Signal => "signal",
        Beam::Idler => "idler",
    };
    m.axis
        .detunings()
        .iter()
        .zip(m.axis.wavelengths_nm())
        .zip(&m.intensity)
        .map(move |((d, l), i)| vec![beam.to_owned(), num(*d), num(l), num(*i)])
}

const MARGINAL_HEADER: [&str; 4] = ["beam", "detuning_rad_ps", "wavelength_nm", "intensity"];

pub fn jsa(cfg: &RunConfig) -> CliResult<PathBuf> {
    let mut report = Report::new("jsa", cfg.echo());
    let jsa = composed(cfg, &mut report)?;
    let signal = marginal_spectrum(&jsa, Beam::Signal)?;
    let idler = marginal_spectrum(&jsa, Beam::Idler)?;
    note_marginal(&mut report, &signal, "signal");
    note_marginal(&mut report, &idler, "idler");

    let mut out = OutputDir::create(cfg.out_dir(), "jsa")?;
    write_matrix(&mut out, "jsi.csv", jsa.grid(), &jsa.intensity())?;
    out.csv("marginals.csv", &MARGINAL_HEADER, marginal_rows(&signal).chain(marginal_rows(&idler)))?;
    out.report(report)
}

pub fn schmidt(cfg: &RunConfig) -> CliResult<PathBuf> {
    let mut report = Report::new("schmidt", cfg.echo());
    let jsa = composed(cfg, &mut report)?;
    let s = schmidt_decompose(&jsa)?;
    report.model("schmidt_number", s.schmidt_number, "1");
    report.model("purity", s.purity, "1");
    report.model("g2", s.g2, "1");
    report.model("rank", s.coefficients.len() as f64, "1");

    let mut out = OutputDir::create(cfg.out_dir(), "schmidt")?;
    out.csv(
        "coefficients.csv",
        &["k", "coefficient", "weight"],
        s.coefficients
            .iter()
            .enumerate()
            .map(|(k, c)| vec![k.to_string(), num(*c), num(c * c)]),
    )?;
    let n_modes = cfg.n_modes.min(s.coefficients.len());
    let mut rows = Vec::new();
    for (beam, modes) in [("signal", &s.signal_modes), ("idler", &s.idler_modes)] {
        for (k, mode) in modes.iter().take(n_modes).enumerate() {
            let wl = mode.axis.wavelengths_nm();
            for ((d, l), v) in mode.axis.detunings().iter().zip(wl).zip(&mode.values) {
                rows.push(vec![beam.to_owned(), k.to_string(), num(*d), num(l), num(v.re), num(v.im)]);
            }
        }
    }
    out.csv(
        "modes.csv",
        &["beam", "k", "detuning_rad_ps", "wavelength_nm", "re", "im"],
        rows,
    )?;
    out.report(report)
}

pub fn hom(cfg: &RunConfig) -> CliResult<PathBuf> {
    let mut report = Report::new("hom", cfg.echo());
    let jsa = composed(cfg, &mut report)?;
    let trace = hom_signal_idler(&jsa, (cfg.tau_min_ps, cfg.tau_max_ps), cfg.n_tau, true)?;
    report.model("visibility", trace.visibility, "1");
    match trace.dip_fwhm_ps {
        Some(w) => report.model("dip_fwhm_ps", w, "ps"),
        None => report.warn("dip half-depth crossings lie outside the delay window; no dip width reported"),
    }

    let mut out = OutputDir::create(cfg.out_dir(), "hom")?;
    out.csv(
        "trace.csv",
        &["delay_ps", "coincidence_probability"],
        trace
            .delays_ps
            .iter()
            .zip(&trace.probability)
            .map(|(t, p)| vec![num(*t), num(*p)]),
    )?;
    out.report(report)
}

pub fn homref(cfg: &RunConfig) -> CliResult<PathBuf> {
    let mut report = Report::new("homref", cfg.echo());
    let dip = require(cfg.dip_fwhm_ps, "dip_fwhm_ps")?;
    let ref_nm = require(cfg.ref_nm, "ref_nm")?;
    let sig_nm = require(cfg.sig_nm, "sig_nm")?;
    let p = purity_from_dip(dip, ref_nm, sig_nm, cfg.lambda0_s_nm)?;
    report.data("purity", p.purity, "1");
    report.data("sigma2_rad_ps", p.sigma2, "rad/ps");
    report.data("sigma1_rad_ps", p.sigma1, "rad/ps");
    report.data("sigma_beta_rad_ps", p.sigma_beta, "rad/ps");
    let forward = reference_dip_width(p.purity * p.sigma1, p.sigma_beta)? * FWHM_PER_STD;
    report.data("forward_dip_fwhm_ps", forward, "ps");
    report.flag("purity_clamped", p.clamped);
    if p.clamped {
        report.warn("inferred minor axis exceeds the marginal width; purity clamped to 1");
    }
    OutputDir::create(cfg.out_dir(), "homref")?.report(report)
}

pub fn measure_jsi(cfg: &RunConfig) -> CliResult<PathBuf> {
    let mut report = Report::new("measure-jsi", cfg.echo());
    let res = cfg.resolution()?;
    let jsa = composed(cfg, &mut report)?;
    let measured: MeasuredJsi = simulate_jsi_measurement(&jsa, &res)?;
    report.model("lower_bound_schmidt_number", jsi_schmidt_lower_bound(&measured.values)?, "1");
    report.model("schmidt_number", schmidt_decompose(&jsa)?.schmidt_number, "1");
    for (beam, key) in [(Beam::Signal, "signal"), (Beam::Idler, "idler")] {
        let seen = measured.marginal(beam)?;
        report.model(&format!("measured_{key}_fwhm_nm"), seen.fwhm_nm, "nm");
        match deconvolve_width(seen.fwhm_nm, res.jsi_res_nm) {
            Ok(w) => report.model(&format!("deconvolved_{key}_fwhm_nm"), w, "nm"),
            Err(e) => report.warn(format!("{key}: {e}")),
        }
    }

    let mut out = OutputDir::create(cfg.out_dir(), "measure_jsi")?;
    write_matrix(&mut out, "jsi.csv", &measured.grid, &measured.values)?;
    out.report(report)
}

pub fn g2(cfg: &RunConfig) -> CliResult<PathBuf> {
    let mut report = Report::new("g2", cfg.echo());
    match cfg.g2_measured {
        Some(g) => {
            let c = g2_background_correct(g, cfg.background)?;
            report.data("g2_corrected", c.g2_true, "1");
            report.flag("model_inconsistent", c.model_inconsistent);
            if c.model_inconsistent {
                report.warn("background-corrected g2 is below 1; the thermal-plus-Poisson model does not fit");
            } else {
                match k_from_g2(c.g2_true) {
                    Ok(k) => {
                        report.data("schmidt_number", k, "1");
                        report.data("purity", purity_from_k(k)?, "1");
                    }
                    Err(e) => report.warn(e.to_string()),
                }
            }
        }
        None => {
            let jsa = composed(cfg, &mut report)?;
            let k = schmidt_decompose(&jsa)?.schmidt_number;
            let g = g2_from_k(k)?;
            report.model("schmidt_number", k, "1");
            report.model("g2", g, "1");
            report.model("g2_with_background", g2_background(g, cfg.background)?, "1");
        }
    }
    OutputDir::create(cfg.out_dir(), "g2")?.report(report)
}

pub fn optimize(cfg: &RunConfig) -> CliResult<PathBuf> {
    let mut report = Report::new("optimize", cfg.echo());
    let (model, grid) = resolve_model(cfg, &mut report)?;
    let d = find_decorrelating_pump(&model, grid)?;
    report.model("decorrelating_pump_fwhm_nm", d.pump_fwhm_nm, "nm");
    report.model("k_min", d.k_min, "1");
    report.flag("no_interior_optimum", d.no_interior_optimum);
    report.flag("correlated", d.correlated);
    if d.no_interior_optimum {
        report.warn("no interior optimum: the minimum lies at the edge of the pump search bracket");
    }
    if d.correlated {
        report.warn(format!("no pump width decorrelates this source (K_min = {:.4})", d.k_min));
    }

    let mut out = OutputDir::create(cfg.out_dir(), "optimize")?;
    if let Some(name) = &cfg.sweep_param {
        let parameter: SweepParameter = name.parse()?;
        let range = (require(cfg.sweep_min, "sweep_min")?, require(cfg.sweep_max, "sweep_max")?);
        let rows = sweep(&model, parameter, range, cfg.sweep_n, grid)?;
        let failed = rows.iter().filter(|r| r.result.is_err()).count();
        if failed > 0 {
            report.warn(format!("{failed} sweep rows failed; see the error column"));
        }
        let nan = || "NaN".to_owned();
        out.csv(
            "sweep.csv",
            &[
                &parameter.to_string(),
                "k",
                "purity",
                "g2",
                "visibility",
                "signal_fwhm_nm",
                "idler_fwhm_nm",
                "error",
            ],
            rows.into_iter().map(|r| match r.result {
                Ok(v) => vec![
                    num(r.value),
                    num(v.k),
                    num(v.purity),
                    num(v.g2),
                    num(v.visibility),
                    num(v.signal_fwhm_nm),
                    num(v.idler_fwhm_nm),
                    String::new(),
                ],
                Err(e) => {
                    let mut row = vec![num(r.value)];
                    row.extend(std::iter::repeat_with(nan).take(6));
                    row.push(e);
                    row
                }
            }),
        )?;
    }
    out.report(report)
}

/// Reads `delay_ps,counts` rows.
pub fn read_dip_data(path: &Path) -> CliResult<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::invalid(format!("{}: missing column `{name}`", path.display())))
    };
    let (ct, cc) = (col("delay_ps")?, col("counts")?);
    let mut data = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
        let field = |c: usize| -> CliResult<f64> {
            let raw = record.get(c).unwrap_or("");
            raw.parse().map_err(|_| {
                CliError::invalid(format!("{}: row {}: `{raw}` is not a number", path.display(), k + 2))
            })
        };
        data.push((field(ct)?, field(cc)?));
    }
    Ok(data)
}

pub fn fit_dip_cmd(cfg: &RunConfig, data_path: &Path) -> CliResult<PathBuf> {
    let mut inputs = cfg.echo();
    inputs.insert("data".into(), data_path.display().to_string().into());
    let mut report = Report::new("fit-dip", inputs);
    let data = read_dip_data(data_path)?;
    let fit = fit_dip(&data)?;
    let p = fit.params;
    report.data("baseline", p.baseline, "counts");
    report.data("visibility", p.visibility, "1");
    report.data("center_ps", p.center_ps, "ps");
    report.data("width_ps", p.width_ps, "ps");
    report.data("dip_fwhm_ps", fit.fwhm_ps, "ps");
    report.data("residual_norm", fit.residual_norm, "counts");
    report.data("iterations", fit.iterations as f64, "1");
    if let Some(se) = fit.standard_errors() {
        let names = [("baseline", "counts"), ("visibility", "1"), ("center_ps", "ps"), ("width_ps", "ps")];
        for ((key, unit), v) in names.into_iter().zip(se) {
            report.data(&format!("{key}_stderr"), v, unit);
        }
    }
    report.flag("visibility_out_of_range", fit.visibility_out_of_range);
    if fit.visibility_out_of_range {
        report.warn(format!("fitted visibility {:.4} lies outside [0, 1.05]", p.visibility));
    }

    let mut out = OutputDir::create(cfg.out_dir(), "fit_dip")?;
    out.csv(
        "curve.csv",
        &["delay_ps", "counts", "fit", "residual"],
        data.iter().map(|&(t, c)| {
            let f = p.eval(t);
            vec![num(t), num(c), num(f), num(c - f)]
        }),
    )?;
    out.report(report)
}

pub fn budget(cfg: &RunConfig) -> CliResult<PathBuf> {
    let mut report = Report::new("budget", cfg.echo());
    let b = cfg.brightness()?;
    let pulse = pulse_energy_for_mean_n(cfg.target_n, &b)?;
    report.model("pulse_energy_j", pulse.pulse_energy_j, "J");
    report.model("cw_power_w", pulse.cw_power_w, "W");
    report.flag("high_gain", pulse.high_gain);
    if pulse.high_gain {
        report.warn(format!(
            "target mean pair number {} is outside the low-gain regime; single-mode gain scaling used",
            cfg.target_n
        ));
    }
    report.model(
        "pairs_per_joule_per_metre",
        normalized_pair_efficiency(b.pairs_per_joule, b.crystal_length_mm)?,
        "1/(J m)",
    );
    if let Some(e) = cfg.pulse_energy_j {
        report.model("mean_n_high_gain", mean_n_high_gain(e, &b)?, "1");
    }
    match (cfg.coincidences, cfg.singles_s, cfg.singles_i) {
        (Some(coincidences), Some(singles_s), Some(singles_i)) => {
            let k = klyshko(&EfficiencyRecord {
                coincidences,
                singles_s,
                singles_i,
                eta_det_s: cfg.eta_det_s,
                eta_det_i: cfg.eta_det_i,
            })?;
            report.data("eta_s", k.eta_s, "1");
            report.data("eta_i", k.eta_i, "1");
            report.data("eta_s_corrected", k.eta_s_corrected, "1");
            report.data("eta_i_corrected", k.eta_i_corrected, "1");
        }
        (None, None, None) => {}
        _ => {
            return Err(CliError::invalid(
                "heralding efficiencies need coincidences, singles_s and singles_i together",
            ))
        }
    }
    OutputDir::create(cfg.out_dir(), "budget")?.report(report)
}
