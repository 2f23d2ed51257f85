//! Run configuration: a flat `key = value` file merged with command-line
//! flags, then checked against the known keys.

use std::fs;
use std::path::{Path, PathBuf};

use bpforge_core::measurement::{BrightnessModel, ResolutionModel};
use bpforge_core::spectra::{GaussianSourceModel, PhasematchingShape};
use bpforge_core::GridSpec;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub const OUT_ENV: &str = "BPFORGE_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pump_fwhm_nm: f64,
    pub pm_angle_deg: f64,
    /// Phasematching intensity FWHM (rad/ps); calibrated to the target
    /// marginals when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pm_fwhm: Option<f64>,
    pub pm_shape: PhasematchingShape,
    pub lambda0_s_nm: f64,
    pub lambda0_i_nm: f64,
    pub lambda0_p_nm: f64,
    pub crystal_length_mm: f64,
    pub poling_period_um: f64,
    pub target_signal_nm: f64,
    pub target_idler_nm: f64,

    pub grid_n: usize,
    pub grid_span: f64,
    pub jsi_res_nm: f64,
    pub marginal_res_nm: f64,

    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,

    pub n_modes: usize,
    pub tau_min_ps: f64,
    pub tau_max_ps: f64,
    pub n_tau: usize,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub dip_fwhm_ps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ref_nm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sig_nm: Option<f64>,

    pub background: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2_measured: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_param: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_max: Option<f64>,
    pub sweep_n: usize,

    pub target_n: f64,
    pub pairs_per_joule: f64,
    pub rep_rate_hz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulse_energy_j: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coincidences: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub singles_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub singles_i: Option<f64>,
    pub eta_det_s: f64,
    pub eta_det_i: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = GaussianSourceModel::new(2.1, 59.0, 1.0).expect("default model is valid");
        let res = ResolutionModel::default();
        let grid = GridSpec::default();
        let brightness = BrightnessModel::default();
        Self {
            pump_fwhm_nm: model.pump_fwhm_nm,
            pm_angle_deg: model.pm_angle_deg,
            pm_fwhm: None,
            pm_shape: model.pm_shape,
            lambda0_s_nm: model.lambda0_s_nm,
            lambda0_i_nm: model.lambda0_i_nm,
            lambda0_p_nm: model.lambda0_p_nm,
            crystal_length_mm: model.crystal_length_mm,
            poling_period_um: model.poling_period_um,
            target_signal_nm: 5.2,
            target_idler_nm: 4.0,
            grid_n: grid.n,
            grid_span: grid.span_sigmas,
            jsi_res_nm: res.jsi_res_nm,
            marginal_res_nm: res.marginal_res_nm,
            out: None,
            n_modes: 5,
            tau_min_ps: -3.0,
            tau_max_ps: 3.0,
            n_tau: 241,
            dip_fwhm_ps: None,
            ref_nm: None,
            sig_nm: None,
            background: 0.0,
            g2_measured: None,
            sweep_param: None,
            sweep_min: None,
            sweep_max: None,
            sweep_n: 41,
            target_n: 0.1,
            pairs_per_joule: brightness.pairs_per_joule,
            rep_rate_hz: brightness.rep_rate_hz,
            pulse_energy_j: None,
            coincidences: None,
            singles_s: None,
            singles_i: None,
            eta_det_s: 1.0,
            eta_det_i: 1.0,
        }
    }
}

impl RunConfig {
    /// Model with `pm_fwhm` taken as given; callers resolve a missing width
    /// by calibration first.
    pub fn model(&self, pm_fwhm: f64) -> CliResult<GaussianSourceModel> {
        let model = GaussianSourceModel {
            pump_fwhm_nm: self.pump_fwhm_nm,
            pm_angle_deg: self.pm_angle_deg,
            pm_fwhm,
            pm_shape: self.pm_shape,
            lambda0_s_nm: self.lambda0_s_nm,
            lambda0_i_nm: self.lambda0_i_nm,
            lambda0_p_nm: self.lambda0_p_nm,
            crystal_length_mm: self.crystal_length_mm,
            poling_period_um: self.poling_period_um,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn grid(&self) -> CliResult<GridSpec> {
        if self.grid_n < bpforge_core::spectra::MIN_GRID_POINTS {
            return Err(CliError::invalid(format!(
                "grid_n must be at least {}, got {}",
                bpforge_core::spectra::MIN_GRID_POINTS,
                self.grid_n
            )));
        }
        if !(self.grid_span > 0.0) {
            return Err(CliError::invalid(format!("grid_span must be positive, got {}", self.grid_span)));
        }
        Ok(GridSpec::new(self.grid_n, self.grid_span))
    }

    pub fn resolution(&self) -> CliResult<ResolutionModel> {
        Ok(ResolutionModel::new(self.jsi_res_nm, self.marginal_res_nm)?)
    }

    pub fn brightness(&self) -> CliResult<BrightnessModel> {
        let b = BrightnessModel {
            pairs_per_joule: self.pairs_per_joule,
            rep_rate_hz: self.rep_rate_hz,
            crystal_length_mm: self.crystal_length_mm,
        };
        b.validate()?;
        Ok(b)
    }

    /// Output directory: flag or config key, then `BPFORGE_OUT`, then the
    /// working directory.
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    /// The echo stored in reports: every key that influences results.
    pub fn echo(&self) -> Map<String, Value> {
        match serde_json::to_value(self).expect("config serializes") {
            Value::Object(m) => m,
            _ => unreachable!("RunConfig serializes to an object"),
        }
    }
}

/// Typed scalar from a config-file value: booleans and numbers are
/// recognized, anything else stays a string.
fn scalar(raw: &str) -> Value {
    let s = raw.trim();
    let unquoted = s
        .strip_prefix('"')
        .and_then(|t| t.strip_suffix('"'))
        .map(str::to_owned);
    if let Some(text) = unquoted {
        return Value::String(text);
    }
    match s {
        "true" => return Value::Bool(true),
        "false" => return Value::Bool(false),
        _ => {}
    }
    if let Ok(u) = s.parse::<u64>() {
        return Value::from(u);
    }
    if let Ok(i) = s.parse::<i64>() {
        return Value::from(i);
    }
    match s.parse::<f64>() {
        Ok(f) if f.is_finite() => Value::from(f),
        _ => Value::String(s.to_owned()),
    }
}

pub fn parse_config_text(text: &str, origin: &str) -> CliResult<Map<String, Value>> {
    let mut map = Map::new();
    for (lineno, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| {
            CliError::invalid(format!("{origin}:{}: expected `key = value`, got `{content}`", lineno + 1))
        })?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(CliError::invalid(format!("{origin}:{}: invalid key `{key}`", lineno + 1)));
        }
        if map.insert(key.to_owned(), scalar(value)).is_some() {
            return Err(CliError::invalid(format!("{origin}:{}: duplicate key `{key}`", lineno + 1)));
        }
    }
    Ok(map)
}

pub fn read_config_file(path: &Path) -> CliResult<Map<String, Value>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config_text(&text, &path.display().to_string())
}

/// Builds the run configuration from file values overridden by flags. Errors
/// name the offending key.
pub fn resolve(file: Map<String, Value>, flags: Map<String, Value>) -> CliResult<RunConfig> {
    let mut merged = file;
    merged.extend(flags);
    serde_json::from_value(Value::Object(merged.clone())).map_err(|e| {
        let culprit = merged.iter().find(|(k, v)| {
            let single: Map<String, Value> = [((*k).clone(), (*v).clone())].into_iter().collect();
            serde_json::from_value::<RunConfig>(Value::Object(single)).is_err()
        });
        match culprit {
            Some((key, value)) if RunConfig::knows(key) => {
                CliError::invalid(format!("invalid value {value} for config key `{key}`: {e}"))
            }
            Some((key, _)) => CliError::invalid(format!("unknown config key `{key}`")),
            None => CliError::invalid(format!("invalid configuration: {e}")),
        }
    })
}

impl RunConfig {
    fn knows(key: &str) -> bool {
        key == "out" || RunConfig::default().echo().contains_key(key) || OPTIONAL_KEYS.contains(&key)
    }
}

/// Keys that are absent from the echo unless set.
const OPTIONAL_KEYS: &[&str] = &[
    "pm_fwhm",
    "dip_fwhm_ps",
    "ref_nm",
    "sig_nm",
    "g2_measured",
    "sweep_param",
    "sweep_min",
    "sweep_max",
    "pulse_energy_j",
    "coincidences",
    "singles_s",
    "singles_i",
];
