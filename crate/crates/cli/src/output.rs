use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Computed from the source model.
    Model,
    /// Derived from measured numbers supplied by the user.
    Data,
}

#[derive(Debug, Clone, Serialize)]
pub struct Scalar {
    pub value: f64,
    pub unit: &'static str,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize)]
pub struct Conventions {
    pub widths: &'static str,
    pub sigma: &'static str,
    pub detuning_units: &'static str,
    pub delay_units: &'static str,
    pub conversion: &'static str,
}

const CONVENTIONS: Conventions = Conventions {
    widths: "all widths in nm are intensity FWHM",
    sigma: "sigma is the standard deviation of an amplitude Gaussian exp(-nu^2/(2 sigma^2)); intensity FWHM = 2 sqrt(ln 2) sigma",
    detuning_units: "rad/ps, relative to the central frequency of each beam",
    delay_units: "ps",
    conversion: "FWHM_omega = 2 pi c FWHM_lambda / lambda0^2 with c = 299792.458 nm/ps",
};

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub inputs: Map<String, Value>,
    pub results: BTreeMap<String, Scalar>,
    pub flags: BTreeMap<String, bool>,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
    pub conventions: Conventions,
}

impl Report {
    pub fn new(command: &'static str, inputs: Map<String, Value>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            inputs,
            results: BTreeMap::new(),
            flags: BTreeMap::new(),
            warnings: Vec::new(),
            files: Vec::new(),
            conventions: CONVENTIONS,
        }
    }

    pub fn model(&mut self, key: &str, value: f64, unit: &'static str) {
        self.insert(key, value, unit, Provenance::Model);
    }

    pub fn data(&mut self, key: &str, value: f64, unit: &'static str) {
        self.insert(key, value, unit, Provenance::Data);
    }

    fn insert(&mut self, key: &str, value: f64, unit: &'static str, provenance: Provenance) {
        self.results.insert(
            key.to_owned(),
            Scalar {
                value,
                unit,
                provenance,
            },
        );
    }

    pub fn flag(&mut self, key: &str, set: bool) {
        self.flags.insert(key.to_owned(), set);
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }
}

/// Writes CSV files and the report into one output directory.
pub struct OutputDir {
    root: PathBuf,
    prefix: &'static str,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: PathBuf, prefix: &'static str) -> CliResult<Self> {
        fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Self {
            root,
            prefix,
            written: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> (String, PathBuf) {
        let file = format!("{}_{name}", self.prefix);
        let path = self.root.join(&file);
        (file, path)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
        let (file, path) = self.path(name);
        let io = |e: csv::Error| match e.into_kind() {
            csv::ErrorKind::Io(e) => CliError::io(&path, e),
            other => CliError::invalid(format!("{}: {other:?}", path.display())),
        };
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(io)?;
        w.write_record(header).map_err(io)?;
        for row in rows {
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.written.push(file);
        Ok(())
    }

    /// Writes the report, listing every file written before it.
    pub fn report(mut self, mut report: Report) -> CliResult<PathBuf> {
        let (file, path) = self.path("report.json");
        self.written.push(file);
        report.files = self.written;
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// Shortest decimal representation that reads back to the same `f64`;
/// exponent notation outside `[1e-4, 1e16)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::num;

    #[test]
    fn numbers_round_trip() {
        for v in [0.0, 0.1, 1.0 / 3.0, 33.333e-12, 3e9, 1e300, -2.5e-7, 5.2] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(3.3e-11), "3.3e-11");
        assert_eq!(num(5.2), "5.2");
    }
}
