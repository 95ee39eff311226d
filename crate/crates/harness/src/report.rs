//! Run reports and their on-disk form.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use escape_lab::stats::{PowerLawFit, RateFit};
use escape_lab::text::sig17;
use serde::Serialize;

/// A power-law fit as written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub exponent: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub n_samples: u64,
    pub seed: Option<u64>,
}

impl FitRecord {
    pub fn new(fit: &PowerLawFit, n_samples: u64, seed: Option<u64>) -> Self {
        Self {
            exponent: fit.exponent,
            intercept: fit.intercept,
            stderr: fit.stderr,
            window: fit.window,
            r_squared: fit.r_squared,
            n_samples,
            seed,
        }
    }
}

/// An exponential-rate fit as written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRecord {
    pub rate: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub n_samples: u64,
    pub seed: Option<u64>,
}

impl RateRecord {
    pub fn new(fit: &RateFit, n_samples: u64, seed: Option<u64>) -> Self {
        Self {
            rate: fit.rate,
            intercept: fit.intercept,
            stderr: fit.stderr,
            window: fit.window,
            r_squared: fit.r_squared,
            n_samples,
            seed,
        }
    }
}

/// A file produced by a run, held in memory until [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub role: String,
    pub file_name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub experiment: String,
    pub system: String,
    pub name: String,
    pub config: BTreeMap<String, String>,
    /// Output role to file name, relative to the output directory.
    pub outputs: BTreeMap<String, String>,
    pub fits: Vec<FitRecord>,
    /// What each entry of `fits` was fitted to.
    pub fit_labels: Vec<String>,
    pub rate_fits: Vec<RateRecord>,
    pub rate_fit_labels: Vec<String>,
    pub diagnostics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Whether the first fit lies within `tolerance` of the prediction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
    #[serde(skip)]
    pub artifacts: Vec<Artifact>,
    /// Kept out of the JSON so reruns stay byte-identical.
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl RunReport {
    pub fn new(
        experiment: &str,
        system: &str,
        name: &str,
        config: BTreeMap<String, String>,
    ) -> Self {
        Self {
            experiment: experiment.into(),
            system: system.into(),
            name: name.into(),
            config,
            outputs: BTreeMap::new(),
            fits: Vec::new(),
            fit_labels: Vec::new(),
            rate_fits: Vec::new(),
            rate_fit_labels: Vec::new(),
            diagnostics: BTreeMap::new(),
            predicted_exponent: None,
            tolerance: None,
            pass: None,
            artifacts: Vec::new(),
            wall_clock: Duration::ZERO,
        }
    }

    pub fn add_fit(&mut self, label: &str, fit: FitRecord) {
        self.fits.push(fit);
        self.fit_labels.push(label.into());
    }

    pub fn add_rate_fit(&mut self, label: &str, fit: RateRecord) {
        self.rate_fits.push(fit);
        self.rate_fit_labels.push(label.into());
    }

    pub fn add_artifact(&mut self, role: &str, suffix: &str, contents: String) {
        let file_name = format!("{}_{suffix}", self.name);
        self.outputs.insert(role.into(), file_name.clone());
        self.artifacts.push(Artifact {
            role: role.into(),
            file_name,
            contents,
        });
    }

    pub fn json_file_name(&self) -> String {
        format!("{}.json", self.name)
    }

    /// Sets the prediction and judges the first fit against it.
    pub fn judge(&mut self, predicted: Option<f64>, tolerance: f64) {
        self.predicted_exponent = predicted;
        if let (Some(p), Some(f)) = (predicted, self.fits.first()) {
            self.tolerance = Some(tolerance);
            self.pass = Some((f.exponent - p).abs() <= tolerance);
        }
    }

    pub fn fit(&self, label: &str) -> Option<&FitRecord> {
        self.fit_labels
            .iter()
            .position(|l| l == label)
            .map(|i| &self.fits[i])
    }

    pub fn rate_fit(&self, label: &str) -> Option<&RateRecord> {
        self.rate_fit_labels
            .iter()
            .position(|l| l == label)
            .map(|i| &self.rate_fits[i])
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

/// Pretty-printed JSON with floats written to 17 significant digits.
struct Sig17Formatter(serde_json::ser::PrettyFormatter<'static>);

macro_rules! delegate {
    ($($name:ident $(($arg:ident: $ty:ty))?),* $(,)?) => {
        $(fn $name<W: ?Sized + Write>(&mut self, writer: &mut W $(, $arg: $ty)?) -> io::Result<()> {
            self.0.$name(writer $(, $arg)?)
        })*
    };
}

impl serde_json::ser::Formatter for Sig17Formatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(sig17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    delegate!(
        begin_array,
        end_array,
        begin_array_value(first: bool),
        end_array_value,
        begin_object,
        end_object,
        begin_object_key(first: bool),
        begin_object_value,
        end_object_value,
    );
}

/// Serializes with sorted keys, 17-digit floats and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    // Going through `Value` sorts object keys.
    let value = serde_json::to_value(value).expect("report serializes");
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut out,
        Sig17Formatter(serde_json::ser::PrettyFormatter::new()),
    );
    value.serialize(&mut ser).expect("in-memory write");
    out.push(b'\n');
    String::from_utf8(out).expect("JSON is UTF-8")
}

#[derive(Debug, thiserror::Error)]
#[error("{}: {source}", path.display())]
pub struct EmitError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), EmitError> {
    let err = |source| EmitError {
        path: path.to_path_buf(),
        source,
    };
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(contents.as_bytes()).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

/// Writes every artifact and then the JSON report into `out_dir`; returns
/// the JSON path.
pub fn emit_report(report: &RunReport, out_dir: &Path) -> Result<PathBuf, EmitError> {
    std::fs::create_dir_all(out_dir).map_err(|source| EmitError {
        path: out_dir.to_path_buf(),
        source,
    })?;
    for a in &report.artifacts {
        write_atomic(&out_dir.join(&a.file_name), &a.contents)?;
    }
    let path = out_dir.join(report.json_file_name());
    write_atomic(&path, &report.to_json())?;
    Ok(path)
}
