//! Experiment configuration: flat `key = value` text, environment overrides
//! and command-line overrides, resolved into a validated [`ExperimentConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use escape_lab::maps::{Farey, Lsv, Rotation, Solenoid};
use escape_lab::tower::SyntheticTower;
use escape_lab::Hole1D;

/// Prefix of environment variables that override config keys, e.g.
/// `ESCAPE_LAB_SAMPLES=1000`.
pub const ENV_PREFIX: &str = "ESCAPE_LAB_";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{origin}: line {line}: {reason}")]
    Syntax {
        origin: String,
        line: usize,
        reason: String,
    },
    #[error("config field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn field_err(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.to_string(),
        reason: reason.into(),
    }
}

const KEYS: &[&str] = &[
    "experiment",
    "system",
    "alpha",
    "theta",
    "theta_c",
    "gamma",
    "beta",
    "hole",
    "disk",
    "hole_mass",
    "samples",
    "horizon",
    "burn_in",
    "seed",
    "fit_window",
    "sampler",
    "base_extra",
    "cells",
    "samples_per_cell",
    "j_max",
    "rate_window",
    "estimator",
    "k",
    "threshold",
    "grid_min",
    "p",
    "observable",
    "tolerance",
    "name",
    "out_dir",
    "workers",
];

/// Unvalidated `key -> value` text, later layers overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut raw = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |reason: String| ConfigError::Syntax {
                origin: origin.to_string(),
                line: i + 1,
                reason,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected `key = value`, found `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(syntax(format!("unknown key `{k}`")));
            }
            if raw.values.insert(k.to_string(), v.to_string()).is_some() {
                return Err(syntax(format!("duplicate key `{k}`")));
            }
        }
        Ok(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(field_err(key, "unknown key"));
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    /// Applies `ESCAPE_LAB_<KEY>` overrides from `vars`.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(
        &mut self,
        vars: I,
    ) -> Result<(), ConfigError> {
        for (name, value) in vars {
            if let Some(key) = name.strip_prefix(ENV_PREFIX) {
                let key = key.to_ascii_lowercase();
                self.set(&key, value)
                    .map_err(|_| field_err(&name, "environment override names no config key"))?;
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Survival,
    Tower,
    Ulam,
    Mld,
    Norms,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Survival => "survival",
            Self::Tower => "tower",
            Self::Ulam => "ulam",
            Self::Mld => "mld",
            Self::Norms => "norms",
        }
    }

    fn parse(s: &str) -> Result<Self, ConfigError> {
        Ok(match s {
            "survival" => Self::Survival,
            "tower" => Self::Tower,
            "ulam" => Self::Ulam,
            "mld" => Self::Mld,
            "norms" => Self::Norms,
            _ => return Err(field_err("experiment", format!("unknown experiment `{s}`"))),
        })
    }
}

/// The dynamical system and its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum System {
    Lsv { alpha: f64 },
    Farey { theta: f64 },
    Solenoid { alpha: f64, theta_c: f64 },
    Rotation { gamma: f64 },
    SyntheticTower { beta: f64 },
}

impl System {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Lsv { .. } => "lsv",
            Self::Farey { .. } => "farey",
            Self::Solenoid { .. } => "solenoid",
            Self::Rotation { .. } => "rotation",
            Self::SyntheticTower { .. } => "synthetic_tower",
        }
    }

    /// Escape exponent predicted by theory, where one is known.
    pub fn predicted_exponent(&self) -> Option<f64> {
        match *self {
            Self::Lsv { alpha } | Self::Solenoid { alpha, .. } => Some(1.0 - 1.0 / alpha),
            Self::Farey { theta } => Some(1.0 - theta),
            Self::SyntheticTower { beta } => Some(1.0 - beta),
            Self::Rotation { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    /// Invariant starts drawn through the first-return tower.
    Tower,
    /// Lebesgue starts followed by `burn_in` steps.
    Lebesgue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Plain,
    RemainingTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// `cos 2πx`.
    Cos2Pi,
    /// Indicator of `(1/2, 1]`.
    RightHalf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub system: System,
    pub hole: Option<Vec<(f64, f64)>>,
    /// Solenoid disk `(re, im, radius)`; `None` is the full disk.
    pub disk: Option<(f64, f64, f64)>,
    pub hole_mass: f64,
    pub samples: u64,
    pub horizon: u64,
    pub burn_in: u64,
    pub seed: u64,
    pub fit_window: (f64, f64),
    pub sampler: SamplerKind,
    pub base_extra: usize,
    pub cells: usize,
    pub samples_per_cell: usize,
    pub j_max: u64,
    pub rate_window: (f64, f64),
    pub estimator: Estimator,
    pub k: Option<f64>,
    pub threshold: Option<f64>,
    pub grid_min: u64,
    pub p: u32,
    pub observable: Observable,
    pub tolerance: f64,
    pub name: String,
    pub out_dir: PathBuf,
    pub workers: Option<usize>,
}

fn parse_num<F: std::str::FromStr>(field: &str, s: &str) -> Result<F, ConfigError> {
    s.trim()
        .parse()
        .map_err(|_| field_err(field, format!("cannot parse `{s}` as a number")))
}

/// Parses `(a,b)`.
fn parse_pair(field: &str, s: &str) -> Result<(f64, f64), ConfigError> {
    let inner = s
        .trim()
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| field_err(field, format!("expected `(a,b)`, found `{s}`")))?;
    let (a, b) = inner
        .split_once(',')
        .ok_or_else(|| field_err(field, format!("expected `(a,b)`, found `{s}`")))?;
    Ok((parse_num(field, a)?, parse_num(field, b)?))
}

/// Parses `(a,b)+(c,d)+...`.
pub fn parse_hole(s: &str) -> Result<Vec<(f64, f64)>, ConfigError> {
    s.split('+').map(|part| parse_pair("hole", part)).collect()
}

pub fn format_hole(intervals: &[(f64, f64)]) -> String {
    intervals
        .iter()
        .map(|(a, b)| format!("({a},{b})"))
        .collect::<Vec<_>>()
        .join("+")
}

fn parse_disk(s: &str) -> Result<Option<(f64, f64, f64)>, ConfigError> {
    if s.trim() == "full" {
        return Ok(None);
    }
    let inner = s
        .trim()
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| field_err("disk", "expected `full` or `(re,im,radius)`"))?;
    let parts: Vec<&str> = inner.split(',').collect();
    if parts.len() != 3 {
        return Err(field_err("disk", "expected `full` or `(re,im,radius)`"));
    }
    Ok(Some((
        parse_num("disk", parts[0])?,
        parse_num("disk", parts[1])?,
        parse_num("disk", parts[2])?,
    )))
}

fn check(ok: bool, field: &str, reason: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(field_err(field, reason))
    }
}

fn model_err(field: &str, e: escape_lab::Error) -> ConfigError {
    field_err(field, e.to_string())
}

impl ExperimentConfig {
    /// Validates a raw configuration, re-checking every model invariant.
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let get = |k: &str| raw.get(k);
        let num = |k: &str| -> Result<Option<f64>, ConfigError> {
            get(k).map(|s| parse_num(k, s)).transpose()
        };
        let int = |k: &str| -> Result<Option<u64>, ConfigError> {
            get(k).map(|s| parse_num(k, s)).transpose()
        };
        let need = |k: &str| -> Result<f64, ConfigError> {
            num(k)?.ok_or_else(|| field_err(k, "required for this system"))
        };

        let experiment = Experiment::parse(
            get("experiment").ok_or_else(|| field_err("experiment", "required"))?,
        )?;
        let system = match get("system").ok_or_else(|| field_err("system", "required"))? {
            "lsv" => {
                let alpha = need("alpha")?;
                Lsv::new(alpha).map_err(|e| model_err("alpha", e))?;
                System::Lsv { alpha }
            }
            "farey" => {
                let theta = need("theta")?;
                Farey::new(theta).map_err(|e| model_err("theta", e))?;
                System::Farey { theta }
            }
            "solenoid" => {
                let (alpha, theta_c) = (need("alpha")?, need("theta_c")?);
                Lsv::new(alpha).map_err(|e| model_err("alpha", e))?;
                Solenoid::new(alpha, theta_c).map_err(|e| model_err("theta_c", e))?;
                System::Solenoid { alpha, theta_c }
            }
            "rotation" => {
                let gamma = match get("gamma") {
                    None | Some("golden") => Rotation::<f64>::golden().gamma(),
                    Some(s) => parse_num("gamma", s)?,
                };
                Rotation::new(gamma).map_err(|e| model_err("gamma", e))?;
                System::Rotation { gamma }
            }
            "synthetic_tower" => {
                let beta = need("beta")?;
                SyntheticTower::new(beta).map_err(|e| model_err("beta", e))?;
                System::SyntheticTower { beta }
            }
            other => return Err(field_err("system", format!("unknown system `{other}`"))),
        };

        let supported = match experiment {
            Experiment::Survival => true,
            Experiment::Tower | Experiment::Ulam | Experiment::Mld => {
                matches!(system, System::Lsv { .. } | System::Farey { .. })
            }
            Experiment::Norms => matches!(
                system,
                System::Lsv { .. } | System::Farey { .. } | System::Rotation { .. }
            ),
        };
        check(
            supported,
            "system",
            &format!(
                "`{}` does not support system `{}`",
                experiment.name(),
                system.name()
            ),
        )?;

        let hole = get("hole").map(parse_hole).transpose()?;
        if let Some(h) = &hole {
            Hole1D::new(h.clone()).map_err(|e| model_err("hole", e))?;
        }
        let needs_hole = !matches!(
            system,
            System::SyntheticTower { .. } | System::Rotation { .. }
        ) && experiment != Experiment::Norms;
        check(
            !needs_hole || hole.is_some(),
            "hole",
            "required for this experiment",
        )?;
        check(
            !(matches!(system, System::Rotation { .. })
                && experiment == Experiment::Survival
                && hole.is_none()),
            "hole",
            "required for this experiment",
        )?;

        let disk = get("disk").map(parse_disk).transpose()?.flatten();
        if let Some((_, _, r)) = disk {
            check(r > 0.0, "disk", "radius must be positive")?;
        }
        check(
            disk.is_none() || matches!(system, System::Solenoid { .. }),
            "disk",
            "only the solenoid takes a disk",
        )?;

        let hole_mass = num("hole_mass")?.unwrap_or(0.1);
        check(
            hole_mass > 0.0 && hole_mass < 1.0,
            "hole_mass",
            "must lie in (0, 1)",
        )?;

        let seed = int("seed")?.ok_or_else(|| field_err("seed", "required"))?;
        let samples = int("samples")?.unwrap_or(100_000);
        check(samples >= 1, "samples", "must be positive")?;
        let horizon = int("horizon")?.unwrap_or(100_000);
        check(horizon >= 10, "horizon", "must be at least 10")?;

        let default_burn_in = match (system, get("sampler")) {
            (System::Solenoid { .. }, _) => 40,
            (_, Some("lebesgue")) => 1_000,
            _ => 0,
        };
        let burn_in = int("burn_in")?.unwrap_or(default_burn_in);

        let default_window = match experiment {
            Experiment::Tower => (1e3, 1e5),
            _ => (1e2, 1e4),
        };
        let fit_window = get("fit_window")
            .map(|s| parse_pair("fit_window", s))
            .transpose()?
            .unwrap_or(default_window);
        check(
            fit_window.0 > 0.0 && fit_window.0 < fit_window.1,
            "fit_window",
            "must satisfy 0 < lo < hi",
        )?;
        match experiment {
            Experiment::Survival | Experiment::Mld => check(
                fit_window.1 <= horizon as f64 / 10.0,
                "fit_window",
                "upper end must be at most horizon / 10",
            )?,
            Experiment::Norms | Experiment::Tower => check(
                fit_window.1 <= horizon as f64,
                "fit_window",
                "upper end must be at most the horizon",
            )?,
            Experiment::Ulam => {}
        }

        let sampler = match get("sampler") {
            None | Some("tower") => SamplerKind::Tower,
            Some("lebesgue") => SamplerKind::Lebesgue,
            Some(s) => {
                return Err(field_err(
                    "sampler",
                    format!("expected `tower` or `lebesgue`, found `{s}`"),
                ))
            }
        };
        check(
            !(sampler == SamplerKind::Tower
                && matches!(
                    system,
                    System::Rotation { .. } | System::SyntheticTower { .. }
                )
                && get("sampler").is_some()),
            "sampler",
            "tower starts need an intermittent interval map",
        )?;

        let base_extra = int("base_extra")?.unwrap_or(0) as usize;
        let cells = int("cells")?.unwrap_or(1024) as usize;
        check(cells >= 2, "cells", "must be at least 2")?;
        let samples_per_cell = int("samples_per_cell")?.unwrap_or(100) as usize;
        check(
            samples_per_cell >= 1,
            "samples_per_cell",
            "must be positive",
        )?;
        let j_max = int("j_max")?.unwrap_or(80);
        check(j_max >= 2, "j_max", "must be at least 2")?;
        let rate_window = get("rate_window")
            .map(|s| parse_pair("rate_window", s))
            .transpose()?
            .unwrap_or((2.0, 30.0));
        check(
            rate_window.0 >= 1.0 && rate_window.0 < rate_window.1 && rate_window.1 <= j_max as f64,
            "rate_window",
            "must satisfy 1 <= lo < hi <= j_max",
        )?;

        let estimator = match get("estimator") {
            None | Some("plain") => Estimator::Plain,
            Some("remaining_time") => Estimator::RemainingTime,
            Some(s) => {
                return Err(field_err(
                    "estimator",
                    format!("expected `plain` or `remaining_time`, found `{s}`"),
                ))
            }
        };
        check(
            estimator == Estimator::Plain || matches!(system, System::SyntheticTower { .. }),
            "estimator",
            "`remaining_time` applies to the synthetic tower only",
        )?;

        let k = num("k")?;
        if let Some(k) = k {
            check(k > 0.0 && k < 1.0, "k", "must lie in (0, 1)")?;
        }
        let threshold = num("threshold")?;
        if let Some(t) = threshold {
            check(t > 0.0, "threshold", "must be positive")?;
        }
        let grid_min = int("grid_min")?.unwrap_or(match experiment {
            Experiment::Norms => 10,
            _ => 100,
        });
        check(
            grid_min >= 1 && grid_min < horizon,
            "grid_min",
            "must lie in [1, horizon)",
        )?;
        let p = int("p")?.unwrap_or(1);
        check((1..=8).contains(&p), "p", "must lie in [1, 8]")?;
        let observable = match get("observable") {
            None if matches!(system, System::Rotation { .. }) => Observable::Cos2Pi,
            None => Observable::RightHalf,
            Some("cos2pi") => Observable::Cos2Pi,
            Some("right_half") => Observable::RightHalf,
            Some(s) => {
                return Err(field_err(
                    "observable",
                    format!("expected `cos2pi` or `right_half`, found `{s}`"),
                ))
            }
        };
        let tolerance = num("tolerance")?.unwrap_or(0.15);
        check(tolerance > 0.0, "tolerance", "must be positive")?;
        let name = get("name").unwrap_or(experiment.name()).to_string();
        check(
            !name.is_empty()
                && name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'),
            "name",
            "must be nonempty and use only letters, digits, `_` and `-`",
        )?;
        let out_dir = PathBuf::from(get("out_dir").unwrap_or("."));
        let workers = int("workers")?.map(|w| w as usize);
        if let Some(w) = workers {
            check(w >= 1, "workers", "must be positive")?;
        }

        Ok(Self {
            experiment,
            system,
            hole,
            disk,
            hole_mass,
            samples,
            horizon,
            burn_in,
            seed,
            fit_window,
            sampler,
            base_extra,
            cells,
            samples_per_cell,
            j_max,
            rate_window,
            estimator,
            k,
            threshold,
            grid_min,
            p: p as u32,
            observable,
            tolerance,
            name,
            out_dir,
            workers,
        })
    }

    pub fn hole_1d(&self) -> Option<Hole1D> {
        self.hole
            .as_ref()
            .map(|h| Hole1D::new(h.clone()).expect("validated at load"))
    }

    /// Every setting that affects results, in config-file syntax. Output
    /// location and worker count are left out since they never change the
    /// numbers.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("experiment", self.experiment.name().into());
        put("system", self.system.name().into());
        match self.system {
            System::Lsv { alpha } => put("alpha", alpha.to_string()),
            System::Farey { theta } => put("theta", theta.to_string()),
            System::Solenoid { alpha, theta_c } => {
                put("alpha", alpha.to_string());
                put("theta_c", theta_c.to_string());
            }
            System::Rotation { gamma } => put("gamma", gamma.to_string()),
            System::SyntheticTower { beta } => put("beta", beta.to_string()),
        }
        if let Some(h) = &self.hole {
            put("hole", format_hole(h));
        }
        if matches!(self.system, System::Solenoid { .. }) {
            put(
                "disk",
                match self.disk {
                    None => "full".into(),
                    Some((re, im, r)) => format!("({re},{im},{r})"),
                },
            );
        }
        if matches!(self.system, System::SyntheticTower { .. }) {
            put("hole_mass", self.hole_mass.to_string());
            put(
                "estimator",
                match self.estimator {
                    Estimator::Plain => "plain",
                    Estimator::RemainingTime => "remaining_time",
                }
                .into(),
            );
        }
        put("samples", self.samples.to_string());
        put("horizon", self.horizon.to_string());
        put("burn_in", self.burn_in.to_string());
        put("seed", self.seed.to_string());
        put(
            "fit_window",
            format!("({},{})", self.fit_window.0, self.fit_window.1),
        );
        put(
            "sampler",
            match self.sampler {
                SamplerKind::Tower => "tower",
                SamplerKind::Lebesgue => "lebesgue",
            }
            .into(),
        );
        put("base_extra", self.base_extra.to_string());
        match self.experiment {
            Experiment::Ulam => {
                put("cells", self.cells.to_string());
                put("samples_per_cell", self.samples_per_cell.to_string());
                put("j_max", self.j_max.to_string());
                put(
                    "rate_window",
                    format!("({},{})", self.rate_window.0, self.rate_window.1),
                );
            }
            Experiment::Mld => {
                put("grid_min", self.grid_min.to_string());
                if let Some(k) = self.k {
                    put("k", k.to_string());
                }
                if let Some(t) = self.threshold {
                    put("threshold", t.to_string());
                }
            }
            Experiment::Norms => {
                put("grid_min", self.grid_min.to_string());
                put("p", self.p.to_string());
                put(
                    "observable",
                    match self.observable {
                        Observable::Cos2Pi => "cos2pi",
                        Observable::RightHalf => "right_half",
                    }
                    .into(),
                );
            }
            _ => {}
        }
        put("tolerance", self.tolerance.to_string());
        put("name", self.name.clone());
        m
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.echo() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
