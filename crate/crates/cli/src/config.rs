//! TOML run configuration. Every table rejects unknown keys; relative paths
//! resolve against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use sdwave_core::dispersion::ExponentConvention;
use sdwave_core::model::{BirthFunction, DelayFunction, ModelSpec, Monotonicity};
use sdwave_core::pdesim::{Boundary, ComparisonParams, Dynamics, HistoryMode, InitialDatum, SimConfig};
use sdwave_core::profile::SolverMode;

use crate::report::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelSection>,
    pub dispersion: Option<DispersionSection>,
    pub profile: Option<ProfileSection>,
    pub pde: Option<PdeSection>,
    pub comparison: Option<ComparisonSection>,
    pub sweep: Option<SweepSection>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub d: f64,
    pub birth: BirthSection,
    pub delay: DelaySection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BirthSection {
    Ricker { p: f64 },
    Tabulated { table_path: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelaySection {
    Constant {
        m: f64,
    },
    SaturatingRational {
        m: f64,
        #[serde(rename = "M")]
        big_m: f64,
    },
    SaturatingExponential {
        m: f64,
        #[serde(rename = "M")]
        big_m: f64,
    },
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Exponent {
    #[serde(rename = "lambda_cm")]
    LambdaCM,
    LambdaM,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSection {
    pub tol: Option<f64>,
    pub exponent: Option<Exponent>,
    /// speeds for the roots and beta tables
    pub speeds: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModeChoice {
    #[default]
    Auto,
    Monotone,
    Nonmonotone,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub c: Option<f64>,
    pub critical: Option<bool>,
    pub mode: Option<ModeChoice>,
    pub h: Option<f64>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub damping: Option<f64>,
    pub xi_min: Option<f64>,
    pub xi_max: Option<f64>,
    /// `verify` fails above this residual
    pub residual_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSection {
    Step { location: f64, low: f64, high: f64 },
    Profile { path: PathBuf, offset: f64 },
    Table { path: PathBuf },
    Bump { center: f64, half_width: f64, height: f64 },
    Constant { value: f64 },
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryChoice {
    #[default]
    Neumann,
    Dirichlet,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum HistoryChoice {
    #[default]
    FrozenInitial,
    Translate,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub nx: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub boundary: Option<BoundaryChoice>,
    pub boundary_values: Option<[f64; 2]>,
    pub initial: Option<InitialSection>,
    pub history: Option<HistoryChoice>,
    pub history_speed: Option<f64>,
    pub snapshot_every: Option<f64>,
    pub snapshot_times: Option<Vec<f64>>,
    pub history_stride: Option<usize>,
    pub track_interval: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonSection {
    #[serde(rename = "D1")]
    pub d1: f64,
    #[serde(rename = "D2")]
    pub d2: f64,
    #[serde(rename = "D3")]
    pub d3: f64,
    pub m: f64,
    /// probe cone as a fraction of the spreading speed
    pub probe_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub p: Vec<f64>,
    pub m: Vec<f64>,
    /// defaults to `M = m` (constant delay)
    #[serde(rename = "M")]
    pub big_m: Option<Vec<f64>>,
    pub d: Option<f64>,
    /// profile speed as a multiple of `c*`
    pub speed_factor: Option<f64>,
}

/// Parsed config with its source directory and digest.
#[derive(Debug, Clone, Default)]
pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
    pub digest: Option<String>,
}

pub fn load(path: Option<&Path>) -> Result<Loaded, CliError> {
    let Some(path) = path else {
        return Ok(Loaded { base: PathBuf::from("."), ..Default::default() });
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let config: RunConfig =
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let digest = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    Ok(Loaded { config, base, digest: Some(digest) })
}

impl Loaded {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn model(&self) -> Result<ModelSpec, CliError> {
        let sec = self.config.model.as_ref().ok_or_else(|| CliError::config("missing [model] section"))?;
        build_model(sec, self)
    }

    pub fn exponent(&self) -> ExponentConvention {
        match self.config.dispersion.as_ref().and_then(|d| d.exponent) {
            Some(Exponent::LambdaM) => ExponentConvention::LambdaM,
            _ => ExponentConvention::LambdaCM,
        }
    }

    pub fn profile(&self) -> ProfileSection {
        self.config.profile.clone().unwrap_or_default()
    }

    pub fn comparison(&self) -> Result<ComparisonParams, CliError> {
        let sec = self.config.comparison.as_ref().ok_or_else(|| CliError::config("missing [comparison] section"))?;
        ComparisonParams::new(sec.d1, sec.d2, sec.d3, sec.m).map_err(CliError::from)
    }

    /// `[pde]` resolved against the documented defaults; `front_high` fills
    /// the default step datum.
    pub fn sim_config(&self, dynamics: &Dynamics, front_high: f64) -> Result<SimConfig, CliError> {
        let sec = self.config.pde.clone().unwrap_or_default();
        sim_config_from(&sec, self, dynamics, front_high)
    }
}

pub fn build_model(sec: &ModelSection, loaded: &Loaded) -> Result<ModelSpec, CliError> {
    let birth = match &sec.birth {
        BirthSection::Ricker { p } => BirthFunction::ricker(*p)?,
        BirthSection::Tabulated { table_path } => {
            let (u, b) = read_two_columns(&loaded.resolve(table_path), ("u", "b"))?;
            BirthFunction::tabulated(u, b)?
        }
    };
    let delay = match sec.delay {
        DelaySection::Constant { m } => DelayFunction::Constant { m },
        DelaySection::SaturatingRational { m, big_m } => DelayFunction::SaturatingRational { m, big_m },
        DelaySection::SaturatingExponential { m, big_m } => DelayFunction::SaturatingExponential { m, big_m },
    };
    Ok(ModelSpec::new(sec.d, birth, delay.new_checked()?)?)
}

/// Monotone mode when `b` is nondecreasing on `[0, K]`.
pub fn solver_mode(choice: ModeChoice, model: &ModelSpec) -> SolverMode {
    match choice {
        ModeChoice::Monotone => SolverMode::Monotone,
        ModeChoice::Nonmonotone => SolverMode::Nonmonotone,
        ModeChoice::Auto => {
            let report = sdwave_core::model::validate_hypotheses(model, Monotonicity::Monotone);
            if report.all_hold() {
                SolverMode::Monotone
            } else {
                SolverMode::Nonmonotone
            }
        }
    }
}

pub const DEFAULT_DOMAIN: (f64, f64) = (-50.0, 350.0);
pub const DEFAULT_NX: usize = 2000;
pub const DEFAULT_T_END: f64 = 80.0;
pub const DEFAULT_SNAPSHOT_EVERY: f64 = 1.0;

fn sim_config_from(sec: &PdeSection, loaded: &Loaded, dynamics: &Dynamics, front_high: f64) -> Result<SimConfig, CliError> {
    let x_min = sec.x_min.unwrap_or(DEFAULT_DOMAIN.0);
    let x_max = sec.x_max.unwrap_or(DEFAULT_DOMAIN.1);
    let nx = sec.nx.unwrap_or(DEFAULT_NX);
    let t_end = sec.t_end.unwrap_or(DEFAULT_T_END);
    if nx < 5 || !(x_max > x_min) {
        return Err(CliError::config("[pde] needs nx >= 5 and x_max > x_min"));
    }
    let mut cfg = SimConfig::step_run(dynamics, x_min, x_max, nx, t_end, 0.0, front_high);
    if let Some(dt) = sec.dt {
        cfg.dt = dt;
    }
    cfg.boundary = match (sec.boundary.unwrap_or_default(), sec.boundary_values) {
        (BoundaryChoice::Neumann, None) => Boundary::Neumann,
        (BoundaryChoice::Dirichlet, Some([left, right])) => Boundary::Dirichlet { left, right },
        (BoundaryChoice::Neumann, Some(_)) => {
            return Err(CliError::config("boundary_values given with a Neumann boundary"))
        }
        (BoundaryChoice::Dirichlet, None) => return Err(CliError::config("dirichlet boundary needs boundary_values")),
    };
    if let Some(init) = &sec.initial {
        cfg.initial = match init {
            InitialSection::Step { location, low, high } => {
                InitialDatum::Step { location: *location, low: *low, high: *high }
            }
            InitialSection::Profile { path, offset } => {
                let (xs, vs) = read_two_columns(&loaded.resolve(path), ("xi", "phi"))?;
                let grid = sdwave_core::profile::ProfileGrid::from_samples(&xs, vs)?;
                InitialDatum::Profile { grid, offset: *offset }
            }
            InitialSection::Table { path } => {
                let (xs, us) = read_two_columns(&loaded.resolve(path), ("x", "u"))?;
                InitialDatum::Table { xs, us }
            }
            InitialSection::Bump { center, half_width, height } => {
                InitialDatum::Bump { center: *center, half_width: *half_width, height: *height }
            }
            InitialSection::Constant { value } => InitialDatum::Constant(*value),
        };
    }
    cfg.history = match (sec.history.unwrap_or_default(), sec.history_speed) {
        (HistoryChoice::FrozenInitial, None) => HistoryMode::FrozenInitial,
        (HistoryChoice::Translate, Some(c)) => HistoryMode::TranslateWithSpeed(c),
        (HistoryChoice::FrozenInitial, Some(_)) => {
            return Err(CliError::config("history_speed given with a frozen history"))
        }
        (HistoryChoice::Translate, None) => return Err(CliError::config("translate history needs history_speed")),
    };
    cfg.snapshot_times = match (&sec.snapshot_times, sec.snapshot_every) {
        (Some(_), Some(_)) => return Err(CliError::config("give snapshot_times or snapshot_every, not both")),
        (Some(ts), None) => ts.clone(),
        (None, every) => {
            let every = every.unwrap_or(DEFAULT_SNAPSHOT_EVERY);
            if !(every > 0.0) {
                return Err(CliError::config("snapshot_every must be positive"));
            }
            let n = (t_end / every + 1e-9).floor() as usize;
            (0..=n).map(|k| k as f64 * every).collect()
        }
    };
    if let Some(s) = sec.history_stride {
        cfg.history_stride = s;
    }
    if let Some(t) = sec.track_interval {
        cfg.track_interval = t;
    }
    Ok(cfg)
}

/// Reads a CSV with the given two-column header.
pub fn read_two_columns(path: &Path, header: (&str, &str)) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines.next().unwrap_or_default();
    let names: Vec<&str> = head.split(',').map(str::trim).collect();
    if names != [header.0, header.1] {
        return Err(CliError::config(format!(
            "{}: expected header `{},{}`, found `{head}`",
            path.display(),
            header.0,
            header.1
        )));
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (k, line) in lines.enumerate() {
        let mut parts = line.split(',').map(str::trim);
        let parse = |s: Option<&str>| s.and_then(|s| s.parse::<f64>().ok());
        match (parse(parts.next()), parse(parts.next()), parts.next()) {
            (Some(x), Some(y), None) => {
                a.push(x);
                b.push(y);
            }
            _ => return Err(CliError::config(format!("{}: malformed row {}: `{line}`", path.display(), k + 2))),
        }
    }
    Ok((a, b))
}
