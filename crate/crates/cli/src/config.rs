//! Job configuration: a versioned JSON document, optionally overridden from
//! the command line.

use std::path::{Path, PathBuf};

use eqm::endpoint::SolverOptions;
use eqm::regime::RegimeOptions;
use eqm::trace::TraceSettings;
use eqm::{EndpointSet, Potential, C64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scan::ScanSpec;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Solve,
    Classify,
    Graph,
    Scan,
}

/// `V(z) = z^{2p}/2p + sum_j t_j z^j / j` with `t` as `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub p: usize,
    pub t: Vec<[f64; 2]>,
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Potential, ConfigError> {
        let t = self.t.iter().map(|[re, im]| C64::new(*re, *im)).collect();
        Potential::new(self.p, t).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Auto {
    Auto,
}

/// A fixed cut count or `"auto"` (classify first).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QSpec {
    Fixed(usize),
    Auto(Auto),
}

impl Default for QSpec {
    fn default() -> Self {
        QSpec::Auto(Auto::Auto)
    }
}

impl std::str::FromStr for QSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(QSpec::Auto(Auto::Auto));
        }
        s.parse().map(QSpec::Fixed).map_err(|_| format!("expected a cut count or \"auto\", got {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedKeyword {
    /// Closed forms, continuation and multistart.
    Symmetric,
    /// Nearest entries of the seed cache first.
    Cache,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSeed {
    pub a: Vec<[f64; 2]>,
    pub b: Vec<[f64; 2]>,
}

impl ExplicitSeed {
    pub fn build(&self) -> Result<EndpointSet, ConfigError> {
        let pts = |v: &[[f64; 2]]| v.iter().map(|[re, im]| C64::new(*re, *im)).collect();
        EndpointSet::new(pts(&self.a), pts(&self.b)).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Keyword(SeedKeyword),
    Explicit(ExplicitSeed),
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::Keyword(SeedKeyword::Symmetric)
    }
}

impl std::str::FromStr for SeedSpec {
    type Err = String;

    /// `symmetric`, `cache`, or inline JSON `{"a": [[re, im]], "b": [...]}`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "symmetric" => Ok(SeedSpec::Keyword(SeedKeyword::Symmetric)),
            "cache" => Ok(SeedSpec::Keyword(SeedKeyword::Cache)),
            _ => serde_json::from_str::<ExplicitSeed>(s).map(SeedSpec::Explicit).map_err(|e| format!("seed: {e}")),
        }
    }
}

/// Numeric overrides; unset fields keep the library defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub newton_tol: Option<f64>,
    pub quad_tol: Option<f64>,
    pub traj_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub mask_resolution: Option<usize>,
    pub zero_dist_rel: Option<f64>,
    pub restarts: Option<usize>,
}

/// Plot window for graph renderings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub center: [f64; 2],
    pub half_width: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub svg: bool,
    #[serde(default)]
    pub mask: bool,
    pub cache: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub schema_version: u32,
    pub mode: Option<Mode>,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub q: QSpec,
    #[serde(default)]
    pub seed: SeedSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub window: Option<WindowSpec>,
    pub scan: Option<ScanSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    pub threads: Option<usize>,
}

impl JobConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: JobConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        Self::from_json(&text)
    }

    /// Checks everything that can be checked before running.
    pub fn validate(&self, mode: Mode) -> Result<(), ConfigError> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(ConfigError::Invalid(format!(
                "schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if let Some(m) = self.mode {
            if m != mode {
                return Err(ConfigError::Invalid(format!("config is for mode {m:?}, not {mode:?}")));
            }
        }
        let pot = self.potential.build()?;
        if let QSpec::Fixed(q) = self.q {
            if q == 0 || q > pot.max_cuts() {
                return Err(ConfigError::Invalid(format!("q must lie in 1..={}, got {q}", pot.max_cuts())));
            }
        }
        if let SeedSpec::Explicit(e) = &self.seed {
            let ep = e.build()?;
            if let QSpec::Fixed(q) = self.q {
                if ep.q() != q {
                    return Err(ConfigError::Invalid(format!("seed has {} cuts but q = {q}", ep.q())));
                }
            }
        }
        let t = &self.tolerances;
        for (name, v) in [("newton_tol", t.newton_tol), ("quad_tol", t.quad_tol), ("traj_tol", t.traj_tol), ("zero_dist_rel", t.zero_dist_rel)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(ConfigError::Invalid(format!("{name} must be positive")));
                }
            }
        }
        if let Some(w) = &self.window {
            if !(w.half_width > 0.0) {
                return Err(ConfigError::Invalid("window.half_width must be positive".into()));
            }
        }
        if self.threads == Some(0) {
            return Err(ConfigError::Invalid("threads must be at least 1".into()));
        }
        match (mode, &self.scan) {
            (Mode::Scan, None) => return Err(ConfigError::Invalid("scan mode needs a scan section".into())),
            (Mode::Scan, Some(s)) => s.validate(&pot)?,
            _ => {}
        }
        Ok(())
    }

    pub fn regime_options(&self) -> RegimeOptions {
        let t = &self.tolerances;
        let d = RegimeOptions::default();
        let ds = SolverOptions::default();
        let dt = TraceSettings::default();
        RegimeOptions {
            solver: SolverOptions {
                newton_tol: t.newton_tol.unwrap_or(ds.newton_tol),
                quad_tol: t.quad_tol.unwrap_or(ds.quad_tol),
                max_iter: t.max_iter.unwrap_or(ds.max_iter),
                ..ds
            },
            trace: TraceSettings { traj_tol: t.traj_tol.unwrap_or(dt.traj_tol), ..dt },
            mask_resolution: t.mask_resolution.unwrap_or(d.mask_resolution),
            zero_dist_rel: t.zero_dist_rel.unwrap_or(d.zero_dist_rel),
            restarts: t.restarts.unwrap_or(d.restarts),
            ..d
        }
    }

    /// SHA-256 of the canonical JSON form (after overrides).
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
