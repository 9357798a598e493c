//! Run configuration (TOML).
//!
//! Every key has a default except `grid.m` and at least one `[[schedule]]` entry.
//!
//! ```toml
//! [domain]
//! length = 12.8
//!
//! [grid]
//! m = 128
//!
//! [physics]
//! eps = 0.05
//! a = 0.0625
//!
//! [[schedule]]
//! dt = 0.01
//! t_end = 100.0
//!
//! [initial]
//! kind = "random"      # random | file | manufactured
//! mean = 0.0
//! amplitude = 0.1
//! seed = 7
//! # path = "start.chf1"  (kind = "file")
//!
//! [solver]
//! tol_rel = 1e-10
//! tol_abs = 1e-13
//! max_iter = 200
//! init_guess = "extrapolated"   # or "previous"
//! precond_power = 1
//!
//! [output]
//! dir = "out"
//! energy_every = 1
//! snapshot_times = [1.0, 10.0, 100.0]
//! formats = ["chf1", "pgm"]
//! ```

use std::path::{Path, PathBuf};

use cahn_hilliard::psd_solver::{InitialGuess, PsdConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub domain: Domain,
    pub grid: Grid,
    #[serde(default)]
    pub physics: Physics,
    pub schedule: Vec<Segment>,
    #[serde(default)]
    pub initial: Initial,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub length: f64,
}

impl Default for Domain {
    fn default() -> Self {
        Self { length: 12.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    pub eps: f64,
    pub a: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            eps: 0.05,
            a: 1.0 / 16.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub dt: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    Random,
    File,
    Manufactured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Initial {
    pub kind: InitialKind,
    pub mean: f64,
    pub amplitude: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for Initial {
    fn default() -> Self {
        Self {
            kind: InitialKind::Random,
            mean: 0.0,
            amplitude: 0.1,
            seed: 0,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuessKind {
    Previous,
    Extrapolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Solver {
    pub tol_rel: f64,
    pub tol_abs: f64,
    pub max_iter: usize,
    pub init_guess: GuessKind,
    pub precond_power: u32,
}

impl Default for Solver {
    fn default() -> Self {
        let d = PsdConfig::default();
        Self {
            tol_rel: d.tol_rel,
            tol_abs: d.tol_abs,
            max_iter: d.max_iter,
            init_guess: GuessKind::Extrapolated,
            precond_power: d.precond_power,
        }
    }
}

impl Solver {
    pub fn psd(&self) -> PsdConfig {
        PsdConfig {
            tol_rel: self.tol_rel,
            tol_abs: self.tol_abs,
            max_iter: self.max_iter,
            init_guess: match self.init_guess {
                GuessKind::Previous => InitialGuess::Previous,
                GuessKind::Extrapolated => InitialGuess::Extrapolated,
            },
            precond_power: self.precond_power,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Chf1,
    Pgm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub dir: PathBuf,
    pub energy_every: usize,
    pub snapshot_times: Vec<f64>,
    pub formats: Vec<Format>,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            energy_every: 1,
            snapshot_times: Vec::new(),
            formats: vec![Format::Chf1],
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(self.domain.length > 0.0) {
            return bad(format!("domain.length must be positive, got {}", self.domain.length));
        }
        if self.grid.m < 5 {
            return bad(format!("grid.m must be at least 5, got {}", self.grid.m));
        }
        if !(self.physics.eps > 0.0) || !(self.physics.a >= 0.0) {
            return bad("physics.eps must be positive and physics.a non-negative".into());
        }
        if self.schedule.is_empty() {
            return bad("schedule needs at least one segment".into());
        }
        let mut last = f64::NEG_INFINITY;
        for (i, s) in self.schedule.iter().enumerate() {
            if !(s.dt > 0.0) || !s.dt.is_finite() {
                return bad(format!("schedule[{i}].dt must be positive, got {}", s.dt));
            }
            if !(s.t_end > last) {
                return bad(format!("schedule[{i}].t_end must be strictly increasing"));
            }
            last = s.t_end;
        }
        if !(self.initial.amplitude >= 0.0) {
            return bad(format!("initial.amplitude must be >= 0, got {}", self.initial.amplitude));
        }
        if self.initial.kind == InitialKind::File && self.initial.path.is_none() {
            return bad("initial.kind = \"file\" needs initial.path".into());
        }
        if self.output.energy_every == 0 {
            return bad("output.energy_every must be at least 1".into());
        }
        self.solver
            .psd()
            .validate()
            .map_err(|e| CliError::Config(format!("solver: {e}")))
    }
}
