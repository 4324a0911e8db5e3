//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::ExpansionParams;
use crate::harness::scenario::ScenarioSpec;
use crate::harness::topology::{LinkParams, DEFAULT_WAXMAN_A, DEFAULT_WAXMAN_B};
use crate::routing::DEFAULT_CANDIDATE_ROUTES;

fn default_a() -> f64 {
    DEFAULT_WAXMAN_A
}

fn default_b() -> f64 {
    DEFAULT_WAXMAN_B
}

fn default_k() -> usize {
    DEFAULT_CANDIDATE_ROUTES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    Random {
        n: usize,
        p: f64,
    },
    Waxman {
        n: usize,
        #[serde(default = "default_a")]
        a: f64,
        #[serde(default = "default_b")]
        b: f64,
    },
    Ring {
        n: usize,
    },
    Grid {
        rows: usize,
        cols: usize,
    },
    /// A `topology.json` as written by the harness.
    File {
        path: PathBuf,
    },
}

impl TopologySpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TopologySpec::Random { .. } => "random",
            TopologySpec::Waxman { .. } => "waxman",
            TopologySpec::Ring { .. } => "ring",
            TopologySpec::Grid { .. } => "grid",
            TopologySpec::File { .. } => "file",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match *self {
            TopologySpec::Random { n, p } if n < 2 || !(p > 0.0 && p <= 1.0) => {
                bad(format!("random: need n >= 2 and 0 < p <= 1, got n={n} p={p}"))
            }
            TopologySpec::Waxman { n, a, b } if n < 2 || !(a > 0.0 && b > 0.0 && b <= 1.0) => {
                bad(format!("waxman: need n >= 2, a > 0, 0 < b <= 1, got n={n} a={a} b={b}"))
            }
            TopologySpec::Ring { n } if n < 3 => bad(format!("ring: need n >= 3, got {n}")),
            TopologySpec::Grid { rows, cols } if rows < 2 || cols < 2 => {
                bad(format!("grid: need rows, cols >= 2, got {rows}x{cols}"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologySpec,
    #[serde(default)]
    pub links: LinkParams,
    pub scenario: ScenarioSpec,
    /// Replaces the generated scenario with one written by `gen-scenario`.
    #[serde(default)]
    pub scenario_file: Option<PathBuf>,
    /// The `seed` field inside is ignored; it is derived from the top-level
    /// seed.
    pub expansion: ExpansionParams,
    #[serde(default = "default_k")]
    pub candidate_routes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.scenario.validate()?;
        self.expansion.validate()?;
        if self.candidate_routes == 0 {
            return Err(Error::Config("candidate_routes must be positive".into()));
        }
        if self.links.rate == 0 {
            return Err(Error::Config("link rate must be positive".into()));
        }
        Ok(())
    }
}
