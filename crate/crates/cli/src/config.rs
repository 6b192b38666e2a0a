//! Run configuration shared by every subcommand, validated before any
//! computation starts.

use quasitrace_core::phase::PhasePoint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use thiserror::Error;

/// Largest `k_max` the CLI accepts; word censuses and conjugacy tables
/// beyond this level do not fit a desk-scale run.
pub const MAX_CLI_LEVEL: usize = 25;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid phase {0:?}: {1}")]
    Phase(String, String),
    #[error("coupling must be finite and nonnegative, got {0}")]
    Coupling(f64),
    #[error("k_max {0} exceeds the supported maximum {MAX_CLI_LEVEL}")]
    Level(usize),
    #[error("energy grid {0:?} must look like lo:hi:count with lo < hi and count ≥ 1")]
    Energies(String),
    #[error("timescales must be finite and > 1, got {0}")]
    Timescale(f64),
    #[error("T grid is empty")]
    EmptyTimes,
    #[error("box half-width must be a positive integer or \"auto\", got {0:?}")]
    HalfWidth(String),
    #[error("window constant C1 must be finite and > 0, got {0}")]
    WindowConstant(f64),
    #[error("exponent p must lie in (0, 1], got {0}")]
    Exponent(f64),
    #[error("worker count must be ≥ 1")]
    Jobs,
}

/// Uniform energy grid `lo, …, hi` with `count` points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyGrid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl EnergyGrid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.lo + step * i as f64).collect()
    }

    fn check(&self) -> Result<(), ConfigError> {
        if self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi && self.count >= 1 {
            Ok(())
        } else {
            Err(ConfigError::Energies(self.to_string()))
        }
    }
}

impl fmt::Display for EnergyGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.count)
    }
}

impl FromStr for EnergyGrid {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ConfigError::Energies(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, count] = parts.as_slice() else {
            return Err(bad());
        };
        let grid = EnergyGrid {
            lo: lo.trim().parse().map_err(|_| bad())?,
            hi: hi.trim().parse().map_err(|_| bad())?,
            count: count.trim().parse().map_err(|_| bad())?,
        };
        grid.check().map_err(|_| bad())?;
        Ok(grid)
    }
}

/// Box half-width for the dynamics suite: fixed or chosen from `T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HalfWidth {
    #[default]
    Auto,
    #[serde(untagged)]
    Fixed(usize),
}

impl HalfWidth {
    pub fn fixed(self) -> Option<usize> {
        match self {
            HalfWidth::Auto => None,
            HalfWidth::Fixed(n) => Some(n),
        }
    }
}

impl FromStr for HalfWidth {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim() == "auto" {
            return Ok(HalfWidth::Auto);
        }
        match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(HalfWidth::Fixed(n)),
            _ => Err(ConfigError::HalfWidth(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub lambda: f64,
    /// Extra couplings for the growth and exponent trends.
    pub trend_lambdas: Vec<f64>,
    /// Phases as given on the command line (`0.25`, `1/3`, `omega/2`).
    pub thetas: Vec<String>,
    /// Number of additional phases drawn from `seed`.
    pub samples: usize,
    pub seed: u64,
    pub k_max: usize,
    pub energies: EnergyGrid,
    pub t_grid: Vec<f64>,
    pub half_width: HalfWidth,
    pub c1: f64,
    /// Window exponent; calibrated from the data when absent.
    pub p: Option<f64>,
    pub jobs: Option<usize>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            lambda: 10.0,
            trend_lambdas: Vec::new(),
            thetas: Vec::new(),
            samples: 0,
            seed: 0,
            k_max: 14,
            energies: EnergyGrid { lo: -3.0, hi: 13.0, count: 64 },
            t_grid: vec![10.0, 30.0, 100.0, 300.0, 1000.0],
            half_width: HalfWidth::Auto,
            c1: 1.0,
            p: None,
            jobs: None,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Checks every numeric field and parses the phases.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for &l in std::iter::once(&self.lambda).chain(&self.trend_lambdas) {
            if !(l.is_finite() && l >= 0.0) {
                return Err(ConfigError::Coupling(l));
            }
        }
        if self.k_max > MAX_CLI_LEVEL {
            return Err(ConfigError::Level(self.k_max));
        }
        self.energies.check()?;
        if self.t_grid.is_empty() {
            return Err(ConfigError::EmptyTimes);
        }
        if let Some(&t) = self.t_grid.iter().find(|t| !(t.is_finite() && **t > 1.0)) {
            return Err(ConfigError::Timescale(t));
        }
        if let HalfWidth::Fixed(0) = self.half_width {
            return Err(ConfigError::HalfWidth("0".into()));
        }
        if !(self.c1.is_finite() && self.c1 > 0.0) {
            return Err(ConfigError::WindowConstant(self.c1));
        }
        if let Some(p) = self.p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(ConfigError::Exponent(p));
            }
        }
        if self.jobs == Some(0) {
            return Err(ConfigError::Jobs);
        }
        self.phases().map(|_| ())
    }

    /// The listed phases (θ = 0 when none are given) followed by
    /// `samples` seeded random phases.
    pub fn phases(&self) -> Result<Vec<PhasePoint>, ConfigError> {
        let mut out = self
            .thetas
            .iter()
            .map(|s| s.parse::<PhasePoint>().map_err(|e| ConfigError::Phase(s.clone(), e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        if out.is_empty() && self.samples == 0 {
            out.push(PhasePoint::ZERO);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        out.extend((0..self.samples).map(|_| PhasePoint::random(&mut rng)));
        Ok(out)
    }

    /// Sorted, deduplicated couplings: the main one plus the trend list.
    pub fn all_lambdas(&self) -> Vec<f64> {
        let mut ls: Vec<f64> = std::iter::once(self.lambda).chain(self.trend_lambdas.iter().copied()).collect();
        ls.sort_by(f64::total_cmp);
        ls.dedup();
        ls
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let cfg = RunConfig {
            thetas: vec!["omega/2".into(), "0.25".into()],
            half_width: HalfWidth::Fixed(50),
            p: Some(0.3),
            ..RunConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
        let auto = serde_json::to_string(&RunConfig::default()).unwrap();
        assert!(auto.contains("\"half_width\":\"auto\""));
        assert_eq!(serde_json::from_str::<RunConfig>(&auto).unwrap(), RunConfig::default());
    }

    #[test]
    fn grids_parse() {
        let g: EnergyGrid = "-3:13:5".parse().unwrap();
        assert_eq!(g.points(), [-3.0, 1.0, 5.0, 9.0, 13.0]);
        assert!("3:1:4".parse::<EnergyGrid>().is_err());
        assert!("0:1".parse::<EnergyGrid>().is_err());
        assert_eq!("auto".parse::<HalfWidth>(), Ok(HalfWidth::Auto));
        assert_eq!("40".parse::<HalfWidth>(), Ok(HalfWidth::Fixed(40)));
        assert!("0".parse::<HalfWidth>().is_err());
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let bad_theta = RunConfig { thetas: vec!["0.3.1".into()], ..RunConfig::default() };
        assert!(matches!(bad_theta.validate(), Err(ConfigError::Phase(..))));
        let bad_t = RunConfig { t_grid: vec![10.0, 0.5], ..RunConfig::default() };
        assert_eq!(bad_t.validate(), Err(ConfigError::Timescale(0.5)));
        let bad_k = RunConfig { k_max: 99, ..RunConfig::default() };
        assert_eq!(bad_k.validate(), Err(ConfigError::Level(99)));
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn seeded_phases_repeat() {
        let cfg = RunConfig { samples: 4, seed: 7, ..RunConfig::default() };
        assert_eq!(cfg.phases().unwrap(), cfg.phases().unwrap());
        assert_eq!(cfg.phases().unwrap().len(), 4);
    }
}
