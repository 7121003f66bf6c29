use std::path::{Path, PathBuf};

use overindep::constructions::Kind;
use overindep::poly::IntPolynomial;
use overindep::verify::Sense;
use overindep::{BernoulliSystem, QuadExt, Rational, RotationSystem};
use serde::Deserialize;

/// One experiment, read from TOML or (by extension) JSON. Every rational is a
/// `"num/den"` string.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub system: SystemSpec,
    pub construction: Option<ConstructionSpec>,
    pub sweep: Option<SweepSpec>,
    pub rotation: Option<RotationSpec>,
    #[serde(default)]
    pub guards: Guards,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    /// Symbol probabilities; the fair coin when absent.
    pub bernoulli: Option<Vec<Rational>>,
    /// Angle `rational + sqrt5·√5`.
    pub rotation: Option<Angle>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Angle {
    pub rational: Rational,
    pub sqrt5: Rational,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructionSpec {
    pub kind: Kind,
    pub a: Rational,
    pub stages: usize,
    /// Coefficient lists, lowest degree first. For `oi-mixing` these are the
    /// sequences `c_{i,n}`.
    #[serde(default = "linear")]
    pub polynomials: Vec<Vec<i64>>,
    pub horizon: Option<u64>,
    #[serde(default)]
    pub m: u64,
    #[serde(default = "one")]
    pub k0: u64,
    pub k_max: Option<u64>,
    pub delta: Option<Rational>,
    /// Partial-sum depth for the `S` bounds of `density1-ui`.
    #[serde(default = "depth")]
    pub depth: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// The set, as a union of cylinders.
    pub cylinders: Vec<CylinderSpec>,
    #[serde(default = "linear")]
    pub polynomials: Vec<Vec<i64>>,
    pub horizon: u64,
    #[serde(default = "over")]
    pub sense: Sense,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderSpec {
    #[serde(default)]
    pub offset: i64,
    pub word: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationSpec {
    /// Arcs `[start, end)` of the circle.
    pub arcs: Vec<(Rational, Rational)>,
    pub horizon: i64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Guards {
    /// Widest set window a sweep may run on.
    #[serde(default = "max_window")]
    pub max_window: u64,
    /// Widest projected tower window for `density1-ui` stages.
    #[serde(default = "tower_window")]
    pub tower_window: i64,
}

impl Default for Guards {
    fn default() -> Self {
        Guards { max_window: max_window(), tower_window: tower_window() }
    }
}

fn linear() -> Vec<Vec<i64>> {
    vec![vec![0, 1]]
}

fn one() -> u64 {
    1
}

fn depth() -> u64 {
    1000
}

fn over() -> Sense {
    Sense::Over
}

fn max_window() -> u64 {
    1 << 17
}

fn tower_window() -> i64 {
    1 << 14
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e == "json");
        Self::parse(&text, json).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn parse(text: &str, json: bool) -> Result<Self, ConfigError> {
        if json {
            serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
        }
    }

    pub fn bernoulli(&self) -> Result<BernoulliSystem, ConfigError> {
        match &self.system.bernoulli {
            None => Ok(BernoulliSystem::fair()),
            Some(p) => BernoulliSystem::new(p.clone()).map_err(|e| ConfigError(e.to_string())),
        }
    }

    pub fn rotation_system(&self) -> Result<RotationSystem, ConfigError> {
        match &self.system.rotation {
            None => Ok(RotationSystem::golden()),
            Some(a) => RotationSystem::new(QuadExt::new(a.rational.clone(), a.sqrt5.clone())).map_err(|e| ConfigError(e.to_string())),
        }
    }
}

pub fn polynomials(coeffs: &[Vec<i64>]) -> Vec<IntPolynomial> {
    coeffs.iter().map(|c| IntPolynomial::new(c.clone())).collect()
}
