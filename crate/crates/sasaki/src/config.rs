//! JSON run configuration.
//!
//! ```json
//! {"n": 1, "epsilon": "sub", "profile": {"kind": "isotropic", "k": 0.5}}
//! ```
//!
//! `epsilon` is a positive number or the string `"sub"`. `profile` is one of
//! `{"kind": "flat"}`, `{"kind": "isotropic", "k": K}` or
//! `{"kind": "table", "times": [...], "matrices": [[[...]], ...]}` (piecewise
//! linear in time). `seed` and `tol` are optional. Unknown keys are errors.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer};

use crate::error::{Error, Result};
use crate::models::{build_heisenberg, CurvatureProfile, Epsilon, SasakianModel};

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileConfig {
    Flat {},
    Isotropic { k: f64 },
    Table { times: Vec<f64>, matrices: Vec<Vec<Vec<f64>>> },
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig::Flat {}
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    #[serde(deserialize_with = "epsilon_from_json")]
    pub epsilon: Epsilon,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tol: Option<f64>,
}

fn epsilon_from_json<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Epsilon, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Value(f64),
        Name(String),
    }
    match Raw::deserialize(d)? {
        Raw::Value(v) => Ok(Epsilon::Value(v)),
        Raw::Name(s) if s.eq_ignore_ascii_case("sub") => Ok(Epsilon::Sub),
        Raw::Name(s) => Err(serde::de::Error::custom(format!("epsilon must be a number or \"sub\", got {s:?}"))),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.model()?;
        cfg.curvature()?;
        if let Some(tol) = cfg.tol {
            if !(tol > 0.0) {
                return Err(Error::Config(format!("tol must be positive, got {tol}")));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn model(&self) -> Result<SasakianModel> {
        build_heisenberg(self.n, self.epsilon).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn curvature(&self) -> Result<CurvatureProfile> {
        let dim = 2 * self.n + 1;
        let profile = match &self.profile {
            ProfileConfig::Flat {} => CurvatureProfile::Flat,
            ProfileConfig::Isotropic { k } if *k >= 0.0 => CurvatureProfile::Isotropic(*k),
            ProfileConfig::Isotropic { k } => return Err(Error::Config(format!("isotropic k must be >= 0, got {k}"))),
            ProfileConfig::Table { times, matrices } => {
                let mats = matrices
                    .iter()
                    .map(|rows| {
                        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                            return Err(Error::Config(format!("profile matrices must be {dim}x{dim}")));
                        }
                        Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
                    })
                    .collect::<Result<Vec<_>>>()?;
                CurvatureProfile::from_table(times.clone(), mats).map_err(|e| Error::Config(e.to_string()))?
            }
        };
        for t in [0.0, 0.5, 1.0] {
            profile.matrix(dim, 1.0, t).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(profile)
    }
}
