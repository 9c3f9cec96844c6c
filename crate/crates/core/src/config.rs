//! JSON description of a network and its escape domain.
//!
//! ```json
//! {
//!   "J": 2, "K": 1,
//!   "serves": [[1, 2]],
//!   "route": [0, 0],
//!   "lambda": [1.0, 1.0],
//!   "mu": [2.0, 2.0],
//!   "c": 5.0,
//!   "domain": { "kind": "rect", "z": [1.0, 1.0] }
//! }
//! ```
//!
//! Classes are numbered from 1 in the file and route value 0 means exit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::DomainError;
use crate::network::{Domain, DomainShape, NetworkModel};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum ConfigError {
    /// `path` locates the offending key, e.g. `lambda[1]`.
    #[error("cannot parse config at key `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid value for key `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
    #[error("invalid value for key `domain`: {0}")]
    Domain(#[from] DomainError),
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainConfig {
    Rect { z: Vec<f64> },
    Cap { w: Vec<f64>, h: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "J")]
    pub classes: usize,
    #[serde(rename = "K")]
    pub servers: usize,
    pub serves: Vec<Vec<usize>>,
    pub route: Vec<usize>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub c: f64,
    pub domain: DomainConfig,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: e.path().to_string(),
            message: e.into_inner().to_string(),
        })
    }

    /// Structural conversion; model invariants are left to
    /// [`crate::validate_model`].
    pub fn model<T: Real>(&self) -> Result<NetworkModel<T>, ConfigError> {
        let j = self.classes;
        if j == 0 {
            return Err(invalid("J", "must be at least 1"));
        }
        for (key, len) in [("lambda", self.lambda.len()), ("mu", self.mu.len()), ("route", self.route.len())] {
            if len != j {
                return Err(invalid(key, format!("has {len} entries, expected J = {j}")));
            }
        }
        if self.serves.len() != self.servers {
            return Err(invalid("serves", format!("has {} servers, expected K = {}", self.serves.len(), self.servers)));
        }
        let serves = self
            .serves
            .iter()
            .map(|cls| {
                cls.iter()
                    .map(|&i| {
                        if (1..=j).contains(&i) {
                            Ok(i - 1)
                        } else {
                            Err(invalid("serves", format!("class {i} out of range 1..={j}")))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let route = self
            .route
            .iter()
            .map(|&r| match r {
                0 => Ok(None),
                r if r <= j => Ok(Some(r - 1)),
                r => Err(invalid("route", format!("target {r} out of range 0..={j}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let conv = |v: &[f64]| v.iter().map(|&x| T::of(x)).collect::<Vec<T>>();
        Ok(NetworkModel::new(serves, route, conv(&self.lambda), conv(&self.mu), T::of(self.c)))
    }

    pub fn domain<T: Real>(&self, model: &NetworkModel<T>) -> Result<Domain<T>, ConfigError> {
        let conv = |v: &[f64]| v.iter().map(|&x| T::of(x)).collect::<Vec<T>>();
        let shape = match &self.domain {
            DomainConfig::Rect { z } => DomainShape::Rect { z: conv(z) },
            DomainConfig::Cap { w, h } => DomainShape::WeightedCap { w: conv(w), h: T::of(*h) },
        };
        Ok(Domain::new(model, shape)?)
    }
}
