//! Flat key-value config files (TOML syntax).
//!
//! ```toml
//! horizon = 3.0
//! x0 = 1.0
//! theta = 2.0
//! r = 0.08
//! mu = 0.15
//! sigma = 0.2
//! kappa = 0.1
//! kappa_r = 0.15
//! lambda = 5.0
//! claim_law = "exponential"
//! claim_rate = 10.0
//! ```
//!
//! A schedule may also be piecewise constant:
//! `r = { breakpoints = [0.0, 1.5], values = [0.08, 0.09] }`.
//! Omitting both `mu` and `sigma` disables risky investment; `lambda = 0`
//! disables insurance. Discrete claim laws use `claim_law = "discrete"` with
//! `claim_atoms` and `claim_weights`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{
    ClaimModel, ClaimSizeLaw, CoefficientSchedule, InsuranceParams, MarketParams, ModelConfig,
    StockParams, DEFAULT_SIGMA_FLOOR,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum ScheduleEntry {
    Constant(f64),
    Piecewise { breakpoints: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    horizon: f64,
    x0: f64,
    theta: f64,
    r: ScheduleEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu: Option<ScheduleEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<ScheduleEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma_floor: Option<f64>,
    kappa: f64,
    kappa_r: f64,
    lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    claim_law: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    claim_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    claim_atoms: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    claim_weights: Option<Vec<f64>>,
}

fn to_schedule(entry: ScheduleEntry) -> Result<CoefficientSchedule> {
    match entry {
        ScheduleEntry::Constant(v) => Ok(CoefficientSchedule::Constant(v)),
        ScheduleEntry::Piecewise { breakpoints, values } => {
            CoefficientSchedule::piecewise(breakpoints, values)
        }
    }
}

fn from_schedule(s: &CoefficientSchedule) -> ScheduleEntry {
    match s {
        CoefficientSchedule::Constant(v) => ScheduleEntry::Constant(*v),
        CoefficientSchedule::Piecewise { breakpoints, values } => ScheduleEntry::Piecewise {
            breakpoints: breakpoints.clone(),
            values: values.clone(),
        },
    }
}

impl ConfigFile {
    fn into_model(self) -> Result<ModelConfig> {
        let stock = match (self.mu, self.sigma) {
            (Some(mu), Some(sigma)) => Some(StockParams {
                mu: to_schedule(mu)?,
                sigma: to_schedule(sigma)?,
                sigma_floor: self.sigma_floor.unwrap_or(DEFAULT_SIGMA_FLOOR),
            }),
            (None, None) => None,
            _ => {
                return Err(Error::ConfigFormat(
                    "mu and sigma must be given together".into(),
                ))
            }
        };
        let claims = if self.lambda == 0.0 && self.claim_law.is_none() {
            ClaimModel::none()
        } else {
            let law = match self.claim_law.as_deref() {
                Some("exponential") => ClaimSizeLaw::Exponential {
                    rate: self
                        .claim_rate
                        .ok_or_else(|| Error::ConfigFormat("claim_rate is required".into()))?,
                },
                Some("discrete") => ClaimSizeLaw::FiniteDiscrete {
                    atoms: self
                        .claim_atoms
                        .ok_or_else(|| Error::ConfigFormat("claim_atoms is required".into()))?,
                    weights: self
                        .claim_weights
                        .ok_or_else(|| Error::ConfigFormat("claim_weights is required".into()))?,
                },
                Some(other) => {
                    return Err(Error::ConfigFormat(format!(
                        "unknown claim_law {other:?} (expected \"exponential\" or \"discrete\")"
                    )))
                }
                None => return Err(Error::ConfigFormat("claim_law is required".into())),
            };
            ClaimModel {
                intensity: self.lambda,
                size_law: law,
            }
        };
        Ok(ModelConfig {
            horizon: self.horizon,
            x0: self.x0,
            theta: self.theta,
            market: MarketParams {
                r: to_schedule(self.r)?,
                stock,
            },
            insurance: InsuranceParams {
                kappa: self.kappa,
                kappa_r: self.kappa_r,
            },
            claims,
        })
    }

    fn from_model(cfg: &ModelConfig) -> Self {
        let (claim_law, claim_rate, claim_atoms, claim_weights) = if cfg.claims.is_active() {
            match &cfg.claims.size_law {
                ClaimSizeLaw::Exponential { rate } => {
                    (Some("exponential".to_string()), Some(*rate), None, None)
                }
                ClaimSizeLaw::FiniteDiscrete { atoms, weights } => (
                    Some("discrete".to_string()),
                    None,
                    Some(atoms.clone()),
                    Some(weights.clone()),
                ),
            }
        } else {
            (None, None, None, None)
        };
        let stock = cfg.market.stock.as_ref();
        ConfigFile {
            horizon: cfg.horizon,
            x0: cfg.x0,
            theta: cfg.theta,
            r: from_schedule(&cfg.market.r),
            mu: stock.map(|s| from_schedule(&s.mu)),
            sigma: stock.map(|s| from_schedule(&s.sigma)),
            sigma_floor: stock
                .map(|s| s.sigma_floor)
                .filter(|&f| f != DEFAULT_SIGMA_FLOOR),
            kappa: cfg.insurance.kappa,
            kappa_r: cfg.insurance.kappa_r,
            lambda: cfg.claims.intensity,
            claim_law,
            claim_rate,
            claim_atoms,
            claim_weights,
        }
    }
}

impl ModelConfig {
    /// Parses a config; structural problems are errors, assumption breaches
    /// are left to [`crate::params::validate_config`].
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::ConfigFormat(e.to_string()))?;
        file.into_model()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ConfigFile::from_model(self)).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASELINE: &str = r#"
horizon = 3
x0 = 1
theta = 2
r = 0.08
mu = 0.15
sigma = 0.2
kappa = 0.1
kappa_r = 0.15
lambda = 5
claim_law = "exponential"
claim_rate = 10
"#;

    #[test]
    fn parses_baseline() {
        let cfg = ModelConfig::from_toml_str(BASELINE).unwrap();
        assert_eq!(cfg, ModelConfig::baseline());
    }

    #[test]
    fn shipped_config_matches_baseline() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/experiment-6-2.toml");
        assert_eq!(ModelConfig::load(path).unwrap(), ModelConfig::baseline());
    }

    #[test]
    fn piecewise_and_discrete() {
        let text = r#"
horizon = 2.0
x0 = 0.5
theta = 1.0
r = { breakpoints = [0.0, 1.0], values = [0.03, 0.04] }
kappa = 0.1
kappa_r = 0.2
lambda = 2.0
claim_law = "discrete"
claim_atoms = [1.0, 3.0]
claim_weights = [0.5, 0.5]
"#;
        let cfg = ModelConfig::from_toml_str(text).unwrap();
        assert!(cfg.market.stock.is_none());
        assert_eq!(cfg.market.r.at(1.5), 0.04);
        assert_eq!(cfg.claims.mu0(), 4.0);
        let again = ModelConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn missing_claim_rate_is_an_error() {
        let text = BASELINE.replace("claim_rate = 10", "");
        assert!(matches!(
            ModelConfig::from_toml_str(&text),
            Err(Error::ConfigFormat(_))
        ));
    }

    #[test]
    fn unknown_key_is_an_error() {
        let text = format!("{BASELINE}\nvolatility = 0.3\n");
        assert!(ModelConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn round_trip_baseline() {
        let cfg = ModelConfig::baseline();
        assert_eq!(ModelConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }
}
