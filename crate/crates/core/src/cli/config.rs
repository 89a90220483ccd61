//! JSON run configuration and its resolution against command-line overrides.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contrasts::{ContrastSpec, LinearConstraint, LinearHypothesis, Relation};
use crate::error::Error;
use crate::pointproc::IntensitySpec;
use crate::seqtest::Prior;
use crate::types::SimplexVector;

pub const DEFAULT_U: f64 = 0.05;

/// Every key a config file may carry. Commands read the subset they need.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub d: Option<usize>,
    pub theta0: Option<Vec<f64>>,
    pub rho: Option<Vec<f64>>,
    pub u: Option<f64>,
    pub prior: Option<Prior>,
    pub contrasts: Option<Vec<Vec<f64>>>,
    pub hypothesis: Option<Vec<LinearConstraint>>,
    pub report_every: Option<u64>,
    pub seed: Option<u64>,
    pub theta_true: Option<Vec<f64>>,
    pub n_max: Option<u64>,
    pub reps: Option<u64>,
    pub target: Option<CoverageKind>,
    pub delta: Option<Vec<f64>>,
    pub units: Option<u64>,
    pub intensity: Option<IntensitySpec>,
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverageKind {
    Simplex,
    Contrasts,
}

/// One-sided alternatives for the canary comparison of arm `k ≥ 1` against arm 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Null `δ_k ≤ δ_0`: rejection means arm `k` has the higher rate.
    Greater,
    /// Null `δ_k ≥ δ_0`: rejection means arm `k` has the lower rate.
    Less,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn level(&self) -> anyhow::Result<f64> {
        let u = self.u.unwrap_or(DEFAULT_U);
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::InvalidLevel(u).into());
        }
        Ok(u)
    }

    pub fn report_every(&self) -> anyhow::Result<u64> {
        match self.report_every.unwrap_or(1) {
            0 => bail!(Error::InvalidConfig("report_every must be >= 1".into())),
            k => Ok(k),
        }
    }

    fn check_d(&self, len: usize, what: &str) -> anyhow::Result<()> {
        if let Some(d) = self.d {
            if d != len {
                bail!(Error::InvalidConfig(format!(
                    "{what} has {len} entries but d = {d}"
                )));
            }
        }
        Ok(())
    }

    fn simplex(&self, v: &Option<Vec<f64>>, key: &str) -> anyhow::Result<SimplexVector> {
        let v = v
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig(format!("missing `{key}`")))?;
        self.check_d(v.len(), key)?;
        SimplexVector::new(v.clone()).with_context(|| format!("`{key}`"))
    }

    pub fn theta0(&self) -> anyhow::Result<SimplexVector> {
        self.simplex(&self.theta0, "theta0")
    }

    pub fn rho(&self) -> anyhow::Result<SimplexVector> {
        self.simplex(&self.rho, "rho")
    }

    pub fn theta_true(&self) -> anyhow::Result<SimplexVector> {
        self.simplex(&self.theta_true, "theta_true")
    }

    pub fn prior(&self, d: usize) -> Prior {
        self.prior.unwrap_or_else(|| Prior::default_for(d))
    }

    pub fn contrast_specs(&self, d: usize) -> anyhow::Result<Vec<ContrastSpec>> {
        let Some(list) = &self.contrasts else {
            return Ok(Vec::new());
        };
        list.iter()
            .enumerate()
            .map(|(k, a)| {
                if a.len() != d {
                    bail!(Error::InvalidContrast(format!(
                        "contrast {k} has {} coefficients, expected {d}",
                        a.len()
                    )));
                }
                ContrastSpec::new(a.clone())
                    .map_err(|e| anyhow::anyhow!("contrast {k}: {e}"))
            })
            .collect()
    }

    pub fn hypothesis(&self, d: usize) -> anyhow::Result<Option<LinearHypothesis>> {
        match &self.hypothesis {
            None => Ok(None),
            Some(c) => Ok(Some(LinearHypothesis::new(c.clone(), d)?)),
        }
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(0)
    }

    pub fn require<T: Copy>(value: Option<T>, key: &str) -> anyhow::Result<T> {
        value.ok_or_else(|| Error::InvalidConfig(format!("missing `{key}`")).into())
    }
}

/// Constraints `δ_k (≤ | ≥) δ_0` for every `k ≥ 1`.
pub fn direction_hypothesis(direction: Direction, d: usize) -> anyhow::Result<LinearHypothesis> {
    let relation = match direction {
        Direction::Greater => Relation::Le,
        Direction::Less => Relation::Ge,
    };
    let constraints = (1..d)
        .map(|k| {
            let mut c = vec![0.0; d];
            c[0] = -1.0;
            c[k] = 1.0;
            LinearConstraint::new(c, relation, 0.0)
        })
        .collect();
    Ok(LinearHypothesis::new(constraints, d)?)
}

/// Hex SHA-256 of a serializable value's JSON form.
pub fn digest<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"d":3,"rho":[0.1,0.3,0.6],"u":0.05,"prior":{"mode":"concentrated","k":100},
                "contrasts":[[-1,0,1]],"hypothesis":[{"coeffs":[1,-1,0],"relation":">=","rhs":0}],
                "report_every":10,"seed":4}"#,
        )
        .unwrap();
        assert_eq!(cfg.prior(3), Prior::Concentrated { k: 100.0 });
        assert_eq!(cfg.contrast_specs(3).unwrap().len(), 1);
        assert!(cfg.hypothesis(3).unwrap().is_some());
        assert_eq!(cfg.report_every().unwrap(), 10);
        assert_eq!(cfg.seed(None), 4);
        assert_eq!(cfg.seed(Some(9)), 9);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"theta":[0.5,0.5]}"#).is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"d":3,"theta0":[0.5,0.5],"u":2}"#).unwrap();
        assert!(cfg.theta0().is_err());
        assert!(cfg.level().is_err());
        let cfg: RunConfig = serde_json::from_str(r#"{"contrasts":[[1,-1]]}"#).unwrap();
        let err = cfg.contrast_specs(3).unwrap_err().to_string();
        assert_eq!(err, "invalid contrast: contrast 0 has 2 coefficients, expected 3");
    }

    #[test]
    fn digest_is_stable() {
        let cfg = RunConfig {
            u: Some(0.05),
            ..Default::default()
        };
        assert_eq!(digest(&cfg), digest(&cfg.clone()));
        let other = RunConfig {
            u: Some(0.01),
            ..Default::default()
        };
        assert_ne!(digest(&cfg), digest(&other));
    }

    #[test]
    fn direction_constraints() {
        let h = direction_hypothesis(Direction::Greater, 2).unwrap();
        assert!(h.contains(&[0.5, 0.0]));
        assert!(!h.contains(&[0.0, 0.5]));
    }
}
