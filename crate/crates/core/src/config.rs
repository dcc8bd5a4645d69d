//! Experiment configuration files (TOML).
//!
//! ```toml
//! [instance]
//! cardinality = 2
//! horizon = 20000
//! weights = [1.0, 1.0, 1.0]       # optional, defaults to 1
//! means = [0.4, 0.5, 0.7]         # required unless replaying a trace
//! availability = [0.9, 0.8, 0.7]  # required unless replaying a trace
//! fairness = [0.5, 0.6, 0.4]
//!
//! [experiment]
//! policies = ["tscsf-b", "lfg", "opt-nf"]
//! eta = [1, 10, 1000, "inf"]      # numbers, "inf", or "auto"
//! replications = 100
//! seed = 2020
//! fairness_tolerance = 0.01       # optional
//! output_dir = "out/setting1"     # optional
//! trace = "movielens.trace"       # optional, replay mode
//! ```
//!
//! `"auto"` resolves to `sqrt(N T / (m ln T))`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::DEFAULT_FAIRNESS_TOLERANCE;
use crate::error::{Error, Result};
use crate::model::{ArmConfig, Eta, ProblemInstance};
use crate::policy::PolicyKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSection {
    pub cardinality: usize,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub means: Option<Vec<f64>>,
    #[serde(default)]
    pub availability: Option<Vec<f64>>,
    pub fairness: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaSpec {
    Value(f64),
    Named(EtaName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EtaName {
    #[serde(alias = "infinity")]
    Inf,
    Auto,
}

impl EtaSpec {
    pub fn resolve(self, num_arms: usize, cardinality: usize, horizon: usize) -> Result<Eta> {
        match self {
            EtaSpec::Value(v) => Eta::new(v),
            EtaSpec::Named(EtaName::Inf) => Ok(Eta::Infinite),
            EtaSpec::Named(EtaName::Auto) => Eta::new(eta_default(num_arms, cardinality, horizon as f64)?),
        }
    }
}

fn default_policies() -> Vec<PolicyKind> {
    vec![PolicyKind::TscsfB, PolicyKind::Lfg, PolicyKind::OptNf]
}

fn default_tolerance() -> f64 {
    DEFAULT_FAIRNESS_TOLERANCE
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyKind>,
    pub eta: Vec<EtaSpec>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub fairness_tolerance: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub trace: Option<PathBuf>,
}

/// A parsed configuration file. Field order here is the canonical order
/// used for hashing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSection,
    pub experiment: ExperimentSection,
}

/// `sqrt(N T / (m ln T))`, the smallest queue weight for which the
/// queue term of the regret bound is no larger than the learning term.
pub fn eta_default(num_arms: usize, cardinality: usize, horizon: f64) -> Result<f64> {
    if !(horizon >= 2.0) || cardinality == 0 {
        return Err(Error::Config(format!("default eta needs T >= 2 and m >= 1, got T={horizon}, m={cardinality}")));
    }
    Ok((num_arms as f64 * horizon / (cardinality as f64 * horizon.ln())).sqrt())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with_trace(path, None)
    }

    /// Like [`ExperimentConfig::load`] with `trace` replacing any trace named
    /// in the file. An override is taken as given; a trace named in the
    /// file is relative to the file.
    pub fn load_with_trace(path: &Path, trace: Option<PathBuf>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        // Relative paths are relative to the config file.
        if let Some(dir) = path.parent() {
            if let Some(t) = cfg.experiment.trace.as_mut().filter(|t| t.is_relative()) {
                *t = dir.join(&*t);
            }
            if cfg.experiment.output_dir.is_relative() {
                cfg.experiment.output_dir = dir.join(&cfg.experiment.output_dir);
            }
        }
        if trace.is_some() {
            cfg.experiment.trace = trace;
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        let e = &self.experiment;
        if e.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if e.eta.is_empty() {
            return Err(Error::Config("at least one eta value is required".into()));
        }
        if e.policies.is_empty() {
            return Err(Error::Config("at least one policy is required".into()));
        }
        if !(e.fairness_tolerance >= 0.0) {
            return Err(Error::Config("fairness_tolerance must be >= 0".into()));
        }
        let n = self.instance.fairness.len();
        for (name, v) in [
            ("weights", &self.instance.weights),
            ("means", &self.instance.means),
            ("availability", &self.instance.availability),
        ] {
            if let Some(v) = v {
                if v.len() != n {
                    return Err(Error::Config(format!("{name} has {} entries, fairness has {n}", v.len())));
                }
            }
        }
        if e.trace.is_none() {
            if self.instance.means.is_none() || self.instance.availability.is_none() {
                return Err(Error::Config("synthetic runs need instance.means and instance.availability".into()));
            }
            if self.instance.horizon.is_none() {
                return Err(Error::Config("synthetic runs need instance.horizon".into()));
            }
        }
        Ok(())
    }

    pub fn num_arms(&self) -> usize {
        self.instance.fairness.len()
    }

    /// Builds the instance. `means`, `availability` and `horizon` override
    /// the file (replay mode supplies trace estimates). The returned
    /// instance carries `eta = inf`; callers substitute each sweep value.
    pub fn instance_with(
        &self,
        means: Option<&[f64]>,
        availability: Option<&[f64]>,
        horizon: Option<usize>,
    ) -> Result<ProblemInstance> {
        let n = self.num_arms();
        let s = &self.instance;
        let means = means.or(s.means.as_deref()).ok_or_else(|| Error::Config("missing instance.means".into()))?;
        let avail = availability
            .or(s.availability.as_deref())
            .ok_or_else(|| Error::Config("missing instance.availability".into()))?;
        if means.len() != n || avail.len() != n {
            return Err(Error::Config(format!("instance has {n} arms but estimates cover {}", means.len())));
        }
        let horizon = horizon.or(s.horizon).ok_or_else(|| Error::Config("missing instance.horizon".into()))?;
        let arms = (0..n)
            .map(|i| ArmConfig {
                weight: s.weights.as_ref().map_or(1.0, |w| w[i]),
                mean_reward: means[i],
                availability_prob: avail[i],
                fairness_target: s.fairness[i],
            })
            .collect();
        ProblemInstance::new(arms, s.cardinality, horizon, Eta::Infinite)
    }

    pub fn instance(&self) -> Result<ProblemInstance> {
        self.instance_with(None, None, None)
    }

    pub fn etas(&self, horizon: usize) -> Result<Vec<Eta>> {
        self.experiment
            .eta
            .iter()
            .map(|spec| spec.resolve(self.num_arms(), self.instance.cardinality, horizon))
            .collect()
    }

    /// SHA-256 of the canonical JSON form of every field.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serialises");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
