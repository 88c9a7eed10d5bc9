//! Run configuration: a TOML document describing the dataset, the vertical
//! partition and every protocol hyperparameter.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boosting::LossFunction;
use crate::data::{MissingPolicy, SyntheticTask, VerticalPartitionSpec};
use crate::error::{Error, Result};
use crate::federation::{Mode, ProtocolParams};
use crate::ldp::{Mechanism, PrivacyBudget};
use crate::types::{PartyId, ACTIVE_PARTY};

/// Where the training data comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct DataConfig {
    pub source: DataSource,
    /// Synthetic: number of instances.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Synthetic: number of features.
    #[serde(default = "default_d")]
    pub d: usize,
    /// Synthetic: task kind.
    #[serde(default = "default_task")]
    pub task: SyntheticTask,
    /// CSV: file path (single joined file, partitioned by the spec).
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// CSV: id column name.
    #[serde(default = "default_id_column")]
    pub id_column: String,
    /// CSV: label column name.
    #[serde(default)]
    pub label_column: Option<String>,
    #[serde(default)]
    pub missing_policy: MissingPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    Synthetic,
    Csv,
}

fn default_n() -> usize {
    200
}
fn default_d() -> usize {
    4
}
fn default_task() -> SyntheticTask {
    SyntheticTask::Binary
}
fn default_id_column() -> String {
    "id".into()
}

/// Feature-to-party layout. Party keys are written as strings in TOML
/// (`"1" = ["f0"]` or the bare-key form `1 = ["f0"]`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    /// Number of passive parties.
    pub parties: usize,
    #[serde(default)]
    pub label_owner: PartyId,
    /// Explicit feature map; features are dealt round-robin when absent.
    #[serde(default)]
    pub features_per_party: Option<BTreeMap<String, Vec<String>>>,
}

fn parse_party_key(key: &str) -> Result<PartyId> {
    key.parse::<PartyId>().map_err(|_| {
        Error::Config(format!(
            "partition.features_per_party: party key '{key}' is not a party id"
        ))
    })
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            parties: 2,
            label_owner: ACTIVE_PARTY,
            features_per_party: None,
        }
    }
}

/// Full run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_max_depth")]
    pub max_depth: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_loss")]
    pub loss: LossFunction,
    /// Split candidates per feature.
    #[serde(default = "default_l")]
    pub l: usize,
    /// Decoy binary columns; defaults to `l`.
    #[serde(default)]
    pub l1: Option<usize>,
    /// Gaussian columns; defaults to `max(2, ceil(l/4))`.
    #[serde(default)]
    pub l2: Option<usize>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Kernel vectors per request; defaults to `max(2, n/4)` per node.
    #[serde(default)]
    pub r: Option<usize>,
    /// Mask width; defaults to `ceil(r/2)`.
    #[serde(default)]
    pub r_prime: Option<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_mechanism")]
    pub mechanism: Mechanism,
    /// Gradient clip bound for LDP mode.
    #[serde(default = "default_clip")]
    pub clip: f64,
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub partition: PartitionConfig,
}

fn default_rounds() -> usize {
    10
}
fn default_max_depth() -> usize {
    3
}
fn default_learning_rate() -> f64 {
    0.3
}
fn default_lambda() -> f64 {
    1.0
}
fn default_loss() -> LossFunction {
    LossFunction::Logistic
}
fn default_l() -> usize {
    10
}
fn default_sigma() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    1.0
}
fn default_mechanism() -> Mechanism {
    Mechanism::Laplace
}
fn default_clip() -> f64 {
    1.0
}

impl RunConfig {
    /// Parses and validates a TOML config document.
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path.as_ref())?;
        RunConfig::from_toml(&text)
    }

    /// Field-by-field validation; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("rounds: must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning_rate: must be in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.lambda < 0.0 {
            return Err(Error::Config(format!(
                "lambda: must be non-negative, got {}",
                self.lambda
            )));
        }
        if self.gamma < 0.0 {
            return Err(Error::Config(format!(
                "gamma: must be non-negative, got {}",
                self.gamma
            )));
        }
        if self.l == 0 {
            return Err(Error::Config("l: must be >= 1".into()));
        }
        if self.sigma <= 0.0 {
            return Err(Error::Config(format!(
                "sigma: must be positive, got {}",
                self.sigma
            )));
        }
        if self.mode == Mode::Ldp {
            if self.epsilon <= 0.0 {
                return Err(Error::Config(format!(
                    "epsilon: must be positive, got {}",
                    self.epsilon
                )));
            }
            if self.clip <= 0.0 {
                return Err(Error::Config(format!(
                    "clip: must be positive, got {}",
                    self.clip
                )));
            }
            if self.lambda <= 0.0 {
                return Err(Error::Config(
                    "lambda: the first-order score requires lambda > 0".into(),
                ));
            }
        }
        if let (Some(r), Some(rp)) = (self.r, self.r_prime) {
            if rp > r {
                return Err(Error::Config(format!(
                    "r_prime: must not exceed r ({rp} > {r})"
                )));
            }
        }
        if self.partition.parties == 0 {
            return Err(Error::Config("partition.parties: must be >= 1".into()));
        }
        if self.partition.label_owner != ACTIVE_PARTY {
            return Err(Error::Config(format!(
                "partition.label_owner: must be the active party ({ACTIVE_PARTY})"
            )));
        }
        if let Some(map) = &self.partition.features_per_party {
            for (key, feats) in map {
                let party = parse_party_key(key)?;
                if party == ACTIVE_PARTY {
                    return Err(Error::Config(
                        "partition.features_per_party: features cannot be assigned to the active party"
                            .into(),
                    ));
                }
                if party as usize > self.partition.parties {
                    return Err(Error::Config(format!(
                        "partition.features_per_party: party {party} exceeds parties = {}",
                        self.partition.parties
                    )));
                }
                if feats.is_empty() {
                    return Err(Error::Config(format!(
                        "partition.features_per_party: party {party} has no features"
                    )));
                }
            }
        }
        if let Some(data) = &self.data {
            match data.source {
                DataSource::Csv => {
                    if data.path.is_none() {
                        return Err(Error::Config("data.path: required for csv source".into()));
                    }
                    if data.label_column.is_none() {
                        return Err(Error::Config(
                            "data.label_column: required for csv source".into(),
                        ));
                    }
                }
                DataSource::Synthetic => {
                    if data.n < 2 || data.d < 1 {
                        return Err(Error::Config(format!(
                            "data: synthetic source needs n >= 2 and d >= 1, got n={} d={}",
                            data.n, data.d
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Builds the partition spec for a known feature list, dealing features
    /// round-robin when no explicit map is configured.
    pub fn partition_spec(&self, feature_names: &[String]) -> Result<VerticalPartitionSpec> {
        let id_column = self
            .data
            .as_ref()
            .map(|d| d.id_column.clone())
            .unwrap_or_else(default_id_column);
        let mut assignments = BTreeMap::new();
        match &self.partition.features_per_party {
            Some(map) => {
                for (key, feats) in map {
                    let party = parse_party_key(key)?;
                    for f in feats {
                        if !feature_names.contains(f) {
                            return Err(Error::Config(format!(
                                "partition.features_per_party: unknown feature '{f}'"
                            )));
                        }
                        if assignments.insert(f.clone(), party).is_some() {
                            return Err(Error::Config(format!(
                                "partition.features_per_party: feature '{f}' assigned twice"
                            )));
                        }
                    }
                }
                for f in feature_names {
                    if !assignments.contains_key(f) {
                        return Err(Error::Config(format!(
                            "partition.features_per_party: feature '{f}' unassigned"
                        )));
                    }
                }
            }
            None => {
                for (i, f) in feature_names.iter().enumerate() {
                    let party = (i % self.partition.parties) as PartyId + 1;
                    assignments.insert(f.clone(), party);
                }
            }
        }
        let spec = VerticalPartitionSpec {
            assignments,
            label_owner: self.partition.label_owner,
            id_column,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Protocol parameters derived from the configuration.
    pub fn params(&self) -> Result<ProtocolParams> {
        Ok(ProtocolParams {
            loss: self.loss,
            lambda: self.lambda,
            gamma: self.gamma,
            max_depth: self.max_depth,
            learning_rate: self.learning_rate,
            rounds: self.rounds,
            base_score: 0.0,
            l: self.l,
            l1: self.l1.unwrap_or(self.l),
            l2: self.l2.unwrap_or_else(|| 2.max(self.l.div_ceil(4))),
            mu: 0.0,
            sigma: self.sigma,
            r: self.r,
            r_prime: self.r_prime,
            budget: PrivacyBudget::new(self.epsilon.max(f64::MIN_POSITIVE), self.clip.max(f64::MIN_POSITIVE))?,
            mechanism: self.mechanism,
            fresh_basis_per_pp: true,
            ..ProtocolParams::default()
        })
    }
}
