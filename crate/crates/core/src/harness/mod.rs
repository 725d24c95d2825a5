//! Experiment configuration and drivers.

mod experiments;
mod pipeline;
mod report;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{ByzantinePolicy, ConsensusConfig, ConsensusError, Protocol};
use crate::ledger::LedgerError;
use crate::netsim::{NetError, NetworkConfig};
use crate::responders::{ResponderError, ResponderKind, ResponderProfile, DEFAULT_MAX_IN_FLIGHT, DEFAULT_TIMEOUT_S};
use crate::scenario::{generate_scenario, ScenarioError, ScenarioOverrides};
use crate::NodeId;

pub use experiments::{
    collect_candidates, defense_trials, mean_allocation, run_defense_experiment, run_latency_experiment, trial_seed, Strategy,
    TrialDefense,
};
pub use pipeline::{run_pipeline, Network, PipelineRound, ResponderFailure};
pub use report::{rows_to_csv, write_csv, ResultRow};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config file {path} not found")]
    MissingFile { path: String },
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("config schema error: {0}")]
    Schema(String),
    #[error("invalid config field {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Responder(#[from] ResponderError),
    #[error("committed winner breaks the power budget: {0}")]
    BudgetViolation(String),
    #[error("replica chains diverged after round {round}")]
    ReplicaDivergence { round: u64 },
    #[error("csv output failed: {0}")]
    Csv(String),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> HarnessError {
    HarnessError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Noise levels of the default honest responders.
pub const DEFAULT_NOISE: [f64; 8] = [0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35];

/// Ten scripted responders; the last two are malicious.
pub fn default_profiles() -> Vec<ResponderProfile> {
    let mut out: Vec<ResponderProfile> = DEFAULT_NOISE
        .iter()
        .enumerate()
        .map(|(i, &s)| ResponderProfile::new(i, ResponderKind::NearOptimal, s, 1000 + i as u64))
        .collect();
    for i in DEFAULT_NOISE.len()..DEFAULT_NOISE.len() + 2 {
        out.push(ResponderProfile::new(i, ResponderKind::MaliciousInverse, 0.0, 1000 + i as u64));
    }
    out
}

pub const DEFAULT_TARGETS: [f64; 7] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub reliability_target: Vec<f64>,
    pub protocols: Vec<Protocol>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            reliability_target: DEFAULT_TARGETS.to_vec(),
            protocols: Protocol::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub consensus: ConsensusConfig,
    pub network: NetworkConfig,
    pub scenario_overrides: ScenarioOverrides,
    pub responder_profiles: Vec<ResponderProfile>,
    pub sweep: SweepConfig,
    /// Noise of the lone responder in the single-agent baseline.
    pub single_noise_sigma: f64,
    /// Past rounds quoted in prompts to remote responders.
    pub history_len: usize,
    /// Voting behavior of malicious responders.
    pub malicious_policy: ByzantinePolicy,
    pub remote_timeout_s: f64,
    pub max_in_flight: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            trials: 100,
            consensus: ConsensusConfig::default(),
            network: NetworkConfig::default(),
            scenario_overrides: ScenarioOverrides::default(),
            responder_profiles: default_profiles(),
            sweep: SweepConfig::default(),
            single_noise_sigma: 0.75,
            history_len: 5,
            malicious_policy: ByzantinePolicy::SelfPromotion,
            remote_timeout_s: DEFAULT_TIMEOUT_S,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        self.consensus.validate()?;
        self.network
            .validate()
            .map_err(|e: NetError| invalid("network", e.to_string()))?;
        let n = self.consensus.n;
        if self.responder_profiles.len() != n {
            return Err(invalid(
                "responder_profiles",
                format!(
                    "{} profiles given but consensus.n is {n}",
                    self.responder_profiles.len()
                ),
            ));
        }
        let mut seen = vec![false; n];
        for (k, p) in self.responder_profiles.iter().enumerate() {
            let NodeId(id) = p.id;
            if id >= n || seen[id] {
                return Err(invalid(
                    format!("responder_profiles[{k}].id"),
                    format!("ids must be a permutation of 0..{n}, got {id}"),
                ));
            }
            seen[id] = true;
            p.validate()
                .map_err(|e| invalid(format!("responder_profiles[{k}]"), e.to_string()))?;
        }
        generate_scenario(self.seed, &self.scenario_overrides)
            .map_err(|e| invalid("scenario_overrides", e.to_string()))?;
        if self.sweep.reliability_target.is_empty() {
            return Err(invalid("sweep.reliability_target", "must not be empty"));
        }
        if self.sweep.protocols.is_empty() {
            return Err(invalid("sweep.protocols", "must not be empty"));
        }
        for (k, &t) in self.sweep.reliability_target.iter().enumerate() {
            let mut net = self.network;
            net.reliability_target = t;
            net.validate()
                .map_err(|e| invalid(format!("sweep.reliability_target[{k}]"), e.to_string()))?;
        }
        if !(0.0..=1.0).contains(&self.single_noise_sigma) {
            return Err(invalid("single_noise_sigma", "must lie in [0, 1]"));
        }
        if !(self.remote_timeout_s.is_finite() && self.remote_timeout_s > 0.0) {
            return Err(invalid("remote_timeout_s", "must be positive"));
        }
        if self.max_in_flight == 0 {
            return Err(invalid("max_in_flight", "must be at least 1"));
        }
        Ok(())
    }

    /// Nodes whose responders are malicious, in id order.
    pub fn malicious_nodes(&self) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self
            .responder_profiles
            .iter()
            .filter(|p| p.kind.is_malicious())
            .map(|p| p.id)
            .collect();
        out.sort();
        out
    }
}

/// Reads and validates a TOML config. Missing keys take their defaults.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            HarnessError::MissingFile {
                path: path.display().to_string(),
            }
        } else {
            HarnessError::Io {
                path: path.display().to_string(),
                reason: e.to_string(),
            }
        }
    })?;
    ExperimentConfig::from_toml(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.trials, 100);
        assert_eq!(cfg.responder_profiles.len(), 10);
        assert_eq!(cfg.malicious_nodes(), vec![NodeId(8), NodeId(9)]);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn profile_count_mismatch_names_both() {
        let err = ExperimentConfig::from_toml("[consensus]\nn = 12\n").unwrap_err().to_string();
        assert!(err.contains("10 profiles") && err.contains("is 12"), "{err}");
    }

    #[test]
    fn unknown_protocol_lists_options() {
        let err = ExperimentConfig::from_toml("[consensus]\nprotocol = \"RAFT\"\n")
            .unwrap_err()
            .to_string();
        for p in ["PBFT", "TPBFT", "ABCPBFT", "VAAP"] {
            assert!(err.contains(p), "{err}");
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ExperimentConfig::from_toml("trails = 3\n").unwrap_err().to_string();
        assert!(err.contains("trails"), "{err}");
    }

    #[test]
    fn zero_trials_rejected() {
        let err = ExperimentConfig::from_toml("trials = 0\n").unwrap_err().to_string();
        assert!(err.contains("trials"), "{err}");
    }

    #[test]
    fn bad_override_names_field() {
        let err = ExperimentConfig::from_toml("[scenario_overrides]\nn_lbs = 0\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("scenario_overrides"), "{err}");
    }

    #[test]
    fn missing_file_reported() {
        let err = load_config(Path::new("/nonexistent/trustnet.toml")).unwrap_err();
        assert!(matches!(err, HarnessError::MissingFile { .. }));
    }
}
