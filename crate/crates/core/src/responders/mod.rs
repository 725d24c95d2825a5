//! Agents that answer a power-allocation request.
//!
//! Scripted responders stand in for language models of varying quality;
//! a remote responder forwards the prompt to an HTTP endpoint and parses the
//! line-protocol reply. Every candidate satisfies the budget constraint and
//! carries a SHA-256 digest of its canonical encoding.

mod prompt;
pub(crate) mod remote;
mod reply;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::Digest32;
use crate::node::NodeId;
use crate::scenario::{
    assign_attackers, average_defense, optimal_allocation, PowerAllocation, ScenarioError,
    WirelessScenario,
};

pub use prompt::{build_prompt, format_history_prompt, format_query_prompt, PromptRecord};
pub use remote::{remote_propose, remote_propose_batch, RemoteError, DEFAULT_MAX_IN_FLIGHT, DEFAULT_TIMEOUT_S};
pub use reply::{parse_allocation_reply, render_reply, ReplyError};

/// Self-reported defense a malicious responder attaches to its candidate.
pub const FRAUDULENT_CLAIM: f64 = 0.99;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResponderError {
    #[error("noise_sigma {0} outside [0, 1]")]
    InvalidNoise(f64),
    #[error("remote profile {0} has no endpoint")]
    MissingEndpoint(NodeId),
    #[error("remote profile {0} cannot propose without a network call")]
    RemoteProfile(NodeId),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("claimed defense {0} outside [0, 1]")]
    InvalidClaim(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ResponderKind {
    NearOptimal,
    Proportional,
    Uniform,
    Random,
    MaliciousInverse,
    Remote,
}

impl ResponderKind {
    pub fn is_malicious(self) -> bool {
        matches!(self, ResponderKind::MaliciousInverse)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponderProfile {
    pub id: NodeId,
    pub kind: ResponderKind,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
}

impl ResponderProfile {
    pub fn new(id: usize, kind: ResponderKind, noise_sigma: f64, seed: u64) -> Self {
        ResponderProfile {
            id: NodeId(id),
            kind,
            noise_sigma,
            seed,
            endpoint: None,
        }
    }

    pub fn validate(&self) -> Result<(), ResponderError> {
        if !(0.0..=1.0).contains(&self.noise_sigma) {
            return Err(ResponderError::InvalidNoise(self.noise_sigma));
        }
        if self.kind == ResponderKind::Remote && self.endpoint.is_none() {
            return Err(ResponderError::MissingEndpoint(self.id));
        }
        Ok(())
    }
}

/// One agent's proposed allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseCandidate {
    pub proposer: NodeId,
    pub allocation: PowerAllocation,
    pub claimed_defense: f64,
    pub candidate_hash: Digest32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
}

/// Milliwatt quantization used by the canonical encoding.
pub fn to_milliwatts(p_w: f64) -> i64 {
    (p_w * 1000.0).round() as i64
}

impl ResponseCandidate {
    /// Checks the budget constraint and computes the digest.
    pub fn new(
        proposer: NodeId,
        allocation: PowerAllocation,
        claimed_defense: f64,
        raw_text: Option<String>,
        p_total_w: f64,
    ) -> Result<Self, ResponderError> {
        allocation.check(allocation.len(), p_total_w)?;
        if !(0.0..=1.0).contains(&claimed_defense) {
            return Err(ResponderError::InvalidClaim(claimed_defense));
        }
        let mut c = ResponseCandidate {
            proposer,
            allocation,
            claimed_defense,
            candidate_hash: Digest32::ZERO,
            raw_text,
        };
        c.candidate_hash = Digest32::of(&c.canonical_bytes());
        Ok(c)
    }

    /// Proposer (u64 BE), power count (u32 BE), powers as milliwatts
    /// (i64 BE each), claimed defense in parts per million (u32 BE).
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.allocation.len());
        out.extend_from_slice(&(self.proposer.0 as u64).to_be_bytes());
        out.extend_from_slice(&(self.allocation.len() as u32).to_be_bytes());
        for &p in &self.allocation.powers_w {
            out.extend_from_slice(&to_milliwatts(p).to_be_bytes());
        }
        let ppm = (self.claimed_defense * 1e6).round() as u32;
        out.extend_from_slice(&ppm.to_be_bytes());
        out
    }

    pub fn hash_is_valid(&self) -> bool {
        Digest32::of(&self.canonical_bytes()) == self.candidate_hash
    }
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream seed for a responder on a given scenario.
pub fn responder_seed(profile_seed: u64, scenario_seed: u64) -> u64 {
    splitmix(profile_seed ^ splitmix(scenario_seed))
}

fn scale_to(powers: Vec<f64>, total: f64) -> Vec<f64> {
    let sum: f64 = powers.iter().sum();
    if sum <= 0.0 {
        return vec![total / powers.len() as f64; powers.len()];
    }
    let factor = total / sum;
    let mut out: Vec<f64> = powers.into_iter().map(|p| p * factor).collect();
    // Rounding can push the sum a hair past the budget.
    let over: f64 = out.iter().sum::<f64>() - total;
    if over > 0.0 {
        if let Some(max) = out.iter_mut().max_by(|a, b| a.total_cmp(b)) {
            *max = (*max - over).max(0.0);
        }
    }
    out
}

/// Uniform split of the budget, also the fallback for failed remote calls.
pub fn uniform_candidate(id: NodeId, scenario: &WirelessScenario) -> ResponseCandidate {
    let alloc = PowerAllocation::uniform(scenario.n_lbs, scenario.p_total_w);
    honest_candidate(id, alloc, scenario, None).expect("uniform allocation is feasible")
}

fn honest_candidate(
    id: NodeId,
    allocation: PowerAllocation,
    scenario: &WirelessScenario,
    raw_text: Option<String>,
) -> Result<ResponseCandidate, ResponderError> {
    let assignment = assign_attackers(scenario);
    let claim = average_defense(scenario, &allocation, &assignment)?.average_defense;
    ResponseCandidate::new(id, allocation, claim.clamp(0.0, 1.0), raw_text, scenario.p_total_w)
}

/// Allocation that wastes the budget: everything on the station where it
/// helps least.
pub fn least_effective_allocation(scenario: &WirelessScenario) -> PowerAllocation {
    let assignment = assign_attackers(scenario);
    let mut best: Option<(f64, usize)> = None;
    for i in 0..scenario.n_lbs {
        let mut powers = vec![0.0; scenario.n_lbs];
        powers[i] = scenario.p_total_w;
        let v = average_defense(scenario, &PowerAllocation::new(powers), &assignment)
            .expect("single-station allocation is feasible")
            .average_defense;
        if best.is_none_or(|(bv, _)| v < bv) {
            best = Some((v, i));
        }
    }
    let mut powers = vec![0.0; scenario.n_lbs];
    powers[best.map_or(0, |(_, i)| i)] = scenario.p_total_w;
    PowerAllocation::new(powers)
}

/// Scripted proposal for every kind except [`ResponderKind::Remote`].
pub fn propose(profile: &ResponderProfile, scenario: &WirelessScenario) -> Result<ResponseCandidate, ResponderError> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(responder_seed(profile.seed, scenario.seed));
    let n = scenario.n_lbs;
    let total = scenario.p_total_w;
    let id = profile.id;

    match profile.kind {
        ResponderKind::NearOptimal => {
            let assignment = assign_attackers(scenario);
            let optimum = match optimal_allocation(scenario, &assignment) {
                Ok(a) => a,
                // Nothing is attacked; any allocation is optimal.
                Err(ScenarioError::NoTargets) => PowerAllocation::uniform(n, total),
                Err(e) => return Err(e.into()),
            };
            if profile.noise_sigma == 0.0 {
                return honest_candidate(id, optimum, scenario, None);
            }
            let noise = Normal::new(1.0, profile.noise_sigma).expect("sigma validated");
            let noisy: Vec<f64> = optimum
                .powers_w
                .iter()
                .map(|p| p * noise.sample(&mut rng).max(0.0))
                .collect();
            honest_candidate(id, PowerAllocation::new(scale_to(noisy, total)), scenario, None)
        }
        ResponderKind::Proportional => {
            let weights: Vec<f64> = (0..n).map(|i| scenario.lbs_distance(i).powf(scenario.alpha)).collect();
            honest_candidate(id, PowerAllocation::new(scale_to(weights, total)), scenario, None)
        }
        ResponderKind::Uniform => Ok(uniform_candidate(id, scenario)),
        ResponderKind::Random => {
            let draws: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            honest_candidate(id, PowerAllocation::new(scale_to(draws, total)), scenario, None)
        }
        ResponderKind::MaliciousInverse => ResponseCandidate::new(
            id,
            least_effective_allocation(scenario),
            FRAUDULENT_CLAIM,
            None,
            total,
        ),
        ResponderKind::Remote => Err(ResponderError::RemoteProfile(id)),
    }
}
