//! Voting consensus over response candidates.
//!
//! Four protocols share one simulated message layer: classic three-phase
//! PBFT, two committee variants (trust-ranked and bee-colony selected) that
//! run PBFT inside a committee and then disseminate the commit certificate,
//! and a single-round majority vote whose collected ballots form the proof.
//! Every emitted message is accounted through [`crate::netsim`], so message
//! counts, bit totals and latency come out of the same run.

mod abc;
mod engine;
mod trust;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::Digest32;
use crate::netsim::{NetError, NetworkConfig, PhaseTag};
use crate::node::NodeId;
use crate::responders::ResponseCandidate;
use crate::scenario::{assign_attackers, average_defense, AttackAssignment, WirelessScenario};

pub use abc::{committee_fitness, protocol_bits, protocol_message_count, select_committee_abc};
pub use engine::{committee_for, run_abcpbft, run_consensus, run_pbft, run_tpbft, run_vaap};
pub use trust::{global_trust_from_local, top_k_by_trust, update_trust, TrustState, PRIOR_TRUST};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConsensusError {
    #[error("invalid consensus config: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("no valid candidates to vote on")]
    NoCandidates,
    #[error("empty node list")]
    EmptyNodes,
    #[error("{protocol} round {round} did not commit after {views} views")]
    NoCommit { protocol: Protocol, round: u64, views: u32 },
    #[error("committee size {m} exceeds node count {n}")]
    CommitteeTooLarge { m: usize, n: usize },
    #[error("trust state covers {found} nodes, expected {expected}")]
    TrustSize { expected: usize, found: usize },
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "PBFT")]
    Pbft,
    #[serde(rename = "TPBFT")]
    Tpbft,
    #[serde(rename = "ABCPBFT")]
    AbcPbft,
    #[serde(rename = "VAAP")]
    Vaap,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [Protocol::Pbft, Protocol::Tpbft, Protocol::AbcPbft, Protocol::Vaap];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Pbft => "PBFT",
            Protocol::Tpbft => "TPBFT",
            Protocol::AbcPbft => "ABCPBFT",
            Protocol::Vaap => "VAAP",
        }
    }

    pub fn uses_committee(self) -> bool {
        matches!(self, Protocol::Tpbft | Protocol::AbcPbft)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown protocol {0:?}, expected one of PBFT, TPBFT, ABCPBFT, VAAP")]
pub struct UnknownProtocol(pub String);

impl FromStr for Protocol {
    type Err = UnknownProtocol;

    /// Case-insensitive; hyphens are ignored so `T-PBFT` and `abc-pbft` work.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| *c != '-' && *c != '_').collect::<String>().to_ascii_uppercase();
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| UnknownProtocol(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbcParams {
    pub population: usize,
    pub iterations: usize,
    pub scout_limit: usize,
}

impl Default for AbcParams {
    fn default() -> Self {
        AbcParams {
            population: 20,
            iterations: 50,
            scout_limit: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrustWeights {
    pub w_trust: f64,
    pub w_bits: f64,
}

impl Default for TrustWeights {
    fn default() -> Self {
        TrustWeights {
            w_trust: 1.0,
            w_bits: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsensusConfig {
    pub protocol: Protocol,
    pub n: usize,
    /// Faults tolerated by the group running PBFT: the whole network for
    /// PBFT, the committee for the committee variants. Defaults to
    /// `(group - 1) / 3`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<usize>,
    /// Committee size for TPBFT and ABCPBFT. Defaults to `ceil(0.7 n)` and
    /// `ceil(n / 2)` respectively.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub committee_size: Option<usize>,
    pub base_msg_bits: u64,
    pub signature_bits: u64,
    pub abc_params: AbcParams,
    pub trust_weights: TrustWeights,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        ConsensusConfig {
            protocol: Protocol::Pbft,
            n: 10,
            f: None,
            committee_size: None,
            base_msg_bits: 2000,
            signature_bits: 512,
            abc_params: AbcParams::default(),
            trust_weights: TrustWeights::default(),
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConsensusError {
    ConsensusError::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

impl ConsensusConfig {
    pub fn with_protocol(protocol: Protocol) -> Self {
        ConsensusConfig {
            protocol,
            ..Default::default()
        }
    }

    /// Size of the group that runs the voting phases.
    pub fn group_size(&self) -> usize {
        match self.protocol {
            Protocol::Pbft | Protocol::Vaap => self.n,
            Protocol::Tpbft => self.committee_size.unwrap_or((self.n * 7).div_ceil(10)),
            Protocol::AbcPbft => self.committee_size.unwrap_or(self.n.div_ceil(2)),
        }
    }

    /// Byzantine faults the PBFT group tolerates.
    pub fn faults(&self) -> usize {
        self.f.unwrap_or(self.group_size().saturating_sub(1) / 3)
    }

    /// Matching votes needed to commit.
    pub fn quorum(&self) -> usize {
        match self.protocol {
            Protocol::Vaap => self.n / 2 + 1,
            _ => 2 * self.faults() + 1,
        }
    }

    pub fn validate(&self) -> Result<(), ConsensusError> {
        if self.n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if self.protocol == Protocol::Vaap && self.n < 2 {
            return Err(invalid("n", "VAAP needs at least 2 nodes"));
        }
        if self.base_msg_bits == 0 {
            return Err(invalid("base_msg_bits", "must be positive"));
        }
        if self.signature_bits == 0 {
            return Err(invalid("signature_bits", "must be positive"));
        }
        let k = self.group_size();
        if self.protocol.uses_committee() && !(1..=self.n).contains(&k) {
            return Err(invalid(
                "committee_size",
                format!("{k} outside [1, n = {}]", self.n),
            ));
        }
        if self.protocol != Protocol::Vaap {
            let f = self.faults();
            if k < 3 * f + 1 {
                return Err(invalid("f", format!("group of {k} cannot tolerate f = {f}; needs at least {}", 3 * f + 1)));
            }
        }
        if self.abc_params.population < 2 {
            return Err(invalid("abc_params.population", "must be at least 2"));
        }
        if self.abc_params.iterations < 1 {
            return Err(invalid("abc_params.iterations", "must be at least 1"));
        }
        if !(self.trust_weights.w_trust.is_finite() && self.trust_weights.w_bits.is_finite()) {
            return Err(invalid("trust_weights", "weights must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VoteKind {
    PrePrepare,
    Prepare,
    Commit,
    Proposal,
    Ballot,
}

/// Simulated per-node signing key. Only the owner signs with it; verifiers
/// recompute, standing in for public-key verification.
fn node_secret(node: NodeId) -> [u8; 32] {
    let mut seed = b"trustnet-node-key".to_vec();
    seed.extend_from_slice(&(node.0 as u64).to_be_bytes());
    Digest32::of(&seed).0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub voter: NodeId,
    pub candidate_hash: Digest32,
    pub round: u64,
    pub view: u32,
    pub kind: VoteKind,
    pub signature: Digest32,
}

impl Vote {
    pub fn signing_bytes(voter: NodeId, candidate_hash: &Digest32, round: u64, view: u32, kind: VoteKind) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 32 + 8 + 4 + 1);
        out.extend_from_slice(&(voter.0 as u64).to_be_bytes());
        out.extend_from_slice(candidate_hash.as_bytes());
        out.extend_from_slice(&round.to_be_bytes());
        out.extend_from_slice(&view.to_be_bytes());
        out.push(kind as u8);
        out
    }

    fn sign_with(signer: NodeId, voter: NodeId, candidate_hash: Digest32, round: u64, view: u32, kind: VoteKind) -> Vote {
        let mut bytes = node_secret(signer).to_vec();
        bytes.extend(Vote::signing_bytes(voter, &candidate_hash, round, view, kind));
        Vote {
            voter,
            candidate_hash,
            round,
            view,
            kind,
            signature: Digest32::of(&bytes),
        }
    }

    pub fn signed(voter: NodeId, candidate_hash: Digest32, round: u64, view: u32, kind: VoteKind) -> Vote {
        Vote::sign_with(voter, voter, candidate_hash, round, view, kind)
    }

    /// A vote claiming to come from `victim` but signed with `forger`'s key.
    pub fn forged(forger: NodeId, victim: NodeId, candidate_hash: Digest32, round: u64, view: u32, kind: VoteKind) -> Vote {
        Vote::sign_with(forger, victim, candidate_hash, round, view, kind)
    }

    pub fn verify(&self) -> bool {
        Vote::signed(self.voter, self.candidate_hash, self.round, self.view, self.kind).signature == self.signature
    }
}

/// `nodes[round mod n]`.
pub fn elect_leader(round: u64, nodes: &[NodeId]) -> Result<NodeId, ConsensusError> {
    if nodes.is_empty() {
        return Err(ConsensusError::EmptyNodes);
    }
    Ok(nodes[(round % nodes.len() as u64) as usize])
}

/// Highest score; ties go to the smallest hash.
pub fn honest_vote(scores: &BTreeMap<Digest32, f64>) -> Result<Digest32, ConsensusError> {
    let mut best: Option<(Digest32, f64)> = None;
    for (h, &s) in scores {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((*h, s));
        }
    }
    best.map(|(h, _)| h).ok_or(ConsensusError::NoCandidates)
}

/// Scores a candidate, or rejects it with `None`.
pub trait Evaluator {
    fn score(&self, candidate: &ResponseCandidate) -> Option<f64>;
}

/// Re-evaluates each candidate's true average defense on the scenario,
/// ignoring its self-reported claim.
#[derive(Debug, Clone)]
pub struct ScenarioEvaluator {
    scenario: WirelessScenario,
    assignment: AttackAssignment,
}

impl ScenarioEvaluator {
    pub fn new(scenario: &WirelessScenario) -> Self {
        ScenarioEvaluator {
            assignment: assign_attackers(scenario),
            scenario: scenario.clone(),
        }
    }
}

impl Evaluator for ScenarioEvaluator {
    fn score(&self, candidate: &ResponseCandidate) -> Option<f64> {
        if !candidate.hash_is_valid() {
            return None;
        }
        candidate.allocation.check(self.scenario.n_lbs, self.scenario.p_total_w).ok()?;
        average_defense(&self.scenario, &candidate.allocation, &self.assignment)
            .ok()
            .map(|r| r.average_defense)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ByzantinePolicy {
    /// Votes for the lowest-scoring candidate.
    WorstCandidate,
    /// Votes for its own candidate.
    SelfPromotion,
    /// Votes for a uniformly random candidate, independently per message.
    Random,
    /// Sends nothing.
    Abstain,
    /// Tells even-indexed recipients the best candidate and odd ones the worst.
    Equivocate,
    /// Votes for the worst candidate and also injects votes in other nodes'
    /// names that it cannot sign.
    ForgeVotes,
}

impl ByzantinePolicy {
    pub const ALL: [ByzantinePolicy; 6] = [
        ByzantinePolicy::WorstCandidate,
        ByzantinePolicy::SelfPromotion,
        ByzantinePolicy::Random,
        ByzantinePolicy::Abstain,
        ByzantinePolicy::Equivocate,
        ByzantinePolicy::ForgeVotes,
    ];
}

/// Which nodes misbehave and how. Everyone else follows the protocol.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VotingPolicy {
    pub byzantine: BTreeMap<NodeId, ByzantinePolicy>,
    pub seed: u64,
}

impl VotingPolicy {
    pub fn honest() -> Self {
        VotingPolicy::default()
    }

    pub fn with_byzantine(nodes: impl IntoIterator<Item = NodeId>, policy: ByzantinePolicy, seed: u64) -> Self {
        VotingPolicy {
            byzantine: nodes.into_iter().map(|n| (n, policy)).collect(),
            seed,
        }
    }

    pub fn is_byzantine(&self, node: NodeId) -> bool {
        self.byzantine.contains_key(&node)
    }

    pub fn policy_of(&self, node: NodeId) -> Option<ByzantinePolicy> {
        self.byzantine.get(&node).copied()
    }
}

/// Per-phase accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: PhaseTag,
    pub view: u32,
    pub messages: u64,
    pub bits: u64,
    pub latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusOutcome {
    pub protocol: Protocol,
    pub round: u64,
    pub winner: ResponseCandidate,
    /// Commit certificate (PBFT family) or ballot proof (VAAP) for the winner.
    pub votes: Vec<Vote>,
    pub quorum: usize,
    pub latency_s: f64,
    pub message_count: u64,
    pub total_bits: u64,
    /// Nodes that ran the voting phases, in id order.
    pub committee: Vec<NodeId>,
    pub views: u32,
    /// What each honest node accepted.
    pub decisions: Vec<(NodeId, Digest32)>,
    pub phases: Vec<PhaseRecord>,
}

impl ConsensusOutcome {
    /// Distinct voters whose valid signed vote supports the winner.
    pub fn supporting_votes(&self) -> usize {
        let h = self.winner.candidate_hash;
        let mut voters: Vec<NodeId> = self
            .votes
            .iter()
            .filter(|v| v.candidate_hash == h && v.round == self.round && v.verify())
            .map(|v| v.voter)
            .collect();
        voters.sort();
        voters.dedup();
        voters.len()
    }

    pub fn has_quorum(&self) -> bool {
        self.quorum > 0 && self.supporting_votes() >= self.quorum && self.winner.hash_is_valid()
    }

    /// True when every honest decision names the winner.
    pub fn is_consistent(&self) -> bool {
        self.decisions.iter().all(|(_, h)| *h == self.winner.candidate_hash)
    }
}

/// Every valid vote each node received during a round.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VoteLog {
    /// Nodes that were expected to vote.
    pub participants: Vec<NodeId>,
    pub received: Vec<(NodeId, Vote)>,
}

/// Inputs shared by every protocol run.
#[derive(Clone, Copy)]
pub struct RoundInput<'a> {
    pub round: u64,
    pub candidates: &'a [ResponseCandidate],
    pub policy: &'a VotingPolicy,
    pub cfg: &'a ConsensusConfig,
    pub net: &'a NetworkConfig,
    pub evaluator: &'a dyn Evaluator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub outcome: ConsensusOutcome,
    pub log: VoteLog,
}
