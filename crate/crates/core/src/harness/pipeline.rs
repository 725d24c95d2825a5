use serde::{Deserialize, Serialize};

use super::experiments::collect_candidates;
use super::{ExperimentConfig, HarnessError};
use crate::consensus::{run_consensus, update_trust, ConsensusOutcome, RoundInput, ScenarioEvaluator, TrustState, VotingPolicy};
use crate::ledger::{create_block, replicas_identical, Block, Chain};
use crate::responders::{build_prompt, PromptRecord};
use crate::scenario::{assign_attackers, average_defense, generate_scenario, WirelessScenario};
use crate::NodeId;

/// A remote responder that could not be used this round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponderFailure {
    pub node: NodeId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRound {
    pub scenario: WirelessScenario,
    pub outcome: ConsensusOutcome,
    pub block: Block,
    /// Defense the committed allocation achieves on the scenario.
    pub defense: f64,
    pub failures: Vec<ResponderFailure>,
}

/// Every node's view of the system across rounds: one chain replica per
/// node, shared trust and the prompt history.
#[derive(Debug, Clone)]
pub struct Network {
    cfg: ExperimentConfig,
    replicas: Vec<Chain>,
    trust: TrustState,
    history: Vec<PromptRecord>,
    round: u64,
    clock_s: f64,
}

impl Network {
    pub fn new(cfg: ExperimentConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let n = cfg.consensus.n;
        Ok(Network {
            cfg,
            replicas: vec![Chain::new(); n],
            trust: TrustState::new(n),
            history: Vec::new(),
            round: 0,
            clock_s: 0.0,
        })
    }

    pub fn replicas(&self) -> &[Chain] {
        &self.replicas
    }

    pub fn trust(&self) -> &TrustState {
        &self.trust
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Request, proposals, consensus, block creation and replication.
    pub fn run_round(&mut self) -> Result<PipelineRound, HarnessError> {
        let cfg = &self.cfg;
        let round = self.round;
        let seed = cfg.seed ^ round;
        let scenario = generate_scenario(seed, &cfg.scenario_overrides)?;
        let from = self.history.len().saturating_sub(cfg.history_len);
        let prompt = build_prompt(&self.history[from..], scenario.p_total_w, scenario.n_lbs);
        let (candidates, failures) = collect_candidates(cfg, &scenario, &prompt)?;

        let policy = VotingPolicy::with_byzantine(cfg.malicious_nodes(), cfg.malicious_policy, seed);
        let evaluator = ScenarioEvaluator::new(&scenario);
        let result = run_consensus(
            RoundInput {
                round,
                candidates: &candidates,
                policy: &policy,
                cfg: &cfg.consensus,
                net: &cfg.network,
                evaluator: &evaluator,
            },
            Some(&self.trust),
        )?;
        let outcome = result.outcome;

        let winner = &outcome.winner.allocation;
        winner
            .check(scenario.n_lbs, scenario.p_total_w)
            .map_err(|e| HarnessError::BudgetViolation(e.to_string()))?;
        let defense = average_defense(&scenario, winner, &assign_attackers(&scenario))?.average_defense;

        let now = self.clock_s + outcome.latency_s;
        let block = create_block(&outcome, self.replicas[0].tip(), now)?;
        for chain in &mut self.replicas {
            chain.append_block(block.clone())?;
        }
        if !replicas_identical(&self.replicas) {
            return Err(HarnessError::ReplicaDivergence { round });
        }

        self.trust = update_trust(&self.trust, &outcome, &result.log);
        self.history.push(PromptRecord {
            total_power_w: scenario.p_total_w,
            powers_w: winner.powers_w.clone(),
            defense_prob: defense,
        });
        self.clock_s = now;
        self.round += 1;

        Ok(PipelineRound {
            scenario,
            outcome,
            block,
            defense,
            failures,
        })
    }
}

/// One end-to-end round on a fresh network.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<(ConsensusOutcome, Block), HarnessError> {
    let r = Network::new(cfg.clone())?.run_round()?;
    Ok((r.outcome, r.block))
}
