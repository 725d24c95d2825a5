use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pipeline::ResponderFailure;
use super::report::ResultRow;
use super::{ExperimentConfig, HarnessError};
use crate::consensus::{run_consensus, ConsensusConfig, RoundInput, ScenarioEvaluator, VotingPolicy};
use crate::responders::{
    build_prompt, parse_allocation_reply, propose, remote_propose_batch, uniform_candidate, ResponderKind,
    ResponderProfile, ResponseCandidate,
};
use crate::scenario::{
    assign_attackers, average_defense, generate_scenario, optimal_allocation, PowerAllocation, ScenarioError,
    WirelessScenario,
};
use crate::NodeId;

const SINGLE_SALT: u64 = 0x5349_4e47_4c45;
const RANDOM_SALT: u64 = 0x5241_4e44_4f4d;

/// RNG stream of one trial.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ trial as u64
}

/// Proposals from every responder, ordered by node id. Remote responders
/// that fail fall back to the uniform allocation and are reported.
pub fn collect_candidates(
    cfg: &ExperimentConfig,
    scenario: &WirelessScenario,
    prompt: &str,
) -> Result<(Vec<ResponseCandidate>, Vec<ResponderFailure>), HarnessError> {
    let mut profiles: Vec<&ResponderProfile> = cfg.responder_profiles.iter().collect();
    profiles.sort_by_key(|p| p.id);

    let requests: Vec<(String, String)> = profiles
        .iter()
        .filter(|p| p.kind == ResponderKind::Remote)
        .map(|p| (p.endpoint.clone().unwrap_or_default(), prompt.to_string()))
        .collect();
    let mut replies = if requests.is_empty() {
        Vec::new()
    } else {
        remote_propose_batch(&requests, cfg.max_in_flight, cfg.remote_timeout_s)
    }
    .into_iter();

    let mut candidates = Vec::with_capacity(profiles.len());
    let mut failures = Vec::new();
    for p in profiles {
        if p.kind != ResponderKind::Remote {
            candidates.push(propose(p, scenario)?);
            continue;
        }
        let parsed = match replies.next().expect("one reply per remote profile") {
            Ok(text) => parse_allocation_reply(&text, scenario, p.id).map_err(|e| e.to_string()),
            Err(e) => Err(e.to_string()),
        };
        match parsed {
            Ok(c) => candidates.push(c),
            Err(reason) => {
                failures.push(ResponderFailure { node: p.id, reason });
                candidates.push(uniform_candidate(p.id, scenario));
            }
        }
    }
    Ok((candidates, failures))
}

/// Element-wise mean of the candidate allocations, rescaled to the budget.
pub fn mean_allocation(candidates: &[ResponseCandidate], total_w: f64) -> PowerAllocation {
    let n = candidates.first().map_or(0, |c| c.allocation.len());
    let mut sum = vec![0.0; n];
    for c in candidates {
        for (s, p) in sum.iter_mut().zip(&c.allocation.powers_w) {
            *s += p;
        }
    }
    let mass: f64 = sum.iter().sum();
    if mass <= 0.0 {
        return PowerAllocation::uniform(n, total_w);
    }
    PowerAllocation::new(sum.into_iter().map(|s| s * total_w / mass).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Optimal,
    Trustworthy,
    MultiNoConsensus,
    Single,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Optimal,
        Strategy::Trustworthy,
        Strategy::MultiNoConsensus,
        Strategy::Single,
        Strategy::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Optimal => "optimal",
            Strategy::Trustworthy => "trustworthy",
            Strategy::MultiNoConsensus => "multi-no-consensus",
            Strategy::Single => "single",
            Strategy::Random => "random",
        }
    }
}

/// Average defense of every strategy on one scenario, in [`Strategy::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDefense {
    pub seed: u64,
    pub defense: [f64; 5],
    pub winner: NodeId,
}

fn defense_of(scenario: &WirelessScenario, alloc: &PowerAllocation) -> Result<f64, HarnessError> {
    Ok(average_defense(scenario, alloc, &assign_attackers(scenario))?.average_defense)
}

fn baseline(kind: ResponderKind, sigma: f64, seed: u64, scenario: &WirelessScenario) -> Result<f64, HarnessError> {
    let c = propose(&ResponderProfile::new(0, kind, sigma, seed), scenario)?;
    defense_of(scenario, &c.allocation)
}

pub(crate) fn defense_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialDefense, HarnessError> {
    let seed = trial_seed(cfg.seed, trial);
    let scenario = generate_scenario(seed, &cfg.scenario_overrides)?;
    let optimum = match optimal_allocation(&scenario, &assign_attackers(&scenario)) {
        Ok(a) => a,
        Err(ScenarioError::NoTargets) => PowerAllocation::uniform(scenario.n_lbs, scenario.p_total_w),
        Err(e) => return Err(e.into()),
    };
    let prompt = build_prompt(&[], scenario.p_total_w, scenario.n_lbs);
    let (candidates, _) = collect_candidates(cfg, &scenario, &prompt)?;

    let policy = VotingPolicy::with_byzantine(cfg.malicious_nodes(), cfg.malicious_policy, seed);
    let evaluator = ScenarioEvaluator::new(&scenario);
    let result = run_consensus(
        RoundInput {
            round: 0,
            candidates: &candidates,
            policy: &policy,
            cfg: &cfg.consensus,
            net: &cfg.network,
            evaluator: &evaluator,
        },
        None,
    )?;
    let winner = &result.outcome.winner;

    let defense = [
        defense_of(&scenario, &optimum)?,
        defense_of(&scenario, &winner.allocation)?,
        defense_of(&scenario, &mean_allocation(&candidates, scenario.p_total_w))?,
        baseline(ResponderKind::NearOptimal, cfg.single_noise_sigma, cfg.seed ^ SINGLE_SALT, &scenario)?,
        baseline(ResponderKind::Random, 0.0, cfg.seed ^ RANDOM_SALT, &scenario)?,
    ];
    Ok(TrialDefense {
        seed,
        defense,
        winner: winner.proposer,
    })
}

/// Runs every defense trial in parallel and returns them in trial order.
pub fn defense_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialDefense>, HarnessError> {
    cfg.validate()?;
    (0..cfg.trials).into_par_iter().map(|t| defense_trial(cfg, t)).collect()
}

/// Mean average defense per strategy over fresh scenarios.
pub fn run_defense_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, HarnessError> {
    let trials = defense_trials(cfg)?;
    Ok(Strategy::ALL
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let values: Vec<f64> = trials.iter().map(|t| t.defense[k]).collect();
            ResultRow::from_samples("defense", s.name(), "average_defense", &values)
        })
        .collect())
}

/// `(latency_s, messages, bits)` for every (protocol, target) pair.
fn latency_trial(cfg: &ExperimentConfig, trial: usize) -> Result<Vec<[f64; 3]>, HarnessError> {
    let seed = trial_seed(cfg.seed, trial);
    let scenario = generate_scenario(seed, &cfg.scenario_overrides)?;
    let prompt = build_prompt(&[], scenario.p_total_w, scenario.n_lbs);
    let (candidates, _) = collect_candidates(cfg, &scenario, &prompt)?;
    let evaluator = ScenarioEvaluator::new(&scenario);
    let policy = VotingPolicy::honest();

    let mut out = Vec::new();
    for &protocol in &cfg.sweep.protocols {
        let consensus = ConsensusConfig {
            protocol,
            ..cfg.consensus.clone()
        };
        for &target in &cfg.sweep.reliability_target {
            let mut net = cfg.network;
            net.reliability_target = target;
            let o = run_consensus(
                RoundInput {
                    round: 0,
                    candidates: &candidates,
                    policy: &policy,
                    cfg: &consensus,
                    net: &net,
                    evaluator: &evaluator,
                },
                None,
            )?
            .outcome;
            out.push([o.latency_s, o.message_count as f64, o.total_bits as f64]);
        }
    }
    Ok(out)
}

/// Fault-free round latency per protocol and reliability target.
pub fn run_latency_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, HarnessError> {
    cfg.validate()?;
    let trials: Vec<Vec<[f64; 3]>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| latency_trial(cfg, t))
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    let mut k = 0;
    for protocol in &cfg.sweep.protocols {
        let experiment = format!("latency-{}", protocol.name());
        for target in &cfg.sweep.reliability_target {
            let param = target.to_string();
            for (m, metric) in ["latency_s", "message_count", "total_bits"].into_iter().enumerate() {
                let values: Vec<f64> = trials.iter().map(|t| t[k][m]).collect();
                rows.push(ResultRow::from_samples(&experiment, &param, metric, &values));
            }
            k += 1;
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::responders::remote::stub;
    use crate::responders::render_reply;

    fn remote_cfg(url: &str) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.responder_profiles[3].kind = ResponderKind::Remote;
        cfg.responder_profiles[3].endpoint = Some(url.to_string());
        cfg.remote_timeout_s = 5.0;
        cfg
    }

    #[test]
    fn failed_remote_falls_back_to_uniform() {
        let (url, _) = stub::serve(500, "{}".into(), 0);
        let cfg = remote_cfg(&url);
        let scenario = generate_scenario(3, &cfg.scenario_overrides).unwrap();
        let (cands, failures) = collect_candidates(&cfg, &scenario, "q").unwrap();
        assert_eq!(failures.len(), 1);
        assert_eq!(failures[0].node, NodeId(3));
        assert_eq!(cands[3], uniform_candidate(NodeId(3), &scenario));
        assert_eq!(cands.len(), 10);
    }

    #[test]
    fn valid_remote_reply_is_used() {
        let scenario = generate_scenario(3, &Default::default()).unwrap();
        let scripted = propose(&ResponderProfile::new(3, ResponderKind::Proportional, 0.0, 0), &scenario).unwrap();
        let body = serde_json::json!({ "reply": render_reply(&scripted) }).to_string();
        let (url, _) = stub::serve(200, body, 0);
        let (cands, failures) = collect_candidates(&remote_cfg(&url), &scenario, "q").unwrap();
        assert!(failures.is_empty());
        assert_eq!(cands[3].allocation, scripted.allocation);
    }

    #[test]
    fn mean_allocation_spends_the_budget() {
        let scenario = generate_scenario(8, &Default::default()).unwrap();
        let cfg = ExperimentConfig::default();
        let (cands, _) = collect_candidates(&cfg, &scenario, "").unwrap();
        let m = mean_allocation(&cands, scenario.p_total_w);
        assert!((m.total() - scenario.p_total_w).abs() < 1e-9 * scenario.p_total_w);
        assert!(m.check(scenario.n_lbs, scenario.p_total_w).is_ok());
    }
}
