use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use trustnet_core::consensus::{
    run_consensus, select_committee_abc, update_trust, ConsensusConfig, Protocol, RoundInput, ScenarioEvaluator,
    TrustState, VotingPolicy,
};
use trustnet_core::harness::{default_profiles, Network, ExperimentConfig};
use trustnet_core::ledger::verify_jsonl;
use trustnet_core::netsim::NetworkConfig;
use trustnet_core::responders::propose;
use trustnet_core::scenario::{assign_attackers, generate_scenario, optimal_allocation, ScenarioOverrides};

fn consensus_rounds(c: &mut Criterion) {
    let scenario = generate_scenario(1, &ScenarioOverrides::default()).unwrap();
    let candidates: Vec<_> = default_profiles().iter().map(|p| propose(p, &scenario).unwrap()).collect();
    let evaluator = ScenarioEvaluator::new(&scenario);
    let net = NetworkConfig::default();
    let policy = VotingPolicy::honest();
    let trust = TrustState::new(10);
    let mut group = c.benchmark_group("consensus_round");
    for protocol in Protocol::ALL {
        let cfg = ConsensusConfig::with_protocol(protocol);
        group.bench_function(protocol.name(), |b| {
            b.iter(|| {
                let input = RoundInput {
                    round: 0,
                    candidates: &candidates,
                    policy: &policy,
                    cfg: &cfg,
                    net: &net,
                    evaluator: &evaluator,
                };
                black_box(run_consensus(input, Some(&trust)).unwrap())
            })
        });
    }
    group.finish();
}

fn trust_update(c: &mut Criterion) {
    let scenario = generate_scenario(2, &ScenarioOverrides::default()).unwrap();
    let candidates: Vec<_> = default_profiles().iter().map(|p| propose(p, &scenario).unwrap()).collect();
    let evaluator = ScenarioEvaluator::new(&scenario);
    let cfg = ConsensusConfig::default();
    let net = NetworkConfig::default();
    let policy = VotingPolicy::honest();
    let input = RoundInput {
        round: 0,
        candidates: &candidates,
        policy: &policy,
        cfg: &cfg,
        net: &net,
        evaluator: &evaluator,
    };
    let r = run_consensus(input, None).unwrap();
    let trust = TrustState::new(10);
    c.bench_function("update_trust", |b| b.iter(|| black_box(update_trust(&trust, &r.outcome, &r.log))));
}

fn abc_committee(c: &mut Criterion) {
    let trust: Vec<f64> = (0..16).map(|i| 1.0 / (1.0 + i as f64)).collect();
    let cfg = ConsensusConfig {
        n: 16,
        ..ConsensusConfig::with_protocol(Protocol::AbcPbft)
    };
    c.bench_function("select_committee_abc_n16_m8", |b| {
        b.iter(|| black_box(select_committee_abc(&trust, 8, &cfg, 7).unwrap()))
    });
}

fn optimizer(c: &mut Criterion) {
    let scenario = generate_scenario(3, &ScenarioOverrides::default()).unwrap();
    let assignment = assign_attackers(&scenario);
    c.bench_function("optimal_allocation_30_lbs", |b| {
        b.iter(|| black_box(optimal_allocation(&scenario, &assignment).unwrap()))
    });
}

fn ledger(c: &mut Criterion) {
    let mut net = Network::new(ExperimentConfig::default()).unwrap();
    for _ in 0..16 {
        net.run_round().unwrap();
    }
    let text = net.replicas()[0].to_jsonl().into_bytes();
    c.bench_function("verify_jsonl_16_blocks", |b| b.iter(|| black_box(verify_jsonl(&text).unwrap())));
}

criterion_group!(benches, consensus_rounds, trust_update, abc_committee, optimizer, ledger);
criterion_main!(benches);
