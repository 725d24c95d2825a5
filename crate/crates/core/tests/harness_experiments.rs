use trustnet_core::consensus::{ByzantinePolicy, Protocol};
use trustnet_core::harness::{
    collect_candidates, default_profiles, defense_trials, rows_to_csv, run_defense_experiment, run_latency_experiment, run_pipeline,
    ExperimentConfig, Network, ResultRow, Strategy,
};
use trustnet_core::ledger::verify_chain;
use trustnet_core::responders::{ResponderKind, ResponderProfile};

fn mean(rows: &[ResultRow], experiment: &str, param: &str, metric: &str) -> f64 {
    rows.iter()
        .find(|r| r.experiment == experiment && r.param == param && r.metric == metric)
        .unwrap_or_else(|| panic!("missing row {experiment}/{param}/{metric}"))
        .mean
}

#[test]
fn defense_ordering_holds() {
    let cfg = ExperimentConfig { trials: 100, ..Default::default() };
    let rows = run_defense_experiment(&cfg).unwrap();
    let m: Vec<f64> = Strategy::ALL.iter().map(|s| mean(&rows, "defense", s.name(), "average_defense")).collect();
    eprintln!("{m:?}");
    for w in m.windows(2) {
        assert!(w[0] >= w[1], "{m:?}");
    }
    assert!(m[1] >= 0.98 * m[0], "{m:?}");
    assert!(m[0] - m[4] > 0.09, "{m:?}");
    assert!(rows.iter().all(|r| r.trials == 100));
}

#[test]
fn malicious_candidate_never_wins() {
    let cfg = ExperimentConfig { trials: 100, seed: 77, ..Default::default() };
    let malicious = cfg.malicious_nodes();
    for t in defense_trials(&cfg).unwrap() {
        assert!(!malicious.contains(&t.winner), "seed {}", t.seed);
    }
}

#[test]
fn without_malicious_trustworthy_matches_unfiltered_mean() {
    let profiles: Vec<ResponderProfile> =
        (0..10).map(|i| ResponderProfile::new(i, ResponderKind::NearOptimal, 0.0, i as u64)).collect();
    let cfg = ExperimentConfig { trials: 10, responder_profiles: profiles, ..Default::default() };
    for t in defense_trials(&cfg).unwrap() {
        assert!((t.defense[1] - t.defense[2]).abs() < 1e-9, "{:?}", t.defense);
    }
}

#[test]
fn latency_sweep_order_and_trend() {
    let cfg = ExperimentConfig { trials: 3, ..Default::default() };
    let rows = run_latency_experiment(&cfg).unwrap();
    let order = [Protocol::Pbft, Protocol::Tpbft, Protocol::Vaap, Protocol::AbcPbft];
    let targets = &cfg.sweep.reliability_target;
    for t in targets {
        let l: Vec<f64> = order
            .iter()
            .map(|p| mean(&rows, &format!("latency-{}", p.name()), &t.to_string(), "latency_s"))
            .collect();
        assert!(l.windows(2).all(|w| w[0] > w[1]), "{t}: {l:?}");
    }
    for p in order {
        let l: Vec<f64> = targets
            .iter()
            .map(|t| mean(&rows, &format!("latency-{}", p.name()), &t.to_string(), "latency_s"))
            .collect();
        assert!(l.windows(2).all(|w| w[0] <= w[1]), "{p}: {l:?}");
    }
    assert_eq!(mean(&rows, "latency-PBFT", "0.9", "latency_s"), 96.0);
}

#[test]
fn certain_delivery_makes_latency_flat() {
    let mut cfg = ExperimentConfig { trials: 1, ..Default::default() };
    cfg.network.per_attempt_success = 1.0;
    let rows = run_latency_experiment(&cfg).unwrap();
    for p in Protocol::ALL {
        let l: Vec<f64> = rows
            .iter()
            .filter(|r| r.experiment == format!("latency-{}", p.name()) && r.metric == "latency_s")
            .map(|r| r.mean)
            .collect();
        assert!(l.iter().all(|&x| x == l[0]), "{p}: {l:?}");
    }
}

#[test]
fn csv_is_deterministic() {
    let cfg = ExperimentConfig { trials: 8, seed: 5, ..Default::default() };
    let a = rows_to_csv(&run_defense_experiment(&cfg).unwrap()).unwrap();
    let b = rows_to_csv(&run_defense_experiment(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn honest_pipeline_commits_best_candidate() {
    let profiles: Vec<ResponderProfile> =
        (0..10).map(|i| ResponderProfile::new(i, ResponderKind::NearOptimal, 0.05 * (i % 5) as f64, i as u64)).collect();
    let cfg = ExperimentConfig { responder_profiles: profiles, ..Default::default() };
    let mut net = Network::new(cfg).unwrap();
    let r = net.run_round().unwrap();
    let evaluator = trustnet_core::consensus::ScenarioEvaluator::new(&r.scenario);
    use trustnet_core::consensus::Evaluator;
    let best = evaluator.score(&r.outcome.winner).unwrap();
    assert!((best - r.defense).abs() < 1e-12);
    let cfg = ExperimentConfig::default();
    let prompt = trustnet_core::responders::build_prompt(&[], r.scenario.p_total_w, r.scenario.n_lbs);
    let (candidates, failures) = collect_candidates(&ExperimentConfig { responder_profiles: (0..10).map(|i| ResponderProfile::new(i, ResponderKind::NearOptimal, 0.05 * (i % 5) as f64, i as u64)).collect(), ..cfg }, &r.scenario, &prompt).unwrap();
    assert!(failures.is_empty());
    for c in &candidates {
        assert!(evaluator.score(c).unwrap() <= best);
    }
}

#[test]
fn chain_verifies_on_every_replica_after_each_round() {
    for protocol in Protocol::ALL {
        let mut cfg = ExperimentConfig::default();
        cfg.consensus.protocol = protocol;
        cfg.malicious_policy = ByzantinePolicy::WorstCandidate;
        let mut net = Network::new(cfg.clone()).unwrap();
        for round in 0..5 {
            let r = net.run_round().unwrap();
            assert!(!cfg.malicious_nodes().contains(&r.outcome.winner.proposer));
            assert_eq!(r.block.index, round);
            for chain in net.replicas() {
                assert_eq!(verify_chain(chain), Ok(()));
            }
            let first = net.replicas()[0].to_jsonl();
            assert!(net.replicas().iter().all(|c| c.to_jsonl() == first));
        }
    }
}

#[test]
fn single_round_pipeline_is_reproducible() {
    let cfg = ExperimentConfig { seed: 11, ..Default::default() };
    let (o1, b1) = run_pipeline(&cfg).unwrap();
    let (o2, b2) = run_pipeline(&cfg).unwrap();
    assert_eq!(o1, o2);
    assert_eq!(b1.to_json_line(), b2.to_json_line());
    assert_eq!(default_profiles().len(), 10);
}
