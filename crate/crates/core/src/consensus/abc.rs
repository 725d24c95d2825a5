//! Artificial bee colony search for a consensus committee.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ConsensusConfig, ConsensusError};
use crate::node::NodeId;

/// Messages in one fault-free committee round: PBFT among `m`, then one
/// dissemination message to each of the `n - m` outsiders.
pub fn protocol_message_count(n: usize, m: usize) -> u64 {
    let (n, m) = (n as u64, m as u64);
    let m1 = m.saturating_sub(1);
    m1 + m1 * m1 + m * m1 + n.saturating_sub(m)
}

pub fn protocol_bits(cfg: &ConsensusConfig, m: usize) -> u64 {
    protocol_message_count(cfg.n, m) * cfg.base_msg_bits
}

/// `w_trust * mean(trust of members) - w_bits * protocol_bits(m)`.
pub fn committee_fitness(trust: &[f64], members: &[usize], cfg: &ConsensusConfig) -> f64 {
    if members.is_empty() {
        return f64::NEG_INFINITY;
    }
    let mean = members.iter().map(|&i| trust[i]).sum::<f64>() / members.len() as f64;
    cfg.trust_weights.w_trust * mean - cfg.trust_weights.w_bits * protocol_bits(cfg, members.len()) as f64
}

#[derive(Clone)]
struct Source {
    members: Vec<usize>,
    fitness: f64,
    trials: usize,
}

struct Colony<'a> {
    trust: &'a [f64],
    cfg: &'a ConsensusConfig,
    m: usize,
    rng: ChaCha8Rng,
}

impl Colony<'_> {
    fn random_source(&mut self) -> Source {
        let mut members = sample(&mut self.rng, self.trust.len(), self.m).into_vec();
        members.sort_unstable();
        let fitness = committee_fitness(self.trust, &members, self.cfg);
        Source {
            members,
            fitness,
            trials: 0,
        }
    }

    /// Swap one member for one outsider.
    fn neighbor(&mut self, src: &Source) -> Source {
        let n = self.trust.len();
        let mut members = src.members.clone();
        if self.m < n {
            let out = self.rng.random_range(0..self.m);
            let outsiders: Vec<usize> = (0..n).filter(|i| !members.contains(i)).collect();
            members[out] = outsiders[self.rng.random_range(0..outsiders.len())];
            members.sort_unstable();
        }
        let fitness = committee_fitness(self.trust, &members, self.cfg);
        Source {
            members,
            fitness,
            trials: 0,
        }
    }

    fn explore(&mut self, sources: &mut [Source], i: usize) {
        let candidate = self.neighbor(&sources[i]);
        if candidate.fitness > sources[i].fitness {
            sources[i] = candidate;
        } else {
            sources[i].trials += 1;
        }
    }
}

/// Picks `m` of the nodes maximizing [`committee_fitness`]. Employed bees
/// refine one food source each, onlookers revisit sources in proportion to
/// fitness, and scouts replace sources that stopped improving.
pub fn select_committee_abc(
    trust: &[f64],
    m: usize,
    cfg: &ConsensusConfig,
    seed: u64,
) -> Result<Vec<NodeId>, ConsensusError> {
    let n = trust.len();
    if m > n {
        return Err(ConsensusError::CommitteeTooLarge { m, n });
    }
    if m == 0 {
        return Err(ConsensusError::InvalidConfig {
            field: "committee_size",
            reason: "must be at least 1".into(),
        });
    }
    let params = cfg.abc_params;
    if params.population < 2 || params.iterations < 1 {
        return Err(ConsensusError::InvalidConfig {
            field: "abc_params",
            reason: "population must be at least 2 and iterations at least 1".into(),
        });
    }
    let mut colony = Colony {
        trust,
        cfg,
        m,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let food = params.population / 2;
    let mut sources: Vec<Source> = (0..food).map(|_| colony.random_source()).collect();
    let mut best = sources[0].clone();

    for _ in 0..params.iterations {
        for i in 0..food {
            colony.explore(&mut sources, i);
        }

        let floor = sources.iter().map(|s| s.fitness).fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = sources.iter().map(|s| s.fitness - floor + 1e-12).collect();
        let total: f64 = weights.iter().sum();
        for _ in 0..food {
            let mut pick = colony.rng.random::<f64>() * total;
            let mut i = food - 1;
            for (j, w) in weights.iter().enumerate() {
                if pick < *w {
                    i = j;
                    break;
                }
                pick -= w;
            }
            colony.explore(&mut sources, i);
        }

        for s in &sources {
            if s.fitness > best.fitness {
                best = s.clone();
            }
        }

        if let Some(i) = (0..food).max_by_key(|&i| sources[i].trials) {
            if sources[i].trials > params.scout_limit {
                sources[i] = colony.random_source();
            }
        }
    }
    for s in &sources {
        if s.fitness > best.fitness {
            best = s.clone();
        }
    }
    Ok(best.members.into_iter().map(NodeId).collect())
}
