//! Reputation from voting history.
//!
//! Each node keeps, for every other node, the fraction of observed rounds in
//! which that node's votes all matched the committed winner. Global trust is
//! the stationary vector of the row-normalized local trust matrix.

use serde::{Deserialize, Serialize};

use super::{ConsensusError, ConsensusOutcome, VoteLog};
use crate::node::NodeId;

/// Local trust for a pair that has never been observed.
pub const PRIOR_TRUST: f64 = 0.5;
const POWER_TOL: f64 = 1e-9;
const POWER_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustState {
    /// `local_trust[i][j]`: how much `i` trusts `j`. The diagonal is zero.
    pub local_trust: Vec<Vec<f64>>,
    pub global_trust: Vec<f64>,
    pub rounds_observed: u64,
    agreements: Vec<Vec<u64>>,
    observations: Vec<Vec<u64>>,
}

impl TrustState {
    pub fn new(n: usize) -> Self {
        let local_trust = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { PRIOR_TRUST }).collect())
            .collect::<Vec<Vec<f64>>>();
        TrustState {
            global_trust: global_trust_from_local(&local_trust),
            local_trust,
            rounds_observed: 0,
            agreements: vec![vec![0; n]; n],
            observations: vec![vec![0; n]; n],
        }
    }

    pub fn n(&self) -> usize {
        self.global_trust.len()
    }
}

/// EigenTrust-style aggregation: `t <- C^T t` from the uniform vector, where
/// `C` is `local` with a zero diagonal and rows scaled to sum 1. Rows with no
/// trust spread it evenly over the other nodes.
pub fn global_trust_from_local(local: &[Vec<f64>]) -> Vec<f64> {
    let n = local.len();
    if n <= 1 {
        return vec![1.0; n];
    }
    let c: Vec<Vec<f64>> = local
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let sum: f64 = row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v.max(0.0)).sum();
            (0..n)
                .map(|j| match (j == i, sum > 0.0) {
                    (true, _) => 0.0,
                    (false, true) => row[j].max(0.0) / sum,
                    (false, false) => 1.0 / (n - 1) as f64,
                })
                .collect()
        })
        .collect();

    let mut t = vec![1.0 / n as f64; n];
    for _ in 0..POWER_MAX_ITERS {
        let mut next = vec![0.0; n];
        for (i, row) in c.iter().enumerate() {
            for (j, cij) in row.iter().enumerate() {
                next[j] += cij * t[i];
            }
        }
        let sum: f64 = next.iter().sum();
        if sum > 0.0 {
            next.iter_mut().for_each(|x| *x /= sum);
        }
        let delta: f64 = next.iter().zip(&t).map(|(a, b)| (a - b).abs()).sum();
        t = next;
        if delta < POWER_TOL {
            break;
        }
    }
    t
}

/// Folds one committed round into the trust state. Observer `i` judges
/// participant `j` by the votes from `j` that `i` received: agreement means
/// at least one vote arrived and all of them named the winner. Silence
/// counts against `j`.
pub fn update_trust(trust: &TrustState, outcome: &ConsensusOutcome, log: &VoteLog) -> TrustState {
    let n = trust.n();
    let winner = outcome.winner.candidate_hash;
    let mut next = trust.clone();
    // seen[i][j] = (any vote, all votes agree)
    let mut seen = vec![vec![(false, true); n]; n];
    for (observer, vote) in &log.received {
        let (i, j) = (observer.0, vote.voter.0);
        if i >= n || j >= n || i == j {
            continue;
        }
        let entry = &mut seen[i][j];
        entry.0 = true;
        entry.1 &= vote.candidate_hash == winner;
    }
    for (i, row) in seen.iter().enumerate() {
        for &NodeId(j) in &log.participants {
            if j >= n || i == j {
                continue;
            }
            let (any, all_agree) = row[j];
            next.observations[i][j] += 1;
            if any && all_agree {
                next.agreements[i][j] += 1;
            }
            next.local_trust[i][j] = next.agreements[i][j] as f64 / next.observations[i][j] as f64;
        }
    }
    next.rounds_observed += 1;
    next.global_trust = global_trust_from_local(&next.local_trust);
    next
}

/// The `k` highest global-trust nodes, ties to the lower id, returned in id order.
pub fn top_k_by_trust(trust: &TrustState, k: usize) -> Result<Vec<NodeId>, ConsensusError> {
    let n = trust.n();
    if k > n {
        return Err(ConsensusError::CommitteeTooLarge { m: k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| trust.global_trust[b].total_cmp(&trust.global_trust[a]).then(a.cmp(&b)));
    let mut chosen: Vec<NodeId> = order.into_iter().take(k).map(NodeId).collect();
    chosen.sort();
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_start() {
        let t = TrustState::new(10);
        for g in &t.global_trust {
            assert!((g - 0.1).abs() < 1e-12);
        }
        assert_eq!(t.local_trust[3][3], 0.0);
    }

    #[test]
    fn zero_column_gets_zero_trust() {
        let mut local = vec![vec![1.0; 4]; 4];
        for (i, row) in local.iter_mut().enumerate() {
            row[i] = 0.0;
            row[2] = 0.0;
        }
        let g = global_trust_from_local(&local);
        assert!(g[2].abs() < 1e-12);
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn top_k_breaks_ties_by_id() {
        let mut t = TrustState::new(5);
        t.global_trust = vec![0.1, 0.3, 0.3, 0.2, 0.1];
        assert_eq!(top_k_by_trust(&t, 3).unwrap(), vec![NodeId(1), NodeId(2), NodeId(3)]);
        assert_eq!(top_k_by_trust(&t, 4).unwrap(), vec![NodeId(0), NodeId(1), NodeId(2), NodeId(3)]);
        assert!(top_k_by_trust(&t, 6).is_err());
    }
}
