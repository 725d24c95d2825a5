//! Deterministic message-passing simulation of one consensus round.
//!
//! Each phase collects the envelopes every node emits, ordered by sender
//! then recipient, charges them to the channel through netsim, and delivers
//! them. Honest nodes only ever prepare, commit or ballot for the candidate
//! their own evaluator ranks first; they accept other nodes' claims only
//! with enough valid signatures behind them.

use std::collections::{BTreeMap, BTreeSet};

use super::abc::select_committee_abc;
use super::trust::{top_k_by_trust, TrustState};
use super::{
    honest_vote, ByzantinePolicy, ConsensusError, ConsensusOutcome, PhaseRecord, Protocol, RoundInput, RoundResult,
    Vote, VoteKind, VoteLog,
};
use crate::digest::Digest32;
use crate::netsim::{phase_latency, Message, PhaseTag, Recipient};
use crate::node::NodeId;
use crate::responders::{splitmix, ResponseCandidate};

struct Envelope {
    from: NodeId,
    to: NodeId,
    vote: Option<Vote>,
    proof: Vec<Vote>,
}

impl Envelope {
    fn vote(from: NodeId, to: NodeId, vote: Vote) -> Self {
        Envelope {
            from,
            to,
            vote: Some(vote),
            proof: Vec::new(),
        }
    }

    fn bare(from: NodeId, to: NodeId) -> Self {
        Envelope {
            from,
            to,
            vote: None,
            proof: Vec::new(),
        }
    }

    fn proof(from: NodeId, to: NodeId, proof: Vec<Vote>) -> Self {
        Envelope {
            from,
            to,
            vote: None,
            proof,
        }
    }
}

/// Decisions reached inside the voting group, with the evidence each
/// decider holds.
struct GroupOutcome {
    decisions: BTreeMap<NodeId, Digest32>,
    certs: BTreeMap<NodeId, Vec<Vote>>,
    last_view: u32,
}

struct Sim<'a> {
    input: RoundInput<'a>,
    protocol: Protocol,
    candidates: Vec<&'a ResponseCandidate>,
    scores: BTreeMap<Digest32, Option<f64>>,
    best: Digest32,
    worst: Digest32,
    phases: Vec<PhaseRecord>,
    log: Vec<(NodeId, Vote)>,
    latency_s: f64,
    message_count: u64,
    total_bits: u64,
}

impl<'a> Sim<'a> {
    fn new(input: RoundInput<'a>, protocol: Protocol) -> Result<Self, ConsensusError> {
        input.cfg.validate()?;
        input.net.validate()?;
        let mut candidates: Vec<&ResponseCandidate> = input.candidates.iter().collect();
        candidates.sort_by_key(|c| c.candidate_hash);
        candidates.dedup_by_key(|c| c.candidate_hash);
        let scores: BTreeMap<Digest32, Option<f64>> = candidates
            .iter()
            .map(|c| (c.candidate_hash, input.evaluator.score(c)))
            .collect();
        let valid: BTreeMap<Digest32, f64> = scores.iter().filter_map(|(h, s)| s.map(|s| (*h, s))).collect();
        let best = honest_vote(&valid)?;
        let mut worst: Option<(Digest32, f64)> = None;
        for (h, s) in &scores {
            let s = s.unwrap_or(f64::NEG_INFINITY);
            if worst.is_none_or(|(_, w)| s < w) {
                worst = Some((*h, s));
            }
        }
        Ok(Sim {
            input,
            protocol,
            candidates,
            scores,
            best,
            worst: worst.map(|(h, _)| h).unwrap_or(best),
            phases: Vec::new(),
            log: Vec::new(),
            latency_s: 0.0,
            message_count: 0,
            total_bits: 0,
        })
    }

    fn round(&self) -> u64 {
        self.input.round
    }

    fn honest(&self, node: NodeId) -> bool {
        !self.input.policy.is_byzantine(node)
    }

    fn leader(&self, members: &[NodeId], view: u32) -> NodeId {
        let k = members.len() as u64;
        members[((self.round() + view as u64) % k) as usize]
    }

    /// What a Byzantine node claims to `recipient`, or `None` if it stays silent.
    fn byzantine_choice(&self, node: NodeId, view: u32, phase: PhaseTag, recipient: NodeId) -> Option<Digest32> {
        let policy = self.input.policy.policy_of(node)?;
        match policy {
            ByzantinePolicy::WorstCandidate | ByzantinePolicy::ForgeVotes => Some(self.worst),
            ByzantinePolicy::SelfPromotion => Some(
                self.candidates
                    .iter()
                    .find(|c| c.proposer == node)
                    .map_or(self.worst, |c| c.candidate_hash),
            ),
            ByzantinePolicy::Random => {
                let parts = [
                    self.input.policy.seed,
                    self.round(),
                    view as u64,
                    node.0 as u64,
                    phase as u64,
                    recipient.0 as u64,
                ];
                let r = parts.iter().fold(0u64, |acc, p| splitmix(acc ^ p));
                Some(self.candidates[(r % self.candidates.len() as u64) as usize].candidate_hash)
            }
            ByzantinePolicy::Abstain => None,
            ByzantinePolicy::Equivocate => Some(if recipient.0.is_multiple_of(2) { self.best } else { self.worst }),
        }
    }

    /// Envelopes a Byzantine node sends to one recipient in a voting phase.
    fn byzantine_votes(
        &self,
        node: NodeId,
        recipient: NodeId,
        view: u32,
        phase: PhaseTag,
        kind: VoteKind,
        members: &[NodeId],
    ) -> Vec<Envelope> {
        let Some(h) = self.byzantine_choice(node, view, phase, recipient) else {
            return Vec::new();
        };
        let round = self.round();
        let mut out = vec![Envelope::vote(node, recipient, Vote::signed(node, h, round, view, kind))];
        if self.input.policy.policy_of(node) == Some(ByzantinePolicy::ForgeVotes) {
            if let Some(&victim) = members.iter().find(|m| **m != node && **m != recipient) {
                out.push(Envelope::vote(node, recipient, Vote::forged(node, victim, h, round, view, kind)));
            }
        }
        out
    }

    /// Charges a phase to the channel and hands its envelopes back for delivery.
    fn phase(
        &mut self,
        tag: PhaseTag,
        view: u32,
        mut envelopes: Vec<Envelope>,
        size: impl Fn(&Envelope) -> u64,
    ) -> Result<Vec<Envelope>, ConsensusError> {
        envelopes.sort_by_key(|e| (e.from, e.to));
        if envelopes.is_empty() {
            return Ok(envelopes);
        }
        let messages = envelopes
            .iter()
            .map(|e| Message::new(e.from, Recipient::Node(e.to), tag, size(e)))
            .collect::<Result<Vec<_>, _>>()?;
        let latency_s = phase_latency(&messages, self.input.net)?;
        let bits: u64 = messages.iter().map(|m| m.size_bits).sum();
        self.phases.push(PhaseRecord {
            phase: tag,
            view,
            messages: messages.len() as u64,
            bits,
            latency_s,
        });
        self.latency_s += latency_s;
        self.message_count += messages.len() as u64;
        self.total_bits += bits;
        for e in &envelopes {
            for v in e.vote.iter().chain(&e.proof) {
                if v.round == self.round() && v.verify() {
                    self.log.push((e.to, v.clone()));
                }
            }
        }
        Ok(envelopes)
    }

    fn base(&self) -> u64 {
        self.input.cfg.base_msg_bits
    }

    /// First valid vote from each voter, per recipient.
    fn first_votes(
        &self,
        delivered: &[Envelope],
        kind: VoteKind,
        view: u32,
        allowed: &BTreeSet<NodeId>,
    ) -> BTreeMap<NodeId, BTreeMap<NodeId, Digest32>> {
        let mut seen: BTreeMap<NodeId, BTreeMap<NodeId, Digest32>> = BTreeMap::new();
        for e in delivered {
            let Some(v) = &e.vote else { continue };
            if v.kind != kind || v.view != view || v.round != self.round() || !allowed.contains(&v.voter) || !v.verify() {
                continue;
            }
            seen.entry(e.to).or_default().entry(v.voter).or_insert(v.candidate_hash);
        }
        seen
    }

    /// A batch of same-kind votes for one hash from at least `quorum`
    /// distinct members, all validly signed.
    fn check_certificate(&self, proof: &[Vote], kind: VoteKind, members: &BTreeSet<NodeId>, quorum: usize) -> Option<Digest32> {
        let first = proof.first()?;
        let mut voters = BTreeSet::new();
        for v in proof {
            let ok = v.kind == kind
                && v.round == self.round()
                && v.view == first.view
                && v.candidate_hash == first.candidate_hash
                && members.contains(&v.voter)
                && v.verify();
            if !ok {
                return None;
            }
            voters.insert(v.voter);
        }
        (voters.len() >= quorum && self.scores.contains_key(&first.candidate_hash)).then_some(first.candidate_hash)
    }

    /// Three-phase PBFT among `members` with round-robin view change.
    fn run_group(&mut self, members: &[NodeId], f: usize) -> Result<GroupOutcome, ConsensusError> {
        let quorum = 2 * f + 1;
        let round = self.round();
        let best = self.best;
        let base = self.base();
        let member_set: BTreeSet<NodeId> = members.iter().copied().collect();
        let honest_members: Vec<NodeId> = members.iter().copied().filter(|m| self.honest(*m)).collect();
        let mut decisions = BTreeMap::new();
        let mut certs: BTreeMap<NodeId, Vec<Vote>> = BTreeMap::new();
        let view_budget = f as u32 + 1;
        let mut view = 0u32;

        loop {
            let leader = self.leader(members, view);

            let mut out = Vec::new();
            for &r in members.iter().filter(|r| **r != leader) {
                let h = if self.honest(leader) {
                    Some(best)
                } else {
                    self.byzantine_choice(leader, view, PhaseTag::PrePrepare, r)
                };
                if let Some(h) = h {
                    out.push(Envelope::vote(leader, r, Vote::signed(leader, h, round, view, VoteKind::PrePrepare)));
                }
            }
            let delivered = self.phase(PhaseTag::PrePrepare, view, out, |_| base)?;
            let leader_only = BTreeSet::from([leader]);
            let proposals = self.first_votes(&delivered, VoteKind::PrePrepare, view, &leader_only);
            let mut accepted: BTreeSet<NodeId> = BTreeSet::new();
            if self.honest(leader) {
                accepted.insert(leader);
            }
            for &m in &honest_members {
                if proposals.get(&m).and_then(|p| p.get(&leader)) == Some(&best) {
                    accepted.insert(m);
                }
            }

            let mut out = Vec::new();
            for &s in members.iter().filter(|s| **s != leader) {
                for &r in members.iter().filter(|r| **r != s) {
                    if self.honest(s) {
                        if accepted.contains(&s) {
                            out.push(Envelope::vote(s, r, Vote::signed(s, best, round, view, VoteKind::Prepare)));
                        }
                    } else {
                        out.extend(self.byzantine_votes(s, r, view, PhaseTag::Prepare, VoteKind::Prepare, members));
                    }
                }
            }
            let delivered = self.phase(PhaseTag::Prepare, view, out, |_| base)?;
            let backups: BTreeSet<NodeId> = members.iter().copied().filter(|m| *m != leader).collect();
            let prepares = self.first_votes(&delivered, VoteKind::Prepare, view, &backups);
            let prepared: BTreeSet<NodeId> = accepted
                .iter()
                .copied()
                .filter(|m| {
                    let received = prepares
                        .get(m)
                        .map_or(0, |p| p.iter().filter(|(voter, h)| *voter != m && **h == best).count());
                    let own = usize::from(*m != leader);
                    received + own >= 2 * f
                })
                .collect();

            let mut out = Vec::new();
            for &s in members {
                for &r in members.iter().filter(|r| **r != s) {
                    if self.honest(s) {
                        if prepared.contains(&s) {
                            out.push(Envelope::vote(s, r, Vote::signed(s, best, round, view, VoteKind::Commit)));
                        }
                    } else {
                        out.extend(self.byzantine_votes(s, r, view, PhaseTag::Commit, VoteKind::Commit, members));
                    }
                }
            }
            let delivered = self.phase(PhaseTag::Commit, view, out, |_| base)?;
            let commits = self.first_votes(&delivered, VoteKind::Commit, view, &member_set);
            for &m in &prepared {
                if decisions.contains_key(&m) {
                    continue;
                }
                let mut cert: Vec<Vote> = commits
                    .get(&m)
                    .into_iter()
                    .flatten()
                    .filter(|(voter, h)| **voter != m && **h == best)
                    .map(|(voter, _)| Vote::signed(*voter, best, round, view, VoteKind::Commit))
                    .collect();
                cert.push(Vote::signed(m, best, round, view, VoteKind::Commit));
                cert.sort_by_key(|v| v.voter);
                if cert.len() >= quorum {
                    decisions.insert(m, best);
                    certs.insert(m, cert);
                }
            }

            let all_decided = honest_members.iter().all(|m| decisions.contains_key(m));
            if all_decided || view >= view_budget {
                return Ok(GroupOutcome {
                    decisions,
                    certs,
                    last_view: view,
                });
            }

            let mut out = Vec::new();
            for &s in &honest_members {
                for &r in members.iter().filter(|r| **r != s) {
                    out.push(Envelope::bare(s, r));
                }
            }
            self.phase(PhaseTag::ViewChange, view, out, |_| base)?;
            let next = self.leader(members, view + 1);
            let speaks = self.honest(next) || self.input.policy.policy_of(next) != Some(ByzantinePolicy::Abstain);
            let out = if speaks {
                members.iter().filter(|r| **r != next).map(|&r| Envelope::bare(next, r)).collect()
            } else {
                Vec::new()
            };
            self.phase(PhaseTag::NewView, view + 1, out, |_| base)?;
            view += 1;
        }
    }

    /// Pushes the committee's certificate to everyone outside it. Senders
    /// rotate until every honest outsider has accepted or `f + 1` senders
    /// have tried.
    fn disseminate(&mut self, members: &[NodeId], f: usize, group: &mut GroupOutcome) -> Result<(), ConsensusError> {
        let n = self.input.cfg.n;
        let round = self.round();
        let base = self.base();
        let member_set: BTreeSet<NodeId> = members.iter().copied().collect();
        let outsiders: Vec<NodeId> = NodeId::range(n).into_iter().filter(|x| !member_set.contains(x)).collect();
        let honest_outsiders: Vec<NodeId> = outsiders.iter().copied().filter(|x| self.honest(*x)).collect();
        let quorum = 2 * f + 1;
        for attempt in 0..=f as u32 {
            if honest_outsiders.iter().all(|x| group.decisions.contains_key(x)) {
                break;
            }
            let sender = self.leader(members, group.last_view + attempt);
            let mut out = Vec::new();
            for &r in &outsiders {
                if self.honest(sender) {
                    if let Some(cert) = group.certs.get(&sender) {
                        out.push(Envelope::proof(sender, r, cert.clone()));
                    }
                } else if let Some(h) = self.byzantine_choice(sender, group.last_view, PhaseTag::Dissemination, r) {
                    let mut fake = vec![Vote::signed(sender, h, round, group.last_view, VoteKind::Commit)];
                    for &victim in members.iter().filter(|m| **m != sender).take(quorum) {
                        fake.push(Vote::forged(sender, victim, h, round, group.last_view, VoteKind::Commit));
                    }
                    out.push(Envelope::proof(sender, r, fake));
                }
            }
            let delivered = self.phase(PhaseTag::Dissemination, group.last_view, out, |_| base)?;
            for e in &delivered {
                if !self.honest(e.to) || group.decisions.contains_key(&e.to) {
                    continue;
                }
                if let Some(h) = self.check_certificate(&e.proof, VoteKind::Commit, &member_set, quorum) {
                    group.decisions.insert(e.to, h);
                    group.certs.insert(e.to, e.proof.clone());
                }
            }
        }
        Ok(())
    }

    /// Single-round majority vote; the leader's collected ballots are the proof.
    fn run_majority(&mut self) -> Result<GroupOutcome, ConsensusError> {
        let n = self.input.cfg.n;
        let members = NodeId::range(n);
        let member_set: BTreeSet<NodeId> = members.iter().copied().collect();
        let quorum = n / 2 + 1;
        let round = self.round();
        let best = self.best;
        let base = self.base();
        let sig = self.input.cfg.signature_bits;
        let honest: Vec<NodeId> = members.iter().copied().filter(|m| self.honest(*m)).collect();
        let mut decisions = BTreeMap::new();
        let mut certs: BTreeMap<NodeId, Vec<Vote>> = BTreeMap::new();
        // A leader rotation of ceil(n/2) views always reaches an honest
        // leader while Byzantine nodes are a minority.
        let view_budget = n.div_ceil(2) as u32;
        let mut view = 0u32;

        loop {
            let leader = self.leader(&members, view);

            let mut out = Vec::new();
            for &r in members.iter().filter(|r| **r != leader) {
                let h = if self.honest(leader) {
                    Some(best)
                } else {
                    self.byzantine_choice(leader, view, PhaseTag::Proposal, r)
                };
                if let Some(h) = h {
                    out.push(Envelope::vote(leader, r, Vote::signed(leader, h, round, view, VoteKind::Proposal)));
                }
            }
            let delivered = self.phase(PhaseTag::Proposal, view, out, |_| base)?;
            let opened = self.first_votes(&delivered, VoteKind::Proposal, view, &BTreeSet::from([leader]));

            let mut out = Vec::new();
            for &s in members.iter().filter(|s| **s != leader) {
                if self.honest(s) {
                    if opened.contains_key(&s) {
                        out.push(Envelope::vote(s, leader, Vote::signed(s, best, round, view, VoteKind::Ballot)));
                    }
                } else {
                    out.extend(self.byzantine_votes(s, leader, view, PhaseTag::Vote, VoteKind::Ballot, &members));
                }
            }
            let delivered = self.phase(PhaseTag::Vote, view, out, |_| base + sig)?;
            let ballots = self.first_votes(&delivered, VoteKind::Ballot, view, &member_set);

            let mut out = Vec::new();
            if self.honest(leader) {
                let mut proof: Vec<Vote> = ballots
                    .get(&leader)
                    .into_iter()
                    .flatten()
                    .filter(|(voter, h)| **voter != leader && **h == best)
                    .map(|(voter, _)| Vote::signed(*voter, best, round, view, VoteKind::Ballot))
                    .collect();
                proof.push(Vote::signed(leader, best, round, view, VoteKind::Ballot));
                proof.sort_by_key(|v| v.voter);
                if proof.len() >= quorum {
                    decisions.entry(leader).or_insert(best);
                    certs.entry(leader).or_insert_with(|| proof.clone());
                    for &r in members.iter().filter(|r| **r != leader) {
                        out.push(Envelope::proof(leader, r, proof.clone()));
                    }
                }
            } else {
                for &r in members.iter().filter(|r| **r != leader) {
                    if let Some(h) = self.byzantine_choice(leader, view, PhaseTag::Proof, r) {
                        let mut fake = vec![Vote::signed(leader, h, round, view, VoteKind::Ballot)];
                        if self.input.policy.policy_of(leader) == Some(ByzantinePolicy::ForgeVotes) {
                            for &victim in members.iter().filter(|m| **m != leader).take(quorum) {
                                fake.push(Vote::forged(leader, victim, h, round, view, VoteKind::Ballot));
                            }
                        }
                        out.push(Envelope::proof(leader, r, fake));
                    }
                }
            }
            let delivered = self.phase(PhaseTag::Proof, view, out, |e| base + e.proof.len() as u64 * sig)?;
            for e in &delivered {
                if !self.honest(e.to) || decisions.contains_key(&e.to) {
                    continue;
                }
                if let Some(h) = self.check_certificate(&e.proof, VoteKind::Ballot, &member_set, quorum) {
                    decisions.insert(e.to, h);
                    certs.insert(e.to, e.proof.clone());
                }
            }

            let all_decided = honest.iter().all(|m| decisions.contains_key(m));
            if all_decided || view >= view_budget {
                return Ok(GroupOutcome {
                    decisions,
                    certs,
                    last_view: view,
                });
            }
            let mut out = Vec::new();
            for &s in &honest {
                for &r in members.iter().filter(|r| **r != s) {
                    out.push(Envelope::bare(s, r));
                }
            }
            self.phase(PhaseTag::ViewChange, view, out, |_| base)?;
            view += 1;
        }
    }

    fn finish(self, group: GroupOutcome, committee: Vec<NodeId>, quorum: usize) -> Result<RoundResult, ConsensusError> {
        let no_commit = ConsensusError::NoCommit {
            protocol: self.protocol,
            round: self.round(),
            views: group.last_view + 1,
        };
        let mut tally: BTreeMap<Digest32, usize> = BTreeMap::new();
        for h in group.decisions.values() {
            *tally.entry(*h).or_default() += 1;
        }
        let mut winner_hash: Option<(Digest32, usize)> = None;
        for (h, c) in &tally {
            if winner_hash.is_none_or(|(_, best)| *c > best) {
                winner_hash = Some((*h, *c));
            }
        }
        let Some((winner_hash, _)) = winner_hash else {
            return Err(no_commit);
        };
        let Some(winner) = self.candidates.iter().find(|c| c.candidate_hash == winner_hash) else {
            return Err(no_commit);
        };
        let votes = group
            .decisions
            .iter()
            .find(|(_, h)| **h == winner_hash)
            .and_then(|(node, _)| group.certs.get(node))
            .cloned()
            .unwrap_or_default();
        let outcome = ConsensusOutcome {
            protocol: self.protocol,
            round: self.round(),
            winner: (*winner).clone(),
            votes,
            quorum,
            latency_s: self.latency_s,
            message_count: self.message_count,
            total_bits: self.total_bits,
            committee: committee.clone(),
            views: group.last_view + 1,
            decisions: group.decisions.into_iter().collect(),
            phases: self.phases,
        };
        Ok(RoundResult {
            outcome,
            log: VoteLog {
                participants: committee,
                received: self.log,
            },
        })
    }
}

fn run_committee(input: RoundInput<'_>, protocol: Protocol, committee: Vec<NodeId>) -> Result<RoundResult, ConsensusError> {
    let mut sim = Sim::new(input, protocol)?;
    let f = input.cfg.faults();
    let mut group = sim.run_group(&committee, f)?;
    if committee.len() < input.cfg.n && !group.decisions.is_empty() {
        sim.disseminate(&committee, f, &mut group)?;
    }
    sim.finish(group, committee, 2 * f + 1)
}

fn check_trust(input: &RoundInput<'_>, trust: &TrustState) -> Result<(), ConsensusError> {
    if trust.n() != input.cfg.n {
        return Err(ConsensusError::TrustSize {
            expected: input.cfg.n,
            found: trust.n(),
        });
    }
    Ok(())
}

/// Nodes that run the voting phases for `input.cfg.protocol`.
pub fn committee_for(input: &RoundInput<'_>, trust: &TrustState) -> Result<Vec<NodeId>, ConsensusError> {
    let cfg = input.cfg;
    match cfg.protocol {
        Protocol::Pbft | Protocol::Vaap => Ok(NodeId::range(cfg.n)),
        Protocol::Tpbft => {
            check_trust(input, trust)?;
            top_k_by_trust(trust, cfg.group_size())
        }
        Protocol::AbcPbft => {
            check_trust(input, trust)?;
            let seed = splitmix(input.policy.seed ^ splitmix(input.round));
            select_committee_abc(&trust.global_trust, cfg.group_size(), cfg, seed)
        }
    }
}

pub fn run_pbft(input: RoundInput<'_>) -> Result<RoundResult, ConsensusError> {
    let cfg = super::ConsensusConfig {
        protocol: Protocol::Pbft,
        ..input.cfg.clone()
    };
    let input = RoundInput { cfg: &cfg, ..input };
    run_committee(input, Protocol::Pbft, NodeId::range(cfg.n))
}

/// PBFT among the `k` most trusted nodes, then dissemination to the rest.
pub fn run_tpbft(input: RoundInput<'_>, trust: &TrustState) -> Result<RoundResult, ConsensusError> {
    let cfg = super::ConsensusConfig {
        protocol: Protocol::Tpbft,
        ..input.cfg.clone()
    };
    cfg.validate()?;
    let input = RoundInput { cfg: &cfg, ..input };
    let committee = committee_for(&input, trust)?;
    run_committee(input, Protocol::Tpbft, committee)
}

/// PBFT among a bee-colony selected committee, then dissemination.
pub fn run_abcpbft(input: RoundInput<'_>, trust: &TrustState) -> Result<RoundResult, ConsensusError> {
    let cfg = super::ConsensusConfig {
        protocol: Protocol::AbcPbft,
        ..input.cfg.clone()
    };
    cfg.validate()?;
    let input = RoundInput { cfg: &cfg, ..input };
    let committee = committee_for(&input, trust)?;
    run_committee(input, Protocol::AbcPbft, committee)
}

pub fn run_vaap(input: RoundInput<'_>) -> Result<RoundResult, ConsensusError> {
    let cfg = super::ConsensusConfig {
        protocol: Protocol::Vaap,
        ..input.cfg.clone()
    };
    let input = RoundInput { cfg: &cfg, ..input };
    let mut sim = Sim::new(input, Protocol::Vaap)?;
    let group = sim.run_majority()?;
    sim.finish(group, NodeId::range(cfg.n), cfg.quorum())
}

/// Runs `input.cfg.protocol`. Committee protocols fall back to uniform
/// trust when none is given.
pub fn run_consensus(input: RoundInput<'_>, trust: Option<&TrustState>) -> Result<RoundResult, ConsensusError> {
    let uniform;
    let trust = match trust {
        Some(t) => t,
        None => {
            uniform = TrustState::new(input.cfg.n);
            &uniform
        }
    };
    match input.cfg.protocol {
        Protocol::Pbft => run_pbft(input),
        Protocol::Tpbft => run_tpbft(input, trust),
        Protocol::AbcPbft => run_abcpbft(input, trust),
        Protocol::Vaap => run_vaap(input),
    }
}
