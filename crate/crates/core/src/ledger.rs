//! Hash-chained record of committed outcomes, replicated on every node.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::consensus::{ConsensusOutcome, Protocol};
use crate::digest::Digest32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    HashMismatch,
    LinkMismatch,
    IndexMismatch,
    TimestampRegression,
    Malformed,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureReason::HashMismatch => "hash-mismatch",
            FailureReason::LinkMismatch => "link-mismatch",
            FailureReason::IndexMismatch => "index-mismatch",
            FailureReason::TimestampRegression => "timestamp-regression",
            FailureReason::Malformed => "malformed",
        })
    }
}

/// First violation found by [`verify_chain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainFailure {
    pub index: usize,
    pub reason: FailureReason,
}

impl fmt::Display for ChainFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "block {}: {}", self.index, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("outcome has {found} supporting votes, quorum is {quorum}")]
    NoQuorum { found: usize, quorum: usize },
    #[error("timestamp {now} precedes previous block at {prev}")]
    TimestampRegression { now: f64, prev: f64 },
    #[error("append rejected: {0}")]
    Rejected(ChainFailure),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub index: u64,
    pub timestamp_s: f64,
    pub prev_hash: Digest32,
    pub outcome_hash: Digest32,
    #[serde(serialize_with = "hex_bytes", deserialize_with = "bytes_from_hex")]
    pub payload: Vec<u8>,
    pub block_hash: Digest32,
}

fn hex_bytes<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&hex::encode(bytes))
}

fn bytes_from_hex<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
    let s = String::deserialize(d)?;
    if s.bytes().any(|b| b.is_ascii_uppercase()) {
        return Err(serde::de::Error::custom("payload hex must be lowercase"));
    }
    hex::decode(&s).map_err(serde::de::Error::custom)
}

fn protocol_tag(p: Protocol) -> u8 {
    match p {
        Protocol::Pbft => 0,
        Protocol::Tpbft => 1,
        Protocol::AbcPbft => 2,
        Protocol::Vaap => 3,
    }
}

/// Canonical encoding of an outcome: protocol tag, round (u64 BE), the
/// winner's canonical encoding (length-prefixed), then every vote as voter,
/// hash, round, view, kind and signature.
pub fn outcome_payload(outcome: &ConsensusOutcome) -> Vec<u8> {
    let mut out = vec![protocol_tag(outcome.protocol)];
    out.extend_from_slice(&outcome.round.to_be_bytes());
    let winner = outcome.winner.canonical_bytes();
    out.extend_from_slice(&(winner.len() as u32).to_be_bytes());
    out.extend_from_slice(&winner);
    out.extend_from_slice(&(outcome.votes.len() as u32).to_be_bytes());
    for v in &outcome.votes {
        out.extend_from_slice(&(v.voter.0 as u64).to_be_bytes());
        out.extend_from_slice(v.candidate_hash.as_bytes());
        out.extend_from_slice(&v.round.to_be_bytes());
        out.extend_from_slice(&v.view.to_be_bytes());
        out.push(v.kind as u8);
        out.extend_from_slice(v.signature.as_bytes());
    }
    out
}

/// SHA-256 over index (u64 BE), timestamp bits (u64 BE), previous hash,
/// outcome hash and payload.
pub fn block_hash(index: u64, timestamp_s: f64, prev_hash: &Digest32, outcome_hash: &Digest32, payload: &[u8]) -> Digest32 {
    let mut bytes = Vec::with_capacity(16 + 64 + payload.len());
    bytes.extend_from_slice(&index.to_be_bytes());
    bytes.extend_from_slice(&timestamp_s.to_bits().to_be_bytes());
    bytes.extend_from_slice(prev_hash.as_bytes());
    bytes.extend_from_slice(outcome_hash.as_bytes());
    bytes.extend_from_slice(payload);
    Digest32::of(&bytes)
}

impl Block {
    pub fn computed_hash(&self) -> Digest32 {
        block_hash(self.index, self.timestamp_s, &self.prev_hash, &self.outcome_hash, &self.payload)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("block serializes")
    }
}

/// Packages a committed outcome on top of `prev` (or as genesis).
pub fn create_block(outcome: &ConsensusOutcome, prev: Option<&Block>, now_s: f64) -> Result<Block, LedgerError> {
    if !outcome.has_quorum() {
        return Err(LedgerError::NoQuorum {
            found: outcome.supporting_votes(),
            quorum: outcome.quorum,
        });
    }
    if let Some(p) = prev {
        if now_s.partial_cmp(&p.timestamp_s).is_none_or(|o| o.is_lt()) {
            return Err(LedgerError::TimestampRegression {
                now: now_s,
                prev: p.timestamp_s,
            });
        }
    }
    let (index, prev_hash) = prev.map_or((0, Digest32::ZERO), |p| (p.index + 1, p.block_hash));
    let payload = outcome_payload(outcome);
    let outcome_hash = outcome.winner.candidate_hash;
    Ok(Block {
        index,
        timestamp_s: now_s,
        prev_hash,
        outcome_hash,
        block_hash: block_hash(index, now_s, &prev_hash, &outcome_hash, &payload),
        payload,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub blocks: Vec<Block>,
}

/// Checks `block` as the successor of `prev`: hash, then link, then index,
/// then timestamp.
fn check_next(prev: Option<&Block>, block: &Block, position: usize) -> Result<(), ChainFailure> {
    let fail = |reason| Err(ChainFailure { index: position, reason });
    if block.computed_hash() != block.block_hash {
        return fail(FailureReason::HashMismatch);
    }
    let expected_prev = prev.map_or(Digest32::ZERO, |p| p.block_hash);
    if block.prev_hash != expected_prev {
        return fail(FailureReason::LinkMismatch);
    }
    if block.index != position as u64 {
        return fail(FailureReason::IndexMismatch);
    }
    if let Some(p) = prev {
        if block.timestamp_s.partial_cmp(&p.timestamp_s).is_none_or(|o| o.is_lt()) {
            return fail(FailureReason::TimestampRegression);
        }
    }
    Ok(())
}

pub fn verify_chain(chain: &Chain) -> Result<(), ChainFailure> {
    let mut prev = None;
    for (i, b) in chain.blocks.iter().enumerate() {
        check_next(prev, b, i)?;
        prev = Some(b);
    }
    Ok(())
}

impl Chain {
    pub fn new() -> Self {
        Chain::default()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tip(&self) -> Option<&Block> {
        self.blocks.last()
    }

    /// Extends the chain if `block` verifies against the tip.
    pub fn append_block(&mut self, block: Block) -> Result<(), LedgerError> {
        check_next(self.tip(), &block, self.blocks.len()).map_err(LedgerError::Rejected)?;
        self.blocks.push(block);
        Ok(())
    }

    /// One block per line, hashes and payload in lowercase hex.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for b in &self.blocks {
            out.push_str(&b.to_json_line());
            out.push('\n');
        }
        out
    }

    /// Parses JSON lines. Each line must be exactly the canonical
    /// serialization of the block it decodes to.
    pub fn from_jsonl(text: &str) -> Result<Chain, LedgerError> {
        let mut blocks = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let block: Block = serde_json::from_str(line).map_err(|e| LedgerError::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?;
            if block.to_json_line() != line {
                return Err(LedgerError::Parse {
                    line: i + 1,
                    reason: "not in canonical form".into(),
                });
            }
            blocks.push(block);
        }
        Ok(Chain { blocks })
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), LedgerError> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Chain, LedgerError> {
        Chain::from_jsonl(&std::fs::read_to_string(path)?)
    }
}

/// Parses and verifies serialized chain text. Unparseable lines report as
/// `Malformed` at their block position.
pub fn verify_jsonl(bytes: &[u8]) -> Result<usize, ChainFailure> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|b| **b == b'\n').count();
        ChainFailure {
            index: line,
            reason: FailureReason::Malformed,
        }
    })?;
    let chain = Chain::from_jsonl(text).map_err(|e| ChainFailure {
        index: match e {
            LedgerError::Parse { line, .. } => line - 1,
            _ => 0,
        },
        reason: FailureReason::Malformed,
    })?;
    verify_chain(&chain)?;
    Ok(chain.len())
}

/// True when every replica serializes to the same bytes.
pub fn replicas_identical(replicas: &[Chain]) -> bool {
    let mut texts = replicas.iter().map(Chain::to_jsonl);
    match texts.next() {
        None => true,
        Some(first) => texts.all(|t| t == first),
    }
}
