//! Broadcast medium shared by the consensus nodes.
//!
//! Delivery is modelled with a fixed number of redundant transmissions per
//! message: a sender always emits `k` copies, where `k` is the smallest count
//! that lifts the end-to-end delivery probability to the configured
//! reliability target. Latency is pure serialization delay; propagation is
//! zero. All messages of one protocol phase serialize back to back on the
//! shared channel, so a phase costs `k * sum(bits) / channel_rate_bps`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::node::NodeId;

/// Slack for comparing `1 - (1-p)^k` against the target, absorbs rounding in
/// cases like `p = 0.9, target = 0.99`.
const RELIABILITY_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("reliability target {0} is unreachable; it must be < 1")]
    UnreachableReliability(f64),
    #[error("invalid network config: {field} = {value} ({reason})")]
    InvalidConfig {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("message size must be at least one bit")]
    EmptyMessage,
    #[error("phase has no messages")]
    EmptyPhase,
    #[error("phase mixes tags {first:?} and {other:?}")]
    MixedPhase { first: PhaseTag, other: PhaseTag },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Carried for completeness; the latency model only uses the two rates.
    pub bandwidth_hz: f64,
    /// Serialization rate of the shared broadcast channel.
    pub channel_rate_bps: f64,
    /// Point-to-point transmission rate.
    pub transmission_rate_bps: f64,
    pub per_attempt_success: f64,
    pub reliability_target: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            bandwidth_hz: 80e3,
            channel_rate_bps: 15e3,
            transmission_rate_bps: 10e3,
            per_attempt_success: 0.5,
            reliability_target: 0.9,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("channel_rate_bps", self.channel_rate_bps),
            ("transmission_rate_bps", self.transmission_rate_bps),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(NetError::InvalidConfig {
                    field,
                    value,
                    reason: "must be a positive finite number",
                });
            }
        }
        check_probabilities(self.per_attempt_success, self.reliability_target)
    }

    /// Copies sent per message under this config.
    pub fn attempts(&self) -> Result<u64, NetError> {
        required_attempts(self.per_attempt_success, self.reliability_target)
    }
}

fn check_probabilities(per_attempt_success: f64, reliability_target: f64) -> Result<(), NetError> {
    if !(per_attempt_success > 0.0 && per_attempt_success <= 1.0) {
        return Err(NetError::InvalidConfig {
            field: "per_attempt_success",
            value: per_attempt_success,
            reason: "must lie in (0, 1]",
        });
    }
    if reliability_target.is_nan() || reliability_target < 0.0 {
        return Err(NetError::InvalidConfig {
            field: "reliability_target",
            value: reliability_target,
            reason: "must lie in [0, 1)",
        });
    }
    if reliability_target >= 1.0 {
        return Err(NetError::UnreachableReliability(reliability_target));
    }
    Ok(())
}

/// Protocol phase label carried by every simulated message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseTag {
    PrePrepare,
    Prepare,
    Commit,
    ViewChange,
    NewView,
    Dissemination,
    Proposal,
    Vote,
    Proof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Recipient {
    Node(NodeId),
    Broadcast,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub from: NodeId,
    pub to: Recipient,
    pub phase: PhaseTag,
    pub size_bits: u64,
}

impl Message {
    pub fn new(from: NodeId, to: Recipient, phase: PhaseTag, size_bits: u64) -> Result<Self, NetError> {
        if size_bits == 0 {
            return Err(NetError::EmptyMessage);
        }
        Ok(Message {
            from,
            to,
            phase,
            size_bits,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeliveryReport {
    pub attempts: u64,
    pub latency_s: f64,
}

/// Smallest `k >= 1` with `1 - (1 - p)^k >= target`.
pub fn required_attempts(per_attempt_success: f64, reliability_target: f64) -> Result<u64, NetError> {
    check_probabilities(per_attempt_success, reliability_target)?;
    if per_attempt_success >= 1.0 || reliability_target <= per_attempt_success {
        return Ok(1);
    }
    let fail = 1.0 - per_attempt_success;
    let reaches = |k: u64| 1.0 - fail.powf(k as f64) >= reliability_target - RELIABILITY_EPS;

    // Closed-form estimate, then settle onto the exact boundary.
    let estimate = ((1.0 - reliability_target).ln() / fail.ln()).ceil();
    let mut k = if estimate.is_finite() && estimate >= 1.0 {
        estimate as u64
    } else {
        1
    };
    while k > 1 && reaches(k - 1) {
        k -= 1;
    }
    while !reaches(k) {
        k += 1;
    }
    Ok(k)
}

/// Point-to-point delivery of one message with redundant copies.
pub fn message_latency(msg: &Message, cfg: &NetworkConfig) -> Result<DeliveryReport, NetError> {
    cfg.validate()?;
    if msg.size_bits == 0 {
        return Err(NetError::EmptyMessage);
    }
    let attempts = cfg.attempts()?;
    Ok(DeliveryReport {
        attempts,
        latency_s: attempts as f64 * msg.size_bits as f64 / cfg.transmission_rate_bps,
    })
}

/// Time for every message of one phase to serialize on the shared channel.
pub fn phase_latency(messages: &[Message], cfg: &NetworkConfig) -> Result<f64, NetError> {
    cfg.validate()?;
    let first = messages.first().ok_or(NetError::EmptyPhase)?;
    let mut bits: u64 = 0;
    for m in messages {
        if m.phase != first.phase {
            return Err(NetError::MixedPhase {
                first: first.phase,
                other: m.phase,
            });
        }
        if m.size_bits == 0 {
            return Err(NetError::EmptyMessage);
        }
        bits += m.size_bits;
    }
    Ok(cfg.attempts()? as f64 * bits as f64 / cfg.channel_rate_bps)
}
