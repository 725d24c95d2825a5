//! Line protocol for allocation replies:
//!
//! ```text
//! POWERS: 66.7,66.7,...,66.7
//! DEFENSE: 90%
//! ```
//!
//! `DEFENSE` is optional. A total up to 1% over budget is scaled back onto
//! the budget; anything larger is rejected.

use thiserror::Error;

use super::{ResponderError, ResponseCandidate};
use crate::node::NodeId;
use crate::scenario::{PowerAllocation, WirelessScenario};

/// Totals within this fraction over budget are scaled down instead of rejected.
const CLAMP_FRACTION: f64 = 0.01;
const BUDGET_SLACK: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplyError {
    #[error("reply has no POWERS line")]
    MissingPowers,
    #[error("malformed power value {0:?}")]
    BadNumber(String),
    #[error("negative power {0}")]
    NegativePower(f64),
    #[error("expected {expected} powers, found {found}")]
    WrongCount { expected: usize, found: usize },
    #[error("malformed DEFENSE line {0:?}")]
    BadDefense(String),
    #[error("allocation total {total} W exceeds budget {budget} W by more than 1%")]
    OverBudget { total: f64, budget: f64 },
    #[error("invalid candidate: {0}")]
    Invalid(String),
}

fn parse_number(s: &str) -> Result<f64, ReplyError> {
    let t = s.trim();
    let t = t.strip_suffix('W').or_else(|| t.strip_suffix('w')).unwrap_or(t).trim();
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ReplyError::BadNumber(s.trim().to_string())),
    }
}

fn field<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let line = line.trim();
    let (head, rest) = line.split_once(':')?;
    head.trim().eq_ignore_ascii_case(key).then_some(rest)
}

pub fn parse_allocation_reply(
    text: &str,
    scenario: &WirelessScenario,
    proposer: NodeId,
) -> Result<ResponseCandidate, ReplyError> {
    let powers_line = text
        .lines()
        .find_map(|l| field(l, "POWERS"))
        .ok_or(ReplyError::MissingPowers)?;
    let mut powers = powers_line
        .split(',')
        .map(parse_number)
        .collect::<Result<Vec<f64>, _>>()?;
    if let Some(&neg) = powers.iter().find(|p| **p < 0.0) {
        return Err(ReplyError::NegativePower(neg));
    }
    if powers.len() != scenario.n_lbs {
        return Err(ReplyError::WrongCount {
            expected: scenario.n_lbs,
            found: powers.len(),
        });
    }

    let claimed = match text.lines().find_map(|l| field(l, "DEFENSE")) {
        None => 0.0,
        Some(raw) => {
            let t = raw.trim();
            let (num, scale) = match t.strip_suffix('%') {
                Some(n) => (n, 100.0),
                None => (t, 1.0),
            };
            match num.trim().parse::<f64>() {
                Ok(v) if v.is_finite() && (0.0..=scale).contains(&v) => v / scale,
                _ => return Err(ReplyError::BadDefense(t.to_string())),
            }
        }
    };

    let budget = scenario.p_total_w;
    let total: f64 = powers.iter().sum();
    if total > budget * (1.0 + BUDGET_SLACK) {
        if total > budget * (1.0 + CLAMP_FRACTION) {
            return Err(ReplyError::OverBudget { total, budget });
        }
        let factor = budget / total;
        for p in &mut powers {
            *p *= factor;
        }
        let over = powers.iter().sum::<f64>() - budget;
        if over > 0.0 {
            if let Some(max) = powers.iter_mut().max_by(|a, b| a.total_cmp(b)) {
                *max -= over;
            }
        }
    }

    ResponseCandidate::new(
        proposer,
        PowerAllocation::new(powers),
        claimed,
        Some(text.to_string()),
        budget,
    )
    .map_err(|e: ResponderError| ReplyError::Invalid(e.to_string()))
}

/// Reply text for a candidate. Uses shortest round-trip float formatting so
/// parsing it back reproduces the allocation exactly.
pub fn render_reply(candidate: &ResponseCandidate) -> String {
    let powers: Vec<String> = candidate
        .allocation
        .powers_w
        .iter()
        .map(|p| format!("{p:?}"))
        .collect();
    format!(
        "POWERS: {}\nDEFENSE: {:?}%\n",
        powers.join(","),
        candidate.claimed_defense * 100.0
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, ScenarioOverrides};
    use proptest::prelude::*;

    fn scn() -> WirelessScenario {
        generate_scenario(5, &ScenarioOverrides::default()).unwrap()
    }

    #[test]
    fn well_formed_reply() {
        let s = scn();
        let text = format!("POWERS: {}\nDEFENSE: 90%", vec!["66.6"; 30].join(","));
        let c = parse_allocation_reply(&text, &s, NodeId(2)).unwrap();
        assert_eq!(c.claimed_defense, 0.9);
        assert_eq!(c.allocation.len(), 30);
        assert_eq!(c.proposer, NodeId(2));
        assert_eq!(c.raw_text.as_deref(), Some(text.as_str()));
    }

    #[test]
    fn negative_power_rejected() {
        let s = scn();
        let mut vals = vec!["10".to_string(); 30];
        vals[0] = "-5".into();
        let text = format!("POWERS: {}", vals.join(","));
        assert_eq!(
            parse_allocation_reply(&text, &s, NodeId(0)),
            Err(ReplyError::NegativePower(-5.0))
        );
    }

    #[test]
    fn malformed_lines() {
        let s = scn();
        assert_eq!(
            parse_allocation_reply("I think 66 W each", &s, NodeId(0)),
            Err(ReplyError::MissingPowers)
        );
        assert!(matches!(
            parse_allocation_reply("POWERS: 1,2,abc", &s, NodeId(0)),
            Err(ReplyError::BadNumber(_))
        ));
        assert!(matches!(
            parse_allocation_reply("POWERS: 1,2", &s, NodeId(0)),
            Err(ReplyError::WrongCount { expected: 30, found: 2 })
        ));
        let text = format!("POWERS: {}\nDEFENSE: lots", vec!["1"; 30].join(","));
        assert!(matches!(parse_allocation_reply(&text, &s, NodeId(0)), Err(ReplyError::BadDefense(_))));
    }

    #[test]
    fn slight_overspend_is_scaled() {
        let s = scn();
        // 29 * 67 + 67 = 2010 W, 0.5% over.
        let text = format!("POWERS: {}", vec!["67"; 30].join(","));
        let c = parse_allocation_reply(&text, &s, NodeId(0)).unwrap();
        assert!((c.allocation.total() - 2000.0).abs() < 1e-9);
        assert!(c.allocation.total() <= 2000.0);
        for p in &c.allocation.powers_w[1..] {
            assert!((p - 67.0 * 2000.0 / 2010.0).abs() < 1e-9);
        }
    }

    #[test]
    fn large_overspend_is_rejected() {
        let s = scn();
        let text = format!("POWERS: {}", vec!["70"; 30].join(","));
        assert!(matches!(
            parse_allocation_reply(&text, &s, NodeId(0)),
            Err(ReplyError::OverBudget { .. })
        ));
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(raw in proptest::collection::vec(0.0f64..1.0, 30), claim in 0.0f64..=1.0) {
            let s = scn();
            let sum: f64 = raw.iter().sum::<f64>().max(1e-9);
            let powers: Vec<f64> = raw.iter().map(|r| r / sum * 1999.0).collect();
            let c = ResponseCandidate::new(NodeId(1), PowerAllocation::new(powers), claim, None, 2000.0).unwrap();
            let back = parse_allocation_reply(&render_reply(&c), &s, NodeId(1)).unwrap();
            for (a, b) in c.allocation.powers_w.iter().zip(&back.allocation.powers_w) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12));
            }
            prop_assert!((back.claimed_defense - claim).abs() <= 1e-9);
        }
    }
}
