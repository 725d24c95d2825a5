//! Natural-language prompts sent to responders.

use serde::{Deserialize, Serialize};

/// How many explicit powers a history line lists before "and others".
const LISTED_POWERS: usize = 4;

/// A past allocation and the defense it achieved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub total_power_w: f64,
    pub powers_w: Vec<f64>,
    pub defense_prob: f64,
}

fn trim_decimal(value: f64, decimals: usize) -> String {
    let s = format!("{value:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn watts(p: f64) -> String {
    format!("{}W", trim_decimal(p, 2))
}

/// `3kW` for whole kilowatts, `2500W` otherwise.
fn total_power(p: f64) -> String {
    if p > 0.0 && (p / 1000.0).fract() == 0.0 {
        format!("{}kW", trim_decimal(p / 1000.0, 0))
    } else {
        watts(p)
    }
}

fn percent(prob: f64) -> String {
    format!("{}%", trim_decimal(prob * 100.0, 2))
}

/// "If the total power is 3kW, and the power of 30 LBSs is 30W, 40W, 40W,
/// 50W, and others, then the average probability of LBSs resisting FBS
/// attacks is 85%"
pub fn format_history_prompt(record: &PromptRecord) -> String {
    let mut listed: Vec<String> = record
        .powers_w
        .iter()
        .take(LISTED_POWERS)
        .map(|&p| watts(p))
        .collect();
    if record.powers_w.len() > LISTED_POWERS {
        listed.push("and others".to_string());
    }
    format!(
        "If the total power is {}, and the power of {} LBSs is {}, then the average probability of LBSs resisting FBS attacks is {}",
        total_power(record.total_power_w),
        record.powers_w.len(),
        listed.join(", "),
        percent(record.defense_prob),
    )
}

pub fn format_query_prompt(total_power_w: f64, n: usize) -> String {
    format!(
        "If the total power is {}, what should each of {} LBSs be powered to maximize the average probability of LBSs defending against FBS attacks?",
        total_power(total_power_w),
        n
    )
}

/// Full prompt for a remote responder: recent history, the question, and
/// the reply format the parser expects.
pub fn build_prompt(history: &[PromptRecord], total_power_w: f64, n: usize) -> String {
    let mut out = String::new();
    for record in history {
        out.push_str(&format_history_prompt(record));
        out.push_str(".\n");
    }
    out.push_str(&format_query_prompt(total_power_w, n));
    out.push('\n');
    out.push_str(&format!(
        "Answer with one line \"POWERS: p1,p2,...,p{n}\" giving each power in watts, then one line \"DEFENSE: x%\" with the expected average probability.\n"
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_with_others(n: usize, head: &[f64]) -> Vec<f64> {
        let mut v = head.to_vec();
        v.resize(n, 10.0);
        v
    }

    #[test]
    fn history_templates() {
        let r = PromptRecord {
            total_power_w: 3000.0,
            powers_w: first_with_others(30, &[30.0, 40.0, 40.0, 50.0]),
            defense_prob: 0.85,
        };
        assert_eq!(
            format_history_prompt(&r),
            "If the total power is 3kW, and the power of 30 LBSs is 30W, 40W, 40W, 50W, and others, then the average probability of LBSs resisting FBS attacks is 85%"
        );

        let r = PromptRecord {
            total_power_w: 2000.0,
            powers_w: first_with_others(30, &[20.0, 30.0, 40.0, 50.0]),
            defense_prob: 0.83,
        };
        assert_eq!(
            format_history_prompt(&r),
            "If the total power is 2kW, and the power of 30 LBSs is 20W, 30W, 40W, 50W, and others, then the average probability of LBSs resisting FBS attacks is 83%"
        );

        let r = PromptRecord {
            total_power_w: 1000.0,
            powers_w: vec![1000.0],
            defense_prob: 0.97,
        };
        assert_eq!(
            format_history_prompt(&r),
            "If the total power is 1kW, and the power of 1 LBSs is 1000W, then the average probability of LBSs resisting FBS attacks is 97%"
        );
    }

    #[test]
    fn fractional_values() {
        let r = PromptRecord {
            total_power_w: 2500.0,
            powers_w: vec![66.666666, 1.5],
            defense_prob: 0.91234,
        };
        assert_eq!(
            format_history_prompt(&r),
            "If the total power is 2500W, and the power of 2 LBSs is 66.67W, 1.5W, then the average probability of LBSs resisting FBS attacks is 91.23%"
        );
    }

    #[test]
    fn query_templates() {
        assert_eq!(
            format_query_prompt(2000.0, 30),
            "If the total power is 2kW, what should each of 30 LBSs be powered to maximize the average probability of LBSs defending against FBS attacks?"
        );
        assert_eq!(
            format_query_prompt(3000.0, 5),
            "If the total power is 3kW, what should each of 5 LBSs be powered to maximize the average probability of LBSs defending against FBS attacks?"
        );
        assert_eq!(
            format_query_prompt(2500.0, 30),
            "If the total power is 2500W, what should each of 30 LBSs be powered to maximize the average probability of LBSs defending against FBS attacks?"
        );
    }

    #[test]
    fn full_prompt_lists_history_then_question() {
        let h = vec![PromptRecord {
            total_power_w: 2000.0,
            powers_w: vec![1000.0, 1000.0],
            defense_prob: 0.5,
        }];
        let p = build_prompt(&h, 2000.0, 2);
        let lines: Vec<&str> = p.lines().collect();
        assert!(lines[0].starts_with("If the total power is 2kW, and the power of 2 LBSs"));
        assert!(lines[1].starts_with("If the total power is 2kW, what should"));
        assert!(lines[2].contains("POWERS:"));
    }
}
