//! Power allocation maximizing average defense.
//!
//! For an LBS with a single attacker the survival term
//! `1 - a*K/(K + c*p)` is concave in `p` (`K` attacker gain, `a` its outage
//! factor, `c = d^-alpha`), and its marginal gain `a*K*c/(K + c*p)^2` inverts
//! in closed form. That gives the water-filling level
//! `p(lambda) = max(0, (sqrt(a*K*c/lambda) - K)/c)`, with `lambda` found by
//! bisection so the budget is spent exactly.
//!
//! An LBS hit by several attackers has a product of such terms, which is
//! S-shaped (flat at zero power). Its marginal gain rises then falls, so its
//! power follows the descending branch of the marginal, or it is switched
//! off entirely. Every on/off pattern of these LBSs is solved separately and
//! the best one kept.

use super::{
    average_defense, AttackAssignment, PowerAllocation, ScenarioError, WirelessScenario,
};

pub const BRUTE_FORCE_MAX_LBS: usize = 4;

const LAMBDA_STEPS: usize = 200;
const INNER_STEPS: usize = 200;
/// Above this many multi-attacker LBSs only the all-on pattern is tried.
const MAX_ENUMERATED: usize = 12;
const BUDGET_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
struct Attacker {
    gain: f64,
    outage: f64,
}

/// Survival probability of one LBS as a function of its power.
#[derive(Debug, Clone)]
struct Station {
    lbs: usize,
    path: f64,
    attackers: Vec<Attacker>,
}

impl Station {
    fn value(&self, p: f64) -> f64 {
        let g = self.path * p;
        self.attackers
            .iter()
            .map(|a| 1.0 - a.outage * a.gain / (a.gain + g))
            .product()
    }

    fn marginal(&self, p: f64) -> f64 {
        let g = self.path * p;
        let factors: Vec<f64> = self
            .attackers
            .iter()
            .map(|a| 1.0 - a.outage * a.gain / (a.gain + g))
            .collect();
        let mut total = 0.0;
        for (j, a) in self.attackers.iter().enumerate() {
            let d = a.gain + g;
            let deriv = a.outage * a.gain * self.path / (d * d);
            let rest: f64 = factors
                .iter()
                .enumerate()
                .filter(|(l, _)| *l != j)
                .map(|(_, f)| f)
                .product();
            total += deriv * rest;
        }
        total
    }
}

/// Power-vs-level response of one station.
#[derive(Debug, Clone)]
enum Response {
    /// Single attacker: closed-form inverse of the marginal.
    Concave { k: f64, a: f64, c: f64 },
    /// Several attackers: descending branch above the marginal's peak.
    Sigmoid { peak_p: f64, peak_slope: f64 },
}

fn golden_peak(st: &Station, hi: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, hi);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (st.marginal(x1), st.marginal(x2));
    for _ in 0..INNER_STEPS {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = st.marginal(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = st.marginal(x1);
        }
        if b - a <= 1e-12 * hi {
            break;
        }
    }
    (a + b) / 2.0
}

impl Response {
    fn for_station(st: &Station, budget: f64) -> Response {
        if st.attackers.len() == 1 {
            let a = &st.attackers[0];
            Response::Concave {
                k: a.gain,
                a: a.outage,
                c: st.path,
            }
        } else {
            let peak_p = golden_peak(st, budget);
            Response::Sigmoid {
                peak_p,
                peak_slope: st.marginal(peak_p),
            }
        }
    }

    /// Largest level at which the station still draws power.
    fn max_level(&self) -> f64 {
        match *self {
            Response::Concave { k, a, c } => a * c / k,
            Response::Sigmoid { peak_slope, .. } => peak_slope,
        }
    }

    fn power_at(&self, st: &Station, lambda: f64, budget: f64) -> f64 {
        match *self {
            Response::Concave { k, a, c } => {
                let p = ((a * k * c / lambda).sqrt() - k) / c;
                p.clamp(0.0, budget)
            }
            Response::Sigmoid { peak_p, peak_slope } => {
                if lambda > peak_slope {
                    return 0.0;
                }
                if st.marginal(budget) >= lambda {
                    return budget;
                }
                let (mut lo, mut hi) = (peak_p, budget);
                for _ in 0..INNER_STEPS {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if st.marginal(mid) >= lambda {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            }
        }
    }
}

fn stations(scenario: &WirelessScenario, assignment: &AttackAssignment) -> Vec<Station> {
    (0..scenario.n_lbs)
        .filter_map(|i| {
            let attackers: Vec<Attacker> = assignment
                .attackers_of(i)
                .map(|j| {
                    let gain = scenario.fbs_gain(j);
                    Attacker {
                        gain,
                        outage: scenario.outage_factor(gain),
                    }
                })
                .collect();
            if attackers.is_empty() {
                None
            } else {
                Some(Station {
                    lbs: i,
                    path: scenario.lbs_distance(i).powf(-scenario.alpha),
                    attackers,
                })
            }
        })
        .collect()
}

struct Solution {
    powers: Vec<f64>,
    objective: f64,
}

/// Water-fills `budget` over the `active` stations.
fn fill(
    sts: &[Station],
    responses: &[Response],
    active: &[bool],
    budget: f64,
    n_lbs: usize,
) -> Result<Solution, ScenarioError> {
    let spend = |lambda: f64| -> Vec<f64> {
        sts.iter()
            .zip(responses)
            .zip(active)
            .map(|((st, r), &on)| if on { r.power_at(st, lambda, budget) } else { 0.0 })
            .collect()
    };

    let mut hi = sts
        .iter()
        .zip(responses)
        .zip(active)
        .filter(|(_, &on)| on)
        .map(|((_, r), _)| r.max_level())
        .fold(0.0f64, f64::max);
    let mut powers = vec![0.0; n_lbs];
    if hi <= 0.0 {
        return Ok(Solution {
            objective: objective(sts, &powers, n_lbs),
            powers,
        });
    }
    hi *= 1.0 + 1e-12;
    let mut lo = hi;
    let mut steps = 0;
    while spend(lo).iter().sum::<f64>() < budget {
        lo *= 1e-3;
        steps += 1;
        if steps > LAMBDA_STEPS || lo == 0.0 {
            return Err(ScenarioError::SolverDiverged(steps));
        }
    }

    for _ in 0..LAMBDA_STEPS {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if spend(mid).iter().sum::<f64>() > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut chosen = spend(hi);
    let spent: f64 = chosen.iter().sum();
    let gap = budget - spent;
    if gap > BUDGET_TOL * budget {
        // The level sits on a switch-on jump of a sigmoid station; park the
        // remainder on the station that jumps.
        let high = spend(lo);
        if let Some(k) = (0..chosen.len())
            .filter(|&k| high[k] > chosen[k])
            .max_by(|&a, &b| (high[a] - chosen[a]).total_cmp(&(high[b] - chosen[b])))
        {
            chosen[k] += gap;
        }
    }
    for (st, p) in sts.iter().zip(&chosen) {
        powers[st.lbs] = *p;
    }
    Ok(Solution {
        objective: objective(sts, &powers, n_lbs),
        powers,
    })
}

fn objective(sts: &[Station], powers: &[f64], n_lbs: usize) -> f64 {
    let untargeted = (n_lbs - sts.len()) as f64;
    let targeted: f64 = sts.iter().map(|st| st.value(powers[st.lbs])).sum();
    (untargeted + targeted) / n_lbs as f64
}

/// Allocation maximizing average defense under the total power budget.
/// Untargeted LBSs receive nothing.
pub fn optimal_allocation(
    scenario: &WirelessScenario,
    assignment: &AttackAssignment,
) -> Result<PowerAllocation, ScenarioError> {
    let sts = stations(scenario, assignment);
    if sts.is_empty() {
        return Err(ScenarioError::NoTargets);
    }
    let budget = scenario.p_total_w;
    let responses: Vec<Response> = sts.iter().map(|s| Response::for_station(s, budget)).collect();
    let sigmoid: Vec<usize> = responses
        .iter()
        .enumerate()
        .filter(|(_, r)| matches!(r, Response::Sigmoid { .. }))
        .map(|(k, _)| k)
        .collect();

    let patterns: Vec<u64> = if sigmoid.len() > MAX_ENUMERATED {
        vec![u64::MAX]
    } else {
        (0..1u64 << sigmoid.len()).rev().collect()
    };

    let mut best: Option<Solution> = None;
    for mask in patterns {
        let mut active = vec![true; sts.len()];
        for (bit, &k) in sigmoid.iter().enumerate() {
            active[k] = mask >> bit & 1 == 1;
        }
        if !active.iter().any(|&a| a) {
            continue;
        }
        let sol = fill(&sts, &responses, &active, budget, scenario.n_lbs)?;
        if best.as_ref().is_none_or(|b| sol.objective > b.objective) {
            best = Some(sol);
        }
    }
    let best = best.ok_or(ScenarioError::NoTargets)?;
    let total: f64 = best.powers.iter().sum();
    if (total - budget).abs() > BUDGET_TOL * budget {
        return Err(ScenarioError::SolverDiverged(LAMBDA_STEPS));
    }
    Ok(PowerAllocation::new(best.powers))
}

/// Partial derivative of the average defense with respect to each LBS power.
pub fn marginal_gains(
    scenario: &WirelessScenario,
    assignment: &AttackAssignment,
    allocation: &PowerAllocation,
) -> Vec<f64> {
    let n = scenario.n_lbs as f64;
    let mut out = vec![0.0; scenario.n_lbs];
    for st in stations(scenario, assignment) {
        out[st.lbs] = st.marginal(allocation.powers_w[st.lbs]) / n;
    }
    out
}

/// Exhaustive search over allocations on a `grid_step_w` lattice that spend
/// the whole budget. Average defense is non-decreasing in every power, so
/// the full-budget face of the simplex holds a maximizer.
pub fn brute_force_allocation(
    scenario: &WirelessScenario,
    assignment: &AttackAssignment,
    grid_step_w: f64,
) -> Result<PowerAllocation, ScenarioError> {
    let n = scenario.n_lbs;
    if n > BRUTE_FORCE_MAX_LBS {
        return Err(ScenarioError::TooManyStations(n));
    }
    if !(grid_step_w.is_finite() && grid_step_w > 0.0) {
        return Err(ScenarioError::InvalidParameter {
            field: "grid_step_w",
            reason: format!("must be positive, got {grid_step_w}"),
        });
    }
    let units = (scenario.p_total_w / grid_step_w + 1e-9).floor() as usize;

    // table[i][k] = 1 - P_FBS_i at k grid steps, evaluated through the
    // public attack model.
    let table: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..=units)
                .map(|k| {
                    let mut powers = vec![0.0; n];
                    powers[i] = k as f64 * grid_step_w;
                    let alloc = PowerAllocation::new(powers);
                    1.0 - super::attack_success_prob(scenario, &alloc, assignment, i)
                })
                .collect()
        })
        .collect();

    let mut best_units = vec![0usize; n];
    let mut best_value = f64::NEG_INFINITY;
    let mut current = vec![0usize; n];
    search(&table, 0, units, 0.0, &mut current, &mut best_units, &mut best_value);

    let alloc = PowerAllocation::new(best_units.iter().map(|&k| k as f64 * grid_step_w).collect());
    debug_assert!(average_defense(scenario, &alloc, assignment).is_ok());
    Ok(alloc)
}

fn search(
    table: &[Vec<f64>],
    i: usize,
    remaining: usize,
    acc: f64,
    current: &mut Vec<usize>,
    best_units: &mut Vec<usize>,
    best_value: &mut f64,
) {
    if i + 1 == table.len() {
        current[i] = remaining;
        let v = acc + table[i][remaining];
        if v > *best_value {
            *best_value = v;
            best_units.clone_from(current);
        }
        return;
    }
    for k in 0..=remaining {
        current[i] = k;
        search(table, i + 1, remaining - k, acc + table[i][k], current, best_units, best_value);
    }
}
