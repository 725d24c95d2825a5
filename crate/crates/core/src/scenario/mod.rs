//! False-base-station case study: geometry, attack model and objective.
//!
//! The user equipment (UE) sits at the origin of a disc. Legitimate base
//! stations (LBSs) and false base stations (FBSs) are scattered uniformly on
//! the disc. Each FBS attacks the LBS nearest to it. An attack on LBS `i`
//! succeeds when the FBS wins the fading comparison at the UE *and* its own
//! link sustains the redundancy rate:
//!
//! ```text
//! g_F = p_fbs * d_F^-alpha          g_i = p_i * d_i^-alpha
//! P_i = g_F / (g_F + g_i) * exp(-noise * (2^r - 1) / g_F)
//! ```
//!
//! Several attackers on one LBS combine independently, `1 - prod(1 - P_j)`.
//! The objective is the average defense `(1/n) * sum(1 - P_i)`.

mod solver;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use solver::{brute_force_allocation, marginal_gains, optimal_allocation, BRUTE_FORCE_MAX_LBS};

/// Distances are clamped here to keep the path loss finite.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Relative slack allowed on the power budget for floating-point sums.
pub const BUDGET_RTOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario parameter {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),
    #[error("no LBS is targeted by any FBS")]
    NoTargets,
    #[error("power solver did not converge after {0} bisection steps")]
    SolverDiverged(usize),
    #[error("brute force refused for {0} LBSs (limit {BRUTE_FORCE_MAX_LBS})")]
    TooManyStations(usize),
    #[error("scenario json: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WirelessScenario {
    pub radius_m: f64,
    pub n_lbs: usize,
    pub n_fbs: usize,
    pub lbs_pos: Vec<Point>,
    pub fbs_pos: Vec<Point>,
    pub p_total_w: f64,
    pub p_fbs_w: f64,
    pub alpha: f64,
    pub noise_w: f64,
    pub redundancy_bpshz: f64,
    pub bandwidth_hz: f64,
    pub seed: u64,
}

/// Optional replacements for the default scenario parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioOverrides {
    pub radius_m: Option<f64>,
    pub n_lbs: Option<usize>,
    pub n_fbs: Option<usize>,
    pub p_total_w: Option<f64>,
    pub p_fbs_w: Option<f64>,
    pub alpha: Option<f64>,
    pub noise_w: Option<f64>,
    pub redundancy_bpshz: Option<f64>,
    pub bandwidth_hz: Option<f64>,
}

pub const DEFAULT_RADIUS_M: f64 = 5000.0;
pub const DEFAULT_N_LBS: usize = 30;
pub const DEFAULT_N_FBS: usize = 10;
pub const DEFAULT_P_TOTAL_W: f64 = 2000.0;
pub const DEFAULT_P_FBS_W: f64 = 80.0;
pub const DEFAULT_ALPHA: f64 = 2.5;
pub const DEFAULT_NOISE_W: f64 = 4e-14;
pub const DEFAULT_REDUNDANCY_BPSHZ: f64 = 1.0;
pub const DEFAULT_BANDWIDTH_HZ: f64 = 20e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub powers_w: Vec<f64>,
}

impl PowerAllocation {
    pub fn new(powers_w: Vec<f64>) -> Self {
        PowerAllocation { powers_w }
    }

    pub fn uniform(n: usize, total_w: f64) -> Self {
        PowerAllocation {
            powers_w: vec![total_w / n as f64; n],
        }
    }

    pub fn total(&self) -> f64 {
        self.powers_w.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.powers_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers_w.is_empty()
    }

    /// Non-negative, finite, right length and within the budget.
    pub fn check(&self, n_lbs: usize, p_total_w: f64) -> Result<(), ScenarioError> {
        if self.powers_w.len() != n_lbs {
            return Err(ScenarioError::InvalidAllocation(format!(
                "{} powers for {} LBSs",
                self.powers_w.len(),
                n_lbs
            )));
        }
        if let Some((i, p)) = self
            .powers_w
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(ScenarioError::InvalidAllocation(format!(
                "power {i} is {p}"
            )));
        }
        let total = self.total();
        if total > p_total_w * (1.0 + BUDGET_RTOL) {
            return Err(ScenarioError::InvalidAllocation(format!(
                "sum {total} W exceeds budget {p_total_w} W"
            )));
        }
        Ok(())
    }
}

/// `target_of[j]` is the LBS attacked by FBS `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackAssignment {
    pub target_of: Vec<usize>,
}

impl AttackAssignment {
    /// FBS indices attacking LBS `lbs`.
    pub fn attackers_of(&self, lbs: usize) -> impl Iterator<Item = usize> + '_ {
        self.target_of
            .iter()
            .enumerate()
            .filter(move |(_, &t)| t == lbs)
            .map(|(j, _)| j)
    }

    pub fn is_targeted(&self, lbs: usize) -> bool {
        self.target_of.contains(&lbs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseReport {
    pub per_lbs_attack_prob: Vec<f64>,
    pub average_defense: f64,
}

impl DefenseReport {
    pub fn from_attack_probs(per_lbs_attack_prob: Vec<f64>) -> Self {
        let n = per_lbs_attack_prob.len().max(1) as f64;
        let average_defense = per_lbs_attack_prob.iter().map(|p| 1.0 - p).sum::<f64>() / n;
        DefenseReport {
            per_lbs_attack_prob,
            average_defense,
        }
    }
}

impl WirelessScenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let positive = [
            ("radius_m", self.radius_m),
            ("p_total_w", self.p_total_w),
            ("p_fbs_w", self.p_fbs_w),
            ("alpha", self.alpha),
            ("noise_w", self.noise_w),
            ("redundancy_bpshz", self.redundancy_bpshz),
            ("bandwidth_hz", self.bandwidth_hz),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ScenarioError::InvalidParameter {
                    field,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        if self.n_lbs == 0 {
            return Err(ScenarioError::InvalidParameter {
                field: "n_lbs",
                reason: "need at least one LBS".into(),
            });
        }
        if self.lbs_pos.len() != self.n_lbs {
            return Err(ScenarioError::InvalidParameter {
                field: "lbs_pos",
                reason: format!("{} positions for n_lbs = {}", self.lbs_pos.len(), self.n_lbs),
            });
        }
        if self.fbs_pos.len() != self.n_fbs {
            return Err(ScenarioError::InvalidParameter {
                field: "fbs_pos",
                reason: format!("{} positions for n_fbs = {}", self.fbs_pos.len(), self.n_fbs),
            });
        }
        let limit = self.radius_m * (1.0 + 1e-12);
        for (field, pts) in [("lbs_pos", &self.lbs_pos), ("fbs_pos", &self.fbs_pos)] {
            if let Some(p) = pts.iter().find(|p| p.norm().partial_cmp(&limit).is_none_or(|o| o.is_gt())) {
                return Err(ScenarioError::InvalidParameter {
                    field,
                    reason: format!("point ({}, {}) lies outside the disc", p.x, p.y),
                });
            }
        }
        Ok(())
    }

    /// Distance from LBS `i` to the UE, clamped to [`MIN_DISTANCE_M`].
    pub fn lbs_distance(&self, i: usize) -> f64 {
        self.lbs_pos[i].norm().max(MIN_DISTANCE_M)
    }

    pub fn fbs_distance(&self, j: usize) -> f64 {
        self.fbs_pos[j].norm().max(MIN_DISTANCE_M)
    }

    /// Received attacker strength of FBS `j` at the UE.
    pub fn fbs_gain(&self, j: usize) -> f64 {
        channel_gain(self.p_fbs_w, self.fbs_distance(j), self.alpha)
    }

    /// Probability that an attacker with gain `g_f` sustains the redundancy rate.
    pub fn outage_factor(&self, g_f: f64) -> f64 {
        if g_f <= 0.0 {
            return 0.0;
        }
        (-self.noise_w * (2f64.powf(self.redundancy_bpshz) - 1.0) / g_f).exp()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ScenarioError> {
        let scn: WirelessScenario =
            serde_json::from_str(s).map_err(|e| ScenarioError::Json(e.to_string()))?;
        scn.validate()?;
        Ok(scn)
    }
}

fn sample_disc(rng: &mut ChaCha8Rng, radius: f64, count: usize) -> Vec<Point> {
    (0..count)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let theta = std::f64::consts::TAU * rng.random::<f64>();
            Point {
                x: r * theta.cos(),
                y: r * theta.sin(),
            }
        })
        .collect()
}

/// Builds a scenario with positions drawn uniformly on the disc.
pub fn generate_scenario(seed: u64, overrides: &ScenarioOverrides) -> Result<WirelessScenario, ScenarioError> {
    let radius_m = overrides.radius_m.unwrap_or(DEFAULT_RADIUS_M);
    let n_lbs = overrides.n_lbs.unwrap_or(DEFAULT_N_LBS);
    let n_fbs = overrides.n_fbs.unwrap_or(DEFAULT_N_FBS);
    if !(radius_m.is_finite() && radius_m > 0.0) {
        return Err(ScenarioError::InvalidParameter {
            field: "radius_m",
            reason: format!("must be positive and finite, got {radius_m}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lbs_pos = sample_disc(&mut rng, radius_m, n_lbs);
    let fbs_pos = sample_disc(&mut rng, radius_m, n_fbs);
    let scn = WirelessScenario {
        radius_m,
        n_lbs,
        n_fbs,
        lbs_pos,
        fbs_pos,
        p_total_w: overrides.p_total_w.unwrap_or(DEFAULT_P_TOTAL_W),
        p_fbs_w: overrides.p_fbs_w.unwrap_or(DEFAULT_P_FBS_W),
        alpha: overrides.alpha.unwrap_or(DEFAULT_ALPHA),
        noise_w: overrides.noise_w.unwrap_or(DEFAULT_NOISE_W),
        redundancy_bpshz: overrides.redundancy_bpshz.unwrap_or(DEFAULT_REDUNDANCY_BPSHZ),
        bandwidth_hz: overrides.bandwidth_hz.unwrap_or(DEFAULT_BANDWIDTH_HZ),
        seed,
    };
    scn.validate()?;
    Ok(scn)
}

/// Received power `p * d^-alpha`, with `d` clamped to [`MIN_DISTANCE_M`].
pub fn channel_gain(p_w: f64, d_m: f64, alpha: f64) -> f64 {
    p_w * d_m.max(MIN_DISTANCE_M).powf(-alpha)
}

/// Each FBS targets its nearest LBS; ties go to the lower LBS index.
pub fn assign_attackers(scenario: &WirelessScenario) -> AttackAssignment {
    let target_of = scenario
        .fbs_pos
        .iter()
        .map(|f| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (i, l) in scenario.lbs_pos.iter().enumerate() {
                let d = f.dist2(l);
                if d < best_d {
                    best = i;
                    best_d = d;
                }
            }
            best
        })
        .collect();
    AttackAssignment { target_of }
}

/// Win probability of a single attacker with gain `g_f` against an LBS with
/// received gain `g_i`, including the attacker's outage factor.
pub fn single_attack_prob(scenario: &WirelessScenario, g_f: f64, g_i: f64) -> f64 {
    let total = g_f + g_i;
    if total <= 0.0 {
        return 0.0;
    }
    g_f / total * scenario.outage_factor(g_f)
}

/// `P_FBS_i` for LBS `lbs` under `allocation`; zero when nobody attacks it.
pub fn attack_success_prob(
    scenario: &WirelessScenario,
    allocation: &PowerAllocation,
    assignment: &AttackAssignment,
    lbs: usize,
) -> f64 {
    let g_i = channel_gain(allocation.powers_w[lbs], scenario.lbs_distance(lbs), scenario.alpha);
    let survive: f64 = assignment
        .attackers_of(lbs)
        .map(|j| 1.0 - single_attack_prob(scenario, scenario.fbs_gain(j), g_i))
        .product();
    1.0 - survive
}

pub fn average_defense(
    scenario: &WirelessScenario,
    allocation: &PowerAllocation,
    assignment: &AttackAssignment,
) -> Result<DefenseReport, ScenarioError> {
    allocation.check(scenario.n_lbs, scenario.p_total_w)?;
    let probs = (0..scenario.n_lbs)
        .map(|i| attack_success_prob(scenario, allocation, assignment, i))
        .collect();
    Ok(DefenseReport::from_attack_probs(probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(lbs: &[(f64, f64)], fbs: &[(f64, f64)]) -> WirelessScenario {
        WirelessScenario {
            radius_m: DEFAULT_RADIUS_M,
            n_lbs: lbs.len(),
            n_fbs: fbs.len(),
            lbs_pos: lbs.iter().map(|&(x, y)| Point { x, y }).collect(),
            fbs_pos: fbs.iter().map(|&(x, y)| Point { x, y }).collect(),
            p_total_w: DEFAULT_P_TOTAL_W,
            p_fbs_w: DEFAULT_P_FBS_W,
            alpha: DEFAULT_ALPHA,
            noise_w: DEFAULT_NOISE_W,
            redundancy_bpshz: DEFAULT_REDUNDANCY_BPSHZ,
            bandwidth_hz: DEFAULT_BANDWIDTH_HZ,
            seed: 0,
        }
    }

    #[test]
    fn generation_is_deterministic_with_defaults() {
        let a = generate_scenario(42, &ScenarioOverrides::default()).unwrap();
        let b = generate_scenario(42, &ScenarioOverrides::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.lbs_pos.len(), 30);
        assert_eq!(a.fbs_pos.len(), 10);
        assert!(a.lbs_pos.iter().chain(&a.fbs_pos).all(|p| p.norm() <= 5000.0));
        assert_eq!(a.p_total_w, 2000.0);
        assert_eq!(a.p_fbs_w, 80.0);
        assert_eq!(a.alpha, 2.5);
        assert_eq!(a.noise_w, 4e-14);
        assert_eq!(a.redundancy_bpshz, 1.0);
        assert_eq!(a.bandwidth_hz, 20e6);
        assert_ne!(a, generate_scenario(43, &ScenarioOverrides::default()).unwrap());
    }

    #[test]
    fn small_override() {
        let o = ScenarioOverrides {
            n_lbs: Some(3),
            n_fbs: Some(1),
            ..Default::default()
        };
        let s = generate_scenario(1, &o).unwrap();
        assert_eq!((s.lbs_pos.len(), s.fbs_pos.len()), (3, 1));
        let bad = ScenarioOverrides {
            alpha: Some(-1.0),
            ..Default::default()
        };
        assert!(generate_scenario(1, &bad).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let s = generate_scenario(9, &ScenarioOverrides::default()).unwrap();
        let back = WirelessScenario::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
        for (a, b) in s.lbs_pos.iter().zip(&back.lbs_pos) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
        }
    }

    #[test]
    fn channel_gain_examples() {
        // Reference values evaluated independently in 50-digit arithmetic.
        assert!((channel_gain(80.0, 1000.0, 2.5) - 2.529822128134704e-6).abs() < 1e-17);
        assert!((channel_gain(50.0, 800.0, 2.5) - 2.762135864009951e-6).abs() < 1e-17);
        assert_eq!(channel_gain(37.0, 1.0, 2.5), 37.0);
        assert_eq!(channel_gain(37.0, 0.0, 2.5), 37.0);
    }

    #[test]
    fn worked_attack_probability() {
        // FBS 80 W at 1000 m, LBS 50 W at 800 m.
        let s = toy(&[(800.0, 0.0)], &[(0.0, 1000.0)]);
        let assign = AttackAssignment { target_of: vec![0] };
        let alloc = PowerAllocation::new(vec![50.0]);
        let p = attack_success_prob(&s, &alloc, &assign, 0);
        assert!((p - 0.47805).abs() < 1e-4, "{p}");
    }

    #[test]
    fn attack_probability_edge_cases() {
        let s = toy(&[(800.0, 0.0), (0.0, 900.0)], &[(800.0, 10.0)]);
        let assign = assign_attackers(&s);
        assert_eq!(assign.target_of, vec![0]);
        let alloc = PowerAllocation::new(vec![10.0, 10.0]);
        assert_eq!(attack_success_prob(&s, &alloc, &assign, 1), 0.0);

        // Same power and distance as the attacker: half the outage factor.
        let sym = toy(&[(1000.0, 0.0)], &[(0.0, 1000.0)]);
        let a = AttackAssignment { target_of: vec![0] };
        let p = attack_success_prob(&sym, &PowerAllocation::new(vec![80.0]), &a, 0);
        let outage = sym.outage_factor(sym.fbs_gain(0));
        assert!((p - 0.5 * outage).abs() < 1e-15);

        // Zero power leaves only the outage factor.
        let p0 = attack_success_prob(&sym, &PowerAllocation::new(vec![0.0]), &a, 0);
        assert_eq!(p0, outage);
        assert!(p0 > 0.999_999);
    }

    #[test]
    fn average_defense_limits() {
        let s = generate_scenario(3, &ScenarioOverrides { n_fbs: Some(0), ..Default::default() }).unwrap();
        let assign = assign_attackers(&s);
        let r = average_defense(&s, &PowerAllocation::uniform(30, 2000.0), &assign).unwrap();
        assert_eq!(r.average_defense, 1.0);

        let s = toy(&[(100.0, 0.0), (0.0, 200.0)], &[(100.0, 1.0), (0.0, 201.0)]);
        let assign = assign_attackers(&s);
        let r = average_defense(&s, &PowerAllocation::new(vec![0.0, 0.0]), &assign).unwrap();
        let outage_mean = (s.outage_factor(s.fbs_gain(0)) + s.outage_factor(s.fbs_gain(1))) / 2.0;
        assert!((r.average_defense - (1.0 - outage_mean)).abs() < 1e-15);
        assert!(r.average_defense < 1e-6);
    }

    #[test]
    fn three_station_hand_evaluation() {
        // Each LBS has one attacker placed just beside it.
        let s = toy(
            &[(1000.0, 0.0), (0.0, 2000.0), (-3000.0, 0.0)],
            &[(1000.0, 50.0), (0.0, 2100.0), (-2900.0, 0.0)],
        );
        let assign = assign_attackers(&s);
        assert_eq!(assign.target_of, vec![0, 1, 2]);
        let powers = [500.0, 700.0, 800.0];
        let alloc = PowerAllocation::new(powers.to_vec());
        let r = average_defense(&s, &alloc, &assign).unwrap();

        let lbs_d = [1000.0f64, 2000.0, 3000.0];
        let fbs_d = [(1000.0f64 * 1000.0 + 50.0 * 50.0).sqrt(), 2100.0, 2900.0];
        let mut expect = 0.0;
        for k in 0..3 {
            let gf = 80.0 / fbs_d[k].powf(2.5);
            let gi = powers[k] / lbs_d[k].powf(2.5);
            let p = gf / (gf + gi) * (-4e-14 / gf).exp();
            assert!((r.per_lbs_attack_prob[k] - p).abs() < 1e-14);
            expect += 1.0 - p;
        }
        assert!((r.average_defense - expect / 3.0).abs() < 1e-14);
    }

    #[test]
    fn average_defense_rejects_overspend() {
        let s = toy(&[(100.0, 0.0)], &[(0.0, 100.0)]);
        let assign = assign_attackers(&s);
        assert!(average_defense(&s, &PowerAllocation::new(vec![2001.0]), &assign).is_err());
        assert!(average_defense(&s, &PowerAllocation::new(vec![-1.0]), &assign).is_err());
        assert!(average_defense(&s, &PowerAllocation::new(vec![1.0, 1.0]), &assign).is_err());
    }

    #[test]
    fn assignment_rules() {
        let lbs: Vec<(f64, f64)> = (0..10).map(|i| (100.0 * i as f64, 0.0)).collect();
        let s = toy(&lbs, &[(700.0, 0.0)]);
        assert_eq!(assign_attackers(&s).target_of, vec![7]);

        // Equidistant from LBS 2 (x=200) and LBS 5 (y=200 mirrored).
        let mut lbs: Vec<(f64, f64)> = (0..6).map(|i| (0.0, 1000.0 + 10.0 * i as f64)).collect();
        lbs[2] = (200.0, 0.0);
        lbs[5] = (-200.0, 0.0);
        let s = toy(&lbs, &[(0.0, 0.0)]);
        assert_eq!(assign_attackers(&s).target_of, vec![2]);
    }

    #[test]
    fn assignment_matches_nearest_scan() {
        let s = generate_scenario(42, &ScenarioOverrides::default()).unwrap();
        let assign = assign_attackers(&s);
        for (j, f) in s.fbs_pos.iter().enumerate() {
            let dists: Vec<f64> = s
                .lbs_pos
                .iter()
                .map(|l| ((f.x - l.x).powi(2) + (f.y - l.y).powi(2)).sqrt())
                .collect();
            let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
            let first = dists.iter().position(|&d| d == min).unwrap();
            assert_eq!(assign.target_of[j], first);
        }
    }

    proptest! {
        #[test]
        fn more_power_lowers_attack_prob(seed in 0u64..500, bump in 0.1f64..500.0) {
            let s = generate_scenario(seed, &ScenarioOverrides::default()).unwrap();
            let assign = assign_attackers(&s);
            let base = PowerAllocation::uniform(s.n_lbs, s.p_total_w / 2.0);
            let before = average_defense(&s, &base, &assign).unwrap();
            for &i in &assign.target_of {
                let mut more = base.clone();
                more.powers_w[i] += bump;
                let after = average_defense(&s, &more, &assign).unwrap();
                prop_assert!(after.per_lbs_attack_prob[i] < before.per_lbs_attack_prob[i]);
                prop_assert!(after.average_defense >= before.average_defense);
            }
        }
    }
}
