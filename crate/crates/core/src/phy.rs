//! Interference, SINR, achievable rates, and the per-VSP economics (cost,
//! revenue, utility, QoS penalty) for a given allocation and channel
//! realization. Pure functions over immutable inputs.

use crate::channel::{effective_channel, ChannelRealization, RisPhases};
use crate::topology::{RisAssociation, Scenario};

/// Constraint-satisfying allocation: scheduling bits, BS association bits,
/// transmit powers, RIS phases.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Scheduling indicator per (v, b, k, c), see [`Scenario::link_index`].
    pub omega: Vec<bool>,
    /// BS association per (v, b, k), see [`Scenario::assoc_index`].
    pub phi: Vec<bool>,
    /// Transmit power per (v, b, k, c).
    pub power: Vec<f64>,
    pub phases: RisPhases,
}

impl Allocation {
    /// All-off allocation with the given phases.
    pub fn idle(scenario: &Scenario, phases: RisPhases) -> Self {
        Self {
            omega: vec![false; scenario.num_links()],
            phi: vec![false; scenario.num_bs_total() * scenario.users_per_vsp],
            power: vec![0.0; scenario.num_links()],
            phases,
        }
    }
}

/// One violated allocation constraint, for diagnostics in tests and fuzzing.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Per (v, b, c): more than `L_c` users scheduled.
    SubchannelOverload { v: usize, b: usize, c: usize, count: usize },
    /// Per (v, b): power budget exceeded.
    PowerBudget { v: usize, b: usize, total: f64 },
    /// Power outside `[0, omega * P_max]`.
    PowerLink { v: usize, b: usize, k: usize, c: usize, power: f64 },
    /// User associated with more than one BS.
    MultiBs { v: usize, k: usize, count: usize },
    /// User scheduled on more than one (b, c).
    MultiChannel { v: usize, k: usize, count: usize },
    /// Scheduled without matching association.
    ScheduleWithoutAssociation { v: usize, b: usize, k: usize, c: usize },
    /// RIS phase outside [0, 2pi).
    PhaseRange { j: usize, m: usize, theta: f64 },
}

/// Checks every constraint of the allocation polytope plus the phase box.
/// Returns the empty vector iff the allocation is feasible.
pub fn constraint_violations(scenario: &Scenario, alloc: &Allocation) -> Vec<Violation> {
    let mut out = Vec::new();
    let budget_tol = 1e-9 * scenario.p_max.max(1.0);

    for v in 0..scenario.num_vsps {
        for b in 0..scenario.bs_per_vsp {
            for c in 0..scenario.num_subchannels {
                let count = (0..scenario.users_per_vsp)
                    .filter(|&k| alloc.omega[scenario.link_index(v, b, k, c)])
                    .count();
                if count > scenario.max_users_per_subchannel {
                    out.push(Violation::SubchannelOverload { v, b, c, count });
                }
            }
            let total: f64 = (0..scenario.users_per_vsp)
                .flat_map(|k| {
                    (0..scenario.num_subchannels)
                        .map(move |c| alloc.power[scenario.link_index(v, b, k, c)])
                })
                .sum();
            if total > scenario.p_max + budget_tol {
                out.push(Violation::PowerBudget { v, b, total });
            }
        }
        for k in 0..scenario.users_per_vsp {
            let bs_count = (0..scenario.bs_per_vsp)
                .filter(|&b| alloc.phi[scenario.assoc_index(v, b, k)])
                .count();
            if bs_count > 1 {
                out.push(Violation::MultiBs { v, k, count: bs_count });
            }
            let sched_count = (0..scenario.bs_per_vsp)
                .flat_map(|b| {
                    (0..scenario.num_subchannels)
                        .filter(move |&c| alloc.omega[scenario.link_index(v, b, k, c)])
                })
                .count();
            if sched_count > 1 {
                out.push(Violation::MultiChannel { v, k, count: sched_count });
            }
            for b in 0..scenario.bs_per_vsp {
                for c in 0..scenario.num_subchannels {
                    let idx = scenario.link_index(v, b, k, c);
                    let limit = if alloc.omega[idx] { scenario.p_max } else { 0.0 };
                    if alloc.power[idx] < 0.0 || alloc.power[idx] > limit + budget_tol {
                        out.push(Violation::PowerLink { v, b, k, c, power: alloc.power[idx] });
                    }
                    if alloc.omega[idx] && !alloc.phi[scenario.assoc_index(v, b, k)] {
                        out.push(Violation::ScheduleWithoutAssociation { v, b, k, c });
                    }
                }
            }
        }
    }
    for (j, row) in alloc.phases.theta.iter().enumerate() {
        for (m, &theta) in row.iter().enumerate() {
            if !(0.0..2.0 * std::f64::consts::PI).contains(&theta) {
                out.push(Violation::PhaseRange { j, m, theta });
            }
        }
    }
    out
}

/// Precomputed squared effective channel magnitudes `|h_tilde|^2` for every
/// (global BS, global user, subchannel) triple.
#[derive(Debug, Clone)]
pub struct EffectiveGains {
    pub num_users: usize,
    pub subchannels: usize,
    /// `(gb, gk, c)` squared magnitudes.
    pub g2: Vec<f64>,
}

impl EffectiveGains {
    pub fn compute(
        scenario: &Scenario,
        real: &ChannelRealization,
        phases: &RisPhases,
        assoc: &RisAssociation,
    ) -> Self {
        let (nb, nk, nc) =
            (scenario.num_bs_total(), scenario.num_users_total(), scenario.num_subchannels);
        let mut g2 = vec![0.0; nb * nk * nc];
        for gb in 0..nb {
            for gk in 0..nk {
                for c in 0..nc {
                    g2[(gb * nk + gk) * nc + c] =
                        effective_channel(real, phases, assoc, gb, gk, c).norm_sqr();
                }
            }
        }
        Self { num_users: nk, subchannels: nc, g2 }
    }

    #[inline]
    pub fn get(&self, gb: usize, gk: usize, c: usize) -> f64 {
        self.g2[(gb * self.num_users + gk) * self.subchannels + c]
    }
}

/// Received interference `I1 + I2 + I3` at user (k, v) listening to BS b on
/// subchannel c: intra-cell, intra-VSP, and (on reusable subchannels only)
/// inter-VSP terms, all through effective channels.
pub fn interference(
    scenario: &Scenario,
    real: &ChannelRealization,
    phases: &RisPhases,
    assoc: &RisAssociation,
    alloc: &Allocation,
    k: usize,
    v: usize,
    b: usize,
    c: usize,
) -> f64 {
    let gains = EffectiveGains::compute(scenario, real, phases, assoc);
    interference_with(scenario, &gains, alloc, k, v, b, c)
}

/// [`interference`] against precomputed effective gains.
pub fn interference_with(
    scenario: &Scenario,
    gains: &EffectiveGains,
    alloc: &Allocation,
    k: usize,
    v: usize,
    b: usize,
    c: usize,
) -> f64 {
    let gk = scenario.global_user(v, k);
    let mut total = 0.0;

    // I1: same BS, other users on the same subchannel.
    let gb = scenario.global_bs(v, b);
    for u in 0..scenario.users_per_vsp {
        if u == k {
            continue;
        }
        let idx = scenario.link_index(v, b, u, c);
        if alloc.omega[idx] {
            total += alloc.power[idx] * gains.get(gb, gk, c);
        }
    }
    // I2: other BSs of the same VSP.
    for b2 in 0..scenario.bs_per_vsp {
        if b2 == b {
            continue;
        }
        let gb2 = scenario.global_bs(v, b2);
        for u in 0..scenario.users_per_vsp {
            let idx = scenario.link_index(v, b2, u, c);
            if alloc.omega[idx] {
                total += alloc.power[idx] * gains.get(gb2, gk, c);
            }
        }
    }
    // I3: other VSPs, gated by the reuse flag.
    if scenario.is_reusable(c) {
        for v2 in 0..scenario.num_vsps {
            if v2 == v {
                continue;
            }
            for b2 in 0..scenario.bs_per_vsp {
                let gb2 = scenario.global_bs(v2, b2);
                for u in 0..scenario.users_per_vsp {
                    let idx = scenario.link_index(v2, b2, u, c);
                    if alloc.omega[idx] {
                        total += alloc.power[idx] * gains.get(gb2, gk, c);
                    }
                }
            }
        }
    }
    total
}

/// `log2(1 + x)` with a stable path near zero.
pub fn log2_1p(x: f64) -> f64 {
    if x < 1e-4 {
        x.ln_1p() / std::f64::consts::LN_2
    } else {
        (1.0 + x).log2()
    }
}

/// SINR and achievable rate of one (k, v, b, c) link.
pub fn sinr_and_rate(
    scenario: &Scenario,
    real: &ChannelRealization,
    phases: &RisPhases,
    assoc: &RisAssociation,
    alloc: &Allocation,
    k: usize,
    v: usize,
    b: usize,
    c: usize,
) -> (f64, f64) {
    let gains = EffectiveGains::compute(scenario, real, phases, assoc);
    sinr_and_rate_with(scenario, &gains, alloc, k, v, b, c)
}

/// [`sinr_and_rate`] against precomputed effective gains.
pub fn sinr_and_rate_with(
    scenario: &Scenario,
    gains: &EffectiveGains,
    alloc: &Allocation,
    k: usize,
    v: usize,
    b: usize,
    c: usize,
) -> (f64, f64) {
    let idx = scenario.link_index(v, b, k, c);
    if !alloc.omega[idx] {
        return (0.0, 0.0);
    }
    let gb = scenario.global_bs(v, b);
    let gk = scenario.global_user(v, k);
    let signal = alloc.power[idx] * gains.get(gb, gk, c);
    let denom = interference_with(scenario, gains, alloc, k, v, b, c) + scenario.noise_power;
    let sinr = signal / denom;
    (sinr, scenario.bandwidth * log2_1p(sinr))
}

/// Per-VSP revenue, costs, utility, and the network QoS penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityBreakdown {
    pub revenue: Vec<f64>,
    pub spectrum_cost: Vec<f64>,
    pub ris_cost: Vec<f64>,
    pub power_cost: Vec<f64>,
    pub utility: Vec<f64>,
    /// Distinct reusable subchannels carrying at least one active link.
    pub n_reused: Vec<usize>,
    /// Distinct dedicated subchannels carrying at least one active link.
    pub n_dedicated: Vec<usize>,
    /// Deployment-fixed RIS count per VSP.
    pub n_ris: Vec<usize>,
    /// Total achieved rate per global user.
    pub user_rates: Vec<f64>,
    pub sum_utility: f64,
    pub qos_penalty: f64,
}

impl UtilityBreakdown {
    /// Reward used by the learners and the benchmark.
    pub fn reward(&self) -> f64 {
        self.sum_utility - self.qos_penalty
    }

    pub fn sum_rate(&self) -> f64 {
        self.user_rates.iter().sum()
    }
}

/// Evaluates the full economic breakdown of an allocation.
pub fn utility_breakdown(
    scenario: &Scenario,
    real: &ChannelRealization,
    phases: &RisPhases,
    assoc: &RisAssociation,
    alloc: &Allocation,
) -> UtilityBreakdown {
    let gains = EffectiveGains::compute(scenario, real, phases, assoc);
    utility_breakdown_with(scenario, &gains, alloc)
}

/// [`utility_breakdown`] against precomputed effective gains.
pub fn utility_breakdown_with(
    scenario: &Scenario,
    gains: &EffectiveGains,
    alloc: &Allocation,
) -> UtilityBreakdown {
    let nv = scenario.num_vsps;
    let mut user_rates = vec![0.0; scenario.num_users_total()];
    let mut revenue = vec![0.0; nv];
    let mut power_cost = vec![0.0; nv];
    let mut n_reused = vec![0usize; nv];
    let mut n_dedicated = vec![0usize; nv];

    for v in 0..nv {
        let mut total_power = 0.0;
        for c in 0..scenario.num_subchannels {
            let mut active = false;
            for b in 0..scenario.bs_per_vsp {
                for k in 0..scenario.users_per_vsp {
                    let idx = scenario.link_index(v, b, k, c);
                    if alloc.omega[idx] {
                        active = true;
                        let (_, rate) = sinr_and_rate_with(scenario, &gains, alloc, k, v, b, c);
                        user_rates[scenario.global_user(v, k)] += rate;
                    }
                    total_power += alloc.power[idx];
                }
            }
            if active {
                if scenario.is_reusable(c) {
                    n_reused[v] += 1;
                } else {
                    n_dedicated[v] += 1;
                }
            }
        }
        power_cost[v] = scenario.prices.power * scenario.bandwidth * total_power;
        revenue[v] = scenario.profit_per_rate[v]
            * (0..scenario.users_per_vsp)
                .map(|k| user_rates[scenario.global_user(v, k)])
                .sum::<f64>();
    }

    let n_ris: Vec<usize> =
        (0..nv).map(|v| scenario.ris_owner_vsp.iter().filter(|&&o| o == v).count()).collect();
    let spectrum_cost: Vec<f64> = (0..nv)
        .map(|v| {
            n_reused[v] as f64 * scenario.prices.reused
                + n_dedicated[v] as f64 * scenario.prices.dedicated
        })
        .collect();
    let ris_cost: Vec<f64> = (0..nv).map(|v| n_ris[v] as f64 * scenario.prices.ris).collect();
    let utility: Vec<f64> = (0..nv)
        .map(|v| {
            scenario.phi1 * revenue[v]
                - scenario.phi2 * (spectrum_cost[v] + ris_cost[v] + power_cost[v])
        })
        .collect();
    let sum_utility = utility.iter().sum();
    let qos_penalty = scenario.qos_penalty_weight
        * user_rates
            .iter()
            .zip(scenario.rate_threshold.iter())
            .map(|(&r, &th)| (th - r).max(0.0))
            .sum::<f64>();

    UtilityBreakdown {
        revenue,
        spectrum_cost,
        ris_cost,
        power_cost,
        utility,
        n_reused,
        n_dedicated,
        n_ris,
        user_rates,
        sum_utility,
        qos_penalty,
    }
}
