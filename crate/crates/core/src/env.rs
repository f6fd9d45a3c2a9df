//! The MDP environment: state encoding, raw-action decoding, deterministic
//! feasibility projection, reward computation, and episode stepping.
//!
//! The learner acts in a smooth box `[-1, 1]^{|A|}`; the projection maps that
//! box onto the allocation polytope, so every executed action satisfies the
//! scheduling, association, power, and phase constraints by construction. QoS
//! is the one constraint left to the reward penalty.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::channel::{draw_channels, ChannelRealization, RisPhases};
use crate::phy::{utility_breakdown_with, Allocation, EffectiveGains, UtilityBreakdown};
use crate::rng::{mix, Stream};
use crate::topology::{RisAssociation, Scenario};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("step called before reset (or after episode end)")]
    NotReset,
}

/// Layout of the flat action vector: scheduling logits, power fractions,
/// phase controls.
#[derive(Debug, Clone, Copy)]
pub struct ActionLayout {
    pub num_links: usize,
    pub num_phase: usize,
}

impl ActionLayout {
    pub fn of(scenario: &Scenario) -> Self {
        Self { num_links: scenario.num_links(), num_phase: scenario.total_ris_elements() }
    }

    pub fn dim(&self) -> usize {
        2 * self.num_links + self.num_phase
    }

    pub fn sched(&self) -> std::ops::Range<usize> {
        0..self.num_links
    }

    pub fn power(&self) -> std::ops::Range<usize> {
        self.num_links..2 * self.num_links
    }

    pub fn phase(&self) -> std::ops::Range<usize> {
        2 * self.num_links..self.dim()
    }
}

/// Total action dimension `2 V B_v K_v C + J M_j`.
pub fn action_dim(scenario: &Scenario) -> usize {
    ActionLayout::of(scenario).dim()
}

/// State dimension: interleaved (re, im) channel entries, per-user rates,
/// and the previously executed action.
pub fn state_dim(scenario: &Scenario) -> usize {
    use crate::channel::ChannelDims;
    2 * ChannelDims::of(scenario).num_entries() + scenario.num_users_total() + action_dim(scenario)
}

/// Offsets of the three state blocks (channels, rates, previous action).
pub fn state_blocks(scenario: &Scenario) -> (std::ops::Range<usize>, std::ops::Range<usize>, std::ops::Range<usize>) {
    use crate::channel::ChannelDims;
    let ch = 2 * ChannelDims::of(scenario).num_entries();
    let rates_end = ch + scenario.num_users_total();
    (0..ch, ch..rates_end, rates_end..rates_end + action_dim(scenario))
}

/// Feasible allocation produced by the projection together with its
/// canonical encoding (scheduling bits, power fractions in [0, 1], phase
/// controls in [-1, 1]): decoding the encoding reproduces the allocation
/// bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedAction {
    pub alloc: Allocation,
    pub encoded: Vec<f64>,
}

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

fn phase_from_control(x: f64) -> f64 {
    // pi (x + 1) lands in [0, 2pi]; fold the single closed endpoint.
    let theta = std::f64::consts::PI * (x + 1.0);
    if theta >= TWO_PI {
        theta - TWO_PI
    } else {
        theta
    }
}

/// Deterministic feasibility projection from the raw action box onto the
/// allocation polytope.
///
/// Pipeline: threshold scheduling logits at 0.5 (after mapping to [0, 1]),
/// keep each user's highest-valued candidate, cap each (b, c) at `L_c` users,
/// derive associations from surviving bits, zero powers on unscheduled links
/// and rescale any BS exceeding its budget, and map phase controls onto
/// [0, 2pi). Ties break toward the lowest index.
pub fn project_action(scenario: &Scenario, raw: &[f64]) -> ProjectedAction {
    let layout = ActionLayout::of(scenario);
    assert_eq!(raw.len(), layout.dim(), "raw action dimension mismatch");
    let nl = layout.num_links;
    let nc = scenario.num_subchannels;
    let per_user = scenario.bs_per_vsp * nc;

    // Scheduling: map to [0, 1], threshold, then enforce the per-user and
    // per-subchannel cardinality constraints using pre-threshold values for
    // ranking.
    let values: Vec<f64> =
        raw[layout.sched()].iter().map(|x| (x.clamp(-1.0, 1.0) + 1.0) / 2.0).collect();
    let mut omega = vec![false; nl];
    for v in 0..scenario.num_vsps {
        for k in 0..scenario.users_per_vsp {
            // Highest-valued (b, c) candidate of this user, lowest index wins ties.
            let mut best: Option<(f64, usize)> = None;
            for b in 0..scenario.bs_per_vsp {
                for c in 0..nc {
                    let idx = scenario.link_index(v, b, k, c);
                    if best.map_or(true, |(bv, _)| values[idx] > bv) {
                        best = Some((values[idx], idx));
                    }
                }
            }
            let (bv, idx) = best.expect("user has at least one candidate");
            if bv >= 0.5 {
                omega[idx] = true;
            }
        }
    }
    let _ = per_user;
    // Cap users per (v, b, c) at L_c, keeping the highest pre-threshold values.
    for v in 0..scenario.num_vsps {
        for b in 0..scenario.bs_per_vsp {
            for c in 0..nc {
                let mut winners: Vec<(f64, usize, usize)> = (0..scenario.users_per_vsp)
                    .filter_map(|k| {
                        let idx = scenario.link_index(v, b, k, c);
                        omega[idx].then_some((values[idx], k, idx))
                    })
                    .collect();
                if winners.len() <= scenario.max_users_per_subchannel {
                    continue;
                }
                // Highest value first; ties keep the lower user index.
                winners.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
                for &(_, _, idx) in winners.iter().skip(scenario.max_users_per_subchannel) {
                    omega[idx] = false;
                }
            }
        }
    }

    // Associations derived from surviving scheduling bits.
    let mut phi = vec![false; scenario.num_bs_total() * scenario.users_per_vsp];
    for v in 0..scenario.num_vsps {
        for b in 0..scenario.bs_per_vsp {
            for k in 0..scenario.users_per_vsp {
                if (0..nc).any(|c| omega[scenario.link_index(v, b, k, c)]) {
                    phi[scenario.assoc_index(v, b, k)] = true;
                }
            }
        }
    }

    // Powers: fraction of P_max per link, zeroed where unscheduled, then a
    // proportional rescale wherever a BS exceeds its budget.
    let mut fractions: Vec<f64> = raw[layout.power()]
        .iter()
        .zip(omega.iter())
        .map(|(x, &on)| if on { (x.clamp(-1.0, 1.0) + 1.0) / 2.0 } else { 0.0 })
        .collect();
    for v in 0..scenario.num_vsps {
        for b in 0..scenario.bs_per_vsp {
            let idxs: Vec<usize> = (0..scenario.users_per_vsp)
                .flat_map(|k| (0..nc).map(move |c| scenario.link_index(v, b, k, c)))
                .collect();
            let total: f64 = idxs.iter().map(|&i| fractions[i]).sum();
            if total > 1.0 {
                for &i in &idxs {
                    fractions[i] /= total;
                }
            }
        }
    }
    let power: Vec<f64> = fractions.iter().map(|f| f * scenario.p_max).collect();

    // Phases.
    let phase_controls: Vec<f64> = raw[layout.phase()].iter().map(|x| x.clamp(-1.0, 1.0)).collect();
    let mut theta = vec![vec![0.0; scenario.elements_per_ris]; scenario.num_ris];
    for j in 0..scenario.num_ris {
        for m in 0..scenario.elements_per_ris {
            theta[j][m] = phase_from_control(phase_controls[j * scenario.elements_per_ris + m]);
        }
    }

    let mut encoded = Vec::with_capacity(layout.dim());
    encoded.extend(omega.iter().map(|&b| if b { 1.0 } else { 0.0 }));
    encoded.extend(fractions.iter().copied());
    encoded.extend(phase_controls.iter().copied());

    ProjectedAction {
        alloc: Allocation { omega, phi, power, phases: RisPhases { theta } },
        encoded,
    }
}

/// Re-expresses an executed allocation as a raw action in `[-1, 1]^{|A|}`.
pub fn encode_raw(scenario: &Scenario, alloc: &Allocation) -> Vec<f64> {
    let layout = ActionLayout::of(scenario);
    let mut raw = Vec::with_capacity(layout.dim());
    raw.extend(alloc.omega.iter().map(|&b| if b { 1.0 } else { -1.0 }));
    raw.extend(alloc.power.iter().map(|&p| 2.0 * (p / scenario.p_max) - 1.0));
    for row in &alloc.phases.theta {
        raw.extend(row.iter().map(|&t| t / std::f64::consts::PI - 1.0));
    }
    raw
}

/// Decodes the previous-action block of a state vector back into the
/// executed allocation.
pub fn decode_executed(scenario: &Scenario, encoded: &[f64]) -> Allocation {
    let layout = ActionLayout::of(scenario);
    assert_eq!(encoded.len(), layout.dim());
    let omega: Vec<bool> = encoded[layout.sched()].iter().map(|&x| x >= 0.5).collect();
    let mut phi = vec![false; scenario.num_bs_total() * scenario.users_per_vsp];
    for v in 0..scenario.num_vsps {
        for b in 0..scenario.bs_per_vsp {
            for k in 0..scenario.users_per_vsp {
                if (0..scenario.num_subchannels)
                    .any(|c| omega[scenario.link_index(v, b, k, c)])
                {
                    phi[scenario.assoc_index(v, b, k)] = true;
                }
            }
        }
    }
    let power: Vec<f64> = encoded[layout.power()].iter().map(|&f| f * scenario.p_max).collect();
    let mut theta = vec![vec![0.0; scenario.elements_per_ris]; scenario.num_ris];
    for j in 0..scenario.num_ris {
        for m in 0..scenario.elements_per_ris {
            theta[j][m] =
                phase_from_control(encoded[layout.phase()][j * scenario.elements_per_ris + m]);
        }
    }
    Allocation { omega, phi, power, phases: RisPhases { theta } }
}

/// Result of one environment step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: UtilityBreakdown,
}

/// Sequential single-writer environment. Channels are redrawn at every
/// reset and frozen within an episode.
pub struct Env {
    scenario: Scenario,
    assoc: RisAssociation,
    episode_length: usize,
    rng: ChaCha8Rng,
    realization: Option<ChannelRealization>,
    step_in_episode: usize,
    rates: Vec<f64>,
    prev_encoded: Vec<f64>,
    /// Per-link-class standardization scales for the channel block.
    scale_direct: f64,
    scale_bs_ris: f64,
    scale_ris_user: f64,
}

impl Env {
    pub fn new(scenario: Scenario, assoc: RisAssociation, episode_length: usize, seed: u64) -> Self {
        let (scale_direct, scale_bs_ris, scale_ris_user) = channel_scales(&scenario);
        let dim = action_dim(&scenario);
        Self {
            scenario,
            assoc,
            episode_length,
            rng: ChaCha8Rng::seed_from_u64(mix(seed, Stream::EnvEpisode as u64, 0)),
            realization: None,
            step_in_episode: 0,
            rates: Vec::new(),
            prev_encoded: vec![0.0; dim],
            scale_direct,
            scale_bs_ris,
            scale_ris_user,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn assoc(&self) -> &RisAssociation {
        &self.assoc
    }

    pub fn state_dim(&self) -> usize {
        state_dim(&self.scenario)
    }

    /// Channel realization of the current episode, if reset has run.
    pub fn realization(&self) -> Option<&ChannelRealization> {
        self.realization.as_ref()
    }

    pub fn action_dim(&self) -> usize {
        action_dim(&self.scenario)
    }

    /// Draws fresh small-scale fading, zeroes rates and the previous action,
    /// and returns the encoded initial state.
    pub fn reset(&mut self) -> Vec<f64> {
        let seed = self.rng.next_u64();
        let real = draw_channels(&self.scenario, seed).expect("valid scenario geometry");
        self.realization = Some(real);
        self.step_in_episode = 0;
        self.rates = vec![0.0; self.scenario.num_users_total()];
        self.prev_encoded = vec![0.0; action_dim(&self.scenario)];
        self.encode_state()
    }

    /// Projects the raw action, executes it, and advances the episode.
    pub fn step(&mut self, raw: &[f64]) -> Result<StepResult, EnvError> {
        if self.realization.is_none() || self.step_in_episode >= self.episode_length {
            return Err(EnvError::NotReset);
        }
        let projected = project_action(&self.scenario, raw);
        let real = self.realization.as_ref().unwrap();
        let gains = EffectiveGains::compute(&self.scenario, real, &projected.alloc.phases, &self.assoc);
        let info = utility_breakdown_with(&self.scenario, &gains, &projected.alloc);
        let reward = info.reward();
        self.rates = info.user_rates.clone();
        self.prev_encoded = projected.encoded;
        self.step_in_episode += 1;
        let done = self.step_in_episode >= self.episode_length;
        Ok(StepResult { next_state: self.encode_state(), reward, done, info })
    }

    fn encode_state(&self) -> Vec<f64> {
        let real = self.realization.as_ref().expect("reset first");
        let mut state = Vec::with_capacity(self.state_dim());
        for z in &real.direct {
            state.push(z.re / self.scale_direct);
            state.push(z.im / self.scale_direct);
        }
        for z in &real.bs_ris {
            state.push(z.re / self.scale_bs_ris);
            state.push(z.im / self.scale_bs_ris);
        }
        for z in &real.ris_user {
            state.push(z.re / self.scale_ris_user);
            state.push(z.im / self.scale_ris_user);
        }
        state.extend(self.rates.iter().copied());
        state.extend(self.prev_encoded.iter().copied());
        state
    }
}

/// Average path-loss scale per link class, used to standardize the channel
/// block of the state.
fn channel_scales(scenario: &Scenario) -> (f64, f64, f64) {
    let mut direct = 0.0;
    let mut n_direct = 0usize;
    for &bs in &scenario.bs_pos {
        for &user in &scenario.user_pos {
            direct += scenario.path_gain(Scenario::dist(bs, user));
            n_direct += 1;
        }
    }
    let mut bs_ris = 0.0;
    let mut ris_user = 0.0;
    let mut n_bs_ris = 0usize;
    let mut n_ris_user = 0usize;
    for &ris in &scenario.ris_pos {
        for &bs in &scenario.bs_pos {
            bs_ris += scenario.path_gain(Scenario::dist(bs, ris));
            n_bs_ris += 1;
        }
        for &user in &scenario.user_pos {
            ris_user += scenario.path_gain(Scenario::dist(ris, user));
            n_ris_user += 1;
        }
    }
    let scale = |sum: f64, n: usize| if n == 0 { 1.0 } else { (sum / n as f64).sqrt().max(1e-30) };
    (scale(direct, n_direct), scale(bs_ris, n_bs_ris), scale(ris_user, n_ris_user))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::constraint_violations;
    use crate::rng::uniform_pm1;
    use crate::topology::{build_scenario, fix_ris_association, ScenarioConfig};

    fn scenario(seed: u64) -> (Scenario, RisAssociation) {
        let mut config = ScenarioConfig { seed, ..Default::default() };
        config.ris.elements = 4;
        let s = build_scenario(&config).unwrap();
        let assoc = fix_ris_association(&s);
        (s, assoc)
    }

    fn random_raw(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..dim).map(|_| uniform_pm1(rng)).collect()
    }

    #[test]
    fn threshold_mapping() {
        // Raw 0.4 -> 0.7 passes; raw -0.4 -> 0.3 fails.
        let mut config = ScenarioConfig {
            vsps: 1,
            users_per_vsp: 1,
            subchannels: 1,
            reusable: vec![],
            dedicated: vec![0],
            ..Default::default()
        };
        config.ris.count = 0;
        let s = build_scenario(&config).unwrap();
        let mut raw = vec![0.4, 0.0];
        let p = project_action(&s, &raw);
        assert!(p.alloc.omega[0]);
        raw[0] = -0.4;
        let p = project_action(&s, &raw);
        assert!(!p.alloc.omega[0]);
    }

    #[test]
    fn projection_output_always_feasible() {
        let (s, _) = scenario(1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dim = action_dim(&s);
        for _ in 0..2000 {
            let raw = random_raw(dim, &mut rng);
            let p = project_action(&s, &raw);
            let violations = constraint_violations(&s, &p.alloc);
            assert!(violations.is_empty(), "{violations:?}");
        }
    }

    #[test]
    fn budget_rescale_meets_budget_with_equality() {
        let mut config = ScenarioConfig {
            vsps: 1,
            users_per_vsp: 2,
            subchannels: 2,
            reusable: vec![],
            dedicated: vec![0, 1],
            l_c: 1,
            ..Default::default()
        };
        config.ris.count = 0;
        let s = build_scenario(&config).unwrap();
        // Both users scheduled, fractions 0.9 + 0.7 = 1.6 > 1.
        let raw = vec![
            1.0, -1.0, // user 0 on c=0
            -1.0, 1.0, // user 1 on c=1
            0.8, -1.0, // power fractions 0.9, 0
            -1.0, 0.4, // power fractions 0, 0.7
        ];
        let p = project_action(&s, &raw);
        let total: f64 = p.alloc.power.iter().sum();
        assert!((total - s.p_max).abs() < 1e-12, "total {total}");
        // Proportions preserved: 0.9/1.6 and 0.7/1.6.
        assert!((p.alloc.power[s.link_index(0, 0, 0, 0)] - 0.9 / 1.6).abs() < 1e-12);
        assert!((p.alloc.power[s.link_index(0, 0, 1, 1)] - 0.7 / 1.6).abs() < 1e-12);
    }

    #[test]
    fn projection_idempotent_on_executed_allocation() {
        let (s, _) = scenario(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dim = action_dim(&s);
        for _ in 0..500 {
            let raw = random_raw(dim, &mut rng);
            let p1 = project_action(&s, &raw);
            let p2 = project_action(&s, &encode_raw(&s, &p1.alloc));
            assert_eq!(p1.alloc.omega, p2.alloc.omega);
            assert_eq!(p1.alloc.phi, p2.alloc.phi);
            for (a, b) in p1.alloc.power.iter().zip(p2.alloc.power.iter()) {
                assert!((a - b).abs() < 1e-9, "power {a} vs {b}");
            }
            for (ra, rb) in p1.alloc.phases.theta.iter().zip(p2.alloc.phases.theta.iter()) {
                for (a, b) in ra.iter().zip(rb.iter()) {
                    assert!((a - b).abs() < 1e-9, "phase {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn feasible_raw_action_is_fixed_point() {
        let (s, _) = scenario(5);
        // Bits at the extremes and power fractions large enough to stay exact
        // under the [-1, 1] round trip.
        let layout = ActionLayout::of(&s);
        let mut raw = vec![-1.0; layout.dim()];
        raw[s.link_index(0, 0, 0, 0)] = 1.0;
        raw[s.link_index(0, 0, 1, 1)] = 1.0;
        raw[s.link_index(1, 0, 0, 2)] = 1.0;
        raw[layout.power().start + s.link_index(0, 0, 0, 0)] = 0.0; // fraction 0.5
        raw[layout.power().start + s.link_index(0, 0, 1, 1)] = -0.2; // 0.4
        raw[layout.power().start + s.link_index(1, 0, 0, 2)] = 0.6; // 0.8
        for i in layout.phase() {
            raw[i] = 0.25;
        }
        let p1 = project_action(&s, &raw);
        assert!(constraint_violations(&s, &p1.alloc).is_empty());
        let p2 = project_action(&s, &encode_raw(&s, &p1.alloc));
        assert_eq!(p1.alloc, p2.alloc);
    }

    #[test]
    fn reset_is_deterministic_and_zeroed() {
        let (s, assoc) = scenario(6);
        let mut env1 = Env::new(s.clone(), assoc.clone(), 100, 42);
        let mut env2 = Env::new(s.clone(), assoc.clone(), 100, 42);
        let s1 = env1.reset();
        let s2 = env2.reset();
        assert_eq!(s1, s2);
        let (_, rates, action) = state_blocks(&s);
        assert!(s1[rates].iter().all(|&x| x == 0.0));
        assert!(s1[action].iter().all(|&x| x == 0.0));
        // Different seed -> different channels.
        let mut env3 = Env::new(s.clone(), assoc, 100, 43);
        assert_ne!(env3.reset(), s1);
    }

    #[test]
    fn state_dimension_closed_form() {
        // V=2, B_v=1, K_v=4, C=4, J=1, M=8.
        let mut config = ScenarioConfig { users_per_vsp: 4, ..Default::default() };
        config.ris.elements = 8;
        let s = build_scenario(&config).unwrap();
        let b_tot = 2;
        let k_tot = 8;
        let (c, j, m) = (4, 1, 8);
        let h_entries = b_tot * k_tot * c + b_tot * j * c * m + j * k_tot * c * m;
        let a_dim = 2 * 2 * 1 * 4 * 4 + j * m;
        assert_eq!(action_dim(&s), a_dim);
        assert_eq!(state_dim(&s), 2 * h_entries + k_tot + a_dim);
        let (_, assoc) = (0, fix_ris_association(&s));
        let mut env = Env::new(s.clone(), assoc, 100, 0);
        assert_eq!(env.reset().len(), state_dim(&s));
    }

    #[test]
    fn step_before_reset_errors() {
        let (s, assoc) = scenario(7);
        let dim = action_dim(&s);
        let mut env = Env::new(s, assoc, 100, 0);
        assert!(matches!(env.step(&vec![0.0; dim]), Err(EnvError::NotReset)));
    }

    #[test]
    fn all_negative_raw_action_gives_idle_reward() {
        let (s, assoc) = scenario(8);
        let dim = action_dim(&s);
        let mut env = Env::new(s.clone(), assoc, 100, 1);
        env.reset();
        let result = env.step(&vec![-1.0; dim]).unwrap();
        let fixed_ris_cost: f64 = s
            .ris_owner_vsp
            .iter()
            .map(|_| s.phi2 * s.prices.ris)
            .sum();
        let want = -fixed_ris_cost
            - s.qos_penalty_weight * s.rate_threshold.iter().sum::<f64>();
        assert!((result.reward - want).abs() < 1e-12, "{} vs {want}", result.reward);
    }

    #[test]
    fn reward_equals_sum_utility_when_penalty_disabled() {
        let (mut s, assoc) = scenario(9);
        s.qos_penalty_weight = 0.0;
        let dim = action_dim(&s);
        let mut env = Env::new(s, assoc, 100, 2);
        env.reset();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let raw = random_raw(dim, &mut rng);
            let r = env.step(&raw).unwrap();
            assert_eq!(r.reward, r.info.sum_utility);
        }
    }

    #[test]
    fn info_allocation_always_feasible_under_fuzz() {
        let (s, assoc) = scenario(10);
        let dim = action_dim(&s);
        let mut env = Env::new(s.clone(), assoc, 10_000, 4);
        env.reset();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let raw = random_raw(dim, &mut rng);
            let r = env.step(&raw).unwrap();
            // The executed allocation is recoverable from the state tail.
            let (_, _, action_block) = state_blocks(&s);
            let alloc = decode_executed(&s, &r.next_state[action_block]);
            assert!(constraint_violations(&s, &alloc).is_empty());
        }
    }

    #[test]
    fn state_action_roundtrip_exact() {
        let (s, assoc) = scenario(11);
        let dim = action_dim(&s);
        let mut env = Env::new(s.clone(), assoc, 1000, 6);
        env.reset();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let raw = random_raw(dim, &mut rng);
            let executed = project_action(&s, &raw);
            let r = env.step(&raw).unwrap();
            let (_, _, action_block) = state_blocks(&s);
            let decoded = decode_executed(&s, &r.next_state[action_block]);
            assert_eq!(decoded, executed.alloc);
        }
    }

    #[test]
    fn done_after_episode_length() {
        let (s, assoc) = scenario(12);
        let dim = action_dim(&s);
        let mut env = Env::new(s, assoc, 3, 8);
        env.reset();
        let raw = vec![0.1; dim];
        assert!(!env.step(&raw).unwrap().done);
        assert!(!env.step(&raw).unwrap().done);
        assert!(env.step(&raw).unwrap().done);
        assert!(matches!(env.step(&raw), Err(EnvError::NotReset)));
        env.reset();
        assert!(!env.step(&raw).unwrap().done);
    }

    #[test]
    fn reward_invariant_to_user_relabeling() {
        // Permute VSP-0 user indices together with their channels and the
        // corresponding raw-action slices; rewards must match.
        let mut config = ScenarioConfig { seed: 13, ..Default::default() };
        config.ris.count = 0;
        let s = build_scenario(&config).unwrap();
        let assoc = fix_ris_association(&s);
        let real = draw_channels(&s, 77).unwrap();

        // Swapped scenario: user 0 and 1 of VSP 0 exchange positions.
        let mut s_perm = s.clone();
        s_perm.user_pos.swap(0, 1);
        let perm = |gk: usize| match gk {
            0 => 1,
            1 => 0,
            other => other,
        };
        // Permute the realization accordingly.
        let mut real_perm = real.clone();
        for gb in 0..s.num_bs_total() {
            for gk in 0..s.num_users_total() {
                for c in 0..s.num_subchannels {
                    real_perm.direct[real.direct_idx(gb, perm(gk), c)] =
                        real.direct[real.direct_idx(gb, gk, c)];
                }
            }
        }

        let dim = action_dim(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..50 {
            let raw = random_raw(dim, &mut rng);
            // Permuted raw action: swap the (v=0, b=0, k=0, c) and (k=1, c)
            // slices in both the scheduling and power blocks.
            let layout = ActionLayout::of(&s);
            let mut raw_perm = raw.clone();
            for c in 0..s.num_subchannels {
                let i0 = s.link_index(0, 0, 0, c);
                let i1 = s.link_index(0, 0, 1, c);
                raw_perm.swap(i0, i1);
                raw_perm.swap(layout.power().start + i0, layout.power().start + i1);
            }
            let p = project_action(&s, &raw);
            let p_perm = project_action(&s_perm, &raw_perm);
            let bd = crate::phy::utility_breakdown(&s, &real, &p.alloc.phases, &assoc, &p.alloc);
            let bd_perm = crate::phy::utility_breakdown(
                &s_perm,
                &real_perm,
                &p_perm.alloc.phases,
                &assoc,
                &p_perm.alloc,
            );
            assert!(
                (bd.reward() - bd_perm.reward()).abs() < 1e-9,
                "{} vs {}",
                bd.reward(),
                bd_perm.reward()
            );
        }
    }
}
