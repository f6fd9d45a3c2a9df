//! Static network description: entity sets, geometry, price book, and the
//! deployment-fixed RIS association.
//!
//! A [`Scenario`] is built once from a [`ScenarioConfig`] and is immutable
//! afterwards; everything downstream (channels, environment, benchmark)
//! borrows it read-only.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{mix, uniform01, Stream};

/// Per-item prices charged by the operator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Prices {
    /// Price of one reusable subchannel.
    pub reused: f64,
    /// Price of one dedicated subchannel.
    pub dedicated: f64,
    /// Leasing price of one RIS.
    pub ris: f64,
    /// Unit price of transmitted power.
    pub power: f64,
}

impl Default for Prices {
    fn default() -> Self {
        Self { reused: 0.2, dedicated: 0.5, ris: 0.3, power: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UnitsMode {
    /// Transmit power budget and noise power are both 1; the reference gain
    /// is calibrated from `ref_snr_db` (cell-edge median direct-link SNR at
    /// full power). Subchannel bandwidth is treated as 1 in rate and
    /// power-cost formulas.
    #[default]
    Normalized,
    /// Raw dBm/Hz quantities from the deployment tables.
    Physical,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct UnitsConfig {
    pub mode: UnitsMode,
    /// Normalized mode: target median cell-edge direct SNR in dB at full power.
    pub ref_snr_db: f64,
    /// Physical mode: BS transmit power budget in dBm.
    pub p_max_dbm: f64,
    /// Physical mode: noise power spectral density in dBm/Hz.
    pub noise_dbm_hz: f64,
    /// Physical mode: subchannel bandwidth in Hz.
    pub bandwidth_hz: f64,
    /// Physical mode: reference channel gain at 1 m.
    pub ref_gain: f64,
}

impl Default for UnitsConfig {
    fn default() -> Self {
        Self {
            mode: UnitsMode::Normalized,
            ref_snr_db: 15.0,
            p_max_dbm: 30.0,
            noise_dbm_hz: -174.0,
            bandwidth_hz: 5e6,
            ref_gain: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RisConfig {
    pub count: usize,
    pub elements: usize,
    /// VSP that owns (and pays for) every RIS.
    pub owner: usize,
}

impl Default for RisConfig {
    fn default() -> Self {
        Self { count: 1, elements: 8, owner: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryConfig {
    pub radius_m: f64,
    pub separation_m: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { radius_m: 500.0, separation_m: 800.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct QosConfig {
    pub threshold: f64,
    pub penalty: f64,
}

impl Default for QosConfig {
    fn default() -> Self {
        Self { threshold: 0.5, penalty: 50.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct UtilityConfig {
    pub phi1: f64,
    pub phi2: f64,
    /// Profit per unit rate, identical for every VSP.
    pub beta_v: f64,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        Self { phi1: 1.0, phi2: 1.0, beta_v: 1.0 }
    }
}

/// Explicit entity placement, overriding random sampling.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PositionsConfig {
    pub bs: Option<Vec<[f64; 2]>>,
    pub users: Option<Vec<[f64; 2]>>,
    pub ris: Option<Vec<[f64; 2]>>,
}

/// Scenario configuration as read from a JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub vsps: usize,
    pub bs_per_vsp: usize,
    pub users_per_vsp: usize,
    pub subchannels: usize,
    pub reusable: Vec<usize>,
    pub dedicated: Vec<usize>,
    pub l_c: usize,
    pub ris: RisConfig,
    pub geometry: GeometryConfig,
    pub prices: Prices,
    pub qos: QosConfig,
    pub utility: UtilityConfig,
    pub units: UnitsConfig,
    pub pathloss_exponent: f64,
    pub positions: PositionsConfig,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            vsps: 2,
            bs_per_vsp: 1,
            users_per_vsp: 3,
            subchannels: 4,
            reusable: vec![0, 1],
            dedicated: vec![2, 3],
            l_c: 2,
            ris: RisConfig::default(),
            geometry: GeometryConfig::default(),
            prices: Prices::default(),
            qos: QosConfig::default(),
            utility: UtilityConfig::default(),
            units: UnitsConfig::default(),
            pathloss_exponent: 2.5,
            positions: PositionsConfig::default(),
            seed: 7,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::InvalidConfig {
            field: "json",
            reason: e.to_string(),
        })
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("reusable and dedicated subchannel sets overlap")]
    OverlappingSets,
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidConfig { field, reason: reason.into() }
}

/// Immutable network description shared by every downstream component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub num_vsps: usize,
    pub bs_per_vsp: usize,
    pub users_per_vsp: usize,
    pub num_subchannels: usize,
    pub reusable_set: Vec<usize>,
    pub dedicated_set: Vec<usize>,
    /// `true` for reusable (shared) subchannels.
    pub reuse_flags: Vec<bool>,
    pub max_users_per_subchannel: usize,
    pub num_ris: usize,
    pub elements_per_ris: usize,
    pub ris_owner_vsp: Vec<usize>,
    /// Global BS index `v * bs_per_vsp + b`.
    pub bs_pos: Vec<[f64; 2]>,
    /// Global user index `v * users_per_vsp + k`.
    pub user_pos: Vec<[f64; 2]>,
    pub ris_pos: Vec<[f64; 2]>,
    pub vsp_center: Vec<[f64; 2]>,
    pub vsp_radius: f64,
    /// Per-BS transmit power budget.
    pub p_max: f64,
    /// Total noise power per subchannel (bandwidth x spectral density).
    pub noise_power: f64,
    /// Bandwidth factor applied in rate and power-cost formulas.
    pub bandwidth: f64,
    pub pathloss_exponent: f64,
    pub ref_gain: f64,
    pub prices: Prices,
    pub profit_per_rate: Vec<f64>,
    pub phi1: f64,
    pub phi2: f64,
    /// Minimum rate per global user index.
    pub rate_threshold: Vec<f64>,
    pub qos_penalty_weight: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn num_bs_total(&self) -> usize {
        self.num_vsps * self.bs_per_vsp
    }

    pub fn num_users_total(&self) -> usize {
        self.num_vsps * self.users_per_vsp
    }

    pub fn global_bs(&self, v: usize, b: usize) -> usize {
        v * self.bs_per_vsp + b
    }

    pub fn global_user(&self, v: usize, k: usize) -> usize {
        v * self.users_per_vsp + k
    }

    pub fn vsp_of_bs(&self, gb: usize) -> usize {
        gb / self.bs_per_vsp
    }

    pub fn vsp_of_user(&self, gk: usize) -> usize {
        gk / self.users_per_vsp
    }

    pub fn is_reusable(&self, c: usize) -> bool {
        self.reuse_flags[c]
    }

    /// Flat index into (v, b, k, c) link arrays.
    pub fn link_index(&self, v: usize, b: usize, k: usize, c: usize) -> usize {
        ((self.global_bs(v, b) * self.users_per_vsp) + k) * self.num_subchannels + c
    }

    /// Flat index into (v, b, k) association arrays.
    pub fn assoc_index(&self, v: usize, b: usize, k: usize) -> usize {
        self.global_bs(v, b) * self.users_per_vsp + k
    }

    /// Number of (v, b, k, c) link slots.
    pub fn num_links(&self) -> usize {
        self.num_bs_total() * self.users_per_vsp * self.num_subchannels
    }

    pub fn total_ris_elements(&self) -> usize {
        self.num_ris * self.elements_per_ris
    }

    pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    /// Distance-dependent average channel power `rho_0 * d^-beta`.
    pub fn path_gain(&self, d: f64) -> f64 {
        self.ref_gain * d.powf(-self.pathloss_exponent)
    }
}

fn sample_in_disc(rng: &mut ChaCha8Rng, center: [f64; 2], radius: f64) -> [f64; 2] {
    // sqrt keeps the area density uniform.
    let r = radius * uniform01(rng).sqrt();
    let phi = 2.0 * std::f64::consts::PI * uniform01(rng);
    [center[0] + r * phi.cos(), center[1] + r * phi.sin()]
}

fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Builds the static scenario from configuration, sampling any positions not
/// given explicitly uniformly at random inside each VSP disc.
pub fn build_scenario(config: &ScenarioConfig) -> Result<Scenario, ConfigError> {
    if config.vsps == 0 {
        return Err(invalid("vsps", "must be >= 1"));
    }
    if config.bs_per_vsp == 0 {
        return Err(invalid("bs_per_vsp", "must be >= 1"));
    }
    if config.users_per_vsp == 0 {
        return Err(invalid("users_per_vsp", "must be >= 1"));
    }
    if config.subchannels == 0 {
        return Err(invalid("subchannels", "must be >= 1"));
    }
    if config.l_c == 0 {
        return Err(invalid("l_c", "must be >= 1"));
    }
    if config.geometry.radius_m <= 0.0 {
        return Err(invalid("geometry.radius_m", "must be > 0"));
    }
    if config.geometry.separation_m < 0.0 {
        return Err(invalid("geometry.separation_m", "must be >= 0"));
    }
    if config.ris.count > 0 && config.ris.elements == 0 {
        return Err(invalid("ris.elements", "must be >= 1 when ris.count >= 1"));
    }
    if config.ris.count > 0 && config.ris.owner >= config.vsps {
        return Err(invalid("ris.owner", "must index an existing VSP"));
    }
    let p = &config.prices;
    if p.reused < 0.0 || p.dedicated < 0.0 || p.ris < 0.0 || p.power < 0.0 {
        return Err(invalid("prices", "must be >= 0"));
    }
    if p.dedicated <= p.reused {
        return Err(invalid("prices.dedicated", "dedicated price must exceed reused price"));
    }
    if config.qos.threshold < 0.0 {
        return Err(invalid("qos.threshold", "must be >= 0"));
    }
    if config.qos.penalty < 0.0 {
        return Err(invalid("qos.penalty", "must be >= 0"));
    }
    if config.utility.phi1 <= 0.0 || config.utility.phi2 <= 0.0 {
        return Err(invalid("utility", "phi1 and phi2 must be > 0"));
    }
    if config.utility.beta_v <= 0.0 {
        return Err(invalid("utility.beta_v", "must be > 0"));
    }
    if config.pathloss_exponent <= 0.0 {
        return Err(invalid("pathloss_exponent", "must be > 0"));
    }

    for &c in config.reusable.iter().chain(config.dedicated.iter()) {
        if c >= config.subchannels {
            return Err(invalid("reusable/dedicated", format!("index {c} out of range")));
        }
    }
    let mut reuse_flags = vec![false; config.subchannels];
    let mut classified = vec![false; config.subchannels];
    for &c in &config.reusable {
        if classified[c] {
            return Err(ConfigError::OverlappingSets);
        }
        classified[c] = true;
        reuse_flags[c] = true;
    }
    for &c in &config.dedicated {
        if classified[c] {
            return Err(ConfigError::OverlappingSets);
        }
        classified[c] = true;
    }
    if classified.iter().any(|&done| !done) {
        return Err(invalid(
            "reusable/dedicated",
            "every subchannel must be classified as reusable or dedicated",
        ));
    }

    let vsp_center: Vec<[f64; 2]> = (0..config.vsps)
        .map(|v| [v as f64 * config.geometry.separation_m, 0.0])
        .collect();
    let radius = config.geometry.radius_m;

    let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, Stream::Geometry as u64, 0));
    let bs_pos = match &config.positions.bs {
        Some(given) => {
            let expect = config.vsps * config.bs_per_vsp;
            if given.len() != expect {
                return Err(invalid("positions.bs", format!("expected {expect} entries")));
            }
            given.clone()
        }
        None => (0..config.vsps)
            .flat_map(|v| {
                (0..config.bs_per_vsp)
                    .map(|_| sample_in_disc(&mut rng, vsp_center[v], radius))
                    .collect::<Vec<_>>()
            })
            .collect(),
    };
    let user_pos = match &config.positions.users {
        Some(given) => {
            let expect = config.vsps * config.users_per_vsp;
            if given.len() != expect {
                return Err(invalid("positions.users", format!("expected {expect} entries")));
            }
            given.clone()
        }
        None => (0..config.vsps)
            .flat_map(|v| {
                (0..config.users_per_vsp)
                    .map(|_| sample_in_disc(&mut rng, vsp_center[v], radius))
                    .collect::<Vec<_>>()
            })
            .collect(),
    };
    let ris_owner_vsp: Vec<usize> = vec![config.ris.owner; config.ris.count];
    let ris_pos = match &config.positions.ris {
        Some(given) => {
            if given.len() != config.ris.count {
                return Err(invalid("positions.ris", format!("expected {} entries", config.ris.count)));
            }
            given.clone()
        }
        None => ris_owner_vsp
            .iter()
            // RIS deployed near the owner's coverage center.
            .map(|&v| sample_in_disc(&mut rng, vsp_center[v], radius / 4.0))
            .collect(),
    };

    for (v, pos_group) in [(&bs_pos, "bs"), (&user_pos, "users")]
        .iter()
        .flat_map(|(poss, name)| {
            let per = poss.len() / config.vsps;
            poss.iter().enumerate().map(move |(i, &p)| ((i / per, p), *name))
        })
    {
        let ((vsp, pos), name) = (v, pos_group);
        if Scenario::dist(pos, vsp_center[vsp]) > radius + 1e-9 {
            return Err(invalid(
                "positions",
                format!("{name} entity at ({}, {}) lies outside its VSP disc", pos[0], pos[1]),
            ));
        }
    }
    for (j, &pos) in ris_pos.iter().enumerate() {
        let v = ris_owner_vsp[j];
        if Scenario::dist(pos, vsp_center[v]) > radius + 1e-9 {
            return Err(invalid("positions.ris", format!("RIS {j} lies outside its VSP disc")));
        }
    }

    let (p_max, noise_power, bandwidth, ref_gain) = match config.units.mode {
        UnitsMode::Normalized => {
            // Calibrate rho_0 so the median cell-edge direct SNR at full
            // power hits the configured target. The Rayleigh power median
            // is ln 2.
            let target = 10f64.powf(config.units.ref_snr_db / 10.0);
            let rho0 = target * radius.powf(config.pathloss_exponent) / std::f64::consts::LN_2;
            (1.0, 1.0, 1.0, rho0)
        }
        UnitsMode::Physical => {
            let p_max = dbm_to_watt(config.units.p_max_dbm);
            let n0 = dbm_to_watt(config.units.noise_dbm_hz);
            (p_max, n0 * config.units.bandwidth_hz, config.units.bandwidth_hz, config.units.ref_gain)
        }
    };

    let num_users_total = config.vsps * config.users_per_vsp;
    Ok(Scenario {
        num_vsps: config.vsps,
        bs_per_vsp: config.bs_per_vsp,
        users_per_vsp: config.users_per_vsp,
        num_subchannels: config.subchannels,
        reusable_set: config.reusable.clone(),
        dedicated_set: config.dedicated.clone(),
        reuse_flags,
        max_users_per_subchannel: config.l_c,
        num_ris: config.ris.count,
        elements_per_ris: config.ris.elements,
        ris_owner_vsp,
        bs_pos,
        user_pos,
        ris_pos,
        vsp_center,
        vsp_radius: radius,
        p_max,
        noise_power,
        bandwidth,
        pathloss_exponent: config.pathloss_exponent,
        ref_gain,
        prices: config.prices,
        profit_per_rate: vec![config.utility.beta_v; config.vsps],
        phi1: config.utility.phi1,
        phi2: config.utility.phi2,
        rate_threshold: vec![config.qos.threshold; num_users_total],
        qos_penalty_weight: config.qos.penalty,
        seed: config.seed,
    })
}

/// Deployment-fixed RIS wiring: which BS controls each RIS and which users
/// each RIS assists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RisAssociation {
    /// `d[j][gk]` - RIS `j` assists global user `gk`.
    pub d: Vec<Vec<bool>>,
    /// Controlling BS (global index) per RIS.
    pub controller_bs: Vec<usize>,
}

impl RisAssociation {
    /// RIS index assisting the given global user, if any.
    pub fn ris_of_user(&self, gk: usize) -> Option<usize> {
        self.d.iter().position(|row| row[gk])
    }
}

/// Derives the RIS association from geometry: each RIS is controlled by its
/// nearest BS, and each user of an RIS-owning VSP is assisted by the nearest
/// RIS that VSP owns. Ties break toward the lowest index.
pub fn fix_ris_association(scenario: &Scenario) -> RisAssociation {
    let num_users = scenario.num_users_total();
    let mut d = vec![vec![false; num_users]; scenario.num_ris];
    let mut controller_bs = Vec::with_capacity(scenario.num_ris);

    for j in 0..scenario.num_ris {
        let mut best = (f64::INFINITY, 0usize);
        for (gb, &bs) in scenario.bs_pos.iter().enumerate() {
            let dist = Scenario::dist(scenario.ris_pos[j], bs);
            if dist < best.0 {
                best = (dist, gb);
            }
        }
        controller_bs.push(best.1);
    }

    for gk in 0..num_users {
        let v = scenario.vsp_of_user(gk);
        let mut best: Option<(f64, usize)> = None;
        for j in 0..scenario.num_ris {
            if scenario.ris_owner_vsp[j] != v {
                continue;
            }
            let dist = Scenario::dist(scenario.ris_pos[j], scenario.user_pos[gk]);
            if best.map_or(true, |(bd, _)| dist < bd) {
                best = Some((dist, j));
            }
        }
        if let Some((_, j)) = best {
            d[j][gk] = true;
        }
    }

    RisAssociation { d, controller_bs }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_matches_parameter_table() {
        let s = build_scenario(&ScenarioConfig::default()).unwrap();
        assert_eq!(s.num_vsps, 2);
        assert_eq!(s.num_subchannels, 4);
        assert_eq!(s.reusable_set, vec![0, 1]);
        assert_eq!(s.dedicated_set, vec![2, 3]);
        assert_eq!(s.max_users_per_subchannel, 2);
        assert_eq!(s.num_ris, 1);
        assert_eq!(s.pathloss_exponent, 2.5);
        assert_eq!(s.rate_threshold[0], 0.5);
        assert_eq!(s.qos_penalty_weight, 50.0);
        assert_eq!(s.prices.reused, 0.2);
        assert_eq!(s.prices.dedicated, 0.5);
        assert_eq!(s.prices.ris, 0.3);
        assert_eq!(s.prices.power, 0.1);
        // normalized mode
        assert_eq!(s.p_max, 1.0);
        assert_eq!(s.noise_power, 1.0);
        assert_eq!(s.bandwidth, 1.0);
        assert_eq!(s.reuse_flags, vec![true, true, false, false]);
    }

    #[test]
    fn physical_mode_uses_dbm_values() {
        let mut config = ScenarioConfig::default();
        config.units.mode = UnitsMode::Physical;
        let s = build_scenario(&config).unwrap();
        assert!((s.p_max - 1.0).abs() < 1e-12); // 30 dBm = 1 W
        assert!((s.noise_power - dbm_to_watt(-174.0) * 5e6).abs() < 1e-25);
        assert_eq!(s.bandwidth, 5e6);
    }

    #[test]
    fn overlapping_sets_rejected() {
        let config = ScenarioConfig {
            subchannels: 1,
            reusable: vec![0],
            dedicated: vec![0],
            ..Default::default()
        };
        assert!(matches!(build_scenario(&config), Err(ConfigError::OverlappingSets)));
    }

    #[test]
    fn unclassified_subchannel_rejected() {
        let config = ScenarioConfig {
            subchannels: 3,
            reusable: vec![0],
            dedicated: vec![2],
            ..Default::default()
        };
        assert!(matches!(build_scenario(&config), Err(ConfigError::InvalidConfig { .. })));
    }

    #[test]
    fn dedicated_price_must_exceed_reused() {
        let mut config = ScenarioConfig::default();
        config.prices.dedicated = 0.1;
        assert!(build_scenario(&config).is_err());
    }

    #[test]
    fn geometry_matches_figure_layout() {
        let config = ScenarioConfig { users_per_vsp: 3, ..Default::default() };
        let s = build_scenario(&config).unwrap();
        assert_eq!(s.vsp_center[0], [0.0, 0.0]);
        assert_eq!(s.vsp_center[1], [800.0, 0.0]);
        assert_eq!(s.vsp_radius, 500.0);
        assert_eq!(s.user_pos.len(), 6);
    }

    #[test]
    fn sampled_positions_stay_inside_disc() {
        for seed in 0..100 {
            let config = ScenarioConfig { users_per_vsp: 50, seed, ..Default::default() };
            let s = build_scenario(&config).unwrap();
            for (gk, &pos) in s.user_pos.iter().enumerate() {
                let v = s.vsp_of_user(gk);
                assert!(Scenario::dist(pos, s.vsp_center[v]) <= s.vsp_radius);
            }
            for (gb, &pos) in s.bs_pos.iter().enumerate() {
                let v = s.vsp_of_bs(gb);
                assert!(Scenario::dist(pos, s.vsp_center[v]) <= s.vsp_radius);
            }
        }
    }

    #[test]
    fn subchannel_partition_property() {
        for c_total in 1..6 {
            for split in 0..=c_total {
                let config = ScenarioConfig {
                    subchannels: c_total,
                    reusable: (0..split).collect(),
                    dedicated: (split..c_total).collect(),
                    prices: Prices::default(),
                    ..Default::default()
                };
                let s = build_scenario(&config).unwrap();
                assert_eq!(s.reusable_set.len() + s.dedicated_set.len(), s.num_subchannels);
            }
        }
    }

    #[test]
    fn scenario_build_is_deterministic() {
        let config = ScenarioConfig::default();
        let a = build_scenario(&config).unwrap();
        let b = build_scenario(&config).unwrap();
        assert_eq!(a.user_pos, b.user_pos);
        assert_eq!(a.bs_pos, b.bs_pos);
        assert_eq!(a.ris_pos, b.ris_pos);
    }

    #[test]
    fn ris_association_covers_owner_vsp_only() {
        let config = ScenarioConfig { users_per_vsp: 3, ..Default::default() };
        let s = build_scenario(&config).unwrap();
        let assoc = fix_ris_association(&s);
        // VSP 0 owns the single RIS: its three users associate, VSP 1's do not.
        for gk in 0..3 {
            assert!(assoc.d[0][gk]);
        }
        for gk in 3..6 {
            assert!(!assoc.d[0][gk]);
        }
        assert_eq!(assoc.d[0].iter().filter(|&&x| x).count(), 3);
    }

    #[test]
    fn no_ris_means_empty_association() {
        let mut config = ScenarioConfig::default();
        config.ris.count = 0;
        let s = build_scenario(&config).unwrap();
        let assoc = fix_ris_association(&s);
        assert!(assoc.d.is_empty());
        assert!(assoc.controller_bs.is_empty());
    }

    #[test]
    fn equidistant_ris_tie_breaks_low_index() {
        let mut config = ScenarioConfig {
            vsps: 1,
            users_per_vsp: 1,
            reusable: vec![0, 1],
            dedicated: vec![2, 3],
            ..Default::default()
        };
        config.ris.count = 2;
        config.ris.owner = 0;
        config.positions.bs = Some(vec![[0.0, 0.0]]);
        config.positions.users = Some(vec![[0.0, 0.0]]);
        config.positions.ris = Some(vec![[10.0, 0.0], [-10.0, 0.0]]);
        let s = build_scenario(&config).unwrap();
        let assoc = fix_ris_association(&s);
        assert!(assoc.d[0][0]);
        assert!(!assoc.d[1][0]);
    }

    #[test]
    fn association_is_idempotent() {
        let s = build_scenario(&ScenarioConfig::default()).unwrap();
        assert_eq!(fix_ris_association(&s), fix_ris_association(&s));
    }

    #[test]
    fn per_user_at_most_one_ris() {
        let mut config = ScenarioConfig { users_per_vsp: 8, seed: 42, ..Default::default() };
        config.ris.count = 3;
        let s = build_scenario(&config).unwrap();
        let assoc = fix_ris_association(&s);
        for gk in 0..s.num_users_total() {
            let count = assoc.d.iter().filter(|row| row[gk]).count();
            assert!(count <= 1);
        }
    }
}
