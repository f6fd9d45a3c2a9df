//! Random channel realizations (path loss x Rayleigh fading) for direct,
//! BS-to-RIS, and RIS-to-user links, plus the RIS-assisted effective channel.
//!
//! Each (link class, subchannel) pair draws from its own substream of the
//! realization seed, so changing the RIS element count never perturbs the
//! direct-channel draws.

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rng::{mix, normal_pair, Stream};
use crate::topology::{RisAssociation, Scenario};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("colocated endpoints for {link} link (b={b}, j={j}, k={k})")]
    DegenerateGeometry { link: &'static str, b: usize, j: usize, k: usize },
    #[error("user {0} has no associated RIS")]
    NoRis(usize),
    #[error("malformed realization table: {0}")]
    MalformedDump(String),
}

/// Tensor dimensions of a realization, all derived from the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelDims {
    pub num_bs: usize,
    pub num_users: usize,
    pub num_ris: usize,
    pub elements: usize,
    pub subchannels: usize,
}

impl ChannelDims {
    pub fn of(scenario: &Scenario) -> Self {
        Self {
            num_bs: scenario.num_bs_total(),
            num_users: scenario.num_users_total(),
            num_ris: scenario.num_ris,
            elements: scenario.elements_per_ris,
            subchannels: scenario.num_subchannels,
        }
    }

    /// Total number of complex entries across the three link tensors.
    pub fn num_entries(&self) -> usize {
        self.num_bs * self.num_users * self.subchannels
            + self.num_bs * self.num_ris * self.subchannels * self.elements
            + self.num_ris * self.num_users * self.subchannels * self.elements
    }
}

/// One draw of every link gain in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub dims: ChannelDims,
    /// `(gb, gk, c)` direct gains.
    pub direct: Vec<Complex64>,
    /// `(gb, j, c, m)` BS-to-RIS element gains.
    pub bs_ris: Vec<Complex64>,
    /// `(j, gk, c, m)` RIS-element-to-user gains.
    pub ris_user: Vec<Complex64>,
}

impl ChannelRealization {
    #[inline]
    pub fn direct_idx(&self, gb: usize, gk: usize, c: usize) -> usize {
        (gb * self.dims.num_users + gk) * self.dims.subchannels + c
    }

    #[inline]
    pub fn bs_ris_idx(&self, gb: usize, j: usize, c: usize, m: usize) -> usize {
        ((gb * self.dims.num_ris + j) * self.dims.subchannels + c) * self.dims.elements + m
    }

    #[inline]
    pub fn ris_user_idx(&self, j: usize, gk: usize, c: usize, m: usize) -> usize {
        ((j * self.dims.num_users + gk) * self.dims.subchannels + c) * self.dims.elements + m
    }

    pub fn direct_gain(&self, gb: usize, gk: usize, c: usize) -> Complex64 {
        self.direct[self.direct_idx(gb, gk, c)]
    }

    /// Serializes the realization as a flat CSV table for fixture pinning.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("link,b,j,k,c,m,re,im\n");
        let d = &self.dims;
        for gb in 0..d.num_bs {
            for gk in 0..d.num_users {
                for c in 0..d.subchannels {
                    let z = self.direct[self.direct_idx(gb, gk, c)];
                    out.push_str(&format!("direct,{gb},,{gk},{c},,{:e},{:e}\n", z.re, z.im));
                }
            }
        }
        for gb in 0..d.num_bs {
            for j in 0..d.num_ris {
                for c in 0..d.subchannels {
                    for m in 0..d.elements {
                        let z = self.bs_ris[self.bs_ris_idx(gb, j, c, m)];
                        out.push_str(&format!("bs_ris,{gb},{j},,{c},{m},{:e},{:e}\n", z.re, z.im));
                    }
                }
            }
        }
        for j in 0..d.num_ris {
            for gk in 0..d.num_users {
                for c in 0..d.subchannels {
                    for m in 0..d.elements {
                        let z = self.ris_user[self.ris_user_idx(j, gk, c, m)];
                        out.push_str(&format!("ris_user,,{j},{gk},{c},{m},{:e},{:e}\n", z.re, z.im));
                    }
                }
            }
        }
        out
    }

    /// Reconstructs a realization from [`ChannelRealization::to_csv`] output.
    pub fn from_csv(dims: ChannelDims, text: &str) -> Result<Self, ChannelError> {
        let mut real = Self {
            dims,
            direct: vec![Complex64::default(); dims.num_bs * dims.num_users * dims.subchannels],
            bs_ris: vec![
                Complex64::default();
                dims.num_bs * dims.num_ris * dims.subchannels * dims.elements
            ],
            ris_user: vec![
                Complex64::default();
                dims.num_ris * dims.num_users * dims.subchannels * dims.elements
            ],
        };
        let parse = |field: &str| -> Result<usize, ChannelError> {
            field.parse().map_err(|_| ChannelError::MalformedDump(format!("bad index `{field}`")))
        };
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 8 {
                return Err(ChannelError::MalformedDump(format!("line {}: expected 8 columns", lineno + 1)));
            }
            let re: f64 = cols[6]
                .parse()
                .map_err(|_| ChannelError::MalformedDump(format!("line {}: bad re", lineno + 1)))?;
            let im: f64 = cols[7]
                .parse()
                .map_err(|_| ChannelError::MalformedDump(format!("line {}: bad im", lineno + 1)))?;
            let z = Complex64::new(re, im);
            match cols[0] {
                "direct" => {
                    let idx = real.direct_idx(parse(cols[1])?, parse(cols[3])?, parse(cols[4])?);
                    real.direct[idx] = z;
                }
                "bs_ris" => {
                    let idx =
                        real.bs_ris_idx(parse(cols[1])?, parse(cols[2])?, parse(cols[4])?, parse(cols[5])?);
                    real.bs_ris[idx] = z;
                }
                "ris_user" => {
                    let idx =
                        real.ris_user_idx(parse(cols[2])?, parse(cols[3])?, parse(cols[4])?, parse(cols[5])?);
                    real.ris_user[idx] = z;
                }
                other => {
                    return Err(ChannelError::MalformedDump(format!("unknown link type `{other}`")))
                }
            }
        }
        Ok(real)
    }
}

/// Per-RIS per-element phase shifts in [0, 2pi), shared by all subchannels.
#[derive(Debug, Clone, PartialEq)]
pub struct RisPhases {
    pub theta: Vec<Vec<f64>>,
}

impl RisPhases {
    pub fn zeros(scenario: &Scenario) -> Self {
        Self { theta: vec![vec![0.0; scenario.elements_per_ris]; scenario.num_ris] }
    }

    pub fn num_ris(&self) -> usize {
        self.theta.len()
    }
}

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Complex unit-variance circular Gaussian scaled by the link's path gain.
fn draw_link(rng: &mut ChaCha8Rng, amp: f64) -> Complex64 {
    let (a, b) = normal_pair(rng);
    // Re and Im each carry half the unit variance.
    Complex64::new(amp * a / std::f64::consts::SQRT_2, amp * b / std::f64::consts::SQRT_2)
}

/// Draws a full channel realization for the scenario from the given seed.
///
/// Every link gain equals `sqrt(rho_0 d^-beta) z` with `z` a unit-variance
/// complex Gaussian, independent across links and subchannels.
pub fn draw_channels(scenario: &Scenario, seed: u64) -> Result<ChannelRealization, ChannelError> {
    let dims = ChannelDims::of(scenario);
    let mut direct = Vec::with_capacity(dims.num_bs * dims.num_users * dims.subchannels);
    let mut bs_ris = Vec::with_capacity(dims.num_bs * dims.num_ris * dims.subchannels * dims.elements);
    let mut ris_user =
        Vec::with_capacity(dims.num_ris * dims.num_users * dims.subchannels * dims.elements);

    // Amplitudes depend only on geometry; precompute per link pair.
    let mut direct_amp = vec![0.0; dims.num_bs * dims.num_users];
    for gb in 0..dims.num_bs {
        for gk in 0..dims.num_users {
            let d = Scenario::dist(scenario.bs_pos[gb], scenario.user_pos[gk]);
            if d == 0.0 {
                return Err(ChannelError::DegenerateGeometry { link: "direct", b: gb, j: 0, k: gk });
            }
            direct_amp[gb * dims.num_users + gk] = scenario.path_gain(d).sqrt();
        }
    }
    let mut bs_ris_amp = vec![0.0; dims.num_bs * dims.num_ris];
    for gb in 0..dims.num_bs {
        for j in 0..dims.num_ris {
            let d = Scenario::dist(scenario.bs_pos[gb], scenario.ris_pos[j]);
            if d == 0.0 {
                return Err(ChannelError::DegenerateGeometry { link: "bs_ris", b: gb, j, k: 0 });
            }
            bs_ris_amp[gb * dims.num_ris + j] = scenario.path_gain(d).sqrt();
        }
    }
    let mut ris_user_amp = vec![0.0; dims.num_ris * dims.num_users];
    for j in 0..dims.num_ris {
        for gk in 0..dims.num_users {
            let d = Scenario::dist(scenario.ris_pos[j], scenario.user_pos[gk]);
            if d == 0.0 {
                return Err(ChannelError::DegenerateGeometry { link: "ris_user", b: 0, j, k: gk });
            }
            ris_user_amp[j * dims.num_users + gk] = scenario.path_gain(d).sqrt();
        }
    }

    // Draw order inside each substream is fixed; streams are split per
    // (link class, subchannel). The storage layouts above are c-inner, so
    // fill per-channel scratch first and interleave afterwards.
    let mut direct_per_c = vec![Vec::new(); dims.subchannels];
    for (c, slot) in direct_per_c.iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, Stream::DirectChannel as u64, c as u64));
        for gb in 0..dims.num_bs {
            for gk in 0..dims.num_users {
                slot.push(draw_link(&mut rng, direct_amp[gb * dims.num_users + gk]));
            }
        }
    }
    for gb in 0..dims.num_bs {
        for gk in 0..dims.num_users {
            for slot in direct_per_c.iter() {
                direct.push(slot[gb * dims.num_users + gk]);
            }
        }
    }

    let mut bs_ris_per_c = vec![Vec::new(); dims.subchannels];
    for (c, slot) in bs_ris_per_c.iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, Stream::BsRisChannel as u64, c as u64));
        for gb in 0..dims.num_bs {
            for j in 0..dims.num_ris {
                for _ in 0..dims.elements {
                    slot.push(draw_link(&mut rng, bs_ris_amp[gb * dims.num_ris + j]));
                }
            }
        }
    }
    for gb in 0..dims.num_bs {
        for j in 0..dims.num_ris {
            for (_c, slot) in bs_ris_per_c.iter().enumerate() {
                let base = (gb * dims.num_ris + j) * dims.elements;
                bs_ris.extend_from_slice(&slot[base..base + dims.elements]);
            }
        }
    }

    let mut ris_user_per_c = vec![Vec::new(); dims.subchannels];
    for (c, slot) in ris_user_per_c.iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, Stream::RisUserChannel as u64, c as u64));
        for j in 0..dims.num_ris {
            for gk in 0..dims.num_users {
                for _ in 0..dims.elements {
                    slot.push(draw_link(&mut rng, ris_user_amp[j * dims.num_users + gk]));
                }
            }
        }
    }
    for j in 0..dims.num_ris {
        for gk in 0..dims.num_users {
            for (_c, slot) in ris_user_per_c.iter().enumerate() {
                let base = (j * dims.num_users + gk) * dims.elements;
                ris_user.extend_from_slice(&slot[base..base + dims.elements]);
            }
        }
    }

    Ok(ChannelRealization { dims, direct, bs_ris, ris_user })
}

/// RIS-assisted effective channel `h + sum_j d_j^k (r_j^k)^H Theta_j g_{b,j}`
/// for a (global BS, global user, subchannel) triple.
pub fn effective_channel(
    real: &ChannelRealization,
    phases: &RisPhases,
    assoc: &RisAssociation,
    gb: usize,
    gk: usize,
    c: usize,
) -> Complex64 {
    let mut h = real.direct[real.direct_idx(gb, gk, c)];
    for (j, row) in assoc.d.iter().enumerate() {
        if !row[gk] {
            continue;
        }
        for m in 0..real.dims.elements {
            let r = real.ris_user[real.ris_user_idx(j, gk, c, m)];
            let g = real.bs_ris[real.bs_ris_idx(gb, j, c, m)];
            let phase = Complex64::from_polar(1.0, phases.theta[j][m]);
            h += r.conj() * phase * g;
        }
    }
    h
}

/// Phase configuration that aligns every cascade term of one (b, k, c) link
/// with its direct path, maximizing the single-user effective gain. Intended
/// as an upper-bound oracle for tests.
pub fn align_phases_oracle(
    real: &ChannelRealization,
    assoc: &RisAssociation,
    gb: usize,
    gk: usize,
    c: usize,
) -> Result<RisPhases, ChannelError> {
    let j = assoc.ris_of_user(gk).ok_or(ChannelError::NoRis(gk))?;
    let mut theta = vec![vec![0.0; real.dims.elements]; real.dims.num_ris];
    let h = real.direct[real.direct_idx(gb, gk, c)];
    for m in 0..real.dims.elements {
        let r = real.ris_user[real.ris_user_idx(j, gk, c, m)];
        let g = real.bs_ris[real.bs_ris_idx(gb, j, c, m)];
        let cascade = r.conj() * g;
        theta[j][m] = (h.arg() - cascade.arg()).rem_euclid(TWO_PI);
    }
    Ok(RisPhases { theta })
}
