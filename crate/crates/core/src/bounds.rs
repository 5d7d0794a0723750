//! Upper bounds on the expected query count and error probability of A-ITS.
//!
//! `E(N_d)`, the expected number of groups of size `d`, is taken from the
//! idealized power law `n / (zeta(m, alpha) d^alpha)` unless an empirical
//! histogram is supplied. The constants `c` and `c'` are unknown and enter as
//! inputs (default 1), so every bound is up to those constants.

use std::fmt::Write as _;

use thiserror::Error;

use crate::attack::QueryChannel;
use crate::bigraph::{BigraphParams, BipartiteGraph};
use crate::numerics::{bernoulli_channel_mi, binary_convolution, binary_entropy, partial_zeta, ChannelSpec, DomainError};

#[derive(Debug, Error, PartialEq)]
pub enum BoundError {
    #[error("infeasible: psi = {psi} exceeds the available information mass {available}")]
    Infeasible { psi: f64, available: f64 },
    #[error("invalid bound input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// `psi = H(M) + ln(1/epsilon) + i_max`.
pub fn psi(h_m: f64, epsilon: f64, i_max: f64) -> f64 {
    h_m + (1.0 / epsilon).ln() + i_max
}

/// Largest per-query increment `ln(P(y|r) / P_Y(y))` over responses, bits the
/// group can actually contain, and channels, for groups of the given sizes.
///
/// Returns `+inf` when a response with positive likelihood has zero marginal.
pub fn i_max(channels: &[ChannelSpec], m: usize, degrees: impl IntoIterator<Item = usize> + Clone) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for channel in channels {
        for d in degrees.clone() {
            let prior = d as f64 / m as f64;
            let q = channel.output_marginal(prior);
            for r in [true, false] {
                if (r && d == 0) || (!r && d >= m) {
                    continue;
                }
                for y in [true, false] {
                    let lik = channel.likelihood(y, r);
                    if lik == 0.0 {
                        continue;
                    }
                    let p_y = if y { q } else { 1.0 - q };
                    let ratio = if p_y == 0.0 { f64::INFINITY } else { (lik / p_y).ln() };
                    best = best.max(ratio);
                }
            }
        }
    }
    best.max(0.0)
}

/// `i_max` over every group size in `[1, m]`.
pub fn i_max_all_degrees(channels: &[ChannelSpec], m: usize) -> f64 {
    i_max(channels, m, 1..=m)
}

/// `i_max` over the degrees realized in a graph.
pub fn i_max_for_graph(channels: &[ChannelSpec], graph: &BipartiteGraph) -> f64 {
    let mut degrees = graph.degrees();
    degrees.sort_unstable();
    degrees.dedup();
    i_max(channels, graph.m(), degrees)
}

/// Source of `E(N_d)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DegreeMass {
    PowerLaw,
    /// `counts[d]` groups of size `d`, for `d` in `0..counts.len()`.
    Empirical(Vec<f64>),
}

impl DegreeMass {
    pub fn from_graph(graph: &BipartiteGraph) -> Self {
        let mut counts = vec![0.0; graph.m() + 1];
        for d in graph.degrees() {
            counts[d] += 1.0;
        }
        DegreeMass::Empirical(counts)
    }
}

/// `E(N_d) = n / (zeta(m, alpha) d^alpha)` for `d >= 1`.
pub fn expected_group_count(params: &BigraphParams, d: usize) -> f64 {
    if d == 0 {
        return 0.0;
    }
    params.n as f64 / (partial_zeta(params.m, params.alpha) * (d as f64).powf(params.alpha))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub params: BigraphParams,
    /// Noise classes with their weights `P_Theta`.
    pub channels: Vec<(QueryChannel, f64)>,
    pub epsilon: f64,
    /// `H(M)` in nats.
    pub entropy_of_victim: f64,
    pub c_prime: f64,
    pub c_thm1: f64,
    pub degree_mass: DegreeMass,
    /// Degrees over which `i_max` is maximized; every `d` in `[1, m]` if `None`.
    pub i_max_degrees: Option<Vec<usize>>,
}

impl BoundInputs {
    /// One BSC class, uniform victim, constants 1, power-law mass.
    pub fn bsc(params: BigraphParams, nq: f64, epsilon: f64) -> Result<Self, BoundError> {
        let channel = QueryChannel::bsc(nq).map_err(|e| BoundError::InvalidInput(e.to_string()))?;
        Ok(Self {
            params,
            channels: vec![(channel, 1.0)],
            epsilon,
            entropy_of_victim: (params.m as f64).ln(),
            c_prime: 1.0,
            c_thm1: 1.0,
            degree_mass: DegreeMass::PowerLaw,
            i_max_degrees: None,
        })
    }

    pub fn validate(&self) -> Result<(), BoundError> {
        let bad = |msg: String| Err(BoundError::InvalidInput(msg));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon = {} must lie in (0, 1)", self.epsilon));
        }
        if !(self.c_prime > 0.0) || !(self.c_thm1 > 0.0) {
            return bad("constants must be positive".into());
        }
        if !(self.entropy_of_victim >= 0.0) {
            return bad(format!("H(M) = {} must be nonnegative", self.entropy_of_victim));
        }
        if !(self.params.alpha > 2.0) {
            return bad(format!("alpha = {} must exceed 2", self.params.alpha));
        }
        if self.channels.is_empty() {
            return bad("no channels".into());
        }
        let total: f64 = self.channels.iter().map(|(_, w)| w).sum();
        if self.channels.iter().any(|(_, w)| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return bad(format!("class weights must be nonnegative and sum to 1, got {total}"));
        }
        if let DegreeMass::Empirical(counts) = &self.degree_mass {
            if counts.len() != self.params.m + 1 {
                return bad(format!("histogram has {} bins, expected m + 1", counts.len()));
            }
        }
        Ok(())
    }

    fn group_count(&self, d: usize) -> f64 {
        match &self.degree_mass {
            DegreeMass::PowerLaw => expected_group_count(&self.params, d),
            DegreeMass::Empirical(counts) => counts.get(d).copied().unwrap_or(0.0),
        }
    }

    fn i_max(&self) -> f64 {
        let specs: Vec<ChannelSpec> = self
            .channels
            .iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(c, _)| c.spec)
            .collect();
        match &self.i_max_degrees {
            Some(ds) => i_max(&specs, self.params.m, ds.iter().copied()),
            None => i_max_all_degrees(&specs, self.params.m),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaCutoff {
    pub theta: String,
    pub weight: f64,
    pub d_star: usize,
    /// `sum_{d >= d*} E(N_d)`.
    pub tail_groups: f64,
    /// `E(N_{d*-1})`, the nominal range of `i`.
    pub i_range: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub h_m: f64,
    pub i_max: f64,
    pub psi: f64,
    pub cutoffs: Vec<ThetaCutoff>,
    pub i_star: u64,
    /// Set when `i*` exceeds `E(N_{d*-1})` for some class.
    pub i_star_exceeds_range: bool,
    pub q_bar_bound: f64,
    pub p_e_bound: f64,
    pub c_prime: f64,
}

impl BoundResult {
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "bound=theorem2");
        let _ = writeln!(s, "constants=unspecified");
        let _ = writeln!(s, "c_prime={}", self.c_prime);
        let _ = writeln!(s, "H_M={}", self.h_m);
        let _ = writeln!(s, "i_max={}", self.i_max);
        let _ = writeln!(s, "psi={}", self.psi);
        for c in &self.cutoffs {
            let t = &c.theta;
            let _ = writeln!(s, "weight[{t}]={}", c.weight);
            let _ = writeln!(s, "d_star[{t}]={}", c.d_star);
            let _ = writeln!(s, "tail_groups[{t}]={}", c.tail_groups);
            let _ = writeln!(s, "i_range[{t}]={}", c.i_range);
        }
        let _ = writeln!(s, "i_star={}", self.i_star);
        let _ = writeln!(s, "i_star_exceeds_range={}", self.i_star_exceeds_range);
        let _ = writeln!(s, "q_bar_bound={}", self.q_bar_bound);
        let _ = writeln!(s, "p_e_bound={}", self.p_e_bound);
        s
    }
}

/// Per-class information mass `w_d = E(N_d) I_{d,theta}` for `d` in `0..=m`.
fn information_mass(inputs: &BoundInputs, channel: &ChannelSpec) -> Result<Vec<f64>, BoundError> {
    let m = inputs.params.m;
    let mut w = vec![0.0; m + 1];
    for (d, slot) in w.iter_mut().enumerate().skip(1) {
        let count = inputs.group_count(d);
        if count > 0.0 {
            *slot = count * bernoulli_channel_mi(d, m, channel)?;
        }
    }
    Ok(w)
}

pub fn theorem2_bounds(inputs: &BoundInputs) -> Result<BoundResult, BoundError> {
    inputs.validate()?;
    let m = inputs.params.m;
    let i_max = inputs.i_max();
    let psi = psi(inputs.entropy_of_victim, inputs.epsilon, i_max);
    let cp = inputs.c_prime;

    struct Class {
        weight: f64,
        // sum_{d' >= d*} E(N_d') I_{d'}
        tail_info: f64,
        // I_{d*-1}
        step_info: f64,
    }

    let mut classes = Vec::new();
    let mut cutoffs = Vec::new();
    for (channel, weight) in &inputs.channels {
        if *weight == 0.0 {
            continue;
        }
        let w = information_mass(inputs, &channel.spec)?;
        // suffix[d] = sum_{d' >= d} w[d']
        let mut suffix = vec![0.0; m + 2];
        for d in (0..=m).rev() {
            suffix[d] = suffix[d + 1] + w[d];
        }
        // The condition at d sums from max(1, d - 1); it only weakens as d grows.
        let satisfied = |d: usize| psi <= cp * suffix[d.saturating_sub(1).max(1)];
        let d_star = (1..=m).rev().find(|&d| satisfied(d)).ok_or(BoundError::Infeasible {
            psi,
            available: cp * suffix[1],
        })?;
        let step_info = if d_star >= 2 {
            bernoulli_channel_mi(d_star - 1, m, &channel.spec)?
        } else {
            0.0
        };
        let tail_groups: f64 = (d_star..=m).map(|d| inputs.group_count(d)).sum();
        cutoffs.push(ThetaCutoff {
            theta: channel.theta.clone(),
            weight: *weight,
            d_star,
            tail_groups,
            i_range: inputs.group_count(d_star - 1),
        });
        classes.push(Class {
            weight: *weight,
            tail_info: suffix[d_star],
            step_info,
        });
    }

    let base: f64 = classes.iter().map(|c| c.weight * c.tail_info).sum();
    let step: f64 = classes.iter().map(|c| c.weight * c.step_info).sum();
    let holds = |i: u64| psi <= cp * (base + i as f64 * step);
    let i_star = if holds(0) {
        0
    } else if step > 0.0 {
        // Start just below the closed-form root, then walk to the exact minimum.
        let mut i = (((psi / cp - base) / step).ceil() as u64).saturating_sub(2);
        while i > 0 && holds(i - 1) {
            i -= 1;
        }
        while !holds(i) {
            i += 1;
        }
        i
    } else {
        return Err(BoundError::Infeasible {
            psi,
            available: cp * base,
        });
    };

    let i_star_exceeds_range = cutoffs.iter().any(|c| i_star as f64 > c.i_range);
    let q_bar_bound = cutoffs.iter().map(|c| c.weight * c.tail_groups).sum::<f64>() + i_star as f64;
    Ok(BoundResult {
        h_m: inputs.entropy_of_victim,
        i_max,
        psi,
        cutoffs,
        i_star,
        i_star_exceeds_range,
        q_bar_bound,
        p_e_bound: inputs.epsilon / cp,
        c_prime: cp,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorollaryBound {
    pub psi: f64,
    pub i_max: f64,
    pub d_star: usize,
    pub q_bar_bound: f64,
    pub p_e_bound: f64,
}

impl CorollaryBound {
    pub fn to_key_value(&self) -> String {
        format!(
            "bound=corollary1\nconstants=unspecified\npsi={}\ni_max={}\nd_star={}\nq_bar_bound={}\np_e_bound={}\n",
            self.psi, self.i_max, self.d_star, self.q_bar_bound, self.p_e_bound
        )
    }
}

/// Closed-form bound for a single BSC class.
pub fn corollary1_bound(
    params: &BigraphParams,
    nq: f64,
    epsilon: f64,
    c_thm1: f64,
    c_prime: f64,
    h_m: f64,
) -> Result<CorollaryBound, BoundError> {
    if !(0.0..=0.5).contains(&nq) {
        return Err(BoundError::InvalidInput(format!("nq = {nq} must lie in [0, 1/2]")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(BoundError::InvalidInput(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    if !(params.alpha > 2.0) || params.alpha.is_infinite() {
        return Err(BoundError::InvalidInput(format!("alpha = {} must be finite and exceed 2", params.alpha)));
    }
    let m = params.m;
    let i_max = i_max_all_degrees(&[ChannelSpec::bsc(nq)?], m);
    let psi = psi(h_m, epsilon, i_max);
    let a = params.alpha;
    let scale = params.n as f64 / ((a - 1.0) * partial_zeta(m, a));
    let h_nq = binary_entropy(nq)?;
    let mut d_star = None;
    for d in (3..=m).rev() {
        let gain = binary_entropy(binary_convolution(d as f64 / m as f64, nq)?)? - h_nq;
        if psi <= c_prime * c_thm1 * scale * (d as f64).powf(1.0 - a) * gain {
            d_star = Some(d);
            break;
        }
    }
    let d_star = d_star.ok_or(BoundError::Infeasible { psi, available: 0.0 })?;
    Ok(CorollaryBound {
        psi,
        i_max,
        d_star,
        q_bar_bound: c_thm1 * scale * ((d_star - 2) as f64).powf(1.0 - a),
        p_e_bound: epsilon / c_prime,
    })
}
