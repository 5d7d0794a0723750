//! Popularity-based bipartite graph generation.
//!
//! A graph has `m` users (left vertices) and `n` groups (right vertices).
//! Each group starts with an integer popularity drawn from a truncated power
//! law on `1..=m`. Generation then adds `mu * n` edges one at a time: a group
//! is drawn with probability proportional to its current popularity, a user
//! is drawn uniformly among that group's non-members, and the group's
//! popularity grows by one.
//!
//! Indices are 0-based in the library API. The edge-list file format uses
//! 1-based indices.

mod io;
mod sumtree;

pub use io::{format_alpha, load_edge_list, parse_alpha, save_edge_list};
pub use sumtree::PrefixSumTree;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::numerics::partial_zeta;

/// Sentinel for the `alpha -> inf` limit, where every initial popularity is 1.
pub const INFINITE_ALPHA: f64 = f64::INFINITY;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("generation stalled after {placed} of {budget} edges: every group is saturated")]
    Stalled { placed: u64, budget: u64 },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("inconsistent edge list: {0}")]
    Consistency(String),
    #[error("user index {user} out of range for m = {m}")]
    UserOutOfRange { user: usize, m: usize },
    #[error("group index {group} out of range for n = {n}")]
    GroupOutOfRange { group: usize, n: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BigraphParams {
    /// Number of groups.
    pub n: usize,
    /// Number of users.
    pub m: usize,
    /// Edges per group; the edge budget is `mu * n`.
    pub mu: u64,
    /// Power-law exponent, `> 2`, or [`INFINITE_ALPHA`].
    pub alpha: f64,
    pub seed: u64,
}

impl BigraphParams {
    pub fn new(n: usize, m: usize, mu: u64, alpha: f64, seed: u64) -> Result<Self, GraphError> {
        let p = Self {
            n,
            m,
            mu,
            alpha,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if self.n == 0 || self.m == 0 {
            return Err(GraphError::InvalidParams(format!(
                "n and m must be positive (n = {}, m = {})",
                self.n, self.m
            )));
        }
        if self.m > u32::MAX as usize {
            return Err(GraphError::InvalidParams(format!("m = {} is too large", self.m)));
        }
        if self.mu == 0 {
            return Err(GraphError::InvalidParams("mu must be at least 1".into()));
        }
        if !(self.alpha > 2.0) {
            return Err(GraphError::InvalidParams(format!(
                "alpha = {} must exceed 2 (or be inf)",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn edge_budget(&self) -> u64 {
        self.mu * self.n as u64
    }

    /// Users per group, `m / n`.
    pub fn beta(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    pub fn is_infinite_alpha(&self) -> bool {
        self.alpha == INFINITE_ALPHA
    }

    /// Same model, different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }

    /// True when `other` describes the same model up to the seed.
    pub fn same_model(&self, other: &BigraphParams) -> bool {
        self.n == other.n
            && self.m == other.m
            && self.mu == other.mu
            && self.alpha.to_bits() == other.alpha.to_bits()
    }
}

/// Law of a single initial popularity, `P(k) = k^-alpha / zeta(m, alpha)` on `1..=m`.
#[derive(Debug, Clone)]
pub struct InitialPopularityLaw {
    // Unnormalized cumulative masses; empty for the all-ones law.
    cumulative: Vec<f64>,
}

impl InitialPopularityLaw {
    pub fn new(m: usize, alpha: f64) -> Self {
        if alpha == INFINITE_ALPHA {
            return Self {
                cumulative: Vec::new(),
            };
        }
        let mut acc = 0.0;
        let cumulative = (1..=m)
            .map(|k| {
                acc += (k as f64).powf(-alpha);
                acc
            })
            .collect();
        Self { cumulative }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        if self.cumulative.is_empty() {
            return if k == 1 { 1.0 } else { 0.0 };
        }
        let k = k as usize;
        if k == 0 || k > self.cumulative.len() {
            return 0.0;
        }
        let lo = if k == 1 { 0.0 } else { self.cumulative[k - 2] };
        (self.cumulative[k - 1] - lo) / self.cumulative[self.cumulative.len() - 1]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let Some(&total) = self.cumulative.last() else {
            return 1;
        };
        let u = rng.gen::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        (idx.min(self.cumulative.len() - 1) + 1) as u64
    }
}

/// Draws `n` independent initial popularities.
pub fn sample_initial_popularities<R: Rng + ?Sized>(params: &BigraphParams, rng: &mut R) -> Vec<u64> {
    let law = InitialPopularityLaw::new(params.m, params.alpha);
    (0..params.n).map(|_| law.sample(rng)).collect()
}

/// Expected initial popularity of one group, `zeta(m, alpha-1) / zeta(m, alpha)`.
pub fn mean_initial_popularity(m: usize, alpha: f64) -> f64 {
    if alpha == INFINITE_ALPHA {
        1.0
    } else {
        partial_zeta(m, alpha - 1.0) / partial_zeta(m, alpha)
    }
}

/// Popularity weights during generation.
///
/// `popularity[j]` always equals the initial popularity plus the current
/// degree. Groups that have every user as a member are given zero weight in
/// the draw tree, which is the same law as redrawing whenever a full group is
/// picked.
#[derive(Debug, Clone)]
pub struct PopularityState {
    popularity: Vec<u64>,
    draw: PrefixSumTree,
}

impl PopularityState {
    pub fn new(initial: &[u64]) -> Self {
        Self {
            popularity: initial.to_vec(),
            draw: PrefixSumTree::new(initial),
        }
    }

    pub fn popularity(&self) -> &[u64] {
        &self.popularity
    }

    pub fn total(&self) -> u64 {
        self.popularity.iter().sum()
    }

    /// Draw weight, excluding saturated groups.
    pub fn drawable_total(&self) -> u64 {
        self.draw.total()
    }

    pub fn draw_group<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        let total = self.draw.total();
        if total == 0 {
            return None;
        }
        Some(self.draw.find(rng.gen_range(0..total)))
    }

    pub fn increment(&mut self, group: usize) {
        self.popularity[group] += 1;
        self.draw.add(group, 1);
    }

    pub fn saturate(&mut self, group: usize) {
        self.draw.set(group, 0);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    params: BigraphParams,
    members: Vec<Vec<u32>>,
    initial_popularity: Vec<u64>,
    final_popularity: Vec<u64>,
}

impl BipartiteGraph {
    /// Builds a graph from explicit member lists. Lists are sorted here;
    /// duplicates and out-of-range users are rejected.
    pub fn from_parts(
        params: BigraphParams,
        mut members: Vec<Vec<u32>>,
        initial_popularity: Vec<u64>,
    ) -> Result<Self, GraphError> {
        if members.len() != params.n || initial_popularity.len() != params.n {
            return Err(GraphError::Consistency(format!(
                "expected {} groups, got {} member lists and {} popularities",
                params.n,
                members.len(),
                initial_popularity.len()
            )));
        }
        for (j, list) in members.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(GraphError::Consistency(format!(
                    "duplicate edge ({}, {})",
                    w[0] + 1,
                    j + 1
                )));
            }
            if let Some(&last) = list.last() {
                if last as usize >= params.m {
                    return Err(GraphError::UserOutOfRange {
                        user: last as usize,
                        m: params.m,
                    });
                }
            }
        }
        let final_popularity = initial_popularity
            .iter()
            .zip(&members)
            .map(|(&t, l)| t + l.len() as u64)
            .collect();
        Ok(Self {
            params,
            members,
            initial_popularity,
            final_popularity,
        })
    }

    pub fn params(&self) -> &BigraphParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn m(&self) -> usize {
        self.params.m
    }

    /// Sorted members of group `j`.
    pub fn members(&self, group: usize) -> &[u32] {
        &self.members[group]
    }

    pub fn degree(&self, group: usize) -> usize {
        self.members[group].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    pub fn edge_count(&self) -> u64 {
        self.members.iter().map(|l| l.len() as u64).sum()
    }

    pub fn initial_popularity(&self) -> &[u64] {
        &self.initial_popularity
    }

    /// Popularities after the last step. For generated graphs this is the
    /// running counter kept during generation.
    pub fn final_popularity(&self) -> &[u64] {
        &self.final_popularity
    }

    pub fn contains(&self, user: usize, group: usize) -> bool {
        self.members[group].binary_search(&(user as u32)).is_ok()
    }

    pub fn fingerprint(&self, user: usize) -> Result<Fingerprint, GraphError> {
        if user >= self.params.m {
            return Err(GraphError::UserOutOfRange {
                user,
                m: self.params.m,
            });
        }
        let member_groups = (0..self.params.n)
            .filter(|&j| self.contains(user, j))
            .map(|j| j as u32)
            .collect();
        Ok(Fingerprint {
            owner: user,
            member_groups,
        })
    }

    /// Fingerprint weights (membership counts) of every user.
    pub fn fingerprint_weights(&self) -> Vec<u32> {
        let mut weights = vec![0u32; self.params.m];
        for list in &self.members {
            for &u in list {
                weights[u as usize] += 1;
            }
        }
        weights
    }

    /// All fingerprints, built in one pass over the member lists.
    pub fn fingerprints(&self) -> Vec<Fingerprint> {
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); self.params.m];
        for (j, list) in self.members.iter().enumerate() {
            for &u in list {
                rows[u as usize].push(j as u32);
            }
        }
        rows.into_iter()
            .enumerate()
            .map(|(owner, member_groups)| Fingerprint {
                owner,
                member_groups,
            })
            .collect()
    }
}

/// Sparse membership row of one user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprint {
    pub owner: usize,
    /// Sorted group indices the owner belongs to.
    pub member_groups: Vec<u32>,
}

impl Fingerprint {
    pub fn weight(&self) -> usize {
        self.member_groups.len()
    }

    pub fn bit(&self, group: usize) -> bool {
        self.member_groups.binary_search(&(group as u32)).is_ok()
    }
}

/// Generates a graph from `params.seed`.
pub fn generate(params: &BigraphParams) -> Result<BipartiteGraph, GraphError> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    generate_with_rng(params, &mut rng)
}

pub fn generate_with_rng<R: Rng + ?Sized>(
    params: &BigraphParams,
    rng: &mut R,
) -> Result<BipartiteGraph, GraphError> {
    params.validate()?;
    let initial = sample_initial_popularities(params, rng);
    let (members, state) = attach_edges(params, &initial, rng)?;
    Ok(BipartiteGraph {
        params: *params,
        members,
        initial_popularity: initial,
        final_popularity: state.popularity,
    })
}

fn attach_edges<R: Rng + ?Sized>(
    params: &BigraphParams,
    initial: &[u64],
    rng: &mut R,
) -> Result<(Vec<Vec<u32>>, PopularityState), GraphError> {
    let m = params.m;
    let budget = params.edge_budget();
    let mut state = PopularityState::new(initial);
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); params.n];
    for placed in 0..budget {
        let Some(j) = state.draw_group(rng) else {
            return Err(GraphError::Stalled { placed, budget });
        };
        let list = &mut members[j];
        let (pos, user) = pick_non_member(list, m, rng);
        list.insert(pos, user);
        state.increment(j);
        if list.len() == m {
            state.saturate(j);
        }
    }
    Ok((members, state))
}

/// Uniform draw from `0..m` minus the sorted `members`, returned with its
/// insertion position.
///
/// The `r`-th non-member is located by binary search: below `members[i]`
/// there are exactly `members[i] - i` non-members.
fn pick_non_member<R: Rng + ?Sized>(members: &[u32], m: usize, rng: &mut R) -> (usize, u32) {
    let free = m - members.len();
    let r = rng.gen_range(0..free) as u32;
    let (mut lo, mut hi) = (0usize, members.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if members[mid] - mid as u32 <= r {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    (lo, r + lo as u32)
}
