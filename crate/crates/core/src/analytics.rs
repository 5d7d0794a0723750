//! Empirical checks of the distributional behaviour of generated graphs:
//! pooled degree pmf, power-law slope, popularity-sum moments, degree product
//! moments, fingerprint sparsity and the fingerprint memorylessness ratio.

use std::fmt::Write as _;
use std::io::Write;

use rand::Rng;
use thiserror::Error;

use crate::bigraph::{BigraphParams, BipartiteGraph, InitialPopularityLaw};
use crate::numerics::{binary_kl, partial_zeta, DomainError};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("at least one graph is required")]
    NoGraphs,
    #[error("graphs were generated with different parameters")]
    ParamMismatch,
    #[error("power-law fit needs at least 3 positive masses in [{k_min}, {k_max}], found {found}")]
    InsufficientSupport { k_min: usize, k_max: usize, found: usize },
    #[error("psi = {psi} outside the admissible interval (0, {upper})")]
    PsiOutOfRange { psi: f64, upper: f64 },
    #[error("marginal frequency of bit {position} is zero")]
    EmptySupport { position: usize },
    #[error("invalid group subset: {0}")]
    InvalidSubset(String),
    #[error("draw_count must be at least 2")]
    TooFewDraws,
    #[error(transparent)]
    Domain(#[from] DomainError),
}

fn check_same_model(graphs: &[BipartiteGraph]) -> Result<&BigraphParams, AnalyticsError> {
    let first = graphs.first().ok_or(AnalyticsError::NoGraphs)?.params();
    if graphs.iter().any(|g| !g.params().same_model(first)) {
        return Err(AnalyticsError::ParamMismatch);
    }
    Ok(first)
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Pooled degree distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreePmf {
    /// Degree values `0..=max observed degree`.
    pub support: Vec<usize>,
    pub mass: Vec<f64>,
    /// Binomial standard error of each mass.
    pub stderr: Vec<f64>,
    pub sample_count: u64,
}

impl DegreePmf {
    pub fn from_counts(counts: &[u64]) -> Self {
        let total: u64 = counts.iter().sum();
        let n = total as f64;
        let mass: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        let stderr = mass.iter().map(|&p| (p * (1.0 - p) / n).sqrt()).collect();
        Self {
            support: (0..counts.len()).collect(),
            mass,
            stderr,
            sample_count: total,
        }
    }

    /// Builds a pmf from exact masses, e.g. a synthetic reference.
    pub fn from_masses(support: Vec<usize>, mass: Vec<f64>) -> Self {
        let stderr = vec![0.0; mass.len()];
        Self {
            support,
            mass,
            stderr,
            sample_count: 0,
        }
    }

    pub fn mass_at(&self, k: usize) -> f64 {
        self.support
            .iter()
            .position(|&s| s == k)
            .map_or(0.0, |i| self.mass[i])
    }

    /// Total-variation distance to `reference(k)`, summed over `k` up to
    /// `max(support) + tail` so that reference mass beyond the observed
    /// support is counted.
    pub fn tv_distance<F: Fn(usize) -> f64>(&self, reference: F, tail: usize) -> f64 {
        let max_k = self.support.iter().copied().max().unwrap_or(0) + tail;
        let mut seen_ref = 0.0;
        let mut sum = 0.0;
        for k in 0..=max_k {
            let r = reference(k);
            seen_ref += r;
            sum += (self.mass_at(k) - r).abs();
        }
        // Reference mass not enumerated above.
        sum += (1.0 - seen_ref).max(0.0);
        0.5 * sum
    }

    pub fn write_csv<W: Write>(&self, sink: &mut W) -> std::io::Result<()> {
        writeln!(sink, "k,mass,stderr")?;
        for ((k, m), s) in self.support.iter().zip(&self.mass).zip(&self.stderr) {
            writeln!(sink, "{k},{m},{s}")?;
        }
        Ok(())
    }
}

/// Pools the group degrees of every graph into one histogram.
pub fn empirical_degree_pmf(graphs: &[BipartiteGraph]) -> Result<DegreePmf, AnalyticsError> {
    check_same_model(graphs)?;
    let mut counts: Vec<u64> = Vec::new();
    for g in graphs {
        for j in 0..g.n() {
            let d = g.degree(j);
            if d >= counts.len() {
                counts.resize(d + 1, 0);
            }
            counts[d] += 1;
        }
    }
    Ok(DegreePmf::from_counts(&counts))
}

/// Limit degree law when every initial popularity is 1:
/// `(mu / (1 + mu))^k / (1 + mu)`.
pub fn geometric_degree_pmf(mu: f64, k: usize) -> f64 {
    (mu / (1.0 + mu)).powi(k as i32) / (1.0 + mu)
}

/// Default fit window `[2, floor(n^(1/3))]`.
pub fn default_fit_window(n: usize) -> (usize, usize) {
    let mut k_max = (n as f64).cbrt().floor() as usize;
    // cbrt of a perfect cube can land one ulp low.
    if (k_max + 1).pow(3) <= n {
        k_max += 1;
    }
    (2, k_max)
}

/// Least-squares slope of `ln mass` against `ln k` on `[k_min, k_max]`,
/// returned as the exponent estimate `-slope`. Zero masses are skipped.
pub fn fit_powerlaw_exponent(pmf: &DegreePmf, k_min: usize, k_max: usize) -> Result<f64, AnalyticsError> {
    let points: Vec<(f64, f64)> = pmf
        .support
        .iter()
        .zip(&pmf.mass)
        .filter(|(&k, &m)| k >= k_min.max(1) && k <= k_max && m > 0.0)
        .map(|(&k, &m)| ((k as f64).ln(), m.ln()))
        .collect();
    if points.len() < 3 {
        return Err(AnalyticsError::InsufficientSupport {
            k_min,
            k_max,
            found: points.len(),
        });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(-sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopularitySumStats {
    pub mean: f64,
    pub variance: f64,
    pub replications: usize,
}

impl PopularitySumStats {
    pub fn standard_error(&self) -> f64 {
        (self.variance / self.replications as f64).sqrt()
    }
}

/// `E(Y) = n zeta(m, alpha-1) / zeta(m, alpha)` for `Y = sum_j tau_j(0)`.
pub fn expected_popularity_sum(params: &BigraphParams) -> f64 {
    if params.is_infinite_alpha() {
        return params.n as f64;
    }
    params.n as f64 * partial_zeta(params.m, params.alpha - 1.0) / partial_zeta(params.m, params.alpha)
}

/// Upper bound `n zeta(m, alpha-2) / zeta(m, alpha)` on `Var(Y)`.
pub fn popularity_sum_variance_bound(params: &BigraphParams) -> f64 {
    if params.is_infinite_alpha() {
        return 0.0;
    }
    params.n as f64 * partial_zeta(params.m, params.alpha - 2.0) / partial_zeta(params.m, params.alpha)
}

/// Sample mean and variance of the total initial popularity over
/// `draw_count` independent replications.
pub fn popularity_sum_stats<R: Rng + ?Sized>(
    params: &BigraphParams,
    draw_count: usize,
    rng: &mut R,
) -> Result<PopularitySumStats, AnalyticsError> {
    if draw_count < 2 {
        return Err(AnalyticsError::TooFewDraws);
    }
    let law = InitialPopularityLaw::new(params.m, params.alpha);
    let sums: Vec<f64> = (0..draw_count)
        .map(|_| (0..params.n).map(|_| law.sample(rng)).sum::<u64>() as f64)
        .collect();
    let r = draw_count as f64;
    let mean = sums.iter().sum::<f64>() / r;
    let variance = sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (r - 1.0);
    Ok(PopularitySumStats {
        mean,
        variance,
        replications: draw_count,
    })
}

/// Elementary symmetric polynomials `e_0..=e_order` of `values`.
fn elementary_symmetric(values: &[f64], order: usize) -> Vec<f64> {
    let mut e = vec![0.0; order + 1];
    e[0] = 1.0;
    for &v in values {
        for k in (1..=order).rev() {
            e[k] += e[k - 1] * v;
        }
    }
    e
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Mean of `D_{j1} ... D_{jk}` over all `k`-subsets of distinct groups.
#[cfg(test)]
fn product_u_statistic(degrees: &[f64], order: usize) -> f64 {
    elementary_symmetric(degrees, order)[order] / binomial(degrees.len(), order)
}

/// Leave-one-group-out jackknife standard error of the product U-statistic.
fn product_jackknife_se(degrees: &[f64], order: usize) -> f64 {
    let n = degrees.len();
    if n <= order {
        return f64::NAN;
    }
    let e = elementary_symmetric(degrees, order);
    let denom = binomial(n - 1, order);
    let leave_out: Vec<f64> = degrees
        .iter()
        .map(|&d| {
            // e_k without d: e_k^- = e_k - d * e_{k-1}^-.
            let mut prev = 1.0;
            let mut cur = 1.0;
            for ek in e.iter().take(order + 1).skip(1) {
                cur = ek - d * prev;
                prev = cur;
            }
            cur / denom
        })
        .collect();
    let mean = leave_out.iter().sum::<f64>() / n as f64;
    let ss: f64 = leave_out.iter().map(|v| (v - mean).powi(2)).sum();
    ((n as f64 - 1.0) / n as f64 * ss).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphMoments {
    pub mean_degree: f64,
    pub mean_square_degree: f64,
    /// Mean of `D_i D_j` over all pairs `i != j`.
    pub pair_product_mean: f64,
    /// `product_means[k - 1]` is the mean product over `k`-subsets.
    pub product_means: Vec<f64>,
}

/// Degree moment estimates.
///
/// Product moments use the all-subsets U-statistic inside each graph, which
/// is unbiased for `E(D_1 ... D_k)` because groups are exchangeable.
/// Standard errors of products come from the spread across graphs, or from
/// a leave-one-group-out jackknife when only one graph is supplied. The
/// first two moments use the group-level standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub graphs: usize,
    pub mean_degree: f64,
    pub mean_degree_se: f64,
    pub mean_square_degree: f64,
    pub mean_square_degree_se: f64,
    pub pair_product_mean: f64,
    pub pair_product_se: f64,
    /// `(order, mean, standard error)` for orders `1..=max_order`.
    pub product_means: Vec<(usize, f64, f64)>,
    pub per_graph: Vec<GraphMoments>,
}

impl MomentReport {
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "graphs={}", self.graphs);
        let _ = writeln!(s, "mean_degree={}", self.mean_degree);
        let _ = writeln!(s, "mean_degree_se={}", self.mean_degree_se);
        let _ = writeln!(s, "mean_square_degree={}", self.mean_square_degree);
        let _ = writeln!(s, "mean_square_degree_se={}", self.mean_square_degree_se);
        let _ = writeln!(s, "pair_product_mean={}", self.pair_product_mean);
        let _ = writeln!(s, "pair_product_se={}", self.pair_product_se);
        for (k, m, se) in &self.product_means {
            let _ = writeln!(s, "product_mean_{k}={m}");
            let _ = writeln!(s, "product_mean_{k}_se={se}");
        }
        s
    }
}

pub fn degree_moment_stats(graphs: &[BipartiteGraph], max_order: usize) -> Result<MomentReport, AnalyticsError> {
    let params = check_same_model(graphs)?;
    let n = params.n;
    let max_order = max_order.max(2).min(n);
    if n < 2 {
        return Err(AnalyticsError::InvalidSubset("pair moments need n >= 2".into()));
    }

    let degree_sets: Vec<Vec<f64>> = graphs
        .iter()
        .map(|g| g.degrees().into_iter().map(|d| d as f64).collect())
        .collect();
    let per_graph: Vec<GraphMoments> = degree_sets
        .iter()
        .map(|ds| {
            let e = elementary_symmetric(ds, max_order);
            let product_means: Vec<f64> = (1..=max_order).map(|k| e[k] / binomial(n, k)).collect();
            GraphMoments {
                mean_degree: ds.iter().sum::<f64>() / n as f64,
                mean_square_degree: ds.iter().map(|d| d * d).sum::<f64>() / n as f64,
                pair_product_mean: product_means[1],
                product_means,
            }
        })
        .collect();

    let all: Vec<f64> = degree_sets.iter().flatten().copied().collect();
    let (mean_degree, mean_degree_se) = mean_and_se(&all);
    let squares: Vec<f64> = all.iter().map(|d| d * d).collect();
    let (mean_square_degree, mean_square_degree_se) = mean_and_se(&squares);

    let product_means: Vec<(usize, f64, f64)> = (1..=max_order)
        .map(|k| {
            let vals: Vec<f64> = per_graph.iter().map(|g| g.product_means[k - 1]).collect();
            let (mean, se) = mean_and_se(&vals);
            let se = if graphs.len() >= 2 {
                se
            } else {
                product_jackknife_se(&degree_sets[0], k)
            };
            (k, mean, se)
        })
        .collect();
    let (_, pair_product_mean, pair_product_se) = product_means[1];

    Ok(MomentReport {
        graphs: graphs.len(),
        mean_degree,
        mean_degree_se,
        mean_square_degree,
        mean_square_degree_se,
        pair_product_mean,
        pair_product_se,
        product_means,
        per_graph,
    })
}

/// `lambda(m, alpha) = mu + zeta(m, alpha - 1)`.
pub fn sparsity_lambda(params: &BigraphParams) -> f64 {
    params.mu as f64 + partial_zeta(params.m, params.alpha - 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsityReport {
    pub psi: f64,
    pub lambda: f64,
    /// Weight threshold `lambda (1 + psi) / beta`.
    pub threshold: f64,
    /// Fraction of users whose fingerprint weight is at least `threshold`.
    pub empirical_tail: f64,
    /// `c * 2^(-n D(lambda(1+psi)/m || lambda/m))` with `c = 1`.
    pub chernoff_bound: f64,
    pub chernoff_constant: f64,
    pub average_weight: f64,
    pub max_weight: u32,
}

impl SparsityReport {
    pub fn to_key_value(&self) -> String {
        format!(
            "psi={}\nlambda={}\nthreshold={}\nempirical_tail={}\nchernoff_bound={}\nchernoff_constant={}\naverage_weight={}\nmax_weight={}\n",
            self.psi,
            self.lambda,
            self.threshold,
            self.empirical_tail,
            self.chernoff_bound,
            self.chernoff_constant,
            self.average_weight,
            self.max_weight
        )
    }
}

/// Upper end of the admissible slack interval, `m / lambda - 1`.
pub fn max_sparsity_psi(params: &BigraphParams) -> f64 {
    params.m as f64 / sparsity_lambda(params) - 1.0
}

/// Chernoff-type tail bound on the fingerprint weight, with unit constant.
pub fn sparsity_chernoff_bound(params: &BigraphParams, psi: f64) -> Result<f64, AnalyticsError> {
    let upper = max_sparsity_psi(params);
    if !(psi > 0.0 && psi < upper) {
        return Err(AnalyticsError::PsiOutOfRange { psi, upper });
    }
    let lambda = sparsity_lambda(params);
    let m = params.m as f64;
    let divergence = binary_kl(lambda * (1.0 + psi) / m, lambda / m)?;
    Ok(2f64.powf(-(params.n as f64) * divergence))
}

pub fn fingerprint_sparsity(graph: &BipartiteGraph, psi: f64) -> Result<SparsityReport, AnalyticsError> {
    let params = graph.params();
    let chernoff_bound = sparsity_chernoff_bound(params, psi)?;
    let lambda = sparsity_lambda(params);
    let threshold = lambda * (1.0 + psi) / params.beta();
    let weights = graph.fingerprint_weights();
    let above = weights.iter().filter(|&&w| w as f64 >= threshold).count();
    let total: u64 = weights.iter().map(|&w| w as u64).sum();
    Ok(SparsityReport {
        psi,
        lambda,
        threshold,
        empirical_tail: above as f64 / weights.len() as f64,
        chernoff_bound,
        chernoff_constant: 1.0,
        average_weight: total as f64 / weights.len() as f64,
        max_weight: weights.iter().copied().max().unwrap_or(0),
    })
}

/// Ratio of the empirical frequency of `pattern` on `groups` to the product
/// of the per-group marginal frequencies, pooled over users and graphs.
pub fn memorylessness_ratio(
    graphs: &[BipartiteGraph],
    groups: &[usize],
    pattern: &[bool],
) -> Result<f64, AnalyticsError> {
    let params = check_same_model(graphs)?;
    if groups.is_empty() || groups.len() > 3 {
        return Err(AnalyticsError::InvalidSubset(format!(
            "subset size {} not in 1..=3",
            groups.len()
        )));
    }
    if groups.len() != pattern.len() {
        return Err(AnalyticsError::InvalidSubset("pattern length differs from subset size".into()));
    }
    if let Some(&j) = groups.iter().find(|&&j| j >= params.n) {
        return Err(AnalyticsError::InvalidSubset(format!("group {j} out of range")));
    }
    for (i, a) in groups.iter().enumerate() {
        if groups[i + 1..].contains(a) {
            return Err(AnalyticsError::InvalidSubset(format!("group {a} repeated")));
        }
    }

    let mut joint = 0u64;
    let mut marginal = vec![0u64; groups.len()];
    for g in graphs {
        let mut bits = vec![vec![false; params.m]; groups.len()];
        for (k, &j) in groups.iter().enumerate() {
            for &u in g.members(j) {
                bits[k][u as usize] = true;
            }
        }
        for u in 0..params.m {
            let mut all = true;
            for k in 0..groups.len() {
                if bits[k][u] == pattern[k] {
                    marginal[k] += 1;
                } else {
                    all = false;
                }
            }
            if all {
                joint += 1;
            }
        }
    }

    let samples = (params.m * graphs.len()) as f64;
    let mut product = 1.0;
    for (position, &c) in marginal.iter().enumerate() {
        if c == 0 {
            return Err(AnalyticsError::EmptySupport { position });
        }
        product *= c as f64 / samples;
    }
    Ok((joint as f64 / samples) / product)
}
