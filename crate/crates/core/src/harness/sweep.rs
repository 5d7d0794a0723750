//! Monte Carlo sweep over `(m, alpha, strategy)` and its text exports.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::attack::{Attack, AttackOptions, AttackResult, ChannelAssignment, QueryChannel, Strategy, VictimModel};
use crate::bigraph::{format_alpha, generate, BigraphParams, BipartiteGraph};

use super::{ExperimentConfig, HarnessError};

/// Environment variable that overrides the configured worker count.
pub const WORKERS_ENV: &str = "BIGRAPH_WORKERS";

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn mix(words: &[u64]) -> u64 {
    words.iter().fold(0, |h, &w| splitmix64(h ^ splitmix64(w)))
}

const GRAPH_TAG: u64 = 0x6772_6170_68;
const TRIAL_TAG: u64 = 0x7472_6961_6c;

/// Seed of graph `g` at grid point `(m, alpha)`. Strategies share graphs.
pub fn graph_seed(base: u64, m: usize, alpha: f64, g: usize) -> u64 {
    mix(&[GRAPH_TAG, base, m as u64, alpha.to_bits(), g as u64])
}

/// Seed of the RNG driving victim `v` on graph `g`.
pub fn trial_seed(base: u64, m: usize, alpha: f64, strategy: Strategy, g: usize, v: usize) -> u64 {
    mix(&[TRIAL_TAG, base, m as u64, alpha.to_bits(), strategy.id(), g as u64, v as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub graph: usize,
    pub draw: usize,
    pub victim: usize,
    pub queries: usize,
    pub result: AttackResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub m: usize,
    pub alpha: f64,
    pub strategy: Strategy,
    pub n: usize,
    pub mu: u64,
    pub beta: f64,
    pub nq: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub mean_q: f64,
    pub ci95_q: f64,
    /// Wrong identifications plus unresolved trials, over all trials.
    pub pe: f64,
    /// Wrong identifications.
    pub errors: usize,
    pub correct: usize,
    pub unresolved: usize,
    pub seconds: f64,
    pub records: Vec<TrialRecord>,
}

impl SweepPoint {
    fn from_records(cfg: &ExperimentConfig, params: &BigraphParams, strategy: Strategy, epsilon: f64, records: Vec<TrialRecord>) -> Self {
        let trials = records.len();
        let q: Vec<f64> = records.iter().map(|r| r.queries as f64).collect();
        let mean_q = q.iter().sum::<f64>() / trials as f64;
        let ci95_q = if trials > 1 {
            let var = q.iter().map(|x| (x - mean_q).powi(2)).sum::<f64>() / (trials - 1) as f64;
            1.96 * (var / trials as f64).sqrt()
        } else {
            0.0
        };
        let mut errors = 0;
        let mut correct = 0;
        let mut unresolved = 0;
        for r in &records {
            match r.result {
                AttackResult::Identified(u) if u == r.victim => correct += 1,
                AttackResult::Identified(_) => errors += 1,
                AttackResult::Unresolved => unresolved += 1,
            }
        }
        Self {
            m: params.m,
            alpha: params.alpha,
            strategy,
            n: params.n,
            mu: params.mu,
            beta: cfg.beta,
            nq: cfg.nq,
            epsilon,
            trials,
            mean_q,
            ci95_q,
            pe: (errors + unresolved) as f64 / trials as f64,
            errors,
            correct,
            unresolved,
            seconds: 0.0,
            records,
        }
    }

    pub fn pe_standard_error(&self) -> f64 {
        (self.pe * (1.0 - self.pe) / self.trials as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn point(&self, m: usize, alpha: f64, strategy: Strategy) -> Option<&SweepPoint> {
        self.points
            .iter()
            .find(|p| p.m == m && p.alpha.to_bits() == alpha.to_bits() && p.strategy == strategy)
    }
}

fn worker_count(cfg: &ExperimentConfig) -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&w: &usize| w > 0)
        .or(cfg.workers)
}

fn build_pool(cfg: &ExperimentConfig) -> Result<rayon::ThreadPool, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = worker_count(cfg) {
        builder = builder.num_threads(w);
    }
    builder.build().map_err(|e| HarnessError::Pool(e.to_string()))
}

pub fn grid_params(cfg: &ExperimentConfig, m: usize, alpha: f64) -> Result<BigraphParams, HarnessError> {
    Ok(BigraphParams::new(cfg.n_for(m), m, cfg.mu, alpha, graph_seed(cfg.base_seed, m, alpha, 0))?)
}

/// The `G` graphs of one grid point.
pub fn point_graphs(cfg: &ExperimentConfig, m: usize, alpha: f64) -> Result<Vec<BipartiteGraph>, HarnessError> {
    let params = grid_params(cfg, m, alpha)?;
    (0..cfg.graphs)
        .into_par_iter()
        .map(|g| Ok(generate(&params.with_seed(graph_seed(cfg.base_seed, m, alpha, g)))?))
        .collect()
}

fn channel(nq: f64) -> Result<QueryChannel, HarnessError> {
    Ok(QueryChannel::bsc(nq)?)
}

/// Runs every trial of one `(m, alpha, strategy)` point at a fixed epsilon.
pub fn run_point(
    cfg: &ExperimentConfig,
    graphs: &[BipartiteGraph],
    strategy: Strategy,
    epsilon: f64,
) -> Result<SweepPoint, HarnessError> {
    let params = *graphs
        .first()
        .ok_or_else(|| HarnessError::Pool("no graphs".into()))?
        .params();
    let m = params.m;
    let assignment = ChannelAssignment::uniform(m, channel(cfg.nq)?);
    let victims = VictimModel::uniform(m);
    let attacks = graphs
        .iter()
        .map(|g| Attack::new(g, &assignment, &victims, strategy, epsilon, AttackOptions::default()))
        .collect::<Result<Vec<_>, _>>()?;

    let records = (0..graphs.len() * cfg.victims)
        .into_par_iter()
        .map(|i| {
            let (g, v) = (i / cfg.victims, i % cfg.victims);
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.base_seed, m, params.alpha, strategy, g, v));
            let out = attacks[g].run(&mut rng)?;
            Ok(TrialRecord {
                graph: g,
                draw: v,
                victim: out.victim,
                queries: out.queries_used,
                result: out.result,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(SweepPoint::from_records(cfg, &params, strategy, epsilon, records))
}

/// Largest candidate epsilon whose empirical error rate is within `target`;
/// the smallest candidate if none is.
pub fn tune_point(
    cfg: &ExperimentConfig,
    graphs: &[BipartiteGraph],
    strategy: Strategy,
    target: f64,
) -> Result<SweepPoint, HarnessError> {
    let mut candidates = cfg.tune_candidates.clone();
    candidates.sort_by(|a, b| b.total_cmp(a));
    candidates.dedup();
    let mut last = None;
    for eps in candidates {
        let point = run_point(cfg, graphs, strategy, eps)?;
        if point.pe <= target {
            return Ok(point);
        }
        last = Some(point);
    }
    Ok(last.expect("validated config has candidates"))
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult, HarnessError> {
    run_sweep_with(cfg, |_| Ok(()))
}

/// Like [`run_sweep`], calling `on_point` as each point finishes so callers
/// can flush partial results.
pub fn run_sweep_with<F>(cfg: &ExperimentConfig, mut on_point: F) -> Result<SweepResult, HarnessError>
where
    F: FnMut(&SweepPoint) -> Result<(), HarnessError>,
{
    cfg.validate()?;
    let pool = build_pool(cfg)?;
    let mut result = SweepResult::default();
    for &m in &cfg.m_values {
        for &alpha in &cfg.alphas {
            let graphs = pool.install(|| point_graphs(cfg, m, alpha))?;
            for &strategy in &cfg.strategies {
                let start = Instant::now();
                let mut point = pool.install(|| match cfg.tune_target_pe {
                    Some(target) if !cfg.has_override(m, alpha, strategy) => tune_point(cfg, &graphs, strategy, target),
                    _ => run_point(cfg, &graphs, strategy, cfg.epsilon_for(m, alpha, strategy)),
                })?;
                if cfg.timing {
                    point.seconds = start.elapsed().as_secs_f64();
                }
                on_point(&point)?;
                result.points.push(point);
            }
        }
    }
    Ok(result)
}

pub const CSV_HEADER: &str = "m,alpha,strategy,n,mu,beta,nq,epsilon,trials,mean_Q,ci95_Q,pe,errors,unresolved,seconds";

pub fn write_csv_row<W: Write>(p: &SweepPoint, sink: &mut W) -> std::io::Result<()> {
    writeln!(
        sink,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        p.m,
        format_alpha(p.alpha),
        p.strategy.name(),
        p.n,
        p.mu,
        p.beta,
        p.nq,
        p.epsilon,
        p.trials,
        p.mean_q,
        p.ci95_q,
        p.pe,
        p.errors,
        p.unresolved,
        p.seconds
    )
}

pub fn export_csv<W: Write>(result: &SweepResult, sink: &mut W) -> std::io::Result<()> {
    writeln!(sink, "{CSV_HEADER}")?;
    for p in &result.points {
        write_csv_row(p, sink)?;
    }
    Ok(())
}

/// One `m mean_Q` block per `(alpha, strategy)` series.
pub fn export_plot_data<W: Write>(result: &SweepResult, sink: &mut W) -> std::io::Result<()> {
    let mut series: Vec<(u64, Strategy)> = Vec::new();
    for p in &result.points {
        let key = (p.alpha.to_bits(), p.strategy);
        if !series.contains(&key) {
            series.push(key);
        }
    }
    for (i, &(alpha_bits, strategy)) in series.iter().enumerate() {
        let alpha = f64::from_bits(alpha_bits);
        let mut pts: Vec<&SweepPoint> = result
            .points
            .iter()
            .filter(|p| p.alpha.to_bits() == alpha_bits && p.strategy == strategy)
            .collect();
        pts.sort_by_key(|p| p.m);
        if i > 0 {
            writeln!(sink)?;
        }
        let ms: Vec<String> = pts.iter().map(|p| p.m.to_string()).collect();
        writeln!(sink, "# series m={} alpha={} strategy={}", ms.join(","), format_alpha(alpha), strategy.name())?;
        for p in pts {
            writeln!(sink, "{} {}", p.m, p.mean_q)?;
        }
    }
    Ok(())
}

pub const ACCOUNTING_NOTE: &str = "unresolved trials count as errors in pe and contribute n queries to mean_Q";
