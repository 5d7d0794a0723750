//! Sweep configuration file.
//!
//! ```text
//! mu = 100
//! beta = 0.1
//! nq = 0.05
//! epsilon = 0.01
//! graphs = 5
//! victims = 100
//! seed = 1
//!
//! [grid]
//! m = 1000, 2000
//! alpha = 3, 10
//! strategy = its, aits
//!
//! [epsilon]
//! 1000/3/aits = 0.05
//! ```
//!
//! `[epsilon]` keys are `m/alpha` or `m/alpha/strategy`.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::attack::Strategy;
use crate::bigraph::{format_alpha, parse_alpha};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonOverride {
    pub m: usize,
    pub alpha: f64,
    pub strategy: Option<Strategy>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub m_values: Vec<usize>,
    pub alphas: Vec<f64>,
    pub strategies: Vec<Strategy>,
    pub mu: u64,
    pub beta: f64,
    pub nq: f64,
    pub epsilon: f64,
    pub graphs: usize,
    pub victims: usize,
    pub base_seed: u64,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    /// When false the `seconds` column is written as 0 so reruns are byte-identical.
    pub timing: bool,
    /// Tune epsilon per point: the largest candidate whose empirical error
    /// rate is at most this target.
    pub tune_target_pe: Option<f64>,
    pub tune_candidates: Vec<f64>,
    pub epsilon_overrides: Vec<EpsilonOverride>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    /// Small grid for quick runs: 100 trials per point.
    pub fn desk() -> Self {
        Self {
            m_values: vec![1000, 2000],
            alphas: vec![3.0, 10.0],
            strategies: vec![Strategy::Its, Strategy::Aits],
            mu: 100,
            beta: 0.1,
            nq: 0.05,
            epsilon: 0.01,
            graphs: 5,
            victims: 20,
            base_seed: 1,
            out_dir: None,
            workers: None,
            timing: true,
            tune_target_pe: None,
            tune_candidates: vec![0.5, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001],
            epsilon_overrides: Vec::new(),
        }
    }

    /// Full grid: six user counts, three exponents, 5 graphs x 100 victims.
    pub fn full() -> Self {
        Self {
            m_values: vec![1000, 2000, 4000, 6000, 8000, 10000],
            alphas: vec![3.0, 5.0, 10.0],
            graphs: 5,
            victims: 100,
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "desk" => Some(Self::desk()),
            "full" => Some(Self::full()),
            _ => None,
        }
    }

    pub fn n_for(&self, m: usize) -> usize {
        ((m as f64 / self.beta).round() as usize).max(1)
    }

    pub fn trials_per_point(&self) -> usize {
        self.graphs * self.victims
    }

    pub fn epsilon_for(&self, m: usize, alpha: f64, strategy: Strategy) -> f64 {
        let matches = |o: &&EpsilonOverride| o.m == m && o.alpha.to_bits() == alpha.to_bits();
        self.epsilon_overrides
            .iter()
            .filter(matches)
            .find(|o| o.strategy == Some(strategy))
            .or_else(|| self.epsilon_overrides.iter().filter(matches).find(|o| o.strategy.is_none()))
            .map_or(self.epsilon, |o| o.epsilon)
    }

    pub fn has_override(&self, m: usize, alpha: f64, strategy: Strategy) -> bool {
        self.epsilon_overrides.iter().any(|o| {
            o.m == m && o.alpha.to_bits() == alpha.to_bits() && o.strategy.map_or(true, |s| s == strategy)
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config { line: 0, msg });
        if self.m_values.is_empty() || self.alphas.is_empty() || self.strategies.is_empty() {
            return bad("grid needs at least one m, alpha and strategy".into());
        }
        if self.graphs == 0 || self.victims == 0 {
            return bad("graphs and victims must be at least 1".into());
        }
        if self.mu == 0 {
            return bad("mu must be at least 1".into());
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta = {} must be positive", self.beta));
        }
        if !(0.0..=1.0).contains(&self.nq) {
            return bad(format!("nq = {} is not a probability", self.nq));
        }
        let eps_ok = |e: f64| e > 0.0 && e < 1.0;
        if !eps_ok(self.epsilon)
            || self.epsilon_overrides.iter().any(|o| !eps_ok(o.epsilon))
            || self.tune_candidates.iter().any(|&e| !eps_ok(e))
        {
            return bad("every epsilon must lie in (0, 1)".into());
        }
        if let Some(t) = self.tune_target_pe {
            if !(0.0..=1.0).contains(&t) {
                return bad(format!("tune_target_pe = {t} is not a probability"));
            }
            if self.tune_candidates.is_empty() {
                return bad("tuning needs at least one candidate".into());
            }
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        for &m in &self.m_values {
            if m == 0 {
                return bad("m must be positive".into());
            }
            if self.mu as usize * self.n_for(m) > self.n_for(m) * m {
                return bad(format!("mu = {} exceeds m = {m}", self.mu));
            }
        }
        for &a in &self.alphas {
            if !(a > 2.0) {
                return bad(format!("alpha = {a} must exceed 2"));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::desk();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |msg: String| HarnessError::Config { line, msg };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                if !matches!(section.as_str(), "grid" | "epsilon") {
                    return Err(err(format!("unknown section [{section}]")));
                }
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, found `{content}`")))?;
            match section.as_str() {
                "" => cfg.set_scalar(key, value).map_err(err)?,
                "grid" => cfg.set_grid(key, value).map_err(err)?,
                "epsilon" => {
                    let o = parse_override(key, value).map_err(err)?;
                    cfg.epsilon_overrides.push(o);
                }
                _ => unreachable!(),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set_scalar(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "mu" => self.mu = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "nq" => self.nq = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "graphs" => self.graphs = num(key, value)?,
            "victims" => self.victims = num(key, value)?,
            "seed" => self.base_seed = num(key, value)?,
            "out" => self.out_dir = Some(PathBuf::from(value)),
            "workers" => self.workers = Some(num(key, value)?),
            "timing" => self.timing = num(key, value)?,
            "tune_target_pe" => self.tune_target_pe = Some(num(key, value)?),
            "tune_candidates" => self.tune_candidates = list(key, value, num)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    fn set_grid(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "m" => self.m_values = list(key, value, num)?,
            "alpha" => self.alphas = list(key, value, alpha)?,
            "strategy" => self.strategies = list(key, value, |_, v| Strategy::from_str(v))?,
            other => return Err(format!("unknown grid key `{other}`")),
        }
        Ok(())
    }

    /// The resolved configuration in the same format `parse` reads.
    pub fn echo(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        let mut s = String::new();
        let _ = writeln!(s, "mu = {}", self.mu);
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(s, "nq = {}", self.nq);
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        let _ = writeln!(s, "graphs = {}", self.graphs);
        let _ = writeln!(s, "victims = {}", self.victims);
        let _ = writeln!(s, "seed = {}", self.base_seed);
        if let Some(out) = &self.out_dir {
            let _ = writeln!(s, "out = {}", out.display());
        }
        if let Some(w) = self.workers {
            let _ = writeln!(s, "workers = {w}");
        }
        let _ = writeln!(s, "timing = {}", self.timing);
        if let Some(t) = self.tune_target_pe {
            let _ = writeln!(s, "tune_target_pe = {t}");
        }
        let _ = writeln!(
            s,
            "tune_candidates = {}",
            join(self.tune_candidates.iter().map(|e| e.to_string()).collect())
        );
        let _ = writeln!(s, "\n[grid]");
        let _ = writeln!(s, "m = {}", join(self.m_values.iter().map(|m| m.to_string()).collect()));
        let _ = writeln!(s, "alpha = {}", join(self.alphas.iter().map(|&a| format_alpha(a)).collect()));
        let _ = writeln!(
            s,
            "strategy = {}",
            join(self.strategies.iter().map(|st| st.name().to_string()).collect())
        );
        if !self.epsilon_overrides.is_empty() {
            let _ = writeln!(s, "\n[epsilon]");
            for o in &self.epsilon_overrides {
                let _ = write!(s, "{}/{}", o.m, format_alpha(o.alpha));
                if let Some(st) = o.strategy {
                    let _ = write!(s, "/{}", st.name());
                }
                let _ = writeln!(s, " = {}", o.epsilon);
            }
        }
        s
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("bad value `{value}` for `{key}`"))
}

fn alpha(key: &str, value: &str) -> Result<f64, String> {
    parse_alpha(value).ok_or_else(|| format!("bad value `{value}` for `{key}`"))
}

fn list<T, F>(key: &str, value: &str, item: F) -> Result<Vec<T>, String>
where
    F: Fn(&str, &str) -> Result<T, String>,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| item(key, v))
        .collect()
}

fn parse_override(key: &str, value: &str) -> Result<EpsilonOverride, String> {
    let parts: Vec<&str> = key.split('/').map(str::trim).collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(format!("epsilon key `{key}` must be `m/alpha` or `m/alpha/strategy`"));
    }
    Ok(EpsilonOverride {
        m: num("m", parts[0])?,
        alpha: alpha("alpha", parts[1])?,
        strategy: parts.get(2).map(|s| Strategy::from_str(s)).transpose()?,
        epsilon: num(key, value)?,
    })
}
