//! Scalar helpers shared across the crate: partial zeta sums, binary
//! entropy and divergence, binary convolution and the mutual information of
//! a Bernoulli input through a binary channel.
//!
//! Every logarithm here is natural, so all information quantities are in nats.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("{name} = {value} is outside [0, 1]")]
    NotAProbability { name: &'static str, value: f64 },
    #[error("binary divergence undefined: p = {p}, q = {q}")]
    DivergenceUndefined { p: f64, q: f64 },
    #[error("d = {d} exceeds m = {m}")]
    DegreeOutOfRange { d: usize, m: usize },
}

pub(crate) fn check_prob(name: &'static str, value: f64) -> Result<f64, DomainError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(DomainError::NotAProbability { name, value })
    }
}

/// `x * ln(x)` with the `0 ln 0 = 0` convention.
#[inline]
pub fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Finite zeta sum `sum_{i=1}^m i^{-s}`.
///
/// Any real `s` is accepted; non-positive exponents show up in the moment
/// formulas. `s = +inf` gives 1.
pub fn partial_zeta(m: usize, s: f64) -> f64 {
    assert!(m >= 1, "partial_zeta needs m >= 1");
    if s == f64::INFINITY {
        return 1.0;
    }
    // Summing smallest terms first keeps the rounding error down for s > 0.
    if s > 0.0 {
        (1..=m).rev().map(|i| (i as f64).powf(-s)).sum()
    } else {
        (1..=m).map(|i| (i as f64).powf(-s)).sum()
    }
}

pub fn binary_entropy(p: f64) -> Result<f64, DomainError> {
    check_prob("p", p)?;
    Ok(-xlnx(p) - xlnx(1.0 - p))
}

/// Binary Kullback-Leibler divergence `D(p || q)` in nats.
pub fn binary_kl(p: f64, q: f64) -> Result<f64, DomainError> {
    check_prob("p", p)?;
    check_prob("q", q)?;
    let term = |a: f64, b: f64| -> Result<f64, DomainError> {
        if a == 0.0 {
            Ok(0.0)
        } else if b == 0.0 {
            Err(DomainError::DivergenceUndefined { p, q })
        } else {
            Ok(a * (a / b).ln())
        }
    };
    Ok((term(p, q)? + term(1.0 - p, 1.0 - q)?).max(0.0))
}

/// Crossover probability of two cascaded binary symmetric stages,
/// `a(1-b) + b(1-a)`.
pub fn binary_convolution(a: f64, b: f64) -> Result<f64, DomainError> {
    check_prob("a", a)?;
    check_prob("b", b)?;
    Ok(a * (1.0 - b) + b * (1.0 - a))
}

/// Binary conditional law `P(Y | R)` of a query channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    p_y1_given_r1: f64,
    p_y1_given_r0: f64,
}

impl ChannelSpec {
    pub fn new(p_y1_given_r1: f64, p_y1_given_r0: f64) -> Result<Self, DomainError> {
        check_prob("p_y1_given_r1", p_y1_given_r1)?;
        check_prob("p_y1_given_r0", p_y1_given_r0)?;
        Ok(Self {
            p_y1_given_r1,
            p_y1_given_r0,
        })
    }

    pub fn noiseless() -> Self {
        Self {
            p_y1_given_r1: 1.0,
            p_y1_given_r0: 0.0,
        }
    }

    /// Binary symmetric channel with crossover probability `nq`.
    pub fn bsc(nq: f64) -> Result<Self, DomainError> {
        check_prob("nq", nq)?;
        Ok(Self {
            p_y1_given_r1: 1.0 - nq,
            p_y1_given_r0: nq,
        })
    }

    pub fn p_y1_given_r1(&self) -> f64 {
        self.p_y1_given_r1
    }

    pub fn p_y1_given_r0(&self) -> f64 {
        self.p_y1_given_r0
    }

    /// `P(Y = y | R = r)`.
    #[inline]
    pub fn likelihood(&self, y: bool, r: bool) -> f64 {
        let p1 = if r {
            self.p_y1_given_r1
        } else {
            self.p_y1_given_r0
        };
        if y {
            p1
        } else {
            1.0 - p1
        }
    }

    /// `P(Y = 1)` when `P(R = 1) = prior_r1`.
    #[inline]
    pub fn output_marginal(&self, prior_r1: f64) -> f64 {
        (self.p_y1_given_r1 * prior_r1 + self.p_y1_given_r0 * (1.0 - prior_r1)).clamp(0.0, 1.0)
    }

    /// Whether `Y` carries no information about `R`.
    pub fn is_uninformative(&self) -> bool {
        self.p_y1_given_r1 == self.p_y1_given_r0
    }
}

/// `I(Y; E)` for `E ~ Bernoulli(d/m)` sent through `channel`, in nats.
///
/// Computed from the joint law as `sum P(r, y) ln(P(y|r) / P(y))`.
pub fn bernoulli_channel_mi(d: usize, m: usize, channel: &ChannelSpec) -> Result<f64, DomainError> {
    if d > m {
        return Err(DomainError::DegreeOutOfRange { d, m });
    }
    let p = d as f64 / m as f64;
    let q = channel.output_marginal(p);
    let mut mi = 0.0;
    for (r, pr) in [(true, p), (false, 1.0 - p)] {
        if pr == 0.0 {
            continue;
        }
        for (y, py) in [(true, q), (false, 1.0 - q)] {
            let lik = channel.likelihood(y, r);
            if lik == 0.0 {
                continue;
            }
            mi += pr * lik * (lik / py).ln();
        }
    }
    Ok(mi.max(0.0))
}
