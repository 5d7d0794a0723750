//! Test-only oracles, independent of the library's generation path.
#![allow(dead_code)]

use std::collections::HashMap;

/// Exact law of the initial popularity vector: every vector in `[1, m]^n`
/// with its probability. `alpha = inf` puts all mass on the all-ones vector.
pub fn initial_popularity_vectors(n: usize, m: usize, alpha: f64) -> Vec<(Vec<u64>, f64)> {
    if alpha.is_infinite() {
        return vec![(vec![1; n], 1.0)];
    }
    let weights: Vec<f64> = (1..=m).map(|k| 1.0 / (k as f64).powf(alpha)).collect();
    let z: f64 = weights.iter().sum();
    let mut out = vec![(Vec::new(), 1.0)];
    for _ in 0..n {
        let mut next = Vec::new();
        for (v, p) in &out {
            for (k, w) in weights.iter().enumerate() {
                let mut v2: Vec<u64> = v.clone();
                v2.push(k as u64 + 1);
                next.push((v2, p * w / z));
            }
        }
        out = next;
    }
    out
}

/// Exhaustive expansion of the edge-attachment process: at each of the
/// `mu * n` steps every non-full group is drawn with probability
/// proportional to `tau0 + degree`, then every non-member user with equal
/// probability. Returns the exact law of the final membership bitmasks.
pub fn exact_membership_law(n: usize, m: usize, mu: usize, alpha: f64) -> HashMap<Vec<u32>, f64> {
    assert!(m <= 31);
    let mut result: HashMap<Vec<u32>, f64> = HashMap::new();
    for (tau0, p0) in initial_popularity_vectors(n, m, alpha) {
        let mut states: HashMap<Vec<u32>, f64> = HashMap::new();
        states.insert(vec![0u32; n], p0);
        for _ in 0..mu * n {
            let mut next: HashMap<Vec<u32>, f64> = HashMap::new();
            for (masks, p) in states {
                let weight = |j: usize| {
                    let d = masks[j].count_ones() as usize;
                    if d == m { 0.0 } else { (tau0[j] + d as u64) as f64 }
                };
                let total: f64 = (0..n).map(weight).sum();
                assert!(total > 0.0, "oracle configuration saturates");
                for j in 0..n {
                    let w = weight(j);
                    if w == 0.0 {
                        continue;
                    }
                    let free: Vec<usize> = (0..m).filter(|u| masks[j] & (1 << u) == 0).collect();
                    for &u in &free {
                        let mut next_masks = masks.clone();
                        next_masks[j] |= 1 << u;
                        *next.entry(next_masks).or_insert(0.0) += p * w / total / free.len() as f64;
                    }
                }
            }
            states = next;
        }
        for (masks, p) in states {
            *result.entry(masks).or_insert(0.0) += p;
        }
    }
    result
}

/// Exact pooled degree pmf (average over groups) on `0..=max_degree`.
pub fn exact_pooled_degree_pmf(n: usize, m: usize, mu: usize, alpha: f64) -> Vec<f64> {
    let law = exact_membership_law(n, m, mu, alpha);
    let mut pmf = vec![0.0; m + 1];
    for (masks, p) in law {
        for mask in masks {
            pmf[mask.count_ones() as usize] += p / n as f64;
        }
    }
    while pmf.len() > 1 && pmf[pmf.len() - 1] == 0.0 {
        pmf.pop();
    }
    pmf
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().max(b.len());
    0.5 * (0..len)
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}
