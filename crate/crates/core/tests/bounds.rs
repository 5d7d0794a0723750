use bigraph_privacy::attack::QueryChannel;
use bigraph_privacy::bigraph::{generate, BigraphParams};
use bigraph_privacy::bounds::{
    corollary1_bound, expected_group_count, i_max_all_degrees, theorem2_bounds, BoundError, BoundInputs, DegreeMass,
};
use bigraph_privacy::numerics::ChannelSpec;
use proptest::prelude::*;

fn small() -> BigraphParams {
    BigraphParams::new(1000, 100, 5, 3.0, 0).unwrap()
}

fn h(p: f64) -> f64 {
    let t = |x: f64| if x == 0.0 { 0.0 } else { -x * x.ln() };
    t(p) + t(1.0 - p)
}

struct Scan {
    psi: f64,
    d_star: Option<usize>,
    i_star: Option<u64>,
    q_bar: f64,
}

/// Exhaustive re-evaluation for one BSC class: every candidate d and i is
/// checked by summing the condition from scratch.
fn scan_oracle(n: usize, m: usize, alpha: f64, nq: f64, eps: f64, h_m: f64, c_prime: f64) -> Scan {
    let zeta: f64 = (1..=m).map(|k| (k as f64).powf(-alpha)).sum();
    let en = |d: usize| n as f64 / (zeta * (d as f64).powf(alpha));
    let mi = |d: usize| {
        let p = d as f64 / m as f64;
        h(p * (1.0 - nq) + (1.0 - p) * nq) - h(nq)
    };
    let mut i_max: f64 = 0.0;
    for d in 1..=m {
        let p = d as f64 / m as f64;
        let q = p * (1.0 - nq) + (1.0 - p) * nq;
        let mut ratios = vec![((1.0 - nq) / q).ln(), (nq / (1.0 - q)).ln()];
        if d < m {
            ratios.push((nq / q).ln());
            ratios.push(((1.0 - nq) / (1.0 - q)).ln());
        }
        for r in ratios {
            i_max = i_max.max(r);
        }
    }
    let psi = h_m + (1.0 / eps).ln() + i_max;
    let mass = |from: usize| (from.max(1)..=m).map(|k| en(k) * mi(k)).sum::<f64>();
    let d_star = (1..=m).filter(|&d| psi <= c_prime * mass(d.saturating_sub(1))).max();
    let Some(d) = d_star else {
        return Scan { psi, d_star, i_star: None, q_bar: f64::NAN };
    };
    let step = if d > 1 { mi(d - 1) } else { 0.0 };
    let i_star = (0..100_000u64).find(|&i| psi <= c_prime * (mass(d) + i as f64 * step));
    let q_bar = (d..=m).map(en).sum::<f64>() + i_star.unwrap() as f64;
    Scan { psi, d_star, i_star, q_bar }
}

#[test]
fn small_config_matches_exhaustive_scan() {
    let oracle = scan_oracle(1000, 100, 3.0, 0.05, 0.01, 100f64.ln(), 1.0);
    let r = theorem2_bounds(&BoundInputs::bsc(small(), 0.05, 0.01).unwrap()).unwrap();
    assert_eq!(Some(r.cutoffs[0].d_star), oracle.d_star);
    assert_eq!(Some(r.i_star), oracle.i_star);
    assert!((r.psi - oracle.psi).abs() < 1e-9);
    assert!((r.q_bar_bound - oracle.q_bar).abs() < 1e-9);

    // Values frozen from a 40-digit evaluation of the same chain.
    assert!((r.i_max - 2.778_924_540_688_867).abs() < 1e-9);
    assert!((r.psi - 11.989_264_912_665_05).abs() < 1e-9);
    assert_eq!(r.cutoffs[0].d_star, 3);
    assert_eq!(r.i_star, 102);
    assert!((r.q_bar_bound - 166.065_662_671_806_3).abs() < 1e-9);
    assert!(!r.i_star_exceeds_range);
    assert!((r.cutoffs[0].i_range - 103.992_704_147_577_08).abs() < 1e-9);
}

#[test]
fn returned_cutoffs_resatisfy_their_conditions() {
    let p = small();
    let inputs = BoundInputs::bsc(p, 0.05, 0.01).unwrap();
    let r = theorem2_bounds(&inputs).unwrap();
    let spec = ChannelSpec::bsc(0.05).unwrap();
    let mass = |from: usize| {
        (from.max(1)..=p.m)
            .map(|k| expected_group_count(&p, k) * bigraph_privacy::numerics::bernoulli_channel_mi(k, p.m, &spec).unwrap())
            .sum::<f64>()
    };
    let d = r.cutoffs[0].d_star;
    assert!(r.psi <= mass(d - 1));
    assert!(r.psi > mass(d));
    let step = bigraph_privacy::numerics::bernoulli_channel_mi(d - 1, p.m, &spec).unwrap();
    assert!(r.psi <= mass(d) + r.i_star as f64 * step);
    assert!(r.psi > mass(d) + (r.i_star - 1) as f64 * step);
    assert!(r.to_key_value().contains("i_star=102"));
}

#[test]
fn several_scan_configurations() {
    for &(n, m, alpha, nq, eps) in &[
        (2000usize, 200usize, 3.0, 0.05, 0.01),
        (5000, 500, 2.5, 0.1, 0.05),
        (400, 40, 4.0, 0.02, 0.2),
        (1000, 100, 3.0, 0.3, 0.01),
    ] {
        let p = BigraphParams::new(n, m, 5, alpha, 0).unwrap();
        let oracle = scan_oracle(n, m, alpha, nq, eps, (m as f64).ln(), 1.0);
        match theorem2_bounds(&BoundInputs::bsc(p, nq, eps).unwrap()) {
            Ok(r) => {
                assert_eq!(Some(r.cutoffs[0].d_star), oracle.d_star, "{n} {m} {alpha} {nq}");
                assert_eq!(Some(r.i_star), oracle.i_star);
                assert!((r.q_bar_bound - oracle.q_bar).abs() < 1e-9 * oracle.q_bar.max(1.0));
            }
            Err(BoundError::Infeasible { .. }) => assert_eq!(oracle.d_star, None),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn corollary_matches_direct_formula() {
    let p = small();
    // With unit constants this configuration has no admissible d.
    assert!(matches!(
        corollary1_bound(&p, 0.05, 0.01, 1.0, 1.0, 100f64.ln()),
        Err(BoundError::Infeasible { .. })
    ));
    let c = corollary1_bound(&p, 0.05, 0.01, 10.0, 1.0, 100f64.ln()).unwrap();
    assert_eq!(c.d_star, 7);
    assert!((c.q_bar_bound - 166.388_326_636_123_33).abs() < 1e-9);
    let c = corollary1_bound(&p, 0.05, 0.01, 100.0, 1.0, 100f64.ln()).unwrap();
    assert_eq!(c.d_star, 40);
    assert!((c.q_bar_bound - 28.806_843_254_176_476).abs() < 1e-9);
    assert!(c.to_key_value().contains("d_star=40"));
}

#[test]
fn theorem_and_corollary_agree_in_magnitude() {
    let p = BigraphParams::new(20_000, 2000, 5, 3.0, 0).unwrap();
    let t = theorem2_bounds(&BoundInputs::bsc(p, 0.05, 0.01).unwrap()).unwrap();
    // With c = 1 no d >= 3 is admissible here; the constant is unknown anyway.
    let c = corollary1_bound(&p, 0.05, 0.01, 10.0, 1.0, 2000f64.ln()).unwrap();
    let ratio = t.q_bar_bound / c.q_bar_bound;
    assert!(ratio.is_finite() && ratio > 0.0);
    assert!(ratio > 0.01 && ratio < 100.0, "{ratio}");
}

#[test]
fn per_class_cutoffs() {
    let p = small();
    let mut inputs = BoundInputs::bsc(p, 0.05, 0.01).unwrap();
    inputs.channels = vec![
        (QueryChannel::bsc(0.05).unwrap(), 0.5),
        (QueryChannel::bsc(0.05).unwrap(), 0.5),
    ];
    let two = theorem2_bounds(&inputs).unwrap();
    let one = theorem2_bounds(&BoundInputs::bsc(p, 0.05, 0.01).unwrap()).unwrap();
    assert_eq!(two.cutoffs.len(), 2);
    assert_eq!(two.cutoffs[0].d_star, one.cutoffs[0].d_star);
    assert_eq!(two.i_star, one.i_star);
    assert!((two.q_bar_bound - one.q_bar_bound).abs() < 1e-9);

    // A cleaner class reaches a higher cutoff.
    inputs.channels = vec![
        (QueryChannel::bsc(0.01).unwrap(), 0.5),
        (QueryChannel::bsc(0.1).unwrap(), 0.5),
    ];
    let mixed = theorem2_bounds(&inputs).unwrap();
    assert!(mixed.cutoffs[0].d_star >= mixed.cutoffs[1].d_star);
}

#[test]
fn empirical_histogram_mode() {
    let p = BigraphParams::new(2000, 200, 5, 3.0, 3).unwrap();
    let g = generate(&p).unwrap();
    let mut inputs = BoundInputs::bsc(p, 0.05, 0.01).unwrap();
    inputs.degree_mass = DegreeMass::from_graph(&g);
    let r = theorem2_bounds(&inputs).unwrap();
    let tail = g.degrees().iter().filter(|&&d| d >= r.cutoffs[0].d_star).count() as f64;
    assert!((r.cutoffs[0].tail_groups - tail).abs() < 1e-9);
    assert!(r.q_bar_bound >= tail);
}

#[test]
fn noiseless_i_max_is_finite_over_one_to_m() {
    let v = i_max_all_degrees(&[ChannelSpec::noiseless()], 50);
    assert!((v - 50f64.ln()).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cleaner_channel_never_raises_the_bound(a in 0.001f64..0.5, b in 0.001f64..0.5) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let p = small();
        let x = theorem2_bounds(&BoundInputs::bsc(p, lo, 0.01).unwrap());
        let y = theorem2_bounds(&BoundInputs::bsc(p, hi, 0.01).unwrap());
        if let (Ok(x), Ok(y)) = (x, y) {
            prop_assert!(x.q_bar_bound <= y.q_bar_bound + 1e-9, "{} {} -> {} {}", lo, hi, x.q_bar_bound, y.q_bar_bound);
        }
    }

    #[test]
    fn d_star_is_maximal(nq in 0.001f64..0.4, eps in 0.001f64..0.5, n in 500usize..5000) {
        let p = BigraphParams::new(n, 100, 5, 3.0, 0).unwrap();
        let oracle = scan_oracle(n, 100, 3.0, nq, eps, 100f64.ln(), 1.0);
        match theorem2_bounds(&BoundInputs::bsc(p, nq, eps).unwrap()) {
            Ok(r) => {
                prop_assert_eq!(Some(r.cutoffs[0].d_star), oracle.d_star);
                prop_assert_eq!(Some(r.i_star), oracle.i_star);
            }
            Err(_) => prop_assert_eq!(oracle.d_star, None),
        }
    }

    #[test]
    fn error_bound_scales_with_c_prime(c in 0.1f64..10.0, eps in 0.001f64..0.9) {
        let mut inputs = BoundInputs::bsc(small(), 0.05, eps).unwrap();
        inputs.c_prime = c;
        if let Ok(r) = theorem2_bounds(&inputs) {
            prop_assert_eq!(r.p_e_bound, eps / c);
        }
    }
}
