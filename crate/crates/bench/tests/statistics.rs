use proptest::prelude::*;
use qsh_bench::stats::{midranks, quantile};
use qsh_bench::{
    percent_diff, qq_data, summarize, wilcoxon_rank_sum, wilcoxon_rank_sum_with, Method, StatsError,
};
use qsh_core::primitives::QshRng;

fn uniform(rng: &mut QshRng) -> f64 {
    (u64::from_be_bytes(rng.random_array()) >> 11) as f64 / (1u64 << 53) as f64
}

fn small_int(rng: &mut QshRng, bound: u64) -> u64 {
    u64::from_be_bytes(rng.random_array()) % bound
}

/// Full enumeration of every way to pick n of the pooled ranks.
/// Returns (W, P(S <= W), P(|S - mean| >= |W - mean|)).
fn enumerate(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    // Midrank = number strictly below + (number equal + 1) / 2.
    let ranks: Vec<f64> = pooled
        .iter()
        .map(|v| {
            let below = pooled.iter().filter(|u| *u < v).count() as f64;
            let equal = pooled.iter().filter(|u| *u == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let (n, big_n) = (x.len(), pooled.len());
    let w: f64 = ranks[..n].iter().sum();
    let mean = n as f64 * (big_n as f64 + 1.0) / 2.0;
    let (mut total, mut lower, mut extreme) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << big_n) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let s: f64 = (0..big_n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
        total += 1;
        if s <= w + 1e-9 {
            lower += 1;
        }
        if (s - mean).abs() >= (w - mean).abs() - 1e-9 {
            extreme += 1;
        }
    }
    (w, lower as f64 / total as f64, extreme as f64 / total as f64)
}

#[test]
fn summarize_textbook_values() {
    let s = summarize(&[1.0, 2.0, 3.0]).unwrap();
    assert_eq!((s.count, s.mean, s.stddev), (3, 2.0, 1.0));
    assert_eq!(summarize(&[4.5; 10]).unwrap().stddev, 0.0);
    assert_eq!(qsh_bench::stats::mean(&[7.0]).unwrap(), 7.0);
    assert_eq!(summarize(&[7.0]), Err(StatsError::TooFewForStddev(1)));
    assert_eq!(summarize(&[]), Err(StatsError::Empty));
}

proptest! {
    #[test]
    fn summarize_matches_welford(xs in proptest::collection::vec(0.001f64..1e4, 2..300)) {
        // Welford's single-pass update as an independent oracle.
        let (mut m, mut m2) = (0.0f64, 0.0f64);
        for (i, x) in xs.iter().enumerate() {
            let d = x - m;
            m += d / (i + 1) as f64;
            m2 += d * (x - m);
        }
        let sd = (m2 / (xs.len() - 1) as f64).sqrt();
        let s = summarize(&xs).unwrap();
        prop_assert!((s.mean - m).abs() <= 1e-12 * m.abs());
        prop_assert!((s.stddev - sd).abs() <= 1e-12 * sd.abs().max(1e-300) || (s.stddev - sd).abs() < 1e-9);
    }

    #[test]
    fn qq_pairs_are_monotone(
        x in proptest::collection::vec(-1e3f64..1e3, 1..60),
        y in proptest::collection::vec(-1e3f64..1e3, 1..60),
    ) {
        let pairs = qq_data(&x, &y).unwrap();
        prop_assert_eq!(pairs.len(), x.len().min(y.len()));
        for w in pairs.windows(2) {
            prop_assert!(w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
        }
    }
}

#[test]
fn tiny_exact_example() {
    let r = wilcoxon_rank_sum(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
    assert_eq!(r.rank_sum_w, 3.0);
    assert!((r.p_one_sided - 1.0 / 6.0).abs() < 1e-12);
    assert!((r.p_two_sided - 2.0 / 6.0).abs() < 1e-12);
    assert_eq!(r.method, Method::Exact);
}

#[test]
fn identical_samples_have_two_sided_p_one() {
    let mut rng = QshRng::seeded(3);
    for _ in 0..50 {
        let n = 1 + small_int(&mut rng, 12) as usize;
        let x: Vec<f64> = (0..n).map(|_| small_int(&mut rng, 5) as f64).collect();
        let r = wilcoxon_rank_sum(&x, &x).unwrap();
        assert_eq!(r.method, Method::Exact);
        assert!((r.p_two_sided - 1.0).abs() < 1e-12, "{x:?} {r:?}");
    }
}

#[test]
fn exact_matches_enumeration_for_all_small_sizes() {
    let mut rng = QshRng::seeded(4);
    let mut datasets = 0;
    // Every (n, m) pair up to 7, then random pairs until 200 datasets.
    let mut sizes: Vec<(usize, usize)> = (1..=7).flat_map(|n| (1..=7).map(move |m| (n, m))).collect();
    while sizes.len() < 200 {
        sizes.push((1 + small_int(&mut rng, 7) as usize, 1 + small_int(&mut rng, 7) as usize));
    }
    for (n, m) in sizes {
        // Small integer range so ties are common.
        let x: Vec<f64> = (0..n).map(|_| small_int(&mut rng, 8) as f64).collect();
        let y: Vec<f64> = (0..m).map(|_| small_int(&mut rng, 8) as f64).collect();
        let (w, lower, two) = enumerate(&x, &y);
        let r = wilcoxon_rank_sum(&x, &y).unwrap();
        assert_eq!(r.method, Method::Exact);
        assert!((r.rank_sum_w - w).abs() < 1e-12);
        assert!((r.p_one_sided - lower).abs() < 1e-9, "{x:?} {y:?}: {} vs {lower}", r.p_one_sided);
        assert!((r.p_two_sided - two).abs() < 1e-9, "{x:?} {y:?}: {} vs {two}", r.p_two_sided);
        datasets += 1;
    }
    assert_eq!(datasets, 200);
}

#[test]
fn normal_approx_close_to_exact_at_twelve() {
    let mut rng = QshRng::seeded(5);
    for i in 0..100 {
        let shift = (i % 5) as f64 * 0.15;
        let x: Vec<f64> = (0..12).map(|_| uniform(&mut rng)).collect();
        let y: Vec<f64> = (0..12).map(|_| uniform(&mut rng) + shift).collect();
        let e = wilcoxon_rank_sum_with(&x, &y, Method::Exact).unwrap();
        let a = wilcoxon_rank_sum_with(&x, &y, Method::NormalApprox).unwrap();
        assert!((e.p_one_sided - a.p_one_sided).abs() < 0.01, "{i}: {e:?} {a:?}");
        assert!((e.p_two_sided - a.p_two_sided).abs() < 0.01, "{i}: {e:?} {a:?}");
    }
}

#[test]
fn null_rejection_rate_is_calibrated() {
    let mut rng = QshRng::seeded(6);
    let reps = 500;
    let rejections = (0..reps)
        .filter(|_| {
            let x: Vec<f64> = (0..50).map(|_| uniform(&mut rng)).collect();
            let y: Vec<f64> = (0..50).map(|_| uniform(&mut rng)).collect();
            wilcoxon_rank_sum(&x, &y).unwrap().p_two_sided < 0.05
        })
        .count();
    let rate = rejections as f64 / reps as f64;
    assert!((0.025..=0.075).contains(&rate), "rejection rate {rate}");
}

#[test]
fn large_shift_is_detected() {
    let mut rng = QshRng::seeded(7);
    let x: Vec<f64> = (0..100).map(|_| uniform(&mut rng)).collect();
    let y: Vec<f64> = x.iter().map(|v| v + 10.0).collect();
    let r = wilcoxon_rank_sum(&x, &y).unwrap();
    assert_eq!(r.method, Method::NormalApprox);
    assert!(r.p_one_sided < 0.001);
    // Opposite direction: no evidence that y is smaller.
    assert!(wilcoxon_rank_sum(&y, &x).unwrap().p_one_sided > 0.999);
}

#[test]
fn approx_tracks_exact_logic_on_subsamples() {
    // Same generator at n = m = 100 (approx) and n = m = 10 (exact): both
    // should agree that a null sample shows no effect, and the approximate
    // p for the full sample should match a direct z computation.
    let mut rng = QshRng::seeded(8);
    let x: Vec<f64> = (0..100).map(|_| uniform(&mut rng)).collect();
    let y: Vec<f64> = (0..100).map(|_| uniform(&mut rng)).collect();
    let r = wilcoxon_rank_sum(&x, &y).unwrap();
    let ranks = midranks(&x, &y);
    let w: f64 = ranks[..100].iter().sum();
    let (mu, sd) = (100.0 * 201.0 / 2.0, (100.0f64 * 100.0 * 201.0 / 12.0).sqrt());
    let z = (w - mu + 0.5) / sd;
    let phi = 0.5 * (1.0 + erf(z / 2f64.sqrt()));
    assert!((r.p_one_sided - phi).abs() < 1e-3);
    let sub = wilcoxon_rank_sum(&x[..10], &y[..10]).unwrap();
    assert_eq!(sub.method, Method::Exact);
    assert!(sub.p_two_sided > 0.001);
}

/// Abramowitz-Stegun 7.1.26, good to about 1.5e-7.
fn erf(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.3275911 * x.abs());
    let poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let y = 1.0 - poly * (-x * x).exp();
    if x >= 0.0 {
        y
    } else {
        -y
    }
}

#[test]
fn percent_difference() {
    let d = percent_diff(162.514, 163.552).unwrap();
    assert_eq!(format!("{d:.3}"), "0.635");
    assert_eq!(percent_diff(5.0, 5.0).unwrap(), 0.0);
    assert_eq!(percent_diff(200.0, 100.0).unwrap(), -100.0);
    assert!(matches!(percent_diff(1.0, 0.0), Err(StatsError::NonPositiveBaseline(_))));
}

#[test]
fn qq_shapes() {
    let x: Vec<f64> = vec![5.0, 1.0, 3.0, 2.0, 4.0];
    for (a, b) in qq_data(&x, &x).unwrap() {
        assert_eq!(a, b);
    }
    let y: Vec<f64> = x.iter().map(|v| v * 2.0).collect();
    for (a, b) in qq_data(&x, &y).unwrap() {
        assert!((b - 2.0 * a).abs() < 1e-12);
    }
    // Interpolation between order statistics for the longer sample.
    let long = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(quantile(&long, 0.5), 2.5);
    assert_eq!(quantile(&long, 0.01), 1.0);
    assert_eq!(quantile(&long, 0.99), 4.0);
}

#[test]
fn empty_inputs_are_errors() {
    assert_eq!(wilcoxon_rank_sum(&[], &[1.0]), Err(StatsError::Empty));
    assert_eq!(qq_data(&[1.0], &[]), Err(StatsError::Empty));
}
