//! Property-based checks of algebraic and structural invariants.

use fbm_signature::combinatorics::{permutation_count, refined_count_bound, RefinedBound};
use fbm_signature::cubature::{direct_iterated_integral, word_weight, words_of_degree};
use fbm_signature::grid_approx::approx_expected_word;
use fbm_signature::sde::{error_bound_shape, mc_weak_value, BoundBranch, ErrorBoundParams, McConfig, VectorFieldSet};
use fbm_signature::tensor_algebra::{path_signature, segment_exponential};
use fbm_signature::{Path, Tensor, Word};
use proptest::prelude::*;
use std::collections::BTreeSet;

const WIDTH: usize = 3;
const DEPTH: usize = 4;

fn increment() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, WIDTH)
}

fn close(a: &Tensor, b: &Tensor, tol: f64) -> bool {
    a.iter().zip(b.iter()).all(|((_, x), (_, y))| (x - y).abs() <= tol * (1.0 + x.abs()))
}

/// Path through the given spatial points on evenly spaced times.
fn spatial_path(points: &[Vec<f64>]) -> Path {
    let n = points.len();
    let times: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    Path::from_spatial(times, points.to_vec()).unwrap()
}

fn points() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.5f64..1.5, WIDTH - 1), 2..6).prop_map(|mut p| {
        for x in &mut p[0] {
            *x = 0.0;
        }
        p
    })
}

fn word_over(letters: std::ops::RangeInclusive<usize>, len: std::ops::Range<usize>) -> impl Strategy<Value = Word> {
    prop::collection::vec(letters, len).prop_map(Word::new)
}

/// All interleavings of `a` and `b`, with multiplicity.
fn shuffles(a: &[usize], b: &[usize]) -> Vec<Vec<usize>> {
    if a.is_empty() {
        return vec![b.to_vec()];
    }
    if b.is_empty() {
        return vec![a.to_vec()];
    }
    let mut out = Vec::new();
    for mut s in shuffles(&a[1..], b) {
        s.insert(0, a[0]);
        out.push(s);
    }
    for mut s in shuffles(a, &b[1..]) {
        s.insert(0, b[0]);
        out.push(s);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chen_product_is_associative(a in increment(), b in increment(), c in increment()) {
        let ea = segment_exponential(&a, DEPTH).unwrap();
        let eb = segment_exponential(&b, DEPTH).unwrap();
        let ec = segment_exponential(&c, DEPTH).unwrap();
        let left = ea.chen_concat(&eb).unwrap().chen_concat(&ec).unwrap();
        let right = ea.chen_concat(&eb.chen_concat(&ec).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-12));
    }

    #[test]
    fn segment_inverse_is_reversed_segment(a in increment()) {
        let fwd = segment_exponential(&a, DEPTH).unwrap();
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        let back = segment_exponential(&neg, DEPTH).unwrap();
        let id = Tensor::identity(WIDTH, DEPTH).unwrap();
        prop_assert!(close(&fwd.chen_concat(&back).unwrap(), &id, 1e-12));
    }

    #[test]
    fn signature_satisfies_shuffle_identity(
        pts in points(),
        u in word_over(0..=2, 1..3),
        v in word_over(0..=2, 1..3),
    ) {
        let sig = path_signature(&spatial_path(&pts), DEPTH);
        let lhs = sig.coeff(&u) * sig.coeff(&v);
        let rhs: f64 = shuffles(u.letters(), v.letters())
            .into_iter()
            .map(|w| sig.coeff(&Word::new(w)))
            .sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn chen_signature_matches_direct_quadrature(pts in points(), w in word_over(0..=2, 1..5)) {
        let path = spatial_path(&pts);
        let chen = path_signature(&path, DEPTH).coeff(&w);
        let direct = direct_iterated_integral(&path, &w);
        prop_assert!((chen - direct).abs() <= 1e-11 * (1.0 + chen.abs()), "{chen} vs {direct}");
    }

    #[test]
    fn spatial_scaling_is_homogeneous(pts in points(), w in word_over(0..=2, 1..5), lambda in -2.0f64..2.0) {
        let path = spatial_path(&pts);
        let scaled = path.map_spatial(|x| x * lambda);
        let base = path_signature(&path, DEPTH).coeff(&w);
        let got = path_signature(&scaled, DEPTH).coeff(&w);
        let want = base * lambda.powi(w.nonzero_count() as i32);
        prop_assert!((got - want).abs() <= 1e-10 * (1.0 + want.abs()));
    }

    #[test]
    fn permutation_count_respects_refined_bound(w in word_over(1..=3, 1..5)) {
        let doubled = w.concat(&w.reversed());
        let k = (doubled.len() / 2) as u64;
        let p = doubled.distinct_nonzero() as u64;
        let count = permutation_count(&doubled).unwrap();
        match refined_count_bound(k, p) {
            RefinedBound::Count(bound) => prop_assert!(count <= bound, "{doubled}: {count} > {bound}"),
            RefinedBound::ZeroExpectation => prop_assert_eq!(count, 0),
        }
    }

    #[test]
    fn words_of_degree_grow_with_degree_and_shrink_with_hurst(
        m in 1u32..6,
        h in 0.5f64..0.95,
        dh in 0.0f64..0.04,
        d in 1usize..3,
    ) {
        let set = |m, h| -> BTreeSet<Vec<usize>> {
            words_of_degree(m, h, d).unwrap().into_iter().map(|w| w.letters().to_vec()).collect()
        };
        let base = set(m, h + dh);
        prop_assert!(base.is_subset(&set(m + 1, h + dh)));
        prop_assert!(base.is_subset(&set(m, h)));
        for w in &base {
            prop_assert!(word_weight(&Word::new(w.clone()), h + dh) <= m as f64 + 1e-9);
        }
    }

    #[test]
    fn bound_shape_is_monotone_in_horizon(
        h in 0.55f64..0.95,
        gamma in 0.0f64..0.4,
        growth in 0.2f64..2.0,
        t in 0.05f64..3.0,
        dt in 0.01f64..0.5,
    ) {
        let params = ErrorBoundParams::new(growth, gamma, 1, 4, h).unwrap();
        // a huge series is refused, never truncated silently
        let (Ok(a), Ok(b)) = (error_bound_shape(&params, t), error_bound_shape(&params, t + dt)) else {
            return Ok(());
        };
        if a.branch == b.branch {
            prop_assert!(b.value >= a.value, "{} then {}", a.value, b.value);
        }
        prop_assert_eq!(a.branch == BoundBranch::Long, t >= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn grid_expectation_is_invariant_under_relabel_and_reversal(
        w in word_over(1..=3, 2..5),
        h in 0.55f64..0.9,
        m in 1usize..5,
    ) {
        let base = approx_expected_word(&w, h, m).unwrap();
        let swapped = Word::new(w.letters().iter().map(|l| 4 - l).collect());
        for other in [w.reversed(), w.canonical_relabel(), swapped] {
            let v = approx_expected_word(&other, h, m).unwrap();
            prop_assert!((v - base).abs() <= 1e-12 * (1.0 + base.abs()), "{w} vs {other}: {base} {v}");
        }
    }

    #[test]
    fn monte_carlo_is_reproducible_per_seed(seed in any::<u64>(), h in 0.55f64..0.9) {
        let vf = VectorFieldSet::constant(vec![vec![0.0], vec![1.0]]);
        let cfg = McConfig { paths: 64, grid: 8, steps: 1, seed };
        let run = || mc_weak_value(&vf, |y| y[0] * y[0], &[0.5], h, 1.0, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = pool.install(run);
        prop_assert_eq!(run(), single);
    }
}
