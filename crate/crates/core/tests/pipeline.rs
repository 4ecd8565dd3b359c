//! Cross-module runs: exact values, grid approximations, cubature and the
//! weak SDE solver fed into one another.

use fbm_signature::cubature::{claimed_degree, explicit_formula, verify_cubature};
use fbm_signature::expected_signature::{brownian_expected_word, expected_word};
use fbm_signature::grid_approx::{approx_expected_word, gap_series};
use fbm_signature::sde::{cubature_weak_value, VectorFieldSet};
use fbm_signature::tensor_algebra::path_signature;
use fbm_signature::{QuadConfig, Word};

fn w(s: &str) -> Word {
    s.parse().unwrap()
}

#[test]
fn squared_endpoint_is_exact_on_every_grid() {
    // S_{ii} = (X^i_1)^2 / 2 and S_{iiii} = (X^i_1)^4 / 24 for any path, so
    // their means are 1/2 and 3/24 whatever the grid
    let quad = QuadConfig::default();
    for h in [0.55, 0.7, 0.9] {
        let exact = expected_word(&w("1,1"), h, &quad).unwrap();
        assert!((exact.value - 0.5).abs() < 1e-10);
        for m in [1, 3, 8] {
            assert!((approx_expected_word(&w("2,2"), h, m).unwrap() - 0.5).abs() < 1e-13);
            assert!((approx_expected_word(&w("1,1,1,1"), h, m).unwrap() - 0.125).abs() < 1e-13);
        }
    }
}

#[test]
fn grid_gaps_shrink_as_the_grid_refines() {
    let quad = QuadConfig::default();
    for word in ["1,1,2,2", "1,2,1,2", "1,2,2,1"] {
        // coarse grids may overshoot and cross the exact value; past that the
        // gap decreases steadily
        let gaps = gap_series(&w(word), 0.7, &[8, 16, 32, 64], &quad).unwrap();
        for pair in gaps.windows(2) {
            assert!(pair[1].gap < pair[0].gap, "{word}: {} then {}", pair[0].gap, pair[1].gap);
        }
    }
}

#[test]
fn explicit_formula_verifies_at_its_claimed_degree() {
    let quad = QuadConfig::default();
    for h in [0.5, 0.6, 0.75] {
        let formula = explicit_formula(h).unwrap();
        let report = verify_cubature(&formula, h, claimed_degree(h), &quad).unwrap();
        assert!(report.passed, "H = {h}: max error {}", report.max_err);
        assert!(report.measured_degree >= claimed_degree(h));
    }
}

#[test]
fn brownian_cubature_reproduces_exponential_moments() {
    let formula = explicit_formula(0.5).unwrap();
    for word in ["1,1", "0,1,1", "1,1,1,1", "0,0"] {
        let word = w(word);
        let avg: f64 = formula
            .weights
            .iter()
            .zip(&formula.paths)
            .map(|(wt, p)| wt * path_signature(p, 4).coeff(&word))
            .sum();
        assert!((avg - brownian_expected_word(&word)).abs() < 1e-13, "{word}");
    }
}

#[test]
fn cubature_weak_value_matches_gaussian_moments() {
    // dy = dB from x0: y_T is Gaussian with variance T^{2H}; the quartic moment
    // involves words of weight 8H, inside the attained degree at this index
    let h = 0.55f64;
    let x0 = 0.3f64;
    let formula = explicit_formula(h).unwrap();
    let vf = VectorFieldSet::constant(vec![vec![0.0], vec![1.0]]);
    for t in [0.5f64, 1.0, 2.0] {
        let v = t.powf(2.0 * h);
        let second = cubature_weak_value(&vf, |y| y[0] * y[0], &[x0], &formula, t, h, 1).unwrap();
        let fourth = cubature_weak_value(&vf, |y| y[0].powi(4), &[x0], &formula, t, h, 1).unwrap();
        assert!((second - (x0 * x0 + v)).abs() < 1e-12);
        let want = x0.powi(4) + 6.0 * x0 * x0 * v + 3.0 * v * v;
        assert!((fourth - want).abs() < 1e-11 * want, "T = {t}: {fourth} vs {want}");
    }
}
