//! Expected iterated integrals of time-augmented fractional Brownian motion
//! with Hurst index `H > 1/2`.
//!
//! Gaussian pairing reduces the expectation of a word to a sum over matchings
//! of its spatial positions: each pair `(a, b)` contributes the kernel
//! `c_H (t_b - t_a)^{2H-2}` with `c_H = H(2H-1)`, time positions carry unit
//! density, and the product is integrated over the ordered simplex. The
//! simplex integrals come from [`crate::quadrature`].

use crate::combinatorics::{pairings_of, permutation_count, refined_count_bound, RefinedBound};
use crate::quadrature::{simplex_pair_integral, simplex_volume, Estimate, QuadConfig, QuadError};
use crate::summation::CompensatedSum;
use crate::tensor_algebra::{TensorError, TruncatedTensor, Word};
use rayon::prelude::*;
use serde::Deserialize;
use std::collections::HashMap;
use std::sync::LazyLock;
use thiserror::Error;

/// Largest number of spatial letters a word may carry.
pub const MAX_SPATIAL_LETTERS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignatureError {
    #[error("Hurst index {0} is outside {1}")]
    InvalidHurst(f64, &'static str),
    #[error("need at least one spatial dimension")]
    NoDimensions,
    #[error("word has {0} spatial letters; at most {MAX_SPATIAL_LETTERS} are supported")]
    TooManySpatialLetters(usize),
    #[error("depth {0} exceeds the supported maximum of {MAX_SPATIAL_LETTERS}")]
    DepthTooLarge(usize),
    #[error("word {0} contains the time letter; only spatial words are accepted here")]
    TimeLetter(String),
    #[error("word {0} has odd length")]
    OddLength(String),
    #[error("times must be non-negative")]
    NegativeTime,
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

fn check_open_unit(h: f64) -> Result<(), SignatureError> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(SignatureError::InvalidHurst(h, "(0, 1)"))
    }
}

fn check_rough_regime(h: f64) -> Result<(), SignatureError> {
    if h > 0.5 && h < 1.0 {
        Ok(())
    } else {
        Err(SignatureError::InvalidHurst(h, "(1/2, 1)"))
    }
}

/// Hurst index and number of spatial components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbmParams {
    hurst: f64,
    d: usize,
}

impl FbmParams {
    pub fn new(hurst: f64, d: usize) -> Result<Self, SignatureError> {
        check_rough_regime(hurst)?;
        if d == 0 {
            return Err(SignatureError::NoDimensions);
        }
        Ok(Self { hurst, d })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn d(&self) -> usize {
        self.d
    }
}

/// Prefactor and exponent of the covariance density `c_H |t-s|^{2H-2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConstant {
    pub prefactor: f64,
    pub exponent: f64,
}

impl KernelConstant {
    pub fn new(hurst: f64) -> Result<Self, SignatureError> {
        check_rough_regime(hurst)?;
        Ok(Self {
            prefactor: hurst * (2.0 * hurst - 1.0),
            exponent: 2.0 * hurst - 2.0,
        })
    }
}

/// `E[B_s B_t] = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2`.
pub fn covariance(s: f64, t: f64, hurst: f64) -> Result<f64, SignatureError> {
    check_open_unit(hurst)?;
    if s < 0.0 || t < 0.0 {
        return Err(SignatureError::NegativeTime);
    }
    let e = 2.0 * hurst;
    Ok(0.5 * (s.powf(e) + t.powf(e) - (t - s).abs().powf(e)))
}

/// `k H + (1-H) #zeros` for a word of length `k`: the power of the interval
/// length by which the expected iterated integral scales.
pub fn scaling_exponent(word: &Word, hurst: f64) -> f64 {
    word.len() as f64 * hurst + (1.0 - hurst) * word.zero_count() as f64
}

/// Index pairs of one matching.
type Pairing = Vec<(usize, usize)>;

/// Spatial positions of `word` and the pairings of them that join equal
/// letters, or `None` when some letter occurs an odd number of times.
fn spatial_pairings(word: &Word) -> Option<(Vec<usize>, Vec<Pairing>)> {
    let positions: Vec<usize> = word
        .letters()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l != 0)
        .map(|(i, _)| i)
        .collect();
    let letters: Vec<usize> = positions.iter().map(|&i| word.letters()[i]).collect();
    let odd = letters
        .iter()
        .any(|l| letters.iter().filter(|&m| m == l).count() % 2 == 1);
    if odd {
        return None;
    }
    let matchings = pairings_of(&letters)
        .into_iter()
        .map(|m| m.relocate(&positions).pairs().to_vec())
        .collect();
    Some((positions, matchings))
}

/// Expected iterated integral of `word` over `[0, 1]`.
pub fn expected_word(word: &Word, hurst: f64, quad: &QuadConfig) -> Result<Estimate, SignatureError> {
    expected_word_on(word, hurst, 1.0, quad)
}

/// Expected iterated integral of `word` over `[0, horizon]`, integrating the
/// rescaled simplex directly.
pub fn expected_word_on(
    word: &Word,
    hurst: f64,
    horizon: f64,
    quad: &QuadConfig,
) -> Result<Estimate, SignatureError> {
    let kernel = KernelConstant::new(hurst)?;
    let spatial = word.nonzero_count();
    if spatial > MAX_SPATIAL_LETTERS {
        return Err(SignatureError::TooManySpatialLetters(spatial));
    }
    let Some((_, matchings)) = spatial_pairings(word) else {
        return Ok(Estimate::exact(0.0));
    };
    if spatial == 0 {
        return Ok(Estimate::exact(simplex_volume(word.len(), horizon)));
    }
    let kappa = -kernel.exponent;
    let n = word.len();
    let scale = kernel.prefactor.powi((spatial / 2) as i32);
    let per_item = item_config(quad, scale, matchings.len());
    let parts = matchings
        .par_iter()
        .map(|pairs| simplex_pair_integral(n, pairs, kappa, horizon, &per_item))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| rescale_failure(e, scale))?;
    Ok(combine(&parts, scale))
}

/// The tolerance in `quad` applies to the final expected value; each of the
/// `items` simplex integrals is later multiplied by `scale`.
fn item_config(quad: &QuadConfig, scale: f64, items: usize) -> QuadConfig {
    QuadConfig {
        tolerance: quad.tolerance / (scale * items.max(1) as f64),
        ..*quad
    }
}

fn rescale_failure(e: QuadError, scale: f64) -> SignatureError {
    match e {
        QuadError::ToleranceNotMet {
            value,
            achieved,
            requested,
        } => QuadError::ToleranceNotMet {
            value: value * scale,
            achieved: achieved * scale,
            requested: requested * scale,
        }
        .into(),
        other => other.into(),
    }
}

fn combine(parts: &[Estimate], scale: f64) -> Estimate {
    let value: CompensatedSum = parts.iter().map(|e| e.value).collect();
    let error: f64 = parts.iter().map(|e| e.error).sum();
    Estimate {
        value: value.value(),
        error,
    }
    .scale(scale)
}

/// Expected signature values together with per-word error estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedTensor {
    pub values: TruncatedTensor<f64>,
    pub errors: TruncatedTensor<f64>,
}

/// All expected iterated integrals up to `depth` over the alphabet
/// `{0, ..., d}`. Words that differ only by a relabelling of spatial letters
/// are computed once, and every simplex integral is computed once per
/// matching shape.
pub fn expected_tensor(
    params: &FbmParams,
    depth: usize,
    quad: &QuadConfig,
) -> Result<ExpectedTensor, SignatureError> {
    if depth > MAX_SPATIAL_LETTERS {
        return Err(SignatureError::DepthTooLarge(depth));
    }
    let kernel = KernelConstant::new(params.hurst())?;
    let kappa = -kernel.exponent;
    let width = params.d() + 1;
    let mut values = TruncatedTensor::zero(width, depth)?;
    let mut errors = TruncatedTensor::zero(width, depth)?;
    values.set_coeff(&Word::empty(), 1.0)?;

    let words: Vec<Word> = (1..=depth)
        .flat_map(|n| Word::all_of_length(params.d(), n))
        .collect();
    let mut canonical: Vec<Word> = words.iter().map(Word::canonical_relabel).collect();
    canonical.sort();
    canonical.dedup();

    // every distinct (length, pairs) shape across all canonical words
    let mut shapes: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
    let mut plan: HashMap<Word, Option<Vec<usize>>> = HashMap::new();
    for w in &canonical {
        let entry = spatial_pairings(w).map(|(_, ms)| {
            ms.into_iter()
                .map(|pairs| {
                    let key = (w.len(), pairs);
                    match shapes.iter().position(|s| *s == key) {
                        Some(i) => i,
                        None => {
                            shapes.push(key);
                            shapes.len() - 1
                        }
                    }
                })
                .collect()
        });
        plan.insert(w.clone(), entry);
    }
    let integrals = shapes
        .par_iter()
        .map(|(n, pairs)| {
            if pairs.is_empty() {
                Ok(Estimate::exact(simplex_volume(*n, 1.0)))
            } else {
                let k = pairs.len();
                let scale = kernel.prefactor.powi(k as i32);
                let most_matchings = (1..2 * k).step_by(2).product();
                simplex_pair_integral(*n, pairs, kappa, 1.0, &item_config(quad, scale, most_matchings))
                    .map_err(|e| rescale_failure(e, scale))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;

    for w in &words {
        let c = w.canonical_relabel();
        let est = match &plan[&c] {
            None => Estimate::exact(0.0),
            Some(ids) => {
                let parts: Vec<Estimate> = ids.iter().map(|&i| integrals[i]).collect();
                combine(&parts, kernel.prefactor.powi((w.nonzero_count() / 2) as i32))
            }
        };
        values.set_coeff(w, est.value)?;
        errors.set_coeff(w, est.error)?;
    }
    Ok(ExpectedTensor { values, errors })
}

/// Expected signature coefficient of time-augmented standard Brownian motion,
/// the `H = 1/2` case. The expected signature there is
/// `exp(e_0 + (1/2) Σ_i e_i ⊗ e_i)`, so the coefficient of a word is the sum,
/// over ways of cutting it into blocks `(0)` and `(i,i)`, of
/// `2^{-#pairs} / #blocks!`.
pub fn brownian_expected_word(word: &Word) -> f64 {
    let letters = word.letters();
    let n = letters.len();
    // ways[pos][blocks] = summed weight of parsings of letters[..pos]
    let mut ways = vec![vec![0.0f64; n + 1]; n + 1];
    ways[0][0] = 1.0;
    for pos in 0..n {
        for blocks in 0..=pos {
            let w = ways[pos][blocks];
            if w == 0.0 {
                continue;
            }
            if letters[pos] == 0 {
                ways[pos + 1][blocks + 1] += w;
            } else if pos + 1 < n && letters[pos + 1] == letters[pos] {
                ways[pos + 2][blocks + 1] += 0.5 * w;
            }
        }
    }
    let mut total = 0.0;
    let mut fact = 1.0;
    for (blocks, ways) in ways[n].iter().enumerate() {
        if blocks > 0 {
            fact *= blocks as f64;
        }
        total += ways / fact;
    }
    total
}

#[derive(Debug, Deserialize)]
struct RawClosedForm {
    word: String,
    degree: String,
    value: String,
    num: [f64; 2],
    den: [f64; 2],
}

/// A tabulated expected iterated integral whose value is `(a H + b) / (c H + d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm {
    pub word: Word,
    /// Weight label of the word, e.g. `"4H+2"`.
    pub degree: String,
    /// Human-readable value, e.g. `"(2H-1)/(2(2H+1))"`.
    pub formula: String,
    numerator: [f64; 2],
    denominator: [f64; 2],
}

impl ClosedForm {
    pub fn evaluate(&self, hurst: f64) -> f64 {
        (self.numerator[0] * hurst + self.numerator[1])
            / (self.denominator[0] * hurst + self.denominator[1])
    }
}

static CLOSED_FORMS: LazyLock<Vec<ClosedForm>> = LazyLock::new(|| {
    let raw: Vec<RawClosedForm> =
        serde_json::from_str(include_str!("../data/closed_forms.json")).expect("bundled table parses");
    raw.into_iter()
        .map(|r| ClosedForm {
            word: r.word.parse().expect("bundled words parse"),
            degree: r.degree,
            formula: r.value,
            numerator: r.num,
            denominator: r.den,
        })
        .collect()
});

/// The bundled table of closed-form expected iterated integrals for the
/// one-dimensional time-augmented process.
pub fn closed_form_table() -> &'static [ClosedForm] {
    &CLOSED_FORMS
}

/// Closed-form value of `word` at `hurst`, if the word is tabulated.
pub fn closed_form(word: &Word, hurst: f64) -> Option<f64> {
    CLOSED_FORMS
        .iter()
        .find(|c| c.word == *word)
        .map(|c| c.evaluate(hurst))
}

/// Comparison of an expected spatial word against the factorial decay bound
/// and its letter-count refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub word: Word,
    pub hurst: f64,
    pub value: f64,
    pub error: f64,
    /// `1 / (k! 2^k)` for a word of length `2k`.
    pub bound: f64,
    /// Number of distinct letters.
    pub distinct_letters: usize,
    /// Letter-count refinement `count_bound / (k! 2^k (2k)!)`; zero when
    /// there are more distinct letters than pairs.
    pub refined_bound: f64,
    /// `permutation_count / (k! 2^k (2k)!)`, the value the cube
    /// symmetrisation argument would give.
    pub symmetrised_candidate: f64,
    /// `value - symmetrised_candidate`.
    pub candidate_difference: f64,
    /// `value <= bound` up to the quadrature error and tolerance.
    pub passes: bool,
    /// `value <= refined_bound` up to the same margin.
    pub refined_passes: bool,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Evaluates a spatial word and compares it with `1/(k! 2^k)`.
pub fn decay_bound_check(
    word: &Word,
    hurst: f64,
    quad: &QuadConfig,
) -> Result<DecayReport, SignatureError> {
    if word.zero_count() > 0 {
        return Err(SignatureError::TimeLetter(word.to_string()));
    }
    if word.len() % 2 == 1 || word.is_empty() {
        return Err(SignatureError::OddLength(word.to_string()));
    }
    let est = expected_word(word, hurst, quad)?;
    let k = word.len() / 2;
    let base = factorial(k) * 2f64.powi(k as i32);
    let bound = 1.0 / base;
    let p = word.distinct_nonzero();
    let scale = base * factorial(word.len());
    let refined_bound = match refined_count_bound(k as u64, p as u64) {
        RefinedBound::Count(c) => c as f64 / scale,
        RefinedBound::ZeroExpectation => 0.0,
    };
    let count = permutation_count(word).expect("spatial word of even length") as f64;
    let candidate = count / scale;
    let margin = est.error + quad.tolerance;
    Ok(DecayReport {
        word: word.clone(),
        hurst,
        value: est.value,
        error: est.error,
        bound,
        distinct_letters: p,
        refined_bound,
        symmetrised_candidate: candidate,
        candidate_difference: est.value - candidate,
        passes: est.value <= bound + margin,
        refined_passes: est.value <= refined_bound + margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn covariance_examples() {
        assert!((covariance(1.0, 1.0, 0.3).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(covariance(0.0, 0.7, 0.8).unwrap(), 0.0);
        assert!((covariance(1.0, 2.0, 0.75).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert!(covariance(1.0, 1.0, 1.0).is_err());
        assert!(covariance(-1.0, 1.0, 0.7).is_err());
    }

    #[test]
    fn covariance_symmetric_with_variance_on_diagonal() {
        for (s, t) in [(0.2, 0.9), (1.5, 0.3)] {
            let a = covariance(s, t, 0.65).unwrap();
            let b = covariance(t, s, 0.65).unwrap();
            assert_eq!(a, b);
        }
        assert!((covariance(2.0, 2.0, 0.65).unwrap() - 2f64.powf(1.3)).abs() < 1e-14);
    }

    #[test]
    fn kernel_constant_ranges() {
        let k = KernelConstant::new(0.75).unwrap();
        assert_eq!(k.prefactor, 0.375);
        assert_eq!(k.exponent, -0.5);
        assert!(KernelConstant::new(0.5).is_err());
    }

    #[test]
    fn scaling_exponent_examples() {
        assert_eq!(scaling_exponent(&w("1,1"), 0.7), 1.4);
        assert_eq!(scaling_exponent(&w("0"), 0.7), 1.0);
        assert!((scaling_exponent(&w("1,0,1"), 0.7) - 2.4).abs() < 1e-15);
    }

    #[test]
    fn odd_words_vanish_exactly() {
        let q = QuadConfig::default();
        for s in ["1", "1,2", "1,1,1", "1,0,2,2", "2,1,1"] {
            assert_eq!(expected_word(&w(s), 0.7, &q).unwrap(), Estimate::exact(0.0));
        }
    }

    #[test]
    fn tabulated_values_reproduced() {
        let q = QuadConfig::default();
        for h in [0.6, 0.75, 0.9] {
            for entry in closed_form_table() {
                let got = expected_word(&entry.word, h, &q).unwrap().value;
                assert!(
                    (got - entry.evaluate(h)).abs() < 1e-9,
                    "{} at H={h}: {got}",
                    entry.word
                );
            }
        }
        assert_eq!(closed_form_table().len(), 17);
    }

    #[test]
    fn pure_time_words() {
        let e = expected_word(&w("0,0,0"), 0.6, &QuadConfig::default()).unwrap();
        assert!((e.value - 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn too_many_spatial_letters() {
        let r = expected_word(&w("1,1,1,1,1,1,1,1"), 0.7, &QuadConfig::default());
        assert_eq!(r, Err(SignatureError::TooManySpatialLetters(8)));
    }

    #[test]
    fn tensor_depth_two() {
        let p = FbmParams::new(0.7, 2).unwrap();
        let t = expected_tensor(&p, 2, &QuadConfig::default()).unwrap();
        assert!((t.values.coeff(&w("1,1")) - 0.5).abs() < 1e-12);
        assert!((t.values.coeff(&w("2,2")) - 0.5).abs() < 1e-12);
        assert_eq!(t.values.coeff(&w("1,2")), 0.0);
        assert_eq!(t.values.coeff(&w("1")), 0.0);
        assert!((t.values.coeff(&w("0,0")) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn brownian_coefficients() {
        assert_eq!(brownian_expected_word(&Word::empty()), 1.0);
        assert_eq!(brownian_expected_word(&w("1,1")), 0.5);
        assert_eq!(brownian_expected_word(&w("1,1,1,1")), 0.125);
        assert!((brownian_expected_word(&w("1,1,0")) - 0.25).abs() < 1e-16);
        assert_eq!(brownian_expected_word(&w("1,0,1")), 0.0);
        assert_eq!(brownian_expected_word(&w("1,2")), 0.0);
        // (0,1,1)+(1,1,0) blocks both orders: 1/2 * 1/2! each
        assert!((brownian_expected_word(&w("0,1,1")) - 0.25).abs() < 1e-16);
    }

    #[test]
    fn decay_report_single_letter_equality() {
        let r = decay_bound_check(&w("1,1,1,1"), 0.75, &QuadConfig::default()).unwrap();
        assert!((r.value - 0.125).abs() < 1e-10);
        assert_eq!(r.bound, 0.125);
        assert!(r.passes);
        assert!(r.candidate_difference.abs() < 1e-10);
    }

    #[test]
    fn decay_report_rejects_time_letters() {
        assert!(decay_bound_check(&w("1,0,1"), 0.75, &QuadConfig::default()).is_err());
        assert!(decay_bound_check(&w("1,1,1"), 0.75, &QuadConfig::default()).is_err());
    }
}
