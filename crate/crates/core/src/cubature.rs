//! Cubature formulas on fBm path space.
//!
//! A cubature formula of degree `m` is a finite set of bounded-variation paths
//! with positive weights whose weighted iterated integrals reproduce the
//! expected signature of time-augmented fBm on every word of weight at most
//! `m`, where a word of length `k` with `z` time letters weighs
//! `2Hk + (2 - 2H)z`. This module builds the explicit one-dimensional
//! three-path formula, solves the polynomial system behind it, and checks the
//! cubature identity word by word.

use crate::expected_signature::{
    brownian_expected_word, closed_form, expected_word, SignatureError,
};
use crate::quadrature::{gauss_legendre, QuadConfig};
use crate::scalar::{from_count, Scalar};
use crate::tensor_algebra::{path_signature, PiecewiseLinearPath, TensorError, Word};
use num_traits::Float;
use rayon::prelude::*;
use thiserror::Error;

/// Highest weight the degree machinery enumerates.
pub const MAX_DEGREE: u32 = 6;

/// Highest degree [`verify_cubature`] accepts.
pub const MAX_VERIFIED_DEGREE: u32 = 5;

/// Per-word agreement required by [`verify_cubature`], on top of the
/// expected side's own error bar.
pub const MATCH_TOLERANCE: f64 = 1e-9;

/// Weight up to which [`verify_cubature`] scans for the first mismatching
/// word.
pub const MEASURE_CAP: u32 = 8;

/// Slack used when comparing word weights with an integer degree.
const WEIGHT_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CubatureError {
    #[error("Hurst index {0} is outside [1/2, 1)")]
    InvalidHurst(f64),
    #[error("degree {0} exceeds the supported maximum of {1}")]
    DegreeTooLarge(u32, u32),
    #[error("alphabet of {0} spatial letters is not supported here")]
    Dimension(usize),
    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),
    #[error("invalid cubature formula: {0}")]
    BadFormula(String),
    #[error(transparent)]
    Signature(#[from] SignatureError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

fn check_hurst(h: f64) -> Result<(), CubatureError> {
    if (0.5..1.0).contains(&h) {
        Ok(())
    } else {
        Err(CubatureError::InvalidHurst(h))
    }
}

/// Weight bookkeeping for a fixed Hurst index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeWeightRule {
    hurst: f64,
}

impl DegreeWeightRule {
    pub fn new(hurst: f64) -> Result<Self, CubatureError> {
        check_hurst(hurst)?;
        Ok(Self { hurst })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn weight(&self, word: &Word) -> f64 {
        word_weight(word, self.hurst)
    }

    /// Whether `word` belongs to the degree-`m` index set.
    pub fn admits(&self, word: &Word, m: f64) -> bool {
        self.weight(word) <= m + WEIGHT_SLACK
    }
}

/// `2H |word| + (2 - 2H) #zeros`.
pub fn word_weight(word: &Word, hurst: f64) -> f64 {
    2.0 * hurst * word.len() as f64 + (2.0 - 2.0 * hurst) * word.zero_count() as f64
}

/// Every word over `{0, .., d}` of weight at most `m`, the empty word
/// included, ordered by length and then lexicographically.
pub fn words_of_degree(m: u32, hurst: f64, d: usize) -> Result<Vec<Word>, CubatureError> {
    if m > MAX_DEGREE {
        return Err(CubatureError::DegreeTooLarge(m, MAX_DEGREE));
    }
    words_up_to_weight(m as f64, hurst, d)
}

/// As [`words_of_degree`] for a real weight cap.
pub fn words_up_to_weight(cap: f64, hurst: f64, d: usize) -> Result<Vec<Word>, CubatureError> {
    let rule = DegreeWeightRule::new(hurst)?;
    if d == 0 || d > 2 {
        return Err(CubatureError::Dimension(d));
    }
    let mut out = vec![Word::empty()];
    let mut frontier = vec![Word::empty()];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for w in &frontier {
            for letter in 0..=d {
                let longer = w.concat(&Word::new(vec![letter]));
                if rule.admits(&longer, cap) {
                    next.push(longer);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    Ok(out)
}

/// Weighted piecewise-linear paths in `R^{1+d}` on `[0, 1]` (or `[0, T]`
/// after rescaling).
#[derive(Debug, Clone, PartialEq)]
pub struct CubatureFormula<F> {
    pub weights: Vec<F>,
    pub paths: Vec<PiecewiseLinearPath<F>>,
    pub claimed_degree: u32,
}

impl<F: Scalar + Float> CubatureFormula<F> {
    /// Checks positivity, unit total weight and that every path starts at
    /// the origin.
    pub fn new(
        weights: Vec<F>,
        paths: Vec<PiecewiseLinearPath<F>>,
        claimed_degree: u32,
    ) -> Result<Self, CubatureError> {
        if weights.is_empty() || weights.len() != paths.len() {
            return Err(CubatureError::BadFormula(format!(
                "{} weights for {} paths",
                weights.len(),
                paths.len()
            )));
        }
        if weights.iter().any(|w| !(*w > F::zero())) {
            return Err(CubatureError::BadFormula("weights must be positive".into()));
        }
        let total = weights.iter().fold(F::zero(), |a, w| a + *w);
        let slack = F::epsilon() * from_count::<F>(16);
        if (total - F::one()).abs() > slack {
            return Err(CubatureError::BadFormula("weights must sum to one".into()));
        }
        let width = paths[0].width();
        for p in &paths {
            if p.width() != width {
                return Err(CubatureError::BadFormula("paths differ in width".into()));
            }
            if p.values()[0].iter().any(|x| *x != F::zero()) {
                return Err(CubatureError::BadFormula("paths must start at the origin".into()));
            }
        }
        Ok(Self {
            weights,
            paths,
            claimed_degree,
        })
    }

    /// Number of spatial coordinates.
    pub fn spatial_dim(&self) -> usize {
        self.paths[0].width() - 1
    }

    /// Right end of the time interval.
    pub fn horizon(&self) -> F {
        *self.paths[0].breakpoints().last().expect("paths have breakpoints")
    }
}

/// Degree the explicit formula is stated to reach.
pub fn claimed_degree(hurst: f64) -> u32 {
    if hurst < 2.0 / 3.0 {
        5
    } else {
        4
    }
}

fn discriminant<F: Float>(h: F) -> F {
    let c = |x: f64| F::from(x).expect("float constant");
    c(-96.0) * h * h + c(66.0) * h + c(57.0)
}

/// Three-path formula driven by `ω, -ω, 0` with weights `1/6, 1/6, 2/3`,
/// where `ω` has breakpoints `0, 1/3, 2/3, 1` and slopes `2α - β`,
/// `2β - α`, `2α - β` with `α = √3` and
/// `β = √(-96H² + 66H + 57) / (2H + 1)`.
pub fn explicit_formula<F: Scalar + Float>(hurst: F) -> Result<CubatureFormula<F>, CubatureError> {
    let h = hurst.to_f64().unwrap_or(f64::NAN);
    check_hurst(h)?;
    let c = |x: f64| F::from(x).expect("float constant");
    let disc = discriminant(hurst);
    assert!(disc > F::zero(), "discriminant is positive for H < 1");
    let alpha = c(3.0).sqrt();
    let beta = disc.sqrt() / (c(2.0) * hurst + F::one());
    let slopes = [
        c(2.0) * alpha - beta,
        c(2.0) * beta - alpha,
        c(2.0) * alpha - beta,
    ];
    three_path_formula(&slopes, claimed_degree(h))
}

fn three_path_formula<F: Scalar + Float>(
    slopes: &[F; 3],
    degree: u32,
) -> Result<CubatureFormula<F>, CubatureError> {
    let three = from_count::<F>(3);
    let times: Vec<F> = (0..4).map(|i| from_count::<F>(i) / three).collect();
    let mut values = vec![F::zero()];
    for (i, s) in slopes.iter().enumerate() {
        values.push(values[i] + *s / three);
    }
    let build = |sign: F| {
        PiecewiseLinearPath::from_spatial(
            times.clone(),
            values.iter().map(|v| vec![sign * *v]).collect(),
        )
    };
    let paths = vec![build(F::one())?, build(-F::one())?, build(F::zero())?];
    let sixth = F::one() / from_count::<F>(6);
    CubatureFormula::new(
        vec![sixth, sixth, F::one() - sixth - sixth],
        paths,
        degree,
    )
}

/// Which root of the final quadratic in `c₁` to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootBranch {
    /// The smaller root, which reproduces [`explicit_formula`].
    Minus,
    Plus,
}

impl std::str::FromStr for RootBranch {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "minus" => Ok(Self::Minus),
            "plus" => Ok(Self::Plus),
            other => Err(format!("unknown branch {other:?}, expected plus or minus")),
        }
    }
}

impl std::fmt::Display for RootBranch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Minus => "minus",
            Self::Plus => "plus",
        })
    }
}

/// Solution of the symmetric ansatz: `ω` equals `a t`, `b₁ t + b₀` and
/// `c₁ t + c₀` on the three thirds of `[0, 1]`, weight `signed_weight` on each of `±ω` and
/// `zero_weight` on the zero path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnsatzSolution {
    pub hurst: f64,
    pub signed_weight: f64,
    pub zero_weight: f64,
    pub a: f64,
    pub b1: f64,
    pub b0: f64,
    pub c1: f64,
    pub c0: f64,
    pub branch: RootBranch,
}

/// Solves the moment system. The two fourth-moment and variance equations
/// force a signed weight of `1/6` and `c₁ + c₀ = √3`; continuity then expresses everything
/// in `c₁`, which solves `c₁²/27 - (4√3/27) c₁ = (5 - 8H) / (3(2H + 1))`.
pub fn solve_ansatz(hurst: f64, branch: RootBranch) -> Result<AnsatzSolution, CubatureError> {
    check_hurst(hurst)?;
    let signed_weight = 1.0 / 6.0;
    let zero_weight = 1.0 - 2.0 * signed_weight;
    let end = (1.0 / (2.0 * signed_weight)).sqrt();
    // c₁² + p c₁ + q = 0
    let p = -4.0 * 3f64.sqrt();
    let q = -27.0 * (5.0 - 8.0 * hurst) / (3.0 * (2.0 * hurst + 1.0));
    let root = (p * p / 4.0 - q).sqrt();
    let c1 = match branch {
        RootBranch::Minus => -p / 2.0 - root,
        RootBranch::Plus => -p / 2.0 + root,
    };
    let c0 = end - c1;
    let a = c1;
    let b0 = -c0;
    let b1 = a - 3.0 * b0;
    Ok(AnsatzSolution {
        hurst,
        signed_weight,
        zero_weight,
        a,
        b1,
        b0,
        c1,
        c0,
        branch,
    })
}

impl AnsatzSolution {
    /// Left minus right side of each of the six moment equations.
    pub fn residuals(&self) -> [f64; 6] {
        let Self {
            hurst: h,
            signed_weight: l1,
            zero_weight: l3,
            a,
            b1,
            b0,
            c1,
            c0,
            ..
        } = *self;
        let end = c1 + c0;
        let first = a * a / 81.0;
        let middle = (7.0 * b1 * b1 / 27.0 + b1 * b0 + b0 * b0) / 3.0;
        let last = (19.0 * c1 * c1 / 27.0 + 5.0 * c1 * c0 / 3.0 + c0 * c0) / 3.0;
        let cross = end * (a / 18.0 + b1 / 6.0 + b0 / 3.0);
        let variance = 1.0 / (2.0 * l1 * (2.0 * h + 1.0));
        [
            2.0 * l1 + l3 - 1.0,
            2.0 * l1 * end * end - 1.0,
            first + middle + last - variance,
            first - 2.0 * cross
                + middle
                + 55.0 * c1 * c1 / 81.0
                + 2.0 * c0 * c0 / 3.0
                + 4.0 * c1 * c0 / 3.0
                - variance,
            cross - first - middle + 7.0 * c1 * c1 / 162.0 + c1 * c0 / 18.0
                - (2.0 * h - 1.0) / (4.0 * l1 * (2.0 * h + 1.0)),
            l1 * end.powi(4) - 1.5,
        ]
    }

    /// Mismatch of the path at `t = 1/3` and `t = 2/3`.
    pub fn continuity_residuals(&self) -> [f64; 2] {
        [
            self.a / 3.0 - (self.b1 / 3.0 + self.b0),
            2.0 * self.b1 / 3.0 + self.b0 - (2.0 * self.c1 / 3.0 + self.c0),
        ]
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals()
            .iter()
            .chain(self.continuity_residuals().iter())
            .fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn to_formula(&self) -> Result<CubatureFormula<f64>, CubatureError> {
        three_path_formula(&[self.a, self.b1, self.c1], claimed_degree(self.hurst))
    }
}

/// One word of a cubature check.
#[derive(Debug, Clone, PartialEq)]
pub struct CubatureEntry {
    pub word: Word,
    pub weight: f64,
    /// Expected signature coefficient.
    pub lhs: f64,
    /// Error bar on `lhs` (zero for closed forms).
    pub lhs_error: f64,
    /// Weighted path signatures via Chen's identity.
    pub rhs: f64,
    /// Weighted path signatures via direct nested quadrature.
    pub rhs_direct: f64,
    pub abs_err: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubatureReport {
    pub hurst: f64,
    pub degree: u32,
    pub claimed_degree: u32,
    /// Words of weight at most `degree`.
    pub entries: Vec<CubatureEntry>,
    pub max_err: f64,
    /// Largest gap between the two deterministic computations.
    pub max_rhs_disagreement: f64,
    pub passed: bool,
    /// Largest integer `m` such that every word of weight at most `m`
    /// matches, scanned up to [`MEASURE_CAP`].
    pub measured_degree: u32,
    /// Lightest word that fails to match, if any was found in the scan.
    pub first_failure: Option<(Word, f64)>,
}

fn expected_side(word: &Word, hurst: f64, quad: &QuadConfig) -> Result<(f64, f64), CubatureError> {
    if let Some(v) = closed_form(word, hurst) {
        return Ok((v, 0.0));
    }
    if word.letters().iter().any(|&l| l != 0 && word.count(l) % 2 == 1) {
        return Ok((0.0, 0.0));
    }
    if hurst == 0.5 {
        return Ok((brownian_expected_word(word), 0.0));
    }
    let e = expected_word(word, hurst, quad)?;
    Ok((e.value, e.error))
}

fn check_entry(
    word: &Word,
    formula: &CubatureFormula<f64>,
    signatures: &[crate::tensor_algebra::TruncatedTensor<f64>],
    hurst: f64,
    quad: &QuadConfig,
) -> Result<CubatureEntry, CubatureError> {
    let (lhs, lhs_error) = expected_side(word, hurst, quad)?;
    let rhs = formula
        .weights
        .iter()
        .zip(signatures)
        .map(|(w, s)| w * s.coeff(word))
        .sum::<f64>();
    let rhs_direct = formula
        .weights
        .iter()
        .zip(&formula.paths)
        .map(|(w, p)| w * direct_iterated_integral(p, word))
        .sum::<f64>();
    let abs_err = (lhs - rhs).abs();
    Ok(CubatureEntry {
        word: word.clone(),
        weight: word_weight(word, hurst),
        lhs,
        lhs_error,
        rhs,
        rhs_direct,
        abs_err,
        passed: abs_err <= MATCH_TOLERANCE + lhs_error,
    })
}

/// Compares both sides of the cubature identity on every word of weight at
/// most `degree`, and scans heavier words up to [`MEASURE_CAP`] to measure
/// the degree actually attained.
pub fn verify_cubature(
    formula: &CubatureFormula<f64>,
    hurst: f64,
    degree: u32,
    quad: &QuadConfig,
) -> Result<CubatureReport, CubatureError> {
    check_hurst(hurst)?;
    if degree > MAX_VERIFIED_DEGREE {
        return Err(CubatureError::DegreeTooLarge(degree, MAX_VERIFIED_DEGREE));
    }
    if formula.spatial_dim() != 1 {
        return Err(CubatureError::Dimension(formula.spatial_dim()));
    }
    let words = words_up_to_weight(MEASURE_CAP as f64, hurst, 1)?;
    let depth = words.iter().map(Word::len).max().unwrap_or(0);
    let signatures: Vec<_> = formula
        .paths
        .iter()
        .map(|p| path_signature(p, depth))
        .collect();
    let mut all = words
        .par_iter()
        .map(|w| check_entry(w, formula, &signatures, hurst, quad))
        .collect::<Result<Vec<_>, _>>()?;
    all.sort_by(|x, y| {
        x.weight
            .total_cmp(&y.weight)
            .then_with(|| x.word.letters().cmp(y.word.letters()))
    });
    let first_failure = all
        .iter()
        .find(|e| !e.passed)
        .map(|e| (e.word.clone(), e.weight));
    let measured_degree = match &first_failure {
        Some((_, w)) => ((w - WEIGHT_SLACK).ceil() as u32).saturating_sub(1),
        None => MEASURE_CAP,
    };
    let rule = DegreeWeightRule::new(hurst)?;
    let mut entries: Vec<CubatureEntry> = all
        .into_iter()
        .filter(|e| rule.admits(&e.word, degree as f64))
        .collect();
    entries.sort_by(|x, y| {
        x.word
            .len()
            .cmp(&y.word.len())
            .then_with(|| x.word.letters().cmp(y.word.letters()))
    });
    let max_err = entries.iter().map(|e| e.abs_err).fold(0.0, f64::max);
    let max_rhs_disagreement = entries
        .iter()
        .map(|e| (e.rhs - e.rhs_direct).abs())
        .fold(0.0, f64::max);
    Ok(CubatureReport {
        hurst,
        degree,
        claimed_degree: formula.claimed_degree,
        passed: entries.iter().all(|e| e.passed),
        entries,
        max_err,
        max_rhs_disagreement,
        measured_degree,
        first_failure,
    })
}

/// Iterated integral of `word` along `path`, computed without Chen's
/// identity: the running integrals are carried across breakpoints and each
/// piece is integrated with a Gauss-Legendre rule exact for the polynomial
/// integrands that arise.
pub fn direct_iterated_integral(path: &PiecewiseLinearPath<f64>, word: &Word) -> f64 {
    let letters = word.letters();
    if letters.is_empty() {
        return 1.0;
    }
    let breaks = path.breakpoints();
    let velocity: Vec<Vec<f64>> = (0..path.pieces())
        .map(|k| {
            let dt = breaks[k + 1] - breaks[k];
            path.increment(k).iter().map(|x| x / dt).collect()
        })
        .collect();
    let (nodes, gl_weights) = gauss_legendre(letters.len().div_ceil(2) + 1);
    let mut nested = Nested {
        letters,
        breaks,
        velocity: &velocity,
        nodes: &nodes,
        gl_weights: &gl_weights,
        at_breaks: vec![vec![1.0; breaks.len()]],
    };
    for level in 1..=letters.len() {
        let mut row = vec![0.0; breaks.len()];
        for k in 0..path.pieces() {
            row[k + 1] = row[k] + nested.piece_integral(level, k, breaks[k + 1]);
        }
        nested.at_breaks.push(row);
    }
    nested.at_breaks[letters.len()][breaks.len() - 1]
}

struct Nested<'a> {
    letters: &'a [usize],
    breaks: &'a [f64],
    velocity: &'a [Vec<f64>],
    nodes: &'a [f64],
    gl_weights: &'a [f64],
    /// `at_breaks[j][p]` is the integral of the first `j` letters up to
    /// breakpoint `p`.
    at_breaks: Vec<Vec<f64>>,
}

impl Nested<'_> {
    /// Integral over `[breaks[k], t]` of velocity `letters[level-1]` times
    /// the running integral of the first `level - 1` letters.
    fn piece_integral(&self, level: usize, k: usize, t: f64) -> f64 {
        let v = self.velocity[k][self.letters[level - 1]];
        if v == 0.0 {
            return 0.0;
        }
        let (lo, half) = (self.breaks[k], 0.5 * (t - self.breaks[k]));
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(self.gl_weights) {
            acc += w * self.running(level - 1, k, lo + half * (x + 1.0));
        }
        v * half * acc
    }

    fn running(&self, level: usize, k: usize, t: f64) -> f64 {
        if level == 0 {
            return 1.0;
        }
        self.at_breaks[level][k] + self.piece_integral(level, k, t)
    }
}

/// The formula transported to `[0, horizon]`: times scale by `horizon`,
/// spatial coordinates by `horizon^H`, weights are unchanged.
pub fn rescale_formula<F: Scalar + Float>(
    formula: &CubatureFormula<F>,
    horizon: F,
    hurst: F,
) -> Result<CubatureFormula<F>, CubatureError> {
    if !(horizon > F::zero()) {
        return Err(CubatureError::BadHorizon(horizon.to_f64().unwrap_or(f64::NAN)));
    }
    let space = horizon.powf(hurst);
    let paths = formula
        .paths
        .iter()
        .map(|p| p.map_spatial(|x| *x * space).map_time(|t| *t * horizon))
        .collect();
    Ok(CubatureFormula {
        weights: formula.weights.clone(),
        paths,
        claimed_degree: formula.claimed_degree,
    })
}
