//! The uniform-grid piecewise-linear approximation of fBm.
//!
//! On the grid `t_i = i/m` the interpolated process has constant velocity on
//! each cell, and the covariance of the velocities in cells `i` and `j` is
//! `c_H m^2 D[i][j]`, where `D[i][j]` is the integral of `|x - y|^{2H-2}`
//! over the cell pair. Expected iterated integrals of the approximation are
//! therefore finite sums over cell assignments, which this module evaluates
//! exactly. It also carries the rate-of-convergence experiment, the error
//! constants with a certified series tail, and a Cholesky sampler.

use crate::combinatorics::pairings_of;
use crate::expected_signature::{covariance, expected_word, KernelConstant, SignatureError};
use crate::quadrature::{QuadConfig, QuadError};
use crate::summation::CompensatedSum;
use crate::tensor_algebra::{PiecewiseLinearPath, TensorError, Word};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

/// Default cap on the number of weakly increasing cell assignments.
pub const DEFAULT_ASSIGNMENT_BUDGET: u128 = 10_000_000;

/// Largest grid the sampler accepts.
pub const MAX_SAMPLER_CELLS: usize = 4096;

/// Diagonal regularisation used when the covariance factorisation fails.
pub const SAMPLER_JITTER: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least one cell")]
    NoCells,
    #[error("cell pair ({i}, {j}) is outside a grid of {m} cells")]
    IndexOutOfRange { i: usize, j: usize, m: usize },
    #[error("word {0} contains the time letter; the grid expansion covers spatial words only")]
    TimeLetter(String),
    #[error("{count} cell assignments exceed the budget of {budget}")]
    BudgetExceeded { count: u128, budget: u128 },
    #[error("a slope fit needs at least 4 grid sizes, got {0}")]
    TooFewPoints(usize),
    #[error("every gap is zero up to the quadrature error; nothing to fit")]
    GapsVanish,
    #[error("gaps at m = {below:?} are below 10x their error bars; refusing to fit noise")]
    NoiseFloor { below: Vec<usize> },
    #[error("sampler supports at most {MAX_SAMPLER_CELLS} cells, got {0}")]
    TooManyCells(usize),
    #[error("covariance of {0} grid points is not positive definite even after jitter")]
    Factorization(usize),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error(transparent)]
    Signature(#[from] SignatureError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

impl From<QuadError> for GridError {
    fn from(e: QuadError) -> Self {
        GridError::Signature(e.into())
    }
}

/// A uniform grid of `m` cells on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    m: usize,
}

impl GridSpec {
    pub fn new(m: usize) -> Result<Self, GridError> {
        if m == 0 {
            return Err(GridError::NoCells);
        }
        Ok(Self { m })
    }

    pub fn cells(&self) -> usize {
        self.m
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 / self.m as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.m).map(|i| self.point(i)).collect()
    }
}

/// `∫_{cell i} ∫_{cell j} |x - y|^{2H-2} dx dy` in closed form.
pub fn cell_pair_integral(i: usize, j: usize, m: usize, hurst: f64) -> Result<f64, GridError> {
    let kernel = KernelConstant::new(hurst)?;
    if m == 0 {
        return Err(GridError::NoCells);
    }
    if i >= m || j >= m {
        return Err(GridError::IndexOutOfRange { i, j, m });
    }
    Ok(cell_pair_unchecked(i.abs_diff(j), m, hurst, kernel.prefactor))
}

fn cell_pair_unchecked(r: usize, m: usize, hurst: f64, c_h: f64) -> f64 {
    let e = 2.0 * hurst;
    let scale = (m as f64).powf(-e);
    if r == 0 {
        return scale / c_h;
    }
    let r = r as f64;
    scale * ((r + 1.0).powf(e) - 2.0 * r.powf(e) + (r - 1.0).powf(e)) / (2.0 * c_h)
}

/// The `m x m` matrix of cell-pair integrals for one Hurst index.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCellCovariance {
    hurst: f64,
    m: usize,
    entries: Vec<f64>,
}

impl GridCellCovariance {
    pub fn new(hurst: f64, m: usize) -> Result<Self, GridError> {
        let kernel = KernelConstant::new(hurst)?;
        if m == 0 {
            return Err(GridError::NoCells);
        }
        // Toeplitz: one value per lag
        let lags: Vec<f64> = (0..m)
            .map(|r| cell_pair_unchecked(r, m, hurst, kernel.prefactor))
            .collect();
        let entries = (0..m * m).map(|idx| lags[(idx / m).abs_diff(idx % m)]).collect();
        Ok(Self { hurst, m, entries })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn cells(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.entries[i * self.m..(i + 1) * self.m].iter().copied().collect::<CompensatedSum>().value()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().copied().collect::<CompensatedSum>().value()
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Number of weakly increasing assignments of `len` positions to `m` cells.
pub fn assignment_count(m: usize, len: usize) -> u128 {
    if len == 0 {
        return 1;
    }
    binomial((m + len - 1) as u128, len as u128)
}

/// Expected iterated integral of a spatial word for the `m`-cell
/// approximation, with the default assignment budget.
pub fn approx_expected_word(word: &Word, hurst: f64, m: usize) -> Result<f64, GridError> {
    approx_expected_word_with_budget(word, hurst, m, DEFAULT_ASSIGNMENT_BUDGET)
}

/// Sums, over weakly increasing cell assignments `c_1 <= ... <= c_n`, the
/// product of pair covariances `c_H m^2 D[c_a][c_b]` (summed over compatible
/// matchings) times the volume of the ordered region inside those cells,
/// `m^{-n} Π_{ties} 1/s!`.
pub fn approx_expected_word_with_budget(
    word: &Word,
    hurst: f64,
    m: usize,
    budget: u128,
) -> Result<f64, GridError> {
    let kernel = KernelConstant::new(hurst)?;
    if m == 0 {
        return Err(GridError::NoCells);
    }
    if word.zero_count() > 0 {
        return Err(GridError::TimeLetter(word.to_string()));
    }
    let n = word.len();
    if n == 0 {
        return Ok(1.0);
    }
    let matchings = pairings_of(word.letters());
    if matchings.is_empty() {
        return Ok(0.0);
    }
    let count = assignment_count(m, n);
    if count > budget {
        return Err(GridError::BudgetExceeded { count, budget });
    }
    let cov = GridCellCovariance::new(hurst, m)?;
    let velocity = kernel.prefactor * (m * m) as f64;
    let pairs: Vec<Vec<(usize, usize)>> = matchings.iter().map(|mt| mt.pairs().to_vec()).collect();
    let inv_fact: Vec<f64> = (0..=n)
        .scan(1.0, |f, s| {
            if s > 0 {
                *f /= s as f64;
            }
            Some(*f)
        })
        .collect();
    let cell_volume = (m as f64).powi(-(n as i32));

    let partials: Vec<CompensatedSum> = (0..m)
        .into_par_iter()
        .map(|lead| {
            let mut acc = CompensatedSum::new();
            let mut cells = vec![lead; n];
            loop {
                let mut kernel_sum = 0.0;
                for mt in &pairs {
                    let mut prod = 1.0;
                    for &(a, b) in mt {
                        prod *= velocity * cov.get(cells[a], cells[b]);
                    }
                    kernel_sum += prod;
                }
                let mut volume = cell_volume;
                let mut run = 1;
                for p in 1..n {
                    if cells[p] == cells[p - 1] {
                        run += 1;
                    } else {
                        volume *= inv_fact[run];
                        run = 1;
                    }
                }
                volume *= inv_fact[run];
                acc.add(kernel_sum * volume);

                // next weakly increasing tail with cells[0] fixed
                let mut p = n;
                loop {
                    if p == 1 {
                        return acc;
                    }
                    p -= 1;
                    if cells[p] + 1 < m {
                        let v = cells[p] + 1;
                        for c in cells.iter_mut().skip(p) {
                            *c = v;
                        }
                        break;
                    }
                }
            }
        })
        .collect();
    let mut total = CompensatedSum::new();
    for part in &partials {
        total.merge(part);
    }
    Ok(total.value())
}

/// Exact value, grid value and their gap at one grid size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapEstimate {
    pub m: usize,
    pub exact: f64,
    pub approx: f64,
    pub gap: f64,
    /// Quadrature error of the exact value.
    pub error: f64,
}

/// `|E sig(B) - E sig(B^m)|` for one word.
pub fn signature_gap(word: &Word, hurst: f64, m: usize, quad: &QuadConfig) -> Result<GapEstimate, GridError> {
    let exact = expected_word(word, hurst, quad)?;
    gap_against(word, hurst, m, exact.value, exact.error)
}

fn gap_against(word: &Word, hurst: f64, m: usize, exact: f64, error: f64) -> Result<GapEstimate, GridError> {
    let approx = approx_expected_word(word, hurst, m)?;
    Ok(GapEstimate {
        m,
        exact,
        approx,
        gap: (exact - approx).abs(),
        error,
    })
}

/// Gaps for every grid size in `m_list`, sharing one exact evaluation.
pub fn gap_series(word: &Word, hurst: f64, m_list: &[usize], quad: &QuadConfig) -> Result<Vec<GapEstimate>, GridError> {
    let exact = expected_word(word, hurst, quad)?;
    m_list
        .iter()
        .map(|&m| gap_against(word, hurst, m, exact.value, exact.error))
        .collect()
}

/// Least-squares line through `(log m, log gap)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    pub gaps: Vec<GapEstimate>,
}

/// Fits `log gap = intercept + slope log m`, refusing points that sit within
/// 10x of the quadrature error.
pub fn fit_log_slope(gaps: &[GapEstimate]) -> Result<SlopeFit, GridError> {
    if gaps.len() < 4 {
        return Err(GridError::TooFewPoints(gaps.len()));
    }
    // rounding in the two values is a noise source too
    let floor = |g: &GapEstimate| g.gap <= 10.0 * g.error.max(8.0 * f64::EPSILON * g.exact.abs());
    if gaps.iter().all(floor) {
        return Err(GridError::GapsVanish);
    }
    let below: Vec<usize> = gaps.iter().filter(|g| floor(g)).map(|g| g.m).collect();
    if !below.is_empty() {
        return Err(GridError::NoiseFloor { below });
    }
    let xs: Vec<f64> = gaps.iter().map(|g| (g.m as f64).ln()).collect();
    let ys: Vec<f64> = gaps.iter().map(|g| g.gap.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(SlopeFit {
        slope,
        intercept,
        residual,
        gaps: gaps.to_vec(),
    })
}

/// Gap series plus log-log fit; the expected slope is `-2H`.
pub fn convergence_slope(word: &Word, hurst: f64, m_list: &[usize], quad: &QuadConfig) -> Result<SlopeFit, GridError> {
    if m_list.len() < 4 {
        return Err(GridError::TooFewPoints(m_list.len()));
    }
    fit_log_slope(&gap_series(word, hurst, m_list, quad)?)
}

/// `Σ_{i≥1} i^{2H-3}` enclosed in a certified interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesEnclosure {
    pub lower: f64,
    pub upper: f64,
    /// Number of terms summed explicitly.
    pub terms: usize,
    /// The one-sided tail bound `N^{2H-2} / (2-2H)` at the truncation index.
    pub crude_tail: f64,
}

impl SeriesEnclosure {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Sums `i^{2H-3}` for `i <= N` and encloses the tail with the convexity
/// bounds `∫_N^∞ f - f(N)/2 <= Σ_{i>N} f(i) <= ∫_{N+1/2}^∞ f`, doubling `N`
/// until the enclosure is narrower than `width`.
pub fn power_series_enclosure(hurst: f64, width: f64) -> Result<SeriesEnclosure, GridError> {
    KernelConstant::new(hurst)?;
    if !(width > 0.0) {
        return Err(GridError::BadTolerance(width));
    }
    let s = 3.0 - 2.0 * hurst;
    let tail_integral = |a: f64| a.powf(1.0 - s) / (s - 1.0);
    let mut n: usize = 64;
    loop {
        let nf = n as f64;
        // ∫_N^{N+1/2} f computed without cancellation
        let slab = -nf.powf(1.0 - s) * ((1.0 - s) * (0.5 / nf).ln_1p()).exp_m1() / (s - 1.0);
        let gap = 0.5 * nf.powf(-s) - slab;
        if gap <= width / 2.0 || n >= 1 << 28 {
            let partial: CompensatedSum = (1..=n).rev().map(|i| (i as f64).powf(-s)).collect();
            let partial = partial.value();
            let lower = partial + tail_integral(nf) - 0.5 * nf.powf(-s);
            let upper = partial + tail_integral(nf + 0.5);
            // allow for rounding in the partial sum
            let slack = 4.0 * f64::EPSILON * upper;
            return Ok(SeriesEnclosure {
                lower: lower - slack,
                upper: upper + slack,
                terms: n,
                crude_tail: tail_integral(nf),
            });
        }
        n *= 2;
    }
}

/// The constants `A` and `Ã` of the grid-convergence error bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub hurst: f64,
    pub series: SeriesEnclosure,
    /// `[lower, upper]` enclosure of `A`.
    pub a: (f64, f64),
    /// `Ã` from its explicit expression.
    pub atilde: (f64, f64),
    /// `Ã` recomputed as `8 A H (2H-1)`.
    pub atilde_from_a: (f64, f64),
}

impl BoundConstants {
    pub fn a_value(&self) -> f64 {
        0.5 * (self.a.0 + self.a.1)
    }

    pub fn atilde_value(&self) -> f64 {
        0.5 * (self.atilde.0 + self.atilde.1)
    }

    /// Largest difference between the two evaluations of `Ã`.
    pub fn atilde_mismatch(&self) -> f64 {
        (self.atilde.0 - self.atilde_from_a.0)
            .abs()
            .max((self.atilde.1 - self.atilde_from_a.1).abs())
    }
}

fn a_of(hurst: f64, c_h: f64, sigma: f64) -> f64 {
    let two_2h = 2f64.powf(2.0 * hurst);
    let three_2h = 3f64.powf(2.0 * hurst);
    2.0 * (1.0 / c_h + (two_2h + 2.0) / c_h + (4.0 - 4.0 * hurst) * sigma)
        + (three_2h + 10.0 * two_2h + 2.0) / (2.0 * c_h)
}

fn atilde_of(hurst: f64, c_h: f64, sigma: f64) -> f64 {
    56.0 * (1.0 + 2f64.powf(2.0 * hurst))
        + 4.0 * 3f64.powf(2.0 * hurst)
        + 16.0 * c_h * (4.0 - 4.0 * hurst) * sigma
}

/// Evaluates `A` and both expressions of `Ã`, with enclosures narrower than
/// `tol`.
pub fn bound_constants(hurst: f64, tol: f64) -> Result<BoundConstants, GridError> {
    let c_h = KernelConstant::new(hurst)?.prefactor;
    // the series enters A with factor 2(4-4H) and Ã with 16 c_H (4-4H)
    let factor = (2.0 * (4.0 - 4.0 * hurst)).max(16.0 * c_h * (4.0 - 4.0 * hurst)).max(1.0);
    let series = power_series_enclosure(hurst, tol / factor)?;
    let a = (a_of(hurst, c_h, series.lower), a_of(hurst, c_h, series.upper));
    let atilde = (
        atilde_of(hurst, c_h, series.lower),
        atilde_of(hurst, c_h, series.upper),
    );
    let atilde_from_a = (8.0 * a.0 * c_h, 8.0 * a.1 * c_h);
    Ok(BoundConstants {
        hurst,
        series,
        a,
        atilde,
        atilde_from_a,
    })
}

/// `A(H)` evaluated at the midpoint of its enclosure.
pub fn constant_a(hurst: f64, tol: f64) -> Result<f64, GridError> {
    Ok(bound_constants(hurst, tol)?.a_value())
}

/// `Ã(H)` evaluated at the midpoint of its enclosure.
pub fn constant_atilde(hurst: f64, tol: f64) -> Result<f64, GridError> {
    Ok(bound_constants(hurst, tol)?.atilde_value())
}

/// `Ã k(2k-1) / ((k-1)! 2^k)` for a word with `k` pairs.
pub fn coefficient_bound(atilde: f64, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let kf = k as f64;
    let fact: f64 = (1..k).map(|i| i as f64).product();
    atilde * kf * (2.0 * kf - 1.0) / (fact * 2f64.powi(k as i32))
}

/// Scaled gaps `m^{2H} gap` against the coefficient bound.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientBoundReport {
    pub word: Word,
    pub hurst: f64,
    pub bound: f64,
    /// `(m, m^{2H} gap)` per grid size.
    pub scaled_gaps: Vec<(usize, f64)>,
    pub max_scaled_gap: f64,
    pub passes: bool,
}

/// Compares `max_m m^{2H} gap` with the coefficient bound, using the lower
/// end of the certified `Ã` enclosure.
pub fn coefficient_bound_check(
    word: &Word,
    hurst: f64,
    m_list: &[usize],
    quad: &QuadConfig,
) -> Result<CoefficientBoundReport, GridError> {
    let gaps = gap_series(word, hurst, m_list, quad)?;
    let constants = bound_constants(hurst, 1e-8)?;
    Ok(coefficient_report(word, hurst, &gaps, &constants))
}

/// Builds the report from an existing gap series.
pub fn coefficient_report(word: &Word, hurst: f64, gaps: &[GapEstimate], constants: &BoundConstants) -> CoefficientBoundReport {
    let bound = coefficient_bound(constants.atilde.0, word.len() / 2);
    let scaled_gaps: Vec<(usize, f64)> = gaps
        .iter()
        .map(|g| (g.m, (g.m as f64).powf(2.0 * hurst) * g.gap))
        .collect();
    let max_scaled_gap = scaled_gaps.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    CoefficientBoundReport {
        word: word.clone(),
        hurst,
        bound,
        scaled_gaps,
        max_scaled_gap,
        passes: max_scaled_gap <= bound,
    }
}

/// Cholesky factor of the fBm covariance on a uniform grid, reusable across
/// draws.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    hurst: f64,
    m: usize,
    factor: DMatrix<f64>,
    jittered: bool,
}

impl FbmSampler {
    pub fn new(hurst: f64, m: usize) -> Result<Self, GridError> {
        if m == 0 {
            return Err(GridError::NoCells);
        }
        if m > MAX_SAMPLER_CELLS {
            return Err(GridError::TooManyCells(m));
        }
        let grid = GridSpec::new(m)?;
        covariance(1.0, 1.0, hurst)?;
        let cov = DMatrix::from_fn(m, m, |i, j| {
            covariance(grid.point(i + 1), grid.point(j + 1), hurst).expect("validated Hurst index")
        });
        if let Some(ch) = cov.clone().cholesky() {
            return Ok(Self {
                hurst,
                m,
                factor: ch.l(),
                jittered: false,
            });
        }
        let shifted = cov + DMatrix::identity(m, m) * SAMPLER_JITTER;
        match shifted.cholesky() {
            Some(ch) => Ok(Self {
                hurst,
                m,
                factor: ch.l(),
                jittered: true,
            }),
            None => Err(GridError::Factorization(m)),
        }
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn cells(&self) -> usize {
        self.m
    }

    /// Whether diagonal jitter was needed to factorise the covariance.
    pub fn jittered(&self) -> bool {
        self.jittered
    }

    /// One coordinate at `t_0 = 0, t_1, ..., t_m`, drawn from `rng`.
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let z: Vec<f64> = (0..self.m).map(|_| StandardNormal.sample(rng)).collect();
        let mut out = Vec::with_capacity(self.m + 1);
        out.push(0.0);
        for i in 0..self.m {
            let row = self.factor.row(i);
            let mut acc = 0.0;
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                acc += row[j] * zj;
            }
            out.push(acc);
        }
        out
    }

    /// `d` independent coordinates from the `(seed, stream)` substream.
    pub fn sample(&self, d: usize, seed: u64, stream: u64) -> SampledPath {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let values = (0..d).map(|_| self.draw(&mut rng)).collect();
        SampledPath {
            times: GridSpec { m: self.m }.points(),
            values,
            jittered: self.jittered,
        }
    }
}

/// An fBm path sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    pub times: Vec<f64>,
    /// `values[c][i]` is coordinate `c` at `times[i]`.
    pub values: Vec<Vec<f64>>,
    /// Whether the covariance needed diagonal jitter.
    pub jittered: bool,
}

impl SampledPath {
    /// Time-augmented piecewise-linear interpolation.
    pub fn to_path(&self) -> PiecewiseLinearPath<f64> {
        let spatial = (0..self.times.len())
            .map(|i| self.values.iter().map(|c| c[i]).collect())
            .collect();
        PiecewiseLinearPath::from_spatial(self.times.clone(), spatial)
            .expect("grid times are increasing and start at zero")
    }
}

/// `d` independent fBm coordinates on the `m`-cell grid, from stream 0 of
/// `seed`.
pub fn sample_fbm(hurst: f64, m: usize, d: usize, seed: u64) -> Result<SampledPath, GridError> {
    Ok(FbmSampler::new(hurst, m)?.sample(d, seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn diagonal_cell_single_grid() {
        assert!((cell_pair_integral(0, 0, 1, 0.75).unwrap() - 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn cells_sum_to_square_integral() {
        for h in [0.6, 0.75, 0.9] {
            let cov = GridCellCovariance::new(h, 17).unwrap();
            let c = h * (2.0 * h - 1.0);
            assert!((cov.total() - 1.0 / c).abs() < 1e-11 / c);
        }
    }

    #[test]
    fn symmetric_and_toeplitz() {
        let cov = GridCellCovariance::new(0.7, 9).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(cov.get(i, j), cov.get(j, i));
                assert_eq!(cov.get(i, j), cov.get(i + 1, j + 1));
                assert!(cov.get(i, j) > 0.0);
            }
        }
    }

    #[test]
    fn out_of_range_cells() {
        assert!(matches!(
            cell_pair_integral(3, 0, 3, 0.7),
            Err(GridError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn word_one_one_is_half_for_every_grid() {
        for m in [1, 2, 5, 16, 64] {
            let v = approx_expected_word(&w("1,1"), 0.7, m).unwrap();
            assert!((v - 0.5).abs() < 1e-14, "m={m}: {v}");
        }
    }

    #[test]
    fn single_cell_is_chord() {
        for word in ["1,1,2,2", "1,2,1,2", "1,2,2,1"] {
            let v = approx_expected_word(&w(word), 0.65, 1).unwrap();
            assert!((v - 1.0 / 24.0).abs() < 1e-15);
        }
        let v = approx_expected_word(&w("1,1,1,1"), 0.65, 1).unwrap();
        assert!((v - 3.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn odd_and_time_words() {
        assert_eq!(approx_expected_word(&w("1,2"), 0.7, 4).unwrap(), 0.0);
        assert!(matches!(
            approx_expected_word(&w("1,0,1"), 0.7, 4),
            Err(GridError::TimeLetter(_))
        ));
    }

    #[test]
    fn budget_is_enforced() {
        let r = approx_expected_word_with_budget(&w("1,1,2,2"), 0.7, 64, 1000);
        assert_eq!(
            r,
            Err(GridError::BudgetExceeded {
                count: 766_480,
                budget: 1000
            })
        );
    }

    #[test]
    fn fit_recovers_power_law() {
        let gaps: Vec<GapEstimate> = [4, 8, 16, 32]
            .iter()
            .map(|&m| GapEstimate {
                m,
                exact: 1.0,
                approx: 1.0 - 3.0 * (m as f64).powf(-1.3),
                gap: 3.0 * (m as f64).powf(-1.3),
                error: 0.0,
            })
            .collect();
        let fit = fit_log_slope(&gaps).unwrap();
        assert!((fit.slope + 1.3).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn fit_refuses_noise() {
        let mk = |m, gap, error| GapEstimate {
            m,
            exact: 1.0,
            approx: 1.0,
            gap,
            error,
        };
        let zero: Vec<_> = [4, 8, 16, 32].iter().map(|&m| mk(m, 0.0, 0.0)).collect();
        assert_eq!(fit_log_slope(&zero), Err(GridError::GapsVanish));
        let mixed = vec![mk(4, 1e-3, 1e-9), mk(8, 1e-4, 1e-9), mk(16, 1e-8, 1e-9), mk(32, 1e-9, 1e-9)];
        assert_eq!(
            fit_log_slope(&mixed),
            Err(GridError::NoiseFloor { below: vec![16, 32] })
        );
        assert_eq!(fit_log_slope(&zero[..3]), Err(GridError::TooFewPoints(3)));
    }

    #[test]
    fn zeta_three_halves() {
        let s = power_series_enclosure(0.75, 1e-10).unwrap();
        assert!(s.width() < 1e-10);
        assert!(s.lower <= 2.612_375_348_685_488 && 2.612_375_348_685_488 <= s.upper);
    }

    #[test]
    fn atilde_identity() {
        for h in [0.6, 0.75, 0.9] {
            let c = bound_constants(h, 1e-8).unwrap();
            assert!(c.atilde_mismatch() < 1e-10);
            assert!(c.atilde.1 - c.atilde.0 < 1e-8);
            assert!(c.a.0 > 0.0);
        }
    }

    #[test]
    fn coefficient_bound_arithmetic() {
        assert_eq!(coefficient_bound(1.0, 2), 1.5);
        let ratio = coefficient_bound(1.0, 3) / coefficient_bound(1.0, 2);
        assert!((ratio - (15.0 / 16.0) / 1.5).abs() < 1e-15);
    }

    #[test]
    fn sampler_is_deterministic() {
        let a = sample_fbm(0.7, 32, 2, 42).unwrap();
        let b = sample_fbm(0.7, 32, 2, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values[0][0], 0.0);
        assert_ne!(a.values[0], a.values[1]);
        let c = sample_fbm(0.7, 32, 2, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampler_limits() {
        assert!(matches!(FbmSampler::new(0.7, 5000), Err(GridError::TooManyCells(5000))));
        assert!(FbmSampler::new(1.2, 4).is_err());
    }
}
