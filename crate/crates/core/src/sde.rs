//! Weak approximation of differential equations driven by time-augmented
//! fBm.
//!
//! The cubature side solves the ODE `dy = Σ_i V_i(y) dω^i` along each path of
//! a cubature formula and averages an observable with the formula's weights.
//! The Monte-Carlo side samples fBm on a uniform grid and drives the same
//! integrator along the piecewise-linear interpolation, so the two estimates
//! differ only in the measure. The error-bound evaluator reports the shape of
//! the weak-error bound with every unknown constant set to one.

use crate::cubature::{rescale_formula, CubatureError, CubatureFormula};
use crate::grid_approx::{FbmSampler, GridError};
use crate::scalar::{from_count, Scalar};
use crate::summation::CompensatedSum;
use crate::tensor_algebra::{PiecewiseLinearPath, TensorError};
use num_traits::Float;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Relative tail below which the error-bound series is truncated.
pub const SERIES_TOLERANCE: f64 = 1e-12;
/// Largest number of series terms summed before giving up.
pub const SERIES_MAX_TERMS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdeError {
    #[error("vector field set has {fields} fields but the path has {width} coordinates")]
    WidthMismatch { fields: usize, width: usize },
    #[error("state has {got} components, expected {expected}")]
    StateDimension { got: usize, expected: usize },
    #[error("at least one integration step per piece is required")]
    NoSteps,
    #[error("state became non-finite on piece {piece}, step {step}: {state}")]
    NonFinite {
        piece: usize,
        step: usize,
        state: String,
    },
    #[error("Hurst index {0} is outside (1/2, 1)")]
    InvalidHurst(f64),
    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),
    #[error("at least one Monte-Carlo path is required")]
    NoPaths,
    #[error("invalid error-bound parameters: {0}")]
    BadBoundParams(String),
    #[error("factorial series with argument {z} and exponent {p} needs about {terms:.3e} terms")]
    SeriesTooLong { z: f64, p: f64, terms: f64 },
    #[error(transparent)]
    Cubature(#[from] CubatureError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

type Field<F> = Arc<dyn Fn(&[F]) -> Vec<F> + Send + Sync>;

/// Vector fields `V_0, .., V_d` on `R^N`; `V_0` pairs with the time
/// coordinate of the driver.
#[derive(Clone)]
pub struct VectorFieldSet<F> {
    dim: usize,
    fields: Vec<Field<F>>,
}

impl<F> fmt::Debug for VectorFieldSet<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorFieldSet")
            .field("dim", &self.dim)
            .field("fields", &self.fields.len())
            .finish()
    }
}

impl<F: Scalar + Float> VectorFieldSet<F> {
    pub fn new(dim: usize, fields: Vec<Field<F>>) -> Self {
        Self { dim, fields }
    }

    /// All `d + 1` fields identically zero.
    pub fn zero(dim: usize, d: usize) -> Self {
        Self::constant((0..=d).map(|_| vec![F::zero(); dim]).collect())
    }

    /// Constant fields; `vectors[i]` is `V_i`.
    pub fn constant(vectors: Vec<Vec<F>>) -> Self {
        let dim = vectors.first().map_or(0, Vec::len);
        let fields = vectors
            .into_iter()
            .map(|v| Arc::new(move |_: &[F]| v.clone()) as Field<F>)
            .collect();
        Self { dim, fields }
    }

    /// Linear fields `V_i(y) = A_i y`, with `matrices[i]` row-major.
    pub fn linear(matrices: Vec<Vec<Vec<F>>>) -> Self {
        let dim = matrices.first().map_or(0, Vec::len);
        let fields = matrices
            .into_iter()
            .map(|a| {
                Arc::new(move |y: &[F]| {
                    a.iter()
                        .map(|row| row.iter().zip(y).fold(F::zero(), |s, (r, x)| s + *r * *x))
                        .collect()
                }) as Field<F>
            })
            .collect();
        Self { dim, fields }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of fields, i.e. driver coordinates including time.
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn evaluate(&self, i: usize, y: &[F]) -> Vec<F> {
        (self.fields[i])(y)
    }

    /// `Σ_i V_i(y) dx_i` for a driver increment `dx`.
    fn drive(&self, y: &[F], dx: &[F]) -> Vec<F> {
        let mut out = vec![F::zero(); self.dim];
        for (i, step) in dx.iter().enumerate() {
            if *step == F::zero() {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.evaluate(i, y)) {
                *o = *o + v * *step;
            }
        }
        out
    }
}

fn axpy<F: Float>(y: &[F], a: F, k: &[F]) -> Vec<F> {
    y.iter().zip(k).map(|(y, k)| *y + a * *k).collect()
}

/// Solves `dy = Σ_i V_i(y) dω^i`, `y(0) = x0`, along a piecewise-linear
/// driver with `steps` classical Runge-Kutta steps per piece.
pub fn ode_along_path<F: Scalar + Float>(
    vf: &VectorFieldSet<F>,
    x0: &[F],
    path: &PiecewiseLinearPath<F>,
    steps: usize,
) -> Result<Vec<F>, SdeError> {
    if steps == 0 {
        return Err(SdeError::NoSteps);
    }
    if vf.len() != path.width() {
        return Err(SdeError::WidthMismatch {
            fields: vf.len(),
            width: path.width(),
        });
    }
    if x0.len() != vf.dim() {
        return Err(SdeError::StateDimension {
            got: x0.len(),
            expected: vf.dim(),
        });
    }
    let two = from_count::<F>(2);
    let six = from_count::<F>(6);
    let n = from_count::<F>(steps);
    let mut y = x0.to_vec();
    for piece in 0..path.pieces() {
        let dx: Vec<F> = path.increment(piece).into_iter().map(|x| x / n).collect();
        for step in 0..steps {
            let k1 = vf.drive(&y, &dx);
            let k2 = vf.drive(&axpy(&y, F::one() / two, &k1), &dx);
            let k3 = vf.drive(&axpy(&y, F::one() / two, &k2), &dx);
            let k4 = vf.drive(&axpy(&y, F::one(), &k3), &dx);
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = *yi + (k1[i] + two * k2[i] + two * k3[i] + k4[i]) / six;
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(SdeError::NonFinite {
                    piece,
                    step,
                    state: format!("{y:?}"),
                });
            }
        }
    }
    Ok(y)
}

/// `Σ_j w_j f(y_j(T))` over formula weights `w_j`, with `y_j` solved along the formula's paths
/// transported to `[0, horizon]`.
pub fn cubature_weak_value<F: Scalar + Float>(
    vf: &VectorFieldSet<F>,
    f: impl Fn(&[F]) -> F,
    x0: &[F],
    formula: &CubatureFormula<F>,
    horizon: F,
    hurst: F,
    steps: usize,
) -> Result<F, SdeError> {
    let scaled = rescale_formula(formula, horizon, hurst)?;
    let mut acc = F::zero();
    for (w, p) in scaled.weights.iter().zip(&scaled.paths) {
        acc = acc + *w * f(&ode_along_path(vf, x0, p, steps)?);
    }
    Ok(acc)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
}

/// Monte-Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub paths: usize,
    /// Grid cells of each sampled path.
    pub grid: usize,
    /// Runge-Kutta steps per grid cell.
    pub steps: usize,
    pub seed: u64,
}

/// Monte-Carlo estimate of `E f(y_T)`: path `p` is drawn from substream `p`
/// of `seed`, so the result does not depend on the thread count.
pub fn mc_weak_value(
    vf: &VectorFieldSet<f64>,
    f: impl Fn(&[f64]) -> f64 + Sync,
    x0: &[f64],
    hurst: f64,
    horizon: f64,
    cfg: &McConfig,
) -> Result<McEstimate, SdeError> {
    if !(hurst > 0.5 && hurst < 1.0) {
        return Err(SdeError::InvalidHurst(hurst));
    }
    if !(horizon > 0.0) {
        return Err(SdeError::BadHorizon(horizon));
    }
    if cfg.paths == 0 {
        return Err(SdeError::NoPaths);
    }
    if cfg.steps == 0 {
        return Err(SdeError::NoSteps);
    }
    let d = vf.len().saturating_sub(1);
    let sampler = FbmSampler::new(hurst, cfg.grid)?;
    let space = horizon.powf(hurst);
    let samples = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|p| {
            let unit = sampler.sample(d, cfg.seed, p).to_path();
            let path = unit.map_spatial(|x| x * space).map_time(|t| t * horizon);
            ode_along_path(vf, x0, &path, cfg.steps).map(|y| f(&y))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let n = samples.len() as f64;
    let mean = samples.iter().copied().collect::<CompensatedSum>().value() / n;
    let stderr = if samples.len() > 1 {
        let ss: CompensatedSum = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        (ss.value() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        stderr,
        paths: samples.len(),
    })
}

/// Inputs of the weak-error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBoundParams {
    /// Growth constant of the iterated derivatives of `f`.
    pub growth: f64,
    /// Factorial exponent, in `[0, 1/2)`.
    pub gamma: f64,
    pub d: usize,
    pub degree: u32,
    hurst: f64,
}

impl ErrorBoundParams {
    pub fn new(growth: f64, gamma: f64, d: usize, degree: u32, hurst: f64) -> Result<Self, SdeError> {
        if !(growth > 0.0 && growth.is_finite()) {
            return Err(SdeError::BadBoundParams(format!("growth must be positive, got {growth}")));
        }
        if !(0.0..0.5).contains(&gamma) {
            return Err(SdeError::BadBoundParams(format!("gamma must lie in [0, 1/2), got {gamma}")));
        }
        if d == 0 {
            return Err(SdeError::BadBoundParams("d must be positive".into()));
        }
        if !(hurst > 0.5 && hurst < 1.0) {
            return Err(SdeError::InvalidHurst(hurst));
        }
        Ok(Self {
            growth,
            gamma,
            d,
            degree,
            hurst,
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// `√(2 / (H(2H - 1)))`.
    pub fn k(&self) -> f64 {
        (2.0 / (self.hurst * (2.0 * self.hurst - 1.0))).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundBranch {
    /// Horizon at least one.
    Long,
    /// Horizon below one.
    Short,
}

impl fmt::Display for BoundBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Long => "L1",
            Self::Short => "L2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundShape {
    pub value: f64,
    pub branch: BoundBranch,
    /// Terms summed in the factorial series.
    pub terms: usize,
}

/// `ln Σ_k z^k / (k!)^p` for `z ≥ 0`, `p > 0`, truncated once the remaining
/// tail is below [`SERIES_TOLERANCE`] relative to the partial sum. Fails when
/// the terms keep growing past [`SERIES_MAX_TERMS`].
pub fn log_factorial_series(z: f64, p: f64) -> Result<(f64, usize), SdeError> {
    assert!(p > 0.0, "factorial exponent must be positive for convergence");
    if z == 0.0 {
        return Ok((0.0, 1));
    }
    // the tail test needs (k + 1)^p > 2z
    let onset = (2.0 * z).powf(1.0 / p);
    if !(onset < SERIES_MAX_TERMS as f64) {
        return Err(SdeError::SeriesTooLong { z, p, terms: onset });
    }
    let lz = z.ln();
    // running log-sum-exp: partial = max + ln(scaled)
    let mut max = f64::NEG_INFINITY;
    let mut scaled = 0.0f64;
    let mut k = 0usize;
    loop {
        let lt = k as f64 * lz - p * ln_gamma(k as f64 + 1.0);
        if lt > max {
            scaled = scaled * (max - lt).exp() + 1.0;
            max = lt;
        } else {
            scaled += (lt - max).exp();
        }
        // ratio of the next term to this one; decreasing in k
        let ratio = z / ((k + 1) as f64).powf(p);
        if ratio < 0.5 {
            let partial = max + scaled.ln();
            let tail = lt + (ratio / (1.0 - ratio)).ln();
            if tail - partial < SERIES_TOLERANCE.ln() {
                return Ok((partial, k + 1));
            }
        }
        k += 1;
        if k > 2 * SERIES_MAX_TERMS {
            return Err(SdeError::SeriesTooLong { z, p, terms: k as f64 });
        }
    }
}

/// The weak-error bound with unit constants: `L1` for horizons at least
/// one, `L2` below.
pub fn error_bound_shape(params: &ErrorBoundParams, horizon: f64) -> Result<BoundShape, SdeError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(SdeError::BadHorizon(horizon));
    }
    let half = (params.degree as f64 + 2.0) / 2.0;
    let p = 0.5 - params.gamma;
    let m = params.growth;
    let base = params.d as f64 * m * params.k();
    if horizon >= 1.0 {
        let (ls, terms) = log_factorial_series(base * horizon, p)?;
        let value = horizon.powf(half) * (1.0 + (half * m.ln() + ls).exp());
        Ok(BoundShape {
            value,
            branch: BoundBranch::Long,
            terms,
        })
    } else {
        let h = params.hurst;
        let (ls, terms) = log_factorial_series(base * horizon.powf(h), p)?;
        let value = horizon.powf(2.0 * h) + (h * half * horizon.ln() + half * m.ln() + ls).exp();
        Ok(BoundShape {
            value,
            branch: BoundBranch::Short,
            terms,
        })
    }
}

/// Everything `sde compare` reports.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub hurst: f64,
    pub horizon: f64,
    pub x0: f64,
    pub cubature_value: f64,
    pub exact_value: f64,
    pub mc_value: f64,
    pub mc_stderr: f64,
    pub mc_paths: usize,
    pub bound_shape: BoundShape,
    pub runtime_seconds: f64,
}

/// Runs both solvers on the scalar test problem `dy = dB`, `f(y) = y²`,
/// whose exact weak value is `x0² + T^{2H}`.
pub fn quadratic_comparison(
    formula: &CubatureFormula<f64>,
    hurst: f64,
    horizon: f64,
    x0: f64,
    mc: &McConfig,
    bound: &ErrorBoundParams,
) -> Result<SolveReport, SdeError> {
    let start = std::time::Instant::now();
    let vf = VectorFieldSet::constant(vec![vec![0.0], vec![1.0]]);
    let square = |y: &[f64]| y[0] * y[0];
    let cubature_value = cubature_weak_value(&vf, square, &[x0], formula, horizon, hurst, mc.steps)?;
    let est = mc_weak_value(&vf, square, &[x0], hurst, horizon, mc)?;
    let bound_shape = error_bound_shape(bound, horizon)?;
    Ok(SolveReport {
        hurst,
        horizon,
        x0,
        cubature_value,
        exact_value: x0 * x0 + horizon.powf(2.0 * hurst),
        mc_value: est.mean,
        mc_stderr: est.stderr,
        mc_paths: est.paths,
        bound_shape,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}
