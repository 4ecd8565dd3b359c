//! One function per subcommand, each returning formatted tables.

use crate::config::RunFile;
use crate::error::CliError;
use crate::output::{num, Table};
use crate::{Outcome, WordArgs};
use fbm_signature::cubature::{
    claimed_degree, explicit_formula, solve_ansatz, verify_cubature, RootBranch,
};
use fbm_signature::expected_signature::{decay_bound_check, expected_word};
use fbm_signature::grid_approx::{
    approx_expected_word, bound_constants, coefficient_report, fit_log_slope, gap_series,
};
use fbm_signature::sde::{error_bound_shape, quadratic_comparison, ErrorBoundParams, McConfig};
use fbm_signature::{QuadConfig, Word};

/// Grid sizes used when none are given.
pub const DEFAULT_M: [usize; 5] = [4, 8, 16, 32, 64];

/// Allowed distance of a fitted slope from `-2H`.
pub const SLOPE_WINDOW: f64 = 0.15;

/// Gaps at or below this are treated as identically zero.
pub const ZERO_GAP: f64 = 1e-14;

/// Largest acceptable residual of the moment system and largest acceptable
/// disagreement between the two deterministic signature computations.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

fn hurst_list(flag: &[f64], rf: &RunFile) -> Result<Vec<f64>, CliError> {
    if !flag.is_empty() {
        return Ok(flag.to_vec());
    }
    rf.list("H")?
        .filter(|v: &Vec<f64>| !v.is_empty())
        .ok_or_else(|| CliError::Usage("--H is required".into()))
}

fn word_list(args: &WordArgs, rf: &RunFile) -> Result<Vec<Word>, CliError> {
    let raw = if args.words.is_empty() {
        rf.words().unwrap_or_default()
    } else {
        args.words.clone()
    };
    raw.iter()
        .map(|s| {
            s.parse::<Word>()
                .map_err(|e| CliError::Usage(format!("bad word {s:?}: {e}")))
        })
        .collect()
}

fn m_list(flag: &[usize], rf: &RunFile) -> Result<Vec<usize>, CliError> {
    if !flag.is_empty() {
        return Ok(flag.to_vec());
    }
    Ok(rf.list("m")?.unwrap_or_else(|| DEFAULT_M.to_vec()))
}

fn pick<T: std::str::FromStr>(flag: Option<T>, rf: &RunFile, key: &str, default: T) -> Result<T, CliError> {
    match flag {
        Some(v) => Ok(v),
        None => Ok(rf.value(key)?.unwrap_or(default)),
    }
}

fn branch_of(raw: Option<String>, rf: &RunFile) -> Result<Option<RootBranch>, CliError> {
    raw.or_else(|| rf.raw("branch").map(str::to_string))
        .map(|s| s.parse().map_err(CliError::Usage))
        .transpose()
}

pub fn expected_sig(
    rf: &RunFile,
    args: &WordArgs,
    depth: Option<usize>,
    d: Option<usize>,
    tolerance: f64,
) -> Result<Outcome, CliError> {
    let hs = hurst_list(&args.hurst, rf)?;
    let mut words = word_list(args, rf)?;
    let depth = match depth {
        Some(v) => Some(v),
        None => rf.value("depth")?,
    };
    if let Some(depth) = depth {
        let d = pick(d, rf, "d", 2)?;
        for len in (2..=depth).step_by(2) {
            words.extend(
                Word::all_of_length(d, len)
                    .into_iter()
                    .filter(|w| w.zero_count() == 0),
            );
        }
    }
    if words.is_empty() {
        return Err(CliError::Usage("give --word or --depth".into()));
    }
    let quad = QuadConfig::with_tolerance(tolerance);
    let mut t = Table::new(
        "expected",
        &[
            "word",
            "H",
            "value",
            "err_bar",
            "bound_1_over_k!2^k",
            "refined_bound",
            "pass",
            "refined_pass",
            "symmetrised_candidate",
            "candidate_difference",
        ],
    );
    // the refined bound is reported but does not set the exit status
    let mut verified = true;
    for &h in &hs {
        for w in &words {
            let spatial_even = w.zero_count() == 0 && !w.is_empty() && w.len() % 2 == 0;
            if spatial_even {
                let r = decay_bound_check(w, h, &quad)?;
                verified &= r.passes;
                t.push(vec![
                    w.to_string(),
                    num(h),
                    num(r.value),
                    num(r.error),
                    num(r.bound),
                    num(r.refined_bound),
                    r.passes.to_string(),
                    r.refined_passes.to_string(),
                    num(r.symmetrised_candidate),
                    num(r.candidate_difference),
                ]);
            } else {
                let e = expected_word(w, h, &quad)?;
                t.push(vec![
                    w.to_string(),
                    num(h),
                    num(e.value),
                    num(e.error),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
            }
        }
    }
    Ok(Outcome {
        command: "expected-sig",
        tables: vec![t],
        verified,
    })
}

pub fn approx_sig(rf: &RunFile, args: &WordArgs, m: &[usize]) -> Result<Outcome, CliError> {
    let hs = hurst_list(&args.hurst, rf)?;
    let words = word_list(args, rf)?;
    if words.is_empty() {
        return Err(CliError::Usage("give at least one --word".into()));
    }
    let ms = m_list(m, rf)?;
    let mut t = Table::new("approx", &["word", "H", "m", "approx"]);
    for &h in &hs {
        for w in &words {
            for &m in &ms {
                let v = approx_expected_word(w, h, m)?;
                t.push(vec![w.to_string(), num(h), m.to_string(), num(v)]);
            }
        }
    }
    Ok(Outcome {
        command: "approx-sig",
        tables: vec![t],
        verified: true,
    })
}

pub fn convergence(rf: &RunFile, args: &WordArgs, m: &[usize], tolerance: f64) -> Result<Outcome, CliError> {
    let hs = hurst_list(&args.hurst, rf)?;
    let words = word_list(args, rf)?;
    if words.is_empty() {
        return Err(CliError::Usage("give at least one --word".into()));
    }
    let ms = m_list(m, rf)?;
    if ms.len() < 4 {
        return Err(CliError::Usage(format!(
            "the m list needs at least 4 entries, got {}",
            ms.len()
        )));
    }
    let quad = QuadConfig::with_tolerance(tolerance);
    let mut rows = Table::new(
        "gaps",
        &["word", "H", "m", "exact", "approx", "gap", "m2H_gap", "err_bar"],
    );
    let mut summary = Table::new(
        "summary",
        &[
            "word",
            "H",
            "status",
            "slope",
            "target_slope",
            "slope_pass",
            "fit_residual",
            "max_m2H_gap",
            "coefficient_bound",
            "coefficient_pass",
        ],
    );
    let mut verified = true;
    for &h in &hs {
        let constants = bound_constants(h, 1e-8)?;
        for w in &words {
            let gaps = gap_series(w, h, &ms, &quad)?;
            for g in &gaps {
                rows.push(vec![
                    w.to_string(),
                    num(h),
                    g.m.to_string(),
                    num(g.exact),
                    num(g.approx),
                    num(g.gap),
                    num((g.m as f64).powf(2.0 * h) * g.gap),
                    num(g.error),
                ]);
            }
            let coef = coefficient_report(w, h, &gaps, &constants);
            let target = -2.0 * h;
            let mut row = vec![w.to_string(), num(h)];
            if gaps.iter().all(|g| g.gap <= ZERO_GAP) {
                row.extend([
                    "gap identically zero".to_string(),
                    String::new(),
                    num(target),
                    String::new(),
                    String::new(),
                ]);
            } else {
                match fit_log_slope(&gaps) {
                    Ok(fit) => {
                        let ok = (fit.slope - target).abs() <= SLOPE_WINDOW;
                        verified &= ok;
                        row.extend([
                            "fitted".to_string(),
                            num(fit.slope),
                            num(target),
                            ok.to_string(),
                            num(fit.residual),
                        ]);
                    }
                    Err(e) => {
                        verified = false;
                        row.extend([
                            format!("fit refused: {e}"),
                            String::new(),
                            num(target),
                            "false".to_string(),
                            String::new(),
                        ]);
                    }
                }
            }
            verified &= coef.passes;
            row.extend([num(coef.max_scaled_gap), num(coef.bound), coef.passes.to_string()]);
            summary.push(row);
        }
    }
    Ok(Outcome {
        command: "convergence",
        tables: vec![rows, summary],
        verified,
    })
}

pub fn cubature_verify(
    rf: &RunFile,
    hurst: &[f64],
    degree: Option<u32>,
    branch: Option<String>,
    tolerance: f64,
) -> Result<Outcome, CliError> {
    let hs = hurst_list(hurst, rf)?;
    let branch = branch_of(branch, rf)?;
    let degree = match degree {
        Some(v) => Some(v),
        None => rf.value("degree")?,
    };
    let quad = QuadConfig::with_tolerance(tolerance);
    let mut words = Table::new(
        "words",
        &["H", "word", "weight", "lhs", "lhs_err", "rhs", "rhs_direct", "abs_err", "passed"],
    );
    let mut summary = Table::new(
        "summary",
        &[
            "H",
            "formula",
            "degree",
            "claimed_degree",
            "max_err",
            "max_rhs_disagreement",
            "measured_degree",
            "first_failure",
            "first_failure_weight",
            "passed",
        ],
    );
    let mut verified = true;
    for &h in &hs {
        let (formula, label) = match branch {
            Some(b) => (solve_ansatz(h, b)?.to_formula()?, format!("ansatz-{b}")),
            None => (explicit_formula(h)?, "explicit".to_string()),
        };
        let deg = degree.unwrap_or_else(|| claimed_degree(h));
        let r = verify_cubature(&formula, h, deg, &quad)?;
        for e in &r.entries {
            words.push(vec![
                num(h),
                e.word.to_string(),
                num(e.weight),
                num(e.lhs),
                num(e.lhs_error),
                num(e.rhs),
                num(e.rhs_direct),
                num(e.abs_err),
                e.passed.to_string(),
            ]);
        }
        let ok = r.passed && r.max_rhs_disagreement <= SOLVE_TOLERANCE;
        verified &= ok;
        let (fw, fweight) = match &r.first_failure {
            Some((w, x)) => (w.to_string(), num(*x)),
            None => (String::new(), String::new()),
        };
        summary.push(vec![
            num(h),
            label,
            deg.to_string(),
            r.claimed_degree.to_string(),
            num(r.max_err),
            num(r.max_rhs_disagreement),
            r.measured_degree.to_string(),
            fw,
            fweight,
            ok.to_string(),
        ]);
    }
    Ok(Outcome {
        command: "cubature verify",
        tables: vec![words, summary],
        verified,
    })
}

pub fn cubature_solve(rf: &RunFile, hurst: &[f64], branch: Option<String>) -> Result<Outcome, CliError> {
    let hs = hurst_list(hurst, rf)?;
    let branches = match branch_of(branch, rf)? {
        Some(b) => vec![b],
        None => vec![RootBranch::Minus, RootBranch::Plus],
    };
    let mut t = Table::new(
        "solutions",
        &[
            "H", "branch", "signed_weight", "zero_weight", "a", "b1", "b0", "c1", "c0", "residual_1",
            "residual_2", "residual_3", "residual_4", "residual_5", "residual_6",
            "continuity_1", "continuity_2", "max_residual",
        ],
    );
    let mut verified = true;
    for &h in &hs {
        for &b in &branches {
            let s = solve_ansatz(h, b)?;
            let mut row = vec![
                num(h),
                b.to_string(),
                num(s.signed_weight),
                num(s.zero_weight),
                num(s.a),
                num(s.b1),
                num(s.b0),
                num(s.c1),
                num(s.c0),
            ];
            row.extend(s.residuals().iter().map(|r| num(*r)));
            row.extend(s.continuity_residuals().iter().map(|r| num(*r)));
            row.push(num(s.max_residual()));
            verified &= s.max_residual() <= SOLVE_TOLERANCE;
            t.push(row);
        }
    }
    Ok(Outcome {
        command: "cubature solve",
        tables: vec![t],
        verified,
    })
}

pub struct SdeArgs {
    pub hurst: Option<f64>,
    pub horizon: Option<f64>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub rk_steps: Option<usize>,
    pub seed: Option<u64>,
    pub x0: Option<f64>,
}

pub fn sde_compare(rf: &RunFile, args: &SdeArgs, stamp: bool) -> Result<Outcome, CliError> {
    let h = match args.hurst {
        Some(h) => h,
        None => rf
            .list::<f64>("H")?
            .and_then(|v| v.first().copied())
            .ok_or_else(|| CliError::Usage("--H is required".into()))?,
    };
    let horizon = pick(args.horizon, rf, "T", 1.0)?;
    let mc = McConfig {
        paths: pick(args.paths, rf, "paths", 10_000)?,
        grid: pick(args.steps, rf, "steps", 64)?,
        steps: pick(args.rk_steps, rf, "rk_steps", 1)?,
        seed: pick(args.seed, rf, "seed", 0)?,
    };
    let x0 = pick(args.x0, rf, "x0", 0.5)?;
    let formula = explicit_formula(h)?;
    let bound = ErrorBoundParams::new(1.0, 0.0, 1, formula.claimed_degree, h)?;
    let r = quadratic_comparison(&formula, h, horizon, x0, &mc, &bound)?;
    let cub_err = (r.cubature_value - r.exact_value).abs();
    let mc_dev = (r.mc_value - r.exact_value).abs();
    let mc_ok = if r.mc_stderr > 0.0 {
        mc_dev <= 4.0 * r.mc_stderr
    } else {
        mc_dev == 0.0
    };
    let mut t = Table::new(
        "report",
        &[
            "H",
            "T",
            "x0",
            "cubature_value",
            "exact_value",
            "cubature_abs_err",
            "mc_value",
            "mc_stderr",
            "mc_paths",
            "mc_grid",
            "seed",
            "bound_branch",
            "bound_shape",
            "passed",
        ],
    );
    let ok = cub_err <= SOLVE_TOLERANCE && mc_ok;
    t.push(vec![
        num(h),
        num(horizon),
        num(x0),
        num(r.cubature_value),
        num(r.exact_value),
        num(cub_err),
        num(r.mc_value),
        num(r.mc_stderr),
        r.mc_paths.to_string(),
        mc.grid.to_string(),
        mc.seed.to_string(),
        r.bound_shape.branch.to_string(),
        num(r.bound_shape.value),
        ok.to_string(),
    ]);
    let mut tables = vec![t];
    if stamp {
        let mut meta = Table::new("runtime", &["seconds"]);
        meta.push(vec![num(r.runtime_seconds)]);
        tables.push(meta);
    }
    Ok(Outcome {
        command: "sde compare",
        tables,
        verified: ok,
    })
}

pub struct BoundArgs {
    pub hurst: Vec<f64>,
    pub horizon: Vec<f64>,
    pub growth: Option<f64>,
    pub gamma: Option<f64>,
    pub degree: Option<u32>,
    pub d: Option<usize>,
}

pub fn bounds(rf: &RunFile, args: &BoundArgs) -> Result<Outcome, CliError> {
    let hs = hurst_list(&args.hurst, rf)?;
    let horizons = if args.horizon.is_empty() {
        rf.list("T")?.unwrap_or_else(|| vec![0.25, 0.5, 1.0, 2.0, 4.0])
    } else {
        args.horizon.clone()
    };
    let growth = pick(args.growth, rf, "M", 1.0)?;
    let gamma = pick(args.gamma, rf, "gamma", 0.0)?;
    let d = pick(args.d, rf, "d", 1)?;
    let degree = match args.degree {
        Some(v) => Some(v),
        None => rf.value("degree")?,
    };
    let mut constants = Table::new(
        "constants",
        &[
            "H",
            "A_lower",
            "A_upper",
            "Atilde_lower",
            "Atilde_upper",
            "Atilde_vs_8AH(2H-1)",
            "K",
            "series_lower",
            "series_upper",
            "series_terms",
        ],
    );
    let mut shapes = Table::new("shapes", &["H", "T", "degree", "branch", "shape", "series_terms"]);
    let mut verified = true;
    for &h in &hs {
        let c = bound_constants(h, 1e-8)?;
        let deg = degree.unwrap_or_else(|| claimed_degree(h));
        let params = ErrorBoundParams::new(growth, gamma, d, deg, h)?;
        verified &= c.atilde_mismatch() <= SOLVE_TOLERANCE;
        constants.push(vec![
            num(h),
            num(c.a.0),
            num(c.a.1),
            num(c.atilde.0),
            num(c.atilde.1),
            num(c.atilde_mismatch()),
            num(params.k()),
            num(c.series.lower),
            num(c.series.upper),
            c.series.terms.to_string(),
        ]);
        for &t in &horizons {
            let s = error_bound_shape(&params, t)?;
            shapes.push(vec![
                num(h),
                num(t),
                deg.to_string(),
                s.branch.to_string(),
                num(s.value),
                s.terms.to_string(),
            ]);
        }
    }
    Ok(Outcome {
        command: "bounds",
        tables: vec![constants, shapes],
        verified,
    })
}
