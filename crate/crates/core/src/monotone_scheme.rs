//! Monotone approximation on shrinking annuli.
//!
//! Each step solves `−M⁺(D²v) + |v|^{p−1}v = f` on `[rₙ, 1]` where the
//! singular term `μv/r²` is frozen into `f`, using the previous iterate on
//! `[rₙ₋₁, 1]` and the sub-solution on the new piece.

use serde::{Deserialize, Serialize};

use crate::barriers::{make_barrier, Barrier, BarrierKind, FreeParams};
use crate::constants::{classify_regime, ConstantSet, ProblemParams, RegimeKind, DEFAULT_EQ_TOL};
use crate::error::{Error, Result};
use crate::radial_pucci::{residual_main, LogGrid, RadialFunction};

/// Dirichlet problem on an annulus with frozen singular term.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusProblem {
    pub grid: LogGrid,
    /// Per-node source, including the boundary nodes (ignored there).
    pub source: Vec<f64>,
    pub inner: f64,
    pub outer: f64,
    pub params: ProblemParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvpOptions {
    /// Bound on the row-scaled residual.
    pub newton_tol: f64,
    pub max_iter: usize,
    pub max_halvings: u32,
    pub initial: Option<Vec<f64>>,
    /// Bracket used by the Picard fallback.
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl Default for BvpOptions {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_iter: 200,
            max_halvings: 30,
            initial: None,
            lower: None,
            upper: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvpSolution {
    pub values: Vec<f64>,
    pub newton_iterations: usize,
    pub picard_steps: usize,
    /// Final row-scaled residual ∞-norm.
    pub residual: f64,
}

/// Largest log step for which the discrete operator is monotone.
pub fn max_monotone_step(params: &ProblemParams) -> f64 {
    let n1 = (params.dim - 1) as f64;
    let denom = n1 * params.big_lambda - params.lambda;
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        2.0 * params.lambda / denom
    }
}

fn phi(x: f64, params: &ProblemParams) -> (f64, f64) {
    // Value and slope of x ↦ Λx⁺ − λx⁻; the slope at 0 is taken as Λ.
    if x >= 0.0 {
        (params.big_lambda * x, params.big_lambda)
    } else {
        (params.lambda * x, params.lambda)
    }
}

struct Discretization<'a> {
    h: f64,
    r2: Vec<f64>,
    rhs: Vec<f64>,
    params: &'a ProblemParams,
}

struct Linearization {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    residual: Vec<f64>,
    scale: Vec<f64>,
}

impl Discretization<'_> {
    /// Residual rows and Jacobian at interior nodes `1..n−1`.
    fn linearize(&self, v: &[f64]) -> Linearization {
        let n = v.len();
        let m = n - 2;
        let (h, p) = (self.h, self.params.p);
        let n1 = (self.params.dim - 1) as f64;
        let mut out = Linearization {
            sub: vec![0.0; m],
            diag: vec![0.0; m],
            sup: vec![0.0; m],
            residual: vec![0.0; m],
            scale: vec![0.0; m],
        };
        for k in 0..m {
            let i = k + 1;
            let d1 = (v[i + 1] - v[i - 1]) / (2.0 * h);
            let d2 = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
            let (a, sa) = phi(d2 - d1, self.params);
            let (b, sb) = phi(d1, self.params);
            let nl = self.r2[i] * v[i].abs().powf(p - 1.0) * v[i];
            out.residual[k] = -(a + n1 * b) + nl - self.rhs[i];
            out.scale[k] = self.params.big_lambda * ((d2 - d1).abs() + n1 * d1.abs())
                + nl.abs()
                + self.rhs[i].abs()
                + f64::MIN_POSITIVE;
            // ∂/∂v[i±1] and ∂/∂v[i] of the row.
            out.sup[k] = -(sa * (1.0 / (h * h) - 1.0 / (2.0 * h)) + n1 * sb / (2.0 * h));
            out.sub[k] = -(sa * (1.0 / (h * h) + 1.0 / (2.0 * h)) - n1 * sb / (2.0 * h));
            out.diag[k] = sa * 2.0 / (h * h) + p * self.r2[i] * v[i].abs().powf(p - 1.0);
        }
        out
    }
}

fn norm_scaled(lin: &Linearization) -> f64 {
    lin.residual
        .iter()
        .zip(&lin.scale)
        .map(|(r, s)| (r / s).abs())
        .fold(0.0, f64::max)
}

/// Thomas algorithm; `rhs` is overwritten with the solution.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut beta = diag[0];
    c[0] = sup[0] / beta;
    rhs[0] /= beta;
    for k in 1..m {
        beta = diag[k] - sub[k] * c[k - 1];
        c[k] = sup[k] / beta;
        rhs[k] = (rhs[k] - sub[k] * rhs[k - 1]) / beta;
    }
    for k in (0..m - 1).rev() {
        rhs[k] -= c[k] * rhs[k + 1];
    }
}

fn validate(prob: &AnnulusProblem) -> Result<()> {
    let n = prob.grid.len();
    if prob.source.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: prob.source.len(),
        });
    }
    if n < 3 {
        return Err(Error::GridTooSmall { needed: 3, got: n });
    }
    if !(prob.grid.r_min() > 0.0 && prob.grid.r_max() <= 1.0) {
        return Err(Error::InvalidProblem(format!(
            "annulus [{}, {}] must satisfy 0 < a < 1",
            prob.grid.r_min(),
            prob.grid.r_max()
        )));
    }
    if prob.source.iter().any(|f| !(*f >= 0.0) || !f.is_finite()) {
        return Err(Error::InvalidProblem("source must be finite and non-negative".into()));
    }
    if !(prob.inner >= 0.0 && prob.outer >= 0.0) {
        return Err(Error::InvalidProblem("boundary values must be non-negative".into()));
    }
    let h = prob.grid.log_step();
    let h_max = max_monotone_step(&prob.params);
    if h > h_max {
        return Err(Error::NonMonotoneOperator { h, h_max });
    }
    Ok(())
}

/// Solves the annulus problem and returns the discrete solution as a radial function.
pub fn solve_annulus_bvp(prob: &AnnulusProblem) -> Result<RadialFunction> {
    let sol = solve_annulus_bvp_with(prob, &BvpOptions::default())?;
    RadialFunction::from_values(prob.grid.clone(), sol.values)
}

/// Semismooth Newton with backtracking; a bracketed Picard step is the fallback.
pub fn solve_annulus_bvp_with(prob: &AnnulusProblem, opts: &BvpOptions) -> Result<BvpSolution> {
    validate(prob)?;
    let n = prob.grid.len();
    let r2: Vec<f64> = prob.grid.nodes().iter().map(|r| r * r).collect();
    let rhs: Vec<f64> = prob.source.iter().zip(&r2).map(|(f, q)| f * q).collect();
    let disc = Discretization {
        h: prob.grid.log_step(),
        r2,
        rhs,
        params: &prob.params,
    };

    let mut v = match &opts.initial {
        Some(init) if init.len() == n => init.clone(),
        _ => {
            // Linear interpolation in log r between the boundary values.
            let (lo, hi) = (prob.grid.r_min().ln(), prob.grid.r_max().ln());
            prob.grid
                .nodes()
                .iter()
                .map(|r| {
                    let w = (r.ln() - lo) / (hi - lo);
                    prob.inner * (1.0 - w) + prob.outer * w
                })
                .collect()
        }
    };
    v[0] = prob.inner;
    v[n - 1] = prob.outer;

    let mut lin = disc.linearize(&v);
    let mut res = norm_scaled(&lin);
    let mut picard_steps = 0;
    for iter in 0..opts.max_iter {
        if res <= opts.newton_tol {
            return Ok(BvpSolution {
                values: v,
                newton_iterations: iter,
                picard_steps,
                residual: res,
            });
        }
        let mut step: Vec<f64> = lin.residual.iter().map(|r| -r).collect();
        solve_tridiagonal(&lin.sub, &lin.diag, &lin.sup, &mut step);

        let mut accepted = false;
        let mut t = 1.0;
        for _ in 0..=opts.max_halvings {
            let mut trial = v.clone();
            for (k, d) in step.iter().enumerate() {
                trial[k + 1] += t * d;
            }
            let tlin = disc.linearize(&trial);
            let tres = norm_scaled(&tlin);
            if tres < res || tres <= opts.newton_tol {
                v = trial;
                lin = tlin;
                res = tres;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if accepted {
            continue;
        }

        // Fallback: full step projected onto the bracket.
        let mut trial = v.clone();
        for (k, d) in step.iter().enumerate() {
            let mut x = trial[k + 1] + d;
            if let Some(lo) = &opts.lower {
                x = x.max(lo[k + 1]);
            }
            if let Some(hi) = &opts.upper {
                x = x.min(hi[k + 1]);
            }
            trial[k + 1] = x;
        }
        let tlin = disc.linearize(&trial);
        let tres = norm_scaled(&tlin);
        picard_steps += 1;
        if !(tres < res) && (opts.lower.is_none() && opts.upper.is_none() || trial == v) {
            return Err(Error::NewtonDivergence {
                iterations: iter + 1,
                residual: res,
            });
        }
        v = trial;
        lin = tlin;
        res = tres;
    }
    if res <= opts.newton_tol {
        return Ok(BvpSolution {
            values: v,
            newton_iterations: opts.max_iter,
            picard_steps,
            residual: res,
        });
    }
    Err(Error::NewtonDivergence {
        iterations: opts.max_iter,
        residual: res,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeCase {
    TauPlus,
    TauMinus,
    LogCritical,
}

impl std::str::FromStr for SchemeCase {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "tau-plus" => Ok(SchemeCase::TauPlus),
            "tau-minus" => Ok(SchemeCase::TauMinus),
            "log-critical" => Ok(SchemeCase::LogCritical),
            _ => Err(format!("unknown scheme case `{s}`")),
        }
    }
}

impl std::fmt::Display for SchemeCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SchemeCase::TauPlus => "tau-plus",
            SchemeCase::TauMinus => "tau-minus",
            SchemeCase::LogCritical => "log-critical",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    /// Radii are `rₙ = 2^{−n}`, `n = 1..=n_max`.
    pub n_max: u32,
    pub nodes_per_octave: usize,
    pub mono_tol: f64,
    pub scheme_tol: f64,
    pub newton_tol: f64,
    /// Octaves next to the inner boundary dropped from the reported limit;
    /// the pinned boundary value distorts the last iterate there.
    pub trim_octaves: u32,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            n_max: 24,
            nodes_per_octave: 128,
            mono_tol: 1e-10,
            scheme_tol: 1e-8,
            newton_tol: 1e-10,
            trim_octaves: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeCertificate {
    pub monotone: bool,
    pub bracketed: bool,
    /// Relative `residual_main` ∞-norm of the reported limit.
    pub residual_norm: f64,
    pub iterations: u32,
    pub stop: StopReason,
    /// Pointwise relative sup-distance between the last two iterates.
    pub last_distance: f64,
    /// Smallest slack `v − sub` and `super − v`, relative to the barrier.
    pub worst_sub_gap: f64,
    pub worst_super_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub case: SchemeCase,
    pub iterates: Vec<RadialFunction>,
    pub limit: RadialFunction,
    pub sub: Barrier,
    pub sup: Barrier,
    pub certificate: SchemeCertificate,
}

/// Sub- and super-solution used for each case.
pub fn scheme_barriers(case: SchemeCase, c: &ConstantSet) -> Result<(Barrier, Barrier)> {
    let regime = classify_regime(c.params.p, c, DEFAULT_EQ_TOL)?.kind;
    let admissible = match case {
        SchemeCase::TauPlus => regime == RegimeKind::Subcritical,
        SchemeCase::TauMinus => matches!(regime, RegimeKind::Subcritical | RegimeKind::Intermediate),
        SchemeCase::LogCritical => regime == RegimeKind::LogCritical,
    };
    if !admissible {
        let required = match case {
            SchemeCase::TauPlus => "Subcritical",
            SchemeCase::TauMinus => "Subcritical|Intermediate",
            SchemeCase::LogCritical => "LogCritical",
        };
        return Err(Error::RegimeMismatch {
            kind: case.to_string(),
            required: required.into(),
            actual: regime.to_string(),
        });
    }
    match case {
        SchemeCase::TauPlus => {
            let sub = make_barrier(BarrierKind::TauPlusSub, c, &FreeParams::default())?;
            let sup = make_barrier(
                BarrierKind::PowerSuper,
                c,
                &FreeParams {
                    c: Some(1.0),
                    gamma: Some(c.tau_plus),
                    ..Default::default()
                },
            )?;
            Ok((sub, sup))
        }
        SchemeCase::TauMinus => {
            let sub = make_barrier(BarrierKind::TauMinusSub, c, &FreeParams::default())?;
            let eps = sub.params.eps.expect("resolved");
            let sup = make_barrier(
                BarrierKind::PowerSuper,
                c,
                &FreeParams {
                    c: Some((4.0 * eps).max(1.0)),
                    gamma: Some(c.tau_minus),
                    ..Default::default()
                },
            )?;
            Ok((sub, sup))
        }
        SchemeCase::LogCritical => {
            let sub = make_barrier(BarrierKind::LogSub, c, &FreeParams::default())?;
            let sup = make_barrier(BarrierKind::LogSuper, c, &FreeParams::default())?;
            Ok((sub, sup))
        }
    }
}

/// Runs the annulus iteration for `case` on `rₙ = 2^{−n}`.
pub fn run_scheme(case: SchemeCase, c: &ConstantSet, cfg: &SchemeConfig) -> Result<SchemeResult> {
    let (sub, sup) = scheme_barriers(case, c)?;
    if cfg.n_max < 1 {
        return Err(Error::InvalidProblem("n_max must be at least 1".into()));
    }
    let full = LogGrid::dyadic(1.0, cfg.n_max, cfg.nodes_per_octave)?;
    let total = full.len();
    let k = cfg.nodes_per_octave;
    let mu = c.params.mu;

    let sub_vals: Vec<f64> = full.nodes().iter().map(|&r| sub.eval_unchecked(r).0).collect();
    let sup_vals: Vec<f64> = full.nodes().iter().map(|&r| sup.eval_unchecked(r).0).collect();

    let mut iterates: Vec<RadialFunction> = Vec::new();
    let mut prev: Vec<f64> = Vec::new();
    let mut distance = f64::INFINITY;
    let mut stop = StopReason::MaxIterations;
    let (mut worst_sub_gap, mut worst_super_gap) = (f64::INFINITY, f64::INFINITY);
    let mut n_done = 0;

    for n in 1..=cfg.n_max {
        // Index of rₙ in the full grid; nodes are stored in increasing r.
        let start = total - 1 - n as usize * k;
        let grid = full.slice(start, total)?;
        let m = grid.len();
        let old = prev.len();
        let source: Vec<f64> = (0..m)
            .map(|i| {
                let r = grid.nodes()[i];
                let w = if i + old >= m { prev[i + old - m] } else { sub_vals[start + i] };
                mu * w / (r * r)
            })
            .collect();
        let mut initial = sub_vals[start..].to_vec();
        initial[m - old..].copy_from_slice(&prev);
        let prob = AnnulusProblem {
            grid: grid.clone(),
            source,
            inner: sub_vals[start],
            outer: sub_vals[total - 1],
            params: c.params,
        };
        let opts = BvpOptions {
            newton_tol: cfg.newton_tol,
            initial: Some(initial),
            lower: Some(sub_vals[start..].to_vec()),
            upper: Some(sup_vals[start..].to_vec()),
            ..Default::default()
        };
        let sol = solve_annulus_bvp_with(&prob, &opts)?;
        let v = sol.values;

        for i in 0..m {
            let (lo, hi) = (sub_vals[start + i], sup_vals[start + i]);
            let slack = cfg.mono_tol * lo.abs().max(hi.abs());
            let r = grid.nodes()[i];
            if v[i] < lo - slack {
                return Err(Error::BracketViolation {
                    iteration: n as usize,
                    node: start + i,
                    r,
                    side: format!("below sub-solution by {:e}", lo - v[i]),
                });
            }
            if v[i] > hi + slack {
                return Err(Error::BracketViolation {
                    iteration: n as usize,
                    node: start + i,
                    r,
                    side: format!("above super-solution by {:e}", v[i] - hi),
                });
            }
            if hi > 0.0 {
                worst_sub_gap = worst_sub_gap.min((v[i] - lo) / hi);
                worst_super_gap = worst_super_gap.min((hi - v[i]) / hi);
            }
        }

        if old > 0 {
            let mut dist: f64 = 0.0;
            for j in 0..old {
                let (a, b) = (prev[j], v[m - old + j]);
                if b < a - cfg.mono_tol * a.abs() {
                    return Err(Error::MonotonicityViolation {
                        iteration: n as usize,
                        node: start + m - old + j,
                        r: grid.nodes()[m - old + j],
                        drop: a - b,
                    });
                }
                if b != 0.0 {
                    dist = dist.max((b - a).abs() / b.abs());
                }
            }
            distance = dist;
        }
        iterates.push(RadialFunction::from_values(grid, v.clone())?);
        prev = v;
        n_done = n;
        if distance < cfg.scheme_tol {
            stop = StopReason::Converged;
            break;
        }
    }

    let last = iterates.last().expect("at least one iteration");
    let trim = cfg.trim_octaves.min(n_done - 1) as usize * k;
    let limit = last.slice(trim, last.len())?;
    let residual_norm = limit_residual(&limit, &c.params);
    Ok(SchemeResult {
        case,
        iterates,
        limit,
        sub,
        sup,
        certificate: SchemeCertificate {
            monotone: true,
            bracketed: true,
            residual_norm,
            iterations: n_done,
            stop,
            last_distance: distance,
            worst_sub_gap,
            worst_super_gap,
        },
    })
}

/// Relative residual of the limit, skipping the outer node where `v` may vanish.
fn limit_residual(limit: &RadialFunction, params: &ProblemParams) -> f64 {
    let n = limit.len();
    match limit.slice(0, n - 1).and_then(|f| residual_main(&f, params)) {
        Ok(res) => res.max_relative(),
        Err(_) => f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::derive_constants;
    use crate::radial_pucci::{pucci_radial, Sign};

    fn params(p: f64) -> ProblemParams {
        ProblemParams::new(1.0, 2.0, 5, 0.25, p).unwrap()
    }

    #[test]
    fn zero_data_gives_zero() {
        let grid = LogGrid::new(0.01, 1.0, 101).unwrap();
        let prob = AnnulusProblem {
            source: vec![0.0; 101],
            grid,
            inner: 0.0,
            outer: 0.0,
            params: params(2.0),
        };
        let v = solve_annulus_bvp(&prob).unwrap();
        assert!(v.u.iter().all(|&x| x == 0.0));
    }

    fn manufactured_error(n: usize) -> f64 {
        let pr = params(2.0);
        let tau = 0.5;
        let w = |r: f64| {
            (
                (1.0 - r) * r.powf(-tau),
                -tau * r.powf(-tau - 1.0) - (1.0 - tau) * r.powf(-tau),
                tau * (tau + 1.0) * r.powf(-tau - 2.0) + (1.0 - tau) * tau * r.powf(-tau - 1.0),
            )
        };
        let grid = LogGrid::new(0.01, 1.0, n).unwrap();
        let source: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&r| {
                let (u, du, ddu) = w(r);
                -pucci_radial(ddu, du / r, &pr, Sign::Plus) + u.powf(pr.p)
            })
            .collect();
        let exact: Vec<f64> = grid.nodes().iter().map(|&r| w(r).0).collect();
        let prob = AnnulusProblem {
            grid,
            source,
            inner: exact[0],
            outer: 0.0,
            params: pr,
        };
        let v = solve_annulus_bvp(&prob).unwrap();
        v.u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn manufactured_second_order() {
        let e1 = manufactured_error(201);
        let e2 = manufactured_error(401);
        let e3 = manufactured_error(801);
        for (a, b) in [(e1, e2), (e2, e3)] {
            assert!((a / b).log2() >= 1.9, "errors {e1:e} {e2:e} {e3:e}");
        }
    }

    #[test]
    fn rejects_coarse_grid() {
        let grid = LogGrid::new(1e-3, 1.0, 10).unwrap();
        let prob = AnnulusProblem {
            source: vec![0.0; 10],
            grid,
            inner: 1.0,
            outer: 0.0,
            params: params(2.0),
        };
        assert!(matches!(solve_annulus_bvp(&prob), Err(Error::NonMonotoneOperator { .. })));
    }

    #[test]
    fn tau_plus_bvp_is_bracketed() {
        let c = derive_constants(&params(2.0)).unwrap();
        let (sub, sup) = scheme_barriers(SchemeCase::TauPlus, &c).unwrap();
        let grid = LogGrid::dyadic(1.0, 6, 64).unwrap();
        let source: Vec<f64> = grid.nodes().iter().map(|&r| c.params.mu * sub.eval_unchecked(r).0 / (r * r)).collect();
        let prob = AnnulusProblem {
            inner: sub.eval_unchecked(grid.r_min()).0,
            outer: 0.0,
            source,
            grid: grid.clone(),
            params: c.params,
        };
        let v = solve_annulus_bvp(&prob).unwrap();
        for (i, &r) in grid.nodes().iter().enumerate() {
            assert!(v.u[i] >= sub.eval_unchecked(r).0 * (1.0 - 1e-10));
            assert!(v.u[i] <= sup.eval_unchecked(r).0);
        }
    }
}
