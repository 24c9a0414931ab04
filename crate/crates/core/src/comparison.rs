//! Numerical harnesses for the two comparison principles.
//!
//! Hypotheses (residual signs, boundary ordering, growth) are checked first;
//! a verdict is only produced once they hold.

use serde::{Deserialize, Serialize};

use crate::barriers::SIGN_FLOOR;
use crate::constants::ProblemParams;
use crate::error::{Error, Result};
use crate::radial_pucci::{residual_main_nonnegative, RadialFunction};

pub const RATIO_TOL: f64 = 1e-8;

/// Largest admissible drift of `log(r^{2/(p−1)}w)` per unit `log r` in the innermost decade.
pub const GROWTH_TREND_TOL: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonOptions {
    pub ratio_tol: f64,
    /// Relative residual slack for the sign hypotheses.
    pub sign_tol: f64,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        Self {
            ratio_tol: RATIO_TOL,
            sign_tol: SIGN_FLOOR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    /// Smallest relative residual of `u` (must be ≥ −sign_tol).
    pub sub_margin: f64,
    /// Largest relative residual of `v` (must be ≤ sign_tol).
    pub super_margin: f64,
    pub c1g: Option<f64>,
    pub c2g: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub sup_ratio: f64,
    pub boundary_ratio: f64,
    pub worst_node: usize,
    pub worst_r: f64,
    pub hypothesis_check: HypothesisCheck,
    pub verdict: Verdict,
}

fn same_grid(u: &RadialFunction, v: &RadialFunction) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let same = u
        .r()
        .iter()
        .zip(v.r())
        .all(|(a, b)| (a - b).abs() <= 1e-14 * a.abs());
    if !same {
        return Err(Error::InvalidGrid("u and v are sampled on different radii".into()));
    }
    Ok(())
}

fn residual_signs(
    u: &RadialFunction,
    v: &RadialFunction,
    params: &ProblemParams,
    opts: &ComparisonOptions,
) -> Result<HypothesisCheck> {
    if let Some(i) = v.u.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::HypothesisViolation(format!(
            "super-solution not positive at node {i} (v = {})",
            v.u[i]
        )));
    }
    if let Some(i) = u.u.iter().position(|&x| !(x >= 0.0)) {
        return Err(Error::HypothesisViolation(format!(
            "sub-solution negative at node {i} (u = {})",
            u.u[i]
        )));
    }
    let ru = residual_main_nonnegative(u, params)?.relative();
    let rv = residual_main_nonnegative(v, params)?.relative();
    let (iu, sub_margin) = ru
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |a, (i, x)| if x < a.1 { (i, x) } else { a });
    let (iv, super_margin) = rv
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, x)| if x > a.1 { (i, x) } else { a });
    if !(sub_margin >= -opts.sign_tol) {
        return Err(Error::HypothesisViolation(format!(
            "u is not a sub-solution at node {iu} (r = {:e}, relative residual {sub_margin:e})",
            u.r()[iu]
        )));
    }
    if !(super_margin <= opts.sign_tol) {
        return Err(Error::HypothesisViolation(format!(
            "v is not a super-solution at node {iv} (r = {:e}, relative residual {super_margin:e})",
            v.r()[iv]
        )));
    }
    Ok(HypothesisCheck {
        sub_margin,
        super_margin,
        c1g: None,
        c2g: None,
    })
}

fn verdict(u: &RadialFunction, v: &RadialFunction, boundary_ratio: f64, hyp: HypothesisCheck, tol: f64) -> ComparisonReport {
    let (worst_node, sup_ratio) = u
        .u
        .iter()
        .zip(&v.u)
        .map(|(a, b)| a / b)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, x)| if x > a.1 { (i, x) } else { a });
    let pass = sup_ratio <= boundary_ratio.max(1.0) * (1.0 + tol);
    ComparisonReport {
        sup_ratio,
        boundary_ratio,
        worst_node,
        worst_r: u.r()[worst_node],
        hypothesis_check: hyp,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
    }
}

/// Comparison on the annulus spanned by the samples.
pub fn check_annulus(
    u: &RadialFunction,
    v: &RadialFunction,
    params: &ProblemParams,
    opts: &ComparisonOptions,
) -> Result<ComparisonReport> {
    same_grid(u, v)?;
    let hyp = residual_signs(u, v, params, opts)?;
    let n = u.len();
    for (name, i) in [("inner", 0), ("outer", n - 1)] {
        if u.u[i] > v.u[i] {
            return Err(Error::HypothesisViolation(format!(
                "boundary ordering fails at the {name} radius (u = {}, v = {})",
                u.u[i], v.u[i]
            )));
        }
    }
    let boundary_ratio = (u.u[0] / v.u[0]).max(u.u[n - 1] / v.u[n - 1]);
    Ok(verdict(u, v, boundary_ratio, hyp, opts.ratio_tol))
}

/// Growth constants `(c1g, c2g)` with `c1g r^{−s} ≤ v` and `u, v ≤ c2g r^{−s}` on the samples.
pub fn tightest_growth_constants(u: &RadialFunction, v: &RadialFunction, p: f64) -> (f64, f64) {
    let s = 2.0 / (p - 1.0);
    let r = u.r();
    let c1 = (0..v.len()).map(|i| v.u[i] * r[i].powf(s)).fold(f64::INFINITY, f64::min);
    let c2 = (0..u.len())
        .map(|i| (u.u[i] * r[i].powf(s)).max(v.u[i] * r[i].powf(s)))
        .fold(0.0, f64::max);
    (c1, c2)
}

/// Slope of `log(r^s w)` against `log r` over the innermost decade.
fn growth_trend(w: &RadialFunction, s: f64) -> Option<(f64, usize)> {
    let r = w.r();
    let top = r[0] * 10.0;
    let idx: Vec<usize> = (0..w.len()).filter(|&i| r[i] <= top && w.u[i] > 0.0).collect();
    if idx.len() < 3 {
        return None;
    }
    let xs: Vec<f64> = idx.iter().map(|&i| r[i].ln()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| (w.u[i] * r[i].powf(s)).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some((sxy / sxx, idx[0]))
}

/// Comparison on the punctured ball `(0, r₀]`, `r₀` the outermost sample.
///
/// Without explicit growth constants the tightest ones are computed, and the
/// innermost decade must show no drift of `r^{2/(p−1)}u` or `r^{2/(p−1)}v`
/// towards 0 or infinity.
pub fn check_ball(
    u: &RadialFunction,
    v: &RadialFunction,
    params: &ProblemParams,
    growth: Option<(f64, f64)>,
    opts: &ComparisonOptions,
) -> Result<ComparisonReport> {
    same_grid(u, v)?;
    let s = params.scaling_exponent();
    let r = u.r();
    let (c1g, c2g) = match growth {
        Some((c1, c2)) => {
            if !(c1 > 0.0 && c2 > 0.0) {
                return Err(Error::HypothesisViolation("growth constants must be positive".into()));
            }
            for i in 0..u.len() {
                let w = r[i].powf(-s);
                let slack = 1.0 + SIGN_FLOOR;
                if v.u[i] < c1 * w / slack {
                    return Err(Error::GrowthHypothesisViolation {
                        node: i,
                        r: r[i],
                        detail: format!("v = {} below c1g r^(-2/(p-1)) = {}", v.u[i], c1 * w),
                    });
                }
                if u.u[i].max(v.u[i]) > c2 * w * slack {
                    return Err(Error::GrowthHypothesisViolation {
                        node: i,
                        r: r[i],
                        detail: format!("max(u, v) = {} above c2g r^(-2/(p-1)) = {}", u.u[i].max(v.u[i]), c2 * w),
                    });
                }
            }
            (c1, c2)
        }
        None => {
            for (name, w, lower) in [("u", u, false), ("v", v, true)] {
                if let Some((slope, node)) = growth_trend(w, s) {
                    if slope < -GROWTH_TREND_TOL {
                        return Err(Error::GrowthHypothesisViolation {
                            node,
                            r: r[node],
                            detail: format!("r^(2/(p-1)) {name} grows towards the origin (trend {slope:.4})"),
                        });
                    }
                    if lower && slope > GROWTH_TREND_TOL {
                        return Err(Error::GrowthHypothesisViolation {
                            node,
                            r: r[node],
                            detail: format!("r^(2/(p-1)) {name} decays towards the origin (trend {slope:.4})"),
                        });
                    }
                }
            }
            tightest_growth_constants(u, v, params.p)
        }
    };
    let mut hyp = residual_signs(u, v, params, opts)?;
    hyp.c1g = Some(c1g);
    hyp.c2g = Some(c2g);
    let n = u.len();
    if u.u[n - 1] > v.u[n - 1] {
        return Err(Error::HypothesisViolation(format!(
            "u(r0) = {} exceeds v(r0) = {}",
            u.u[n - 1],
            v.u[n - 1]
        )));
    }
    let boundary_ratio = u.u[n - 1] / v.u[n - 1];
    Ok(verdict(u, v, boundary_ratio, hyp, opts.ratio_tol))
}
