//! Asymptotic classification of sampled positive radial solutions.

use serde::{Deserialize, Serialize};

use crate::constants::{classify_regime, ConstantSet, RegimeKind, DEFAULT_EQ_TOL};
use crate::error::{Error, Result};
use crate::radial_pucci::RadialFunction;

/// Samples must reach at least this deep.
pub const MIN_DEPTH: f64 = 1e-6;

/// Fewest samples accepted inside the tail window.
pub const MIN_WINDOW_POINTS: usize = 10;

/// Depth needed to tell `r^{−τ⁻}` from `r^{−τ⁻}(−log r)^{−τ⁻/2}` at `p = p**`.
pub const LOG_CRITICAL_DEPTH: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassVariant {
    PowerK,
    TauPlus,
    TauMinus,
    LogCritical,
}

impl ClassVariant {
    pub fn name(self) -> &'static str {
        match self {
            ClassVariant::PowerK => "PowerK",
            ClassVariant::TauPlus => "TauPlus",
            ClassVariant::TauMinus => "TauMinus",
            ClassVariant::LogCritical => "LogCritical",
        }
    }
}

impl std::fmt::Display for ClassVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDiagnostics {
    /// Least-squares slope of `log u` against `log r` on the window.
    pub slope: f64,
    pub slope_stderr: f64,
    pub slope_tol: f64,
    /// RMS residual of the log-log fit.
    pub fit_residual: f64,
    pub window: (f64, f64),
    pub points: usize,
    /// Relative change of the normalized quantity across the window.
    pub secondary_correction: f64,
    pub regime: RegimeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticClass {
    pub variant: ClassVariant,
    /// `c₁`, `c₂`, `K` or `K̄`, read off at the innermost sample.
    pub constant: f64,
    /// The decay exponent matched, as a positive number.
    pub exponent: f64,
    pub diagnostics: ClassDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub tail_decades: f64,
    /// Overrides the default separation-based tolerance.
    pub slope_tol: Option<f64>,
    pub eq_tol: f64,
    /// Reject variants the regime does not allow.
    pub check_regime: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            tail_decades: 3.0,
            slope_tol: None,
            eq_tol: DEFAULT_EQ_TOL,
            check_regime: false,
        }
    }
}

/// A quarter of the smallest gap between candidate exponents, clipped to `[1e−4, 0.1]`.
pub fn default_slope_tol(c: &ConstantSet) -> f64 {
    let s = c.s();
    let gaps = [
        (c.tau_plus - c.tau_minus).abs(),
        (s - c.tau_plus).abs(),
        (s - c.tau_minus).abs(),
    ];
    (0.25 * gaps.iter().cloned().fold(f64::INFINITY, f64::min)).clamp(1e-4, 0.1)
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = if xs.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, intercept, stderr, (sse / n).sqrt())
}

/// Drops a zero Dirichlet value at the outer node, then requires `u > 0`.
fn positive_part(u: &RadialFunction) -> Result<RadialFunction> {
    let n = u.len();
    let u = if n > 3 && u.u[n - 1] == 0.0 {
        u.slice(0, n - 1)?
    } else {
        u.clone()
    };
    match u.u.iter().position(|&v| !(v > 0.0)) {
        Some(node) => Err(Error::NonPositiveSample {
            node,
            value: u.u[node],
        }),
        None => Ok(u),
    }
}

fn allowed(variant: ClassVariant, regime: RegimeKind) -> bool {
    use ClassVariant::*;
    match regime {
        RegimeKind::Subcritical => matches!(variant, PowerK | TauPlus | TauMinus),
        RegimeKind::Intermediate => variant == TauMinus,
        RegimeKind::LogCritical => variant == LogCritical,
        RegimeKind::Supercritical => variant == PowerK,
    }
}

/// Matches the tail slope of `u` against the candidate exponents.
pub fn classify(u: &RadialFunction, c: &ConstantSet, opts: &ClassifyOptions) -> Result<AsymptoticClass> {
    let u = &positive_part(u)?;
    let r = u.r();
    let r_min = r[0];
    if r_min > MIN_DEPTH {
        return Err(Error::TailTooShort {
            r_min,
            needed: MIN_DEPTH,
        });
    }
    let r_top = r_min * 10f64.powf(opts.tail_decades);
    let idx: Vec<usize> = (0..r.len()).filter(|&i| r[i] <= r_top * (1.0 + 1e-12)).collect();
    if idx.len() < MIN_WINDOW_POINTS {
        return Err(Error::TailTooShort {
            r_min,
            needed: MIN_DEPTH,
        });
    }
    let lr: Vec<f64> = idx.iter().map(|&i| r[i].ln()).collect();
    let lu: Vec<f64> = idx.iter().map(|&i| u.u[i].ln()).collect();
    let (slope, _, slope_stderr, fit_residual) = least_squares(&lr, &lu);

    let regime = classify_regime(c.params.p, c, opts.eq_tol)?.kind;
    let s = c.s();
    let (tp, tm) = (c.tau_plus, c.tau_minus);
    let mut diag = ClassDiagnostics {
        slope,
        slope_stderr,
        slope_tol: 0.0,
        fit_residual,
        window: (r[idx[0]], r[*idx.last().unwrap()]),
        points: idx.len(),
        secondary_correction: 0.0,
        regime,
    };

    // Normalized quantity q = r^γ (−log r)^β u, inner value and relative drift.
    let normalized = |gamma: f64, beta: f64| {
        let q: Vec<f64> = idx
            .iter()
            .map(|&i| r[i].powf(gamma) * (-r[i].ln()).powf(beta) * u.u[i])
            .collect();
        let inner = q[0];
        let outer = *q.last().unwrap();
        (inner, (outer - inner).abs() / inner.abs(), q)
    };

    let (variant, exponent, constant, correction) = if regime == RegimeKind::LogCritical {
        // τ⁻ and 2/(p−1) coincide; only τ⁺ is separated.
        let tol = opts.slope_tol.unwrap_or((0.25 * (tp - tm)).clamp(1e-4, 0.1));
        diag.slope_tol = tol;
        let d_plus = (-slope - tp).abs();
        let d_minus = (-slope - tm).abs();
        if d_plus <= tol && d_minus > tol / 2.0 {
            let (k, corr, _) = normalized(tp, 0.0);
            (ClassVariant::TauPlus, tp, k, corr)
        } else if d_minus <= tol && d_plus > tol / 2.0 {
            if r_min > LOG_CRITICAL_DEPTH {
                return Err(Error::AmbiguousClass(format!(
                    "samples reach r = {r_min:e}; separating the log correction needs r <= {LOG_CRITICAL_DEPTH:e}"
                )));
            }
            // Decide between a pure power and the log-corrected power by the
            // drift of r^{τ⁻} u against log(−log r).
            let (_, _, q) = normalized(tm, 0.0);
            let ll: Vec<f64> = idx.iter().map(|&i| (-r[i].ln()).ln()).collect();
            let lq: Vec<f64> = q.iter().map(|v| v.ln()).collect();
            let (beta, _, _, _) = least_squares(&ll, &lq);
            let half = tm / 2.0;
            if (beta + half).abs() <= 0.25 * half {
                let (k, corr, _) = normalized(tm, half);
                (ClassVariant::LogCritical, tm, k, corr)
            } else if beta.abs() <= 0.25 * half {
                let (k, corr, _) = normalized(tm, 0.0);
                (ClassVariant::TauMinus, tm, k, corr)
            } else {
                return Err(Error::AmbiguousClass(format!(
                    "log-correction exponent {beta:.4} matches neither 0 nor -{half:.4}"
                )));
            }
        } else {
            return Err(Error::AmbiguousClass(format!(
                "slope {slope:.6} not within {tol:.3e} of a unique exponent"
            )));
        }
    } else {
        let tol = opts.slope_tol.unwrap_or_else(|| default_slope_tol(c));
        diag.slope_tol = tol;
        let candidates = [
            (ClassVariant::PowerK, s),
            (ClassVariant::TauPlus, tp),
            (ClassVariant::TauMinus, tm),
        ];
        let close: Vec<_> = candidates
            .iter()
            .filter(|(_, e)| (-slope - e).abs() <= tol)
            .collect();
        let near: Vec<_> = candidates
            .iter()
            .filter(|(_, e)| (-slope - e).abs() <= tol / 2.0)
            .collect();
        if close.is_empty() {
            return Err(Error::AmbiguousClass(format!(
                "slope {slope:.6} not within {tol:.3e} of -2/(p-1) = {:.6}, -tau+ = {:.6} or -tau- = {:.6}",
                -s, -tp, -tm
            )));
        }
        if near.len() > 1 || (close.len() > 1 && near.is_empty()) {
            return Err(Error::AmbiguousClass(format!(
                "slope {slope:.6} matches several exponents within {tol:.3e}"
            )));
        }
        let &(variant, e) = if near.len() == 1 { near[0] } else { close[0] };
        let (k, corr, _) = normalized(e, 0.0);
        (variant, e, k, corr)
    };
    diag.secondary_correction = correction;

    if opts.check_regime && !allowed(variant, regime) {
        return Err(Error::AmbiguousClass(format!("{variant} is not possible in the {regime} regime")));
    }
    Ok(AsymptoticClass {
        variant,
        constant,
        exponent,
        diagnostics: diag,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    /// `max r^{2/(p−1)} u` over the samples.
    pub x_bound: f64,
    /// Whether `u` at the innermost node exceeds its value at the outermost.
    pub unbounded_trend: bool,
    /// Set when the regime requires `r^{τ⁻}u` non-decreasing.
    pub v_monotone: Option<bool>,
    /// Constant of the log-half bound, when `p = p**`.
    pub log_half_constant: Option<f64>,
}

/// Relative slack allowed in the monotonicity and log-half checks.
pub const BOUNDS_TOL: f64 = 1e-10;

/// Checks the a-priori bounds every solution must satisfy on the sample range.
pub fn check_asymptotic_bounds(u: &RadialFunction, c: &ConstantSet) -> Result<BoundsReport> {
    let u = &positive_part(u)?;
    let r = u.r();
    let n = r.len();
    let s = c.s();
    let (tm, p) = (c.tau_minus, c.params.p);
    let regime = classify_regime(p, c, DEFAULT_EQ_TOL)?.kind;

    let x: Vec<f64> = (0..n).map(|i| r[i].powf(s) * u.u[i]).collect();
    let x_bound = x.iter().cloned().fold(0.0, f64::max);
    if !x_bound.is_finite() {
        let node = x.iter().position(|v| !v.is_finite()).unwrap_or(0);
        return Err(Error::BoundViolation {
            quantity: "r^{2/(p-1)} u bounded".into(),
            node,
            r: r[node],
        });
    }
    let unbounded_trend = u.u[0] > u.u[n - 1];

    let mut v_monotone = None;
    if matches!(regime, RegimeKind::Intermediate | RegimeKind::LogCritical) {
        let v: Vec<f64> = (0..n).map(|i| r[i].powf(tm) * u.u[i]).collect();
        for i in 0..n - 1 {
            if v[i + 1] < v[i] - BOUNDS_TOL * v[i].abs() {
                return Err(Error::BoundViolation {
                    quantity: "r^{tau-} u non-decreasing".into(),
                    node: i + 1,
                    r: r[i + 1],
                });
            }
        }
        v_monotone = Some(true);
    }

    let mut log_half_constant = None;
    if regime == RegimeKind::LogCritical {
        // Comparison with C r^{−τ⁻}(−log r)^{−τ⁻/2} on r ≤ r₀, −log r₀ ≥ 1/2.
        let threshold = 0.5 * c.params.big_lambda * tm * (tm + c.n_tilde_plus + 1.0);
        let inside: Vec<usize> = (0..n).filter(|&i| -r[i].ln() >= 0.5).collect();
        if let Some(&i0) = inside.last() {
            let q = |i: usize| u.u[i] * (r[i] * (-r[i].ln()).sqrt()).powf(tm);
            let constant = (2.0 * threshold).powf(1.0 / (p - 1.0)).max(q(i0));
            for &i in &inside {
                if q(i) > constant * (1.0 + BOUNDS_TOL) {
                    return Err(Error::BoundViolation {
                        quantity: "log-half bound".into(),
                        node: i,
                        r: r[i],
                    });
                }
            }
            log_half_constant = Some(constant);
        }
    }

    Ok(BoundsReport {
        x_bound,
        unbounded_trend,
        v_monotone,
        log_half_constant,
    })
}
