//! Emden–Fowler variables `t = log r`, `x = r^{2/(p−1)} u`.
//!
//! In these variables the radial equation becomes the autonomous ODE
//! `x″ = (λ₁+λ₂)x′ − λ₁λ₂x + xᵖ/Λ` with `λ₁,₂ = 2/(p−1) − τ^±`.

use serde::{Deserialize, Serialize};

use crate::constants::{classify_regime, log_critical_kbar, ConstantSet, RegimeKind, DEFAULT_EQ_TOL};
use crate::error::{Error, Result};
use crate::radial_pucci::{fd_derivatives, LogGrid, Provenance, RadialFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfState {
    pub t: f64,
    pub x: f64,
    pub xp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeDirection {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    SpanReached,
    BlowUp,
    /// `x` fell below the underflow floor; this includes crossing zero.
    Underflow,
    StepFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfTrajectory {
    pub states: Vec<EfState>,
    pub direction: TimeDirection,
    pub termination: Termination,
}

impl EfTrajectory {
    pub fn last(&self) -> &EfState {
        self.states.last().expect("trajectory has a start state")
    }

    /// Linear interpolation of `x` at time `t`, if `t` was reached.
    pub fn x_at(&self, t: f64) -> Option<f64> {
        self.states.windows(2).find_map(|w| {
            let (a, b) = (w[0], w[1]);
            let (lo, hi) = if a.t <= b.t { (a, b) } else { (b, a) };
            (lo.t <= t && t <= hi.t).then(|| {
                if hi.t == lo.t {
                    lo.x
                } else {
                    lo.x + (hi.x - lo.x) * (t - lo.t) / (hi.t - lo.t)
                }
            })
        })
    }
}

/// Coefficients of the autonomous equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfSystem {
    pub p: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub big_lambda: f64,
}

impl EfSystem {
    pub fn new(c: &ConstantSet) -> Self {
        let s = c.s();
        Self {
            p: c.params.p,
            lambda1: s - c.tau_plus,
            lambda2: s - c.tau_minus,
            big_lambda: c.params.big_lambda,
        }
    }

    pub fn s(&self) -> f64 {
        2.0 / (self.p - 1.0)
    }

    /// Right-hand side extended oddly in `x`, used inside the integrator.
    fn accel(&self, x: f64, xp: f64) -> f64 {
        (self.lambda1 + self.lambda2) * xp - self.lambda1 * self.lambda2 * x
            + x.abs().powf(self.p - 1.0) * x / self.big_lambda
    }
}

/// `x″` at a state representing a positive solution.
pub fn ef_rhs(state: &EfState, c: &ConstantSet) -> Result<f64> {
    if state.x < 0.0 {
        return Err(Error::NegativeX(state.x));
    }
    Ok(EfSystem::new(c).accel(state.x, state.xp))
}

/// Samples `u` in Emden–Fowler variables, one state per grid node.
pub fn to_ef(u: &RadialFunction, p: f64) -> Vec<EfState> {
    let s = 2.0 / (p - 1.0);
    u.r()
        .iter()
        .zip(u.u.iter().zip(&u.du))
        .map(|(&r, (&v, &dv))| {
            let rs = r.powf(s);
            let x = rs * v;
            EfState {
                t: r.ln(),
                x,
                xp: s * x + rs * r * dv,
            }
        })
        .collect()
}

/// Inverse of [`to_ef`]; `u″` is recovered by differencing `u′`.
pub fn from_ef(samples: &[EfState], p: f64) -> Result<RadialFunction> {
    let s = 2.0 / (p - 1.0);
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    let grid = LogGrid::from_nodes(sorted.iter().map(|e| e.t.exp()).collect())?;
    let u: Vec<f64> = sorted.iter().map(|e| (-s * e.t).exp() * e.x).collect();
    let du: Vec<f64> = sorted
        .iter()
        .map(|e| (-(s + 1.0) * e.t).exp() * (e.xp - s * e.x))
        .collect();
    let (ddu, _) = fd_derivatives(&grid, &du)?;
    Ok(RadialFunction {
        grid,
        u,
        du,
        ddu,
        provenance: Provenance::FiniteDifference,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub x: f64,
    /// Eigenvalues of the linearization, ascending.
    pub eigenvalues: (f64, f64),
}

fn quadratic_roots(sum: f64, prod: f64) -> (f64, f64) {
    let disc = (sum * sum - 4.0 * prod).max(0.0).sqrt();
    // Stable form: compute the larger-magnitude root first.
    let big = 0.5 * (sum + sum.signum() * disc);
    if big == 0.0 {
        return (0.0, 0.0);
    }
    let other = prod / big;
    if big < other {
        (big, other)
    } else {
        (other, big)
    }
}

/// The origin, plus the `K` equilibrium when it exists.
pub fn equilibria(c: &ConstantSet) -> Vec<Equilibrium> {
    let sys = EfSystem::new(c);
    let (l1, l2) = (sys.lambda1, sys.lambda2);
    let mut out = vec![Equilibrium {
        x: 0.0,
        eigenvalues: if l1 <= l2 { (l1, l2) } else { (l2, l1) },
    }];
    if let Some(k) = c.k_opt {
        out.push(Equilibrium {
            x: k,
            eigenvalues: quadratic_roots(l1 + l2, l1 * l2 * (1.0 - sys.p)),
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub x_max: f64,
    pub x_min: f64,
    pub max_steps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            x_max: 1e12,
            x_min: 1e-300,
            max_steps: 5_000_000,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step; returns the fifth-order state and the error estimate.
pub(crate) fn dopri_step(sys: &EfSystem, y: [f64; 2], h: f64) -> ([f64; 2], [f64; 2]) {
    let f = |y: [f64; 2]| [y[1], sys.accel(y[0], y[1])];
    let mut k = [[0.0; 2]; 7];
    k[0] = f(y);
    for i in 1..7 {
        let mut yi = y;
        for (j, kj) in k.iter().enumerate().take(i) {
            yi[0] += h * A[i][j] * kj[0];
            yi[1] += h * A[i][j] * kj[1];
        }
        k[i] = f(yi);
    }
    let mut y5 = y;
    let mut err = [0.0; 2];
    for i in 0..7 {
        for d in 0..2 {
            y5[d] += h * B5[i] * k[i][d];
            err[d] += h * (B5[i] - B4[i]) * k[i][d];
        }
    }
    debug_assert!(C[6] == 1.0);
    (y5, err)
}

/// Adaptive integration over a time span of length `t_span` in `direction`.
pub fn integrate(
    start: EfState,
    direction: TimeDirection,
    t_span: f64,
    c: &ConstantSet,
    opts: &IntegrateOptions,
) -> Result<EfTrajectory> {
    integrate_system(&EfSystem::new(c), start, direction, t_span, opts)
}

pub fn integrate_system(
    sys: &EfSystem,
    start: EfState,
    direction: TimeDirection,
    t_span: f64,
    opts: &IntegrateOptions,
) -> Result<EfTrajectory> {
    if !(opts.rel_tol > 0.0 && opts.abs_tol > 0.0) {
        return Err(Error::InvalidProblem("tolerances must be positive".into()));
    }
    if !(t_span >= 0.0) {
        return Err(Error::InvalidProblem("t_span must be non-negative".into()));
    }
    let sign = match direction {
        TimeDirection::Forward => 1.0,
        TimeDirection::Backward => -1.0,
    };
    let t_end = start.t + sign * t_span;
    let mut states = vec![start];
    let mut t = start.t;
    let mut y = [start.x, start.xp];
    let mut h = sign * (1e-3 * t_span.max(1e-3)).min(1e-2);
    let mut termination = Termination::SpanReached;

    let scale = |a: f64, b: f64| opts.abs_tol + opts.rel_tol * a.abs().max(b.abs());

    let mut steps = 0;
    while sign * (t_end - t) > 0.0 {
        if steps >= opts.max_steps {
            return Err(Error::StepFailure { t });
        }
        steps += 1;
        if sign * (t + h - t_end) > 0.0 {
            h = t_end - t;
        }
        let (y5, e) = dopri_step(sys, y, h);
        let err = ((e[0] / scale(y[0], y5[0])).powi(2) + (e[1] / scale(y[1], y5[1])).powi(2)).sqrt()
            / std::f64::consts::SQRT_2;
        if err <= 1.0 && y5.iter().all(|v| v.is_finite()) {
            t = if sign * (t + h - t_end) >= 0.0 { t_end } else { t + h };
            y = y5;
            states.push(EfState {
                t,
                x: y[0],
                xp: y[1],
            });
            if y[0] > opts.x_max {
                termination = Termination::BlowUp;
                break;
            }
            if y[0] < opts.x_min {
                termination = Termination::Underflow;
                break;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h *= fac;
        }
        if h.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepFailure { t });
        }
    }
    Ok(EfTrajectory {
        states,
        direction,
        termination,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateKind {
    /// `x ~ e^{slope·t}`.
    Exponential,
    /// `x ~ (−t)^{slope}`.
    Algebraic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub kind: RateKind,
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Minimum number of positive tail samples.
pub const MIN_TAIL_POINTS: usize = 20;

/// Exponential slopes smaller than this trigger the algebraic fit.
pub const ALGEBRAIC_SWITCH: f64 = 1e-3;

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = if xs.len() > 2 && sxx > 0.0 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, stderr, intercept)
}

/// Fits the growth rate of positive samples `(t, x)`.
pub fn fit_rate(samples: &[EfState]) -> Result<RateFit> {
    let pts: Vec<&EfState> = samples.iter().filter(|s| s.x > 0.0).collect();
    if pts.len() < MIN_TAIL_POINTS {
        return Err(Error::InsufficientTail {
            got: pts.len(),
            needed: MIN_TAIL_POINTS,
        });
    }
    let ts: Vec<f64> = pts.iter().map(|s| s.t).collect();
    let ls: Vec<f64> = pts.iter().map(|s| s.x.ln()).collect();
    let (slope, stderr, intercept) = least_squares(&ts, &ls);
    if slope.abs() >= ALGEBRAIC_SWITCH || ts.iter().any(|&t| t >= 0.0) {
        return Ok(RateFit {
            kind: RateKind::Exponential,
            slope,
            stderr,
            intercept,
            points: pts.len(),
        });
    }
    let lt: Vec<f64> = ts.iter().map(|t| (-t).ln()).collect();
    let (slope, stderr, intercept) = least_squares(&lt, &ls);
    Ok(RateFit {
        kind: RateKind::Algebraic,
        slope,
        stderr,
        intercept,
        points: pts.len(),
    })
}

/// Fits the rate over the trailing `tail_fraction` of the time span covered.
pub fn asymptotic_rate(traj: &EfTrajectory, tail_fraction: f64) -> Result<RateFit> {
    let first = traj.states[0].t;
    let last = traj.last().t;
    let cut = last - tail_fraction.clamp(0.0, 1.0) * (last - first);
    let tail: Vec<EfState> = traj
        .states
        .iter()
        .filter(|s| if last >= first { s.t >= cut } else { s.t <= cut })
        .copied()
        .collect();
    fit_rate(&tail)
}

/// Orbit vanishing as `t → −∞` at `p = p**`, sampled at the ascending `times`.
///
/// The orbit is seeded at `t_seed` on the centre manifold of the origin,
/// `x = K̄(−t)^{−τ⁻/2}`, `x′ = xᵖ/(Λ|λ₁|)`, and integrated forward, which is
/// the stable direction since `λ₁ < 0 = λ₂`.
pub fn log_critical_orbit(c: &ConstantSet, t_seed: f64, times: &[f64], opts: &IntegrateOptions) -> Result<Vec<EfState>> {
    let regime = classify_regime(c.params.p, c, DEFAULT_EQ_TOL)?;
    if regime.kind != RegimeKind::LogCritical {
        return Err(Error::RegimeMismatch {
            kind: "log-critical orbit".into(),
            required: RegimeKind::LogCritical.to_string(),
            actual: regime.kind.to_string(),
        });
    }
    if !(t_seed < 0.0) || times.first().map_or(true, |&t| t <= t_seed) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidProblem("need t_seed < 0 and ascending times after it".into()));
    }
    let sys = EfSystem::new(c);
    let kbar = log_critical_kbar(c)?;
    let x0 = kbar * (-t_seed).powf(-c.tau_minus / 2.0);
    let mut state = EfState {
        t: t_seed,
        x: x0,
        xp: x0.powf(sys.p) / (sys.big_lambda * sys.lambda1.abs()),
    };
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let traj = integrate_system(&sys, state, TimeDirection::Forward, t - state.t, opts)?;
        if traj.termination != Termination::SpanReached {
            return Err(Error::StepFailure { t: traj.last().t });
        }
        state = *traj.last();
        state.t = t;
        out.push(state);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{derive_constants, ProblemParams};

    fn consts(p: f64) -> ConstantSet {
        derive_constants(&ProblemParams::new(1.0, 2.0, 5, 0.25, p).unwrap()).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let c = consts(2.0);
        let k = c.k_opt.unwrap();
        let at_k = ef_rhs(&EfState { t: 0.0, x: k, xp: 0.0 }, &c).unwrap();
        assert!(at_k.abs() < 1e-13);
        assert_eq!(ef_rhs(&EfState { t: 0.0, x: 0.0, xp: 0.0 }, &c).unwrap(), 0.0);
        let l1 = 2.0 - c.tau_plus;
        let l2 = 2.0 - c.tau_minus;
        let v = ef_rhs(&EfState { t: 0.0, x: 1.0, xp: 0.0 }, &c).unwrap();
        assert!((v - (-l1 * l2 + 0.5)).abs() < 1e-14);
        assert!((v + 1.625).abs() < 1e-14);
        assert!(matches!(
            ef_rhs(&EfState { t: 0.0, x: -1.0, xp: 0.0 }, &c),
            Err(Error::NegativeX(_))
        ));
    }

    #[test]
    fn rhs_sign_matches_k() {
        for p in [2.0, 16.0] {
            let c = consts(p);
            let k = c.k_opt.unwrap();
            for i in 1..200 {
                let x = i as f64 * 0.01 * k;
                let v = ef_rhs(&EfState { t: 0.0, x, xp: 0.0 }, &c).unwrap();
                let expect = (x.powf(p - 1.0) - k.powf(p - 1.0)).signum();
                if (x - k).abs() > 1e-9 * k {
                    assert_eq!(v.signum(), expect, "p={p} x={x}");
                }
            }
        }
    }

    #[test]
    fn equilibria_eigenvalues() {
        let c = consts(2.0);
        let eq = equilibria(&c);
        assert_eq!(eq.len(), 2);
        let (a, b) = eq[0].eigenvalues;
        assert!((a - (2.0 - c.tau_plus)).abs() < 1e-15 && (b - (2.0 - c.tau_minus)).abs() < 1e-15);
        assert!((a - 1.146_446_609_4).abs() < 1e-9 && (b - 1.853_553_390_6).abs() < 1e-9);

        // Jacobian oracle by central differences at x = K.
        let sys = EfSystem::new(&c);
        let k = eq[1].x;
        let h = 1e-6;
        let dfdx = (sys.accel(k + h, 0.0) - sys.accel(k - h, 0.0)) / (2.0 * h);
        let dfdxp = (sys.accel(k, h) - sys.accel(k, -h)) / (2.0 * h);
        let (s1, s2) = eq[1].eigenvalues;
        assert!((s1 + s2 - dfdxp).abs() < 1e-7);
        assert!((s1 * s2 + dfdx).abs() < 1e-6);
        assert!(s1 * s2 < 0.0);

        let (a, b) = equilibria(&consts(16.0))[0].eigenvalues;
        assert!(a < 0.0 && b < 0.0);
        assert_eq!(equilibria(&consts(5.0)).len(), 1);
    }

    #[test]
    fn eigenvalue_signs_encode_regime() {
        let c = consts(2.0);
        let (ps, pss) = (c.p_star.unwrap(), c.p_star_star.unwrap());
        for p in [1.5, 2.0, 3.0, 4.0, 8.0, 14.0, 15.0, 20.0] {
            let (l1, l2) = equilibria(&consts(p))[0].eigenvalues;
            if p < ps {
                assert!(l1 > 0.0 && l2 > 0.0);
            } else if p <= pss {
                assert!(l1 <= 0.0 && l2 > 0.0);
            } else {
                assert!(l1 < 0.0 && l2 < 0.0);
            }
        }
        let (_, l2) = equilibria(&consts(pss))[0].eigenvalues;
        assert!(l2.abs() < 1e-14);
    }

    #[test]
    fn equilibrium_stays_constant() {
        let c = consts(2.0);
        let k = c.k_opt.unwrap();
        let opts = IntegrateOptions {
            rel_tol: 1e-10,
            ..Default::default()
        };
        let traj = integrate(EfState { t: 0.0, x: k, xp: 0.0 }, TimeDirection::Backward, 40.0, &c, &opts).unwrap();
        assert_eq!(traj.termination, Termination::SpanReached);
        assert!((traj.last().t + 40.0).abs() < 1e-12);
        for s in &traj.states {
            assert!((s.x - k).abs() <= 10.0 * opts.rel_tol * k);
        }
    }

    #[test]
    fn linear_growth_rate() {
        let c = consts(2.0);
        let l2 = 2.0 - c.tau_minus;
        let t0 = 0.0;
        let x0 = 1e-10;
        let opts = IntegrateOptions {
            x_max: 1e-2,
            ..Default::default()
        };
        let traj = integrate(EfState { t: t0, x: x0, xp: l2 * x0 }, TimeDirection::Forward, 100.0, &c, &opts).unwrap();
        assert_eq!(traj.termination, Termination::BlowUp);
        let fit = fit_rate(&traj.states).unwrap();
        assert!((fit.slope - l2).abs() < 1e-3, "{fit:?}");
    }

    #[test]
    fn supercritical_backward_leaves_band() {
        let c = consts(16.0);
        let k = c.k_opt.unwrap();
        let traj = integrate(
            EfState { t: 0.0, x: 0.5 * k, xp: 0.3 },
            TimeDirection::Backward,
            200.0,
            &c,
            &IntegrateOptions::default(),
        )
        .unwrap();
        assert!(traj.states.iter().any(|s| s.x < 0.0 || s.x > 2.0 * k));
    }

    #[test]
    fn transform_round_trip() {
        let c = consts(2.0);
        let k = c.k_opt.unwrap();
        let s = c.s();
        let grid = LogGrid::new(1e-6, 1.0, 200).unwrap();
        let u = RadialFunction::from_analytic(grid.clone(), |r| {
            (k * r.powf(-s), -s * k * r.powf(-s - 1.0), s * (s + 1.0) * k * r.powf(-s - 2.0))
        });
        let ef = to_ef(&u, 2.0);
        for e in &ef {
            assert!((e.x - k).abs() < 1e-13 * k && e.xp.abs() < 1e-12);
        }
        let back = from_ef(&ef, 2.0).unwrap();
        for (a, b) in back.u.iter().zip(&u.u) {
            assert!((a - b).abs() <= 8.0 * f64::EPSILON * b.abs());
        }

        let tp = c.tau_plus;
        let u = RadialFunction::from_analytic(grid, |r| {
            (r.powf(-tp), -tp * r.powf(-tp - 1.0), tp * (tp + 1.0) * r.powf(-tp - 2.0))
        });
        for e in to_ef(&u, 2.0) {
            assert!((e.x - ((s - tp) * e.t).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn rate_fits() {
        let c = consts(2.0);
        let (l1, l2) = (2.0 - c.tau_plus, 2.0 - c.tau_minus);
        let exact: Vec<EfState> = (0..100)
            .map(|i| {
                let t = -0.4 * i as f64;
                EfState { t, x: 3.0 * (l1 * t).exp(), xp: 0.0 }
            })
            .collect();
        assert!((fit_rate(&exact).unwrap().slope - l1).abs() < 1e-10);

        let mixed: Vec<EfState> = (0..50)
            .map(|i| {
                let t = -30.0 - 0.4 * i as f64;
                EfState { t, x: (l2 * t).exp() + 0.01 * (l1 * t).exp(), xp: 0.0 }
            })
            .collect();
        assert!((fit_rate(&mixed).unwrap().slope - l1).abs() < 1e-6);

        let flat: Vec<EfState> = (0..30).map(|i| EfState { t: -(i as f64) - 1.0, x: 2.0, xp: 0.0 }).collect();
        let fit = fit_rate(&flat).unwrap();
        assert!(fit.slope.abs() < 1e-14);

        let algebraic: Vec<EfState> = (0..60)
            .map(|i| {
                let t = -1e3 * (1.0 + i as f64);
                EfState { t, x: 0.8 * (-t).powf(-0.07), xp: 0.0 }
            })
            .collect();
        let fit = fit_rate(&algebraic).unwrap();
        assert_eq!(fit.kind, RateKind::Algebraic);
        assert!((fit.slope + 0.07).abs() < 1e-10);

        assert!(matches!(fit_rate(&flat[..5]), Err(Error::InsufficientTail { got: 5, .. })));
    }

    #[test]
    fn integrator_order() {
        let c = consts(2.0);
        let sys = EfSystem::new(&c);
        let k = c.k_opt.unwrap();
        let y0 = [k + 0.1, 0.05];
        let run = |n: usize| {
            let h = -1.0 / n as f64;
            let mut y = y0;
            for _ in 0..n {
                y = dopri_step(&sys, y, h).0;
            }
            y
        };
        let reference = run(4096);
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| {
                let y = run(n);
                (y[0] - reference[0]).abs().max((y[1] - reference[1]).abs())
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 4.5, "observed order {order}");
        }
    }

    #[test]
    fn log_critical_orbit_tracks_kbar() {
        let c = consts(consts(2.0).p_star_star.unwrap());
        let kbar = log_critical_kbar(&c).unwrap();
        let times: Vec<f64> = (0..=40).map(|i| -40.0 + i as f64).collect();
        let orbit = log_critical_orbit(&c, -1e3, &times, &IntegrateOptions::default()).unwrap();
        let q = orbit[0].x * 40f64.powf(c.tau_minus / 2.0) / kbar;
        assert!((q - 1.0).abs() < 0.02, "{q}");
        assert!(orbit.windows(2).all(|w| w[1].x > w[0].x));
        assert!(matches!(
            log_critical_orbit(&consts(2.0), -1e3, &times, &IntegrateOptions::default()),
            Err(Error::RegimeMismatch { .. })
        ));
    }
}
