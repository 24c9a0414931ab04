//! Catalogue of explicit sub- and super-solutions.
//!
//! Every barrier is a short sum of terms `a·r^{−α}·L^{−β}` with
//! `L = −log(r+ε) + c`, so values and both derivatives are available in
//! closed form. Construction checks the inequalities that make the sign of
//! the residual hold; [`certify_sign`] then checks that sign numerically.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constants::{classify_regime, log_critical_kbar, ConstantSet, RegimeKind, DEFAULT_EQ_TOL};
use crate::error::{Error, Result};
use crate::radial_pucci::{residual_main_nonnegative, residual_v_equation, LogGrid, RadialFunction};

/// Relative floor for residual signs.
pub const SIGN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BarrierKind {
    PowerSuper,
    PowerK,
    TauPlusSub,
    TauPlusSubGeneral,
    TauMinusSub,
    LogSub,
    LogSuper,
    KShiftSub,
    KShiftSuper,
    EpsSuper,
    LogHalfSuper,
    VLogSub,
    VLogSuper,
}

impl BarrierKind {
    pub const ALL: [BarrierKind; 13] = [
        BarrierKind::PowerSuper,
        BarrierKind::PowerK,
        BarrierKind::TauPlusSub,
        BarrierKind::TauPlusSubGeneral,
        BarrierKind::TauMinusSub,
        BarrierKind::LogSub,
        BarrierKind::LogSuper,
        BarrierKind::KShiftSub,
        BarrierKind::KShiftSuper,
        BarrierKind::EpsSuper,
        BarrierKind::LogHalfSuper,
        BarrierKind::VLogSub,
        BarrierKind::VLogSuper,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BarrierKind::PowerSuper => "power-super",
            BarrierKind::PowerK => "power-k",
            BarrierKind::TauPlusSub => "tau-plus-sub",
            BarrierKind::TauPlusSubGeneral => "tau-plus-sub-general",
            BarrierKind::TauMinusSub => "tau-minus-sub",
            BarrierKind::LogSub => "log-sub",
            BarrierKind::LogSuper => "log-super",
            BarrierKind::KShiftSub => "k-shift-sub",
            BarrierKind::KShiftSuper => "k-shift-super",
            BarrierKind::EpsSuper => "eps-super",
            BarrierKind::LogHalfSuper => "log-half-super",
            BarrierKind::VLogSub => "v-log-sub",
            BarrierKind::VLogSuper => "v-log-super",
        }
    }

    /// Regimes in which the kind exists.
    pub fn regimes(self) -> &'static [RegimeKind] {
        use RegimeKind::*;
        match self {
            BarrierKind::PowerSuper => &[Subcritical, Intermediate, LogCritical, Supercritical],
            BarrierKind::PowerK | BarrierKind::KShiftSub | BarrierKind::KShiftSuper => {
                &[Subcritical, Supercritical]
            }
            BarrierKind::TauPlusSub | BarrierKind::TauPlusSubGeneral => &[Subcritical],
            BarrierKind::TauMinusSub => &[Subcritical, Intermediate],
            BarrierKind::EpsSuper => &[Intermediate, LogCritical],
            BarrierKind::LogSub
            | BarrierKind::LogSuper
            | BarrierKind::LogHalfSuper
            | BarrierKind::VLogSub
            | BarrierKind::VLogSuper => &[LogCritical],
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            BarrierKind::TauPlusSub
            | BarrierKind::TauPlusSubGeneral
            | BarrierKind::TauMinusSub
            | BarrierKind::LogSub
            | BarrierKind::KShiftSub
            | BarrierKind::VLogSub => Direction::Sub,
            _ => Direction::Super,
        }
    }
}

impl fmt::Display for BarrierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BarrierKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        BarrierKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown barrier kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Sub,
    Super,
    /// Both at once (the explicit solution).
    Exact,
}

/// Equation whose residual sign the barrier controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Equation {
    /// `M⁺(D²u) + μu/r² = uᵖ`.
    Main,
    /// The equation for `v = r^{τ⁻}u`.
    VEquation,
}

/// Optional free parameters; `None` selects the default for the kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FreeParams {
    pub delta: Option<f64>,
    pub eps: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub gamma: Option<f64>,
    pub r0: Option<f64>,
    /// Value `u(r₀)` matched by [`BarrierKind::EpsSuper`].
    pub u_r0: Option<f64>,
    /// Declared direction, only meaningful for [`BarrierKind::PowerK`].
    pub direction: Option<Direction>,
}

/// `coef · r^{−alpha} · (−log(r+eps) + shift)^{−beta}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    pub alpha: f64,
    pub beta: f64,
    pub shift: f64,
    pub eps: f64,
}

impl Term {
    pub fn power(coef: f64, alpha: f64) -> Self {
        Self {
            coef,
            alpha,
            beta: 0.0,
            shift: 0.0,
            eps: 0.0,
        }
    }

    pub fn log(coef: f64, alpha: f64, beta: f64, shift: f64) -> Self {
        Self {
            coef,
            alpha,
            beta,
            shift,
            eps: 0.0,
        }
    }

    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let a = self.alpha;
        let (lfac, h, dh) = if self.beta == 0.0 {
            (1.0, -a / r, a / (r * r))
        } else {
            let re = r + self.eps;
            let l = -re.ln() + self.shift;
            let b = self.beta;
            (
                l.powf(-b),
                -a / r + b / (l * re),
                a / (r * r) + b * (1.0 - l) / (l * l * re * re),
            )
        };
        let f = self.coef * r.powf(-a) * lfac;
        (f, f * h, f * (h * h + dh))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub margin: f64,
}

/// A certified member of the catalogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    pub kind: BarrierKind,
    pub direction: Direction,
    pub equation: Equation,
    pub terms: Vec<Term>,
    pub validity_radius: f64,
    pub constraints: Vec<Constraint>,
    /// Resolved free parameters.
    pub params: FreeParams,
}

impl Barrier {
    /// Builds a barrier without checking any constraint. Certification may fail.
    pub fn unchecked(
        kind: BarrierKind,
        direction: Direction,
        equation: Equation,
        terms: Vec<Term>,
        validity_radius: f64,
    ) -> Self {
        Self {
            kind,
            direction,
            equation,
            terms,
            validity_radius,
            constraints: Vec::new(),
            params: FreeParams::default(),
        }
    }

    /// `(value, d/dr, d²/dr²)`.
    pub fn eval(&self, r: f64) -> Result<(f64, f64, f64)> {
        if !(r > 0.0 && r <= self.validity_radius * (1.0 + 1e-12)) {
            return Err(Error::OutOfValidity {
                r,
                validity_radius: self.validity_radius,
            });
        }
        Ok(self.eval_unchecked(r))
    }

    pub(crate) fn eval_unchecked(&self, r: f64) -> (f64, f64, f64) {
        self.terms.iter().fold((0.0, 0.0, 0.0), |acc, t| {
            let (a, b, c) = t.eval(r);
            (acc.0 + a, acc.1 + b, acc.2 + c)
        })
    }

    /// Samples on `grid`; every node must lie in the validity range.
    pub fn sample(&self, grid: &LogGrid) -> Result<RadialFunction> {
        if grid.r_max() > self.validity_radius * (1.0 + 1e-12) {
            return Err(Error::OutOfValidity {
                r: grid.r_max(),
                validity_radius: self.validity_radius,
            });
        }
        Ok(RadialFunction::from_analytic(grid.clone(), |r| self.eval_unchecked(r)))
    }

    pub fn is_sub(&self) -> bool {
        matches!(self.direction, Direction::Sub | Direction::Exact)
    }

    pub fn is_super(&self) -> bool {
        matches!(self.direction, Direction::Super | Direction::Exact)
    }
}

struct Builder {
    constraints: Vec<Constraint>,
}

impl Builder {
    fn new() -> Self {
        Self {
            constraints: Vec::new(),
        }
    }

    /// Records `lhs ≤ rhs` (margin `rhs − lhs`) and fails when violated.
    fn le(&mut self, name: &str, lhs: f64, rhs: f64) -> Result<()> {
        let margin = rhs - lhs;
        if !(margin >= -1e-12 * lhs.abs().max(rhs.abs())) {
            return Err(Error::ConstraintViolation {
                name: name.to_string(),
                margin,
            });
        }
        self.constraints.push(Constraint {
            name: name.to_string(),
            margin: margin.max(0.0),
        });
        Ok(())
    }

    /// Records `lhs < rhs`.
    fn lt(&mut self, name: &str, lhs: f64, rhs: f64) -> Result<()> {
        let margin = rhs - lhs;
        if !(margin > 0.0) {
            return Err(Error::ConstraintViolation {
                name: name.to_string(),
                margin,
            });
        }
        self.constraints.push(Constraint {
            name: name.to_string(),
            margin,
        });
        Ok(())
    }
}

fn require_regime(kind: BarrierKind, c: &ConstantSet) -> Result<RegimeKind> {
    let regime = classify_regime(c.params.p, c, DEFAULT_EQ_TOL)?.kind;
    if !kind.regimes().contains(&regime) {
        let required = kind
            .regimes()
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join("|");
        return Err(Error::RegimeMismatch {
            kind: kind.to_string(),
            required,
            actual: regime.to_string(),
        });
    }
    Ok(regime)
}

/// Default exponent `γ` for the `K`-shifted barriers: between `2/(p−1)` and
/// the nearer of `τ⁺` (below `p*`) or `0` (above `p**`).
fn default_shift_gamma(c: &ConstantSet, regime: RegimeKind) -> f64 {
    let s = c.s();
    match regime {
        RegimeKind::Subcritical => 0.5 * (s + c.tau_plus),
        _ => 0.9 * s,
    }
}

/// Builds and validates a barrier of the given kind.
pub fn make_barrier(kind: BarrierKind, c: &ConstantSet, free: &FreeParams) -> Result<Barrier> {
    let regime = require_regime(kind, c)?;
    let big_lambda = c.params.big_lambda;
    let p = c.params.p;
    let s = c.s();
    let (tp, tm, tau) = (c.tau_plus, c.tau_minus, c.tau);
    let mut b = Builder::new();
    let mut resolved = *free;
    let mut direction = kind.direction();
    let mut equation = Equation::Main;

    let (terms, validity_radius) = match kind {
        BarrierKind::PowerSuper => {
            let amp = free.c.unwrap_or(1.0);
            let gamma = free.gamma.unwrap_or(tau);
            b.lt("c > 0", 0.0, amp)?;
            b.le("tau- <= gamma", tm, gamma)?;
            b.le("gamma <= tau+", gamma, tp)?;
            resolved.c = Some(amp);
            resolved.gamma = Some(gamma);
            (vec![Term::power(amp, gamma)], free.r0.unwrap_or(1.0))
        }
        BarrierKind::PowerK => {
            let k = c.k_opt.ok_or(Error::KUndefined {
                p,
                p_star: c.p_star.unwrap_or(f64::NAN),
                p_star_star: c.p_star_star.unwrap_or(f64::NAN),
            })?;
            let amp = free.c.unwrap_or(k);
            b.lt("c > 0", 0.0, amp)?;
            direction = match free.direction {
                Some(Direction::Sub) => {
                    b.le("c <= K", amp, k)?;
                    Direction::Sub
                }
                Some(Direction::Super) => {
                    b.le("c >= K", k, amp)?;
                    Direction::Super
                }
                _ if amp == k => Direction::Exact,
                _ if amp < k => Direction::Sub,
                _ => Direction::Super,
            };
            resolved.c = Some(amp);
            (vec![Term::power(amp, s)], free.r0.unwrap_or(1.0))
        }
        BarrierKind::TauPlusSub | BarrierKind::TauPlusSubGeneral => {
            let upper = tp.min(2.0 - (p - 1.0) * tp).min(2.0 * (tp - tau));
            let delta = free.delta.unwrap_or(0.5 * upper);
            b.lt("delta > 0", 0.0, delta)?;
            b.lt("delta < min{tau+, 2-(p-1)tau+, 2(tau+-tau)}", delta, upper)?;
            let gain = big_lambda * delta * (2.0 * (tp - tau) - delta);
            resolved.delta = Some(delta);
            if kind == BarrierKind::TauPlusSub {
                let eps = free.eps.unwrap_or(gain.powf(1.0 / (p - 1.0)));
                b.lt("eps > 0", 0.0, eps)?;
                b.le("eps^{p-1} <= Lambda delta (2(tau+-tau)-delta)", eps.powf(p - 1.0), gain)?;
                resolved.eps = Some(eps);
                (vec![Term::power(eps, tp), Term::power(-eps, tp - delta)], 1.0)
            } else {
                let a = free.a.unwrap_or(1.0);
                b.lt("a > 0", 0.0, a)?;
                let r0_max = (gain / a.powf(p - 1.0)).powf(1.0 / delta).min(1.0);
                let r0 = free.r0.unwrap_or(r0_max);
                b.lt("r0 > 0", 0.0, r0)?;
                b.le("r0 <= 1", r0, 1.0)?;
                b.le(
                    "r0^delta <= Lambda delta (2(tau+-tau)-delta) / a^{p-1}",
                    r0.powf(delta),
                    gain / a.powf(p - 1.0),
                )?;
                resolved.a = Some(a);
                resolved.r0 = Some(r0);
                (
                    vec![Term::power(a, tp), Term::power(-a.powf(p) / gain, tp - delta)],
                    r0,
                )
            }
        }
        BarrierKind::TauMinusSub => {
            let upper = tm.min(2.0 - (p - 1.0) * tm);
            let delta = free.delta.unwrap_or(0.5 * upper);
            b.lt("delta > 0", 0.0, delta)?;
            b.lt("delta < min{tau-, 2-(p-1)tau-}", delta, upper)?;
            let gain = big_lambda * delta * (2.0 * (tau - tm) + delta) / 2f64.powf(p);
            let eps = free.eps.unwrap_or(gain.powf(1.0 / (p - 1.0)));
            b.lt("eps > 0", 0.0, eps)?;
            let expo = 2.0 - (p - 1.0) * tm - delta;
            let r0_max = (gain / eps.powf(p - 1.0)).powf(1.0 / expo).min(1.0);
            let r0 = free.r0.unwrap_or(r0_max);
            b.lt("r0 > 0", 0.0, r0)?;
            b.le("r0 <= 1", r0, 1.0)?;
            b.le(
                "r0^{2-(p-1)tau- - delta} <= Lambda delta (2(tau-tau-)+delta) / (2^p eps^{p-1})",
                r0.powf(expo),
                gain / eps.powf(p - 1.0),
            )?;
            resolved.delta = Some(delta);
            resolved.eps = Some(eps);
            resolved.r0 = Some(r0);
            (vec![Term::power(eps, tm), Term::power(eps, tm - delta)], r0)
        }
        BarrierKind::LogSub => {
            let kbar = log_critical_kbar(c)?;
            let a = free.a.unwrap_or(kbar);
            let shift = free.c.unwrap_or(2.0);
            b.lt("a > 0", 0.0, a)?;
            b.lt("c > 1", 1.0, shift)?;
            b.le("a^{p-1} <= Kbar^{p-1}", a.powf(p - 1.0), kbar.powf(p - 1.0))?;
            resolved.a = Some(a);
            resolved.c = Some(shift);
            (vec![Term::log(a, tm, tm / 2.0, shift)], free.r0.unwrap_or(1.0).min(1.0))
        }
        BarrierKind::LogSuper => {
            let kbar = log_critical_kbar(c)?;
            let amp = free.b.unwrap_or(2.0 * kbar);
            let delta = free.delta.unwrap_or(1.0);
            let shift = free.c.unwrap_or(2.0);
            b.lt("b > Kbar", kbar, amp)?;
            b.lt("delta > 0", 0.0, delta)?;
            b.lt("c > 1", 1.0, shift)?;
            b.le("c^delta >= b/(b-Kbar)", amp / (amp - kbar), shift.powf(delta))?;
            resolved.b = Some(amp);
            resolved.delta = Some(delta);
            resolved.c = Some(shift);
            (
                vec![
                    Term::log(amp, tm, tm / 2.0, shift),
                    Term::log(-amp, tm, tm / 2.0 + delta, shift),
                ],
                free.r0.unwrap_or(1.0).min(1.0),
            )
        }
        BarrierKind::KShiftSub => {
            let k = c.k_opt.expect("K defined outside [p*, p**]");
            let k1 = free.b.unwrap_or(0.9 * k);
            let gamma = free.gamma.unwrap_or_else(|| default_shift_gamma(c, regime));
            b.lt("0 < K1", 0.0, k1)?;
            b.lt("K1 < K", k1, k)?;
            b.lt("0 < gamma", 0.0, gamma)?;
            b.lt("gamma < 2/(p-1)", gamma, s)?;
            let prod = big_lambda * c.tau_product(gamma);
            let bound = if prod > 0.0 {
                (k1 * (k.powf(p - 1.0) - k1.powf(p - 1.0)) / prod).min(k1)
            } else {
                k1
            };
            let r0 = free.r0.unwrap_or(1.0);
            let a = free.a.unwrap_or(bound / r0.powf(s - gamma));
            b.lt("a > 0", 0.0, a)?;
            b.lt("r0 > 0", 0.0, r0)?;
            b.le("r0 <= 1", r0, 1.0)?;
            b.le(
                "a r0^{2/(p-1)-gamma} <= min{K1, K1(K^{p-1}-K1^{p-1})/(Lambda(gamma-tau-)(gamma-tau+))}",
                a * r0.powf(s - gamma),
                bound,
            )?;
            resolved.b = Some(k1);
            resolved.gamma = Some(gamma);
            resolved.a = Some(a);
            resolved.r0 = Some(r0);
            (vec![Term::power(k1, s), Term::power(-a, gamma)], r0)
        }
        BarrierKind::KShiftSuper => {
            let k = c.k_opt.expect("K defined outside [p*, p**]");
            let k2 = free.b.unwrap_or(1.1 * k);
            let gamma = free.gamma.unwrap_or_else(|| default_shift_gamma(c, regime));
            let a = free.a.unwrap_or(1.0);
            b.lt("K < K2", k, k2)?;
            b.lt("0 < gamma", 0.0, gamma)?;
            b.lt("gamma < 2/(p-1)", gamma, s)?;
            b.lt("a > 0", 0.0, a)?;
            b.le(
                "Lambda(gamma-tau+)(gamma-tau-) <= p K2^{p-1}",
                big_lambda * c.tau_product(gamma),
                p * k2.powf(p - 1.0),
            )?;
            resolved.b = Some(k2);
            resolved.gamma = Some(gamma);
            resolved.a = Some(a);
            (
                vec![Term::power(k2, s), Term::power(a, gamma)],
                free.r0.unwrap_or(1.0).min(1.0),
            )
        }
        BarrierKind::EpsSuper => {
            let r0 = free.r0.unwrap_or(0.5);
            let u_r0 = free.u_r0.unwrap_or(1.0);
            let level = u_r0 * r0.powf(s);
            let eps = free.eps.unwrap_or(0.5 * level);
            b.lt("r0 > 0", 0.0, r0)?;
            b.le("r0 <= 1", r0, 1.0)?;
            b.lt("eps > 0", 0.0, eps)?;
            b.lt("eps < u(r0) r0^{2/(p-1)}", eps, level)?;
            let c_eps = (level - eps) / r0.powf(s - tm);
            resolved.r0 = Some(r0);
            resolved.u_r0 = Some(u_r0);
            resolved.eps = Some(eps);
            resolved.c = Some(c_eps);
            (vec![Term::power(eps, s), Term::power(c_eps, tm)], r0)
        }
        BarrierKind::LogHalfSuper => {
            let eps = free.eps.unwrap_or(1e-3);
            let threshold = 0.5 * big_lambda * tm * (tm + c.n_tilde_plus + 1.0);
            let amp = free.a.unwrap_or((2.0 * threshold).powf(1.0 / (p - 1.0)));
            let r0 = free.r0.unwrap_or((-0.5f64).exp() - eps);
            b.le("eps >= 0", 0.0, eps)?;
            b.lt("C^{p-1} > (Lambda/2) tau- (tau- + N+ + 1)", threshold, amp.powf(p - 1.0))?;
            b.lt("r0 > 0", 0.0, r0)?;
            b.le("-log(r0 + eps) >= 1/2", 0.5, -(r0 + eps).ln())?;
            resolved.eps = Some(eps);
            resolved.a = Some(amp);
            resolved.r0 = Some(r0);
            (
                vec![Term {
                    coef: amp,
                    alpha: tm,
                    beta: tm / 2.0,
                    shift: 0.0,
                    eps,
                }],
                r0,
            )
        }
        BarrierKind::VLogSub => {
            equation = Equation::VEquation;
            let kbar = log_critical_kbar(c)?;
            let shift = free.c.unwrap_or(1.0);
            let r0 = free.r0.unwrap_or(1.0);
            b.lt("r0 > 0", 0.0, r0)?;
            b.le("r0 <= 1", r0, 1.0)?;
            b.lt("-log r0 + c1 > 0", 0.0, -r0.ln() + shift)?;
            resolved.c = Some(shift);
            resolved.r0 = Some(r0);
            (vec![Term::log(kbar, 0.0, tm / 2.0, shift)], r0)
        }
        BarrierKind::VLogSuper => {
            equation = Equation::VEquation;
            let kbar = log_critical_kbar(c)?;
            let amp = free.b.unwrap_or(2.0 * kbar);
            let c2 = free.c.unwrap_or(0.0);
            b.lt("b > Kbar", kbar, amp)?;
            let need = big_lambda * tm * (tm + 2.0) / (4.0 * (amp.powf(p - 1.0) - kbar.powf(p - 1.0)));
            let r0 = free.r0.unwrap_or((-c2 - need).exp().min(1.0));
            b.lt("r0 > 0", 0.0, r0)?;
            b.le("r0 <= 1", r0, 1.0)?;
            b.lt("c2 < -log r0", c2, -r0.ln())?;
            b.le(
                "b^{p-1} - Kbar^{p-1} >= Lambda tau-(tau-+2) / (4(-log r0 - c2))",
                big_lambda * tm * (tm + 2.0) / (4.0 * (-r0.ln() - c2)),
                amp.powf(p - 1.0) - kbar.powf(p - 1.0),
            )?;
            resolved.b = Some(amp);
            resolved.c = Some(c2);
            resolved.r0 = Some(r0);
            (vec![Term::log(amp, 0.0, tm / 2.0, -c2)], r0)
        }
    };

    Ok(Barrier {
        kind,
        direction,
        equation,
        terms,
        validity_radius,
        constraints: b.constraints,
        params: resolved,
    })
}

/// Outcome of a successful sign certification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignCertificate {
    pub nodes: usize,
    pub violations: usize,
    /// Node with the smallest signed relative margin.
    pub worst_node: usize,
    pub worst_r: f64,
    pub worst_margin: f64,
}

/// Checks the residual sign at every node of `grid` with analytic derivatives.
///
/// The margin at a node is the residual divided by its local scale, with the
/// sign flipped for super-solutions, so a certificate holds iff every margin
/// is at least `−SIGN_FLOOR`.
pub fn certify_sign(barrier: &Barrier, grid: &LogGrid, c: &ConstantSet) -> Result<SignCertificate> {
    let mut f = barrier.sample(grid)?;
    // Kinds that vanish at r₀ can round to a tiny negative there.
    for (i, &r) in grid.nodes().iter().enumerate() {
        let mag: f64 = barrier.terms.iter().map(|t| t.eval(r).0.abs()).sum();
        if f.u[i] < 0.0 && f.u[i] > -1e-12 * mag {
            f.u[i] = 0.0;
        }
    }
    let res = match barrier.equation {
        Equation::Main => residual_main_nonnegative(&f, &c.params)?,
        Equation::VEquation => residual_v_equation(&f, c)?,
    };
    let rel = res.relative();
    let margins: Vec<f64> = rel
        .iter()
        .map(|&x| match barrier.direction {
            Direction::Sub => x,
            Direction::Super => -x,
            Direction::Exact => -x.abs(),
        })
        .collect();
    let mut worst_node = 0;
    let mut violations = 0;
    for (i, &m) in margins.iter().enumerate() {
        if m.is_nan() || m < -SIGN_FLOOR {
            violations += 1;
        }
        if m.is_nan() || m < margins[worst_node] {
            worst_node = i;
        }
    }
    let cert = SignCertificate {
        nodes: margins.len(),
        violations,
        worst_node,
        worst_r: grid.nodes()[worst_node],
        worst_margin: margins[worst_node],
    };
    if violations > 0 {
        return Err(Error::CertificationFailure {
            node: cert.worst_node,
            r: cert.worst_r,
            margin: cert.worst_margin,
        });
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{derive_constants, ProblemParams};

    fn consts(p: f64) -> ConstantSet {
        derive_constants(&ProblemParams::new(1.0, 2.0, 5, 0.25, p).unwrap()).unwrap()
    }

    fn log_critical() -> ConstantSet {
        let c = consts(2.0);
        consts(c.p_star_star.unwrap())
    }

    fn exemplar(kind: BarrierKind) -> ConstantSet {
        use RegimeKind::*;
        match kind.regimes()[0] {
            Subcritical => consts(2.0),
            Intermediate => consts(5.0),
            LogCritical => log_critical(),
            Supercritical => consts(16.0),
        }
    }

    #[test]
    fn every_kind_certifies_with_defaults() {
        for kind in BarrierKind::ALL {
            for &regime in kind.regimes() {
                let c = match regime {
                    RegimeKind::Subcritical => consts(2.0),
                    RegimeKind::Intermediate => consts(5.0),
                    RegimeKind::LogCritical => log_critical(),
                    RegimeKind::Supercritical => consts(16.0),
                };
                let bar = make_barrier(kind, &c, &FreeParams::default())
                    .unwrap_or_else(|e| panic!("{kind} in {regime}: {e}"));
                assert!(bar.constraints.iter().all(|x| x.margin >= 0.0));
                let grid = LogGrid::new(1e-8, bar.validity_radius, 2048).unwrap();
                let cert = certify_sign(&bar, &grid, &c)
                    .unwrap_or_else(|e| panic!("{kind} in {regime}: {e}"));
                assert_eq!(cert.violations, 0);
            }
        }
    }

    #[test]
    fn regime_mismatch() {
        let err = make_barrier(BarrierKind::LogSub, &consts(2.0), &FreeParams::default()).unwrap_err();
        assert!(matches!(err, Error::RegimeMismatch { .. }));
        let err = make_barrier(BarrierKind::PowerK, &consts(5.0), &FreeParams::default()).unwrap_err();
        assert!(matches!(err, Error::RegimeMismatch { .. }));
    }

    #[test]
    fn power_k_at_k_is_exact() {
        let c = consts(2.0);
        let bar = make_barrier(BarrierKind::PowerK, &c, &FreeParams::default()).unwrap();
        assert_eq!(bar.direction, Direction::Exact);
        assert!(bar.is_sub() && bar.is_super());
    }

    #[test]
    fn power_k_wrong_direction_fails_certification() {
        let c = consts(2.0);
        let k = c.k_opt.unwrap();
        let free = FreeParams {
            c: Some(1.01 * k),
            direction: Some(Direction::Sub),
            ..Default::default()
        };
        assert!(matches!(
            make_barrier(BarrierKind::PowerK, &c, &free),
            Err(Error::ConstraintViolation { .. })
        ));
        let bar = Barrier::unchecked(
            BarrierKind::PowerK,
            Direction::Sub,
            Equation::Main,
            vec![Term::power(1.01 * k, c.s())],
            1.0,
        );
        let grid = LogGrid::new(1e-8, 1.0, 2048).unwrap();
        assert!(matches!(
            certify_sign(&bar, &grid, &c),
            Err(Error::CertificationFailure { .. })
        ));
    }

    #[test]
    fn log_sub_amplitude_violation() {
        let c = log_critical();
        let base = c.params.big_lambda * c.tau_minus * (c.tau - c.tau_minus);
        let a = (2.0 * base).powf(1.0 / (c.params.p - 1.0));
        let free = FreeParams {
            a: Some(a),
            ..Default::default()
        };
        match make_barrier(BarrierKind::LogSub, &c, &free) {
            Err(Error::ConstraintViolation { name, margin }) => {
                assert_eq!(name, "a^{p-1} <= Kbar^{p-1}");
                assert!(margin < 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn log_super_needs_pairing() {
        let c = log_critical();
        let kbar = c.k_bar.unwrap();
        let (amp, shift, delta) = (1.02 * kbar, 1.5, 1.3);
        let free = FreeParams {
            b: Some(amp),
            c: Some(shift),
            delta: Some(delta),
            ..Default::default()
        };
        assert!(matches!(
            make_barrier(BarrierKind::LogSuper, &c, &free),
            Err(Error::ConstraintViolation { .. })
        ));
        let tm = c.tau_minus;
        let amp = 0.8 * kbar;
        let bar = Barrier::unchecked(
            BarrierKind::LogSuper,
            Direction::Super,
            Equation::Main,
            vec![
                Term::log(amp, tm, tm / 2.0, shift),
                Term::log(-amp, tm, tm / 2.0 + delta, shift),
            ],
            1.0,
        );
        let grid = LogGrid::new(1e-8, 1.0, 2048).unwrap();
        assert!(matches!(
            certify_sign(&bar, &grid, &c),
            Err(Error::CertificationFailure { .. })
        ));
    }

    #[test]
    fn eval_examples() {
        let c = consts(2.0);
        let bar = make_barrier(BarrierKind::PowerSuper, &c, &FreeParams::default()).unwrap();
        let t = c.tau;
        let (v, d1, d2) = bar.eval(0.5).unwrap();
        assert!((v - 0.5f64.powf(-t)).abs() < 1e-15);
        assert!((d1 + t * 0.5f64.powf(-t - 1.0)).abs() < 1e-14);
        assert!((d2 - t * (t + 1.0) * 0.5f64.powf(-t - 2.0)).abs() < 1e-13);

        let sub = make_barrier(BarrierKind::TauPlusSub, &c, &FreeParams::default()).unwrap();
        assert_eq!(sub.eval(1.0).unwrap().0, 0.0);
        assert!(matches!(sub.eval(1.5), Err(Error::OutOfValidity { .. })));

        let lc = log_critical();
        let kbar = lc.k_bar.unwrap();
        let log_sub = make_barrier(BarrierKind::LogSub, &lc, &FreeParams::default()).unwrap();
        let r = (-1.0f64).exp();
        let tm = lc.tau_minus;
        let expect = kbar * tm.exp() * 3f64.powf(-tm / 2.0);
        assert!((log_sub.eval(r).unwrap().0 - expect).abs() < 1e-14);
    }

    #[test]
    fn term_derivatives_match_finite_differences() {
        let terms = [
            Term::power(1.3, 0.7),
            Term::log(0.8, 0.4, 0.3, 2.0),
            Term {
                coef: 2.0,
                alpha: 0.2,
                beta: 0.1,
                shift: 0.0,
                eps: 1e-3,
            },
        ];
        for t in terms {
            for &r in &[0.01, 0.1, 0.4] {
                let h = 1e-5 * r;
                let (f, d1, d2) = t.eval(r);
                let (fp, d1p, _) = t.eval(r + h);
                let (fm, d1m, _) = t.eval(r - h);
                assert!(((fp - fm) / (2.0 * h) - d1).abs() <= 1e-7 * d1.abs().max(f.abs() / r));
                assert!(((d1p - d1m) / (2.0 * h) - d2).abs() <= 1e-6 * d2.abs().max(d1.abs() / r));
            }
        }
    }

    #[test]
    fn barriers_decrease() {
        for kind in BarrierKind::ALL {
            if matches!(kind, BarrierKind::VLogSub | BarrierKind::VLogSuper) {
                continue;
            }
            let c = exemplar(kind);
            let bar = make_barrier(kind, &c, &FreeParams::default()).unwrap();
            let grid = LogGrid::new(1e-8, bar.validity_radius, 400).unwrap();
            for &r in grid.nodes() {
                assert!(bar.eval(r).unwrap().1 <= 0.0, "{kind} at {r}");
            }
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in BarrierKind::ALL {
            assert_eq!(kind.name().parse::<BarrierKind>().unwrap(), kind);
        }
        assert!("nope".parse::<BarrierKind>().is_err());
    }
}
