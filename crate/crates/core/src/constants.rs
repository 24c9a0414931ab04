//! Closed-form scalars attached to `M⁺(D²u) + μu/r² = uᵖ`.
//!
//! Everything here is a pure function of the ellipticity pair `(λ, Λ)`, the
//! dimension `N`, the potential strength `μ` and the exponent `p`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for the `p = p**` equality test.
pub const DEFAULT_EQ_TOL: f64 = 1e-12;

/// Input parameters of the equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    /// Lower ellipticity constant `λ`.
    pub lambda: f64,
    /// Upper ellipticity constant `Λ`.
    pub big_lambda: f64,
    /// Spatial dimension `N`.
    pub dim: u32,
    /// Strength of the inverse-square potential.
    pub mu: f64,
    /// Absorption exponent. May be NaN when only the `p`-free constants are wanted.
    pub p: f64,
}

impl ProblemParams {
    /// Validates the ellipticity triple. `μ` and `p` are checked later by the
    /// operations that need them.
    pub fn new(lambda: f64, big_lambda: f64, dim: u32, mu: f64, p: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite() && big_lambda.is_finite() && lambda <= big_lambda)
        {
            return Err(Error::InvalidEllipticity { lambda, big_lambda });
        }
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Self {
            lambda,
            big_lambda,
            dim,
            mu,
            p,
        })
    }

    pub fn with_p(self, p: f64) -> Self {
        Self { p, ..self }
    }

    pub fn with_mu(self, mu: f64) -> Self {
        Self { mu, ..self }
    }

    /// `2/(p−1)`, the exponent of the scaling-invariant profile.
    pub fn scaling_exponent(&self) -> f64 {
        2.0 / (self.p - 1.0)
    }

    /// `Ñ⁺ = (λ/Λ)(N−1) + 1`.
    pub fn n_tilde_plus(&self) -> f64 {
        self.lambda / self.big_lambda * f64::from(self.dim - 1) + 1.0
    }

    /// `Ñ⁻ = (Λ/λ)(N−1) + 1`.
    pub fn n_tilde_minus(&self) -> f64 {
        self.big_lambda / self.lambda * f64::from(self.dim - 1) + 1.0
    }

    fn check(&self) -> Result<()> {
        Self::new(self.lambda, self.big_lambda, self.dim, self.mu, self.p).map(|_| ())
    }
}

/// All derived scalars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantSet {
    pub params: ProblemParams,
    pub n_tilde_plus: f64,
    pub n_tilde_minus: f64,
    /// `(Ñ⁺−2)/2`.
    pub tau: f64,
    /// Principal eigenvalue `Λτ²` of `M⁺` with the inverse-square potential.
    pub lambda_bar: f64,
    /// Principal eigenvalue `λ((Ñ⁻−2)/2)²` of the `M⁻` counterpart.
    pub lambda_bar_minus: f64,
    pub tau_plus: f64,
    pub tau_minus: f64,
    pub p_star: Option<f64>,
    pub p_star_star: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub k_opt: Option<f64>,
    pub k_bar: Option<f64>,
    /// `μ = λ̄`: the exponent pair collapses to `τ⁺ = τ⁻ = τ`.
    pub degenerate: bool,
    /// Outside `0 < μ < λ̄`, `τ > 0`, `p > 1`.
    pub out_of_regime: bool,
}

/// Computes every closed-form constant.
///
/// Fails only when the ellipticity triple is invalid or `μ > λ̄`; the
/// exponent-dependent fields are left empty when they are undefined.
pub fn derive_constants(params: &ProblemParams) -> Result<ConstantSet> {
    params.check()?;
    let big_lambda = params.big_lambda;
    let n_tilde_plus = params.n_tilde_plus();
    let n_tilde_minus = params.n_tilde_minus();
    let tau = (n_tilde_plus - 2.0) / 2.0;
    let lambda_bar = big_lambda * tau * tau;
    let tau_m_op = (n_tilde_minus - 2.0) / 2.0;
    let lambda_bar_minus = params.lambda * tau_m_op * tau_m_op;

    let mu = params.mu;
    if !(mu <= lambda_bar) {
        return Err(Error::MuAboveEigenvalue { mu, lambda_bar });
    }
    let product = mu / big_lambda;
    let degenerate = mu == lambda_bar;
    // Roots of γ² − (Ñ⁺−2)γ + μ/Λ. The discriminant is factored to avoid
    // cancellation near μ = λ̄, and τ⁻ comes from Vieta to avoid it near μ = 0.
    let (tau_plus, tau_minus) = if degenerate {
        (tau, tau)
    } else if product >= 0.0 {
        let s = product.sqrt();
        let disc = ((tau.abs() - s) * (tau.abs() + s)).max(0.0);
        let root = disc.sqrt();
        if tau >= 0.0 {
            let tp = tau + root;
            (tp, if tp != 0.0 { product / tp } else { 0.0 })
        } else {
            let tm = tau - root;
            (if tm != 0.0 { product / tm } else { 0.0 }, tm)
        }
    } else {
        // μ < 0: real roots of opposite sign.
        let root = (tau * tau - product).sqrt();
        let tp = tau + root;
        (tp, product / tp)
    };

    let p = params.p;
    let p_valid = p.is_finite() && p > 1.0;
    let p_star = (tau_plus > 0.0).then(|| 1.0 + 2.0 / tau_plus);
    let p_star_star = (tau_minus > 0.0).then(|| 1.0 + 2.0 / tau_minus);
    let (lambda1, lambda2) = if p_valid {
        let s = 2.0 / (p - 1.0);
        (Some(s - tau_plus), Some(s - tau_minus))
    } else {
        (None, None)
    };
    let k_opt = match (lambda1, lambda2) {
        (Some(l1), Some(l2)) if l1 * l2 > 0.0 => {
            Some((big_lambda * l1 * l2).powf(1.0 / (p - 1.0)))
        }
        _ => None,
    };
    let k_bar_base = big_lambda * tau_minus * (tau - tau_minus);
    let k_bar = (tau_minus > 0.0 && !degenerate && k_bar_base > 0.0)
        .then(|| k_bar_base.powf(tau_minus / 2.0));

    let out_of_regime = !(mu > 0.0 && mu < lambda_bar && tau > 0.0 && p_valid);
    Ok(ConstantSet {
        params: *params,
        n_tilde_plus,
        n_tilde_minus,
        tau,
        lambda_bar,
        lambda_bar_minus,
        tau_plus,
        tau_minus,
        p_star,
        p_star_star,
        lambda1,
        lambda2,
        k_opt,
        k_bar,
        degenerate,
        out_of_regime,
    })
}

impl ConstantSet {
    /// `(p*, p**)`; requires `0 < τ⁻ < τ⁺`.
    pub fn critical_exponents(&self) -> Result<(f64, f64)> {
        critical_exponents(self)
    }

    /// `2/(p−1)` for the exponent stored in the parameters.
    pub fn s(&self) -> f64 {
        self.params.scaling_exponent()
    }

    /// `(γ−τ⁺)(γ−τ⁻)`, the factor of the power-law residual.
    pub fn tau_product(&self, gamma: f64) -> f64 {
        (gamma - self.tau_plus) * (gamma - self.tau_minus)
    }
}

pub fn critical_exponents(c: &ConstantSet) -> Result<(f64, f64)> {
    if !(c.tau_minus > 0.0) || c.tau_plus <= c.tau_minus {
        return Err(Error::DegenerateTau {
            tau_minus: c.tau_minus,
            tau_plus: c.tau_plus,
        });
    }
    Ok((1.0 + 2.0 / c.tau_plus, 1.0 + 2.0 / c.tau_minus))
}

/// The four regimes of the asymptotic classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RegimeKind {
    Subcritical,
    Intermediate,
    LogCritical,
    Supercritical,
}

impl std::fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RegimeKind::Subcritical => "Subcritical",
            RegimeKind::Intermediate => "Intermediate",
            RegimeKind::LogCritical => "LogCritical",
            RegimeKind::Supercritical => "Supercritical",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub kind: RegimeKind,
    /// Relative tolerance used for `p = p**`.
    pub eq_tol: f64,
}

/// Places `p` relative to `p*` and `p**`.
pub fn classify_regime(p: f64, c: &ConstantSet, eq_tol: f64) -> Result<Regime> {
    if !(p > 1.0) {
        return Err(Error::SublinearExponent(p));
    }
    let (p_star, p_star_star) = critical_exponents(c)?;
    let kind = if (p - p_star_star).abs() <= eq_tol * p_star_star {
        RegimeKind::LogCritical
    } else if p < p_star {
        RegimeKind::Subcritical
    } else if p < p_star_star {
        RegimeKind::Intermediate
    } else {
        RegimeKind::Supercritical
    };
    Ok(Regime { kind, eq_tol })
}

/// `K = [Λ(2/(p−1)−τ⁺)(2/(p−1)−τ⁻)]^{1/(p−1)}`, defined for `p ∉ [p*, p**]`.
pub fn explicit_k(p: f64, c: &ConstantSet) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::SublinearExponent(p));
    }
    let s = 2.0 / (p - 1.0);
    let prod = c.params.big_lambda * (s - c.tau_plus) * (s - c.tau_minus);
    if !(prod > 0.0) {
        return Err(Error::KUndefined {
            p,
            p_star: c.p_star.unwrap_or(f64::NAN),
            p_star_star: c.p_star_star.unwrap_or(f64::NAN),
        });
    }
    Ok(prod.powf(1.0 / (p - 1.0)))
}

/// `K̄ = [Λτ⁻(τ−τ⁻)]^{τ⁻/2}`.
pub fn log_critical_kbar(c: &ConstantSet) -> Result<f64> {
    critical_exponents(c)?;
    let base = c.params.big_lambda * c.tau_minus * (c.tau - c.tau_minus);
    Ok(base.powf(c.tau_minus / 2.0))
}

/// Which extremal operator an eigenfunction belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extremal {
    Plus,
    Minus,
}

/// Principal radial eigenfunction `Φ(r) = −log r / r^{e}` with `e = (Ñ±−2)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenfunction {
    pub exponent: f64,
}

impl Eigenfunction {
    /// `(Φ, Φ′, Φ″)` at `r`.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let e = self.exponent;
        let l = r.ln();
        let base = r.powf(-e);
        let value = -l * base;
        let d1 = base / r * (e * l - 1.0);
        let d2 = base / (r * r) * (2.0 * e + 1.0 - e * (e + 1.0) * l);
        (value, d1, d2)
    }
}

/// Principal eigenvalue and eigenfunction of `M±(D²Φ) + λ̄Φ/r² = 0`.
pub fn principal_eigenpair(params: &ProblemParams, which: Extremal) -> Result<(f64, Eigenfunction)> {
    params.check()?;
    Ok(match which {
        Extremal::Plus => {
            let e = (params.n_tilde_plus() - 2.0) / 2.0;
            (params.big_lambda * e * e, Eigenfunction { exponent: e })
        }
        Extremal::Minus => {
            let e = (params.n_tilde_minus() - 2.0) / 2.0;
            (params.lambda * e * e, Eigenfunction { exponent: e })
        }
    })
}
