//! Pucci extremal operators on radial profiles and the pointwise residuals of
//! the equations built on them.
//!
//! A radial `C²` function has Hessian eigenvalues `u″` (simple) and `u′/r`
//! (multiplicity `N−1`), so `M±(D²u)` only needs those two numbers.

use serde::{Deserialize, Serialize};

use crate::constants::{ConstantSet, ProblemParams};
use crate::error::{Error, Result};

/// Relative width of the dead zone around zero in the sign split.
pub const DEAD_ZONE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// Geometrically spaced radii on `[r_min, r_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogGrid {
    r_min: f64,
    r_max: f64,
    nodes: Vec<f64>,
    log_step: f64,
}

impl LogGrid {
    pub fn new(r_min: f64, r_max: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::GridTooSmall { needed: 3, got: n });
        }
        if !(r_min > 0.0 && r_min < r_max && r_max.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "need 0 < r_min < r_max, got [{r_min}, {r_max}]"
            )));
        }
        let (lo, hi) = (r_min.ln(), r_max.ln());
        let log_step = (hi - lo) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| (lo + i as f64 * log_step).exp()).collect();
        nodes[0] = r_min;
        nodes[n - 1] = r_max;
        Ok(Self {
            r_min,
            r_max,
            nodes,
            log_step,
        })
    }

    /// Grid with `per_octave` nodes per factor of two on `[2^{-octaves} r_max, r_max]`.
    /// Every radius `2^{-k} r_max` is a node.
    pub fn dyadic(r_max: f64, octaves: u32, per_octave: usize) -> Result<Self> {
        if per_octave == 0 || octaves == 0 {
            return Err(Error::InvalidGrid("empty dyadic grid".into()));
        }
        let n = octaves as usize * per_octave + 1;
        let m = per_octave as f64;
        let mut nodes: Vec<f64> = (0..n)
            .map(|i| {
                let k = (n - 1 - i) as f64;
                r_max * (-k / m).exp2()
            })
            .collect();
        for (i, node) in nodes.iter_mut().enumerate() {
            let k = n - 1 - i;
            if k % per_octave == 0 {
                *node = r_max * (-((k / per_octave) as f64)).exp2();
            }
        }
        Ok(Self {
            r_min: nodes[0],
            r_max,
            nodes,
            log_step: std::f64::consts::LN_2 / m,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Uniform spacing in `log r`.
    pub fn log_step(&self) -> f64 {
        self.log_step
    }

    /// Sub-grid of nodes `range`.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        if to <= from || to > self.len() || to - from < 3 {
            return Err(Error::InvalidGrid(format!("bad slice {from}..{to}")));
        }
        let nodes = self.nodes[from..to].to_vec();
        Ok(Self {
            r_min: nodes[0],
            r_max: *nodes.last().unwrap(),
            nodes,
            log_step: self.log_step,
        })
    }

    /// Index of the node closest to `r` (in log distance).
    pub fn nearest(&self, r: f64) -> usize {
        let lr = r.ln();
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (i, &x) in self.nodes.iter().enumerate() {
            let d = (x.ln() - lr).abs();
            if d < dist {
                dist = d;
                best = i;
            }
        }
        best
    }

    /// Builds a grid from arbitrary increasing radii; the log step is the mean one.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::GridTooSmall {
                needed: 3,
                got: nodes.len(),
            });
        }
        if nodes[0] <= 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("radii must be positive and increasing".into()));
        }
        let n = nodes.len();
        let log_step = (nodes[n - 1] / nodes[0]).ln() / (n - 1) as f64;
        Ok(Self {
            r_min: nodes[0],
            r_max: nodes[n - 1],
            nodes,
            log_step,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Analytic,
    FiniteDifference,
}

/// Samples of `(u, u′, u″)` on a [`LogGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFunction {
    pub grid: LogGrid,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub ddu: Vec<f64>,
    pub provenance: Provenance,
}

impl RadialFunction {
    /// Samples a closed form returning `(u, u′, u″)`.
    pub fn from_analytic<F>(grid: LogGrid, f: F) -> Self
    where
        F: Fn(f64) -> (f64, f64, f64),
    {
        let n = grid.len();
        let (mut u, mut du, mut ddu) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for &r in grid.nodes() {
            let (a, b, c) = f(r);
            u.push(a);
            du.push(b);
            ddu.push(c);
        }
        Self {
            grid,
            u,
            du,
            ddu,
            provenance: Provenance::Analytic,
        }
    }

    /// Values only; derivatives from [`fd_derivatives`].
    pub fn from_values(grid: LogGrid, u: Vec<f64>) -> Result<Self> {
        if u.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: u.len(),
            });
        }
        let (du, ddu) = fd_derivatives(&grid, &u)?;
        Ok(Self {
            grid,
            u,
            du,
            ddu,
            provenance: Provenance::FiniteDifference,
        })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn r(&self) -> &[f64] {
        self.grid.nodes()
    }

    fn check_lengths(&self) -> Result<()> {
        let n = self.grid.len();
        for len in [self.u.len(), self.du.len(), self.ddu.len()] {
            if len != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        Ok(())
    }

    /// Restriction to nodes `from..to`.
    pub fn slice(&self, from: usize, to: usize) -> Result<Self> {
        Ok(Self {
            grid: self.grid.slice(from, to)?,
            u: self.u[from..to].to_vec(),
            du: self.du[from..to].to_vec(),
            ddu: self.ddu[from..to].to_vec(),
            provenance: self.provenance,
        })
    }
}

fn split(x: f64, scale: f64, pos: f64, neg: f64) -> f64 {
    if x.abs() <= DEAD_ZONE * scale {
        0.0
    } else if x > 0.0 {
        pos * x
    } else {
        neg * x
    }
}

/// `M±` of a radial Hessian with eigenvalues `ddu` and `du_over_r` (the latter
/// with multiplicity `N−1`).
pub fn pucci_radial(ddu: f64, du_over_r: f64, params: &ProblemParams, sign: Sign) -> f64 {
    let (pos, neg) = match sign {
        Sign::Plus => (params.big_lambda, params.lambda),
        Sign::Minus => (params.lambda, params.big_lambda),
    };
    let scale = ddu.abs().max(du_over_r.abs());
    split(ddu, scale, pos, neg) + f64::from(params.dim - 1) * split(du_over_r, scale, pos, neg)
}

/// Pointwise residual with the magnitude it is measured against.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub value: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Residual {
    pub fn relative(&self) -> Vec<f64> {
        self.value
            .iter()
            .zip(&self.scale)
            .map(|(v, s)| if *s > 0.0 { v / s } else { *v })
            .collect()
    }

    /// Largest `|value| / scale`.
    pub fn max_relative(&self) -> f64 {
        self.relative().iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

fn operator_magnitude(ddu: f64, du_over_r: f64, params: &ProblemParams) -> f64 {
    params.big_lambda * (ddu.abs() + f64::from(params.dim - 1) * du_over_r.abs())
}

fn residual_with(u: &RadialFunction, params: &ProblemParams, absorption: bool) -> Result<Residual> {
    u.check_lengths()?;
    let n = u.len();
    let mut value = Vec::with_capacity(n);
    let mut scale = Vec::with_capacity(n);
    for (i, &r) in u.r().iter().enumerate() {
        let (v, dv, ddv) = (u.u[i], u.du[i], u.ddu[i]);
        let g = dv / r;
        let m = pucci_radial(ddv, g, params, Sign::Plus);
        let potential = params.mu * v / (r * r);
        let sink = if absorption { v.powf(params.p) } else { 0.0 };
        value.push(m + potential - sink);
        let s = sink.abs() + potential.abs();
        scale.push(if s > 0.0 { s } else { operator_magnitude(ddv, g, params) });
    }
    Ok(Residual { value, scale })
}

/// `M⁺(D²u) + μu/r² − uᵖ` at every node.
pub fn residual_main(u: &RadialFunction, params: &ProblemParams) -> Result<Residual> {
    if let Some((node, &value)) = u.u.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveSample { node, value });
    }
    residual_with(u, params, true)
}

/// Same as [`residual_main`] but admits zeros (barriers touching the boundary).
pub fn residual_main_nonnegative(u: &RadialFunction, params: &ProblemParams) -> Result<Residual> {
    if let Some((node, &value)) = u.u.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NonPositiveSample { node, value });
    }
    residual_with(u, params, true)
}

/// `M⁺(D²u) + μu/r²` at every node.
pub fn residual_linear(u: &RadialFunction, params: &ProblemParams) -> Result<Residual> {
    residual_with(u, params, false)
}

/// Residual of the equation satisfied by `v = r^{τ⁻}u` where `u` is convex
/// and decreasing:
/// `v″ + (1+2(τ−τ⁻))v′/r − vᵖ/(Λ r^{(p−1)τ⁻})`.
pub fn residual_v_equation(v: &RadialFunction, c: &ConstantSet) -> Result<Residual> {
    v.check_lengths()?;
    if let Some((node, &value)) = v.u.iter().enumerate().find(|(_, x)| !(**x >= 0.0)) {
        return Err(Error::NonPositiveSample { node, value });
    }
    let params = &c.params;
    let a = 1.0 + 2.0 * (c.tau - c.tau_minus);
    let weight_exp = (params.p - 1.0) * c.tau_minus;
    let mut value = Vec::with_capacity(v.len());
    let mut scale = Vec::with_capacity(v.len());
    for (i, &r) in v.r().iter().enumerate() {
        let lin = v.ddu[i] + a * v.du[i] / r;
        let sink = v.u[i].powf(params.p) / (params.big_lambda * r.powf(weight_exp));
        value.push(lin - sink);
        scale.push(if sink > 0.0 {
            sink
        } else {
            v.ddu[i].abs() + a * (v.du[i] / r).abs()
        });
    }
    Ok(Residual { value, scale })
}

/// First and second `r`-derivatives of samples on a [`LogGrid`].
///
/// Differences are taken in `ξ = log r` with fourth-order five-point stencils
/// (six-point one-sided ones at the two ends), then mapped back with
/// `u′ = u_ξ/r`, `u″ = (u_ξξ − u_ξ)/r²`. Five-node grids fall back to
/// second-order three-point stencils.
pub fn fd_derivatives(grid: &LogGrid, values: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = grid.len();
    if n < 5 {
        return Err(Error::GridTooSmall { needed: 5, got: n });
    }
    if values.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: values.len(),
        });
    }
    let h = grid.log_step();
    let u = values;
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    if n == 5 {
        for i in 1..n - 1 {
            d1[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
            d2[i] = ((u[i + 1] + u[i - 1]) - 2.0 * u[i]) / (h * h);
        }
        d1[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
        d2[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / (h * h);
        let m = n - 1;
        d1[m] = (3.0 * u[m] - 4.0 * u[m - 1] + u[m - 2]) / (2.0 * h);
        d2[m] = (2.0 * u[m] - 5.0 * u[m - 1] + 4.0 * u[m - 2] - u[m - 3]) / (h * h);
    } else {
        let h12 = 12.0 * h;
        let hh12 = 12.0 * h * h;
        for i in 2..n - 2 {
            d1[i] = (8.0 * (u[i + 1] - u[i - 1]) - (u[i + 2] - u[i - 2])) / h12;
            d2[i] = (16.0 * (u[i + 1] + u[i - 1]) - (u[i + 2] + u[i - 2]) - 30.0 * u[i]) / hh12;
        }
        let (first, second) = one_sided(&u[..6]);
        d1[0] = first[0] / h12;
        d1[1] = first[1] / h12;
        d2[0] = second[0] / hh12;
        d2[1] = second[1] / hh12;
        let tail: Vec<f64> = u[n - 6..].iter().rev().copied().collect();
        let (first, second) = one_sided(&tail);
        // mirrored stencil: odd derivative flips sign
        d1[n - 1] = -first[0] / h12;
        d1[n - 2] = -first[1] / h12;
        d2[n - 1] = second[0] / hh12;
        d2[n - 2] = second[1] / hh12;
    }
    let r = grid.nodes();
    let du = (0..n).map(|i| d1[i] / r[i]).collect();
    let ddu = (0..n).map(|i| (d2[i] - d1[i]) / (r[i] * r[i])).collect();
    Ok((du, ddu))
}

/// Fourth-order one-sided stencils (unscaled) at the first two nodes.
fn one_sided(u: &[f64]) -> ([f64; 2], [f64; 2]) {
    let f0 = -25.0 * u[0] + 48.0 * u[1] - 36.0 * u[2] + 16.0 * u[3] - 3.0 * u[4];
    let f1 = -3.0 * u[0] - 10.0 * u[1] + 18.0 * u[2] - 6.0 * u[3] + u[4];
    let s0 = 45.0 * u[0] - 154.0 * u[1] + 214.0 * u[2] - 156.0 * u[3] + 61.0 * u[4] - 10.0 * u[5];
    let s1 = 10.0 * u[0] - 15.0 * u[1] - 4.0 * u[2] + 14.0 * u[3] - 6.0 * u[4] + u[5];
    ([f0, f1], [s0, s1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{derive_constants, explicit_k, principal_eigenpair, Extremal};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> ProblemParams {
        ProblemParams::new(1.0, 2.0, 5, 0.25, 2.0).unwrap()
    }

    #[test]
    fn pucci_branches() {
        let p3 = ProblemParams::new(1.0, 2.0, 3, 0.0, 2.0).unwrap();
        assert_eq!(pucci_radial(1.0, 1.0, &p3, Sign::Plus), 6.0);
        let p = params();
        let m = pucci_radial(1.0, -1.0, &p, Sign::Plus);
        assert_eq!(m, -2.0);
        let ntp = p.n_tilde_plus();
        assert_eq!(m, p.big_lambda * (1.0 + (ntp - 1.0) * -1.0));
        assert_eq!(pucci_radial(1.0, -1.0, &p, Sign::Minus), 1.0 - 8.0);
    }

    #[test]
    fn duality_on_random_pairs() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let a: f64 = rng.gen_range(-10.0..10.0);
            let b: f64 = rng.gen_range(-10.0..10.0);
            assert_eq!(
                pucci_radial(a, b, &p, Sign::Plus),
                -pucci_radial(-a, -b, &p, Sign::Minus)
            );
        }
    }

    proptest! {
        #[test]
        fn homogeneous_and_monotone(a in -1e3f64..1e3, b in -1e3f64..1e3, t in 0.01f64..100.0, da in 0.0f64..10.0) {
            let p = params();
            let m = pucci_radial(a, b, &p, Sign::Plus);
            let mt = pucci_radial(t * a, t * b, &p, Sign::Plus);
            prop_assert!((mt - t * m).abs() <= 1e-12 * (1.0 + (t * m).abs() + t * (a.abs() + b.abs())));
            prop_assert!(pucci_radial(a + da, b, &p, Sign::Plus) >= m - 1e-12 * (1.0 + m.abs()));
            prop_assert!(pucci_radial(a, b + da, &p, Sign::Plus) >= m - 1e-12 * (1.0 + m.abs()));
        }
    }

    #[test]
    fn grid_is_geometric() {
        let g = LogGrid::new(1e-8, 1.0, 2048).unwrap();
        let q = g.nodes()[1] / g.nodes()[0];
        for w in g.nodes().windows(2) {
            assert!(w[1] > w[0]);
            assert!(((w[1] / w[0]) - q).abs() <= 64.0 * f64::EPSILON * q);
        }
        assert!(LogGrid::new(1.0, 0.5, 10).is_err());
        assert!(matches!(LogGrid::new(0.1, 1.0, 2), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn dyadic_grid_hits_powers_of_two() {
        let g = LogGrid::dyadic(1.0, 16, 64).unwrap();
        for k in 0..=16u32 {
            let target = (-(k as f64)).exp2();
            assert!(g.nodes().contains(&target), "missing 2^-{k}");
        }
    }

    #[test]
    fn exact_solution_residual() {
        let p = params();
        let c = derive_constants(&p).unwrap();
        let k = explicit_k(2.0, &c).unwrap();
        let s = p.scaling_exponent();
        let grid = LogGrid::new(1e-8, 1.0, 512).unwrap();
        let u = RadialFunction::from_analytic(grid, |r| {
            let v = k * r.powf(-s);
            (v, -s * v / r, s * (s + 1.0) * v / (r * r))
        });
        assert!(residual_main(&u, &p).unwrap().max_relative() <= 1e-12);
    }

    #[test]
    fn power_law_linear_residual_factorizes() {
        let p = params();
        let c = derive_constants(&p).unwrap();
        let grid = LogGrid::new(1e-6, 1.0, 200).unwrap();
        for gamma in [0.05, c.tau_minus, 0.3, c.tau, c.tau_plus, 1.5] {
            let z = RadialFunction::from_analytic(grid.clone(), |r| {
                let v = 1.7 * r.powf(-gamma);
                (v, -gamma * v / r, gamma * (gamma + 1.0) * v / (r * r))
            });
            let res = residual_linear(&z, &p).unwrap();
            for (i, &r) in grid.nodes().iter().enumerate() {
                let expect = 1.7 * p.big_lambda * c.tau_product(gamma) * r.powf(-gamma - 2.0);
                let mag = 1.7 * p.big_lambda * r.powf(-gamma - 2.0) * (gamma * (gamma + 1.0) + 4.0 * gamma);
                assert!((res.value[i] - expect).abs() <= 1e-12 * mag, "gamma {gamma} r {r}");
            }
            if gamma >= c.tau_minus && gamma <= c.tau_plus {
                let main = residual_main(&z, &p).unwrap();
                assert!(main.value.iter().all(|v| *v <= 0.0));
            }
        }
    }

    #[test]
    fn eigenfunction_linear_residual() {
        let p = params().with_mu(0.5);
        let (_, phi) = principal_eigenpair(&p, Extremal::Plus).unwrap();
        let grid = LogGrid::new(1e-8, 0.99, 1024).unwrap();
        let u = RadialFunction::from_analytic(grid, |r| phi.eval(r));
        assert!(residual_linear(&u, &p).unwrap().max_relative() <= 1e-10);
    }

    #[test]
    fn rejects_non_positive_samples() {
        let grid = LogGrid::new(0.1, 1.0, 8).unwrap();
        let u = RadialFunction::from_analytic(grid, |r| (1.0 - r, -1.0, 0.0));
        assert!(matches!(
            residual_main(&u, &params()),
            Err(Error::NonPositiveSample { node: 7, .. })
        ));
    }

    #[test]
    fn fd_power_law_accuracy() {
        let grid = LogGrid::new(1e-4, 1.0, 4096).unwrap();
        let vals: Vec<f64> = grid.nodes().iter().map(|r| r.powi(-2)).collect();
        let (du, ddu) = fd_derivatives(&grid, &vals).unwrap();
        for (i, &r) in grid.nodes().iter().enumerate() {
            let exact = -2.0 * r.powi(-3);
            assert!(((du[i] - exact) / exact).abs() <= 1e-6);
            let exact2 = 6.0 * r.powi(-4);
            assert!(((ddu[i] - exact2) / exact2).abs() <= 1e-6);
        }
    }

    #[test]
    fn fd_constant_is_exact() {
        let grid = LogGrid::new(1e-3, 1.0, 50).unwrap();
        let vals = vec![0.1; 50];
        let (du, ddu) = fd_derivatives(&grid, &vals).unwrap();
        for i in 2..48 {
            assert_eq!(du[i], 0.0);
            assert_eq!(ddu[i], 0.0);
        }
    }

    #[test]
    fn fd_log_is_accurate() {
        let grid = LogGrid::new(1e-3, 1.0, 100).unwrap();
        let vals: Vec<f64> = grid.nodes().iter().map(|r| r.ln()).collect();
        let (_, ddu) = fd_derivatives(&grid, &vals).unwrap();
        for (i, &r) in grid.nodes().iter().enumerate() {
            assert!((ddu[i] * r * r + 1.0).abs() < 1e-6);
        }
        assert!(matches!(
            fd_derivatives(&LogGrid::new(0.1, 1.0, 4).unwrap(), &[1.0; 4]),
            Err(Error::GridTooSmall { .. })
        ));
    }

    #[test]
    fn fd_converges_at_least_second_order() {
        let f = |r: f64| r.powf(-0.7) * (1.0 + r * r);
        let mut errs = Vec::new();
        for n in [65, 129, 257] {
            let grid = LogGrid::new(1e-2, 1.0, n).unwrap();
            let vals: Vec<f64> = grid.nodes().iter().map(|&r| f(r)).collect();
            let (_, ddu) = fd_derivatives(&grid, &vals).unwrap();
            let err = grid
                .nodes()
                .iter()
                .zip(&ddu)
                .map(|(&r, d)| {
                    let exact = 0.7 * 1.7 * r.powf(-2.7) + (1.3 * 0.3) * r.powf(-0.7);
                    ((d - exact) / exact).abs()
                })
                .fold(0.0, f64::max);
            errs.push(err);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.9, "{errs:?}");
        }
    }

    #[test]
    fn v_equation_zero_and_transformed_solution() {
        let p = params().with_p(16.0);
        let c = derive_constants(&p).unwrap();
        let grid = LogGrid::new(1e-8, 1.0, 300).unwrap();
        let zero = RadialFunction::from_analytic(grid.clone(), |_| (0.0, 0.0, 0.0));
        assert!(residual_v_equation(&zero, &c).unwrap().value.iter().all(|v| *v == 0.0));
        let k = c.k_opt.unwrap();
        let e = c.tau_minus - c.s();
        let v = RadialFunction::from_analytic(grid, |r| {
            let x = k * r.powf(e);
            (x, e * x / r, e * (e - 1.0) * x / (r * r))
        });
        assert!(residual_v_equation(&v, &c).unwrap().max_relative() <= 1e-10);
    }

    #[test]
    fn scaling_invariance() {
        // u_α(r) = α^{2/(1−p)} u(r/α) for the explicit solution at p = 2.
        let p = params();
        let c = derive_constants(&p).unwrap();
        let k = c.k_opt.unwrap();
        let s = p.scaling_exponent();
        let alpha: f64 = 3.0;
        let f = |r: f64| {
            let v = k * r.powf(-s);
            (v, -s * v / r, s * (s + 1.0) * v / (r * r))
        };
        let grid = LogGrid::new(1e-6 * alpha, alpha, 400).unwrap();
        let amp = alpha.powf(2.0 / (1.0 - p.p));
        let ua = RadialFunction::from_analytic(grid, |r| {
            let (a, b, cc) = f(r / alpha);
            (amp * a, amp * b / alpha, amp * cc / (alpha * alpha))
        });
        assert!(residual_main(&ua, &p).unwrap().max_relative() <= 1e-12);
    }
}
