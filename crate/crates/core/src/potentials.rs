//! The canonical toric potential `ũ(x) = log Σ_{v ∈ L(Δ)} e^{⟨v,x⟩}` on `N_ℝ`
//! and the functions built from it.
//!
//! Softmax weights `p_v = e^{⟨v,x⟩ − ũ(x)}` give every derivative: the
//! gradient is their mean (the moment map), the Hessian their covariance and
//! the third derivative their third central moment.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::polytope::{LatticeVector, ReflexivePolytope};
use crate::quadrature::PolytopeIntegrator;

#[derive(Debug, Clone)]
pub struct PotentialModel {
    points: Vec<Vec<f64>>,
    n: usize,
}

#[derive(Debug, Clone)]
pub struct PotentialEval {
    pub u: f64,
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
}

impl PotentialModel {
    pub fn new(lattice_points: &[LatticeVector]) -> Result<Self> {
        let n = lattice_points.first().map(|p| p.len()).unwrap_or(0);
        if n == 0 || lattice_points.len() <= n {
            return Err(Error::InvalidInput("need at least n+1 exponents".into()));
        }
        let points: Vec<Vec<f64>> = lattice_points.iter().map(|p| p.iter().map(|&c| c as f64).collect()).collect();
        // strict convexity needs the exponents to affinely span ℝⁿ
        let rows: Vec<Vec<crate::exact::Q>> = lattice_points[1..]
            .iter()
            .map(|p| p.iter().zip(&lattice_points[0]).map(|(a, b)| crate::exact::q(a - b)).collect())
            .collect();
        if crate::exact::rank(&rows) < n {
            return Err(Error::InvalidInput("exponents do not affinely span".into()));
        }
        Ok(PotentialModel { points, n })
    }

    pub fn from_polytope(polytope: &ReflexivePolytope) -> Self {
        Self::new(polytope.lattice_points()).expect("lattice points of a reflexive polytope span")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn exponents(&self) -> &[Vec<f64>] {
        &self.points
    }

    fn exponent(&self, v: &[f64], x: &[f64]) -> f64 {
        v.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn u(&self, x: &[f64]) -> f64 {
        let max = self.points.iter().map(|v| self.exponent(v, x)).fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = self.points.iter().map(|v| (self.exponent(v, x) - max).exp()).sum();
        max + s.ln()
    }

    /// `log Σ_v e^{⟨v,x⟩ + shift_v}`.
    pub(crate) fn u_shifted(&self, x: &[f64], shift: impl Fn(&[f64]) -> f64) -> f64 {
        let e: Vec<f64> = self.points.iter().map(|v| self.exponent(v, x) + shift(v)).collect();
        let max = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max + e.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
    }

    fn weights(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let e: Vec<f64> = self.points.iter().map(|v| self.exponent(v, x)).collect();
        let max = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = e.iter().map(|l| (l - max).exp()).collect();
        let s: f64 = w.iter().sum();
        for p in w.iter_mut() {
            *p /= s;
        }
        (max + s.ln(), w)
    }

    /// `ũ`, `∇ũ = μ_ũ` and `Hess ũ` at `x`.
    pub fn evaluate(&self, x: &[f64]) -> PotentialEval {
        let n = self.n;
        let (u, w) = self.weights(x);
        let mut grad = vec![0.0; n];
        for (p, v) in w.iter().zip(&self.points) {
            for k in 0..n {
                grad[k] += p * v[k];
            }
        }
        let mut hess = DMatrix::zeros(n, n);
        for (p, v) in w.iter().zip(&self.points) {
            for a in 0..n {
                let da = v[a] - grad[a];
                for b in 0..=a {
                    hess[(a, b)] += p * da * (v[b] - grad[b]);
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
        }
        PotentialEval { u, grad, hess }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.evaluate(x).grad
    }

    /// `∂_k log det Hess ũ = tr(H⁻¹ ∂_k H)`, where `∂_k H_ab` is the third
    /// central moment of the softmax weights.
    pub fn grad_log_det_hess(&self, x: &[f64], eval: &PotentialEval) -> Vec<f64> {
        let n = self.n;
        let (_, w) = self.weights(x);
        let inv = eval.hess.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
        let mut out = vec![0.0; n];
        for (p, v) in w.iter().zip(&self.points) {
            let d: Vec<f64> = (0..n).map(|a| v[a] - eval.grad[a]).collect();
            // Σ_ab inv_ab d_a d_b
            let mut quad = 0.0;
            for a in 0..n {
                for b in 0..n {
                    quad += inv[(a, b)] * d[a] * d[b];
                }
            }
            for k in 0..n {
                out[k] += p * quad * d[k];
            }
        }
        out
    }

    /// `(e^{ũ} det Hess ũ, −ũ − log det Hess ũ)`; the second is the Ricci
    /// potential in logarithmic coordinates up to its additive constant.
    pub fn ma_density(&self, x: &[f64]) -> Result<(f64, f64)> {
        let e = self.evaluate(x);
        let det = e.hess.determinant();
        if !(det >= 1e-300) {
            return Err(Error::HessianSingular(x.to_vec()));
        }
        let log_det = det.ln();
        Ok(((e.u + log_det).exp(), -e.u - log_det))
    }

    /// Damped Newton for `∇ũ(x) = y` on the strictly convex `ũ(x) − ⟨y, x⟩`.
    pub fn invert_moment(&self, polytope: &ReflexivePolytope, y: &[f64]) -> Result<Vec<f64>> {
        let margin = polytope.boundary_margin(y);
        if margin < 1e-9 {
            return Err(Error::BoundaryPoint { point: y.to_vec(), margin });
        }
        let n = self.n;
        let objective = |x: &[f64]| self.u(x) - x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        let mut x = vec![0.0; n];
        let mut f = objective(&x);
        for _ in 0..200 {
            let e = self.evaluate(&x);
            let g = DVector::from_iterator(n, e.grad.iter().zip(y).map(|(a, b)| a - b));
            if g.norm() <= 1e-10 {
                return Ok(self.polish(x, y, g.norm()));
            }
            let Some(step) = e.hess.clone().cholesky().map(|c| c.solve(&g)) else {
                return Err(Error::HessianSingular(x));
            };
            let slope = -g.dot(&step);
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a - t * d).collect();
                let ft = objective(&trial);
                let shrinks = || {
                    let r: f64 = self.grad(&trial).iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    r < g.norm()
                };
                if ft <= f + 1e-4 * t * slope || shrinks() || t < 1e-12 {
                    x = trial;
                    f = ft;
                    break;
                }
                t *= 0.5;
            }
        }
        let resid: f64 = self.grad(&x).iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if resid <= 1e-10 {
            return Ok(self.polish(x, y, resid));
        }
        Err(Error::no_convergence("invert_moment", format!("|∇ũ − y| = {resid:e} after 200 damped steps")))
    }

    fn polish(&self, mut x: Vec<f64>, y: &[f64], mut resid: f64) -> Vec<f64> {
        for _ in 0..3 {
            let e = self.evaluate(&x);
            let g = DVector::from_iterator(self.n, e.grad.iter().zip(y).map(|(a, b)| a - b));
            let Some(step) = e.hess.cholesky().map(|c| c.solve(&g)) else { break };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a - d).collect();
            let r: f64 = self.grad(&trial).iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if r >= resid {
                break;
            }
            x = trial;
            resid = r;
        }
        x
    }
}

/// `θ̃(x) = ⟨∇ũ(x), ξ⟩ + c_norm`, normalized so that `∫ e^{θ̃} det Hess ũ = vol Δ`.
#[derive(Debug, Clone)]
pub struct ThetaPotential {
    pub xi: Vec<f64>,
    pub c_norm: f64,
    pub alpha_v: f64,
    pub beta_v: f64,
}

impl ThetaPotential {
    pub fn at_moment(&self, y: &[f64]) -> f64 {
        y.iter().zip(&self.xi).map(|(a, b)| a * b).sum::<f64>() + self.c_norm
    }

    pub fn eval(&self, model: &PotentialModel, x: &[f64]) -> f64 {
        self.at_moment(&model.grad(x))
    }

    /// Oscillation `β_v − α_v`.
    pub fn b(&self) -> f64 {
        self.beta_v - self.alpha_v
    }
}

pub fn theta_normalized(polytope: &ReflexivePolytope, integrator: &PolytopeIntegrator, xi: &[f64]) -> ThetaPotential {
    let vol = integrator.integrals(&vec![0.0; xi.len()]).i0;
    let i0 = integrator.integrals(xi).i0;
    let c_norm = (vol / i0).ln();
    let range = polytope.support_range(xi);
    ThetaPotential { xi: xi.to_vec(), c_norm, alpha_v: range.min + c_norm, beta_v: range.max + c_norm }
}

/// Pullback potential `ψ̃_t(x) = ũ(x − tξ) − ũ(x) − c_t`, with
/// `c_t = −t·min_{v ∈ L(Δ)} ⟨v, ξ⟩` making `sup ψ̃_t = 0`.
#[derive(Debug, Clone)]
pub struct FlowPotential {
    pub model: PotentialModel,
    pub xi: Vec<f64>,
    pub t: f64,
    pub c_t: f64,
}

pub fn flow_potential(model: &PotentialModel, xi: &[f64], t: f64) -> FlowPotential {
    let min = model
        .exponents()
        .iter()
        .map(|v| v.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    FlowPotential { model: model.clone(), xi: xi.to_vec(), t, c_t: -t * min }
}

impl FlowPotential {
    /// `ũ(x) + ψ̃_t(x) = ũ(x − tξ) − c_t`.
    pub fn shifted_u(&self, x: &[f64]) -> f64 {
        let (t, c) = (self.t, self.c_t);
        self.model.u_shifted(x, |v| -t * v.iter().zip(&self.xi).map(|(a, b)| a * b).sum::<f64>() - c)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        if self.t == 0.0 {
            return 0.0;
        }
        self.shifted_u(x) - self.model.u(x)
    }

    fn translated(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.xi).map(|(a, b)| a - self.t * b).collect()
    }

    /// Largest value of `ψ̃_t` on the grid `[-extent, extent]ⁿ` with the given step.
    pub fn grid_sup(&self, extent: f64, step: f64) -> f64 {
        let n = self.model.dim();
        let per_axis = (2.0 * extent / step).round() as usize + 1;
        let total = per_axis.pow(n as u32);
        let mut best = f64::NEG_INFINITY;
        let mut x = vec![0.0; n];
        for c in 0..total {
            let mut rem = c;
            for xk in x.iter_mut() {
                *xk = -extent + (rem % per_axis) as f64 * step;
                rem /= per_axis;
            }
            best = best.max(self.value(&x));
        }
        best
    }
}

/// Torus-invariant test potential `ψ̃` on `N_ℝ` with first and second derivatives.
pub trait TestPotential: Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;
    fn hess(&self, x: &[f64]) -> DMatrix<f64>;
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantPotential(pub f64);

impl TestPotential for ConstantPotential {
    fn value(&self, _: &[f64]) -> f64 {
        self.0
    }
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }
    fn hess(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(x.len(), x.len())
    }
}

/// `ψ̃_a(x) = ũ(x − a) − ũ(x)`; always an admissible Kähler potential.
#[derive(Debug, Clone)]
pub struct TranslationPotential {
    pub model: PotentialModel,
    pub a: Vec<f64>,
}

impl TranslationPotential {
    fn shift(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.a).map(|(p, q)| p - q).collect()
    }
}

impl TestPotential for TranslationPotential {
    fn value(&self, x: &[f64]) -> f64 {
        self.model.u(&self.shift(x)) - self.model.u(x)
    }
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let g1 = self.model.grad(&self.shift(x));
        let g0 = self.model.grad(x);
        g1.iter().zip(&g0).map(|(a, b)| a - b).collect()
    }
    fn hess(&self, x: &[f64]) -> DMatrix<f64> {
        self.model.evaluate(&self.shift(x)).hess - self.model.evaluate(x).hess
    }
}

/// `ε·e^{−|x|²}`.
#[derive(Debug, Clone, Copy)]
pub struct BumpPotential {
    pub eps: f64,
}

impl TestPotential for BumpPotential {
    fn value(&self, x: &[f64]) -> f64 {
        self.eps * (-x.iter().map(|a| a * a).sum::<f64>()).exp()
    }
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let v = self.value(x);
        x.iter().map(|a| -2.0 * a * v).collect()
    }
    fn hess(&self, x: &[f64]) -> DMatrix<f64> {
        let v = self.value(x);
        let n = x.len();
        DMatrix::from_fn(n, n, |i, j| v * (4.0 * x[i] * x[j] - if i == j { 2.0 } else { 0.0 }))
    }
}

impl TestPotential for FlowPotential {
    fn value(&self, x: &[f64]) -> f64 {
        FlowPotential::value(self, x)
    }
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let g1 = self.model.grad(&self.translated(x));
        let g0 = self.model.grad(x);
        g1.iter().zip(&g0).map(|(a, b)| a - b).collect()
    }
    fn hess(&self, x: &[f64]) -> DMatrix<f64> {
        self.model.evaluate(&self.translated(x)).hess - self.model.evaluate(x).hess
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::build_polytope;
    use approx::assert_relative_eq;

    fn dp1() -> (ReflexivePolytope, PotentialModel) {
        let (p, _) = build_polytope(&[vec![1, 1], vec![-1, 0], vec![-1, -1], vec![0, -1]]).unwrap();
        let m = PotentialModel::from_polytope(&p);
        (p, m)
    }

    fn dp2() -> (ReflexivePolytope, PotentialModel) {
        let (p, _) = build_polytope(&[vec![1, 0], vec![0, -1], vec![-1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let m = PotentialModel::from_polytope(&p);
        (p, m)
    }

    #[test]
    fn origin_values_on_dp1() {
        let (_, m) = dp1();
        let e = m.evaluate(&[0.0, 0.0]);
        assert_relative_eq!(e.u, 9f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(e.grad[0], 1.0 / 9.0, max_relative = 1e-14);
        assert_relative_eq!(e.grad[1], 1.0 / 9.0, max_relative = 1e-14);
    }

    #[test]
    fn moment_map_matches_explicit_dp1_formula() {
        let (_, m) = dp1();
        let x = [0.37f64, -1.2];
        let (x1, x2) = (x[0], x[1]);
        let eu = (2.0 * x1 - x2).exp() + x1.exp() + x2.exp() + (-x1 + 2.0 * x2).exp() + (-x1 + x2).exp()
            + (-x1).exp() + (-x2).exp() + (x1 - x2).exp() + 1.0;
        let g1 = (2.0 * (2.0 * x1 - x2).exp() + x1.exp() - (-x1 + 2.0 * x2).exp() - (-x1 + x2).exp() - (-x1).exp()
            + (x1 - x2).exp())
            / eu;
        let g2 = (-(2.0 * x1 - x2).exp() + x2.exp() + 2.0 * (-x1 + 2.0 * x2).exp() + (-x1 + x2).exp() - (-x2).exp()
            - (x1 - x2).exp())
            / eu;
        let g = m.grad(&x);
        assert_relative_eq!(g[0], g1, max_relative = 1e-13);
        assert_relative_eq!(g[1], g2, max_relative = 1e-13);
    }

    #[test]
    fn moment_limits_on_dp2() {
        let (_, m) = dp2();
        let g = m.grad(&[0.0, 40.0]);
        assert!((g[0] + 0.5).abs() < 1e-6 && (g[1] - 1.0).abs() < 1e-6);
        let g = m.grad(&[0.0, -40.0]);
        assert!(g[0].abs() < 1e-6 && (g[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn projective_line_density() {
        let m = PotentialModel::new(&[vec![-1], vec![0], vec![1]]).unwrap();
        let (density, gap) = m.ma_density(&[0.0]).unwrap();
        assert_relative_eq!(density, 2.0, max_relative = 1e-14);
        assert_relative_eq!(gap, -(3f64.ln()) - (2.0f64 / 3.0).ln(), max_relative = 1e-14);
    }

    #[test]
    fn singular_hessian_reported() {
        let m = PotentialModel::new(&[vec![-1], vec![0], vec![1]]).unwrap();
        assert!(matches!(m.ma_density(&[800.0]), Err(Error::HessianSingular(_))));
    }

    #[test]
    fn invert_moment_cases() {
        let (p, m) = dp1();
        let x = m.invert_moment(&p, &[1.0 / 9.0, 1.0 / 9.0]).unwrap();
        assert!(x[0].abs() < 1e-9 && x[1].abs() < 1e-9);
        let (p, m) = dp2();
        let y = [-0.5, 1.0 - 1e-3];
        let x = m.invert_moment(&p, &y).unwrap();
        assert!(x[1] > 5.0, "{x:?}");
        let g = m.grad(&x);
        assert!((g[0] - y[0]).hypot(g[1] - y[1]) <= 1e-10);
        assert!(matches!(m.invert_moment(&p, &[0.0, 1.0]), Err(Error::BoundaryPoint { .. })));
        assert!(matches!(m.invert_moment(&p, &[3.0, 0.0]), Err(Error::BoundaryPoint { .. })));
    }

    #[test]
    fn flow_potential_basics() {
        let (_, m) = dp2();
        let beta = 0.4;
        let f = flow_potential(&m, &[beta, beta], 10.0);
        assert_relative_eq!(f.c_t, 2.0 * beta * 10.0, max_relative = 1e-15);
        assert!(f.value(&[-40.0, -40.0]).abs() < 1e-12);
        // closed form of ψ̃_t(−s, −s) from the quotient of the two sums
        let (s, bt) = (3.0f64, beta * 10.0);
        let num = 2.0 * (-s - 3.0 * bt).exp() + 3.0 * (-2.0 * bt).exp() + 2.0 * (s - bt).exp() + (2.0 * s).exp();
        let den = 2.0 * (-s).exp() + 3.0 + 2.0 * s.exp() + (2.0 * s).exp();
        assert_relative_eq!(f.value(&[-s, -s]), (num / den).ln(), max_relative = 1e-12);
        let zero = flow_potential(&m, &[beta, beta], 0.0);
        assert_eq!(zero.value(&[1.0, -3.0]), 0.0);
    }
}
