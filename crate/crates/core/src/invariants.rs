//! Holomorphic invariants of toric Fano manifolds and the soliton vector field.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, Q};
use crate::polytope::{Fan, ReflexivePolytope};
use crate::potentials::{theta_normalized, PotentialModel, TestPotential};
use crate::quadrature::{adaptive_grid_integral, gauss_legendre_unit, GridOptions, PolytopeIntegrator, SignedLog};

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// `F(ξ) = −n!·vol(Δ)·⟨bary(Δ), ξ⟩`, exactly.
pub fn futaki_exact(polytope: &ReflexivePolytope, fan: &Fan, xi: &[Q]) -> Q {
    let m = polytope.exact_moments(fan);
    let n = polytope.dim();
    -(exact::q(factorial(n) as i64) * &m.volume * exact::dot_q(&m.barycenter, xi))
}

pub fn futaki(polytope: &ReflexivePolytope, fan: &Fan, xi: &[f64]) -> f64 {
    let m = polytope.exact_moments(fan);
    let n = polytope.dim();
    let bary: f64 = m.barycenter.iter().zip(xi).map(|(b, x)| exact::to_f64(b) * x).sum();
    -(factorial(n) as f64) * exact::to_f64(&m.volume) * bary
}

/// Tian–Zhu invariant from the moment polytope:
/// `F_ξ(η) = −n!·(vol Δ / I0(ξ))·⟨I1(ξ), η⟩`.
pub fn tian_zhu_polytope(integrator: &PolytopeIntegrator, xi: &[f64], eta: &[f64]) -> f64 {
    let n = xi.len();
    let vol = integrator.integrals(&vec![0.0; n]).i0;
    let e = integrator.integrals(xi);
    let pairing: f64 = e.i1.iter().zip(eta).map(|(a, b)| a * b).sum();
    -(factorial(n) as f64) * vol / e.i0 * pairing
}

/// The vector `V` with `F_ξ(η) = ⟨V, η⟩`, integrated over `N_ℝ`:
/// `V = ∫ ∇(h̃ − θ̃) e^{θ̃} det Hess ũ dx`.
pub fn tian_zhu_direct_vector(
    model: &PotentialModel,
    polytope: &ReflexivePolytope,
    integrator: &PolytopeIntegrator,
    xi: &[f64],
    opts: &GridOptions,
) -> Result<Vec<f64>> {
    let n = model.dim();
    let theta = theta_normalized(polytope, integrator, xi);
    (0..n)
        .map(|k| {
            let integrand = |x: &[f64]| {
                let e = model.evaluate(x);
                let det = e.hess.determinant();
                if !(det > 0.0) {
                    return SignedLog::ZERO;
                }
                let dlog = model.grad_log_det_hess(x, &e);
                // ∇h̃ = −∇ũ − ∇ log det Hess ũ and ∇θ̃ = Hess ũ · ξ
                let dtheta: f64 = (0..n).map(|j| e.hess[(k, j)] * xi[j]).sum();
                let g = -e.grad[k] - dlog[k] - dtheta;
                let log_weight = theta.at_moment(&e.grad) + det.ln();
                let s = SignedLog::from_value(g);
                SignedLog { sign: s.sign, log_abs: s.log_abs + log_weight }
            };
            adaptive_grid_integral(n, integrand, opts).map(|r| r.value())
        })
        .collect()
}

pub fn tian_zhu_direct(
    model: &PotentialModel,
    polytope: &ReflexivePolytope,
    integrator: &PolytopeIntegrator,
    xi: &[f64],
    eta: &[f64],
    opts: &GridOptions,
) -> Result<f64> {
    if eta.iter().all(|&c| c == 0.0) {
        return Ok(0.0);
    }
    let v = tian_zhu_direct_vector(model, polytope, integrator, xi, opts)?;
    Ok(v.iter().zip(eta).map(|(a, b)| a * b).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonResult {
    pub xi_s: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub b: f64,
    pub alpha_v: f64,
    pub beta_v: f64,
    pub threshold: f64,
}

/// Lower end `(n+b)/(n+1+b)` of the admissible Nadel exponent range.
pub fn threshold(n: usize, b: f64) -> f64 {
    let n = n as f64;
    (n + b) / (n + 1.0 + b)
}

/// Minimizes the strictly convex `ξ ↦ log ∫_Δ e^{⟨ξ,y⟩} dy` by Newton's
/// method with backtracking. The minimizer is the soliton vector field.
pub fn solve_soliton_vector(polytope: &ReflexivePolytope, integrator: &PolytopeIntegrator, tol: f64) -> Result<SolitonResult> {
    let n = polytope.dim();
    let mut xi = vec![0.0; n];
    let objective = |xi: &[f64]| integrator.integrals(xi).i0.ln();
    let mut f = objective(&xi);
    let mut iterations = 0;
    let grad_norm = loop {
        let e = integrator.integrals(&xi);
        let g = DVector::from_vec(e.weighted_mean());
        let norm = g.norm();
        if norm <= tol {
            break norm;
        }
        if iterations == 100 {
            return Err(Error::no_convergence("solve_soliton_vector", format!("gradient norm {norm:e} after 100 Newton steps")));
        }
        let cov = e.weighted_covariance();
        let h = DMatrix::from_fn(n, n, |i, j| cov[i][j]);
        let step = h
            .cholesky()
            .ok_or_else(|| Error::no_convergence("solve_soliton_vector", "weighted covariance not positive definite"))?
            .solve(&g);
        let slope = -g.dot(&step);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = xi.iter().zip(step.iter()).map(|(a, d)| a - t * d).collect();
            let ft = objective(&trial);
            if ft <= f + 1e-4 * t * slope || t < 1e-10 {
                xi = trial;
                f = ft;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
    };
    let theta = theta_normalized(polytope, integrator, &xi);
    let b = theta.b();
    Ok(SolitonResult {
        xi_s: xi,
        grad_norm,
        iterations,
        b,
        alpha_v: theta.alpha_v,
        beta_v: theta.beta_v,
        threshold: threshold(n, b),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Functionals {
    pub i: f64,
    pub j: f64,
}

/// Checks on a coarse grid that `ũ + ψ̃` is strictly convex with moment image inside Δ.
fn check_kaehler(model: &PotentialModel, polytope: &ReflexivePolytope, psi: &dyn TestPotential, radius: f64) -> Result<()> {
    let n = model.dim();
    let per_axis = (2.0 * radius) as usize + 1;
    let mut x = vec![0.0; n];
    for c in 0..per_axis.pow(n as u32) {
        let mut rem = c;
        for xk in x.iter_mut() {
            *xk = -radius + (rem % per_axis) as f64;
            rem /= per_axis;
        }
        let e = model.evaluate(&x);
        let h = e.hess + psi.hess(&x);
        if h.cholesky().is_none() {
            return Err(Error::NotKaehler(format!("Hess(ũ + ψ̃) not positive definite at {x:?}")));
        }
        let y: Vec<f64> = e.grad.iter().zip(psi.grad(&x)).map(|(a, b)| a + b).collect();
        if polytope.boundary_margin(&y) < -1e-9 {
            return Err(Error::NotKaehler(format!("∇(ũ + ψ̃) leaves Δ at {x:?}")));
        }
    }
    Ok(())
}

/// The functionals `I(ψ)` and `J(ψ)` relative to the soliton-weighted measure
/// `e^{θ̃} det Hess ũ dx`; `J` is taken along the path `t ↦ tψ`.
pub fn functionals_ij(
    model: &PotentialModel,
    polytope: &ReflexivePolytope,
    integrator: &PolytopeIntegrator,
    xi: &[f64],
    psi: &dyn TestPotential,
    opts: &GridOptions,
) -> Result<Functionals> {
    check_kaehler(model, polytope, psi, 20.0)?;
    let n = model.dim();
    let theta = theta_normalized(polytope, integrator, xi);
    let vol = integrator.integrals(&vec![0.0; n]).i0;
    let gl = gauss_legendre_unit(32);
    let measure = |t: f64, e: &crate::potentials::PotentialEval, dpsi: &[f64], hpsi: &DMatrix<f64>| -> f64 {
        let h = &e.hess + hpsi * t;
        let y: Vec<f64> = e.grad.iter().zip(dpsi).map(|(a, b)| a + t * b).collect();
        (theta.at_moment(&y)).exp() * h.determinant()
    };
    let integrate = |path: bool| -> Result<f64> {
        let f = |x: &[f64]| {
            let p = psi.value(x);
            if p == 0.0 {
                return SignedLog::ZERO;
            }
            let e = model.evaluate(x);
            let dpsi = psi.grad(x);
            let hpsi = psi.hess(x);
            let base = measure(0.0, &e, &dpsi, &hpsi);
            let gap = if path {
                gl.iter().map(|&(t, w)| w * (base - measure(t, &e, &dpsi, &hpsi))).sum::<f64>()
            } else {
                base - measure(1.0, &e, &dpsi, &hpsi)
            };
            SignedLog::from_value(p * gap)
        };
        adaptive_grid_integral(n, f, opts).map(|r| r.value() / vol)
    };
    Ok(Functionals { i: integrate(false)?, j: integrate(true)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{frac, to_q};
    use crate::polytope::build_polytope;

    fn setup(rays: &[[i64; 2]]) -> (ReflexivePolytope, Fan, PolytopeIntegrator) {
        let rays: Vec<Vec<i64>> = rays.iter().map(|r| r.to_vec()).collect();
        let (p, fan) = build_polytope(&rays).unwrap();
        let integ = PolytopeIntegrator::new(&p, &fan);
        (p, fan, integ)
    }

    const DP1: [[i64; 2]; 4] = [[1, 1], [-1, 0], [-1, -1], [0, -1]];
    const DP2: [[i64; 2]; 5] = [[1, 0], [0, -1], [-1, 0], [0, 1], [1, 1]];
    const DP3: [[i64; 2]; 6] = [[1, 0], [1, 1], [0, 1], [-1, 0], [-1, -1], [0, -1]];

    #[test]
    fn futaki_values() {
        let (p, fan, _) = setup(&DP1);
        // 2!·4·(1/12 + 1/12) with the sign flipped by ξ = (−1,−1)
        assert_eq!(futaki_exact(&p, &fan, &to_q(&[-1, -1])), frac(4, 3));
        let (p, fan, _) = setup(&DP2);
        assert_eq!(futaki_exact(&p, &fan, &to_q(&[1, 1])), frac(4, 3));
        let (p, fan, _) = setup(&DP3);
        assert_eq!(futaki_exact(&p, &fan, &to_q(&[3, -7])), frac(0, 1));
    }

    #[test]
    fn tian_zhu_at_zero_is_futaki() {
        let (p, fan, integ) = setup(&DP1);
        for eta in [[1.0, 0.0], [1.0, 1.0], [2.0, -1.0]] {
            let a = tian_zhu_polytope(&integ, &[0.0, 0.0], &eta);
            assert!((a - futaki(&p, &fan, &eta)).abs() < 1e-13);
        }
        assert!(tian_zhu_polytope(&integ, &[0.1, 0.1], &[1.0, 1.0]) < 0.0);
    }

    #[test]
    fn soliton_on_dp2_matches_bisection() {
        let (p, _, integ) = setup(&DP2);
        let s = solve_soliton_vector(&p, &integ, 1e-12).unwrap();
        assert!(s.grad_norm <= 1e-10);
        assert!((s.xi_s[0] - s.xi_s[1]).abs() <= 1e-10);
        let g = |beta: f64| {
            let e = integ.integrals(&[beta, beta]);
            e.i1[0] + e.i1[1]
        };
        let (mut lo, mut hi) = (0.0, 5.0);
        assert!(g(lo) < 0.0 && g(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((s.xi_s[0] - 0.5 * (lo + hi)).abs() < 1e-9);
        assert!((s.b - 3.0 * s.xi_s[0]).abs() < 1e-12);
        assert!((s.threshold - (2.0 + s.b) / (3.0 + s.b)).abs() < 1e-15);
    }

    #[test]
    fn soliton_on_dp1_and_dp3() {
        let (p, _, integ) = setup(&DP1);
        let s = solve_soliton_vector(&p, &integ, 1e-12).unwrap();
        assert!(s.xi_s[0] < 0.0 && (s.xi_s[0] - s.xi_s[1]).abs() < 1e-10);
        let (p, _, integ) = setup(&DP3);
        let s = solve_soliton_vector(&p, &integ, 1e-12).unwrap();
        assert_eq!(s.iterations, 0);
        assert_eq!(s.b, 0.0);
        assert!((s.threshold - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn threshold_is_monotone() {
        let v: Vec<f64> = [0.0, 1.0, 3.0, 10.0].iter().map(|&b| threshold(2, b)).collect();
        assert!(v.windows(2).all(|w| w[0] < w[1]) && v[3] < 1.0);
    }

    #[test]
    fn direct_route_is_proportional() {
        let (p, _, integ) = setup(&DP1);
        let model = PotentialModel::from_polytope(&p);
        let opts = GridOptions::with_tol(1e-9);
        let v = tian_zhu_direct_vector(&model, &p, &integ, &[0.0, 0.0], &opts).unwrap();
        for eta in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
            let d: f64 = v.iter().zip(eta).map(|(a, b)| a * b).sum();
            let ratio = d / tian_zhu_polytope(&integ, &[0.0, 0.0], &eta);
            assert!((ratio - 0.5).abs() < 1e-6, "{ratio}");
        }
    }
}
