//! Property suites run by `torickems selftest`.
//!
//! Every check is deterministic: random samples come from fixed seeds.

use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::DMatrix;
use num_traits::{Signed, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::error::Error;
use crate::exact::{self, frac, Q};
use crate::fixture::{catalog, fixture, Fixture};
use crate::invariants::{
    functionals_ij, futaki_exact, solve_soliton_vector, threshold, tian_zhu_direct_vector, tian_zhu_polytope,
};
use crate::mis::{
    analyze, d_le0_contains, enumerate_candidates, ke_obstruction_search, krs_obstruction_search, verify_certificate,
    z_plus_contains, CandidateSource, Geometry, Mode,
};
use crate::polytope::{
    build_polytope, demazure_roots, face_lattice, self_intersections, subsets, weyl_group, Fan, ReflexivePolytope,
};
use crate::potentials::{
    flow_potential, theta_normalized, BumpPotential, ConstantPotential, PotentialModel,
    TranslationPotential,
};
use crate::quadrature::{adaptive_grid_integral, GridOptions, PolytopeIntegrator, Simplex, SignedLog};

pub const SUITES: [&str; 6] = ["polytope", "quadrature", "potentials", "invariants", "functionals", "mis"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

type Outcome = std::result::Result<String, String>;

struct Suite {
    name: &'static str,
    results: Vec<CheckResult>,
}

impl Suite {
    fn check(&mut self, name: &str, f: impl FnOnce() -> Outcome) {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        self.results.push(CheckResult { suite: self.name, name: name.to_string(), passed, detail });
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

struct Loaded {
    fixture: Fixture,
    polytope: ReflexivePolytope,
    fan: Fan,
}

fn loaded() -> Vec<Loaded> {
    catalog()
        .into_iter()
        .map(|f| {
            let (polytope, fan) = f.build().expect("catalog fixtures build");
            Loaded { fixture: f, polytope, fan }
        })
        .collect()
}

/// Runs the suites whose name starts with `filter` (all when `None`).
pub fn run(filter: Option<&str>) -> Vec<CheckResult> {
    let runners: [(&'static str, fn(&mut Suite)); 6] = [
        ("polytope", polytope_suite),
        ("quadrature", quadrature_suite),
        ("potentials", potentials_suite),
        ("invariants", invariants_suite),
        ("functionals", functionals_suite),
        ("mis", mis_suite),
    ];
    let mut out = Vec::new();
    for (name, f) in runners {
        if filter.is_some_and(|p| !name.starts_with(p)) {
            continue;
        }
        let mut suite = Suite { name, results: Vec::new() };
        f(&mut suite);
        out.extend(suite.results);
    }
    out
}

fn polytope_suite(s: &mut Suite) {
    for l in loaded() {
        let name = l.fixture.name.clone();
        s.check(&format!("duality_roundtrip[{name}]"), || {
            // facet normals recomputed from the vertices alone
            let verts = l.polytope.vertices();
            let n = l.polytope.dim();
            let mut normals: Vec<Vec<i64>> = Vec::new();
            for sub in subsets(verts.len(), n) {
                let a: Vec<Vec<Q>> = sub.iter().map(|&i| exact::to_q(&verts[i])).collect();
                let Some(b) = exact::solve(&a, &vec![exact::q(1); n]) else { continue };
                if verts.iter().all(|v| exact::dot_qi(&b, v) <= exact::q(1)) {
                    let b = exact::q_to_i64(&b).ok_or("non-integral facet normal")?;
                    if !normals.contains(&b) {
                        normals.push(b);
                    }
                }
            }
            let (again, _) = build_polytope(&normals).map_err(err)?;
            let (mut r1, mut r2) = (l.polytope.rays().to_vec(), normals);
            r1.sort();
            r2.sort();
            ensure(r1 == r2 && again == l.polytope, || format!("{r1:?} vs {r2:?}"))?;
            Ok(format!("{} facets", r1.len()))
        });
        s.check(&format!("pick[{name}]"), || {
            let pts = l.polytope.lattice_points();
            let boundary = pts.iter().filter(|p| l.polytope.rays().iter().any(|r| exact::dot_i(p, r) == 1)).count();
            let interior = pts.len() - boundary;
            let vol = l.polytope.exact_moments(&l.fan).volume;
            let pick = frac(2 * interior as i64 + boundary as i64 - 2, 2);
            ensure(vol == pick, || format!("vol {vol} vs Pick {pick}"))?;
            Ok(format!("vol {vol} = {interior} + {boundary}/2 − 1"))
        });
        s.check(&format!("weyl_group_axioms[{name}]"), || {
            let w = weyl_group(&l.polytope);
            for g in &w {
                ensure(g.det().abs() == 1, || format!("det {}", g.det()))?;
                ensure(w.contains(&g.inverse()), || "not closed under inverses".into())?;
                for h in &w {
                    ensure(w.contains(&g.compose(h)), || "not closed under composition".into())?;
                }
            }
            Ok(format!("order {}", w.len()))
        });
        s.check(&format!("weyl_maps_faces[{name}]"), || {
            let faces = face_lattice(&l.polytope, &l.fan);
            let d = self_intersections(&l.fan).map_err(err)?;
            for g in weyl_group(&l.polytope) {
                let perm = g.vertex_permutation(&l.polytope);
                for f in &faces {
                    let mut img: Vec<usize> = f.vertex_ids.iter().map(|&v| perm[v]).collect();
                    img.sort();
                    let h = faces.iter().find(|h| h.vertex_ids == img).ok_or("image is not a face")?;
                    ensure(h.dim == f.dim, || "dimension changed".into())?;
                    if f.dual_cone.len() == 1 {
                        ensure(d[f.dual_cone[0]] == d[h.dual_cone[0]], || format!("{} vs {}", f.id, h.id))?;
                    }
                }
            }
            Ok(format!("{} faces", faces.len()))
        });
        s.check(&format!("moments_invariant[{name}]"), || {
            let bary = l.polytope.exact_moments(&l.fan).barycenter;
            for g in weyl_group(&l.polytope) {
                ensure(g.apply_m_q(&bary) == bary, || format!("{:?} moves the barycenter", g.matrix))?;
            }
            Ok(format!("barycenter ({})", bary.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(", ")))
        });
    }
    s.check("cp2_demazure_roots", || {
        let f = fixture("cp2").map_err(err)?;
        let (p, fan) = f.build().map_err(err)?;
        let roots = demazure_roots(&p, &fan);
        ensure(roots.len() == 6, || format!("{} roots", roots.len()))?;
        for r in &roots {
            ensure(exact::dot_i(&r.m, &fan.rays[r.distinguished_ray]) == -1, || format!("{:?}", r.m))?;
        }
        Ok("6 roots".into())
    });
    s.check("perturbed_fixture_rejected", || match build_polytope(&[vec![1, 0], vec![0, -1], vec![-1, 0], vec![0, 1], vec![2, 1]]) {
        Err(Error::NotSmooth(m)) => Ok(m),
        other => Err(format!("expected NotSmooth, got {other:?}")),
    });
}

fn quadrature_suite(s: &mut Suite) {
    let mut rng = StdRng::seed_from_u64(7);
    for l in loaded() {
        let name = l.fixture.name.clone();
        let integ = PolytopeIntegrator::new(&l.polytope, &l.fan);
        let samples: Vec<Vec<f64>> = (0..10)
            .map(|_| {
                let v: [f64; 2] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let r = rng.gen_range(0.0..2.0) / (v[0] * v[0] + v[1] * v[1]).sqrt().max(1e-3);
                vec![v[0] * r, v[1] * r]
            })
            .collect();
        s.check(&format!("derivative[{name}]"), || {
            let h = 1e-5;
            let mut worst = 0.0f64;
            for xi in &samples {
                let e = integ.integrals(xi);
                for k in 0..2 {
                    let mut p = xi.clone();
                    let mut m = xi.clone();
                    p[k] += h;
                    m[k] -= h;
                    let fd = (integ.integrals(&p).i0 - integ.integrals(&m).i0) / (2.0 * h);
                    let rel = (fd - e.i1[k]).abs() / e.i1[k].abs().max(e.i0 * 1e-3);
                    worst = worst.max(rel);
                }
            }
            ensure(worst <= 1e-6, || format!("relative deviation {worst:e}"))?;
            Ok(format!("max relative deviation {worst:.1e}"))
        });
        s.check(&format!("second_moment_pd[{name}]"), || {
            for xi in &samples {
                let e = integ.integrals(xi);
                let m = DMatrix::from_fn(2, 2, |i, j| e.i2[i][j]);
                ensure((m.clone() - m.transpose()).norm() == 0.0, || "asymmetric".into())?;
                ensure(m.cholesky().is_some(), || format!("not PD at {xi:?}"))?;
            }
            Ok("symmetric positive definite".into())
        });
        s.check(&format!("subdivision[{name}]"), || {
            let mut worst = 0.0f64;
            for simplex in integ.simplices() {
                let v = simplex.vertices();
                let mid: Vec<Q> = v[0].iter().zip(&v[1]).map(|(a, b)| (a + b) / exact::q(2)).collect();
                let mut left = v.to_vec();
                left[1] = mid.clone();
                let mut right = v.to_vec();
                right[0] = mid;
                let (a, b) = (Simplex::new(left).map_err(err)?, Simplex::new(right).map_err(err)?);
                for xi in samples.iter().take(3) {
                    let whole = simplex.exp_integrals(xi).i0;
                    let parts = a.exp_integrals(xi).i0 + b.exp_integrals(xi).i0;
                    worst = worst.max((whole - parts).abs() / whole);
                }
            }
            ensure(worst <= 1e-12, || format!("relative deviation {worst:e}"))?;
            Ok(format!("max relative deviation {worst:.1e}"))
        });
    }
    for name in ["cp2", "dp1"] {
        s.check(&format!("change_of_variables[{name}]"), || {
            let (p, fan) = fixture(name).map_err(err)?.build().map_err(err)?;
            let model = PotentialModel::from_polytope(&p);
            let vol = exact::to_f64(&p.exact_moments(&fan).volume);
            let r = adaptive_grid_integral(2, |x| SignedLog::from_value(model.evaluate(x).hess.determinant()), &GridOptions::default())
                .map_err(err)?;
            ensure((r.value() - vol).abs() <= 1e-8, || format!("{} vs {vol}", r.value()))?;
            Ok(format!("∫ det Hess ũ = {:.12}", r.value()))
        });
    }
    s.check("theta_normalization[dp1]", || {
        let (p, fan) = fixture("dp1").map_err(err)?.build().map_err(err)?;
        let model = PotentialModel::from_polytope(&p);
        let integ = PolytopeIntegrator::new(&p, &fan);
        let theta = theta_normalized(&p, &integ, &[-1.0, -1.0]);
        let r = adaptive_grid_integral(
            2,
            |x| {
                let e = model.evaluate(x);
                SignedLog::from_value(theta.at_moment(&e.grad).exp() * e.hess.determinant())
            },
            &GridOptions::default(),
        )
        .map_err(err)?;
        ensure((r.value() - 4.0).abs() <= 1e-8, || format!("{}", r.value()))?;
        Ok(format!("∫ e^θ̃ det Hess ũ = {:.12}", r.value()))
    });
}

fn potentials_suite(s: &mut Suite) {
    let mut rng = StdRng::seed_from_u64(11);
    for l in loaded() {
        let name = l.fixture.name.clone();
        let model = PotentialModel::from_polytope(&l.polytope);
        let points: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)]).collect();
        s.check(&format!("gradient_fd[{name}]"), || {
            let h = 1e-5;
            let mut worst = 0.0f64;
            for x in &points {
                let e = model.evaluate(x);
                for k in 0..2 {
                    let mut p = x.clone();
                    let mut m = x.clone();
                    p[k] += h;
                    m[k] -= h;
                    worst = worst.max(((model.u(&p) - model.u(&m)) / (2.0 * h) - e.grad[k]).abs());
                    let (gp, gm) = (model.grad(&p), model.grad(&m));
                    for j in 0..2 {
                        worst = worst.max(((gp[j] - gm[j]) / (2.0 * h) - e.hess[(j, k)]).abs());
                    }
                }
            }
            ensure(worst <= 1e-6, || format!("deviation {worst:e}"))?;
            Ok(format!("max deviation {worst:.1e}"))
        });
        s.check(&format!("moment_image_and_convexity[{name}]"), || {
            for x in &points {
                let e = model.evaluate(x);
                ensure(l.polytope.boundary_margin(&e.grad) > 0.0, || format!("∇ũ{x:?} outside Δ"))?;
                ensure(e.hess.clone().cholesky().is_some(), || format!("Hess ũ not PD at {x:?}"))?;
            }
            Ok("100 points inside Δ, Hessian PD".into())
        });
        s.check(&format!("invert_roundtrip[{name}]"), || {
            let mut worst = 0.0f64;
            for x0 in points.iter().take(20) {
                let x = model.invert_moment(&l.polytope, &model.grad(&x0)).map_err(err)?;
                worst = worst.max(x.iter().zip(x0.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            }
            ensure(worst <= 1e-8, || format!("deviation {worst:e}"))?;
            Ok(format!("max deviation {worst:.1e}"))
        });
        s.check(&format!("gap_identity[{name}]"), || {
            for x in &points {
                let (_, gap) = model.ma_density(x).map_err(err)?;
                let e = model.evaluate(x);
                let r = gap + e.u + e.hess.determinant().ln();
                ensure(r.abs() <= 1e-12, || format!("{r:e} at {x:?}"))?;
            }
            Ok("gap + ũ + log det Hess ũ = 0".into())
        });
        s.check(&format!("ma_density_bounded[{name}]"), || {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for i in -30..=30 {
                for j in -30..=30 {
                    let (d, _) = model.ma_density(&[i as f64, j as f64]).map_err(err)?;
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
            }
            ensure(lo > 0.0 && hi.is_finite() && hi / lo < 1e3, || format!("density range [{lo:e}, {hi:e}]"))?;
            Ok(format!("density in [{lo:.4}, {hi:.4}]"))
        });
    }
    s.check("sup_normalization[dp2]", || {
        let (p, fan) = fixture("dp2").map_err(err)?.build().map_err(err)?;
        let integ = PolytopeIntegrator::new(&p, &fan);
        let xi = solve_soliton_vector(&p, &integ, 1e-12).map_err(err)?.xi_s;
        let model = PotentialModel::from_polytope(&p);
        let mut sups = Vec::new();
        for t in [5.0, 10.0, 20.0] {
            let sup = flow_potential(&model, &xi, t).grid_sup(50.0, 0.5);
            ensure((-1e-3..=1e-9).contains(&sup), || format!("sup ψ̃_{t} = {sup:e}"))?;
            sups.push(format!("{sup:.1e}"));
        }
        Ok(format!("grid sups {}", sups.join(", ")))
    });
}

fn invariants_suite(s: &mut Suite) {
    let mut rng = StdRng::seed_from_u64(13);
    let rq = |rng: &mut StdRng| frac(rng.gen_range(-9..=9), rng.gen_range(1..=5));
    for l in loaded() {
        let name = l.fixture.name.clone();
        let vecs: Vec<(Vec<Q>, Vec<Q>, Q, Q)> = (0..5)
            .map(|_| (vec![rq(&mut rng), rq(&mut rng)], vec![rq(&mut rng), rq(&mut rng)], rq(&mut rng), rq(&mut rng)))
            .collect();
        s.check(&format!("futaki_linearity[{name}]"), || {
            for (x, y, a, b) in &vecs {
                let comb: Vec<Q> = x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
                let lhs = futaki_exact(&l.polytope, &l.fan, &comb);
                let rhs = a * futaki_exact(&l.polytope, &l.fan, x) + b * futaki_exact(&l.polytope, &l.fan, y);
                ensure(lhs == rhs, || format!("{lhs} vs {rhs}"))?;
            }
            Ok("exact".into())
        });
        s.check(&format!("futaki_weyl[{name}]"), || {
            for g in weyl_group(&l.polytope) {
                for (x, _, _, _) in &vecs {
                    let fx = futaki_exact(&l.polytope, &l.fan, x);
                    ensure(futaki_exact(&l.polytope, &l.fan, &g.apply_n_q(x)) == fx, || format!("{:?}", g.matrix))?;
                }
            }
            Ok("F(gξ) = F(ξ)".into())
        });
        let integ = PolytopeIntegrator::new(&l.polytope, &l.fan);
        s.check(&format!("soliton[{name}]"), || {
            let sol = solve_soliton_vector(&l.polytope, &integ, 1e-12).map_err(err)?;
            let e = integ.integrals(&sol.xi_s);
            let norm = e.i1.iter().map(|v| v * v).sum::<f64>().sqrt();
            ensure(norm <= 1e-10 * e.i0, || format!("|I1| = {norm:e}"))?;
            let cov = e.weighted_covariance();
            ensure(DMatrix::from_fn(2, 2, |i, j| cov[i][j]).cholesky().is_some(), || "covariance not PD".into())?;
            for g in weyl_group(&l.polytope) {
                let gx = g.apply_n_f64(&sol.xi_s);
                let d = gx.iter().zip(&sol.xi_s).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                ensure(d <= 1e-9, || format!("g·ξ_s − ξ_s = {d:e}"))?;
            }
            ensure((sol.threshold - threshold(2, sol.b)).abs() < 1e-15, || "threshold".into())?;
            Ok(format!("ξ_s = ({:.10}, {:.10}), b = {:.6}", sol.xi_s[0], sol.xi_s[1], sol.b))
        });
        let bary_zero = l.polytope.exact_moments(&l.fan).barycenter.iter().all(|b| b.is_zero());
        if bary_zero {
            s.check(&format!("futaki_vanishes[{name}]"), || {
                for (x, _, _, _) in &vecs {
                    ensure(futaki_exact(&l.polytope, &l.fan, x).is_zero(), || "nonzero".into())?;
                }
                Ok("F ≡ 0".into())
            });
        }
    }
    s.check("threshold_monotone", || {
        let v: Vec<f64> = [0.0, 1.0, 3.0, 10.0, 1e6].iter().map(|&b| threshold(2, b)).collect();
        ensure(v.windows(2).all(|w| w[0] < w[1]) && v[4] < 1.0 && 1.0 - v[4] < 1e-5, || format!("{v:?}"))?;
        Ok(format!("{v:?}"))
    });
    for name in ["dp1", "dp2"] {
        s.check(&format!("route_agreement[{name}]"), || route_agreement(name));
    }
}

/// Ratios of the two Tian–Zhu routes over the standard test directions.
pub fn route_agreement(name: &str) -> Outcome {
    let (p, fan) = fixture(name).map_err(err)?.build().map_err(err)?;
    let model = PotentialModel::from_polytope(&p);
    let integ = PolytopeIntegrator::new(&p, &fan);
    let opts = GridOptions::with_tol(1e-9);
    let etas = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]];
    let mut detail = Vec::new();
    for xi in [[0.0, 0.0], [0.3, 0.3], [-0.3, -0.3]] {
        let v = tian_zhu_direct_vector(&model, &p, &integ, &xi, &opts).map_err(err)?;
        let pairs: Vec<(f64, f64)> = etas
            .iter()
            .map(|eta| (v[0] * eta[0] + v[1] * eta[1], tian_zhu_polytope(&integ, &xi, eta)))
            .collect();
        let scale = pairs.iter().map(|(_, b)| b.abs()).fold(0.0, f64::max);
        let ratios: Vec<f64> = pairs.iter().filter(|(_, b)| b.abs() > 1e-6 * scale).map(|(a, b)| a / b).collect();
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &r| (l.min(r), h.max(r)));
        ensure(lo > 0.0 && hi - lo <= 1e-4 * hi.abs(), || format!("ξ = {xi:?}: ratios {ratios:?}"))?;
        detail.push(format!("ξ={xi:?}: ratio {:.8}", ratios[0]));
    }
    let sol = solve_soliton_vector(&p, &integ, 1e-12).map_err(err)?;
    let v = tian_zhu_direct_vector(&model, &p, &integ, &sol.xi_s, &opts).map_err(err)?;
    for k in 0..2 {
        let mut eta = [0.0, 0.0];
        eta[k] = 1.0;
        let poly = tian_zhu_polytope(&integ, &sol.xi_s, &eta);
        ensure(v[k].abs() <= 1e-6 && poly.abs() <= 1e-6, || format!("at ξ_s: direct {:e}, polytope {poly:e}", v[k]))?;
    }
    detail.push(format!("at ξ_s: direct ({:.1e}, {:.1e})", v[0], v[1]));
    Ok(detail.join("; "))
}

fn functionals_suite(s: &mut Suite) {
    for name in ["dp1", "dp2"] {
        let (p, fan) = fixture(name).expect("catalog").build().expect("catalog builds");
        let model = PotentialModel::from_polytope(&p);
        let integ = PolytopeIntegrator::new(&p, &fan);
        let sol = solve_soliton_vector(&p, &integ, 1e-12).expect("soliton converges");
        let opts = GridOptions::with_tol(1e-6);
        for (label, xi, b) in [("0", vec![0.0, 0.0], 0.0), ("soliton", sol.xi_s.clone(), sol.b)] {
            s.check(&format!("translation_ordering[{name}, ξ={label}]"), || {
                let mut detail = Vec::new();
                for a in [[1.0, 1.0], [-1.0, 0.5], [0.5, -2.0]] {
                    let psi = TranslationPotential { model: model.clone(), a: a.to_vec() };
                    let f = functionals_ij(&model, &p, &integ, &xi, &psi, &opts).map_err(err)?;
                    let lower = f.i / (2.0 + 1.0 + b);
                    ensure(f.j >= 0.0 && f.j <= f.i && f.j >= lower, || format!("a = {a:?}: I = {}, J = {}", f.i, f.j))?;
                    detail.push(format!("a={a:?}: I={:.5} J={:.5}", f.i, f.j));
                }
                Ok(detail.join("; "))
            });
        }
        s.check(&format!("constant_and_bump[{name}]"), || {
            let c = functionals_ij(&model, &p, &integ, &[0.0, 0.0], &ConstantPotential(0.7), &opts).map_err(err)?;
            ensure(c.i.abs() <= 1e-8 && c.j.abs() <= 1e-8, || format!("constant: I = {:e}, J = {:e}", c.i, c.j))?;
            let f = functionals_ij(&model, &p, &integ, &[0.0, 0.0], &BumpPotential { eps: 0.1 }, &opts).map_err(err)?;
            ensure(f.j >= 0.0 && f.j <= f.i && f.j >= f.i / 3.0, || format!("bump: I = {}, J = {}", f.i, f.j))?;
            Ok(format!("constant I = {:.1e}; bump I = {:.3e}, J = {:.3e}", c.i, f.i, f.j))
        });
    }
    s.check("non_kaehler_rejected", || {
        let (p, fan) = fixture("dp1").map_err(err)?.build().map_err(err)?;
        let model = PotentialModel::from_polytope(&p);
        let integ = PolytopeIntegrator::new(&p, &fan);
        match functionals_ij(&model, &p, &integ, &[0.0, 0.0], &BumpPotential { eps: 5.0 }, &GridOptions::default()) {
            Err(Error::NotKaehler(m)) => Ok(m),
            other => Err(format!("expected NotKaehler, got {other:?}")),
        }
    });
}

fn mis_suite(s: &mut Suite) {
    for l in loaded() {
        let name = l.fixture.name.clone();
        let geometry = Geometry::new(l.polytope.clone(), l.fan.clone());
        s.check(&format!("certificate_soundness[{name}]"), || {
            let cands = enumerate_candidates(&geometry, Some(&l.fixture), CandidateSource::Auto).map_err(err)?;
            let mut count = 0;
            for c in &cands {
                for cert in [ke_obstruction_search(&geometry, c), krs_obstruction_search(&geometry, c)].into_iter().flatten() {
                    ensure(verify_certificate(&geometry, c, &cert), || format!("{:?} on {:?}", cert.vector, c.face_ids))?;
                    count += 1;
                }
            }
            Ok(format!("{count} certificates over {} candidates", cands.len()))
        });
        s.check(&format!("weyl_consistency[{name}]"), || {
            let mut count = 0;
            for f in &geometry.faces {
                let c = geometry.candidate(&[f.id.clone()]).map_err(err)?;
                let certs = [ke_obstruction_search(&geometry, &c), krs_obstruction_search(&geometry, &c)];
                for cert in certs.into_iter().flatten() {
                    for g in &geometry.weyl {
                        let perm = g.vertex_permutation(&geometry.polytope);
                        let mut img: Vec<usize> = f.vertex_ids.iter().map(|&v| perm[v]).collect();
                        img.sort();
                        let h = geometry.faces.iter().find(|h| h.vertex_ids == img).ok_or("no image face")?;
                        let gc = geometry.candidate(&[h.id.clone()]).map_err(err)?;
                        let mut gcert = cert.clone();
                        gcert.vector = g.apply_n(&cert.vector);
                        ensure(verify_certificate(&geometry, &gc, &gcert), || format!("{} → {}", f.id, h.id))?;
                        count += 1;
                    }
                }
            }
            Ok(format!("{count} transported certificates"))
        });
        s.check(&format!("containment_monotone[{name}]"), || {
            let cands = enumerate_candidates(&geometry, Some(&l.fixture), CandidateSource::Auto).map_err(err)?;
            let mut rng = StdRng::seed_from_u64(17);
            for c in &cands {
                for _ in 0..10 {
                    let xi = exact::to_q(&[rng.gen_range(-3..=3), rng.gen_range(-3..=3)]);
                    if !d_le0_contains(&geometry, c, &xi) {
                        continue;
                    }
                    for id in &c.face_ids {
                        let sub = geometry.candidate(&[id.clone()]).map_err(err)?;
                        ensure(d_le0_contains(&geometry, &sub, &xi), || format!("{id} ⊆ {:?}", c.face_ids))?;
                    }
                }
            }
            Ok(format!("{} candidates", cands.len()))
        });
        s.check(&format!("krs_scaling[{name}]"), || {
            let cands = enumerate_candidates(&geometry, Some(&l.fixture), CandidateSource::Auto).map_err(err)?;
            for c in &cands {
                if let Some(cert) = krs_obstruction_search(&geometry, c) {
                    for lambda in [2, 7] {
                        let eta: Vec<Q> = cert.vector.iter().map(|x| exact::q(lambda * x)).collect();
                        ensure(z_plus_contains(&geometry, c, &eta), || format!("{:?} scaled by {lambda}", cert.vector))?;
                    }
                    let neg: Vec<Q> = cert.vector.iter().map(|x| exact::q(-x)).collect();
                    ensure(!z_plus_contains(&geometry, c, &neg) || neg.iter().all(|x| x.is_zero()), || "sign".into())?;
                }
            }
            Ok("certificates scale".into())
        });
    }
    s.check("dp1_conclusions", || {
        let f = fixture("dp1").map_err(err)?;
        let ke = analyze(&f, Mode::KE, CandidateSource::Fixture).map_err(err)?;
        ensure(ke.conclusion == "KE-MIS = E", || ke.conclusion.clone())?;
        let krs = analyze(&f, Mode::KRS, CandidateSource::Fixture).map_err(err)?;
        ensure(krs.surviving().is_empty(), || krs.conclusion.clone())?;
        let barycenter_sign = l_bary_sign(&f);
        ensure(barycenter_sign, || "barycenter".into())?;
        Ok(format!("{}; {}", ke.conclusion, krs.conclusion))
    });
}

fn l_bary_sign(f: &Fixture) -> bool {
    f.build().map(|(p, fan)| p.exact_moments(&fan).barycenter.iter().all(|b| b.is_positive())).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_selects_suite() {
        let r = run(Some("polytope"));
        assert!(!r.is_empty() && r.iter().all(|c| c.suite == "polytope"));
        assert!(r.iter().all(|c| c.passed), "{:?}", r.iter().filter(|c| !c.passed).collect::<Vec<_>>());
        assert!(run(Some("nothing")).is_empty());
    }
}
