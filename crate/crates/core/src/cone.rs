//! Exact polyhedral cones over ℚ: Fourier–Motzkin feasibility and extreme rays
//! of `{x : M x ≤ 0}`.

use num_traits::{Signed, Zero};

use crate::exact::{self, Q};
use crate::polytope::subsets;

/// Decides whether `{x : A x ≤ b}` is nonempty by eliminating one variable at a time.
pub fn fm_feasible(a: &[Vec<Q>], b: &[Q]) -> bool {
    let mut rows: Vec<(Vec<Q>, Q)> = a.iter().cloned().zip(b.iter().cloned()).collect();
    let n = a.first().map(|r| r.len()).unwrap_or(0);
    for k in 0..n {
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for (row, rhs) in rows {
            if row[k].is_positive() {
                pos.push((row, rhs));
            } else if row[k].is_negative() {
                neg.push((row, rhs));
            } else {
                rest.push((row, rhs));
            }
        }
        for (p, pb) in &pos {
            for (m, mb) in &neg {
                // scale so the x_k coefficients are +1 and −1, then add
                let sp = p[k].recip();
                let sm = -m[k].recip();
                let row: Vec<Q> = p.iter().zip(m).map(|(x, y)| x * &sp + y * &sm).collect();
                rest.push((row, pb * &sp + mb * &sm));
            }
        }
        rest.sort();
        rest.dedup();
        rows = rest;
    }
    rows.iter().all(|(_, rhs)| !rhs.is_negative())
}

/// Generators of `{x ∈ ℚⁿ : M x ≤ 0}`: primitive extreme rays of its pointed
/// part and a basis of its lineality space, both in deterministic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConeGenerators {
    pub rays: Vec<Vec<i64>>,
    pub lineality: Vec<Vec<i64>>,
}

pub fn cone_generators(m: &[Vec<Q>], n: usize) -> ConeGenerators {
    let lineality: Vec<Vec<i64>> = exact::nullspace(m, n).iter().map(|v| exact::primitive(v)).collect();
    let lin_rows: Vec<Vec<Q>> = lineality.iter().map(|v| exact::to_q(v)).collect();
    let d = n - lineality.len();
    let mut rays: Vec<Vec<i64>> = Vec::new();
    if d > 0 {
        for sub in subsets(m.len(), d - 1) {
            let mut eqs = lin_rows.clone();
            eqs.extend(sub.iter().map(|&i| m[i].clone()));
            let ns = exact::nullspace(&eqs, n);
            if ns.len() != 1 {
                continue;
            }
            for sign in [1i64, -1] {
                let r: Vec<Q> = ns[0].iter().map(|x| x * exact::q(sign)).collect();
                if m.iter().all(|row| !exact::dot_q(row, &r).is_positive()) {
                    rays.push(exact::primitive(&r));
                }
            }
        }
    }
    rays.sort();
    rays.dedup();
    ConeGenerators { rays, lineality }
}

/// A point `x` with `M x ≤ 0` and `⟨c, x⟩ < 0`, if one exists.
///
/// Feasibility is decided exactly on `{M x ≤ 0, ⟨c, x⟩ ≤ −1}`; the returned
/// point is the primitive sum of all generators pairing negatively with `c`.
pub fn negative_point(m: &[Vec<Q>], c: &[Q], n: usize) -> Option<Vec<i64>> {
    let mut a = m.to_vec();
    a.push(c.to_vec());
    let mut b = vec![Q::zero(); m.len()];
    b.push(exact::q(-1));
    if !fm_feasible(&a, &b) {
        return None;
    }
    let g = cone_generators(m, n);
    let mut sum = vec![Q::zero(); n];
    let mut add = |v: &[i64], sign: i64| {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += exact::q(sign * x);
        }
    };
    for r in &g.rays {
        if exact::dot_qi(c, r).is_negative() {
            add(r, 1);
        }
    }
    for l in &g.lineality {
        let p = exact::dot_qi(c, l);
        if !p.is_zero() {
            add(l, if p.is_negative() { 1 } else { -1 });
        }
    }
    Some(exact::primitive(&sum))
}

/// A point `x` with `M x < 0` row-wise, if one exists.
pub fn strictly_negative_point(m: &[Vec<Q>], n: usize) -> Option<Vec<i64>> {
    let b = vec![exact::q(-1); m.len()];
    if m.is_empty() || !fm_feasible(m, &b) {
        return None;
    }
    // the interior of the cone is nonempty, and the sum of the extreme rays
    // of its pointed part lies there
    let g = cone_generators(m, n);
    let mut sum = vec![Q::zero(); n];
    for r in &g.rays {
        for (s, x) in sum.iter_mut().zip(r) {
            *s += exact::q(*x);
        }
    }
    let v = exact::primitive(&sum);
    debug_assert!(m.iter().all(|row| exact::dot_qi(row, &v).is_negative()));
    Some(v)
}
