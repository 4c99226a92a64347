//! Reflexive polytopes, their normal fans, faces, lattice symmetries and
//! exact rational moments.
//!
//! A smooth toric Fano manifold is given by the primitive ray generators
//! `b_ρ` of its fan; the anticanonical polytope is
//! `Δ = {a ∈ M_ℝ : ⟨a, b_ρ⟩ ≤ 1 for all ρ}`. Everything in this module is
//! exact: lattice data are `i64`, derived rational data are [`Q`].

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, dot_i, dot_qi, q, Q};

/// Integer point of `M` or `N`; which one is clear from context.
pub type LatticeVector = Vec<i64>;
/// Exact point of `M_ℝ` or `N_ℝ`.
pub type RationalVector = Vec<Q>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReflexivePolytope {
    dim: usize,
    rays: Vec<LatticeVector>,
    vertices: Vec<LatticeVector>,
    lattice_points: Vec<LatticeVector>,
}

/// Smooth complete fan. `max_cones[k]` is the cone dual to vertex `k` of the polytope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fan {
    pub n: usize,
    pub rays: Vec<LatticeVector>,
    pub max_cones: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Face {
    pub id: String,
    pub dim: usize,
    pub vertex_ids: Vec<usize>,
    /// Ray indices of the cone `σ_F` whose orbit closure this face represents.
    pub dual_cone: Vec<usize>,
}

/// Element of `GL(n, ℤ)` preserving `Δ`, acting on `M` by `y ↦ A·y`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeSymmetry {
    pub matrix: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemazureRoot {
    pub m: LatticeVector,
    pub distinguished_ray: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Moments {
    pub volume: Q,
    pub barycenter: RationalVector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportRange {
    pub min: f64,
    pub max: f64,
    pub argmin: usize,
    pub argmax: usize,
}

fn fmt_vec(v: &[i64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(","))
}

/// Counterclockwise angular order starting at the lexicographically smallest ray.
fn cyclic_order(rays: &[LatticeVector]) -> Vec<LatticeVector> {
    let half = |v: &[i64]| if v[1] > 0 || (v[1] == 0 && v[0] > 0) { 0 } else { 1 };
    let mut sorted = rays.to_vec();
    sorted.sort_by(|a, b| {
        half(a).cmp(&half(b)).then_with(|| {
            let cross = a[0] * b[1] - a[1] * b[0];
            0.cmp(&cross)
        })
    });
    let start = sorted
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.cmp(b))
        .map(|(i, _)| i)
        .unwrap_or(0);
    sorted.rotate_left(start);
    sorted
}

fn validate_rays(rays: &[LatticeVector]) -> Result<usize> {
    let n = rays.first().map(|r| r.len()).unwrap_or(0);
    if n == 0 {
        return Err(Error::InvalidInput("need at least one nonempty ray".into()));
    }
    let mut seen = BTreeSet::new();
    for r in rays {
        if r.len() != n {
            return Err(Error::InvalidInput(format!("ray {} has dimension {}, expected {n}", fmt_vec(r), r.len())));
        }
        if exact::gcd_slice(r) != 1 {
            return Err(Error::InvalidInput(format!("ray {} is not primitive", fmt_vec(r))));
        }
        if !seen.insert(r.clone()) {
            return Err(Error::InvalidInput(format!("ray {} repeated", fmt_vec(r))));
        }
    }
    let rows: Vec<Vec<Q>> = rays.iter().map(|r| exact::to_q(r)).collect();
    if exact::rank(&rows) < n {
        return Err(Error::NotComplete(format!("rays span a proper subspace of dimension {}", exact::rank(&rows))));
    }
    Ok(n)
}

/// Builds `Δ` and its fan from primitive ray generators.
pub fn build_polytope(rays: &[LatticeVector]) -> Result<(ReflexivePolytope, Fan)> {
    let n = validate_rays(rays)?;
    let (rays, vertices, max_cones) = if n == 2 { vertices_planar(rays)? } else { vertices_general(rays, n)? };
    let polytope = ReflexivePolytope {
        dim: n,
        lattice_points: enumerate_lattice_points(&rays, &vertices),
        rays: rays.clone(),
        vertices,
    };
    let fan = Fan { n, rays, max_cones };
    Ok((polytope, fan))
}

/// Adjacent-ray line intersection around the cyclically ordered fan.
fn vertices_planar(rays: &[LatticeVector]) -> Result<(Vec<LatticeVector>, Vec<LatticeVector>, Vec<Vec<usize>>)> {
    let rays = cyclic_order(rays);
    let m = rays.len();
    let mut vertices = Vec::with_capacity(m);
    let mut cones = Vec::with_capacity(m);
    for i in 0..m {
        let j = (i + 1) % m;
        let (a, b) = (&rays[i], &rays[j]);
        let cross = a[0] * b[1] - a[1] * b[0];
        if m < 3 || cross <= 0 {
            return Err(Error::NotComplete(format!(
                "rays {} and {} leave a gap of angle ≥ π",
                fmt_vec(a),
                fmt_vec(b)
            )));
        }
        if cross != 1 {
            return Err(Error::NotSmooth(format!(
                "cone {{{}, {}}} has determinant {cross}",
                fmt_vec(a),
                fmt_vec(b)
            )));
        }
        // ⟨v, a⟩ = ⟨v, b⟩ = 1 with det [a; b] = 1
        let v = vec![b[1] - a[1], a[0] - b[0]];
        vertices.push(v);
        cones.push(vec![i, j]);
    }
    check_fano(&rays, &vertices, &cones)?;
    Ok((rays, vertices, cones))
}

fn check_fano(rays: &[LatticeVector], vertices: &[LatticeVector], cones: &[Vec<usize>]) -> Result<()> {
    for (v, cone) in vertices.iter().zip(cones) {
        for (k, r) in rays.iter().enumerate() {
            if cone.contains(&k) {
                continue;
            }
            let p = dot_i(v, r);
            if p >= 1 {
                return Err(Error::NotReflexive(format!(
                    "vertex {} of cone {:?} pairs to {p} with ray {}; the fan is not the normal fan of a Fano polytope",
                    fmt_vec(v),
                    cone.iter().map(|&c| fmt_vec(&rays[c])).collect::<Vec<_>>(),
                    fmt_vec(r)
                )));
            }
        }
    }
    Ok(())
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            if m - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    rec(0, m, k, &mut cur, &mut out);
    out
}

pub(crate) fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    combinations(m, k)
}

/// Dual description in arbitrary dimension: every vertex solves `n` tight facet equations.
pub(crate) fn vertices_general(
    rays: &[LatticeVector],
    n: usize,
) -> Result<(Vec<LatticeVector>, Vec<LatticeVector>, Vec<Vec<usize>>)> {
    let mut rays = rays.to_vec();
    rays.sort();
    let rows: Vec<Vec<Q>> = rays.iter().map(|r| exact::to_q(r)).collect();

    // bounded iff the recession cone {d : ⟨d, b_ρ⟩ ≤ 0} is {0}
    for sub in combinations(rays.len(), n - 1) {
        let eqs: Vec<Vec<Q>> = sub.iter().map(|&i| rows[i].clone()).collect();
        let ns = exact::nullspace(&eqs, n);
        if ns.len() != 1 {
            continue;
        }
        for sign in [1, -1] {
            let d: Vec<Q> = ns[0].iter().map(|x| x * q(sign)).collect();
            if rows.iter().all(|r| exact::dot_q(r, &d) <= Q::zero()) {
                return Err(Error::NotComplete(format!(
                    "polytope is unbounded in direction {}",
                    fmt_vec(&exact::primitive(&d))
                )));
            }
        }
    }

    let ones = vec![q(1); n];
    let mut found: BTreeMap<Vec<Q>, BTreeSet<usize>> = BTreeMap::new();
    for sub in combinations(rays.len(), n) {
        let a: Vec<Vec<Q>> = sub.iter().map(|&i| rows[i].clone()).collect();
        let Some(v) = exact::solve(&a, &ones) else { continue };
        if rows.iter().all(|r| exact::dot_q(r, &v) <= q(1)) {
            let tight: BTreeSet<usize> =
                (0..rays.len()).filter(|&i| exact::dot_q(&rows[i], &v) == q(1)).collect();
            found.insert(v, tight);
        }
    }
    let mut vertices = Vec::new();
    let mut cones = Vec::new();
    let mut used = BTreeSet::new();
    for (v, tight) in found {
        let Some(iv) = exact::q_to_i64(&v) else {
            return Err(Error::NotReflexive(format!("vertex {v:?} is not a lattice point")));
        };
        if tight.len() != n {
            return Err(Error::NotSmooth(format!(
                "vertex {} lies on {} facets; its cone is not simplicial",
                fmt_vec(&iv),
                tight.len()
            )));
        }
        let cone: Vec<usize> = tight.into_iter().collect();
        let m: Vec<Vec<i64>> = cone.iter().map(|&i| rays[i].clone()).collect();
        let det = exact::det_i(&m);
        if det.abs() != 1 {
            return Err(Error::NotSmooth(format!(
                "cone {:?} has determinant {det}",
                cone.iter().map(|&c| fmt_vec(&rays[c])).collect::<Vec<_>>()
            )));
        }
        used.extend(cone.iter().copied());
        vertices.push(iv);
        cones.push(cone);
    }
    if let Some(r) = (0..rays.len()).find(|i| !used.contains(i)) {
        return Err(Error::NotReflexive(format!("ray {} does not support a facet", fmt_vec(&rays[r]))));
    }
    Ok((rays, vertices, cones))
}

fn enumerate_lattice_points(rays: &[LatticeVector], vertices: &[LatticeVector]) -> Vec<LatticeVector> {
    let n = vertices[0].len();
    let lo: Vec<i64> = (0..n).map(|i| vertices.iter().map(|v| v[i]).min().unwrap()).collect();
    let hi: Vec<i64> = (0..n).map(|i| vertices.iter().map(|v| v[i]).max().unwrap()).collect();
    let mut out = Vec::new();
    let mut p = lo.clone();
    loop {
        if rays.iter().all(|r| dot_i(&p, r) <= 1) {
            out.push(p.clone());
        }
        let mut k = n;
        loop {
            if k == 0 {
                out.sort();
                return out;
            }
            k -= 1;
            if p[k] < hi[k] {
                p[k] += 1;
                break;
            }
            p[k] = lo[k];
        }
    }
}

impl ReflexivePolytope {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rays(&self) -> &[LatticeVector] {
        &self.rays
    }

    pub fn vertices(&self) -> &[LatticeVector] {
        &self.vertices
    }

    /// `L(Δ) = M ∩ Δ`, lexicographically sorted.
    pub fn lattice_points(&self) -> &[LatticeVector] {
        &self.lattice_points
    }

    pub fn ray_index(&self, ray: &[i64]) -> Option<usize> {
        self.rays.iter().position(|r| r == ray)
    }

    pub fn contains_q(&self, y: &[Q]) -> bool {
        self.rays.iter().all(|r| dot_qi(y, r) <= q(1))
    }

    /// Smallest facet slack `min_ρ (1 − ⟨y, b_ρ⟩)/|b_ρ|`; negative outside `Δ`.
    pub fn boundary_margin(&self, y: &[f64]) -> f64 {
        self.rays
            .iter()
            .map(|r| {
                let dot: f64 = r.iter().zip(y).map(|(&a, b)| a as f64 * b).sum();
                let norm = r.iter().map(|&a| (a * a) as f64).sum::<f64>().sqrt();
                (1.0 - dot) / norm
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Extrema of `⟨y, ξ⟩` over `Δ`, attained at vertices.
    pub fn support_range(&self, xi: &[f64]) -> SupportRange {
        let mut r = SupportRange { min: f64::INFINITY, max: f64::NEG_INFINITY, argmin: 0, argmax: 0 };
        for (k, v) in self.vertices.iter().enumerate() {
            let p: f64 = v.iter().zip(xi).map(|(&a, b)| a as f64 * b).sum();
            if p < r.min {
                r.min = p;
                r.argmin = k;
            }
            if p > r.max {
                r.max = p;
                r.argmax = k;
            }
        }
        if xi.iter().all(|&x| x == 0.0) {
            r.min = 0.0;
            r.max = 0.0;
        }
        r
    }

    /// Volume and barycenter by triangulating from vertex 0.
    pub fn exact_moments(&self, fan: &Fan) -> Moments {
        let mut volume = Q::zero();
        let mut first = vec![Q::zero(); self.dim];
        for simplex in self.triangulate(fan) {
            let pts: Vec<&LatticeVector> = simplex.iter().map(|&i| &self.vertices[i]).collect();
            let vol = simplex_volume(&pts);
            let k = q(pts.len() as i64);
            for (c, f) in first.iter_mut().enumerate() {
                let s: i64 = pts.iter().map(|p| p[c]).sum();
                *f += &vol * q(s) / &k;
            }
            volume += vol;
        }
        let barycenter = first.into_iter().map(|f| f / &volume).collect();
        Moments { volume, barycenter }
    }

    /// Full-dimensional simplices (as vertex-index lists) covering `Δ` without overlap.
    ///
    /// Recursive pulling triangulation: cone the first vertex of each face over the
    /// triangulations of its facets that avoid that vertex.
    pub fn triangulate(&self, fan: &Fan) -> Vec<Vec<usize>> {
        let mut faces: Vec<(usize, Vec<usize>)> =
            face_lattice(self, fan).into_iter().map(|f| (f.dim, f.vertex_ids)).collect();
        faces.push((self.dim, (0..self.vertices.len()).collect()));
        fn rec(face: &(usize, Vec<usize>), faces: &[(usize, Vec<usize>)]) -> Vec<Vec<usize>> {
            if face.0 == 0 {
                return vec![face.1.clone()];
            }
            let apex = face.1[0];
            let mut out = Vec::new();
            for sub in faces {
                if sub.0 + 1 == face.0 && !sub.1.contains(&apex) && sub.1.iter().all(|v| face.1.contains(v)) {
                    for mut s in rec(sub, faces) {
                        s.insert(0, apex);
                        out.push(s);
                    }
                }
            }
            out
        }
        let top = faces.last().unwrap().clone();
        rec(&top, &faces)
    }
}

pub(crate) fn simplex_volume(pts: &[&LatticeVector]) -> Q {
    let n = pts.len() - 1;
    let m: Vec<Vec<i64>> = (1..=n).map(|i| pts[i].iter().zip(pts[0]).map(|(a, b)| a - b).collect()).collect();
    let det = exact::det_i(&m).abs();
    let fact: i64 = (1..=n as i64).product();
    exact::frac(det, fact)
}

/// All proper faces with their dual cones, highest dimension first.
pub fn face_lattice(polytope: &ReflexivePolytope, fan: &Fan) -> Vec<Face> {
    let n = fan.n;
    let mut cones: BTreeSet<Vec<usize>> = BTreeSet::new();
    for mc in &fan.max_cones {
        for k in 1..=mc.len() {
            for sub in combinations(mc.len(), k) {
                cones.insert(sub.iter().map(|&i| mc[i]).collect());
            }
        }
    }
    let mut faces: Vec<Face> = cones
        .into_iter()
        .map(|cone| {
            let vertex_ids: Vec<usize> = fan
                .max_cones
                .iter()
                .enumerate()
                .filter(|(_, mc)| cone.iter().all(|c| mc.contains(c)))
                .map(|(k, _)| k)
                .collect();
            let dim = n - cone.len();
            let id = if dim == 0 {
                format!("V{}", vertex_ids[0])
            } else {
                let parts: Vec<String> = cone.iter().map(|&c| fmt_vec(&fan.rays[c])).collect();
                format!("F{}", parts.join("|"))
            };
            Face { id, dim, vertex_ids, dual_cone: cone }
        })
        .collect();
    faces.sort_by(|a, b| {
        b.dim.cmp(&a.dim).then_with(|| match a.dim {
            0 => a.vertex_ids.cmp(&b.vertex_ids),
            _ => a.dual_cone.cmp(&b.dual_cone),
        })
    });
    let _ = polytope;
    faces
}

/// Id of the facet dual to `ray`, e.g. `F(-1,-1)`.
pub fn facet_id(ray: &[i64]) -> String {
    format!("F{}", fmt_vec(ray))
}

impl LatticeSymmetry {
    pub fn identity(n: usize) -> Self {
        let matrix = (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect();
        LatticeSymmetry { matrix }
    }

    pub fn det(&self) -> i64 {
        exact::det_i(&self.matrix)
    }

    pub fn apply_m(&self, y: &[i64]) -> LatticeVector {
        self.matrix.iter().map(|row| dot_i(row, y)).collect()
    }

    pub fn apply_m_q(&self, y: &[Q]) -> RationalVector {
        self.matrix.iter().map(|row| dot_qi(y, row)).collect()
    }

    /// Contragredient action on `N`: `ξ ↦ A⁻ᵀ ξ`, so that `⟨Ay, A⁻ᵀξ⟩ = ⟨y, ξ⟩`.
    pub fn apply_n(&self, xi: &[i64]) -> LatticeVector {
        let inv_t = self.inverse().transpose();
        inv_t.apply_m(xi)
    }

    pub fn apply_n_q(&self, xi: &[Q]) -> RationalVector {
        self.inverse().transpose().apply_m_q(xi)
    }

    pub fn apply_n_f64(&self, xi: &[f64]) -> Vec<f64> {
        let inv_t = self.inverse().transpose();
        inv_t.matrix.iter().map(|row| row.iter().zip(xi).map(|(&a, b)| a as f64 * b).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.matrix.len();
        LatticeSymmetry { matrix: (0..n).map(|i| (0..n).map(|j| self.matrix[j][i]).collect()).collect() }
    }

    pub fn compose(&self, other: &Self) -> Self {
        let n = self.matrix.len();
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| self.matrix[i][k] * other.matrix[k][j]).sum()).collect())
            .collect();
        LatticeSymmetry { matrix }
    }

    /// Exact inverse; integral because `det = ±1`.
    pub fn inverse(&self) -> Self {
        let n = self.matrix.len();
        let a: Vec<Vec<Q>> = self.matrix.iter().map(|r| exact::to_q(r)).collect();
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let e: Vec<Q> = (0..n).map(|i| q(i64::from(i == j))).collect();
            let x = exact::solve(&a, &e).expect("lattice symmetry is invertible");
            cols.push(exact::q_to_i64(&x).expect("unimodular inverse is integral"));
        }
        LatticeSymmetry { matrix: (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect() }
    }

    /// `perm[k]` is the index of the image of vertex `k`.
    pub fn vertex_permutation(&self, polytope: &ReflexivePolytope) -> Vec<usize> {
        polytope
            .vertices()
            .iter()
            .map(|v| {
                let w = self.apply_m(v);
                polytope.vertices().iter().position(|u| *u == w).expect("symmetry permutes vertices")
            })
            .collect()
    }

    pub fn ray_permutation(&self, polytope: &ReflexivePolytope) -> Vec<usize> {
        polytope
            .rays()
            .iter()
            .map(|r| {
                let w = self.apply_n(r);
                polytope.ray_index(&w).expect("symmetry permutes rays")
            })
            .collect()
    }
}

/// All unimodular maps of `M` that permute the vertices of `Δ`.
///
/// Candidates are solved from assignments of a fixed vertex basis to vertex
/// tuples instead of scanning integer matrices.
pub fn weyl_group(polytope: &ReflexivePolytope) -> Vec<LatticeSymmetry> {
    let n = polytope.dim();
    let verts = polytope.vertices();
    let mut basis: Vec<usize> = Vec::new();
    for k in 0..verts.len() {
        let mut rows: Vec<Vec<Q>> = basis.iter().map(|&i| exact::to_q(&verts[i])).collect();
        rows.push(exact::to_q(&verts[k]));
        if exact::rank(&rows) == rows.len() {
            basis.push(k);
        }
        if basis.len() == n {
            break;
        }
    }
    // A·V = W  ⇔  Vᵀ·Aᵀ = Wᵀ, solved column by column of Aᵀ (i.e. row by row of A)
    let vt: Vec<Vec<Q>> = basis.iter().map(|&i| exact::to_q(&verts[i])).collect();
    let vertex_set: BTreeSet<&LatticeVector> = verts.iter().collect();
    let mut found = BTreeSet::new();
    let mut assign = vec![0usize; n];
    fn rec(
        pos: usize,
        assign: &mut Vec<usize>,
        verts: &[LatticeVector],
        vt: &[Vec<Q>],
        vertex_set: &BTreeSet<&LatticeVector>,
        found: &mut BTreeSet<LatticeSymmetry>,
    ) {
        let n = assign.len();
        if pos == n {
            let mut matrix = Vec::with_capacity(n);
            for row in 0..n {
                let rhs: Vec<Q> = assign.iter().map(|&a| q(verts[a][row])).collect();
                let Some(x) = exact::solve(vt, &rhs) else { return };
                let Some(xi) = exact::q_to_i64(&x) else { return };
                matrix.push(xi);
            }
            let g = LatticeSymmetry { matrix };
            if g.det().abs() != 1 {
                return;
            }
            if verts.iter().all(|v| vertex_set.contains(&g.apply_m(v))) {
                found.insert(g);
            }
            return;
        }
        for k in 0..verts.len() {
            if assign[..pos].contains(&k) {
                continue;
            }
            assign[pos] = k;
            rec(pos + 1, assign, verts, vt, vertex_set, found);
        }
    }
    rec(0, &mut assign, verts, &vt, &vertex_set, &mut found);
    let id = LatticeSymmetry::identity(n);
    let mut out: Vec<LatticeSymmetry> = found.into_iter().filter(|g| *g != id).collect();
    out.insert(0, id);
    out
}

/// Lattice points `m ∈ M` with exactly one ray pairing to `−1` and the others `≥ 0`.
///
/// Such `m` satisfy `⟨−m, b_ρ⟩ ≤ 1`, so the search runs over `−L(Δ)`.
pub fn demazure_roots(polytope: &ReflexivePolytope, fan: &Fan) -> Vec<DemazureRoot> {
    let mut roots = Vec::new();
    for p in polytope.lattice_points() {
        let m: LatticeVector = p.iter().map(|x| -x).collect();
        let pairings: Vec<i64> = fan.rays.iter().map(|r| dot_i(&m, r)).collect();
        let neg: Vec<usize> = (0..pairings.len()).filter(|&i| pairings[i] < 0).collect();
        if neg.len() == 1 && pairings[neg[0]] == -1 {
            roots.push(DemazureRoot { m, distinguished_ray: neg[0] });
        }
    }
    roots.sort_by(|a, b| a.distinguished_ray.cmp(&b.distinguished_ray).then_with(|| a.m.cmp(&b.m)));
    roots
}

/// Self-intersection numbers of the torus-invariant curves of a toric surface,
/// indexed like `fan.rays` (cyclic order): `b_prev + b_next = −d·b_ρ`.
pub fn self_intersections(fan: &Fan) -> Result<Vec<i64>> {
    if fan.n != 2 {
        return Err(Error::DimensionUnsupported(fan.n));
    }
    let m = fan.rays.len();
    (0..m)
        .map(|i| {
            let prev = &fan.rays[(i + m - 1) % m];
            let next = &fan.rays[(i + 1) % m];
            let b = &fan.rays[i];
            let s = [prev[0] + next[0], prev[1] + next[1]];
            let c = if b[0] != 0 { 0 } else { 1 };
            let d = -s[c] / b[c];
            if s[0] != -d * b[0] || s[1] != -d * b[1] {
                return Err(Error::NotSmooth(format!("ray {} has no integral relation to its neighbours", fmt_vec(b))));
            }
            Ok(d)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::frac;

    fn dp1() -> (ReflexivePolytope, Fan) {
        build_polytope(&[vec![1, 1], vec![-1, 0], vec![-1, -1], vec![0, -1]]).unwrap()
    }
    fn dp2() -> (ReflexivePolytope, Fan) {
        build_polytope(&[vec![1, 0], vec![0, -1], vec![-1, 0], vec![0, 1], vec![1, 1]]).unwrap()
    }
    fn cp2() -> (ReflexivePolytope, Fan) {
        build_polytope(&[vec![1, 0], vec![0, 1], vec![-1, -1]]).unwrap()
    }

    fn vset(p: &ReflexivePolytope) -> BTreeSet<LatticeVector> {
        p.vertices().iter().cloned().collect()
    }

    #[test]
    fn vertices_of_fixtures() {
        let want: BTreeSet<_> = [vec![2, -1], vec![-1, 2], vec![-1, 0], vec![0, -1]].into_iter().collect();
        assert_eq!(vset(&dp1().0), want);
        let want: BTreeSet<_> =
            [vec![1, 0], vec![1, -1], vec![-1, -1], vec![-1, 1], vec![0, 1]].into_iter().collect();
        assert_eq!(vset(&dp2().0), want);
        let want: BTreeSet<_> = [vec![1, 1], vec![1, -2], vec![-2, 1]].into_iter().collect();
        assert_eq!(vset(&cp2().0), want);
    }

    #[test]
    fn ray_order_is_ccw_from_lex_smallest() {
        let (p, _) = dp1();
        assert_eq!(p.rays(), &[vec![-1, -1], vec![0, -1], vec![1, 1], vec![-1, 0]]);
    }

    #[test]
    fn general_dimension_path_agrees_in_the_plane() {
        for rays in [
            vec![vec![1, 1], vec![-1, 0], vec![-1, -1], vec![0, -1]],
            vec![vec![1, 0], vec![0, -1], vec![-1, 0], vec![0, 1], vec![1, 1]],
            vec![vec![1, 0], vec![0, 1], vec![-1, -1]],
        ] {
            let (p, _) = build_polytope(&rays).unwrap();
            let (_, verts, cones) = vertices_general(&rays, 2).unwrap();
            let a: BTreeSet<_> = verts.into_iter().collect();
            assert_eq!(a, vset(&p));
            assert_eq!(cones.len(), p.vertices().len());
        }
    }

    #[test]
    fn three_dimensional_projective_space() {
        let rays = vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1], vec![-1, -1, -1]];
        let (p, fan) = build_polytope(&rays).unwrap();
        assert_eq!(p.vertices().len(), 4);
        assert_eq!(p.lattice_points().len(), 35);
        let m = p.exact_moments(&fan);
        assert_eq!(m.volume, frac(32, 3));
        assert!(m.barycenter.iter().all(|x| x.is_zero()));
        let faces = face_lattice(&p, &fan);
        assert_eq!(faces.iter().filter(|f| f.dim == 1).count(), 6);
        assert_eq!(weyl_group(&p).len(), 24);
    }

    #[test]
    fn lattice_point_counts() {
        assert_eq!(dp1().0.lattice_points().len(), 9);
        assert_eq!(dp2().0.lattice_points().len(), 8);
        assert_eq!(cp2().0.lattice_points().len(), 10);
        assert!(dp1().0.lattice_points().contains(&vec![0, 0]));
    }

    #[test]
    fn errors_name_the_violation() {
        let e = build_polytope(&[vec![1, 0], vec![0, -1], vec![-1, 0], vec![0, 1], vec![2, 1]]).unwrap_err();
        assert!(matches!(e, Error::NotSmooth(ref s) if s.contains("(2,1)")), "{e}");
        let e = build_polytope(&[vec![1, 0], vec![0, 1]]).unwrap_err();
        assert!(matches!(e, Error::NotComplete(_)));
        let e = build_polytope(&[vec![1, 0], vec![0, 1], vec![-1, 0]]).unwrap_err();
        assert!(matches!(e, Error::NotComplete(_)), "{e}");
        // Hirzebruch F2 is smooth and complete but not Fano
        let e = build_polytope(&[vec![1, 0], vec![0, 1], vec![-1, 2], vec![0, -1]]).unwrap_err();
        assert!(matches!(e, Error::NotReflexive(_)), "{e}");
        let e = build_polytope(&[vec![2, 0], vec![0, 1], vec![-1, -1]]).unwrap_err();
        assert!(matches!(e, Error::InvalidInput(_)));
    }

    #[test]
    fn faces_and_dual_cones() {
        let (p, fan) = dp1();
        let faces = face_lattice(&p, &fan);
        assert_eq!(faces.iter().filter(|f| f.dim == 1).count(), 4);
        assert_eq!(faces.iter().filter(|f| f.dim == 0).count(), 4);
        let e = faces.iter().find(|f| f.id == "F(-1,-1)").unwrap();
        let vs: BTreeSet<_> = e.vertex_ids.iter().map(|&k| p.vertices()[k].clone()).collect();
        assert_eq!(vs, [vec![-1, 0], vec![0, -1]].into_iter().collect());
        for f in &faces {
            assert_eq!(f.dim + f.dual_cone.len(), 2);
            for &v in &f.vertex_ids {
                for &c in &f.dual_cone {
                    assert_eq!(dot_i(&p.vertices()[v], &fan.rays[c]), 1);
                }
            }
        }

        let (p, fan) = dp2();
        let faces = face_lattice(&p, &fan);
        assert_eq!(faces.len(), 10);
        let f = faces.iter().find(|f| f.id == "F(0,1)").unwrap();
        let vs: BTreeSet<_> = f.vertex_ids.iter().map(|&k| p.vertices()[k].clone()).collect();
        assert_eq!(vs, [vec![-1, 1], vec![0, 1]].into_iter().collect());
    }

    #[test]
    fn weyl_orders() {
        assert_eq!(weyl_group(&dp1().0).len(), 2);
        assert_eq!(weyl_group(&dp2().0).len(), 2);
        assert_eq!(weyl_group(&cp2().0).len(), 6);
        let swap = LatticeSymmetry { matrix: vec![vec![0, 1], vec![1, 0]] };
        assert!(weyl_group(&dp1().0).contains(&swap));
    }

    #[test]
    fn weyl_group_is_closed() {
        let g = weyl_group(&cp2().0);
        for a in &g {
            assert!(g.contains(&a.inverse()));
            for b in &g {
                assert!(g.contains(&a.compose(b)));
            }
        }
    }

    #[test]
    fn roots() {
        let (p, fan) = cp2();
        let r = demazure_roots(&p, &fan);
        assert_eq!(r.len(), 6);
        for root in &r {
            assert_eq!(dot_i(&root.m, &fan.rays[root.distinguished_ray]), -1);
        }
        let (p, fan) = dp1();
        let got: BTreeSet<_> = demazure_roots(&p, &fan).into_iter().map(|r| r.m).collect();
        let want: BTreeSet<_> = [vec![-1, 0], vec![0, -1], vec![1, -1], vec![-1, 1]].into_iter().collect();
        assert_eq!(got, want);
        let (p, fan) = dp2();
        let got: BTreeSet<_> = demazure_roots(&p, &fan).into_iter().map(|r| r.m).collect();
        assert_eq!(got, [vec![1, 0], vec![0, 1]].into_iter().collect());
    }

    #[test]
    fn self_intersection_numbers() {
        let (_, fan) = dp2();
        let d = self_intersections(&fan).unwrap();
        for (r, d) in fan.rays.iter().zip(&d) {
            let want = if [vec![1, 0], vec![1, 1], vec![0, 1]].contains(r) { -1 } else { 0 };
            assert_eq!(*d, want, "ray {r:?}");
        }
        let (_, fan) = dp1();
        let d = self_intersections(&fan).unwrap();
        let e = fan.rays.iter().position(|r| *r == vec![-1, -1]).unwrap();
        assert_eq!(d[e], -1);
        let (_, fan) = cp2();
        assert!(self_intersections(&fan).unwrap().iter().all(|&d| d == 1));
        let (_, fan) = build_polytope(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1], vec![-1, -1, -1]]).unwrap();
        assert_eq!(self_intersections(&fan), Err(Error::DimensionUnsupported(3)));
    }

    #[test]
    fn moments() {
        let (p, fan) = dp1();
        let m = p.exact_moments(&fan);
        assert_eq!(m.volume, q(4));
        assert_eq!(m.barycenter, vec![frac(1, 12), frac(1, 12)]);
        let (p, fan) = dp2();
        let m = p.exact_moments(&fan);
        assert_eq!(m.volume, frac(7, 2));
        assert_eq!(m.barycenter, vec![frac(-2, 21), frac(-2, 21)]);
        let (p, fan) =
            build_polytope(&[vec![1, 0], vec![0, 1], vec![-1, 0], vec![0, -1], vec![1, 1], vec![-1, -1]]).unwrap();
        let m = p.exact_moments(&fan);
        assert!(m.barycenter.iter().all(|x| x.is_zero()));
    }

    #[test]
    fn support_ranges() {
        let (p, _) = dp2();
        let r = p.support_range(&[1.0, 1.0]);
        assert_eq!((r.min, r.max), (-2.0, 1.0));
        let (p, _) = dp1();
        let r = p.support_range(&[-1.0, -1.0]);
        assert_eq!((r.min, r.max), (-1.0, 1.0));
        let r = p.support_range(&[0.0, 0.0]);
        assert_eq!((r.min, r.max), (0.0, 0.0));
    }
}
