//! Integration backends.
//!
//! Two unrelated routes live here on purpose:
//!
//! * closed-form integrals of `e^{⟨ξ,y⟩}` (and its first two moments) over a
//!   triangulated polytope, via divided differences of `exp`;
//! * a product-grid trapezoid integrator over `[-R, R]ⁿ ⊂ N_ℝ` that accumulates
//!   in log space, used for the integrals written in logarithmic coordinates.
//!
//! Quantities computed one way are checked against the other in tests.

use crate::error::{Error, Result};
use crate::exact::{self, Q};
use crate::polytope::{Fan, RationalVector, ReflexivePolytope};

/// Exponent spread below which a cluster of divided-difference nodes is
/// evaluated by its Taylor series instead of the recursive quotient.
const CLUSTER_SPREAD: f64 = 1.0;
const SERIES_MIN_TERMS: usize = 12;
const SERIES_MAX_TERMS: usize = 80;

/// Divided difference `exp[t_0, …, t_k]` with arbitrary (possibly repeated) nodes.
pub fn exp_divided_difference(t: &[f64]) -> f64 {
    let mut ts = t.to_vec();
    ts.sort_by(|a, b| a.total_cmp(b));
    let shift = ts[ts.len() - 1];
    for x in ts.iter_mut() {
        *x -= shift;
    }
    shifted_divided_difference(&ts) * shift.exp()
}

/// Same as [`exp_divided_difference`] but for nodes already sorted and shifted.
fn shifted_divided_difference(ts: &[f64]) -> f64 {
    let k = ts.len() - 1;
    if ts[k] - ts[0] < CLUSTER_SPREAD {
        return cluster_series(ts);
    }
    let mut d: Vec<f64> = ts.iter().map(|x| x.exp()).collect();
    for order in 1..=k {
        for i in 0..=k - order {
            let j = i + order;
            let gap = ts[j] - ts[i];
            d[i] = if gap < CLUSTER_SPREAD { cluster_series(&ts[i..=j]) } else { (d[i + 1] - d[i]) / gap };
        }
    }
    d[0]
}

/// `exp[t_0..t_k] = e^c Σ_m h_m(t − c) / (k+m)!` with `h_m` the complete
/// homogeneous symmetric polynomials of the offsets from the midpoint `c`.
fn cluster_series(ts: &[f64]) -> f64 {
    let k = ts.len() - 1;
    let c = 0.5 * (ts[0] + ts[k]);
    let deltas: Vec<f64> = ts.iter().map(|x| x - c).collect();
    // h[m] accumulated one variable at a time
    let mut h = vec![0.0; SERIES_MAX_TERMS];
    h[0] = 1.0;
    for &x in &deltas {
        for m in 1..SERIES_MAX_TERMS {
            h[m] += x * h[m - 1];
        }
    }
    let mut fact: f64 = (1..=k).map(|i| i as f64).product();
    let mut sum = 0.0;
    for (m, hm) in h.iter().enumerate() {
        if m > 0 {
            fact *= (k + m) as f64;
        }
        let term = hm / fact;
        sum += term;
        if m >= SERIES_MIN_TERMS && term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum * c.exp()
}

/// Nondegenerate simplex with exact vertices.
#[derive(Debug, Clone)]
pub struct Simplex {
    vertices: Vec<RationalVector>,
    coords: Vec<Vec<f64>>,
    /// `n!·vol`, i.e. `|det(v_i − v_0)|`.
    scaled_volume: f64,
}

/// `∫ e^{⟨ξ,y⟩}dy`, `∫ y e^{⟨ξ,y⟩}dy` and `∫ y yᵀ e^{⟨ξ,y⟩}dy`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpIntegrals {
    pub i0: f64,
    pub i1: Vec<f64>,
    pub i2: Vec<Vec<f64>>,
}

impl ExpIntegrals {
    fn zeros(n: usize) -> Self {
        ExpIntegrals { i0: 0.0, i1: vec![0.0; n], i2: vec![vec![0.0; n]; n] }
    }

    fn add(&mut self, other: &ExpIntegrals) {
        self.i0 += other.i0;
        for (a, b) in self.i1.iter_mut().zip(&other.i1) {
            *a += b;
        }
        for (ra, rb) in self.i2.iter_mut().zip(&other.i2) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
    }

    /// `∫ y e^{⟨ξ,y⟩} / ∫ e^{⟨ξ,y⟩}`.
    pub fn weighted_mean(&self) -> Vec<f64> {
        self.i1.iter().map(|x| x / self.i0).collect()
    }

    /// Covariance of `y` under the density `e^{⟨ξ,y⟩}/I0` on `Δ`.
    pub fn weighted_covariance(&self) -> Vec<Vec<f64>> {
        let mean = self.weighted_mean();
        let n = mean.len();
        (0..n).map(|a| (0..n).map(|b| self.i2[a][b] / self.i0 - mean[a] * mean[b]).collect()).collect()
    }
}

impl Simplex {
    pub fn new(vertices: Vec<RationalVector>) -> Result<Self> {
        let n = vertices.len().saturating_sub(1);
        if n == 0 || vertices.iter().any(|v| v.len() != n) {
            return Err(Error::InvalidInput(format!("a simplex in dimension {n} needs {} vertices", n + 1)));
        }
        let m: Vec<Vec<Q>> = (1..=n).map(|i| vertices[i].iter().zip(&vertices[0]).map(|(a, b)| a - b).collect()).collect();
        let det = exact::det_q(&m);
        if det == Q::from_integer(0.into()) {
            return Err(Error::InvalidInput("degenerate simplex".into()));
        }
        let scaled_volume = exact::to_f64(&exact::abs_q(&det));
        let coords = vertices.iter().map(|v| v.iter().map(exact::to_f64).collect()).collect();
        Ok(Simplex { vertices, coords, scaled_volume })
    }

    pub fn vertices(&self) -> &[RationalVector] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    /// Closed form: `∫_S e^{⟨ξ,y⟩} = n!·vol(S)·exp[t_0..t_n]` with `t_i = ⟨ξ, v_i⟩`;
    /// moments follow by differentiating in the nodes, which repeats them.
    pub fn exp_integrals(&self, xi: &[f64]) -> ExpIntegrals {
        let n = self.dim();
        let t: Vec<f64> = self.coords.iter().map(|v| v.iter().zip(xi).map(|(a, b)| a * b).sum()).collect();
        let mut out = ExpIntegrals::zeros(n);
        out.i0 = self.scaled_volume * exp_divided_difference(&t);

        let mut nodes = t.clone();
        let first: Vec<f64> = (0..=n)
            .map(|i| {
                nodes.push(t[i]);
                let v = exp_divided_difference(&nodes);
                nodes.pop();
                v
            })
            .collect();
        for (i, v) in self.coords.iter().enumerate() {
            for k in 0..n {
                out.i1[k] += self.scaled_volume * v[k] * first[i];
            }
        }

        for i in 0..=n {
            for j in i..=n {
                nodes.push(t[i]);
                nodes.push(t[j]);
                let dd = exp_divided_difference(&nodes);
                nodes.truncate(n + 1);
                // ∂²/∂t_i² of exp[t] is 2·exp[t, t_i, t_i]; off-diagonal pairs appear twice in Σ_{i,j}
                let w = 2.0 * self.scaled_volume * dd;
                let (vi, vj) = (&self.coords[i], &self.coords[j]);
                for a in 0..n {
                    for b in 0..n {
                        out.i2[a][b] += if i == j { w * vi[a] * vj[b] } else { 0.5 * w * (vi[a] * vj[b] + vj[a] * vi[b]) };
                    }
                }
            }
        }
        out
    }
}

/// Triangulated polytope ready for repeated exponential-integral evaluation.
#[derive(Debug, Clone)]
pub struct PolytopeIntegrator {
    simplices: Vec<Simplex>,
    n: usize,
}

impl PolytopeIntegrator {
    pub fn new(polytope: &ReflexivePolytope, fan: &Fan) -> Self {
        let simplices = polytope
            .triangulate(fan)
            .into_iter()
            .map(|s| {
                let verts = s.iter().map(|&i| exact::to_q(&polytope.vertices()[i])).collect();
                Simplex::new(verts).expect("triangulation simplices are full-dimensional")
            })
            .collect();
        PolytopeIntegrator { simplices, n: polytope.dim() }
    }

    pub fn from_simplices(simplices: Vec<Simplex>) -> Self {
        let n = simplices.first().map(|s| s.dim()).unwrap_or(0);
        PolytopeIntegrator { simplices, n }
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn integrals(&self, xi: &[f64]) -> ExpIntegrals {
        let mut acc = ExpIntegrals::zeros(self.n);
        for s in &self.simplices {
            acc.add(&s.exp_integrals(xi));
        }
        acc
    }
}

/// `(I0, I1, I2)` for `e^{⟨ξ,y⟩}` over `Δ`.
pub fn polytope_exp_integrals(polytope: &ReflexivePolytope, fan: &Fan, xi: &[f64]) -> ExpIntegrals {
    PolytopeIntegrator::new(polytope, fan).integrals(xi)
}

/// A real number carried as `sign · e^{log_abs}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub sign: f64,
    pub log_abs: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog { sign: 0.0, log_abs: f64::NEG_INFINITY };

    pub fn from_value(v: f64) -> Self {
        if v == 0.0 {
            Self::ZERO
        } else {
            SignedLog { sign: v.signum(), log_abs: v.abs().ln() }
        }
    }

    pub fn from_log(log_abs: f64) -> Self {
        SignedLog { sign: 1.0, log_abs }
    }

    pub fn value(&self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.log_abs.exp()
        }
    }
}

/// Streaming `log Σ e^{l_i}` with a running maximum.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    const EMPTY: LogSum = LogSum { max: f64::NEG_INFINITY, scaled: 0.0 };

    fn push(&mut self, l: f64) {
        if l == f64::NEG_INFINITY {
            return;
        }
        if l > self.max {
            self.scaled = self.scaled * (self.max - l).exp() + 1.0;
            self.max = l;
        } else {
            self.scaled += (l - self.max).exp();
        }
    }

    fn merge(&mut self, other: &LogSum) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max > self.max {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        } else {
            self.scaled += other.scaled * (other.max - self.max).exp();
        }
    }

    fn log(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct SignedAccumulator {
    pos: LogSum,
    neg: LogSum,
}

impl SignedAccumulator {
    const EMPTY: Self = SignedAccumulator { pos: LogSum::EMPTY, neg: LogSum::EMPTY };

    fn push(&mut self, v: SignedLog, log_weight: f64) {
        if v.sign > 0.0 {
            self.pos.push(v.log_abs + log_weight);
        } else if v.sign < 0.0 {
            self.neg.push(v.log_abs + log_weight);
        }
    }

    fn merge(&mut self, o: &Self) {
        self.pos.merge(&o.pos);
        self.neg.merge(&o.neg);
    }

    fn total(&self) -> SignedLog {
        let (p, n) = (self.pos.log(), self.neg.log());
        if p == n {
            return SignedLog::ZERO;
        }
        if p > n {
            SignedLog { sign: 1.0, log_abs: p + (-(n - p).exp()).ln_1p() }
        } else {
            SignedLog { sign: -1.0, log_abs: n + (-(p - n).exp()).ln_1p() }
        }
    }

    /// `log ∫|f|`.
    fn log_l1(&self) -> f64 {
        let mut s = self.pos;
        s.merge(&self.neg);
        s.log()
    }
}

/// Outcome of a numeric integration; the value is carried in log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub sign: f64,
    pub log_abs: f64,
    /// Relative to `max(|value|, ∫|f|)`; always `≥ 0`.
    pub error_estimate: f64,
    pub evaluations: usize,
}

impl QuadratureResult {
    pub fn value(&self) -> f64 {
        SignedLog { sign: self.sign, log_abs: self.log_abs }.value()
    }

    /// `log|value|`; preferred whenever `|log value| > 30`.
    pub fn log_value(&self) -> f64 {
        self.log_abs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Half-width `R` of the cube `[-R, R]ⁿ`.
    pub radius: f64,
    pub tol: f64,
    /// Coarsest step; each refinement halves it.
    pub initial_step: f64,
    pub max_depth: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { radius: 40.0, tol: 1e-10, initial_step: 0.5, max_depth: 5 }
    }
}

impl GridOptions {
    pub fn with_tol(tol: f64) -> Self {
        GridOptions { tol, ..Default::default() }
    }
}

/// Trapezoid sums over `[-R, R]ⁿ` with step halving until successive levels agree.
///
/// `f` returns its value as a [`SignedLog`], so integrands of size `e^{±100}`
/// are summed without overflow. Row sums are formed independently (possibly in
/// parallel) and merged in row order, so results are bit-identical across runs.
pub fn adaptive_grid_integral<F>(n: usize, f: F, opts: &GridOptions) -> Result<QuadratureResult>
where
    F: Fn(&[f64]) -> SignedLog + Sync,
{
    let mut prev: Option<(SignedLog, f64)> = None;
    let mut evaluations = 0;
    let mut step = opts.initial_step;
    for _ in 0..=opts.max_depth {
        let (acc, count) = trapezoid_level(n, &f, opts.radius, step);
        evaluations += count;
        let total = acc.total();
        let l1 = acc.log_l1();
        if let Some((p, _)) = prev {
            let diff = (total.value() - p.value()).abs();
            let scale = total.log_abs.max(l1);
            let rel = if scale == f64::NEG_INFINITY { 0.0 } else { diff / scale.exp() };
            let rel = if rel.is_finite() { rel } else { log_space_rel_diff(total, p, scale) };
            if rel <= opts.tol {
                return Ok(QuadratureResult { sign: total.sign, log_abs: total.log_abs, error_estimate: rel, evaluations });
            }
        }
        prev = Some((total, l1));
        step *= 0.5;
    }
    let (last, _) = prev.unwrap();
    Err(Error::no_convergence(
        "adaptive_grid_integral",
        format!("last estimate {:e} (log {:.6}) at step {:e}", last.value(), last.log_abs, step * 2.0),
    ))
}

fn log_space_rel_diff(a: SignedLog, b: SignedLog, log_scale: f64) -> f64 {
    if a.sign != b.sign {
        return f64::INFINITY;
    }
    ((a.log_abs - log_scale).exp() - (b.log_abs - log_scale).exp()).abs()
}

fn trapezoid_level<F>(n: usize, f: &F, radius: f64, step: f64) -> (SignedAccumulator, usize)
where
    F: Fn(&[f64]) -> SignedLog + Sync,
{
    let per_axis = (2.0 * radius / step).round() as usize + 1;
    let node = |i: usize| -radius + i as f64 * step;
    let log_w = |i: usize| if i == 0 || i + 1 == per_axis { (0.5 * step).ln() } else { step.ln() };
    let rows = if n == 1 { 1 } else { per_axis };
    let inner = per_axis.pow((n - 1).max(0) as u32).max(1);
    let row_sum = |r: usize| -> SignedAccumulator {
        let mut acc = SignedAccumulator::EMPTY;
        let mut x = vec![0.0; n];
        let mut idx = vec![0usize; n];
        let count = if n == 1 { per_axis } else { inner };
        for c in 0..count {
            let mut rem = c;
            for k in (0..n).rev() {
                if n > 1 && k == 0 {
                    idx[0] = r;
                } else {
                    idx[k] = rem % per_axis;
                    rem /= per_axis;
                }
            }
            let mut lw = 0.0;
            for k in 0..n {
                x[k] = node(idx[k]);
                lw += log_w(idx[k]);
            }
            acc.push(f(&x), lw);
        }
        acc
    };
    let partial = map_rows(rows, row_sum);
    let mut acc = SignedAccumulator::EMPTY;
    for p in &partial {
        acc.merge(p);
    }
    (acc, per_axis.pow(n as u32))
}

#[cfg(feature = "parallel")]
pub(crate) fn map_rows<T: Send, G: Fn(usize) -> T + Sync>(rows: usize, g: G) -> Vec<T> {
    use rayon::prelude::*;
    (0..rows).into_par_iter().map(|i| g(i)).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_rows<T: Send, G: Fn(usize) -> T + Sync>(rows: usize, g: G) -> Vec<T> {
    (0..rows).map(g).collect()
}

/// Gauss–Legendre rule mapped to `[0, 1]`.
pub fn gauss_legendre_unit(points: usize) -> Vec<(f64, f64)> {
    let rule = gauss_quad::GaussLegendre::new(points.max(2)).expect("degree ≥ 2");
    rule.as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{frac, q};
    use crate::polytope::build_polytope;
    use approx::assert_relative_eq;

    #[test]
    fn divided_difference_matches_definition() {
        // distinct nodes: Σ e^{t_i} / Π_{j≠i}(t_i − t_j)
        let t = [0.3f64, -1.7, 2.2, 4.0];
        let direct: f64 = (0..4)
            .map(|i| t[i].exp() / (0..4).filter(|&j| j != i).map(|j| t[i] - t[j]).product::<f64>())
            .sum();
        assert_relative_eq!(exp_divided_difference(&t), direct, max_relative = 1e-13);
        // confluent: exp[a, a, …, a] (k+1 copies) = e^a / k!
        assert_relative_eq!(exp_divided_difference(&[0.7; 4]), 0.7f64.exp() / 6.0, max_relative = 1e-14);
        // continuity across the series/recursion switch
        let a = exp_divided_difference(&[0.0, 0.999_999, 2.0]);
        let b = exp_divided_difference(&[0.0, 1.000_001, 2.0]);
        assert_relative_eq!(a, b, max_relative = 1e-5);
    }

    #[test]
    fn unit_triangle_closed_form() {
        let s = Simplex::new(vec![vec![q(0), q(0)], vec![q(1), q(0)], vec![q(0), q(1)]]).unwrap();
        let r = s.exp_integrals(&[1.0, 0.0]);
        assert_relative_eq!(r.i0, std::f64::consts::E - 2.0, max_relative = 1e-13);
        // ∫(1−x)x eˣ dx over [0,1] = 3 − e
        assert_relative_eq!(r.i1[0], 3.0 - std::f64::consts::E, max_relative = 1e-12);
        let r0 = s.exp_integrals(&[0.0, 0.0]);
        assert_relative_eq!(r0.i0, 0.5, max_relative = 1e-15);
        assert_relative_eq!(r0.i1[1], 1.0 / 6.0, max_relative = 1e-14);
        // ∫ x² over the unit triangle = 1/12, ∫ xy = 1/24
        assert_relative_eq!(r0.i2[0][0], 1.0 / 12.0, max_relative = 1e-14);
        assert_relative_eq!(r0.i2[0][1], 1.0 / 24.0, max_relative = 1e-14);
    }

    #[test]
    fn polytope_moments_at_zero() {
        let (p, fan) = build_polytope(&[vec![1, 1], vec![-1, 0], vec![-1, -1], vec![0, -1]]).unwrap();
        let r = polytope_exp_integrals(&p, &fan, &[0.0, 0.0]);
        assert_relative_eq!(r.i0, 4.0, max_relative = 1e-14);
        assert_relative_eq!(r.i1[0], 1.0 / 3.0, max_relative = 1e-13);
        assert_relative_eq!(r.i1[1], 1.0 / 3.0, max_relative = 1e-13);
        let (p, fan) = build_polytope(&[vec![1, 0], vec![0, -1], vec![-1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let r = polytope_exp_integrals(&p, &fan, &[0.0, 0.0]);
        assert_relative_eq!(r.i0, 3.5, max_relative = 1e-14);
        assert_relative_eq!(r.i1[0], -1.0 / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn degenerate_simplex_rejected() {
        let e = Simplex::new(vec![vec![q(0), q(0)], vec![q(1), q(1)], vec![frac(1, 2), frac(1, 2)]]);
        assert!(e.is_err());
    }

    #[test]
    fn gaussian_on_grid() {
        let r = adaptive_grid_integral(2, |x| SignedLog::from_log(-(x[0] * x[0] + x[1] * x[1])), &GridOptions::with_tol(1e-12))
            .unwrap();
        assert_relative_eq!(r.value(), std::f64::consts::PI, max_relative = 1e-10);
        assert!(r.error_estimate >= 0.0);
        let r = adaptive_grid_integral(1, |x| SignedLog::from_value(x[0] * (-x[0] * x[0]).exp()), &GridOptions::default()).unwrap();
        assert!(r.value().abs() < 1e-12);
    }

    #[test]
    fn huge_values_stay_finite_in_log_space() {
        let r = adaptive_grid_integral(1, |x| SignedLog::from_log(800.0 - x[0] * x[0]), &GridOptions::default()).unwrap();
        assert!(r.value().is_infinite());
        assert_relative_eq!(r.log_value(), 800.0 + 0.5 * std::f64::consts::PI.ln(), max_relative = 1e-12);
    }

    #[test]
    fn no_convergence_is_reported() {
        let opts = GridOptions { radius: 3.0, tol: 1e-14, initial_step: 0.5, max_depth: 2 };
        // kink off the dyadic grid keeps the trapezoid error at O(h²)
        let e = adaptive_grid_integral(1, |x| SignedLog::from_value((x[0] - 0.1).abs()), &opts).unwrap_err();
        assert!(matches!(e, Error::NoConvergence { .. }));
    }

    #[test]
    fn gauss_legendre_integrates_cubic() {
        let s: f64 = gauss_legendre_unit(32).iter().map(|(t, w)| w * t * t * t).sum();
        assert_relative_eq!(s, 0.25, max_relative = 1e-14);
    }
}
