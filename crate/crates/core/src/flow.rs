//! Growth of `∫ e^{−ũ − α ψ̃_t}` near each facet along the Kähler–Ricci flow.
//!
//! Near a facet whose integral grows exponentially in `t`, the multiplier ideal
//! of `α ψ̃_t` degenerates; facets with bounded integrals are not in the MIS.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixture::Fixture;
use crate::invariants::solve_soliton_vector;
use crate::mis::{CandidateReport, Geometry, MISReport, Mode, Status};
use crate::polytope::{facet_id, self_intersections, Fan, LatticeVector};
use crate::potentials::{flow_potential, FlowPotential, PotentialModel};
use crate::quadrature::{map_rows, PolytopeIntegrator};

/// Thresholds on `slope / β`.
pub const DIVERGENT_SLOPE: f64 = 0.05;
pub const BOUNDED_SLOPE: f64 = 0.02;
const TRANSVERSE_STEP: f64 = 0.05;
const LONGITUDINAL_STEP: f64 = 0.1;

/// `{s·ρ/|ρ| + w : w ⊥ ρ, |w| < eps, s ≥ s0}` in a two-dimensional `N_ℝ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetRegion {
    pub ray: LatticeVector,
    pub eps: f64,
    pub s0: f64,
    pub direction: Vec<f64>,
    pub normal: Vec<f64>,
}

impl FacetRegion {
    pub fn point(&self, s: f64, w: f64) -> Vec<f64> {
        vec![s * self.direction[0] + w * self.normal[0], s * self.direction[1] + w * self.normal[1]]
    }
}

pub fn facet_region(fan: &Fan, ray: &[i64], eps: f64, s0: f64) -> Result<FacetRegion> {
    if fan.n != 2 {
        return Err(Error::DimensionUnsupported(fan.n));
    }
    if !fan.rays.iter().any(|r| r == ray) {
        return Err(Error::InvalidInput(format!("{ray:?} is not a ray of the fan")));
    }
    let len = ((ray[0] * ray[0] + ray[1] * ray[1]) as f64).sqrt();
    let direction = vec![ray[0] as f64 / len, ray[1] as f64 / len];
    let normal = vec![-direction[1], direction[0]];
    Ok(FacetRegion { ray: ray.to_vec(), eps, s0, direction, normal })
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Product rule: midpoint across the region, trapezoid along it. Returns
/// `log ∫ e^{g}` for the log-integrand `g`.
fn region_log_integral(region: &FacetRegion, s_max: f64, dw: f64, ds: f64, g: &dyn Fn(&[f64]) -> f64) -> f64 {
    let nw = (2.0 * region.eps / dw).round().max(1.0) as usize;
    let dw = 2.0 * region.eps / nw as f64;
    let ns = ((s_max - region.s0) / ds).round().max(1.0) as usize;
    let ds = (s_max - region.s0) / ns as f64;
    let mut terms = Vec::with_capacity((ns + 1) * nw);
    for i in 0..=ns {
        let s = region.s0 + i as f64 * ds;
        let lw_s = if i == 0 || i == ns { (0.5 * ds).ln() } else { ds.ln() };
        for j in 0..nw {
            let w = -region.eps + (j as f64 + 0.5) * dw;
            terms.push(g(&region.point(s, w)) + lw_s + dw.ln());
        }
    }
    log_sum_exp(&terms)
}

/// `log ∫_region e^{−ũ − α ψ̃_t} dx`, integrating up to `s_max`.
pub fn alpha_log_integral(potential: &FlowPotential, alpha: f64, region: &FacetRegion, s_max: f64) -> Result<f64> {
    let g = |x: &[f64]| -> f64 {
        let u = potential.model.u(x);
        -u - alpha * (potential.shifted_u(x) - u)
    };
    let fine = region_log_integral(region, s_max, TRANSVERSE_STEP, LONGITUDINAL_STEP, &g);
    let coarse = region_log_integral(region, s_max, 2.0 * TRANSVERSE_STEP, 2.0 * LONGITUDINAL_STEP, &g);
    // both rules are second order, so the fine error is about a third of the gap
    if !fine.is_finite() || (fine - coarse).abs() / 3.0 > 5e-3 {
        return Err(Error::no_convergence(
            "alpha_log_integral",
            format!("estimates {fine} and {coarse} at t = {} for ray {:?}", potential.t, region.ray),
        ));
    }
    Ok(fine)
}

/// Integral of the same region restricted to `ũ + ψ̃_t ≥ 0`, paired with the
/// analytic upper bound `∫ e^{−(1−α)ũ}` over that set.
pub fn bounded_side_check(potential: &FlowPotential, alpha: f64, region: &FacetRegion, s_max: f64) -> (f64, f64) {
    let keep = |x: &[f64]| potential.shifted_u(x) >= 0.0;
    let value = region_log_integral(region, s_max, TRANSVERSE_STEP, LONGITUDINAL_STEP, &|x| {
        if keep(x) {
            let u = potential.model.u(x);
            -u - alpha * (potential.shifted_u(x) - u)
        } else {
            f64::NEG_INFINITY
        }
    });
    let bound = region_log_integral(region, s_max, TRANSVERSE_STEP, LONGITUDINAL_STEP, &|x| {
        if keep(x) {
            -(1.0 - alpha) * potential.model.u(x)
        } else {
            f64::NEG_INFINITY
        }
    });
    (value, bound)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthSeries {
    pub alpha: f64,
    pub t_grid: Vec<f64>,
    pub log_integrals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "lowercase")]
pub enum Growth {
    Divergent { slope: f64 },
    Bounded { slope: f64 },
    Inconclusive { slope: f64 },
}

impl Growth {
    pub fn slope(&self) -> f64 {
        match *self {
            Growth::Divergent { slope } | Growth::Bounded { slope } | Growth::Inconclusive { slope } => slope,
        }
    }

    pub fn status(&self) -> Status {
        match self {
            Growth::Divergent { .. } => Status::Divergent,
            Growth::Bounded { .. } => Status::Bounded,
            Growth::Inconclusive { .. } => Status::Inconclusive,
        }
    }
}

/// Least-squares slope and root-mean-square residual.
pub fn fit_slope(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let sxx: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rms = (t.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mt)).powi(2)).sum::<f64>() / n).sqrt();
    (slope, rms)
}

/// Classifies by the fitted slope measured in units of `β`, so the thresholds
/// do not depend on the size of the soliton vector.
pub fn growth_classify(series: &GrowthSeries, beta: f64) -> Growth {
    let (slope, _) = fit_slope(&series.t_grid, &series.log_integrals);
    let rel = slope / beta;
    if series.t_grid.len() < 4 {
        Growth::Inconclusive { slope }
    } else if rel > DIVERGENT_SLOPE {
        Growth::Divergent { slope }
    } else if rel.abs() < BOUNDED_SLOPE {
        Growth::Bounded { slope }
    } else {
        Growth::Inconclusive { slope }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub alphas: Vec<f64>,
    /// End of the time grid; `40/β` when absent.
    pub t_max: Option<f64>,
    pub eps: f64,
    pub s0: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { alphas: vec![0.7, 0.8, 0.9], t_max: None, eps: 0.25, s0: 8.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetSeries {
    pub facet: String,
    pub ray: LatticeVector,
    pub alpha: f64,
    pub log_integrals: Vec<f64>,
    pub growth: Growth,
    pub fit_residual: f64,
    /// `(2α−1)β`, reported for divergent facets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_deviation: Option<f64>,
    /// For bounded facets: whether the integral over `{ũ + ψ̃_t ≥ 0}` stays
    /// below `∫ e^{−(1−α)ũ}` at every grid time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_respected: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSummary {
    pub alpha: f64,
    pub divergent: Vec<String>,
    pub completed: Vec<String>,
    pub mis: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowDetails {
    pub xi_s: Vec<f64>,
    pub beta: f64,
    pub t_grid: Vec<f64>,
    pub eps: f64,
    pub s0: f64,
    /// Thresholds apply to `slope / beta`.
    pub divergent_slope_threshold: f64,
    pub bounded_slope_threshold: f64,
    pub series: Vec<FacetSeries>,
    pub per_alpha: Vec<AlphaSummary>,
    pub alpha_stable: bool,
    /// Whether every facet added by the connectedness completion also
    /// diverges when measured directly.
    pub completion_agrees: bool,
    pub mis: Vec<String>,
}

impl FlowDetails {
    /// `facet,alpha,t,log_integral` rows for external plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("facet,alpha,t,log_integral\n");
        for s in &self.series {
            for (t, v) in self.t_grid.iter().zip(&s.log_integrals) {
                out.push_str(&format!("\"{}\",{},{},{}\n", s.facet, s.alpha, t, v));
            }
        }
        out
    }
}

/// Facets adjacent to `k` in the cyclic order of a two-dimensional fan.
fn neighbours(fan: &Fan, k: usize) -> (usize, usize) {
    let m = fan.rays.len();
    ((k + m - 1) % m, (k + 1) % m)
}

/// Adds every facet whose two neighbours both diverge.
fn complete(fan: &Fan, divergent: &[bool]) -> Vec<bool> {
    (0..divergent.len())
        .map(|k| {
            let (a, b) = neighbours(fan, k);
            divergent[k] || (divergent[a] && divergent[b])
        })
        .collect()
}

pub fn flow_mis_report(fixture: &Fixture, opts: &FlowOptions) -> Result<MISReport> {
    for &a in &opts.alphas {
        if !(a > 0.5 && a < 1.0) {
            return Err(Error::InvalidInput(format!("alpha = {a} is outside (1/2, 1)")));
        }
    }
    if opts.alphas.is_empty() {
        return Err(Error::InvalidInput("no alpha values".into()));
    }
    let (polytope, fan) = fixture.build()?;
    if fan.n != 2 {
        return Err(Error::DimensionUnsupported(fan.n));
    }
    let integrator = PolytopeIntegrator::new(&polytope, &fan);
    let soliton = solve_soliton_vector(&polytope, &integrator, 1e-12)?;
    let xi = soliton.xi_s.clone();
    let beta = xi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if beta < 1e-9 {
        return Err(Error::InvalidInput(format!(
            "{}: soliton vector vanishes, the flow potentials are trivial",
            fixture.name
        )));
    }
    let t_max = opts.t_max.unwrap_or(40.0 / beta);
    let t_grid: Vec<f64> = (4..=8).map(|k| k as f64 * t_max / 8.0).collect();
    let model = PotentialModel::from_polytope(&polytope);
    let potentials: Vec<FlowPotential> = t_grid.iter().map(|&t| flow_potential(&model, &xi, t)).collect();
    for p in &potentials {
        let sup = p.grid_sup(50.0, 0.5);
        if sup > 1e-9 {
            return Err(Error::no_convergence("flow_potential", format!("sup ψ̃_t = {sup:e} > 0 at t = {}", p.t)));
        }
    }
    let regions: Vec<FacetRegion> =
        fan.rays.iter().map(|r| facet_region(&fan, r, opts.eps, opts.s0)).collect::<Result<_>>()?;
    let (n_alpha, n_t) = (opts.alphas.len(), t_grid.len());
    let jobs: Vec<(usize, usize, usize)> = (0..regions.len())
        .flat_map(|f| (0..n_alpha).flat_map(move |a| (0..n_t).map(move |t| (f, a, t))))
        .collect();
    let s_max = |t: f64| 2.0 * beta * t + 20.0;
    let values = map_rows(jobs.len(), |j| {
        let (f, a, t) = jobs[j];
        alpha_log_integral(&potentials[t], opts.alphas[a], &regions[f], s_max(t_grid[t]))
    });
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;

    let mut series = Vec::new();
    for (f, region) in regions.iter().enumerate() {
        for (a, &alpha) in opts.alphas.iter().enumerate() {
            let base = (f * opts.alphas.len() + a) * t_grid.len();
            let log_integrals = values[base..base + t_grid.len()].to_vec();
            let gs = GrowthSeries { alpha, t_grid: t_grid.clone(), log_integrals: log_integrals.clone() };
            let growth = growth_classify(&gs, beta);
            let (_, fit_residual) = fit_slope(&t_grid, &log_integrals);
            let predicted = (2.0 * alpha - 1.0) * beta;
            let divergent = matches!(growth, Growth::Divergent { .. });
            let bound_respected = matches!(growth, Growth::Bounded { .. }).then(|| {
                potentials.iter().all(|p| {
                    let (v, b) = bounded_side_check(p, alpha, region, s_max(p.t));
                    v <= b + 1e-12
                })
            });
            series.push(FacetSeries {
                facet: facet_id(&region.ray),
                ray: region.ray.clone(),
                alpha,
                log_integrals,
                growth,
                fit_residual,
                predicted_slope: divergent.then_some(predicted),
                relative_deviation: divergent.then(|| (growth.slope() - predicted).abs() / predicted),
                bound_respected,
            });
        }
    }

    let ids: Vec<String> = fan.rays.iter().map(|r| facet_id(r)).collect();
    let select = |flags: &[bool]| -> Vec<String> {
        flags.iter().zip(&ids).filter(|(f, _)| **f).map(|(_, id)| id.clone()).collect()
    };
    let mut per_alpha = Vec::new();
    let mut completion_agrees = true;
    for (a, &alpha) in opts.alphas.iter().enumerate() {
        let divergent: Vec<bool> =
            (0..ids.len()).map(|f| matches!(series[f * n_alpha + a].growth, Growth::Divergent { .. })).collect();
        let completed = complete(&fan, &divergent);
        // facets pinched between divergent neighbours must diverge on their own too
        let pinched: Vec<bool> = (0..ids.len())
            .map(|k| {
                let (p, q) = neighbours(&fan, k);
                divergent[p] && divergent[q]
            })
            .collect();
        completion_agrees &= pinched.iter().zip(&divergent).all(|(p, d)| !p || *d);
        per_alpha.push(AlphaSummary {
            alpha,
            divergent: select(&divergent),
            completed: select(&completed.iter().zip(&divergent).map(|(c, d)| *c && !d).collect::<Vec<_>>()),
            mis: select(&completed),
        });
    }
    let alpha_stable = per_alpha.windows(2).all(|w| w[0].mis == w[1].mis)
        && (0..ids.len()).all(|f| {
            let s0 = series[f * n_alpha].growth.status();
            (0..n_alpha).all(|a| series[f * n_alpha + a].growth.status() == s0)
        });
    let mis = per_alpha[0].mis.clone();

    let geometry = Geometry::new(polytope, fan.clone());
    let selfint = self_intersections(&fan)?;
    let candidates: Vec<CandidateReport> = (0..ids.len())
        .map(|f| {
            let statuses: Vec<Status> = (0..n_alpha).map(|a| series[f * n_alpha + a].growth.status()).collect();
            let status = if statuses.iter().all(|s| *s == statuses[0]) { statuses[0] } else { Status::Inconclusive };
            let label = fixture.label_for(&[ids[f].clone()]);
            CandidateReport {
                faces: vec![ids[f].clone()],
                label,
                status,
                certificate: None,
                witness: None,
                note: Some(format!("self-intersection {}", selfint[f])),
            }
        })
        .collect();
    let conclusion = if mis.is_empty() {
        "no facet diverges; flow MIS not detected".to_string()
    } else {
        let mis_candidate = geometry.candidate(&mis)?;
        let label = fixture.label_for(&mis).map(|l| format!(" = {l}"));
        let d: Vec<String> = mis.iter().map(|id| selfint[ids.iter().position(|x| x == id).unwrap()].to_string()).collect();
        let shape = if mis_candidate.connected { "connected" } else { "disconnected" };
        let mut c = format!(
            "flow MIS = {}{} ({shape}; self-intersections {})",
            mis.join(" ∪ "),
            label.unwrap_or_default(),
            d.join(", ")
        );
        if !alpha_stable {
            c.push_str("; classification differs between alpha values");
        }
        c
    };
    Ok(MISReport {
        fixture: fixture.name.clone(),
        mode: Mode::FLOW,
        candidates,
        conclusion,
        flow: Some(FlowDetails {
            xi_s: xi,
            beta,
            t_grid,
            eps: opts.eps,
            s0: opts.s0,
            divergent_slope_threshold: DIVERGENT_SLOPE,
            bounded_slope_threshold: BOUNDED_SLOPE,
            series,
            per_alpha,
            alpha_stable,
            completion_agrees,
            mis,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::fixture;

    #[test]
    fn regions_track_facets() {
        let (p, fan) = fixture("dp2").unwrap().build().unwrap();
        let model = PotentialModel::from_polytope(&p);
        let r = facet_region(&fan, &[0, 1], 0.25, 8.0).unwrap();
        assert_eq!(r.point(8.0, 0.1), vec![-0.1, 8.0]);
        for ray in fan.rays.iter() {
            let r = facet_region(&fan, ray, 0.25, 8.0).unwrap();
            let y = model.grad(&r.point(8.0, 0.0));
            let dist = 1.0 - (y[0] * ray[0] as f64 + y[1] * ray[1] as f64);
            assert!(dist >= 0.0 && dist < 0.2, "{ray:?}: {dist}");
        }
        assert!(facet_region(&fan, &[2, 1], 0.25, 8.0).is_err());
    }

    #[test]
    fn classification_edges() {
        let flat = GrowthSeries { alpha: 0.8, t_grid: vec![1.0, 2.0, 3.0, 4.0], log_integrals: vec![2.0; 4] };
        assert_eq!(growth_classify(&flat, 0.4), Growth::Bounded { slope: 0.0 });
        let short = GrowthSeries { alpha: 0.8, t_grid: vec![1.0, 2.0], log_integrals: vec![0.0, 1.0] };
        assert!(matches!(growth_classify(&short, 0.4), Growth::Inconclusive { .. }));
        let (s, r) = fit_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((s - 2.0).abs() < 1e-15 && r < 1e-15);
    }

    #[test]
    fn zero_time_baseline() {
        let (p, fan) = fixture("dp2").unwrap().build().unwrap();
        let model = PotentialModel::from_polytope(&p);
        let r = facet_region(&fan, &[0, 1], 0.25, 8.0).unwrap();
        let zero = flow_potential(&model, &[0.3, 0.3], 0.0);
        let v = alpha_log_integral(&zero, 0.8, &r, 20.0).unwrap();
        let direct = region_log_integral(&r, 20.0, TRANSVERSE_STEP, LONGITUDINAL_STEP, &|x| -model.u(x));
        assert_eq!(v, direct);
    }
}
