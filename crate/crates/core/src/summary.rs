//! One-shot geometric and analytic summary of a fixture.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exact::{to_f64, to_q};
use crate::fixture::Fixture;
use crate::invariants::{futaki_exact, solve_soliton_vector, SolitonResult};
use crate::mis::MISReport;
use crate::polytope::{self_intersections, weyl_group, LatticeVector};
use crate::quadrature::PolytopeIntegrator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FutakiValue {
    pub xi: LatticeVector,
    /// Exact rational value, e.g. `"4/3"`.
    pub exact: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub fixture: String,
    pub rays: Vec<LatticeVector>,
    pub vertices: Vec<LatticeVector>,
    pub lattice_points: usize,
    pub volume: String,
    pub barycenter: Vec<String>,
    pub weyl_order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_intersections: Option<Vec<i64>>,
    pub futaki_vanishes: bool,
    pub futaki: Vec<FutakiValue>,
    pub soliton: SolitonResult,
}

/// A fixture summary together with an exclusion report, as emitted by `analyze`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub summary: Summary,
    pub report: MISReport,
}

impl Analysis {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("analyses serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::Error::Parse(e.to_string()))
    }
}

/// Directions at which the Futaki character is tabulated: the coordinate
/// vectors and the diagonal, both signs.
fn probe_directions(n: usize) -> Vec<LatticeVector> {
    let mut dirs = Vec::new();
    for k in 0..n {
        let mut e = vec![0; n];
        e[k] = 1;
        dirs.push(e);
    }
    dirs.push(vec![1; n]);
    let neg: Vec<LatticeVector> = dirs.iter().map(|d| d.iter().map(|x| -x).collect()).collect();
    dirs.extend(neg);
    dirs
}

pub fn summarize(fixture: &Fixture, tol: f64) -> Result<Summary> {
    let (polytope, fan) = fixture.build()?;
    let moments = polytope.exact_moments(&fan);
    let futaki: Vec<FutakiValue> = probe_directions(polytope.dim())
        .into_iter()
        .map(|xi| {
            let f = futaki_exact(&polytope, &fan, &to_q(&xi));
            FutakiValue { xi, exact: f.to_string(), value: to_f64(&f) }
        })
        .collect();
    let integrator = PolytopeIntegrator::new(&polytope, &fan);
    let soliton = solve_soliton_vector(&polytope, &integrator, tol)?;
    Ok(Summary {
        fixture: fixture.name.clone(),
        rays: fan.rays.clone(),
        vertices: polytope.vertices().to_vec(),
        lattice_points: polytope.lattice_points().len(),
        volume: moments.volume.to_string(),
        barycenter: moments.barycenter.iter().map(|b| b.to_string()).collect(),
        weyl_order: weyl_group(&polytope).len(),
        self_intersections: self_intersections(&fan).ok(),
        futaki_vanishes: futaki.iter().all(|f| f.value == 0.0),
        futaki,
        soliton,
    })
}
