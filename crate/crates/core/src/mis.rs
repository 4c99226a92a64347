//! Torus-invariant candidates for multiplier ideal subvarieties and their
//! exclusion by holomorphic vector fields.
//!
//! A candidate is excluded in KE mode by a `ξ ∈ N` with `F(ξ) > 0` whose
//! half-polytope `{⟨y, ξ⟩ ≤ 0}` contains the candidate, and in KRS mode by an
//! `η` fixing the candidate pointwise with positive divergence along it.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::cone;
use crate::error::{Error, Result};
use crate::exact::{self, Q};
use crate::fixture::Fixture;
use crate::polytope::{face_lattice, weyl_group, Face, Fan, LatticeSymmetry, ReflexivePolytope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    KE,
    KRS,
    FLOW,
}

/// Polytope, fan, face lattice and symmetry group bundled for candidate work.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub polytope: ReflexivePolytope,
    pub fan: Fan,
    pub faces: Vec<Face>,
    pub weyl: Vec<LatticeSymmetry>,
    by_vertices: BTreeMap<Vec<usize>, usize>,
}

impl Geometry {
    pub fn new(polytope: ReflexivePolytope, fan: Fan) -> Self {
        let faces = face_lattice(&polytope, &fan);
        let weyl = weyl_group(&polytope);
        let by_vertices = faces.iter().enumerate().map(|(i, f)| (f.vertex_ids.clone(), i)).collect();
        Geometry { polytope, fan, faces, weyl, by_vertices }
    }

    pub fn face_index(&self, id: &str) -> Option<usize> {
        self.faces.iter().position(|f| f.id == id)
    }

    fn image(&self, perm: &[usize], face: usize) -> usize {
        let mut vs: Vec<usize> = self.faces[face].vertex_ids.iter().map(|&v| perm[v]).collect();
        vs.sort();
        self.by_vertices[&vs]
    }

    /// All faces contained in one of `faces`.
    fn closure(&self, faces: &BTreeSet<usize>) -> BTreeSet<usize> {
        (0..self.faces.len())
            .filter(|&i| {
                let vi = &self.faces[i].vertex_ids;
                faces.iter().any(|&g| vi.iter().all(|v| self.faces[g].vertex_ids.contains(v)))
            })
            .collect()
    }

    /// Builds a candidate from face ids, computing its closure and flags.
    pub fn candidate(&self, face_ids: &[String]) -> Result<Candidate> {
        if face_ids.is_empty() {
            return Err(Error::InvalidCandidate("empty candidate".into()));
        }
        let mut set = BTreeSet::new();
        for id in face_ids {
            let i = self.face_index(id).ok_or_else(|| Error::InvalidCandidate(format!("unknown face id {id:?}")))?;
            set.insert(i);
        }
        Ok(self.candidate_from_set(&set))
    }

    fn candidate_from_set(&self, set: &BTreeSet<usize>) -> Candidate {
        let closure = self.closure(set);
        let maximal: Vec<usize> = closure
            .iter()
            .copied()
            .filter(|&i| {
                !closure.iter().any(|&j| {
                    j != i && self.faces[j].vertex_ids.len() > self.faces[i].vertex_ids.len()
                        && self.faces[i].vertex_ids.iter().all(|v| self.faces[j].vertex_ids.contains(v))
                })
            })
            .collect();
        let vertex_ids: BTreeSet<usize> = maximal.iter().flat_map(|&i| self.faces[i].vertex_ids.clone()).collect();
        let w_invariant = self.weyl.iter().all(|g| {
            let perm = g.vertex_permutation(&self.polytope);
            closure.iter().all(|&i| closure.contains(&self.image(&perm, i)))
        });
        Candidate {
            face_ids: maximal.iter().map(|&i| self.faces[i].id.clone()).collect(),
            connected: self.connected(&maximal),
            w_invariant,
            label: None,
            admissible: None,
            closure: closure.into_iter().collect(),
            vertex_ids: vertex_ids.into_iter().collect(),
        }
    }

    fn connected(&self, faces: &[usize]) -> bool {
        let mut seen = vec![false; faces.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(a) = stack.pop() {
            for b in 0..faces.len() {
                let share = self.faces[faces[a]].vertex_ids.iter().any(|v| self.faces[faces[b]].vertex_ids.contains(v));
                if !seen[b] && share {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// Weyl orbits of proper faces, each sorted, in order of first member.
    pub fn face_orbits(&self) -> Vec<Vec<usize>> {
        let perms: Vec<Vec<usize>> = self.weyl.iter().map(|g| g.vertex_permutation(&self.polytope)).collect();
        let mut assigned = vec![false; self.faces.len()];
        let mut orbits = Vec::new();
        for i in 0..self.faces.len() {
            if assigned[i] {
                continue;
            }
            let orbit: BTreeSet<usize> = perms.iter().map(|p| self.image(p, i)).collect();
            for &j in &orbit {
                assigned[j] = true;
            }
            orbits.push(orbit.into_iter().collect());
        }
        orbits
    }

    fn vertex_q(&self, k: usize) -> Vec<Q> {
        exact::to_q(&self.polytope.vertices()[k])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    /// Maximal faces of the candidate.
    pub face_ids: Vec<String>,
    pub connected: bool,
    pub w_invariant: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Whether the candidate is on the fixture's reduced list, when it has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admissible: Option<bool>,
    #[serde(skip)]
    pub closure: Vec<usize>,
    #[serde(skip)]
    pub vertex_ids: Vec<usize>,
}

impl Candidate {
    pub fn display_name(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.face_ids.join(" ∪ "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateSource {
    /// The fixture's reduced list when present, otherwise the full enumeration.
    Fixture,
    Auto,
}

/// Weyl-invariant connected proper unions of closed faces.
pub fn enumerate_candidates(geometry: &Geometry, fixture: Option<&Fixture>, source: CandidateSource) -> Result<Vec<Candidate>> {
    let admissible = fixture.and_then(|f| f.admissible_candidates.as_ref());
    if let (CandidateSource::Fixture, Some(list)) = (source, admissible) {
        return list
            .iter()
            .map(|ids| {
                let mut c = geometry.candidate(ids)?;
                if !c.w_invariant {
                    return Err(Error::InvalidCandidate(format!("{ids:?} is not Weyl-invariant")));
                }
                if !c.connected {
                    return Err(Error::InvalidCandidate(format!("{ids:?} is not connected")));
                }
                c.label = fixture.and_then(|f| f.label_for(ids));
                c.admissible = Some(true);
                Ok(c)
            })
            .collect();
    }
    let orbits = geometry.face_orbits();
    if orbits.len() > 20 {
        return Err(Error::TooManyOrbits(orbits.len()));
    }
    let everything: Vec<usize> = (0..geometry.faces.len()).collect();
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut out = Vec::new();
    for mask in 1u32..(1 << orbits.len()) {
        let set: BTreeSet<usize> =
            (0..orbits.len()).filter(|k| mask & (1 << k) != 0).flat_map(|k| orbits[k].clone()).collect();
        let c = geometry.candidate_from_set(&set);
        if c.closure == everything || !c.connected || !seen.insert(c.closure.clone()) {
            continue;
        }
        out.push(c);
    }
    let admissible_sets: Option<Vec<Vec<usize>>> =
        admissible.map(|list| list.iter().filter_map(|ids| geometry.candidate(ids).ok()).map(|c| c.closure).collect());
    for c in out.iter_mut() {
        if let Some(sets) = &admissible_sets {
            c.admissible = Some(sets.contains(&c.closure));
            c.label = fixture.and_then(|f| f.label_for(&c.face_ids));
        }
    }
    out.sort_by(|a, b| a.vertex_ids.len().cmp(&b.vertex_ids.len()).then(a.closure.cmp(&b.closure)));
    Ok(out)
}

/// `μ(V) ⊆ D^{≤0}(ξ)`: every candidate vertex pairs non-positively with `ξ`.
pub fn d_le0_contains(geometry: &Geometry, candidate: &Candidate, xi: &[Q]) -> bool {
    candidate.vertex_ids.iter().all(|&k| !exact::dot_q(&geometry.vertex_q(k), xi).is_positive())
}

fn dual_span_contains(geometry: &Geometry, face: &Face, v: &[Q]) -> bool {
    let mut rows: Vec<Vec<Q>> = face.dual_cone.iter().map(|&r| exact::to_q(&geometry.fan.rays[r])).collect();
    let base = exact::rank(&rows);
    rows.push(v.to_vec());
    exact::rank(&rows) == base
}

/// `V ⊆ Z⁺(η)`: `η` fixes every candidate face pointwise and `⟨v, η⟩ < 0` on
/// every candidate vertex.
pub fn z_plus_contains(geometry: &Geometry, candidate: &Candidate, eta: &[Q]) -> bool {
    let fixed = candidate.closure.iter().all(|&i| dual_span_contains(geometry, &geometry.faces[i], eta));
    fixed && candidate.vertex_ids.iter().all(|&k| exact::dot_q(&geometry.vertex_q(k), eta).is_negative())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pairing {
    pub vertex: String,
    pub value: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionCertificate {
    pub kind: Mode,
    pub vector: Vec<i64>,
    pub witness: Vec<Pairing>,
    /// `⟨bary, ξ⟩` as an exact fraction, for KE certificates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barycenter_pairing: Option<String>,
}

fn pairings(geometry: &Geometry, candidate: &Candidate, v: &[i64]) -> Vec<Pairing> {
    candidate
        .vertex_ids
        .iter()
        .map(|&k| Pairing { vertex: format!("V{k}"), value: exact::dot_i(&geometry.polytope.vertices()[k], v) })
        .collect()
}

/// A `ξ` with `⟨bary, ξ⟩ < 0` (so `F(ξ) > 0`) whose half-polytope `D^{≤0}(ξ)`
/// contains the candidate. `None` when no such `ξ` exists or the barycenter is zero.
pub fn ke_obstruction_search(geometry: &Geometry, candidate: &Candidate) -> Option<ExclusionCertificate> {
    let bary = geometry.polytope.exact_moments(&geometry.fan).barycenter;
    if bary.iter().all(|b| b.is_zero()) {
        return None;
    }
    let rows: Vec<Vec<Q>> = candidate.vertex_ids.iter().map(|&k| geometry.vertex_q(k)).collect();
    let xi = cone::negative_point(&rows, &bary, geometry.fan.n)?;
    Some(ExclusionCertificate {
        kind: Mode::KE,
        witness: pairings(geometry, candidate, &xi),
        barycenter_pairing: Some(exact::dot_qi(&bary, &xi).to_string()),
        vector: xi,
    })
}

/// An `η` fixing the candidate pointwise with `⟨v, η⟩ < 0` on all its vertices.
pub fn krs_obstruction_search(geometry: &Geometry, candidate: &Candidate) -> Option<ExclusionCertificate> {
    let n = geometry.fan.n;
    // annihilators of each dual-cone span; the common span is their joint kernel
    let mut annihilators: Vec<Vec<Q>> = Vec::new();
    for &i in &candidate.closure {
        let rows: Vec<Vec<Q>> = geometry.faces[i].dual_cone.iter().map(|&r| exact::to_q(&geometry.fan.rays[r])).collect();
        annihilators.extend(exact::nullspace(&rows, n));
    }
    let basis = exact::nullspace(&annihilators, n);
    if basis.is_empty() {
        return None;
    }
    let rows: Vec<Vec<Q>> = candidate
        .vertex_ids
        .iter()
        .map(|&k| {
            let v = geometry.vertex_q(k);
            basis.iter().map(|b| exact::dot_q(&v, b)).collect()
        })
        .collect();
    let c = cone::strictly_negative_point(&rows, basis.len())?;
    let mut eta = vec![Q::zero(); n];
    for (cj, b) in c.iter().zip(&basis) {
        for (e, x) in eta.iter_mut().zip(b) {
            *e += exact::q(*cj) * x;
        }
    }
    let eta = exact::primitive(&eta);
    Some(ExclusionCertificate { kind: Mode::KRS, witness: pairings(geometry, candidate, &eta), barycenter_pairing: None, vector: eta })
}

/// Re-checks a certificate from scratch against its defining inequalities.
pub fn verify_certificate(geometry: &Geometry, candidate: &Candidate, cert: &ExclusionCertificate) -> bool {
    let v = exact::to_q(&cert.vector);
    match cert.kind {
        Mode::KE => {
            let bary = geometry.polytope.exact_moments(&geometry.fan).barycenter;
            exact::dot_q(&bary, &v).is_negative() && d_le0_contains(geometry, candidate, &v)
        }
        Mode::KRS => z_plus_contains(geometry, candidate, &v),
        Mode::FLOW => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Excluded,
    Survives,
    Divergent,
    Bounded,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub faces: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub status: Status,
    pub certificate: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<Pairing>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MISReport {
    pub fixture: String,
    pub mode: Mode,
    pub candidates: Vec<CandidateReport>,
    pub conclusion: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<crate::flow::FlowDetails>,
}

impl MISReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn surviving(&self) -> Vec<&CandidateReport> {
        self.candidates.iter().filter(|c| c.status == Status::Survives).collect()
    }
}

const SYMMETRY_NOTE: &str = "excluded only under the extended symmetry";

fn name_of(c: &CandidateReport) -> String {
    c.label.clone().unwrap_or_else(|| c.faces.join(" ∪ "))
}

/// Enumerates candidates and applies the KE or KRS exclusion test to each.
pub fn analyze(fixture: &Fixture, mode: Mode, source: CandidateSource) -> Result<MISReport> {
    if mode == Mode::FLOW {
        return Err(Error::InvalidInput("flow reports come from flow::flow_mis_report".into()));
    }
    let (polytope, fan) = fixture.build()?;
    let geometry = Geometry::new(polytope, fan);
    let bary = geometry.polytope.exact_moments(&geometry.fan).barycenter;
    if mode == Mode::KE && bary.iter().all(|b| b.is_zero()) {
        return Ok(MISReport {
            fixture: fixture.name.clone(),
            mode,
            candidates: Vec::new(),
            conclusion: "F ≡ 0; KE exists, no MIS analysis needed".into(),
            flow: None,
        });
    }
    let candidates = enumerate_candidates(&geometry, Some(fixture), source)?;
    let reports: Vec<CandidateReport> = candidates
        .iter()
        .map(|c| {
            let cert = match mode {
                Mode::KE => ke_obstruction_search(&geometry, c),
                _ => krs_obstruction_search(&geometry, c),
            };
            let note = (c.admissible == Some(false) && cert.is_none()).then(|| SYMMETRY_NOTE.to_string());
            CandidateReport {
                faces: c.face_ids.clone(),
                label: c.label.clone(),
                status: if cert.is_some() { Status::Excluded } else { Status::Survives },
                certificate: cert.as_ref().map(|x| x.vector.clone()),
                witness: cert.map(|x| x.witness),
                note,
            }
        })
        .collect();
    let survivors: Vec<&CandidateReport> = reports.iter().filter(|r| r.status == Status::Survives && r.note.is_none()).collect();
    let outside = reports.iter().filter(|r| r.note.is_some()).count();
    let mut conclusion = match (mode, survivors.len()) {
        (Mode::KE, 1) => format!("KE-MIS = {}", name_of(survivors[0])),
        (Mode::KE, 0) => "every candidate is excluded; inconsistent with a nonzero Futaki invariant".into(),
        (Mode::KE, k) => format!(
            "KE-MIS not determined by these exclusions: {k} candidates survive ({})",
            survivors.iter().map(|r| name_of(r)).collect::<Vec<_>>().join("; ")
        ),
        (_, 0) => "no admissible candidate survives ⇒ consistent with existence of a Kähler–Ricci soliton".into(),
        (_, k) => format!(
            "{k} candidates survive ({})",
            survivors.iter().map(|r| name_of(r)).collect::<Vec<_>>().join("; ")
        ),
    };
    if outside > 0 {
        conclusion.push_str(&format!("; {outside} further candidates {SYMMETRY_NOTE}"));
    }
    Ok(MISReport { fixture: fixture.name.clone(), mode, candidates: reports, conclusion, flow: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::fixture;

    fn geometry(name: &str) -> Geometry {
        let (p, fan) = fixture(name).unwrap().build().unwrap();
        Geometry::new(p, fan)
    }

    fn cand(g: &Geometry, ids: &[&str]) -> Candidate {
        g.candidate(&ids.iter().map(|s| s.to_string()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn half_polytope_containment() {
        let g = geometry("dp1");
        let plus = cand(&g, &["F(1,1)"]);
        let e = cand(&g, &["F(-1,-1)"]);
        assert!(d_le0_contains(&g, &plus, &exact::to_q(&[-1, -1])));
        assert!(!d_le0_contains(&g, &e, &exact::to_q(&[-1, -1])));
        assert!(d_le0_contains(&g, &e, &exact::to_q(&[0, 0])));
    }

    #[test]
    fn zero_sets() {
        let g = geometry("dp1");
        let plus = cand(&g, &["F(1,1)"]);
        let e = cand(&g, &["F(-1,-1)"]);
        assert!(z_plus_contains(&g, &e, &exact::to_q(&[1, 1])));
        assert!(z_plus_contains(&g, &plus, &exact::to_q(&[-1, -1])));
        assert!(!z_plus_contains(&g, &e, &exact::to_q(&[1, 0])));
    }

    #[test]
    fn dp1_certificates() {
        let g = geometry("dp1");
        let plus = cand(&g, &["F(1,1)"]);
        let e = cand(&g, &["F(-1,-1)"]);
        assert_eq!(ke_obstruction_search(&g, &plus).unwrap().vector, vec![-1, -1]);
        assert!(ke_obstruction_search(&g, &e).is_none());
        assert_eq!(krs_obstruction_search(&g, &e).unwrap().vector, vec![1, 1]);
        assert_eq!(krs_obstruction_search(&g, &plus).unwrap().vector, vec![-1, -1]);
        let both = cand(&g, &["F(1,1)", "F(-1,-1)"]);
        assert!(krs_obstruction_search(&g, &both).is_none());
    }

    #[test]
    fn dp2_zero_curve_certificate() {
        let g = geometry("dp2");
        let c = cand(&g, &["F(0,-1)"]);
        let cert = ke_obstruction_search(&g, &c).unwrap();
        assert!(verify_certificate(&g, &c, &cert));
        assert!(d_le0_contains(&g, &c, &exact::to_q(&[1, 1])));
    }

    #[test]
    fn dp1_reports() {
        let f = fixture("dp1").unwrap();
        let r = analyze(&f, Mode::KE, CandidateSource::Fixture).unwrap();
        assert_eq!(r.conclusion, "KE-MIS = E");
        let r = analyze(&f, Mode::KRS, CandidateSource::Fixture).unwrap();
        assert!(r.surviving().is_empty());
        assert_eq!(MISReport::from_json(&r.to_json()).unwrap().to_json(), r.to_json());
    }

    #[test]
    fn dp1_auto_enumeration() {
        let f = fixture("dp1").unwrap();
        let g = geometry("dp1");
        assert_eq!(g.face_orbits().len(), 5);
        let all = enumerate_candidates(&g, Some(&f), CandidateSource::Auto).unwrap();
        assert!(all.iter().all(|c| c.connected && c.w_invariant));
        let chain = cand(&g, &["F(1,1)", "F(-1,0)", "F(0,-1)"]);
        assert!(all.iter().any(|c| c.closure == chain.closure && c.admissible == Some(false)));
        let r = analyze(&f, Mode::KE, CandidateSource::Auto).unwrap();
        assert!(r.conclusion.starts_with("KE-MIS = E"), "{}", r.conclusion);
    }

    #[test]
    fn dp3_has_no_obstruction() {
        let r = analyze(&fixture("dp3").unwrap(), Mode::KE, CandidateSource::Fixture).unwrap();
        assert_eq!(r.conclusion, "F ≡ 0; KE exists, no MIS analysis needed");
    }
}
