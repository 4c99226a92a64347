//! The five smooth toric del Pezzo surfaces as loadable fixtures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::{build_polytope, Fan, LatticeVector, ReflexivePolytope};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub rays: Vec<LatticeVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admissible_candidates: Option<Vec<Vec<String>>>,
    /// Display names for `admissible_candidates`, index for index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_labels: Option<Vec<String>>,
    #[serde(default)]
    pub notes: String,
}

impl Fixture {
    pub fn from_json(text: &str) -> Result<Self> {
        let f: Fixture = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if let (Some(c), Some(l)) = (&f.admissible_candidates, &f.candidate_labels) {
            if c.len() != l.len() {
                return Err(Error::Parse(format!(
                    "{} candidate labels for {} admissible candidates",
                    l.len(),
                    c.len()
                )));
            }
        }
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fixtures serialize")
    }

    pub fn build(&self) -> Result<(ReflexivePolytope, Fan)> {
        build_polytope(&self.rays)
    }

    /// Label of the admissible candidate with exactly these face ids.
    pub fn label_for(&self, face_ids: &[String]) -> Option<String> {
        let cands = self.admissible_candidates.as_ref()?;
        let labels = self.candidate_labels.as_ref()?;
        let mut key = face_ids.to_vec();
        key.sort();
        cands
            .iter()
            .position(|c| {
                let mut c = c.clone();
                c.sort();
                c == key
            })
            .map(|i| labels[i].clone())
    }
}

fn fx(name: &str, rays: &[[i64; 2]], notes: &str) -> Fixture {
    Fixture {
        name: name.into(),
        rays: rays.iter().map(|r| r.to_vec()).collect(),
        admissible_candidates: None,
        candidate_labels: None,
        notes: notes.into(),
    }
}

pub fn catalog() -> Vec<Fixture> {
    let mut dp1 = fx(
        "dp1",
        &[[1, 1], [-1, 0], [-1, -1], [0, -1]],
        "CP² blown up at one point. Rays and the candidate list {E, (+1)-curve} are taken from the reference \
         analysis, where the extra automorphisms reduce the torus-invariant candidates to these two.",
    );
    dp1.admissible_candidates = Some(vec![vec!["F(-1,-1)".into()], vec!["F(1,1)".into()]]);
    dp1.candidate_labels = Some(vec!["E".into(), "(+1)-curve".into()]);
    vec![
        fx("cp2", &[[1, 0], [0, 1], [-1, -1]], "Projective plane; standard toric data."),
        fx("cp1xcp1", &[[1, 0], [0, 1], [-1, 0], [0, -1]], "CP¹ × CP¹; standard toric data."),
        dp1,
        fx(
            "dp2",
            &[[1, 0], [0, -1], [-1, 0], [0, 1], [1, 1]],
            "CP² blown up at two points. Rays taken from the reference flow analysis; no reduced candidate list.",
        ),
        fx(
            "dp3",
            &[[1, 0], [1, 1], [0, 1], [-1, 0], [-1, -1], [0, -1]],
            "CP² blown up at three points (hexagon); standard toric data.",
        ),
    ]
}

pub fn fixture(name: &str) -> Result<Fixture> {
    catalog().into_iter().find(|f| f.name == name).ok_or_else(|| Error::UnknownFixture(name.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_builds() {
        let names: Vec<String> = catalog().iter().map(|f| f.name.clone()).collect();
        assert_eq!(names, ["cp2", "cp1xcp1", "dp1", "dp2", "dp3"]);
        for f in catalog() {
            f.build().unwrap();
            assert_eq!(Fixture::from_json(&f.to_json()).unwrap(), f);
        }
        assert!(matches!(fixture("dp9"), Err(Error::UnknownFixture(_))));
    }

    #[test]
    fn labels() {
        let f = fixture("dp1").unwrap();
        assert_eq!(f.label_for(&["F(1,1)".into()]).as_deref(), Some("(+1)-curve"));
        assert_eq!(f.label_for(&["F(0,-1)".into()]), None);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(Fixture::from_json("{"), Err(Error::Parse(_))));
        let bad = r#"{"name":"x","rays":[[1,0]],"admissible_candidates":[["V0"]],"candidate_labels":[]}"#;
        assert!(matches!(Fixture::from_json(bad), Err(Error::Parse(_))));
    }
}
