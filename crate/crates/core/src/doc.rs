//! The JSON model document: the external, name-based representation of a
//! game model.
//!
//! Sparse conventions match [`crate::model::ModelParts`]: omitted `delta1`
//! rows keep the local state, omitted `deltaE` rows keep the environment
//! point, omitted rewards are 0. Probabilities are written with full
//! round-trip precision.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::mlp::MlpNet;
use crate::model::{
    A1Id, A2Id, EnvPoint, GameModel, Loc1Id, ModelError, ModelParts, PerId, Perception, PointId,
    RegionId,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointDoc {
    pub id: String,
    pub coords: Vec<f64>,
    pub region: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum PerceptionDoc {
    /// loc1 name -> region name -> percept name.
    #[serde(rename = "table")]
    Table(BTreeMap<String, BTreeMap<String, String>>),
    #[serde(rename = "mlp")]
    Mlp(MlpNet),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Delta1Doc {
    pub loc1: String,
    pub per1: String,
    pub a1: String,
    pub a2: String,
    pub dist: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaEDoc {
    pub loc1: String,
    pub point: String,
    pub a1: String,
    pub a2: String,
    pub dist: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardDoc {
    pub loc1: String,
    pub per1: String,
    pub point: String,
    pub a1: String,
    pub a2: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitDoc {
    pub loc1: String,
    pub per1: String,
    pub particles: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDoc {
    pub loc1: Vec<String>,
    pub per1: Vec<String>,
    pub a1: Vec<String>,
    pub a2: Vec<String>,
    pub points: Vec<PointDoc>,
    pub perception: PerceptionDoc,
    #[serde(default)]
    pub delta1: Vec<Delta1Doc>,
    #[serde(default, rename = "deltaE")]
    pub delta_e: Vec<DeltaEDoc>,
    #[serde(default)]
    pub reward: Vec<RewardDoc>,
    pub beta: f64,
    pub init: InitDoc,
}

fn parse_err(msg: impl Into<String>) -> ModelError {
    ModelError::Parse(msg.into())
}

struct Names<'a> {
    doc: &'a ModelDoc,
    regions: Vec<String>,
    points: BTreeMap<&'a str, PointId>,
}

impl<'a> Names<'a> {
    fn index_of(kind: &str, names: &[String], name: &str) -> Result<usize, ModelError> {
        names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| parse_err(format!("unknown {kind} name '{name}'")))
    }

    fn loc1(&self, n: &str) -> Result<Loc1Id, ModelError> {
        Self::index_of("loc1", &self.doc.loc1, n).map(Loc1Id)
    }
    fn per1(&self, n: &str) -> Result<PerId, ModelError> {
        Self::index_of("per1", &self.doc.per1, n).map(PerId)
    }
    fn a1(&self, n: &str) -> Result<A1Id, ModelError> {
        Self::index_of("a1", &self.doc.a1, n).map(A1Id)
    }
    fn a2(&self, n: &str) -> Result<A2Id, ModelError> {
        Self::index_of("a2", &self.doc.a2, n).map(A2Id)
    }
    fn region(&self, n: &str) -> Result<RegionId, ModelError> {
        Self::index_of("region", &self.regions, n).map(RegionId)
    }
    fn point(&self, n: &str) -> Result<PointId, ModelError> {
        self.points
            .get(n)
            .copied()
            .ok_or_else(|| parse_err(format!("unknown point name '{n}'")))
    }
}

/// Parses and validates a model document.
pub fn load_model(text: &str) -> Result<GameModel, ModelError> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    model_from_doc(&doc)
}

pub fn model_from_doc(doc: &ModelDoc) -> Result<GameModel, ModelError> {
    // Regions are named implicitly by the points, in order of first mention.
    let mut regions: Vec<String> = Vec::new();
    for p in &doc.points {
        if !regions.contains(&p.region) {
            regions.push(p.region.clone());
        }
    }
    let mut point_ids = BTreeMap::new();
    for (i, p) in doc.points.iter().enumerate() {
        if point_ids.insert(p.id.as_str(), PointId(i)).is_some() {
            return Err(parse_err(format!("duplicate point id '{}'", p.id)));
        }
    }
    let names = Names {
        doc,
        regions: regions.clone(),
        points: point_ids,
    };

    let points = doc
        .points
        .iter()
        .map(|p| {
            Ok(EnvPoint {
                name: p.id.clone(),
                coords: p.coords.clone(),
                region: names.region(&p.region)?,
            })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;

    let perception = match &doc.perception {
        PerceptionDoc::Table(table) => {
            let mut out = BTreeMap::new();
            for (loc_name, row) in table {
                let l = names.loc1(loc_name)?;
                for (region_name, per_name) in row {
                    let r = names.region(region_name)?;
                    let p = names.per1(per_name)?;
                    out.insert((l, r), p);
                }
            }
            Perception::Table(out)
        }
        PerceptionDoc::Mlp(net) => Perception::Mlp(net.clone()),
    };

    let mut delta1 = BTreeMap::new();
    for row in &doc.delta1 {
        let key = (
            names.loc1(&row.loc1)?,
            names.per1(&row.per1)?,
            names.a1(&row.a1)?,
            names.a2(&row.a2)?,
        );
        let dist = row
            .dist
            .iter()
            .map(|(t, p)| Ok((names.loc1(t)?, *p)))
            .collect::<Result<Vec<_>, ModelError>>()?;
        if delta1.insert(key, dist).is_some() {
            return Err(parse_err(format!(
                "duplicate delta1 row ({},{},{},{})",
                row.loc1, row.per1, row.a1, row.a2
            )));
        }
    }

    let mut delta_e = BTreeMap::new();
    for row in &doc.delta_e {
        let key = (
            names.loc1(&row.loc1)?,
            names.point(&row.point)?,
            names.a1(&row.a1)?,
            names.a2(&row.a2)?,
        );
        let dist = row
            .dist
            .iter()
            .map(|(t, p)| Ok((names.point(t)?, *p)))
            .collect::<Result<Vec<_>, ModelError>>()?;
        if delta_e.insert(key, dist).is_some() {
            return Err(parse_err(format!(
                "duplicate deltaE row ({},{},{},{})",
                row.loc1, row.point, row.a1, row.a2
            )));
        }
    }

    let mut reward = BTreeMap::new();
    for row in &doc.reward {
        let key = (
            names.loc1(&row.loc1)?,
            names.per1(&row.per1)?,
            names.point(&row.point)?,
            names.a1(&row.a1)?,
            names.a2(&row.a2)?,
        );
        if reward.insert(key, row.value).is_some() {
            return Err(parse_err(format!(
                "duplicate reward entry ({},{},{},{},{})",
                row.loc1, row.per1, row.point, row.a1, row.a2
            )));
        }
    }

    let init_particles = doc
        .init
        .particles
        .iter()
        .map(|(n, w)| Ok((names.point(n)?, *w)))
        .collect::<Result<Vec<_>, ModelError>>()?;

    GameModel::build(ModelParts {
        loc1: doc.loc1.clone(),
        per1: doc.per1.clone(),
        a1: doc.a1.clone(),
        a2: doc.a2.clone(),
        regions,
        points,
        perception,
        delta1,
        delta_e,
        reward,
        beta: doc.beta,
        init_loc1: names.loc1(&doc.init.loc1)?,
        init_per1: names.per1(&doc.init.per1)?,
        init_particles,
    })
}

/// Serializes a model back to a document, omitting rows that match the
/// sparse defaults.
pub fn doc_from_model(m: &GameModel) -> ModelDoc {
    let points = m
        .point_ids()
        .map(|e| PointDoc {
            id: m.point_name(e).to_string(),
            coords: m.point(e).coords.clone(),
            region: m.region_name(m.region_of(e)).to_string(),
        })
        .collect();

    let perception = match m.perception() {
        Perception::Mlp(net) => PerceptionDoc::Mlp(net.clone()),
        Perception::Table(_) => {
            let mut table = BTreeMap::new();
            for l in m.loc1_ids() {
                let mut row = BTreeMap::new();
                for r in m.region_ids() {
                    let per = m.perceive(l, m.region_representative(r));
                    row.insert(
                        m.region_name(r).to_string(),
                        m.per1_name(per).to_string(),
                    );
                }
                table.insert(m.loc1_name(l).to_string(), row);
            }
            PerceptionDoc::Table(table)
        }
    };

    let mut delta1 = Vec::new();
    for s1 in m.agent_states() {
        for a1 in m.a1_ids() {
            for a2 in m.a2_ids() {
                let row = m.delta1(s1, a1, a2);
                if row == [(s1.loc1, 1.0)] {
                    continue;
                }
                delta1.push(Delta1Doc {
                    loc1: m.loc1_name(s1.loc1).to_string(),
                    per1: m.per1_name(s1.per1).to_string(),
                    a1: m.a1_name(a1).to_string(),
                    a2: m.a2_name(a2).to_string(),
                    dist: row
                        .iter()
                        .map(|&(t, p)| (m.loc1_name(t).to_string(), p))
                        .collect(),
                });
            }
        }
    }

    let mut delta_e = Vec::new();
    for l in m.loc1_ids() {
        for e in m.point_ids() {
            for a1 in m.a1_ids() {
                for a2 in m.a2_ids() {
                    let row = m.delta_e(l, e, a1, a2);
                    if row == [(e, 1.0)] {
                        continue;
                    }
                    delta_e.push(DeltaEDoc {
                        loc1: m.loc1_name(l).to_string(),
                        point: m.point_name(e).to_string(),
                        a1: m.a1_name(a1).to_string(),
                        a2: m.a2_name(a2).to_string(),
                        dist: row
                            .iter()
                            .map(|&(t, p)| (m.point_name(t).to_string(), p))
                            .collect(),
                    });
                }
            }
        }
    }

    let mut reward = Vec::new();
    for s1 in m.agent_states() {
        for e in m.point_ids() {
            for a1 in m.a1_ids() {
                for a2 in m.a2_ids() {
                    let v = m.reward(s1, e, a1, a2);
                    if v != 0.0 {
                        reward.push(RewardDoc {
                            loc1: m.loc1_name(s1.loc1).to_string(),
                            per1: m.per1_name(s1.per1).to_string(),
                            point: m.point_name(e).to_string(),
                            a1: m.a1_name(a1).to_string(),
                            a2: m.a2_name(a2).to_string(),
                            value: v,
                        });
                    }
                }
            }
        }
    }

    let init = m.init_belief();
    ModelDoc {
        loc1: (0..m.num_loc1()).map(|i| m.loc1_name(Loc1Id(i)).to_string()).collect(),
        per1: (0..m.num_per1()).map(|i| m.per1_name(PerId(i)).to_string()).collect(),
        a1: m.a1_ids().map(|a| m.a1_name(a).to_string()).collect(),
        a2: m.a2_ids().map(|a| m.a2_name(a).to_string()).collect(),
        points,
        perception,
        delta1,
        delta_e,
        reward,
        beta: m.beta(),
        init: InitDoc {
            loc1: m.loc1_name(init.agent_state().loc1).to_string(),
            per1: m.per1_name(init.agent_state().per1).to_string(),
            particles: init
                .particles()
                .iter()
                .map(|&(e, w)| (m.point_name(e).to_string(), w))
                .collect(),
        },
    }
}

pub fn save_model(m: &GameModel) -> String {
    serde_json::to_string_pretty(&doc_from_model(m)).expect("model docs always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::pursuit::{gen_pursuit_evasion, PursuitConfig};

    #[test]
    fn minimal_document_loads() {
        let text = r#"{
            "loc1": ["l"], "per1": ["p"], "a1": ["a"], "a2": ["b"],
            "points": [{"id": "e", "coords": [0.0], "region": "r"}],
            "perception": {"table": {"l": {"r": "p"}}},
            "reward": [{"loc1":"l","per1":"p","point":"e","a1":"a","a2":"b","value":1.0}],
            "beta": 0.5,
            "init": {"loc1": "l", "per1": "p", "particles": [["e", 1.0]]}
        }"#;
        let m = load_model(text).unwrap();
        assert_eq!(m.num_points(), 1);
        assert_eq!(m.reward_range(), (1.0, 1.0));
        assert_eq!(m.hash(), presets::single().hash());
    }

    #[test]
    fn bad_row_sum_names_the_row() {
        let text = r#"{
            "loc1": ["l"], "per1": ["p"], "a1": ["a"], "a2": ["b"],
            "points": [{"id": "e", "coords": [0.0], "region": "r"},
                       {"id": "f", "coords": [1.0], "region": "r2"}],
            "perception": {"table": {"l": {"r": "p", "r2": "p"}}},
            "deltaE": [{"loc1":"l","point":"e","a1":"a","a2":"b","dist":[["f",0.9]]}],
            "beta": 0.5,
            "init": {"loc1": "l", "per1": "p", "particles": [["e", 1.0]]}
        }"#;
        let err = load_model(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("deltaE(l,e,a,b)"), "got: {msg}");
        assert!(msg.contains("0.9"), "got: {msg}");
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        let err = load_model("{not json").unwrap_err();
        assert!(matches!(err, ModelError::Parse(_)));
        let err = load_model(r#"{"loc1": []}"#).unwrap_err();
        assert!(matches!(err, ModelError::Parse(_)));
    }

    #[test]
    fn pursuit_like_document_with_81_points() {
        // A 3x3 pursuit variant written as a document, without the absorbing
        // point: co-located points self-loop and keep paying the capture
        // reward. 81 points, 9 percepts.
        let meta = crate::pursuit::PursuitMeta {
            width: 3,
            height: 3,
            caught: PointId(81),
        };
        let mut points = Vec::new();
        let mut table_row = BTreeMap::new();
        for p in 0..9usize {
            for e in 0..9usize {
                let (px, py) = meta.cell_xy(p);
                let (ex, ey) = meta.cell_xy(e);
                points.push(serde_json::json!({
                    "id": format!("p{p}-e{e}"),
                    "coords": [px as f64, py as f64, ex as f64, ey as f64],
                    "region": format!("g{p}-{e}")
                }));
                table_row.insert(format!("g{p}-{e}"), format!("cell-{p}"));
            }
        }
        let mut delta_e = Vec::new();
        let mut reward = Vec::new();
        let moves = crate::pursuit::MOVES;
        for p in 0..9usize {
            for e in 0..9usize {
                for (n1, d1) in moves.iter().map(|&(n, dx, dy)| (n, (dx, dy))) {
                    for (n2, d2) in moves.iter().map(|&(n, dx, dy)| (n, (dx, dy))) {
                        if p == e {
                            reward.push(serde_json::json!({
                                "loc1": "l", "per1": format!("cell-{p}"),
                                "point": format!("p{p}-e{e}"),
                                "a1": n1, "a2": n2, "value": 100.0
                            }));
                            // self-loop via the sparse default
                        } else {
                            let pn = meta.step_cell(p, d1);
                            let en = meta.step_cell(e, d2);
                            delta_e.push(serde_json::json!({
                                "loc1": "l", "point": format!("p{p}-e{e}"),
                                "a1": n1, "a2": n2,
                                "dist": [[format!("p{pn}-e{en}"), 1.0]]
                            }));
                        }
                    }
                }
            }
        }
        let doc = serde_json::json!({
            "loc1": ["l"],
            "per1": (0..9).map(|c| format!("cell-{c}")).collect::<Vec<_>>(),
            "a1": moves.iter().map(|&(n,_,_)| n).collect::<Vec<_>>(),
            "a2": moves.iter().map(|&(n,_,_)| n).collect::<Vec<_>>(),
            "points": points,
            "perception": {"table": {"l": table_row}},
            "deltaE": delta_e,
            "reward": reward,
            "beta": 0.7,
            "init": {"loc1": "l", "per1": "cell-0",
                     "particles": (1..9).map(|e| (format!("p0-e{e}"), 0.125)).collect::<Vec<_>>()}
        });
        let m = load_model(&doc.to_string()).unwrap();
        assert_eq!(m.num_points(), 81);
        assert_eq!(m.num_per1(), 9);
        assert_eq!(m.reward_range(), (0.0, 100.0));
    }

    #[test]
    fn round_trip_preserves_hash() {
        for m in [
            presets::single(),
            presets::matching_pennies(),
            presets::hide(),
            presets::random_game(3, &presets::RandomGameConfig::partial(7, 2, 2, 3)),
        ] {
            let text = save_model(&m);
            let m2 = load_model(&text).unwrap();
            assert_eq!(m.hash(), m2.hash());
        }
        let (m, _) = gen_pursuit_evasion(&PursuitConfig::standard(2, 2, 0.5, 1.0)).unwrap();
        let m2 = load_model(&save_model(&m)).unwrap();
        assert_eq!(m.hash(), m2.hash());
    }
}
