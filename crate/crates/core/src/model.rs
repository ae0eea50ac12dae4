//! Game model: a one-sided partially observable stochastic game over a finite
//! set of environment points carrying a region partition.
//!
//! The partially informed agent has local states `Loc1` and perceives the
//! environment only through a percept in `Per1`, produced by a perception
//! function that is constant on every `(loc1, region)` pair. The fully
//! informed agent observes everything. Dynamics factor into a local-state
//! transition `delta1` and a finite-branching environment transition
//! `delta_e`; rewards are region-constant, which is what makes
//! piecewise-constant value representations sound.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::belief::WeightedBelief;
use crate::mlp::MlpNet;

/// Tolerance for probability-vector checks.
pub const PROB_TOL: f64 = 1e-9;

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub usize);
    };
}

id_type!(
    /// Index into the local-state set `Loc1`.
    Loc1Id
);
id_type!(
    /// Index into the percept set `Per1`.
    PerId
);
id_type!(
    /// Index into agent 1's action set.
    A1Id
);
id_type!(
    /// Index into agent 2's action set.
    A2Id
);
id_type!(
    /// Index into the environment point set.
    PointId
);
id_type!(
    /// Index into the region partition.
    RegionId
);

/// Agent 1's observable state: local state plus latest percept.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct AgentState {
    pub loc1: Loc1Id,
    pub per1: PerId,
}

impl AgentState {
    pub fn new(loc1: Loc1Id, per1: PerId) -> Self {
        AgentState { loc1, per1 }
    }
}

/// An environment point: a representative location in the (conceptually
/// continuous) environment, tagged with the region it represents.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvPoint {
    pub name: String,
    pub coords: Vec<f64>,
    pub region: RegionId,
}

/// Perception function: either an explicit table over `(loc1, region)` or a
/// ReLU classifier evaluated at point coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Perception {
    Table(BTreeMap<(Loc1Id, RegionId), PerId>),
    Mlp(MlpNet),
}

/// Raw model content prior to validation. `GameModel::build` checks every
/// invariant and derives dense lookup tables.
///
/// Sparse conventions: a missing `delta1` row means the local state is
/// unchanged, a missing `delta_e` row means the environment point is
/// unchanged, and a missing reward entry is 0.
#[derive(Debug, Clone)]
pub struct ModelParts {
    pub loc1: Vec<String>,
    pub per1: Vec<String>,
    pub a1: Vec<String>,
    pub a2: Vec<String>,
    pub regions: Vec<String>,
    pub points: Vec<EnvPoint>,
    pub perception: Perception,
    pub delta1: BTreeMap<(Loc1Id, PerId, A1Id, A2Id), Vec<(Loc1Id, f64)>>,
    pub delta_e: BTreeMap<(Loc1Id, PointId, A1Id, A2Id), Vec<(PointId, f64)>>,
    pub reward: BTreeMap<(Loc1Id, PerId, PointId, A1Id, A2Id), f64>,
    pub beta: f64,
    pub init_loc1: Loc1Id,
    pub init_per1: PerId,
    pub init_particles: Vec<(PointId, f64)>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error at {path}: {msg}")]
    Validation { path: String, msg: String },
}

fn invalid(path: impl Into<String>, msg: impl Into<String>) -> ModelError {
    ModelError::Validation {
        path: path.into(),
        msg: msg.into(),
    }
}

/// A validated, immutable game model. Construction goes through
/// [`GameModel::build`]; afterwards the model is safe to share across threads.
#[derive(Debug, Clone)]
pub struct GameModel {
    loc1: Vec<String>,
    per1: Vec<String>,
    a1: Vec<String>,
    a2: Vec<String>,
    regions: Vec<String>,
    points: Vec<EnvPoint>,
    perception: Perception,
    /// Percept per `(loc1, region)`, row-major by loc1.
    obs_table: Vec<PerId>,
    /// Points per region, ascending ids; the first entry is the
    /// representative used by piecewise-constant backups.
    region_points: Vec<Vec<PointId>>,
    /// Dense `delta1` rows indexed by (loc1, per1, a1, a2).
    delta1: Vec<Vec<(Loc1Id, f64)>>,
    /// Dense `delta_e` rows indexed by (loc1, point, a1, a2).
    delta_e: Vec<Vec<(PointId, f64)>>,
    /// Dense rewards indexed by (loc1, per1, point, a1, a2).
    reward: Vec<f64>,
    beta: f64,
    init: WeightedBelief,
    /// Points from which no future reward can flow: every `delta_e` row is a
    /// self-loop and every reward entry is 0.
    absorbing: Vec<bool>,
    hash: String,
}

impl GameModel {
    pub fn build(parts: ModelParts) -> Result<GameModel, ModelError> {
        let nl = parts.loc1.len();
        let np = parts.per1.len();
        let na1 = parts.a1.len();
        let na2 = parts.a2.len();
        let ne = parts.points.len();
        let nr = parts.regions.len();
        for (what, n) in [
            ("loc1", nl),
            ("per1", np),
            ("a1", na1),
            ("a2", na2),
            ("points", ne),
            ("regions", nr),
        ] {
            if n == 0 {
                return Err(invalid(what, "set must be non-empty"));
            }
        }
        if !(parts.beta > 0.0 && parts.beta < 1.0) {
            return Err(invalid("beta", format!("discount {} not in (0,1)", parts.beta)));
        }

        let mut region_points: Vec<Vec<PointId>> = vec![Vec::new(); nr];
        let coord_dim = parts.points[0].coords.len();
        for (i, pt) in parts.points.iter().enumerate() {
            if pt.region.0 >= nr {
                return Err(invalid(
                    format!("points[{}].region", pt.name),
                    "region id out of range",
                ));
            }
            if pt.coords.len() != coord_dim {
                return Err(invalid(
                    format!("points[{}].coords", pt.name),
                    format!("expected {coord_dim} coordinates, got {}", pt.coords.len()),
                ));
            }
            region_points[pt.region.0].push(PointId(i));
        }
        for (r, pts) in region_points.iter().enumerate() {
            if pts.is_empty() {
                return Err(invalid(
                    format!("regions[{}]", parts.regions[r]),
                    "region contains no points",
                ));
            }
        }

        // Perception: resolve to a (loc1, region) table and check the
        // constant-per-region invariant exhaustively for the classifier.
        let mut obs_table = vec![PerId(usize::MAX); nl * nr];
        match &parts.perception {
            Perception::Table(table) => {
                for l in 0..nl {
                    for r in 0..nr {
                        match table.get(&(Loc1Id(l), RegionId(r))) {
                            Some(&p) if p.0 < np => obs_table[l * nr + r] = p,
                            Some(&p) => {
                                return Err(invalid(
                                    format!(
                                        "perception({},{})",
                                        parts.loc1[l], parts.regions[r]
                                    ),
                                    format!("percept id {} out of range", p.0),
                                ))
                            }
                            None => {
                                return Err(invalid(
                                    format!(
                                        "perception({},{})",
                                        parts.loc1[l], parts.regions[r]
                                    ),
                                    "missing table entry",
                                ))
                            }
                        }
                    }
                }
            }
            Perception::Mlp(net) => {
                net.validate(coord_dim, np).map_err(|e| invalid("perception.mlp", e.to_string()))?;
                for l in 0..nl {
                    for (r, pts) in region_points.iter().enumerate() {
                        let mut seen: Option<(PerId, PointId)> = None;
                        for &p in pts {
                            let class = PerId(net.classify(&parts.points[p.0].coords));
                            match seen {
                                None => seen = Some((class, p)),
                                Some((c, first)) if c != class => {
                                    return Err(invalid(
                                        format!(
                                            "perception({},{})",
                                            parts.loc1[l], parts.regions[r]
                                        ),
                                        format!(
                                            "points {} and {} map to different percepts",
                                            parts.points[first.0].name, parts.points[p.0].name
                                        ),
                                    ))
                                }
                                Some(_) => {}
                            }
                        }
                        obs_table[l * nr + r] = seen.unwrap().0;
                    }
                }
            }
        }

        let check_dist = |path: &str, dist: &[(usize, f64)], n: usize| -> Result<(), ModelError> {
            if dist.is_empty() {
                return Err(invalid(path, "empty support"));
            }
            let mut sum = 0.0;
            let mut seen = vec![false; n];
            for &(t, p) in dist {
                if t >= n {
                    return Err(invalid(path, format!("target id {t} out of range")));
                }
                if seen[t] {
                    return Err(invalid(path, format!("duplicate target id {t}")));
                }
                seen[t] = true;
                if !(p >= 0.0) || !p.is_finite() {
                    return Err(invalid(path, format!("probability {p} is negative or not finite")));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(invalid(path, format!("probabilities sum to {sum}")));
            }
            Ok(())
        };

        // delta1: dense with identity default.
        let mut delta1: Vec<Vec<(Loc1Id, f64)>> = Vec::with_capacity(nl * np * na1 * na2);
        for l in 0..nl {
            for per in 0..np {
                for i1 in 0..na1 {
                    for i2 in 0..na2 {
                        let key = (Loc1Id(l), PerId(per), A1Id(i1), A2Id(i2));
                        let row = match parts.delta1.get(&key) {
                            Some(dist) => {
                                let path = format!(
                                    "delta1({},{},{},{})",
                                    parts.loc1[l], parts.per1[per], parts.a1[i1], parts.a2[i2]
                                );
                                let raw: Vec<(usize, f64)> =
                                    dist.iter().map(|&(t, p)| (t.0, p)).collect();
                                check_dist(&path, &raw, nl)?;
                                let mut row: Vec<(Loc1Id, f64)> = dist
                                    .iter()
                                    .filter(|&&(_, p)| p > 0.0)
                                    .copied()
                                    .collect();
                                row.sort_by_key(|&(t, _)| t);
                                row
                            }
                            None => vec![(Loc1Id(l), 1.0)],
                        };
                        delta1.push(row);
                    }
                }
            }
        }

        // delta_e: dense with self-loop default.
        let mut delta_e: Vec<Vec<(PointId, f64)>> = Vec::with_capacity(nl * ne * na1 * na2);
        for l in 0..nl {
            for e in 0..ne {
                for i1 in 0..na1 {
                    for i2 in 0..na2 {
                        let key = (Loc1Id(l), PointId(e), A1Id(i1), A2Id(i2));
                        let row = match parts.delta_e.get(&key) {
                            Some(dist) => {
                                let path = format!(
                                    "deltaE({},{},{},{})",
                                    parts.loc1[l],
                                    parts.points[e].name,
                                    parts.a1[i1],
                                    parts.a2[i2]
                                );
                                let raw: Vec<(usize, f64)> =
                                    dist.iter().map(|&(t, p)| (t.0, p)).collect();
                                check_dist(&path, &raw, ne)?;
                                let mut row: Vec<(PointId, f64)> = dist
                                    .iter()
                                    .filter(|&&(_, p)| p > 0.0)
                                    .copied()
                                    .collect();
                                row.sort_by_key(|&(t, _)| t);
                                row
                            }
                            None => vec![(PointId(e), 1.0)],
                        };
                        delta_e.push(row);
                    }
                }
            }
        }

        // Rewards: dense with default 0, then the region-constancy check.
        let mut reward = vec![0.0; nl * np * ne * na1 * na2];
        for (&(l, per, e, i1, i2), &v) in &parts.reward {
            let path = || {
                format!(
                    "reward({},{},{},{},{})",
                    parts.loc1[l.0], parts.per1[per.0], parts.points[e.0].name, parts.a1[i1.0],
                    parts.a2[i2.0]
                )
            };
            if l.0 >= nl || per.0 >= np || e.0 >= ne || i1.0 >= na1 || i2.0 >= na2 {
                return Err(invalid("reward", "index out of range"));
            }
            if !v.is_finite() {
                return Err(invalid(path(), "reward is not finite"));
            }
            reward[(((l.0 * np + per.0) * ne + e.0) * na1 + i1.0) * na2 + i2.0] = v;
        }
        for l in 0..nl {
            for per in 0..np {
                for (r, pts) in region_points.iter().enumerate() {
                    for i1 in 0..na1 {
                        for i2 in 0..na2 {
                            let first = pts[0];
                            let v0 = reward
                                [(((l * np + per) * ne + first.0) * na1 + i1) * na2 + i2];
                            for &p in &pts[1..] {
                                let v = reward
                                    [(((l * np + per) * ne + p.0) * na1 + i1) * na2 + i2];
                                if v != v0 {
                                    return Err(invalid(
                                        format!(
                                            "reward({},{},{},{},{})",
                                            parts.loc1[l],
                                            parts.per1[per],
                                            parts.regions[r],
                                            parts.a1[i1],
                                            parts.a2[i2]
                                        ),
                                        format!(
                                            "not region-constant: {} at {} vs {} at {}",
                                            v0,
                                            parts.points[first.0].name,
                                            v,
                                            parts.points[p.0].name
                                        ),
                                    ));
                                }
                            }
                        }
                    }
                }
            }
        }

        // Initial belief.
        if parts.init_loc1.0 >= nl {
            return Err(invalid("init.loc1", "out of range"));
        }
        if parts.init_per1.0 >= np {
            return Err(invalid("init.per1", "out of range"));
        }
        for &(e, _) in &parts.init_particles {
            if e.0 >= ne {
                return Err(invalid("init.particles", format!("point id {} out of range", e.0)));
            }
            let region = parts.points[e.0].region;
            let observed = obs_table[parts.init_loc1.0 * nr + region.0];
            if observed != parts.init_per1 {
                return Err(invalid(
                    format!("init.particles[{}]", parts.points[e.0].name),
                    format!(
                        "perception at this point yields percept {} but init declares {}",
                        parts.per1[observed.0], parts.per1[parts.init_per1.0]
                    ),
                ));
            }
        }
        let init = WeightedBelief::new(
            AgentState::new(parts.init_loc1, parts.init_per1),
            parts.init_particles.clone(),
        )
        .map_err(|e| invalid("init.particles", e.to_string()))?;

        // Absorbing points: no reward can ever flow once entered.
        let mut absorbing = vec![false; ne];
        'points: for e in 0..ne {
            for l in 0..nl {
                for i1 in 0..na1 {
                    for i2 in 0..na2 {
                        let row = &delta_e[((l * ne + e) * na1 + i1) * na2 + i2];
                        if row.len() != 1 || row[0].0 != PointId(e) {
                            continue 'points;
                        }
                        for per in 0..np {
                            if reward[(((l * np + per) * ne + e) * na1 + i1) * na2 + i2] != 0.0 {
                                continue 'points;
                            }
                        }
                    }
                }
            }
            absorbing[e] = true;
        }

        let mut model = GameModel {
            loc1: parts.loc1,
            per1: parts.per1,
            a1: parts.a1,
            a2: parts.a2,
            regions: parts.regions,
            points: parts.points,
            perception: parts.perception,
            obs_table,
            region_points,
            delta1,
            delta_e,
            reward,
            beta: parts.beta,
            init,
            absorbing,
            hash: String::new(),
        };
        model.hash = model.compute_hash();
        Ok(model)
    }

    /// Content hash over the semantic model (names, tables, discount, initial
    /// belief). Two documents describing the same model hash identically.
    fn compute_hash(&self) -> String {
        let mut h = Sha256::new();
        let push_u64 = |h: &mut Sha256, v: u64| h.update(v.to_le_bytes());
        let push_f64 = |h: &mut Sha256, v: f64| h.update(v.to_bits().to_le_bytes());
        let push_str = |h: &mut Sha256, s: &str| {
            h.update((s.len() as u64).to_le_bytes());
            h.update(s.as_bytes());
        };
        h.update(b"osp-model-v1");
        for names in [&self.loc1, &self.per1, &self.a1, &self.a2, &self.regions] {
            push_u64(&mut h, names.len() as u64);
            for n in names {
                push_str(&mut h, n);
            }
        }
        push_u64(&mut h, self.points.len() as u64);
        for p in &self.points {
            push_str(&mut h, &p.name);
            push_u64(&mut h, p.region.0 as u64);
            push_u64(&mut h, p.coords.len() as u64);
            for &c in &p.coords {
                push_f64(&mut h, c);
            }
        }
        for &p in &self.obs_table {
            push_u64(&mut h, p.0 as u64);
        }
        for row in &self.delta1 {
            push_u64(&mut h, row.len() as u64);
            for &(t, p) in row {
                push_u64(&mut h, t.0 as u64);
                push_f64(&mut h, p);
            }
        }
        for row in &self.delta_e {
            push_u64(&mut h, row.len() as u64);
            for &(t, p) in row {
                push_u64(&mut h, t.0 as u64);
                push_f64(&mut h, p);
            }
        }
        for &r in &self.reward {
            push_f64(&mut h, r);
        }
        push_f64(&mut h, self.beta);
        push_u64(&mut h, self.init.agent_state().loc1.0 as u64);
        push_u64(&mut h, self.init.agent_state().per1.0 as u64);
        for &(e, w) in self.init.particles() {
            push_u64(&mut h, e.0 as u64);
            push_f64(&mut h, w);
        }
        let digest = h.finalize();
        let mut out = String::with_capacity(64);
        for b in digest {
            use std::fmt::Write;
            let _ = write!(out, "{b:02x}");
        }
        out
    }

    pub fn num_loc1(&self) -> usize {
        self.loc1.len()
    }
    pub fn num_per1(&self) -> usize {
        self.per1.len()
    }
    pub fn num_a1(&self) -> usize {
        self.a1.len()
    }
    pub fn num_a2(&self) -> usize {
        self.a2.len()
    }
    pub fn num_points(&self) -> usize {
        self.points.len()
    }
    pub fn num_regions(&self) -> usize {
        self.regions.len()
    }
    pub fn num_agent_states(&self) -> usize {
        self.loc1.len() * self.per1.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn init_belief(&self) -> &WeightedBelief {
        &self.init
    }
    pub fn hash(&self) -> &str {
        &self.hash
    }
    pub fn perception(&self) -> &Perception {
        &self.perception
    }

    pub fn loc1_name(&self, l: Loc1Id) -> &str {
        &self.loc1[l.0]
    }
    pub fn per1_name(&self, p: PerId) -> &str {
        &self.per1[p.0]
    }
    pub fn a1_name(&self, a: A1Id) -> &str {
        &self.a1[a.0]
    }
    pub fn a2_name(&self, a: A2Id) -> &str {
        &self.a2[a.0]
    }
    pub fn region_name(&self, r: RegionId) -> &str {
        &self.regions[r.0]
    }
    pub fn point(&self, e: PointId) -> &EnvPoint {
        &self.points[e.0]
    }
    pub fn point_name(&self, e: PointId) -> &str {
        &self.points[e.0].name
    }

    pub fn find_point(&self, name: &str) -> Option<PointId> {
        self.points.iter().position(|p| p.name == name).map(PointId)
    }
    pub fn find_a1(&self, name: &str) -> Option<A1Id> {
        self.a1.iter().position(|a| a == name).map(A1Id)
    }
    pub fn find_a2(&self, name: &str) -> Option<A2Id> {
        self.a2.iter().position(|a| a == name).map(A2Id)
    }

    pub fn a1_ids(&self) -> impl Iterator<Item = A1Id> {
        (0..self.a1.len()).map(A1Id)
    }
    pub fn a2_ids(&self) -> impl Iterator<Item = A2Id> {
        (0..self.a2.len()).map(A2Id)
    }
    pub fn point_ids(&self) -> impl Iterator<Item = PointId> {
        (0..self.points.len()).map(PointId)
    }
    pub fn region_ids(&self) -> impl Iterator<Item = RegionId> {
        (0..self.regions.len()).map(RegionId)
    }
    pub fn loc1_ids(&self) -> impl Iterator<Item = Loc1Id> {
        (0..self.loc1.len()).map(Loc1Id)
    }
    pub fn agent_states(&self) -> impl Iterator<Item = AgentState> + '_ {
        let np = self.per1.len();
        (0..self.loc1.len() * np)
            .map(move |i| AgentState::new(Loc1Id(i / np), PerId(i % np)))
    }

    /// Flat index of an agent state, usable for dense per-state tables.
    pub fn s1_index(&self, s1: AgentState) -> usize {
        s1.loc1.0 * self.per1.len() + s1.per1.0
    }

    pub fn region_of(&self, e: PointId) -> RegionId {
        self.points[e.0].region
    }
    pub fn region_points(&self, r: RegionId) -> &[PointId] {
        &self.region_points[r.0]
    }
    /// The designated representative of a region: its lowest-id point.
    pub fn region_representative(&self, r: RegionId) -> PointId {
        self.region_points[r.0][0]
    }

    pub fn is_absorbing(&self, e: PointId) -> bool {
        self.absorbing[e.0]
    }

    /// The percept agent 1 receives at `(loc1, point)`. Deterministic and
    /// constant per `(loc1, region)`.
    pub fn perceive(&self, loc1: Loc1Id, e: PointId) -> PerId {
        self.obs_table[loc1.0 * self.regions.len() + self.points[e.0].region.0]
    }

    pub fn delta1(&self, s1: AgentState, a1: A1Id, a2: A2Id) -> &[(Loc1Id, f64)] {
        let np = self.per1.len();
        let idx = ((s1.loc1.0 * np + s1.per1.0) * self.a1.len() + a1.0) * self.a2.len() + a2.0;
        &self.delta1[idx]
    }

    pub fn delta_e(&self, loc1: Loc1Id, e: PointId, a1: A1Id, a2: A2Id) -> &[(PointId, f64)] {
        let idx = ((loc1.0 * self.points.len() + e.0) * self.a1.len() + a1.0) * self.a2.len()
            + a2.0;
        &self.delta_e[idx]
    }

    pub fn reward(&self, s1: AgentState, e: PointId, a1: A1Id, a2: A2Id) -> f64 {
        let np = self.per1.len();
        let ne = self.points.len();
        let idx = (((s1.loc1.0 * np + s1.per1.0) * ne + e.0) * self.a1.len() + a1.0)
            * self.a2.len()
            + a2.0;
        self.reward[idx]
    }

    /// One-step joint transition: the product of `delta1` and `delta_e`, with
    /// the successor percept forced by perception at the successor point.
    pub fn joint_transition(
        &self,
        s: (AgentState, PointId),
        a: (A1Id, A2Id),
    ) -> Vec<((AgentState, PointId), f64)> {
        let (s1, e) = s;
        let (a1, a2) = a;
        let locs = self.delta1(s1, a1, a2);
        let envs = self.delta_e(s1.loc1, e, a1, a2);
        let mut out = Vec::with_capacity(locs.len() * envs.len());
        for &(loc_next, p1) in locs {
            for &(e_next, pe) in envs {
                let per_next = self.perceive(loc_next, e_next);
                out.push(((AgentState::new(loc_next, per_next), e_next), p1 * pe));
            }
        }
        debug_assert!(
            (out.iter().map(|&(_, p)| p).sum::<f64>() - 1.0).abs() <= PROB_TOL,
            "joint transition mass must be 1"
        );
        out
    }

    /// (min, max) over the full dense reward table.
    pub fn reward_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &r in &self.reward {
            lo = lo.min(r);
            hi = hi.max(r);
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn single_point_model_builds_and_self_loops() {
        let m = presets::single();
        assert_eq!(m.num_points(), 1);
        let s = (m.init_belief().agent_state(), PointId(0));
        let next = m.joint_transition(s, (A1Id(0), A2Id(0)));
        assert_eq!(next.len(), 1);
        assert_eq!(next[0].0, s);
        assert!((next[0].1 - 1.0).abs() < 1e-12);
        assert!(m.reward_range() == (1.0, 1.0));
    }

    #[test]
    fn broken_stochasticity_is_rejected_with_row_path() {
        let mut parts = presets::single_parts();
        parts.delta_e.insert(
            (Loc1Id(0), PointId(0), A1Id(0), A2Id(0)),
            vec![(PointId(0), 0.9)],
        );
        let err = GameModel::build(parts).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("deltaE"), "unexpected message: {msg}");
        assert!(msg.contains("0.9"), "unexpected message: {msg}");
    }

    #[test]
    fn product_transition_splits_on_loc() {
        // delta1 randomizes the local state, delta_e is deterministic, and
        // the two successor locs perceive the same point differently.
        let mut parts = presets::single_parts();
        parts.loc1 = vec!["l".into(), "l2".into()];
        parts.per1 = vec!["p".into(), "q".into()];
        parts.perception = Perception::Table(BTreeMap::from([
            ((Loc1Id(0), RegionId(0)), PerId(0)),
            ((Loc1Id(1), RegionId(0)), PerId(1)),
        ]));
        parts.delta1.insert(
            (Loc1Id(0), PerId(0), A1Id(0), A2Id(0)),
            vec![(Loc1Id(0), 0.5), (Loc1Id(1), 0.5)],
        );
        let m = GameModel::build(parts).unwrap();
        let s1 = AgentState::new(Loc1Id(0), PerId(0));
        let next = m.joint_transition((s1, PointId(0)), (A1Id(0), A2Id(0)));
        assert_eq!(next.len(), 2);
        assert_eq!(next[0].0 .0, AgentState::new(Loc1Id(0), PerId(0)));
        assert_eq!(next[1].0 .0, AgentState::new(Loc1Id(1), PerId(1)));
        assert!((next[0].1 - 0.5).abs() < 1e-12);
        assert!((next[1].1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn region_constant_reward_enforced() {
        // Two points in one region with different rewards must be rejected.
        let mut parts = presets::single_parts();
        parts.points = vec![
            EnvPoint {
                name: "e0".into(),
                coords: vec![0.0],
                region: RegionId(0),
            },
            EnvPoint {
                name: "e1".into(),
                coords: vec![1.0],
                region: RegionId(0),
            },
        ];
        parts
            .reward
            .insert((Loc1Id(0), PerId(0), PointId(0), A1Id(0), A2Id(0)), 1.0);
        parts
            .reward
            .insert((Loc1Id(0), PerId(0), PointId(1), A1Id(0), A2Id(0)), 2.0);
        let err = GameModel::build(parts).unwrap_err();
        assert!(err.to_string().contains("not region-constant"));
    }

    #[test]
    fn init_percept_consistency_enforced() {
        let mut parts = presets::single_parts();
        parts.per1 = vec!["p".into(), "q".into()];
        parts.init_per1 = PerId(1); // table still maps the region to percept 0
        let err = GameModel::build(parts).unwrap_err();
        assert!(err.to_string().contains("init.particles"));
    }

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let a = presets::single();
        let b = presets::single();
        assert_eq!(a.hash(), b.hash());
        let mut parts = presets::single_parts();
        parts.beta = 0.6;
        let c = GameModel::build(parts).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn absorbing_detection() {
        let m = presets::hide();
        // The sink point absorbs; the two hiding points do not.
        let sink = m.find_point("sink").unwrap();
        assert!(m.is_absorbing(sink));
        assert!(!m.is_absorbing(m.find_point("left").unwrap()));
    }
}
