//! Particle beliefs and the Bayesian updates both online agents rely on.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{A1Id, A2Id, AgentState, GameModel, PointId, PROB_TOL};

/// Particles below this weight are dropped after an update, then the belief
/// is renormalized.
pub const PRUNE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum BeliefError {
    #[error("belief has no particles")]
    Empty,
    #[error("particle weight {0} must be positive")]
    NonPositiveWeight(f64),
    #[error("particle weights sum to {0}, expected 1")]
    BadNormalization(f64),
    #[error("duplicate particle for point id {0}")]
    DuplicatePoint(usize),
    #[error(
        "observation has zero probability under the assumed opponent strategy \
         (action {a1:?}, next agent state {s1_next:?})"
    )]
    ZeroMassObservation { a1: A1Id, s1_next: AgentState },
}

/// A belief of the partially informed agent: its agent state plus a weighted
/// particle set over environment points. Particles are kept sorted by point
/// id, weights are positive and sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedBelief {
    agent_state: AgentState,
    particles: Vec<(PointId, f64)>,
}

impl WeightedBelief {
    pub fn new(
        agent_state: AgentState,
        mut particles: Vec<(PointId, f64)>,
    ) -> Result<Self, BeliefError> {
        if particles.is_empty() {
            return Err(BeliefError::Empty);
        }
        particles.sort_by_key(|&(e, _)| e);
        let mut sum = 0.0;
        for w in particles.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(BeliefError::DuplicatePoint(w[0].0 .0));
            }
        }
        for &(_, k) in &particles {
            if !(k > 0.0) {
                return Err(BeliefError::NonPositiveWeight(k));
            }
            sum += k;
        }
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(BeliefError::BadNormalization(sum));
        }
        Ok(WeightedBelief {
            agent_state,
            particles,
        })
    }

    /// A belief concentrated on one point.
    pub fn point(agent_state: AgentState, e: PointId) -> Self {
        WeightedBelief {
            agent_state,
            particles: vec![(e, 1.0)],
        }
    }

    pub fn agent_state(&self) -> AgentState {
        self.agent_state
    }

    pub fn particles(&self) -> &[(PointId, f64)] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weight_of(&self, e: PointId) -> f64 {
        match self.particles.binary_search_by_key(&e, |&(p, _)| p) {
            Ok(i) => self.particles[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn contains(&self, e: PointId) -> bool {
        self.weight_of(e) > 0.0
    }

    /// L1 distance between the particle vectors over the union of supports.
    pub fn l1_distance(&self, other: &WeightedBelief) -> f64 {
        let mut d = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < self.particles.len() || j < other.particles.len() {
            match (self.particles.get(i), other.particles.get(j)) {
                (Some(&(ea, wa)), Some(&(eb, wb))) => {
                    if ea == eb {
                        d += (wa - wb).abs();
                        i += 1;
                        j += 1;
                    } else if ea < eb {
                        d += wa;
                        i += 1;
                    } else {
                        d += wb;
                        j += 1;
                    }
                }
                (Some(&(_, wa)), None) => {
                    d += wa;
                    i += 1;
                }
                (None, Some(&(_, wb))) => {
                    d += wb;
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        d
    }
}

/// Agent 1's stage strategy: a distribution over its actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStrategy1 {
    probs: Vec<f64>,
}

impl StageStrategy1 {
    pub fn new(probs: Vec<f64>) -> Result<Self, BeliefError> {
        let sum: f64 = probs.iter().sum();
        for &p in &probs {
            if !(p >= 0.0) {
                return Err(BeliefError::NonPositiveWeight(p));
            }
        }
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(BeliefError::BadNormalization(sum));
        }
        Ok(StageStrategy1 { probs })
    }

    pub fn uniform(n: usize) -> Self {
        StageStrategy1 {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn pure(n: usize, a: A1Id) -> Self {
        let mut probs = vec![0.0; n];
        probs[a.0] = 1.0;
        StageStrategy1 { probs }
    }

    pub fn prob(&self, a: A1Id) -> f64 {
        self.probs[a.0]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Agent 2's stage strategy: a distribution over its actions conditioned on
/// the full state, with a uniform default row used off-support. Rows are
/// kept sorted by (agent state, point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStrategy2 {
    rows: Vec<((AgentState, PointId), Vec<f64>)>,
    default: Vec<f64>,
}

impl StageStrategy2 {
    pub fn uniform(num_a2: usize) -> Self {
        StageStrategy2 {
            rows: Vec::new(),
            default: vec![1.0 / num_a2 as f64; num_a2],
        }
    }

    pub fn with_rows(
        num_a2: usize,
        rows: BTreeMap<(AgentState, PointId), Vec<f64>>,
    ) -> Result<Self, BeliefError> {
        for row in rows.values() {
            let sum: f64 = row.iter().sum();
            for &p in row {
                if !(p >= 0.0) {
                    return Err(BeliefError::NonPositiveWeight(p));
                }
            }
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(BeliefError::BadNormalization(sum));
            }
        }
        Ok(StageStrategy2 {
            rows: rows.into_iter().collect(),
            default: vec![1.0 / num_a2 as f64; num_a2],
        })
    }

    /// The probability row at `(s1, e)`, falling back to the uniform default.
    pub fn row(&self, s1: AgentState, e: PointId) -> &[f64] {
        match self.rows.binary_search_by_key(&(s1, e), |&(k, _)| k) {
            Ok(i) => &self.rows[i].1,
            Err(_) => &self.default,
        }
    }

    pub fn has_row(&self, s1: AgentState, e: PointId) -> bool {
        self.rows.binary_search_by_key(&(s1, e), |&(k, _)| k).is_ok()
    }

    pub fn prob(&self, s1: AgentState, e: PointId, a2: A2Id) -> f64 {
        self.row(s1, e)[a2.0]
    }

    pub fn rows(&self) -> &[((AgentState, PointId), Vec<f64>)] {
        &self.rows
    }
}

/// Bayesian belief update after agent 1 played `a1`, assumed agent 2 played
/// `u2`, and observed the successor agent state `s1_next`.
///
/// The posterior weight of a successor point is the prior-weighted total
/// probability of reaching it consistently with the observation; particles
/// below `prune_tol` are dropped and the rest renormalized.
pub fn update_belief_with(
    model: &GameModel,
    b: &WeightedBelief,
    a1: A1Id,
    u2: &StageStrategy2,
    s1_next: AgentState,
    prune_tol: f64,
) -> Result<WeightedBelief, BeliefError> {
    let s1 = b.agent_state();
    let mut mass: BTreeMap<PointId, f64> = BTreeMap::new();
    for &(e, kappa) in b.particles() {
        let u2_row = u2.row(s1, e);
        for a2 in model.a2_ids() {
            let ua2 = u2_row[a2.0];
            if ua2 == 0.0 {
                continue;
            }
            let mut p_loc = 0.0;
            for &(loc_next, p) in model.delta1(s1, a1, a2) {
                if loc_next == s1_next.loc1 {
                    p_loc += p;
                }
            }
            if p_loc == 0.0 {
                continue;
            }
            for &(e_next, pe) in model.delta_e(s1.loc1, e, a1, a2) {
                if model.perceive(s1_next.loc1, e_next) == s1_next.per1 {
                    *mass.entry(e_next).or_insert(0.0) += kappa * ua2 * p_loc * pe;
                }
            }
        }
    }
    let total: f64 = mass.values().sum();
    if total <= 0.0 {
        return Err(BeliefError::ZeroMassObservation { a1, s1_next });
    }
    let mut particles: Vec<(PointId, f64)> = mass
        .into_iter()
        .filter_map(|(e, m)| {
            let w = m / total;
            (w >= prune_tol).then_some((e, w))
        })
        .collect();
    let kept: f64 = particles.iter().map(|&(_, w)| w).sum();
    if kept <= 0.0 {
        return Err(BeliefError::ZeroMassObservation { a1, s1_next });
    }
    for (_, w) in &mut particles {
        *w /= kept;
    }
    Ok(WeightedBelief {
        agent_state: s1_next,
        particles,
    })
}

pub fn update_belief(
    model: &GameModel,
    b: &WeightedBelief,
    a1: A1Id,
    u2: &StageStrategy2,
    s1_next: AgentState,
) -> Result<WeightedBelief, BeliefError> {
    update_belief_with(model, b, a1, u2, s1_next, PRUNE_TOL)
}

/// Unnormalized posterior mass of the observation `(a1, s1_next)` from `b`
/// under assumed `u2`, before agent 1's own action probability is applied.
/// This is the normalizer of [`update_belief`] and the per-action factor of
/// [`action_obs_prob`].
pub fn observation_mass(
    model: &GameModel,
    b: &WeightedBelief,
    a1: A1Id,
    u2: &StageStrategy2,
    s1_next: AgentState,
) -> f64 {
    let s1 = b.agent_state();
    let mut total = 0.0;
    for &(e, kappa) in b.particles() {
        let u2_row = u2.row(s1, e);
        for a2 in model.a2_ids() {
            let ua2 = u2_row[a2.0];
            if ua2 == 0.0 {
                continue;
            }
            let mut p_loc = 0.0;
            for &(loc_next, p) in model.delta1(s1, a1, a2) {
                if loc_next == s1_next.loc1 {
                    p_loc += p;
                }
            }
            if p_loc == 0.0 {
                continue;
            }
            for &(e_next, pe) in model.delta_e(s1.loc1, e, a1, a2) {
                if model.perceive(s1_next.loc1, e_next) == s1_next.per1 {
                    total += kappa * ua2 * p_loc * pe;
                }
            }
        }
    }
    total
}

/// Joint probability of agent 1 playing `a1` and then observing agent state
/// `s1_next`, under stage strategies `u1` and `u2` at belief `b`. The entries
/// sum to 1 over all `(a1, s1_next)`.
pub fn action_obs_prob(
    model: &GameModel,
    b: &WeightedBelief,
    u1: &StageStrategy1,
    u2: &StageStrategy2,
) -> BTreeMap<(A1Id, AgentState), f64> {
    let mut out = BTreeMap::new();
    for a1 in model.a1_ids() {
        let ua1 = u1.prob(a1);
        if ua1 == 0.0 {
            continue;
        }
        for s1_next in model.agent_states() {
            let mass = observation_mass(model, b, a1, u2, s1_next);
            if mass > 0.0 {
                out.insert((a1, s1_next), ua1 * mass);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Loc1Id;
    use crate::model::PerId;
    use crate::presets;

    #[test]
    fn single_point_belief_unchanged() {
        let m = presets::single();
        let b = m.init_belief().clone();
        let u2 = StageStrategy2::uniform(m.num_a2());
        let b2 = update_belief(&m, &b, A1Id(0), &u2, b.agent_state()).unwrap();
        assert_eq!(b, b2);
    }

    #[test]
    fn symmetric_hide_posterior_stays_uniform() {
        // Constant percept, self-loop dynamics, uniform opponent: the
        // posterior over the two hiding points cannot move.
        let m = presets::hide_static();
        let b = m.init_belief().clone();
        let u2 = StageStrategy2::uniform(m.num_a2());
        let b2 = update_belief(&m, &b, A1Id(0), &u2, b.agent_state()).unwrap();
        assert_eq!(b2.particles().len(), 2);
        for &(_, w) in b2.particles() {
            assert!((w - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn distinguishing_observation_collapses_posterior() {
        // Hand enumeration: two particles at 0.5 each, dynamics send left to
        // pointA and right to pointB deterministically, perception separates
        // the successors. Observing pointA's percept leaves all mass there.
        let m = presets::split();
        let b = m.init_belief().clone();
        let u2 = StageStrategy2::uniform(m.num_a2());
        let pa = m.find_point("pointA").unwrap();
        let s1_next = AgentState::new(Loc1Id(0), m.perceive(Loc1Id(0), pa));
        let b2 = update_belief(&m, &b, A1Id(0), &u2, s1_next).unwrap();
        assert_eq!(b2.particles(), &[(pa, 1.0)]);
    }

    #[test]
    fn impossible_observation_errors() {
        let m = presets::split();
        let b = m.init_belief().clone();
        let u2 = StageStrategy2::uniform(m.num_a2());
        // The initial percept cannot be observed after the split step.
        let bad = AgentState::new(Loc1Id(0), PerId(0));
        let err = update_belief(&m, &b, A1Id(0), &u2, bad).unwrap_err();
        assert!(matches!(err, BeliefError::ZeroMassObservation { .. }));
    }

    #[test]
    fn action_obs_prob_sums_to_one_and_splits_evenly() {
        // Uniform action choice over 2 actions and an even split over two
        // successor percepts: each (action, percept) pair carries 0.25.
        let m = presets::split2();
        let b = m.init_belief().clone();
        let u1 = StageStrategy1::uniform(m.num_a1());
        let u2 = StageStrategy2::uniform(m.num_a2());
        let probs = action_obs_prob(&m, &b, &u1, &u2);
        assert_eq!(probs.len(), 4);
        let mut total = 0.0;
        for (_, &p) in &probs {
            assert!((p - 0.25).abs() < 1e-12);
            total += p;
        }
        assert!((total - 1.0).abs() < PROB_TOL);
    }

    #[test]
    fn point_mass_action_restricts_support() {
        let m = presets::split2();
        let b = m.init_belief().clone();
        let u1 = StageStrategy1::pure(m.num_a1(), A1Id(1));
        let u2 = StageStrategy2::uniform(m.num_a2());
        let probs = action_obs_prob(&m, &b, &u1, &u2);
        assert!(probs.keys().all(|&(a1, _)| a1 == A1Id(1)));
        let total: f64 = probs.values().sum();
        assert!((total - 1.0).abs() < PROB_TOL);
    }

    #[test]
    fn update_mass_matches_action_obs_prob() {
        // The unnormalized update mass equals P(a1, s1') / u1(a1).
        let m = presets::split2();
        let b = m.init_belief().clone();
        let u1 = StageStrategy1::new(vec![0.25, 0.75]).unwrap();
        let u2 = StageStrategy2::uniform(m.num_a2());
        let probs = action_obs_prob(&m, &b, &u1, &u2);
        for (&(a1, s1n), &p) in &probs {
            let mass = observation_mass(&m, &b, a1, &u2, s1n);
            assert!((mass - p / u1.prob(a1)).abs() < 1e-12);
        }
    }

    #[test]
    fn belief_invariants_rejected() {
        let s1 = AgentState::new(Loc1Id(0), PerId(0));
        assert!(WeightedBelief::new(s1, vec![]).is_err());
        assert!(WeightedBelief::new(s1, vec![(PointId(0), 0.4)]).is_err());
        assert!(
            WeightedBelief::new(s1, vec![(PointId(0), 0.5), (PointId(0), 0.5)]).is_err()
        );
        assert!(WeightedBelief::new(s1, vec![(PointId(0), 1.0)]).is_ok());
    }

    #[test]
    fn l1_distance_disjoint_and_overlapping() {
        let s1 = AgentState::new(Loc1Id(0), PerId(0));
        let a = WeightedBelief::new(s1, vec![(PointId(0), 1.0)]).unwrap();
        let b = WeightedBelief::new(s1, vec![(PointId(1), 1.0)]).unwrap();
        assert!((a.l1_distance(&b) - 2.0).abs() < 1e-12);
        let c = WeightedBelief::new(s1, vec![(PointId(0), 0.9), (PointId(1), 0.1)]).unwrap();
        let d = WeightedBelief::new(s1, vec![(PointId(0), 0.5), (PointId(1), 0.5)]).unwrap();
        assert!((c.l1_distance(&d) - 0.8).abs() < 1e-12);
    }
}
