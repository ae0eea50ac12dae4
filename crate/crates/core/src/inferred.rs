//! Online play for the fully informed agent.
//!
//! The agent keeps an inferred belief about what its opponent believes,
//! computes the minimax stage strategy of the upper-bound operator at that
//! belief once per stage, samples its action from the row of the observed
//! true state, and replays the same strategy into the Bayesian update once
//! the opponent's action and next agent state are visible.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::belief::{update_belief, StageStrategy2, WeightedBelief};
use crate::bounds::eval_upper;
use crate::hsvi::{stage_lp_upper, FrozenBounds, SolverError, BOUND_TOL};
use crate::model::{A1Id, A2Id, AgentState, GameModel, PointId};
use crate::resolver::StageCache;

/// Samples an action from a probability row.
pub fn sample_row(row: &[f64], rng: &mut impl Rng) -> A2Id {
    let x: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if x < acc {
            return A2Id(i);
        }
    }
    A2Id(row.len() - 1)
}

/// Inferred-belief state for one episode.
pub struct InferredAgent {
    model: Arc<GameModel>,
    frozen: Arc<FrozenBounds>,
    belief: WeightedBelief,
    cached: Option<Arc<(f64, StageStrategy2)>>,
    cache: Option<Arc<StageCache>>,
    rng: ChaCha8Rng,
    off_support_events: u64,
}

impl InferredAgent {
    /// The initial inferred belief is the (commonly known) initial belief.
    pub fn new(
        model: Arc<GameModel>,
        frozen: Arc<FrozenBounds>,
        b_init: WeightedBelief,
        seed: u64,
        cache: Option<Arc<StageCache>>,
    ) -> Result<InferredAgent, SolverError> {
        frozen.check_model(&model)?;
        Ok(InferredAgent {
            model,
            frozen,
            belief: b_init,
            cached: None,
            cache,
            rng: ChaCha8Rng::seed_from_u64(seed),
            off_support_events: 0,
        })
    }

    pub fn inferred_belief(&self) -> &WeightedBelief {
        &self.belief
    }

    /// Number of stages in which the observed true point was outside the
    /// inferred support and the uniform default row had to be used.
    pub fn off_support_events(&self) -> u64 {
        self.off_support_events
    }

    /// Computes (or reuses) this stage's minimax strategy of the upper-bound
    /// operator at the inferred belief, asserting the operator stays below
    /// the stored bound.
    pub fn resolve_stage(&mut self) -> Result<Arc<(f64, StageStrategy2)>, SolverError> {
        if self.cached.is_none() {
            let sol = match &self.cache {
                Some(cache) => cache.upper(&self.model, &self.frozen, &self.belief)?,
                None => Arc::new(stage_lp_upper(
                    &self.model,
                    &self.frozen.upsilon,
                    &self.belief,
                )?),
            };
            let (stored, _) = eval_upper(&self.frozen.upsilon, &self.belief)?;
            if sol.0 > stored + BOUND_TOL {
                return Err(SolverError::Lemma2Violation {
                    got: sol.0,
                    bound: stored,
                });
            }
            self.cached = Some(sol);
        }
        Ok(self.cached.as_ref().unwrap().clone())
    }

    /// Samples this stage's action from the strategy row of the observed
    /// true state.
    pub fn act(&mut self, observed: (AgentState, PointId)) -> Result<A2Id, SolverError> {
        if observed.0 != self.belief.agent_state() {
            return Err(SolverError::Internal(format!(
                "observed agent state {:?} disagrees with the inferred belief at {:?}",
                observed.0,
                self.belief.agent_state()
            )));
        }
        let sol = self.resolve_stage()?;
        let u2 = &sol.1;
        if !u2.has_row(observed.0, observed.1) && !self.belief.contains(observed.1) {
            self.off_support_events += 1;
        }
        Ok(sample_row(u2.row(observed.0, observed.1), &mut self.rng))
    }

    /// Updates the inferred belief with the opponent's observed action and
    /// next agent state, using exactly the strategy sampled from in `act`.
    pub fn advance(&mut self, a1: A1Id, s1_next: AgentState) -> Result<(), SolverError> {
        let sol = match self.cached.take() {
            Some(sol) => sol,
            None => self.resolve_stage()?,
        };
        self.cached = None;
        self.belief = update_belief(&self.model, &self.belief, a1, &sol.1, s1_next)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hsvi::{solve_hsvi, SolveLimits};
    use crate::model::Loc1Id;
    use crate::presets;

    fn solved(model: &GameModel, epsilon: f64) -> Arc<FrozenBounds> {
        Arc::new(solve_hsvi(model, epsilon, &SolveLimits::default()).unwrap().0)
    }

    #[test]
    fn init_belief_is_common_knowledge() {
        let m = Arc::new(presets::hide());
        let frozen = solved(&m, 0.01);
        let agent =
            InferredAgent::new(m.clone(), frozen, m.init_belief().clone(), 7, None).unwrap();
        assert_eq!(agent.inferred_belief(), m.init_belief());
    }

    #[test]
    fn hash_mismatch_rejected() {
        let m = Arc::new(presets::hide());
        let frozen = solved(&presets::single(), 0.01);
        let err = InferredAgent::new(m.clone(), frozen, m.init_belief().clone(), 7, None)
            .err()
            .unwrap();
        assert!(matches!(err, SolverError::ModelHashMismatch { .. }));
    }

    #[test]
    fn single_action_model_acts() {
        let m = Arc::new(presets::single());
        let frozen = solved(&m, 0.01);
        let mut agent =
            InferredAgent::new(m.clone(), frozen, m.init_belief().clone(), 7, None).unwrap();
        let s = (m.init_belief().agent_state(), PointId(0));
        assert_eq!(agent.act(s).unwrap(), A2Id(0));
        agent.advance(A1Id(0), s.0).unwrap();
        assert_eq!(agent.inferred_belief(), m.init_belief());
    }

    #[test]
    fn pennies_equilibrium_row_after_convergence() {
        let m = Arc::new(presets::matching_pennies());
        let frozen = solved(&m, 1e-4);
        let mut agent =
            InferredAgent::new(m.clone(), frozen, m.init_belief().clone(), 7, None).unwrap();
        let sol = agent.resolve_stage().unwrap();
        let row = sol.1.row(m.init_belief().agent_state(), PointId(0));
        assert!((row[0] - 0.5).abs() < 1e-3 && (row[1] - 0.5).abs() < 1e-3, "{row:?}");
    }

    #[test]
    fn agent_state_mismatch_is_a_driver_bug() {
        let m = Arc::new(presets::split());
        let frozen = solved(&m, 0.05);
        let mut agent =
            InferredAgent::new(m.clone(), frozen, m.init_belief().clone(), 7, None).unwrap();
        let wrong = AgentState::new(Loc1Id(0), m.perceive(Loc1Id(0), m.find_point("pointA").unwrap()));
        let err = agent.act((wrong, PointId(0))).unwrap_err();
        assert!(matches!(err, SolverError::Internal(_)));
    }

    #[test]
    fn advance_mirrors_belief_collapse() {
        let m = Arc::new(presets::split());
        let frozen = solved(&m, 0.05);
        let mut agent =
            InferredAgent::new(m.clone(), frozen, m.init_belief().clone(), 7, None).unwrap();
        let start_left = m.find_point("start-left").unwrap();
        let _ = agent.act((m.init_belief().agent_state(), start_left)).unwrap();
        let pa = m.find_point("pointA").unwrap();
        let s1n = AgentState::new(Loc1Id(0), m.perceive(Loc1Id(0), pa));
        agent.advance(A1Id(0), s1n).unwrap();
        assert_eq!(agent.inferred_belief().particles(), &[(pa, 1.0)]);
    }

    #[test]
    fn deterministic_u2_reweights_by_indicator() {
        // A hand-built deterministic opponent strategy turns the update into
        // indicator reweighting of the particles.
        let m = presets::split2();
        let b = m.init_belief().clone();
        let mut rows = std::collections::BTreeMap::new();
        for &(e, _) in b.particles() {
            rows.insert((b.agent_state(), e), vec![1.0]);
        }
        let u2 = StageStrategy2::with_rows(m.num_a2(), rows).unwrap();
        let pb = m.find_point("pointB").unwrap();
        let s1n = AgentState::new(Loc1Id(0), m.perceive(Loc1Id(0), pb));
        let next = update_belief(&m, &b, A1Id(0), &u2, s1n).unwrap();
        assert_eq!(next.particles(), &[(pb, 1.0)]);
    }
}
