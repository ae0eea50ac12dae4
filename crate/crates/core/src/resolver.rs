//! Online continual resolving for the partially informed agent.
//!
//! Each stage solves one lower-bound stage LP, floored by the tracked alpha
//! function, at the current belief. The action is sampled from the optimal
//! stage strategy; after observing the next agent state, the tracked alpha is
//! replaced by the solution's continuation mixture for the realized
//! (action, agent state) pair and the belief is updated assuming a uniform
//! opponent stage strategy, which keeps the true state in the support.

use std::sync::Arc;

use dashmap::DashMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::belief::{update_belief, StageStrategy1, StageStrategy2, WeightedBelief};
use crate::bounds::{eval_lower, AlphaFunction, Provenance};
use crate::hsvi::{
    stage_lp_lower, stage_lp_upper, FrozenBounds, ResolveSolution, SolverError, P_STAR_TOL,
};
use crate::model::{A1Id, AgentState, GameModel};

/// Exact-bits cache key for a stage problem: the belief plus, for the lower
/// LP, the floor table. Identical keys produce identical LP inputs, so the
/// cached solution is bit-identical to a fresh solve.
#[derive(PartialEq, Eq, Hash, Clone)]
struct StageKey {
    s1: AgentState,
    particles: Vec<(usize, u64)>,
    floor: Vec<u64>,
}

fn stage_key(b: &WeightedBelief, floor: Option<&AlphaFunction>) -> StageKey {
    StageKey {
        s1: b.agent_state(),
        particles: b
            .particles()
            .iter()
            .map(|&(e, w)| (e.0, w.to_bits()))
            .collect(),
        floor: floor
            .map(|a| a.values().iter().map(|v| v.to_bits()).collect())
            .unwrap_or_default(),
    }
}

/// Memoized stage solutions shared by concurrent episodes over one frozen
/// bound set. Keys are exact, so hits return the same solution a fresh solve
/// would, preserving per-seed determinism.
#[derive(Default)]
pub struct StageCache {
    lower: DashMap<StageKey, Arc<ResolveSolution>>,
    upper: DashMap<StageKey, Arc<(f64, StageStrategy2)>>,
}

impl StageCache {
    pub fn new() -> Self {
        StageCache::default()
    }

    pub fn lower_len(&self) -> usize {
        self.lower.len()
    }

    pub fn upper_len(&self) -> usize {
        self.upper.len()
    }

    pub fn lower(
        &self,
        model: &GameModel,
        frozen: &FrozenBounds,
        b: &WeightedBelief,
        floor: &AlphaFunction,
    ) -> Result<Arc<ResolveSolution>, SolverError> {
        let key = stage_key(b, Some(floor));
        if let Some(hit) = self.lower.get(&key) {
            return Ok(hit.clone());
        }
        let sol = Arc::new(stage_lp_lower(model, &frozen.gamma, b, Some(floor))?);
        self.lower.insert(key, sol.clone());
        Ok(sol)
    }

    pub fn upper(
        &self,
        model: &GameModel,
        frozen: &FrozenBounds,
        b: &WeightedBelief,
    ) -> Result<Arc<(f64, StageStrategy2)>, SolverError> {
        let key = stage_key(b, None);
        if let Some(hit) = self.upper.get(&key) {
            return Ok(hit.clone());
        }
        let sol = Arc::new(stage_lp_upper(model, &frozen.upsilon, b)?);
        self.upper.insert(key, sol.clone());
        Ok(sol)
    }
}

/// Samples an action index from a stage strategy.
pub fn sample_strategy1(u1: &StageStrategy1, rng: &mut impl Rng) -> A1Id {
    let x: f64 = rng.gen();
    let mut acc = 0.0;
    let probs = u1.probs();
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if x < acc {
            return A1Id(i);
        }
    }
    A1Id(probs.len() - 1)
}

/// Continual-resolving state for one episode.
pub struct Resolver {
    model: Arc<GameModel>,
    frozen: Arc<FrozenBounds>,
    belief: WeightedBelief,
    alpha1: AlphaFunction,
    cached: Option<Arc<ResolveSolution>>,
    cache: Option<Arc<StageCache>>,
    u2_assumed: StageStrategy2,
    rng: ChaCha8Rng,
}

impl Resolver {
    /// Initializes resolving at `b_init`: the tracked alpha starts as the
    /// argmax element of the frozen set there (lowest index on ties).
    pub fn new(
        model: Arc<GameModel>,
        frozen: Arc<FrozenBounds>,
        b_init: WeightedBelief,
        seed: u64,
        cache: Option<Arc<StageCache>>,
    ) -> Result<Resolver, SolverError> {
        frozen.check_model(&model)?;
        let (_, idx) = eval_lower(&model, &frozen.gamma, &b_init);
        let mut alpha1 = frozen.gamma.alpha(idx).clone();
        alpha1.provenance = Provenance::Composed;
        let u2_assumed = StageStrategy2::uniform(model.num_a2());
        Ok(Resolver {
            model,
            frozen,
            belief: b_init,
            alpha1,
            cached: None,
            cache,
            u2_assumed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn belief(&self) -> &WeightedBelief {
        &self.belief
    }

    pub fn alpha1(&self) -> &AlphaFunction {
        &self.alpha1
    }

    /// Trace diagnostics: extrema of the tracked alpha and its value at the
    /// current belief.
    pub fn alpha_summary(&self) -> serde_json::Value {
        serde_json::json!({
            "alpha_min": self.alpha1.min_value(),
            "alpha_max": self.alpha1.max_value(),
            "alpha_at_belief": self.alpha1.eval(&self.model, &self.belief),
        })
    }

    /// Solves (or reuses) this stage's LP and returns the stage strategy.
    pub fn resolve_stage(&mut self) -> Result<(StageStrategy1, Arc<ResolveSolution>), SolverError> {
        if self.cached.is_none() {
            let sol = match &self.cache {
                Some(cache) => {
                    cache.lower(&self.model, &self.frozen, &self.belief, &self.alpha1)?
                }
                None => Arc::new(stage_lp_lower(
                    &self.model,
                    &self.frozen.gamma,
                    &self.belief,
                    Some(&self.alpha1),
                )?),
            };
            self.cached = Some(sol);
        }
        let sol = self.cached.as_ref().unwrap().clone();
        Ok((sol.p_star.clone(), sol))
    }

    /// Samples and returns this stage's action.
    pub fn act(&mut self) -> Result<A1Id, SolverError> {
        let (u1, _) = self.resolve_stage()?;
        Ok(sample_strategy1(&u1, &mut self.rng))
    }

    /// Advances to the next stage after playing `a1` and observing `s1_next`:
    /// recomposes the tracked alpha from the cached solution and updates the
    /// belief under the assumed uniform opponent strategy.
    pub fn advance(&mut self, a1: A1Id, s1_next: AgentState) -> Result<(), SolverError> {
        let sol = match self.cached.take() {
            Some(sol) => sol,
            None => self.resolve_stage()?.1,
        };
        let pa = sol.p_star.prob(a1);
        self.alpha1 = match sol.pair_index(a1, s1_next) {
            Some(pi) if pa > P_STAR_TOL => {
                let mut table = vec![0.0; self.model.num_agent_states() * self.model.num_regions()];
                for (k, &w) in sol.lambda[pi].iter().enumerate() {
                    if w != 0.0 {
                        let alpha = self.frozen.gamma.alpha(k);
                        for (slot, &x) in table.iter_mut().zip(alpha.values()) {
                            *slot += (w / pa) * x;
                        }
                    }
                }
                AlphaFunction::from_values(table, self.model.num_regions(), Provenance::Composed)
            }
            // The LP carried no information about this branch; reset to the
            // initial alpha, which is a valid floor everywhere.
            _ => {
                let mut a = self.frozen.gamma.alpha(0).clone();
                a.provenance = Provenance::Composed;
                a
            }
        };
        debug_assert!(
            self.alpha1.min_value() >= self.frozen.lower - 1e-6
                && self.alpha1.max_value() <= self.frozen.upper + 1e-6,
            "tracked alpha escaped [L, U]"
        );
        self.belief = update_belief(&self.model, &self.belief, a1, &self.u2_assumed, s1_next)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hsvi::{solve_hsvi, SolveLimits};
    use crate::model::{Loc1Id, PerId};
    use crate::presets;

    fn solved(model: &GameModel, epsilon: f64) -> Arc<FrozenBounds> {
        Arc::new(solve_hsvi(model, epsilon, &SolveLimits::default()).unwrap().0)
    }

    #[test]
    fn init_picks_argmax_alpha() {
        let m = Arc::new(presets::hide());
        let frozen = solved(&m, 0.01);
        let r = Resolver::new(
            m.clone(),
            frozen.clone(),
            m.init_belief().clone(),
            7,
            None,
        )
        .unwrap();
        let (best, idx) = eval_lower(&m, &frozen.gamma, m.init_belief());
        assert_eq!(r.alpha1().values(), frozen.gamma.alpha(idx).values());
        assert!(best <= frozen.upper);
    }

    #[test]
    fn hash_mismatch_rejected() {
        let m = Arc::new(presets::hide());
        let other = Arc::new(presets::single());
        let frozen = solved(&other, 0.01);
        let err = Resolver::new(m.clone(), frozen, m.init_belief().clone(), 7, None).err().unwrap();
        assert!(matches!(err, SolverError::ModelHashMismatch { .. }));
    }

    #[test]
    fn single_fixed_point_stage() {
        let m = Arc::new(presets::single());
        let frozen = solved(&m, 0.01);
        let mut r =
            Resolver::new(m.clone(), frozen, m.init_belief().clone(), 7, None).unwrap();
        let (u1, _) = r.resolve_stage().unwrap();
        assert!((u1.prob(A1Id(0)) - 1.0).abs() < 1e-9);
        let before_alpha = r.alpha1().values().to_vec();
        let a1 = r.act().unwrap();
        r.advance(a1, m.init_belief().agent_state()).unwrap();
        assert_eq!(r.belief(), m.init_belief());
        for (x, y) in r.alpha1().values().iter().zip(&before_alpha) {
            assert!((x - y).abs() < 1e-7);
        }
    }

    #[test]
    fn pennies_equilibrium_strategy() {
        let m = Arc::new(presets::matching_pennies());
        let frozen = solved(&m, 1e-4);
        let mut r =
            Resolver::new(m.clone(), frozen, m.init_belief().clone(), 7, None).unwrap();
        let (u1, _) = r.resolve_stage().unwrap();
        assert!((u1.prob(A1Id(0)) - 0.5).abs() < 1e-3, "{:?}", u1.probs());
        assert!((u1.prob(A1Id(1)) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn floor_rows_hold_at_solution() {
        // The optimal particle values dominate the tracked alpha.
        let m = Arc::new(presets::hide());
        let frozen = solved(&m, 0.01);
        let mut r = Resolver::new(
            m.clone(),
            frozen.clone(),
            m.init_belief().clone(),
            7,
            None,
        )
        .unwrap();
        let (_, sol) = r.resolve_stage().unwrap();
        let s1_idx = m.s1_index(r.belief().agent_state());
        for (i, &(e, _)) in r.belief().particles().iter().enumerate() {
            let bound = r.alpha1().value_at(s1_idx, m.region_of(e).0);
            assert!(
                sol.v_star[i] >= bound - 1e-6,
                "v[{i}] = {} < floor {bound}",
                sol.v_star[i]
            );
        }
    }

    #[test]
    fn sampling_is_seed_deterministic_and_calibrated() {
        let mut rng_a = ChaCha8Rng::seed_from_u64(42);
        let mut rng_b = ChaCha8Rng::seed_from_u64(42);
        let u1 = StageStrategy1::new(vec![0.5, 0.5]).unwrap();
        let seq_a: Vec<A1Id> = (0..100).map(|_| sample_strategy1(&u1, &mut rng_a)).collect();
        let seq_b: Vec<A1Id> = (0..100).map(|_| sample_strategy1(&u1, &mut rng_b)).collect();
        assert_eq!(seq_a, seq_b);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let heads = (0..n)
            .filter(|_| sample_strategy1(&u1, &mut rng) == A1Id(0))
            .count();
        let freq = heads as f64 / n as f64;
        let sigma = (0.25f64 / n as f64).sqrt();
        assert!((freq - 0.5).abs() <= 3.0 * sigma, "freq {freq}");

        let point = StageStrategy1::pure(3, A1Id(2));
        for _ in 0..50 {
            assert_eq!(sample_strategy1(&point, &mut rng), A1Id(2));
        }
    }

    #[test]
    fn advance_collapses_belief_on_distinguishing_percept() {
        let m = Arc::new(presets::split());
        let frozen = solved(&m, 0.05);
        let mut r = Resolver::new(
            m.clone(),
            frozen.clone(),
            m.init_belief().clone(),
            7,
            None,
        )
        .unwrap();
        let a1 = r.act().unwrap();
        let pa = m.find_point("pointA").unwrap();
        let s1n = AgentState::new(Loc1Id(0), m.perceive(Loc1Id(0), pa));
        r.advance(a1, s1n).unwrap();
        assert_eq!(r.belief().particles(), &[(pa, 1.0)]);
        assert!(r.alpha1().min_value() >= frozen.lower - 1e-9);
        assert!(r.alpha1().max_value() <= frozen.upper + 1e-9);
    }

    #[test]
    fn unreachable_branch_resets_to_initial_alpha() {
        // Force an agent state that the cached solution never materialized.
        let m = Arc::new(presets::split());
        let frozen = solved(&m, 0.05);
        let mut r = Resolver::new(
            m.clone(),
            frozen.clone(),
            m.init_belief().clone(),
            7,
            None,
        )
        .unwrap();
        let a1 = r.act().unwrap();
        // Percept 0 ("both") is unreachable after the first step; the belief
        // update would fail, so check the alpha reset path via a manual peek.
        let sol = r.resolve_stage().unwrap().1;
        let ghost = AgentState::new(Loc1Id(0), PerId(0));
        assert!(sol.pair_index(a1, ghost).is_none());
    }

    #[test]
    fn cache_reuses_solutions() {
        let m = Arc::new(presets::hide());
        let frozen = solved(&m, 0.01);
        let cache = Arc::new(StageCache::new());
        for seed in 0..3 {
            let mut r = Resolver::new(
                m.clone(),
                frozen.clone(),
                m.init_belief().clone(),
                seed,
                Some(cache.clone()),
            )
            .unwrap();
            let _ = r.act().unwrap();
        }
        assert_eq!(cache.lower_len(), 1, "same stage must be solved once");
    }
}
