//! The stage interface both players implement, plus the built-in heuristic
//! and scripted agents used as probes in the theorem checks.
//!
//! Agent 1 observes only its own agent-state transitions; agent 2 observes
//! the true state before acting and the opponent's action afterwards.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::belief::{update_belief, StageStrategy1, StageStrategy2, WeightedBelief};
use crate::hsvi::{FrozenBounds, SolverError};
use crate::inferred::InferredAgent;
use crate::model::{A1Id, A2Id, AgentState, GameModel, PointId};
use crate::pursuit::{PursuitMeta, MOVES};
use crate::resolver::{Resolver, StageCache};

/// The partially informed side of an episode.
pub trait Agent1 {
    fn act(&mut self) -> Result<A1Id, SolverError>;
    /// Called after the stage resolves with the played action and the
    /// observed next agent state.
    fn observe(&mut self, a1: A1Id, s1_next: AgentState) -> Result<(), SolverError>;
    /// The tracked belief, when the agent maintains one; the arena asserts
    /// the true point stays in its support.
    fn belief(&self) -> Option<&WeightedBelief> {
        None
    }
    /// This stage's strategy, for trace records.
    fn stage_strategy(&mut self) -> Result<Option<StageStrategy1>, SolverError> {
        Ok(None)
    }
    /// Free-form per-stage diagnostics for trace records.
    fn summary(&self) -> Option<serde_json::Value> {
        None
    }
}

/// The fully informed side of an episode.
pub trait Agent2 {
    fn act(&mut self, observed: (AgentState, PointId)) -> Result<A2Id, SolverError>;
    /// Called after the stage resolves with agent 1's action, agent 1's next
    /// agent state, and the true next state.
    fn observe(
        &mut self,
        a1: A1Id,
        s1_next: AgentState,
        true_next: (AgentState, PointId),
    ) -> Result<(), SolverError>;
    fn inferred_belief(&self) -> Option<&WeightedBelief> {
        None
    }
    /// Support rows of this stage's strategy, for trace records.
    fn stage_rows(&mut self) -> Result<Option<StageStrategy2>, SolverError> {
        Ok(None)
    }
}

impl Agent1 for Resolver {
    fn act(&mut self) -> Result<A1Id, SolverError> {
        Resolver::act(self)
    }

    fn observe(&mut self, a1: A1Id, s1_next: AgentState) -> Result<(), SolverError> {
        self.advance(a1, s1_next)
    }

    fn belief(&self) -> Option<&WeightedBelief> {
        Some(Resolver::belief(self))
    }

    fn stage_strategy(&mut self) -> Result<Option<StageStrategy1>, SolverError> {
        Ok(Some(self.resolve_stage()?.0))
    }

    fn summary(&self) -> Option<serde_json::Value> {
        Some(self.alpha_summary())
    }
}

impl Agent2 for InferredAgent {
    fn act(&mut self, observed: (AgentState, PointId)) -> Result<A2Id, SolverError> {
        InferredAgent::act(self, observed)
    }

    fn observe(
        &mut self,
        a1: A1Id,
        s1_next: AgentState,
        _true_next: (AgentState, PointId),
    ) -> Result<(), SolverError> {
        self.advance(a1, s1_next)
    }

    fn inferred_belief(&self) -> Option<&WeightedBelief> {
        Some(InferredAgent::inferred_belief(self))
    }

    fn stage_rows(&mut self) -> Result<Option<StageStrategy2>, SolverError> {
        Ok(Some(self.resolve_stage()?.1.clone()))
    }
}

/// Plays every action with equal probability.
pub struct UniformAgent1 {
    n: usize,
    rng: ChaCha8Rng,
}

impl UniformAgent1 {
    pub fn new(model: &GameModel, seed: u64) -> Self {
        UniformAgent1 {
            n: model.num_a1(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Agent1 for UniformAgent1 {
    fn act(&mut self) -> Result<A1Id, SolverError> {
        Ok(A1Id(self.rng.gen_range(0..self.n)))
    }

    fn observe(&mut self, _a1: A1Id, _s1_next: AgentState) -> Result<(), SolverError> {
        Ok(())
    }

    fn stage_strategy(&mut self) -> Result<Option<StageStrategy1>, SolverError> {
        Ok(Some(StageStrategy1::uniform(self.n)))
    }
}

pub struct UniformAgent2 {
    n: usize,
    rng: ChaCha8Rng,
}

impl UniformAgent2 {
    pub fn new(model: &GameModel, seed: u64) -> Self {
        UniformAgent2 {
            n: model.num_a2(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Agent2 for UniformAgent2 {
    fn act(&mut self, _observed: (AgentState, PointId)) -> Result<A2Id, SolverError> {
        Ok(A2Id(self.rng.gen_range(0..self.n)))
    }

    fn observe(
        &mut self,
        _a1: A1Id,
        _s1_next: AgentState,
        _true_next: (AgentState, PointId),
    ) -> Result<(), SolverError> {
        Ok(())
    }
}

/// One-step reward potential: max over joint actions at each (s1, point).
fn reward_potential(model: &GameModel) -> Vec<f64> {
    let ne = model.num_points();
    let mut pot = vec![f64::NEG_INFINITY; model.num_agent_states() * ne];
    for s1 in model.agent_states() {
        let si = model.s1_index(s1);
        for e in model.point_ids() {
            let mut best = f64::NEG_INFINITY;
            for a1 in model.a1_ids() {
                for a2 in model.a2_ids() {
                    best = best.max(model.reward(s1, e, a1, a2));
                }
            }
            pot[si * ne + e.0] = best;
        }
    }
    pot
}

/// Maximizes expected immediate reward plus one lookahead step of reward
/// potential, against an assumed uniform opponent, over the public belief
/// (the belief maintained under the uniform assumed opponent strategy).
pub struct GreedyAgent1 {
    model: Arc<GameModel>,
    belief: WeightedBelief,
    potential: Vec<f64>,
    u2_uniform: StageStrategy2,
}

impl GreedyAgent1 {
    pub fn new(model: Arc<GameModel>) -> Self {
        let belief = model.init_belief().clone();
        let potential = reward_potential(&model);
        let u2_uniform = StageStrategy2::uniform(model.num_a2());
        GreedyAgent1 {
            model,
            belief,
            potential,
            u2_uniform,
        }
    }
}

impl Agent1 for GreedyAgent1 {
    fn act(&mut self) -> Result<A1Id, SolverError> {
        let m = &self.model;
        let s1 = self.belief.agent_state();
        let ne = m.num_points();
        let w2 = 1.0 / m.num_a2() as f64;
        let mut best = (f64::NEG_INFINITY, A1Id(0));
        for a1 in m.a1_ids() {
            let mut score = 0.0;
            for &(e, kappa) in self.belief.particles() {
                for a2 in m.a2_ids() {
                    let mut val = m.reward(s1, e, a1, a2);
                    for &((s1n, en), p) in m.joint_transition((s1, e), (a1, a2)).iter() {
                        val += m.beta() * p * self.potential[m.s1_index(s1n) * ne + en.0];
                    }
                    score += kappa * w2 * val;
                }
            }
            if score > best.0 {
                best = (score, a1);
            }
        }
        Ok(best.1)
    }

    fn observe(&mut self, a1: A1Id, s1_next: AgentState) -> Result<(), SolverError> {
        self.belief = update_belief(&self.model, &self.belief, a1, &self.u2_uniform, s1_next)?;
        Ok(())
    }

    fn belief(&self) -> Option<&WeightedBelief> {
        Some(&self.belief)
    }
}

/// Minimizes expected immediate reward plus one lookahead step of reward
/// potential at the observed true state, against an assumed uniform agent 1.
pub struct GreedyAgent2 {
    model: Arc<GameModel>,
    potential: Vec<f64>,
}

impl GreedyAgent2 {
    pub fn new(model: Arc<GameModel>) -> Self {
        let potential = reward_potential(&model);
        GreedyAgent2 { model, potential }
    }
}

impl Agent2 for GreedyAgent2 {
    fn act(&mut self, observed: (AgentState, PointId)) -> Result<A2Id, SolverError> {
        let m = &self.model;
        let (s1, e) = observed;
        let ne = m.num_points();
        let w1 = 1.0 / m.num_a1() as f64;
        let mut best = (f64::INFINITY, A2Id(0));
        for a2 in m.a2_ids() {
            let mut score = 0.0;
            for a1 in m.a1_ids() {
                let mut val = m.reward(s1, e, a1, a2);
                for &((s1n, en), p) in m.joint_transition((s1, e), (a1, a2)).iter() {
                    val += m.beta() * p * self.potential[m.s1_index(s1n) * ne + en.0];
                }
                score += w1 * val;
            }
            if score < best.0 {
                best = (score, a2);
            }
        }
        Ok(best.1)
    }

    fn observe(
        &mut self,
        _a1: A1Id,
        _s1_next: AgentState,
        _true_next: (AgentState, PointId),
    ) -> Result<(), SolverError> {
        Ok(())
    }
}

/// Scripted pursuer: walks toward the evader cell carrying the most belief
/// mass; the belief is maintained under the uniform assumed opponent.
pub struct ChaseAgent1 {
    model: Arc<GameModel>,
    meta: Arc<PursuitMeta>,
    belief: WeightedBelief,
    u2_uniform: StageStrategy2,
}

impl ChaseAgent1 {
    pub fn new(model: Arc<GameModel>, meta: Arc<PursuitMeta>) -> Self {
        let belief = model.init_belief().clone();
        let u2_uniform = StageStrategy2::uniform(model.num_a2());
        ChaseAgent1 {
            model,
            meta,
            belief,
            u2_uniform,
        }
    }
}

fn manhattan(meta: &PursuitMeta, a: usize, b: usize) -> i32 {
    let (ax, ay) = meta.cell_xy(a);
    let (bx, by) = meta.cell_xy(b);
    (ax as i32 - bx as i32).abs() + (ay as i32 - by as i32).abs()
}

impl Agent1 for ChaseAgent1 {
    fn act(&mut self) -> Result<A1Id, SolverError> {
        // Own cell comes from the percept; target is the modal evader cell.
        let my_cell = self.belief.agent_state().per1.0;
        let mut mass = vec![0.0; self.meta.num_cells()];
        for &(e, w) in self.belief.particles() {
            if let Some((_, evader)) = self.meta.cells_of(e) {
                mass[evader] += w;
            }
        }
        let target = mass
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(c, _)| c)
            .unwrap_or(my_cell);
        let mut best = (i32::MAX, A1Id(0));
        for (i, &(_, dx, dy)) in MOVES.iter().enumerate() {
            let next = self.meta.step_cell(my_cell, (dx, dy));
            let d = manhattan(&self.meta, next, target);
            if d < best.0 {
                best = (d, A1Id(i));
            }
        }
        Ok(best.1)
    }

    fn observe(&mut self, a1: A1Id, s1_next: AgentState) -> Result<(), SolverError> {
        self.belief = update_belief(&self.model, &self.belief, a1, &self.u2_uniform, s1_next)?;
        Ok(())
    }

    fn belief(&self) -> Option<&WeightedBelief> {
        Some(&self.belief)
    }
}

/// Scripted evader: maximizes the worst-case next-step distance to the
/// pursuer. Fully informed, so it reads both cells from the true point.
pub struct FleeAgent2 {
    meta: Arc<PursuitMeta>,
}

impl FleeAgent2 {
    pub fn new(meta: Arc<PursuitMeta>) -> Self {
        FleeAgent2 { meta }
    }
}

impl Agent2 for FleeAgent2 {
    fn act(&mut self, observed: (AgentState, PointId)) -> Result<A2Id, SolverError> {
        let Some((pursuer, evader)) = self.meta.cells_of(observed.1) else {
            return Ok(A2Id(MOVES.len() - 1)); // caught: action is irrelevant
        };
        let mut best = (i32::MIN, A2Id(0));
        for (i2, &(_, dx2, dy2)) in MOVES.iter().enumerate() {
            let e_next = self.meta.step_cell(evader, (dx2, dy2));
            let mut worst = i32::MAX;
            for &(_, dx1, dy1) in &MOVES {
                let p_next = self.meta.step_cell(pursuer, (dx1, dy1));
                worst = worst.min(manhattan(&self.meta, p_next, e_next));
            }
            if worst > best.0 {
                best = (worst, A2Id(i2));
            }
        }
        Ok(best.1)
    }

    fn observe(
        &mut self,
        _a1: A1Id,
        _s1_next: AgentState,
        _true_next: (AgentState, PointId),
    ) -> Result<(), SolverError> {
        Ok(())
    }
}

/// Named agent-1 strategies available to the arena and the CLI.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ag1Kind {
    /// Continual resolving against the frozen lower bound.
    LowerBound,
    Uniform,
    Greedy,
    Chase,
}

/// Named agent-2 strategies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ag2Kind {
    /// Inferred-belief play against the frozen upper bound.
    UpperBound,
    Uniform,
    Greedy,
    Flee,
}

/// A pairing of strategies, parsed from names like `lb-vs-uniform`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Profile {
    pub ag1: Ag1Kind,
    pub ag2: Ag2Kind,
}

impl Profile {
    pub fn parse(s: &str) -> Option<Profile> {
        let (left, right) = s.split_once("-vs-")?;
        let ag1 = match left {
            "lb" => Ag1Kind::LowerBound,
            "uniform" => Ag1Kind::Uniform,
            "greedy" => Ag1Kind::Greedy,
            "chase" => Ag1Kind::Chase,
            _ => return None,
        };
        let ag2 = match right {
            "ub" => Ag2Kind::UpperBound,
            "uniform" => Ag2Kind::Uniform,
            "greedy" => Ag2Kind::Greedy,
            "flee" => Ag2Kind::Flee,
            _ => return None,
        };
        Some(Profile { ag1, ag2 })
    }

    pub fn name(&self) -> String {
        let left = match self.ag1 {
            Ag1Kind::LowerBound => "lb",
            Ag1Kind::Uniform => "uniform",
            Ag1Kind::Greedy => "greedy",
            Ag1Kind::Chase => "chase",
        };
        let right = match self.ag2 {
            Ag2Kind::UpperBound => "ub",
            Ag2Kind::Uniform => "uniform",
            Ag2Kind::Greedy => "greedy",
            Ag2Kind::Flee => "flee",
        };
        format!("{left}-vs-{right}")
    }

    pub fn cross_play() -> Profile {
        Profile {
            ag1: Ag1Kind::LowerBound,
            ag2: Ag2Kind::UpperBound,
        }
    }
}

/// Everything needed to instantiate agents for a profile.
pub struct AgentFactory {
    pub model: Arc<GameModel>,
    pub frozen: Arc<FrozenBounds>,
    pub cache: Arc<StageCache>,
    pub meta: Option<Arc<PursuitMeta>>,
}

impl AgentFactory {
    pub fn build_agent1(&self, kind: &Ag1Kind, seed: u64) -> Result<Box<dyn Agent1>, SolverError> {
        Ok(match kind {
            Ag1Kind::LowerBound => Box::new(Resolver::new(
                self.model.clone(),
                self.frozen.clone(),
                self.model.init_belief().clone(),
                seed,
                Some(self.cache.clone()),
            )?),
            Ag1Kind::Uniform => Box::new(UniformAgent1::new(&self.model, seed)),
            Ag1Kind::Greedy => Box::new(GreedyAgent1::new(self.model.clone())),
            Ag1Kind::Chase => Box::new(ChaseAgent1::new(
                self.model.clone(),
                self.meta
                    .clone()
                    .ok_or_else(|| SolverError::Internal("chase needs a grid model".into()))?,
            )),
        })
    }

    pub fn build_agent2(&self, kind: &Ag2Kind, seed: u64) -> Result<Box<dyn Agent2>, SolverError> {
        Ok(match kind {
            Ag2Kind::UpperBound => Box::new(InferredAgent::new(
                self.model.clone(),
                self.frozen.clone(),
                self.model.init_belief().clone(),
                seed,
                Some(self.cache.clone()),
            )?),
            Ag2Kind::Uniform => Box::new(UniformAgent2::new(&self.model, seed)),
            Ag2Kind::Greedy => Box::new(GreedyAgent2::new(self.model.clone())),
            Ag2Kind::Flee => Box::new(FleeAgent2::new(
                self.meta
                    .clone()
                    .ok_or_else(|| SolverError::Internal("flee needs a grid model".into()))?,
            )),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pursuit::{gen_pursuit_evasion, PursuitConfig};

    #[test]
    fn profile_names_round_trip() {
        for name in ["lb-vs-ub", "lb-vs-uniform", "greedy-vs-ub", "chase-vs-flee"] {
            let p = Profile::parse(name).unwrap();
            assert_eq!(p.name(), name);
        }
        assert!(Profile::parse("nope").is_none());
        assert!(Profile::parse("lb-vs-nope").is_none());
    }

    #[test]
    fn flee_agent_runs_from_adjacent_pursuer() {
        let (_, meta) = gen_pursuit_evasion(&PursuitConfig::standard(3, 3, 0.7, 100.0)).unwrap();
        let meta = Arc::new(meta);
        let mut flee = FleeAgent2::new(meta.clone());
        // Pursuer at cell 0, evader at cell 1; moving right (toward cell 2)
        // keeps the largest worst-case distance.
        let pt = meta.point_of(0, 1);
        let s1 = AgentState::new(crate::model::Loc1Id(0), crate::model::PerId(0));
        let a2 = flee.act((s1, pt)).unwrap();
        let (_, dx, dy) = MOVES[a2.0];
        let next = meta.step_cell(1, (dx, dy));
        assert!(manhattan(&meta, 0, next) >= 2, "fled to adjacent cell {next}");
    }

    #[test]
    fn chase_agent_closes_on_certain_target() {
        let (m, meta) = gen_pursuit_evasion(&PursuitConfig {
            width: 3,
            height: 3,
            beta: 0.7,
            capture_reward: 100.0,
            pursuer_start: 0,
            evader_starts: vec![8],
        })
        .unwrap();
        let mut chase = ChaseAgent1::new(Arc::new(m), Arc::new(meta.clone()));
        let a1 = chase.act().unwrap();
        let (_, dx, dy) = MOVES[a1.0];
        let next = meta.step_cell(0, (dx, dy));
        assert!(manhattan(&meta, next, 8) < manhattan(&meta, 0, 8));
    }

    #[test]
    fn greedy_evader_avoids_capture_cell() {
        let (m, meta) = gen_pursuit_evasion(&PursuitConfig::standard(2, 2, 0.5, 1.0)).unwrap();
        let m = Arc::new(m);
        let mut greedy = GreedyAgent2::new(m.clone());
        // Pursuer at 0, evader at 1: staying or moving into cell 0 risks
        // capture next step; the greedy score must avoid co-location.
        let pt = meta.point_of(0, 1);
        let s1 = m.init_belief().agent_state();
        let a2 = greedy.act((s1, pt)).unwrap();
        let (_, dx, dy) = MOVES[a2.0];
        let next = meta.step_cell(1, (dx, dy));
        assert_ne!(next, 0, "greedy evader moved onto the pursuer");
    }
}
