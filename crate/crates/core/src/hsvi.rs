//! Offline point-based solving.
//!
//! The stage game at a belief is solved twice, once against each bound
//! representation: the lower stage LP maximizes over agent 1's mixed action
//! with continuation values drawn from convex combinations of the stored
//! alpha functions, and the upper stage LP minimizes over agent 2's
//! state-conditioned strategy with continuation values taken from the
//! Lipschitz-interpolated belief-value pairs. Point-based backups append the
//! results to the bound sets, and heuristic forward exploration drives the
//! gap at the initial belief below epsilon.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{
    action_obs_prob, update_belief, BeliefError, StageStrategy1, StageStrategy2, WeightedBelief,
};
use crate::bounds::{
    eval_lower, eval_upper, init_bounds, AlphaFunction, AlphaSet, BeliefValuePair, Provenance,
    UpsilonSet,
};
use crate::lp::{LinearProgram, LpError, LpStatus, Rel, Sense, VarId};
use crate::model::{A1Id, AgentState, GameModel, PointId};

/// Action probabilities below this are treated as zero when composing
/// continuation functions.
pub const P_STAR_TOL: f64 = 1e-9;

/// Slack allowed on the bound-consistency assertions maintained during
/// solving and online play.
pub const BOUND_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(
        "lower stage LP infeasible despite a convex-hull floor; the floor cannot \
         have come from this alpha set"
    )]
    Lemma1Violation,
    #[error("upper stage LP value {got} exceeds stored upper bound {bound} at a probe belief")]
    Lemma2Violation { got: f64, bound: f64 },
    #[error("bound consistency violated at a visited belief: lower {lower} > upper {upper}")]
    SandwichViolation { lower: f64, upper: f64 },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error("bounds were computed for model {expected}, got model {found}")]
    ModelHashMismatch { expected: String, found: String },
    #[error("solver internal error: {0}")]
    Internal(String),
}

/// Optimal solution of the lower stage LP: the stage value per particle, the
/// maximizing stage strategy, and the continuation mixture weights per
/// materialized (action, successor agent state) pair.
#[derive(Debug, Clone)]
pub struct ResolveSolution {
    pub objective: f64,
    /// Stage value per particle, aligned with the belief's particle order.
    pub v_star: Vec<f64>,
    pub p_star: StageStrategy1,
    /// Materialized (a1, s1') pairs, ascending.
    pub pairs: Vec<(A1Id, AgentState)>,
    /// Mixture weights over the alpha set, one row per entry of `pairs`.
    pub lambda: Vec<Vec<f64>>,
}

impl ResolveSolution {
    pub fn pair_index(&self, a1: A1Id, s1_next: AgentState) -> Option<usize> {
        self.pairs.binary_search(&(a1, s1_next)).ok()
    }

    pub fn lambda_for(&self, a1: A1Id, s1_next: AgentState) -> Option<&[f64]> {
        self.pair_index(a1, s1_next)
            .map(|i| self.lambda[i].as_slice())
    }
}

/// Successor bookkeeping for one belief: the reachable (a1, s1') pairs and,
/// per particle and joint action, the successor distribution tagged by pair.
struct StageGeometry {
    pairs: Vec<(A1Id, AgentState)>,
    /// succ[i][a1][a2] -> (pair index, successor point, probability).
    succ: Vec<Vec<Vec<Vec<(usize, PointId, f64)>>>>,
}

fn stage_geometry(model: &GameModel, b: &WeightedBelief) -> StageGeometry {
    let s1 = b.agent_state();
    let mut pair_set = std::collections::BTreeSet::new();
    let mut raw: Vec<Vec<Vec<Vec<(AgentState, PointId, f64)>>>> = Vec::with_capacity(b.len());
    for &(e, _) in b.particles() {
        let mut per_a1 = Vec::with_capacity(model.num_a1());
        for a1 in model.a1_ids() {
            let mut per_a2 = Vec::with_capacity(model.num_a2());
            for a2 in model.a2_ids() {
                let succ = model.joint_transition((s1, e), (a1, a2));
                for &((s1n, _), p) in &succ {
                    if p > 0.0 {
                        pair_set.insert((a1, s1n));
                    }
                }
                per_a2.push(
                    succ.into_iter()
                        .map(|((s1n, en), p)| (s1n, en, p))
                        .collect::<Vec<_>>(),
                );
            }
            per_a1.push(per_a2);
        }
        raw.push(per_a1);
    }
    let pairs: Vec<(A1Id, AgentState)> = pair_set.into_iter().collect();
    let succ = raw
        .into_iter()
        .map(|per_a1| {
            per_a1
                .into_iter()
                .enumerate()
                .map(|(i1, per_a2)| {
                    per_a2
                        .into_iter()
                        .map(|list| {
                            list.into_iter()
                                .map(|(s1n, en, p)| {
                                    let pi = pairs
                                        .binary_search(&(A1Id(i1), s1n))
                                        .expect("successor pair must be materialized");
                                    (pi, en, p)
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    StageGeometry { pairs, succ }
}

/// The lower-bound stage LP. With `floor` absent this computes the minimax
/// backup of the current lower bound at `b`; with a floor it additionally
/// constrains every particle value to dominate the tracked alpha, which is
/// the online resolving variant.
pub fn stage_lp_lower(
    model: &GameModel,
    gamma: &AlphaSet,
    b: &WeightedBelief,
    floor: Option<&AlphaFunction>,
) -> Result<ResolveSolution, SolverError> {
    let s1 = b.agent_state();
    let s1_idx = model.s1_index(s1);
    let na = gamma.len();
    let geo = stage_geometry(model, b);
    let npairs = geo.pairs.len();

    let mut lp = LinearProgram::new(Sense::Maximize);
    let v: Vec<VarId> = b
        .particles()
        .iter()
        .map(|&(_, kappa)| lp.add_var(false, None, kappa))
        .collect();
    let p: Vec<VarId> = (0..model.num_a1())
        .map(|_| lp.add_var(true, None, 0.0))
        .collect();
    let lambda: Vec<Vec<VarId>> = (0..npairs)
        .map(|_| (0..na).map(|_| lp.add_var(true, None, 0.0)).collect())
        .collect();

    // Stage-value rows: one per (particle, a2).
    let beta = model.beta();
    let mut contrib = vec![0.0; na * npairs];
    for (i, &(e, _)) in b.particles().iter().enumerate() {
        for a2 in model.a2_ids() {
            let mut coeffs: Vec<(VarId, f64)> = Vec::with_capacity(1 + p.len() + npairs * na);
            coeffs.push((v[i], 1.0));
            contrib.iter_mut().for_each(|x| *x = 0.0);
            for a1 in model.a1_ids() {
                let r = model.reward(s1, e, a1, a2);
                if r != 0.0 {
                    coeffs.push((p[a1.0], -r));
                }
                for &(pi, en, prob) in &geo.succ[i][a1.0][a2.0] {
                    let region = model.region_of(en).0;
                    let s1n_idx = model.s1_index(geo.pairs[pi].1);
                    for (k, alpha) in gamma.alphas().iter().enumerate() {
                        contrib[pi * na + k] += prob * alpha.value_at(s1n_idx, region);
                    }
                }
            }
            for pi in 0..npairs {
                for k in 0..na {
                    let w = contrib[pi * na + k];
                    if w != 0.0 {
                        coeffs.push((lambda[pi][k], -beta * w));
                    }
                }
            }
            lp.add_constraint(coeffs, Rel::Le, 0.0);
        }
    }

    // Optional floor: v_i >= alpha1(s1, e_i).
    if let Some(alpha1) = floor {
        for (i, &(e, _)) in b.particles().iter().enumerate() {
            let bound = alpha1.value_at(s1_idx, model.region_of(e).0);
            lp.add_constraint(vec![(v[i], 1.0)], Rel::Ge, bound);
        }
    }

    // Mixture mass ties to the action probability, per materialized pair.
    for (pi, &(a1, _)) in geo.pairs.iter().enumerate() {
        let mut coeffs: Vec<(VarId, f64)> = lambda[pi].iter().map(|&l| (l, 1.0)).collect();
        coeffs.push((p[a1.0], -1.0));
        lp.add_constraint(coeffs, Rel::Eq, 0.0);
    }
    lp.add_constraint(p.iter().map(|&x| (x, 1.0)).collect(), Rel::Eq, 1.0);

    let sol = lp.solve()?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible if floor.is_some() => return Err(SolverError::Lemma1Violation),
        other => {
            return Err(SolverError::Internal(format!(
                "lower stage LP ended {other:?} without a floor"
            )))
        }
    }

    let mut probs: Vec<f64> = p.iter().map(|&x| sol.values[x.0].max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|x| *x /= total);
    let p_star = StageStrategy1::new(probs)
        .map_err(|e| SolverError::Internal(format!("stage strategy not normalized: {e}")))?;

    Ok(ResolveSolution {
        objective: sol.objective,
        v_star: v.iter().map(|&x| sol.values[x.0]).collect(),
        p_star,
        pairs: geo.pairs,
        lambda: lambda
            .iter()
            .map(|row| row.iter().map(|&x| sol.values[x.0].max(0.0)).collect())
            .collect(),
    })
}

/// Point-based lower backup: solves the stage LP at `b`, composes the
/// continuation functions from the optimal mixture weights, evaluates the
/// played-state slice at every region representative, copies the remaining
/// slices from the incumbent alpha at `b`, and appends the result.
///
/// Returns the stage solution and the index of the (possibly deduplicated)
/// new alpha.
pub fn backup_lower(
    model: &GameModel,
    gamma: &mut AlphaSet,
    b: &WeightedBelief,
    backup_id: u64,
) -> Result<(ResolveSolution, usize), SolverError> {
    let sol = stage_lp_lower(model, gamma, b, None)?;
    let s1 = b.agent_state();
    let s1_idx = model.s1_index(s1);
    let na = gamma.len();
    let nregions = model.num_regions();
    let ns1 = model.num_agent_states();

    // Composed continuation tables per materialized pair with p* > 0.
    let mut composed: Vec<Option<Vec<f64>>> = vec![None; sol.pairs.len()];
    for (pi, &(a1, _)) in sol.pairs.iter().enumerate() {
        let pa = sol.p_star.prob(a1);
        if pa <= P_STAR_TOL {
            continue;
        }
        let mut table = vec![0.0; ns1 * nregions];
        for k in 0..na {
            let w = sol.lambda[pi][k] / pa;
            if w != 0.0 {
                for (slot, &x) in table.iter_mut().zip(gamma.alpha(k).values()) {
                    *slot += w * x;
                }
            }
        }
        composed[pi] = Some(table);
    }
    let alpha0: Vec<f64> = gamma.alpha(0).values().to_vec();
    let continuation = |a1: A1Id, s1n: AgentState, en: PointId| -> f64 {
        let idx = model.s1_index(s1n) * nregions + model.region_of(en).0;
        match sol.pair_index(a1, s1n).and_then(|pi| composed[pi].as_ref()) {
            Some(table) => table[idx],
            // Pairs never materialized (or with vanishing probability) fall
            // back to the initial alpha, which is always a valid bound.
            None => alpha0[idx],
        }
    };

    let (_, incumbent) = eval_lower(model, gamma, b);
    let mut alpha_new = gamma.alpha(incumbent).clone();
    alpha_new.provenance = Provenance::Backup(backup_id);
    let beta = model.beta();
    for region in model.region_ids() {
        let e = model.region_representative(region);
        let mut best = f64::INFINITY;
        for a2 in model.a2_ids() {
            let mut total = 0.0;
            for a1 in model.a1_ids() {
                let pa = sol.p_star.prob(a1);
                if pa <= P_STAR_TOL {
                    continue;
                }
                let mut inner = model.reward(s1, e, a1, a2);
                for &((s1n, en), prob) in model.joint_transition((s1, e), (a1, a2)).iter() {
                    inner += beta * prob * continuation(a1, s1n, en);
                }
                total += pa * inner;
            }
            best = best.min(total);
        }
        alpha_new.set_value(s1_idx, region.0, best);
    }

    let (idx, _) = gamma.push_dedup(alpha_new);
    debug_assert!(
        eval_lower(model, gamma, b).0 >= sol.objective - BOUND_TOL,
        "lower backup must reach the stage objective at its belief"
    );
    Ok((sol, idx))
}

/// The upper-bound stage LP: the minimax operator applied to the
/// interpolated upper bound.
///
/// Continuations use the positively homogeneous form, so no division by the
/// observation probability occurs. On top of the stored pairs, each
/// successor point may carry "corner" mass valued at the trivial bound `U`
/// with no transport penalty; this keeps the operator below the capped
/// interpolation everywhere and subsumes the fallback for successor agent
/// states with no stored pairs.
pub fn stage_lp_upper(
    model: &GameModel,
    upsilon: &UpsilonSet,
    b: &WeightedBelief,
) -> Result<(f64, StageStrategy2), SolverError> {
    let s1 = b.agent_state();
    let n = b.len();
    let na2 = model.num_a2();
    let geo = stage_geometry(model, b);
    let npairs = geo.pairs.len();
    let beta = model.beta();

    // tau coefficients: per pair, per successor point, a linear form over
    // the u2 variables (particle index, a2, weight).
    let mut tau: Vec<std::collections::BTreeMap<PointId, Vec<(usize, usize, f64)>>> =
        vec![std::collections::BTreeMap::new(); npairs];
    for (i, &(_, kappa)) in b.particles().iter().enumerate() {
        for a1 in 0..model.num_a1() {
            for a2 in 0..na2 {
                for &(pi, en, prob) in &geo.succ[i][a1][a2] {
                    tau[pi].entry(en).or_default().push((i, a2, kappa * prob));
                }
            }
        }
    }

    // Stored pairs matching each successor agent state.
    let matching: Vec<Vec<usize>> = geo
        .pairs
        .iter()
        .map(|&(_, s1n)| {
            upsilon
                .pairs()
                .iter()
                .enumerate()
                .filter(|(_, p)| p.belief.agent_state() == s1n)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();

    let mut lp = LinearProgram::new(Sense::Minimize);
    let v = lp.add_var(false, None, 1.0);
    let u2: Vec<Vec<VarId>> = (0..n)
        .map(|_| (0..na2).map(|_| lp.add_var(true, None, 0.0)).collect())
        .collect();

    struct PairVars {
        lambda: Vec<VarId>,
        support: Vec<PointId>,
        corner: Vec<VarId>,
        dist: Vec<VarId>,
    }
    let mut pair_vars: Vec<PairVars> = Vec::with_capacity(npairs);
    for pi in 0..npairs {
        let lambda: Vec<VarId> = matching[pi]
            .iter()
            .map(|_| lp.add_var(true, None, 0.0))
            .collect();
        let mut support: Vec<PointId> = tau[pi].keys().copied().collect();
        for &j in &matching[pi] {
            for &(e, _) in upsilon.pair(j).belief.particles() {
                support.push(e);
            }
        }
        support.sort_unstable();
        support.dedup();
        let corner: Vec<VarId> = support.iter().map(|_| lp.add_var(true, None, 0.0)).collect();
        let dist: Vec<VarId> = support.iter().map(|_| lp.add_var(true, None, 0.0)).collect();
        pair_vars.push(PairVars {
            lambda,
            support,
            corner,
            dist,
        });
    }

    // u2 rows are distributions, one per particle.
    for row in &u2 {
        lp.add_constraint(row.iter().map(|&x| (x, 1.0)).collect(), Rel::Eq, 1.0);
    }

    for pi in 0..npairs {
        let pv = &pair_vars[pi];
        // Mass balance: interpolation plus corner mass equals the
        // (u2-dependent) total successor mass of this pair.
        let mut coeffs: Vec<(VarId, f64)> = Vec::new();
        for &l in &pv.lambda {
            coeffs.push((l, 1.0));
        }
        for &c in &pv.corner {
            coeffs.push((c, 1.0));
        }
        for terms in tau[pi].values() {
            for &(i, a2, w) in terms {
                coeffs.push((u2[i][a2], -w));
            }
        }
        lp.add_constraint(coeffs, Rel::Eq, 0.0);

        // Transport slack per successor point:
        // d_e >= +-(tau(e) - sum_j lambda_j b_j(e) - corner_e).
        for (si, &e) in pv.support.iter().enumerate() {
            let mut plus: Vec<(VarId, f64)> = vec![(pv.dist[si], 1.0), (pv.corner[si], 1.0)];
            let mut minus: Vec<(VarId, f64)> = vec![(pv.dist[si], 1.0), (pv.corner[si], -1.0)];
            for (k, &j) in matching[pi].iter().enumerate() {
                let bj = upsilon.pair(j).belief.weight_of(e);
                if bj != 0.0 {
                    plus.push((pv.lambda[k], bj));
                    minus.push((pv.lambda[k], -bj));
                }
            }
            if let Some(terms) = tau[pi].get(&e) {
                for &(i, a2, w) in terms {
                    plus.push((u2[i][a2], -w));
                    minus.push((u2[i][a2], w));
                }
            }
            lp.add_constraint(plus, Rel::Ge, 0.0);
            lp.add_constraint(minus, Rel::Ge, 0.0);
        }
    }

    // One value row per pure agent-1 action.
    for a1 in model.a1_ids() {
        let mut coeffs: Vec<(VarId, f64)> = vec![(v, 1.0)];
        for (i, &(e, kappa)) in b.particles().iter().enumerate() {
            for a2 in model.a2_ids() {
                let r = model.reward(s1, e, a1, a2);
                if r != 0.0 {
                    coeffs.push((u2[i][a2.0], -kappa * r));
                }
            }
        }
        for pi in 0..npairs {
            if geo.pairs[pi].0 != a1 {
                continue;
            }
            let pv = &pair_vars[pi];
            for (k, &j) in matching[pi].iter().enumerate() {
                coeffs.push((pv.lambda[k], -beta * upsilon.pair(j).y));
            }
            for &c in &pv.corner {
                coeffs.push((c, -beta * upsilon.upper));
            }
            for &d in &pv.dist {
                coeffs.push((d, -beta * upsilon.lambda_k));
            }
        }
        lp.add_constraint(coeffs, Rel::Ge, 0.0);
    }

    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(SolverError::Internal(format!(
            "upper stage LP ended {:?}",
            sol.status
        )));
    }

    let mut rows = std::collections::BTreeMap::new();
    for (i, &(e, _)) in b.particles().iter().enumerate() {
        let mut row: Vec<f64> = u2[i].iter().map(|&x| sol.values[x.0].max(0.0)).collect();
        let total: f64 = row.iter().sum();
        for x in &mut row {
            *x /= total;
        }
        rows.insert((s1, e), row);
    }
    let u2_star = StageStrategy2::with_rows(na2, rows)
        .map_err(|e| SolverError::Internal(format!("u2 rows not normalized: {e}")))?;
    Ok((sol.objective, u2_star))
}

/// Appends `(b, y_star)` to the upper bound.
pub fn backup_upper(
    upsilon: &mut UpsilonSet,
    b: &WeightedBelief,
    y_star: f64,
) -> Result<(), SolverError> {
    upsilon.push_dedup(BeliefValuePair {
        belief: b.clone(),
        y: y_star,
    });
    debug_assert!(
        eval_upper(upsilon, b)?.0 <= y_star + BOUND_TOL,
        "upper backup must be reflected at its belief"
    );
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SolveLimits {
    pub max_trials: usize,
    pub max_depth: usize,
    pub time_limit: Option<Duration>,
    /// Number of random probe beliefs checked against the monotonicity of
    /// the upper-bound operator after solving.
    pub probe_checks: usize,
    pub probe_seed: u64,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits {
            max_trials: 10_000,
            max_depth: 50,
            time_limit: None,
            probe_checks: 100,
            probe_seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    LimitReached,
}

/// Immutable result of a solve: both bound sets plus the achieved gap at the
/// initial belief. Online agents share this across episodes.
#[derive(Debug, Clone)]
pub struct FrozenBounds {
    pub gamma: AlphaSet,
    pub upsilon: UpsilonSet,
    pub lower: f64,
    pub upper: f64,
    pub epsilon: f64,
    pub gap: f64,
    pub status: SolveStatus,
    pub model_hash: String,
}

impl FrozenBounds {
    pub fn check_model(&self, model: &GameModel) -> Result<(), SolverError> {
        if self.model_hash != model.hash() {
            return Err(SolverError::ModelHashMismatch {
                expected: self.model_hash.clone(),
                found: model.hash().to_string(),
            });
        }
        Ok(())
    }

    pub fn lower_at(&self, model: &GameModel, b: &WeightedBelief) -> f64 {
        eval_lower(model, &self.gamma, b).0
    }

    pub fn upper_at(&self, b: &WeightedBelief) -> Result<f64, SolverError> {
        Ok(eval_upper(&self.upsilon, b)?.0)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub trials: usize,
    pub backups: u64,
    pub max_depth_seen: usize,
    /// eval_lower at the initial belief after every backup pair.
    pub lb_init_history: Vec<f64>,
    /// eval_upper at the initial belief after every backup pair.
    pub ub_init_history: Vec<f64>,
    pub lemma2_probes: usize,
    pub elapsed: Duration,
}

struct SolveCtx<'a> {
    model: &'a GameModel,
    gamma: AlphaSet,
    upsilon: UpsilonSet,
    epsilon: f64,
    max_depth: usize,
    deadline: Option<Instant>,
    deadline_hit: bool,
    stats: SolveStats,
}

impl SolveCtx<'_> {
    fn gap_at(&self, b: &WeightedBelief) -> Result<f64, SolverError> {
        let lo = eval_lower(self.model, &self.gamma, b).0;
        let hi = eval_upper(&self.upsilon, b)?.0;
        Ok(hi - lo)
    }

    /// Backs up both bounds at `b` and enforces the sandwich invariant.
    fn backup_both(
        &mut self,
        b: &WeightedBelief,
    ) -> Result<(ResolveSolution, StageStrategy2), SolverError> {
        self.stats.backups += 1;
        let id = self.stats.backups;
        let (sol, _) = backup_lower(self.model, &mut self.gamma, b, id)?;
        let (y_star, u2_star) = stage_lp_upper(self.model, &self.upsilon, b)?;
        backup_upper(&mut self.upsilon, b, y_star)?;

        let init = self.model.init_belief();
        self.stats
            .lb_init_history
            .push(eval_lower(self.model, &self.gamma, init).0);
        self.stats
            .ub_init_history
            .push(eval_upper(&self.upsilon, init)?.0);

        let lo = eval_lower(self.model, &self.gamma, b).0;
        let hi = eval_upper(&self.upsilon, b)?.0;
        if lo > hi + BOUND_TOL {
            return Err(SolverError::SandwichViolation {
                lower: lo,
                upper: hi,
            });
        }
        Ok((sol, u2_star))
    }

    fn explore(&mut self, b: &WeightedBelief, depth: usize) -> Result<(), SolverError> {
        if let Some(deadline) = self.deadline {
            if Instant::now() >= deadline {
                self.deadline_hit = true;
                return Ok(());
            }
        }
        self.stats.max_depth_seen = self.stats.max_depth_seen.max(depth);
        let target = self.epsilon * self.model.beta().powi(-(depth as i32));
        if self.gap_at(b)? <= target || depth >= self.max_depth {
            return Ok(());
        }

        let (sol, u2_star) = self.backup_both(b)?;
        let u1_star = sol.p_star;

        // Weighted-excess-gap successor choice.
        let probs = action_obs_prob(self.model, b, &u1_star, &u2_star);
        let child_target = self.epsilon * self.model.beta().powi(-(depth as i32 + 1));
        let mut best: Option<(f64, WeightedBelief)> = None;
        for (&(a1, s1n), &prob) in &probs {
            if prob <= 0.0 {
                continue;
            }
            let bn = update_belief(self.model, b, a1, &u2_star, s1n)?;
            let score = prob * (self.gap_at(&bn)? - child_target);
            if best.as_ref().map_or(true, |(s, _)| score > *s) {
                best = Some((score, bn));
            }
        }
        let (_, chosen) = best.ok_or_else(|| {
            SolverError::Internal("no positive-probability successor".to_string())
        })?;
        self.explore(&chosen, depth + 1)?;

        self.backup_both(b)?;
        Ok(())
    }
}

/// Draws a random belief consistent with the model's perception function:
/// the support is a subset of the points compatible with one percept.
pub fn random_probe_belief(model: &GameModel, rng: &mut impl Rng) -> WeightedBelief {
    let loc = crate::model::Loc1Id(rng.gen_range(0..model.num_loc1()));
    let anchor = PointId(rng.gen_range(0..model.num_points()));
    let per = model.perceive(loc, anchor);
    let compatible: Vec<PointId> = model
        .point_ids()
        .filter(|&e| model.perceive(loc, e) == per)
        .collect();
    let k = rng.gen_range(1..=compatible.len().min(6));
    let mut chosen = compatible;
    for i in (1..chosen.len()).rev() {
        let j = rng.gen_range(0..=i);
        chosen.swap(i, j);
    }
    chosen.truncate(k);
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let particles = chosen
        .into_iter()
        .zip(raw)
        .map(|(e, w)| (e, w / total))
        .collect();
    WeightedBelief::new(AgentState::new(loc, per), particles)
        .expect("probe beliefs are normalized by construction")
}

/// Runs heuristic search value iteration until the gap at the initial belief
/// is at most `epsilon` or a limit is hit. After solving, the upper-bound
/// operator is probed at random beliefs; a probe exceeding the stored bound
/// aborts with an error since it contradicts the bound's construction.
pub fn solve_hsvi(
    model: &GameModel,
    epsilon: f64,
    limits: &SolveLimits,
) -> Result<(FrozenBounds, SolveStats), SolverError> {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let start = Instant::now();
    let (gamma, upsilon, lower, upper) = init_bounds(model);
    let mut ctx = SolveCtx {
        model,
        gamma,
        upsilon,
        epsilon,
        max_depth: limits.max_depth,
        deadline: limits.time_limit.map(|d| start + d),
        deadline_hit: false,
        stats: SolveStats::default(),
    };

    let init = model.init_belief().clone();
    let mut status = SolveStatus::Converged;
    while ctx.gap_at(&init)? > epsilon {
        if ctx.stats.trials >= limits.max_trials || ctx.deadline_hit {
            status = SolveStatus::LimitReached;
            break;
        }
        ctx.stats.trials += 1;
        ctx.explore(&init, 0)?;
    }

    // Monotonicity of the value histories at the initial belief.
    for w in ctx.stats.lb_init_history.windows(2) {
        if w[1] < w[0] - BOUND_TOL {
            return Err(SolverError::Internal(format!(
                "lower bound at the initial belief decreased: {} -> {}",
                w[0], w[1]
            )));
        }
    }
    for w in ctx.stats.ub_init_history.windows(2) {
        if w[1] > w[0] + BOUND_TOL {
            return Err(SolverError::Internal(format!(
                "upper bound at the initial belief increased: {} -> {}",
                w[0], w[1]
            )));
        }
    }

    // Operator-monotonicity probes on the finished upper bound.
    let mut rng = ChaCha8Rng::seed_from_u64(limits.probe_seed);
    for _ in 0..limits.probe_checks {
        let probe = random_probe_belief(model, &mut rng);
        let (tv, _) = stage_lp_upper(model, &ctx.upsilon, &probe)?;
        let (vu, _) = eval_upper(&ctx.upsilon, &probe)?;
        if tv > vu + BOUND_TOL {
            return Err(SolverError::Lemma2Violation { got: tv, bound: vu });
        }
        ctx.stats.lemma2_probes += 1;
    }

    let gap = ctx.gap_at(&init)?;
    ctx.stats.elapsed = start.elapsed();
    let frozen = FrozenBounds {
        gamma: ctx.gamma,
        upsilon: ctx.upsilon,
        lower,
        upper,
        epsilon,
        gap,
        status,
        model_hash: model.hash().to_string(),
    };
    Ok((frozen, ctx.stats))
}

/// Serialized form of [`FrozenBounds`]; values round-trip bit-exactly
/// through JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsFile {
    pub model_hash: String,
    pub lower: f64,
    pub upper: f64,
    pub lambda_k: f64,
    /// How the interpolation constant was chosen; the half-range L1 constant
    /// is conservative.
    pub lambda_k_policy: String,
    pub epsilon_requested: f64,
    pub epsilon_achieved: f64,
    pub status: SolveStatus,
    pub gamma: Vec<AlphaFunction>,
    pub upsilon: Vec<BeliefValuePair>,
}

impl FrozenBounds {
    pub fn to_file(&self) -> BoundsFile {
        BoundsFile {
            model_hash: self.model_hash.clone(),
            lower: self.lower,
            upper: self.upper,
            lambda_k: self.upsilon.lambda_k,
            lambda_k_policy: "half-range-l1".to_string(),
            epsilon_requested: self.epsilon,
            epsilon_achieved: self.gap,
            status: self.status,
            gamma: self.gamma.alphas().to_vec(),
            upsilon: self.upsilon.pairs().to_vec(),
        }
    }

    pub fn from_file(file: BoundsFile) -> FrozenBounds {
        FrozenBounds {
            gamma: AlphaSet::from_alphas(file.gamma),
            upsilon: UpsilonSet::from_pairs(file.upsilon, file.lambda_k, file.lower, file.upper),
            lower: file.lower,
            upper: file.upper,
            epsilon: file.epsilon_requested,
            gap: file.epsilon_achieved,
            status: file.status,
            model_hash: file.model_hash,
        }
    }

    pub fn save_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("bounds always serialize")
    }

    pub fn load_json(text: &str) -> Result<FrozenBounds, SolverError> {
        let file: BoundsFile = serde_json::from_str(text)
            .map_err(|e| SolverError::Internal(format!("bounds file parse error: {e}")))?;
        Ok(FrozenBounds::from_file(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::A2Id;
    use crate::presets;

    #[test]
    fn stage_lower_single_forced() {
        let m = presets::single();
        let (gamma, _, _, _) = init_bounds(&m);
        let sol = stage_lp_lower(&m, &gamma, m.init_belief(), None).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-7, "got {}", sol.objective);
        assert!((sol.p_star.prob(A1Id(0)) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn stage_lower_pennies_matrix_game() {
        // With the constant -2 continuation the stage game is matching
        // pennies shifted by beta * (-2): value -1, strategy (1/2, 1/2).
        let m = presets::matching_pennies();
        let (gamma, _, _, _) = init_bounds(&m);
        let sol = stage_lp_lower(&m, &gamma, m.init_belief(), None).unwrap();
        assert!((sol.objective + 1.0).abs() < 1e-7, "got {}", sol.objective);
        assert!((sol.p_star.prob(A1Id(0)) - 0.5).abs() < 1e-7);
        assert!((sol.p_star.prob(A1Id(1)) - 0.5).abs() < 1e-7);
        for (pi, &(a1, _)) in sol.pairs.iter().enumerate() {
            let mass: f64 = sol.lambda[pi].iter().sum();
            assert!((mass - sol.p_star.prob(a1)).abs() < 1e-7);
        }
    }

    #[test]
    fn stage_lower_floor_at_optimum_stays_feasible() {
        let m = presets::single();
        let (gamma, _, _, _) = init_bounds(&m);
        let floor = AlphaFunction::constant(&m, 2.0, Provenance::Backup(1));
        let sol = stage_lp_lower(&m, &gamma, m.init_belief(), Some(&floor)).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-7);
    }

    #[test]
    fn stage_lower_infeasible_floor_is_reported() {
        let m = presets::single();
        let (gamma, _, _, _) = init_bounds(&m);
        let floor = AlphaFunction::constant(&m, 3.0, Provenance::Backup(1));
        let err = stage_lp_lower(&m, &gamma, m.init_belief(), Some(&floor)).unwrap_err();
        assert!(matches!(err, SolverError::Lemma1Violation));
    }

    #[test]
    fn backup_lower_single_fixed_point() {
        let m = presets::single();
        let (mut gamma, _, _, _) = init_bounds(&m);
        let (sol, idx) = backup_lower(&m, &mut gamma, m.init_belief(), 1).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-7);
        assert!((gamma.alpha(idx).eval(&m, m.init_belief()) - 2.0).abs() < 1e-7);
    }

    #[test]
    fn backup_lower_pennies_geometric() {
        // Repeated backups at the initial belief follow v <- 0.5 v from -2.
        let m = presets::matching_pennies();
        let (mut gamma, _, _, _) = init_bounds(&m);
        for k in 1..=6u32 {
            backup_lower(&m, &mut gamma, m.init_belief(), k as u64).unwrap();
            let expected = -2.0 * 0.5f64.powi(k as i32);
            let got = eval_lower(&m, &gamma, m.init_belief()).0;
            assert!(
                (got - expected).abs() < 1e-6,
                "after {k} backups: got {got}, expected {expected}"
            );
        }
    }

    #[test]
    fn stage_upper_single() {
        let m = presets::single();
        let (_, upsilon, _, _) = init_bounds(&m);
        let (y, _) = stage_lp_upper(&m, &upsilon, m.init_belief()).unwrap();
        assert!((y - 2.0).abs() < 1e-7, "got {y}");
    }

    #[test]
    fn stage_upper_pennies() {
        let m = presets::matching_pennies();
        let (_, upsilon, _, _) = init_bounds(&m);
        let (y, u2) = stage_lp_upper(&m, &upsilon, m.init_belief()).unwrap();
        assert!((y - 1.0).abs() < 1e-7, "got {y}");
        let row = u2.row(m.init_belief().agent_state(), PointId(0));
        assert!((row[0] - 0.5).abs() < 1e-7 && (row[1] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn stage_upper_hide_with_pinned_continuation() {
        // Pin the successor (the sink) at value 0: the stage LP reduces to
        // the guessing game, whose upper value at (0.9, 0.1) is 0.9.
        let m = presets::hide();
        let (_, mut upsilon, _, _) = init_bounds(&m);
        let sink = m.find_point("sink").unwrap();
        let s1 = m.init_belief().agent_state();
        backup_upper(&mut upsilon, &WeightedBelief::point(s1, sink), 0.0).unwrap();
        let (y, _) = stage_lp_upper(&m, &upsilon, m.init_belief()).unwrap();
        assert!((y - 0.9).abs() < 1e-7, "got {y}");

        // Brute force over pure stage strategies agrees: agent 2 has a
        // single action, so the value is max over pure guesses.
        let mut brute = f64::NEG_INFINITY;
        for a1 in m.a1_ids() {
            let mut total = 0.0;
            for &(e, k) in m.init_belief().particles() {
                total += k * m.reward(s1, e, a1, A2Id(0));
            }
            brute = brute.max(total);
        }
        assert!((y - brute).abs() < 1e-7);
    }

    #[test]
    fn backup_upper_monotone_at_belief() {
        let m = presets::matching_pennies();
        let (_, mut upsilon, _, _) = init_bounds(&m);
        let (y, _) = stage_lp_upper(&m, &upsilon, m.init_belief()).unwrap();
        backup_upper(&mut upsilon, m.init_belief(), y).unwrap();
        let (v, _) = eval_upper(&upsilon, m.init_belief()).unwrap();
        assert!(v <= 1.0 + 1e-7, "got {v}");
    }

    #[test]
    fn solve_single_converges_immediately() {
        let m = presets::single();
        let (frozen, stats) = solve_hsvi(&m, 0.01, &SolveLimits::default()).unwrap();
        assert_eq!(frozen.status, SolveStatus::Converged);
        assert!(frozen.gap <= 0.01);
        let lb = frozen.lower_at(&m, m.init_belief());
        let ub = frozen.upper_at(m.init_belief()).unwrap();
        assert!((lb - 2.0).abs() <= 0.01 && (ub - 2.0).abs() <= 0.01);
        assert_eq!(stats.backups, 0);
    }

    #[test]
    fn solve_pennies_brackets_zero_with_depth_bound() {
        let m = presets::matching_pennies();
        let (frozen, stats) = solve_hsvi(&m, 0.01, &SolveLimits::default()).unwrap();
        assert_eq!(frozen.status, SolveStatus::Converged);
        let lb = frozen.lower_at(&m, m.init_belief());
        let ub = frozen.upper_at(m.init_belief()).unwrap();
        assert!(lb - 0.01 <= 0.0 && 0.0 <= ub + 0.01, "[{lb}, {ub}]");
        // Gap shrink bound: 0.01 * 2^d >= U - L = 4 at d = 9.
        assert!(stats.max_depth_seen <= 9, "depth {}", stats.max_depth_seen);
    }

    #[test]
    fn solve_hide_brackets_bernoulli_value() {
        let m = presets::hide();
        let (frozen, _) = solve_hsvi(&m, 0.01, &SolveLimits::default()).unwrap();
        assert_eq!(frozen.status, SolveStatus::Converged);
        let lb = frozen.lower_at(&m, m.init_belief());
        let ub = frozen.upper_at(m.init_belief()).unwrap();
        assert!(
            lb - 0.01 <= 0.9 && 0.9 <= ub + 0.01,
            "expected 0.9 in [{lb}, {ub}]"
        );
    }

    #[test]
    fn bounds_file_round_trip_is_bit_exact() {
        let m = presets::matching_pennies();
        let (frozen, _) = solve_hsvi(&m, 0.05, &SolveLimits::default()).unwrap();
        let text = frozen.save_json();
        let loaded = FrozenBounds::load_json(&text).unwrap();
        let b = m.init_belief();
        assert_eq!(
            frozen.lower_at(&m, b).to_bits(),
            loaded.lower_at(&m, b).to_bits()
        );
        assert_eq!(
            frozen.upper_at(b).unwrap().to_bits(),
            loaded.upper_at(b).unwrap().to_bits()
        );
        assert_eq!(frozen.gamma.len(), loaded.gamma.len());
    }

    #[test]
    fn probe_beliefs_are_percept_consistent() {
        let m = presets::random_game(5, &presets::RandomGameConfig::partial(8, 2, 2, 3));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let b = random_probe_belief(&m, &mut rng);
            for &(e, _) in b.particles() {
                assert_eq!(m.perceive(b.agent_state().loc1, e), b.agent_state().per1);
            }
        }
    }
}
