//! Shapley value iteration for fully observed instances.
//!
//! When the perception function distinguishes every environment point (per
//! local state), the game is a fully observed zero-sum stochastic game over
//! (agent state, point) pairs, and its value solves the fixed point of the
//! per-state matrix game. This is the independent oracle the solver's bounds
//! are checked against.

use thiserror::Error;

use crate::lp::{matrix_game_value, LpError};
use crate::model::{AgentState, GameModel, PointId};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(
        "model is not fully observed: points {a} and {b} share percept under loc1 {loc}"
    )]
    NotFullyObserved { loc: usize, a: String, b: String },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("value iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
}

/// The oracle's state space: every (loc1, point) with its forced percept.
pub fn full_states(model: &GameModel) -> Vec<(AgentState, PointId)> {
    let mut out = Vec::with_capacity(model.num_loc1() * model.num_points());
    for loc in model.loc1_ids() {
        for e in model.point_ids() {
            let per = model.perceive(loc, e);
            out.push((AgentState::new(loc, per), e));
        }
    }
    out
}

fn check_fully_observed(model: &GameModel) -> Result<(), OracleError> {
    for loc in model.loc1_ids() {
        let mut seen: Vec<Option<PointId>> = vec![None; model.num_per1()];
        for e in model.point_ids() {
            let per = model.perceive(loc, e);
            if let Some(prev) = seen[per.0] {
                return Err(OracleError::NotFullyObserved {
                    loc: loc.0,
                    a: model.point_name(prev).to_string(),
                    b: model.point_name(e).to_string(),
                });
            }
            seen[per.0] = Some(e);
        }
    }
    Ok(())
}

/// Solves the fully observed game by value iteration over per-state matrix
/// games, to a guaranteed sup-norm error of at most `tol`.
pub fn shapley_solve(
    model: &GameModel,
    tol: f64,
) -> Result<Vec<((AgentState, PointId), f64)>, OracleError> {
    check_fully_observed(model)?;
    let states = full_states(model);
    let index = |loc: usize, e: usize| loc * model.num_points() + e;
    let beta = model.beta();
    // Stop when the sweep moves no value by more than tol (1-beta) / (2 beta),
    // which bounds the remaining error by tol / 2.
    let threshold = tol * (1.0 - beta) / (2.0 * beta);

    let mut values = vec![0.0; states.len()];
    let max_sweeps = 1_000_000;
    for _ in 0..max_sweeps {
        let mut next = vec![0.0; states.len()];
        let mut delta: f64 = 0.0;
        for (si, &(s1, e)) in states.iter().enumerate() {
            let mut matrix = vec![vec![0.0; model.num_a2()]; model.num_a1()];
            for a1 in model.a1_ids() {
                for a2 in model.a2_ids() {
                    let mut val = model.reward(s1, e, a1, a2);
                    for &((s1n, en), p) in model.joint_transition((s1, e), (a1, a2)).iter() {
                        val += beta * p * values[index(s1n.loc1.0, en.0)];
                    }
                    matrix[a1.0][a2.0] = val;
                }
            }
            let (v, _) = matrix_game_value(&matrix)?;
            next[si] = v;
            delta = delta.max((v - values[si]).abs());
        }
        values = next;
        if delta <= threshold {
            return Ok(states.into_iter().zip(values).collect());
        }
    }
    Err(OracleError::NoConvergence(max_sweeps))
}
