//! Lower and upper bound representations of the game value.
//!
//! The lower bound is a finite set of piecewise-constant alpha functions,
//! stored as value tables over (agent state, region); its value at a belief
//! is the best particle-weighted sum. The upper bound is a finite set of
//! belief-value pairs combined by Lipschitz-regularized convex interpolation,
//! solved as a small LP, and capped at the trivial bound `U`.

use serde::{Deserialize, Serialize};

use crate::belief::WeightedBelief;
use crate::lp::{LinearProgram, LpError, LpStatus, Rel, Sense};
use crate::model::GameModel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// The initial alpha, constant `L`.
    Initial,
    /// Produced by the k-th point-based backup.
    Backup(u64),
    /// Composed online from convex combinations of stored alphas; never part
    /// of a persisted bound set.
    Composed,
}

/// A piecewise-constant value function: one entry per (agent state, region).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaFunction {
    /// Row-major over agent states (loc1-major), then regions.
    values: Vec<f64>,
    num_regions: usize,
    pub provenance: Provenance,
}

impl AlphaFunction {
    pub fn constant(model: &GameModel, value: f64, provenance: Provenance) -> Self {
        AlphaFunction {
            values: vec![value; model.num_agent_states() * model.num_regions()],
            num_regions: model.num_regions(),
            provenance,
        }
    }

    pub fn from_values(values: Vec<f64>, num_regions: usize, provenance: Provenance) -> Self {
        debug_assert_eq!(values.len() % num_regions, 0);
        AlphaFunction {
            values,
            num_regions,
            provenance,
        }
    }

    #[inline]
    pub fn value_at(&self, s1_index: usize, region: usize) -> f64 {
        self.values[s1_index * self.num_regions + region]
    }

    #[inline]
    pub fn set_value(&mut self, s1_index: usize, region: usize, v: f64) {
        self.values[s1_index * self.num_regions + region] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_regions(&self) -> usize {
        self.num_regions
    }

    /// Copies the whole agent-state slice `s1_index` from `other`.
    pub fn copy_slice_from(&mut self, other: &AlphaFunction, s1_index: usize) {
        let a = s1_index * self.num_regions;
        let b = a + self.num_regions;
        self.values[a..b].copy_from_slice(&other.values[a..b]);
    }

    /// The particle-weighted value of this function at a belief.
    pub fn eval(&self, model: &GameModel, b: &WeightedBelief) -> f64 {
        let s1 = model.s1_index(b.agent_state());
        b.particles()
            .iter()
            .map(|&(e, k)| k * self.value_at(s1, model.region_of(e).0))
            .sum()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The lower-bound set Gamma. Index 0 always holds the initial constant-L
/// alpha; exact duplicates are never stored twice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaSet {
    alphas: Vec<AlphaFunction>,
}

impl AlphaSet {
    pub fn initial(model: &GameModel, lower: f64) -> Self {
        AlphaSet {
            alphas: vec![AlphaFunction::constant(model, lower, Provenance::Initial)],
        }
    }

    pub fn from_alphas(alphas: Vec<AlphaFunction>) -> Self {
        assert!(!alphas.is_empty(), "alpha set must contain the initial alpha");
        AlphaSet { alphas }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn alpha(&self, i: usize) -> &AlphaFunction {
        &self.alphas[i]
    }

    pub fn alphas(&self) -> &[AlphaFunction] {
        &self.alphas
    }

    /// Appends unless an entrywise-identical alpha already exists. Returns
    /// the index of the stored function and whether it was new.
    pub fn push_dedup(&mut self, alpha: AlphaFunction) -> (usize, bool) {
        if let Some(i) = self.alphas.iter().position(|a| a.values == alpha.values) {
            return (i, false);
        }
        self.alphas.push(alpha);
        (self.alphas.len() - 1, true)
    }
}

/// `max_alpha <alpha, b>` plus the argmax index (lowest index on ties).
pub fn eval_lower(model: &GameModel, gamma: &AlphaSet, b: &WeightedBelief) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut best_i = 0;
    for (i, alpha) in gamma.alphas.iter().enumerate() {
        let v = alpha.eval(model, b);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    (best, best_i)
}

/// One sample of the upper bound: a belief and a value known to dominate the
/// optimal value there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefValuePair {
    pub belief: WeightedBelief,
    pub y: f64,
}

/// The upper-bound set Upsilon with its Lipschitz interpolation constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpsilonSet {
    pairs: Vec<BeliefValuePair>,
    /// Interpolation constant: (U - L) / 2.
    pub lambda_k: f64,
    pub lower: f64,
    pub upper: f64,
}

impl UpsilonSet {
    pub fn new(lambda_k: f64, lower: f64, upper: f64) -> Self {
        UpsilonSet {
            pairs: Vec::new(),
            lambda_k,
            lower,
            upper,
        }
    }

    pub fn from_pairs(pairs: Vec<BeliefValuePair>, lambda_k: f64, lower: f64, upper: f64) -> Self {
        UpsilonSet {
            pairs,
            lambda_k,
            lower,
            upper,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[BeliefValuePair] {
        &self.pairs
    }

    pub fn pair(&self, i: usize) -> &BeliefValuePair {
        &self.pairs[i]
    }

    /// Appends a pair unless an identical belief is already stored with a
    /// value at least as tight.
    pub fn push_dedup(&mut self, pair: BeliefValuePair) -> bool {
        if self
            .pairs
            .iter()
            .any(|p| p.belief == pair.belief && p.y <= pair.y)
        {
            return false;
        }
        self.pairs.push(pair);
        true
    }

    /// Indices of pairs whose agent state matches.
    pub fn matching(&self, b: &WeightedBelief) -> Vec<usize> {
        self.pairs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.belief.agent_state() == b.agent_state())
            .map(|(i, _)| i)
            .collect()
    }

    /// The Lipschitz penalty between two particle vectors.
    pub fn k_ub(&self, b1: &WeightedBelief, b1_prime: &WeightedBelief) -> f64 {
        self.lambda_k * b1.l1_distance(b1_prime)
    }
}

/// Initial bounds: constants from the discounted reward range; Gamma starts
/// at the constant-L alpha, Upsilon seeds the initial belief at U.
pub fn init_bounds(model: &GameModel) -> (AlphaSet, UpsilonSet, f64, f64) {
    let (rmin, rmax) = model.reward_range();
    let lower = rmin / (1.0 - model.beta());
    let upper = rmax / (1.0 - model.beta());
    let gamma = AlphaSet::initial(model, lower);
    let mut upsilon = UpsilonSet::new((upper - lower) / 2.0, lower, upper);
    upsilon.push_dedup(BeliefValuePair {
        belief: model.init_belief().clone(),
        y: upper,
    });
    (gamma, upsilon, lower, upper)
}

/// Convex interpolation over matching pairs with an L1 transport penalty,
/// capped at `U`. Returns the value and the interpolation weights (pair
/// index, weight); the weights are empty when no pair matches the agent
/// state and the fallback `U` applies.
pub fn eval_upper(
    upsilon: &UpsilonSet,
    b: &WeightedBelief,
) -> Result<(f64, Vec<(usize, f64)>), LpError> {
    let matching = upsilon.matching(b);
    if matching.is_empty() {
        return Ok((upsilon.upper, Vec::new()));
    }

    // Union of supports, ascending point ids.
    let mut support: Vec<usize> = b.particles().iter().map(|&(e, _)| e.0).collect();
    for &j in &matching {
        for &(e, _) in upsilon.pairs[j].belief.particles() {
            support.push(e.0);
        }
    }
    support.sort_unstable();
    support.dedup();

    let mut lp = LinearProgram::new(Sense::Minimize);
    let lambda: Vec<_> = matching
        .iter()
        .map(|&j| lp.add_var(true, None, upsilon.pairs[j].y))
        .collect();
    let d: Vec<_> = support
        .iter()
        .map(|_| lp.add_var(true, None, upsilon.lambda_k))
        .collect();

    lp.add_constraint(lambda.iter().map(|&v| (v, 1.0)).collect(), Rel::Eq, 1.0);
    for (si, &e) in support.iter().enumerate() {
        let be = b.weight_of(crate::model::PointId(e));
        // d_e >= |b(e) - sum_j lambda_j b_j(e)|
        let mut up: Vec<_> = vec![(d[si], 1.0)];
        let mut dn: Vec<_> = vec![(d[si], 1.0)];
        for (k, &j) in matching.iter().enumerate() {
            let bj = upsilon.pairs[j].belief.weight_of(crate::model::PointId(e));
            if bj != 0.0 {
                up.push((lambda[k], bj));
                dn.push((lambda[k], -bj));
            }
        }
        lp.add_constraint(up, Rel::Ge, be);
        lp.add_constraint(dn, Rel::Ge, -be);
    }

    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(LpError::Numerical(format!(
            "upper-bound interpolation LP ended {:?}",
            sol.status
        )));
    }
    let weights: Vec<(usize, f64)> = matching
        .iter()
        .enumerate()
        .map(|(k, &j)| (j, sol.values[lambda[k].0].max(0.0)))
        .collect();
    Ok((sol.objective.min(upsilon.upper), weights))
}
