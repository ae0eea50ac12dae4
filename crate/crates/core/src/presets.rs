//! Built-in example games and seeded random instances.
//!
//! The tiny named games have analytically known values and are used across
//! the test suite; the random generators produce small fully- or
//! partially-observed instances for oracle comparisons and stress tests.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    A1Id, A2Id, EnvPoint, GameModel, Loc1Id, ModelParts, PerId, Perception, PointId, RegionId,
};

/// One point, one action per side, reward 1, self-loop, discount 0.5.
/// The value is 1/(1-0.5) = 2 everywhere.
pub fn single() -> GameModel {
    GameModel::build(single_parts()).expect("single preset must validate")
}

/// Raw parts of [`single`], handy for tests that perturb one field.
pub fn single_parts() -> ModelParts {
    let mut reward = BTreeMap::new();
    reward.insert((Loc1Id(0), PerId(0), PointId(0), A1Id(0), A2Id(0)), 1.0);
    ModelParts {
        loc1: vec!["l".into()],
        per1: vec!["p".into()],
        a1: vec!["a".into()],
        a2: vec!["b".into()],
        regions: vec!["r".into()],
        points: vec![EnvPoint {
            name: "e".into(),
            coords: vec![0.0],
            region: RegionId(0),
        }],
        perception: Perception::Table(BTreeMap::from([((Loc1Id(0), RegionId(0)), PerId(0))])),
        delta1: BTreeMap::new(),
        delta_e: BTreeMap::new(),
        reward,
        beta: 0.5,
        init_loc1: Loc1Id(0),
        init_per1: PerId(0),
        init_particles: vec![(PointId(0), 1.0)],
    }
}

/// Matching pennies on a single environment point with discount 0.5. The
/// stage game is zero-sum with value 0; the discounted game value is 0 and
/// the unique equilibrium plays both actions with probability 1/2.
pub fn matching_pennies() -> GameModel {
    let mut reward = BTreeMap::new();
    for (a1, a2) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let r = if a1 == a2 { 1.0 } else { -1.0 };
        reward.insert((Loc1Id(0), PerId(0), PointId(0), A1Id(a1), A2Id(a2)), r);
    }
    let parts = ModelParts {
        loc1: vec!["l".into()],
        per1: vec!["p".into()],
        a1: vec!["heads".into(), "tails".into()],
        a2: vec!["heads".into(), "tails".into()],
        regions: vec!["r".into()],
        points: vec![EnvPoint {
            name: "e".into(),
            coords: vec![0.0],
            region: RegionId(0),
        }],
        perception: Perception::Table(BTreeMap::from([((Loc1Id(0), RegionId(0)), PerId(0))])),
        delta1: BTreeMap::new(),
        delta_e: BTreeMap::new(),
        reward,
        beta: 0.5,
        init_loc1: Loc1Id(0),
        init_per1: PerId(0),
        init_particles: vec![(PointId(0), 1.0)],
    };
    GameModel::build(parts).expect("matching pennies preset must validate")
}

/// A one-shot guessing game: the environment hides in `left` or `right`
/// (percept is constant, so agent 1 cannot see which), agent 1 guesses, a
/// correct guess pays 1, and the game then absorbs into `sink`. With the
/// default initial belief (0.9, 0.1) the value is 0.9.
pub fn hide() -> GameModel {
    hide_with_init(0.9, 0.1)
}

pub fn hide_with_init(w_left: f64, w_right: f64) -> GameModel {
    let names = ["left", "right", "sink"];
    let mut delta_e = BTreeMap::new();
    let mut reward = BTreeMap::new();
    for a1 in 0..2 {
        // Both hiding points collapse into the sink after the guess.
        delta_e.insert(
            (Loc1Id(0), PointId(0), A1Id(a1), A2Id(0)),
            vec![(PointId(2), 1.0)],
        );
        delta_e.insert(
            (Loc1Id(0), PointId(1), A1Id(a1), A2Id(0)),
            vec![(PointId(2), 1.0)],
        );
    }
    reward.insert((Loc1Id(0), PerId(0), PointId(0), A1Id(0), A2Id(0)), 1.0);
    reward.insert((Loc1Id(0), PerId(0), PointId(1), A1Id(1), A2Id(0)), 1.0);
    let parts = ModelParts {
        loc1: vec!["l".into()],
        per1: vec!["blank".into()],
        a1: vec!["guess-left".into(), "guess-right".into()],
        a2: vec!["wait".into()],
        regions: names.iter().map(|n| format!("g-{n}")).collect(),
        points: names
            .iter()
            .enumerate()
            .map(|(i, n)| EnvPoint {
                name: (*n).into(),
                coords: vec![i as f64],
                region: RegionId(i),
            })
            .collect(),
        perception: Perception::Table(BTreeMap::from_iter(
            (0..3).map(|r| ((Loc1Id(0), RegionId(r)), PerId(0))),
        )),
        delta1: BTreeMap::new(),
        delta_e,
        reward,
        beta: 0.5,
        init_loc1: Loc1Id(0),
        init_per1: PerId(0),
        init_particles: vec![(PointId(0), w_left), (PointId(1), w_right)],
    };
    GameModel::build(parts).expect("hide preset must validate")
}

/// Like [`hide`] but with self-loop dynamics and a uniform initial belief;
/// the posterior can never move. Used for belief symmetry checks.
pub fn hide_static() -> GameModel {
    let names = ["left", "right"];
    let mut reward = BTreeMap::new();
    reward.insert((Loc1Id(0), PerId(0), PointId(0), A1Id(0), A2Id(0)), 1.0);
    reward.insert((Loc1Id(0), PerId(0), PointId(1), A1Id(1), A2Id(0)), 1.0);
    let parts = ModelParts {
        loc1: vec!["l".into()],
        per1: vec!["blank".into()],
        a1: vec!["guess-left".into(), "guess-right".into()],
        a2: vec!["wait".into()],
        regions: names.iter().map(|n| format!("g-{n}")).collect(),
        points: names
            .iter()
            .enumerate()
            .map(|(i, n)| EnvPoint {
                name: (*n).into(),
                coords: vec![i as f64],
                region: RegionId(i),
            })
            .collect(),
        perception: Perception::Table(BTreeMap::from_iter(
            (0..2).map(|r| ((Loc1Id(0), RegionId(r)), PerId(0))),
        )),
        delta1: BTreeMap::new(),
        delta_e: BTreeMap::new(),
        reward,
        beta: 0.5,
        init_loc1: Loc1Id(0),
        init_per1: PerId(0),
        init_particles: vec![(PointId(0), 0.5), (PointId(1), 0.5)],
    };
    GameModel::build(parts).expect("hide-static preset must validate")
}

fn split_parts(num_a1: usize) -> ModelParts {
    let names = ["start-left", "start-right", "pointA", "pointB"];
    let mut delta_e = BTreeMap::new();
    for a1 in 0..num_a1 {
        delta_e.insert(
            (Loc1Id(0), PointId(0), A1Id(a1), A2Id(0)),
            vec![(PointId(2), 1.0)],
        );
        delta_e.insert(
            (Loc1Id(0), PointId(1), A1Id(a1), A2Id(0)),
            vec![(PointId(3), 1.0)],
        );
    }
    ModelParts {
        loc1: vec!["l".into()],
        per1: vec!["both".into(), "pA".into(), "pB".into()],
        a1: (0..num_a1).map(|i| format!("go{i}")).collect(),
        a2: vec!["wait".into()],
        regions: names.iter().map(|n| format!("g-{n}")).collect(),
        points: names
            .iter()
            .enumerate()
            .map(|(i, n)| EnvPoint {
                name: (*n).into(),
                coords: vec![i as f64],
                region: RegionId(i),
            })
            .collect(),
        perception: Perception::Table(BTreeMap::from([
            ((Loc1Id(0), RegionId(0)), PerId(0)),
            ((Loc1Id(0), RegionId(1)), PerId(0)),
            ((Loc1Id(0), RegionId(2)), PerId(1)),
            ((Loc1Id(0), RegionId(3)), PerId(2)),
        ])),
        delta1: BTreeMap::new(),
        delta_e,
        reward: BTreeMap::new(),
        beta: 0.5,
        init_loc1: Loc1Id(0),
        init_per1: PerId(0),
        init_particles: vec![(PointId(0), 0.5), (PointId(1), 0.5)],
    }
}

/// Two equally likely hidden starts that deterministically split into two
/// distinguishable successor points. One agent-1 action.
pub fn split() -> GameModel {
    GameModel::build(split_parts(1)).expect("split preset must validate")
}

/// [`split`] with two (dynamically identical) agent-1 actions.
pub fn split2() -> GameModel {
    GameModel::build(split_parts(2)).expect("split2 preset must validate")
}

/// Shape of a seeded random instance.
#[derive(Debug, Clone)]
pub struct RandomGameConfig {
    pub num_points: usize,
    pub num_a1: usize,
    pub num_a2: usize,
    /// Maximum support size of each environment transition row.
    pub max_branch: usize,
    /// With full observability every point gets its own percept; otherwise
    /// points are grouped into `num_percepts` classes.
    pub observable: bool,
    pub num_percepts: usize,
    pub beta: f64,
}

impl RandomGameConfig {
    pub fn observable(num_points: usize, num_a1: usize, num_a2: usize) -> Self {
        RandomGameConfig {
            num_points,
            num_a1,
            num_a2,
            max_branch: 3,
            observable: true,
            num_percepts: num_points,
            beta: 0.5,
        }
    }

    pub fn partial(num_points: usize, num_a1: usize, num_a2: usize, num_percepts: usize) -> Self {
        RandomGameConfig {
            num_points,
            num_a1,
            num_a2,
            max_branch: 3,
            observable: false,
            num_percepts,
            beta: 0.5,
        }
    }
}

/// Generates a random game with singleton regions, rewards in [-1, 1] and a
/// random initial belief (a single point when observable, otherwise uniform
/// over one percept class).
pub fn random_game(seed: u64, cfg: &RandomGameConfig) -> GameModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.num_points;
    assert!(n >= 2, "random games need at least two points");
    let num_percepts = if cfg.observable { n } else { cfg.num_percepts.min(n) };

    // Percept class per point: a shuffled round-robin so every class is hit.
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut class = vec![0usize; n];
    for (k, &p) in order.iter().enumerate() {
        class[p] = k % num_percepts;
    }

    let mut perception = BTreeMap::new();
    for e in 0..n {
        perception.insert((Loc1Id(0), RegionId(e)), PerId(class[e]));
    }

    let mut delta_e = BTreeMap::new();
    let mut reward = BTreeMap::new();
    for e in 0..n {
        for a1 in 0..cfg.num_a1 {
            for a2 in 0..cfg.num_a2 {
                let branch = rng.gen_range(1..=cfg.max_branch.max(1));
                let mut targets: Vec<usize> = Vec::with_capacity(branch);
                while targets.len() < branch {
                    let t = rng.gen_range(0..n);
                    if !targets.contains(&t) {
                        targets.push(t);
                    }
                }
                targets.sort_unstable();
                let raw: Vec<f64> = (0..branch).map(|_| rng.gen_range(0.1..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let dist: Vec<(PointId, f64)> = targets
                    .iter()
                    .zip(&raw)
                    .map(|(&t, &w)| (PointId(t), w / total))
                    .collect();
                delta_e.insert((Loc1Id(0), PointId(e), A1Id(a1), A2Id(a2)), dist);
                let r = rng.gen_range(-1.0..1.0);
                reward.insert(
                    (Loc1Id(0), PerId(class[e]), PointId(e), A1Id(a1), A2Id(a2)),
                    r,
                );
            }
        }
    }

    let init_point = rng.gen_range(0..n);
    let init_per = class[init_point];
    let init_particles: Vec<(PointId, f64)> = if cfg.observable {
        vec![(PointId(init_point), 1.0)]
    } else {
        let members: Vec<usize> = (0..n).filter(|&e| class[e] == init_per).collect();
        let w = 1.0 / members.len() as f64;
        members.into_iter().map(|e| (PointId(e), w)).collect()
    };

    let parts = ModelParts {
        loc1: vec!["l".into()],
        per1: (0..num_percepts).map(|i| format!("o{i}")).collect(),
        a1: (0..cfg.num_a1).map(|i| format!("u{i}")).collect(),
        a2: (0..cfg.num_a2).map(|i| format!("w{i}")).collect(),
        regions: (0..n).map(|i| format!("g{i}")).collect(),
        points: (0..n)
            .map(|i| EnvPoint {
                name: format!("s{i}"),
                coords: vec![i as f64],
                region: RegionId(i),
            })
            .collect(),
        perception: Perception::Table(perception),
        delta1: BTreeMap::new(),
        delta_e,
        reward,
        beta: cfg.beta,
        init_loc1: Loc1Id(0),
        init_per1: PerId(init_per),
        init_particles,
    };
    GameModel::build(parts).expect("random game must validate")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_presets_validate() {
        assert_eq!(single().num_points(), 1);
        assert_eq!(matching_pennies().num_a1(), 2);
        assert_eq!(hide().num_points(), 3);
        assert_eq!(split().num_points(), 4);
    }

    #[test]
    fn random_games_validate_and_are_seed_stable() {
        for seed in 0..5 {
            let cfg = RandomGameConfig::observable(8, 3, 2);
            let a = random_game(seed, &cfg);
            let b = random_game(seed, &cfg);
            assert_eq!(a.hash(), b.hash());
            let cfg = RandomGameConfig::partial(8, 2, 2, 3);
            let m = random_game(seed, &cfg);
            assert!(m.init_belief().len() >= 2, "partial init should spread");
        }
    }

    #[test]
    fn observable_games_have_injective_perception() {
        let cfg = RandomGameConfig::observable(7, 2, 2);
        let m = random_game(11, &cfg);
        let mut seen = std::collections::BTreeSet::new();
        for e in m.point_ids() {
            assert!(seen.insert(m.perceive(Loc1Id(0), e)));
        }
    }
}
