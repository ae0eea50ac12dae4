//! Pursuit-evasion on a small grid.
//!
//! An environment point is a (pursuer cell, evader cell) pair plus one
//! absorbing `caught` point. Both agents move simultaneously with
//! up/down/left/right/stay; moves off the grid are no-ops. When both agents
//! occupy the same cell the capture reward is paid under every joint action
//! and the game absorbs. The pursuer perceives only its own cell; the evader
//! is fully informed.

use std::collections::BTreeMap;

use crate::model::{
    A1Id, A2Id, EnvPoint, GameModel, Loc1Id, ModelError, ModelParts, PerId, Perception, PointId,
    RegionId,
};

/// The five moves, shared by both agents.
pub const MOVES: [(&str, i32, i32); 5] = [
    ("up", 0, 1),
    ("down", 0, -1),
    ("left", -1, 0),
    ("right", 1, 0),
    ("stay", 0, 0),
];

#[derive(Debug, Clone)]
pub struct PursuitConfig {
    pub width: usize,
    pub height: usize,
    pub beta: f64,
    pub capture_reward: f64,
    /// Cell index (`y * width + x`) where the pursuer starts, known to both.
    pub pursuer_start: usize,
    /// Cells the evader may start in; the initial belief is uniform over them.
    pub evader_starts: Vec<usize>,
}

impl PursuitConfig {
    /// The standard scenario: pursuer in the lower-left corner, evader
    /// uniform over every other cell.
    pub fn standard(width: usize, height: usize, beta: f64, capture_reward: f64) -> Self {
        PursuitConfig {
            width,
            height,
            beta,
            capture_reward,
            pursuer_start: 0,
            evader_starts: (1..width * height).collect(),
        }
    }
}

/// Grid bookkeeping for a generated pursuit-evasion model, used by scripted
/// agents and trace rendering.
#[derive(Debug, Clone)]
pub struct PursuitMeta {
    pub width: usize,
    pub height: usize,
    pub caught: PointId,
}

impl PursuitMeta {
    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn cell_xy(&self, cell: usize) -> (usize, usize) {
        (cell % self.width, cell / self.width)
    }

    pub fn point_of(&self, pursuer: usize, evader: usize) -> PointId {
        PointId(pursuer * self.num_cells() + evader)
    }

    /// (pursuer cell, evader cell) of a point, or `None` for `caught`.
    pub fn cells_of(&self, e: PointId) -> Option<(usize, usize)> {
        if e == self.caught {
            None
        } else {
            Some((e.0 / self.num_cells(), e.0 % self.num_cells()))
        }
    }

    /// Applies a move to a cell; off-grid moves are no-ops.
    pub fn step_cell(&self, cell: usize, (dx, dy): (i32, i32)) -> usize {
        let (x, y) = self.cell_xy(cell);
        let nx = x as i32 + dx;
        let ny = y as i32 + dy;
        if nx < 0 || ny < 0 || nx >= self.width as i32 || ny >= self.height as i32 {
            cell
        } else {
            ny as usize * self.width + nx as usize
        }
    }
}

fn config_error(msg: String) -> ModelError {
    ModelError::Validation {
        path: "pursuit.config".into(),
        msg,
    }
}

/// Generates the pursuit-evasion model for `cfg`.
pub fn gen_pursuit_evasion(cfg: &PursuitConfig) -> Result<(GameModel, PursuitMeta), ModelError> {
    if cfg.width < 2 || cfg.height < 2 {
        return Err(config_error(format!(
            "grid must be at least 2x2, got {}x{}",
            cfg.width, cfg.height
        )));
    }
    if !(cfg.beta > 0.0 && cfg.beta < 1.0) {
        return Err(config_error(format!("discount {} not in (0,1)", cfg.beta)));
    }
    if !cfg.capture_reward.is_finite() {
        return Err(config_error("capture reward must be finite".into()));
    }
    let cells = cfg.width * cfg.height;
    if cfg.pursuer_start >= cells {
        return Err(config_error(format!(
            "pursuer start cell {} out of range",
            cfg.pursuer_start
        )));
    }
    if cfg.evader_starts.is_empty() {
        return Err(config_error("evader start set is empty".into()));
    }
    let mut seen = vec![false; cells];
    for &c in &cfg.evader_starts {
        if c >= cells {
            return Err(config_error(format!("evader start cell {c} out of range")));
        }
        if seen[c] {
            return Err(config_error(format!("duplicate evader start cell {c}")));
        }
        seen[c] = true;
    }

    let meta = PursuitMeta {
        width: cfg.width,
        height: cfg.height,
        caught: PointId(cells * cells),
    };

    let mut points = Vec::with_capacity(cells * cells + 1);
    let mut regions = Vec::with_capacity(cells * cells + 1);
    for p in 0..cells {
        for e in 0..cells {
            let (px, py) = meta.cell_xy(p);
            let (ex, ey) = meta.cell_xy(e);
            points.push(EnvPoint {
                name: format!("p{p}-e{e}"),
                coords: vec![px as f64, py as f64, ex as f64, ey as f64],
                region: RegionId(points.len()),
            });
            regions.push(format!("g-p{p}-e{e}"));
        }
    }
    points.push(EnvPoint {
        name: "caught".into(),
        coords: vec![-1.0, -1.0, -1.0, -1.0],
        region: RegionId(points.len()),
    });
    regions.push("g-caught".into());

    // The pursuer perceives its own cell; the caught point maps to percept 0
    // to keep the percept set at exactly one per cell.
    let mut perception = BTreeMap::new();
    for p in 0..cells {
        for e in 0..cells {
            perception.insert(
                (Loc1Id(0), RegionId(meta.point_of(p, e).0)),
                PerId(p),
            );
        }
    }
    perception.insert((Loc1Id(0), RegionId(meta.caught.0)), PerId(0));

    let mut delta_e = BTreeMap::new();
    let mut reward = BTreeMap::new();
    for p in 0..cells {
        for e in 0..cells {
            let pt = meta.point_of(p, e);
            for (i1, &(_, dx1, dy1)) in MOVES.iter().enumerate() {
                for (i2, &(_, dx2, dy2)) in MOVES.iter().enumerate() {
                    let target = if p == e {
                        meta.caught
                    } else {
                        meta.point_of(
                            meta.step_cell(p, (dx1, dy1)),
                            meta.step_cell(e, (dx2, dy2)),
                        )
                    };
                    delta_e.insert(
                        (Loc1Id(0), pt, A1Id(i1), A2Id(i2)),
                        vec![(target, 1.0)],
                    );
                    if p == e {
                        reward.insert(
                            (Loc1Id(0), PerId(p), pt, A1Id(i1), A2Id(i2)),
                            cfg.capture_reward,
                        );
                    }
                }
            }
        }
    }

    let parts = ModelParts {
        loc1: vec!["pursuer".into()],
        per1: (0..cells).map(|c| format!("cell-{c}")).collect(),
        a1: MOVES.iter().map(|&(n, _, _)| n.to_string()).collect(),
        a2: MOVES.iter().map(|&(n, _, _)| n.to_string()).collect(),
        regions,
        points,
        perception: Perception::Table(perception),
        delta1: BTreeMap::new(),
        delta_e,
        reward,
        beta: cfg.beta,
        init_loc1: Loc1Id(0),
        init_per1: PerId(cfg.pursuer_start),
        init_particles: {
            let w = 1.0 / cfg.evader_starts.len() as f64;
            cfg.evader_starts
                .iter()
                .map(|&e| (meta.point_of(cfg.pursuer_start, e), w))
                .collect()
        },
    };
    Ok((GameModel::build(parts)?, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_by_three_counts() {
        let (m, meta) = gen_pursuit_evasion(&PursuitConfig::standard(3, 3, 0.7, 100.0)).unwrap();
        assert_eq!(m.num_points(), 82);
        assert_eq!(m.num_per1(), 9);
        assert_eq!(m.num_a1() * m.num_a2(), 25);
        assert_eq!(m.reward_range(), (0.0, 100.0));
        assert!(m.is_absorbing(meta.caught));
    }

    #[test]
    fn two_by_two_counts() {
        let (m, _) = gen_pursuit_evasion(&PursuitConfig::standard(2, 2, 0.5, 1.0)).unwrap();
        assert_eq!(m.num_points(), 17);
    }

    #[test]
    fn deterministic_move_and_percept() {
        // Pursuer at cell (0,0) moving right while the evader stays: all mass
        // lands on pursuer cell (1,0) and the percept names that cell.
        let (m, meta) = gen_pursuit_evasion(&PursuitConfig::standard(3, 3, 0.7, 100.0)).unwrap();
        let a_right = m.find_a1("right").unwrap();
        let a_stay = m.find_a2("stay").unwrap();
        let evader = 8; // top-right corner, cell (2,2)
        let from = meta.point_of(0, evader);
        let s1 = m.init_belief().agent_state();
        let next = m.joint_transition((s1, from), (a_right, a_stay));
        assert_eq!(next.len(), 1);
        let ((s1n, en), prob) = next[0];
        assert_eq!(prob, 1.0);
        // Cell (1,0) has index 1 in row-major order.
        assert_eq!(en, meta.point_of(1, evader));
        assert_eq!(m.per1_name(s1n.per1), "cell-1");
    }

    #[test]
    fn colocated_point_pays_capture_under_every_joint_action() {
        let (m, meta) = gen_pursuit_evasion(&PursuitConfig {
            width: 3,
            height: 3,
            beta: 0.7,
            capture_reward: 100.0,
            pursuer_start: 4,
            evader_starts: vec![4],
        })
        .unwrap();
        let pt = meta.point_of(4, 4);
        let s1 = m.init_belief().agent_state();
        for a1 in m.a1_ids() {
            for a2 in m.a2_ids() {
                assert_eq!(m.reward(s1, pt, a1, a2), 100.0);
                let next = m.joint_transition((s1, pt), (a1, a2));
                assert_eq!(next.len(), 1);
                assert_eq!(next[0].0 .1, meta.caught);
            }
        }
    }

    #[test]
    fn off_grid_moves_are_noops() {
        let meta = PursuitMeta {
            width: 3,
            height: 3,
            caught: PointId(81),
        };
        assert_eq!(meta.step_cell(0, (-1, 0)), 0);
        assert_eq!(meta.step_cell(0, (0, -1)), 0);
        assert_eq!(meta.step_cell(8, (1, 0)), 8);
        assert_eq!(meta.step_cell(8, (0, 1)), 8);
        assert_eq!(meta.step_cell(4, (1, 0)), 5);
    }

    #[test]
    fn config_errors() {
        assert!(gen_pursuit_evasion(&PursuitConfig::standard(1, 3, 0.7, 100.0)).is_err());
        assert!(gen_pursuit_evasion(&PursuitConfig::standard(3, 3, 1.0, 100.0)).is_err());
        let mut cfg = PursuitConfig::standard(2, 2, 0.5, 1.0);
        cfg.evader_starts = vec![17];
        assert!(gen_pursuit_evasion(&cfg).is_err());
    }

    #[test]
    fn validates_for_small_grids() {
        for w in 2..=4 {
            for h in 2..=4 {
                gen_pursuit_evasion(&PursuitConfig::standard(w, h, 0.7, 100.0)).unwrap();
            }
        }
    }
}
