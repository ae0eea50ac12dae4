//! Offline bound computation and online strategy synthesis for one-sided
//! partially observable stochastic games.
//!
//! A game is played between a partially informed agent (`Ag1`), which
//! observes only its own local state and a discrete percept of the
//! environment, and a fully informed agent (`Ag2`). The library
//!
//! * computes lower and upper bounds on the game value with a
//!   heuristic-search value-iteration loop ([`hsvi::solve_hsvi`]),
//! * plays `Ag1` online by continually re-solving a single stage LP against
//!   the frozen lower bound ([`resolver`]),
//! * plays `Ag2` online from an inferred belief about `Ag1`'s belief and the
//!   frozen upper bound ([`inferred`]), and
//! * validates the resulting strategy profile empirically by Monte Carlo
//!   simulation against an adversary suite ([`arena`]).

pub mod agents;
pub mod arena;
pub mod belief;
pub mod bounds;
pub mod doc;
pub mod hsvi;
pub mod inferred;
pub mod lp;
pub mod mlp;
pub mod model;
pub mod oracle;
pub mod presets;
pub mod pursuit;
pub mod report;
pub mod resolver;

pub use belief::{StageStrategy1, StageStrategy2, WeightedBelief};
pub use bounds::{AlphaFunction, AlphaSet, BeliefValuePair, UpsilonSet};
pub use hsvi::{FrozenBounds, ResolveSolution, SolveLimits, SolveStatus};
pub use model::{A1Id, A2Id, AgentState, GameModel, Loc1Id, PerId, PointId, RegionId};
