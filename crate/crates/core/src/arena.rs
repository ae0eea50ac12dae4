//! Episode simulation and Monte Carlo return estimation.
//!
//! The arena samples the true initial state from the model's initial belief,
//! lets both agents act from their own information each stage, samples the
//! joint transition, and records everything into a trace. Episodes are
//! deterministic per seed and embarrassingly parallel over seeds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::sync::Arc;
use thiserror::Error;

use crate::agents::{Agent1, Agent2};
use crate::belief::{StageStrategy1, StageStrategy2, WeightedBelief};
use crate::hsvi::SolverError;
use crate::model::{A1Id, A2Id, AgentState, GameModel, PointId};

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error("agent error at step {step}: {source}")]
    Agent {
        step: usize,
        #[source]
        source: SolverError,
    },
    #[error(
        "proper-belief violation by agent {agent} at step {step}: true point {point} \
         has no weight in the tracked belief"
    )]
    ProperBelief { agent: u8, step: usize, point: usize },
    #[error("need at least 2 traces to estimate a return, got {0}")]
    TooFewTraces(usize),
    #[error("trace file format error: {0}")]
    TraceFormat(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One stage of an episode as recorded in the trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub state: (AgentState, PointId),
    pub a1: A1Id,
    pub a2: A2Id,
    pub reward: f64,
    /// beta^step * reward.
    pub discounted: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ag1_belief: Option<WeightedBelief>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ag2_belief: Option<WeightedBelief>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u1: Option<StageStrategy1>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u2: Option<StageStrategy2>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ag1_summary: Option<serde_json::Value>,
}

/// A full episode: per-step records plus the terminal summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trace {
    pub seed: u64,
    /// Configured truncation horizon.
    pub horizon: usize,
    /// Steps actually played (shorter when an absorbing point was reached).
    pub steps_played: usize,
    /// Truncated discounted return: the sum of the recorded discounted
    /// rewards.
    pub ret: f64,
    pub steps: Vec<StepRecord>,
}

#[derive(Debug, Clone)]
pub struct EpisodeConfig {
    pub horizon: usize,
    /// Stop early once the environment reaches an absorbing point; the
    /// remaining discounted reward is exactly zero.
    pub stop_at_absorbing: bool,
    /// Record per-step beliefs and strategies in the trace.
    pub record_steps: bool,
}

impl EpisodeConfig {
    pub fn new(horizon: usize) -> Self {
        EpisodeConfig {
            horizon,
            stop_at_absorbing: true,
            record_steps: true,
        }
    }
}

/// Smallest horizon H with beta^H * span <= tol.
pub fn horizon_for(beta: f64, span: f64, tol: f64) -> usize {
    if span <= tol {
        return 1;
    }
    let h = ((tol / span).ln() / beta.ln()).ceil() as usize;
    h.max(1)
}

fn sample_from<'a, T>(items: &'a [(T, f64)], rng: &mut impl Rng) -> &'a T {
    let x: f64 = rng.gen();
    let mut acc = 0.0;
    for (t, p) in items {
        acc += p;
        if x < acc {
            return t;
        }
    }
    &items[items.len() - 1].0
}

/// Plays one episode. The environment rng is seeded from `seed`; agents
/// carry their own streams. Proper-belief assertions run every step for any
/// agent exposing a belief.
pub fn play_episode(
    model: &GameModel,
    ag1: &mut dyn Agent1,
    ag2: &mut dyn Agent2,
    cfg: &EpisodeConfig,
    seed: u64,
) -> Result<Trace, ArenaError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = model.init_belief();
    let mut state = (
        init.agent_state(),
        *sample_from(init.particles(), &mut rng),
    );

    let agent_err = |step: usize| move |source: SolverError| ArenaError::Agent { step, source };

    let mut steps = Vec::new();
    let mut ret = 0.0;
    let mut disc = 1.0;
    let mut steps_played = 0;
    for step in 0..cfg.horizon {
        if let Some(b) = ag1.belief() {
            if b.agent_state() != state.0 || !b.contains(state.1) {
                return Err(ArenaError::ProperBelief {
                    agent: 1,
                    step,
                    point: state.1 .0,
                });
            }
        }
        if let Some(b) = ag2.inferred_belief() {
            if b.agent_state() != state.0 || !b.contains(state.1) {
                return Err(ArenaError::ProperBelief {
                    agent: 2,
                    step,
                    point: state.1 .0,
                });
            }
        }

        let (ag1_belief, ag2_belief, u1, u2, ag1_summary) = if cfg.record_steps {
            (
                ag1.belief().cloned(),
                ag2.inferred_belief().cloned(),
                ag1.stage_strategy().map_err(agent_err(step))?,
                ag2.stage_rows().map_err(agent_err(step))?,
                ag1.summary(),
            )
        } else {
            (None, None, None, None, None)
        };

        let a1 = ag1.act().map_err(agent_err(step))?;
        let a2 = ag2.act(state).map_err(agent_err(step))?;
        let reward = model.reward(state.0, state.1, a1, a2);
        let discounted = disc * reward;
        ret += discounted;
        disc *= model.beta();

        let next = {
            let dist = model.joint_transition(state, (a1, a2));
            *sample_from(&dist, &mut rng)
        };
        ag1.observe(a1, next.0).map_err(agent_err(step))?;
        ag2.observe(a1, next.0, next).map_err(agent_err(step))?;

        if cfg.record_steps {
            steps.push(StepRecord {
                step,
                state,
                a1,
                a2,
                reward,
                discounted,
                ag1_belief,
                ag2_belief,
                u1,
                u2,
                ag1_summary,
            });
        }
        steps_played += 1;
        state = next;
        if cfg.stop_at_absorbing && model.is_absorbing(state.1) {
            break;
        }
    }

    Ok(Trace {
        seed,
        horizon: cfg.horizon,
        steps_played,
        ret,
        steps,
    })
}

/// Derives the environment seed of episode `i` from a base seed.
pub fn episode_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

type MakeAgent1<'a> = dyn Fn(u64) -> Result<Box<dyn Agent1>, SolverError> + Sync + 'a;
type MakeAgent2<'a> = dyn Fn(u64) -> Result<Box<dyn Agent2>, SolverError> + Sync + 'a;

fn run_one(
    model: &GameModel,
    make1: &MakeAgent1,
    make2: &MakeAgent2,
    cfg: &EpisodeConfig,
    base_seed: u64,
    i: usize,
) -> Result<Trace, ArenaError> {
    let seed = episode_seed(base_seed, i);
    let mut ag1 = make1(seed ^ 0xA1).map_err(|source| ArenaError::Agent { step: 0, source })?;
    let mut ag2 = make2(seed ^ 0xA2).map_err(|source| ArenaError::Agent { step: 0, source })?;
    play_episode(model, ag1.as_mut(), ag2.as_mut(), cfg, seed)
}

/// Sequential episode batch; always available.
pub fn run_episodes_seq(
    model: &Arc<GameModel>,
    make1: &MakeAgent1,
    make2: &MakeAgent2,
    cfg: &EpisodeConfig,
    episodes: usize,
    base_seed: u64,
) -> Result<Vec<Trace>, ArenaError> {
    (0..episodes)
        .map(|i| run_one(model, make1, make2, cfg, base_seed, i))
        .collect()
}

/// Parallel episode batch over seeds. Traces come back in episode order and
/// are bit-identical to the sequential runner's output.
#[cfg(feature = "parallel")]
pub fn run_episodes_par(
    model: &Arc<GameModel>,
    make1: &MakeAgent1,
    make2: &MakeAgent2,
    cfg: &EpisodeConfig,
    episodes: usize,
    base_seed: u64,
) -> Result<Vec<Trace>, ArenaError> {
    use rayon::prelude::*;
    (0..episodes)
        .into_par_iter()
        .map(|i| run_one(model, make1, make2, cfg, base_seed, i))
        .collect()
}

/// Batch runner: parallel when the `parallel` feature is enabled.
pub fn run_episodes(
    model: &Arc<GameModel>,
    make1: &MakeAgent1,
    make2: &MakeAgent2,
    cfg: &EpisodeConfig,
    episodes: usize,
    base_seed: u64,
) -> Result<Vec<Trace>, ArenaError> {
    #[cfg(feature = "parallel")]
    {
        run_episodes_par(model, make1, make2, cfg, episodes, base_seed)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_episodes_seq(model, make1, make2, cfg, episodes, base_seed)
    }
}

/// Sample statistics of truncated discounted returns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReturnEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub episodes: usize,
    /// beta^H * (U - L) for the smallest configured horizon in the batch.
    pub truncation_bound: f64,
}

/// Mean and standard error of the recorded returns. `span` is U - L; the
/// truncation bound uses the smallest configured horizon.
pub fn estimate_return(
    traces: &[Trace],
    beta: f64,
    span: f64,
) -> Result<ReturnEstimate, ArenaError> {
    if traces.len() < 2 {
        return Err(ArenaError::TooFewTraces(traces.len()));
    }
    let n = traces.len() as f64;
    let mean = traces.iter().map(|t| t.ret).sum::<f64>() / n;
    let var = traces.iter().map(|t| (t.ret - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let h_min = traces.iter().map(|t| t.horizon).min().unwrap();
    Ok(ReturnEstimate {
        mean,
        std_error: (var / n).sqrt(),
        episodes: traces.len(),
        truncation_bound: beta.powi(h_min as i32) * span,
    })
}

/// Header line of a trace file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceMeta {
    pub profile: String,
    pub model_hash: String,
    pub episodes: usize,
    pub horizon: usize,
    pub beta: f64,
    pub base_seed: u64,
    /// V_lb and V_ub at the initial belief of the bounds used.
    pub lb_init: f64,
    pub ub_init: f64,
    /// U - L.
    pub span: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SummaryRecord {
    episode: usize,
    seed: u64,
    ret: f64,
    horizon: usize,
    steps_played: usize,
}

#[derive(Serialize)]
struct StepLine<'a> {
    episode: usize,
    #[serde(flatten)]
    record: &'a StepRecord,
}

/// Writes a trace file: one meta line, then one JSON object per step and a
/// summary line per episode. Output is UTF-8 with LF line endings.
pub fn write_traces(
    w: &mut impl Write,
    meta: &TraceMeta,
    traces: &[Trace],
) -> Result<(), ArenaError> {
    let meta_line = serde_json::json!({ "meta": meta });
    writeln!(w, "{meta_line}")?;
    for (episode, trace) in traces.iter().enumerate() {
        for record in &trace.steps {
            let line = serde_json::to_string(&StepLine { episode, record })
                .expect("step records always serialize");
            writeln!(w, "{line}")?;
        }
        let summary = serde_json::json!({
            "episode": episode,
            "summary": SummaryRecord {
                episode,
                seed: trace.seed,
                ret: trace.ret,
                horizon: trace.horizon,
                steps_played: trace.steps_played,
            }
        });
        writeln!(w, "{summary}")?;
    }
    Ok(())
}

/// Reads back the meta line and per-episode summaries (step lines are
/// skipped); enough to evaluate the theorem checks.
pub fn read_trace_summaries(
    r: &mut impl BufRead,
) -> Result<(TraceMeta, Vec<Trace>), ArenaError> {
    let mut lines = r.lines();
    let first = lines
        .next()
        .ok_or_else(|| ArenaError::TraceFormat("empty trace file".into()))??;
    let head: serde_json::Value = serde_json::from_str(&first)
        .map_err(|e| ArenaError::TraceFormat(format!("bad meta line: {e}")))?;
    let meta: TraceMeta = serde_json::from_value(
        head.get("meta")
            .cloned()
            .ok_or_else(|| ArenaError::TraceFormat("first line is not a meta line".into()))?,
    )
    .map_err(|e| ArenaError::TraceFormat(format!("bad meta line: {e}")))?;

    let mut traces = Vec::new();
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| ArenaError::TraceFormat(format!("bad trace line: {e}")))?;
        if let Some(summary) = value.get("summary") {
            let s: SummaryRecord = serde_json::from_value(summary.clone())
                .map_err(|e| ArenaError::TraceFormat(format!("bad summary line: {e}")))?;
            traces.push(Trace {
                seed: s.seed,
                horizon: s.horizon,
                steps_played: s.steps_played,
                ret: s.ret,
                steps: Vec::new(),
            });
        }
    }
    if traces.len() != meta.episodes {
        return Err(ArenaError::TraceFormat(format!(
            "meta declares {} episodes, file has {}",
            meta.episodes,
            traces.len()
        )));
    }
    Ok((meta, traces))
}
