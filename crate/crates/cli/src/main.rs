//! Command-line front end: solve a model offline, play episodes online,
//! evaluate traces against the bounds, and query the fully-observed oracle.
//!
//! Exit codes: 0 on success (and all requested checks passing), 1 when a
//! check fails, 2 on usage errors, 3 on internal errors.

mod human;

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use osp_core::agents::{Agent1, Agent2, AgentFactory, Profile};
use osp_core::arena::{
    estimate_return, horizon_for, play_episode, read_trace_summaries, run_episodes, write_traces,
    EpisodeConfig, TraceMeta,
};
use osp_core::doc;
use osp_core::hsvi::{solve_hsvi, FrozenBounds, SolveLimits, SolveStatus};
use osp_core::model::GameModel;
use osp_core::oracle::shapley_solve;
use osp_core::pursuit::{gen_pursuit_evasion, PursuitConfig, PursuitMeta};
use osp_core::report::{bound_report, CheckKind};
use osp_core::resolver::StageCache;

#[derive(Parser)]
#[command(
    name = "osp",
    about = "Bound solver and online player for one-sided partially observable stochastic games",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelSource {
    /// Path to a JSON model document.
    #[arg(long, conflicts_with = "preset")]
    model: Option<PathBuf>,
    /// Built-in scenario: pe-3x3, pe-2x2, pe-4x4, single, pennies, hide.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute lower/upper value bounds and write them to a bounds file.
    Solve {
        #[command(flatten)]
        source: ModelSource,
        /// Target gap at the initial belief.
        #[arg(long)]
        epsilon: f64,
        /// Output bounds file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        max_trials: usize,
        /// Wall-clock limit in seconds (the pursuit presets default to 7200).
        #[arg(long)]
        max_seconds: Option<u64>,
        #[arg(long, default_value_t = 50)]
        max_depth: usize,
        #[arg(long, default_value_t = 0x5eed)]
        probe_seed: u64,
        /// Directory for LP debug dumps (also via the OSP_LP_DUMP env var).
        #[arg(long)]
        lp_debug: Option<PathBuf>,
    },
    /// Play episodes under a named profile and write a trace file.
    Play {
        #[command(flatten)]
        source: ModelSource,
        /// Bounds file produced by `solve`.
        #[arg(long)]
        bounds: PathBuf,
        /// Pairing such as lb-vs-ub, lb-vs-uniform, chase-vs-ub,
        /// human-vs-ub or lb-vs-human.
        #[arg(long)]
        profile: String,
        #[arg(long, default_value_t = 2000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Truncation horizon; defaults to the smallest H with
        /// beta^H (U - L) <= 0.01.
        #[arg(long)]
        horizon: Option<usize>,
        /// Output trace file (one JSON object per line).
        #[arg(long)]
        out: PathBuf,
        /// Skip per-step records (summaries only).
        #[arg(long)]
        light: bool,
    },
    /// Check trace files against the bounds and emit a report.
    Eval {
        /// Trace files, one per profile.
        #[arg(long, required = true)]
        traces: Vec<PathBuf>,
        #[arg(long)]
        bounds: PathBuf,
        /// Write the JSON report here (defaults to stdout).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write per-episode returns as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the fully-observed game values from Shapley value iteration.
    Oracle {
        #[command(flatten)]
        source: ModelSource,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
}

fn load_source(source: &ModelSource) -> Result<(Arc<GameModel>, Option<Arc<PursuitMeta>>)> {
    match (&source.model, &source.preset) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading model {}", path.display()))?;
            let model = doc::load_model(&text)?;
            Ok((Arc::new(model), None))
        }
        (None, Some(name)) => match name.as_str() {
            "single" => Ok((Arc::new(osp_core::presets::single()), None)),
            "pennies" => Ok((Arc::new(osp_core::presets::matching_pennies()), None)),
            "hide" => Ok((Arc::new(osp_core::presets::hide()), None)),
            other => {
                let cfg = match other {
                    "pe-2x2" => PursuitConfig::standard(2, 2, 0.7, 100.0),
                    "pe-3x3" => PursuitConfig::standard(3, 3, 0.7, 100.0),
                    "pe-4x4" => PursuitConfig::standard(4, 4, 0.7, 100.0),
                    _ => bail!(
                        "unknown preset '{other}' (try pe-3x3, pe-2x2, pe-4x4, single, \
                         pennies, hide)"
                    ),
                };
                let (m, meta) = gen_pursuit_evasion(&cfg)?;
                Ok((Arc::new(m), Some(Arc::new(meta))))
            }
        },
        _ => bail!("exactly one of --model or --preset is required"),
    }
}

fn is_pursuit_preset(source: &ModelSource) -> bool {
    matches!(&source.preset, Some(p) if p.starts_with("pe-"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    source: &ModelSource,
    epsilon: f64,
    out: &Path,
    max_trials: usize,
    max_seconds: Option<u64>,
    max_depth: usize,
    probe_seed: u64,
    lp_debug: Option<&Path>,
) -> Result<ExitCode> {
    if epsilon <= 0.0 {
        bail!("--epsilon must be positive");
    }
    if let Some(dir) = lp_debug {
        std::env::set_var("OSP_LP_DUMP", dir);
    }
    let (model, _) = load_source(source)?;
    // The pursuit presets default to the scenario's two-hour timeout.
    let seconds = max_seconds.or_else(|| is_pursuit_preset(source).then_some(7200));
    let limits = SolveLimits {
        max_trials,
        max_depth,
        time_limit: seconds.map(Duration::from_secs),
        probe_checks: 100,
        probe_seed,
    };
    let (frozen, stats) = solve_hsvi(&model, epsilon, &limits)?;
    let lb = frozen.lower_at(&model, model.init_belief());
    let ub = frozen.upper_at(model.init_belief())?;
    fs::write(out, frozen.save_json())
        .with_context(|| format!("writing bounds {}", out.display()))?;
    println!("V_lb(b_init) = {lb}");
    println!("V_ub(b_init) = {ub}");
    println!("gap          = {}", frozen.gap);
    println!(
        "status       = {}",
        match frozen.status {
            SolveStatus::Converged => "converged",
            SolveStatus::LimitReached => "limit",
        }
    );
    println!(
        "trials = {}, backups = {}, alphas = {}, pairs = {}, probes = {}, elapsed = {:.1}s",
        stats.trials,
        stats.backups,
        frozen.gamma.len(),
        frozen.upsilon.len(),
        stats.lemma2_probes,
        stats.elapsed.as_secs_f64()
    );
    Ok(ExitCode::SUCCESS)
}

enum Side1 {
    Named(osp_core::agents::Ag1Kind),
    Human,
}

enum Side2 {
    Named(osp_core::agents::Ag2Kind),
    Human,
}

fn parse_profile(s: &str) -> Result<(Side1, Side2)> {
    let (left, right) = s
        .split_once("-vs-")
        .ok_or_else(|| anyhow!("profile must look like lb-vs-ub"))?;
    if left != "human" && right != "human" {
        let p = Profile::parse(s).ok_or_else(|| anyhow!("unknown profile '{s}'"))?;
        return Ok((Side1::Named(p.ag1), Side2::Named(p.ag2)));
    }
    let side1 = if left == "human" {
        Side1::Human
    } else {
        Side1::Named(
            Profile::parse(&format!("{left}-vs-ub"))
                .ok_or_else(|| anyhow!("unknown agent-1 strategy '{left}'"))?
                .ag1,
        )
    };
    let side2 = if right == "human" {
        Side2::Human
    } else {
        Side2::Named(
            Profile::parse(&format!("lb-vs-{right}"))
                .ok_or_else(|| anyhow!("unknown agent-2 strategy '{right}'"))?
                .ag2,
        )
    };
    Ok((side1, side2))
}

#[allow(clippy::too_many_arguments)]
fn cmd_play(
    source: &ModelSource,
    bounds_path: &Path,
    profile: &str,
    episodes: usize,
    seed: u64,
    horizon: Option<usize>,
    out: &Path,
    light: bool,
) -> Result<ExitCode> {
    if episodes == 0 {
        bail!("--episodes must be at least 1");
    }
    let (model, meta) = load_source(source)?;
    let text = fs::read_to_string(bounds_path)
        .with_context(|| format!("reading bounds {}", bounds_path.display()))?;
    let frozen = Arc::new(FrozenBounds::load_json(&text)?);
    frozen.check_model(&model)?;

    let span = frozen.upper - frozen.lower;
    let horizon = horizon.unwrap_or_else(|| horizon_for(model.beta(), span, 0.01));
    let cfg = EpisodeConfig {
        horizon,
        stop_at_absorbing: true,
        record_steps: !light,
    };
    let lb_init = frozen.lower_at(&model, model.init_belief());
    let ub_init = frozen.upper_at(model.init_belief())?;
    let factory = AgentFactory {
        model: model.clone(),
        frozen: frozen.clone(),
        cache: Arc::new(StageCache::new()),
        meta,
    };

    let (side1, side2) = parse_profile(profile)?;
    let traces = match (&side1, &side2) {
        (Side1::Named(k1), Side2::Named(k2)) => run_episodes(
            &model,
            &|s| factory.build_agent1(k1, s),
            &|s| factory.build_agent2(k2, s),
            &cfg,
            episodes,
            seed,
        )?,
        _ => {
            // Human play runs episodes one by one on the console.
            let mut traces = Vec::with_capacity(episodes);
            for i in 0..episodes {
                let ep_seed = osp_core::arena::episode_seed(seed, i);
                let mut ag1: Box<dyn Agent1> = match &side1 {
                    Side1::Human => Box::new(human::HumanAgent1::new(
                        model.clone(),
                        BufReader::new(std::io::stdin()),
                        std::io::stdout(),
                    )),
                    Side1::Named(k) => factory.build_agent1(k, ep_seed ^ 0xA1)?,
                };
                let mut ag2: Box<dyn Agent2> = match &side2 {
                    Side2::Human => Box::new(human::HumanAgent2::new(
                        model.clone(),
                        BufReader::new(std::io::stdin()),
                        std::io::stdout(),
                    )),
                    Side2::Named(k) => factory.build_agent2(k, ep_seed ^ 0xA2)?,
                };
                let trace = play_episode(&model, ag1.as_mut(), ag2.as_mut(), &cfg, ep_seed)?;
                println!("episode {i}: return {}", trace.ret);
                traces.push(trace);
            }
            traces
        }
    };

    let meta = TraceMeta {
        profile: profile.to_string(),
        model_hash: model.hash().to_string(),
        episodes,
        horizon,
        beta: model.beta(),
        base_seed: seed,
        lb_init,
        ub_init,
        span,
    };
    let file = fs::File::create(out).with_context(|| format!("writing {}", out.display()))?;
    let mut w = BufWriter::new(file);
    write_traces(&mut w, &meta, &traces)?;
    w.flush()?;

    println!(
        "profile {profile}: {} episodes, horizon {horizon}",
        traces.len()
    );
    if traces.len() >= 2 {
        let est = estimate_return(&traces, model.beta(), span)?;
        println!(
            "mean return = {} (se {}, truncation bound {})",
            est.mean, est.std_error, est.truncation_bound
        );
    }
    println!("V_lb(b_init) = {lb_init}, V_ub(b_init) = {ub_init}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(
    traces: &[PathBuf],
    bounds_path: &Path,
    report_path: Option<&Path>,
    csv_path: Option<&Path>,
) -> Result<ExitCode> {
    let text = fs::read_to_string(bounds_path)
        .with_context(|| format!("reading bounds {}", bounds_path.display()))?;
    let frozen = FrozenBounds::load_json(&text)?;

    let mut estimates = Vec::new();
    let mut csv = String::from("profile,episode,seed,return,steps_played,horizon\n");
    let mut lb_init = None;
    let mut ub_init = None;
    for path in traces {
        let file =
            fs::File::open(path).with_context(|| format!("reading traces {}", path.display()))?;
        let (meta, episodes) = read_trace_summaries(&mut BufReader::new(file))?;
        if meta.model_hash != frozen.model_hash {
            bail!(
                "traces {} were played on model {}, bounds are for {}",
                path.display(),
                meta.model_hash,
                frozen.model_hash
            );
        }
        for (slot, value) in [(&mut lb_init, meta.lb_init), (&mut ub_init, meta.ub_init)] {
            match slot {
                None => *slot = Some(value),
                Some(v) if *v != value => bail!("trace files disagree on the bound values"),
                _ => {}
            }
        }
        let kind = match Profile::parse(&meta.profile) {
            Some(p) => CheckKind::of_profile(&p),
            None => CheckKind::Unchecked(meta.profile.clone()),
        };
        let est = estimate_return(&episodes, meta.beta, meta.span)?;
        for (i, t) in episodes.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                meta.profile, i, t.seed, t.ret, t.steps_played, t.horizon
            ));
        }
        estimates.push((kind, est));
    }

    let report = bound_report(
        lb_init.unwrap_or(frozen.lower),
        ub_init.unwrap_or(frozen.upper),
        &estimates,
        frozen.epsilon,
    );
    let json = serde_json::to_string_pretty(&report)?;
    match report_path {
        Some(path) => fs::write(path, &json)?,
        None => println!("{json}"),
    }
    if let Some(path) = csv_path {
        fs::write(path, &csv)?;
    }
    for check in &report.checks {
        println!(
            "{}: lhs={} rhs={} margin={} -> {}",
            check.name,
            check.lhs,
            check.rhs,
            check.margin,
            if check.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(if report.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_oracle(source: &ModelSource, tol: f64, json: bool) -> Result<ExitCode> {
    let (model, _) = load_source(source)?;
    let values = shapley_solve(&model, tol)?;
    if json {
        let entries: Vec<serde_json::Value> = values
            .iter()
            .map(|&((s1, e), v)| {
                serde_json::json!({
                    "loc1": model.loc1_name(s1.loc1),
                    "per1": model.per1_name(s1.per1),
                    "point": model.point_name(e),
                    "value": v,
                })
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&entries)?);
    } else {
        for &((s1, e), v) in &values {
            println!(
                "{} / {} @ {}: {v}",
                model.loc1_name(s1.loc1),
                model.per1_name(s1.per1),
                model.point_name(e)
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Solve {
            source,
            epsilon,
            out,
            max_trials,
            max_seconds,
            max_depth,
            probe_seed,
            lp_debug,
        } => cmd_solve(
            source,
            *epsilon,
            out,
            *max_trials,
            *max_seconds,
            *max_depth,
            *probe_seed,
            lp_debug.as_deref(),
        ),
        Command::Play {
            source,
            bounds,
            profile,
            episodes,
            seed,
            horizon,
            out,
            light,
        } => cmd_play(
            source, bounds, profile, *episodes, *seed, *horizon, out, *light,
        ),
        Command::Eval {
            traces,
            bounds,
            report,
            csv,
        } => cmd_eval(traces, bounds, report.as_deref(), csv.as_deref()),
        Command::Oracle { source, tol, json } => cmd_oracle(source, *tol, *json),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(3)
        }
    }
}
