//! Command-line front end: argument parsing, verdict JSON and DOT export.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::bmps::{
    build_bmps, control_graph_dot, is_settled, phase_bounded_reach, project_to_cta,
    reconstruct_channel, PhaseOutcome, SearchBudget,
};
use crate::gadgets::{
    gen_selfloop_sim, gen_subset_sum, gen_three_cta, ChannelAutomaton, TwoCounterMachine,
};
use crate::model::{
    analyze_topology, parse_model, serialize_model, validate_network, NetIndex, Network,
};
use crate::oca::{build_oca, decide_2cta_reach, OcaVerdict};
use crate::regions::build_region_automaton;
use crate::semantics::{
    enabled_discrete, explore_reach, initial_configurations, moves_to_steps, parse_target, replay,
    timed_step, Configuration, ExploreBounds, ExploreOutcome, Move, Target, TraceStep,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Input(_) => 1,
            CliError::Internal(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "cta",
    version,
    about = "Verification of communicating timed automata"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a model file and report diagnostics and topology.
    Validate { model: PathBuf },
    /// Take a seeded random walk through the model.
    Simulate {
        model: PathBuf,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long = "max-channel", default_value_t = 6)]
        max_channel: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the walk as a replayable trace file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Decide or search for reachability of a target.
    Reach {
        /// Model file, or `-` for standard input.
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Explore)]
        method: Method,
        /// `A:s2,B:q2[,channel-empty]`
        #[arg(long)]
        target: String,
        #[arg(long = "phase-bound")]
        phase_bound: Option<usize>,
        #[arg(long, default_value_t = 2)]
        contexts: u32,
        #[arg(long, default_value_t = 40)]
        steps: usize,
        #[arg(long = "max-channel", default_value_t = 6)]
        max_channel: usize,
        #[arg(long = "max-stack", default_value_t = 8)]
        max_stack: usize,
    },
    /// Emit a reduction gadget as a model on standard output.
    Gen {
        #[command(subcommand)]
        what: GenCommand,
    },
    /// Write a DOT graph of a derived object.
    Export {
        model: PathBuf,
        /// `region:<automaton>`, `oca` or `bmps`
        #[arg(long)]
        what: String,
        #[arg(long)]
        dot: PathBuf,
        /// Context bound for `bmps`.
        #[arg(long, default_value_t = 1)]
        contexts: u32,
        /// Node limit for `bmps`.
        #[arg(long = "max-nodes", default_value_t = 2000)]
        max_nodes: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum GenCommand {
    /// `three-cta` reads a counter-machine program; `selfloop` reads a
    /// channel-automaton file.
    TwoCounter {
        prog: PathBuf,
        #[arg(long, value_enum, default_value_t = Variant::ThreeCta)]
        variant: Variant,
        #[arg(long)]
        ghosts: bool,
    },
    SubsetSum {
        #[arg(long, value_delimiter = ',', required = true)]
        set: Vec<u32>,
        #[arg(long)]
        target: u32,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Explore,
    Oca,
    Bmps,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    ThreeCta,
    Selfloop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Reachable,
    Unreachable,
    Exhausted,
    Error,
}

/// A replayable network run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct Witness {
    /// Initial location per automaton, as `A:s1`.
    pub init: Vec<String>,
    pub steps: Vec<TraceStep>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct VerdictStats {
    pub states: usize,
    pub bound_hits: usize,
    /// Wall-clock time; not part of the deterministic output.
    pub time_ms: u128,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub stats: VerdictStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl Verdict {
    fn error(method: Method, msg: String) -> Self {
        Verdict {
            status: Status::Error,
            method,
            witness: None,
            stats: VerdictStats::default(),
            message: Some(msg),
        }
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|source| CliError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_model(path: &Path) -> Result<(Network, NetIndex), CliError> {
    let doc = read_input(path)?;
    let net = parse_model(&doc).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let ix =
        NetIndex::new(&net).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((net, ix))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("output serializes")
}

fn io_out(e: io::Error) -> CliError {
    CliError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

pub fn make_witness(ix: &NetIndex, init: &Configuration, moves: &[Move]) -> Witness {
    Witness {
        init: ix
            .automata
            .iter()
            .zip(&init.locs)
            .map(|(a, &l)| format!("{}:{}", a.id, a.locations[l]))
            .collect(),
        steps: moves_to_steps(ix, moves),
    }
}

/// Reconstructs the initial configuration and moves of a witness.
pub fn witness_moves(ix: &NetIndex, w: &Witness) -> Result<(Configuration, Vec<Move>), String> {
    let t = parse_target(ix, &w.init.join(",")).map_err(|e| e.to_string())?;
    let init = initial_configurations(ix)
        .into_iter()
        .find(|c| t.locations.iter().all(|&(a, l)| c.locs[a] == l))
        .ok_or("witness starts outside the initial locations")?;
    let moves = crate::semantics::steps_to_moves(ix, &w.steps).map_err(|e| e.to_string())?;
    Ok((init, moves))
}

/// Parses `argv` (including the program name) and runs the command,
/// writing results to `out`.
pub fn run_command<I, T>(argv: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Input(e.render().to_string()))?;
    run(cli, out)
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { model } => {
            let doc = read_input(&model)?;
            let net = match parse_model(&doc) {
                Ok(n) => n,
                Err(e) => {
                    let v = serde_json::json!({ "valid": false, "diagnostics": [e.to_string()] });
                    return writeln!(out, "{}", json(&v)).map_err(io_out);
                }
            };
            let diags = validate_network(&net);
            let v = serde_json::json!({
                "valid": diags.is_empty(),
                "diagnostics": diags,
                "topology": analyze_topology(&net),
            });
            writeln!(out, "{}", json(&v)).map_err(io_out)
        }
        Command::Simulate {
            model,
            steps,
            max_channel,
            seed,
            trace,
        } => {
            let (_, ix) = load_model(&model)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inits = initial_configurations(&ix);
            let init = inits
                .choose(&mut rng)
                .cloned()
                .ok_or_else(|| CliError::Input("model has no initial configuration".into()))?;
            let mut cur = init.clone();
            let mut moves = Vec::new();
            let mut visited = vec![cur.render(&ix)];
            for _ in 0..steps {
                let mut options: Vec<(Move, Configuration)> = enabled_discrete(&ix, &cur)
                    .into_iter()
                    .map(|(a, t, c)| {
                        (
                            Move::Discrete {
                                automaton: a,
                                transition: t,
                            },
                            c,
                        )
                    })
                    .filter(|(_, c)| c.chans.iter().all(|w| w.len() <= max_channel))
                    .collect();
                options.push((Move::Elapse(1), timed_step(&cur, 1)));
                let (m, c) = options
                    .choose(&mut rng)
                    .expect("elapse is always enabled")
                    .clone();
                moves.push(m);
                cur = c;
                visited.push(cur.render(&ix));
            }
            let w = make_witness(&ix, &init, &moves);
            if let Some(p) = trace {
                write_file(&p, &json(&w))?;
            }
            let v = serde_json::json!({ "configurations": visited, "trace": w });
            writeln!(out, "{}", json(&v)).map_err(io_out)
        }
        Command::Reach {
            model,
            method,
            target,
            phase_bound,
            contexts,
            steps,
            max_channel,
            max_stack,
        } => {
            let (net, ix) = load_model(&model)?;
            let tgt = parse_target(&ix, &target).map_err(|e| CliError::Input(e.to_string()))?;
            let start = Instant::now();
            let mut v = match method {
                Method::Explore => reach_explore(&ix, &tgt, steps, max_channel),
                Method::Oca => reach_oca(&net, &ix, &tgt)?,
                Method::Bmps => {
                    let p = phase_bound.unwrap_or(3 * contexts as usize).max(1);
                    let budget = SearchBudget {
                        max_steps: steps,
                        max_stack_depth: max_stack,
                    };
                    reach_bmps(&ix, &tgt, contexts, p, budget)?
                }
            };
            v.stats.time_ms = start.elapsed().as_millis();
            if let Some(w) = &v.witness {
                check_witness(&ix, &tgt, w)?;
            }
            writeln!(out, "{}", json(&v)).map_err(io_out)
        }
        Command::Gen { what } => {
            let net = match what {
                GenCommand::TwoCounter {
                    prog,
                    variant: Variant::ThreeCta,
                    ghosts,
                } => {
                    let m = TwoCounterMachine::parse(&read_input(&prog)?)
                        .map_err(|e| CliError::Input(format!("{}: {e}", prog.display())))?;
                    gen_three_cta(&m, ghosts)
                }
                GenCommand::TwoCounter {
                    prog,
                    variant: Variant::Selfloop,
                    ..
                } => {
                    let a: ChannelAutomaton = serde_json::from_str(&read_input(&prog)?)
                        .map_err(|e| CliError::Input(format!("{}: {e}", prog.display())))?;
                    gen_selfloop_sim(&a)
                }
                GenCommand::SubsetSum { set, target } => {
                    if set.is_empty() {
                        return Err(CliError::Input("--set needs at least one value".into()));
                    }
                    gen_subset_sum(&set, target)
                }
            };
            writeln!(out, "{}", serialize_model(&net)).map_err(io_out)
        }
        Command::Export {
            model,
            what,
            dot,
            contexts,
            max_nodes,
        } => {
            let (net, ix) = load_model(&model)?;
            let text = if let Some(aid) = what.strip_prefix("region:") {
                let a = net
                    .automata
                    .iter()
                    .find(|a| a.id == aid)
                    .ok_or_else(|| CliError::Input(format!("unknown automaton `{aid}`")))?;
                build_region_automaton(a, ix.max_constant)
                    .map_err(|e| CliError::Input(e.to_string()))?
                    .to_dot()
            } else if what == "oca" {
                build_oca(&net)
                    .map_err(|e| CliError::Input(e.to_string()))?
                    .to_dot()
            } else if what == "bmps" {
                control_graph_dot(&build_bmps(&ix, contexts), max_nodes)
            } else {
                return Err(CliError::Input(format!(
                    "--what must be region:<automaton>, oca or bmps (got `{what}`)"
                )));
            };
            write_file(&dot, &text)
        }
    }
}

fn reach_explore(ix: &NetIndex, tgt: &Target, steps: usize, max_channel: usize) -> Verdict {
    let bounds = ExploreBounds::for_net(ix, steps, max_channel);
    let outcome = explore_reach(ix, &bounds, &|c| tgt.matches(c));
    let st = outcome.stats().clone();
    let stats = VerdictStats {
        states: st.states,
        bound_hits: st.channel_bound_hits + st.depth_bound_hits,
        time_ms: 0,
    };
    match outcome {
        ExploreOutcome::Reached { init, trace, .. } => Verdict {
            status: Status::Reachable,
            method: Method::Explore,
            witness: Some(make_witness(ix, &init, &trace)),
            stats,
            message: None,
        },
        ExploreOutcome::Exhausted { .. } => Verdict {
            status: Status::Exhausted,
            method: Method::Explore,
            witness: None,
            stats,
            message: None,
        },
    }
}

fn reach_oca(net: &Network, ix: &NetIndex, tgt: &Target) -> Result<Verdict, CliError> {
    if !tgt.channel_content.is_empty() {
        return Ok(Verdict::error(
            Method::Oca,
            "exact channel content targets are not supported by this method".into(),
        ));
    }
    let (verdict, st) = match decide_2cta_reach(net, tgt) {
        Ok(r) => r,
        Err(crate::oca::OcaError::Internal(e)) => return Err(CliError::Internal(e)),
        Err(e) => return Ok(Verdict::error(Method::Oca, e.to_string())),
    };
    let stats = VerdictStats {
        states: st.relevant_states,
        bound_hits: 0,
        time_ms: 0,
    };
    let message = Some("target is decided with an empty channel".to_string());
    Ok(match verdict {
        OcaVerdict::Reachable { init, trace, .. } => Verdict {
            status: Status::Reachable,
            method: Method::Oca,
            witness: Some(make_witness(ix, &init, &trace)),
            stats,
            message,
        },
        OcaVerdict::Unreachable => Verdict {
            status: Status::Unreachable,
            method: Method::Oca,
            witness: None,
            stats,
            message,
        },
    })
}

fn reach_bmps(
    ix: &NetIndex,
    tgt: &Target,
    contexts: u32,
    phase_bound: usize,
    budget: SearchBudget,
) -> Result<Verdict, CliError> {
    let mps = build_bmps(ix, contexts);
    let n_ch = ix.channels.len();
    let pred = |c: &crate::bmps::MpsControl, st: &[Vec<crate::bmps::StackSym>]| {
        if !is_settled(c) || !tgt.locations.iter().all(|&(a, l)| c.locs[a] == l) {
            return false;
        }
        let word = |ch| reconstruct_channel(&mps, c, st, ch).unwrap_or_default();
        (!tgt.channels_empty || (0..n_ch).all(|ch| word(ch).is_empty()))
            && tgt.channel_content.iter().all(|(ch, w)| &word(*ch) == w)
    };
    match phase_bounded_reach(&mps, phase_bound, budget, &pred) {
        PhaseOutcome::Reached(trace) => {
            let (init, moves) = project_to_cta(&mps, &trace);
            Ok(Verdict {
                status: Status::Reachable,
                method: Method::Bmps,
                witness: Some(make_witness(ix, &init, &moves)),
                stats: VerdictStats {
                    states: trace.steps.len(),
                    bound_hits: 0,
                    time_ms: 0,
                },
                message: Some(format!(
                    "{} multistack steps, {} phases",
                    trace.steps.len(),
                    trace.steps.last().map_or(0, |s| s.phase)
                )),
            })
        }
        PhaseOutcome::BudgetExhausted { states } => Ok(Verdict {
            status: Status::Exhausted,
            method: Method::Bmps,
            witness: None,
            stats: VerdictStats {
                states,
                bound_hits: 1,
                time_ms: 0,
            },
            message: None,
        }),
    }
}

/// Every reported witness must replay to a configuration meeting the
/// target; anything else is a bug.
fn check_witness(ix: &NetIndex, tgt: &Target, w: &Witness) -> Result<(), CliError> {
    let (init, moves) = witness_moves(ix, w).map_err(CliError::Internal)?;
    let cfgs = replay(ix, &init, &moves).map_err(|e| CliError::Internal(e.to_string()))?;
    let last = cfgs.last().expect("nonempty");
    let k = ix.max_constant;
    let capped = |w: &[(usize, u32)]| -> Vec<(usize, u32)> {
        w.iter()
            .map(|&(m, a)| (m, crate::model::cap(a, k)))
            .collect()
    };
    let ok = tgt.locations.iter().all(|&(a, l)| last.locs[a] == l)
        && (!tgt.channels_empty || last.chans.iter().all(|c| c.is_empty()))
        && tgt
            .channel_content
            .iter()
            .all(|(c, word)| capped(&last.chans[*c]) == capped(word));
    if ok {
        Ok(())
    } else {
        Err(CliError::Internal(
            "witness does not reach the target".into(),
        ))
    }
}

/// Applies `CTA_THREADS` to the global worker pool, if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("CTA_THREADS") else {
        return Ok(());
    };
    let n: usize = v.parse().map_err(|_| {
        CliError::Input(format!("CTA_THREADS must be a positive integer, got `{v}`"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))
}
