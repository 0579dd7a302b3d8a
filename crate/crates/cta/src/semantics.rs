//! Discrete-time operational semantics, bounded breadth-first exploration and
//! context accounting.
//!
//! Channels hold timed words newest-first: a write prepends `(m,0)`, a read
//! removes the last entry.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{add_sat, cap, show_val, COp, NetIndex};

/// Channel content, newest entry first; each entry is `(message index, age)`.
pub type TimedWord = Vec<(usize, u32)>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub locs: Vec<usize>,
    pub vals: Vec<Vec<u32>>,
    pub globals: Vec<u32>,
    pub chans: Vec<TimedWord>,
}

impl Configuration {
    pub fn render(&self, ix: &NetIndex) -> String {
        let mut parts = Vec::new();
        for (i, a) in ix.automata.iter().enumerate() {
            let vals: Vec<String> = self.vals[i].iter().map(|v| show_val(*v)).collect();
            parts.push(format!(
                "({},{})",
                a.locations[self.locs[i]],
                vals.join(",")
            ));
        }
        if !self.globals.is_empty() {
            let g: Vec<String> = self.globals.iter().map(|v| show_val(*v)).collect();
            parts.push(format!("globals[{}]", g.join(",")));
        }
        for w in &self.chans {
            parts.push(render_word(ix, w));
        }
        format!("({})", parts.join(","))
    }
}

pub fn render_word(ix: &NetIndex, w: &[(usize, u32)]) -> String {
    if w.is_empty() {
        return "eps".to_string();
    }
    w.iter()
        .map(|(m, a)| format!("({},{})", ix.alphabet[*m], show_val(*a)))
        .collect()
}

/// One step of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Move {
    Elapse(u32),
    Discrete { automaton: usize, transition: usize },
}

/// Serializable form of a [`Move`], naming automata by id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TraceStep {
    Elapse {
        t: u32,
    },
    Discrete {
        automaton: String,
        transition: usize,
    },
}

pub fn moves_to_steps(ix: &NetIndex, moves: &[Move]) -> Vec<TraceStep> {
    moves
        .iter()
        .map(|m| match *m {
            Move::Elapse(t) => TraceStep::Elapse { t },
            Move::Discrete {
                automaton,
                transition,
            } => TraceStep::Discrete {
                automaton: ix.automata[automaton].id.clone(),
                transition,
            },
        })
        .collect()
}

pub fn steps_to_moves(ix: &NetIndex, steps: &[TraceStep]) -> Result<Vec<Move>, ReplayError> {
    steps
        .iter()
        .enumerate()
        .map(|(i, s)| match s {
            TraceStep::Elapse { t } => Ok(Move::Elapse(*t)),
            TraceStep::Discrete {
                automaton,
                transition,
            } => ix
                .automaton(automaton)
                .map(|a| Move::Discrete {
                    automaton: a,
                    transition: *transition,
                })
                .ok_or_else(|| ReplayError {
                    step: i,
                    reason: format!("unknown automaton {automaton}"),
                }),
        })
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("replay failed at step {step}: {reason}")]
pub struct ReplayError {
    pub step: usize,
    pub reason: String,
}

/// One configuration per combination of initial locations.
pub fn initial_configurations(ix: &NetIndex) -> Vec<Configuration> {
    let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
    for a in &ix.automata {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                a.initial.iter().map(move |&l| {
                    let mut c = c.clone();
                    c.push(l);
                    c
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .map(|locs| Configuration {
            locs,
            vals: ix
                .automata
                .iter()
                .map(|a| vec![0; a.clocks.len()])
                .collect(),
            globals: vec![0; ix.globals.len()],
            chans: vec![Vec::new(); ix.channels.len()],
        })
        .collect()
}

/// Lets `t` time units pass: every clock and every message age grows by `t`.
pub fn timed_step(cfg: &Configuration, t: u32) -> Configuration {
    let mut next = cfg.clone();
    for vals in &mut next.vals {
        for v in vals.iter_mut() {
            *v = add_sat(*v, t);
        }
    }
    for g in &mut next.globals {
        *g = add_sat(*g, t);
    }
    for w in &mut next.chans {
        for e in w.iter_mut() {
            e.1 = add_sat(e.1, t);
        }
    }
    next
}

/// Fires transition `ti` of automaton `ai` if it is enabled.
pub fn apply_discrete(
    ix: &NetIndex,
    cfg: &Configuration,
    ai: usize,
    ti: usize,
) -> Option<Configuration> {
    let t = ix.automata.get(ai)?.transitions.get(ti)?;
    if cfg.locs[ai] != t.from || !t.enabled(&cfg.vals[ai], &cfg.globals) {
        return None;
    }
    let mut next = cfg.clone();
    match t.op {
        COp::Nop => {}
        COp::Write { ch, msg } => next.chans[ch].insert(0, (msg, 0)),
        COp::Read { ch, msg, age } => match next.chans[ch].last() {
            Some(&(m, a)) if m == msg && age.contains(a) => {
                next.chans[ch].pop();
            }
            _ => return None,
        },
    }
    next.locs[ai] = t.to;
    let (vals, globals) = (&mut next.vals[ai], &mut next.globals);
    t.apply_resets(vals, globals);
    Some(next)
}

/// Every discrete successor, ordered by (automaton, transition).
pub fn enabled_discrete(ix: &NetIndex, cfg: &Configuration) -> Vec<(usize, usize, Configuration)> {
    let mut out = Vec::new();
    for (ai, a) in ix.automata.iter().enumerate() {
        for ti in 0..a.transitions.len() {
            if let Some(c) = apply_discrete(ix, cfg, ai, ti) {
                out.push((ai, ti, c));
            }
        }
    }
    out
}

pub fn apply_move(ix: &NetIndex, cfg: &Configuration, m: Move) -> Option<Configuration> {
    match m {
        Move::Elapse(t) => Some(timed_step(cfg, t)),
        Move::Discrete {
            automaton,
            transition,
        } => apply_discrete(ix, cfg, automaton, transition),
    }
}

/// Replays `moves` from `init`, returning every visited configuration
/// (the first entry is `init`).
pub fn replay(
    ix: &NetIndex,
    init: &Configuration,
    moves: &[Move],
) -> Result<Vec<Configuration>, ReplayError> {
    let mut out = vec![init.clone()];
    for (i, m) in moves.iter().enumerate() {
        let cur = out.last().expect("nonempty");
        let next = apply_move(ix, cur, *m).ok_or_else(|| ReplayError {
            step: i,
            reason: format!("{m:?} not enabled"),
        })?;
        out.push(next);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExploreBounds {
    pub max_steps: usize,
    pub max_channel_len: usize,
    pub max_delay_per_step: u32,
    /// Message ages and guard-tested clocks above this become `∞`.
    pub age_cap: u32,
}

impl ExploreBounds {
    pub fn for_net(ix: &NetIndex, max_steps: usize, max_channel_len: usize) -> Self {
        ExploreBounds {
            max_steps,
            max_channel_len,
            max_delay_per_step: 1,
            age_cap: ix.max_constant,
        }
    }
}

/// State predicate used as an exploration target.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Target {
    /// `(automaton, location)` pairs that must all hold.
    pub locations: Vec<(usize, usize)>,
    pub channels_empty: bool,
    /// `(channel, exact content)` requirements.
    pub channel_content: Vec<(usize, TimedWord)>,
}

impl Target {
    pub fn matches(&self, cfg: &Configuration) -> bool {
        self.locations.iter().all(|&(a, l)| cfg.locs[a] == l)
            && (!self.channels_empty || cfg.chans.iter().all(|w| w.is_empty()))
            && self
                .channel_content
                .iter()
                .all(|(c, w)| &cfg.chans[*c] == w)
    }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum TargetError {
    #[error("malformed target item `{0}`")]
    Syntax(String),
    #[error("unknown automaton `{0}`")]
    Automaton(String),
    #[error("unknown location `{1}` in automaton `{0}`")]
    Location(String, String),
}

/// Parses `A:s2,B:q2[,channel-empty]`.
pub fn parse_target(ix: &NetIndex, spec: &str) -> Result<Target, TargetError> {
    let mut t = Target::default();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if item == "channel-empty" {
            t.channels_empty = true;
            continue;
        }
        let (a, l) = item
            .split_once(':')
            .ok_or_else(|| TargetError::Syntax(item.to_string()))?;
        let ai = ix
            .automaton(a)
            .ok_or_else(|| TargetError::Automaton(a.to_string()))?;
        let li = ix.automata[ai]
            .loc(l)
            .ok_or_else(|| TargetError::Location(a.to_string(), l.to_string()))?;
        t.locations.push((ai, li));
    }
    Ok(t)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ExploreStats {
    pub states: usize,
    pub channel_bound_hits: usize,
    pub depth_bound_hits: usize,
}

#[derive(Clone, Debug)]
pub enum ExploreOutcome {
    Reached {
        init: Configuration,
        trace: Vec<Move>,
        stats: ExploreStats,
    },
    Exhausted {
        stats: ExploreStats,
    },
}

impl ExploreOutcome {
    pub fn is_reached(&self) -> bool {
        matches!(self, ExploreOutcome::Reached { .. })
    }

    pub fn stats(&self) -> &ExploreStats {
        match self {
            ExploreOutcome::Reached { stats, .. } | ExploreOutcome::Exhausted { stats } => stats,
        }
    }
}

/// Collapses values that no guard or interval can distinguish.
fn normalize(cfg: &mut Configuration, k: u32, tested: &(Vec<Vec<bool>>, Vec<bool>)) {
    for (ai, vals) in cfg.vals.iter_mut().enumerate() {
        for (ci, v) in vals.iter_mut().enumerate() {
            if tested.0[ai][ci] {
                *v = cap(*v, k);
            }
        }
    }
    for (gi, v) in cfg.globals.iter_mut().enumerate() {
        if tested.1[gi] {
            *v = cap(*v, k);
        }
    }
    for w in &mut cfg.chans {
        for e in w.iter_mut() {
            e.1 = cap(e.1, k);
        }
    }
}

struct Node {
    cfg: Configuration,
    parent: usize,
    via: Option<Move>,
}

/// Breadth-first search for a configuration satisfying `target`.
///
/// Successors of each level are computed in parallel and merged in the
/// deterministic enumeration order, so the result does not depend on
/// scheduling.
pub fn explore_reach(
    ix: &NetIndex,
    bounds: &ExploreBounds,
    target: &(dyn Fn(&Configuration) -> bool + Sync),
) -> ExploreOutcome {
    let k = bounds.age_cap.max(ix.max_constant);
    let tested = ix.tested_clocks();
    let mut stats = ExploreStats::default();
    let mut nodes: Vec<Node> = Vec::new();
    let mut seen: HashMap<Configuration, usize> = HashMap::new();

    let finish = |nodes: &Vec<Node>, idx: usize, stats: ExploreStats| {
        let mut trace = Vec::new();
        let mut i = idx;
        while let Some(m) = nodes[i].via {
            trace.push(m);
            i = nodes[i].parent;
        }
        trace.reverse();
        ExploreOutcome::Reached {
            init: nodes[i].cfg.clone(),
            trace,
            stats,
        }
    };

    let mut frontier = Vec::new();
    for mut c in initial_configurations(ix) {
        normalize(&mut c, k, &tested);
        if seen.contains_key(&c) {
            continue;
        }
        let idx = nodes.len();
        seen.insert(c.clone(), idx);
        let hit = target(&c);
        nodes.push(Node {
            cfg: c,
            parent: idx,
            via: None,
        });
        if hit {
            stats.states = nodes.len();
            return finish(&nodes, idx, stats);
        }
        frontier.push(idx);
    }

    for depth in 0..bounds.max_steps {
        if frontier.is_empty() {
            break;
        }
        let expanded: Vec<Vec<(Move, Configuration)>> = frontier
            .par_iter()
            .map(|&i| {
                let cfg = &nodes[i].cfg;
                let mut succ = Vec::new();
                for t in 1..=bounds.max_delay_per_step {
                    succ.push((Move::Elapse(t), timed_step(cfg, t)));
                }
                for (a, tr, c) in enabled_discrete(ix, cfg) {
                    succ.push((
                        Move::Discrete {
                            automaton: a,
                            transition: tr,
                        },
                        c,
                    ));
                }
                succ
            })
            .collect();
        let mut next = Vec::new();
        for (&parent, succs) in frontier.iter().zip(expanded) {
            for (m, mut c) in succs {
                if c.chans.iter().any(|w| w.len() > bounds.max_channel_len) {
                    stats.channel_bound_hits += 1;
                    continue;
                }
                normalize(&mut c, k, &tested);
                if seen.contains_key(&c) {
                    continue;
                }
                let idx = nodes.len();
                seen.insert(c.clone(), idx);
                let hit = target(&c);
                nodes.push(Node {
                    cfg: c,
                    parent,
                    via: Some(m),
                });
                if hit {
                    stats.states = nodes.len();
                    return finish(&nodes, idx, stats);
                }
                next.push(idx);
            }
        }
        if depth + 1 == bounds.max_steps && !next.is_empty() {
            stats.depth_bound_hits += next.len();
        }
        frontier = next;
    }
    stats.states = nodes.len();
    ExploreOutcome::Exhausted { stats }
}

/// Every configuration reachable within the bounds (normalized).
pub fn reachable_set(ix: &NetIndex, bounds: &ExploreBounds) -> Vec<Configuration> {
    let k = bounds.age_cap.max(ix.max_constant);
    let tested = ix.tested_clocks();
    let mut seen: HashMap<Configuration, ()> = HashMap::new();
    let mut order = Vec::new();
    let mut frontier = Vec::new();
    for mut c in initial_configurations(ix) {
        normalize(&mut c, k, &tested);
        if seen.insert(c.clone(), ()).is_none() {
            order.push(c.clone());
            frontier.push(c);
        }
    }
    for _ in 0..bounds.max_steps {
        let mut next = Vec::new();
        for cfg in &frontier {
            let mut succ: Vec<Configuration> = (1..=bounds.max_delay_per_step)
                .map(|t| timed_step(cfg, t))
                .collect();
            succ.extend(enabled_discrete(ix, cfg).into_iter().map(|(_, _, c)| c));
            for mut c in succ {
                if c.chans.iter().any(|w| w.len() > bounds.max_channel_len) {
                    continue;
                }
                normalize(&mut c, k, &tested);
                if seen.insert(c.clone(), ()).is_none() {
                    order.push(c.clone());
                    next.push(c);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    order
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ContextAnnotation {
    /// Context index in force after each step.
    pub per_step: Vec<usize>,
    pub switches: usize,
}

impl ContextAnnotation {
    pub fn contexts(&self) -> usize {
        if self.per_step.is_empty() {
            0
        } else {
            self.switches + 1
        }
    }
}

impl fmt::Display for ContextAnnotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} switches over {} steps",
            self.switches,
            self.per_step.len()
        )
    }
}

/// Tracks the active automaton, its fixed read channel and the channels it
/// wrote in the current context.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ContextState {
    pub active: Option<usize>,
    pub lock: Option<usize>,
    pub written: u64,
    pub index: usize,
}

/// Channel operation performed by one step, as seen by context accounting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelAction {
    Write { automaton: usize, ch: usize },
    Read { automaton: usize, ch: usize },
}

impl ContextState {
    /// Whether `act` would open a new context.
    pub fn switches_on(&self, act: ChannelAction) -> bool {
        let Some(active) = self.active else {
            return false;
        };
        match act {
            ChannelAction::Write { automaton, ch } => automaton != active || self.lock == Some(ch),
            ChannelAction::Read { automaton, ch } => {
                automaton != active
                    || self.lock.is_some_and(|l| l != ch)
                    || self.written & (1 << ch) != 0
            }
        }
    }

    /// Records `act`, returning whether it opened a new context.
    pub fn record(&mut self, act: ChannelAction) -> bool {
        let switched = self.switches_on(act);
        if switched {
            self.index += 1;
            self.lock = None;
            self.written = 0;
        }
        match act {
            ChannelAction::Write { automaton, ch } => {
                self.active = Some(automaton);
                self.written |= 1 << ch;
            }
            ChannelAction::Read { automaton, ch } => {
                self.active = Some(automaton);
                self.lock = Some(ch);
            }
        }
        switched
    }
}

pub fn channel_action(ix: &NetIndex, m: Move) -> Option<ChannelAction> {
    let Move::Discrete {
        automaton,
        transition,
    } = m
    else {
        return None;
    };
    match ix.automata[automaton].transitions[transition].op {
        COp::Nop => None,
        COp::Write { ch, .. } => Some(ChannelAction::Write { automaton, ch }),
        COp::Read { ch, .. } => Some(ChannelAction::Read { automaton, ch }),
    }
}

/// Assigns a context index to every step of a replayable trace.
///
/// Steps without channel operations never open a context.
pub fn annotate_contexts(
    ix: &NetIndex,
    init: &Configuration,
    moves: &[Move],
) -> Result<ContextAnnotation, ReplayError> {
    replay(ix, init, moves)?;
    let mut st = ContextState::default();
    let mut per_step = Vec::with_capacity(moves.len());
    for m in moves {
        if let Some(act) = channel_action(ix, *m) {
            st.record(act);
        }
        per_step.push(st.index);
    }
    Ok(ContextAnnotation {
        per_step,
        switches: st.index,
    })
}
