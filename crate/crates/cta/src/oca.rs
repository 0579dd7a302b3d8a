//! Exact reachability for two automata joined by one channel.
//!
//! The writer `A` and the reader `B` run de-synchronized: `B` may run ahead
//! of `A`, and the lead `tB - tA` is kept in the finite control up to `K`
//! and in a unary stack above `K`. Every written message is read before the
//! next write, so the pending slot holds at most one message. Reachability
//! of the resulting pushdown system is decided by `pre*` saturation.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    analyze_topology, show_val, CAutomaton, COp, Classification, ClockRef, NetIndex, Network,
};
use crate::regions::{tick_val, RegionState};
use crate::semantics::{initial_configurations, replay, Configuration, Move, Target};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OcaError {
    #[error("network must have two automata, one channel and no global clocks (found {0:?})")]
    Topology(Classification),
    #[error("invalid network: {0}")]
    Model(String),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Sym {
    Bot,
    One,
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sym::Bot => "⊥",
            Sym::One => "1",
        })
    }
}

/// Decoration of the writer: `Bot` marks a popped `⊥` awaiting re-push.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ADec {
    Plain,
    Bot,
}

/// Decoration of the reader during an age check at counter `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BDec {
    Plain,
    Bot,
    BotPushed,
    One,
    OnePushed,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OcaState {
    pub a: RegionState,
    pub a_dec: ADec,
    pub b: RegionState,
    pub b_dec: BDec,
    pub pending: Option<usize>,
    pub counter: u32,
}

impl OcaState {
    pub fn is_plain(&self) -> bool {
        self.a_dec == ADec::Plain && self.b_dec == BDec::Plain
    }
}

/// Rule families of the construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Family {
    /// Writer tick at counter `K` popping a `1`.
    PopOneTick,
    /// Writer tick at counter `K` on an empty stack: pop `⊥`, counter `K-1`.
    PopBotTick,
    /// Pop `⊥` to check an age of exactly `K`.
    PopBotCheck,
    /// Pop `1` to check an age above `K`.
    PopOneCheck,
    /// Push back `⊥` after [`Family::PopBotTick`].
    PushBotTick,
    /// Push back `⊥` after [`Family::PopBotCheck`].
    PushBotCheck,
    /// Push back `1` after [`Family::PopOneCheck`].
    PushOneCheck,
    /// Reader tick at counter `K`.
    PushOneTick,
    Nop,
    ReaderTick,
    WriterTick,
    Write,
    ReadBelowK,
    ReadAtK,
    ReadAboveK,
}

impl Family {
    pub fn code(self) -> &'static str {
        match self {
            Family::PopOneTick => "1(a)",
            Family::PopBotTick => "1(b)",
            Family::PopBotCheck => "1(c)",
            Family::PopOneCheck => "1(d)",
            Family::PushBotTick => "2(a)",
            Family::PushBotCheck => "2(b)",
            Family::PushOneCheck => "2(c)",
            Family::PushOneTick => "2(d)",
            Family::Nop => "3(a)",
            Family::ReaderTick => "3(b)",
            Family::WriterTick => "3(c)",
            Family::Write => "3(d)",
            Family::ReadBelowK => "3(e)",
            Family::ReadAtK => "3(f)",
            Family::ReadAboveK => "3(g)",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum RuleKind {
    Int,
    Push(Sym),
    Pop(Sym),
}

/// Network step simulated by a rule, used to lift witnesses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Event {
    None,
    WriterTick,
    ReaderTick,
    Writer(usize),
    Reader(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OcaRule {
    pub from: usize,
    pub to: usize,
    pub kind: RuleKind,
    pub family: Family,
    pub event: Event,
}

#[derive(Clone, Debug)]
pub struct OneCounterSystem {
    /// Index of the writer automaton in the network.
    pub writer: usize,
    pub reader: usize,
    pub k: u32,
    pub states: Vec<OcaState>,
    pub initial: Vec<usize>,
    pub rules: Vec<OcaRule>,
    /// Rule ids leaving each state.
    pub out: Vec<Vec<usize>>,
    index: HashMap<OcaState, usize>,
    a_locs: Vec<String>,
    b_locs: Vec<String>,
    alphabet: Vec<String>,
}

/// How far clock values are tracked before collapsing to `∞`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ClockCaps {
    /// Every clock capped at the network's largest constant.
    #[default]
    Network,
    /// Each clock capped at the largest constant it is compared with.
    PerClock,
}

fn clock_caps(a: &CAutomaton, mode: ClockCaps, k: u32) -> Vec<u32> {
    if mode == ClockCaps::Network {
        return vec![k; a.clocks.len()];
    }
    let mut caps = vec![0; a.clocks.len()];
    for t in &a.transitions {
        for g in &t.guard {
            if let ClockRef::Local(i) = g.clock {
                caps[i] = caps[i].max(g.bound);
            }
        }
    }
    caps
}

fn fire(a: &CAutomaton, ti: usize, s: &RegionState) -> Option<RegionState> {
    let t = &a.transitions[ti];
    if t.from != s.loc || !t.enabled(&s.val, &[]) {
        return None;
    }
    let mut val = s.val.clone();
    t.apply_resets(&mut val, &mut []);
    Some(RegionState { loc: t.to, val })
}

struct Builder<'a> {
    a: &'a CAutomaton,
    b: &'a CAutomaton,
    a_caps: Vec<u32>,
    b_caps: Vec<u32>,
    k: u32,
}

impl Builder<'_> {
    fn successors(&self, s: &OcaState) -> Vec<(RuleKind, Family, Event, OcaState)> {
        let k = self.k;
        let i = s.counter;
        let mut out = Vec::new();
        let with = |f: &dyn Fn(&mut OcaState)| {
            let mut n = s.clone();
            f(&mut n);
            n
        };
        match (s.a_dec, s.b_dec) {
            (ADec::Bot, _) => {
                out.push((
                    RuleKind::Push(Sym::Bot),
                    Family::PushBotTick,
                    Event::None,
                    with(&|n| n.a_dec = ADec::Plain),
                ));
                return out;
            }
            (_, BDec::Bot) => {
                out.push((
                    RuleKind::Push(Sym::Bot),
                    Family::PushBotCheck,
                    Event::None,
                    with(&|n| n.b_dec = BDec::BotPushed),
                ));
                return out;
            }
            (_, BDec::One) => {
                out.push((
                    RuleKind::Push(Sym::One),
                    Family::PushOneCheck,
                    Event::None,
                    with(&|n| n.b_dec = BDec::OnePushed),
                ));
                return out;
            }
            (_, BDec::BotPushed) | (_, BDec::OnePushed) => {
                let above = s.b_dec == BDec::OnePushed;
                let msg = s.pending.expect("age check without pending message");
                for (ti, t) in self.b.transitions.iter().enumerate() {
                    let COp::Read { msg: m, age, .. } = t.op else {
                        continue;
                    };
                    let fits = if above {
                        age.upper.is_none()
                    } else {
                        age.contains(k)
                    };
                    if m != msg || !fits {
                        continue;
                    }
                    if let Some(b) = fire(self.b, ti, &s.b) {
                        let fam = if above {
                            Family::ReadAboveK
                        } else {
                            Family::ReadAtK
                        };
                        out.push((
                            RuleKind::Int,
                            fam,
                            Event::Reader(ti),
                            with(&|n| {
                                n.b = b.clone();
                                n.b_dec = BDec::Plain;
                                n.pending = None;
                            }),
                        ));
                    }
                }
                return out;
            }
            (ADec::Plain, BDec::Plain) => {}
        }

        // Writer moves.
        for (ti, t) in self.a.transitions.iter().enumerate() {
            let Some(a) = fire(self.a, ti, &s.a) else {
                continue;
            };
            match t.op {
                COp::Nop => out.push((
                    RuleKind::Int,
                    Family::Nop,
                    Event::Writer(ti),
                    with(&|n| n.a = a.clone()),
                )),
                COp::Write { msg, .. } if s.pending.is_none() => out.push((
                    RuleKind::Int,
                    Family::Write,
                    Event::Writer(ti),
                    with(&|n| {
                        n.a = a.clone();
                        n.pending = Some(msg);
                    }),
                )),
                _ => {}
            }
        }
        if s.pending.is_none() {
            let a = RegionState {
                loc: s.a.loc,
                val: tick_val(&s.a.val, &self.a_caps),
            };
            if 0 < i && i < k {
                out.push((
                    RuleKind::Int,
                    Family::WriterTick,
                    Event::WriterTick,
                    with(&|n| {
                        n.a = a.clone();
                        n.counter = i - 1;
                    }),
                ));
            } else if i == k {
                out.push((
                    RuleKind::Pop(Sym::One),
                    Family::PopOneTick,
                    Event::WriterTick,
                    with(&|n| n.a = a.clone()),
                ));
                out.push((
                    RuleKind::Pop(Sym::Bot),
                    Family::PopBotTick,
                    Event::WriterTick,
                    with(&|n| {
                        n.a = a.clone();
                        n.a_dec = ADec::Bot;
                        n.counter = k - 1;
                    }),
                ));
            }
        }

        // Reader moves.
        let mut at_k = false;
        let mut above_k = false;
        for (ti, t) in self.b.transitions.iter().enumerate() {
            let Some(b) = fire(self.b, ti, &s.b) else {
                continue;
            };
            match t.op {
                COp::Nop => out.push((
                    RuleKind::Int,
                    Family::Nop,
                    Event::Reader(ti),
                    with(&|n| n.b = b.clone()),
                )),
                COp::Read { msg, age, .. } if s.pending == Some(msg) => {
                    if i < k {
                        if age.contains(i) {
                            out.push((
                                RuleKind::Int,
                                Family::ReadBelowK,
                                Event::Reader(ti),
                                with(&|n| {
                                    n.b = b.clone();
                                    n.pending = None;
                                }),
                            ));
                        }
                    } else {
                        at_k |= age.contains(k);
                        above_k |= age.upper.is_none();
                    }
                }
                _ => {}
            }
        }
        if at_k {
            out.push((
                RuleKind::Pop(Sym::Bot),
                Family::PopBotCheck,
                Event::None,
                with(&|n| n.b_dec = BDec::Bot),
            ));
        }
        if above_k {
            out.push((
                RuleKind::Pop(Sym::One),
                Family::PopOneCheck,
                Event::None,
                with(&|n| n.b_dec = BDec::One),
            ));
        }
        let b = RegionState {
            loc: s.b.loc,
            val: tick_val(&s.b.val, &self.b_caps),
        };
        if i < k {
            out.push((
                RuleKind::Int,
                Family::ReaderTick,
                Event::ReaderTick,
                with(&|n| {
                    n.b = b.clone();
                    n.counter = i + 1;
                }),
            ));
        } else {
            out.push((
                RuleKind::Push(Sym::One),
                Family::PushOneTick,
                Event::ReaderTick,
                with(&|n| n.b = b.clone()),
            ));
        }
        out
    }
}

/// Builds the control states reachable from the initial states when the
/// stack is ignored, together with all their rules.
pub fn build_oca(net: &Network) -> Result<OneCounterSystem, OcaError> {
    build_oca_with(net, ClockCaps::Network)
}

pub fn build_oca_with(net: &Network, caps: ClockCaps) -> Result<OneCounterSystem, OcaError> {
    let topo = analyze_topology(net);
    if topo.classification != Classification::TwoChainNoGlobals {
        return Err(OcaError::Topology(topo.classification));
    }
    let ix = NetIndex::new(net).map_err(|e| OcaError::Model(e.to_string()))?;
    let (writer, reader) = (ix.channels[0].from, ix.channels[0].to);
    let a = &ix.automata[writer];
    let b = &ix.automata[reader];
    let k = ix.max_constant.max(1);
    let builder = Builder {
        a,
        b,
        a_caps: clock_caps(a, caps, k),
        b_caps: clock_caps(b, caps, k),
        k,
    };
    let mut sys = OneCounterSystem {
        writer,
        reader,
        k: builder.k,
        states: Vec::new(),
        initial: Vec::new(),
        rules: Vec::new(),
        out: Vec::new(),
        index: HashMap::new(),
        a_locs: a.locations.clone(),
        b_locs: b.locations.clone(),
        alphabet: ix.alphabet.clone(),
    };
    let mut queue = VecDeque::new();
    for &la in &a.initial {
        for &lb in &b.initial {
            let s = OcaState {
                a: RegionState {
                    loc: la,
                    val: vec![0; a.clocks.len()],
                },
                a_dec: ADec::Plain,
                b: RegionState {
                    loc: lb,
                    val: vec![0; b.clocks.len()],
                },
                b_dec: BDec::Plain,
                pending: None,
                counter: 0,
            };
            let (id, new) = sys.intern(s);
            if new {
                queue.push_back(id);
            }
            if !sys.initial.contains(&id) {
                sys.initial.push(id);
            }
        }
    }
    while let Some(id) = queue.pop_front() {
        let succ = builder.successors(&sys.states[id]);
        for (kind, family, event, s) in succ {
            let (to, new) = sys.intern(s);
            if new {
                queue.push_back(to);
            }
            let rid = sys.rules.len();
            sys.rules.push(OcaRule {
                from: id,
                to,
                kind,
                family,
                event,
            });
            sys.out[id].push(rid);
        }
    }
    Ok(sys)
}

impl OneCounterSystem {
    fn intern(&mut self, s: OcaState) -> (usize, bool) {
        if let Some(&i) = self.index.get(&s) {
            return (i, false);
        }
        let i = self.states.len();
        self.index.insert(s.clone(), i);
        self.states.push(s);
        self.out.push(Vec::new());
        (i, true)
    }

    pub fn state_id(&self, s: &OcaState) -> Option<usize> {
        self.index.get(s).copied()
    }

    fn region_label(locs: &[String], r: &RegionState, mark: &str) -> String {
        let vals: Vec<String> = r.val.iter().map(|v| show_val(*v)).collect();
        if vals.is_empty() {
            format!("({}{mark})", locs[r.loc])
        } else {
            format!("({}{mark},{})", locs[r.loc], vals.join(","))
        }
    }

    /// Renders a state as `(s1,0)|(q1,0),eps|0`.
    pub fn label(&self, id: usize) -> String {
        let s = &self.states[id];
        let a_mark = match s.a_dec {
            ADec::Plain => "",
            ADec::Bot => "_bot",
        };
        let b_mark = match s.b_dec {
            BDec::Plain => "",
            BDec::Bot => "_bot",
            BDec::BotPushed => "'_bot",
            BDec::One => "_one",
            BDec::OnePushed => "'_one",
        };
        let pending = s
            .pending
            .map_or("eps".to_string(), |m| self.alphabet[m].clone());
        format!(
            "{}|{},{}|{}",
            Self::region_label(&self.a_locs, &s.a, a_mark),
            Self::region_label(&self.b_locs, &s.b, b_mark),
            pending,
            s.counter
        )
    }

    /// Parses a label produced by [`OneCounterSystem::label`] and looks it up.
    pub fn find(&self, label: &str) -> Option<usize> {
        (0..self.states.len()).find(|&i| self.label(i) == label)
    }

    pub fn writer_loc(&self, name: &str) -> Option<usize> {
        self.a_locs.iter().position(|l| l == name)
    }

    pub fn reader_loc(&self, name: &str) -> Option<usize> {
        self.b_locs.iter().position(|l| l == name)
    }

    /// Applies `rule` to `(state, stack)`; the stack is bottom-first.
    pub fn apply(&self, state: usize, stack: &mut Vec<Sym>, rule: usize) -> Result<usize, String> {
        let r = &self.rules[rule];
        if r.from != state {
            return Err(format!("rule {rule} does not start at state {state}"));
        }
        match r.kind {
            RuleKind::Int => {}
            RuleKind::Push(s) => stack.push(s),
            RuleKind::Pop(s) => {
                if stack.last() != Some(&s) {
                    return Err(format!("rule {rule} pops {s} from {}", render_stack(stack)));
                }
                stack.pop();
            }
        }
        Ok(r.to)
    }

    /// Replays rules from `init` with stack `⊥`, returning every visited
    /// configuration.
    pub fn replay(&self, init: usize, rules: &[usize]) -> Result<Vec<(usize, Vec<Sym>)>, String> {
        let mut cur = (init, vec![Sym::Bot]);
        let mut out = vec![cur.clone()];
        for &r in rules {
            let s = self.apply(cur.0, &mut cur.1, r)?;
            cur.0 = s;
            out.push(cur.clone());
        }
        Ok(out)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph oca {\n");
        for i in 0..self.states.len() {
            let shape = if self.initial.contains(&i) {
                "doublecircle"
            } else {
                "box"
            };
            let _ = writeln!(out, "  n{i} [label=\"{}\", shape={shape}];", self.label(i));
        }
        for r in &self.rules {
            let op = match r.kind {
                RuleKind::Int => String::new(),
                RuleKind::Push(s) => format!(" push {s}"),
                RuleKind::Pop(s) => format!(" pop {s}"),
            };
            let _ = writeln!(
                out,
                "  n{} -> n{} [label=\"{}{op}\"];",
                r.from,
                r.to,
                r.family.code()
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Renders a bottom-first stack top-first, e.g. `1⊥`; empty is `eps`.
pub fn render_stack(stack: &[Sym]) -> String {
    if stack.is_empty() {
        return "eps".to_string();
    }
    stack.iter().rev().map(|s| s.to_string()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PdsOutcome {
    Reachable { init: usize, witness: Vec<usize> },
    Unreachable,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SaturationStats {
    pub control_states: usize,
    pub relevant_states: usize,
    pub transitions: usize,
}

// Stack symbols of the saturation automaton; `DOLLAR` is a virtual bottom
// below `⊥` so that configurations with an empty stack still have a top.
const BOT: u8 = 0;
const ONE: u8 = 1;
const DOLLAR: u8 = 2;

fn code(s: Sym) -> u8 {
    match s {
        Sym::Bot => BOT,
        Sym::One => ONE,
    }
}

#[derive(Clone, Copy, Debug)]
enum Origin {
    /// `⟨p,γ⟩ → ⟨q,γ⟩` for every `γ`.
    Rule(usize),
    /// A pop of `a` immediately followed by a push of `b`.
    Swap(usize, usize),
    /// Derived from push rule `r` and transition `t1 = (q, a, x)`.
    Derived(usize, u32),
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    from: u32,
    /// `Some((a, b))` rewrites top `a` to `b`; `None` keeps any top.
    swap: Option<(u8, u8)>,
    origin: Origin,
}

#[derive(Clone, Copy, Debug)]
enum Just {
    Base,
    Pop(usize),
    Via(u32, u32),
}

/// Decides whether a state satisfying `target` is reachable from an initial
/// state with stack `⊥`, returning a rule sequence as witness.
pub fn pushdown_reach(
    ocs: &OneCounterSystem,
    target: &dyn Fn(&OcaState) -> bool,
) -> (PdsOutcome, SaturationStats) {
    let n = ocs.states.len();
    let mut stats = SaturationStats {
        control_states: n,
        ..Default::default()
    };
    let is_target: Vec<bool> = ocs.states.iter().map(target).collect();
    for &i in &ocs.initial {
        if is_target[i] {
            return (
                PdsOutcome::Reachable {
                    init: i,
                    witness: Vec::new(),
                },
                stats,
            );
        }
    }

    // Control states that can reach a target when the stack is ignored.
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for r in &ocs.rules {
        preds[r.to].push(r.from);
    }
    let mut relevant = is_target.clone();
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| is_target[i]).collect();
    while let Some(i) = queue.pop_front() {
        for &p in &preds[i] {
            if !relevant[p] {
                relevant[p] = true;
                queue.push_back(p);
            }
        }
    }
    drop(preds);
    stats.relevant_states = relevant.iter().filter(|&&r| r).count();
    if !ocs.initial.iter().any(|&i| relevant[i]) {
        return (PdsOutcome::Unreachable, stats);
    }

    let fin = n as u32;
    let mut entries: Vec<Entry> = Vec::new();
    let mut int_pred: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
    let mut push_into: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut pops = Vec::new();
    let only_pushes = |m: usize| {
        !is_target[m]
            && !ocs.out[m].is_empty()
            && ocs.out[m]
                .iter()
                .all(|&r| matches!(ocs.rules[r].kind, RuleKind::Push(_)))
    };
    for (rid, r) in ocs.rules.iter().enumerate() {
        if !relevant[r.from] || !relevant[r.to] {
            continue;
        }
        match r.kind {
            RuleKind::Int => {
                int_pred[r.to].push(entries.len() as u32);
                entries.push(Entry {
                    from: r.from as u32,
                    swap: None,
                    origin: Origin::Rule(rid),
                });
            }
            RuleKind::Push(_) => push_into[r.to].push(rid),
            RuleKind::Pop(a) if only_pushes(r.to) => {
                for &r2 in &ocs.out[r.to] {
                    let r2r = &ocs.rules[r2];
                    let RuleKind::Push(b) = r2r.kind else {
                        unreachable!()
                    };
                    if !relevant[r2r.to] {
                        continue;
                    }
                    int_pred[r2r.to].push(entries.len() as u32);
                    entries.push(Entry {
                        from: r.from as u32,
                        swap: Some((code(a), code(b))),
                        origin: Origin::Swap(rid, r2),
                    });
                }
            }
            RuleKind::Pop(a) => pops.push((rid, r.from as u32, code(a), r.to as u32)),
        }
    }

    let mut trans: Vec<(u32, u8, u32)> = Vec::new();
    let mut just: Vec<Just> = Vec::new();
    let mut seen: HashMap<u64, u32> = HashMap::new();
    let mut out_by: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
    let mut derived: HashSet<(u32, u32)> = HashSet::new();
    let mut work: VecDeque<u32> = VecDeque::new();
    let init_set: HashSet<u32> = ocs
        .initial
        .iter()
        .filter(|&&i| relevant[i])
        .map(|&i| i as u32)
        .collect();
    let key = |p: u32, g: u8, q: u32| ((p as u64) << 34) | ((g as u64) << 32) | q as u64;

    let mut found: Option<(u32, u32)> = None;
    let mut add = |p: u32,
                   g: u8,
                   q: u32,
                   j: Just,
                   trans: &mut Vec<(u32, u8, u32)>,
                   just: &mut Vec<Just>,
                   out_by: &mut Vec<Vec<u32>>,
                   work: &mut VecDeque<u32>,
                   found: &mut Option<(u32, u32)>| {
        let k = key(p, g, q);
        if seen.contains_key(&k) {
            return;
        }
        let id = trans.len() as u32;
        seen.insert(k, id);
        trans.push((p, g, q));
        just.push(j);
        out_by[p as usize].push(id);
        work.push_back(id);
        if found.is_none() {
            if g == BOT && init_set.contains(&p) {
                if let Some(&t2) = seen.get(&key(q, DOLLAR, fin)) {
                    *found = Some((id, t2));
                }
            } else if g == DOLLAR && q == fin {
                for &i in &init_set {
                    if let Some(&t1) = seen.get(&key(i, BOT, p)) {
                        *found = Some((t1, id));
                        break;
                    }
                }
            }
        }
    };

    for g in [BOT, ONE, DOLLAR] {
        add(
            fin,
            g,
            fin,
            Just::Base,
            &mut trans,
            &mut just,
            &mut out_by,
            &mut work,
            &mut found,
        );
        for s in (0..n).filter(|&s| is_target[s]) {
            add(
                s as u32,
                g,
                fin,
                Just::Base,
                &mut trans,
                &mut just,
                &mut out_by,
                &mut work,
                &mut found,
            );
        }
    }
    for &(rid, p, a, q) in &pops {
        add(
            p,
            a,
            q,
            Just::Pop(rid),
            &mut trans,
            &mut just,
            &mut out_by,
            &mut work,
            &mut found,
        );
    }

    while found.is_none() {
        let Some(t) = work.pop_front() else { break };
        let (q, g, x) = trans[t as usize];
        for ei in int_pred[q as usize].clone() {
            let e = entries[ei as usize];
            match e.swap {
                None => add(
                    e.from,
                    g,
                    x,
                    Just::Via(ei, t),
                    &mut trans,
                    &mut just,
                    &mut out_by,
                    &mut work,
                    &mut found,
                ),
                Some((a, b)) if b == g => add(
                    e.from,
                    a,
                    x,
                    Just::Via(ei, t),
                    &mut trans,
                    &mut just,
                    &mut out_by,
                    &mut work,
                    &mut found,
                ),
                Some(_) => {}
            }
        }
        if (q as usize) < n {
            for &r in &push_into[q as usize] {
                let RuleKind::Push(a) = ocs.rules[r].kind else {
                    unreachable!()
                };
                let from = ocs.rules[r].from as u32;
                if code(a) != g || !derived.insert((from, x)) {
                    continue;
                }
                let ei = entries.len() as u32;
                entries.push(Entry {
                    from,
                    swap: None,
                    origin: Origin::Derived(r, t),
                });
                int_pred[x as usize].push(ei);
                for t2 in out_by[x as usize].clone() {
                    let (_, g2, y) = trans[t2 as usize];
                    add(
                        from,
                        g2,
                        y,
                        Just::Via(ei, t2),
                        &mut trans,
                        &mut just,
                        &mut out_by,
                        &mut work,
                        &mut found,
                    );
                }
            }
        }
    }
    stats.transitions = trans.len();

    let Some((t1, t2)) = found else {
        return (PdsOutcome::Unreachable, stats);
    };
    let init = trans[t1 as usize].0 as usize;
    // Expand the accepting path: the last element is the transition read
    // from the current top of stack.
    let mut path = vec![t2, t1];
    let mut witness = Vec::new();
    while let Some(&t) = path.last() {
        match just[t as usize] {
            Just::Base => break,
            Just::Pop(r) => {
                witness.push(r);
                path.pop();
            }
            Just::Via(ei, t2) => {
                let e = entries[ei as usize];
                path.pop();
                path.push(t2);
                match e.origin {
                    Origin::Rule(r) => witness.push(r),
                    Origin::Swap(r1, r2) => {
                        witness.push(r1);
                        witness.push(r2);
                    }
                    Origin::Derived(r, t1) => {
                        witness.push(r);
                        path.push(t1);
                    }
                }
            }
        }
    }
    (PdsOutcome::Reachable { init, witness }, stats)
}

/// Checks the counter encoding along a witness: at every undecorated state
/// `counter + #1s` equals the reader's lead over the writer, and every read
/// happens at age `counter + #1s`.
pub fn check_counter_encoding(
    ocs: &OneCounterSystem,
    init: usize,
    witness: &[usize],
) -> Result<(), String> {
    let configs = ocs.replay(init, witness)?;
    let (mut ta, mut tb) = (0i64, 0i64);
    let mut written_at: Option<i64> = None;
    for (step, &r) in witness.iter().enumerate() {
        let rule = &ocs.rules[r];
        let (before, stack) = &configs[step];
        let ones = stack.iter().filter(|&&s| s == Sym::One).count() as i64;
        let counter = ocs.states[*before].counter as i64;
        if matches!(
            rule.family,
            Family::ReadBelowK | Family::ReadAtK | Family::ReadAboveK
        ) {
            let w = written_at.ok_or_else(|| format!("step {step}: read without a write"))?;
            if tb - w != counter + ones {
                return Err(format!(
                    "step {step}: message age {} but counter+ones={}",
                    tb - w,
                    counter + ones
                ));
            }
            written_at = None;
        }
        match rule.event {
            Event::WriterTick => ta += 1,
            Event::ReaderTick => tb += 1,
            _ => {}
        }
        if rule.family == Family::Write {
            written_at = Some(ta);
        }
        let (after, stack) = &configs[step + 1];
        if ocs.states[*after].is_plain() {
            let ones = stack.iter().filter(|&&s| s == Sym::One).count() as i64;
            let counter = ocs.states[*after].counter as i64;
            if counter + ones != tb - ta {
                return Err(format!(
                    "step {step}: counter {counter} + ones {ones} != lead {}",
                    tb - ta
                ));
            }
        }
    }
    Ok(())
}

/// Re-interleaves a witness into a synchronized network trace.
///
/// Each writer event happens at the number of writer ticks before it, each
/// reader event at the number of reader ticks before it; at every instant
/// writer events precede reader events.
pub fn lift_witness(ocs: &OneCounterSystem, witness: &[usize]) -> Vec<Move> {
    let (mut ta, mut tb) = (0usize, 0usize);
    let mut a_events: Vec<(usize, usize)> = Vec::new();
    let mut b_events: Vec<(usize, usize)> = Vec::new();
    for &r in witness {
        match ocs.rules[r].event {
            Event::WriterTick => ta += 1,
            Event::ReaderTick => tb += 1,
            Event::Writer(t) => a_events.push((ta, t)),
            Event::Reader(t) => b_events.push((tb, t)),
            Event::None => {}
        }
    }
    let horizon = ta.max(tb);
    let (mut ia, mut ib) = (0, 0);
    let mut moves = Vec::new();
    for t in 0..=horizon {
        while ia < a_events.len() && a_events[ia].0 == t {
            moves.push(Move::Discrete {
                automaton: ocs.writer,
                transition: a_events[ia].1,
            });
            ia += 1;
        }
        while ib < b_events.len() && b_events[ib].0 == t {
            moves.push(Move::Discrete {
                automaton: ocs.reader,
                transition: b_events[ib].1,
            });
            ib += 1;
        }
        if t < horizon {
            moves.push(Move::Elapse(1));
        }
    }
    moves
}

#[derive(Clone, Debug)]
pub enum OcaVerdict {
    Reachable {
        init: Configuration,
        trace: Vec<Move>,
        oca_init: usize,
        oca_witness: Vec<usize>,
    },
    Unreachable,
}

impl OcaVerdict {
    pub fn is_reachable(&self) -> bool {
        matches!(self, OcaVerdict::Reachable { .. })
    }
}

/// Decides whether the target locations are reachable with an empty
/// channel. A `Reachable` verdict carries a network trace that has been
/// verified by replay.
///
/// Clocks are capped individually, which leaves guard outcomes unchanged
/// and keeps the control space small.
pub fn decide_2cta_reach(
    net: &Network,
    target: &Target,
) -> Result<(OcaVerdict, SaturationStats), OcaError> {
    let ocs = build_oca_with(net, ClockCaps::PerClock)?;
    decide_with(net, &ocs, target)
}

/// As [`decide_2cta_reach`] with a prebuilt system.
pub fn decide_with(
    net: &Network,
    ocs: &OneCounterSystem,
    target: &Target,
) -> Result<(OcaVerdict, SaturationStats), OcaError> {
    let ix = NetIndex::new(net).map_err(|e| OcaError::Model(e.to_string()))?;
    let mut want_a = None;
    let mut want_b = None;
    for &(a, l) in &target.locations {
        if a == ocs.writer {
            want_a = Some(l);
        } else if a == ocs.reader {
            want_b = Some(l);
        }
    }
    let pred = |s: &OcaState| {
        s.is_plain()
            && s.pending.is_none()
            && want_a.is_none_or(|l| s.a.loc == l)
            && want_b.is_none_or(|l| s.b.loc == l)
    };
    let (outcome, stats) = pushdown_reach(ocs, &pred);
    let PdsOutcome::Reachable { init, witness } = outcome else {
        return Ok((OcaVerdict::Unreachable, stats));
    };
    ocs.replay(init, &witness)
        .map_err(|e| OcaError::Internal(format!("witness does not replay: {e}")))?;
    let trace = lift_witness(ocs, &witness);
    let s0 = &ocs.states[init];
    let cfg0 = initial_configurations(&ix)
        .into_iter()
        .find(|c| c.locs[ocs.writer] == s0.a.loc && c.locs[ocs.reader] == s0.b.loc)
        .ok_or_else(|| OcaError::Internal("no matching initial configuration".into()))?;
    let configs =
        replay(&ix, &cfg0, &trace).map_err(|e| OcaError::Internal(format!("lifted trace: {e}")))?;
    let last = configs.last().expect("nonempty");
    if !target.locations.iter().all(|&(a, l)| last.locs[a] == l)
        || last.chans.iter().any(|w| !w.is_empty())
    {
        return Err(OcaError::Internal(
            "lifted trace misses the target".to_string(),
        ));
    }
    Ok((
        OcaVerdict::Reachable {
            init: cfg0,
            trace,
            oca_init: init,
            oca_witness: witness,
        },
        stats,
    ))
}
