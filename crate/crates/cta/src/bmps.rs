//! Bounded-context networks as multistack pushdown systems.
//!
//! Every channel `c` gets a write stack `W_c` and a read stack `R_c`. Writes
//! push the message on `W_c`; a unit time elapse pushes `1` on every stack
//! that may hold messages (time below the oldest message is never observed).
//! A reader drains `R_c`, and when it is empty moves the whole of `W_c` onto
//! `R_c`, tagging each message with the time elapsed since it was written.
//! Each context pops at most `R_c`, then `W_c`, then `R_c` again, so runs
//! with `B` context switches have at most `3B` phases.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::{self, Write as _};
use std::hash::Hash;

use serde::Serialize;
use thiserror::Error;

use crate::model::{add_sat, cap, show_val, COp, NetIndex, Rel};
use crate::semantics::{
    channel_action, ChannelAction, Configuration, ContextAnnotation, Move, TimedWord,
};

/// Stack operation performed by one transition.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum StackAction<S> {
    None,
    Push(usize, S),
    Pop(usize, S),
    /// Succeeds only on an empty stack; counts as a pop for phases.
    EmptyTest(usize),
}

impl<S> StackAction<S> {
    /// The stack read by this action, if any.
    pub fn popped(&self) -> Option<usize> {
        match self {
            StackAction::Pop(s, _) | StackAction::EmptyTest(s) => Some(*s),
            _ => None,
        }
    }
}

/// A multistack system explored on the fly.
pub trait Multistack {
    type Control: Clone + Eq + Hash + fmt::Debug;
    type Sym: Clone + Eq + Hash + fmt::Debug;
    type Label: Clone + fmt::Debug;

    fn num_stacks(&self) -> usize;
    fn initial(&self) -> Vec<Self::Control>;
    /// Transitions enabled at `control` given the current stacks (top last).
    #[allow(clippy::type_complexity)]
    fn successors(
        &self,
        control: &Self::Control,
        stacks: &[Vec<Self::Sym>],
    ) -> Vec<(Self::Label, StackAction<Self::Sym>, Self::Control)>;
}

/// Applies `action` to `stacks`, checking pops and empty tests.
pub fn apply_action<S: Clone + PartialEq>(stacks: &mut [Vec<S>], action: &StackAction<S>) -> bool {
    match action {
        StackAction::None => true,
        StackAction::Push(s, x) => {
            stacks[*s].push(x.clone());
            true
        }
        StackAction::Pop(s, x) => {
            if stacks[*s].last() == Some(x) {
                stacks[*s].pop();
                true
            } else {
                false
            }
        }
        StackAction::EmptyTest(s) => stacks[*s].is_empty(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseStep<L, S> {
    pub label: L,
    pub action: StackAction<S>,
    pub phase: usize,
}

/// A run with the phase index of every step.
#[derive(Clone, Debug, Serialize)]
pub struct PhaseTrace<C, L, S> {
    pub init: C,
    pub steps: Vec<PhaseStep<L, S>>,
}

impl<C, L, S> PhaseTrace<C, L, S> {
    pub fn new(init: C, steps: Vec<(L, StackAction<S>)>) -> Self {
        let popped: Vec<Option<usize>> = steps.iter().map(|(_, a)| a.popped()).collect();
        let phases = phase_indices(&popped);
        PhaseTrace {
            init,
            steps: steps
                .into_iter()
                .zip(phases)
                .map(|((label, action), phase)| PhaseStep {
                    label,
                    action,
                    phase,
                })
                .collect(),
        }
    }

    pub fn popped(&self) -> Vec<Option<usize>> {
        self.steps.iter().map(|s| s.action.popped()).collect()
    }
}

/// Phase index after each step: the index grows when a pop targets a
/// stack other than the previous pop's.
fn phase_indices(popped: &[Option<usize>]) -> Vec<usize> {
    let mut last = None;
    let mut phase = 0;
    popped
        .iter()
        .map(|p| {
            if let Some(s) = p {
                if last != Some(*s) {
                    phase += 1;
                    last = Some(*s);
                }
            }
            phase
        })
        .collect()
}

/// Number of maximal segments in which all pops use a single stack.
pub fn count_phases(popped: &[Option<usize>]) -> usize {
    phase_indices(popped).last().copied().unwrap_or(0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SearchBudget {
    pub max_steps: usize,
    pub max_stack_depth: usize,
}

#[derive(Clone, Debug)]
pub enum PhaseOutcome<C, L, S> {
    Reached(PhaseTrace<C, L, S>),
    BudgetExhausted { states: usize },
}

impl<C, L, S> PhaseOutcome<C, L, S> {
    pub fn is_reached(&self) -> bool {
        matches!(self, PhaseOutcome::Reached(_))
    }
}

struct SearchNode<M: Multistack> {
    control: M::Control,
    stacks: Vec<Vec<M::Sym>>,
    last_pop: Option<usize>,
    phases: usize,
    parent: usize,
    via: Option<(M::Label, StackAction<M::Sym>)>,
}

/// Breadth-first search over runs with at most `phase_bound` phases.
///
/// A returned trace is a genuine run; exhausting the budget proves nothing.
#[allow(clippy::type_complexity)]
pub fn phase_bounded_reach<M: Multistack>(
    mps: &M,
    phase_bound: usize,
    budget: SearchBudget,
    target: &dyn Fn(&M::Control, &[Vec<M::Sym>]) -> bool,
) -> PhaseOutcome<M::Control, M::Label, M::Sym> {
    type Key<M> = (
        <M as Multistack>::Control,
        Vec<Vec<<M as Multistack>::Sym>>,
        Option<usize>,
    );
    let mut nodes: Vec<SearchNode<M>> = Vec::new();
    // A state reached with fewer phases subsumes later visits.
    let mut seen: HashMap<Key<M>, usize> = HashMap::new();
    let mut frontier = Vec::new();
    let trace_to = |nodes: &Vec<SearchNode<M>>, mut i: usize| {
        let mut steps = Vec::new();
        while let Some(v) = &nodes[i].via {
            steps.push(v.clone());
            i = nodes[i].parent;
        }
        steps.reverse();
        PhaseTrace::new(nodes[i].control.clone(), steps)
    };
    for c in mps.initial() {
        let stacks = vec![Vec::new(); mps.num_stacks()];
        if seen.insert((c.clone(), stacks.clone(), None), 0).is_some() {
            continue;
        }
        let i = nodes.len();
        nodes.push(SearchNode {
            control: c.clone(),
            stacks,
            last_pop: None,
            phases: 0,
            parent: i,
            via: None,
        });
        if target(&c, &nodes[i].stacks) {
            return PhaseOutcome::Reached(trace_to(&nodes, i));
        }
        frontier.push(i);
    }
    for _ in 0..budget.max_steps {
        let mut next = Vec::new();
        for &i in &frontier {
            let succ = mps.successors(&nodes[i].control, &nodes[i].stacks);
            for (label, action, control) in succ {
                let mut stacks = nodes[i].stacks.clone();
                if !apply_action(&mut stacks, &action) {
                    continue;
                }
                if stacks.iter().any(|s| s.len() > budget.max_stack_depth) {
                    continue;
                }
                let (mut last_pop, mut phases) = (nodes[i].last_pop, nodes[i].phases);
                if let Some(s) = action.popped() {
                    if last_pop != Some(s) {
                        phases += 1;
                        last_pop = Some(s);
                    }
                }
                if phases > phase_bound {
                    continue;
                }
                match seen.entry((control.clone(), stacks.clone(), last_pop)) {
                    std::collections::hash_map::Entry::Occupied(mut e) => {
                        if *e.get() <= phases {
                            continue;
                        }
                        e.insert(phases);
                    }
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert(phases);
                    }
                }
                let j = nodes.len();
                let hit = target(&control, &stacks);
                nodes.push(SearchNode {
                    control,
                    stacks,
                    last_pop,
                    phases,
                    parent: i,
                    via: Some((label, action)),
                });
                if hit {
                    return PhaseOutcome::Reached(trace_to(&nodes, j));
                }
                next.push(j);
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    PhaseOutcome::BudgetExhausted {
        states: nodes.len(),
    }
}

/// Replays a trace, returning the stacks after every step.
#[allow(clippy::type_complexity)]
pub fn replay_trace<M: Multistack>(
    mps: &M,
    trace: &PhaseTrace<M::Control, M::Label, M::Sym>,
) -> Result<Vec<(M::Control, Vec<Vec<M::Sym>>)>, String>
where
    M::Label: PartialEq,
{
    let mut cur = (trace.init.clone(), vec![Vec::new(); mps.num_stacks()]);
    let mut out = vec![cur.clone()];
    for (i, step) in trace.steps.iter().enumerate() {
        let found = mps
            .successors(&cur.0, &cur.1)
            .into_iter()
            .find(|(l, a, _)| *l == step.label && *a == step.action);
        let Some((_, action, next)) = found else {
            return Err(format!("step {i} ({:?}) not enabled", step.label));
        };
        if !apply_action(&mut cur.1, &action) {
            return Err(format!("step {i}: stack action failed"));
        }
        cur.0 = next;
        out.push(cur.clone());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Timed multistack systems and their region construction.

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum TmAction {
    Int,
    Push(usize, String),
    Pop(usize, String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TmTransition {
    pub from: usize,
    pub guard: Vec<(usize, Rel, u32)>,
    pub resets: Vec<usize>,
    pub action: TmAction,
    pub to: usize,
}

/// A discrete timed automaton with untimed stacks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TimedMps {
    pub locations: Vec<String>,
    pub initial: Vec<usize>,
    pub stacks: usize,
    pub clocks: Vec<String>,
    pub transitions: Vec<TmTransition>,
}

impl TimedMps {
    pub fn max_constant(&self) -> u32 {
        self.transitions
            .iter()
            .flat_map(|t| t.guard.iter().map(|g| g.2))
            .max()
            .unwrap_or(0)
    }

    fn to_action(a: &TmAction) -> StackAction<String> {
        match a {
            TmAction::Int => StackAction::None,
            TmAction::Push(s, x) => StackAction::Push(*s, x.clone()),
            TmAction::Pop(s, x) => StackAction::Pop(*s, x.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum TmLabel {
    Tick,
    Edge(usize),
}

/// Exact semantics: clock values are never capped.
impl Multistack for TimedMps {
    type Control = (usize, Vec<u32>);
    type Sym = String;
    type Label = TmLabel;

    fn num_stacks(&self) -> usize {
        self.stacks
    }

    fn initial(&self) -> Vec<Self::Control> {
        self.initial
            .iter()
            .map(|&l| (l, vec![0; self.clocks.len()]))
            .collect()
    }

    fn successors(
        &self,
        (loc, val): &Self::Control,
        _stacks: &[Vec<String>],
    ) -> Vec<(TmLabel, StackAction<String>, Self::Control)> {
        let mut out = vec![(
            TmLabel::Tick,
            StackAction::None,
            (*loc, val.iter().map(|v| add_sat(*v, 1)).collect()),
        )];
        for (i, t) in self.transitions.iter().enumerate() {
            if t.from != *loc || !t.guard.iter().all(|&(c, r, k)| r.holds(val[c], k)) {
                continue;
            }
            let mut v = val.clone();
            for &r in &t.resets {
                v[r] = 0;
            }
            out.push((TmLabel::Edge(i), Self::to_action(&t.action), (t.to, v)));
        }
        out
    }
}

/// An untimed multistack system with explicit control states.
#[derive(Clone, Debug, Serialize)]
pub struct ExplicitMps {
    pub controls: Vec<String>,
    pub initial: Vec<usize>,
    pub stacks: usize,
    /// `(from, label, action, to)`.
    pub transitions: Vec<(usize, TmLabel, StackAction<String>, usize)>,
    #[serde(skip)]
    out: Vec<Vec<usize>>,
}

impl Multistack for ExplicitMps {
    type Control = usize;
    type Sym = String;
    type Label = TmLabel;

    fn num_stacks(&self) -> usize {
        self.stacks
    }

    fn initial(&self) -> Vec<usize> {
        self.initial.clone()
    }

    fn successors(
        &self,
        c: &usize,
        _stacks: &[Vec<String>],
    ) -> Vec<(TmLabel, StackAction<String>, usize)> {
        self.out[*c]
            .iter()
            .map(|&i| {
                let (_, l, a, to) = &self.transitions[i];
                (*l, a.clone(), *to)
            })
            .collect()
    }
}

/// Folds clock valuations capped at the largest constant into control
/// states; stack behaviour is unchanged.
pub fn regionize_mps(tm: &TimedMps) -> ExplicitMps {
    let k = tm.max_constant();
    let mut index: HashMap<(usize, Vec<u32>), usize> = HashMap::new();
    let mut controls = Vec::new();
    let mut keys: Vec<(usize, Vec<u32>)> = Vec::new();
    let mut queue = VecDeque::new();
    let mut intern = |s: (usize, Vec<u32>),
                      keys: &mut Vec<(usize, Vec<u32>)>,
                      controls: &mut Vec<String>,
                      queue: &mut VecDeque<usize>| {
        *index.entry(s.clone()).or_insert_with(|| {
            let vals: Vec<String> = s.1.iter().map(|v| show_val(*v)).collect();
            controls.push(if vals.is_empty() {
                tm.locations[s.0].clone()
            } else {
                format!("({},{})", tm.locations[s.0], vals.join(","))
            });
            keys.push(s);
            queue.push_back(keys.len() - 1);
            keys.len() - 1
        })
    };
    let mut initial = Vec::new();
    for c in tm.initial() {
        let i = intern(c, &mut keys, &mut controls, &mut queue);
        if !initial.contains(&i) {
            initial.push(i);
        }
    }
    let mut transitions = Vec::new();
    while let Some(i) = queue.pop_front() {
        let (loc, val) = keys[i].clone();
        for (label, action, (l2, v2)) in tm.successors(&(loc, val), &[]) {
            let v2: Vec<u32> = v2.into_iter().map(|v| cap(v, k)).collect();
            let j = intern((l2, v2), &mut keys, &mut controls, &mut queue);
            transitions.push((i, label, action, j));
        }
    }
    let mut out = vec![Vec::new(); controls.len()];
    for (i, t) in transitions.iter().enumerate() {
        out[t.0].push(i);
    }
    ExplicitMps {
        controls,
        initial,
        stacks: tm.stacks,
        transitions,
        out,
    }
}

// ---------------------------------------------------------------------------
// The network encoding.

/// Symbols of `W` stacks (`Msg`, `Time`) and `R` stacks (`Time`, `Pair`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum StackSym {
    Msg(usize),
    Time(u32),
    Pair(usize, u32),
}

/// Reading protocol state of the active automaton.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Deco {
    Plain,
    /// Draining `R_ch`; `tag` is the time popped so far.
    R {
        ch: usize,
        tag: u32,
    },
    /// Moving `W_ch` onto `R_ch`; `tag` is the time popped so far.
    W {
        ch: usize,
        tag: u32,
    },
    /// Popped message `msg` from `W_ch`, about to push it on `R_ch`.
    WMsg {
        ch: usize,
        tag: u32,
        msg: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct MpsControl {
    pub locs: Vec<usize>,
    pub vals: Vec<Vec<u32>>,
    pub globals: Vec<u32>,
    /// Decoration of the active automaton.
    pub deco: Deco,
    pub active: usize,
    /// Context index, at most `B`.
    pub ctx: u32,
    /// Channel read in the current context.
    pub lock: Option<usize>,
    /// Channels written in the current context, as a bit set.
    pub written: u64,
    /// Stacks that may hold messages, as a bit set. Set by writes and
    /// transfers, cleared by empty tests; time is pushed only on these.
    pub filled: u64,
    /// Next stack to receive the time symbol of an ongoing elapse.
    pub elapse: Option<usize>,
}

/// Stacks that receive a time symbol on every elapse.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum ElapseStacks {
    /// Only stacks that may hold messages. Time below the oldest message
    /// is never read, so runs are unchanged and far fewer states arise.
    #[default]
    Filled,
    /// Every stack, as in the plain encoding.
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum BmpsLabel {
    Nop { automaton: usize, transition: usize },
    Write { automaton: usize, transition: usize },
    EnterRead { automaton: usize, ch: usize },
    PopTime { ch: usize },
    Read { automaton: usize, transition: usize },
    EmptyR { ch: usize },
    ExitRead { automaton: usize },
    WTime { ch: usize },
    WMsg { ch: usize },
    Transfer { ch: usize },
    EmptyW { ch: usize },
    ElapseStart,
    ElapsePush { stack: usize },
    Switch { to: usize },
}

pub fn w_stack(ch: usize) -> usize {
    2 * ch
}

pub fn r_stack(ch: usize) -> usize {
    2 * ch + 1
}

/// The multistack system of a network with context bound `b`.
#[derive(Clone, Debug)]
pub struct Bmps {
    pub ix: NetIndex,
    pub bound: u32,
    pub k: u32,
    pub elapse_on: ElapseStacks,
}

pub fn build_bmps(ix: &NetIndex, b: u32) -> Bmps {
    build_bmps_with(ix, b, ElapseStacks::Filled)
}

pub fn build_bmps_with(ix: &NetIndex, b: u32, elapse_on: ElapseStacks) -> Bmps {
    Bmps {
        ix: ix.clone(),
        bound: b,
        k: ix.max_constant,
        elapse_on,
    }
}

impl Bmps {
    /// First stack at or after `from` that receives elapsed time.
    fn next_elapse(&self, c: &MpsControl, from: usize) -> Option<usize> {
        let n = 2 * self.ix.channels.len();
        match self.elapse_on {
            ElapseStacks::All => (from < n).then_some(from),
            ElapseStacks::Filled => (from..n).find(|&s| c.filled & (1 << s) != 0),
        }
    }

    pub fn stack_name(&self, s: usize) -> String {
        let kind = if s.is_multiple_of(2) { "W" } else { "R" };
        format!("{kind}[{}]", self.ix.channel_ids[s / 2])
    }

    /// Renders a control as `(p1,0),(q1^R[c21]_1,2),(A1,1)`.
    pub fn render_control(&self, c: &MpsControl) -> String {
        let ix = &self.ix;
        let mut parts = Vec::new();
        for (i, a) in ix.automata.iter().enumerate() {
            let mut loc = a.locations[c.locs[i]].clone();
            if i == c.active {
                match c.deco {
                    Deco::Plain => {}
                    Deco::R { ch, tag } | Deco::W { ch, tag } => {
                        let kind = if matches!(c.deco, Deco::R { .. }) {
                            "R"
                        } else {
                            "W"
                        };
                        let _ = write!(loc, "^{kind}[{}]", ix.channel_ids[ch]);
                        if tag > 0 {
                            let _ = write!(loc, "_{}", show_val(tag));
                        }
                    }
                    Deco::WMsg { ch, tag, msg } => {
                        let _ = write!(
                            loc,
                            "^W[{}]_{}{}",
                            ix.channel_ids[ch],
                            show_val(tag),
                            ix.alphabet[msg]
                        );
                    }
                }
            }
            let vals: Vec<String> = c.vals[i].iter().map(|v| show_val(*v)).collect();
            if vals.is_empty() {
                parts.push(format!("({loc})"));
            } else {
                parts.push(format!("({loc},{})", vals.join(",")));
            }
        }
        if !c.globals.is_empty() {
            let g: Vec<String> = c.globals.iter().map(|v| show_val(*v)).collect();
            parts.push(format!("[{}]", g.join(",")));
        }
        parts.push(format!("({},{})", ix.automata[c.active].id, c.ctx));
        parts.join(",")
    }

    pub fn render_stack(&self, st: &[StackSym]) -> String {
        let mut s = String::from("⊥");
        for x in st {
            match *x {
                StackSym::Msg(m) => s.push_str(&self.ix.alphabet[m]),
                StackSym::Time(t) => s.push_str(&show_val(t)),
                StackSym::Pair(m, t) => {
                    let _ = write!(s, "({},{})", self.ix.alphabet[m], show_val(t));
                }
            }
            s.push(' ');
        }
        s.trim_end().to_string()
    }

    fn has_read_on(&self, a: usize, loc: usize, ch: usize) -> bool {
        self.ix.automata[a]
            .transitions
            .iter()
            .any(|t| t.from == loc && matches!(t.op, COp::Read { ch: c, .. } if c == ch))
    }

    /// Initial controls in which `active` owns context 0.
    pub fn initial_with_active(&self, cfg: &Configuration, active: usize) -> MpsControl {
        MpsControl {
            locs: cfg.locs.clone(),
            vals: cfg.vals.clone(),
            globals: cfg.globals.clone(),
            deco: Deco::Plain,
            active,
            ctx: 0,
            lock: None,
            written: 0,
            filled: 0,
            elapse: None,
        }
    }
}

impl Multistack for Bmps {
    type Control = MpsControl;
    type Sym = StackSym;
    type Label = BmpsLabel;

    fn num_stacks(&self) -> usize {
        2 * self.ix.channels.len()
    }

    fn initial(&self) -> Vec<MpsControl> {
        let mut out = Vec::new();
        for cfg in crate::semantics::initial_configurations(&self.ix) {
            for a in 0..self.ix.automata.len() {
                out.push(self.initial_with_active(&cfg, a));
            }
        }
        out
    }

    fn successors(
        &self,
        c: &MpsControl,
        stacks: &[Vec<StackSym>],
    ) -> Vec<(BmpsLabel, StackAction<StackSym>, MpsControl)> {
        let ix = &self.ix;
        let k = self.k;
        let mut out = Vec::new();
        let with = |f: &dyn Fn(&mut MpsControl)| {
            let mut n = c.clone();
            f(&mut n);
            n
        };

        if let Some(s) = c.elapse {
            out.push((
                BmpsLabel::ElapsePush { stack: s },
                StackAction::Push(s, StackSym::Time(1)),
                with(&|n| n.elapse = self.next_elapse(n, s + 1)),
            ));
            return out;
        }

        let act = c.active;
        let aut = &ix.automata[act];
        match c.deco {
            Deco::W { ch, tag } => {
                let w = w_stack(ch);
                match stacks[w].last() {
                    Some(&StackSym::Time(t)) => out.push((
                        BmpsLabel::WTime { ch },
                        StackAction::Pop(w, StackSym::Time(t)),
                        with(&|n| {
                            n.deco = Deco::W {
                                ch,
                                tag: cap(add_sat(tag, t), k),
                            }
                        }),
                    )),
                    Some(&StackSym::Msg(m)) => out.push((
                        BmpsLabel::WMsg { ch },
                        StackAction::Pop(w, StackSym::Msg(m)),
                        with(&|n| n.deco = Deco::WMsg { ch, tag, msg: m }),
                    )),
                    Some(StackSym::Pair(..)) => {}
                    None => out.push((
                        BmpsLabel::EmptyW { ch },
                        StackAction::EmptyTest(w),
                        with(&|n| {
                            n.deco = Deco::R { ch, tag: 0 };
                            n.filled &= !(1 << w);
                        }),
                    )),
                }
                return out;
            }
            Deco::WMsg { ch, tag, msg } => {
                out.push((
                    BmpsLabel::Transfer { ch },
                    StackAction::Push(r_stack(ch), StackSym::Pair(msg, tag)),
                    with(&|n| {
                        n.deco = Deco::W { ch, tag };
                        n.filled |= 1 << r_stack(ch);
                    }),
                ));
                return out;
            }
            Deco::R { ch, tag } => {
                let r = r_stack(ch);
                let loc = c.locs[act];
                match stacks[r].last() {
                    Some(&StackSym::Time(t)) => out.push((
                        BmpsLabel::PopTime { ch },
                        StackAction::Pop(r, StackSym::Time(t)),
                        with(&|n| {
                            n.deco = Deco::R {
                                ch,
                                tag: cap(add_sat(tag, t), k),
                            }
                        }),
                    )),
                    Some(&StackSym::Pair(m, t)) => {
                        let age = cap(add_sat(tag, t), k);
                        for (ti, tr) in aut.transitions.iter().enumerate() {
                            let COp::Read {
                                ch: tc,
                                msg,
                                age: iv,
                            } = tr.op
                            else {
                                continue;
                            };
                            if tr.from != loc
                                || tc != ch
                                || msg != m
                                || !iv.contains(age)
                                || !tr.enabled(&c.vals[act], &c.globals)
                            {
                                continue;
                            }
                            out.push((
                                BmpsLabel::Read {
                                    automaton: act,
                                    transition: ti,
                                },
                                StackAction::Pop(r, StackSym::Pair(m, t)),
                                with(&|n| {
                                    n.locs[act] = tr.to;
                                    tr.apply_resets(&mut n.vals[act], &mut n.globals);
                                }),
                            ));
                        }
                    }
                    Some(StackSym::Msg(_)) => {}
                    None => out.push((
                        BmpsLabel::EmptyR { ch },
                        StackAction::EmptyTest(r),
                        with(&|n| {
                            n.deco = Deco::W { ch, tag: 0 };
                            n.filled &= !(1 << r);
                        }),
                    )),
                }
                let keep = tag > 0 && c.filled & (1 << r) != 0;
                out.push((
                    BmpsLabel::ExitRead { automaton: act },
                    if keep {
                        StackAction::Push(r, StackSym::Time(tag))
                    } else {
                        StackAction::None
                    },
                    with(&|n| n.deco = Deco::Plain),
                ));
            }
            Deco::Plain => {}
        }

        // Time elapse, unless a transfer is under way.
        out.push((
            BmpsLabel::ElapseStart,
            StackAction::None,
            with(&|n| {
                for vals in &mut n.vals {
                    for v in vals.iter_mut() {
                        *v = cap(add_sat(*v, 1), k);
                    }
                }
                for g in &mut n.globals {
                    *g = cap(add_sat(*g, 1), k);
                }
                n.elapse = self.next_elapse(n, 0);
            }),
        ));

        // Internal moves of any automaton not in the middle of a read.
        for (ai, a) in ix.automata.iter().enumerate() {
            if ai == act && c.deco != Deco::Plain {
                continue;
            }
            for (ti, tr) in a.transitions.iter().enumerate() {
                if tr.from != c.locs[ai] || !tr.enabled(&c.vals[ai], &c.globals) {
                    continue;
                }
                match tr.op {
                    COp::Nop => out.push((
                        BmpsLabel::Nop {
                            automaton: ai,
                            transition: ti,
                        },
                        StackAction::None,
                        with(&|n| {
                            n.locs[ai] = tr.to;
                            tr.apply_resets(&mut n.vals[ai], &mut n.globals);
                        }),
                    )),
                    COp::Write { ch, msg } if ai == act && c.lock != Some(ch) => out.push((
                        BmpsLabel::Write {
                            automaton: ai,
                            transition: ti,
                        },
                        StackAction::Push(w_stack(ch), StackSym::Msg(msg)),
                        with(&|n| {
                            n.locs[ai] = tr.to;
                            tr.apply_resets(&mut n.vals[ai], &mut n.globals);
                            n.written |= 1 << ch;
                            n.filled |= 1 << w_stack(ch);
                        }),
                    )),
                    _ => {}
                }
            }
        }

        if c.deco != Deco::Plain {
            return out;
        }

        // Start reading a channel.
        for ch in 0..ix.channels.len() {
            if ix.channels[ch].to != act
                || c.lock.is_some_and(|l| l != ch)
                || c.written & (1 << ch) != 0
                || !self.has_read_on(act, c.locs[act], ch)
            {
                continue;
            }
            out.push((
                BmpsLabel::EnterRead { automaton: act, ch },
                StackAction::None,
                with(&|n| {
                    n.lock = Some(ch);
                    n.deco = Deco::R { ch, tag: 0 };
                }),
            ));
        }

        // Context switch.
        if c.ctx < self.bound {
            for to in 0..ix.automata.len() {
                out.push((
                    BmpsLabel::Switch { to },
                    StackAction::None,
                    with(&|n| {
                        n.active = to;
                        n.ctx += 1;
                        n.lock = None;
                        n.written = 0;
                    }),
                ));
            }
        }
        out
    }
}

/// The network run underlying a multistack run: discrete moves keep their
/// transition, each elapse start is one time unit, protocol steps vanish.
pub fn project_to_cta(
    bmps: &Bmps,
    trace: &PhaseTrace<MpsControl, BmpsLabel, StackSym>,
) -> (Configuration, Vec<Move>) {
    let c = &trace.init;
    let init = Configuration {
        locs: c.locs.clone(),
        vals: c.vals.clone(),
        globals: c.globals.clone(),
        chans: vec![Vec::new(); bmps.ix.channels.len()],
    };
    let moves = trace
        .steps
        .iter()
        .filter_map(|s| match s.label {
            BmpsLabel::Nop {
                automaton,
                transition,
            }
            | BmpsLabel::Write {
                automaton,
                transition,
            }
            | BmpsLabel::Read {
                automaton,
                transition,
            } => Some(Move::Discrete {
                automaton,
                transition,
            }),
            BmpsLabel::ElapseStart => Some(Move::Elapse(1)),
            _ => None,
        })
        .collect();
    (init, moves)
}

/// Whether a control is between protocol steps, so that it stands for a
/// network configuration.
pub fn is_settled(c: &MpsControl) -> bool {
    c.deco == Deco::Plain && c.elapse.is_none()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReconstructError {
    #[error("symbol {0:?} cannot occur on stack {1}")]
    Alphabet(StackSym, String),
}

/// Recovers the content of channel `ch` (newest first) from its stacks and
/// the reader's control, without modifying them.
pub fn reconstruct_channel(
    bmps: &Bmps,
    control: &MpsControl,
    stacks: &[Vec<StackSym>],
    ch: usize,
) -> Result<TimedWord, ReconstructError> {
    let k = bmps.k;
    let reader = bmps.ix.channels[ch].to;
    let mine = |d: &Deco| match *d {
        Deco::R { ch: c, .. } | Deco::W { ch: c, .. } | Deco::WMsg { ch: c, .. } => c == ch,
        Deco::Plain => false,
    };
    let deco = if control.active == reader && mine(&control.deco) {
        control.deco
    } else {
        Deco::Plain
    };
    let (w_tag, r_tag) = match deco {
        Deco::R { tag, .. } => (0, tag),
        Deco::W { tag, .. } | Deco::WMsg { tag, .. } => (tag, 0),
        Deco::Plain => (0, 0),
    };

    let mut w1 = Vec::new();
    let mut acc = w_tag;
    for s in stacks[w_stack(ch)].iter().rev() {
        match *s {
            StackSym::Time(t) => acc = cap(add_sat(acc, t), k),
            StackSym::Msg(m) => w1.push((m, acc)),
            other => {
                return Err(ReconstructError::Alphabet(
                    other,
                    bmps.stack_name(w_stack(ch)),
                ))
            }
        }
    }
    // Read stack from the top: oldest message first.
    let mut w2 = Vec::new();
    let mut acc = r_tag;
    for s in stacks[r_stack(ch)].iter().rev() {
        match *s {
            StackSym::Time(t) => acc = cap(add_sat(acc, t), k),
            StackSym::Pair(m, t) => w2.push((m, cap(add_sat(acc, t), k))),
            other => {
                return Err(ReconstructError::Alphabet(
                    other,
                    bmps.stack_name(r_stack(ch)),
                ))
            }
        }
    }
    w2.reverse();
    let word = match deco {
        // Mid-transfer the read stack holds the newer messages.
        Deco::W { .. } => w2.into_iter().chain(w1).collect(),
        Deco::WMsg { msg, tag, .. } => w2.into_iter().chain([(msg, tag)]).chain(w1).collect(),
        _ => w1.into_iter().chain(w2).collect(),
    };
    Ok(word)
}

/// A multistack run induced by a network run.
#[derive(Clone, Debug)]
pub struct InducedRun {
    pub trace: PhaseTrace<MpsControl, BmpsLabel, StackSym>,
    /// Control and stacks at each network configuration (one more entry
    /// than network steps).
    pub points: Vec<(MpsControl, Vec<Vec<StackSym>>)>,
}

/// Translates a network run, annotated with contexts, into a run of `bmps`.
///
/// Every multistack step is checked against the enabled successors, so a
/// successful translation is itself a replay certificate.
pub fn simulate_cta_trace(
    bmps: &Bmps,
    init: &Configuration,
    moves: &[Move],
    contexts: &ContextAnnotation,
) -> Result<InducedRun, String> {
    let ix = &bmps.ix;
    let first_active = moves
        .iter()
        .find_map(|m| channel_action(ix, *m))
        .map_or(0, |a| match a {
            ChannelAction::Write { automaton, .. } | ChannelAction::Read { automaton, .. } => {
                automaton
            }
        });
    let init_ctl = bmps.initial_with_active(init, first_active);
    let mut sim = Sim {
        bmps,
        control: init_ctl.clone(),
        stacks: vec![Vec::new(); bmps.num_stacks()],
        steps: Vec::new(),
    };
    let mut points = vec![(sim.control.clone(), sim.stacks.clone())];
    let mut ctx = 0;
    for (i, m) in moves.iter().enumerate() {
        if contexts.per_step.get(i).copied().unwrap_or(ctx) > ctx {
            ctx = contexts.per_step[i];
            let to = match channel_action(ix, *m) {
                Some(ChannelAction::Write { automaton, .. })
                | Some(ChannelAction::Read { automaton, .. }) => automaton,
                None => return Err(format!("step {i}: context switch without channel action")),
            };
            sim.take(BmpsLabel::Switch { to })?;
        }
        match *m {
            Move::Elapse(t) => {
                for _ in 0..t {
                    sim.take(BmpsLabel::ElapseStart)?;
                    while let Some(s) = sim.control.elapse {
                        sim.take(BmpsLabel::ElapsePush { stack: s })?;
                    }
                }
            }
            Move::Discrete {
                automaton,
                transition,
            } => match ix.automata[automaton].transitions[transition].op {
                COp::Nop => sim.take(BmpsLabel::Nop {
                    automaton,
                    transition,
                })?,
                COp::Write { .. } => sim.take(BmpsLabel::Write {
                    automaton,
                    transition,
                })?,
                COp::Read { ch, .. } => sim.read(automaton, transition, ch)?,
            },
        }
        points.push((sim.control.clone(), sim.stacks.clone()));
    }
    Ok(InducedRun {
        trace: PhaseTrace::new(init_ctl, sim.steps),
        points,
    })
}

struct Sim<'a> {
    bmps: &'a Bmps,
    control: MpsControl,
    stacks: Vec<Vec<StackSym>>,
    steps: Vec<(BmpsLabel, StackAction<StackSym>)>,
}

impl Sim<'_> {
    fn take(&mut self, label: BmpsLabel) -> Result<(), String> {
        let found = self
            .bmps
            .successors(&self.control, &self.stacks)
            .into_iter()
            .find(|(l, _, _)| *l == label);
        let Some((l, action, next)) = found else {
            return Err(format!(
                "{label:?} not enabled at {}",
                self.bmps.render_control(&self.control)
            ));
        };
        if !apply_action(&mut self.stacks, &action) {
            return Err(format!("{label:?}: stack action failed"));
        }
        self.control = next;
        self.steps.push((l, action));
        Ok(())
    }

    fn read(&mut self, automaton: usize, transition: usize, ch: usize) -> Result<(), String> {
        self.take(BmpsLabel::EnterRead { automaton, ch })?;
        let (r, w) = (r_stack(ch), w_stack(ch));
        loop {
            match self.control.deco {
                Deco::R { .. } => match self.stacks[r].last() {
                    Some(StackSym::Time(_)) => self.take(BmpsLabel::PopTime { ch })?,
                    Some(StackSym::Pair(..)) => {
                        self.take(BmpsLabel::Read {
                            automaton,
                            transition,
                        })?;
                        break;
                    }
                    Some(StackSym::Msg(_)) => return Err("message symbol on read stack".into()),
                    None => self.take(BmpsLabel::EmptyR { ch })?,
                },
                Deco::W { .. } => match self.stacks[w].last() {
                    Some(StackSym::Time(_)) => self.take(BmpsLabel::WTime { ch })?,
                    Some(StackSym::Msg(_)) => {
                        self.take(BmpsLabel::WMsg { ch })?;
                        self.take(BmpsLabel::Transfer { ch })?;
                    }
                    Some(StackSym::Pair(..)) => return Err("pair symbol on write stack".into()),
                    None => {
                        if self.stacks[r].is_empty() {
                            return Err(format!("read from empty channel {ch}"));
                        }
                        self.take(BmpsLabel::EmptyW { ch })?;
                    }
                },
                _ => return Err("unexpected decoration during read".into()),
            }
        }
        self.take(BmpsLabel::ExitRead { automaton })
    }
}

/// Control graph reachable when every stack may show any symbol on top,
/// truncated after `max_nodes` controls.
pub fn control_graph(
    bmps: &Bmps,
    max_nodes: usize,
) -> (Vec<MpsControl>, Vec<(usize, usize, String)>) {
    let k = bmps.k;
    let n_msgs = bmps.ix.alphabet.len();
    let mut tops: Vec<Option<StackSym>> = vec![None];
    let times: Vec<u32> = (1..=k).chain([crate::model::INF]).collect();
    for &t in &times {
        tops.push(Some(StackSym::Time(t)));
    }
    for m in 0..n_msgs {
        tops.push(Some(StackSym::Msg(m)));
        for t in (0..=k).chain([crate::model::INF]) {
            tops.push(Some(StackSym::Pair(m, t)));
        }
    }
    let mut index: HashMap<MpsControl, usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut queue = VecDeque::new();
    for c in bmps.initial() {
        if !index.contains_key(&c) {
            index.insert(c.clone(), nodes.len());
            queue.push_back(nodes.len());
            nodes.push(c);
        }
    }
    let mut edges = HashSet::new();
    let ns = bmps.num_stacks();
    while let Some(i) = queue.pop_front() {
        let c = nodes[i].clone();
        // Only the stack the control is about to inspect matters.
        let inspected = match c.deco {
            Deco::R { ch, .. } => Some(r_stack(ch)),
            Deco::W { ch, .. } => Some(w_stack(ch)),
            _ => None,
        };
        let variants: Vec<Vec<Vec<StackSym>>> = match inspected {
            None => vec![vec![Vec::new(); ns]],
            Some(s) => tops
                .iter()
                .map(|t| {
                    let mut st = vec![Vec::new(); ns];
                    if let Some(x) = t {
                        st[s].push(*x);
                    }
                    st
                })
                .collect(),
        };
        for st in variants {
            for (label, _, next) in bmps.successors(&c, &st) {
                let j = match index.get(&next) {
                    Some(&j) => j,
                    None => {
                        if nodes.len() >= max_nodes {
                            continue;
                        }
                        let j = nodes.len();
                        index.insert(next.clone(), j);
                        nodes.push(next);
                        queue.push_back(j);
                        j
                    }
                };
                edges.insert((i, j, format!("{label:?}")));
            }
        }
    }
    let mut edges: Vec<_> = edges.into_iter().collect();
    edges.sort();
    (nodes, edges)
}

pub fn control_graph_dot(bmps: &Bmps, max_nodes: usize) -> String {
    let (nodes, edges) = control_graph(bmps, max_nodes);
    let mut out = String::from("digraph bmps {\n");
    for (i, c) in nodes.iter().enumerate() {
        let _ = writeln!(
            out,
            "  n{i} [label=\"{}\", shape=box];",
            bmps.render_control(c)
        );
    }
    for (a, b, l) in edges {
        let _ = writeln!(out, "  n{a} -> n{b} [label=\"{}\"];", l.replace('"', "'"));
    }
    out.push_str("}\n");
    out
}
