//! Region automata of single discrete timed automata.
//!
//! Clock values above the cap collapse to `∞`, which satisfies only lower
//! bounds. The construction is on-the-fly from the initial states.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{show_val, Automaton, Rel, INF};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegionError {
    #[error("constant {bound} on clock {clock} exceeds K={k}")]
    ConstantTooLarge { clock: String, bound: u32, k: u32 },
    #[error("unknown clock {0}")]
    UnknownClock(String),
    #[error("unknown location {0}")]
    UnknownLocation(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionState {
    pub loc: usize,
    pub val: Vec<u32>,
}

/// Adds one to every clock, sending values beyond the per-clock cap to `∞`.
pub fn tick_val(val: &[u32], caps: &[u32]) -> Vec<u32> {
    val.iter()
        .zip(caps)
        .map(|(&v, &k)| if v == INF || v >= k { INF } else { v + 1 })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionEdge {
    pub from: usize,
    pub to: usize,
    pub transition: usize,
    pub label: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RegionMove {
    Tick,
    Edge(usize),
}

#[derive(Clone, Debug)]
struct GuardAtom {
    clock: usize,
    rel: Rel,
    bound: u32,
}

#[derive(Clone, Debug)]
struct RTrans {
    from: usize,
    guard: Vec<GuardAtom>,
    resets: Vec<usize>,
    to: usize,
    label: String,
}

#[derive(Clone, Debug)]
pub struct RegionAutomaton {
    pub automaton: String,
    pub locations: Vec<String>,
    pub clocks: Vec<String>,
    pub caps: Vec<u32>,
    pub states: Vec<RegionState>,
    pub initial: Vec<usize>,
    pub ticks: Vec<(usize, usize)>,
    pub edges: Vec<RegionEdge>,
}

/// Builds the reachable region automaton of `a` with every clock capped at `k`.
pub fn build_region_automaton(a: &Automaton, k: u32) -> Result<RegionAutomaton, RegionError> {
    build_region_automaton_with_caps(a, &vec![k; a.clocks.len()])
}

/// As [`build_region_automaton`], with one cap per clock.
pub fn build_region_automaton_with_caps(
    a: &Automaton,
    caps: &[u32],
) -> Result<RegionAutomaton, RegionError> {
    let loc = |l: &String| {
        a.locations
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| RegionError::UnknownLocation(l.clone()))
    };
    let clock = |c: &String| {
        a.clocks
            .iter()
            .position(|x| x == c)
            .ok_or_else(|| RegionError::UnknownClock(c.clone()))
    };
    let mut trans = Vec::new();
    for t in &a.transitions {
        let mut guard = Vec::new();
        for g in &t.guard {
            let c = clock(&g.clock)?;
            if g.bound > caps[c] {
                return Err(RegionError::ConstantTooLarge {
                    clock: g.clock.clone(),
                    bound: g.bound,
                    k: caps[c],
                });
            }
            guard.push(GuardAtom {
                clock: c,
                rel: g.rel,
                bound: g.bound,
            });
        }
        trans.push(RTrans {
            from: loc(&t.from)?,
            guard,
            resets: t.resets.iter().map(clock).collect::<Result<_, _>>()?,
            to: loc(&t.to)?,
            label: t.op.label(),
        });
    }

    let mut states: Vec<RegionState> = Vec::new();
    let mut index: HashMap<RegionState, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut intern =
        |s: RegionState, states: &mut Vec<RegionState>, queue: &mut VecDeque<usize>| {
            *index.entry(s.clone()).or_insert_with(|| {
                states.push(s);
                queue.push_back(states.len() - 1);
                states.len() - 1
            })
        };
    let mut initial = Vec::new();
    for l in &a.initial {
        let s = RegionState {
            loc: loc(l)?,
            val: vec![0; a.clocks.len()],
        };
        let i = intern(s, &mut states, &mut queue);
        if !initial.contains(&i) {
            initial.push(i);
        }
    }
    let mut ticks = Vec::new();
    let mut edges = Vec::new();
    while let Some(i) = queue.pop_front() {
        let s = states[i].clone();
        let t = RegionState {
            loc: s.loc,
            val: tick_val(&s.val, caps),
        };
        let j = intern(t, &mut states, &mut queue);
        ticks.push((i, j));
        for (ti, tr) in trans.iter().enumerate() {
            if tr.from != s.loc
                || !tr
                    .guard
                    .iter()
                    .all(|g| g.rel.holds(s.val[g.clock], g.bound))
            {
                continue;
            }
            let mut val = s.val.clone();
            for &r in &tr.resets {
                val[r] = 0;
            }
            let j = intern(RegionState { loc: tr.to, val }, &mut states, &mut queue);
            edges.push(RegionEdge {
                from: i,
                to: j,
                transition: ti,
                label: tr.label.clone(),
            });
        }
    }
    Ok(RegionAutomaton {
        automaton: a.id.clone(),
        locations: a.locations.clone(),
        clocks: a.clocks.clone(),
        caps: caps.to_vec(),
        states,
        initial,
        ticks,
        edges,
    })
}

impl RegionAutomaton {
    pub fn state_label(&self, i: usize) -> String {
        let s = &self.states[i];
        let vals: Vec<String> = s.val.iter().map(|v| show_val(*v)).collect();
        if vals.is_empty() {
            format!("({})", self.locations[s.loc])
        } else {
            format!("({},{})", self.locations[s.loc], vals.join(","))
        }
    }

    pub fn find_state(&self, loc: &str, val: &[u32]) -> Option<usize> {
        let l = self.locations.iter().position(|x| x == loc)?;
        self.states.iter().position(|s| s.loc == l && s.val == val)
    }

    pub fn to_dot(&self) -> String {
        let mut out = format!("digraph \"region_{}\" {{\n", self.automaton);
        for i in 0..self.states.len() {
            let shape = if self.initial.contains(&i) {
                "doublecircle"
            } else {
                "circle"
            };
            let _ = writeln!(
                out,
                "  n{i} [label=\"{}\", shape={shape}];",
                self.state_label(i)
            );
        }
        for &(a, b) in &self.ticks {
            let _ = writeln!(out, "  n{a} -> n{b} [label=\"tick\", style=dashed];");
        }
        for e in &self.edges {
            let _ = writeln!(out, "  n{} -> n{} [label=\"{}\"];", e.from, e.to, e.label);
        }
        out.push_str("}\n");
        out
    }
}

/// Breadth-first search for a region state whose location is in `finals`.
///
/// Returns the shortest witness as a sequence of ticks and discrete edges
/// (by transition index), or `None` when the language is empty.
pub fn region_nonempty(reg: &RegionAutomaton, finals: &[usize]) -> Option<Vec<RegionMove>> {
    let n = reg.states.len();
    let mut succ: Vec<Vec<(RegionMove, usize)>> = vec![Vec::new(); n];
    for &(a, b) in &reg.ticks {
        succ[a].push((RegionMove::Tick, b));
    }
    for e in &reg.edges {
        succ[e.from].push((RegionMove::Edge(e.transition), e.to));
    }
    let mut parent: Vec<Option<(usize, RegionMove)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    for &i in &reg.initial {
        seen[i] = true;
        queue.push_back(i);
    }
    while let Some(i) = queue.pop_front() {
        if finals.contains(&reg.states[i].loc) {
            let mut path = Vec::new();
            let mut cur = i;
            while let Some((p, m)) = parent[cur] {
                path.push(m);
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        for &(m, j) in &succ[i] {
            if !seen[j] {
                seen[j] = true;
                parent[j] = Some((i, m));
                queue.push_back(j);
            }
        }
    }
    None
}
