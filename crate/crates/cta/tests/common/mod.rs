//! Random instance generators and brute-force oracles shared by the
//! integration tests.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, VecDeque};

use cta::gadgets::{ChannelAutomaton, Instr, SelfOp, SelfTransition, TwoCounterMachine};
use cta::model::{Automaton, ChannelOp, Interval, Network, Rel, Transition};
use rand::seq::SliceRandom;
use rand::Rng;

pub const RELS: [Rel; 5] = [Rel::Lt, Rel::Le, Rel::Eq, Rel::Gt, Rel::Ge];

pub fn loc_names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn maybe_guard<R: Rng>(rng: &mut R, t: Transition, clock: &str, k: u32) -> Transition {
    if rng.gen_bool(0.5) {
        t.guard(clock, *RELS.choose(rng).unwrap(), rng.gen_range(0..=k))
    } else {
        t
    }
}

fn maybe_reset<R: Rng>(rng: &mut R, t: Transition, clock: &str) -> Transition {
    if rng.gen_bool(0.3) {
        t.reset(clock)
    } else {
        t
    }
}

/// A message-age interval with endpoints at most `k`.
pub fn random_interval<R: Rng>(rng: &mut R, k: u32) -> Interval {
    let l = rng.gen_range(0..=k);
    match rng.gen_range(0..3) {
        0 => Interval::closed(l, rng.gen_range(l..=k)),
        1 => Interval::at_least(l),
        _ => Interval::above(l),
    }
}

/// Writer `A` and reader `B` over channel `c`, one clock each, constants at
/// most `k`.
pub fn random_two_chain<R: Rng>(rng: &mut R, max_locs: usize, k: u32, msgs: usize) -> Network {
    let alphabet: Vec<String> = ["a", "b"][..msgs].iter().map(|s| s.to_string()).collect();
    let build = |rng: &mut R, id: &str, prefix: &str, clock: &str, writer: bool| {
        let locs = loc_names(prefix, rng.gen_range(1..=max_locs));
        let refs: Vec<&str> = locs.iter().map(String::as_str).collect();
        let mut a = Automaton::new(id, &refs, &locs[0], &[clock]);
        for _ in 0..rng.gen_range(1..=5) {
            let from = locs.choose(rng).unwrap();
            let to = locs.choose(rng).unwrap();
            let mut t = Transition::new(from, to);
            if rng.gen_bool(0.65) {
                let m = alphabet.choose(rng).unwrap();
                t = t.op(if writer {
                    ChannelOp::write("c", m)
                } else {
                    ChannelOp::read("c", m, random_interval(rng, k))
                });
            }
            t = maybe_guard(rng, t, clock, k);
            a = a.with(maybe_reset(rng, t, clock));
        }
        a
    };
    let a = build(rng, "A", "s", "x", true);
    let b = build(rng, "B", "q", "y", false);
    Network {
        automata: vec![a, b],
        global_clocks: Vec::new(),
        channels: Vec::new(),
        alphabet: alphabet.clone(),
    }
    .channel("c", "A", "B")
}

/// Two or three automata with one clock each and random channels between
/// them.
pub fn random_network<R: Rng>(rng: &mut R) -> Network {
    let n = rng.gen_range(2..=3);
    let k = rng.gen_range(1..=2);
    let ids: Vec<String> = (1..=n).map(|i| format!("A{i}")).collect();
    let alphabet = vec!["a".to_string(), "b".to_string()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                pairs.push((i, j));
            }
        }
    }
    pairs.shuffle(rng);
    let n_ch = rng.gen_range(1..=pairs.len().min(3));
    let chans: Vec<(String, usize, usize)> = pairs[..n_ch]
        .iter()
        .map(|&(i, j)| (format!("c{}{}", i + 1, j + 1), i, j))
        .collect();
    let mut automata = Vec::new();
    for (ai, id) in ids.iter().enumerate() {
        let locs = loc_names(&format!("l{}_", ai + 1), rng.gen_range(1..=3));
        let refs: Vec<&str> = locs.iter().map(String::as_str).collect();
        let clock = format!("x{}", ai + 1);
        let mut a = Automaton::new(id, &refs, &locs[0], &[clock.as_str()]);
        let outs: Vec<&String> = chans.iter().filter(|c| c.1 == ai).map(|c| &c.0).collect();
        let ins: Vec<&String> = chans.iter().filter(|c| c.2 == ai).map(|c| &c.0).collect();
        for _ in 0..rng.gen_range(2..=6) {
            let mut t = Transition::new(locs.choose(rng).unwrap(), locs.choose(rng).unwrap());
            let m = alphabet.choose(rng).unwrap();
            match rng.gen_range(0..3) {
                0 if !outs.is_empty() => t = t.op(ChannelOp::write(outs.choose(rng).unwrap(), m)),
                1 if !ins.is_empty() => {
                    t = t.op(ChannelOp::read(
                        ins.choose(rng).unwrap(),
                        m,
                        random_interval(rng, k),
                    ))
                }
                _ => {}
            }
            t = maybe_guard(rng, t, &clock, k);
            a = a.with(maybe_reset(rng, t, &clock));
        }
        automata.push(a);
    }
    let mut net = Network {
        automata,
        global_clocks: Vec::new(),
        channels: Vec::new(),
        alphabet,
    };
    for (id, i, j) in &chans {
        net = net.channel(id, &ids[*i], &ids[*j]);
    }
    net
}

/// A channel-free automaton with clock `x`.
pub fn random_single<R: Rng>(rng: &mut R, max_locs: usize, k: u32) -> Automaton {
    let locs = loc_names("l", rng.gen_range(1..=max_locs));
    let refs: Vec<&str> = locs.iter().map(String::as_str).collect();
    let mut a = Automaton::new("A", &refs, &locs[0], &["x"]);
    for _ in 0..rng.gen_range(1..=6) {
        let t = Transition::new(locs.choose(rng).unwrap(), locs.choose(rng).unwrap());
        let t = maybe_guard(rng, t, "x", k);
        a = a.with(maybe_reset(rng, t, "x"));
    }
    a
}

pub fn random_channel_automaton<R: Rng>(rng: &mut R) -> ChannelAutomaton {
    let states = loc_names("p", rng.gen_range(1..=3));
    let alphabet: Vec<String> = ["a", "b"][..rng.gen_range(1..=2)]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let transitions = (0..rng.gen_range(1..=5))
        .map(|_| {
            let m = alphabet.choose(rng).unwrap().clone();
            SelfTransition {
                from: states.choose(rng).unwrap().clone(),
                op: match rng.gen_range(0..5) {
                    0 => SelfOp::Nop,
                    1 | 2 => SelfOp::Write(m),
                    _ => SelfOp::Read(m),
                },
                to: states.choose(rng).unwrap().clone(),
            }
        })
        .collect();
    ChannelAutomaton {
        initial: states[0].clone(),
        states,
        alphabet,
        transitions,
    }
}

/// Whether some subset of `set` sums to `c`, by enumeration.
pub fn subset_sum_oracle(set: &[u32], c: u32) -> bool {
    (0u32..1 << set.len()).any(|mask| {
        set.iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, v)| v)
            .sum::<u32>()
            == c
    })
}

/// Cost of one step of a channel automaton in simulation moves: a time unit
/// and the edge, or for a read the request, the hub's three moves, the
/// acknowledgement and a second time unit.
pub fn selfloop_cost(op: &SelfOp) -> usize {
    match op {
        SelfOp::Nop | SelfOp::Write(_) => 2,
        SelfOp::Read(_) => 8,
    }
}

/// `(state, channel word)` pairs of `a` reachable with the channel never
/// longer than `max_channel`, each with the cheapest simulation cost.
/// Words are newest first.
pub fn channel_automaton_reach(
    a: &ChannelAutomaton,
    max_channel: usize,
) -> HashMap<(String, Vec<String>), usize> {
    let mut best: HashMap<(String, Vec<String>), usize> = HashMap::new();
    let start = (a.initial.clone(), Vec::new());
    best.insert(start.clone(), 0);
    // Costs are small integers; a bucket queue keeps this Dijkstra simple.
    let mut buckets: Vec<VecDeque<(String, Vec<String>)>> = vec![VecDeque::from([start])];
    let mut d = 0;
    while d < buckets.len() {
        while let Some(node) = buckets[d].pop_front() {
            if best[&node] < d {
                continue;
            }
            let (s, w) = &node;
            for t in a.transitions.iter().filter(|t| &t.from == s) {
                let next_w = match &t.op {
                    SelfOp::Nop => Some(w.clone()),
                    SelfOp::Write(m) => (w.len() < max_channel).then(|| {
                        let mut v = vec![m.clone()];
                        v.extend(w.iter().cloned());
                        v
                    }),
                    SelfOp::Read(m) => (w.last() == Some(m)).then(|| w[..w.len() - 1].to_vec()),
                };
                let Some(nw) = next_w else { continue };
                let nd = d + selfloop_cost(&t.op);
                let key = (t.to.clone(), nw);
                if best.get(&key).is_none_or(|&b| nd < b) {
                    best.insert(key.clone(), nd);
                    if buckets.len() <= nd {
                        buckets.resize(nd + 1, VecDeque::new());
                    }
                    buckets[nd].push_back(key);
                }
            }
        }
        d += 1;
    }
    best
}

/// Whether the machine halts from `(0,0,0)` within `max_steps` without
/// decrementing a zero counter, with the number of steps.
pub fn halting_steps(m: &TwoCounterMachine, max_steps: usize) -> Option<usize> {
    let (mut pc, mut c) = (0usize, [0u64; 2]);
    for step in 0..=max_steps {
        match m.instructions[pc] {
            Instr::Halt => return Some(step),
            Instr::Inc { counter, goto } => {
                c[counter as usize - 1] += 1;
                pc = goto;
            }
            Instr::Dec { counter, goto } => {
                let v = &mut c[counter as usize - 1];
                if *v == 0 {
                    return None;
                }
                *v -= 1;
                pc = goto;
            }
            Instr::IfZero { counter, zero, pos } => {
                pc = if c[counter as usize - 1] == 0 {
                    zero
                } else {
                    pos
                };
            }
        }
    }
    None
}

/// Counter/branch features exercised by a halting run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    #[default]
    Inc1,
    Inc2,
    Dec1,
    Dec2,
    Zero1,
    Pos1,
    Zero2,
    Pos2,
}

pub fn features(m: &TwoCounterMachine, max_steps: usize) -> BTreeSet<Feature> {
    let (mut pc, mut c) = (0usize, [0u64; 2]);
    let mut out = BTreeSet::new();
    for _ in 0..max_steps {
        match m.instructions[pc] {
            Instr::Halt => break,
            Instr::Inc { counter, goto } => {
                out.insert(if counter == 1 {
                    Feature::Inc1
                } else {
                    Feature::Inc2
                });
                c[counter as usize - 1] += 1;
                pc = goto;
            }
            Instr::Dec { counter, goto } => {
                out.insert(if counter == 1 {
                    Feature::Dec1
                } else {
                    Feature::Dec2
                });
                c[counter as usize - 1] = c[counter as usize - 1].saturating_sub(1);
                pc = goto;
            }
            Instr::IfZero { counter, zero, pos } => {
                let z = c[counter as usize - 1] == 0;
                out.insert(match (counter, z) {
                    (1, true) => Feature::Zero1,
                    (1, false) => Feature::Pos1,
                    (_, true) => Feature::Zero2,
                    (_, false) => Feature::Pos2,
                });
                pc = if z { zero } else { pos };
            }
        }
    }
    out
}

/// `c1 := a; c2 := b`, then move `c1` into `c2` and drain `c2`.
pub fn load_transfer_drain(a: usize, b: usize) -> TwoCounterMachine {
    use Instr::*;
    let mut v = Vec::new();
    for _ in 0..a {
        v.push(Inc {
            counter: 1,
            goto: v.len() + 1,
        });
    }
    for _ in 0..b {
        v.push(Inc {
            counter: 2,
            goto: v.len() + 1,
        });
    }
    let t = v.len();
    v.push(IfZero {
        counter: 1,
        zero: t + 3,
        pos: t + 1,
    });
    v.push(Dec {
        counter: 1,
        goto: t + 2,
    });
    v.push(Inc {
        counter: 2,
        goto: t,
    });
    v.push(IfZero {
        counter: 2,
        zero: t + 5,
        pos: t + 4,
    });
    v.push(Dec {
        counter: 2,
        goto: t + 3,
    });
    v.push(Halt);
    TwoCounterMachine::new(v).expect("valid machine")
}

/// A random machine over `n` instructions plus the halt.
pub fn random_machine<R: Rng>(rng: &mut R, n: usize) -> TwoCounterMachine {
    let mut v = Vec::new();
    for _ in 0..n {
        let counter = rng.gen_range(1..=2);
        let goto = rng.gen_range(0..=n);
        v.push(match rng.gen_range(0..3) {
            0 => Instr::Inc { counter, goto },
            1 => Instr::Dec { counter, goto },
            _ => Instr::IfZero {
                counter,
                zero: rng.gen_range(0..=n),
                pos: goto,
            },
        });
    }
    v.push(Instr::Halt);
    TwoCounterMachine::new(v).expect("valid machine")
}
