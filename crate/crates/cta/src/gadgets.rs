//! Reduction gadgets emitted as networks: subset sum, channel self-loops
//! simulated by global clocks, and two-counter machines simulated by three
//! one-clock automata.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Automaton, COp, ChannelOp, Interval, NetIndex, Network, Rel, Transition};
use crate::semantics::{
    explore_reach, initial_configurations, replay, ExploreBounds, ExploreOutcome, Move, Target,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GadgetError {
    #[error("machine has no instructions")]
    Empty,
    #[error("instruction {0} jumps to {1}, out of range")]
    Target(usize, usize),
    #[error("counter {1} at instruction {0} is not 1 or 2")]
    Counter(usize, u8),
    #[error("the only halt must be the last instruction (found one at {0})")]
    Halt(usize),
    #[error("machine did not halt within {0} steps")]
    NotHalted(usize),
    #[error("machine decrements a zero counter at instruction {0}")]
    Stuck(usize),
    #[error("bad program file: {0}")]
    Syntax(String),
    #[error("internal: {0}")]
    Internal(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Instr {
    Inc {
        counter: u8,
        goto: usize,
    },
    Dec {
        counter: u8,
        goto: usize,
    },
    #[serde(rename = "ifzero")]
    IfZero {
        counter: u8,
        zero: usize,
        pos: usize,
    },
    Halt,
}

/// A deterministic Minsky machine; the last instruction is the halt.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TwoCounterMachine {
    pub instructions: Vec<Instr>,
}

impl TwoCounterMachine {
    pub fn new(instructions: Vec<Instr>) -> Result<Self, GadgetError> {
        let m = TwoCounterMachine { instructions };
        m.validate()?;
        Ok(m)
    }

    pub fn parse(doc: &str) -> Result<Self, GadgetError> {
        let m: TwoCounterMachine =
            serde_json::from_str(doc).map_err(|e| GadgetError::Syntax(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("machine serializes")
    }

    pub fn halt(&self) -> usize {
        self.instructions.len() - 1
    }

    pub fn validate(&self) -> Result<(), GadgetError> {
        let n = self.instructions.len();
        if n == 0 {
            return Err(GadgetError::Empty);
        }
        for (i, ins) in self.instructions.iter().enumerate() {
            let (counter, targets) = match *ins {
                Instr::Inc { counter, goto } | Instr::Dec { counter, goto } => {
                    (Some(counter), vec![goto])
                }
                Instr::IfZero { counter, zero, pos } => (Some(counter), vec![zero, pos]),
                Instr::Halt => {
                    if i != n - 1 {
                        return Err(GadgetError::Halt(i));
                    }
                    (None, vec![])
                }
            };
            if let Some(c) = counter.filter(|c| !(1..=2).contains(c)) {
                return Err(GadgetError::Counter(i, c));
            }
            if let Some(&t) = targets.iter().find(|&&t| t >= n) {
                return Err(GadgetError::Target(i, t));
            }
        }
        if self.instructions[n - 1] != Instr::Halt {
            return Err(GadgetError::Halt(n - 1));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Run2cm {
    Halted { steps: usize, c1: u64, c2: u64 },
    Running { pc: usize, c1: u64, c2: u64 },
    Stuck { pc: usize, c1: u64, c2: u64 },
}

/// Configurations `(pc, c1, c2)` visited from `(0,0,0)`, at most
/// `max_steps + 1` of them. The flag is set when a decrement hit zero.
pub fn trace_2cm(m: &TwoCounterMachine, max_steps: usize) -> (Vec<(usize, u64, u64)>, bool) {
    let mut cfg = (0usize, 0u64, 0u64);
    let mut out = vec![cfg];
    for _ in 0..max_steps {
        let (pc, c1, c2) = cfg;
        let get = |c: u8| if c == 1 { c1 } else { c2 };
        let set = |c: u8, v: u64| if c == 1 { (v, c2) } else { (c1, v) };
        cfg = match m.instructions[pc] {
            Instr::Halt => break,
            Instr::Inc { counter, goto } => {
                let (a, b) = set(counter, get(counter) + 1);
                (goto, a, b)
            }
            Instr::Dec { counter, goto } => {
                if get(counter) == 0 {
                    return (out, true);
                }
                let (a, b) = set(counter, get(counter) - 1);
                (goto, a, b)
            }
            Instr::IfZero { counter, zero, pos } => {
                (if get(counter) == 0 { zero } else { pos }, c1, c2)
            }
        };
        out.push(cfg);
    }
    (out, false)
}

/// Interprets `m` for at most `max_steps` instructions.
pub fn run_2cm(m: &TwoCounterMachine, max_steps: usize) -> Run2cm {
    let (trace, stuck) = trace_2cm(m, max_steps);
    let &(pc, c1, c2) = trace
        .last()
        .expect("trace starts at the initial configuration");
    if stuck {
        Run2cm::Stuck { pc, c1, c2 }
    } else if m.instructions[pc] == Instr::Halt {
        Run2cm::Halted {
            steps: trace.len() - 1,
            c1,
            c2,
        }
    } else {
        Run2cm::Running { pc, c1, c2 }
    }
}

/// Accumulates locations and transitions of one automaton.
struct Builder {
    id: String,
    locations: Vec<String>,
    clocks: Vec<String>,
    transitions: Vec<Transition>,
}

impl Builder {
    fn new(id: &str, initial: &str, clocks: &[&str]) -> Self {
        Builder {
            id: id.to_string(),
            locations: vec![initial.to_string()],
            clocks: clocks.iter().map(|c| c.to_string()).collect(),
            transitions: Vec::new(),
        }
    }

    fn loc(&mut self, l: &str) {
        if !self.locations.iter().any(|x| x == l) {
            self.locations.push(l.to_string());
        }
    }

    fn add(&mut self, t: Transition) {
        self.loc(&t.from.clone());
        self.loc(&t.to.clone());
        self.transitions.push(t);
    }

    fn build(self, finals: &[String]) -> Automaton {
        Automaton {
            id: self.id,
            initial: vec![self.locations[0].clone()],
            locations: self.locations,
            finals: finals.to_vec(),
            clocks: self.clocks,
            transitions: self.transitions,
        }
    }
}

fn push_msg(alphabet: &mut Vec<String>, m: &str) {
    if !alphabet.iter().any(|x| x == m) {
        alphabet.push(m.to_string());
    }
}

/// Subset-sum instance as a writer/reader pair.
///
/// The clockless writer emits one message per element. The reader spends
/// exactly `S[i]` time units before reading message `i` when the element is
/// chosen, and no time when it is skipped; `r_f` is reachable iff some
/// subset sums to `c`.
pub fn gen_subset_sum(set: &[u32], c: u32) -> Network {
    let n = set.len();
    let s_locs: Vec<String> = (1..=n + 1).map(|i| format!("s_{i}")).collect();
    let mut r_locs: Vec<String> = (1..=n + 1).map(|i| format!("r_{i}")).collect();
    r_locs.push("r_f".to_string());
    let msgs: Vec<String> = (1..=n).map(|i| format!("a{i}")).collect();

    let mut a = Automaton::new(
        "A",
        &s_locs.iter().map(String::as_str).collect::<Vec<_>>(),
        "s_1",
        &[],
    );
    for i in 0..n {
        a = a.with(Transition::new(&s_locs[i], &s_locs[i + 1]).op(ChannelOp::write("c", &msgs[i])));
    }

    let mut b = Automaton::new(
        "B",
        &r_locs.iter().map(String::as_str).collect::<Vec<_>>(),
        "r_1",
        &["x", "y"],
    );
    b.finals = vec!["r_f".to_string()];
    for (i, &v) in set.iter().enumerate() {
        let read = ChannelOp::read("c", &msgs[i], Interval::at_least(0));
        b = b
            .with(
                Transition::new(&r_locs[i], &r_locs[i + 1])
                    .guard("x", Rel::Eq, v)
                    .op(read.clone())
                    .reset("x"),
            )
            .with(
                Transition::new(&r_locs[i], &r_locs[i + 1])
                    .guard("x", Rel::Eq, 0)
                    .op(read),
            );
    }
    b = b.with(
        Transition::new(&r_locs[n], "r_f")
            .guard("x", Rel::Eq, 0)
            .guard("y", Rel::Eq, c),
    );

    Network {
        automata: vec![a, b],
        global_clocks: Vec::new(),
        channels: Vec::new(),
        alphabet: msgs,
    }
    .channel("c", "A", "B")
}

/// Operation of an untimed automaton on its own channel.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelfOp {
    Nop,
    Write(String),
    Read(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfTransition {
    pub from: String,
    pub op: SelfOp,
    pub to: String,
}

/// An untimed automaton with one FIFO channel to itself.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelAutomaton {
    pub states: Vec<String>,
    pub initial: String,
    pub alphabet: Vec<String>,
    pub transitions: Vec<SelfTransition>,
}

/// Simulates the self-loop channel of `a` with a second automaton and
/// global clocks `x_m`, `y_m` per message.
///
/// `A1` copies `a`, spending one time unit per step. To read `m` it resets
/// `x_m`; the hub automaton `A2` sees `x_m = 0`, reads `m` from `c12` and
/// resets `y_m`, which `A1` checks before completing the step.
pub fn gen_selfloop_sim(a: &ChannelAutomaton) -> Network {
    let mut a1 = Builder::new("A1", &a.initial, &["x1"]);
    for s in &a.states {
        a1.loc(s);
    }
    let step = |from: &str, to: &str| {
        Transition::new(from, to)
            .guard("x1", Rel::Eq, 1)
            .reset("x1")
    };
    let mut read_msgs: Vec<String> = Vec::new();
    for (i, t) in a.transitions.iter().enumerate() {
        match &t.op {
            SelfOp::Nop => a1.add(step(&t.from, &t.to)),
            SelfOp::Write(m) => a1.add(step(&t.from, &t.to).op(ChannelOp::write("c12", m))),
            SelfOp::Read(m) => {
                let ask = format!("{}__rd{i}_{m}", t.from);
                let ack = format!("{ask}_ack");
                a1.add(step(&t.from, &ask).reset(&format!("x_{m}")));
                a1.add(Transition::new(&ask, &ack).guard(&format!("y_{m}"), Rel::Eq, 0));
                a1.add(step(&ack, &t.to));
                push_msg(&mut read_msgs, m);
            }
        }
    }

    let mut a2 = Builder::new("A2", "i", &[]);
    for m in &read_msgs {
        let (xm, ym) = (format!("x_{m}"), format!("y_{m}"));
        let (w, done) = (format!("w_{m}"), format!("w_{m}_done"));
        a2.add(Transition::new("i", &w).guard(&xm, Rel::Eq, 0));
        a2.add(
            Transition::new(&w, &done)
                .guard(&xm, Rel::Eq, 0)
                .op(ChannelOp::read("c12", m, Interval::at_least(0)))
                .reset(&ym),
        );
        a2.add(Transition::new(&done, "i").guard(&ym, Rel::Eq, 1));
    }

    let mut alphabet = a.alphabet.clone();
    for m in &read_msgs {
        push_msg(&mut alphabet, m);
    }
    let global_clocks = alphabet
        .iter()
        .flat_map(|m| [format!("x_{m}"), format!("y_{m}")])
        .collect();
    Network {
        automata: vec![a1.build(&[]), a2.build(&[])],
        global_clocks,
        channels: Vec::new(),
        alphabet,
    }
    .channel("c12", "A1", "A2")
}

pub fn instr_loc(i: usize) -> String {
    format!("l{i}")
}

/// Message announcing the move from `i` to `j` (`(l0,c1+,l1)`, `(l2,c2=0,l3)`).
pub fn step_msg(i: usize, what: &str, j: usize) -> String {
    format!("(l{i},{what},l{j})")
}

pub const ZERO1: &str = "zero1";
pub const ZERO2: &str = "zero2";

/// Ghost clock names, one per automaton; never tested, never reset.
pub const GHOSTS: [&str; 3] = ["g_A1", "g_A2", "g_A3"];

/// Three one-clock automata `A1 -c12-> A2 -c23-> A3` simulating `m`.
///
/// Counter `c1` is the lag of `A2` behind `A1` and `c2` the lag of `A3`
/// behind `A2`, measured at matching instruction locations. An increment of
/// `c1` takes one time unit in `A1` and two in `A2`, `A3`; decrements swap
/// the speeds. Each automaton forwards the instruction it took to the next
/// one, and reads the announcement at the end of its own widget. Zero
/// checks take no time: `A1` writes `zero1` and then its guess, and `A2`
/// accepts the zero guess only if `zero1` has age 0. `c2` is checked the same
/// way by `A2` writing `zero2` for `A3`.
///
/// A widget edge that both reads and writes is split through
/// `<from>__mid_<to>`: the read resets the automaton's clock and the write
/// requires it to be 0, so no time passes in between.
pub fn gen_three_cta(m: &TwoCounterMachine, ghosts: bool) -> Network {
    let mut alphabet = vec![ZERO1.to_string(), ZERO2.to_string()];
    let clocks = ["x", "y", "z"];
    let mut b: Vec<Builder> = (0..3)
        .map(|k| {
            let mut cl = vec![clocks[k]];
            if ghosts {
                cl.push(GHOSTS[k]);
            }
            Builder::new(&format!("A{}", k + 1), &instr_loc(0), &cl)
        })
        .collect();
    for bb in &mut b {
        for i in 0..m.instructions.len() {
            bb.loc(&instr_loc(i));
        }
    }
    let any = Interval::at_least(0);
    let (c12, c23) = ("c12", "c23");
    for (i, ins) in m.instructions.iter().enumerate() {
        let li = instr_loc(i);
        match *ins {
            Instr::Halt => {}
            Instr::Inc { counter, goto } | Instr::Dec { counter, goto } => {
                let inc = matches!(ins, Instr::Inc { .. });
                let sign = if inc { "+" } else { "-" };
                let msg = step_msg(i, &format!("c{counter}{sign}"), goto);
                push_msg(&mut alphabet, &msg);
                let lj = instr_loc(goto);
                // Time spent by A1, A2, A3.
                let d = match (counter, inc) {
                    (1, true) => [1, 2, 2],
                    (1, false) => [2, 1, 1],
                    (_, true) => [1, 1, 2],
                    (_, false) => [2, 2, 1],
                };
                b[0].add(
                    Transition::new(&li, &lj)
                        .guard("x", Rel::Eq, d[0])
                        .op(ChannelOp::write(c12, &msg))
                        .reset("x"),
                );
                let mid = format!("{li}__mid_{lj}");
                b[1].add(
                    Transition::new(&li, &mid)
                        .guard("y", Rel::Eq, d[1])
                        .op(ChannelOp::read(c12, &msg, any))
                        .reset("y"),
                );
                b[1].add(
                    Transition::new(&mid, &lj)
                        .guard("y", Rel::Eq, 0)
                        .op(ChannelOp::write(c23, &msg)),
                );
                b[2].add(
                    Transition::new(&li, &lj)
                        .guard("z", Rel::Eq, d[2])
                        .op(ChannelOp::read(c23, &msg, any))
                        .reset("z"),
                );
            }
            Instr::IfZero { counter, zero, pos } => {
                let is0 = step_msg(i, &format!("c{counter}=0"), zero);
                let gt0 = step_msg(i, &format!("c{counter}>0"), pos);
                push_msg(&mut alphabet, &is0);
                push_msg(&mut alphabet, &gt0);
                let branches = [(zero, &is0, "zero"), (pos, &gt0, "pos")];
                let ages = [Interval::exactly(0), Interval::above(0)];
                let w = |from: &str, to: &str, clk: &str, op: ChannelOp| {
                    Transition::new(from, to).guard(clk, Rel::Eq, 0).op(op)
                };
                if counter == 1 {
                    let lz = format!("{li}_z");
                    b[0].add(w(&li, &lz, "x", ChannelOp::write(c12, ZERO1)));
                    for (k, ((to, msg, tag), age)) in branches.iter().zip(ages).enumerate() {
                        let lt = instr_loc(*to);
                        b[0].add(w(&lz, &lt, "x", ChannelOp::write(c12, msg)));
                        let seen = format!("{li}_{}", ["eq", "gt"][k]);
                        let mid = format!("{li}__mid_{lt}_{tag}");
                        b[1].add(w(&li, &seen, "y", ChannelOp::read(c12, ZERO1, age)));
                        b[1].add(w(&seen, &mid, "y", ChannelOp::read(c12, msg, any)));
                        b[1].add(w(&mid, &lt, "y", ChannelOp::write(c23, msg)));
                        b[2].add(w(&li, &lt, "z", ChannelOp::read(c23, msg, any)));
                    }
                } else {
                    let lz = format!("{li}_z");
                    b[1].add(w(&li, &lz, "y", ChannelOp::write(c23, ZERO2)));
                    for (k, ((to, msg, tag), age)) in branches.iter().zip(ages).enumerate() {
                        let lt = instr_loc(*to);
                        b[0].add(w(&li, &lt, "x", ChannelOp::write(c12, msg)));
                        let mid = format!("{li}__mid_{lt}_{tag}");
                        b[1].add(w(&lz, &mid, "y", ChannelOp::read(c12, msg, any)));
                        b[1].add(w(&mid, &lt, "y", ChannelOp::write(c23, msg)));
                        let seen = format!("{li}_{}", ["eq", "gt"][k]);
                        b[2].add(w(&li, &seen, "z", ChannelOp::read(c23, ZERO2, age)));
                        b[2].add(w(&seen, &lt, "z", ChannelOp::read(c23, msg, any)));
                    }
                }
            }
        }
    }
    let finals = [instr_loc(m.halt())];
    Network {
        automata: b.into_iter().map(|bb| bb.build(&finals)).collect(),
        global_clocks: Vec::new(),
        channels: Vec::new(),
        alphabet,
    }
    .channel(c12, "A1", "A2")
    .channel(c23, "A2", "A3")
}

/// Counter values read off the ghost clocks at one instruction boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Boundary {
    pub step: usize,
    pub instruction: usize,
    /// Ghost value of each automaton on arriving at the instruction.
    pub arrivals: [u32; 3],
    pub c1: u64,
    pub c2: u64,
}

/// A zero test observed in the simulating run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ZeroObservation {
    pub instruction: usize,
    pub counter: u8,
    pub age: u32,
    pub zero_branch: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "result", rename_all = "lowercase")]
pub enum CrosscheckReport {
    Success {
        boundaries: Vec<Boundary>,
        zero_checks: Vec<ZeroObservation>,
        witness_len: usize,
    },
    Divergence {
        boundary: usize,
        expected: String,
        observed: String,
    },
}

impl CrosscheckReport {
    pub fn is_success(&self) -> bool {
        matches!(self, CrosscheckReport::Success { .. })
    }
}

/// Runs `m` and searches the three-automata network for a run to the halt
/// location, then checks the ghost-clock differences at every instruction
/// boundary and the age of every zero test against the machine.
pub fn crosscheck_gadget(
    m: &TwoCounterMachine,
    steps: usize,
) -> Result<CrosscheckReport, GadgetError> {
    m.validate()?;
    let (trace, stuck) = trace_2cm(m, steps);
    let &(last, _, _) = trace.last().expect("nonempty");
    if stuck {
        return Err(GadgetError::Stuck(last));
    }
    if last != m.halt() {
        return Err(GadgetError::NotHalted(steps));
    }

    let net = gen_three_cta(m, true);
    let ix = NetIndex::new(&net).map_err(|e| GadgetError::Internal(e.to_string()))?;
    let halt = instr_loc(m.halt());
    let target = Target {
        locations: (0..3)
            .map(|a| (a, ix.automata[a].loc(&halt).expect("halt location")))
            .collect(),
        ..Target::default()
    };
    let bounds = ExploreBounds {
        max_steps: 16 * trace.len() + 8,
        max_channel_len: 2 * trace.len() + 4,
        max_delay_per_step: 1,
        age_cap: ix.max_constant,
    };
    let init = initial_configurations(&ix).remove(0);
    let moves = match explore_reach(&ix, &bounds, &|c| target.matches(c)) {
        ExploreOutcome::Reached { trace: mv, .. } => mv,
        ExploreOutcome::Exhausted { .. } => {
            return Ok(CrosscheckReport::Divergence {
                boundary: trace.len() - 1,
                expected: format!("all automata reach {halt}"),
                observed: "halt not reachable within exploration bounds".to_string(),
            })
        }
    };
    let cfgs = replay(&ix, &init, &moves).map_err(|e| GadgetError::Internal(e.to_string()))?;

    let instr_of = |a: usize, l: usize| {
        ix.automata[a].locations[l]
            .strip_prefix('l')
            .and_then(|s| s.parse::<usize>().ok())
    };
    let ghost = |a: usize, cfg: &crate::semantics::Configuration| cfg.vals[a][1];
    let mut arrivals: [Vec<(usize, u32)>; 3] = [vec![(0, 0)], vec![(0, 0)], vec![(0, 0)]];
    let mut zero_obs = Vec::new();
    let mut pending_zero: [Option<(usize, u32)>; 3] = [None; 3];
    for (k, mv) in moves.iter().enumerate() {
        let Move::Discrete {
            automaton: a,
            transition,
        } = *mv
        else {
            continue;
        };
        let tr = &ix.automata[a].transitions[transition];
        if let COp::Read { ch, msg, .. } = tr.op {
            let name = &ix.alphabet[msg];
            let age = cfgs[k].chans[ch]
                .last()
                .expect("read from nonempty channel")
                .1;
            if name == ZERO1 || name == ZERO2 {
                let at = instr_of(a, tr.from).unwrap_or(usize::MAX);
                pending_zero[a] = Some((at, age));
            } else if let Some((at, age)) = pending_zero[a].take() {
                let counter = if a == 1 { 1 } else { 2 };
                zero_obs.push(ZeroObservation {
                    instruction: at,
                    counter,
                    age,
                    zero_branch: name.contains("=0"),
                });
            }
        }
        if let Some(i) = instr_of(a, tr.to) {
            arrivals[a].push((i, ghost(a, &cfgs[k + 1])));
        }
    }

    let mut boundaries = Vec::new();
    for (h, &(pc, c1, c2)) in trace.iter().enumerate() {
        let got: Vec<Option<&(usize, u32)>> = arrivals.iter().map(|v| v.get(h)).collect();
        let observed = format!("{got:?}");
        let expected = format!("instruction l{pc} with c1={c1}, c2={c2}");
        let [Some(&(i1, g1)), Some(&(i2, g2)), Some(&(i3, g3))] = [got[0], got[1], got[2]] else {
            return Ok(CrosscheckReport::Divergence {
                boundary: h,
                expected,
                observed,
            });
        };
        let d1 = i64::from(g2) - i64::from(g1);
        let d2 = i64::from(g3) - i64::from(g2);
        if [i1, i2, i3] != [pc; 3] || d1 != c1 as i64 || d2 != c2 as i64 {
            return Ok(CrosscheckReport::Divergence {
                boundary: h,
                expected,
                observed: format!("{observed}, differences ({d1},{d2})"),
            });
        }
        boundaries.push(Boundary {
            step: h,
            instruction: pc,
            arrivals: [g1, g2, g3],
            c1,
            c2,
        });
    }
    for (a, arr) in arrivals.iter().enumerate() {
        if arr.len() != trace.len() {
            return Ok(CrosscheckReport::Divergence {
                boundary: trace.len(),
                expected: format!("{} instruction boundaries", trace.len()),
                observed: format!("A{} passed {}", a + 1, arr.len()),
            });
        }
    }

    // Zero tests in run order, per counter.
    for counter in [1u8, 2] {
        let expected: Vec<(usize, bool)> = trace
            .iter()
            .filter_map(|&(pc, c1, c2)| match m.instructions[pc] {
                Instr::IfZero { counter: c, .. } if c == counter => {
                    Some((pc, if c == 1 { c1 == 0 } else { c2 == 0 }))
                }
                _ => None,
            })
            .collect();
        let seen: Vec<&ZeroObservation> =
            zero_obs.iter().filter(|z| z.counter == counter).collect();
        let consistent = seen.len() == expected.len()
            && seen.iter().zip(&expected).all(|(z, &(pc, is_zero))| {
                z.instruction == pc && z.zero_branch == is_zero && (z.age == 0) == is_zero
            });
        if !consistent {
            return Ok(CrosscheckReport::Divergence {
                boundary: trace.len() - 1,
                expected: format!("zero tests of c{counter}: {expected:?}"),
                observed: format!("{seen:?}"),
            });
        }
    }

    Ok(CrosscheckReport::Success {
        boundaries,
        zero_checks: zero_obs,
        witness_len: moves.len(),
    })
}
