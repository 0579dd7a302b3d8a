//! Network data model, JSON format and static validation.
//!
//! A [`Network`] is the serde-facing description with string ids. Analyses
//! work on a [`NetIndex`], which resolves every id to a dense index once.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Sentinel for an unbounded value (clock above the cap, message age `∞`).
pub const INF: u32 = u32::MAX;

/// Adds `t` to `v`, keeping `INF` absorbing.
pub fn add_sat(v: u32, t: u32) -> u32 {
    if v == INF {
        INF
    } else {
        v.checked_add(t).filter(|s| *s != INF).unwrap_or(INF)
    }
}

/// Collapses values above `k` to `INF`.
pub fn cap(v: u32, k: u32) -> u32 {
    if v > k {
        INF
    } else {
        v
    }
}

/// Renders a possibly infinite value.
pub fn show_val(v: u32) -> String {
    if v == INF {
        "inf".to_string()
    } else {
        v.to_string()
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("reference error: {0}")]
    Reference(String),
    #[error("invalid interval `{0}`")]
    Interval(String),
}

/// Comparison operator of a clock constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Lt,
    Le,
    Eq,
    Gt,
    Ge,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Eq => "=",
            Rel::Gt => ">",
            Rel::Ge => ">=",
        }
    }

    /// Evaluates `v ⋈ k`; an infinite `v` exceeds every finite bound.
    pub fn holds(self, v: u32, k: u32) -> bool {
        if v == INF {
            return matches!(self, Rel::Gt | Rel::Ge);
        }
        match self {
            Rel::Lt => v < k,
            Rel::Le => v <= k,
            Rel::Eq => v == k,
            Rel::Gt => v > k,
            Rel::Ge => v >= k,
        }
    }
}

impl FromStr for Rel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "<" => Ok(Rel::Lt),
            "<=" | "≤" => Ok(Rel::Le),
            "=" | "==" => Ok(Rel::Eq),
            ">" => Ok(Rel::Gt),
            ">=" | "≥" => Ok(Rel::Ge),
            other => Err(format!("unknown relation `{other}`")),
        }
    }
}

impl Serialize for Rel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for Rel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One conjunct `clock ⋈ bound`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub clock: String,
    pub rel: Rel,
    pub bound: u32,
}

impl Atom {
    pub fn new(clock: &str, rel: Rel, bound: u32) -> Self {
        Atom {
            clock: clock.to_string(),
            rel,
            bound,
        }
    }
}

/// Interval of admissible message ages, e.g. `[1,1]` or `(2,inf)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    pub lower: u32,
    pub lower_closed: bool,
    /// `None` stands for `∞`.
    pub upper: Option<u32>,
    pub upper_closed: bool,
}

impl Interval {
    pub fn closed(l: u32, u: u32) -> Self {
        Interval {
            lower: l,
            lower_closed: true,
            upper: Some(u),
            upper_closed: true,
        }
    }

    pub fn exactly(k: u32) -> Self {
        Self::closed(k, k)
    }

    /// `[l, ∞)`.
    pub fn at_least(l: u32) -> Self {
        Interval {
            lower: l,
            lower_closed: true,
            upper: None,
            upper_closed: false,
        }
    }

    /// `(l, ∞)`.
    pub fn above(l: u32) -> Self {
        Interval {
            lower: l,
            lower_closed: false,
            upper: None,
            upper_closed: false,
        }
    }

    pub fn contains(&self, age: u32) -> bool {
        let lo = if self.lower_closed {
            age >= self.lower
        } else {
            age > self.lower
        };
        if !lo {
            return false;
        }
        match self.upper {
            None => true,
            Some(_) if age == INF => false,
            Some(u) => {
                if self.upper_closed {
                    age <= u
                } else {
                    age < u
                }
            }
        }
    }

    /// Largest finite endpoint.
    pub fn max_endpoint(&self) -> u32 {
        self.upper.unwrap_or(0).max(self.lower)
    }

    pub fn is_well_formed(&self) -> bool {
        match self.upper {
            None => !self.upper_closed,
            Some(u) => self.lower <= u,
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.lower_closed { '[' } else { '(' };
        match self.upper {
            None => write!(f, "{open}{},inf)", self.lower),
            Some(u) => {
                let close = if self.upper_closed { ']' } else { ')' };
                write!(f, "{open}{},{u}{close}", self.lower)
            }
        }
    }
}

impl FromStr for Interval {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::Interval(s.to_string());
        let t = s.trim();
        if t.len() < 5 {
            return Err(bad());
        }
        let lower_closed = match t.as_bytes()[0] {
            b'[' => true,
            b'(' => false,
            _ => return Err(bad()),
        };
        let upper_closed = match t.as_bytes()[t.len() - 1] {
            b']' => true,
            b')' => false,
            _ => return Err(bad()),
        };
        let body = &t[1..t.len() - 1];
        let (l, u) = body.split_once(',').ok_or_else(bad)?;
        let lower: u32 = l.trim().parse().map_err(|_| bad())?;
        let upper = match u.trim() {
            "inf" | "∞" => None,
            n => Some(n.parse::<u32>().map_err(|_| bad())?),
        };
        let iv = Interval {
            lower,
            lower_closed,
            upper,
            upper_closed,
        };
        if !iv.is_well_formed() {
            return Err(bad());
        }
        Ok(iv)
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WriteOp {
    pub channel: String,
    pub msg: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadOp {
    pub channel: String,
    pub msg: String,
    pub age: Interval,
}

/// Channel operation attached to a transition.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelOp {
    #[default]
    Nop,
    Write(WriteOp),
    Read(ReadOp),
}

impl ChannelOp {
    pub fn write(channel: &str, msg: &str) -> Self {
        ChannelOp::Write(WriteOp {
            channel: channel.to_string(),
            msg: msg.to_string(),
        })
    }

    pub fn read(channel: &str, msg: &str, age: Interval) -> Self {
        ChannelOp::Read(ReadOp {
            channel: channel.to_string(),
            msg: msg.to_string(),
            age,
        })
    }

    pub fn label(&self) -> String {
        match self {
            ChannelOp::Nop => "nop".to_string(),
            ChannelOp::Write(w) => format!("{}!{}", w.channel, w.msg),
            ChannelOp::Read(r) => format!("{}?{}{}", r.channel, r.msg, r.age),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub from: String,
    #[serde(default)]
    pub guard: Vec<Atom>,
    #[serde(default)]
    pub op: ChannelOp,
    #[serde(default)]
    pub resets: Vec<String>,
    pub to: String,
}

impl Transition {
    pub fn new(from: &str, to: &str) -> Self {
        Transition {
            from: from.to_string(),
            guard: Vec::new(),
            op: ChannelOp::Nop,
            resets: Vec::new(),
            to: to.to_string(),
        }
    }

    pub fn guard(mut self, clock: &str, rel: Rel, bound: u32) -> Self {
        self.guard.push(Atom::new(clock, rel, bound));
        self
    }

    pub fn op(mut self, op: ChannelOp) -> Self {
        self.op = op;
        self
    }

    pub fn reset(mut self, clock: &str) -> Self {
        self.resets.push(clock.to_string());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Automaton {
    pub id: String,
    pub locations: Vec<String>,
    pub initial: Vec<String>,
    #[serde(rename = "final", default)]
    pub finals: Vec<String>,
    #[serde(default)]
    pub clocks: Vec<String>,
    #[serde(default)]
    pub transitions: Vec<Transition>,
}

impl Automaton {
    pub fn new(id: &str, locations: &[&str], initial: &str, clocks: &[&str]) -> Self {
        Automaton {
            id: id.to_string(),
            locations: locations.iter().map(|s| s.to_string()).collect(),
            initial: vec![initial.to_string()],
            finals: Vec::new(),
            clocks: clocks.iter().map(|s| s.to_string()).collect(),
            transitions: Vec::new(),
        }
    }

    pub fn with(mut self, t: Transition) -> Self {
        self.transitions.push(t);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channel {
    pub id: String,
    pub from: String,
    pub to: String,
}

/// A network of communicating timed automata.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Network {
    pub automata: Vec<Automaton>,
    #[serde(default)]
    pub global_clocks: Vec<String>,
    #[serde(default)]
    pub channels: Vec<Channel>,
    #[serde(default)]
    pub alphabet: Vec<String>,
}

impl Network {
    pub fn channel(mut self, id: &str, from: &str, to: &str) -> Self {
        self.channels.push(Channel {
            id: id.to_string(),
            from: from.to_string(),
            to: to.to_string(),
        });
        self
    }
}

/// Parses a model document and checks that every id resolves.
pub fn parse_model(doc: &str) -> Result<Network, ModelError> {
    let net: Network = serde_json::from_str(doc).map_err(|e| ModelError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let refs: Vec<_> = validate_network(&net)
        .into_iter()
        .filter(|d| d.kind == DiagKind::Reference)
        .collect();
    if let Some(d) = refs.first() {
        return Err(ModelError::Reference(d.message.clone()));
    }
    Ok(net)
}

/// Renders a network as pretty-printed JSON.
pub fn serialize_model(net: &Network) -> String {
    serde_json::to_string_pretty(net).expect("network serializes")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagKind {
    Reference,
    DuplicateId,
    SharedClock,
    DuplicateChannelPair,
    ChannelDirection,
    BadInterval,
    EmptyInitial,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn diag(out: &mut Vec<Diagnostic>, kind: DiagKind, message: String) {
    out.push(Diagnostic { kind, message });
}

fn duplicates<'a>(items: impl IntoIterator<Item = &'a String>) -> Vec<&'a String> {
    let mut seen = HashSet::new();
    let mut dups = Vec::new();
    for s in items {
        if !seen.insert(s) && !dups.contains(&s) {
            dups.push(s);
        }
    }
    dups
}

/// Checks every network invariant; an empty list means the net is valid.
pub fn validate_network(net: &Network) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for d in duplicates(net.automata.iter().map(|a| &a.id)) {
        diag(
            &mut out,
            DiagKind::DuplicateId,
            format!("duplicate automaton id {d}"),
        );
    }
    for d in duplicates(net.channels.iter().map(|c| &c.id)) {
        diag(
            &mut out,
            DiagKind::DuplicateId,
            format!("duplicate channel id {d}"),
        );
    }
    for d in duplicates(net.alphabet.iter()) {
        diag(
            &mut out,
            DiagKind::DuplicateId,
            format!("duplicate symbol {d}"),
        );
    }
    for d in duplicates(net.global_clocks.iter()) {
        diag(
            &mut out,
            DiagKind::DuplicateId,
            format!("duplicate global clock {d}"),
        );
    }

    let globals: HashSet<&String> = net.global_clocks.iter().collect();
    let mut owner: HashMap<&String, &String> = HashMap::new();
    for a in &net.automata {
        for c in &a.clocks {
            if globals.contains(c) {
                diag(
                    &mut out,
                    DiagKind::SharedClock,
                    format!("clock {c} of {} is also a global clock", a.id),
                );
            }
            match owner.get(c) {
                Some(prev) if *prev != &a.id => diag(
                    &mut out,
                    DiagKind::SharedClock,
                    format!("clock shared across automata: {c} ({prev}, {})", a.id),
                ),
                Some(_) => diag(
                    &mut out,
                    DiagKind::DuplicateId,
                    format!("duplicate clock {c} in {}", a.id),
                ),
                None => {
                    owner.insert(c, &a.id);
                }
            }
        }
    }

    let aut_ids: HashSet<&String> = net.automata.iter().map(|a| &a.id).collect();
    let mut pairs: HashSet<(&String, &String)> = HashSet::new();
    for ch in &net.channels {
        for end in [&ch.from, &ch.to] {
            if !aut_ids.contains(end) {
                diag(
                    &mut out,
                    DiagKind::Reference,
                    format!("channel {} names unknown automaton {end}", ch.id),
                );
            }
        }
        if !pairs.insert((&ch.from, &ch.to)) {
            diag(
                &mut out,
                DiagKind::DuplicateChannelPair,
                format!("duplicate channel pair {}->{}", ch.from, ch.to),
            );
        }
    }

    let alphabet: HashSet<&String> = net.alphabet.iter().collect();
    for a in &net.automata {
        for d in duplicates(a.locations.iter()) {
            diag(
                &mut out,
                DiagKind::DuplicateId,
                format!("duplicate location {d} in {}", a.id),
            );
        }
        if a.initial.is_empty() {
            diag(
                &mut out,
                DiagKind::EmptyInitial,
                format!("automaton {} has no initial location", a.id),
            );
        }
        let locs: HashSet<&String> = a.locations.iter().collect();
        for l in a.initial.iter().chain(a.finals.iter()) {
            if !locs.contains(l) {
                diag(
                    &mut out,
                    DiagKind::Reference,
                    format!("unknown location {l} in {}", a.id),
                );
            }
        }
        let visible = |c: &String| a.clocks.contains(c) || globals.contains(c);
        for (ti, t) in a.transitions.iter().enumerate() {
            for l in [&t.from, &t.to] {
                if !locs.contains(l) {
                    diag(
                        &mut out,
                        DiagKind::Reference,
                        format!("unknown location {l} in {} transition {ti}", a.id),
                    );
                }
            }
            for c in t.guard.iter().map(|g| &g.clock).chain(t.resets.iter()) {
                if !visible(c) {
                    diag(
                        &mut out,
                        DiagKind::Reference,
                        format!("unknown clock {c} in {} transition {ti}", a.id),
                    );
                }
            }
            let (chan, msg, want_from) = match &t.op {
                ChannelOp::Nop => continue,
                ChannelOp::Write(w) => (&w.channel, &w.msg, true),
                ChannelOp::Read(r) => {
                    if !r.age.is_well_formed() {
                        diag(
                            &mut out,
                            DiagKind::BadInterval,
                            format!("malformed interval {} in {} transition {ti}", r.age, a.id),
                        );
                    }
                    (&r.channel, &r.msg, false)
                }
            };
            if !alphabet.contains(msg) {
                diag(
                    &mut out,
                    DiagKind::Reference,
                    format!("unknown message {msg} in {} transition {ti}", a.id),
                );
            }
            match net.channels.iter().find(|c| &c.id == chan) {
                None => diag(
                    &mut out,
                    DiagKind::Reference,
                    format!("unknown channel {chan} in {} transition {ti}", a.id),
                ),
                Some(c) => {
                    let end = if want_from { &c.from } else { &c.to };
                    if end != &a.id {
                        let role = if want_from { "write to" } else { "read from" };
                        diag(
                            &mut out,
                            DiagKind::Reference,
                            format!(
                                "{} cannot {role} channel {chan} ({}->{})",
                                a.id, c.from, c.to
                            ),
                        );
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Classification {
    TwoChainNoGlobals,
    Polyforest,
    Cyclic,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TopologyReport {
    pub max_constant: u32,
    pub underlying_acyclic: bool,
    pub classification: Classification,
    pub has_globals: bool,
    /// Automaton id to (fan-in, fan-out) over channels.
    pub degrees: BTreeMap<String, (usize, usize)>,
}

/// Largest constant in any guard or finite interval endpoint.
pub fn max_constant(net: &Network) -> u32 {
    let mut k = 0;
    for a in &net.automata {
        for t in &a.transitions {
            for g in &t.guard {
                k = k.max(g.bound);
            }
            if let ChannelOp::Read(r) = &t.op {
                k = k.max(r.age.max_endpoint());
            }
        }
    }
    k
}

pub fn analyze_topology(net: &Network) -> TopologyReport {
    let ids: Vec<&String> = net.automata.iter().map(|a| &a.id).collect();
    let pos = |id: &String| ids.iter().position(|x| *x == id);
    // Union-find over the undirected channel graph; any repeated join is a cycle.
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    let mut acyclic = true;
    let mut edges = BTreeSet::new();
    let mut degrees: BTreeMap<String, (usize, usize)> =
        ids.iter().map(|id| ((*id).clone(), (0, 0))).collect();
    for ch in &net.channels {
        if let Some(d) = degrees.get_mut(&ch.from) {
            d.1 += 1;
        }
        if let Some(d) = degrees.get_mut(&ch.to) {
            d.0 += 1;
        }
        let (Some(u), Some(v)) = (pos(&ch.from), pos(&ch.to)) else {
            continue;
        };
        if u == v || !edges.insert((u.min(v), u.max(v))) {
            acyclic = false;
            continue;
        }
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru == rv {
            acyclic = false;
        } else {
            parent[ru] = rv;
        }
    }
    let has_globals = !net.global_clocks.is_empty();
    let classification = if !acyclic {
        Classification::Cyclic
    } else if net.automata.len() == 2 && net.channels.len() == 1 && !has_globals {
        Classification::TwoChainNoGlobals
    } else {
        Classification::Polyforest
    };
    TopologyReport {
        max_constant: max_constant(net),
        underlying_acyclic: acyclic,
        classification,
        has_globals,
        degrees,
    }
}

/// Reference to a clock after id resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClockRef {
    Local(usize),
    Global(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CAtom {
    pub clock: ClockRef,
    pub rel: Rel,
    pub bound: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum COp {
    Nop,
    Write {
        ch: usize,
        msg: usize,
    },
    Read {
        ch: usize,
        msg: usize,
        age: Interval,
    },
}

#[derive(Clone, Debug)]
pub struct CTransition {
    pub from: usize,
    pub guard: Vec<CAtom>,
    pub op: COp,
    pub resets: Vec<ClockRef>,
    pub to: usize,
}

impl CTransition {
    pub fn enabled(&self, local: &[u32], global: &[u32]) -> bool {
        self.guard.iter().all(|a| {
            let v = match a.clock {
                ClockRef::Local(i) => local[i],
                ClockRef::Global(i) => global[i],
            };
            a.rel.holds(v, a.bound)
        })
    }

    pub fn apply_resets(&self, local: &mut [u32], global: &mut [u32]) {
        for r in &self.resets {
            match *r {
                ClockRef::Local(i) => local[i] = 0,
                ClockRef::Global(i) => global[i] = 0,
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct CAutomaton {
    pub id: String,
    pub locations: Vec<String>,
    pub initial: Vec<usize>,
    pub finals: Vec<usize>,
    pub clocks: Vec<String>,
    pub transitions: Vec<CTransition>,
}

impl CAutomaton {
    pub fn loc(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|l| l == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CChannel {
    pub from: usize,
    pub to: usize,
}

/// A network with all ids resolved to dense indices.
#[derive(Clone, Debug)]
pub struct NetIndex {
    pub net: Network,
    pub automata: Vec<CAutomaton>,
    pub globals: Vec<String>,
    pub channels: Vec<CChannel>,
    pub channel_ids: Vec<String>,
    pub alphabet: Vec<String>,
    pub max_constant: u32,
}

impl NetIndex {
    pub fn new(net: &Network) -> Result<Self, ModelError> {
        if let Some(d) = validate_network(net)
            .into_iter()
            .find(|d| d.kind == DiagKind::Reference)
        {
            return Err(ModelError::Reference(d.message));
        }
        let aut_pos: HashMap<&String, usize> = net
            .automata
            .iter()
            .enumerate()
            .map(|(i, a)| (&a.id, i))
            .collect();
        let chan_pos: HashMap<&String, usize> = net
            .channels
            .iter()
            .enumerate()
            .map(|(i, c)| (&c.id, i))
            .collect();
        let msg_pos: HashMap<&String, usize> = net
            .alphabet
            .iter()
            .enumerate()
            .map(|(i, m)| (m, i))
            .collect();
        let global_pos: HashMap<&String, usize> = net
            .global_clocks
            .iter()
            .enumerate()
            .map(|(i, g)| (g, i))
            .collect();
        let channels = net
            .channels
            .iter()
            .map(|c| CChannel {
                from: aut_pos[&c.from],
                to: aut_pos[&c.to],
            })
            .collect();
        let mut automata = Vec::new();
        for a in &net.automata {
            let loc_pos: HashMap<&String, usize> = a
                .locations
                .iter()
                .enumerate()
                .map(|(i, l)| (l, i))
                .collect();
            let clock_ref = |c: &String| match a.clocks.iter().position(|x| x == c) {
                Some(i) => ClockRef::Local(i),
                None => ClockRef::Global(global_pos[c]),
            };
            let transitions = a
                .transitions
                .iter()
                .map(|t| CTransition {
                    from: loc_pos[&t.from],
                    guard: t
                        .guard
                        .iter()
                        .map(|g| CAtom {
                            clock: clock_ref(&g.clock),
                            rel: g.rel,
                            bound: g.bound,
                        })
                        .collect(),
                    op: match &t.op {
                        ChannelOp::Nop => COp::Nop,
                        ChannelOp::Write(w) => COp::Write {
                            ch: chan_pos[&w.channel],
                            msg: msg_pos[&w.msg],
                        },
                        ChannelOp::Read(r) => COp::Read {
                            ch: chan_pos[&r.channel],
                            msg: msg_pos[&r.msg],
                            age: r.age,
                        },
                    },
                    resets: t.resets.iter().map(clock_ref).collect(),
                    to: loc_pos[&t.to],
                })
                .collect();
            automata.push(CAutomaton {
                id: a.id.clone(),
                locations: a.locations.clone(),
                initial: a.initial.iter().map(|l| loc_pos[l]).collect(),
                finals: a.finals.iter().map(|l| loc_pos[l]).collect(),
                clocks: a.clocks.clone(),
                transitions,
            });
        }
        Ok(NetIndex {
            net: net.clone(),
            automata,
            globals: net.global_clocks.clone(),
            channels,
            channel_ids: net.channels.iter().map(|c| c.id.clone()).collect(),
            alphabet: net.alphabet.clone(),
            max_constant: max_constant(net),
        })
    }

    pub fn automaton(&self, id: &str) -> Option<usize> {
        self.automata.iter().position(|a| a.id == id)
    }

    pub fn channel(&self, id: &str) -> Option<usize> {
        self.channel_ids.iter().position(|c| c == id)
    }

    pub fn msg(&self, m: &str) -> Option<usize> {
        self.alphabet.iter().position(|x| x == m)
    }

    /// For each automaton, which local clocks occur in some guard; likewise for globals.
    pub fn tested_clocks(&self) -> (Vec<Vec<bool>>, Vec<bool>) {
        let mut local: Vec<Vec<bool>> = self
            .automata
            .iter()
            .map(|a| vec![false; a.clocks.len()])
            .collect();
        let mut global = vec![false; self.globals.len()];
        for (ai, a) in self.automata.iter().enumerate() {
            for t in &a.transitions {
                for g in &t.guard {
                    match g.clock {
                        ClockRef::Local(i) => local[ai][i] = true,
                        ClockRef::Global(i) => global[i] = true,
                    }
                }
            }
        }
        (local, global)
    }
}
