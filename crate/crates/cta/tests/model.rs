mod common;

use cta::model::{
    analyze_topology, parse_model, serialize_model, validate_network, Automaton, ChannelOp,
    Classification, DiagKind, Interval, ModelError, Network, Rel, Transition, INF,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

const WRITER_READER: &str = include_str!("../models/writer_reader.json");
const TWO_WAY: &str = include_str!("../models/two_way.json");

fn pair(a_clock: &str, b_clock: &str) -> Network {
    Network {
        automata: vec![
            Automaton::new("A", &["s"], "s", &[a_clock]),
            Automaton::new("B", &["q"], "q", &[b_clock]),
        ],
        alphabet: vec!["a".into()],
        ..Network::default()
    }
}

fn kinds(net: &Network) -> Vec<DiagKind> {
    validate_network(net).into_iter().map(|d| d.kind).collect()
}

#[test]
fn bundled_models_are_valid() {
    for doc in [WRITER_READER, TWO_WAY] {
        let net = parse_model(doc).unwrap();
        assert!(validate_network(&net).is_empty());
    }
}

#[test]
fn writer_reader_topology() {
    let r = analyze_topology(&parse_model(WRITER_READER).unwrap());
    assert_eq!(r.classification, Classification::TwoChainNoGlobals);
    assert!(r.underlying_acyclic);
    assert!(!r.has_globals);
    assert_eq!(r.max_constant, 1);
    assert_eq!(r.degrees["A"], (0, 1));
    assert_eq!(r.degrees["B"], (1, 0));
}

#[test]
fn opposite_channels_form_a_cycle() {
    let r = analyze_topology(&parse_model(TWO_WAY).unwrap());
    assert_eq!(r.classification, Classification::Cyclic);
    assert!(!r.underlying_acyclic);
}

#[test]
fn star_is_a_polyforest() {
    let net = Network {
        automata: vec![
            Automaton::new("H", &["h"], "h", &[]),
            Automaton::new("L", &["l"], "l", &[]),
            Automaton::new("R", &["r"], "r", &[]),
        ],
        ..Network::default()
    }
    .channel("c1", "H", "L")
    .channel("c2", "R", "H");
    let r = analyze_topology(&net);
    assert_eq!(r.classification, Classification::Polyforest);
    assert_eq!(r.degrees["H"], (1, 1));
}

#[test]
fn triangle_is_cyclic() {
    let net = Network {
        automata: ["A", "B", "C"]
            .iter()
            .map(|id| Automaton::new(id, &["l"], "l", &[]))
            .collect(),
        ..Network::default()
    }
    .channel("ab", "A", "B")
    .channel("bc", "B", "C")
    .channel("ca", "C", "A");
    assert_eq!(
        analyze_topology(&net).classification,
        Classification::Cyclic
    );
}

#[test]
fn global_clocks_leave_the_two_chain_class() {
    let mut net = pair("x", "y").channel("c", "A", "B");
    net.global_clocks.push("g".into());
    let r = analyze_topology(&net);
    assert!(r.has_globals);
    assert_eq!(r.classification, Classification::Polyforest);
}

#[test]
fn shared_clock_is_reported() {
    assert!(kinds(&pair("x", "x")).contains(&DiagKind::SharedClock));
    let mut net = pair("x", "y");
    net.global_clocks.push("x".into());
    assert!(kinds(&net).contains(&DiagKind::SharedClock));
}

#[test]
fn duplicate_channel_pair_is_reported() {
    let net = pair("x", "y").channel("c", "A", "B").channel("d", "A", "B");
    assert_eq!(kinds(&net), vec![DiagKind::DuplicateChannelPair]);
}

#[test]
fn wrong_channel_direction_is_reported() {
    let mut net = pair("x", "y").channel("c", "A", "B");
    net.automata[1]
        .transitions
        .push(Transition::new("q", "q").op(ChannelOp::write("c", "a")));
    assert!(!validate_network(&net).is_empty());
}

#[test]
fn unknown_clock_is_a_reference_error() {
    let mut net = pair("x", "y");
    net.automata[0]
        .transitions
        .push(Transition::new("s", "s").guard("y", Rel::Lt, 1));
    let err = parse_model(&serialize_model(&net)).unwrap_err();
    assert!(matches!(err, ModelError::Reference(_)), "{err}");
}

#[test]
fn syntax_error_reports_position() {
    let err = parse_model("{\n  \"automata\": [\n    oops\n  ]\n}").unwrap_err();
    match err {
        ModelError::Syntax { line, column, .. } => {
            assert_eq!(line, 3);
            assert!(column > 0);
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let doc = WRITER_READER.replacen("\"global_clocks\"", "\"globals\"", 1);
    assert!(matches!(parse_model(&doc), Err(ModelError::Syntax { .. })));
}

#[test]
fn interval_syntax() {
    assert_eq!("[1,1]".parse::<Interval>().unwrap(), Interval::exactly(1));
    assert_eq!("(1,inf)".parse::<Interval>().unwrap(), Interval::above(1));
    assert_eq!(
        "[2,inf)".parse::<Interval>().unwrap(),
        Interval::at_least(2)
    );
    for bad in ["[3,1]", "[1,inf]", "1,2", "[a,2]", "[1;2]", "{1,2}"] {
        assert!(bad.parse::<Interval>().is_err(), "{bad}");
    }
}

#[test]
fn interval_membership() {
    let i: Interval = "(1,3]".parse().unwrap();
    assert!(!i.contains(1));
    assert!(i.contains(2) && i.contains(3));
    assert!(!i.contains(4) && !i.contains(INF));
    assert!(Interval::above(5).contains(INF));
}

#[test]
fn infinity_exceeds_every_bound() {
    for k in [0, 1, 7] {
        assert!(Rel::Gt.holds(INF, k));
        assert!(Rel::Ge.holds(INF, k));
        assert!(!Rel::Lt.holds(INF, k));
        assert!(!Rel::Le.holds(INF, k));
        assert!(!Rel::Eq.holds(INF, k));
    }
}

#[test]
fn relation_symbols_roundtrip() {
    for r in RELS {
        assert_eq!(r.symbol().parse::<Rel>().unwrap(), r);
    }
    assert!("<>".parse::<Rel>().is_err());
}

fn interval_strategy() -> impl Strategy<Value = Interval> {
    (
        0u32..20,
        0u32..20,
        any::<bool>(),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(a, b, lc, uc, inf)| Interval {
            lower: a.min(b),
            lower_closed: lc,
            upper: (!inf).then_some(a.max(b)),
            upper_closed: uc && !inf,
        })
}

proptest! {
    #[test]
    fn interval_display_parses_back(i in interval_strategy()) {
        prop_assert_eq!(i.to_string().parse::<Interval>().unwrap(), i);
    }

    #[test]
    fn interval_contains_matches_bounds(i in interval_strategy(), age in 0u32..25) {
        let lo = if i.lower_closed { age >= i.lower } else { age > i.lower };
        let hi = match i.upper {
            None => true,
            Some(u) if i.upper_closed => age <= u,
            Some(u) => age < u,
        };
        prop_assert_eq!(i.contains(age), lo && hi);
    }

    #[test]
    fn serialize_then_parse_is_identity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng);
        prop_assert!(validate_network(&net).is_empty());
        let back = parse_model(&serialize_model(&net)).unwrap();
        prop_assert_eq!(back, net);
    }

    #[test]
    fn max_constant_bounds_every_constant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng);
        let mut constants = vec![0];
        for a in &net.automata {
            for t in &a.transitions {
                constants.extend(t.guard.iter().map(|g| g.bound));
                if let ChannelOp::Read(r) = &t.op {
                    constants.push(r.age.lower);
                    constants.extend(r.age.upper);
                }
            }
        }
        let k = analyze_topology(&net).max_constant;
        prop_assert!(constants.iter().all(|&c| c <= k));
        prop_assert!(constants.contains(&k));
    }

    #[test]
    fn two_chain_class_is_acyclic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for net in [random_network(&mut rng), random_two_chain(&mut rng, 3, 2, 2)] {
            let r = analyze_topology(&net);
            if r.classification == Classification::TwoChainNoGlobals {
                prop_assert!(r.underlying_acyclic);
                prop_assert_eq!(net.automata.len(), 2);
                prop_assert_eq!(net.channels.len(), 1);
                prop_assert!(net.global_clocks.is_empty());
            }
        }
    }
}
