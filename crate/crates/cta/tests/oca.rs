mod common;

use cta::model::{parse_model, NetIndex, Network};
use cta::oca::{
    build_oca, build_oca_with, check_counter_encoding, decide_2cta_reach, lift_witness,
    render_stack, ClockCaps, OcaError, OcaVerdict, RuleKind, Sym,
};
use cta::semantics::{parse_target, replay, Target};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

const WRITER_READER: &str = include_str!("../models/writer_reader.json");

fn writer_reader() -> Network {
    parse_model(WRITER_READER).unwrap()
}

fn decide(net: &Network, target: &str) -> OcaVerdict {
    let ix = NetIndex::new(net).unwrap();
    decide_2cta_reach(net, &parse_target(&ix, target).unwrap())
        .unwrap()
        .0
}

#[test]
fn writer_reader_targets() {
    let net = writer_reader();
    let ix = NetIndex::new(&net).unwrap();
    for (target, want) in [
        ("A:s2,B:q2", true),
        ("A:s3,B:q2", true),
        ("A:s1,B:q2", false),
    ] {
        match decide(&net, target) {
            OcaVerdict::Reachable {
                init,
                trace,
                oca_init,
                oca_witness,
            } => {
                assert!(want, "{target} reported reachable");
                let end = replay(&ix, &init, &trace).unwrap();
                let t = parse_target(&ix, target).unwrap();
                assert!(t.matches(end.last().unwrap()));
                assert!(end.last().unwrap().chans[0].is_empty());
                let ocs = build_oca_with(&net, ClockCaps::PerClock).unwrap();
                check_counter_encoding(&ocs, oca_init, &oca_witness).unwrap();
                assert_eq!(lift_witness(&ocs, &oca_witness), trace);
            }
            OcaVerdict::Unreachable => assert!(!want, "{target} reported unreachable"),
        }
    }
}

#[test]
fn non_chain_topology_is_rejected() {
    let net = parse_model(include_str!("../models/two_way.json")).unwrap();
    assert!(matches!(build_oca(&net), Err(OcaError::Topology(_))));
    assert!(matches!(
        decide_2cta_reach(&net, &Target::default()),
        Err(OcaError::Topology(_))
    ));
}

#[test]
fn reader_listed_first_is_accepted() {
    let mut net = writer_reader();
    net.automata.reverse();
    let ocs = build_oca(&net).unwrap();
    assert_eq!((ocs.writer, ocs.reader), (1, 0));
    assert!(decide(&net, "A:s2,B:q2").is_reachable());
}

#[test]
fn initial_state_and_dot() {
    let ocs = build_oca(&writer_reader()).unwrap();
    assert_eq!(ocs.k, 1);
    assert_eq!(ocs.initial.len(), 1);
    assert_eq!(ocs.label(ocs.initial[0]), "(s1,0)|(q1,0),eps|0");
    assert_eq!(ocs.find("(s1,0)|(q1,0),eps|0"), Some(ocs.initial[0]));
    let dot = ocs.to_dot();
    assert!(dot.starts_with("digraph oca"));
    assert!(dot.contains("(s1,0)|(q1,0),eps|0"));
}

#[test]
fn stack_renders_top_first() {
    assert_eq!(render_stack(&[Sym::Bot, Sym::One, Sym::One]), "11⊥");
    assert_eq!(render_stack(&[Sym::Bot]), "⊥");
}

#[test]
fn rule_application_checks_the_top() {
    let ocs = build_oca(&writer_reader()).unwrap();
    let pop_one = ocs
        .rules
        .iter()
        .position(|r| r.kind == RuleKind::Pop(Sym::One))
        .expect("some rule pops a 1");
    let from = ocs.rules[pop_one].from;
    assert!(ocs.apply(from, &mut vec![Sym::Bot], pop_one).is_err());
    let mut stack = vec![Sym::Bot, Sym::One];
    assert_eq!(
        ocs.apply(from, &mut stack, pop_one),
        Ok(ocs.rules[pop_one].to)
    );
    assert_eq!(stack, vec![Sym::Bot]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reachable_witnesses_replay(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=2);
        let net = random_two_chain(&mut rng, 3, k, 2);
        let ix = NetIndex::new(&net).unwrap();
        let ocs = build_oca_with(&net, ClockCaps::PerClock).unwrap();
        for la in 0..ix.automata[0].locations.len() {
            for lb in 0..ix.automata[1].locations.len() {
                let target = Target {
                    locations: vec![(0, la), (1, lb)],
                    channels_empty: true,
                    ..Target::default()
                };
                if let (OcaVerdict::Reachable { init, trace, oca_init, oca_witness }, _) =
                    cta::oca::decide_with(&net, &ocs, &target).unwrap()
                {
                    let end = replay(&ix, &init, &trace).unwrap();
                    prop_assert!(target.matches(end.last().unwrap()));
                    prop_assert_eq!(check_counter_encoding(&ocs, oca_init, &oca_witness), Ok(()));
                }
            }
        }
    }

    #[test]
    fn stack_keeps_its_shape(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=2);
        let net = random_two_chain(&mut rng, 3, k, 2);
        let ocs = build_oca(&net).unwrap();
        let mut state = ocs.initial[0];
        let mut stack = vec![Sym::Bot];
        for _ in 0..200 {
            let options: Vec<usize> = ocs.out[state]
                .iter()
                .copied()
                .filter(|&r| {
                    let rule = &ocs.rules[r];
                    match rule.kind {
                        RuleKind::Pop(s) => stack.last() == Some(&s),
                        RuleKind::Push(_) => stack.len() < 6,
                        RuleKind::Int => true,
                    }
                })
                .collect();
            let Some(&r) = options.choose(&mut rng) else { break };
            state = ocs.apply(state, &mut stack, r).unwrap();
            let s = &ocs.states[state];
            prop_assert!(s.counter <= ocs.k);
            // `⊥` only at the bottom, ones above it.
            prop_assert!(stack.iter().skip(1).all(|&x| x == Sym::One));
            if s.is_plain() {
                prop_assert_eq!(stack.first(), Some(&Sym::Bot));
                prop_assert!(stack.len() == 1 || s.counter == ocs.k);
            }
        }
    }
}
