mod common;

use cta::model::{parse_model, Automaton, NetIndex, Network, Rel, Transition, INF};
use cta::regions::{
    build_region_automaton, build_region_automaton_with_caps, region_nonempty, tick_val,
    RegionError, RegionMove,
};
use cta::semantics::{explore_reach, ExploreBounds};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

/// `l0 --(x=2)--> l1`, plus `l0 --(x<1)--> l2` that resets `x`.
fn small() -> Automaton {
    Automaton::new("T", &["l0", "l1", "l2"], "l0", &["x"])
        .with(Transition::new("l0", "l1").guard("x", Rel::Eq, 2))
        .with(
            Transition::new("l0", "l2")
                .guard("x", Rel::Lt, 1)
                .reset("x"),
        )
}

#[test]
fn constant_above_k_is_rejected() {
    let err = build_region_automaton(&small(), 1).unwrap_err();
    assert_eq!(
        err,
        RegionError::ConstantTooLarge {
            clock: "x".into(),
            bound: 2,
            k: 1
        }
    );
}

#[test]
fn tick_saturates_to_infinity() {
    assert_eq!(
        tick_val(&[0, 1, 2, INF], &[2, 2, 2, 2]),
        vec![1, 2, INF, INF]
    );
    assert_eq!(tick_val(&[1, 1], &[1, 3]), vec![INF, 2]);
}

#[test]
fn small_automaton_states() {
    let reg = build_region_automaton(&small(), 2).unwrap();
    let labels: Vec<String> = (0..reg.states.len()).map(|i| reg.state_label(i)).collect();
    for want in ["(l0,0)", "(l0,1)", "(l0,2)", "(l0,inf)", "(l1,2)", "(l2,0)"] {
        assert!(
            labels.iter().any(|l| l == want),
            "missing {want} in {labels:?}"
        );
    }
    // l1 is entered at x=2 only.
    assert!(reg.find_state("l1", &[0]).is_none());
    let path = region_nonempty(&reg, &[1]).unwrap();
    assert_eq!(
        path,
        vec![RegionMove::Tick, RegionMove::Tick, RegionMove::Edge(0)]
    );
}

#[test]
fn unreachable_location_is_empty() {
    let mut a = small().with(Transition::new("l1", "l0").guard("x", Rel::Lt, 1));
    a.locations.push("dead".into());
    let reg = build_region_automaton(&a, 2).unwrap();
    assert!(region_nonempty(&reg, &[3]).is_none());
}

#[test]
fn per_clock_caps() {
    let a = Automaton::new("U", &["l"], "l", &["x", "y"]).with(Transition::new("l", "l").guard(
        "y",
        Rel::Le,
        3,
    ));
    let reg = build_region_automaton_with_caps(&a, &[0, 3]).unwrap();
    assert!(reg.find_state("l", &[INF, 3]).is_some());
    assert!(reg.find_state("l", &[INF, INF]).is_some());
    assert!(reg.find_state("l", &[1, 1]).is_none());
}

#[test]
fn dot_lists_ticks_and_edges() {
    let net = parse_model(include_str!("../models/writer_reader.json")).unwrap();
    let dot = build_region_automaton(&net.automata[0], 1)
        .unwrap()
        .to_dot();
    assert!(dot.starts_with("digraph \"region_A\""));
    assert!(dot.contains("[label=\"(s1,0)\", shape=doublecircle]"));
    assert!(dot.contains("label=\"tick\""));
    assert!(dot.contains("label=\"c!a\""), "{dot}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn infinity_is_absorbing(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=2);
        let a = random_single(&mut rng, 4, k);
        let reg = build_region_automaton(&a, k).unwrap();
        for &(from, to) in &reg.ticks {
            for (u, v) in reg.states[from].val.iter().zip(&reg.states[to].val) {
                prop_assert!(*u != INF || *v == INF);
                prop_assert!(*v == INF || *v == u + 1);
            }
        }
        for e in &reg.edges {
            let t = &a.transitions[e.transition];
            for (c, name) in a.clocks.iter().enumerate() {
                let (u, v) = (reg.states[e.from].val[c], reg.states[e.to].val[c]);
                if t.resets.contains(name) {
                    prop_assert_eq!(v, 0);
                } else {
                    prop_assert_eq!(u, v);
                }
            }
        }
    }

    #[test]
    fn emptiness_agrees_with_exploration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=2);
        let a = random_single(&mut rng, 4, k);
        let reg = build_region_automaton(&a, k).unwrap();
        let net = Network { automata: vec![a.clone()], ..Network::default() };
        let ix = NetIndex::new(&net).unwrap();
        let bounds = ExploreBounds {
            max_steps: 64,
            max_channel_len: 0,
            max_delay_per_step: 1,
            age_cap: k,
        };
        for l in 0..a.locations.len() {
            let regions = region_nonempty(&reg, &[l]).is_some();
            let explored = explore_reach(&ix, &bounds, &|c| c.locs[0] == l).is_reached();
            prop_assert_eq!(regions, explored, "location {}", l);
        }
    }
}
