//! An automaton with a channel to itself, simulated by two automata sharing
//! global clocks.
//!
//! Run with `cargo run --release --example selfloop_sim`.

use cta::gadgets::{gen_selfloop_sim, ChannelAutomaton};
use cta::model::{analyze_topology, serialize_model, NetIndex};
use cta::semantics::{explore_reach, ExploreBounds, ExploreOutcome};

fn main() {
    let a: ChannelAutomaton = serde_json::from_str(include_str!("../models/pump.selfloop.json"))
        .expect("automaton parses");
    let net = gen_selfloop_sim(&a);
    println!("{:?}", analyze_topology(&net).classification);
    let ix = NetIndex::new(&net).expect("gadget indexes");

    // Back in `p` with exactly one `a` in flight.
    let p = ix.automata[0].loc("p").unwrap();
    let msg_a = ix.msg("a").unwrap();
    let bounds = ExploreBounds::for_net(&ix, 40, 4);
    let out = explore_reach(&ix, &bounds, &|c| {
        c.locs[0] == p && c.chans[0].len() == 1 && c.chans[0][0].0 == msg_a
    });
    match out {
        ExploreOutcome::Reached { trace, stats, .. } => {
            println!("reached in {} moves ({} states)", trace.len(), stats.states)
        }
        ExploreOutcome::Exhausted { stats } => println!("not reached ({} states)", stats.states),
    }
    println!("{}", serialize_model(&net));
}
