//! Bounded breadth-first exploration of the writer/reader network.
//!
//! Run with `cargo run --example explore_reach`.

use cta::model::{parse_model, NetIndex};
use cta::semantics::{
    explore_reach, initial_configurations, parse_target, replay, ExploreBounds, ExploreOutcome,
};

fn main() {
    let net = parse_model(include_str!("../models/writer_reader.json")).expect("model parses");
    let ix = NetIndex::new(&net).expect("model indexes");
    let target = parse_target(&ix, "A:s2,B:q2,channel-empty").expect("target parses");
    let bounds = ExploreBounds::for_net(&ix, 30, 4);

    match explore_reach(&ix, &bounds, &|c| target.matches(c)) {
        ExploreOutcome::Reached { init, trace, stats } => {
            println!(
                "reached after {} moves ({} states)",
                trace.len(),
                stats.states
            );
            for cfg in replay(&ix, &init, &trace).expect("witness replays") {
                println!("  {}", cfg.render(&ix));
            }
        }
        ExploreOutcome::Exhausted { stats } => {
            println!("not reached within bounds ({} states)", stats.states);
        }
    }
    let init = &initial_configurations(&ix)[0];
    println!("initial: {}", init.render(&ix));
}
