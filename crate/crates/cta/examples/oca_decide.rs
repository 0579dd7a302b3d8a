//! Exact reachability for a writer/reader pair through the one-counter
//! encoding, with the witness lifted back to a network run.
//!
//! Run with `cargo run --example oca_decide`.

use cta::model::{parse_model, NetIndex};
use cta::oca::{build_oca, check_counter_encoding, decide_2cta_reach, render_stack, OcaVerdict};
use cta::semantics::{parse_target, replay};

fn main() {
    let net = parse_model(include_str!("../models/writer_reader.json")).expect("model parses");
    let ix = NetIndex::new(&net).expect("model indexes");

    let ocs = build_oca(&net).expect("two-automata topology");
    println!(
        "one-counter system: {} states, {} rules",
        ocs.states.len(),
        ocs.rules.len()
    );

    for spec in ["A:s2,B:q2", "A:s3,B:q3", "A:s1,B:q2"] {
        let target = parse_target(&ix, spec).expect("target parses");
        let (verdict, stats) = decide_2cta_reach(&net, &target).expect("decidable topology");
        println!(
            "{spec}: reachable={} ({} control states)",
            verdict.is_reachable(),
            stats.control_states
        );
        let OcaVerdict::Reachable { init, trace, .. } = verdict else {
            continue;
        };
        for cfg in replay(&ix, &init, &trace).expect("lifted run replays") {
            println!("  {}", cfg.render(&ix));
        }
    }

    // The counter plus the ones on the stack track the reader's lead.
    let target = parse_target(&ix, "A:s2,B:q2").expect("target parses");
    let (verdict, _) = cta::oca::decide_with(&net, &ocs, &target).expect("decidable topology");
    if let OcaVerdict::Reachable {
        oca_init,
        oca_witness,
        ..
    } = verdict
    {
        check_counter_encoding(&ocs, oca_init, &oca_witness).expect("encoding holds");
        for (s, stack) in ocs.replay(oca_init, &oca_witness).expect("witness replays") {
            println!("  {} {}", ocs.label(s), render_stack(&stack));
        }
    }
}
