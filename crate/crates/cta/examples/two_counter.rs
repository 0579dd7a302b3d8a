//! A two-counter machine, its three-automata simulation and the crosscheck
//! of ghost clocks against the machine's counters.
//!
//! Run with `cargo run --release --example two_counter`.

use cta::gadgets::{
    crosscheck_gadget, gen_three_cta, run_2cm, CrosscheckReport, TwoCounterMachine,
};
use cta::model::validate_network;

fn main() {
    let m = TwoCounterMachine::parse(include_str!("../models/transfer.2cm.json"))
        .expect("program parses");
    println!("{:?}", run_2cm(&m, 100));

    let net = gen_three_cta(&m, false);
    println!(
        "{} automata, {} messages, {} diagnostics",
        net.automata.len(),
        net.alphabet.len(),
        validate_network(&net).len()
    );

    match crosscheck_gadget(&m, 100).expect("machine halts") {
        CrosscheckReport::Success {
            boundaries,
            zero_checks,
            witness_len,
        } => {
            println!("simulation agrees ({witness_len} network moves)");
            for b in &boundaries {
                println!(
                    "  l{:<2} arrivals {:?} counters ({}, {})",
                    b.instruction, b.arrivals, b.c1, b.c2
                );
            }
            for z in &zero_checks {
                println!(
                    "  l{} zero{} age {} -> {}",
                    z.instruction,
                    z.counter,
                    z.age,
                    if z.zero_branch { "zero" } else { "positive" }
                );
            }
        }
        CrosscheckReport::Divergence {
            boundary,
            expected,
            observed,
        } => {
            println!("divergence at boundary {boundary}: expected {expected}, observed {observed}");
        }
    }
}
