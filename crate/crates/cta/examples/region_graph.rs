//! Region automaton of a single automaton, its emptiness check and DOT.
//!
//! Run with `cargo run --example region_graph`.

use cta::model::parse_model;
use cta::regions::{build_region_automaton, region_nonempty};

fn main() {
    let net = parse_model(include_str!("../models/writer_reader.json")).expect("model parses");
    for a in &net.automata {
        let reg = build_region_automaton(a, 1).expect("constants within K");
        println!(
            "{}: {} region states, {} ticks, {} edges",
            a.id,
            reg.states.len(),
            reg.ticks.len(),
            reg.edges.len()
        );
        for i in 0..reg.states.len() {
            println!("  {}", reg.state_label(i));
        }
        let finals: Vec<usize> = a
            .finals
            .iter()
            .filter_map(|f| a.locations.iter().position(|l| l == f))
            .collect();
        match region_nonempty(&reg, &finals) {
            Some(w) => println!("  final location reachable in {} moves: {w:?}", w.len()),
            None => println!("  final location unreachable"),
        }
    }
    let reg = build_region_automaton(&net.automata[0], 1).expect("constants within K");
    print!("{}", reg.to_dot());
}
