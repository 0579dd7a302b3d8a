//! A bounded-context run of a two-way network translated into the
//! multistack system, with channels reconstructed from the stacks, and a
//! phase-bounded search for a target.
//!
//! Run with `cargo run --release --example bmps_simulate`.

use cta::bmps::{
    build_bmps, count_phases, phase_bounded_reach, project_to_cta, reconstruct_channel,
    simulate_cta_trace, PhaseOutcome, SearchBudget,
};
use cta::model::{parse_model, NetIndex};
use cta::semantics::{annotate_contexts, initial_configurations, render_word, replay, Move};

fn main() {
    let net = parse_model(include_str!("../models/two_way.json")).expect("model parses");
    let ix = NetIndex::new(&net).expect("model indexes");
    let d = |automaton, transition| Move::Discrete {
        automaton,
        transition,
    };
    let moves = vec![
        d(1, 0),
        d(1, 0),
        d(0, 0),
        d(1, 1),
        Move::Elapse(1),
        d(0, 1),
        d(0, 2),
        Move::Elapse(1),
        d(0, 3),
    ];
    let init = initial_configurations(&ix).remove(0);
    let cfgs = replay(&ix, &init, &moves).expect("run replays");
    let contexts = annotate_contexts(&ix, &init, &moves).expect("run replays");
    println!("{contexts}");

    let bmps = build_bmps(&ix, 4);
    let run = simulate_cta_trace(&bmps, &init, &moves, &contexts).expect("run translates");
    for ((control, stacks), cfg) in run.points.iter().zip(&cfgs) {
        let chans: Vec<String> = (0..ix.channels.len())
            .map(|ch| {
                let w =
                    reconstruct_channel(&bmps, control, stacks, ch).expect("well-formed stacks");
                render_word(&ix, &w)
            })
            .collect();
        println!("{:<40} {}", bmps.render_control(control), chans.join(" | "));
        println!("{:<40} {}", "", cfg.render(&ix));
    }
    println!(
        "{} multistack steps, {} phases",
        run.trace.steps.len(),
        count_phases(&run.trace.popped())
    );

    let goal = (
        ix.automata[0].loc("p2").unwrap(),
        ix.automata[1].loc("q3").unwrap(),
    );
    let out = phase_bounded_reach(
        &bmps,
        12,
        SearchBudget {
            max_steps: 60,
            max_stack_depth: 6,
        },
        &|c, _| c.locs == [goal.0, goal.1],
    );
    match out {
        PhaseOutcome::Reached(trace) => {
            let (init, moves) = project_to_cta(&bmps, &trace);
            let end = replay(&ix, &init, &moves).expect("projection replays");
            println!("A1:p2,A2:q3 reached: {}", end.last().unwrap().render(&ix));
        }
        PhaseOutcome::BudgetExhausted { states } => {
            println!("budget exhausted after {states} states")
        }
    }
}
