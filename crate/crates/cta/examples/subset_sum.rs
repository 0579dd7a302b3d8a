//! Subset-sum instances decided through the writer/reader reduction.
//!
//! Run with `cargo run --release --example subset_sum`.

use cta::gadgets::gen_subset_sum;
use cta::model::NetIndex;
use cta::oca::decide_2cta_reach;
use cta::semantics::parse_target;

fn main() {
    for (set, c) in [
        (vec![3, 5, 7], 12),
        (vec![3, 5, 7], 11),
        (vec![2, 4, 6, 8], 0),
    ] {
        let net = gen_subset_sum(&set, c);
        let ix = NetIndex::new(&net).expect("gadget indexes");
        let target = parse_target(&ix, "B:r_f").expect("target parses");
        let (verdict, stats) = decide_2cta_reach(&net, &target).expect("decidable topology");
        println!(
            "S={set:?} c={c}: {} ({} control states)",
            if verdict.is_reachable() {
                "solvable"
            } else {
                "unsolvable"
            },
            stats.control_states
        );
    }
}
