//! Print the spine directions, their adjacency, and the four stance supports.

use urchin_sim::geometry::{layout_table, spine_layout, support_candidates, ground_spine, Pose};

fn main() {
    print!("{}", layout_table());
    let pose = Pose::default();
    let layout = spine_layout();
    println!("ground spine: {}", ground_spine(&pose, layout));
    println!("stance supports: {:?}", support_candidates(&pose, layout));
}
