//! Builds the pricing graph of the tiny instance at zero duals, prints its
//! shortest path and every source-to-sink path, and writes Graphviz DOT.
//!
//! cargo run --example pricing_graph > tiny.dot

use mcsp::column::AllowedStates;
use mcsp::cost::Settlement;
use mcsp::instance::{Instance, RequestIndex};
use mcsp::pricing::build_graph;
use mcsp::rmp::DualPrices;

fn main() {
    let inst = Instance::tiny();
    let idx = RequestIndex::new(&inst);
    let duals = DualPrices::zeros(&inst);
    let graph = build_graph(0, 0, &duals, &inst, &idx, &AllowedStates::all(&inst), Settlement::Paper);
    let (col, value) = graph.shortest_path().expect("the graph has a path");
    eprintln!("{} nodes, {} arcs; shortest path {col} of length {value}", graph.nodes.len(), graph.arcs.len());
    for (c, len) in graph.enumerate_paths() {
        eprintln!("  {c}: {len}");
    }
    print!("{}", graph.to_dot());
}
