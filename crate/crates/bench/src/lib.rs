//! Inputs shared by the benchmarks.

use mrgg_core::experiments::Scenario;
use mrgg_core::Graph;

/// Graph from the bimodal Heaviside scenario, fixed seed.
pub fn bench_graph(n: usize) -> Graph {
    Scenario::bimodal_heaviside().simulate(n, 11, 0).expect("simulation").1
}
