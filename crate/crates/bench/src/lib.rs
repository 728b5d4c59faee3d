// SPDX-License-Identifier: Apache-2.0

//! Fixtures shared by the benchmarks.

use edgesim::graph::{HardwareGraph, NodeAttrs, NodeId, NodeKind};
use edgesim::netctl::LinkMetrics;

/// A `width` x `height` grid of switches with a server in the far corner and
/// deterministic, non-uniform link delays.
pub fn grid_graph(width: usize, height: usize) -> HardwareGraph {
    let mut g = HardwareGraph::new();
    let id = |x: usize, y: usize| NodeId::new(format!("s{x}_{y}"));
    for y in 0..height {
        for x in 0..width {
            g.add_node(id(x, y), NodeAttrs::new(NodeKind::Switch, [x as f64, y as f64], "d"))
                .expect("fresh id");
        }
    }
    for y in 0..height {
        for x in 0..width {
            let d = 0.1 + ((x * 7 + y * 13) % 10) as f64 * 0.05;
            if x + 1 < width {
                g.add_link(&id(x, y), &id(x + 1, y), LinkMetrics::new(d, 1000.0)).expect("new link");
            }
            if y + 1 < height {
                g.add_link(&id(x, y), &id(x, y + 1), LinkMetrics::new(d * 1.5, 1000.0)).expect("new link");
            }
        }
    }
    let server = NodeId::new("server");
    g.add_node(server.clone(), NodeAttrs::server([width as f64, height as f64], 1.0, "d"))
        .expect("fresh id");
    g.add_link(&id(width - 1, height - 1), &server, LinkMetrics::new(0.5, 1000.0))
        .expect("new link");
    g
}
