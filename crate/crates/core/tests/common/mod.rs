// SPDX-License-Identifier: Apache-2.0

//! Independent oracles shared by the integration and acceptance tests.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use edgesim::graph::{HardwareGraph, NodeAttrs, NodeId, NodeKind, Route};
use edgesim::netctl::LinkMetrics;
use edgesim::robot::SensorVector;
use edgesim::SimTime;
use rand::Rng;

/// Random connected-or-not graph with `n` nodes (`n0` .. `n{n-1}`), integer
/// link delays in 1..=5, psi in {1, 2}, and a server as the last node.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, edge_p: f64) -> HardwareGraph {
    let mut g = HardwareGraph::new();
    for i in 0..n {
        let attrs = if i == n - 1 {
            NodeAttrs::server([0.0, 0.0], rng.random_range(0..=3) as f64, "d")
        } else {
            NodeAttrs::new(NodeKind::Switch, [0.0, 0.0], "d")
        };
        g.add_node(NodeId::new(format!("n{i}")), attrs).unwrap();
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(edge_p) {
                let mut m = LinkMetrics::new(rng.random_range(1..=5) as f64, 1000.0);
                m.psi = rng.random_range(1..=2) as f64;
                g.add_link(&NodeId::new(format!("n{i}")), &NodeId::new(format!("n{j}")), m)
                    .unwrap();
            }
        }
    }
    g
}

/// Exhaustive simple-path enumeration: minimum effective delay (links plus
/// destination processing), ties broken by the lexicographically smallest
/// node sequence.
pub fn brute_force_route(g: &HardwareGraph, src: &NodeId, dst: &NodeId) -> Option<Route> {
    let proc = g.node(dst).ok()?.proc_delay_ms;
    let mut best: Option<Route> = None;
    let mut path = vec![src.clone()];
    fn dfs(
        g: &HardwareGraph,
        dst: &NodeId,
        proc: f64,
        path: &mut Vec<NodeId>,
        acc: f64,
        best: &mut Option<Route>,
    ) {
        let here = path.last().unwrap().clone();
        if &here == dst {
            let delay = acc + proc;
            let better = match best {
                None => true,
                Some(b) => delay < b.delay_ms || (delay == b.delay_ms && *path < b.path),
            };
            if better {
                *best = Some(Route {
                    path: path.clone(),
                    delay_ms: delay,
                });
            }
            return;
        }
        let next: Vec<NodeId> = g.neighbors(&here).cloned().collect();
        for nb in next {
            if path.contains(&nb) {
                continue;
            }
            let d = g.link(&here, &nb).unwrap().effective_delay_ms();
            path.push(nb);
            dfs(g, dst, proc, path, acc + d, best);
            path.pop();
        }
    }
    dfs(g, dst, proc, &mut path, 0.0, &mut best);
    best
}

fn ceil_to(t: SimTime, step: SimTime) -> SimTime {
    t.div_ceil(step) * step
}

fn next_boundary_after(t: SimTime, interval: SimTime) -> SimTime {
    (t / interval + 1) * interval
}

/// Request submission to on-chain AttachDone, in ms, from the configured
/// phase constants.
pub fn federation_closed_form(
    t_request: SimTime,
    block_ms: SimTime,
    tick_ms: SimTime,
    deploy_ms: SimTime,
    attach_ms: SimTime,
) -> SimTime {
    let b1 = next_boundary_after(t_request, block_ms);
    let t_deployed = ceil_to(b1 + tick_ms + deploy_ms, tick_ms);
    let b3 = next_boundary_after(t_deployed, block_ms);
    let t_attached = ceil_to(b3 + tick_ms + attach_ms, tick_ms);
    let b4 = next_boundary_after(t_attached, block_ms);
    b4 - t_request
}

/// Rebuilds each robot's embedding vector from the `phi.*` and `sigma.*`
/// rows of an exported snapshots.csv, keyed by (t_ms, robot).
pub fn kappa_from_csv(dir: &Path, rus: &[NodeId]) -> BTreeMap<(SimTime, String), Vec<f64>> {
    let mut phi: BTreeMap<(SimTime, String), BTreeMap<String, f64>> = BTreeMap::new();
    let mut sigma: BTreeMap<(SimTime, String), BTreeMap<String, f64>> = BTreeMap::new();
    let mut rdr = csv::Reader::from_path(dir.join("snapshots.csv")).unwrap();
    for row in rdr.records() {
        let row = row.unwrap();
        if &row[1] != "robot" {
            continue;
        }
        let key = (row[0].parse::<SimTime>().unwrap(), row[2].to_owned());
        let value: f64 = row[4].parse().unwrap();
        if let Some(ru) = row[3].strip_prefix("phi.") {
            phi.entry(key).or_default().insert(ru.to_owned(), value);
        } else if let Some(f) = row[3].strip_prefix("sigma.") {
            sigma.entry(key).or_default().insert(f.to_owned(), value);
        }
    }
    sigma
        .into_iter()
        .map(|(key, s)| {
            let p = phi.get(&key).cloned().unwrap_or_default();
            let mut v: Vec<f64> = rus.iter().map(|ru| p[ru.as_str()]).collect();
            v.extend(SensorVector::FIELDS.iter().map(|f| s[*f]));
            (key, v)
        })
        .collect()
}
