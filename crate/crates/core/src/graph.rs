// SPDX-License-Identifier: Apache-2.0

//! Weighted hardware graph of robots, radio units, switches and servers.
//!
//! Links carry [`LinkMetrics`]; routing always uses the effective (shaped)
//! delay of each link. Switches forward at zero cost, all delay lives on
//! links, and a server destination adds its processing delay once.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netctl::LinkMetrics;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Robot,
    RadioUnit,
    Switch,
    Server,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeKind::Robot => "robot",
            NodeKind::RadioUnit => "radio_unit",
            NodeKind::Switch => "switch",
            NodeKind::Server => "server",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeAttrs {
    pub kind: NodeKind,
    /// Meters. Robot positions are mirrored from the robot simulator.
    pub position: [f64; 2],
    /// Processing/queueing delay; only servers may carry a non-zero value.
    pub proc_delay_ms: f64,
    pub domain: String,
}

impl NodeAttrs {
    pub fn new(kind: NodeKind, position: [f64; 2], domain: impl Into<String>) -> Self {
        Self {
            kind,
            position,
            proc_delay_ms: 0.0,
            domain: domain.into(),
        }
    }

    pub fn server(position: [f64; 2], proc_delay_ms: f64, domain: impl Into<String>) -> Self {
        Self {
            kind: NodeKind::Server,
            position,
            proc_delay_ms,
            domain: domain.into(),
        }
    }
}

/// Unordered node pair, stored with the smaller id first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkKey(NodeId, NodeId);

impl LinkKey {
    pub fn new(a: NodeId, b: NodeId) -> Self {
        if a <= b {
            Self(a, b)
        } else {
            Self(b, a)
        }
    }

    pub fn endpoints(&self) -> (&NodeId, &NodeId) {
        (&self.0, &self.1)
    }

    pub fn contains(&self, n: &NodeId) -> bool {
        &self.0 == n || &self.1 == n
    }

    /// The endpoint opposite to `n`, if `n` is an endpoint.
    pub fn other(&self, n: &NodeId) -> Option<&NodeId> {
        if &self.0 == n {
            Some(&self.1)
        } else if &self.1 == n {
            Some(&self.0)
        } else {
            None
        }
    }
}

impl fmt::Display for LinkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}--{}", self.0, self.1)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("node '{0}' already exists")]
    DuplicateId(NodeId),
    #[error("unknown node '{0}'")]
    UnknownNode(NodeId),
    #[error("link {0} already exists")]
    DuplicateLink(LinkKey),
    #[error("self-loop on '{0}'")]
    SelfLoop(NodeId),
    #[error("no link between '{0}' and '{1}'")]
    UnknownLink(NodeId, NodeId),
    #[error("no path from '{0}' to '{1}'")]
    Unreachable(NodeId, NodeId),
    #[error("invalid attributes for '{0}': {1}")]
    InvalidAttrs(NodeId, String),
    #[error("invalid link {0}: {1}")]
    InvalidLink(LinkKey, String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub path: Vec<NodeId>,
    pub delay_ms: f64,
}

#[derive(Debug, Clone, Default)]
pub struct HardwareGraph {
    nodes: BTreeMap<NodeId, NodeAttrs>,
    links: BTreeMap<LinkKey, LinkMetrics>,
    adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl HardwareGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: NodeId, attrs: NodeAttrs) -> Result<NodeId, GraphError> {
        if self.nodes.contains_key(&id) {
            return Err(GraphError::DuplicateId(id));
        }
        if !attrs.proc_delay_ms.is_finite() || attrs.proc_delay_ms < 0.0 {
            return Err(GraphError::InvalidAttrs(id, "proc_delay_ms must be finite and >= 0".into()));
        }
        if attrs.kind != NodeKind::Server && attrs.proc_delay_ms != 0.0 {
            return Err(GraphError::InvalidAttrs(id, "only servers carry a processing delay".into()));
        }
        if !attrs.position.iter().all(|c| c.is_finite()) {
            return Err(GraphError::InvalidAttrs(id, "position must be finite".into()));
        }
        self.nodes.insert(id.clone(), attrs);
        self.adjacency.insert(id.clone(), BTreeSet::new());
        debug_assert_eq!(self.check_invariants(), Ok(()));
        Ok(id)
    }

    pub fn add_link(&mut self, a: &NodeId, b: &NodeId, metrics: LinkMetrics) -> Result<(), GraphError> {
        let ka = self.kind(a)?;
        let kb = self.kind(b)?;
        if a == b {
            return Err(GraphError::SelfLoop(a.clone()));
        }
        let key = LinkKey::new(a.clone(), b.clone());
        if self.links.contains_key(&key) {
            return Err(GraphError::DuplicateLink(key));
        }
        if let Err(msg) = metrics.validate() {
            return Err(GraphError::InvalidLink(key, msg));
        }
        let robot_end = match (ka, kb) {
            (NodeKind::Robot, NodeKind::RadioUnit) => Some(a),
            (NodeKind::RadioUnit, NodeKind::Robot) => Some(b),
            (NodeKind::Robot, _) | (_, NodeKind::Robot) => {
                return Err(GraphError::InvalidLink(key, "robots only link to radio units".into()));
            }
            _ => None,
        };
        if let Some(r) = robot_end {
            if !self.adjacency[r].is_empty() {
                return Err(GraphError::InvalidLink(key, format!("robot '{r}' already has a wireless link")));
            }
        }
        self.links.insert(key, metrics);
        self.adjacency.get_mut(a).expect("checked").insert(b.clone());
        self.adjacency.get_mut(b).expect("checked").insert(a.clone());
        debug_assert_eq!(self.check_invariants(), Ok(()));
        Ok(())
    }

    pub fn remove_link(&mut self, a: &NodeId, b: &NodeId) -> Result<LinkMetrics, GraphError> {
        let key = LinkKey::new(a.clone(), b.clone());
        let metrics = self
            .links
            .remove(&key)
            .ok_or_else(|| GraphError::UnknownLink(a.clone(), b.clone()))?;
        self.adjacency.get_mut(a).expect("endpoint").remove(b);
        self.adjacency.get_mut(b).expect("endpoint").remove(a);
        Ok(metrics)
    }

    pub fn node(&self, id: &NodeId) -> Result<&NodeAttrs, GraphError> {
        self.nodes.get(id).ok_or_else(|| GraphError::UnknownNode(id.clone()))
    }

    pub fn kind(&self, id: &NodeId) -> Result<NodeKind, GraphError> {
        self.node(id).map(|n| n.kind)
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&NodeId, &NodeAttrs)> {
        self.nodes.iter()
    }

    /// Node ids of the given kind, in id order.
    pub fn nodes_of_kind(&self, kind: NodeKind) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|(_, a)| a.kind == kind)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn links(&self) -> impl Iterator<Item = (&LinkKey, &LinkMetrics)> {
        self.links.iter()
    }

    pub fn link(&self, a: &NodeId, b: &NodeId) -> Result<&LinkMetrics, GraphError> {
        self.links
            .get(&LinkKey::new(a.clone(), b.clone()))
            .ok_or_else(|| GraphError::UnknownLink(a.clone(), b.clone()))
    }

    pub fn link_mut(&mut self, a: &NodeId, b: &NodeId) -> Result<&mut LinkMetrics, GraphError> {
        self.links
            .get_mut(&LinkKey::new(a.clone(), b.clone()))
            .ok_or_else(|| GraphError::UnknownLink(a.clone(), b.clone()))
    }

    pub fn neighbors(&self, id: &NodeId) -> impl Iterator<Item = &NodeId> {
        self.adjacency.get(id).into_iter().flatten()
    }

    pub fn set_position(&mut self, id: &NodeId, position: [f64; 2]) -> Result<(), GraphError> {
        let node = self
            .nodes
            .get_mut(id)
            .ok_or_else(|| GraphError::UnknownNode(id.clone()))?;
        node.position = position;
        Ok(())
    }

    /// Minimum effective-delay route, counting links only.
    ///
    /// Among equal-delay routes the lexicographically smallest node-id
    /// sequence wins.
    pub fn link_route(&self, src: &NodeId, dst: &NodeId) -> Result<Route, GraphError> {
        self.node(src)?;
        self.node(dst)?;

        let mut settled: BTreeSet<&NodeId> = BTreeSet::new();
        let mut heap = BinaryHeap::new();
        heap.push(Reverse(Label {
            delay_ms: 0.0,
            path: vec![src.clone()],
        }));

        while let Some(Reverse(label)) = heap.pop() {
            let at = label.path.last().expect("non-empty path");
            let Some((at, _)) = self.adjacency.get_key_value(at) else {
                continue;
            };
            if !settled.insert(at) {
                continue;
            }
            if at == dst {
                return Ok(Route {
                    path: label.path,
                    delay_ms: label.delay_ms,
                });
            }
            for next in &self.adjacency[at] {
                if settled.contains(next) {
                    continue;
                }
                let link = &self.links[&LinkKey::new(at.clone(), next.clone())];
                let mut path = label.path.clone();
                path.push(next.clone());
                heap.push(Reverse(Label {
                    delay_ms: label.delay_ms + link.effective_delay_ms(),
                    path,
                }));
            }
        }
        Err(GraphError::Unreachable(src.clone(), dst.clone()))
    }

    /// Route cost including the destination's processing delay when it is a server.
    pub fn shortest_effective_delay_path(&self, src: &NodeId, dst: &NodeId) -> Result<Route, GraphError> {
        let mut route = self.link_route(src, dst)?;
        route.delay_ms += self.nodes[dst].proc_delay_ms;
        Ok(route)
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        for (key, metrics) in &self.links {
            let (a, b) = key.endpoints();
            if a == b {
                return Err(format!("self-loop {key}"));
            }
            let (Some(na), Some(nb)) = (self.nodes.get(a), self.nodes.get(b)) else {
                return Err(format!("dangling link {key}"));
            };
            if !self.adjacency[a].contains(b) || !self.adjacency[b].contains(a) {
                return Err(format!("adjacency out of sync for {key}"));
            }
            metrics.validate().map_err(|e| format!("{key}: {e}"))?;
            let robots = [na.kind, nb.kind].iter().filter(|k| **k == NodeKind::Robot).count();
            let rus = [na.kind, nb.kind].iter().filter(|k| **k == NodeKind::RadioUnit).count();
            if robots > 0 && !(robots == 1 && rus == 1) {
                return Err(format!("robot link {key} is not robot-to-radio-unit"));
            }
        }
        let adjacency_edges: usize = self.adjacency.values().map(BTreeSet::len).sum();
        if adjacency_edges != 2 * self.links.len() {
            return Err("adjacency has stale entries".into());
        }
        for (id, attrs) in &self.nodes {
            if attrs.kind != NodeKind::Server && attrs.proc_delay_ms != 0.0 {
                return Err(format!("non-server '{id}' has processing delay"));
            }
            if attrs.kind == NodeKind::Robot && self.adjacency[id].len() > 1 {
                return Err(format!("robot '{id}' has more than one wireless link"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Label {
    delay_ms: f64,
    path: Vec<NodeId>,
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.delay_ms
            .total_cmp(&other.delay_ms)
            .then_with(|| self.path.cmp(&other.path))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Label {}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> NodeId {
        NodeId::from(s)
    }

    fn wired(d: f64) -> LinkMetrics {
        LinkMetrics::new(d, 10_000.0)
    }

    fn switches(names: &[&str]) -> HardwareGraph {
        let mut g = HardwareGraph::new();
        for n in names {
            g.add_node(id(n), NodeAttrs::new(NodeKind::Switch, [0.0, 0.0], "d1")).unwrap();
        }
        g
    }

    #[test]
    fn add_node_and_duplicate() {
        let mut g = HardwareGraph::new();
        g.add_node(id("fog1"), NodeAttrs::server([0.0, 0.0], 0.0, "d1")).unwrap();
        assert_eq!(g.node_count(), 1);
        let err = g
            .add_node(id("fog1"), NodeAttrs::server([0.0, 0.0], 0.0, "d1"))
            .unwrap_err();
        assert_eq!(err, GraphError::DuplicateId(id("fog1")));
    }

    #[test]
    fn proc_delay_only_on_servers() {
        let mut g = HardwareGraph::new();
        let mut attrs = NodeAttrs::new(NodeKind::Switch, [0.0, 0.0], "d1");
        attrs.proc_delay_ms = 1.0;
        assert!(matches!(g.add_node(id("sw"), attrs), Err(GraphError::InvalidAttrs(..))));
    }

    #[test]
    fn link_errors() {
        let mut g = switches(&["a", "b"]);
        g.add_link(&id("a"), &id("b"), wired(0.1)).unwrap();
        assert_eq!(g.link(&id("b"), &id("a")).unwrap().d_ms, 0.1);
        assert!(matches!(g.add_link(&id("a"), &id("a"), wired(1.0)), Err(GraphError::SelfLoop(_))));
        assert!(matches!(g.add_link(&id("b"), &id("a"), wired(1.0)), Err(GraphError::DuplicateLink(_))));
        assert!(matches!(g.add_link(&id("a"), &id("zz"), wired(1.0)), Err(GraphError::UnknownNode(_))));
    }

    #[test]
    fn robots_link_only_to_one_radio_unit() {
        let mut g = switches(&["sw"]);
        g.add_node(id("r"), NodeAttrs::new(NodeKind::Robot, [0.0, 0.0], "d1")).unwrap();
        g.add_node(id("R1"), NodeAttrs::new(NodeKind::RadioUnit, [0.0, 0.0], "d1")).unwrap();
        g.add_node(id("R2"), NodeAttrs::new(NodeKind::RadioUnit, [0.0, 0.0], "d1")).unwrap();
        assert!(matches!(g.add_link(&id("r"), &id("sw"), wired(1.0)), Err(GraphError::InvalidLink(..))));
        g.add_link(&id("r"), &id("R1"), wired(1.0)).unwrap();
        assert!(matches!(g.add_link(&id("R2"), &id("r"), wired(1.0)), Err(GraphError::InvalidLink(..))));
        g.remove_link(&id("R1"), &id("r")).unwrap();
        g.add_link(&id("R2"), &id("r"), wired(1.0)).unwrap();
        assert_eq!(g.check_invariants(), Ok(()));
    }

    #[test]
    fn parallel_two_hop_paths_pick_cheaper() {
        let mut g = switches(&["s", "x", "y", "t"]);
        g.add_link(&id("s"), &id("x"), wired(3.0)).unwrap();
        g.add_link(&id("x"), &id("t"), wired(4.0)).unwrap();
        g.add_link(&id("s"), &id("y"), wired(2.0)).unwrap();
        g.add_link(&id("y"), &id("t"), wired(2.0)).unwrap();
        let r = g.shortest_effective_delay_path(&id("s"), &id("t")).unwrap();
        assert_eq!(r.path, vec![id("s"), id("y"), id("t")]);
        assert_eq!(r.delay_ms, 4.0);
    }

    #[test]
    fn equal_delay_paths_break_ties_lexicographically() {
        let mut g = switches(&["s", "b", "a", "t"]);
        g.add_link(&id("s"), &id("b"), wired(1.0)).unwrap();
        g.add_link(&id("b"), &id("t"), wired(1.0)).unwrap();
        g.add_link(&id("s"), &id("a"), wired(1.0)).unwrap();
        g.add_link(&id("a"), &id("t"), wired(1.0)).unwrap();
        let r = g.link_route(&id("s"), &id("t")).unwrap();
        assert_eq!(r.path, vec![id("s"), id("a"), id("t")]);
    }

    #[test]
    fn identity_route_and_unreachable() {
        let g = switches(&["a", "b"]);
        let r = g.shortest_effective_delay_path(&id("a"), &id("a")).unwrap();
        assert_eq!(r.path, vec![id("a")]);
        assert_eq!(r.delay_ms, 0.0);
        assert!(matches!(
            g.shortest_effective_delay_path(&id("a"), &id("b")),
            Err(GraphError::Unreachable(..))
        ));
    }

    #[test]
    fn server_destination_adds_processing_delay() {
        let mut g = switches(&["sw"]);
        g.add_node(id("cloud"), NodeAttrs::server([0.0, 0.0], 10.0, "d1")).unwrap();
        g.add_link(&id("sw"), &id("cloud"), wired(2.0)).unwrap();
        let r = g.shortest_effective_delay_path(&id("sw"), &id("cloud")).unwrap();
        assert_eq!(r.delay_ms, 12.0);
        assert_eq!(g.link_route(&id("sw"), &id("cloud")).unwrap().delay_ms, 2.0);
    }

    #[test]
    fn routing_uses_shaped_delay() {
        let mut g = switches(&["s", "x", "y", "t"]);
        g.add_link(&id("s"), &id("x"), wired(1.0)).unwrap();
        g.add_link(&id("x"), &id("t"), wired(1.0)).unwrap();
        g.add_link(&id("s"), &id("y"), wired(1.5)).unwrap();
        g.add_link(&id("y"), &id("t"), wired(1.5)).unwrap();
        g.link_mut(&id("s"), &id("x")).unwrap().psi = 3.0;
        let r = g.link_route(&id("s"), &id("t")).unwrap();
        assert_eq!(r.path, vec![id("s"), id("y"), id("t")]);
        assert_eq!(r.delay_ms, 3.0);
    }
}
