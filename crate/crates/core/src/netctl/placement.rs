// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{LinkKey, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VnfId(String);

impl VnfId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VnfId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for VnfId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// A virtual link between two VNFs, directed from `src` to `dst`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VlId {
    pub src: VnfId,
    pub dst: VnfId,
}

impl VlId {
    pub fn new(src: impl Into<VnfId>, dst: impl Into<VnfId>) -> Self {
        Self {
            src: src.into(),
            dst: dst.into(),
        }
    }

    pub fn involves(&self, v: &VnfId) -> bool {
        &self.src == v || &self.dst == v
    }
}

impl fmt::Display for VlId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.src, self.dst)
    }
}

/// VNF-to-node and VL-to-links mappings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlacementMap {
    pub node_map: BTreeMap<NodeId, BTreeSet<VnfId>>,
    pub link_map: BTreeMap<VlId, Vec<LinkKey>>,
}

impl PlacementMap {
    pub fn host_of(&self, v: &VnfId) -> Option<&NodeId> {
        self.node_map
            .iter()
            .find(|(_, set)| set.contains(v))
            .map(|(n, _)| n)
    }

    /// VNFs hosted on `n`; empty when none.
    pub fn hosted_on(&self, n: &NodeId) -> impl Iterator<Item = &VnfId> {
        self.node_map.get(n).into_iter().flatten()
    }

    pub fn hosts(&self, n: &NodeId, v: &VnfId) -> bool {
        self.node_map.get(n).is_some_and(|s| s.contains(v))
    }

    /// Moves `v` to `n`, removing it from any previous host.
    pub(crate) fn assign(&mut self, v: &VnfId, n: &NodeId) {
        self.unassign(v);
        self.node_map.entry(n.clone()).or_default().insert(v.clone());
    }

    fn unassign(&mut self, v: &VnfId) {
        self.node_map.retain(|_, set| {
            set.remove(v);
            !set.is_empty()
        });
    }

    /// Every VNF appears on at most one node.
    pub fn check_unique_hosts(&self) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for (n, set) in &self.node_map {
            for v in set {
                if !seen.insert(v) {
                    return Err(format!("VNF '{v}' hosted more than once (again on '{n}')"));
                }
            }
        }
        Ok(())
    }

    /// Placements flattened to `(vnf, host)` pairs in VNF order.
    pub fn vnf_hosts(&self) -> BTreeMap<&VnfId, &NodeId> {
        self.node_map
            .iter()
            .flat_map(|(n, set)| set.iter().map(move |v| (v, n)))
            .collect()
    }
}
