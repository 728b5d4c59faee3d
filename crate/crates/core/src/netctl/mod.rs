// SPDX-License-Identifier: Apache-2.0

//! Network control: link measurement and emulation, radio attachment with
//! handover windows, and VNF/VL placement (the VIM role).
//!
//! The controller owns the [`HardwareGraph`]. Wireless robot-to-RU links are
//! created and destroyed here as attachments change, and their base delay is
//! refreshed from the radio model every tick.

mod metrics;
mod placement;
mod radio;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{GraphError, HardwareGraph, LinkKey, NodeId, NodeKind};
use crate::SimTime;

pub use metrics::{LinkMeasurement, LinkMetrics};
pub use placement::{PlacementMap, VlId, VnfId};
pub use radio::{distance, RadioModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("no link between '{0}' and '{1}'")]
    UnknownLink(NodeId, NodeId),
    #[error("invalid shaping factors psi={psi} delta={delta} (both must be >= 1)")]
    InvalidFactor { psi: f64, delta: f64 },
    #[error("'{node}' is a {actual}, expected {expected}")]
    WrongKind {
        node: NodeId,
        expected: &'static str,
        actual: NodeKind,
    },
    #[error("'{ru}' out of range for '{robot}' (rssi {rssi_dbm:.2} dBm)")]
    OutOfRange { robot: NodeId, ru: NodeId, rssi_dbm: f64 },
    #[error("handover already in progress for '{0}'")]
    HandoverInProgress(NodeId),
    #[error("robot '{0}' is not attached")]
    Unattached(NodeId),
    #[error("VNF '{0}' is not placed")]
    VnfNotPlaced(VnfId),
    #[error("broken path: {0}")]
    BrokenPath(String),
    #[error("endpoint mismatch: {0}")]
    EndpointMismatch(String),
}

impl NetError {
    fn from_link_lookup(e: GraphError) -> Self {
        match e {
            GraphError::UnknownLink(a, b) => NetError::UnknownLink(a, b),
            other => NetError::Graph(other),
        }
    }
}

/// RU context vector: `[rssi_dbm, tx_rate_mbps, rx_rate_mbps, attached_count]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuContext {
    pub rssi_dbm: f64,
    pub tx_rate_mbps: f64,
    pub rx_rate_mbps: f64,
    pub attached_count: f64,
}

impl RuContext {
    pub const FIELDS: [&'static str; 4] = ["rssi_dbm", "tx_rate_mbps", "rx_rate_mbps", "attached_count"];

    pub fn to_array(&self) -> [f64; 4] {
        [self.rssi_dbm, self.tx_rate_mbps, self.rx_rate_mbps, self.attached_count]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttachmentState {
    phi: BTreeMap<NodeId, Option<NodeId>>,
    handover_until: BTreeMap<NodeId, SimTime>,
}

impl AttachmentState {
    pub fn attached_ru(&self, robot: &NodeId) -> Option<&NodeId> {
        self.phi.get(robot).and_then(Option::as_ref)
    }

    pub fn handover_until(&self, robot: &NodeId) -> Option<SimTime> {
        self.handover_until.get(robot).copied()
    }

    /// A handover window is open while `now < handover_until`.
    pub fn in_handover(&self, robot: &NodeId, now: SimTime) -> bool {
        self.handover_until(robot).is_some_and(|until| now < until)
    }

    pub fn robots(&self) -> impl Iterator<Item = (&NodeId, Option<&NodeId>)> {
        self.phi.iter().map(|(r, ru)| (r, ru.as_ref()))
    }

    pub fn attached_count(&self, ru: &NodeId) -> usize {
        self.phi.values().filter(|a| a.as_ref() == Some(ru)).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingDeploy {
    pub target: NodeId,
    pub ready_at: SimTime,
}

/// Round-trip service time, split into its steady-state part and the
/// remaining handover interruption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceTime {
    pub total_ms: f64,
    pub steady_ms: f64,
    pub handover_remaining_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RefreshReport {
    pub committed: Vec<(VnfId, NodeId)>,
    pub detached: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct NetControl {
    graph: HardwareGraph,
    radio: RadioModel,
    handover_ms: SimTime,
    default_deploy_ms: SimTime,
    deploy_delays: BTreeMap<VnfId, SimTime>,
    /// RUs that only radiate while hosting the given VNF.
    ru_gates: BTreeMap<NodeId, VnfId>,
    attachments: AttachmentState,
    placements: PlacementMap,
    pending: BTreeMap<VnfId, PendingDeploy>,
    now: SimTime,
}

impl NetControl {
    pub fn new(graph: HardwareGraph, radio: RadioModel, handover_ms: SimTime, default_deploy_ms: SimTime) -> Self {
        let attachments = AttachmentState {
            phi: graph
                .nodes_of_kind(NodeKind::Robot)
                .into_iter()
                .map(|r| (r, None))
                .collect(),
            handover_until: BTreeMap::new(),
        };
        Self {
            graph,
            radio,
            handover_ms,
            default_deploy_ms,
            deploy_delays: BTreeMap::new(),
            ru_gates: BTreeMap::new(),
            attachments,
            placements: PlacementMap::default(),
            pending: BTreeMap::new(),
            now: 0,
        }
    }

    pub fn set_deploy_delay(&mut self, v: VnfId, ms: SimTime) {
        self.deploy_delays.insert(v, ms);
    }

    pub fn deploy_delay(&self, v: &VnfId) -> SimTime {
        self.deploy_delays.get(v).copied().unwrap_or(self.default_deploy_ms)
    }

    pub fn gate_ru(&mut self, ru: &NodeId, vnf: VnfId) -> Result<(), NetError> {
        self.expect_kind(ru, NodeKind::RadioUnit, "radio unit")?;
        self.ru_gates.insert(ru.clone(), vnf);
        Ok(())
    }

    pub fn graph(&self) -> &HardwareGraph {
        &self.graph
    }

    pub fn radio(&self) -> &RadioModel {
        &self.radio
    }

    pub fn attachments(&self) -> &AttachmentState {
        &self.attachments
    }

    pub fn placements(&self) -> &PlacementMap {
        &self.placements
    }

    pub fn pending(&self) -> &BTreeMap<VnfId, PendingDeploy> {
        &self.pending
    }

    pub fn handover_ms(&self) -> SimTime {
        self.handover_ms
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    fn expect_kind(&self, n: &NodeId, kind: NodeKind, expected: &'static str) -> Result<(), NetError> {
        let actual = self.graph.kind(n)?;
        if actual != kind {
            return Err(NetError::WrongKind {
                node: n.clone(),
                expected,
                actual,
            });
        }
        Ok(())
    }

    // ---- link measurement and emulation ----

    pub fn set_emulation(&mut self, a: &NodeId, b: &NodeId, psi: f64, delta: f64) -> Result<(), NetError> {
        let link = self.graph.link_mut(a, b).map_err(NetError::from_link_lookup)?;
        if !(psi.is_finite() && psi >= 1.0 && delta.is_finite() && delta >= 1.0) {
            return Err(NetError::InvalidFactor { psi, delta });
        }
        link.psi = psi;
        link.delta = delta;
        Ok(())
    }

    pub fn measure_link(&self, a: &NodeId, b: &NodeId) -> Result<LinkMeasurement, NetError> {
        self.graph
            .link(a, b)
            .map(LinkMeasurement::from)
            .map_err(NetError::from_link_lookup)
    }

    // ---- radio ----

    /// Whether `ru` currently radiates; gated RUs need their VNF hosted.
    pub fn ru_active(&self, ru: &NodeId) -> bool {
        match self.ru_gates.get(ru) {
            Some(v) => self.placements.hosts(ru, v),
            None => true,
        }
    }

    pub fn rssi(&self, ru: &NodeId, robot: &NodeId) -> Result<f64, NetError> {
        let ru_pos = self.graph.node(ru)?.position;
        let robot_pos = self.graph.node(robot)?.position;
        Ok(self.radio.rssi_between(ru_pos, robot_pos))
    }

    pub fn ru_context(&self, ru: &NodeId, robot: &NodeId) -> Result<RuContext, NetError> {
        self.expect_kind(ru, NodeKind::RadioUnit, "radio unit")?;
        self.expect_kind(robot, NodeKind::Robot, "robot")?;
        let rssi_dbm = self.rssi(ru, robot)?;
        let rate = if self.attachments.attached_ru(robot) == Some(ru) {
            self.graph.link(robot, ru)?.effective_throughput_mbps()
        } else {
            0.0
        };
        Ok(RuContext {
            rssi_dbm,
            tx_rate_mbps: rate,
            rx_rate_mbps: rate,
            attached_count: self.attachments.attached_count(ru) as f64,
        })
    }

    /// RU-level context aggregated over all robots: strongest rssi, summed
    /// rates of attached robots.
    pub fn ru_context_aggregate(&self, ru: &NodeId) -> Result<RuContext, NetError> {
        self.expect_kind(ru, NodeKind::RadioUnit, "radio unit")?;
        let mut ctx = RuContext {
            rssi_dbm: f64::NEG_INFINITY,
            tx_rate_mbps: 0.0,
            rx_rate_mbps: 0.0,
            attached_count: 0.0,
        };
        for (robot, attached) in self.attachments.robots() {
            ctx.rssi_dbm = ctx.rssi_dbm.max(self.rssi(ru, robot)?);
            if attached == Some(ru) {
                let rate = self.graph.link(robot, ru)?.effective_throughput_mbps();
                ctx.tx_rate_mbps += rate;
                ctx.rx_rate_mbps += rate;
                ctx.attached_count += 1.0;
            }
        }
        Ok(ctx)
    }

    /// Active RUs at or above the attach threshold, strongest first, ties by id.
    pub fn reachable_rus(&self, robot: &NodeId) -> Vec<(NodeId, f64)> {
        let Ok(pos) = self.graph.node(robot).map(|n| n.position) else {
            return Vec::new();
        };
        self.reachable_from(pos)
    }

    /// Like [`Self::reachable_rus`] but for an arbitrary (e.g. estimated) position.
    pub fn reachable_from(&self, pos: [f64; 2]) -> Vec<(NodeId, f64)> {
        let mut out: Vec<(NodeId, f64)> = self
            .graph
            .nodes()
            .filter(|(id, a)| a.kind == NodeKind::RadioUnit && self.ru_active(id))
            .map(|(id, a)| (id.clone(), self.radio.rssi_between(a.position, pos)))
            .filter(|(_, rssi)| self.radio.in_range(*rssi))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    // ---- attachment ----

    /// Switches `robot` to `ru`; the handover window opens at `effective_at`.
    pub fn handover(&mut self, robot: &NodeId, ru: &NodeId, effective_at: SimTime) -> Result<(), NetError> {
        self.check_attachable(robot, ru)?;
        if self.attachments.in_handover(robot, self.now) {
            return Err(NetError::HandoverInProgress(robot.clone()));
        }
        if self.attachments.attached_ru(robot) == Some(ru) {
            return Ok(());
        }
        self.switch_attachment(robot, Some(ru))?;
        self.attachments
            .handover_until
            .insert(robot.clone(), effective_at + self.handover_ms);
        Ok(())
    }

    /// Initial attachment at provisioning time, without a handover window.
    pub fn attach_now(&mut self, robot: &NodeId, ru: &NodeId) -> Result<(), NetError> {
        self.check_attachable(robot, ru)?;
        if self.attachments.attached_ru(robot) != Some(ru) {
            self.switch_attachment(robot, Some(ru))?;
        }
        Ok(())
    }

    fn check_attachable(&self, robot: &NodeId, ru: &NodeId) -> Result<(), NetError> {
        self.expect_kind(robot, NodeKind::Robot, "robot")?;
        self.expect_kind(ru, NodeKind::RadioUnit, "radio unit")?;
        let rssi_dbm = self.rssi(ru, robot)?;
        if !self.ru_active(ru) || !self.radio.in_range(rssi_dbm) {
            return Err(NetError::OutOfRange {
                robot: robot.clone(),
                ru: ru.clone(),
                rssi_dbm,
            });
        }
        Ok(())
    }

    fn wireless_metrics(&self, robot: &NodeId, ru: &NodeId) -> Result<LinkMetrics, NetError> {
        let rssi = self.rssi(ru, robot)?;
        Ok(LinkMetrics::new(self.radio.hop_delay_ms(rssi), self.radio.wireless_mbps))
    }

    fn switch_attachment(&mut self, robot: &NodeId, ru: Option<&NodeId>) -> Result<(), NetError> {
        let new_link = match ru {
            Some(ru) => Some(self.wireless_metrics(robot, ru)?),
            None => None,
        };
        if let Some(old) = self.attachments.attached_ru(robot).cloned() {
            self.graph.remove_link(robot, &old)?;
            self.invalidate_vls_using(&LinkKey::new(robot.clone(), old));
        }
        if let (Some(ru), Some(metrics)) = (ru, new_link) {
            self.graph.add_link(robot, ru, metrics)?;
        }
        self.attachments.phi.insert(robot.clone(), ru.cloned());
        Ok(())
    }

    // ---- placement ----

    /// Requests `v` on `n`. Takes effect after the VNF's deploy delay; until
    /// then any previous instance keeps serving.
    pub fn place_vnf(&mut self, v: &VnfId, n: &NodeId, effective_at: SimTime) -> Result<(), NetError> {
        self.check_host(n)?;
        if self.placements.host_of(v) == Some(n) {
            self.pending.remove(v);
            return Ok(());
        }
        if self.pending.get(v).is_some_and(|p| &p.target == n) {
            return Ok(());
        }
        let ready_at = effective_at + self.deploy_delay(v);
        self.pending.insert(
            v.clone(),
            PendingDeploy {
                target: n.clone(),
                ready_at,
            },
        );
        Ok(())
    }

    /// Immediate placement, used when provisioning a scenario.
    pub fn place_now(&mut self, v: &VnfId, n: &NodeId) -> Result<(), NetError> {
        self.check_host(n)?;
        self.pending.remove(v);
        self.commit(v, n);
        Ok(())
    }

    fn check_host(&self, n: &NodeId) -> Result<(), NetError> {
        let actual = self.graph.kind(n)?;
        if actual == NodeKind::Switch {
            return Err(NetError::WrongKind {
                node: n.clone(),
                expected: "server, radio unit or robot",
                actual,
            });
        }
        Ok(())
    }

    fn commit(&mut self, v: &VnfId, n: &NodeId) {
        if self.placements.host_of(v) != Some(n) {
            self.placements.assign(v, n);
            self.placements.link_map.retain(|vl, _| !vl.involves(v));
        }
    }

    /// Maps a VL onto a chain of hardware links running from the source
    /// VNF's host to the destination VNF's host.
    pub fn place_vl(&mut self, vl: &VlId, links: &[(NodeId, NodeId)]) -> Result<(), NetError> {
        let src_host = self
            .placements
            .host_of(&vl.src)
            .ok_or_else(|| NetError::VnfNotPlaced(vl.src.clone()))?
            .clone();
        let dst_host = self
            .placements
            .host_of(&vl.dst)
            .ok_or_else(|| NetError::VnfNotPlaced(vl.dst.clone()))?
            .clone();

        let mut at = src_host.clone();
        let mut keys = Vec::with_capacity(links.len());
        for (i, (a, b)) in links.iter().enumerate() {
            if self.graph.link(a, b).is_err() {
                return Err(NetError::BrokenPath(format!("no hardware link {a}--{b}")));
            }
            let next = if a == &at {
                b
            } else if b == &at {
                a
            } else if i == 0 {
                return Err(NetError::EndpointMismatch(format!(
                    "path starts at {a}--{b}, but '{}' is hosted on '{src_host}'",
                    vl.src
                )));
            } else {
                return Err(NetError::BrokenPath(format!("link {a}--{b} does not continue from '{at}'")));
            };
            at = next.clone();
            keys.push(LinkKey::new(a.clone(), b.clone()));
        }
        if at != dst_host {
            return Err(NetError::EndpointMismatch(format!(
                "path ends at '{at}', but '{}' is hosted on '{dst_host}'",
                vl.dst
            )));
        }
        self.placements.link_map.insert(vl.clone(), keys);
        Ok(())
    }

    fn invalidate_vls_using(&mut self, key: &LinkKey) {
        self.placements.link_map.retain(|_, path| !path.contains(key));
    }

    // ---- per-tick refresh ----

    pub fn mirror_position(&mut self, robot: &NodeId, pos: [f64; 2]) -> Result<(), NetError> {
        self.expect_kind(robot, NodeKind::Robot, "robot")?;
        self.graph.set_position(robot, pos)?;
        Ok(())
    }

    /// Advances the controller clock: commits due deployments, refreshes
    /// wireless link delays and drops attachments that lost coverage.
    pub fn refresh(&mut self, now: SimTime) -> Result<RefreshReport, NetError> {
        self.now = now;
        let mut report = RefreshReport::default();

        let due: Vec<(VnfId, NodeId)> = self
            .pending
            .iter()
            .filter(|(_, p)| p.ready_at <= now)
            .map(|(v, p)| (v.clone(), p.target.clone()))
            .collect();
        for (v, n) in due {
            self.pending.remove(&v);
            self.commit(&v, &n);
            report.committed.push((v, n));
        }

        let attached: Vec<(NodeId, NodeId)> = self
            .attachments
            .robots()
            .filter_map(|(r, ru)| ru.map(|ru| (r.clone(), ru.clone())))
            .collect();
        for (robot, ru) in attached {
            let rssi = self.rssi(&ru, &robot)?;
            if !self.ru_active(&ru) || !self.radio.in_range(rssi) {
                self.switch_attachment(&robot, None)?;
                report.detached.push(robot);
                continue;
            }
            self.graph.link_mut(&robot, &ru)?.d_ms = self.radio.hop_delay_ms(rssi);
        }
        Ok(report)
    }

    // ---- service time ----

    pub fn service_time(&self, robot: &NodeId, v: &VnfId) -> Result<ServiceTime, NetError> {
        if self.attachments.attached_ru(robot).is_none() {
            return Err(NetError::Unattached(robot.clone()));
        }
        let host = self
            .placements
            .host_of(v)
            .ok_or_else(|| NetError::VnfNotPlaced(v.clone()))?;
        let route = self.graph.link_route(robot, host)?;
        let proc = self.graph.node(host)?.proc_delay_ms;
        let steady_ms = 2.0 * route.delay_ms + proc;
        let handover_remaining_ms = match self.attachments.handover_until(robot) {
            Some(until) if until > self.now => (until - self.now) as f64,
            _ => 0.0,
        };
        Ok(ServiceTime {
            total_ms: steady_ms + handover_remaining_ms,
            steady_ms,
            handover_remaining_ms,
        })
    }

    /// Predicted steady-state service time if a robot at `pos` were served by
    /// `ru` with the VNF on `server`, using current wired metrics. `None` when
    /// the RU is out of range or the server unreachable.
    pub fn predict_service_time(&self, pos: [f64; 2], ru: &NodeId, server: &NodeId) -> Option<f64> {
        let ru_attrs = self.graph.node(ru).ok()?;
        if ru_attrs.kind != NodeKind::RadioUnit || !self.ru_active(ru) {
            return None;
        }
        let rssi = self.radio.rssi_between(ru_attrs.position, pos);
        if !self.radio.in_range(rssi) {
            return None;
        }
        let wired = self.graph.link_route(ru, server).ok()?;
        let proc = self.graph.node(server).ok()?.proc_delay_ms;
        Some(2.0 * (self.radio.hop_delay_ms(rssi) + wired.delay_ms) + proc)
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        self.graph.check_invariants()?;
        self.placements.check_unique_hosts()?;
        for (robot, ru) in self.attachments.robots() {
            let wireless: Vec<&NodeId> = self.graph.neighbors(robot).collect();
            match ru {
                Some(ru) if wireless != [ru] => {
                    return Err(format!("robot '{robot}' attached to '{ru}' but links are {wireless:?}"));
                }
                None if !wireless.is_empty() => {
                    return Err(format!("unattached robot '{robot}' has links {wireless:?}"));
                }
                _ => {}
            }
        }
        Ok(())
    }
}
