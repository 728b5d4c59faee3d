// SPDX-License-Identifier: Apache-2.0

//! Context-aware orchestrator: jointly picks the serving RU and the host of
//! the navigation VNF from the robot's estimated position.

use serde::Deserialize;

use crate::graph::{NodeId, NodeKind};
use crate::netctl::{NetControl, VnfId};
use crate::plugin::{Instruction, Plugin, View};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrchestratorParams {
    #[serde(default = "default_target_ms")]
    pub target_ms: f64,
    #[serde(default = "default_hysteresis")]
    pub hysteresis: f64,
    #[serde(default = "super::default_vnf")]
    pub vnf: VnfId,
    /// Robot served by the VNF; defaults to the first robot by id.
    #[serde(default)]
    pub robot: Option<NodeId>,
}

fn default_target_ms() -> f64 {
    15.0
}

fn default_hysteresis() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub ru: NodeId,
    pub server: NodeId,
    pub cost_ms: f64,
}

/// All feasible (RU, server) pairs for a robot at `pos`, cheapest first;
/// ties broken by RU id then server id.
pub fn rank_candidates(net: &NetControl, pos: [f64; 2]) -> Vec<Candidate> {
    let servers = net.graph().nodes_of_kind(NodeKind::Server);
    let mut out: Vec<Candidate> = net
        .reachable_from(pos)
        .into_iter()
        .flat_map(|(ru, _)| {
            servers.iter().filter_map(move |server| {
                net.predict_service_time(pos, &ru, server).map(|cost_ms| Candidate {
                    ru: ru.clone(),
                    server: server.clone(),
                    cost_ms,
                })
            })
        })
        .collect();
    out.sort_by(|a, b| {
        a.cost_ms
            .total_cmp(&b.cost_ms)
            .then_with(|| a.ru.cmp(&b.ru))
            .then_with(|| a.server.cmp(&b.server))
    });
    out
}

#[derive(Debug, Clone)]
pub struct OrchestratorPlugin {
    params: OrchestratorParams,
}

impl OrchestratorPlugin {
    pub fn new(params: OrchestratorParams) -> Result<Self, String> {
        if !(params.target_ms.is_finite() && params.target_ms > 0.0) {
            return Err("target_ms must be > 0".into());
        }
        if !(0.0..1.0).contains(&params.hysteresis) {
            return Err("hysteresis must be in [0, 1)".into());
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &OrchestratorParams {
        &self.params
    }

    fn robot(&self, view: &View<'_>) -> Option<NodeId> {
        self.params
            .robot
            .clone()
            .or_else(|| view.robots().ids().next().cloned())
    }

    fn estimate(view: &View<'_>, robot: &NodeId) -> Option<[f64; 2]> {
        view.localization(robot)
            .map(|s| s.estimate)
            .or_else(|| view.robots().position(robot).ok())
    }

    fn emit(&self, robot: &NodeId, best: &Candidate, ru: Option<&NodeId>, host: Option<&NodeId>) -> Vec<Instruction> {
        let mut out = Vec::new();
        if ru != Some(&best.ru) {
            out.push(Instruction::Handover {
                robot: robot.clone(),
                ru: best.ru.clone(),
            });
        }
        if host != Some(&best.server) {
            out.push(Instruction::PlaceVnf {
                vnf: self.params.vnf.clone(),
                node: best.server.clone(),
            });
        }
        out
    }

    /// Decision for one tick given the controller state and a position
    /// estimate.
    pub fn decide(&self, net: &NetControl, robot: &NodeId, pos: [f64; 2]) -> Vec<Instruction> {
        if net.attachments().in_handover(robot, net.now()) || net.pending().contains_key(&self.params.vnf) {
            return Vec::new();
        }
        let ranked = rank_candidates(net, pos);
        let Some(best) = ranked.first() else {
            return Vec::new();
        };
        let ru = net.attachments().attached_ru(robot);
        let host = net.placements().host_of(&self.params.vnf);
        let current = match (ru, host) {
            (Some(ru), Some(host)) => net.predict_service_time(pos, ru, host).unwrap_or(f64::INFINITY),
            _ => f64::INFINITY,
        };
        let bar = if current <= self.params.target_ms {
            current * (1.0 - self.params.hysteresis)
        } else {
            current
        };
        if best.cost_ms < bar {
            self.emit(robot, best, ru, host)
        } else {
            Vec::new()
        }
    }
}

impl Plugin for OrchestratorPlugin {
    fn on_start(&mut self, view: &View<'_>) -> Vec<Instruction> {
        let Some(robot) = self.robot(view) else {
            return Vec::new();
        };
        let Some(pos) = Self::estimate(view, &robot) else {
            return Vec::new();
        };
        let net = view.net();
        match rank_candidates(net, pos).first() {
            Some(best) => self.emit(
                &robot,
                best,
                net.attachments().attached_ru(&robot),
                net.placements().host_of(&self.params.vnf),
            ),
            None => Vec::new(),
        }
    }

    fn on_tick(&mut self, view: &View<'_>) -> Vec<Instruction> {
        let Some(robot) = self.robot(view) else {
            return Vec::new();
        };
        match Self::estimate(view, &robot) {
            Some(pos) => self.decide(view.net(), &robot, pos),
            None => Vec::new(),
        }
    }
}
