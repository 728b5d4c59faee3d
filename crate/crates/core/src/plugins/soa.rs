// SPDX-License-Identifier: Apache-2.0

//! Baseline: navigation VNF pinned to one server, RU attachment refreshed by
//! periodic probing only.

use serde::Deserialize;

use crate::graph::NodeId;
use crate::netctl::VnfId;
use crate::plugin::{Instruction, Plugin, View};
use crate::SimTime;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoaParams {
    #[serde(default = "default_probe_period_s")]
    pub probe_period_s: f64,
    #[serde(default = "super::default_vnf")]
    pub vnf: VnfId,
    pub host: NodeId,
}

fn default_probe_period_s() -> f64 {
    5.0
}

#[derive(Debug, Clone)]
pub struct SoaPlugin {
    params: SoaParams,
    probe_ms: SimTime,
}

impl SoaPlugin {
    pub fn new(params: SoaParams) -> Result<Self, String> {
        if !(params.probe_period_s.is_finite() && params.probe_period_s > 0.0) {
            return Err("probe_period_s must be > 0".into());
        }
        let probe_ms = (params.probe_period_s * 1000.0).round() as SimTime;
        if probe_ms == 0 {
            return Err("probe_period_s must be at least 1 ms".into());
        }
        Ok(Self { params, probe_ms })
    }

    fn probe(&self, view: &View<'_>) -> Vec<Instruction> {
        let net = view.net();
        view.robots()
            .ids()
            .filter(|r| !net.attachments().in_handover(r, view.now()))
            .filter_map(|robot| {
                let (best, _) = net.reachable_rus(robot).into_iter().next()?;
                (net.attachments().attached_ru(robot) != Some(&best)).then(|| Instruction::Handover {
                    robot: robot.clone(),
                    ru: best,
                })
            })
            .collect()
    }
}

impl Plugin for SoaPlugin {
    fn on_start(&mut self, view: &View<'_>) -> Vec<Instruction> {
        let mut out = vec![Instruction::PlaceVnf {
            vnf: self.params.vnf.clone(),
            node: self.params.host.clone(),
        }];
        out.extend(self.probe(view));
        out
    }

    fn on_tick(&mut self, view: &View<'_>) -> Vec<Instruction> {
        if !view.now().is_multiple_of(self.probe_ms) {
            return Vec::new();
        }
        self.probe(view)
    }
}
