// SPDX-License-Identifier: Apache-2.0

//! Two-domain federation over a shared ledger. The home domain predicts that
//! its serving RU is about to lose the robot and requests a partner RU; the
//! partner deploys the access-point VNF there and reports back; the home
//! domain then hands the robot over.

use std::collections::VecDeque;

use serde::Deserialize;

use super::ledger::{FederationTx, Ledger, LedgerBlock, TxKind};
use crate::graph::NodeId;
use crate::history::TraceEvent;
use crate::netctl::VnfId;
use crate::plugin::{Instruction, Plugin, View};
use crate::SimTime;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FederationParams {
    pub home_domain: String,
    pub partner_domain: String,
    pub robot: NodeId,
    /// Partner RU offered to the robot.
    pub candidate_ru: NodeId,
    #[serde(default = "default_vap")]
    pub vap: VnfId,
    #[serde(default = "default_block_interval_s")]
    pub block_interval_s: f64,
    #[serde(default = "default_horizon_s")]
    pub horizon_s: f64,
    #[serde(default = "default_window_samples")]
    pub window_samples: usize,
    #[serde(default = "default_sample_period_s")]
    pub sample_period_s: f64,
    #[serde(default = "default_attach_confirm_s")]
    pub attach_confirm_s: f64,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
}

fn default_vap() -> VnfId {
    VnfId::from("vAP")
}
fn default_block_interval_s() -> f64 {
    5.0
}
fn default_horizon_s() -> f64 {
    10.0
}
fn default_window_samples() -> usize {
    10
}
fn default_sample_period_s() -> f64 {
    1.0
}
fn default_attach_confirm_s() -> f64 {
    1.0
}
fn default_timeout_s() -> f64 {
    60.0
}

fn to_ms(field: &str, s: f64) -> Result<SimTime, String> {
    if !(s.is_finite() && s > 0.0) {
        return Err(format!("{field} must be > 0"));
    }
    Ok((s * 1000.0).round() as SimTime)
}

/// Least-squares line through `(t, y)` evaluated at `at`.
pub fn linear_forecast(samples: &[(f64, f64)], at: f64) -> Option<f64> {
    if samples.len() < 2 {
        return None;
    }
    let n = samples.len() as f64;
    let t_mean = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let y_mean = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - t_mean).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = samples.iter().map(|s| (s.0 - t_mean) * (s.1 - y_mean)).sum();
    Some(y_mean + sxy / sxx * (at - t_mean))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HomeState {
    Monitoring,
    Requested { at: SimTime },
    Attaching { requested_at: SimTime, confirm_at: SimTime },
    AttachSubmitted { requested_at: SimTime },
    Done,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartnerState {
    Idle,
    Deploying,
    Deployed,
}

#[derive(Debug, Clone)]
pub struct FederationPlugin {
    params: FederationParams,
    ledger: Ledger,
    horizon_ms: SimTime,
    sample_ms: SimTime,
    confirm_ms: SimTime,
    timeout_ms: SimTime,
    window: VecDeque<(f64, f64)>,
    home: HomeState,
    partner: PartnerState,
    events: Vec<TraceEvent>,
}

impl FederationPlugin {
    pub fn new(params: FederationParams) -> Result<Self, String> {
        let interval = to_ms("block_interval_s", params.block_interval_s)?;
        let horizon_ms = to_ms("horizon_s", params.horizon_s)?;
        let sample_ms = to_ms("sample_period_s", params.sample_period_s)?;
        let confirm_ms = to_ms("attach_confirm_s", params.attach_confirm_s)?;
        let timeout_ms = to_ms("timeout_s", params.timeout_s)?;
        if interval == 0 || sample_ms == 0 {
            return Err("block_interval_s and sample_period_s must be at least 1 ms".into());
        }
        if params.window_samples < 2 {
            return Err("window_samples must be >= 2".into());
        }
        if params.home_domain == params.partner_domain {
            return Err("home_domain and partner_domain must differ".into());
        }
        Ok(Self {
            params,
            ledger: Ledger::new(interval),
            horizon_ms,
            sample_ms,
            confirm_ms,
            timeout_ms,
            window: VecDeque::new(),
            home: HomeState::Monitoring,
            partner: PartnerState::Idle,
            events: Vec::new(),
        })
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn home_state(&self) -> HomeState {
        self.home
    }

    pub fn partner_state(&self) -> PartnerState {
        self.partner
    }

    fn event(&mut self, t: SimTime, event: &str, actor: &str, detail: String) {
        self.events.push(TraceEvent::new(t, event, actor, detail));
    }

    fn submit(&mut self, now: SimTime, tx: FederationTx) {
        let event = format!("{}_submitted", tx.kind);
        let actor = tx.domain.clone();
        let detail = tx.payload_string();
        self.ledger.submit(now, tx);
        self.event(now, &event, &actor, detail);
    }

    fn on_block(&mut self, view: &View<'_>, block: &LedgerBlock, out: &mut Vec<Instruction>) {
        let now = view.now();
        self.event(
            now,
            "block_closed",
            "ledger",
            format!("index={} txs={}", block.index, block.txs.len()),
        );
        for tx in &block.txs {
            self.event(
                now,
                &format!("{}_confirmed", tx.kind),
                &tx.domain.clone(),
                format!("block={}", block.index),
            );
        }
        let p = self.params.clone();
        for tx in &block.txs {
            match tx.kind {
                TxKind::Request if tx.domain == p.home_domain && self.partner == PartnerState::Idle => {
                    let accept = FederationTx::new(TxKind::Accept, p.partner_domain.clone()).with("ru", &p.candidate_ru);
                    self.submit(now, accept);
                    out.push(Instruction::PlaceVnf {
                        vnf: p.vap.clone(),
                        node: p.candidate_ru.clone(),
                    });
                    self.event(
                        now,
                        "vap_deploy_issued",
                        &p.partner_domain,
                        format!("vnf={} node={}", p.vap, p.candidate_ru),
                    );
                    self.partner = PartnerState::Deploying;
                }
                TxKind::DeployDone if tx.domain == p.partner_domain => {
                    if let HomeState::Requested { at } = self.home {
                        out.push(Instruction::Handover {
                            robot: p.robot.clone(),
                            ru: p.candidate_ru.clone(),
                        });
                        self.event(
                            now,
                            "handover_issued",
                            &p.home_domain,
                            format!("robot={} ru={}", p.robot, p.candidate_ru),
                        );
                        self.home = HomeState::Attaching {
                            requested_at: at,
                            confirm_at: now + view.tick_ms() + self.confirm_ms,
                        };
                    }
                }
                TxKind::AttachDone if tx.domain == p.home_domain => {
                    if let HomeState::AttachSubmitted { requested_at } = self.home {
                        self.event(
                            now,
                            "federation_complete",
                            &p.home_domain,
                            format!("total_ms={}", now - requested_at),
                        );
                        self.home = HomeState::Done;
                    }
                }
                _ => {}
            }
        }
    }

    fn monitor(&mut self, view: &View<'_>) {
        let now = view.now();
        if !now.is_multiple_of(self.sample_ms) {
            return;
        }
        let net = view.net();
        let Some(serving) = net.attachments().attached_ru(&self.params.robot) else {
            return;
        };
        let Ok(ru) = view.graph().node(serving) else {
            return;
        };
        if ru.domain != self.params.home_domain {
            return;
        }
        let Some(pos) = view
            .localization(&self.params.robot)
            .map(|s| s.estimate)
            .or_else(|| view.robots().position(&self.params.robot).ok())
        else {
            return;
        };
        let rssi = net.radio().rssi_between(ru.position, pos);
        let t_s = now as f64 / 1000.0;
        self.window.push_back((t_s, rssi));
        while self.window.len() > self.params.window_samples {
            self.window.pop_front();
        }
        if self.window.len() < self.params.window_samples {
            return;
        }
        let samples: Vec<(f64, f64)> = self.window.iter().copied().collect();
        let at = t_s + self.horizon_ms as f64 / 1000.0;
        let Some(predicted) = linear_forecast(&samples, at) else {
            return;
        };
        if !net.radio().in_range(predicted) {
            let tx = FederationTx::new(TxKind::Request, self.params.home_domain.clone())
                .with("robot", &self.params.robot)
                .with("ru", &self.params.candidate_ru)
                .with("serving", serving)
                .with("predicted_rssi_dbm", predicted);
            self.submit(now, tx);
            self.home = HomeState::Requested { at: now };
        }
    }
}

impl Plugin for FederationPlugin {
    fn on_tick(&mut self, view: &View<'_>) -> Vec<Instruction> {
        let now = view.now();
        let mut out = Vec::new();
        for block in self.ledger.advance(now) {
            self.on_block(view, &block, &mut out);
        }

        if self.partner == PartnerState::Deploying
            && view.net().placements().hosts(&self.params.candidate_ru, &self.params.vap)
        {
            let tx = FederationTx::new(TxKind::DeployDone, self.params.partner_domain.clone())
                .with("vnf", &self.params.vap)
                .with("node", &self.params.candidate_ru);
            self.submit(now, tx);
            self.partner = PartnerState::Deployed;
        }

        match self.home {
            HomeState::Monitoring => self.monitor(view),
            HomeState::Attaching {
                requested_at,
                confirm_at,
            } if now >= confirm_at => {
                let net = view.net();
                let robot = &self.params.robot;
                if net.attachments().attached_ru(robot) == Some(&self.params.candidate_ru) {
                    let tx = FederationTx::new(TxKind::AttachDone, self.params.home_domain.clone())
                        .with("robot", robot)
                        .with("ru", &self.params.candidate_ru);
                    self.submit(now, tx);
                    self.home = HomeState::AttachSubmitted { requested_at };
                } else if !net.attachments().in_handover(robot, now) {
                    out.push(Instruction::Handover {
                        robot: robot.clone(),
                        ru: self.params.candidate_ru.clone(),
                    });
                }
            }
            _ => {}
        }

        let requested_at = match self.home {
            HomeState::Requested { at } => Some(at),
            HomeState::Attaching { requested_at, .. } | HomeState::AttachSubmitted { requested_at } => Some(requested_at),
            _ => None,
        };
        if let Some(at) = requested_at {
            if now - at > self.timeout_ms {
                let detail = format!("elapsed_ms={}", now - at);
                let actor = self.params.home_domain.clone();
                self.event(now, "federation_timeout", &actor, detail);
                self.home = HomeState::Failed;
            }
        }
        out
    }

    fn drain_events(&mut self) -> Vec<TraceEvent> {
        std::mem::take(&mut self.events)
    }
}
