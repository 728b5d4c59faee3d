// SPDX-License-Identifier: Apache-2.0

//! Tick loop: advance robots, refresh the network, record history, then let
//! the plug-ins act.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::graph::{GraphError, HardwareGraph, NodeAttrs, NodeId, NodeKind};
use crate::history::{ExportReport, HistoryError, HistorySnapshot, HistoryStore, ServiceSample};
use crate::netctl::{LinkMetrics, NetControl, NetError, VnfId};
use crate::plugin::{Plugin, PluginError, PluginHandle, PluginRuntime};
use crate::plugins::PluginSpec;
use crate::robot::{LocalizationModel, RobotError, RobotSim, Trajectory};
use crate::scenario::{ScenarioConfig, ScenarioError};
use crate::summary::{summarize_history, RunSummary};
use crate::world::World;
use crate::SimTime;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("setup failed: {0}")]
    Setup(String),
    #[error("runtime fault at t={t_ms} ms: {message}")]
    RuntimeFault { t_ms: SimTime, message: String },
    #[error(transparent)]
    Export(#[from] HistoryError),
}

impl From<GraphError> for RunError {
    fn from(e: GraphError) -> Self {
        RunError::Setup(e.to_string())
    }
}

impl From<NetError> for RunError {
    fn from(e: NetError) -> Self {
        RunError::Setup(e.to_string())
    }
}

impl From<RobotError> for RunError {
    fn from(e: RobotError) -> Self {
        RunError::Setup(e.to_string())
    }
}

impl From<PluginError> for RunError {
    fn from(e: PluginError) -> Self {
        RunError::Setup(e.to_string())
    }
}

/// Command-line level overrides applied on top of a scenario.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub duration_s: Option<f64>,
    pub tick_ms: Option<SimTime>,
    /// When non-empty, exactly these plug-ins are enabled.
    pub plugins: Vec<String>,
}

impl RunOverrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) -> Result<(), ScenarioError> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = self.duration_s {
            cfg.duration_s = d;
        }
        if let Some(t) = self.tick_ms {
            cfg.tick_ms = t;
        }
        if !self.plugins.is_empty() {
            cfg.select_plugins(&self.plugins)?;
        }
        cfg.validate()
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub summary: RunSummary,
    pub history: HistoryStore,
    pub world: World,
}

pub struct Simulation {
    config: ScenarioConfig,
    world: World,
    runtime: PluginRuntime,
    history: HistoryStore,
    rus: Vec<NodeId>,
    vnf: VnfId,
    tick: u64,
    total_ticks: u64,
    started: bool,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self, RunError> {
        config.validate()?;

        let mut graph = HardwareGraph::new();
        for n in &config.nodes {
            let mut attrs = NodeAttrs::new(n.kind, n.position, n.domain.clone());
            attrs.proc_delay_ms = n.proc_delay_ms;
            graph.add_node(n.id.clone(), attrs)?;
        }
        for r in &config.robots {
            graph.add_node(r.id.clone(), NodeAttrs::new(NodeKind::Robot, r.waypoints[0], r.domain.clone()))?;
        }
        for l in &config.links {
            let mut m = LinkMetrics::new(l.d_ms, l.lambda_mbps);
            m.psi = l.psi;
            m.delta = l.delta;
            graph.add_link(&l.a, &l.b, m)?;
        }
        let rus = graph.nodes_of_kind(NodeKind::RadioUnit);

        let mut net = NetControl::new(
            graph,
            config.radio.clone(),
            config.net.handover_ms,
            config.net.default_deploy_ms,
        );
        for v in &config.vnfs {
            if let Some(ms) = v.deploy_delay_ms {
                net.set_deploy_delay(v.id.clone(), ms);
            }
        }
        for n in &config.nodes {
            if let Some(v) = &n.requires_vnf {
                net.gate_ru(&n.id, v.clone())?;
            }
        }
        for v in &config.vnfs {
            if let Some(h) = &v.host {
                net.place_now(&v.id, h)?;
            }
        }

        let mut robots = RobotSim::new(config.seed);
        for r in &config.robots {
            robots.register(
                r.id.clone(),
                Trajectory::new(r.waypoints.clone(), r.speed)?,
                LocalizationModel {
                    sigma: r.localization_sigma,
                },
            )?;
        }

        let mut runtime = PluginRuntime::new();
        for p in config.plugins.iter().filter(|p| p.enabled) {
            let plugin = PluginSpec::parse(&p.name, &p.params)
                .and_then(PluginSpec::build)
                .map_err(RunError::Setup)?;
            runtime.register(p.name.clone(), plugin)?;
        }

        let mut world = World::new(net, robots, config.tick_ms);
        let fault0 = |e: String| RunError::RuntimeFault { t_ms: 0, message: e };
        Self::observe(&mut world, 0, false).map_err(fault0)?;
        for r in &config.robots {
            if let Some(ru) = &r.attach {
                world.net.attach_now(&r.id, ru)?;
            }
        }
        world.net.refresh(0)?;

        let history = HistoryStore::new(rus.clone());
        let total_ticks = config.total_ticks();
        let vnf = config.service.vnf.clone();
        Ok(Self {
            config,
            world,
            runtime,
            history,
            rus,
            vnf,
            tick: 0,
            total_ticks,
            started: false,
        })
    }

    /// Registers an extra plug-in after the configured ones. Only allowed
    /// before the first tick.
    pub fn add_plugin(&mut self, name: &str, plugin: Box<dyn Plugin>) -> Result<PluginHandle, RunError> {
        if self.started {
            return Err(RunError::Setup(format!("cannot add plug-in '{name}' after the run started")));
        }
        Ok(self.runtime.register(name, plugin)?)
    }

    /// Provisioning: every plug-in's `on_start`, applied instantly.
    fn begin(&mut self) -> Result<(), RunError> {
        let fault = |message: String| RunError::RuntimeFault { t_ms: 0, message };
        self.started = true;
        self.runtime.start(&mut self.world, &mut self.history);
        self.world.net.refresh(0).map_err(|e| fault(e.to_string()))?;
        self.world.net().check_invariants().map_err(fault)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn history(&self) -> &HistoryStore {
        &self.history
    }

    pub fn runtime(&self) -> &PluginRuntime {
        &self.runtime
    }

    pub fn is_finished(&self) -> bool {
        self.tick >= self.total_ticks
    }

    /// Moves robots (unless `step` is false), samples localization and
    /// refreshes the network at `now`.
    fn observe(world: &mut World, now: SimTime, step: bool) -> Result<(), String> {
        world.set_now(now);
        let dt_s = world.tick_ms() as f64 / 1000.0;
        let ids: Vec<NodeId> = world.robots.ids().cloned().collect();
        for id in &ids {
            if step {
                world.robots.step(id, dt_s).map_err(|e| e.to_string())?;
            }
            let sample = world.robots.sample_localization(id).map_err(|e| e.to_string())?;
            world.localization.insert(id.clone(), sample);
            let pos = world.robots.position(id).map_err(|e| e.to_string())?;
            world.net.mirror_position(id, pos).map_err(|e| e.to_string())?;
        }
        let report = world.net.refresh(now).map_err(|e| e.to_string())?;
        for r in report.detached {
            log::debug!("t={now} ms: robot '{r}' lost coverage and was detached");
        }
        Ok(())
    }

    fn snapshot(&self, now: SimTime) -> Result<HistorySnapshot, String> {
        let net = self.world.net();
        let mut kappa = BTreeMap::new();
        for id in self.world.robots().ids() {
            let emb = self
                .world
                .robots()
                .build_context_embedding(id, &self.rus, net.attachments().attached_ru(id))
                .map_err(|e| e.to_string())?;
            kappa.insert(id.clone(), emb);
        }
        let mut ru_contexts = BTreeMap::new();
        for ru in &self.rus {
            ru_contexts.insert(ru.clone(), net.ru_context_aggregate(ru).map_err(|e| e.to_string())?);
        }
        let graph = net.graph();
        Ok(HistorySnapshot {
            t_ms: now,
            kappa,
            placements: net.placements().clone(),
            link_delays: graph.links().map(|(k, m)| (k.clone(), m.effective_delay_ms())).collect(),
            link_throughputs: graph
                .links()
                .map(|(k, m)| (k.clone(), m.effective_throughput_mbps()))
                .collect(),
            ru_contexts,
        })
    }

    fn record_service(&mut self, now: SimTime) {
        let net = self.world.net();
        let ids: Vec<NodeId> = self.world.robots().ids().cloned().collect();
        for robot in ids {
            let st = net.service_time(&robot, &self.vnf).ok();
            self.history.record_service(ServiceSample {
                t_ms: now,
                robot: robot.clone(),
                attached_ru: net.attachments().attached_ru(&robot).cloned(),
                vnf_host: net.placements().host_of(&self.vnf).cloned(),
                service_ms: st.map(|s| s.total_ms),
                steady_ms: st.map(|s| s.steady_ms),
                handover_remaining_ms: st.map_or(0.0, |s| s.handover_remaining_ms),
            });
        }
    }

    /// Executes one tick. Returns `false` once the run is complete.
    pub fn step(&mut self) -> Result<bool, RunError> {
        if !self.started {
            self.begin()?;
        }
        if self.is_finished() {
            return Ok(false);
        }
        let now = self.tick * self.config.tick_ms;
        let fault = |message: String| RunError::RuntimeFault { t_ms: now, message };
        if self.tick > 0 {
            Self::observe(&mut self.world, now, true).map_err(fault)?;
        }
        let snap = self.snapshot(now).map_err(fault)?;
        self.history.record(snap).map_err(|e| fault(e.to_string()))?;
        self.record_service(now);
        self.runtime.tick_dispatch(&mut self.world, &mut self.history);
        self.world.net().check_invariants().map_err(fault)?;
        self.tick += 1;
        Ok(!self.is_finished())
    }

    pub fn run_to_end(mut self) -> Result<RunReport, RunError> {
        while self.step()? {}
        let summary = summarize_history(&self.history, self.config.service.target_ms);
        Ok(RunReport {
            summary,
            history: self.history,
            world: self.world,
        })
    }
}

/// Runs a scenario with overrides and, when `out` is given, exports the CSV
/// traces and `summary.json` there.
pub fn run(mut config: ScenarioConfig, overrides: &RunOverrides, out: Option<&Path>) -> Result<RunReport, RunError> {
    overrides.apply(&mut config)?;
    let report = Simulation::new(config)?.run_to_end()?;
    if let Some(dir) = out {
        export(&report, dir)?;
    }
    Ok(report)
}

pub fn export(report: &RunReport, dir: &Path) -> Result<ExportReport, HistoryError> {
    let rows = report.history.export_csv(dir)?;
    let json = serde_json::to_string_pretty(&report.summary).expect("summary serializes");
    std::fs::write(dir.join(crate::summary::SUMMARY_JSON), json + "\n")?;
    Ok(rows)
}
