// SPDX-License-Identifier: Apache-2.0

//! Plug-in hosting. Plug-ins observe a read-only [`View`] and act only by
//! returning [`Instruction`]s, which are applied in registration order after
//! every plug-in has seen the same pre-tick state.

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};

use thiserror::Error;

use crate::graph::{HardwareGraph, NodeId};
use crate::history::{HistorySnapshot, HistoryStore, TraceEvent};
use crate::netctl::{NetControl, VlId, VnfId};
use crate::robot::{ContextEmbedding, LocalizationSample, RobotSim};
use crate::world::World;
use crate::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    Move { robot: NodeId, speed: f64 },
    Handover { robot: NodeId, ru: NodeId },
    PlaceVnf { vnf: VnfId, node: NodeId },
    PlaceVl { vl: VlId, path: Vec<(NodeId, NodeId)> },
    Emulate { a: NodeId, b: NodeId, psi: f64, delta: f64 },
}

impl Instruction {
    pub fn kind(&self) -> &'static str {
        match self {
            Instruction::Move { .. } => "move",
            Instruction::Handover { .. } => "handover",
            Instruction::PlaceVnf { .. } => "place_vnf",
            Instruction::PlaceVl { .. } => "place_vl",
            Instruction::Emulate { .. } => "emulate",
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Move { robot, speed } => write!(f, "robot={robot} speed={speed}"),
            Instruction::Handover { robot, ru } => write!(f, "robot={robot} ru={ru}"),
            Instruction::PlaceVnf { vnf, node } => write!(f, "vnf={vnf} node={node}"),
            Instruction::PlaceVl { vl, path } => {
                let hops: Vec<String> = path.iter().map(|(a, b)| format!("{a}--{b}")).collect();
                write!(f, "vl={vl} path={}", hops.join(";"))
            }
            Instruction::Emulate { a, b, psi, delta } => write!(f, "link={a}--{b} psi={psi} delta={delta}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Applied,
    Rejected(String),
    Panicked(String),
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Applied => "applied",
            Outcome::Rejected(_) => "rejected",
            Outcome::Panicked(_) => "panic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstructionRecord {
    pub t_ms: SimTime,
    pub plugin: String,
    pub instruction: Option<Instruction>,
    pub outcome: Outcome,
}

impl InstructionRecord {
    pub fn detail(&self) -> String {
        let args = self.instruction.as_ref().map(|i| i.to_string()).unwrap_or_default();
        match &self.outcome {
            Outcome::Applied => args,
            Outcome::Rejected(why) if args.is_empty() => why.clone(),
            Outcome::Rejected(why) => format!("{args}; {why}"),
            Outcome::Panicked(msg) => msg.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PluginHandle {
    pub name: String,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PluginError {
    #[error("a plug-in named '{0}' is already registered")]
    DuplicateName(String),
}

/// Read-only state handed to plug-ins each tick.
pub struct View<'a> {
    world: &'a World,
    history: &'a HistoryStore,
}

impl<'a> View<'a> {
    pub fn new(world: &'a World, history: &'a HistoryStore) -> Self {
        Self { world, history }
    }

    pub fn now(&self) -> SimTime {
        self.world.now()
    }

    pub fn tick_ms(&self) -> SimTime {
        self.world.tick_ms()
    }

    pub fn net(&self) -> &'a NetControl {
        self.world.net()
    }

    pub fn graph(&self) -> &'a HardwareGraph {
        self.world.net().graph()
    }

    pub fn robots(&self) -> &'a RobotSim {
        self.world.robots()
    }

    pub fn history(&self) -> &'a HistoryStore {
        self.history
    }

    pub fn latest_snapshot(&self) -> Option<&'a HistorySnapshot> {
        self.history.latest()
    }

    pub fn kappa(&self, robot: &NodeId) -> Option<&'a ContextEmbedding> {
        self.history.latest().and_then(|s| s.kappa.get(robot))
    }

    /// This tick's localization sample for `robot`.
    pub fn localization(&self, robot: &NodeId) -> Option<&'a LocalizationSample> {
        self.world.localization(robot)
    }
}

pub trait Plugin {
    /// Called once before the first tick. Returned instructions are applied
    /// instantly (provisioning).
    fn on_start(&mut self, _view: &View<'_>) -> Vec<Instruction> {
        Vec::new()
    }

    fn on_tick(&mut self, view: &View<'_>) -> Vec<Instruction>;

    /// Protocol events produced since the last call.
    fn drain_events(&mut self) -> Vec<TraceEvent> {
        Vec::new()
    }
}

struct Slot {
    handle: PluginHandle,
    plugin: Box<dyn Plugin>,
    isolated: bool,
}

#[derive(Default)]
pub struct PluginRuntime {
    slots: Vec<Slot>,
}

impl fmt::Debug for PluginRuntime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.slots.iter().map(|s| &s.handle)).finish()
    }
}

enum Phase {
    Start,
    Tick,
}

impl PluginRuntime {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, plugin: Box<dyn Plugin>) -> Result<PluginHandle, PluginError> {
        let name = name.into();
        if self.slots.iter().any(|s| s.handle.name == name) {
            return Err(PluginError::DuplicateName(name));
        }
        let handle = PluginHandle {
            name,
            order: self.slots.len(),
        };
        self.slots.push(Slot {
            handle: handle.clone(),
            plugin,
            isolated: false,
        });
        Ok(handle)
    }

    pub fn handles(&self) -> Vec<PluginHandle> {
        self.slots.iter().map(|s| s.handle.clone()).collect()
    }

    pub fn is_isolated(&self, name: &str) -> bool {
        self.slots.iter().any(|s| s.handle.name == name && s.isolated)
    }

    /// Runs every plug-in's `on_start` and applies the results instantly.
    pub fn start(&mut self, world: &mut World, history: &mut HistoryStore) -> Vec<InstructionRecord> {
        self.run_phase(Phase::Start, world, history)
    }

    /// Calls each plug-in in registration order, then applies all returned
    /// instructions in that order. Rejected instructions and panicking
    /// plug-ins are recorded, not fatal; a plug-in that panics is isolated
    /// for the rest of the run.
    pub fn tick_dispatch(&mut self, world: &mut World, history: &mut HistoryStore) -> Vec<InstructionRecord> {
        self.run_phase(Phase::Tick, world, history)
    }

    fn run_phase(&mut self, phase: Phase, world: &mut World, history: &mut HistoryStore) -> Vec<InstructionRecord> {
        let now = world.now();
        let mut records = Vec::new();
        let mut queued: Vec<(String, Instruction)> = Vec::new();
        let mut events = Vec::new();
        {
            let view = View::new(world, history);
            for slot in self.slots.iter_mut().filter(|s| !s.isolated) {
                let plugin = &mut slot.plugin;
                let result = catch_unwind(AssertUnwindSafe(|| {
                    let out = match phase {
                        Phase::Start => plugin.on_start(&view),
                        Phase::Tick => plugin.on_tick(&view),
                    };
                    (out, plugin.drain_events())
                }));
                match result {
                    Ok((instrs, evs)) => {
                        queued.extend(instrs.into_iter().map(|i| (slot.handle.name.clone(), i)));
                        events.extend(evs);
                    }
                    Err(payload) => {
                        let msg = panic_message(payload.as_ref());
                        log::warn!("plug-in '{}' panicked at t={now} ms and is isolated: {msg}", slot.handle.name);
                        slot.isolated = true;
                        records.push(InstructionRecord {
                            t_ms: now,
                            plugin: slot.handle.name.clone(),
                            instruction: None,
                            outcome: Outcome::Panicked(msg),
                        });
                    }
                }
            }
        }
        for e in events {
            history.record_event(e);
        }
        for (plugin, instr) in queued {
            let res = match phase {
                Phase::Start => world.provision(&instr),
                Phase::Tick => world.apply(&instr),
            };
            let outcome = match res {
                Ok(()) => Outcome::Applied,
                Err(e) => Outcome::Rejected(e.to_string()),
            };
            records.push(InstructionRecord {
                t_ms: now,
                plugin,
                instruction: Some(instr),
                outcome,
            });
        }
        for r in &records {
            history.record_instruction(r.clone());
        }
        records
    }
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_owned()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_owned()
    }
}
