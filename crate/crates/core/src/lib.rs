// SPDX-License-Identifier: Apache-2.0

//! Deterministic discrete-event simulator of an edge-robotics testbed: a
//! hardware graph of robots, radio units, switches and servers; robot
//! kinematics; network control with handover and VNF placement; an
//! embeddings history; and a plug-in runtime for control logic.

pub mod graph;
pub mod history;
pub mod netctl;
pub mod plugin;
pub mod plugins;
pub mod robot;
pub mod scenario;
pub mod sim;
pub mod summary;
pub mod world;

/// Simulated time in milliseconds.
pub type SimTime = u64;

pub use graph::{GraphError, HardwareGraph, LinkKey, NodeAttrs, NodeId, NodeKind, Route};
pub use history::{HistoryError, HistorySnapshot, HistoryStore, Projection, Selector, ServiceSample, TraceEvent};
pub use netctl::{LinkMetrics, NetControl, NetError, PlacementMap, RadioModel, ServiceTime, VlId, VnfId};
pub use plugin::{Instruction, InstructionRecord, Outcome, Plugin, PluginRuntime, View};
pub use robot::{ContextEmbedding, LocalizationModel, RobotSim, SensorVector, Trajectory};
pub use scenario::{load_scenario, ScenarioConfig, ScenarioError};
pub use sim::{run, RunError, RunOverrides, RunReport, Simulation};
pub use summary::{summarize, RunSummary, SummaryError};
pub use world::World;
