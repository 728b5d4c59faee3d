// SPDX-License-Identifier: Apache-2.0

//! Mutable simulation state shared by the engine and the plug-in runtime.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::NodeId;
use crate::netctl::{NetControl, NetError};
use crate::plugin::Instruction;
use crate::robot::{LocalizationSample, RobotError, RobotSim};
use crate::SimTime;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApplyError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Robot(#[from] RobotError),
}

#[derive(Debug, Clone)]
pub struct World {
    pub(crate) net: NetControl,
    pub(crate) robots: RobotSim,
    pub(crate) localization: BTreeMap<NodeId, LocalizationSample>,
    tick_ms: SimTime,
    now: SimTime,
}

impl World {
    pub fn new(net: NetControl, robots: RobotSim, tick_ms: SimTime) -> Self {
        Self {
            net,
            robots,
            localization: BTreeMap::new(),
            tick_ms,
            now: 0,
        }
    }

    pub fn net(&self) -> &NetControl {
        &self.net
    }

    pub fn robots(&self) -> &RobotSim {
        &self.robots
    }

    pub fn localization(&self, robot: &NodeId) -> Option<&crate::robot::LocalizationSample> {
        self.localization.get(robot)
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn tick_ms(&self) -> SimTime {
        self.tick_ms
    }

    pub(crate) fn set_now(&mut self, now: SimTime) {
        self.now = now;
    }

    /// Applies an instruction at the next tick boundary.
    pub fn apply(&mut self, instr: &Instruction) -> Result<(), ApplyError> {
        let at = self.now + self.tick_ms;
        match instr {
            Instruction::Move { robot, speed } => self.robots.set_velocity(robot, *speed)?,
            Instruction::Handover { robot, ru } => self.net.handover(robot, ru, at)?,
            Instruction::PlaceVnf { vnf, node } => self.net.place_vnf(vnf, node, at)?,
            Instruction::PlaceVl { vl, path } => self.net.place_vl(vl, path)?,
            Instruction::Emulate { a, b, psi, delta } => self.net.set_emulation(a, b, *psi, *delta)?,
        }
        Ok(())
    }

    /// Applies an instruction instantly, before the first tick: attachments
    /// open no handover window and placements skip the deploy delay.
    pub fn provision(&mut self, instr: &Instruction) -> Result<(), ApplyError> {
        match instr {
            Instruction::Handover { robot, ru } => self.net.attach_now(robot, ru)?,
            Instruction::PlaceVnf { vnf, node } => self.net.place_now(vnf, node)?,
            other => self.apply(other)?,
        }
        Ok(())
    }
}
