// SPDX-License-Identifier: Apache-2.0

//! Robot kinematics, sensor vectors, noisy localization and the contextual
//! embedding (RU attachment indicators followed by the sensor vector).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RobotError {
    #[error("unknown robot '{0}'")]
    UnknownRobot(NodeId),
    #[error("robot '{0}' already registered")]
    DuplicateRobot(NodeId),
    #[error("negative or non-finite speed {0}")]
    NegativeSpeed(f64),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("invalid localization sigma {0}")]
    InvalidSigma(f64),
    #[error("time step must be > 0, got {0}")]
    InvalidStep(f64),
}

/// `[pos_x, pos_y, speed, heading]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensorVector {
    pub pos: [f64; 2],
    pub speed: f64,
    /// Radians in `[-pi, pi)`.
    pub heading: f64,
}

impl SensorVector {
    pub const LEN: usize = 4;
    pub const FIELDS: [&'static str; 4] = ["pos_x", "pos_y", "speed", "heading"];

    pub fn to_array(&self) -> [f64; 4] {
        [self.pos[0], self.pos[1], self.speed, self.heading]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            pos: [a[0], a[1]],
            speed: a[2],
            heading: a[3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextEmbedding {
    /// One entry per RU of the run, in RU-id order; at most one is set.
    pub attachment: Vec<bool>,
    pub sensors: SensorVector,
}

impl ContextEmbedding {
    pub fn len(&self) -> usize {
        self.attachment.len() + SensorVector::LEN
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.attachment
            .iter()
            .map(|&a| if a { 1.0 } else { 0.0 })
            .chain(self.sensors.to_array())
            .collect()
    }

    pub fn attachment_is_one_hot_or_zero(&self) -> bool {
        self.attachment.iter().filter(|&&a| a).count() <= 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    waypoints: Vec<[f64; 2]>,
    cruise_speed: f64,
}

impl Trajectory {
    pub fn new(waypoints: Vec<[f64; 2]>, cruise_speed: f64) -> Result<Self, RobotError> {
        if waypoints.len() < 2 {
            return Err(RobotError::InvalidTrajectory("at least two waypoints required".into()));
        }
        if !waypoints.iter().flatten().all(|c| c.is_finite()) {
            return Err(RobotError::InvalidTrajectory("waypoints must be finite".into()));
        }
        if let Some(i) = waypoints.windows(2).position(|w| w[0] == w[1]) {
            return Err(RobotError::InvalidTrajectory(format!(
                "waypoints {i} and {} coincide",
                i + 1
            )));
        }
        if !(cruise_speed.is_finite() && cruise_speed > 0.0) {
            return Err(RobotError::InvalidTrajectory("cruise speed must be > 0".into()));
        }
        Ok(Self {
            waypoints,
            cruise_speed,
        })
    }

    pub fn waypoints(&self) -> &[[f64; 2]] {
        &self.waypoints
    }

    pub fn cruise_speed(&self) -> f64 {
        self.cruise_speed
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationModel {
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalizationSample {
    pub estimate: [f64; 2],
    pub sigma: f64,
}

#[derive(Debug, Clone)]
struct RobotState {
    trajectory: Trajectory,
    speed: f64,
    pos: [f64; 2],
    /// Index of the waypoint currently being approached.
    next: usize,
    heading: f64,
    localization: LocalizationModel,
    noise: Normal<f64>,
    rng: ChaCha8Rng,
}

impl RobotState {
    fn finished(&self) -> bool {
        self.next >= self.trajectory.waypoints.len()
    }

    fn sensors(&self) -> SensorVector {
        let speed = if self.finished() { 0.0 } else { self.speed };
        SensorVector {
            pos: self.pos,
            speed,
            heading: self.heading,
        }
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let wrapped = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped >= PI {
        -PI
    } else {
        wrapped
    }
}

#[derive(Debug, Clone, Default)]
pub struct RobotSim {
    robots: BTreeMap<NodeId, RobotState>,
    seed: u64,
}

impl RobotSim {
    pub fn new(seed: u64) -> Self {
        Self {
            robots: BTreeMap::new(),
            seed,
        }
    }

    /// Registers a robot at its first waypoint. Each robot draws localization
    /// noise from its own stream derived from the run seed and its
    /// registration index.
    pub fn register(
        &mut self,
        id: NodeId,
        trajectory: Trajectory,
        localization: LocalizationModel,
    ) -> Result<(), RobotError> {
        if self.robots.contains_key(&id) {
            return Err(RobotError::DuplicateRobot(id));
        }
        let noise = Normal::new(0.0, localization.sigma)
            .map_err(|_| RobotError::InvalidSigma(localization.sigma))?;
        let stream = self.robots.len() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        let pos = trajectory.waypoints[0];
        let to = trajectory.waypoints[1];
        let heading = wrap_angle((to[1] - pos[1]).atan2(to[0] - pos[0]));
        self.robots.insert(
            id,
            RobotState {
                speed: trajectory.cruise_speed,
                trajectory,
                pos,
                next: 1,
                heading,
                localization,
                noise,
                rng,
            },
        );
        Ok(())
    }

    pub fn ids(&self) -> impl Iterator<Item = &NodeId> {
        self.robots.keys()
    }

    fn state(&self, robot: &NodeId) -> Result<&RobotState, RobotError> {
        self.robots
            .get(robot)
            .ok_or_else(|| RobotError::UnknownRobot(robot.clone()))
    }

    fn state_mut(&mut self, robot: &NodeId) -> Result<&mut RobotState, RobotError> {
        self.robots
            .get_mut(robot)
            .ok_or_else(|| RobotError::UnknownRobot(robot.clone()))
    }

    pub fn sensors(&self, robot: &NodeId) -> Result<SensorVector, RobotError> {
        self.state(robot).map(RobotState::sensors)
    }

    pub fn position(&self, robot: &NodeId) -> Result<[f64; 2], RobotError> {
        self.state(robot).map(|s| s.pos)
    }

    /// Advances along the waypoint polyline by `speed * dt_s`, clamping at
    /// the final waypoint.
    pub fn step(&mut self, robot: &NodeId, dt_s: f64) -> Result<SensorVector, RobotError> {
        if !(dt_s.is_finite() && dt_s > 0.0) {
            return Err(RobotError::InvalidStep(dt_s));
        }
        let st = self.state_mut(robot)?;
        let mut remaining = st.speed * dt_s;
        while remaining > 0.0 && !st.finished() {
            let target = st.trajectory.waypoints[st.next];
            let dx = target[0] - st.pos[0];
            let dy = target[1] - st.pos[1];
            let seg = dx.hypot(dy);
            st.heading = wrap_angle(dy.atan2(dx));
            if remaining >= seg {
                st.pos = target;
                st.next += 1;
                remaining -= seg;
            } else {
                let f = remaining / seg;
                st.pos = [st.pos[0] + f * dx, st.pos[1] + f * dy];
                remaining = 0.0;
            }
        }
        Ok(st.sensors())
    }

    pub fn set_velocity(&mut self, robot: &NodeId, speed: f64) -> Result<(), RobotError> {
        if !(speed.is_finite() && speed >= 0.0) {
            return Err(RobotError::NegativeSpeed(speed));
        }
        self.state_mut(robot)?.speed = speed;
        Ok(())
    }

    pub fn sample_localization(&mut self, robot: &NodeId) -> Result<LocalizationSample, RobotError> {
        let st = self.state_mut(robot)?;
        let nx = st.noise.sample(&mut st.rng);
        let ny = st.noise.sample(&mut st.rng);
        Ok(LocalizationSample {
            estimate: [st.pos[0] + nx, st.pos[1] + ny],
            sigma: st.localization.sigma,
        })
    }

    /// Builds the embedding given the run's RU universe (in id order) and the
    /// robot's current attachment.
    pub fn build_context_embedding(
        &self,
        robot: &NodeId,
        rus: &[NodeId],
        attached: Option<&NodeId>,
    ) -> Result<ContextEmbedding, RobotError> {
        let sensors = self.sensors(robot)?;
        Ok(ContextEmbedding {
            attachment: rus.iter().map(|ru| Some(ru) == attached).collect(),
            sensors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id(s: &str) -> NodeId {
        NodeId::from(s)
    }

    fn sim_with(waypoints: Vec<[f64; 2]>, speed: f64, sigma: f64) -> RobotSim {
        let mut sim = RobotSim::new(42);
        sim.register(
            id("r"),
            Trajectory::new(waypoints, speed).unwrap(),
            LocalizationModel { sigma },
        )
        .unwrap();
        sim
    }

    /// Independent oracle: position at arclength `s` along the polyline.
    fn point_at_arclength(wps: &[[f64; 2]], mut s: f64) -> [f64; 2] {
        for w in wps.windows(2) {
            let len = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
            if s <= len {
                let t = s / len;
                return [w[0][0] + t * (w[1][0] - w[0][0]), w[0][1] + t * (w[1][1] - w[0][1])];
            }
            s -= len;
        }
        *wps.last().unwrap()
    }

    #[test]
    fn straight_line_step() {
        let mut sim = sim_with(vec![[0.0, 0.0], [10.0, 0.0]], 1.0, 0.0);
        let s = sim.step(&id("r"), 1.0).unwrap();
        assert_eq!(s.pos, [1.0, 0.0]);
        assert_eq!(s.speed, 1.0);
        assert_eq!(s.heading, 0.0);
    }

    #[test]
    fn overshoot_continues_on_next_segment() {
        let wps = vec![[0.0, 0.0], [3.0, 0.0], [3.0, 4.0], [0.0, 4.0]];
        let mut sim = sim_with(wps.clone(), 1.0, 0.0);
        let s = sim.step(&id("r"), 5.0).unwrap();
        let expect = point_at_arclength(&wps, 5.0);
        assert!((s.pos[0] - expect[0]).abs() < 1e-12 && (s.pos[1] - expect[1]).abs() < 1e-12);
        assert_eq!(expect, [3.0, 2.0]);
        assert!((s.heading - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn clamps_at_final_waypoint() {
        let mut sim = sim_with(vec![[0.0, 0.0], [1.0, 0.0]], 1.0, 0.0);
        sim.step(&id("r"), 5.0).unwrap();
        let s = sim.step(&id("r"), 1.0).unwrap();
        assert_eq!(s.pos, [1.0, 0.0]);
        assert_eq!(s.speed, 0.0);
    }

    #[test]
    fn velocity_changes() {
        let mut sim = sim_with(vec![[0.0, 0.0], [10.0, 0.0]], 1.0, 0.0);
        sim.set_velocity(&id("r"), 0.5).unwrap();
        assert_eq!(sim.step(&id("r"), 2.0).unwrap().pos, [1.0, 0.0]);
        sim.set_velocity(&id("r"), 0.0).unwrap();
        let s = sim.step(&id("r"), 2.0).unwrap();
        assert_eq!((s.pos, s.speed), ([1.0, 0.0], 0.0));
        assert_eq!(sim.set_velocity(&id("r"), -1.0), Err(RobotError::NegativeSpeed(-1.0)));
        assert!(matches!(sim.set_velocity(&id("x"), 1.0), Err(RobotError::UnknownRobot(_))));
    }

    #[test]
    fn zero_sigma_localization_is_exact() {
        let mut sim = sim_with(vec![[2.5, -1.0], [10.0, 0.0]], 1.0, 0.0);
        let s = sim.sample_localization(&id("r")).unwrap();
        assert_eq!(s.estimate, [2.5, -1.0]);
        assert!(matches!(sim.sample_localization(&id("x")), Err(RobotError::UnknownRobot(_))));
    }

    #[test]
    fn localization_mean_converges() {
        let mut sim = sim_with(vec![[3.0, 4.0], [10.0, 0.0]], 1.0, 0.1);
        let n = 10_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        for _ in 0..n {
            let s = sim.sample_localization(&id("r")).unwrap();
            sx += s.estimate[0];
            sy += s.estimate[1];
        }
        assert!((sx / n as f64 - 3.0).abs() < 0.01);
        assert!((sy / n as f64 - 4.0).abs() < 0.01);
    }

    #[test]
    fn localization_replays_with_same_seed() {
        let draw = || {
            let mut sim = sim_with(vec![[0.0, 0.0], [10.0, 0.0]], 1.0, 0.3);
            (0..50)
                .map(|_| sim.sample_localization(&id("r")).unwrap().estimate)
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn embedding_layout() {
        let mut sim = sim_with(vec![[2.0, 0.0], [10.0, 0.0]], 0.5, 0.0);
        sim.set_velocity(&id("r"), 0.5).unwrap();
        let rus: Vec<NodeId> = (1..=6).map(|i| id(&format!("R{i}"))).collect();
        let k = sim.build_context_embedding(&id("r"), &rus, Some(&id("R3"))).unwrap();
        assert_eq!(k.to_vec(), vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.5, 0.0]);
        assert_eq!(k.len(), 10);
        let k = sim.build_context_embedding(&id("r"), &rus, None).unwrap();
        assert!(k.attachment.iter().all(|a| !a));
    }

    #[test]
    fn heading_wraps_to_half_open_interval() {
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(-PI), -PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn bad_trajectories() {
        assert!(Trajectory::new(vec![[0.0, 0.0]], 1.0).is_err());
        assert!(Trajectory::new(vec![[0.0, 0.0], [0.0, 0.0]], 1.0).is_err());
        assert!(Trajectory::new(vec![[0.0, 0.0], [1.0, 0.0]], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn motion_is_continuous(
            pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..6),
            speed in 0.05f64..3.0,
            dts in prop::collection::vec(0.01f64..2.0, 1..40),
        ) {
            let wps: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
            prop_assume!(wps.windows(2).all(|w| w[0] != w[1]));
            let mut sim = sim_with(wps.clone(), speed, 0.0);
            let mut travelled = 0.0;
            let mut prev = sim.position(&id("r")).unwrap();
            for dt in dts {
                let s = sim.step(&id("r"), dt).unwrap();
                let moved = ((s.pos[0] - prev[0]).powi(2) + (s.pos[1] - prev[1]).powi(2)).sqrt();
                prop_assert!(moved <= speed * dt + 1e-9);
                prop_assert!(s.speed >= 0.0);
                prop_assert!(s.heading >= -PI && s.heading < PI);
                travelled += speed * dt;
                let expect = point_at_arclength(&wps, travelled);
                prop_assert!((s.pos[0] - expect[0]).abs() < 1e-6 && (s.pos[1] - expect[1]).abs() < 1e-6);
                prev = s.pos;
            }
        }
    }
}
