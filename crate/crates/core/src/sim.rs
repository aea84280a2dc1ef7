//! Fixed-rate simulation loop: physics every `dt`, gait control at
//! `control_hz`, commands queued between control ticks.

use std::collections::VecDeque;

use nalgebra::{UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::command::Command;
use crate::dynamics::{
    advance, contact_solve, stability_margin, support_polygon, BodyParams, ContactSource, Environment, EulerAngles,
    ImuModel, RobotState, MAX_DT,
};
use crate::error::{Error, Result};
use crate::gait::{GaitConfig, GaitController, GaitEvent, GaitPhase, Phase};
use crate::geometry::SPINE_COUNT;

/// Immutable view of one simulation instant, for logs and telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time_s: f64,
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub euler: EulerAngles,
    pub velocity: Vector3<f64>,
    pub extensions_mm: [f64; SPINE_COUNT],
    pub targets_mm: [f64; SPINE_COUNT],
    pub spine_contact: [bool; SPINE_COUNT],
    pub shell_contact: bool,
    pub contact_count: usize,
    pub stability_margin_m: f64,
    pub phase: Phase,
    pub preset: String,
}

pub struct Simulation {
    state: RobotState,
    body: BodyParams,
    env: Environment,
    gait: GaitController,
    imu: ImuModel,
    rng: ChaCha8Rng,
    dt: f64,
    control_every: u64,
    steps: u64,
    pending: VecDeque<Command>,
    events: Vec<GaitEvent>,
}

impl Simulation {
    pub fn new(state: RobotState, body: BodyParams, env: Environment, gait: GaitConfig, dt: f64) -> Result<Self> {
        body.validate()?;
        env.validate()?;
        gait.validate()?;
        if !(dt > 0.0 && dt <= MAX_DT) {
            return Err(Error::Configuration(format!("dt must be in (0, {MAX_DT}], got {dt}")));
        }
        let control_every = ((1.0 / gait.control_hz) / dt).round().max(1.0) as u64;
        let gait = GaitController::holding(gait, &state);
        Ok(Self {
            state,
            body,
            env,
            gait,
            imu: ImuModel::default(),
            rng: ChaCha8Rng::seed_from_u64(0),
            dt,
            control_every,
            steps: 0,
            pending: VecDeque::new(),
            events: Vec::new(),
        })
    }

    pub fn with_imu(mut self, imu: ImuModel, seed: u64) -> Self {
        self.imu = imu;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut RobotState {
        &mut self.state
    }

    pub fn body(&self) -> &BodyParams {
        &self.body
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn set_environment(&mut self, env: Environment) -> Result<()> {
        env.validate()?;
        self.env = env;
        Ok(())
    }

    pub fn gait(&self) -> &GaitController {
        &self.gait
    }

    pub fn phase(&self) -> &GaitPhase {
        self.gait.phase()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self) -> f64 {
        self.state.time_s
    }

    /// Queue a command for the next control tick. Order is preserved.
    pub fn enqueue(&mut self, command: Command) {
        self.pending.push_back(command);
    }

    pub fn drain_events(&mut self) -> Vec<GaitEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn events(&self) -> &[GaitEvent] {
        &self.events
    }

    /// One physics step, preceded by a control tick when due.
    pub fn step(&mut self) -> Result<()> {
        if self.steps.is_multiple_of(self.control_every) {
            let commands: Vec<Command> = self.pending.drain(..).collect();
            let targets = self.gait.step(&self.state, &self.body, &self.env, &commands);
            self.state.set_targets(targets.targets())?;
            self.events.extend(self.gait.drain_events());
        }
        advance(&mut self.state, &self.body, &self.env, self.dt)?;
        self.steps += 1;
        Ok(())
    }

    pub fn run_for(&mut self, seconds: f64) -> Result<()> {
        let n = (seconds / self.dt).round() as u64;
        for _ in 0..n {
            self.step()?;
        }
        Ok(())
    }

    /// Step until `done` holds or `max_seconds` pass; returns whether it held.
    pub fn run_until(&mut self, max_seconds: f64, mut done: impl FnMut(&Simulation) -> bool) -> Result<bool> {
        let n = (max_seconds / self.dt).round() as u64;
        for _ in 0..n {
            if done(self) {
                return Ok(true);
            }
            self.step()?;
        }
        Ok(done(self))
    }

    pub fn snapshot(&mut self) -> Result<Snapshot> {
        let s = &self.state;
        let contacts = contact_solve(s, &self.body, &self.env)?;
        let mut spine_contact = [false; SPINE_COUNT];
        let mut shell_contact = false;
        for c in &contacts {
            match c.source {
                ContactSource::Spine(id) => spine_contact[id] = true,
                ContactSource::Shell => shell_contact = true,
            }
        }
        let stability_margin_m = if contacts.is_empty() {
            0.0
        } else {
            stability_margin(&s.com_xy(&self.body), &support_polygon(&contacts)?).margin_m
        };
        let euler = self.imu.read(&s.pose.orientation, &mut self.rng);
        Ok(Snapshot {
            time_s: s.time_s,
            position: s.pose.position,
            orientation: s.pose.orientation,
            euler,
            velocity: s.linear_velocity,
            extensions_mm: s.extensions_mm(),
            targets_mm: std::array::from_fn(|i| s.actuators[i].target_mm()),
            spine_contact,
            shell_contact,
            contact_count: contacts.len(),
            stability_margin_m,
            phase: self.gait.phase().phase,
            preset: self.env.preset_name.clone(),
        })
    }
}
