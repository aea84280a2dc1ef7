//! Locomotion planners and the gait state machine.
//!
//! Planners are pure functions from the robot state to a [`SpineCommandSet`].
//! [`GaitController`] sequences them:
//!
//! ```text
//! REST --move(1)--> LEVELING --leveled--> STANCE --> PROPEL --tipping--> ROLLING --slow--> REST
//! REST --move(2), retracted--> PROPEL --> ROLLING --> REST
//! any  --stop, moving--> BRAKE --slow--> REST
//! any  --jump (water)--> JUMP --> REST
//! ```
//!
//! A move persists across cycles until stopped; each new cycle re-plans from
//! the pose the robot came to rest in, rotating the heading by
//! `turn_per_cycle_rad` for curvilinear paths.

use log::{debug, warn};
use nalgebra::{UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::actuator::STROKE_MM;
use crate::command::{Command, GaitMode};
use crate::dynamics::{contact_solve, stability_margin, support_polygon, BodyParams, ContactSource, Environment, RobotState};
use crate::error::{Error, Result};
use crate::geometry::{ground_spine, horizontal_direction, spine_layout, support_candidates, Pose, ShellGeometry, SPINE_COUNT};

const TIE_TOL: f64 = 1e-12;

/// Per-spine extension targets, each in `[0, 64]` mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpineCommandSet {
    targets: [f64; SPINE_COUNT],
}

impl SpineCommandSet {
    pub fn new(targets: [f64; SPINE_COUNT]) -> Result<Self> {
        if let Some(i) = targets.iter().position(|t| !(0.0..=STROKE_MM).contains(t)) {
            return Err(Error::Domain(format!("spine {i} target {} mm outside [0, {STROKE_MM}]", targets[i])));
        }
        Ok(Self { targets })
    }

    pub fn retracted() -> Self {
        Self { targets: [0.0; SPINE_COUNT] }
    }

    /// Targets equal to the current extensions.
    pub fn hold(state: &RobotState) -> Self {
        Self { targets: state.extensions_mm() }
    }

    pub fn targets(&self) -> &[f64; SPINE_COUNT] {
        &self.targets
    }

    pub fn get(&self, spine: usize) -> f64 {
        self.targets[spine]
    }

    fn set(&mut self, spine: usize, mm: f64) {
        self.targets[spine] = mm.clamp(0.0, STROKE_MM);
    }
}

impl Default for SpineCommandSet {
    fn default() -> Self {
        Self::retracted()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Rest,
    Stance,
    Propel,
    Rolling,
    Brake,
    Leveling,
    Jump,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Rest => "REST",
            Phase::Stance => "STANCE",
            Phase::Propel => "PROPEL",
            Phase::Rolling => "ROLLING",
            Phase::Brake => "BRAKE",
            Phase::Leveling => "LEVELING",
            Phase::Jump => "JUMP",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Phase::Rest, Phase::Stance, Phase::Propel, Phase::Rolling, Phase::Brake, Phase::Leveling, Phase::Jump]
            .into_iter()
            .find(|p| p.as_str() == s)
    }

    fn carries_heading(self) -> bool {
        matches!(self, Phase::Stance | Phase::Propel | Phase::Rolling)
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Controller phase. `heading` is present exactly in STANCE, PROPEL and ROLLING.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitPhase {
    pub phase: Phase,
    pub heading: Option<Vector2<f64>>,
    pub phase_entry_time: f64,
}

impl GaitPhase {
    fn new(phase: Phase, heading: Option<Vector2<f64>>, t: f64) -> Self {
        let heading = if phase.carries_heading() { heading } else { None };
        debug_assert!(!phase.carries_heading() || heading.is_some());
        Self { phase, heading, phase_entry_time: t }
    }
}

impl Default for GaitPhase {
    fn default() -> Self {
        Self::new(Phase::Rest, None, 0.0)
    }
}

/// Tuning constants for the planners and the state machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitConfig {
    pub control_hz: f64,
    pub leveling_gain: f64,
    pub level_tol_rad: f64,
    pub level_timeout_s: f64,
    /// Leveling has converged when every target is within this of its goal.
    pub level_settle_mm: f64,
    pub stop_speed_m_s: f64,
    pub brake_dot: f64,
    pub brake_max_z: f64,
    pub retracted_tol_mm: f64,
    /// Minimum time in ROLLING before the stop-speed exit is checked.
    pub rolling_dwell_s: f64,
    /// Longest a PROPEL phase lasts without the robot tipping.
    pub propel_timeout_s: f64,
    /// Settling time in REST before the next cycle of an active move.
    pub rest_settle_s: f64,
    pub jump_hold_s: f64,
    pub turn_per_cycle_rad: f64,
}

impl Default for GaitConfig {
    fn default() -> Self {
        Self {
            control_hz: 50.0,
            leveling_gain: 0.5,
            level_tol_rad: 0.02,
            level_timeout_s: 10.0,
            level_settle_mm: 0.5,
            stop_speed_m_s: 0.01,
            brake_dot: 0.3,
            brake_max_z: 0.2,
            retracted_tol_mm: 1.0,
            rolling_dwell_s: 0.3,
            propel_timeout_s: 1.5,
            rest_settle_s: 0.3,
            jump_hold_s: 1.0,
            turn_per_cycle_rad: 0.0,
        }
    }
}

impl GaitConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("control_hz", self.control_hz),
            ("leveling_gain", self.leveling_gain),
            ("level_tol_rad", self.level_tol_rad),
            ("level_timeout_s", self.level_timeout_s),
            ("level_settle_mm", self.level_settle_mm),
            ("stop_speed_m_s", self.stop_speed_m_s),
            ("retracted_tol_mm", self.retracted_tol_mm),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Configuration(format!("gait.{name} must be positive, got {v}")));
            }
        }
        if self.leveling_gain > 1.0 {
            return Err(Error::Configuration(format!("gait.leveling_gain must be at most 1, got {}", self.leveling_gain)));
        }
        let others = [
            ("brake_dot", self.brake_dot),
            ("brake_max_z", self.brake_max_z),
            ("rolling_dwell_s", self.rolling_dwell_s),
            ("propel_timeout_s", self.propel_timeout_s),
            ("rest_settle_s", self.rest_settle_s),
            ("jump_hold_s", self.jump_hold_s),
            ("turn_per_cycle_rad", self.turn_per_cycle_rad),
        ];
        for (name, v) in others {
            if !v.is_finite() {
                return Err(Error::Configuration(format!("gait.{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Orientation with the ground spine turned straight down by the smallest rotation.
pub fn stance_orientation(pose: &Pose) -> UnitQuaternion<f64> {
    let layout = spine_layout();
    let down = layout.world_direction(pose, ground_spine(pose, layout));
    let correction = UnitQuaternion::rotation_between(&down, &-Vector3::z()).unwrap_or_else(UnitQuaternion::identity);
    correction * pose.orientation
}

/// Angle between the ground spine and the vertical.
pub fn stance_tilt(pose: &Pose) -> f64 {
    let layout = spine_layout();
    let down = layout.world_direction(pose, ground_spine(pose, layout));
    crate::geometry::angle_between(&down, &-Vector3::z())
}

/// Support candidates that can reach flat ground when the stance is level.
pub fn leveling_supports(pose: &Pose, body: &BodyParams) -> Vec<usize> {
    let layout = spine_layout();
    let level = stance_orientation(pose);
    let r = body.shell.radius_m();
    let min_down = r / (r + STROKE_MM * 1e-3);
    support_candidates(pose, layout)
        .into_iter()
        .filter(|&id| -(level * layout.direction(id)).z > min_down)
        .collect()
}

fn spine_contacts(state: &RobotState, body: &BodyParams, env: &Environment) -> Result<(Vec<usize>, bool, f64)> {
    let contacts = contact_solve(state, body, env)?;
    let spines: Vec<usize> = contacts
        .iter()
        .filter_map(|c| match c.source {
            ContactSource::Spine(id) => Some(id),
            ContactSource::Shell => None,
        })
        .collect();
    let shell = contacts.iter().any(|c| c.source == ContactSource::Shell);
    let margin = if contacts.is_empty() {
        0.0
    } else {
        let m = stability_margin(&state.com_xy(body), &support_polygon(&contacts)?);
        if m.degenerate { 0.0 } else { m.margin_m }
    };
    Ok((spines, shell, margin))
}

/// Propel-and-compress: extend the ground spine fully and retract the support
/// spine that best points along `heading`, so the robot tips toward it.
pub fn plan_config1(state: &RobotState, body: &BodyParams, env: &Environment, heading: &Vector2<f64>) -> Result<SpineCommandSet> {
    let layout = spine_layout();
    let (touching, shell, margin) = spine_contacts(state, body, env)?;
    let supports: Vec<usize> =
        leveling_supports(&state.pose, body).into_iter().filter(|id| touching.contains(id)).collect();
    if supports.len() < 3 || shell || margin <= 0.0 {
        return Err(Error::Precondition(format!(
            "not in stance: {} support contacts, shell contact {shell}, margin {margin:.4} m",
            supports.len()
        )));
    }
    let mut compress = supports[0];
    let mut best = f64::NEG_INFINITY;
    let mut ordered = supports.clone();
    ordered.sort_unstable();
    for &id in &ordered {
        let score = horizontal_direction(&state.pose, layout, id).dot(heading);
        if score > best + TIE_TOL {
            best = score;
            compress = id;
        }
    }
    let mut cmd = SpineCommandSet::retracted();
    for &id in &supports {
        cmd.set(id, state.actuators[id].target_mm());
    }
    cmd.set(ground_spine(&state.pose, layout), STROKE_MM);
    cmd.set(compress, 0.0);
    Ok(cmd)
}

/// The adjacent lower-hemisphere pair (ground spine excluded) whose mean
/// horizontal direction points most directly away from `heading`.
pub fn config2_pair(pose: &Pose, heading: &Vector2<f64>) -> Option<(usize, usize)> {
    let layout = spine_layout();
    let ground = ground_spine(pose, layout);
    let lower: Vec<usize> = (0..SPINE_COUNT).filter(|&id| id != ground && reaches_flat_ground(pose, id)).collect();
    let mut best: Option<((usize, usize), f64)> = None;
    for (k, &a) in lower.iter().enumerate() {
        for &b in &lower[k + 1..] {
            if !layout.are_adjacent(a, b) {
                continue;
            }
            let mean = (horizontal_direction(pose, layout, a) + horizontal_direction(pose, layout, b)) * 0.5;
            let score = mean.dot(heading);
            if best.is_none_or(|(_, s)| score < s - TIE_TOL) {
                best = Some(((a, b), score));
            }
        }
    }
    best.filter(|&(_, s)| s < -TIE_TOL).map(|(pair, _)| pair)
}

/// Whether a spine's tip touches flat ground at full stroke from a shell resting on it.
fn reaches_flat_ground(pose: &Pose, id: usize) -> bool {
    let r = ShellGeometry::default().radius_m();
    -spine_layout().world_direction(pose, id).z > r / (r + STROKE_MM * 1e-3)
}

/// Two-neighbor push from the fully retracted sphere. When the roll has left no
/// adjacent pair that can reach the ground behind the heading, the single
/// reachable spine that best opposes the heading pushes instead.
pub fn plan_config2(state: &RobotState, heading: &Vector2<f64>, cfg: &GaitConfig) -> Result<SpineCommandSet> {
    if let Some(id) = state.actuators.iter().position(|a| a.extension_mm() > cfg.retracted_tol_mm) {
        return Err(Error::Precondition(format!(
            "spine {id} extended {:.1} mm; neighbor push needs all spines retracted",
            state.actuators[id].extension_mm()
        )));
    }
    let mut cmd = SpineCommandSet::retracted();
    if let Some((a, b)) = config2_pair(&state.pose, heading) {
        cmd.set(a, STROKE_MM);
        cmd.set(b, STROKE_MM);
        return Ok(cmd);
    }
    let layout = spine_layout();
    let single = (0..SPINE_COUNT)
        .filter(|&id| reaches_flat_ground(&state.pose, id))
        .map(|id| (id, horizontal_direction(&state.pose, layout, id).dot(heading)))
        .filter(|&(_, s)| s < -TIE_TOL)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::Precondition("no spine can push against the heading".into()))?;
    cmd.set(single.0, STROKE_MM);
    Ok(cmd)
}

/// Extend the low spines on the leading side of the horizontal velocity so
/// their tips strike the ground ahead of the shell.
pub fn plan_brake(state: &RobotState, cfg: &GaitConfig) -> SpineCommandSet {
    let mut cmd = SpineCommandSet::retracted();
    let vh = state.linear_velocity.xy();
    let speed = vh.norm();
    if speed <= cfg.stop_speed_m_s {
        return cmd;
    }
    let u = Vector3::new(vh.x / speed, vh.y / speed, 0.0);
    let layout = spine_layout();
    for id in 0..SPINE_COUNT {
        let d = layout.world_direction(&state.pose, id);
        if d.dot(&u) > cfg.brake_dot && d.z < cfg.brake_max_z {
            cmd.set(id, STROKE_MM);
        }
    }
    cmd
}

/// Underwater jump: drive the ground spine out at full rate.
pub fn plan_jump(state: &RobotState, env: &Environment) -> Result<SpineCommandSet> {
    if !env.medium.is_water() {
        return Err(Error::Precondition("jump is only available underwater".into()));
    }
    let mut cmd = SpineCommandSet::retracted();
    cmd.set(ground_spine(&state.pose, spine_layout()), STROKE_MM);
    Ok(cmd)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LevelOutcome {
    Adjusting(SpineCommandSet),
    Converged(SpineCommandSet),
}

impl LevelOutcome {
    pub fn command(&self) -> &SpineCommandSet {
        match self {
            LevelOutcome::Adjusting(c) | LevelOutcome::Converged(c) => c,
        }
    }
}

/// Extension each support needs for a level stance at the current center,
/// with the reference height set so the spine over the lowest ground is at
/// full stroke.
pub fn leveling_goals(state: &RobotState, body: &BodyParams, env: &Environment, supports: &[usize], current: &SpineCommandSet) -> Result<Vec<f64>> {
    let layout = spine_layout();
    let level = stance_orientation(&state.pose);
    let r = body.shell.radius_m();
    let reach = r + STROKE_MM * 1e-3;
    let c = state.pose.position;
    let mut ground = Vec::with_capacity(supports.len());
    for &id in supports {
        let d = level * layout.direction(id);
        let lever = r + current.get(id) * 1e-3;
        let h = env.terrain.height(c.x + d.x * lever, c.y + d.y * lever);
        ground.push((id, -d.z, h));
    }
    let z_ref = ground.iter().map(|&(_, down, h)| h + reach * down).fold(f64::INFINITY, f64::min);
    let mut goals = Vec::with_capacity(supports.len());
    for &(id, down, h) in &ground {
        let goal_mm = ((z_ref - h) / down - r) * 1e3;
        if goal_mm < 0.0 {
            return Err(Error::LevelingSaturated { spine: id, required_mm: goal_mm });
        }
        goals.push(goal_mm.min(STROKE_MM));
    }
    Ok(goals)
}

/// One proportional leveling tick.
pub fn level(
    state: &RobotState,
    body: &BodyParams,
    env: &Environment,
    supports: &[usize],
    current: &SpineCommandSet,
    cfg: &GaitConfig,
) -> Result<LevelOutcome> {
    let goals = leveling_goals(state, body, env, supports, current)?;
    let mut cmd = SpineCommandSet::retracted();
    let mut settled = true;
    for (&id, &goal) in supports.iter().zip(&goals) {
        let t = current.get(id);
        let next = t + cfg.leveling_gain * (goal - t);
        cmd.set(id, next);
        settled &= (goal - next).abs() < cfg.level_settle_mm && state.actuators[id].at_target();
    }
    if !settled {
        return Ok(LevelOutcome::Adjusting(cmd));
    }
    let (touching, shell, _) = spine_contacts(state, body, env)?;
    let all_touch = supports.iter().all(|id| touching.contains(id));
    let level_enough = stance_tilt(&state.pose) < cfg.level_tol_rad;
    let still = state.linear_velocity.norm() < cfg.stop_speed_m_s;
    if all_touch && !shell && level_enough && still {
        Ok(LevelOutcome::Converged(cmd))
    } else {
        Ok(LevelOutcome::Adjusting(cmd))
    }
}

/// Notable controller events, drained by the simulation loop.
#[derive(Debug, Clone, PartialEq)]
pub enum GaitEvent {
    Entered { phase: Phase, time_s: f64 },
    Leveled { time_s: f64, extensions_mm: Vec<(usize, f64)> },
    LevelingFailed { time_s: f64, error: Error },
    /// A propel cycle finished; displacement is measured from the propel start.
    CycleCompleted { time_s: f64, start: Vector3<f64>, end: Vector3<f64> },
    Ignored { time_s: f64, command: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct MoveIntent {
    heading: Vector2<f64>,
    mode: GaitMode,
}

/// The gait finite-state machine.
#[derive(Debug, Clone)]
pub struct GaitController {
    cfg: GaitConfig,
    phase: GaitPhase,
    intent: Option<MoveIntent>,
    command: SpineCommandSet,
    supports: Vec<usize>,
    cycle_start: Vector3<f64>,
    events: Vec<GaitEvent>,
}

impl GaitController {
    pub fn new(cfg: GaitConfig) -> Self {
        Self {
            cfg,
            phase: GaitPhase::default(),
            intent: None,
            command: SpineCommandSet::retracted(),
            supports: Vec::new(),
            cycle_start: Vector3::zeros(),
            events: Vec::new(),
        }
    }

    /// Resume from a state whose current extensions are held.
    pub fn holding(cfg: GaitConfig, state: &RobotState) -> Self {
        let mut g = Self::new(cfg);
        g.command = SpineCommandSet::new(std::array::from_fn(|i| state.actuators[i].target_mm()))
            .unwrap_or_else(|_| SpineCommandSet::hold(state));
        g
    }

    pub fn config(&self) -> &GaitConfig {
        &self.cfg
    }

    pub fn phase(&self) -> &GaitPhase {
        &self.phase
    }

    pub fn command(&self) -> &SpineCommandSet {
        &self.command
    }

    pub fn drain_events(&mut self) -> Vec<GaitEvent> {
        std::mem::take(&mut self.events)
    }

    fn enter(&mut self, phase: Phase, t: f64) {
        let heading = self.intent.map(|i| i.heading);
        self.phase = GaitPhase::new(phase, heading, t);
        self.events.push(GaitEvent::Entered { phase, time_s: t });
        debug!("gait -> {phase} at {t:.3} s");
    }

    fn ignore(&mut self, t: f64, command: &Command, reason: String) {
        warn!("ignoring `{}` command: {reason}", command.name());
        self.events.push(GaitEvent::Ignored { time_s: t, command: command.name().into(), reason });
    }

    fn start_leveling(&mut self, state: &RobotState, body: &BodyParams) {
        self.supports = leveling_supports(&state.pose, body);
        self.enter(Phase::Leveling, state.time_s);
    }

    fn apply(&mut self, cmd: &Command, state: &RobotState, body: &BodyParams, env: &Environment) {
        let t = state.time_s;
        match cmd {
            Command::Move { heading, mode } => {
                self.intent = Some(MoveIntent { heading: *heading, mode: *mode });
                match mode {
                    GaitMode::PropelCompress => self.start_leveling(state, body),
                    GaitMode::NeighborPush => {
                        self.command = SpineCommandSet::retracted();
                        self.enter(Phase::Rest, t);
                        // Start immediately when already retracted and still.
                        self.phase.phase_entry_time = t - self.cfg.rest_settle_s;
                    }
                }
            }
            Command::Stop => {
                self.intent = None;
                if state.horizontal_speed() > self.cfg.stop_speed_m_s {
                    self.command = plan_brake(state, &self.cfg);
                    self.enter(Phase::Brake, t);
                } else {
                    self.enter(Phase::Rest, t);
                }
            }
            Command::Level => {
                self.intent = None;
                self.start_leveling(state, body);
            }
            Command::Jump => match plan_jump(state, env) {
                Ok(c) => {
                    self.intent = None;
                    self.command = c;
                    self.enter(Phase::Jump, t);
                }
                Err(e) => self.ignore(t, cmd, e.to_string()),
            },
            Command::RetractAll => {
                self.intent = None;
                self.command = SpineCommandSet::retracted();
                self.enter(Phase::Rest, t);
            }
            Command::Spine { id, target_mm } => {
                if *id >= SPINE_COUNT || !(0.0..=STROKE_MM).contains(target_mm) {
                    self.ignore(t, cmd, format!("spine {id} target {target_mm} out of range"));
                    return;
                }
                self.intent = None;
                self.command.set(*id, *target_mm);
                if self.phase.phase != Phase::Rest {
                    self.enter(Phase::Rest, t);
                }
            }
        }
    }

    /// One control tick: apply the commands that arrived since the last tick
    /// in order, then advance the phase logic.
    pub fn step(
        &mut self,
        state: &RobotState,
        body: &BodyParams,
        env: &Environment,
        commands: &[Command],
    ) -> SpineCommandSet {
        for cmd in commands {
            self.apply(cmd, state, body, env);
        }
        self.tick(state, body, env);
        self.command
    }

    fn tick(&mut self, state: &RobotState, body: &BodyParams, env: &Environment) {
        let t = state.time_s;
        let in_phase = t - self.phase.phase_entry_time;
        let speed = state.horizontal_speed();
        match self.phase.phase {
            Phase::Rest => {
                let Some(intent) = self.intent else { return };
                if in_phase < self.cfg.rest_settle_s || speed > self.cfg.stop_speed_m_s {
                    return;
                }
                match intent.mode {
                    GaitMode::PropelCompress => self.start_leveling(state, body),
                    GaitMode::NeighborPush => match plan_config2(state, &intent.heading, &self.cfg) {
                        Ok(c) => {
                            self.command = c;
                            self.cycle_start = state.pose.position;
                            self.enter(Phase::Propel, t);
                        }
                        Err(_) => self.command = SpineCommandSet::retracted(),
                    },
                }
            }
            Phase::Leveling => {
                if in_phase > self.cfg.level_timeout_s {
                    let iterations = (in_phase * self.cfg.control_hz).round() as usize;
                    self.fail_leveling(t, Error::LevelingTimeout { iterations });
                    return;
                }
                match level(state, body, env, &self.supports, &self.command, &self.cfg) {
                    Ok(LevelOutcome::Adjusting(c)) => self.command = c,
                    Ok(LevelOutcome::Converged(c)) => {
                        self.command = c;
                        let extensions_mm = self.supports.iter().map(|&id| (id, state.actuators[id].extension_mm())).collect();
                        self.events.push(GaitEvent::Leveled { time_s: t, extensions_mm });
                        if self.intent.is_some_and(|i| i.mode == GaitMode::PropelCompress) {
                            self.enter(Phase::Stance, t);
                        } else {
                            self.enter(Phase::Rest, t);
                        }
                    }
                    Err(e) => self.fail_leveling(t, e),
                }
            }
            Phase::Stance => {
                let Some(intent) = self.intent else {
                    self.enter(Phase::Rest, t);
                    return;
                };
                match plan_config1(state, body, env, &intent.heading) {
                    Ok(c) => {
                        self.command = c;
                        self.cycle_start = state.pose.position;
                        self.enter(Phase::Propel, t);
                    }
                    Err(e) => {
                        warn!("stance lost before propel: {e}");
                        self.start_leveling(state, body);
                    }
                }
            }
            Phase::Propel => {
                let tipping = spine_contacts(state, body, env).map(|(_, _, m)| m < 0.0).unwrap_or(false);
                if tipping || speed > 5.0 * self.cfg.stop_speed_m_s || in_phase > self.cfg.propel_timeout_s {
                    self.enter(Phase::Rolling, t);
                }
            }
            Phase::Rolling => {
                if in_phase >= self.cfg.rolling_dwell_s && speed < self.cfg.stop_speed_m_s {
                    self.events.push(GaitEvent::CycleCompleted { time_s: t, start: self.cycle_start, end: state.pose.position });
                    if let Some(intent) = &mut self.intent {
                        let turn = nalgebra::Rotation2::new(self.cfg.turn_per_cycle_rad);
                        intent.heading = turn * intent.heading;
                    }
                    self.command = SpineCommandSet::retracted();
                    self.enter(Phase::Rest, t);
                }
            }
            Phase::Brake => {
                let spin = state.world_angular_velocity().norm() * body.shell.radius_m();
                if speed.max(spin) < self.cfg.stop_speed_m_s {
                    self.command = SpineCommandSet::retracted();
                    self.enter(Phase::Rest, t);
                } else {
                    self.command = plan_brake(state, &self.cfg);
                }
            }
            Phase::Jump => {
                if in_phase >= self.cfg.jump_hold_s {
                    self.command = SpineCommandSet::retracted();
                    self.enter(Phase::Rest, t);
                }
            }
        }
    }

    fn fail_leveling(&mut self, t: f64, error: Error) {
        warn!("leveling failed: {error}");
        self.events.push(GaitEvent::LevelingFailed { time_s: t, error });
        self.intent = None;
        self.enter(Phase::Rest, t);
    }
}

impl Default for GaitController {
    fn default() -> Self {
        Self::new(GaitConfig::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Heightfield, Medium, Terrain};
    use crate::geometry::DOWN_SPINE;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn octant(sx: f64, sy: f64, sz: f64) -> usize {
        let layout = spine_layout();
        let want = Vector3::new(sx, sy, sz).normalize();
        (0..SPINE_COUNT).find(|&i| (layout.direction(i) - want).norm() < 1e-12).unwrap()
    }

    fn stance_state() -> RobotState {
        let mut s = RobotState::at_rest(Pose::at(Vector3::new(0.0, 0.0, 0.129 / 3f64.sqrt() - 1e-4)));
        for id in support_candidates(&s.pose, spine_layout()) {
            s.set_extension(id, 64.0).unwrap();
        }
        s
    }

    fn config1_compressed(heading: Vector2<f64>) -> usize {
        let body = BodyParams::default();
        let s = stance_state();
        let cmd = plan_config1(&s, &body, &Environment::default(), &heading).unwrap();
        let zeros: Vec<usize> = (6..14).filter(|&i| cmd.get(i) == 0.0).collect();
        assert_eq!(zeros.len(), 5, "four upper octants idle plus one compressed");
        let supports = support_candidates(&s.pose, spine_layout());
        let compressed: Vec<usize> = supports.into_iter().filter(|&i| cmd.get(i) == 0.0).collect();
        assert_eq!(compressed.len(), 1);
        assert_eq!(cmd.get(DOWN_SPINE), STROKE_MM);
        for id in supports {
            if id != compressed[0] {
                assert_eq!(cmd.get(id), 64.0);
            }
        }
        compressed[0]
    }

    #[test]
    fn command_set_rejects_out_of_range() {
        let mut t = [0.0; SPINE_COUNT];
        t[3] = 64.5;
        assert!(matches!(SpineCommandSet::new(t), Err(Error::Domain(_))));
        t[3] = -0.1;
        assert!(SpineCommandSet::new(t).is_err());
        t[3] = 64.0;
        assert!(SpineCommandSet::new(t).is_ok());
    }

    #[test]
    fn phase_names_round_trip() {
        for p in [Phase::Rest, Phase::Stance, Phase::Propel, Phase::Rolling, Phase::Brake, Phase::Leveling, Phase::Jump] {
            assert_eq!(Phase::parse(p.as_str()), Some(p));
        }
        assert_eq!(Phase::parse("rest"), None);
    }

    #[test]
    fn heading_only_in_motion_phases() {
        let h = Some(Vector2::x());
        assert!(GaitPhase::new(Phase::Rest, h, 0.0).heading.is_none());
        assert!(GaitPhase::new(Phase::Brake, h, 0.0).heading.is_none());
        assert!(GaitPhase::new(Phase::Rolling, h, 0.0).heading.is_some());
    }

    #[test]
    fn config1_diagonal_compresses_aligned_octant() {
        let d = Vector2::new(1.0, 1.0).normalize();
        assert_eq!(config1_compressed(d), octant(1.0, 1.0, -1.0));
        assert_eq!(config1_compressed(-d), octant(-1.0, -1.0, -1.0));
    }

    #[test]
    fn config1_tie_goes_to_lower_id() {
        let a = octant(1.0, 1.0, -1.0);
        let b = octant(1.0, -1.0, -1.0);
        assert_eq!(config1_compressed(Vector2::x()), a.min(b));
    }

    #[test]
    fn config1_requires_stance() {
        let body = BodyParams::default();
        let s = RobotState::on_ground(&body);
        let r = plan_config1(&s, &body, &Environment::default(), &Vector2::x());
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn config2_pairs_oppose_heading() {
        let pose = Pose::default();
        let sorted = |(a, b): (usize, usize)| (a.min(b), a.max(b));
        let pair = |sx: f64, sy: f64, tx: f64, ty: f64| {
            let (a, b) = (octant(sx, sy, -1.0), octant(tx, ty, -1.0));
            (a.min(b), a.max(b))
        };
        let got = |h: Vector2<f64>| sorted(config2_pair(&pose, &h).unwrap());
        assert_eq!(got(Vector2::x()), pair(-1.0, 1.0, -1.0, -1.0));
        assert_eq!(got(Vector2::y()), pair(1.0, -1.0, -1.0, -1.0));
        assert_eq!(got(-Vector2::x()), pair(1.0, 1.0, 1.0, -1.0));
    }

    #[test]
    fn config2_matches_brute_force() {
        // Independent enumeration over all adjacent lower pairs.
        let layout = spine_layout();
        let pose = Pose::default();
        for k in 0..16 {
            let a = k as f64 * std::f64::consts::TAU / 16.0 + 0.1;
            let h = Vector2::new(a.cos(), a.sin());
            let mut best = (f64::INFINITY, (0, 0));
            for i in 6..14 {
                for j in i + 1..14 {
                    let (di, dj) = (layout.direction(i), layout.direction(j));
                    if di.z > 0.0 || dj.z > 0.0 || (di.dot(&dj) - 1.0 / 3.0).abs() > 1e-9 {
                        continue;
                    }
                    let mean = (di.xy().normalize() + dj.xy().normalize()) * 0.5;
                    if mean.dot(&h) < best.0 {
                        best = (mean.dot(&h), (i, j));
                    }
                }
            }
            let (p, q) = config2_pair(&pose, &h).unwrap();
            assert_eq!((p.min(q), p.max(q)), best.1);
        }
    }

    #[test]
    fn config2_needs_retracted_spines() {
        let mut s = RobotState::on_ground(&BodyParams::default());
        let cfg = GaitConfig::default();
        assert!(plan_config2(&s, &Vector2::x(), &cfg).is_ok());
        s.set_extension(3, 2.0).unwrap();
        assert!(matches!(plan_config2(&s, &Vector2::x(), &cfg), Err(Error::Precondition(_))));
    }

    #[test]
    fn config2_falls_back_to_single_spine() {
        // Rolled 27 degrees toward +x: the rear octants no longer reach the ground.
        let body = BodyParams::default();
        let mut s = RobotState::on_ground(&body);
        s.pose.orientation = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), 0.47);
        assert_eq!(config2_pair(&s.pose, &Vector2::x()), None);
        let cmd = plan_config2(&s, &Vector2::x(), &GaitConfig::default()).unwrap();
        let active: Vec<usize> = (0..SPINE_COUNT).filter(|&i| cmd.get(i) > 0.0).collect();
        assert_eq!(active, vec![DOWN_SPINE]);
    }

    #[test]
    fn brake_extends_low_leading_spines() {
        let mut s = RobotState::on_ground(&BodyParams::default());
        s.linear_velocity = Vector3::new(0.3, 0.0, 0.0);
        let cmd = plan_brake(&s, &GaitConfig::default());
        let active: Vec<usize> = (0..SPINE_COUNT).filter(|&i| cmd.get(i) == STROKE_MM).collect();
        // Enumerated by hand: +x axis and the two lower +x octants.
        let mut want = vec![0, octant(1.0, -1.0, -1.0), octant(1.0, 1.0, -1.0)];
        want.sort_unstable();
        assert_eq!(active, want);
        assert!((0..SPINE_COUNT).all(|i| cmd.get(i) == 0.0 || cmd.get(i) == STROKE_MM));

        s.linear_velocity = Vector3::new(0.0, 0.3, 0.0);
        let cmd = plan_brake(&s, &GaitConfig::default());
        let active: Vec<usize> = (0..SPINE_COUNT).filter(|&i| cmd.get(i) == STROKE_MM).collect();
        let mut want = vec![2, octant(-1.0, 1.0, -1.0), octant(1.0, 1.0, -1.0)];
        want.sort_unstable();
        assert_eq!(active, want);
    }

    #[test]
    fn brake_is_noop_when_stopped() {
        let s = RobotState::on_ground(&BodyParams::default());
        assert_eq!(plan_brake(&s, &GaitConfig::default()), SpineCommandSet::retracted());
    }

    #[test]
    fn jump_only_underwater() {
        let s = RobotState::on_ground(&BodyParams::default());
        assert!(matches!(plan_jump(&s, &Environment::default()), Err(Error::Precondition(_))));
        let water = Environment { medium: Medium::water(), ..Environment::default() };
        let cmd = plan_jump(&s, &water).unwrap();
        for i in 0..SPINE_COUNT {
            assert_eq!(cmd.get(i), if i == DOWN_SPINE { STROKE_MM } else { 0.0 });
        }
        let mut extended = s.clone();
        extended.set_extension(DOWN_SPINE, 64.0).unwrap();
        assert_eq!(plan_jump(&extended, &water).unwrap(), cmd);
    }

    fn stepped(step_m: f64, under: usize) -> Environment {
        let d = spine_layout().direction(under);
        let (sx, sy) = (d.x.signum(), d.y.signum());
        let hf = Heightfield::from_fn(Vector2::new(-0.3, -0.3), 0.01, 61, 61, |x, y| {
            if x * sx > 0.03 && y * sy > 0.03 { step_m } else { 0.0 }
        })
        .unwrap();
        Environment { terrain: Terrain::Heightfield(hf), ..Environment::default() }
    }

    #[test]
    fn leveling_goals_flat_are_full_stroke() {
        let body = BodyParams::default();
        let s = stance_state();
        let supports = leveling_supports(&s.pose, &body);
        assert_eq!(supports.len(), 4);
        let goals = leveling_goals(&s, &body, &Environment::default(), &supports, &SpineCommandSet::hold(&s)).unwrap();
        for g in goals {
            assert_abs_diff_eq!(g, 64.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn leveling_goal_on_step() {
        let body = BodyParams::default();
        let s = stance_state();
        let raised = octant(1.0, 1.0, -1.0);
        let env = stepped(0.010, raised);
        let supports = leveling_supports(&s.pose, &body);
        let goals = leveling_goals(&s, &body, &env, &supports, &SpineCommandSet::hold(&s)).unwrap();
        // A support leaning 54.7 degrees off vertical must shorten by step / cos.
        let shorten = 10.0 * 3f64.sqrt();
        for (&id, &g) in supports.iter().zip(&goals) {
            let want = if id == raised { 64.0 - shorten } else { 64.0 };
            assert_abs_diff_eq!(g, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn leveling_saturates_on_tall_step() {
        let body = BodyParams::default();
        let s = stance_state();
        let raised = octant(-1.0, 1.0, -1.0);
        let supports = leveling_supports(&s.pose, &body);
        let r = leveling_goals(&s, &body, &stepped(0.080, raised), &supports, &SpineCommandSet::hold(&s));
        match r {
            Err(Error::LevelingSaturated { spine, required_mm }) => {
                assert_eq!(spine, raised);
                assert!(required_mm < 0.0);
            }
            other => panic!("expected saturation, got {other:?}"),
        }
    }

    #[test]
    fn level_steps_proportionally() {
        let body = BodyParams::default();
        let s = RobotState::on_ground(&body);
        let supports = leveling_supports(&s.pose, &body);
        let cfg = GaitConfig::default();
        let out = level(&s, &body, &Environment::default(), &supports, &SpineCommandSet::retracted(), &cfg).unwrap();
        let LevelOutcome::Adjusting(cmd) = out else { panic!("cannot converge in one tick") };
        for &id in &supports {
            assert_abs_diff_eq!(cmd.get(id), 32.0, epsilon = 1e-9);
        }
    }

    fn controller_at_rest() -> (GaitController, RobotState, BodyParams, Environment) {
        let body = BodyParams::default();
        (GaitController::default(), RobotState::on_ground(&body), body, Environment::default())
    }

    #[test]
    fn move_config1_enters_leveling() {
        let (mut g, s, body, env) = controller_at_rest();
        let cmd = g.step(&s, &body, &env, &[Command::move_toward(Vector2::x(), GaitMode::PropelCompress).unwrap()]);
        assert_eq!(g.phase().phase, Phase::Leveling);
        assert!(g.phase().heading.is_none());
        let supports = leveling_supports(&s.pose, &body);
        for i in 0..SPINE_COUNT {
            assert_eq!(cmd.get(i) > 0.0, supports.contains(&i));
        }
    }

    #[test]
    fn move_config2_propels_when_retracted() {
        let (mut g, s, body, env) = controller_at_rest();
        g.step(&s, &body, &env, &[Command::move_toward(Vector2::y(), GaitMode::NeighborPush).unwrap()]);
        assert_eq!(g.phase().phase, Phase::Propel);
        assert_eq!(g.phase().heading, Some(Vector2::y()));
    }

    #[test]
    fn stop_while_rolling_brakes_then_rests() {
        let (mut g, mut s, body, env) = controller_at_rest();
        g.phase = GaitPhase::new(Phase::Rolling, Some(Vector2::x()), 0.0);
        g.intent = Some(MoveIntent { heading: Vector2::x(), mode: GaitMode::PropelCompress });
        s.linear_velocity = Vector3::new(0.3, 0.0, 0.0);
        let cmd = g.step(&s, &body, &env, &[Command::Stop]);
        assert_eq!(g.phase().phase, Phase::Brake);
        assert_eq!(cmd, plan_brake(&s, g.config()));
        s.linear_velocity = Vector3::zeros();
        let cmd = g.step(&s, &body, &env, &[]);
        assert_eq!(g.phase().phase, Phase::Rest);
        assert_eq!(cmd, SpineCommandSet::retracted());
    }

    #[test]
    fn rolling_decays_to_rest() {
        let (mut g, mut s, body, env) = controller_at_rest();
        g.phase = GaitPhase::new(Phase::Rolling, Some(Vector2::x()), 0.0);
        s.linear_velocity = Vector3::new(0.05, 0.0, 0.0);
        s.time_s = 1.0;
        g.step(&s, &body, &env, &[]);
        assert_eq!(g.phase().phase, Phase::Rolling);
        s.linear_velocity = Vector3::new(0.005, 0.0, 0.0);
        let cmd = g.step(&s, &body, &env, &[]);
        assert_eq!(g.phase().phase, Phase::Rest);
        assert_eq!(cmd, SpineCommandSet::retracted());
        assert!(matches!(g.drain_events().as_slice(), [GaitEvent::CycleCompleted { .. }, GaitEvent::Entered { phase: Phase::Rest, .. }]));
    }

    #[test]
    fn invalid_commands_are_ignored() {
        let (mut g, s, body, env) = controller_at_rest();
        let before = *g.command();
        g.step(&s, &body, &env, &[Command::Spine { id: 14, target_mm: 10.0 }, Command::Jump]);
        assert_eq!(g.phase().phase, Phase::Rest);
        assert_eq!(*g.command(), before);
        let ignored = g.drain_events().iter().filter(|e| matches!(e, GaitEvent::Ignored { .. })).count();
        assert_eq!(ignored, 2);
    }

    #[test]
    fn turn_rotates_heading_each_cycle() {
        let cfg = GaitConfig { turn_per_cycle_rad: 0.5, ..GaitConfig::default() };
        let body = BodyParams::default();
        let mut g = GaitController::new(cfg);
        let mut s = RobotState::on_ground(&body);
        g.intent = Some(MoveIntent { heading: Vector2::x(), mode: GaitMode::NeighborPush });
        g.phase = GaitPhase::new(Phase::Rolling, Some(Vector2::x()), 0.0);
        s.time_s = 1.0;
        g.step(&s, &body, &Environment::default(), &[]);
        let h = g.intent.unwrap().heading;
        assert_abs_diff_eq!(h, Vector2::new(0.5f64.cos(), 0.5f64.sin()), epsilon = 1e-12);
    }

    fn any_state() -> impl Strategy<Value = RobotState> {
        (
            prop::array::uniform3(-1.0..1.0f64),
            -3.2..3.2f64,
            0.03..0.12f64,
            prop::array::uniform14(0.0..=64.0f64),
            prop::array::uniform2(-0.5..0.5f64),
        )
            .prop_map(|(axis, angle, z, ext, v)| {
                let axis = Vector3::from(axis);
                let q = if axis.norm() < 1e-3 {
                    UnitQuaternion::identity()
                } else {
                    UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle)
                };
                let mut s = RobotState::at_rest(Pose::new(Vector3::new(0.0, 0.0, z), q));
                for (i, e) in ext.iter().enumerate() {
                    s.set_extension(i, *e).unwrap();
                }
                s.linear_velocity = Vector3::new(v[0], v[1], 0.0);
                s
            })
    }

    fn in_range(c: &SpineCommandSet) -> bool {
        c.targets().iter().all(|t| (0.0..=STROKE_MM).contains(t))
    }

    proptest! {
        #[test]
        fn planners_emit_valid_targets(s in any_state(), a in -3.2..3.2f64) {
            let body = BodyParams::default();
            let env = Environment::default();
            let cfg = GaitConfig::default();
            let h = Vector2::new(a.cos(), a.sin());
            if let Ok(c) = plan_config1(&s, &body, &env, &h) { prop_assert!(in_range(&c)); }
            if let Ok(c) = plan_config2(&s, &h, &cfg) { prop_assert!(in_range(&c)); }
            prop_assert!(in_range(&plan_brake(&s, &cfg)));
            let supports = leveling_supports(&s.pose, &body);
            if let Ok(out) = level(&s, &body, &env, &supports, &SpineCommandSet::hold(&s), &cfg) {
                prop_assert!(in_range(out.command()));
            }
            let mut g = GaitController::default();
            for cmd in [Command::move_toward(h, GaitMode::PropelCompress).unwrap(), Command::Level, Command::Stop] {
                prop_assert!(in_range(&g.step(&s, &body, &env, &[cmd])));
            }
        }

        #[test]
        fn config1_invariant_to_heading_scale(a in -3.2..3.2f64, k in 1e-3..1e3f64) {
            let body = BodyParams::default();
            let s = stance_state();
            let h = Vector2::new(a.cos(), a.sin());
            let env = Environment::default();
            prop_assert_eq!(plan_config1(&s, &body, &env, &h).unwrap(), plan_config1(&s, &body, &env, &(h * k)).unwrap());
        }
    }
}
