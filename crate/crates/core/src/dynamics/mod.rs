//! Single-rigid-body dynamics with penalty contacts.
//!
//! The robot is one rigid body. Spines are massless rigid prismatic offsets:
//! extending one moves its tip but carries no momentum, though the tip's
//! extension rate counts toward the contact's relative velocity.
//!
//! Each step is semi-implicit Euler. Gravity, buoyancy, drag and the
//! gyroscopic term update the velocities first. Contacts are then resolved
//! together by a few projected Gauss-Seidel sweeps: each normal row is an
//! explicit spring `k·depth` plus an implicit critical damper, friction is
//! projected onto the Coulomb cone of that row's normal impulse, and the
//! shell contact carries a small rolling resistance. Positions are
//! integrated last from the new velocities.

mod imu;
mod support;
mod terrain;

pub use imu::{euler_zyx, EulerAngles, ImuModel};
pub use support::{convex_hull, stability_margin, support_polygon, StabilityMargin, SupportPolygon};
pub use terrain::{Heightfield, Terrain};

use nalgebra::{Matrix3, UnitQuaternion, Vector2, Vector3};

use crate::actuator::TelescopicActuator;
use crate::error::{Error, Result};
use crate::geometry::{spine_layout, Pose, ShellGeometry, SPINE_COUNT};

pub const GRAVITY: f64 = 9.81;
pub const DEFAULT_DT: f64 = 1e-3;
pub const MAX_DT: f64 = 5e-3;

/// Contacts within this distance of the surface are reported (with zero depth).
const CONTACT_SLOP_M: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BodyParams {
    pub mass_kg: f64,
    /// Body-frame inertia tensor about the center of mass.
    pub inertia: Matrix3<f64>,
    /// Center of mass relative to the shell center, body frame.
    pub com_offset: Vector3<f64>,
    pub shell: ShellGeometry,
}

impl BodyParams {
    /// Solid sphere of the given mass and shell.
    pub fn solid_sphere(mass_kg: f64, shell: ShellGeometry) -> Self {
        let r = shell.radius_m();
        let i = 0.4 * mass_kg * r * r;
        Self { mass_kg, inertia: Matrix3::from_diagonal_element(i), com_offset: Vector3::zeros(), shell }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass_kg > 0.0 && self.mass_kg.is_finite()) {
            return Err(Error::Configuration(format!("mass must be positive, got {}", self.mass_kg)));
        }
        if (self.inertia - self.inertia.transpose()).abs().max() > 1e-12 * self.inertia.abs().max() {
            return Err(Error::Configuration("inertia must be symmetric".into()));
        }
        if self.inertia.cholesky().is_none() {
            return Err(Error::Configuration("inertia must be positive definite".into()));
        }
        Ok(())
    }
}

impl Default for BodyParams {
    fn default() -> Self {
        Self::solid_sphere(0.5, ShellGeometry::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Medium {
    Air,
    Water { buoyancy_fraction: f64, linear_drag: f64, angular_drag: f64 },
}

impl Medium {
    pub fn water() -> Self {
        Medium::Water { buoyancy_fraction: 0.8, linear_drag: 2.0, angular_drag: 0.01 }
    }

    pub fn is_water(&self) -> bool {
        matches!(self, Medium::Water { .. })
    }
}

/// Penalty contact constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactModel {
    pub stiffness_n_m: f64,
    /// `None` selects critical damping `2·√(k·m)` for the body mass.
    pub damping_n_s_m: Option<f64>,
    /// Rolling-resistance coefficient of the shell: the resisting torque is
    /// at most `coefficient · radius · normal force`.
    pub rolling_resistance: f64,
}

impl Default for ContactModel {
    fn default() -> Self {
        Self { stiffness_n_m: 5000.0, damping_n_s_m: None, rolling_resistance: 0.01 }
    }
}

impl ContactModel {
    pub fn damping(&self, mass_kg: f64) -> f64 {
        self.damping_n_s_m.unwrap_or_else(|| 2.0 * (self.stiffness_n_m * mass_kg).sqrt())
    }
}

/// Named terrain presets and their friction coefficients.
pub const TERRAIN_PRESETS: &[(&str, f64)] =
    &[("ice", 0.05), ("snow", 0.25), ("sand", 0.6), ("rock", 0.8), ("lab-floor", 0.5), ("water", 0.5)];

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub terrain: Terrain,
    pub friction_mu: f64,
    pub medium: Medium,
    pub gravity: f64,
    pub contact: ContactModel,
    pub preset_name: String,
}

impl Environment {
    /// Flat ground with a named preset. `water` floods the scene; the rest are dry.
    pub fn preset(name: &str) -> Result<Self> {
        let &(_, mu) = TERRAIN_PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::Configuration(format!("unknown terrain preset `{name}`")))?;
        let medium = if name == "water" { Medium::water() } else { Medium::Air };
        Ok(Self {
            terrain: Terrain::default(),
            friction_mu: mu,
            medium,
            gravity: GRAVITY,
            contact: ContactModel::default(),
            preset_name: name.to_string(),
        })
    }

    pub fn flat(friction_mu: f64) -> Self {
        Self {
            terrain: Terrain::default(),
            friction_mu,
            medium: Medium::Air,
            gravity: GRAVITY,
            contact: ContactModel::default(),
            preset_name: "custom".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.friction_mu >= 0.0 && self.friction_mu.is_finite()) {
            return Err(Error::Configuration(format!("friction_mu must be ≥ 0, got {}", self.friction_mu)));
        }
        if let Medium::Water { buoyancy_fraction, linear_drag, angular_drag } = self.medium {
            if !(0.0..1.0).contains(&buoyancy_fraction) {
                return Err(Error::Configuration(format!(
                    "buoyancy_fraction must be in [0, 1) so the robot sinks, got {buoyancy_fraction}"
                )));
            }
            if linear_drag < 0.0 || angular_drag < 0.0 {
                return Err(Error::Configuration("drag coefficients must be ≥ 0".into()));
            }
        }
        if !(self.contact.stiffness_n_m > 0.0) {
            return Err(Error::Configuration("contact stiffness must be positive".into()));
        }
        self.terrain.validate()
    }
}

impl Default for Environment {
    fn default() -> Self {
        Self::preset("lab-floor").expect("built-in preset")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactSource {
    Spine(usize),
    Shell,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub penetration_m: f64,
    pub source: ContactSource,
}

pub type ContactSet = Vec<Contact>;

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub pose: Pose,
    /// Center-of-mass velocity, world frame.
    pub linear_velocity: Vector3<f64>,
    /// Body frame.
    pub angular_velocity: Vector3<f64>,
    pub actuators: [TelescopicActuator; SPINE_COUNT],
    pub time_s: f64,
    /// When set, an internal drive holds the shell at this world-frame
    /// angular velocity, as a conventional drive-sphere robot would.
    pub shell_spin: Option<Vector3<f64>>,
}

impl RobotState {
    pub fn at_rest(pose: Pose) -> Self {
        Self {
            pose,
            linear_velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
            actuators: std::array::from_fn(|_| TelescopicActuator::default()),
            time_s: 0.0,
            shell_spin: None,
        }
    }

    /// Resting on flat ground at `height` with all spines retracted.
    pub fn on_ground(body: &BodyParams) -> Self {
        Self::at_rest(Pose::at(Vector3::new(0.0, 0.0, body.shell.radius_m())))
    }

    pub fn extensions_mm(&self) -> [f64; SPINE_COUNT] {
        std::array::from_fn(|i| self.actuators[i].extension_mm())
    }

    pub fn set_extension(&mut self, spine: usize, mm: f64) -> Result<()> {
        self.actuators[spine] = TelescopicActuator::at(mm)?;
        Ok(())
    }

    pub fn set_targets(&mut self, targets: &[f64; SPINE_COUNT]) -> Result<()> {
        for (act, &t) in self.actuators.iter_mut().zip(targets) {
            act.set_target(t)?;
        }
        Ok(())
    }

    pub fn com(&self, body: &BodyParams) -> Vector3<f64> {
        self.pose.position + self.pose.orientation * body.com_offset
    }

    pub fn com_xy(&self, body: &BodyParams) -> Vector2<f64> {
        let c = self.com(body);
        Vector2::new(c.x, c.y)
    }

    pub fn world_angular_velocity(&self) -> Vector3<f64> {
        self.pose.orientation * self.angular_velocity
    }

    pub fn horizontal_speed(&self) -> f64 {
        self.linear_velocity.xy().norm()
    }

    pub fn tip(&self, body: &BodyParams, spine: usize) -> Vector3<f64> {
        let reach = body.shell.radius_m() + self.actuators[spine].extension_mm() * 1e-3;
        self.pose.position + spine_layout().world_direction(&self.pose, spine) * reach
    }
}

/// Lowest shell point against the local terrain plane, by fixed-point
/// iteration on the foot point.
fn shell_contact(center: &Vector3<f64>, radius: f64, terrain: &Terrain) -> Contact {
    let mut normal = terrain.normal(center.x, center.y);
    let mut foot = center - normal * radius;
    for _ in 0..4 {
        normal = terrain.normal(foot.x, foot.y);
        foot = center - normal * radius;
    }
    let surface = Vector3::new(foot.x, foot.y, terrain.height(foot.x, foot.y));
    let distance = (center - surface).dot(&normal);
    Contact { point: foot, normal, penetration_m: radius - distance, source: ContactSource::Shell }
}

/// Every extended spine tip and the lowest shell point touching the terrain.
/// Retracted tips coincide with the shell and are covered by the shell contact.
pub fn contact_solve(state: &RobotState, body: &BodyParams, env: &Environment) -> Result<ContactSet> {
    env.terrain.validate()?;
    let mut contacts = ContactSet::new();
    for spine in 0..SPINE_COUNT {
        if state.actuators[spine].extension_mm() <= 0.0 {
            continue;
        }
        let tip = state.tip(body, spine);
        let normal = env.terrain.normal(tip.x, tip.y);
        let depth = (env.terrain.height(tip.x, tip.y) - tip.z) * normal.z;
        if depth >= -CONTACT_SLOP_M {
            contacts.push(Contact {
                point: tip,
                normal,
                penetration_m: depth.max(0.0),
                source: ContactSource::Spine(spine),
            });
        }
    }
    let shell = shell_contact(&state.pose.position, body.shell.radius_m(), &env.terrain);
    if shell.penetration_m >= -CONTACT_SLOP_M {
        contacts.push(Contact { penetration_m: shell.penetration_m.max(0.0), ..shell });
    }
    Ok(contacts)
}

const SOLVER_ITERATIONS: usize = 10;

struct ContactRow {
    arm: Vector3<f64>,
    normal: Vector3<f64>,
    /// Velocity of a spine tip relative to the body, from the actuator stroke.
    extra: Vector3<f64>,
    spring: f64,
    normal_mass: f64,
    rolls: bool,
    normal_impulse: f64,
    friction_impulse: Vector3<f64>,
    rolling_impulse: Vector3<f64>,
}

fn tangential(v: &Vector3<f64>, n: &Vector3<f64>) -> Vector3<f64> {
    v - n * v.dot(n)
}

/// Kinetic + gravitational (net of buoyancy) + contact-spring energy, joules.
pub fn mechanical_energy(state: &RobotState, body: &BodyParams, env: &Environment) -> Result<f64> {
    let w = state.angular_velocity;
    let kinetic = 0.5 * body.mass_kg * state.linear_velocity.norm_squared() + 0.5 * w.dot(&(body.inertia * w));
    let g_eff = match env.medium {
        Medium::Air => env.gravity,
        Medium::Water { buoyancy_fraction, .. } => env.gravity * (1.0 - buoyancy_fraction),
    };
    let potential = body.mass_kg * g_eff * state.com(body).z;
    let k = env.contact.stiffness_n_m;
    let spring: f64 = contact_solve(state, body, env)?.iter().map(|c| 0.5 * k * c.penetration_m.powi(2)).sum();
    Ok(kinetic + potential + spring)
}

/// Advance one fixed step. Same inputs always produce bit-identical outputs.
pub fn step(state: &RobotState, body: &BodyParams, env: &Environment, dt: f64) -> Result<RobotState> {
    let mut next = state.clone();
    advance(&mut next, body, env, dt)?;
    Ok(next)
}

/// In-place form of [`step`].
pub fn advance(state: &mut RobotState, body: &BodyParams, env: &Environment, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::Domain(format!("dt must be in (0, {MAX_DT}], got {dt}")));
    }
    check_finite(state)?;
    let layout = spine_layout();
    let contacts = contact_solve(state, body, env)?;

    let rot = state.pose.orientation;
    let r_mat = rot.to_rotation_matrix();
    let inertia_w = r_mat.matrix() * body.inertia * r_mat.matrix().transpose();
    let inv_inertia_w = inertia_w.try_inverse().ok_or_else(|| Error::Configuration("singular inertia".into()))?;
    let inv_mass = 1.0 / body.mass_kg;
    let com = state.com(body);

    let mut v = state.linear_velocity;
    let mut w = rot * state.angular_velocity;

    // Body forces.
    let mut force = Vector3::new(0.0, 0.0, -body.mass_kg * env.gravity);
    let mut torque = -w.cross(&(inertia_w * w));
    if let Medium::Water { buoyancy_fraction, linear_drag, angular_drag } = env.medium {
        force.z += buoyancy_fraction * body.mass_kg * env.gravity;
        force -= v * linear_drag;
        torque -= w * angular_drag;
    }
    v += force * inv_mass * dt;
    w += inv_inertia_w * torque * dt;

    // Actuators move this step; their tip velocity enters the contact response.
    let mut tip_rates = [0.0; SPINE_COUNT];
    for (spine, act) in state.actuators.iter_mut().enumerate() {
        let before = act.extension_mm();
        act.update(dt)?;
        tip_rates[spine] = (act.extension_mm() - before) * 1e-3 / dt;
    }

    let k = env.contact.stiffness_n_m;
    let c = env.contact.damping(body.mass_kg);
    let mu = env.friction_mu;
    let rolling_limit = env.contact.rolling_resistance * body.shell.radius_m();
    let effective_mass = |arm: &Vector3<f64>, dir: &Vector3<f64>| {
        let rn = arm.cross(dir);
        1.0 / (inv_mass + rn.dot(&(inv_inertia_w * rn)))
    };

    let mut rows: Vec<ContactRow> = contacts
        .iter()
        .map(|contact| {
            let arm = contact.point - com;
            let extra = match contact.source {
                ContactSource::Spine(id) => layout.world_direction(&state.pose, id) * tip_rates[id],
                ContactSource::Shell => Vector3::zeros(),
            };
            ContactRow {
                arm,
                normal: contact.normal,
                extra,
                spring: k * contact.penetration_m * dt,
                normal_mass: effective_mass(&arm, &contact.normal),
                rolls: contact.source == ContactSource::Shell,
                normal_impulse: 0.0,
                friction_impulse: Vector3::zeros(),
                rolling_impulse: Vector3::zeros(),
            }
        })
        .collect();

    // Projected Gauss-Seidel. The normal row solves
    //   j = k·pen·dt − c·dt·vn(after)   with j ≥ 0,
    // i.e. an explicit spring with an implicit damper. Friction is projected
    // onto the Coulomb cone |jt| ≤ μ·j, rolling resistance onto |τ·dt| ≤ cr·r·j.
    let damping_dt = c * dt;
    for _ in 0..SOLVER_ITERATIONS {
        for row in &mut rows {
            let vn = (v + w.cross(&row.arm) + row.extra).dot(&row.normal);
            let residual = vn + (row.normal_impulse - row.spring) / damping_dt;
            let delta = -residual / (1.0 / row.normal_mass + 1.0 / damping_dt);
            let total = (row.normal_impulse + delta).max(0.0);
            let applied = row.normal * (total - row.normal_impulse);
            row.normal_impulse = total;
            v += applied * inv_mass;
            w += inv_inertia_w * row.arm.cross(&applied);

            let limit = mu * row.normal_impulse;
            let vt = tangential(&(v + w.cross(&row.arm) + row.extra), &row.normal);
            let slip = vt.norm();
            let mut total = row.friction_impulse;
            if slip >= 1e-15 {
                let t = vt / slip;
                total -= t * (effective_mass(&row.arm, &t) * slip);
            }
            let mag = total.norm();
            if mag > limit {
                total *= limit / mag;
            }
            let applied = total - row.friction_impulse;
            row.friction_impulse = total;
            v += applied * inv_mass;
            w += inv_inertia_w * row.arm.cross(&applied);

            if row.rolls {
                let limit = rolling_limit * row.normal_impulse;
                let spin = tangential(&w, &row.normal);
                let rate = spin.norm();
                let mut total = row.rolling_impulse;
                if rate >= 1e-15 {
                    let axis = spin / rate;
                    total -= axis * (rate / axis.dot(&(inv_inertia_w * axis)));
                }
                let mag = total.norm();
                if mag > limit {
                    total *= limit / mag;
                }
                w += inv_inertia_w * (total - row.rolling_impulse);
                row.rolling_impulse = total;
            }
        }
    }

    if let Some(spin) = state.shell_spin {
        w = spin;
    }

    // Positions from the new velocities; the geometric center rides the COM.
    let center_offset = state.pose.position - com;
    let new_com = com + v * dt;
    let delta = UnitQuaternion::from_scaled_axis(w * dt);
    let mut orientation = delta * rot;
    orientation.renormalize();
    let position = new_com + delta * center_offset;

    state.pose = Pose::new(position, orientation);
    state.linear_velocity = v;
    state.angular_velocity = orientation.inverse() * w;
    state.time_s += dt;

    check_finite(state)
}

fn check_finite(state: &RobotState) -> Result<()> {
    let fail = |quantity: &str| Err(Error::Diverged { time_s: state.time_s, quantity: quantity.to_string() });
    if !state.pose.position.iter().all(|x| x.is_finite()) {
        return fail("position");
    }
    if !state.pose.orientation.coords.iter().all(|x| x.is_finite()) {
        return fail("orientation");
    }
    if !state.linear_velocity.iter().all(|x| x.is_finite()) {
        return fail("linear_velocity");
    }
    if !state.angular_velocity.iter().all(|x| x.is_finite()) {
        return fail("angular_velocity");
    }
    Ok(())
}
