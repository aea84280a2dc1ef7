//! Replayable scenario files.

use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::command::{CommandSpec, Directive};
use crate::dynamics::{
    BodyParams, ContactModel, Environment, Heightfield, Medium, RobotState, Terrain, DEFAULT_DT, GRAVITY, MAX_DT,
};
use crate::error::{Error, Result};
use crate::gait::GaitConfig;
use crate::geometry::{spine_layout, Pose, ShellGeometry, SPINE_COUNT};

pub const SCHEMA_VERSION: u32 = 1;

/// A scenario file as written, with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default = "schema_version")]
    pub schema: u32,
    pub name: String,
    pub duration_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_log_hz")]
    pub log_hz: f64,
    /// Standard deviation of the logged attitude noise; zero logs the true attitude.
    #[serde(default)]
    pub imu_noise_rad: f64,
    #[serde(default)]
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub body: BodySpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub gait: GaitConfig,
    #[serde(default)]
    pub script: Vec<ScriptEntry>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_log_hz() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub preset: String,
    /// Overrides the preset's friction coefficient.
    pub friction_mu: Option<f64>,
    pub terrain: TerrainSpec,
    /// Overrides the preset's medium.
    pub medium: Option<MediumSpec>,
    pub gravity_m_s2: f64,
    pub contact_stiffness_n_m: Option<f64>,
    pub rolling_resistance: Option<f64>,
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        Self {
            preset: "lab-floor".into(),
            friction_mu: None,
            terrain: TerrainSpec::default(),
            medium: None,
            gravity_m_s2: GRAVITY,
            contact_stiffness_n_m: None,
            rolling_resistance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TerrainSpec {
    Flat {
        #[serde(default)]
        height_m: f64,
    },
    /// `heights[row][col]` sampled at `origin + (col, row) · spacing_m`.
    Heightfield { origin: [f64; 2], spacing_m: f64, heights: Vec<Vec<f64>> },
    /// A raised axis-aligned rectangle on a flat floor, sampled on a square grid.
    Plateau {
        height_m: f64,
        min: [f64; 2],
        max: [f64; 2],
        #[serde(default = "default_plateau_spacing")]
        spacing_m: f64,
        #[serde(default = "default_plateau_extent")]
        half_extent_m: f64,
    },
}

fn default_plateau_spacing() -> f64 {
    0.005
}

fn default_plateau_extent() -> f64 {
    0.5
}

impl Default for TerrainSpec {
    fn default() -> Self {
        TerrainSpec::Flat { height_m: 0.0 }
    }
}

impl TerrainSpec {
    fn build(&self) -> Result<Terrain> {
        Ok(match self {
            TerrainSpec::Flat { height_m } => Terrain::Flat { height: *height_m },
            TerrainSpec::Heightfield { origin, spacing_m, heights } => {
                Terrain::Heightfield(Heightfield::new(Vector2::from(*origin), *spacing_m, heights.clone())?)
            }
            TerrainSpec::Plateau { height_m, min, max, spacing_m, half_extent_m } => {
                if !(spacing_m > &0.0 && half_extent_m > spacing_m) {
                    return Err(Error::Configuration("plateau needs 0 < spacing_m < half_extent_m".into()));
                }
                let n = (2.0 * half_extent_m / spacing_m).round() as usize + 1;
                let inside = |x: f64, y: f64| x >= min[0] && x <= max[0] && y >= min[1] && y <= max[1];
                let origin = Vector2::new(-half_extent_m, -half_extent_m);
                Terrain::Heightfield(Heightfield::from_fn(origin, *spacing_m, n, n, |x, y| {
                    if inside(x, y) { *height_m } else { 0.0 }
                })?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MediumSpec {
    Air,
    Water {
        #[serde(default = "default_buoyancy")]
        buoyancy_fraction: f64,
        #[serde(default = "default_linear_drag")]
        linear_drag: f64,
        #[serde(default = "default_angular_drag")]
        angular_drag: f64,
    },
}

fn default_buoyancy() -> f64 {
    0.8
}

fn default_linear_drag() -> f64 {
    2.0
}

fn default_angular_drag() -> f64 {
    0.01
}

impl MediumSpec {
    fn build(self) -> Medium {
        match self {
            MediumSpec::Air => Medium::Air,
            MediumSpec::Water { buoyancy_fraction, linear_drag, angular_drag } => {
                Medium::Water { buoyancy_fraction, linear_drag, angular_drag }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BodySpec {
    pub mass_kg: f64,
    pub shell_diameter_mm: f64,
    /// Center of mass relative to the shell center, body frame.
    pub com_offset_m: [f64; 3],
}

impl Default for BodySpec {
    fn default() -> Self {
        Self { mass_kg: 0.5, shell_diameter_mm: crate::geometry::SHELL_DIAMETER_MM, com_offset_m: [0.0; 3] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSpec {
    /// Shell center. When absent the robot is placed resting on the terrain
    /// below the origin.
    pub position: Option<[f64; 3]>,
    /// Unit quaternion `[w, x, y, z]`, normalized on load.
    pub orientation_wxyz: [f64; 4],
    pub extensions_mm: [f64; SPINE_COUNT],
    pub velocity_m_s: [f64; 3],
    /// World frame.
    pub angular_velocity_rad_s: [f64; 3],
    /// Holds the shell at this world-frame angular velocity throughout.
    pub shell_spin_rad_s: Option<[f64; 3]>,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self {
            position: None,
            orientation_wxyz: [1.0, 0.0, 0.0, 0.0],
            extensions_mm: [0.0; SPINE_COUNT],
            velocity_m_s: [0.0; 3],
            angular_velocity_rad_s: [0.0; 3],
            shell_spin_rad_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub t_s: f64,
    pub command: CommandSpec,
}

/// A validated scenario, ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub body: BodyParams,
    pub environment: Environment,
    pub initial: RobotState,
    pub script: Vec<(f64, Directive)>,
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{field}: {reason}"))
}

impl Scenario {
    pub fn from_spec(spec: ScenarioSpec) -> Result<Self> {
        if spec.schema != SCHEMA_VERSION {
            return Err(invalid("schema", format!("unsupported version {}, expected {SCHEMA_VERSION}", spec.schema)));
        }
        if spec.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        if !(spec.duration_s > 0.0 && spec.duration_s.is_finite()) {
            return Err(invalid("duration_s", format!("must be > 0, got {}", spec.duration_s)));
        }
        if !(spec.dt_s > 0.0 && spec.dt_s <= MAX_DT) {
            return Err(invalid("dt_s", format!("must be in (0, {MAX_DT}], got {}", spec.dt_s)));
        }
        if !(spec.log_hz > 0.0 && spec.log_hz.is_finite()) {
            return Err(invalid("log_hz", format!("must be > 0, got {}", spec.log_hz)));
        }
        if !(spec.imu_noise_rad >= 0.0 && spec.imu_noise_rad.is_finite()) {
            return Err(invalid("imu_noise_rad", format!("must be ≥ 0, got {}", spec.imu_noise_rad)));
        }
        spec.gait.validate().map_err(|e| invalid("gait", e))?;

        let body = build_body(&spec.body)?;
        let environment = build_environment(&spec.environment)?;
        let initial = build_initial(&spec.initial, &body, &environment)?;

        let mut script = Vec::with_capacity(spec.script.len());
        let mut last = 0.0;
        for (i, entry) in spec.script.iter().enumerate() {
            let field = format!("script[{i}]");
            if !(entry.t_s >= 0.0 && entry.t_s.is_finite()) {
                return Err(invalid(&format!("{field}.t_s"), format!("must be ≥ 0, got {}", entry.t_s)));
            }
            if entry.t_s < last {
                return Err(invalid(
                    &format!("{field}.t_s"),
                    format!("times must be non-decreasing, {} follows {last}", entry.t_s),
                ));
            }
            last = entry.t_s;
            let directive = entry.command.resolve().map_err(|e| match e {
                Error::Decode { field: f, reason } => invalid(&format!("{field}.command.{f}"), reason),
                other => invalid(&field, other),
            })?;
            if let Directive::Reset(_) = directive {
                return Err(invalid(&format!("{field}.command.cmd"), "`reset` is only available over teleop"));
            }
            script.push((entry.t_s, directive));
        }
        Ok(Self { spec, body, environment, initial, script })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: ScenarioSpec = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Parse(format!("{path}: {inner}"))
        })?;
        Self::from_spec(spec)
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    /// The scenario with every default made explicit, as pretty JSON.
    pub fn echo(&self) -> String {
        serde_json::to_string_pretty(&self.spec).expect("scenario spec serializes")
    }

    pub fn with_dt(mut self, dt_s: f64) -> Result<Self> {
        self.spec.dt_s = dt_s;
        Self::from_spec(self.spec)
    }

    pub fn with_duration(mut self, duration_s: f64) -> Result<Self> {
        self.spec.duration_s = duration_s;
        Self::from_spec(self.spec)
    }
}

/// Read and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), reason: e.to_string() })?;
    Scenario::from_json(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn build_body(spec: &BodySpec) -> Result<BodyParams> {
    let shell = ShellGeometry::new(spec.shell_diameter_mm).map_err(|e| invalid("body.shell_diameter_mm", e))?;
    let mut body = BodyParams::solid_sphere(spec.mass_kg, shell);
    body.com_offset = Vector3::from(spec.com_offset_m);
    if !body.com_offset.iter().all(|c| c.is_finite()) || body.com_offset.norm() >= shell.radius_m() {
        return Err(invalid("body.com_offset_m", "must lie inside the shell"));
    }
    body.validate().map_err(|e| invalid("body.mass_kg", e))?;
    Ok(body)
}

fn build_environment(spec: &EnvironmentSpec) -> Result<Environment> {
    let mut env = Environment::preset(&spec.preset).map_err(|e| invalid("environment.preset", e))?;
    if let Some(mu) = spec.friction_mu {
        env.friction_mu = mu;
    }
    if let Some(m) = spec.medium {
        env.medium = m.build();
    }
    env.terrain = spec.terrain.build().map_err(|e| invalid("environment.terrain", e))?;
    env.gravity = spec.gravity_m_s2;
    if !(env.gravity >= 0.0 && env.gravity.is_finite()) {
        return Err(invalid("environment.gravity_m_s2", format!("must be ≥ 0, got {}", env.gravity)));
    }
    let mut contact = ContactModel::default();
    if let Some(k) = spec.contact_stiffness_n_m {
        contact.stiffness_n_m = k;
    }
    if let Some(c) = spec.rolling_resistance {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(invalid("environment.rolling_resistance", format!("must be ≥ 0, got {c}")));
        }
        contact.rolling_resistance = c;
    }
    env.contact = contact;
    env.validate().map_err(|e| invalid("environment", e))?;
    Ok(env)
}

fn build_initial(spec: &InitialSpec, body: &BodyParams, env: &Environment) -> Result<RobotState> {
    let q = Quaternion::new(spec.orientation_wxyz[0], spec.orientation_wxyz[1], spec.orientation_wxyz[2], spec.orientation_wxyz[3]);
    if !(q.norm() > 1e-9 && q.norm().is_finite()) {
        return Err(invalid("initial.orientation_wxyz", "must be a non-zero quaternion"));
    }
    let orientation = UnitQuaternion::from_quaternion(q);
    let mut state = RobotState::at_rest(Pose::new(Vector3::zeros(), orientation));
    for (i, &e) in spec.extensions_mm.iter().enumerate() {
        state.set_extension(i, e).map_err(|err| invalid(&format!("initial.extensions_mm[{i}]"), err))?;
    }
    state.pose.position = match spec.position {
        Some(p) => Vector3::from(p),
        None => Vector3::new(0.0, 0.0, resting_height(&state, body, env)),
    };
    if !state.pose.position.iter().all(|c| c.is_finite()) {
        return Err(invalid("initial.position", "must be finite"));
    }
    state.linear_velocity = Vector3::from(spec.velocity_m_s);
    state.angular_velocity = orientation.inverse() * Vector3::from(spec.angular_velocity_rad_s);
    state.shell_spin = spec.shell_spin_rad_s.map(Vector3::from);
    Ok(state)
}

/// Center height at which the lowest of the shell and the spine tips just
/// touches the terrain below the origin.
fn resting_height(state: &RobotState, body: &BodyParams, env: &Environment) -> f64 {
    let r = body.shell.radius_m();
    let layout = spine_layout();
    let ground = env.terrain.height(0.0, 0.0);
    let mut lift = r;
    for id in 0..SPINE_COUNT {
        let d = layout.world_direction(&state.pose, id);
        let reach = r + state.actuators[id].extension_mm() * 1e-3;
        let tip_ground = env.terrain.height(d.x * reach, d.y * reach);
        lift = lift.max(tip_ground - ground - d.z * reach);
    }
    ground + lift
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::command::Command;
    use approx::assert_abs_diff_eq;

    #[test]
    fn minimal_file_takes_defaults() {
        let s = Scenario::from_json(r#"{"name":"m","duration_s":5}"#).unwrap();
        assert_eq!(s.spec.dt_s, 0.001);
        assert_eq!(s.spec.log_hz, 100.0);
        assert_eq!(s.body.mass_kg, 0.5);
        assert_eq!(s.environment.preset_name, "lab-floor");
        assert_eq!(s.environment.friction_mu, 0.5);
        assert_eq!(s.environment.terrain, Terrain::Flat { height: 0.0 });
        assert_abs_diff_eq!(s.initial.pose.position, Vector3::new(0.0, 0.0, 0.065), epsilon = 1e-15);
        assert!(s.script.is_empty());
    }

    #[test]
    fn echo_reloads_to_the_same_scenario() {
        let s = Scenario::from_json(r#"{"name":"m","duration_s":5,"environment":{"preset":"snow"}}"#).unwrap();
        let again = Scenario::from_json(&s.echo()).unwrap();
        assert_eq!(again, s);
        assert!(s.echo().contains("\"rest_settle_s\""));
    }

    #[test]
    fn snow_preset_friction() {
        let s = Scenario::from_json(r#"{"name":"s","duration_s":1,"environment":{"preset":"snow"}}"#).unwrap();
        assert_eq!(s.environment.friction_mu, 0.25);
    }

    #[test]
    fn script_must_be_ordered() {
        let text = r#"{"name":"s","duration_s":3,"script":[
            {"t_s":2,"command":{"cmd":"stop"}},
            {"t_s":1,"command":{"cmd":"level"}}]}"#;
        let err = Scenario::from_json(text).unwrap_err().to_string();
        assert!(err.contains("script[1].t_s"), "{err}");
    }

    #[test]
    fn errors_carry_context() {
        let cases = [
            (r#"{"name":"s","duration_s":1,"bogus":1}"#, "bogus"),
            (r#"{"name":"s","duration_s":1,"environment":{"frction_mu":0.2}}"#, "frction_mu"),
            (r#"{"name":"s","duration_s":1,"script":[{"t_s":0,"command":{"cmd":"fly"}}]}"#, "script[0]"),
            (r#"{"name":"s","duration_s":1,"script":[{"t_s":0,"command":{"cmd":"spine","id":20,"target_mm":1}}]}"#, "script[0].command.id"),
            (r#"{"name":"s","duration_s":0}"#, "duration_s"),
            (r#"{"name":"s","duration_s":1,"dt_s":0.01}"#, "dt_s"),
            (r#"{"name":"s","duration_s":1,"environment":{"preset":"lava"}}"#, "environment.preset"),
            (r#"{"name":"s"}"#, "duration_s"),
            (r#"{"name":"s","duration_s":1,"script":[{"t_s":0,"command":{"cmd":"reset","scenario":"x"}}]}"#, "reset"),
        ];
        for (text, needle) in cases {
            let err = Scenario::from_json(text).unwrap_err();
            assert!(matches!(err, Error::Parse(_)), "{text}: {err:?}");
            assert!(err.to_string().contains(needle), "{text}: {err}");
        }
    }

    #[test]
    fn parse_errors_report_line() {
        let err = Scenario::from_json("{\n\"name\": \"s\",\n\"duration_s\": \"long\"\n}").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn script_commands_resolve() {
        let text = r#"{"name":"s","duration_s":5,"script":[
            {"t_s":0,"command":{"cmd":"level"}},
            {"t_s":2,"command":{"cmd":"move","dir":[2,0],"config":1}},
            {"t_s":3,"command":{"cmd":"set_terrain","preset":"ice"}}]}"#;
        let s = Scenario::from_json(text).unwrap();
        assert_eq!(s.script[0], (0.0, Directive::Gait(Command::Level)));
        let Directive::Gait(Command::Move { heading, .. }) = &s.script[1].1 else { panic!() };
        assert_eq!(*heading, Vector2::x());
        assert_eq!(s.script[2].1, Directive::SetTerrain("ice".into()));
    }

    #[test]
    fn extended_spines_rest_on_their_tips() {
        let mut ext = [0.0; SPINE_COUNT];
        for id in [6, 8, 10, 12] {
            ext[id] = 64.0;
        }
        let text = format!(r#"{{"name":"s","duration_s":1,"initial":{{"extensions_mm":{}}}}}"#, serde_json::to_string(&ext).unwrap());
        let s = Scenario::from_json(&text).unwrap();
        assert_abs_diff_eq!(s.initial.pose.position.z, 0.129 / 3f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn plateau_builds_a_step() {
        let text = r#"{"name":"s","duration_s":1,"environment":{"terrain":
            {"type":"plateau","height_m":0.01,"min":[0.03,0.03],"max":[0.2,0.2]}}}"#;
        let s = Scenario::from_json(text).unwrap();
        assert_abs_diff_eq!(s.environment.terrain.height(0.07, 0.07), 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(s.environment.terrain.height(-0.07, 0.07), 0.0, epsilon = 1e-12);
    }
}
