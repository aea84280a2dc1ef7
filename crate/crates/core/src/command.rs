//! High-level command vocabulary shared by scenario scripts, the gait
//! controller, and the teleop wire protocol.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SPINE_COUNT;

/// Which locomotion procedure a move uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaitMode {
    /// Four-spine stance; extend the ground spine, compress one support spine.
    PropelCompress,
    /// From fully retracted; extend two neighboring spines behind the heading.
    NeighborPush,
}

impl GaitMode {
    pub fn from_config(config: u8) -> Result<Self> {
        match config {
            1 => Ok(GaitMode::PropelCompress),
            2 => Ok(GaitMode::NeighborPush),
            other => Err(Error::Domain(format!("gait config must be 1 or 2, got {other}"))),
        }
    }

    pub fn config(self) -> u8 {
        match self {
            GaitMode::PropelCompress => 1,
            GaitMode::NeighborPush => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    /// Keep moving along a unit world-xy heading until stopped.
    Move { heading: Vector2<f64>, mode: GaitMode },
    Stop,
    Level,
    Jump,
    RetractAll,
    Spine { id: usize, target_mm: f64 },
}

impl Command {
    /// A move with the heading normalized.
    pub fn move_toward(dir: Vector2<f64>, mode: GaitMode) -> Result<Self> {
        let norm = dir.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Domain("move direction must be a non-zero finite vector".into()));
        }
        Ok(Command::Move { heading: dir / norm, mode })
    }

    pub fn spine(id: usize, target_mm: f64) -> Result<Self> {
        if id >= SPINE_COUNT {
            return Err(Error::Domain(format!("spine id {id} out of range")));
        }
        if !(0.0..=crate::actuator::STROKE_MM).contains(&target_mm) {
            return Err(Error::Domain(format!("spine target {target_mm} mm out of range")));
        }
        Ok(Command::Spine { id, target_mm })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Move { .. } => "move",
            Command::Stop => "stop",
            Command::Level => "level",
            Command::Jump => "jump",
            Command::RetractAll => "retract_all",
            Command::Spine { .. } => "spine",
        }
    }
}

/// The JSON form of a command, tagged by `cmd`. Scenario scripts and the
/// teleop wire both use it; `reset` and `set_terrain` act on the session
/// rather than the gait.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case", deny_unknown_fields)]
pub enum CommandSpec {
    Move { dir: [f64; 2], config: u8 },
    Stop {},
    Level {},
    Jump {},
    RetractAll {},
    Spine { id: usize, target_mm: f64 },
    Reset { scenario: String },
    SetTerrain { preset: String },
}

/// A validated [`CommandSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum Directive {
    Gait(Command),
    Reset(String),
    SetTerrain(String),
}

impl CommandSpec {
    /// Range-check the fields. Errors name the offending field.
    pub fn resolve(&self) -> Result<Directive> {
        let bad = |field: &str, reason: String| Error::Decode { field: field.into(), reason };
        Ok(match self {
            CommandSpec::Move { dir, config } => {
                let mode = GaitMode::from_config(*config).map_err(|e| bad("config", e.to_string()))?;
                let cmd = Command::move_toward(Vector2::new(dir[0], dir[1]), mode).map_err(|e| bad("dir", e.to_string()))?;
                Directive::Gait(cmd)
            }
            CommandSpec::Stop {} => Directive::Gait(Command::Stop),
            CommandSpec::Level {} => Directive::Gait(Command::Level),
            CommandSpec::Jump {} => Directive::Gait(Command::Jump),
            CommandSpec::RetractAll {} => Directive::Gait(Command::RetractAll),
            CommandSpec::Spine { id, target_mm } => {
                if *id >= SPINE_COUNT {
                    return Err(bad("id", format!("spine id {id} not in 0..{SPINE_COUNT}")));
                }
                let cmd = Command::spine(*id, *target_mm).map_err(|e| bad("target_mm", e.to_string()))?;
                Directive::Gait(cmd)
            }
            CommandSpec::Reset { scenario } => Directive::Reset(scenario.clone()),
            CommandSpec::SetTerrain { preset } => {
                crate::dynamics::Environment::preset(preset).map_err(|e| bad("preset", e.to_string()))?;
                Directive::SetTerrain(preset.clone())
            }
        })
    }
}
