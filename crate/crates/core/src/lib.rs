//! Simulator and gait planner for a spherical robot with 14 foldable
//! telescopic spines.
//!
//! Modules, bottom up:
//!
//! - [`geometry`]: shell, spine directions and adjacency, tip positions.
//! - [`actuator`]: articulated-rack lock/unlock chain and rate-limited extension.
//! - [`dynamics`]: rigid-body stepper, penalty contacts, support polygon, IMU.
//! - [`gait`]: locomotion planners and the gait state machine.
//! - [`sim`]: fixed-rate physics/control loop shared by batch runs and the server.
//! - [`harness`]: scenario files, batch runs, CSV trajectory logs.
//! - [`teleop`]: JSON wire protocol and the live websocket server.

pub mod actuator;
pub mod command;
pub mod dynamics;
pub mod error;
pub mod gait;
pub mod geometry;
pub mod harness;
pub mod sim;
pub mod teleop;

pub use error::{Error, Result};
