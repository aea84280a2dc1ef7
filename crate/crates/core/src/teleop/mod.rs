//! Live teleoperation: a real-time simulation loop shared by websocket
//! clients that send commands and receive state frames.

mod protocol;
mod server;

pub use protocol::{
    decode_command, decode_state, encode_error, encode_state, EulerMsg, PoseMsg, SpineMsg, StateEncoder, StateMessage,
    MAX_STATE_BYTES,
};
pub use server::{serve, start, ServerConfig, ServerHandle};
