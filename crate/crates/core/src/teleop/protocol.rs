//! The JSON wire protocol: commands in, state snapshots out.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::command::{CommandSpec, Directive};
use crate::error::{Error, Result};
use crate::gait::Phase;
use crate::geometry::SPINE_COUNT;
use crate::harness::round9;
use crate::sim::Snapshot;

/// Upper bound on an encoded state message.
pub const MAX_STATE_BYTES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseMsg {
    pub position: [f64; 3],
    /// `[w, x, y, z]`.
    pub quaternion: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EulerMsg {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpineMsg {
    pub extension_mm: f64,
    pub target_mm: f64,
    pub contact: bool,
}

/// One telemetry frame. Field order here is the serialized order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateMessage {
    #[serde(rename = "type")]
    pub kind: String,
    pub t_s: f64,
    pub pose: PoseMsg,
    pub euler: EulerMsg,
    pub spines: Vec<SpineMsg>,
    pub shell_contact: bool,
    pub velocity: [f64; 3],
    pub phase: String,
    pub stability_margin_m: f64,
    pub preset: String,
    /// Set when this frame repeats the last good state because the live one
    /// was not finite.
    pub stale: bool,
}

impl StateMessage {
    /// Numbers are rounded to 9 significant digits.
    pub fn from_snapshot(s: &Snapshot) -> Self {
        let q = s.orientation.quaternion();
        Self {
            kind: "state".into(),
            t_s: round9(s.time_s),
            pose: PoseMsg {
                position: s.position.map(round9).into(),
                quaternion: [q.w, q.i, q.j, q.k].map(round9),
            },
            euler: EulerMsg { roll: round9(s.euler.roll), pitch: round9(s.euler.pitch), yaw: round9(s.euler.yaw) },
            spines: (0..SPINE_COUNT)
                .map(|i| SpineMsg {
                    extension_mm: round9(s.extensions_mm[i]),
                    target_mm: round9(s.targets_mm[i]),
                    contact: s.spine_contact[i],
                })
                .collect(),
            shell_contact: s.shell_contact,
            velocity: s.velocity.map(round9).into(),
            phase: s.phase.as_str().into(),
            stability_margin_m: round9(s.stability_margin_m),
            preset: s.preset.clone(),
            stale: false,
        }
    }

    pub fn is_finite(&self) -> bool {
        let mut nums = vec![self.t_s, self.euler.roll, self.euler.pitch, self.euler.yaw, self.stability_margin_m];
        nums.extend(self.pose.position);
        nums.extend(self.pose.quaternion);
        nums.extend(self.velocity);
        nums.extend(self.spines.iter().flat_map(|s| [s.extension_mm, s.target_mm]));
        nums.iter().all(|x| x.is_finite())
    }

    pub fn phase(&self) -> Option<Phase> {
        Phase::parse(&self.phase)
    }

    fn to_json(&self) -> String {
        serde_json::to_string(self).expect("finite state serializes")
    }
}

/// Encodes snapshots, substituting the last good frame (marked stale) when
/// a snapshot holds non-finite values.
#[derive(Debug, Default, Clone)]
pub struct StateEncoder {
    last_good: Option<StateMessage>,
}

impl StateEncoder {
    pub fn encode(&mut self, snapshot: &Snapshot) -> Result<String> {
        let msg = StateMessage::from_snapshot(snapshot);
        if msg.is_finite() {
            let text = msg.to_json();
            self.last_good = Some(msg);
            return Ok(text);
        }
        match &self.last_good {
            Some(good) => Ok(StateMessage { stale: true, ..good.clone() }.to_json()),
            None => Err(Error::Diverged { time_s: snapshot.time_s, quantity: "state snapshot".into() }),
        }
    }
}

/// Encode one snapshot with no stale fallback.
pub fn encode_state(snapshot: &Snapshot) -> Result<String> {
    StateEncoder::default().encode(snapshot)
}

pub fn decode_state(text: &str) -> Result<StateMessage> {
    let msg: StateMessage = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if msg.kind != "state" || msg.spines.len() != SPINE_COUNT || msg.phase().is_none() {
        return Err(Error::Parse("not a state message".into()));
    }
    Ok(msg)
}

#[derive(Serialize)]
struct ErrorMessage<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    reason: &'a str,
}

pub fn encode_error(reason: &str) -> String {
    serde_json::to_string(&ErrorMessage { kind: "error", reason }).expect("strings serialize")
}

#[derive(Clone, Copy)]
enum FieldKind {
    Pair,
    Config,
    SpineId,
    Number,
    Text,
}

impl FieldKind {
    fn check(self, v: &Value) -> std::result::Result<(), String> {
        let ok = match self {
            FieldKind::Pair => v.as_array().is_some_and(|a| a.len() == 2 && a.iter().all(Value::is_number)),
            FieldKind::Config => v.as_u64().is_some_and(|c| c <= u8::MAX as u64),
            FieldKind::SpineId => v.is_u64(),
            FieldKind::Number => v.is_number(),
            FieldKind::Text => v.is_string(),
        };
        if ok {
            return Ok(());
        }
        let want = match self {
            FieldKind::Pair => "an array of two numbers",
            FieldKind::Config => "1 or 2",
            FieldKind::SpineId => "an integer spine id 0-13",
            FieldKind::Number => "a number",
            FieldKind::Text => "a string",
        };
        Err(format!("expected {want}, got {v}"))
    }
}

fn command_fields(cmd: &str) -> Option<&'static [(&'static str, FieldKind)]> {
    use FieldKind::*;
    Some(match cmd {
        "move" => &[("dir", Pair), ("config", Config)],
        "stop" | "level" | "jump" | "retract_all" => &[],
        "spine" => &[("id", SpineId), ("target_mm", Number)],
        "reset" => &[("scenario", Text)],
        "set_terrain" => &[("preset", Text)],
        _ => return None,
    })
}

/// Strictly decode a command frame. `type`, when present, must be `"cmd"`.
pub fn decode_command(bytes: &[u8]) -> Result<Directive> {
    let bad = |field: &str, reason: String| Error::Decode { field: field.into(), reason };
    let value: Value = serde_json::from_slice(bytes).map_err(|e| bad("$", format!("malformed JSON: {e}")))?;
    let Value::Object(mut map) = value else {
        return Err(bad("$", "expected a JSON object".into()));
    };
    if let Some(kind) = map.remove("type") {
        if kind != Value::String("cmd".into()) {
            return Err(bad("type", format!("expected \"cmd\", got {kind}")));
        }
    }
    let cmd = match map.get("cmd") {
        Some(Value::String(c)) => c.clone(),
        Some(other) => return Err(bad("cmd", format!("expected a string, got {other}"))),
        None => return Err(bad("cmd", "missing".into())),
    };
    let fields = command_fields(&cmd).ok_or_else(|| bad("cmd", format!("unknown command `{cmd}`")))?;
    if let Some(extra) = map.keys().find(|k| *k != "cmd" && !fields.iter().any(|(f, _)| f == k)) {
        return Err(bad(extra, format!("unknown field for `{cmd}`")));
    }
    for (field, kind) in fields {
        let v = map.get(*field).ok_or_else(|| bad(field, "missing".into()))?;
        if let Err(reason) = kind.check(v) {
            return Err(bad(field, reason));
        }
    }
    let spec: CommandSpec = serde_json::from_value(Value::Object(map)).map_err(|e| bad("$", e.to_string()))?;
    spec.resolve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::command::{Command, GaitMode};
    use crate::dynamics::{BodyParams, Environment, RobotState};
    use crate::gait::GaitConfig;
    use crate::geometry::{spine_layout, support_candidates, Pose};
    use crate::sim::Simulation;
    use nalgebra::{Vector2, Vector3};

    fn field_of(text: &str) -> String {
        match decode_command(text.as_bytes()) {
            Err(Error::Decode { field, .. }) => field,
            other => panic!("{text}: {other:?}"),
        }
    }

    #[test]
    fn decodes_examples() {
        assert_eq!(decode_command(br#"{"type":"cmd","cmd":"stop"}"#).unwrap(), Directive::Gait(Command::Stop));
        assert_eq!(decode_command(br#"{"cmd":"level"}"#).unwrap(), Directive::Gait(Command::Level));
        let d = decode_command(br#"{"type":"cmd","cmd":"move","dir":[3,4],"config":1}"#).unwrap();
        let Directive::Gait(Command::Move { heading, mode }) = d else { panic!("{d:?}") };
        assert!((heading - Vector2::new(0.6, 0.8)).norm() < 1e-15);
        assert_eq!(mode, GaitMode::PropelCompress);
        assert_eq!(
            decode_command(br#"{"type":"cmd","cmd":"reset","scenario":"stance"}"#).unwrap(),
            Directive::Reset("stance".into())
        );
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(field_of(r#"{"type":"cmd","cmd":"spine","id":14,"target_mm":10}"#), "id");
        assert_eq!(field_of(r#"{"type":"cmd","cmd":"spine","id":-1,"target_mm":10}"#), "id");
        assert_eq!(field_of(r#"{"type":"cmd","cmd":"spine","id":2,"target_mm":"x"}"#), "target_mm");
        assert_eq!(field_of(r#"{"type":"cmd","cmd":"spine","id":2}"#), "target_mm");
        assert_eq!(field_of(r#"{"type":"cmd","cmd":"move","dir":[1],"config":1}"#), "dir");
        assert_eq!(field_of(r#"{"type":"cmd","cmd":"move","dir":[1,0],"config":1,"speed":2}"#), "speed");
        assert_eq!(field_of(r#"{"type":"cmd","cmd":"warp"}"#), "cmd");
        assert_eq!(field_of(r#"{"type":"cmd"}"#), "cmd");
        assert_eq!(field_of(r#"{"type":"state","cmd":"stop"}"#), "type");
        assert_eq!(field_of(r#"{"type":"cmd","cmd":"stop""#), "$");
        assert_eq!(field_of(r#"[1,2]"#), "$");
    }

    fn snapshot_of(state: RobotState) -> Snapshot {
        let mut sim = Simulation::new(state, BodyParams::default(), Environment::default(), GaitConfig::default(), 1e-3).unwrap();
        sim.snapshot().unwrap()
    }

    #[test]
    fn rest_state_encodes_zeros() {
        let text = encode_state(&snapshot_of(RobotState::on_ground(&BodyParams::default()))).unwrap();
        let msg = decode_state(&text).unwrap();
        assert_eq!((msg.euler.roll, msg.euler.pitch, msg.euler.yaw), (0.0, 0.0, 0.0));
        assert!(msg.spines.iter().all(|s| s.extension_mm == 0.0 && !s.contact));
        assert!(msg.shell_contact);
        assert_eq!(msg.phase, "REST");
        assert_eq!(msg.preset, "lab-floor");
        assert!(text.len() <= MAX_STATE_BYTES);
    }

    #[test]
    fn field_order_is_fixed() {
        let text = encode_state(&snapshot_of(RobotState::on_ground(&BodyParams::default()))).unwrap();
        let keys = [
            "\"type\"", "\"t_s\"", "\"pose\"", "\"euler\"", "\"spines\"", "\"shell_contact\"", "\"velocity\"",
            "\"phase\"", "\"stability_margin_m\"", "\"preset\"", "\"stale\"",
        ];
        let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{text}");
        assert!(text.starts_with(r#"{"type":"state","t_s":0.0,"#), "{text}");
    }

    #[test]
    fn stance_state_shows_four_contacts() {
        let mut s = RobotState::at_rest(Pose::at(Vector3::new(0.0, 0.0, 0.129 / 3f64.sqrt() - 1e-4)));
        for id in support_candidates(&s.pose, spine_layout()) {
            s.set_extension(id, 64.0).unwrap();
        }
        let msg = decode_state(&encode_state(&snapshot_of(s)).unwrap()).unwrap();
        assert_eq!(msg.spines.iter().filter(|s| s.contact).count(), 4);
        assert!(!msg.shell_contact);
        assert!((msg.stability_margin_m - 0.0745).abs() < 5e-4, "{}", msg.stability_margin_m);
    }

    #[test]
    fn round_trip_keeps_nine_digits() {
        let mut s = RobotState::on_ground(&BodyParams::default());
        s.pose.position = Vector3::new(0.123456789123, -1.0 / 3.0, 0.065);
        s.linear_velocity = Vector3::new(1e-7 / 3.0, 0.0, 2.0 / 3.0);
        s.set_extension(3, 12.3456789012).unwrap();
        let snap = snapshot_of(s);
        let msg = decode_state(&encode_state(&snap).unwrap()).unwrap();
        assert_eq!(msg, StateMessage::from_snapshot(&snap));
        assert_eq!(msg.pose.position[1], -0.333333333);
        assert_eq!(msg.spines[3].extension_mm, 12.3456789);
    }

    #[test]
    fn non_finite_repeats_last_good() {
        let good = snapshot_of(RobotState::on_ground(&BodyParams::default()));
        let mut bad = good.clone();
        bad.time_s = 0.5;
        bad.velocity.x = f64::NAN;
        assert!(encode_state(&bad).is_err());
        let mut enc = StateEncoder::default();
        let first = decode_state(&enc.encode(&good).unwrap()).unwrap();
        let second = decode_state(&enc.encode(&bad).unwrap()).unwrap();
        assert!(second.stale);
        assert_eq!(StateMessage { stale: false, ..second }, first);
    }

    #[test]
    fn error_reply_shape() {
        let v: Value = serde_json::from_str(&encode_error("bad \"thing\"")).unwrap();
        assert_eq!(v["type"], "error");
        assert_eq!(v["reason"], "bad \"thing\"");
    }
}
