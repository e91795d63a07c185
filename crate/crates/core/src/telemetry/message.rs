use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::valves::{Action, LineId, ValveState};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    PressureSample,
    ValvePosition,
    Command,
    Verdict,
    Journal,
}

/// Envelope of every line on the bus and the stream socket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetryMessage {
    pub schema_version: String,
    pub kind: MessageKind,
    pub time_s: f64,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure_pa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valve_state: Option<ValveState>,
    #[serde(default)]
    pub payload: Value,
}

/// Payload of a `command` line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorCommand {
    pub action: Action,
    pub valve_id: String,
    pub operator_id: String,
}

fn envelope(kind: MessageKind, time_s: f64, source: impl Into<String>) -> TelemetryMessage {
    TelemetryMessage {
        schema_version: SCHEMA_VERSION.to_string(),
        kind,
        time_s,
        source: source.into(),
        x_m: None,
        pressure_pa: None,
        valve_state: None,
        payload: Value::Object(Default::default()),
    }
}

impl TelemetryMessage {
    pub fn pressure_sample(
        source: impl Into<String>,
        line: LineId,
        x_m: f64,
        time_s: f64,
        pressure_pa: f64,
    ) -> Self {
        Self {
            x_m: Some(x_m),
            pressure_pa: Some(pressure_pa),
            payload: json!({ "line": line }),
            ..envelope(MessageKind::PressureSample, time_s, source)
        }
    }

    pub fn valve_position(
        valve_id: impl Into<String>,
        line: LineId,
        x_m: f64,
        time_s: f64,
        state: ValveState,
        changed_at_s: f64,
    ) -> Self {
        Self {
            x_m: Some(x_m),
            valve_state: Some(state),
            payload: json!({ "line": line, "changed_at_s": changed_at_s }),
            ..envelope(MessageKind::ValvePosition, time_s, valve_id)
        }
    }

    pub fn command(source: impl Into<String>, time_s: f64, command: &OperatorCommand) -> Self {
        Self {
            payload: serde_json::to_value(command).expect("command serializes"),
            ..envelope(MessageKind::Command, time_s, source)
        }
    }

    pub fn verdict(source: impl Into<String>, time_s: f64, payload: Value) -> Self {
        Self {
            payload,
            ..envelope(MessageKind::Verdict, time_s, source)
        }
    }

    pub fn journal(source: impl Into<String>, time_s: f64, payload: Value) -> Self {
        Self {
            payload,
            ..envelope(MessageKind::Journal, time_s, source)
        }
    }

    /// Parses one NDJSON line and validates it.
    pub fn parse_line(line: &str) -> Result<Self> {
        let msg: Self =
            serde_json::from_str(line.trim()).map_err(|e| Error::Schema(e.to_string()))?;
        msg.validate()?;
        Ok(msg)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("message serializes")
    }

    /// Stable identifier used by journal records.
    pub fn id(&self) -> String {
        format!("{}@{}", self.source, self.time_s)
    }

    pub fn line(&self) -> Option<LineId> {
        self.payload.get("line")?.as_str()?.parse().ok()
    }

    pub fn changed_at(&self) -> Option<f64> {
        self.payload.get("changed_at_s")?.as_f64()
    }

    pub fn operator_command(&self) -> Result<OperatorCommand> {
        if self.kind != MessageKind::Command {
            return Err(Error::Schema("not a command".into()));
        }
        serde_json::from_value(self.payload.clone())
            .map_err(|e| Error::Schema(format!("command payload: {e}")))
    }

    /// Checks the envelope and that exactly the fields of `kind` are present.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| {
            Err(Error::Schema(format!(
                "{:?} message from `{}`: {m}",
                self.kind, self.source
            )))
        };
        if self.schema_version != SCHEMA_VERSION {
            return fail(&format!(
                "unsupported schema_version `{}`",
                self.schema_version
            ));
        }
        if !(self.time_s.is_finite() && self.time_s >= 0.0) {
            return fail("time_s must be finite and non-negative");
        }
        if self.source.is_empty() {
            return fail("empty source");
        }
        if !self.payload.is_object() {
            return fail("payload must be an object");
        }
        match self.kind {
            MessageKind::PressureSample => {
                match (self.x_m, self.pressure_pa) {
                    (Some(x), Some(p)) if x.is_finite() && p.is_finite() => {}
                    _ => return fail("needs finite x_m and pressure_pa"),
                }
                if self.valve_state.is_some() {
                    return fail("valve_state not allowed");
                }
                if self.line().is_none() {
                    return fail("payload.line missing or unknown");
                }
            }
            MessageKind::ValvePosition => {
                if self.valve_state.is_none() {
                    return fail("needs valve_state");
                }
                if self.pressure_pa.is_some() {
                    return fail("pressure_pa not allowed");
                }
                if self.line().is_none() || self.changed_at().is_none() {
                    return fail("payload needs line and changed_at_s");
                }
            }
            MessageKind::Command | MessageKind::Verdict | MessageKind::Journal => {
                if self.x_m.is_some() || self.pressure_pa.is_some() || self.valve_state.is_some() {
                    return fail("sensor fields not allowed");
                }
                if self.kind == MessageKind::Command {
                    self.operator_command()?;
                }
            }
        }
        Ok(())
    }
}

/// Reply sent to a stream client whose line was refused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub schema_version: String,
    pub kind: String,
    pub error: String,
}

impl ErrorReply {
    pub fn new(error: impl Into<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            kind: "error".to_string(),
            error: error.into(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("reply serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pressure_sample_round_trips() {
        let m = TelemetryMessage::pressure_sample("pt-1-0", LineId::Line1, 0.0, 300.0, 133_600.0);
        let line = m.to_line();
        assert_eq!(
            line,
            r#"{"schema_version":"1","kind":"pressure_sample","time_s":300.0,"source":"pt-1-0","x_m":0.0,"pressure_pa":133600.0,"payload":{"line":"line_1"}}"#
        );
        assert_eq!(TelemetryMessage::parse_line(&line).unwrap(), m);
    }

    #[test]
    fn kind_specific_fields_are_enforced() {
        let mut m = TelemetryMessage::pressure_sample("pt", LineId::Line1, 0.0, 1.0, 1.0);
        m.valve_state = Some(ValveState::Open);
        assert!(m.validate().is_err());

        let mut v = TelemetryMessage::valve_position(
            "sv-1-1",
            LineId::Line1,
            1e4,
            301.0,
            ValveState::Closed,
            300.0,
        );
        assert!(v.validate().is_ok());
        assert_eq!(v.changed_at(), Some(300.0));
        v.payload = json!({ "line": "line_1" });
        assert!(v.validate().is_err());

        let cmd = OperatorCommand {
            action: Action::Open,
            valve_id: "xv-1".into(),
            operator_id: "op".into(),
        };
        let mut c = TelemetryMessage::command("console", 5.0, &cmd);
        assert!(c.validate().is_ok());
        c.x_m = Some(1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn malformed_lines_are_schema_errors() {
        for bad in [
            "not json",
            r#"{"schema_version":"2","kind":"journal","time_s":0,"source":"c","payload":{}}"#,
            r#"{"schema_version":"1","kind":"command","time_s":0,"source":"c","payload":{"action":"open"}}"#,
            r#"{"schema_version":"1","kind":"journal","time_s":-1,"source":"c","payload":{}}"#,
            r#"{"schema_version":"1","kind":"journal","time_s":0,"source":"c","payload":{},"extra":1}"#,
        ] {
            assert!(
                matches!(TelemetryMessage::parse_line(bad), Err(Error::Schema(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn client_command_line_parses() {
        let line = r#"{"schema_version":"1","kind":"command","time_s":0,"source":"console","payload":{"action":"open","valve_id":"xv-1","operator_id":"op-7"}}"#;
        let cmd = TelemetryMessage::parse_line(line)
            .unwrap()
            .operator_command()
            .unwrap();
        assert_eq!(cmd.action, Action::Open);
        assert_eq!(cmd.operator_id, "op-7");
    }
}
