//! Simulated sensors, the in-process bus and the NDJSON stream service.

pub mod bus;
pub mod message;
pub mod sensors;
pub mod stream;

pub use bus::{Bus, Filter};
pub use message::{ErrorReply, MessageKind, OperatorCommand, TelemetryMessage, SCHEMA_VERSION};
pub use sensors::{
    default_layout, pressure_sensor_id, PositionSensors, PressureView, SensorArray, SensorConfig,
};
pub use stream::{check_client_line, ClientEvent, StreamServer, DEFAULT_CLIENT_BUDGET};
