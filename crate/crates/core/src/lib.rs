//! Digital twin of a parallel gas-pipeline pair after an emergency valve
//! closure.
//!
//! The crate models the non-stationary pressure in the three sections the
//! isolation valves cut the damaged line into, localizes the isolated
//! section from inlet-pressure telemetry, and runs the valve automation and
//! control-center logic that opens the connecting pipes once it is safe.
//!
//! | module | role |
//! |---|---|
//! | [`domain`] | passport, scenario, stationary profile |
//! | [`scenario`] | JSON scenario files |
//! | [`transient`] | section fields, inlet formulas, FD oracle, tables |
//! | [`localization`] | closure signature, section bounds, activation check |
//! | [`valves`] | shut-off and connecting valve state machines |
//! | [`telemetry`] | sensors, in-process bus, NDJSON stream service |
//! | [`center`] | control-center decision pipeline and journal |
//! | [`sim`] | deterministic end-to-end runner and artifacts |

// `!(x > 0.0)` rejects NaN together with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod center;
pub mod domain;
pub mod error;
pub mod localization;
pub mod scenario;
pub mod sim;
pub mod telemetry;
pub mod transient;
pub mod valves;

pub use domain::{
    stationary_pressure, validate_scenario, FlowProfile, GasLineSpec, LeakScenario,
    PressureSnapshot,
};
pub use error::{Error, Result};
pub use scenario::ScenarioDocument;
