//! Scenario file: one JSON document with `spec`, `scenario` and `snapshot`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{
    validate_scenario, FlowProfile, GasLineSpec, LeakScenario, PressureSnapshot, ValidationReport,
};
use crate::error::{Error, Result};

const PUBLISHED_SCENARIO: &str = include_str!("../scenarios/published.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBody {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub t1: f64,
    #[serde(rename = "leak_outflow_Gleak")]
    pub leak_outflow: FlowProfile,
    #[serde(rename = "outlet_draw_Gout")]
    pub outlet_draw: FlowProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotSection {
    pub samples: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_inlet: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_outlet: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub spec: GasLineSpec,
    pub scenario: ScenarioBody,
    pub snapshot: SnapshotSection,
}

impl ScenarioDocument {
    /// The published parameter block, with the fitted leak and outlet flows.
    pub fn published() -> Self {
        Self::from_json(PUBLISHED_SCENARIO).expect("embedded published scenario parses")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Snapshot with boundary gradients; missing gradients are estimated
    /// from the end sample pairs.
    pub fn pressure_snapshot(&self) -> PressureSnapshot {
        let estimated = PressureSnapshot::new(self.snapshot.samples.clone())
            .estimate_boundary_gradients()
            .unwrap_or_else(|_| PressureSnapshot::new(self.snapshot.samples.clone()));
        PressureSnapshot {
            grad_inlet: self.snapshot.grad_inlet.unwrap_or(estimated.grad_inlet),
            grad_outlet: self.snapshot.grad_outlet.unwrap_or(estimated.grad_outlet),
            samples: estimated.samples,
        }
    }

    pub fn leak_scenario(&self) -> LeakScenario {
        let s = &self.scenario;
        LeakScenario {
            l1: s.l1,
            l2: s.l2,
            l3: s.l3,
            t1: s.t1,
            leak_outflow: s.leak_outflow.clone(),
            outlet_draw: s.outlet_draw.clone(),
            snapshot: self.pressure_snapshot(),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate_scenario(&self.spec, &self.leak_scenario())
    }

    /// Passport and scenario, or the full validation report as an error.
    pub fn validated(&self) -> Result<(GasLineSpec, LeakScenario)> {
        let report = self.validate();
        if report.is_valid() {
            Ok((self.spec, self.leak_scenario()))
        } else {
            Err(Error::InvalidScenario(report.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected() {
        let text = PUBLISHED_SCENARIO.replacen("\"t1\"", "\"surprise\": 1, \"t1\"", 1);
        assert!(matches!(
            ScenarioDocument::from_json(&text),
            Err(Error::Json(_))
        ));
    }

    #[test]
    fn missing_gradients_are_estimated() {
        let doc = ScenarioDocument::published();
        assert!(doc.snapshot.grad_inlet.is_none());
        let snap = doc.pressure_snapshot();
        assert!((snap.grad_inlet + 1.08).abs() < 1e-12);
        assert!((snap.grad_outlet + 0.92).abs() < 1e-12);
    }

    #[test]
    fn explicit_gradients_win() {
        let mut doc = ScenarioDocument::published();
        doc.snapshot.grad_inlet = Some(-2.0);
        assert_eq!(doc.pressure_snapshot().grad_inlet, -2.0);
        let back = ScenarioDocument::from_json(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn time_varying_flow_parses() {
        let text = PUBLISHED_SCENARIO.replacen(
            "\"leak_outflow_Gleak\": 5.573962395264854",
            "\"leak_outflow_Gleak\": [[300.0, 4.0], [900.0, 6.0]]",
            1,
        );
        let doc = ScenarioDocument::from_json(&text).unwrap();
        assert!(matches!(doc.scenario.leak_outflow, FlowProfile::Samples(_)));
        assert!(doc.validate().is_valid());
    }
}
