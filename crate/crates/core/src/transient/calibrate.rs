//! Least-squares calibration of the leak outflow and outlet draw against
//! the published section tables.
//!
//! Both fields are affine in their flow, so the fit is the closed-form
//! one-parameter regression of `table - P(G=0)` on `P(G=1) - P(G=0)`.

use serde::Serialize;

use super::model::{Section, TransientModel};
use super::table::PublishedTables;
use crate::domain::{FlowProfile, GasLineSpec, LeakScenario};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowFit {
    pub section: Section,
    /// Fitted constant flow, Pa·s/m.
    pub flow: f64,
    /// Root-mean-square residual over the fitted cells, Pa.
    pub rms_residual: f64,
    pub cells: usize,
}

fn with_flow(scenario: &LeakScenario, section: Section, g: f64) -> LeakScenario {
    let mut sc = scenario.clone();
    match section {
        Section::Isolated => sc.leak_outflow = FlowProfile::Constant(g),
        Section::Outlet => sc.outlet_draw = FlowProfile::Constant(g),
        Section::Inlet => {}
    }
    sc
}

/// Fits the constant flow of `section` (isolated → leak, outlet → draw) to
/// every published cell after the closure column.
pub fn fit_section_flow(
    spec: &GasLineSpec,
    scenario: &LeakScenario,
    section: Section,
    published: &PublishedTables,
) -> Result<FlowFit> {
    if section == Section::Inlet {
        return Err(Error::Config(
            "the inlet flow is a passport constant".into(),
        ));
    }
    let base = TransientModel::new(*spec, with_flow(scenario, section, 0.0))?;
    let unit = TransientModel::new(*spec, with_flow(scenario, section, 1.0))?;
    let t1 = scenario.t1;
    let mut rows = Vec::new();
    for &(_, x, a, p) in published.section(section) {
        if a == 0.0 {
            continue;
        }
        let b = base.pressure(section, x, t1 + a)?.pressure;
        let r = unit.pressure(section, x, t1 + a)?.pressure - b;
        rows.push((b, r, p));
    }
    let num: f64 = rows.iter().map(|(b, r, p)| r * (p - b)).sum();
    let den: f64 = rows.iter().map(|(_, r, _)| r * r).sum();
    let flow = num / den;
    let sse: f64 = rows
        .iter()
        .map(|(b, r, p)| (b + flow * r - p).powi(2))
        .sum();
    Ok(FlowFit {
        section,
        flow,
        rms_residual: (sse / rows.len() as f64).sqrt(),
        cells: rows.len(),
    })
}
