use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::kernel::{PointSource, SectionKernel, SeriesPolicy, SeriesValue};
use crate::domain::{FlowProfile, GasLineSpec, LeakScenario};
use crate::error::{check_range, Error, Result};

/// Euler–Mascheroni constant as used by the simplified inlet formula.
pub const EULER_C: f64 = 0.577215;

/// The three pieces the isolation valves cut the damaged line into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Section {
    /// `0 ≤ x ≤ l1`, fed by the inlet.
    Inlet = 1,
    /// `l1 ≤ x ≤ l3`, sealed, with the leak.
    Isolated = 2,
    /// `l3 ≤ x ≤ L`, drained by consumers.
    Outlet = 3,
}

impl Section {
    pub const ALL: [Section; 3] = [Section::Inlet, Section::Isolated, Section::Outlet];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Section> {
        match id {
            1 => Some(Section::Inlet),
            2 => Some(Section::Isolated),
            3 => Some(Section::Outlet),
            _ => None,
        }
    }
}

/// Which terms the section evaluators include.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermSet {
    /// Boundary and leak flows plus the relaxation of the snapshot itself:
    /// its flux mismatch at the closed valves and its interior kinks. This
    /// solves the same initial/boundary problem as the FD oracle.
    #[default]
    Complete,
    /// Only the terms of the published section formulas: the inlet and
    /// outlet flows with their snapshot-gradient terms, and the leak.
    Printed,
}

/// Section bounds and series constants derived from passport and scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransientParams {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub length: f64,
    pub t1: f64,
    /// `π² c² / (2a l1²)`; the section-1 mode rates are this times `n²`.
    pub alpha3_coeff: f64,
    /// `π² c² / (2a (l3 - l1)²)`.
    pub alpha4_coeff: f64,
    /// `π² c² / (2a (L - l3)²)`.
    pub alpha5_coeff: f64,
    /// Rate constant of the inlet formulas; equals `alpha3_coeff`.
    pub alpha_inlet: f64,
    pub series_cap: usize,
    pub term_tolerance: f64,
}

impl TransientParams {
    pub fn new(spec: &GasLineSpec, scenario: &LeakScenario, policy: SeriesPolicy) -> Self {
        let coeff = |len: f64| PI * PI * spec.c2() / (spec.friction_2a * len * len);
        let alpha3 = coeff(scenario.l1);
        Self {
            l1: scenario.l1,
            l2: scenario.l2,
            l3: scenario.l3,
            length: spec.length,
            t1: scenario.t1,
            alpha3_coeff: alpha3,
            alpha4_coeff: coeff(scenario.l3 - scenario.l1),
            alpha5_coeff: coeff(spec.length - scenario.l3),
            alpha_inlet: alpha3,
            series_cap: policy.cap,
            term_tolerance: policy.tolerance,
        }
    }

    pub fn bounds(&self, section: Section) -> (f64, f64) {
        match section {
            Section::Inlet => (0.0, self.l1),
            Section::Isolated => (self.l1, self.l3),
            Section::Outlet => (self.l3, self.length),
        }
    }

    pub fn policy(&self) -> SeriesPolicy {
        SeriesPolicy {
            cap: self.series_cap,
            tolerance: self.term_tolerance,
        }
    }
}

/// Evaluation of one pressure value with its truncation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub pressure: f64,
    /// Largest mode count used by any source term.
    pub terms: usize,
    /// False when some term hit the series cap before reaching tolerance.
    pub converged: bool,
}

/// How the inlet pressure is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InletMode {
    /// The term-by-term inlet series.
    Exact,
    /// The closed form with the Euler-constant approximation.
    Simplified,
    /// The section-1 field evaluated at `x = 0`.
    Field,
}

/// Post-closure pressure fields of the damaged line.
#[derive(Debug, Clone)]
pub struct TransientModel {
    spec: GasLineSpec,
    scenario: LeakScenario,
    params: TransientParams,
    terms: TermSet,
    sources: [Vec<PointSource>; 3],
}

impl TransientModel {
    pub fn new(spec: GasLineSpec, scenario: LeakScenario) -> Result<Self> {
        Self::with_options(spec, scenario, SeriesPolicy::default(), TermSet::default())
    }

    pub fn with_options(
        spec: GasLineSpec,
        scenario: LeakScenario,
        policy: SeriesPolicy,
        terms: TermSet,
    ) -> Result<Self> {
        let report = crate::domain::validate_scenario(&spec, &scenario);
        // the crossover-multiple rule is a conformance check, not a model precondition
        let blocking: Vec<_> = report
            .violations
            .iter()
            .filter(|v| v.rule != "l3 - l1 multiple of crossover spacing")
            .collect();
        if !blocking.is_empty() {
            return Err(Error::InvalidScenario(report.to_string()));
        }
        if policy.cap == 0 || !(policy.tolerance > 0.0) {
            return Err(Error::Config(
                "series cap must be >= 1 and tolerance > 0".into(),
            ));
        }
        let params = TransientParams::new(&spec, &scenario, policy);
        let sources = Section::ALL.map(|s| build_sources(&spec, &scenario, &params, s, terms));
        Ok(Self {
            spec,
            scenario,
            params,
            terms,
            sources,
        })
    }

    pub fn spec(&self) -> &GasLineSpec {
        &self.spec
    }

    pub fn scenario(&self) -> &LeakScenario {
        &self.scenario
    }

    pub fn params(&self) -> &TransientParams {
        &self.params
    }

    pub fn term_set(&self) -> TermSet {
        self.terms
    }

    /// Point sources driving `section`, offsets relative to its left end.
    pub fn sources(&self, section: Section) -> &[PointSource] {
        &self.sources[section as usize - 1]
    }

    pub fn kernel(&self, section: Section) -> SectionKernel {
        let (lo, hi) = self.params.bounds(section);
        SectionKernel::new(hi - lo, self.spec.c2(), self.spec.friction_2a)
    }

    /// Section containing `x`; shared endpoints resolve to the left section.
    pub fn section_of(&self, x: f64) -> Result<Section> {
        check_range("x", x, 0.0, self.spec.length)?;
        Ok(if x <= self.params.l1 {
            Section::Inlet
        } else if x <= self.params.l3 {
            Section::Isolated
        } else {
            Section::Outlet
        })
    }

    pub fn pressure(&self, section: Section, x: f64, t: f64) -> Result<Evaluation> {
        let (lo, hi) = self.params.bounds(section);
        check_range("x", x, lo, hi)?;
        check_range("t", t, self.params.t1, f64::INFINITY)?;
        let base = self.scenario.snapshot.pressure_at(x);
        if t == self.params.t1 {
            return Ok(Evaluation {
                pressure: base,
                terms: 0,
                converged: true,
            });
        }
        let kernel = self.kernel(section);
        let policy = self.params.policy();
        let mut eval = Evaluation {
            pressure: base,
            terms: 0,
            converged: true,
        };
        for src in self.sources(section) {
            let r: SeriesValue = kernel.response(src, x - lo, self.params.t1, t, policy);
            eval.pressure += r.value;
            eval.terms = eval.terms.max(r.terms);
            eval.converged &= r.converged;
        }
        Ok(eval)
    }

    /// Section 1, `0 ≤ x ≤ l1`: inlet inflow `G0`, closed valve at `l1`.
    pub fn section1_pressure(&self, x: f64, t: f64) -> Result<Evaluation> {
        self.pressure(Section::Inlet, x, t)
    }

    /// Section 2, `l1 ≤ x ≤ l3`: both ends closed, leak outflow at `l2`.
    pub fn section2_pressure(&self, x: f64, t: f64) -> Result<Evaluation> {
        self.pressure(Section::Isolated, x, t)
    }

    /// Section 3, `l3 ≤ x ≤ L`: closed valve at `l3`, consumer draw at `L`.
    pub fn section3_pressure(&self, x: f64, t: f64) -> Result<Evaluation> {
        self.pressure(Section::Outlet, x, t)
    }

    pub fn inlet_pressure(&self, t: f64, mode: InletMode) -> Result<Evaluation> {
        check_range("t", t, self.params.t1, f64::INFINITY)?;
        let p_t1 = self.scenario.snapshot.pressure_at(0.0);
        match mode {
            InletMode::Field => self.section1_pressure(0.0, t),
            InletMode::Simplified => Ok(Evaluation {
                pressure: simplified_inlet_pressure(
                    &self.spec,
                    p_t1,
                    self.params.l1,
                    t - self.params.t1,
                ),
                terms: 0,
                converged: true,
            }),
            InletMode::Exact => Ok(exact_inlet_pressure(
                &self.spec,
                p_t1,
                self.params.l1,
                self.params.t1,
                t,
                self.params.policy(),
            )),
        }
    }
}

/// Closed-form inlet pressure with the Euler-constant simplification:
/// `P(0,t1) + (2c²G0/l1)(t-t1)(1-C) - 2aG0 l1 (1/3 + 2/π²)`.
pub fn simplified_inlet_pressure(spec: &GasLineSpec, p_t1: f64, l1: f64, elapsed: f64) -> f64 {
    let g0 = spec.inlet_flow;
    p_t1 + 2.0 * spec.c2() * g0 / l1 * elapsed * (1.0 - EULER_C)
        - spec.friction_2a * g0 * l1 * (1.0 / 3.0 + 2.0 / (PI * PI))
}

/// Term-by-term inlet series
/// `P(0,t1) - 2a l1 G0/3 + (2c²G0/l1) Σ (e^{-αn²(t-t1)} + e^{-αn²t} - e^{-αn²t1}) / (αn²)`.
pub fn exact_inlet_pressure(
    spec: &GasLineSpec,
    p_t1: f64,
    l1: f64,
    t1: f64,
    t: f64,
    policy: SeriesPolicy,
) -> Evaluation {
    if t == t1 {
        // the n-sum is π²/(6α) there, cancelling the 2a l1 G0 / 3 offset
        return Evaluation {
            pressure: p_t1,
            terms: 0,
            converged: true,
        };
    }
    let g0 = spec.inlet_flow;
    let alpha = PI * PI * spec.c2() / (spec.friction_2a * l1 * l1);
    let scale = 2.0 * spec.c2() * g0 / l1;
    let mut sum = 0.0;
    let mut terms = 0;
    let mut converged = false;
    for n in 1..=policy.cap {
        let an = alpha * (n * n) as f64;
        let term = ((-an * (t - t1)).exp() + (-an * t).exp() - (-an * t1).exp()) / an;
        sum += term;
        terms = n;
        if scale * term.abs() < policy.tolerance {
            converged = true;
            break;
        }
    }
    Evaluation {
        pressure: p_t1 - spec.friction_2a * l1 * g0 / 3.0 + scale * sum,
        terms,
        converged,
    }
}

fn constant(q: f64, offset: f64, label: &'static str) -> PointSource {
    PointSource {
        offset,
        flow: FlowProfile::Constant(q),
        label,
    }
}

fn build_sources(
    spec: &GasLineSpec,
    scenario: &LeakScenario,
    params: &TransientParams,
    section: Section,
    terms: TermSet,
) -> Vec<PointSource> {
    let (lo, hi) = params.bounds(section);
    let len = hi - lo;
    let a2 = spec.friction_2a;
    let snap = &scenario.snapshot;
    let mut out = Vec::new();

    // physical boundary and leak flows
    match section {
        Section::Inlet => out.push(constant(spec.inlet_flow, 0.0, "inlet flow G0")),
        Section::Isolated => out.push(PointSource {
            offset: params.l2 - lo,
            flow: scenario.leak_outflow.scaled(-1.0),
            label: "leak outflow",
        }),
        Section::Outlet => out.push(PointSource {
            offset: len,
            flow: scenario.outlet_draw.scaled(-1.0),
            label: "outlet draw",
        }),
    }

    match terms {
        TermSet::Printed => match section {
            Section::Inlet => out.push(constant(snap.grad_inlet / a2, 0.0, "inlet gradient")),
            Section::Outlet => out.push(constant(-snap.grad_outlet / a2, len, "outlet gradient")),
            Section::Isolated => {}
        },
        TermSet::Complete => {
            // the snapshot's own flux through each end is cancelled, and its
            // curvature (slope jumps at samples) relaxes as point sources
            let mut knots: Vec<(f64, f64)> = vec![(lo, snap.pressure_at(lo))];
            knots.extend(
                snap.samples
                    .iter()
                    .copied()
                    .filter(|&(x, _)| x > lo && x < hi),
            );
            knots.push((hi, snap.pressure_at(hi)));
            let slopes: Vec<f64> = knots
                .windows(2)
                .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
                .collect();
            out.push(constant(slopes[0] / a2, 0.0, "snapshot flux, left end"));
            out.push(constant(
                -slopes[slopes.len() - 1] / a2,
                len,
                "snapshot flux, right end",
            ));
            for (i, w) in slopes.windows(2).enumerate() {
                let jump = w[1] - w[0];
                if jump != 0.0 {
                    out.push(constant(jump / a2, knots[i + 1].0 - lo, "snapshot kink"));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioDocument;

    fn published_model() -> TransientModel {
        let doc = ScenarioDocument::published();
        TransientModel::new(doc.spec, doc.leak_scenario()).unwrap()
    }

    #[test]
    fn alpha_prefactors() {
        let m = published_model();
        let p = m.params();
        let c2 = 383.3f64 * 383.3;
        let expect = |len: f64| PI * PI * c2 / (0.1 * len * len);
        assert!((p.alpha3_coeff / expect(1.0e4) - 1.0).abs() < 1e-12);
        assert!((p.alpha4_coeff / expect(1.0e4) - 1.0).abs() < 1e-12);
        assert!((p.alpha5_coeff / expect(1.0e4) - 1.0).abs() < 1e-12);
        assert_eq!(p.alpha_inlet, p.alpha3_coeff);
    }

    #[test]
    fn closure_instant_reproduces_snapshot() {
        let m = published_model();
        let t1 = m.params().t1;
        assert_eq!(m.section1_pressure(0.0, t1).unwrap().pressure, 13.36e4);
        assert_eq!(m.section1_pressure(10_000.0, t1).unwrap().pressure, 12.19e4);
        assert_eq!(m.section2_pressure(10_000.0, t1).unwrap().pressure, 12.19e4);
        assert_eq!(m.section3_pressure(30_000.0, t1).unwrap().pressure, 10.4e4);
    }

    #[test]
    fn complete_sources_balance_to_net_flow() {
        let m = published_model();
        let net = |s: Section| -> f64 { m.sources(s).iter().map(|p| p.flow.value_at(0.0)).sum() };
        let sc = m.scenario();
        assert!((net(Section::Inlet) - 10.0).abs() < 1e-9);
        assert!((net(Section::Isolated) + sc.leak_outflow.value_at(0.0)).abs() < 1e-9);
        assert!((net(Section::Outlet) + sc.outlet_draw.value_at(0.0)).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_arguments_are_domain_errors() {
        let m = published_model();
        assert!(matches!(
            m.section1_pressure(10_001.0, 400.0),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            m.section2_pressure(15_000.0, 299.0),
            Err(Error::Domain { .. })
        ));
        assert!(m.section3_pressure(19_999.0, 400.0).is_err());
    }

    #[test]
    fn sealed_sourceless_section_stays_put() {
        let doc = ScenarioDocument::published();
        let mut sc = doc.leak_scenario();
        sc.leak_outflow = FlowProfile::Constant(0.0);
        sc.outlet_draw = FlowProfile::Constant(0.0);
        let m =
            TransientModel::with_options(doc.spec, sc, SeriesPolicy::default(), TermSet::Printed)
                .unwrap();
        for &x in &[10_000.0, 14_500.0, 20_000.0] {
            assert_eq!(
                m.section2_pressure(x, 700.0).unwrap().pressure,
                m.scenario().snapshot.pressure_at(x)
            );
        }
        // section 3 still carries the outlet-gradient term unless it is zero too
        let mut sc = m.scenario().clone();
        sc.snapshot.grad_outlet = 0.0;
        let m =
            TransientModel::with_options(doc.spec, sc, SeriesPolicy::default(), TermSet::Printed)
                .unwrap();
        let p0 = m.section3_pressure(25_000.0, 300.0).unwrap().pressure;
        assert_eq!(m.section3_pressure(25_000.0, 900.0).unwrap().pressure, p0);
    }

    #[test]
    fn inlet_modes_agree_at_closure_for_exact_series() {
        let m = published_model();
        assert_eq!(
            m.inlet_pressure(300.0, InletMode::Exact).unwrap().pressure,
            13.36e4
        );
        assert_eq!(
            m.inlet_pressure(300.0, InletMode::Field).unwrap().pressure,
            13.36e4
        );
        // the simplified form carries a fixed -Z1 l1 offset at zero elapsed time
        let simp = m
            .inlet_pressure(300.0, InletMode::Simplified)
            .unwrap()
            .pressure;
        let z1 = 0.1 * 10.0 * (1.0 / 3.0 + 2.0 / (PI * PI));
        assert!((simp - (13.36e4 - z1 * 1.0e4)).abs() < 1e-9);
    }

    #[test]
    fn exact_inlet_series_converges() {
        let m = published_model();
        let e = m.inlet_pressure(600.0, InletMode::Exact).unwrap();
        assert!(e.converged);
        // saturates at P(0,t1) - 2a l1 G0 / 3
        assert!((e.pressure - (13.36e4 - 0.1 * 1.0e4 * 10.0 / 3.0)).abs() < 1.0);
    }
}
