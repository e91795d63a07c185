//! Pipeline passport, leak scenario and the stationary regime.
//!
//! Everything here is an immutable value type. Units are SI throughout
//! (Pa, m, s); the `10^4 Pa` convention of the published tables only shows
//! up when formatting output.

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};

/// Technical passport of one line of the parallel pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasLineSpec {
    /// Line length `L`, m.
    #[serde(rename = "length_L")]
    pub length: f64,
    /// Pipe diameter `d`, m. Connecting pipes share it.
    #[serde(rename = "diameter_d")]
    pub diameter: f64,
    /// Stationary inlet pressure `P1`, Pa.
    #[serde(rename = "inlet_pressure_P1")]
    pub inlet_pressure: f64,
    /// Stationary outlet pressure `P2`, Pa.
    #[serde(rename = "outlet_pressure_P2")]
    pub outlet_pressure: f64,
    /// Linearized inlet mass flow `G0`, Pa·s/m.
    #[serde(rename = "inlet_flow_G0")]
    pub inlet_flow: f64,
    /// Distance between neighbouring connecting pipes, m.
    #[serde(rename = "crossover_spacing_l")]
    pub crossover_spacing: f64,
    /// Speed of sound `c`, m/s.
    #[serde(rename = "sound_speed_c")]
    pub sound_speed: f64,
    /// Linearized friction stored as the product `2a`, 1/s.
    #[serde(rename = "friction_2a")]
    pub friction_2a: f64,
}

impl GasLineSpec {
    /// `c^2`, m²/s².
    pub fn c2(&self) -> f64 {
        self.sound_speed * self.sound_speed
    }

    /// Diffusivity `c^2 / 2a` of the linearized flow equations, m²/s.
    pub fn diffusivity(&self) -> f64 {
        self.c2() / self.friction_2a
    }

    /// Positions of the connecting pipes strictly inside `(0, L)`.
    pub fn crossover_positions(&self) -> Vec<f64> {
        let n = (self.length / self.crossover_spacing + 1e-9).floor() as usize;
        (1..=n)
            .map(|k| k as f64 * self.crossover_spacing)
            .filter(|&x| x < self.length - 1e-9)
            .collect()
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut rule = |ok: bool, rule: &'static str, detail: String| {
            if !ok {
                out.push(Violation { rule, detail });
            }
        };
        let all_finite = [
            self.length,
            self.diameter,
            self.inlet_pressure,
            self.outlet_pressure,
            self.inlet_flow,
            self.crossover_spacing,
            self.sound_speed,
            self.friction_2a,
        ]
        .iter()
        .all(|v| v.is_finite());
        rule(
            all_finite,
            "finite parameters",
            "passport contains NaN or infinity".into(),
        );
        rule(
            self.length > 0.0,
            "length_L > 0",
            format!("length_L = {}", self.length),
        );
        rule(
            self.diameter > 0.0,
            "diameter_d > 0",
            format!("diameter_d = {}", self.diameter),
        );
        rule(
            self.crossover_spacing > 0.0 && self.crossover_spacing <= self.length,
            "0 < crossover_spacing_l <= length_L",
            format!("crossover_spacing_l = {}", self.crossover_spacing),
        );
        rule(
            self.inlet_pressure > self.outlet_pressure && self.outlet_pressure > 0.0,
            "P1 > P2 > 0",
            format!(
                "P1 = {}, P2 = {}",
                self.inlet_pressure, self.outlet_pressure
            ),
        );
        rule(
            self.sound_speed > 0.0,
            "sound_speed_c > 0",
            format!("c = {}", self.sound_speed),
        );
        rule(
            self.friction_2a > 0.0,
            "friction_2a > 0",
            format!("2a = {}", self.friction_2a),
        );
        rule(
            self.inlet_flow > 0.0,
            "inlet_flow_G0 > 0",
            format!("G0 = {}", self.inlet_flow),
        );
        out
    }
}

/// Undamaged-line pressure at `x`: `sqrt(P1^2 - (P1^2 - P2^2) x / L)`.
pub fn stationary_pressure(spec: &GasLineSpec, x: f64) -> Result<f64> {
    check_range("x", x, 0.0, spec.length)?;
    if x == 0.0 {
        return Ok(spec.inlet_pressure);
    }
    if x == spec.length {
        return Ok(spec.outlet_pressure);
    }
    let p1 = spec.inlet_pressure * spec.inlet_pressure;
    let p2 = spec.outlet_pressure * spec.outlet_pressure;
    Ok((p1 - (p1 - p2) * x / spec.length).sqrt())
}

/// A flow history, either constant or piecewise linear in absolute time.
///
/// Outside the sampled interval the end values are held.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FlowProfile {
    Constant(f64),
    Samples(Vec<(f64, f64)>),
}

impl Default for FlowProfile {
    fn default() -> Self {
        FlowProfile::Constant(0.0)
    }
}

impl FlowProfile {
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            FlowProfile::Constant(g) => *g,
            FlowProfile::Samples(s) => interpolate(s, t),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, FlowProfile::Constant(_)) || self.max_abs() == 0.0
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            FlowProfile::Constant(g) => g.abs(),
            FlowProfile::Samples(s) => s.iter().map(|(_, g)| g.abs()).fold(0.0, f64::max),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.max_abs() == 0.0
    }

    /// Multiplies every value by `k`.
    pub fn scaled(&self, k: f64) -> FlowProfile {
        match self {
            FlowProfile::Constant(g) => FlowProfile::Constant(g * k),
            FlowProfile::Samples(s) => {
                FlowProfile::Samples(s.iter().map(|&(t, g)| (t, g * k)).collect())
            }
        }
    }

    /// Linear pieces `(t_start, t_end, value_at_start, slope)` covering `[ta, tb]`.
    pub fn pieces(&self, ta: f64, tb: f64) -> Vec<(f64, f64, f64, f64)> {
        if tb <= ta {
            return Vec::new();
        }
        match self {
            FlowProfile::Constant(g) => vec![(ta, tb, *g, 0.0)],
            FlowProfile::Samples(s) => {
                let mut cuts = vec![ta];
                cuts.extend(s.iter().map(|&(t, _)| t).filter(|&t| t > ta && t < tb));
                cuts.push(tb);
                cuts.windows(2)
                    .map(|w| {
                        let (a, b) = (w[0], w[1]);
                        let ga = self.value_at(a);
                        let gb = self.value_at(b);
                        (a, b, ga, (gb - ga) / (b - a))
                    })
                    .collect()
            }
        }
    }

    fn violations(&self, name: &'static str) -> Vec<Violation> {
        let mut out = Vec::new();
        match self {
            FlowProfile::Constant(g) => {
                if !(g.is_finite() && *g >= 0.0) {
                    out.push(Violation {
                        rule: name,
                        detail: format!("flow must be finite and >= 0, got {g}"),
                    });
                }
            }
            FlowProfile::Samples(s) => {
                if s.is_empty() {
                    out.push(Violation {
                        rule: name,
                        detail: "empty flow profile".into(),
                    });
                }
                if s.windows(2).any(|w| w[1].0 <= w[0].0) {
                    out.push(Violation {
                        rule: name,
                        detail: "flow profile times must be strictly increasing".into(),
                    });
                }
                if s.iter()
                    .any(|(t, g)| !(t.is_finite() && g.is_finite() && *g >= 0.0))
                {
                    out.push(Violation {
                        rule: name,
                        detail: "flow profile values must be finite and >= 0".into(),
                    });
                }
            }
        }
        out
    }
}

/// Pressure field sampled along the damaged line at the closure instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressureSnapshot {
    /// `(x [m], pressure [Pa])`, strictly increasing in `x`.
    pub samples: Vec<(f64, f64)>,
    /// `dP(0, t1)/dx`, Pa/m.
    #[serde(default)]
    pub grad_inlet: f64,
    /// `dP(L, t1)/dx`, Pa/m.
    #[serde(default)]
    pub grad_outlet: f64,
}

impl PressureSnapshot {
    pub fn new(samples: Vec<(f64, f64)>) -> Self {
        Self {
            samples,
            grad_inlet: 0.0,
            grad_outlet: 0.0,
        }
    }

    /// Fills in the boundary gradients from one-sided differences over the
    /// first and last sample pairs.
    pub fn estimate_boundary_gradients(mut self) -> Result<Self> {
        let n = self.samples.len();
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "boundary gradients need at least 2 samples, got {n}"
            )));
        }
        let slope = |a: (f64, f64), b: (f64, f64)| (b.1 - a.1) / (b.0 - a.0);
        self.grad_inlet = slope(self.samples[0], self.samples[1]);
        self.grad_outlet = slope(self.samples[n - 2], self.samples[n - 1]);
        Ok(self)
    }

    /// Piecewise-linear interpolation of the sampled field.
    pub fn pressure_at(&self, x: f64) -> f64 {
        interpolate(&self.samples, x)
    }

    /// Sample value at exactly `x`, if one exists.
    pub fn sample_at(&self, x: f64) -> Option<f64> {
        self.samples
            .iter()
            .find(|(sx, _)| *sx == x)
            .map(|&(_, p)| p)
    }

    fn violations(&self, length: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        let s = &self.samples;
        if s.is_empty() {
            out.push(Violation {
                rule: "snapshot not empty",
                detail: "no samples".into(),
            });
            return out;
        }
        if s.windows(2).any(|w| w[1].0 <= w[0].0) {
            out.push(Violation {
                rule: "samples strictly increasing in x",
                detail: "snapshot x values are not strictly increasing".into(),
            });
        }
        if s[0].0 != 0.0 {
            out.push(Violation {
                rule: "first x = 0",
                detail: format!("first sample at x = {}", s[0].0),
            });
        }
        let last = s[s.len() - 1].0;
        if last != length {
            out.push(Violation {
                rule: "last x = length_L",
                detail: format!("last sample at x = {last}, line length {length}"),
            });
        }
        if s.iter()
            .any(|(x, p)| !(x.is_finite() && p.is_finite() && *p > 0.0))
        {
            out.push(Violation {
                rule: "all pressures > 0",
                detail: "snapshot holds a non-positive or non-finite pressure".into(),
            });
        }
        if s.len() < 2 {
            out.push(Violation {
                rule: "at least 2 samples",
                detail: "boundary gradients cannot be estimated".into(),
            });
        }
        out
    }
}

/// Leak position, isolation bounds and the closure-time state of the damaged line.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakScenario {
    /// Left isolation valve / crossover, m.
    pub l1: f64,
    /// Leak point, m.
    pub l2: f64,
    /// Right isolation valve / crossover, m.
    pub l3: f64,
    /// Closure instant, s.
    pub t1: f64,
    /// Leak outflow at `l2`, Pa·s/m.
    pub leak_outflow: FlowProfile,
    /// Consumer draw at `x = L`, Pa·s/m.
    pub outlet_draw: FlowProfile,
    pub snapshot: PressureSnapshot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: &'static str,
    pub detail: String,
}

/// Outcome of [`validate_scenario`]; empty when the scenario is usable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "scenario is valid");
        }
        for v in &self.violations {
            writeln!(f, "- {}: {}", v.rule, v.detail)?;
        }
        Ok(())
    }
}

/// Collects every violated invariant of the passport and the scenario.
pub fn validate_scenario(spec: &GasLineSpec, scenario: &LeakScenario) -> ValidationReport {
    let mut v = spec.violations();
    let mut rule = |ok: bool, rule: &'static str, detail: String| {
        if !ok {
            v.push(Violation { rule, detail });
        }
    };
    let (l1, l2, l3) = (scenario.l1, scenario.l2, scenario.l3);
    rule(
        0.0 < l1 && l1 < l2 && l2 < l3,
        "l1 < l2 < l3",
        format!("l1 = {l1}, l2 = {l2}, l3 = {l3}"),
    );
    rule(
        l3 <= spec.length,
        "l3 <= length_L",
        format!("l3 = {l3}, length_L = {}", spec.length),
    );
    if spec.crossover_spacing > 0.0 && l3 > l1 {
        let k = (l3 - l1) / spec.crossover_spacing;
        rule(
            (k - k.round()).abs() < 1e-9 && k.round() >= 1.0,
            "l3 - l1 multiple of crossover spacing",
            format!("(l3 - l1) / spacing = {k}"),
        );
    }
    rule(scenario.t1 > 0.0, "t1 > 0", format!("t1 = {}", scenario.t1));
    v.extend(scenario.leak_outflow.violations("leak_outflow_Gleak >= 0"));
    v.extend(scenario.outlet_draw.violations("outlet_draw_Gout >= 0"));
    v.extend(scenario.snapshot.violations(spec.length));
    ValidationReport { violations: v }
}

/// Piecewise-linear lookup in `(x, y)` pairs sorted by `x`, clamped at the ends.
pub(crate) fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    match points {
        [] => f64::NAN,
        [(_, y)] => *y,
        _ => {
            if x <= points[0].0 {
                return points[0].1;
            }
            let last = points[points.len() - 1];
            if x >= last.0 {
                return last.1;
            }
            let i = points.partition_point(|p| p.0 <= x);
            let (xa, ya) = points[i - 1];
            let (xb, yb) = points[i];
            if x == xa {
                ya
            } else {
                ya + (yb - ya) * (x - xa) / (xb - xa)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioDocument;

    fn published() -> (GasLineSpec, LeakScenario) {
        let doc = ScenarioDocument::published();
        (doc.spec, doc.leak_scenario())
    }

    #[test]
    fn stationary_endpoints_are_exact() {
        let (spec, _) = published();
        assert_eq!(stationary_pressure(&spec, 0.0).unwrap(), 14.0e4);
        assert_eq!(stationary_pressure(&spec, spec.length).unwrap(), 11.0e4);
    }

    #[test]
    fn stationary_matches_published_profile_points() {
        let (spec, _) = published();
        let p10 = stationary_pressure(&spec, 10_000.0).unwrap();
        let p15 = stationary_pressure(&spec, 15_000.0).unwrap();
        assert!((p10 / 1e4 - 13.08).abs() < 0.005, "{p10}");
        assert!((p15 / 1e4 - 12.59).abs() < 0.005, "{p15}");
    }

    #[test]
    fn stationary_rejects_points_off_the_line() {
        let (spec, _) = published();
        assert!(matches!(
            stationary_pressure(&spec, -1.0),
            Err(Error::Domain { .. })
        ));
        assert!(stationary_pressure(&spec, 30_001.0).is_err());
    }

    #[test]
    fn gradients_from_one_sided_differences() {
        let (_, sc) = published();
        let snap = PressureSnapshot::new(sc.snapshot.samples.clone())
            .estimate_boundary_gradients()
            .unwrap();
        assert!((snap.grad_inlet - (-1.08)).abs() < 1e-12);
        assert!((snap.grad_outlet - (-0.92)).abs() < 1e-12);
    }

    #[test]
    fn flat_field_has_zero_gradient() {
        let snap = PressureSnapshot::new(vec![(0.0, 1e5), (100.0, 1e5)])
            .estimate_boundary_gradients()
            .unwrap();
        assert_eq!(snap.grad_inlet, 0.0);
        assert_eq!(snap.grad_outlet, 0.0);
    }

    #[test]
    fn gradients_need_two_samples() {
        let err = PressureSnapshot::new(vec![(0.0, 1e5)]).estimate_boundary_gradients();
        assert!(matches!(err, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn published_scenario_is_valid() {
        let (spec, sc) = published();
        let report = validate_scenario(&spec, &sc);
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn degenerate_ordering_is_reported() {
        let (spec, mut sc) = published();
        sc.l3 = sc.l1;
        let report = validate_scenario(&spec, &sc);
        assert!(report.has("l1 < l2 < l3"), "{report}");
    }

    #[test]
    fn missing_inlet_sample_is_reported() {
        let (spec, mut sc) = published();
        sc.snapshot.samples.remove(0);
        let report = validate_scenario(&spec, &sc);
        assert!(report.has("first x = 0"), "{report}");
    }

    #[test]
    fn validation_reports_everything_at_once() {
        let (mut spec, mut sc) = published();
        spec.friction_2a = 0.0;
        sc.t1 = -1.0;
        sc.leak_outflow = FlowProfile::Constant(-2.0);
        let report = validate_scenario(&spec, &sc);
        assert!(report.has("friction_2a > 0"));
        assert!(report.has("t1 > 0"));
        assert!(report.has("leak_outflow_Gleak >= 0"));
    }

    #[test]
    fn crossovers_sit_inside_the_line() {
        let (spec, _) = published();
        assert_eq!(spec.crossover_positions(), vec![10_000.0, 20_000.0]);
    }

    #[test]
    fn flow_profile_pieces_cover_interval() {
        let f = FlowProfile::Samples(vec![(0.0, 0.0), (10.0, 10.0), (20.0, 10.0)]);
        let p = f.pieces(5.0, 15.0);
        assert_eq!(p.len(), 2);
        assert_eq!(p[0], (5.0, 10.0, 5.0, 1.0));
        assert_eq!(p[1], (10.0, 15.0, 10.0, 0.0));
        assert_eq!(f.value_at(100.0), 10.0);
    }
}
