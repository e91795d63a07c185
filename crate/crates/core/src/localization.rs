//! Isolated-section localization from line-end telemetry.
//!
//! With the Euler-constant simplification the inlet rise `Z` after the
//! closure satisfies the quadratic
//!
//! ```text
//! Z1 l1² + Z l1 - 2c²G0(1-C)(t-t1) = 0,     Z1 = 2aG0 (1/3 + 2/π²)
//! ```
//!
//! whose positive root bounds the damaged section from the left. The right
//! bound sits one crossover spacing further.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::domain::GasLineSpec;
use crate::error::{check_range, Error, Result};
use crate::transient::EULER_C;

/// Default compression-ratio bound of the activation condition.
pub const DEFAULT_EPS_MAX: f64 = 1.3;

/// Consecutive samples a closure signature must persist for.
pub const DEFAULT_CONFIRMATION: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationParams {
    pub euler_c: f64,
    /// Inlet pressure rise since the closure, Pa.
    pub z: f64,
    /// `2aG0 (1/3 + 2/π²)`, Pa/m.
    pub z1: f64,
    pub eps_max: f64,
}

impl LocalizationParams {
    pub fn new(spec: &GasLineSpec, z: f64, eps_max: f64) -> Result<Self> {
        if !(eps_max > 1.0 && eps_max <= 1.5) {
            return Err(Error::Domain {
                quantity: "eps_max",
                value: eps_max,
                lo: 1.0,
                hi: 1.5,
            });
        }
        if z < 0.0 {
            return Err(Error::NegativeRise(z));
        }
        Ok(Self {
            euler_c: EULER_C,
            z,
            z1: z1_coefficient(spec),
            eps_max,
        })
    }
}

/// `Z1 = 2aG0 (1/3 + 2/π²)`.
pub fn z1_coefficient(spec: &GasLineSpec) -> f64 {
    spec.friction_2a * spec.inlet_flow * (1.0 / 3.0 + 2.0 / (PI * PI))
}

/// Constant term `2c²G0(1-C)(t-t1)` of the localization quadratic.
fn drive(spec: &GasLineSpec, elapsed: f64) -> f64 {
    2.0 * spec.c2() * spec.inlet_flow * (1.0 - EULER_C) * elapsed
}

/// Left side of the quadratic at `l1`. Zero at the true root.
pub fn quadratic_residual(spec: &GasLineSpec, z: f64, elapsed: f64, l1: f64) -> f64 {
    z1_coefficient(spec) * l1 * l1 + z * l1 - drive(spec, elapsed)
}

/// Residual scaled by the largest term of the quadratic.
pub fn relative_residual(spec: &GasLineSpec, z: f64, elapsed: f64, l1: f64) -> f64 {
    let scale = (z1_coefficient(spec) * l1 * l1)
        .abs()
        .max((z * l1).abs())
        .max(drive(spec, elapsed).abs());
    if scale == 0.0 {
        return 0.0;
    }
    quadratic_residual(spec, z, elapsed, l1).abs() / scale
}

/// Positive root for a given rise `z` and elapsed time.
pub fn positive_root(spec: &GasLineSpec, z: f64, elapsed: f64) -> Result<f64> {
    if z < 0.0 {
        return Err(Error::NegativeRise(z));
    }
    check_range("t - t1", elapsed, 0.0, f64::INFINITY)?;
    let z1 = z1_coefficient(spec);
    let k = drive(spec, elapsed);
    if k == 0.0 {
        return Ok(0.0);
    }
    // (sqrt(Z² + 4 Z1 K) - Z) / 2Z1, rewritten to avoid cancellation for large Z
    let disc = (z * z + 4.0 * z1 * k).sqrt();
    Ok(2.0 * k / (disc + z))
}

/// Left bound of the isolated section from two inlet readings.
pub fn locate_l1(p0_now: f64, p0_t1: f64, t: f64, t1: f64, spec: &GasLineSpec) -> Result<f64> {
    if t < t1 || !t.is_finite() {
        return Err(Error::Domain {
            quantity: "t",
            value: t,
            lo: t1,
            hi: f64::INFINITY,
        });
    }
    positive_root(spec, p0_now - p0_t1, t - t1)
}

/// Right bound, one crossover spacing past the left one.
pub fn locate_l3(l1_hat: f64, spacing: f64) -> Result<f64> {
    check_range("l1_hat", l1_hat, 0.0, f64::INFINITY)?;
    if !(spacing > 0.0) {
        return Err(Error::Domain {
            quantity: "spacing",
            value: spacing,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    Ok(l1_hat + spacing)
}

/// Nearest crossover to `x`, restricted to crossovers that leave room for
/// the right bound inside the line.
pub fn snap_to_crossover(spec: &GasLineSpec, x: f64) -> Option<f64> {
    let crossovers = spec.crossover_positions();
    crossovers
        .iter()
        .copied()
        .filter(|&c| c + spec.crossover_spacing < spec.length - 1e-9)
        .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationEstimate {
    pub z: f64,
    pub z1: f64,
    /// Elapsed time since the closure used for the estimate, s.
    pub elapsed: f64,
    /// Positive root of the quadratic, m.
    pub l1_raw: f64,
    pub l3_raw: f64,
    /// Crossover nearest to the raw bound, used for valve addressing.
    pub l1_hat: f64,
    pub l3_hat: f64,
    /// Quadratic residual at the raw root, Pa·m.
    pub residual: f64,
    /// Time the estimate was made, s.
    pub detection_time: f64,
}

impl LocalizationEstimate {
    /// Solves for the bounds from the inlet readings at `t1` and `t`.
    pub fn compute(spec: &GasLineSpec, p0_now: f64, p0_t1: f64, t: f64, t1: f64) -> Result<Self> {
        let l1_raw = locate_l1(p0_now, p0_t1, t, t1, spec)?;
        let z = p0_now - p0_t1;
        let l1_hat = snap_to_crossover(spec, l1_raw).ok_or_else(|| {
            Error::Config("the line has no crossover with a right neighbour".into())
        })?;
        Ok(Self {
            z,
            z1: z1_coefficient(spec),
            elapsed: t - t1,
            l1_raw,
            l3_raw: locate_l3(l1_raw, spec.crossover_spacing)?,
            l1_hat,
            l3_hat: locate_l3(l1_hat, spec.crossover_spacing)?,
            residual: quadratic_residual(spec, z, t - t1, l1_raw),
            detection_time: t,
        })
    }

    /// `|l1_raw - truth| / truth`.
    pub fn relative_error_vs_truth(&self, truth_l1: f64) -> f64 {
        (self.l1_raw - truth_l1).abs() / truth_l1
    }
}

/// Earliest time at which the inlet is above `p1 + deadband` and the outlet
/// below `p2 - deadband`, held for `confirm` consecutive samples.
pub fn detect_closure_signature(
    inlet: &[(f64, f64)],
    outlet: &[(f64, f64)],
    p1: f64,
    p2: f64,
    confirm: usize,
    deadband: f64,
) -> Result<Option<f64>> {
    if inlet.is_empty() || outlet.is_empty() {
        return Err(Error::InsufficientData(
            "closure detection needs both end series".into(),
        ));
    }
    if inlet.len() != outlet.len() || inlet.iter().zip(outlet).any(|(a, b)| a.0 != b.0) {
        return Err(Error::Config(
            "inlet and outlet series are not on a common time grid".into(),
        ));
    }
    let confirm = confirm.max(1);
    let mut run_start = None;
    let mut run = 0;
    for (i, (&(t, pin), &(_, pout))) in inlet.iter().zip(outlet).enumerate() {
        if pin > p1 + deadband && pout < p2 - deadband {
            if run == 0 {
                run_start = Some(i);
            }
            run += 1;
            if run >= confirm {
                return Ok(run_start.map(|s| inlet[s].0).or(Some(t)));
            }
        } else {
            run = 0;
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Allow,
    Deny,
}

/// Outcome of the connecting-valve activation condition with the values it
/// was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationCheck {
    pub verdict: Verdict,
    /// `P(0,t) / P1`.
    pub inlet_ratio: f64,
    /// `P_damaged(l1) / P_reference(l1)`.
    pub pressure_ratio: f64,
    pub inlet_ok: bool,
    pub pressure_ok: bool,
    pub eps_max: f64,
}

/// Allows activation iff `P(0,t)/P1 < eps_max` and the damaged line at `l1`
/// sits strictly above the reference pressure.
pub fn check_activation(
    p0_now: f64,
    p1_nominal: f64,
    p_l1_damaged: f64,
    p_l1_reference: f64,
    eps_max: f64,
) -> ActivationCheck {
    let inlet_ratio = p0_now / p1_nominal;
    let inlet_ok = inlet_ratio < eps_max;
    let pressure_ok = p_l1_damaged > p_l1_reference;
    ActivationCheck {
        verdict: if inlet_ok && pressure_ok {
            Verdict::Allow
        } else {
            Verdict::Deny
        },
        inlet_ratio,
        pressure_ratio: p_l1_damaged / p_l1_reference,
        inlet_ok,
        pressure_ok,
        eps_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioDocument;
    use proptest::prelude::*;

    fn spec() -> GasLineSpec {
        ScenarioDocument::published().spec
    }

    fn bisect(spec: &GasLineSpec, z: f64, elapsed: f64) -> f64 {
        let f = |l: f64| quadratic_residual(spec, z, elapsed, l);
        let (mut lo, mut hi) = (0.0, spec.length);
        while f(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn worked_example_in_si() {
        let s = spec();
        let l1 = locate_l1(14.58e4, 13.36e4, 420.0, 300.0, &s).unwrap();
        assert!((l1 - 8809.7).abs() < 1.0, "{l1}");
        assert_eq!(locate_l3(l1, 1e4).unwrap(), l1 + 1e4);
        assert!((l1 - 1e4).abs() / 1e4 <= 0.12);
        let est = LocalizationEstimate::compute(&s, 14.58e4, 13.36e4, 420.0, 300.0).unwrap();
        assert_eq!(est.l1_hat, 1e4);
        assert_eq!(est.l3_hat, 2e4);
        assert!((est.z1 - 0.5359757).abs() < 1e-6);
    }

    #[test]
    fn zero_elapsed_time_gives_zero() {
        assert_eq!(
            locate_l1(14.58e4, 13.36e4, 300.0, 300.0, &spec()).unwrap(),
            0.0
        );
    }

    #[test]
    fn zero_rise_has_closed_form() {
        let s = spec();
        let l1 = locate_l1(13.36e4, 13.36e4, 420.0, 300.0, &s).unwrap();
        let closed =
            (2.0 * s.c2() * s.inlet_flow * (1.0 - EULER_C) * 120.0 / z1_coefficient(&s)).sqrt();
        assert!((l1 / closed - 1.0).abs() < 1e-12);
        assert!((l1 - 16_677.5).abs() < 1.0);
    }

    #[test]
    fn precondition_violations() {
        let s = spec();
        assert!(matches!(
            locate_l1(13e4, 13.36e4, 420.0, 300.0, &s),
            Err(Error::NegativeRise(_))
        ));
        assert!(matches!(
            locate_l1(14e4, 13.36e4, 200.0, 300.0, &s),
            Err(Error::Domain { .. })
        ));
        assert!(LocalizationParams::new(&s, 1.0, 1.6).is_err());
        assert!(LocalizationParams::new(&s, -1.0, 1.3).is_err());
    }

    #[test]
    fn l3_is_one_spacing_right() {
        assert_eq!(locate_l3(0.9e4, 1e4).unwrap(), 1.9e4);
        assert_eq!(locate_l3(0.0, 1e4).unwrap(), 1e4);
        assert!(locate_l3(1.0, 0.0).is_err());
    }

    #[test]
    fn snapping_keeps_a_right_neighbour() {
        let s = spec();
        assert_eq!(snap_to_crossover(&s, 7_700.0), Some(1e4));
        assert_eq!(snap_to_crossover(&s, 200.0), Some(1e4));
        // 20 km has no crossover to its right inside a 30 km line
        assert_eq!(snap_to_crossover(&s, 21_000.0), Some(1e4));
    }

    #[test]
    fn activation_worked_check() {
        let v = check_activation(14.58e4, 14e4, 12.91e4, 12.19e4, 1.3);
        assert_eq!(v.verdict, Verdict::Allow);
        assert!((v.inlet_ratio - 1.0414).abs() < 1e-4);
    }

    #[test]
    fn activation_denials() {
        assert_eq!(
            check_activation(14.58e4, 14e4, 12.19e4, 12.19e4, 1.3).verdict,
            Verdict::Deny
        );
        let v = check_activation(1.35 * 14e4, 14e4, 20e4, 10e4, 1.3);
        assert_eq!(v.verdict, Verdict::Deny);
        assert!(!v.inlet_ok && v.pressure_ok);
    }

    fn series(values: &[f64]) -> Vec<(f64, f64)> {
        values
            .iter()
            .enumerate()
            .map(|(i, &p)| (i as f64 * 10.0, p))
            .collect()
    }

    #[test]
    fn signature_needs_opposite_moves() {
        let inlet = series(&[13.9e4, 14.05e4, 14.1e4, 14.2e4]);
        let outlet = series(&[11.0e4, 10.9e4, 10.8e4, 10.7e4]);
        assert_eq!(
            detect_closure_signature(&inlet, &outlet, 14e4, 11e4, 2, 0.0).unwrap(),
            Some(10.0)
        );

        let flat_in = series(&[14e4; 4]);
        let flat_out = series(&[11e4; 4]);
        assert_eq!(
            detect_closure_signature(&flat_in, &flat_out, 14e4, 11e4, 2, 0.0).unwrap(),
            None
        );

        let rising = series(&[11.0e4, 11.1e4, 11.2e4, 11.3e4]);
        assert_eq!(
            detect_closure_signature(&inlet, &rising, 14e4, 11e4, 2, 0.0).unwrap(),
            None
        );
    }

    #[test]
    fn single_sample_spikes_are_not_confirmed() {
        let inlet = series(&[13.9e4, 14.2e4, 13.9e4, 14.2e4]);
        let outlet = series(&[10.9e4; 4]);
        assert_eq!(
            detect_closure_signature(&inlet, &outlet, 14e4, 11e4, 2, 0.0).unwrap(),
            None
        );
        assert!(detect_closure_signature(&[], &outlet, 14e4, 11e4, 2, 0.0).is_err());
    }

    fn any_spec() -> impl Strategy<Value = GasLineSpec> {
        (200.0..600.0f64, 0.01..1.0f64, 1.0..50.0f64).prop_map(|(c, a2, g0)| GasLineSpec {
            sound_speed: c,
            friction_2a: a2,
            inlet_flow: g0,
            ..spec()
        })
    }

    proptest! {
        #[test]
        fn root_zeroes_the_quadratic(s in any_spec(), z in 0.0..1e6f64, dt in 1.0..3600.0f64) {
            let l = positive_root(&s, z, dt).unwrap();
            prop_assert!(l > 0.0);
            prop_assert!(relative_residual(&s, z, dt, l) <= 1e-9);
            let b = bisect(&s, z, dt);
            prop_assert!((l - b).abs() <= 1e-6 * b);
        }

        #[test]
        fn root_is_monotone(s in any_spec(), z in 0.0..1e6f64, dz in 1.0..1e4f64, dt in 1.0..3600.0f64, ddt in 1.0..600.0f64) {
            let l = positive_root(&s, z, dt).unwrap();
            prop_assert!(positive_root(&s, z + dz, dt).unwrap() < l);
            prop_assert!(positive_root(&s, z, dt + ddt).unwrap() > l);
            let more_flow = GasLineSpec { inlet_flow: s.inlet_flow * 1.5, ..s };
            prop_assert!(positive_root(&more_flow, z, dt).unwrap() > l);
        }

        #[test]
        fn activation_is_monotone(p0 in 1e5..2e5f64, dp0 in 0.0..5e4f64, pd in 5e4..2e5f64, dpd in 0.0..5e4f64, pr in 5e4..2e5f64) {
            let base = check_activation(p0, 1.4e5, pd, pr, 1.3);
            let higher_damaged = check_activation(p0, 1.4e5, pd + dpd, pr, 1.3);
            if base.verdict == Verdict::Allow {
                prop_assert_eq!(higher_damaged.verdict, Verdict::Allow);
            }
            let higher_inlet = check_activation(p0 + dp0, 1.4e5, pd, pr, 1.3);
            if base.verdict == Verdict::Deny {
                prop_assert_eq!(higher_inlet.verdict, Verdict::Deny);
            }
        }

        #[test]
        fn no_detection_without_joint_signs(
            ins in proptest::collection::vec(1e5..2e5f64, 1..40),
            outs in proptest::collection::vec(5e4..1.5e5f64, 1..40),
        ) {
            let n = ins.len().min(outs.len());
            let inlet: Vec<_> = ins[..n].iter().enumerate().map(|(i, &p)| (i as f64, p)).collect();
            // force every sample to violate at least one condition
            let outlet: Vec<_> = outs[..n].iter().enumerate().map(|(i, &p)| {
                (i as f64, if inlet[i].1 > 1.4e5 { p.max(1.1e5) } else { p })
            }).collect();
            prop_assert_eq!(detect_closure_signature(&inlet, &outlet, 1.4e5, 1.1e5, 2, 0.0).unwrap(), None);
        }
    }
}
