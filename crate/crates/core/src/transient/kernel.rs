//! Response of a sealed (zero-flux) section to a point flow source.
//!
//! A source of strength `q(τ)` (Pa·s/m, positive = inflow) at `x0` in a
//! section of length `len` raises the pressure at `x` by
//!
//! ```text
//! (c²/len) ∫ q(τ) [1 + 2 Σ cos(nπ x0/len) cos(nπ x/len) e^{-α n² (t-τ)}] dτ
//! ```
//!
//! with `α = π² c² / (2a len²)`. Every term of the post-closure pressure
//! fields is of this form. The time integral is done in closed form for
//! piecewise-linear `q`, and the slowly convergent `Σ cos cos / n²` part is
//! summed exactly, so the truncated remainder decays like `e^{-α n² Δt}`.

use std::f64::consts::PI;

use crate::domain::FlowProfile;

/// Truncation policy for the mode sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPolicy {
    /// Hard cap on the number of modes.
    pub cap: usize,
    /// Stop once the bound on the next term drops below this, Pa.
    pub tolerance: f64,
}

impl Default for SeriesPolicy {
    fn default() -> Self {
        Self {
            cap: 200,
            tolerance: 1.0,
        }
    }
}

/// Value of a truncated sum plus its truncation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub terms: usize,
    pub converged: bool,
}

impl SeriesValue {
    pub(crate) fn exact(value: f64) -> Self {
        Self {
            value,
            terms: 0,
            converged: true,
        }
    }
}

/// `Σ_{n≥1} cos(nθ)/n²`, valid for any real `θ`.
pub fn cosine_square_sum(theta: f64) -> f64 {
    let th = theta.abs().rem_euclid(2.0 * PI);
    PI * PI / 6.0 - PI * th / 2.0 + th * th / 4.0
}

/// A flow source pinned at a point of a section.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSource {
    /// Offset from the section's left end, m.
    pub offset: f64,
    /// Inflow history; negative values are sinks.
    pub flow: FlowProfile,
    pub label: &'static str,
}

/// Geometry and diffusion constants shared by all sources of one section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionKernel {
    pub len: f64,
    pub c2: f64,
    /// `α = π² c² / (2a len²)`, the first-mode decay rate, 1/s.
    pub alpha: f64,
}

impl SectionKernel {
    pub fn new(len: f64, c2: f64, friction_2a: f64) -> Self {
        Self {
            len,
            c2,
            alpha: PI * PI * c2 / (friction_2a * len * len),
        }
    }

    /// Pressure rise at offset `x` and time `t` due to `source`, which
    /// switched on at `t_start`.
    pub fn response(
        &self,
        source: &PointSource,
        x: f64,
        t_start: f64,
        t: f64,
        policy: SeriesPolicy,
    ) -> SeriesValue {
        let elapsed = t - t_start;
        if elapsed <= 0.0 || source.flow.is_zero() {
            return SeriesValue::exact(0.0);
        }
        let scale = self.c2 / self.len;
        let pieces = source.flow.pieces(t_start, t);
        let q_start = source.flow.value_at(t_start);
        let q_now = source.flow.value_at(t);

        // uniform (n = 0) mode: the section's linepack change
        let uniform: f64 = pieces
            .iter()
            .map(|&(a, b, qa, s)| (b - a) * (qa + 0.5 * s * (b - a)))
            .sum();

        // Σ 2 cos cos / α_n, summed in closed form
        let ta = PI * (x - source.offset) / self.len;
        let tb = PI * (x + source.offset) / self.len;
        let steady = (cosine_square_sum(ta) + cosine_square_sum(tb)) / self.alpha;

        // decaying remainder, truncated
        let mut transient = 0.0;
        let mut terms = 0;
        let mut converged = false;
        for n in 1..=policy.cap {
            let nf = n as f64;
            let an = self.alpha * nf * nf;
            let mut decay = q_start * (-an * elapsed).exp() / an;
            for &(a, b, _, s) in &pieces {
                if s != 0.0 {
                    let eb = (-an * (t - b)).exp();
                    let ea = (-an * (t - a)).exp();
                    decay += s * (eb - ea) / (an * an);
                }
            }
            let bound = 2.0 * scale * decay.abs();
            let cc = (nf * PI * source.offset / self.len).cos() * (nf * PI * x / self.len).cos();
            transient += 2.0 * cc * decay;
            terms = n;
            if bound < policy.tolerance {
                converged = true;
                break;
            }
        }

        SeriesValue {
            value: scale * (uniform + q_now * steady - transient),
            terms,
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_cosine_square_sum(theta: f64) -> f64 {
        (1..200_000)
            .map(|n| {
                let n = n as f64;
                (n * theta).cos() / (n * n)
            })
            .sum()
    }

    #[test]
    fn bernoulli_closed_form_matches_brute_sum() {
        for &th in &[0.0, 0.3, 1.0, PI, 4.0, 2.0 * PI - 0.1, -1.2] {
            let exact = cosine_square_sum(th);
            let brute = brute_cosine_square_sum(th);
            assert!((exact - brute).abs() < 1e-4, "θ={th}: {exact} vs {brute}");
        }
    }

    /// Direct term-by-term evaluation with numerically integrated time kernel.
    fn brute_response(k: &SectionKernel, x0: f64, q: f64, x: f64, elapsed: f64) -> f64 {
        let modes = 4000;
        let mut sum = elapsed;
        for n in 1..=modes {
            let nf = n as f64;
            let an = k.alpha * nf * nf;
            let integral = (1.0 - (-an * elapsed).exp()) / an;
            sum += 2.0 * (nf * PI * x0 / k.len).cos() * (nf * PI * x / k.len).cos() * integral;
        }
        k.c2 / k.len * q * sum
    }

    #[test]
    fn closed_form_agrees_with_brute_force_modes() {
        let k = SectionKernel::new(10_000.0, 383.3f64.powi(2), 0.1);
        let src = PointSource {
            offset: 4_500.0,
            flow: FlowProfile::Constant(-5.0),
            label: "leak",
        };
        for &(x, dt) in &[
            (0.0, 30.0),
            (4_500.0, 5.0),
            (10_000.0, 600.0),
            (7_000.0, 120.0),
        ] {
            let fast = k.response(
                &src,
                x,
                0.0,
                dt,
                SeriesPolicy {
                    cap: 200,
                    tolerance: 1e-6,
                },
            );
            let brute = brute_response(&k, src.offset, -5.0, x, dt);
            assert!(fast.converged);
            // the brute sum itself carries a ~1/modes tail at x = x0
            assert!(
                (fast.value - brute).abs() < 1.0,
                "x={x} dt={dt}: {} vs {brute}",
                fast.value
            );
        }
    }

    #[test]
    fn zero_elapsed_time_is_exactly_zero() {
        let k = SectionKernel::new(10_000.0, 1.0e5, 0.1);
        let src = PointSource {
            offset: 0.0,
            flow: FlowProfile::Constant(10.0),
            label: "in",
        };
        assert_eq!(
            k.response(&src, 0.0, 300.0, 300.0, SeriesPolicy::default())
                .value,
            0.0
        );
    }

    #[test]
    fn ramp_source_matches_constant_pieces() {
        // a ramp from 0 to 10 over 100 s, then flat, against a fine staircase
        let k = SectionKernel::new(10_000.0, 383.3f64.powi(2), 0.1);
        let ramp = PointSource {
            offset: 0.0,
            flow: FlowProfile::Samples(vec![(0.0, 0.0), (100.0, 10.0)]),
            label: "ramp",
        };
        let policy = SeriesPolicy {
            cap: 400,
            tolerance: 1e-6,
        };
        let smooth = k.response(&ramp, 2_000.0, 0.0, 150.0, policy).value;
        let steps = 2000;
        let mut staircase = 0.0;
        for i in 0..steps {
            let a = 100.0 * i as f64 / steps as f64;
            let b = 100.0 * (i + 1) as f64 / steps as f64;
            let q = 10.0 * (a + b) / 200.0;
            let on = PointSource {
                offset: 0.0,
                flow: FlowProfile::Constant(q),
                label: "",
            };
            staircase += k.response(&on, 2_000.0, a, 150.0, policy).value
                - k.response(&on, 2_000.0, b, 150.0, policy).value;
        }
        let tail = PointSource {
            offset: 0.0,
            flow: FlowProfile::Constant(10.0),
            label: "",
        };
        staircase += k.response(&tail, 2_000.0, 100.0, 150.0, policy).value;
        assert!((smooth - staircase).abs() < 1.0, "{smooth} vs {staircase}");
    }
}
