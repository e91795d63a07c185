use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::message::TelemetryMessage;
use crate::domain::GasLineSpec;
use crate::error::{Error, Result};
use crate::transient::table::km_label;
use crate::valves::{LineId, ValveEvent, ValveRegistry};

/// Default pressure sensor period, s.
pub const PRESSURE_PERIOD_S: f64 = 10.0;
/// Default position sensor polling period, s.
pub const POSITION_PERIOD_S: f64 = 1.0;

/// Anything that can report line pressure at a point and time.
pub trait PressureView {
    fn line_pressure(&self, line: LineId, x: f64, t: f64) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorConfig {
    pub id: String,
    pub x: f64,
    pub line: LineId,
    pub sample_period: f64,
    /// Standard deviation of additive Gaussian noise, Pa.
    pub noise_sigma: f64,
}

/// Id of the pressure sensor on `line` at `x`, e.g. `pt-1-14.5`.
pub fn pressure_sensor_id(line: LineId, x: f64) -> String {
    let l = match line {
        LineId::Line1 => "1".to_string(),
        LineId::Line2 => "2".to_string(),
        LineId::Crossover(k) => format!("x{k}"),
    };
    format!("pt-{l}-{}", km_label(x))
}

/// Sensors on both lines at the ends and at every crossover.
pub fn default_layout(spec: &GasLineSpec, noise_sigma: f64) -> Vec<SensorConfig> {
    let mut xs = vec![0.0];
    xs.extend(spec.crossover_positions());
    xs.push(spec.length);
    let mut out = Vec::new();
    for line in [LineId::Line1, LineId::Line2] {
        for &x in &xs {
            out.push(SensorConfig {
                id: pressure_sensor_id(line, x),
                x,
                line,
                sample_period: PRESSURE_PERIOD_S,
                noise_sigma,
            });
        }
    }
    out
}

/// Pressure sensors with their schedules and one seeded noise stream.
#[derive(Debug, Clone)]
pub struct SensorArray {
    configs: Vec<SensorConfig>,
    next_due: Vec<f64>,
    rng: ChaCha8Rng,
}

impl SensorArray {
    pub fn new(configs: Vec<SensorConfig>, spec: &GasLineSpec, seed: u64) -> Result<Self> {
        for c in &configs {
            if !(c.sample_period > 0.0) {
                return Err(Error::Config(format!(
                    "sensor `{}` needs a positive period",
                    c.id
                )));
            }
            if !(c.noise_sigma >= 0.0) {
                return Err(Error::Config(format!(
                    "sensor `{}` has negative noise",
                    c.id
                )));
            }
            if !matches!(c.line, LineId::Line1 | LineId::Line2)
                || !(0.0..=spec.length).contains(&c.x)
            {
                return Err(Error::Config(format!(
                    "sensor `{}` at x = {} is outside {}",
                    c.id, c.x, c.line
                )));
            }
        }
        let next_due = vec![0.0; configs.len()];
        Ok(Self {
            configs,
            next_due,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn configs(&self) -> &[SensorConfig] {
        &self.configs
    }

    /// One `pressure_sample` per sensor due at `t`, in configuration order.
    pub fn sample(&mut self, world: &impl PressureView, t: f64) -> Result<Vec<TelemetryMessage>> {
        let mut out = Vec::new();
        for (c, due) in self.configs.iter().zip(self.next_due.iter_mut()) {
            if t + 1e-9 < *due {
                continue;
            }
            while *due <= t + 1e-9 {
                *due += c.sample_period;
            }
            let mut p = world.line_pressure(c.line, c.x, t)?;
            if c.noise_sigma > 0.0 {
                let n = Normal::new(0.0, c.noise_sigma).expect("sigma is finite and positive");
                p += n.sample(&mut self.rng);
            }
            out.push(TelemetryMessage::pressure_sample(
                c.id.clone(),
                c.line,
                c.x,
                t,
                p,
            ));
        }
        Ok(out)
    }
}

/// Valve position monitors, polled on a fixed period. A state change is
/// reported at the first poll after it happened, with its own time in
/// `changed_at_s`.
#[derive(Debug, Clone)]
pub struct PositionSensors {
    period: f64,
    next_due: f64,
    pending: BTreeMap<String, f64>,
}

impl Default for PositionSensors {
    fn default() -> Self {
        Self::new(POSITION_PERIOD_S)
    }
}

impl PositionSensors {
    pub fn new(period: f64) -> Self {
        Self {
            period,
            next_due: 0.0,
            pending: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, event: &ValveEvent) {
        self.pending.insert(event.valve_id.clone(), event.time_s);
    }

    pub fn poll(&mut self, registry: &ValveRegistry, t: f64) -> Vec<TelemetryMessage> {
        if t + 1e-9 < self.next_due {
            return vec![];
        }
        while self.next_due <= t + 1e-9 {
            self.next_due += self.period;
        }
        let ready: Vec<(String, f64)> = self
            .pending
            .iter()
            .filter(|(_, &at)| at < t)
            .map(|(id, &at)| (id.clone(), at))
            .collect();
        let mut out = Vec::new();
        for (id, at) in ready {
            self.pending.remove(&id);
            if let Ok(v) = registry.get(&id) {
                out.push(TelemetryMessage::valve_position(
                    id,
                    v.line,
                    v.position_x,
                    t,
                    v.state,
                    at,
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioDocument;
    use crate::valves::{Cause, ValveState};

    struct Flat(f64);

    impl PressureView for Flat {
        fn line_pressure(&self, _: LineId, _: f64, _: f64) -> Result<f64> {
            Ok(self.0)
        }
    }

    fn spec() -> GasLineSpec {
        ScenarioDocument::published().spec
    }

    #[test]
    fn layout_covers_ends_and_crossovers() {
        let ids: Vec<String> = default_layout(&spec(), 0.0)
            .into_iter()
            .map(|c| c.id)
            .collect();
        assert_eq!(
            ids,
            [
                "pt-1-0", "pt-1-10", "pt-1-20", "pt-1-30", "pt-2-0", "pt-2-10", "pt-2-20",
                "pt-2-30"
            ]
        );
    }

    #[test]
    fn sampling_follows_the_period() {
        let mut a = SensorArray::new(default_layout(&spec(), 0.0), &spec(), 1).unwrap();
        let w = Flat(1.25e5);
        assert_eq!(a.sample(&w, 0.0).unwrap().len(), 8);
        assert!(a.sample(&w, 1.0).unwrap().is_empty());
        let at10 = a.sample(&w, 10.0).unwrap();
        assert_eq!(at10.len(), 8);
        assert!(at10.iter().all(|m| m.pressure_pa == Some(1.25e5)));
    }

    #[test]
    fn noise_is_reproducible_per_seed() {
        let run = |seed| {
            let mut a = SensorArray::new(default_layout(&spec(), 50.0), &spec(), seed).unwrap();
            let w = Flat(1e5);
            (0..5)
                .flat_map(|i| a.sample(&w, i as f64 * 10.0).unwrap())
                .map(|m| m.pressure_pa.unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
        assert!(run(7).iter().any(|&p| p != 1e5));
    }

    #[test]
    fn sensors_off_the_line_are_rejected() {
        let mut cfg = default_layout(&spec(), 0.0);
        cfg[0].x = 31_000.0;
        assert!(matches!(
            SensorArray::new(cfg, &spec(), 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn position_changes_are_reported_once() {
        let reg = ValveRegistry::for_spec(&spec(), Some((1, 2)));
        let mut ps = PositionSensors::default();
        ps.record(&ValveEvent {
            time_s: 300.0,
            valve_id: "sv-1-1".into(),
            cause: Cause::DropRateTrigger,
            from_state: ValveState::Open,
            to_state: ValveState::Closed,
        });
        assert!(ps.poll(&reg, 300.0).is_empty());
        let msgs = ps.poll(&reg, 301.0);
        assert_eq!(msgs.len(), 1);
        assert_eq!(msgs[0].changed_at(), Some(300.0));
        assert!(ps.poll(&reg, 302.0).is_empty());
    }
}
