use crate::domain::{stationary_pressure, GasLineSpec, LeakScenario};
use crate::error::Result;
use crate::telemetry::PressureView;
use crate::transient::{Section, TransientModel};
use crate::valves::LineId;

/// Ground truth the sensors sample.
///
/// Line 2 stays stationary. Line 1 is stationary at `t = 0`, moves
/// linearly in time to the snapshot at `t1` (scaffolding for the
/// pre-closure leak phase, not a physical model), and follows the
/// post-closure fields afterwards. A sensor sitting on a closed valve reads
/// the outer section.
#[derive(Debug, Clone)]
pub struct World {
    model: TransientModel,
}

impl World {
    pub fn new(spec: GasLineSpec, scenario: LeakScenario) -> Result<Self> {
        Ok(Self {
            model: TransientModel::new(spec, scenario)?,
        })
    }

    pub fn from_model(model: TransientModel) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &TransientModel {
        &self.model
    }

    pub fn spec(&self) -> &GasLineSpec {
        self.model.spec()
    }

    pub fn scenario(&self) -> &LeakScenario {
        self.model.scenario()
    }

    /// Section a line-1 sensor at `x` reads after the closure.
    pub fn sensor_section(&self, x: f64) -> Result<Section> {
        let p = self.model.params();
        if x == p.l1 {
            return Ok(Section::Inlet);
        }
        if x == p.l3 {
            return Ok(Section::Outlet);
        }
        self.model.section_of(x)
    }
}

impl PressureView for World {
    fn line_pressure(&self, line: LineId, x: f64, t: f64) -> Result<f64> {
        let spec = self.spec();
        let stationary = stationary_pressure(spec, x)?;
        if line != LineId::Line1 {
            return Ok(stationary);
        }
        let t1 = self.model.params().t1;
        if t <= t1 {
            let w = (t / t1).max(0.0);
            let snap = self.scenario().snapshot.pressure_at(x);
            return Ok(if w == 1.0 {
                snap
            } else {
                (1.0 - w) * stationary + w * snap
            });
        }
        let section = self.sensor_section(x)?;
        Ok(self.model.pressure(section, x, t)?.pressure)
    }
}
