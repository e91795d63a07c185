use std::io::Write;

use serde::Serialize;

use super::model::{Section, TransientModel};
use super::oracle::OracleProblem;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSource {
    Series,
    FdOracle,
}

/// Pressures of one section on a rectangular `(t, x)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureField {
    pub section: Section,
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    /// `values[time index][x index]`, Pa.
    pub values: Vec<Vec<f64>>,
    pub source: FieldSource,
}

impl PressureField {
    /// Arithmetic mean over the x grid at time index `ti`.
    pub fn mean_at(&self, ti: usize) -> f64 {
        let row = &self.values[ti];
        row.iter().sum::<f64>() / row.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn range(&self) -> f64 {
        self.max() - self.min()
    }

    /// Largest pointwise gap to another field on the same grid.
    pub fn max_abs_diff(&self, other: &PressureField) -> f64 {
        assert_eq!(self.xs.len(), other.xs.len(), "x grids differ");
        assert_eq!(self.ts.len(), other.ts.len(), "t grids differ");
        self.values
            .iter()
            .flatten()
            .zip(other.values.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `x_m,t_s,pressure_pa`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x_m", "t_s", "pressure_pa"])?;
        for (t, row) in self.ts.iter().zip(&self.values) {
            for (x, p) in self.xs.iter().zip(row) {
                w.write_record([x.to_string(), t.to_string(), p.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl TransientModel {
    /// Series evaluation of `section` on the grid `xs × ts`.
    pub fn field(&self, section: Section, xs: &[f64], ts: &[f64]) -> Result<PressureField> {
        let values = ts
            .iter()
            .map(|&t| {
                xs.iter()
                    .map(|&x| self.pressure(section, x, t).map(|e| e.pressure))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PressureField {
            section,
            xs: xs.to_vec(),
            ts: ts.to_vec(),
            values,
            source: FieldSource::Series,
        })
    }

    /// The physical initial/boundary problem of `section` for the FD oracle:
    /// snapshot as initial profile, zero flux at closed valves, `G0` in at the
    /// inlet, `Gleak` out at the leak, `Gout` out at the outlet.
    pub fn oracle_problem(&self, section: Section) -> OracleProblem {
        use crate::domain::FlowProfile;
        let p = self.params();
        let (start, end) = p.bounds(section);
        let snap = &self.scenario().snapshot;
        let mut initial = vec![(start, snap.pressure_at(start))];
        initial.extend(
            snap.samples
                .iter()
                .copied()
                .filter(|&(x, _)| x > start && x < end),
        );
        initial.push((end, snap.pressure_at(end)));
        let zero = FlowProfile::Constant(0.0);
        let (inflow_left, outflow_right, sinks) = match section {
            Section::Inlet => (FlowProfile::Constant(self.spec().inlet_flow), zero, vec![]),
            Section::Isolated => (
                zero.clone(),
                zero,
                vec![(p.l2, self.scenario().leak_outflow.clone())],
            ),
            Section::Outlet => (zero, self.scenario().outlet_draw.clone(), vec![]),
        };
        OracleProblem {
            section,
            start,
            end,
            inflow_left,
            outflow_right,
            sinks,
            initial,
            t_start: p.t1,
            c2: self.spec().c2(),
            friction_2a: self.spec().friction_2a,
        }
    }
}
