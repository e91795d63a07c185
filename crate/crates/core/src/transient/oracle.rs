//! Finite-volume Crank–Nicolson solver for `∂P/∂t = (c²/2a) ∂²P/∂x²` on
//! one section with flux boundaries and interior point sinks.
//!
//! Independent of the series evaluators: it only sees the physical flows
//! and the initial profile. Cell-centred control volumes make the discrete
//! linepack balance exact. The first step is replaced by four backward-Euler
//! quarter steps (Rannacher start-up) to damp the oscillation Crank–Nicolson
//! would otherwise carry from the flux switch-on at this diffusion number.

use super::field::{FieldSource, PressureField};
use super::model::Section;
use crate::domain::FlowProfile;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleProblem {
    pub section: Section,
    /// Absolute positions of the section ends, m.
    pub start: f64,
    pub end: f64,
    /// Inflow through the left end, Pa·s/m.
    pub inflow_left: FlowProfile,
    /// Outflow through the right end, Pa·s/m.
    pub outflow_right: FlowProfile,
    /// Interior outflows `(x, flow)`.
    pub sinks: Vec<(f64, FlowProfile)>,
    /// Initial pressure profile as `(x, P)` knots, linearly interpolated.
    pub initial: Vec<(f64, f64)>,
    /// Time of the initial profile, s.
    pub t_start: f64,
    pub c2: f64,
    pub friction_2a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGrid {
    /// Cell width, m.
    pub dx: f64,
    /// Time step, s.
    pub dt: f64,
    /// Simulated duration after `t_start`, s.
    pub horizon: f64,
    /// Spacing of stored snapshots, s; a multiple of `dt`.
    pub output_every: f64,
}

impl Default for OracleGrid {
    fn default() -> Self {
        Self {
            dx: 100.0,
            dt: 1.0,
            horizon: 600.0,
            output_every: 10.0,
        }
    }
}

fn whole_multiple(value: f64, step: f64) -> Option<usize> {
    let k = value / step;
    let r = k.round();
    ((k - r).abs() < 1e-9 && r >= 0.0).then_some(r as usize)
}

/// Solves the section on the given grid and returns the stored snapshots.
pub fn fd_oracle_solve(problem: &OracleProblem, grid: OracleGrid) -> Result<PressureField> {
    let len = problem.end - problem.start;
    if !(grid.dx > 0.0 && grid.dt > 0.0 && grid.horizon >= 0.0 && grid.output_every > 0.0) {
        return Err(Error::Config(format!("degenerate oracle grid {grid:?}")));
    }
    if !(len > 0.0 && problem.c2 > 0.0 && problem.friction_2a > 0.0) {
        return Err(Error::Config(
            "section length, c² and 2a must be positive".into(),
        ));
    }
    let cells = whole_multiple(len, grid.dx)
        .filter(|&n| n >= 2)
        .ok_or_else(|| {
            Error::Config(format!("dx = {} does not tile a {len} m section", grid.dx))
        })?;
    let steps = whole_multiple(grid.horizon, grid.dt)
        .ok_or_else(|| Error::Config("horizon is not a whole number of steps".into()))?;
    let every = whole_multiple(grid.output_every, grid.dt)
        .filter(|&k| k >= 1)
        .ok_or_else(|| Error::Config("output spacing is not a whole number of steps".into()))?;
    if problem.initial.is_empty() {
        return Err(Error::Config("empty initial profile".into()));
    }

    let dx = grid.dx;
    let xs: Vec<f64> = (0..cells)
        .map(|i| problem.start + (i as f64 + 0.5) * dx)
        .collect();
    let mut p: Vec<f64> = xs
        .iter()
        .map(|&x| crate::domain::interpolate(&problem.initial, x))
        .collect();
    let r = problem.c2 / problem.friction_2a / (dx * dx);

    // each sink goes into its cell, split evenly when it sits on a face
    let mut sink_cells: Vec<(Vec<(usize, f64)>, &FlowProfile)> = Vec::new();
    for (x, flow) in &problem.sinks {
        let u = (x - problem.start) / dx;
        if !(0.0..=cells as f64).contains(&u) {
            return Err(Error::Config(format!(
                "sink at x = {x} lies outside the section"
            )));
        }
        let face = u.round();
        let weights = if (u - face).abs() < 1e-9 && face > 0.0 && (face as usize) < cells {
            vec![(face as usize - 1, 0.5), (face as usize, 0.5)]
        } else {
            vec![((u.floor() as usize).min(cells - 1), 1.0)]
        };
        sink_cells.push((weights, flow));
    }
    let source = |t: f64| -> Vec<f64> {
        let k = problem.c2 / dx;
        let mut s = vec![0.0; cells];
        s[0] += k * problem.inflow_left.value_at(t);
        s[cells - 1] -= k * problem.outflow_right.value_at(t);
        for (w, flow) in &sink_cells {
            let q = flow.value_at(t);
            for &(i, frac) in w {
                s[i] -= k * q * frac;
            }
        }
        s
    };

    let mut times = vec![problem.t_start];
    let mut values = vec![p.clone()];
    let mut t = problem.t_start;
    for step in 1..=steps {
        if step == 1 {
            let h = grid.dt / 4.0;
            for sub in 1..=4 {
                let s = source(t + sub as f64 * h);
                let rhs: Vec<f64> = p.iter().zip(&s).map(|(pi, si)| pi + h * si).collect();
                p = solve_implicit(&rhs, h * r);
            }
        } else {
            let s0 = source(t);
            let s1 = source(t + grid.dt);
            let half = 0.5 * grid.dt * r;
            let rhs: Vec<f64> = (0..cells)
                .map(|i| {
                    let lap = laplacian(&p, i);
                    p[i] + half * lap + 0.5 * grid.dt * (s0[i] + s1[i])
                })
                .collect();
            p = solve_implicit(&rhs, half);
        }
        t = problem.t_start + step as f64 * grid.dt;
        if step % every == 0 {
            times.push(t);
            values.push(p.clone());
        }
    }

    Ok(PressureField {
        section: problem.section,
        xs,
        ts: times,
        values,
        source: FieldSource::FdOracle,
    })
}

/// Neumann (zero-flux) discrete Laplacian, unscaled.
fn laplacian(p: &[f64], i: usize) -> f64 {
    let n = p.len();
    let mut lap = 0.0;
    if i > 0 {
        lap += p[i - 1] - p[i];
    }
    if i + 1 < n {
        lap += p[i + 1] - p[i];
    }
    lap
}

/// Solves `(I - k L) u = rhs` with the Neumann Laplacian `L` (Thomas algorithm).
fn solve_implicit(rhs: &[f64], k: f64) -> Vec<f64> {
    let n = rhs.len();
    let diag = |i: usize| 1.0 + k * if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
    let off = -k;
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = off / diag(0);
    d[0] = rhs[0] / diag(0);
    for i in 1..n {
        let m = diag(i) - off * c[i - 1];
        c[i] = off / m;
        d[i] = (rhs[i] - off * d[i - 1]) / m;
    }
    let mut u = vec![0.0; n];
    u[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        u[i] = d[i] - c[i] * u[i + 1];
    }
    u
}
