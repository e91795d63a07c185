//! Series fields against an independent Crank–Nicolson solve on a 100 m by
//! 10 s grid, section by section.

use std::time::Instant;

use pipetwin::transient::{fd_oracle_solve, OracleGrid, Section, TransientModel};
use pipetwin::ScenarioDocument;

fn main() -> pipetwin::Result<()> {
    let (spec, scenario) = ScenarioDocument::published().validated()?;
    let model = TransientModel::new(spec, scenario)?;
    for section in Section::ALL {
        let start = Instant::now();
        let oracle = fd_oracle_solve(&model.oracle_problem(section), OracleGrid::default())?;
        let series = model.field(section, &oracle.xs, &oracle.ts)?;
        let gap = series.max_abs_diff(&oracle);
        println!(
            "section {}: max gap {:.1} Pa = {:.4} % of range, {:.2?}",
            section.id(),
            gap,
            100.0 * gap / oracle.range(),
            start.elapsed()
        );
    }
    Ok(())
}
