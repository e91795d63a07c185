//! Fits the leak outflow and outlet draw to the published section tables
//! and prints the model-versus-published deltas for every cell.

use pipetwin::transient::{
    emit_table, fit_section_flow, published_positions, PublishedTables, Section, TransientModel,
    TABLE_OFFSETS,
};
use pipetwin::ScenarioDocument;

fn main() -> pipetwin::Result<()> {
    let doc = ScenarioDocument::published();
    let (spec, scenario) = doc.validated()?;
    let published = PublishedTables::load();
    for section in [Section::Isolated, Section::Outlet] {
        let fit = fit_section_flow(&spec, &scenario, section, &published)?;
        println!(
            "section {}: flow = {:.6} Pa·s/m, rms residual = {:.0} Pa over {} cells",
            section.id(),
            fit.flow,
            fit.rms_residual,
            fit.cells
        );
    }

    let model = TransientModel::new(spec, scenario)?;
    for section in Section::ALL {
        let table = emit_table(
            &model,
            section,
            &TABLE_OFFSETS,
            &published_positions(section),
        )?;
        println!("\nsection {} (model / published, 10^4 Pa)", section.id());
        for (x, row) in table.xs.iter().zip(&table.values) {
            let cells: Vec<String> = table
                .offsets
                .iter()
                .zip(row)
                .map(|(&a, &p)| {
                    let q = published.value(section, *x, a).unwrap_or(f64::NAN);
                    format!("{:6.2}/{:6.2}", p / 1e4, q / 1e4)
                })
                .collect();
            println!("{:>6} km  {}", x / 1000.0, cells.join("  "));
        }
    }
    Ok(())
}
