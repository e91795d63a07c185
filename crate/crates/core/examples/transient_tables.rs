//! Writes the three section tables, their comparison with the published
//! values and the profile grid to a directory (default `out/tables`).

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use pipetwin::sim::{write_profiles_csv, write_tables};
use pipetwin::transient::{TransientModel, TABLE_OFFSETS};
use pipetwin::ScenarioDocument;

fn main() -> pipetwin::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| "out/tables".into());
    let (spec, scenario) = ScenarioDocument::published().validated()?;
    let model = TransientModel::new(spec, scenario)?;
    let (tables, _) = write_tables(&model, &TABLE_OFFSETS, &out)?;
    write_profiles_csv(
        &model,
        &TABLE_OFFSETS,
        BufWriter::new(File::create(out.join("fig3_profiles.csv"))?),
    )?;
    for path in tables {
        println!("{}:\n{}", path.display(), std::fs::read_to_string(&path)?);
    }
    Ok(())
}
