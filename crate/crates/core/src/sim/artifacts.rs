//! Files a run leaves in its output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{RunReport, Simulation};
use crate::center::write_journal;
use crate::domain::stationary_pressure;
use crate::error::Result;
use crate::transient::table::{e4, km_label, write_comparison_csv};
use crate::transient::{emit_table, published_positions, PublishedTables, Section, TransientModel};
use crate::valves::write_event_log;

const SECTIONS: [Section; 3] = [Section::Inlet, Section::Isolated, Section::Outlet];

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactPaths {
    pub tables: Vec<PathBuf>,
    pub comparisons: Vec<PathBuf>,
    pub profiles: PathBuf,
    pub events: PathBuf,
    pub journal: PathBuf,
    pub telemetry: PathBuf,
    pub summary: PathBuf,
}

/// Writes `table{n}.csv` and `table{n}_comparison.csv` for each section.
pub fn write_tables(
    model: &TransientModel,
    offsets: &[f64],
    out: &Path,
) -> Result<(Vec<PathBuf>, Vec<PathBuf>)> {
    fs::create_dir_all(out)?;
    let published = PublishedTables::load();
    let mut tables = Vec::new();
    let mut comparisons = Vec::new();
    for section in SECTIONS {
        let table = emit_table(model, section, offsets, &published_positions(section))?;
        let n = section.id();
        let path = out.join(format!("table{n}.csv"));
        table.write_csv(BufWriter::new(File::create(&path)?))?;
        tables.push(path);
        let path = out.join(format!("table{n}_comparison.csv"));
        write_comparison_csv(&table, &published, BufWriter::new(File::create(&path)?))?;
        comparisons.push(path);
    }
    Ok((tables, comparisons))
}

/// Profile rows every kilometre of each section, plus the leak point.
pub fn profile_positions(model: &TransientModel, section: Section) -> Vec<f64> {
    let (lo, hi) = model.params().bounds(section);
    let mut xs: Vec<f64> = (0..)
        .map(|k| k as f64 * 1000.0)
        .skip_while(|&x| x < lo)
        .take_while(|&x| x <= hi)
        .collect();
    let leak = model.params().l2;
    if section == Section::Isolated && !xs.contains(&leak) {
        xs.push(leak);
        xs.sort_by(f64::total_cmp);
    }
    xs
}

/// `section,x_km,stationary,a{offset}...` in `10^4 Pa`.
pub fn write_profiles_csv<W: Write>(model: &TransientModel, offsets: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["section".to_string(), "x_km".into(), "stationary".into()];
    header.extend(offsets.iter().map(|a| format!("a{a}")));
    w.write_record(&header)?;
    let t1 = model.params().t1;
    for section in SECTIONS {
        for x in profile_positions(model, section) {
            let mut row = vec![
                section.id().to_string(),
                km_label(x),
                e4(stationary_pressure(model.spec(), x)?),
            ];
            for &a in offsets {
                row.push(e4(model.pressure(section, x, t1 + a)?.pressure));
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes tables, profiles, the valve event log, the journal, the full bus
/// record and a JSON summary under `out`.
pub fn write_artifacts(sim: &Simulation, report: &RunReport, out: &Path) -> Result<ArtifactPaths> {
    let model = sim.world().model();
    let offsets = &sim.config.offsets;
    let (tables, comparisons) = write_tables(model, offsets, out)?;

    let profiles = out.join("fig3_profiles.csv");
    write_profiles_csv(model, offsets, BufWriter::new(File::create(&profiles)?))?;

    let events = out.join("events.ndjson");
    write_event_log(sim.events(), BufWriter::new(File::create(&events)?))?;

    let journal = out.join("journal.ndjson");
    write_journal(sim.journal(), BufWriter::new(File::create(&journal)?))?;

    let telemetry = out.join("telemetry.ndjson");
    let mut w = BufWriter::new(File::create(&telemetry)?);
    for m in sim.telemetry() {
        writeln!(w, "{}", m.to_line())?;
    }
    w.flush()?;

    let summary = out.join("summary.json");
    fs::write(&summary, serde_json::to_string_pretty(report)? + "\n")?;

    Ok(ArtifactPaths {
        tables,
        comparisons,
        profiles,
        events,
        journal,
        telemetry,
        summary,
    })
}
