//! Full automatic run with all artifacts written to a directory (default
//! `out/run`).

use std::path::PathBuf;

use pipetwin::sim::{run, RunConfig};

fn main() -> pipetwin::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| "out/run".into());
    let (sim, report) = run(&RunConfig {
        out: Some(out.clone()),
        ..RunConfig::default()
    })?;
    for ev in sim.events() {
        println!(
            "{:>6.0} s  {:<6} {:?} -> {:?}  ({:?})",
            ev.time_s, ev.valve_id, ev.from_state, ev.to_state, ev.cause
        );
    }
    for c in &report.checks {
        println!("{}: {}", if c.passed { "ok" } else { "FAIL" }, c.name);
    }
    println!("artifacts in {}", out.display());
    Ok(())
}
