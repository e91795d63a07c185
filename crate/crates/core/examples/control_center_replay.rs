//! Rebuilds the center's decisions from a recorded telemetry stream and
//! checks the journal matches the live run byte for byte.

use pipetwin::center::{CenterConfig, CenterState};
use pipetwin::sim::{run, RunConfig};

fn main() -> pipetwin::Result<()> {
    let (sim, _) = run(&RunConfig::default())?;
    let live = sim.journal().to_vec();

    let config = CenterConfig::new(*sim.world().spec());
    let replayed = CenterState::replay(config, sim.telemetry().iter().cloned());

    let mut a = Vec::new();
    let mut b = Vec::new();
    pipetwin::center::write_journal(&live, &mut a)?;
    replayed.export_journal(&mut b)?;
    println!("{} records, identical: {}", live.len(), a == b);
    print!("{}", String::from_utf8_lossy(&b));
    Ok(())
}
