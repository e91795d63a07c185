//! A closure on one shut-off valve drives its partner closed after the
//! pairing latency; connecting valves reject a shut-off style reopen.

use pipetwin::valves::{
    apply_command, propagate_pairing, Action, Cause, Command, LineId, ValveRegistry,
};
use pipetwin::ScenarioDocument;

fn main() -> pipetwin::Result<()> {
    let spec = ScenarioDocument::published().spec;
    let mut registry = ValveRegistry::for_spec(&spec, Some((1, 2)));
    for v in registry.iter() {
        println!(
            "{:<7} {:?} at {:>6} m, paired with {:?}",
            v.id, v.kind, v.position_x, v.paired_valve_id
        );
    }

    let first = registry
        .shutoff_at(LineId::Line1, 10_000.0)
        .expect("valve at 10 km")
        .id
        .clone();
    let trip = Command {
        time_s: 300.0,
        valve_id: first,
        action: Action::Close,
        cause: Cause::DropRateTrigger,
    };
    let ev = apply_command(registry.get_mut(&trip.valve_id)?, &trip).expect("open valve closes");
    println!("\n{ev:?}");
    for cmd in propagate_pairing(&ev, &registry, 1.0)? {
        println!("queued {cmd:?}");
        let ev = apply_command(registry.get_mut(&cmd.valve_id)?, &cmd).expect("partner closes");
        println!("{ev:?}");
    }

    let reopen = Command {
        time_s: 310.0,
        valve_id: "sv-1-1".into(),
        action: Action::Open,
        cause: Cause::ControlCenterCommand,
    };
    match apply_command(registry.get_mut("sv-1-1")?, &reopen) {
        Ok(ev) => println!("unexpected {ev:?}"),
        Err(r) => println!("\nrejected: {}", r.reason),
    }
    Ok(())
}
