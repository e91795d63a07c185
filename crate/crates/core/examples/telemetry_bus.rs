//! Sensors publishing onto the bus and two filtered subscribers.

use pipetwin::sim::World;
use pipetwin::telemetry::{default_layout, Bus, Filter, MessageKind, SensorArray};
use pipetwin::ScenarioDocument;

fn main() -> pipetwin::Result<()> {
    let doc = ScenarioDocument::published();
    let (spec, scenario) = doc.validated()?;
    let world = World::new(spec, scenario)?;
    let mut sensors = SensorArray::new(default_layout(&spec, 50.0), &spec, 7)?;

    let mut bus = Bus::new();
    let inlet = bus.subscribe(Filter::source("pt-1-0"));
    let everything = bus.subscribe(Filter::kind(MessageKind::PressureSample));
    for t in (0..=600).step_by(10) {
        for msg in sensors.sample(&world, t as f64)? {
            bus.publish(msg)?;
        }
    }
    println!(
        "{} messages published, {} seen by the pressure subscriber",
        bus.published(),
        everything.try_iter().count()
    );
    for msg in inlet.try_iter().filter(|m| m.time_s % 60.0 == 0.0) {
        println!("{}", msg.to_line());
    }
    Ok(())
}
