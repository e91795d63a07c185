//! Steady pressure along the line before any leak.

use pipetwin::domain::stationary_pressure;
use pipetwin::ScenarioDocument;

fn main() -> pipetwin::Result<()> {
    let spec = ScenarioDocument::published().spec;
    println!("x_km  P [10^4 Pa]");
    for k in 0..=30 {
        let x = k as f64 * 1000.0;
        println!("{k:>4}  {:.3}", stationary_pressure(&spec, x)? / 1e4);
    }
    Ok(())
}
