//! Leak-section bounds from two inlet readings, by hand and from the model.

use pipetwin::localization::{check_activation, LocalizationEstimate, DEFAULT_EPS_MAX};
use pipetwin::transient::{InletMode, TransientModel};
use pipetwin::ScenarioDocument;

fn main() -> pipetwin::Result<()> {
    let doc = ScenarioDocument::published();
    let (spec, scenario) = doc.validated()?;
    let t1 = scenario.t1;

    // published inlet reading two minutes after the closure
    let (p0_t1, p0_now) = (13.36e4, 14.58e4);
    let est = LocalizationEstimate::compute(&spec, p0_now, p0_t1, t1 + 120.0, t1)?;
    println!(
        "published readings: Z = {:.0} Pa, Z1 = {:.7}",
        est.z, est.z1
    );
    println!(
        "  l1 = {:.1} m (error vs 10 km: {:.1} %), snapped to {} m",
        est.l1_raw,
        100.0 * est.relative_error_vs_truth(1e4),
        est.l1_hat
    );
    println!("  l3 = {:.1} m, snapped to {} m", est.l3_raw, est.l3_hat);

    let model = TransientModel::new(spec, scenario)?;
    // damaged line at l1 two minutes on, against its own reading at the closure
    let p_l1 = model.section1_pressure(1e4, t1 + 120.0)?.pressure;
    let check = check_activation(p0_now, spec.inlet_pressure, p_l1, 12.19e4, DEFAULT_EPS_MAX);
    println!(
        "  P(0,t)/P1 = {:.4}, P(l1) ratio = {:.3} -> {:?}",
        check.inlet_ratio, check.pressure_ratio, check.verdict
    );

    let p = model.inlet_pressure(t1 + 120.0, InletMode::Field)?.pressure;
    let est = LocalizationEstimate::compute(&spec, p, p0_t1, t1 + 120.0, t1)?;
    println!(
        "model readings: P(0, t1 + 120) = {:.0} Pa, l1 = {:.1} m, snapped to {} m",
        p, est.l1_raw, est.l1_hat
    );
    Ok(())
}
