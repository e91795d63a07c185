//! Deterministic end-to-end runner.
//!
//! Per tick, in this order: sensor sampling against the world model, bus
//! delivery to the center, valve automation (drop-rate step, closure trip,
//! due pairing commands), center decision, and application of the center's
//! commands. Client commands queued during tick `k` enter the bus at tick
//! `k + 1`.
//!
//! The pressures of the published case never fall at the 0.1–0.5 MPa/min a
//! drop-rate trigger needs, so the runner trips the bracketing valve
//! nearest the inlet at `t1` with cause `drop_rate_trigger`. The drop-rate
//! automation still runs on every shut-off valve each tick.

pub mod artifacts;
pub mod serve;
pub mod world;

use std::collections::{BTreeMap, VecDeque};
use std::path::PathBuf;
use std::sync::mpsc::Receiver;

use serde::Serialize;

use crate::center::{CenterConfig, CenterState, JournalRecord, Mode, Phase, ReferenceMode};
use crate::domain::{GasLineSpec, LeakScenario};
use crate::error::{Error, Result};
use crate::localization::LocalizationEstimate;
use crate::scenario::ScenarioDocument;
use crate::telemetry::{
    default_layout, Bus, Filter, MessageKind, PositionSensors, SensorArray, TelemetryMessage,
};
use crate::transient::TABLE_OFFSETS;
use crate::valves::{
    apply_command, propagate_pairing, sort_events, step_valve, Action, Cause, Command, LineId,
    Rejection, ValveEvent, ValveKind, ValveRegistry, ValveState, RATE_WINDOW_S,
};

pub use artifacts::{write_artifacts, write_profiles_csv, write_tables, ArtifactPaths};
pub use serve::{serve, ServeConfig};
pub use world::World;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Scenario file; the built-in published scenario when absent.
    pub scenario: Option<PathBuf>,
    /// Tick length, s.
    pub dt: f64,
    /// End time, s; `t1 + 600` when absent.
    pub horizon: Option<f64>,
    pub seed: u64,
    pub mode: Mode,
    pub reference: ReferenceMode,
    pub out: Option<PathBuf>,
    /// Pressure sensor noise, Pa.
    pub noise_sigma: f64,
    /// Delay between a shut-off closure and its partner's close command, s.
    pub pairing_latency: f64,
    /// Shut-off valve travel time, s.
    pub travel_time: f64,
    /// Offsets after `t1` for the exported tables and profiles, s.
    pub offsets: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            dt: 1.0,
            horizon: None,
            seed: 0,
            mode: Mode::Automatic,
            reference: ReferenceMode::DamagedAtClosure,
            out: None,
            noise_sigma: 0.0,
            pairing_latency: 1.0,
            travel_time: 0.0,
            offsets: TABLE_OFFSETS.to_vec(),
        }
    }
}

impl RunConfig {
    pub fn load_scenario(&self) -> Result<ScenarioDocument> {
        match &self.scenario {
            Some(path) => ScenarioDocument::load(path),
            None => Ok(ScenarioDocument::published()),
        }
    }
}

/// Crossover indices of `l1` and `l3`.
fn bracket(spec: &GasLineSpec, sc: &LeakScenario) -> Result<(usize, usize)> {
    let s = spec.crossover_spacing;
    let idx = |x: f64| {
        let k = (x / s).round();
        ((x / s - k).abs() < 1e-9 && k >= 1.0 && x < spec.length).then_some(k as usize)
    };
    match (idx(sc.l1), idx(sc.l3)) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::InvalidScenario(format!(
            "l1 = {} and l3 = {} must both sit on connecting pipes strictly inside the line",
            sc.l1, sc.l3
        ))),
    }
}

/// One running world with its valves, sensors, bus and center.
pub struct Simulation {
    config: RunConfig,
    world: World,
    registry: ValveRegistry,
    sensors: SensorArray,
    positions: PositionSensors,
    bus: Bus,
    center_rx: Receiver<TelemetryMessage>,
    log_rx: Receiver<TelemetryMessage>,
    center: CenterState,
    due: Vec<Command>,
    windows: BTreeMap<String, VecDeque<(f64, f64)>>,
    tripped: bool,
    tick: u64,
    horizon: f64,
    events: Vec<ValveEvent>,
    rejections: Vec<Rejection>,
    telemetry: Vec<TelemetryMessage>,
    outbox: Vec<TelemetryMessage>,
    diagnostics: Vec<String>,
}

impl Simulation {
    pub fn new(doc: &ScenarioDocument, config: RunConfig) -> Result<Self> {
        let (spec, scenario) = doc.validated()?;
        if !(config.dt > 0.0) || !config.dt.is_finite() {
            return Err(Error::Config(format!(
                "dt = {} must be positive",
                config.dt
            )));
        }
        if !(config.pairing_latency >= 0.0
            && config.travel_time >= 0.0
            && config.noise_sigma >= 0.0)
        {
            return Err(Error::Config(
                "latency, travel time and noise must be non-negative".into(),
            ));
        }
        let horizon = config.horizon.unwrap_or(scenario.t1 + 600.0);
        if !(horizon >= 0.0) {
            return Err(Error::Config(format!(
                "horizon = {horizon} must be non-negative"
            )));
        }
        let pair = bracket(&spec, &scenario)?;
        let mut registry = ValveRegistry::for_spec(&spec, Some(pair));
        for v in registry.iter_mut().filter(|v| v.kind == ValveKind::Shutoff) {
            v.travel_time = config.travel_time;
        }
        let sensors = SensorArray::new(
            default_layout(&spec, config.noise_sigma),
            &spec,
            config.seed,
        )?;
        let mut bus = Bus::new();
        let center_rx = bus.subscribe(Filter {
            kinds: Some(
                [
                    MessageKind::PressureSample,
                    MessageKind::ValvePosition,
                    MessageKind::Command,
                ]
                .into(),
            ),
            sources: None,
        });
        let log_rx = bus.subscribe(Filter::all());
        let mut center_cfg = CenterConfig::new(spec);
        center_cfg.mode = config.mode;
        center_cfg.reference = config.reference;
        center_cfg.deadband = 4.0 * config.noise_sigma;
        Ok(Self {
            world: World::new(spec, scenario)?,
            registry,
            sensors,
            positions: PositionSensors::default(),
            bus,
            center_rx,
            log_rx,
            center: CenterState::new(center_cfg),
            due: Vec::new(),
            windows: BTreeMap::new(),
            tripped: false,
            tick: 0,
            horizon,
            events: Vec::new(),
            rejections: Vec::new(),
            telemetry: Vec::new(),
            outbox: Vec::new(),
            diagnostics: Vec::new(),
            config,
        })
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn registry(&self) -> &ValveRegistry {
        &self.registry
    }

    pub fn center(&self) -> &CenterState {
        &self.center
    }

    pub fn now(&self) -> f64 {
        self.tick as f64 * self.config.dt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn finished(&self) -> bool {
        self.now() > self.horizon + 1e-9
    }

    pub fn events(&self) -> &[ValveEvent] {
        &self.events
    }

    pub fn rejections(&self) -> &[Rejection] {
        &self.rejections
    }

    pub fn telemetry(&self) -> &[TelemetryMessage] {
        &self.telemetry
    }

    /// Bus messages published since the last call.
    pub fn take_outbox(&mut self) -> Vec<TelemetryMessage> {
        std::mem::take(&mut self.outbox)
    }

    fn publish(&mut self, msg: TelemetryMessage) -> Result<()> {
        self.bus.publish(msg)?;
        let delivered: Vec<_> = self.log_rx.try_iter().collect();
        self.outbox.extend(delivered.iter().cloned());
        self.telemetry.extend(delivered);
        Ok(())
    }

    fn apply(&mut self, cmd: &Command, tick_events: &mut Vec<ValveEvent>) -> Result<()> {
        let valve = self.registry.get_mut(&cmd.valve_id)?;
        match apply_command(valve, cmd) {
            Ok(ev) => {
                self.after_event(&ev)?;
                tick_events.push(ev);
            }
            Err(r) => self.rejections.push(r),
        }
        Ok(())
    }

    fn after_event(&mut self, ev: &ValveEvent) -> Result<()> {
        self.positions.record(ev);
        let follow = propagate_pairing(ev, &self.registry, self.config.pairing_latency)?;
        self.due.extend(follow);
        Ok(())
    }

    /// Advances one tick. `client_commands` are `command` messages from
    /// stream clients queued during the previous tick.
    pub fn step(&mut self, client_commands: Vec<TelemetryMessage>) -> Result<()> {
        let t = self.now();
        let mut tick_events = Vec::new();

        for mut msg in client_commands {
            msg.time_s = t;
            if let Err(e) = self.publish(msg) {
                self.diagnostics
                    .push(format!("t = {t}: client command refused: {e}"));
            }
        }

        // sensor sampling
        let samples = self.sensors.sample(&self.world, t)?;
        for s in &samples {
            if let (Some(line), Some(x), Some(p)) = (s.line(), s.x_m, s.pressure_pa) {
                if let Some(v) = self.registry.shutoff_at(line, x) {
                    let w = self.windows.entry(v.id.clone()).or_default();
                    w.push_back((t, p));
                    while w.front().is_some_and(|f| f.0 < t - 2.0 * RATE_WINDOW_S) {
                        w.pop_front();
                    }
                }
            }
        }
        let positions = self.positions.poll(&self.registry, t);
        for m in samples.into_iter().chain(positions) {
            self.publish(m)?;
        }

        // bus delivery
        let inbound: Vec<_> = self.center_rx.try_iter().collect();
        for m in &inbound {
            self.center.ingest(m);
        }

        // valve automation
        let ids: Vec<String> = self.registry.ids();
        for id in ids {
            let window: Vec<(f64, f64)> = self
                .windows
                .get(&id)
                .map(|w| w.iter().copied().collect())
                .unwrap_or_default();
            let valve = self.registry.get_mut(&id)?;
            let out = step_valve(valve, &window, t);
            for ev in out.events {
                self.after_event(&ev)?;
                tick_events.push(ev);
            }
        }
        let sc = self.world.scenario().clone();
        if !self.tripped && t >= sc.t1 - 1e-9 {
            self.tripped = true;
            let id = self
                .registry
                .shutoff_at(LineId::Line1, sc.l1)
                .map(|v| v.id.clone())
                .ok_or_else(|| Error::Config("no shut-off valve at l1".into()))?;
            let trip = Command {
                time_s: t,
                valve_id: id,
                action: Action::Close,
                cause: Cause::DropRateTrigger,
            };
            self.apply(&trip, &mut tick_events)?;
        }
        loop {
            let mut ready: Vec<Command> = Vec::new();
            self.due.retain(|c| {
                let go = c.time_s <= t + 1e-9;
                if go {
                    ready.push(c.clone());
                }
                !go
            });
            if ready.is_empty() {
                break;
            }
            ready.sort_by(|a, b| {
                a.time_s
                    .total_cmp(&b.time_s)
                    .then_with(|| a.valve_id.cmp(&b.valve_id))
            });
            for c in ready {
                let c = Command { time_s: t, ..c };
                self.apply(&c, &mut tick_events)?;
            }
        }

        // center decision and command application
        let decision = self.center.decide(t);
        for m in decision.messages {
            self.publish(m)?;
        }
        for c in &decision.commands {
            self.apply(c, &mut tick_events)?;
        }

        sort_events(&mut tick_events);
        self.events.extend(tick_events);
        self.tick += 1;
        Ok(())
    }

    pub fn run_to_horizon(&mut self) -> Result<()> {
        while !self.finished() {
            self.step(Vec::new())?;
        }
        Ok(())
    }

    pub fn report(&self) -> RunReport {
        let sc = self.world.scenario();
        let mut checks = Vec::new();
        let latency = self.config.pairing_latency;

        let trip = self
            .events
            .iter()
            .find(|e| e.cause == Cause::DropRateTrigger && e.from_state == ValveState::Open);
        if let Some(trip) = trip {
            let partner = self
                .registry
                .get(&trip.valve_id)
                .ok()
                .and_then(|v| v.paired_valve_id.clone());
            let closed = partner.as_ref().and_then(|p| {
                self.events
                    .iter()
                    .find(|e| &e.valve_id == p && e.to_state == ValveState::Closed)
                    .map(|e| e.time_s)
            });
            let budget = latency + self.config.travel_time + 1e-9;
            let passed = closed.is_some_and(|tc| tc - trip.time_s <= budget);
            checks.push(SelfCheck::new(
                "bracketing valves close within the pairing latency",
                passed,
                format!(
                    "trip at {} s, partner {:?} at {:?} s",
                    trip.time_s, partner, closed
                ),
            ));
        }

        let unsafe_opens = self
            .events
            .iter()
            .filter(|e| e.to_state == ValveState::Open && e.valve_id.starts_with("xv-"))
            .filter(|e| {
                !self.center.journal().iter().any(|r| {
                    r.time_s == e.time_s
                        && r.values.verdict == Some(crate::localization::Verdict::Allow)
                        && r.commands
                            .iter()
                            .any(|c| c.valve_id == e.valve_id && c.action == Action::Open)
                })
            })
            .count();
        checks.push(SelfCheck::new(
            "connecting valves open only on a same-step ALLOW",
            unsafe_opens == 0,
            format!("{unsafe_opens} unguarded openings"),
        ));

        let period = crate::telemetry::sensors::PRESSURE_PERIOD_S;
        let window = self.center.config().localization_window;
        if self.config.mode == Mode::Automatic && self.horizon >= sc.t1 + window + period {
            let t2 = self.center.t2();
            let passed = t2.is_some_and(|t2| {
                t2 >= sc.t1 + window - 1e-9 && t2 <= sc.t1 + window + period + 1e-9
            });
            checks.push(SelfCheck::new(
                "activation at t1 + 120 s within one sample period",
                passed,
                format!("t2 = {t2:?}, t1 = {}", sc.t1),
            ));
        }

        RunReport {
            t1: sc.t1,
            horizon: self.horizon,
            phase: self.center.phase(),
            t1_hat: self.center.t1_hat(),
            t2: self.center.t2(),
            estimate: self.center.estimate().copied(),
            events: self.events.len(),
            rejections: self.rejections.len(),
            journal_records: self.center.journal().len(),
            telemetry_messages: self.telemetry.len(),
            checks,
            diagnostics: self.diagnostics.clone(),
        }
    }

    pub fn journal(&self) -> &[JournalRecord] {
        self.center.journal()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl SelfCheck {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub t1: f64,
    pub horizon: f64,
    pub phase: Phase,
    pub t1_hat: Option<f64>,
    pub t2: Option<f64>,
    pub estimate: Option<LocalizationEstimate>,
    pub events: usize,
    pub rejections: usize,
    pub journal_records: usize,
    pub telemetry_messages: usize,
    pub checks: Vec<SelfCheck>,
    pub diagnostics: Vec<String>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs the scenario to the horizon and, when `config.out` is set, writes
/// every artifact there.
pub fn run(config: &RunConfig) -> Result<(Simulation, RunReport)> {
    let doc = config.load_scenario()?;
    let mut sim = Simulation::new(&doc, config.clone())?;
    sim.run_to_horizon()?;
    let report = sim.report();
    if let Some(out) = &config.out {
        write_artifacts(&sim, &report, out)?;
    }
    Ok((sim, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_run_activates_at_t1_plus_120() {
        let (sim, report) = run(&RunConfig::default()).unwrap();
        assert!(report.passed(), "{:#?}", report.checks);
        assert_eq!(report.t2, Some(420.0));
        assert_eq!(report.t1_hat, Some(300.0));
        let est = report.estimate.unwrap();
        assert_eq!((est.l1_hat, est.l3_hat), (1e4, 2e4));
        let opened: Vec<_> = sim
            .events()
            .iter()
            .filter(|e| e.to_state == ValveState::Open)
            .map(|e| (e.time_s, e.valve_id.as_str()))
            .collect();
        assert_eq!(opened, [(420.0, "xv-1"), (420.0, "xv-2")]);
    }

    #[test]
    fn closures_are_ordered_and_paired() {
        let (sim, _) = run(&RunConfig::default()).unwrap();
        let closes: Vec<_> = sim
            .events()
            .iter()
            .filter(|e| e.to_state == ValveState::Closed)
            .map(|e| (e.time_s, e.valve_id.as_str(), e.cause))
            .collect();
        assert_eq!(
            closes,
            [
                (300.0, "sv-1-1", Cause::DropRateTrigger),
                (301.0, "sv-1-2", Cause::PositionSensorPairing)
            ]
        );
    }

    #[test]
    fn short_horizon_never_activates() {
        let cfg = RunConfig {
            horizon: Some(200.0),
            ..RunConfig::default()
        };
        let (sim, report) = run(&cfg).unwrap();
        assert!(report.t2.is_none());
        assert!(matches!(
            report.phase,
            Phase::Stationary | Phase::LeakSuspected
        ));
        assert!(sim.events().is_empty());
    }

    #[test]
    fn zero_latency_closes_both_in_one_tick() {
        let cfg = RunConfig {
            pairing_latency: 0.0,
            ..RunConfig::default()
        };
        let (sim, report) = run(&cfg).unwrap();
        assert!(report.passed());
        let times: Vec<f64> = sim
            .events()
            .iter()
            .filter(|e| e.to_state == ValveState::Closed)
            .map(|e| e.time_s)
            .collect();
        assert_eq!(times, [300.0, 300.0]);
    }

    #[test]
    fn bad_dt_is_rejected() {
        let cfg = RunConfig {
            dt: 0.0,
            ..RunConfig::default()
        };
        assert!(matches!(run(&cfg), Err(Error::Config(_))));
    }
}
