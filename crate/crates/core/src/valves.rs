//! Shut-off and connecting-pipe valve state machines.
//!
//! Shut-off valves sit on both lines at every crossover, start open and
//! close on a drop-rate trigger or on their partner's position sensor.
//! Connecting valves sit on the crossovers, start closed and only the
//! control center or an operator opens them. Every state change produces
//! exactly one [`ValveEvent`]; illegal commands produce a [`Rejection`] and
//! leave the valve untouched.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::GasLineSpec;
use crate::error::{Error, Result};

/// `1 MPa/min` in Pa/s.
pub const PA_PER_S_PER_MPA_PER_MIN: f64 = 1e6 / 60.0;
/// Default drop-rate trigger, 0.2 MPa/min.
pub const DEFAULT_DROP_RATE_THRESHOLD: f64 = 0.2 * PA_PER_S_PER_MPA_PER_MIN;
/// Permitted calibration range, 0.1..0.5 MPa/min.
pub const THRESHOLD_RANGE: (f64, f64) = (
    0.1 * PA_PER_S_PER_MPA_PER_MIN,
    0.5 * PA_PER_S_PER_MPA_PER_MIN,
);
/// Span of the rolling window the drop rate is estimated over, s.
pub const RATE_WINDOW_S: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValveKind {
    Shutoff,
    ConnectingPneumatic,
}

/// Which pipe a valve or sensor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LineId {
    Line1,
    Line2,
    /// Connecting pipe `k`, numbered from the inlet starting at 1.
    Crossover(usize),
}

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LineId::Line1 => f.write_str("line_1"),
            LineId::Line2 => f.write_str("line_2"),
            LineId::Crossover(k) => write!(f, "crossover_{k}"),
        }
    }
}

impl std::str::FromStr for LineId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line_1" => Ok(LineId::Line1),
            "line_2" => Ok(LineId::Line2),
            _ => s
                .strip_prefix("crossover_")
                .and_then(|k| k.parse().ok())
                .filter(|&k| k >= 1)
                .map(LineId::Crossover)
                .ok_or_else(|| Error::Schema(format!("unknown line id `{s}`"))),
        }
    }
}

impl Serialize for LineId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LineId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValveState {
    Open,
    Closing,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    DropRateTrigger,
    PositionSensorPairing,
    ControlCenterCommand,
    OperatorCommand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Open,
    Close,
}

/// A request to move a valve, effective at `time_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub time_s: f64,
    pub valve_id: String,
    pub action: Action,
    pub cause: Cause,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValveEvent {
    pub time_s: f64,
    pub valve_id: String,
    pub cause: Cause,
    pub from_state: ValveState,
    pub to_state: ValveState,
}

/// A command that was refused; the valve kept `state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub time_s: f64,
    pub valve_id: String,
    pub action: Action,
    pub cause: Cause,
    pub state: ValveState,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Valve {
    pub id: String,
    pub kind: ValveKind,
    pub position_x: f64,
    pub line: LineId,
    pub state: ValveState,
    pub paired_valve_id: Option<String>,
    /// Pa/s.
    pub drop_rate_threshold: f64,
    /// Open-to-closed travel, s. Zero closes within the tick.
    pub travel_time: f64,
    /// Start of an ongoing closure and its cause.
    closing: Option<(f64, Cause)>,
}

impl Valve {
    pub fn shutoff(id: impl Into<String>, line: LineId, x: f64) -> Self {
        Self {
            id: id.into(),
            kind: ValveKind::Shutoff,
            position_x: x,
            line,
            state: ValveState::Open,
            paired_valve_id: None,
            drop_rate_threshold: DEFAULT_DROP_RATE_THRESHOLD,
            travel_time: 0.0,
            closing: None,
        }
    }

    pub fn connecting(id: impl Into<String>, k: usize, x: f64) -> Self {
        Self {
            id: id.into(),
            kind: ValveKind::ConnectingPneumatic,
            position_x: x,
            line: LineId::Crossover(k),
            state: ValveState::Closed,
            paired_valve_id: None,
            drop_rate_threshold: DEFAULT_DROP_RATE_THRESHOLD,
            travel_time: 0.0,
            closing: None,
        }
    }

    /// Sets the trigger in Pa/s; must lie in [`THRESHOLD_RANGE`].
    pub fn with_threshold(mut self, pa_per_s: f64) -> Result<Self> {
        let (lo, hi) = THRESHOLD_RANGE;
        if !(pa_per_s >= lo - 1e-9 && pa_per_s <= hi + 1e-9) {
            return Err(Error::Domain {
                quantity: "drop_rate_threshold",
                value: pa_per_s,
                lo,
                hi,
            });
        }
        self.drop_rate_threshold = pa_per_s;
        Ok(self)
    }

    fn transition(&mut self, time_s: f64, cause: Cause, to: ValveState) -> ValveEvent {
        let from = self.state;
        self.state = to;
        self.closing = (to == ValveState::Closing).then_some((time_s, cause));
        ValveEvent {
            time_s,
            valve_id: self.id.clone(),
            cause,
            from_state: from,
            to_state: to,
        }
    }

    fn begin_close(&mut self, time_s: f64, cause: Cause) -> ValveEvent {
        let to = if self.travel_time > 0.0 {
            ValveState::Closing
        } else {
            ValveState::Closed
        };
        self.transition(time_s, cause, to)
    }

    /// Completes a closure whose travel time has elapsed by `now`.
    pub fn advance(&mut self, now: f64) -> Option<ValveEvent> {
        let (start, cause) = self.closing?;
        (now >= start + self.travel_time).then(|| self.transition(now, cause, ValveState::Closed))
    }
}

/// Least-squares pressure decline rate over the window, Pa/s (positive
/// when falling). `None` when fewer than two distinct times are given.
pub fn drop_rate(window: &[(f64, f64)]) -> Option<f64> {
    let n = window.len() as f64;
    if window.len() < 2 {
        return None;
    }
    let tm = window.iter().map(|w| w.0).sum::<f64>() / n;
    let pm = window.iter().map(|w| w.1).sum::<f64>() / n;
    let sxx: f64 = window.iter().map(|w| (w.0 - tm).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = window.iter().map(|w| (w.0 - tm) * (w.1 - pm)).sum();
    Some(-sxy / sxx)
}

/// Result of one automation step of a valve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutcome {
    pub events: Vec<ValveEvent>,
    /// Why no trigger could be evaluated, if so.
    pub diagnostic: Option<String>,
}

/// Drop-rate automation of a shut-off valve at time `now`. `window` holds
/// the recent `(t, P)` samples of the valve's sensor; only the last
/// [`RATE_WINDOW_S`] seconds are used.
pub fn step_valve(valve: &mut Valve, window: &[(f64, f64)], now: f64) -> StepOutcome {
    let mut out = StepOutcome::default();
    if let Some(ev) = valve.advance(now) {
        out.events.push(ev);
    }
    if valve.kind != ValveKind::Shutoff || valve.state != ValveState::Open {
        return out;
    }
    let recent: Vec<(f64, f64)> = window
        .iter()
        .copied()
        .filter(|&(t, _)| t <= now && t >= now - RATE_WINDOW_S - 1e-9)
        .collect();
    let span = match (recent.first(), recent.last()) {
        (Some(a), Some(b)) => b.0 - a.0,
        _ => 0.0,
    };
    if span < RATE_WINDOW_S - 1e-9 {
        out.diagnostic = Some(format!(
            "window spans {span} s, the estimator needs {RATE_WINDOW_S} s"
        ));
        return out;
    }
    // a rate equal to the threshold trips, up to rounding in the slope
    if drop_rate(&recent).is_some_and(|r| r >= valve.drop_rate_threshold * (1.0 - 1e-9)) {
        out.events
            .push(valve.begin_close(now, Cause::DropRateTrigger));
    }
    out
}

/// All valves of the pair, keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValveRegistry {
    valves: BTreeMap<String, Valve>,
}

/// Id of the shut-off valve on `line` at crossover `k`.
pub fn shutoff_id(line: LineId, k: usize) -> String {
    match line {
        LineId::Line1 => format!("sv-1-{k}"),
        LineId::Line2 => format!("sv-2-{k}"),
        LineId::Crossover(_) => format!("sv-x-{k}"),
    }
}

/// Id of the connecting valve at crossover `k`.
pub fn connecting_id(k: usize) -> String {
    format!("xv-{k}")
}

/// Static position-sensor pairing of crossovers `1..=n`: `bracket` (if any)
/// is paired first, then the remaining crossovers consecutively from the
/// inlet; a leftover one is paired to its left neighbour.
pub fn pairing_plan(n: usize, bracket: Option<(usize, usize)>) -> BTreeMap<usize, usize> {
    let mut pairs = BTreeMap::new();
    if let Some((a, b)) = bracket.filter(|&(a, b)| a >= 1 && b <= n && a < b) {
        pairs.insert(a, b);
        pairs.insert(b, a);
    }
    let free: Vec<usize> = (1..=n).filter(|k| !pairs.contains_key(k)).collect();
    for chunk in free.chunks(2) {
        match *chunk {
            [a, b] => {
                pairs.insert(a, b);
                pairs.insert(b, a);
            }
            [a] if n >= 2 => {
                let neighbour = if a > 1 { a - 1 } else { a + 1 };
                pairs.insert(a, neighbour);
            }
            _ => {}
        }
    }
    pairs
}

impl ValveRegistry {
    /// Shut-off valves on both lines and a connecting valve at every
    /// crossover. `bracket` names the crossover pair whose shut-offs are
    /// wired to each other.
    pub fn for_spec(spec: &GasLineSpec, bracket: Option<(usize, usize)>) -> Self {
        let xs = spec.crossover_positions();
        let plan = pairing_plan(xs.len(), bracket);
        let mut reg = Self::default();
        for (i, &x) in xs.iter().enumerate() {
            let k = i + 1;
            for line in [LineId::Line1, LineId::Line2] {
                let mut v = Valve::shutoff(shutoff_id(line, k), line, x);
                v.paired_valve_id = plan.get(&k).map(|&p| shutoff_id(line, p));
                reg.insert(v);
            }
            reg.insert(Valve::connecting(connecting_id(k), k, x));
        }
        reg
    }

    pub fn insert(&mut self, valve: Valve) {
        self.valves.insert(valve.id.clone(), valve);
    }

    pub fn get(&self, id: &str) -> Result<&Valve> {
        self.valves
            .get(id)
            .ok_or_else(|| Error::UnknownValve(id.to_string()))
    }

    pub fn get_mut(&mut self, id: &str) -> Result<&mut Valve> {
        self.valves
            .get_mut(id)
            .ok_or_else(|| Error::UnknownValve(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.valves.contains_key(id)
    }

    /// Valves in id order.
    pub fn iter(&self) -> impl Iterator<Item = &Valve> {
        self.valves.values()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Valve> {
        self.valves.values_mut()
    }

    pub fn ids(&self) -> Vec<String> {
        self.valves.keys().cloned().collect()
    }

    /// Shut-off valve of `line` located at `x`.
    pub fn shutoff_at(&self, line: LineId, x: f64) -> Option<&Valve> {
        self.iter().find(|v| {
            v.kind == ValveKind::Shutoff && v.line == line && (v.position_x - x).abs() < 1e-6
        })
    }

    /// Connecting valve located at `x`.
    pub fn connecting_at(&self, x: f64) -> Option<&Valve> {
        self.iter()
            .find(|v| v.kind == ValveKind::ConnectingPneumatic && (v.position_x - x).abs() < 1e-6)
    }
}

/// Close command for the partner of a valve that just started closing,
/// due `latency` seconds later. Empty when the partner is already closing
/// or closed, when the valve has no partner, or for non-closing events.
pub fn propagate_pairing(
    event: &ValveEvent,
    registry: &ValveRegistry,
    latency: f64,
) -> Result<Vec<Command>> {
    let valve = registry.get(&event.valve_id)?;
    let closing = event.from_state == ValveState::Open && event.to_state != ValveState::Open;
    if valve.kind != ValveKind::Shutoff || !closing {
        return Ok(vec![]);
    }
    let Some(pair_id) = &valve.paired_valve_id else {
        return Ok(vec![]);
    };
    let pair = registry.get(pair_id)?;
    if pair.state != ValveState::Open {
        return Ok(vec![]);
    }
    Ok(vec![Command {
        time_s: event.time_s + latency,
        valve_id: pair_id.clone(),
        action: Action::Close,
        cause: Cause::PositionSensorPairing,
    }])
}

/// Applies `command` to `valve`. Legal moves: closing an open valve, and
/// opening a closed one when the command comes from the control center or
/// an operator. Shut-off valves reopen only on operator command.
pub fn apply_command(
    valve: &mut Valve,
    command: &Command,
) -> std::result::Result<ValveEvent, Rejection> {
    let reject = |valve: &Valve, reason: &str| Rejection {
        time_s: command.time_s,
        valve_id: valve.id.clone(),
        action: command.action,
        cause: command.cause,
        state: valve.state,
        reason: reason.to_string(),
    };
    if command.valve_id != valve.id {
        return Err(reject(valve, "command addressed to another valve"));
    }
    match (command.action, valve.state) {
        (Action::Close, ValveState::Open) => Ok(valve.begin_close(command.time_s, command.cause)),
        (Action::Close, _) => Err(reject(valve, "valve is not open")),
        (Action::Open, ValveState::Closed) => {
            let allowed = match valve.kind {
                ValveKind::ConnectingPneumatic => {
                    matches!(
                        command.cause,
                        Cause::ControlCenterCommand | Cause::OperatorCommand
                    )
                }
                ValveKind::Shutoff => command.cause == Cause::OperatorCommand,
            };
            if allowed {
                Ok(valve.transition(command.time_s, command.cause, ValveState::Open))
            } else {
                Err(reject(valve, "cause may not open this valve"))
            }
        }
        (Action::Open, _) => Err(reject(valve, "valve is not closed")),
    }
}

/// Orders events by time, ties broken by valve id.
pub fn sort_events(events: &mut [ValveEvent]) {
    events.sort_by(|a, b| {
        a.time_s
            .total_cmp(&b.time_s)
            .then_with(|| a.valve_id.cmp(&b.valve_id))
    });
}

/// NDJSON event log, one event per line.
pub fn write_event_log<W: Write>(events: &[ValveEvent], mut out: W) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
