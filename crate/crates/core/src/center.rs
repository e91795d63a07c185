//! Control-center decision pipeline.
//!
//! The center folds telemetry into per-sensor series and walks the phases
//! `stationary → leak_suspected → valves_closed_detected → localized →
//! awaiting_condition → activated → repaired`. It sees the passport and the
//! telemetry only; the leak scenario stays hidden from it. Every phase
//! change and every activation verdict is journaled, and the journal is a
//! pure function of the ingested message sequence.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::domain::GasLineSpec;
use crate::error::Result;
use crate::localization::{
    check_activation, detect_closure_signature, ActivationCheck, LocalizationEstimate, Verdict,
    DEFAULT_CONFIRMATION, DEFAULT_EPS_MAX,
};
use crate::telemetry::{MessageKind, TelemetryMessage};
use crate::valves::{connecting_id, Action, Cause, Command, LineId, ValveState};

/// Source id of everything the center publishes.
pub const CENTER_SOURCE: &str = "control-center";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Stationary,
    LeakSuspected,
    ValvesClosedDetected,
    Localized,
    AwaitingCondition,
    Activated,
    Repaired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Automatic,
    OperatorConfirm,
}

/// What the damaged line's pressure at `l1` is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// The damaged line's own reading at the closure instant.
    #[default]
    DamagedAtClosure,
    /// The latest reading of the undamaged line at the same point.
    UndamagedStationary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenterConfig {
    pub spec: GasLineSpec,
    pub mode: Mode,
    pub reference: ReferenceMode,
    pub eps_max: f64,
    /// Consecutive samples that confirm a suspected leak or a closure.
    pub confirm: usize,
    /// Margin around the nominal pressures for the closure signature, Pa.
    pub deadband: f64,
    /// Delay after the closure before the inlet rise is read, s.
    pub localization_window: f64,
    /// The line whose ends are watched.
    pub line: LineId,
    pub reference_line: LineId,
}

impl CenterConfig {
    pub fn new(spec: GasLineSpec) -> Self {
        Self {
            spec,
            mode: Mode::Automatic,
            reference: ReferenceMode::DamagedAtClosure,
            eps_max: DEFAULT_EPS_MAX,
            confirm: DEFAULT_CONFIRMATION,
            deadband: 0.0,
            localization_window: 120.0,
            line: LineId::Line1,
            reference_line: LineId::Line2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JournalEvent {
    PhaseChange,
    Verdict,
    StaleMessage,
    LocalizationFailed,
    OperatorCommand,
    OperatorCommandRejected,
}

/// Numbers a decision was based on. Absent values are omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JournalValues {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t1_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1_raw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0_now: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_l1_damaged: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_l1_reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inlet_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pressure_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalRecord {
    pub seq: u64,
    pub time_s: f64,
    pub event: JournalEvent,
    pub phase_before: Phase,
    pub phase_after: Phase,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trigger: Option<String>,
    pub values: JournalValues,
    pub commands: Vec<Command>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Side effects of one decision step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Decision {
    pub commands: Vec<Command>,
    /// Verdict and journal messages for the bus.
    pub messages: Vec<TelemetryMessage>,
    pub records: Vec<JournalRecord>,
}

type Series = Vec<(f64, f64)>;

/// Millimetre key so float positions can index series.
fn xkey(x: f64) -> i64 {
    (x * 1000.0).round() as i64
}

fn at_or_before(s: &[(f64, f64)], t: f64) -> Option<(f64, f64)> {
    s.iter()
        .rev()
        .find(|p| p.0 <= t + 1e-9)
        .copied()
        .or_else(|| s.first().copied())
}

#[derive(Debug, Clone)]
pub struct CenterState {
    config: CenterConfig,
    phase: Phase,
    series: BTreeMap<(LineId, i64), Series>,
    last_seen: HashMap<String, f64>,
    closure_reported: Option<f64>,
    t1_hat: Option<f64>,
    estimate: Option<LocalizationEstimate>,
    t2: Option<f64>,
    last_check: Option<ActivationCheck>,
    last_checked_at: Option<f64>,
    pending_operator: Vec<TelemetryMessage>,
    fresh: bool,
    trigger: Option<String>,
    journal: Vec<JournalRecord>,
    staged: Vec<JournalRecord>,
}

impl CenterState {
    pub fn new(config: CenterConfig) -> Self {
        Self {
            config,
            phase: Phase::Stationary,
            series: BTreeMap::new(),
            last_seen: HashMap::new(),
            closure_reported: None,
            t1_hat: None,
            estimate: None,
            t2: None,
            last_check: None,
            last_checked_at: None,
            pending_operator: Vec::new(),
            fresh: false,
            trigger: None,
            journal: Vec::new(),
            staged: Vec::new(),
        }
    }

    pub fn config(&self) -> &CenterConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn t1_hat(&self) -> Option<f64> {
        self.t1_hat
    }

    pub fn t2(&self) -> Option<f64> {
        self.t2
    }

    pub fn estimate(&self) -> Option<&LocalizationEstimate> {
        self.estimate.as_ref()
    }

    pub fn last_check(&self) -> Option<&ActivationCheck> {
        self.last_check.as_ref()
    }

    pub fn journal(&self) -> &[JournalRecord] {
        &self.journal
    }

    /// Samples of the sensor on `line` at `x`.
    pub fn series(&self, line: LineId, x: f64) -> &[(f64, f64)] {
        self.series
            .get(&(line, xkey(x)))
            .map_or(&[], |s| s.as_slice())
    }

    fn inlet(&self) -> &Series {
        static EMPTY: Series = Vec::new();
        self.series.get(&(self.config.line, 0)).unwrap_or(&EMPTY)
    }

    fn outlet(&self) -> &Series {
        static EMPTY: Series = Vec::new();
        self.series
            .get(&(self.config.line, xkey(self.config.spec.length)))
            .unwrap_or(&EMPTY)
    }

    fn record(
        &mut self,
        time_s: f64,
        event: JournalEvent,
        after: Phase,
        values: JournalValues,
        commands: Vec<Command>,
        note: Option<String>,
    ) {
        let rec = JournalRecord {
            seq: (self.journal.len() + self.staged.len()) as u64,
            time_s,
            event,
            phase_before: self.phase,
            phase_after: after,
            trigger: self.trigger.clone(),
            values,
            commands,
            note,
        };
        self.phase = after;
        self.staged.push(rec);
    }

    fn advance(&mut self, time_s: f64, to: Phase, values: JournalValues, commands: Vec<Command>) {
        self.record(
            time_s,
            JournalEvent::PhaseChange,
            to,
            values,
            commands,
            None,
        );
    }

    /// Folds one message into the state. Messages older than the last one
    /// from the same source are dropped with a journal note.
    pub fn ingest(&mut self, msg: &TelemetryMessage) {
        if let Some(&last) = self.last_seen.get(&msg.source) {
            if msg.time_s < last {
                let note = format!(
                    "dropped {} at {} s, last seen {last} s",
                    msg.id(),
                    msg.time_s
                );
                let phase = self.phase;
                self.record(
                    msg.time_s,
                    JournalEvent::StaleMessage,
                    phase,
                    JournalValues::default(),
                    vec![],
                    Some(note),
                );
                self.journal.append(&mut self.staged);
                return;
            }
        }
        self.last_seen.insert(msg.source.clone(), msg.time_s);
        match msg.kind {
            MessageKind::PressureSample => {
                let (Some(line), Some(x), Some(p)) = (msg.line(), msg.x_m, msg.pressure_pa) else {
                    return;
                };
                self.series
                    .entry((line, xkey(x)))
                    .or_default()
                    .push((msg.time_s, p));
            }
            MessageKind::ValvePosition => {
                let closed = matches!(
                    msg.valve_state,
                    Some(ValveState::Closed | ValveState::Closing)
                );
                if msg.line() == Some(self.config.line) && closed {
                    let at = msg.changed_at().unwrap_or(msg.time_s);
                    self.closure_reported =
                        Some(self.closure_reported.map_or(at, |c: f64| c.min(at)));
                }
            }
            MessageKind::Command => self.pending_operator.push(msg.clone()),
            MessageKind::Verdict | MessageKind::Journal => return,
        }
        self.fresh = true;
        self.trigger = Some(msg.id());
    }

    /// Runs the pipeline on whatever arrived since the last step. A step
    /// without new messages does nothing.
    pub fn decide(&mut self, now: f64) -> Decision {
        let mut out = Decision::default();
        if !self.fresh {
            return out;
        }
        self.fresh = false;

        if matches!(self.phase, Phase::Stationary | Phase::LeakSuspected) {
            self.watch_for_closure(now);
        }
        if self.phase == Phase::ValvesClosedDetected {
            self.localize(now);
        }
        if self.phase == Phase::AwaitingCondition {
            self.monitor_condition(now, &mut out);
        }
        self.handle_operator(now, &mut out);

        for rec in &self.staged {
            out.messages.push(TelemetryMessage::journal(
                CENTER_SOURCE,
                now,
                serde_json::to_value(rec).expect("record serializes"),
            ));
        }
        out.records = self.staged.clone();
        self.journal.append(&mut self.staged);
        out
    }

    /// Aligned `(t, inlet, outlet)` samples.
    fn ends(&self) -> (Series, Series) {
        let outlet: HashMap<i64, f64> = self.outlet().iter().map(|&(t, p)| (xkey(t), p)).collect();
        self.inlet()
            .iter()
            .filter_map(|&(t, p)| outlet.get(&xkey(t)).map(|&q| ((t, p), (t, q))))
            .unzip()
    }

    fn watch_for_closure(&mut self, now: f64) {
        let values = |t1: f64| JournalValues {
            t1_hat: Some(t1),
            ..Default::default()
        };
        if let Some(t1) = self.closure_reported {
            self.t1_hat = Some(t1);
            self.advance(now, Phase::ValvesClosedDetected, values(t1), vec![]);
            return;
        }
        let (inlet, outlet) = self.ends();
        if inlet.is_empty() {
            return;
        }
        let spec = self.config.spec;
        let db = self.config.deadband;
        if let Ok(Some(detected)) = detect_closure_signature(
            &inlet,
            &outlet,
            spec.inlet_pressure,
            spec.outlet_pressure,
            self.config.confirm,
            db,
        ) {
            // the inlet bottoms out at the closure
            let t1 = inlet
                .iter()
                .filter(|p| p.0 <= detected)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map_or(detected, |p| p.0);
            self.t1_hat = Some(t1);
            self.advance(now, Phase::ValvesClosedDetected, values(t1), vec![]);
            return;
        }
        if self.phase == Phase::Stationary {
            let k = self.config.confirm.max(1);
            let tail = inlet.iter().zip(&outlet).rev().take(k);
            let suspected = inlet.len() >= k
                && tail.clone().all(|(i, o)| {
                    i.1 < spec.inlet_pressure - db && o.1 < spec.outlet_pressure - db
                });
            if suspected {
                self.advance(now, Phase::LeakSuspected, JournalValues::default(), vec![]);
            }
        }
    }

    fn localize(&mut self, now: f64) {
        let Some(t1) = self.t1_hat else { return };
        let inlet = self.inlet();
        let Some((t, p_now)) = inlet
            .iter()
            .rev()
            .find(|p| p.0 >= t1 + self.config.localization_window - 1e-9)
            .copied()
        else {
            return;
        };
        let Some((_, p_t1)) = at_or_before(inlet, t1) else {
            return;
        };
        match LocalizationEstimate::compute(&self.config.spec, p_now, p_t1, t, t1) {
            Ok(est) => {
                let values = JournalValues {
                    t1_hat: Some(t1),
                    z: Some(est.z),
                    z1: Some(est.z1),
                    l1_raw: Some(est.l1_raw),
                    l1: Some(est.l1_hat),
                    l3: Some(est.l3_hat),
                    p0_now: Some(p_now),
                    ..Default::default()
                };
                self.estimate = Some(est);
                self.advance(now, Phase::Localized, values.clone(), vec![]);
                self.advance(now, Phase::AwaitingCondition, values, vec![]);
            }
            Err(e) => {
                let phase = self.phase;
                let values = JournalValues {
                    t1_hat: Some(t1),
                    z: Some(p_now - p_t1),
                    p0_now: Some(p_now),
                    ..Default::default()
                };
                self.record(
                    now,
                    JournalEvent::LocalizationFailed,
                    phase,
                    values,
                    vec![],
                    Some(e.to_string()),
                );
            }
        }
    }

    fn bracket_valves(&self) -> Option<[String; 2]> {
        let est = self.estimate?;
        let s = self.config.spec.crossover_spacing;
        let k = |x: f64| (x / s).round() as usize;
        Some([connecting_id(k(est.l1_hat)), connecting_id(k(est.l3_hat))])
    }

    /// The activation condition on the latest readings, with the inlet
    /// sample time it used.
    fn evaluate_condition(&self) -> Option<(f64, ActivationCheck, JournalValues)> {
        let (est, t1) = (self.estimate?, self.t1_hat?);
        let line = self.config.line;
        let &(t_in, p0) = self.inlet().last()?;
        let &(_, p_dmg) = self.series(line, est.l1_hat).last()?;
        let reference = match self.config.reference {
            ReferenceMode::DamagedAtClosure => at_or_before(self.series(line, est.l1_hat), t1),
            ReferenceMode::UndamagedStationary => self
                .series(self.config.reference_line, est.l1_hat)
                .last()
                .copied(),
        };
        let (_, p_ref) = reference?;
        let check = check_activation(
            p0,
            self.config.spec.inlet_pressure,
            p_dmg,
            p_ref,
            self.config.eps_max,
        );
        let values = JournalValues {
            t1_hat: Some(t1),
            l1: Some(est.l1_hat),
            l3: Some(est.l3_hat),
            p0_now: Some(p0),
            p_l1_damaged: Some(p_dmg),
            p_l1_reference: Some(p_ref),
            inlet_ratio: Some(check.inlet_ratio),
            pressure_ratio: Some(check.pressure_ratio),
            verdict: Some(check.verdict),
            ..Default::default()
        };
        Some((t_in, check, values))
    }

    fn monitor_condition(&mut self, now: f64, out: &mut Decision) {
        let Some((t_in, check, values)) = self.evaluate_condition() else {
            return;
        };
        if self.last_checked_at.is_some_and(|t| t >= t_in) {
            return;
        }
        let est = self.estimate.expect("condition needs an estimate");
        self.last_checked_at = Some(t_in);
        self.last_check = Some(check);
        let valves = self.bracket_valves().expect("estimate present");
        out.messages.push(TelemetryMessage::verdict(
            CENTER_SOURCE,
            now,
            json!({
                "verdict": check.verdict,
                "valve_ids": valves,
                "l1_m": est.l1_hat,
                "l3_m": est.l3_hat,
                "inlet_ratio": check.inlet_ratio,
                "pressure_ratio": check.pressure_ratio,
                "mode": self.config.mode,
            }),
        ));
        if check.verdict == Verdict::Allow && self.config.mode == Mode::Automatic {
            let commands: Vec<Command> = valves
                .iter()
                .map(|id| Command {
                    time_s: now,
                    valve_id: id.clone(),
                    action: Action::Open,
                    cause: Cause::ControlCenterCommand,
                })
                .collect();
            out.commands.extend(commands.iter().cloned());
            self.t2 = Some(now);
            self.advance(now, Phase::Activated, values, commands);
        } else {
            let phase = self.phase;
            let note = (check.verdict == Verdict::Allow)
                .then(|| "awaiting operator confirmation".to_string());
            self.record(now, JournalEvent::Verdict, phase, values, vec![], note);
        }
    }

    fn handle_operator(&mut self, now: f64, out: &mut Decision) {
        let pending = std::mem::take(&mut self.pending_operator);
        for msg in pending {
            self.trigger = Some(msg.id());
            let Ok(cmd) = msg.operator_command() else {
                continue;
            };
            let note =
                format!("{:?} {} by {}", cmd.action, cmd.valve_id, cmd.operator_id).to_lowercase();
            let command = Command {
                time_s: now,
                valve_id: cmd.valve_id.clone(),
                action: cmd.action,
                cause: Cause::OperatorCommand,
            };
            let phase = self.phase;
            let connecting = cmd.valve_id.starts_with("xv-");
            let brackets = self
                .bracket_valves()
                .is_some_and(|b| b.contains(&cmd.valve_id));
            // connecting opens are re-checked on this step's readings
            let current = (cmd.action == Action::Open && connecting && brackets)
                .then(|| self.evaluate_condition())
                .flatten();
            let check = current.as_ref().map(|c| c.1);
            let values = current.map(|c| c.2).unwrap_or_default();
            let allowed = check.is_some_and(|c| c.verdict == Verdict::Allow);
            let refusal = match cmd.action {
                Action::Close => None,
                Action::Open if connecting && !brackets => {
                    Some("valve does not bracket the localized section")
                }
                Action::Open if connecting && !allowed => {
                    Some("no ALLOW verdict on the current readings")
                }
                Action::Open
                    if !connecting && !matches!(phase, Phase::Activated | Phase::Repaired) =>
                {
                    Some("shut-off valves reopen only after activation")
                }
                Action::Open => None,
            };
            if let Some(reason) = refusal {
                let note = Some(format!("{note}: {reason}"));
                self.record(
                    now,
                    JournalEvent::OperatorCommandRejected,
                    phase,
                    values,
                    vec![],
                    note,
                );
                continue;
            }
            if check.is_some() {
                self.last_check = check;
            }
            out.commands.push(command.clone());
            if cmd.action == Action::Open && connecting && phase == Phase::AwaitingCondition {
                self.t2 = Some(now);
                self.advance(now, Phase::Activated, values, vec![command]);
            } else {
                self.record(
                    now,
                    JournalEvent::OperatorCommand,
                    phase,
                    values,
                    vec![command],
                    Some(note),
                );
            }
        }
    }

    /// Marks the damaged section as repaired. Only valid once activated.
    pub fn mark_repaired(&mut self, now: f64) -> Option<JournalRecord> {
        if self.phase != Phase::Activated {
            return None;
        }
        self.trigger = None;
        self.advance(now, Phase::Repaired, JournalValues::default(), vec![]);
        let rec = self.staged.last().cloned();
        self.journal.append(&mut self.staged);
        rec
    }

    /// Feeds `messages` through a fresh center, deciding once per distinct
    /// message time, and returns it.
    pub fn replay(
        config: CenterConfig,
        messages: impl IntoIterator<Item = TelemetryMessage>,
    ) -> Self {
        let mut center = Self::new(config);
        let mut current: Option<f64> = None;
        for msg in messages {
            if !matches!(
                msg.kind,
                MessageKind::PressureSample | MessageKind::ValvePosition | MessageKind::Command
            ) {
                continue;
            }
            if let Some(t) = current.filter(|&t| t != msg.time_s) {
                center.decide(t);
            }
            current = Some(msg.time_s);
            center.ingest(&msg);
        }
        if let Some(t) = current {
            center.decide(t);
        }
        center
    }

    /// Journal as NDJSON, one record per line.
    pub fn export_journal<W: Write>(&self, out: W) -> Result<()> {
        write_journal(&self.journal, out)
    }
}

pub fn write_journal<W: Write>(records: &[JournalRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
