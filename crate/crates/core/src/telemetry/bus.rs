use std::collections::{BTreeSet, HashMap};
use std::sync::mpsc::{channel, Receiver, Sender};

use super::message::{MessageKind, TelemetryMessage};
use crate::error::{Error, Result};

/// Subscription filter; `None` matches everything.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Filter {
    pub kinds: Option<BTreeSet<MessageKind>>,
    pub sources: Option<BTreeSet<String>>,
}

impl Filter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn kind(kind: MessageKind) -> Self {
        Self {
            kinds: Some([kind].into()),
            sources: None,
        }
    }

    pub fn source(source: impl Into<String>) -> Self {
        Self {
            kinds: None,
            sources: Some([source.into()].into()),
        }
    }

    pub fn matches(&self, msg: &TelemetryMessage) -> bool {
        self.kinds.as_ref().is_none_or(|k| k.contains(&msg.kind))
            && self
                .sources
                .as_ref()
                .is_none_or(|s| s.contains(&msg.source))
    }
}

/// Ordered in-process publish/subscribe bus.
///
/// Publishing never blocks: each subscriber owns an unbounded queue.
/// Subscribers see matching messages exactly once, in publish order.
#[derive(Debug, Default)]
pub struct Bus {
    subscribers: Vec<(Filter, Sender<TelemetryMessage>)>,
    last_time: HashMap<String, f64>,
    published: u64,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(&mut self, filter: Filter) -> Receiver<TelemetryMessage> {
        let (tx, rx) = channel();
        self.subscribers.push((filter, tx));
        rx
    }

    /// Validates and fans out `msg`. Time may not regress per source.
    pub fn publish(&mut self, msg: TelemetryMessage) -> Result<()> {
        msg.validate()?;
        if let Some(&last) = self.last_time.get(&msg.source) {
            if msg.time_s < last {
                return Err(Error::Schema(format!(
                    "time regressed for `{}`: {} after {last}",
                    msg.source, msg.time_s
                )));
            }
        }
        self.last_time.insert(msg.source.clone(), msg.time_s);
        self.published += 1;
        // dropped receivers unsubscribe themselves
        self.subscribers
            .retain(|(filter, tx)| !filter.matches(&msg) || tx.send(msg.clone()).is_ok());
        Ok(())
    }

    pub fn published(&self) -> u64 {
        self.published
    }

    pub fn subscriber_count(&self) -> usize {
        self.subscribers.len()
    }
}
