//! Builders for synthetic event logs.

use chrono::{DateTime, Duration, Utc};

use crate::store::{Action, Direction, EventRecord};

#[derive(Debug, Default, Clone)]
pub struct LogBuilder {
    records: Vec<EventRecord>,
}

impl LogBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, at: DateTime<Utc>, user: &str, direction: Direction, action: Action, feature: Option<String>) {
        let seq = self.records.len() as u64 + 1;
        self.records.push(EventRecord {
            seq,
            at,
            user_code: user.to_string(),
            direction,
            action,
            payload_ref: None,
            feature_id: feature,
        });
    }

    pub fn inbound(&mut self, at: DateTime<Utc>, user: &str, action: Action) -> &mut Self {
        self.push(at, user, Direction::Inbound, action, None);
        self
    }

    pub fn inbound_feature(&mut self, at: DateTime<Utc>, user: &str, action: Action, feature: &str) -> &mut Self {
        self.push(at, user, Direction::Inbound, action, Some(feature.to_string()));
        self
    }

    pub fn outbound(&mut self, at: DateTime<Utc>, user: &str, action: Action) -> &mut Self {
        self.push(at, user, Direction::Outbound, action, None);
        self
    }

    /// One inbound event per action, `step` apart, starting at `at`.
    pub fn run(&mut self, at: DateTime<Utc>, user: &str, actions: &[Action], step: Duration) -> &mut Self {
        for (i, a) in actions.iter().enumerate() {
            self.inbound(at + step * i as i32, user, *a);
        }
        self
    }

    /// A broadcast reaching every listed user at `at`.
    pub fn broadcast(&mut self, at: DateTime<Utc>, users: &[&str], entry_id: u64) -> &mut Self {
        for u in users {
            self.push(at, u, Direction::Outbound, Action::TopqSent, Some(entry_id.to_string()));
        }
        self
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    /// Records in time order with fresh sequence numbers, as the store
    /// would have written them.
    pub fn build(&self) -> Vec<EventRecord> {
        let mut v = self.records.clone();
        v.sort_by_key(|r| (r.at, r.seq));
        for (i, r) in v.iter_mut().enumerate() {
            r.seq = i as u64 + 1;
        }
        v
    }
}
