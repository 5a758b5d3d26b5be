use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, NaiveDate, Utc};
use chrono_tz::Tz;
use serde::Serialize;

use super::{is_interactive, local_day, sessionize, sorted_interactions, table, AnalyticsError, Session};
use crate::store::{Action, EventRecord};

/// Distinct instants at which a broadcast went out.
pub fn broadcast_times(records: &[EventRecord]) -> Vec<DateTime<Utc>> {
    let set: BTreeSet<DateTime<Utc>> = records
        .iter()
        .filter(|r| r.action == Action::TopqSent)
        .map(|r| r.at)
        .collect();
    set.into_iter().collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FirstActionShares {
    pub sessions: usize,
    pub freeform_first: usize,
    pub interactive_first: usize,
    pub freeform_share: Option<f64>,
    pub interactive_share: Option<f64>,
}

impl FirstActionShares {
    fn add(&mut self, s: &Session) {
        self.sessions += 1;
        if s.first_action == Action::Freeform {
            self.freeform_first += 1;
        } else if is_interactive(s.first_action) {
            self.interactive_first += 1;
        }
    }

    fn finish(mut self) -> Self {
        let n = self.sessions as f64;
        if self.sessions > 0 {
            self.freeform_share = Some(self.freeform_first as f64 / n);
            self.interactive_share = Some(self.interactive_first as f64 / n);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopqImpact {
    pub broadcasts: usize,
    pub broadcast_days: usize,
    pub other_days: usize,
    pub mean_active_broadcast_days: f64,
    pub mean_active_other_days: Option<f64>,
    /// Broadcast-day mean over other-day mean.
    pub active_ratio: Option<f64>,
    /// Per user: share of their active days with activity inside a 24-hour
    /// window after a broadcast.
    pub within_window_share: BTreeMap<String, f64>,
    pub mean_within_window_share: Option<f64>,
    /// Interactions by hour since the latest broadcast, for the 24 hours
    /// after it.
    pub hourly: [usize; 24],
    pub inside_window: FirstActionShares,
    pub outside_window: FirstActionShares,
}

/// The latest broadcast at or before `at`, if `at` lies within 24 hours of it.
fn window_start(broadcasts: &[DateTime<Utc>], at: DateTime<Utc>) -> Option<DateTime<Utc>> {
    let idx = broadcasts.partition_point(|b| *b <= at);
    let b = *broadcasts.get(idx.checked_sub(1)?)?;
    (at - b < Duration::hours(24)).then_some(b)
}

/// Engagement around daily broadcasts. Days span from the first to the
/// last day with any record, in the service timezone.
pub fn topq_impact(records: &[EventRecord], gap_minutes: i64, tz: Tz) -> Result<TopqImpact, AnalyticsError> {
    let broadcasts = broadcast_times(records);
    if broadcasts.is_empty() {
        return Err(AnalyticsError::NoBroadcasts);
    }
    let events = sorted_interactions(records);

    let mut active: BTreeMap<NaiveDate, BTreeSet<&str>> = BTreeMap::new();
    for e in &events {
        active.entry(local_day(e.at, tz)).or_default().insert(&e.user_code);
    }
    let first = records.iter().map(|r| local_day(r.at, tz)).min().expect("broadcasts exist");
    let last = records.iter().map(|r| local_day(r.at, tz)).max().expect("broadcasts exist");
    let bdays: BTreeSet<NaiveDate> = broadcasts.iter().map(|b| local_day(*b, tz)).collect();
    let (mut b_sum, mut b_n, mut o_sum, mut o_n) = (0usize, 0usize, 0usize, 0usize);
    let mut day = first;
    while day <= last {
        let n = active.get(&day).map_or(0, BTreeSet::len);
        if bdays.contains(&day) {
            b_sum += n;
            b_n += 1;
        } else {
            o_sum += n;
            o_n += 1;
        }
        day = day.succ_opt().expect("date in range");
    }
    let mean_b = b_sum as f64 / b_n as f64;
    let mean_o = (o_n > 0).then(|| o_sum as f64 / o_n as f64);
    let ratio = mean_o.and_then(|o| (o > 0.0).then(|| mean_b / o));

    let mut user_days: BTreeMap<&str, (BTreeSet<NaiveDate>, BTreeSet<NaiveDate>)> = BTreeMap::new();
    let mut hourly = [0usize; 24];
    for e in &events {
        let day = local_day(e.at, tz);
        let slot = user_days.entry(&e.user_code).or_default();
        slot.0.insert(day);
        if let Some(b) = window_start(&broadcasts, e.at) {
            slot.1.insert(day);
            hourly[((e.at - b).num_milliseconds() / 3_600_000) as usize] += 1;
        }
    }
    let within: BTreeMap<String, f64> = user_days
        .into_iter()
        .map(|(u, (all, win))| (u.to_string(), win.len() as f64 / all.len() as f64))
        .collect();
    let mean_within = (!within.is_empty()).then(|| within.values().sum::<f64>() / within.len() as f64);

    let sessions = sessionize(&events, gap_minutes)?;
    let (mut inside, mut outside) = (FirstActionShares::default(), FirstActionShares::default());
    for s in &sessions {
        if window_start(&broadcasts, s.start).is_some() {
            inside.add(s);
        } else {
            outside.add(s);
        }
    }

    Ok(TopqImpact {
        broadcasts: broadcasts.len(),
        broadcast_days: b_n,
        other_days: o_n,
        mean_active_broadcast_days: mean_b,
        mean_active_other_days: mean_o,
        active_ratio: ratio,
        within_window_share: within,
        mean_within_window_share: mean_within,
        hourly,
        inside_window: inside.finish(),
        outside_window: outside.finish(),
    })
}

impl TopqImpact {
    pub fn render(&self) -> String {
        let header = vec!["Metric".to_string(), "Value".to_string()];
        let mut rows = vec![
            vec!["Broadcasts".into(), self.broadcasts.to_string()],
            vec!["Broadcast days".into(), self.broadcast_days.to_string()],
            vec!["Other days".into(), self.other_days.to_string()],
            vec!["Mean active users (broadcast days)".into(), table::num(self.mean_active_broadcast_days)],
            vec!["Mean active users (other days)".into(), table::opt(self.mean_active_other_days)],
            vec!["Active-user ratio".into(), table::opt(self.active_ratio)],
            vec!["Mean share of active days within 24h".into(), table::pct(self.mean_within_window_share)],
            vec!["Sessions in window starting freeform".into(), table::pct(self.inside_window.freeform_share)],
            vec!["Sessions in window starting interactive".into(), table::pct(self.inside_window.interactive_share)],
            vec!["Other sessions starting freeform".into(), table::pct(self.outside_window.freeform_share)],
            vec!["Other sessions starting interactive".into(), table::pct(self.outside_window.interactive_share)],
        ];
        for (h, n) in self.hourly.iter().enumerate() {
            rows.push(vec![format!("Interactions in hour {h}"), n.to_string()]);
        }
        table::render(&header, &rows)
    }
}
