//! Log metrics: sessions, user groups, usage table, top-question impact,
//! leaderboard cohorts and the follow-up funnel.

mod cohorts;
mod funnel;
pub mod synth;
pub mod table;
mod topq;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, NaiveDate, Utc};
use chrono_tz::Tz;
use serde::Serialize;
use thiserror::Error;

use crate::store::{Action, Direction, EventRecord};

pub use cohorts::{leaderboard_cohorts, Cohort, CohortMetrics, CohortReport};
pub use funnel::{followup_funnel, FunnelReport};
pub use topq::{broadcast_times, topq_impact, FirstActionShares, TopqImpact};

pub const DEFAULT_GAP_MINUTES: i64 = 15;
/// More sessions than this makes a regular user.
pub const REGULAR_ABOVE: usize = 100;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalyticsError {
    #[error("events not sorted by (user, time) at index {0}")]
    UnsortedInput(usize),
    #[error("no broadcasts in the log")]
    NoBroadcasts,
}

/// Any inbound user event.
pub fn is_interaction(r: &EventRecord) -> bool {
    r.direction == Direction::Inbound
}

/// A tap on the interface rather than typed text. Registration, the intro
/// message and unusable input are neither.
pub fn is_interactive(action: Action) -> bool {
    !matches!(
        action,
        Action::Freeform | Action::Intro | Action::Register | Action::Unsupported | Action::TopqSent
    )
}

/// Inbound records sorted by (user, time, seq), ready for [`sessionize`].
pub fn sorted_interactions(records: &[EventRecord]) -> Vec<EventRecord> {
    let mut v: Vec<EventRecord> = records.iter().filter(|r| is_interaction(r)).cloned().collect();
    v.sort_by(|a, b| (&a.user_code, a.at, a.seq).cmp(&(&b.user_code, b.at, b.seq)));
    v
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Session {
    pub user_code: String,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub events: Vec<EventRecord>,
    pub first_action: Action,
}

impl Session {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn duration(&self) -> Duration {
        self.end - self.start
    }

    pub fn contains(&self, action: Action) -> bool {
        self.events.iter().any(|e| e.action == action)
    }

    pub fn count(&self, action: Action) -> usize {
        self.events.iter().filter(|e| e.action == action).count()
    }
}

/// Splits each user's events into maximal runs whose consecutive gaps are
/// shorter than `gap_minutes`. A gap of exactly `gap_minutes` starts a new
/// session. Input must be sorted by (user, time).
pub fn sessionize(events: &[EventRecord], gap_minutes: i64) -> Result<Vec<Session>, AnalyticsError> {
    let gap = Duration::minutes(gap_minutes);
    for (i, w) in events.windows(2).enumerate() {
        if (&w[0].user_code, w[0].at) > (&w[1].user_code, w[1].at) {
            return Err(AnalyticsError::UnsortedInput(i + 1));
        }
    }
    let mut out: Vec<Session> = Vec::new();
    for e in events {
        match out.last_mut() {
            Some(s) if s.user_code == e.user_code && e.at - s.end < gap => {
                s.end = e.at;
                s.events.push(e.clone());
            }
            _ => out.push(Session {
                user_code: e.user_code.clone(),
                start: e.at,
                end: e.at,
                events: vec![e.clone()],
                first_action: e.action,
            }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    OneTime,
    Casual,
    Regular,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::OneTime, Group::Casual, Group::Regular];

    pub fn of(session_count: usize) -> Self {
        match session_count {
            0 | 1 => Group::OneTime,
            n if n <= REGULAR_ABOVE => Group::Casual,
            _ => Group::Regular,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Group::OneTime => "One-time",
            Group::Casual => "Casual",
            Group::Regular => "Regular",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserProfile {
    pub user_code: String,
    pub session_count: usize,
    pub group: Group,
    pub active_days: usize,
    pub interactions: usize,
    pub freeform_count: usize,
    pub interactive_count: usize,
    /// Mean gap between consecutive session starts; `None` with one session.
    pub avg_idle_hours: Option<f64>,
    pub avg_session_minutes: f64,
    /// Gaps between consecutive session starts, in hours.
    #[serde(skip)]
    pub idle_gaps_hours: Vec<f64>,
    #[serde(skip)]
    pub session_minutes: Vec<f64>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn hours(d: Duration) -> f64 {
    d.num_milliseconds() as f64 / 3_600_000.0
}

fn minutes(d: Duration) -> f64 {
    d.num_milliseconds() as f64 / 60_000.0
}

/// Local calendar day of an instant.
pub fn local_day(at: DateTime<Utc>, tz: Tz) -> NaiveDate {
    at.with_timezone(&tz).date_naive()
}

/// One profile per user appearing in `sessions`, ordered by user code.
pub fn segment_users(sessions: &[Session], tz: Tz) -> Vec<UserProfile> {
    let mut by_user: BTreeMap<&str, Vec<&Session>> = BTreeMap::new();
    for s in sessions {
        by_user.entry(&s.user_code).or_default().push(s);
    }
    by_user
        .into_iter()
        .map(|(user, mut ss)| {
            ss.sort_by_key(|s| s.start);
            let days: BTreeSet<NaiveDate> = ss
                .iter()
                .flat_map(|s| s.events.iter().map(|e| local_day(e.at, tz)))
                .collect();
            let events = ss.iter().flat_map(|s| s.events.iter());
            let (mut interactions, mut freeform, mut interactive) = (0, 0, 0);
            for e in events {
                interactions += 1;
                if e.action == Action::Freeform {
                    freeform += 1;
                } else if is_interactive(e.action) {
                    interactive += 1;
                }
            }
            let idle: Vec<f64> = ss.windows(2).map(|w| hours(w[1].start - w[0].start)).collect();
            let durations: Vec<f64> = ss.iter().map(|s| minutes(s.duration())).collect();
            UserProfile {
                user_code: user.to_string(),
                session_count: ss.len(),
                group: Group::of(ss.len()),
                active_days: days.len(),
                interactions,
                freeform_count: freeform,
                interactive_count: interactive,
                avg_idle_hours: mean(&idle),
                avg_session_minutes: mean(&durations).unwrap_or(0.0),
                idle_gaps_hours: idle,
                session_minutes: durations,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UsageRow {
    pub label: String,
    pub users: usize,
    pub sessions: usize,
    pub interactions: usize,
    pub freeform: usize,
    pub interactive: usize,
    pub avg_active_days: f64,
    /// Pooled mean over every gap between consecutive session starts.
    pub avg_idle_hours: Option<f64>,
    /// Mean over every session.
    pub avg_session_minutes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UsageReport {
    pub gap_minutes: i64,
    pub rows: Vec<UsageRow>,
    pub total: UsageRow,
}

fn usage_row(label: &str, profiles: &[&UserProfile]) -> UsageRow {
    let idle: Vec<f64> = profiles.iter().flat_map(|p| p.idle_gaps_hours.iter().copied()).collect();
    let durations: Vec<f64> = profiles.iter().flat_map(|p| p.session_minutes.iter().copied()).collect();
    let days: Vec<f64> = profiles.iter().map(|p| p.active_days as f64).collect();
    UsageRow {
        label: label.to_string(),
        users: profiles.len(),
        sessions: profiles.iter().map(|p| p.session_count).sum(),
        interactions: profiles.iter().map(|p| p.interactions).sum(),
        freeform: profiles.iter().map(|p| p.freeform_count).sum(),
        interactive: profiles.iter().map(|p| p.interactive_count).sum(),
        avg_active_days: mean(&days).unwrap_or(0.0),
        avg_idle_hours: mean(&idle),
        avg_session_minutes: mean(&durations).unwrap_or(0.0),
    }
}

/// Per-group usage with a whole-log totals row.
pub fn usage_report(records: &[EventRecord], gap_minutes: i64, tz: Tz) -> UsageReport {
    let events = sorted_interactions(records);
    let sessions = sessionize(&events, gap_minutes).expect("sorted above");
    let profiles = segment_users(&sessions, tz);
    let rows = Group::ALL
        .iter()
        .map(|g| {
            let members: Vec<&UserProfile> = profiles.iter().filter(|p| p.group == *g).collect();
            usage_row(g.label(), &members)
        })
        .collect();
    let all: Vec<&UserProfile> = profiles.iter().collect();
    UsageReport {
        gap_minutes,
        rows,
        total: usage_row("All", &all),
    }
}

impl UsageReport {
    pub fn render(&self) -> String {
        let mut rows: Vec<&UsageRow> = self.rows.iter().collect();
        rows.push(&self.total);
        let mut header = vec![String::new()];
        header.extend(rows.iter().map(|r| r.label.clone()));
        let line = |name: &str, f: &dyn Fn(&UsageRow) -> String| {
            let mut v = vec![name.to_string()];
            v.extend(rows.iter().map(|r| f(r)));
            v
        };
        let body = vec![
            line("Users", &|r| r.users.to_string()),
            line("Total sessions", &|r| r.sessions.to_string()),
            line("Total interactions", &|r| r.interactions.to_string()),
            line("Total freeform queries", &|r| r.freeform.to_string()),
            line("Total interactive queries", &|r| r.interactive.to_string()),
            line("Average active days", &|r| table::num(r.avg_active_days)),
            line("Average idle time between sessions (hours)", &|r| table::opt(r.avg_idle_hours)),
            line("Average session duration (minutes)", &|r| table::num(r.avg_session_minutes)),
        ];
        table::render(&header, &body)
    }
}

#[cfg(test)]
mod tests;
