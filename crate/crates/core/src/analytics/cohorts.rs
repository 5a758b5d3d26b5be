use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use chrono_tz::Tz;
use serde::Serialize;

use super::{local_day, mean, sessionize, sorted_interactions, table, Session};
use crate::store::{Action, EventRecord};

/// Share of sessions with a leaderboard view above which a user is frequent.
pub const FREQUENT_SESSION_SHARE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cohort {
    Frequent,
    Occasional,
}

impl Cohort {
    pub fn label(self) -> &'static str {
        match self {
            Cohort::Frequent => "Frequent",
            Cohort::Occasional => "Occasional",
        }
    }

    /// Frequent if the leaderboard was opened twice in one session, or in
    /// more than a tenth of the user's sessions.
    pub fn classify(sessions: &[&Session]) -> Option<Cohort> {
        let with = sessions.iter().filter(|s| s.contains(Action::LeaderboardView)).count();
        if with == 0 {
            return None;
        }
        let repeated = sessions.iter().any(|s| s.count(Action::LeaderboardView) >= 2);
        let share = with as f64 / sessions.len() as f64;
        Some(if repeated || share > FREQUENT_SESSION_SHARE {
            Cohort::Frequent
        } else {
            Cohort::Occasional
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortMetrics {
    pub cohort: Cohort,
    pub users: usize,
    pub avg_active_days: f64,
    /// Days from a user's first activity to the last day in the log.
    pub avg_days_since_start: f64,
    pub avg_leaderboard_views: f64,
    pub avg_sessions: f64,
    pub avg_interactions: f64,
    pub share_sessions_with: Option<f64>,
    pub share_started_with: Option<f64>,
    pub share_ended_with: Option<f64>,
    pub share_started_and_ended_with: Option<f64>,
    pub interactions_per_session_with: Option<f64>,
    pub interactions_per_session_without: Option<f64>,
    /// With over without.
    pub with_without_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortReport {
    pub cohorts: Vec<CohortMetrics>,
    /// Users who opened the leaderboard at least once.
    pub leaderboard_users: usize,
    /// Pooled over all leaderboard users.
    pub with_without_ratio: Option<f64>,
    pub membership: BTreeMap<String, Cohort>,
}

fn share(n: usize, d: usize) -> Option<f64> {
    (d > 0).then(|| n as f64 / d as f64)
}

fn ratio(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    }
}

/// Per-session interaction counts with and without a leaderboard view.
fn split_lengths<'a>(sessions: impl Iterator<Item = &'a Session>) -> (Vec<f64>, Vec<f64>) {
    let (mut with, mut without) = (Vec::new(), Vec::new());
    for s in sessions {
        if s.contains(Action::LeaderboardView) {
            with.push(s.len() as f64);
        } else {
            without.push(s.len() as f64);
        }
    }
    (with, without)
}

fn metrics(cohort: Cohort, users: &[(&str, &Vec<&Session>)], last_day: NaiveDate, tz: Tz) -> CohortMetrics {
    let n = users.len();
    let per_user = |f: &dyn Fn(&[&Session]) -> f64| -> f64 {
        if n == 0 {
            0.0
        } else {
            users.iter().map(|(_, ss)| f(ss)).sum::<f64>() / n as f64
        }
    };
    let days = |ss: &[&Session]| -> BTreeSet<NaiveDate> {
        ss.iter().flat_map(|s| s.events.iter().map(|e| local_day(e.at, tz))).collect()
    };
    let sessions: Vec<&Session> = users.iter().flat_map(|(_, ss)| ss.iter().copied()).collect();
    let lb = |a: Action| a == Action::LeaderboardView;
    let with = sessions.iter().filter(|s| s.contains(Action::LeaderboardView)).count();
    let started = sessions.iter().filter(|s| lb(s.first_action)).count();
    let ended = sessions.iter().filter(|s| s.events.last().is_some_and(|e| lb(e.action))).count();
    let both = sessions
        .iter()
        .filter(|s| lb(s.first_action) && s.events.last().is_some_and(|e| lb(e.action)))
        .count();
    let (w, wo) = split_lengths(sessions.iter().copied());
    let (mw, mwo) = (mean(&w), mean(&wo));
    CohortMetrics {
        cohort,
        users: n,
        avg_active_days: per_user(&|ss| days(ss).len() as f64),
        avg_days_since_start: per_user(&|ss| {
            days(ss).first().map_or(0.0, |d| (last_day - *d).num_days() as f64)
        }),
        avg_leaderboard_views: per_user(&|ss| ss.iter().map(|s| s.count(Action::LeaderboardView)).sum::<usize>() as f64),
        avg_sessions: per_user(&|ss| ss.len() as f64),
        avg_interactions: per_user(&|ss| ss.iter().map(|s| s.len()).sum::<usize>() as f64),
        share_sessions_with: share(with, sessions.len()),
        share_started_with: share(started, sessions.len()),
        share_ended_with: share(ended, sessions.len()),
        share_started_and_ended_with: share(both, sessions.len()),
        interactions_per_session_with: mw,
        interactions_per_session_without: mwo,
        with_without_ratio: ratio(mw, mwo),
    }
}

/// Compares frequent and occasional leaderboard users.
pub fn leaderboard_cohorts(records: &[EventRecord], gap_minutes: i64, tz: Tz) -> CohortReport {
    let events = sorted_interactions(records);
    let sessions = sessionize(&events, gap_minutes).expect("sorted above");
    let last_day = records.iter().map(|r| local_day(r.at, tz)).max();
    let mut by_user: BTreeMap<&str, Vec<&Session>> = BTreeMap::new();
    for s in &sessions {
        by_user.entry(&s.user_code).or_default().push(s);
    }
    let mut membership = BTreeMap::new();
    let mut groups: BTreeMap<Cohort, Vec<(&str, &Vec<&Session>)>> = BTreeMap::new();
    for (u, ss) in &by_user {
        if let Some(c) = Cohort::classify(ss) {
            membership.insert(u.to_string(), c);
            groups.entry(c).or_default().push((u, ss));
        }
    }
    let cohorts = [Cohort::Frequent, Cohort::Occasional]
        .into_iter()
        .map(|c| {
            let users = groups.get(&c).map_or(&[][..], Vec::as_slice);
            metrics(c, users, last_day.unwrap_or_default(), tz)
        })
        .collect();
    let (w, wo) = split_lengths(
        membership
            .keys()
            .flat_map(|u| by_user[u.as_str()].iter().copied()),
    );
    CohortReport {
        cohorts,
        leaderboard_users: membership.len(),
        with_without_ratio: ratio(mean(&w), mean(&wo)),
        membership,
    }
}

impl CohortReport {
    pub fn render(&self) -> String {
        let mut header = vec![String::new()];
        header.extend(self.cohorts.iter().map(|c| c.cohort.label().to_string()));
        let line = |name: &str, f: &dyn Fn(&CohortMetrics) -> String| {
            let mut v = vec![name.to_string()];
            v.extend(self.cohorts.iter().map(f));
            v
        };
        let mut rows = vec![
            line("Users", &|c| c.users.to_string()),
            line("Average active days", &|c| table::num(c.avg_active_days)),
            line("Average days since start", &|c| table::num(c.avg_days_since_start)),
            line("Average leaderboard views", &|c| table::num(c.avg_leaderboard_views)),
            line("Average sessions", &|c| table::num(c.avg_sessions)),
            line("Average interactions", &|c| table::num(c.avg_interactions)),
            line("Sessions with leaderboard", &|c| table::pct(c.share_sessions_with)),
            line("Sessions started with leaderboard", &|c| table::pct(c.share_started_with)),
            line("Sessions ended with leaderboard", &|c| table::pct(c.share_ended_with)),
            line("Sessions started and ended with leaderboard", &|c| {
                table::pct(c.share_started_and_ended_with)
            }),
            line("Interactions per session with leaderboard", &|c| {
                table::opt(c.interactions_per_session_with)
            }),
            line("Interactions per session without leaderboard", &|c| {
                table::opt(c.interactions_per_session_without)
            }),
            line("With/without ratio", &|c| table::opt(c.with_without_ratio)),
        ];
        let mut all = vec!["All leaderboard users: with/without ratio".to_string()];
        all.extend(self.cohorts.iter().map(|_| String::new()));
        if let Some(last) = all.last_mut() {
            *last = table::opt(self.with_without_ratio);
        }
        rows.push(all);
        table::render(&header, &rows)
    }
}
