//! Report rendering for `qabot report`.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::Utc;
use chrono_tz::Tz;
use clap::ValueEnum;
use serde_json::{json, Value};
use thiserror::Error;

use qabot_core::analytics::{followup_funnel, topq_impact, usage_report, AnalyticsError};
use qabot_core::engine::rebuild;
use qabot_core::geo;
use qabot_core::rewards::PointValues;
use qabot_core::store::{read_log, Action, EventRecord, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportKind {
    Usage,
    Topq,
    Rewards,
    Funnel,
    Cohorts,
}

impl ReportKind {
    pub fn name(self) -> &'static str {
        match self {
            ReportKind::Usage => "usage",
            ReportKind::Topq => "topq",
            ReportKind::Rewards => "rewards",
            ReportKind::Funnel => "funnel",
            ReportKind::Cohorts => "cohorts",
        }
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("log unreadable: {0}")]
    LogUnreadable(#[from] StoreError),
}

/// Human-readable table plus the same figures as JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub json: Value,
}

pub const NOT_APPLICABLE: &str = "not applicable: the log has no top-question broadcasts";

pub fn load(path: &Path) -> Result<Vec<EventRecord>, ReportError> {
    Ok(read_log(path)?)
}

pub fn build(records: &[EventRecord], kind: ReportKind, gap_minutes: i64, tz: Tz) -> Report {
    match kind {
        ReportKind::Usage => {
            let r = usage_report(records, gap_minutes, tz);
            Report {
                text: r.render(),
                json: serde_json::to_value(&r).expect("serializable"),
            }
        }
        ReportKind::Topq => match topq_impact(records, gap_minutes, tz) {
            Ok(r) => Report {
                text: r.render(),
                json: serde_json::to_value(&r).expect("serializable"),
            },
            Err(AnalyticsError::NoBroadcasts) => Report {
                text: format!("{NOT_APPLICABLE}\n"),
                json: json!({"applicable": false}),
            },
            Err(e) => Report {
                text: format!("error: {e}\n"),
                json: json!({"error": e.to_string()}),
            },
        },
        ReportKind::Funnel => {
            let r = followup_funnel(records);
            Report {
                text: r.render(),
                json: serde_json::to_value(&r).expect("serializable"),
            }
        }
        ReportKind::Cohorts => {
            let r = qabot_core::analytics::leaderboard_cohorts(records, gap_minutes, tz);
            Report {
                text: r.render(),
                json: serde_json::to_value(&r).expect("serializable"),
            }
        }
        ReportKind::Rewards => rewards(records),
    }
}

/// Leaderboards as of the last record. Countries come from registration
/// records; the log holds no addresses, so rows show masked user codes.
fn rewards(records: &[EventRecord]) -> Report {
    let now = records.iter().map(|r| r.at).max().unwrap_or_else(Utc::now);
    let (_, ledger) = rebuild(records, &PointValues::default());
    let countries: BTreeMap<&str, &str> = records
        .iter()
        .filter(|r| r.action == Action::Register)
        .filter_map(|r| r.feature_id.as_deref().map(|c| (r.user_code.as_str(), c)))
        .collect();
    let mut view = ledger.leaderboard(now, None, &BTreeMap::new());
    for row in view.daily.iter_mut().chain(view.alltime.iter_mut()) {
        row.flag = geo::flag(countries.get(row.user_code.as_str()).copied().unwrap_or(""));
    }
    Report {
        text: format!("{}\n", view.render()),
        json: serde_json::to_value(&view).expect("serializable"),
    }
}
