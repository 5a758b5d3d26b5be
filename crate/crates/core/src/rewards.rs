//! Points ledger, My Points summary and the daily / all-time leaderboard.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::geo;
use crate::store::Action;

/// Actions that earn points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EarnKind {
    FreeformQuery,
    TrendingSelect,
    RecentSelect,
    FollowupSelect,
}

impl EarnKind {
    pub const ALL: [EarnKind; 4] = [
        EarnKind::FreeformQuery,
        EarnKind::TrendingSelect,
        EarnKind::RecentSelect,
        EarnKind::FollowupSelect,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EarnKind::FreeformQuery => "Questions asked",
            EarnKind::TrendingSelect => "Trending questions opened",
            EarnKind::RecentSelect => "Recent questions opened",
            EarnKind::FollowupSelect => "Follow-ups asked",
        }
    }

    /// The earning kind of a logged inbound action, if any.
    pub fn of_action(action: Action) -> Option<Self> {
        match action {
            Action::Freeform => Some(EarnKind::FreeformQuery),
            Action::TrendingSelect => Some(EarnKind::TrendingSelect),
            Action::RecentSelect => Some(EarnKind::RecentSelect),
            Action::FollowupSelect => Some(EarnKind::FollowupSelect),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointValues {
    pub freeform_query: u32,
    pub trending_select: u32,
    pub recent_select: u32,
    pub followup_select: u32,
}

impl Default for PointValues {
    fn default() -> Self {
        Self {
            freeform_query: 1,
            trending_select: 1,
            recent_select: 1,
            followup_select: 1,
        }
    }
}

impl PointValues {
    pub fn of(&self, kind: EarnKind) -> u32 {
        match kind {
            EarnKind::FreeformQuery => self.freeform_query,
            EarnKind::TrendingSelect => self.trending_select,
            EarnKind::RecentSelect => self.recent_select,
            EarnKind::FollowupSelect => self.followup_select,
        }
    }

    pub fn all_positive(&self) -> bool {
        EarnKind::ALL.iter().all(|k| self.of(*k) > 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub user_code: String,
    pub at: DateTime<Utc>,
    pub kind: EarnKind,
    pub points: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    entries: Vec<LedgerEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PointsSummary {
    pub total: u64,
    pub rank: usize,
    pub breakdown: BTreeMap<EarnKind, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LeaderRow {
    pub rank: usize,
    pub user_code: String,
    pub flag: String,
    pub masked: String,
    pub points: u64,
    pub is_viewer: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LeaderboardView {
    pub daily: Vec<LeaderRow>,
    pub alltime: Vec<LeaderRow>,
    /// Viewer's rank in each list when the viewer appears in it.
    pub viewer_daily: Option<usize>,
    pub viewer_alltime: Option<usize>,
}

pub const LEADERBOARD_SIZE: usize = 10;

/// Per-user aggregate over a window.
#[derive(Debug, Clone)]
struct Standing {
    user_code: String,
    points: u64,
    first_at: DateTime<Utc>,
}

/// Dense ranks over standings already sorted by points descending.
fn dense_ranks(sorted: &[Standing]) -> Vec<usize> {
    let mut ranks = Vec::with_capacity(sorted.len());
    let mut rank = 0;
    let mut prev = None;
    for s in sorted {
        if prev != Some(s.points) {
            rank += 1;
            prev = Some(s.points);
        }
        ranks.push(rank);
    }
    ranks
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn award(&mut self, user_code: &str, kind: EarnKind, at: DateTime<Utc>, values: &PointValues) -> LedgerEntry {
        let entry = LedgerEntry {
            user_code: user_code.to_string(),
            at,
            kind,
            points: values.of(kind),
        };
        self.entries.push(entry.clone());
        entry
    }

    pub fn push(&mut self, entry: LedgerEntry) {
        self.entries.push(entry);
    }

    /// Sorted standings of users with points in `[from, to]`.
    fn standings(&self, from: Option<DateTime<Utc>>, to: DateTime<Utc>) -> Vec<Standing> {
        let mut by_user: BTreeMap<&str, (u64, DateTime<Utc>)> = BTreeMap::new();
        // first activity is measured over everything up to `to`
        let mut first: BTreeMap<&str, DateTime<Utc>> = BTreeMap::new();
        for e in &self.entries {
            if e.at > to {
                continue;
            }
            first
                .entry(&e.user_code)
                .and_modify(|f| *f = (*f).min(e.at))
                .or_insert(e.at);
            if from.is_some_and(|f| e.at < f) {
                continue;
            }
            let slot = by_user.entry(&e.user_code).or_insert((0, e.at));
            slot.0 += u64::from(e.points);
        }
        let mut out: Vec<Standing> = by_user
            .into_iter()
            .filter(|(_, (p, _))| *p > 0)
            .map(|(u, (points, _))| Standing {
                user_code: u.to_string(),
                points,
                first_at: first[u],
            })
            .collect();
        out.sort_by(|a, b| {
            b.points
                .cmp(&a.points)
                .then(a.first_at.cmp(&b.first_at))
                .then(a.user_code.cmp(&b.user_code))
        });
        out
    }

    pub fn total(&self, user_code: &str, now: DateTime<Utc>) -> u64 {
        self.entries
            .iter()
            .filter(|e| e.user_code == user_code && e.at <= now)
            .map(|e| u64::from(e.points))
            .sum()
    }

    /// Dense all-time rank of every user with points.
    pub fn ranks(&self, now: DateTime<Utc>) -> BTreeMap<String, usize> {
        let standings = self.standings(None, now);
        let ranks = dense_ranks(&standings);
        standings.into_iter().zip(ranks).map(|(s, r)| (s.user_code, r)).collect()
    }

    /// Total, dense all-time rank and per-kind breakdown. Users without
    /// points share the rank after the last scoring band.
    pub fn my_points(&self, user_code: &str, now: DateTime<Utc>) -> PointsSummary {
        let mut breakdown = BTreeMap::new();
        let mut total = 0;
        for e in self.entries.iter().filter(|e| e.user_code == user_code && e.at <= now) {
            *breakdown.entry(e.kind).or_insert(0) += u64::from(e.points);
            total += u64::from(e.points);
        }
        let standings = self.standings(None, now);
        let bands: BTreeSet<u64> = standings.iter().map(|s| s.points).collect();
        let rank = if total == 0 {
            bands.len() + 1
        } else {
            bands.iter().filter(|p| **p > total).count() + 1
        };
        PointsSummary { total, rank, breakdown }
    }

    /// Top ten over the last 24 hours and since launch.
    pub fn leaderboard(
        &self,
        now: DateTime<Utc>,
        viewer: Option<&str>,
        directory: &BTreeMap<String, String>,
    ) -> LeaderboardView {
        let build = |from: Option<DateTime<Utc>>| {
            let standings = self.standings(from, now);
            let ranks = dense_ranks(&standings);
            standings
                .into_iter()
                .zip(ranks)
                .take(LEADERBOARD_SIZE)
                .map(|(s, rank)| {
                    let address = directory.get(&s.user_code).map(String::as_str).unwrap_or("");
                    LeaderRow {
                        rank,
                        flag: geo::flag(&geo::country_of(address)),
                        masked: geo::mask_address(if address.is_empty() { &s.user_code } else { address }),
                        is_viewer: viewer == Some(s.user_code.as_str()),
                        user_code: s.user_code,
                        points: s.points,
                    }
                })
                .collect::<Vec<_>>()
        };
        let daily = build(Some(now - Duration::hours(24)));
        let alltime = build(None);
        let find = |rows: &[LeaderRow]| rows.iter().find(|r| r.is_viewer).map(|r| r.rank);
        LeaderboardView {
            viewer_daily: find(&daily),
            viewer_alltime: find(&alltime),
            daily,
            alltime,
        }
    }
}

fn render_rows(rows: &[LeaderRow]) -> String {
    if rows.is_empty() {
        return "No points yet. Ask a question to get on the board!".to_string();
    }
    rows.iter()
        .map(|r| {
            let marker = if r.is_viewer { " 👈 you" } else { "" };
            format!("{}. {} {} · {} pts{}", r.rank, r.flag, r.masked, r.points, marker)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

impl LeaderboardView {
    pub fn render(&self) -> String {
        format!(
            "🏆 Leaderboard\n\n📅 Last 24 hours\n{}\n\n🌍 All time\n{}",
            render_rows(&self.daily),
            render_rows(&self.alltime)
        )
    }
}

impl PointsSummary {
    pub fn render(&self) -> String {
        let mut s = format!("⭐ My Points\n\nTotal: {} pts\nRank: #{}\n", self.total, self.rank);
        if self.breakdown.is_empty() {
            s.push_str("\nYou have no points yet. Ask a question or open a Trending question to start earning.");
        } else {
            s.push('\n');
            for kind in EarnKind::ALL {
                if let Some(p) = self.breakdown.get(&kind) {
                    s.push_str(&format!("{}: {}\n", kind.label(), p));
                }
            }
            s.truncate(s.trim_end().len());
        }
        s
    }
}
