//! Recent and Trending question lists, prefetched answers and the daily
//! top-question selection and schedule.

use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDate, NaiveTime, TimeZone, Utc};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{preview, Button, ListMenu, ListRow, Origin, OutboundMessage, MAX_ROW_DESCRIPTION, MAX_ROW_TITLE};
use crate::geo;
use crate::llm::{CriteriaScores, LlmClient, Tier};

pub const MAX_DISPLAY_WORDS: usize = 150;
/// Characters of each question shown in a list message body.
const BODY_PREVIEW: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ListKind {
    Recent,
    Trending,
}

impl ListKind {
    pub fn row_prefix(self) -> &'static str {
        match self {
            ListKind::Recent => "recent",
            ListKind::Trending => "trend",
        }
    }

    fn heading(self) -> &'static str {
        match self {
            ListKind::Recent => "🕒 Recent Questions",
            ListKind::Trending => "🔥 Trending Questions",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurationConfig {
    pub trending_threshold: u8,
    pub recent_capacity: usize,
    pub trending_capacity: usize,
    /// Rows per rendered list; one more row is kept for navigation.
    pub list_limit: usize,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            trending_threshold: 8,
            recent_capacity: 50,
            trending_capacity: 25,
            list_limit: 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuratedEntry {
    pub entry_id: u64,
    pub display_text: String,
    pub author_country: String,
    pub author_code: String,
    pub created_at: DateTime<Utc>,
    /// Last time the question was submitted again.
    pub refreshed_at: DateTime<Utc>,
    pub scores: Option<CriteriaScores>,
    pub prefetched: BTreeMap<Tier, String>,
    pub times_selected: u64,
    pub featured_at: Option<DateTime<Utc>>,
    normalized: String,
}

impl CuratedEntry {
    pub fn flag(&self) -> String {
        geo::flag(&self.author_country)
    }

    pub fn score(&self) -> u8 {
        self.scores.map_or(0, |s| s.total())
    }

    pub fn answer(&self) -> Option<&str> {
        self.prefetched.get(&Tier::Standard).map(String::as_str)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CurationError {
    #[error("the {0:?} list is empty")]
    EmptyList(ListKind),
    #[error("nothing left to feature")]
    NothingToFeature,
}

/// What happened to a submitted query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryCuration {
    pub entry_id: Option<u64>,
    pub duplicate: bool,
    pub trending: bool,
}

/// Lowercased alphanumeric words, used to spot repeated questions.
pub fn normalize(text: &str) -> String {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CurationStore {
    config: CurationConfig,
    next_id: u64,
    entries: BTreeMap<u64, CuratedEntry>,
    /// Newest first.
    recent: Vec<u64>,
    /// Score descending, then newest first.
    trending: Vec<u64>,
}

impl CurationStore {
    pub fn new(config: CurationConfig) -> Self {
        Self {
            config,
            next_id: 1,
            ..Self::default()
        }
    }

    pub fn config(&self) -> &CurationConfig {
        &self.config
    }

    pub fn entry(&self, id: u64) -> Option<&CuratedEntry> {
        self.entries.get(&id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &CuratedEntry> {
        self.entries.values()
    }

    pub fn recent_ids(&self) -> &[u64] {
        &self.recent
    }

    pub fn trending_ids(&self) -> &[u64] {
        &self.trending
    }

    fn find_normalized(&self, norm: &str) -> Option<u64> {
        self.entries.values().find(|e| e.normalized == norm).map(|e| e.entry_id)
    }

    /// Curation pipeline for an accepted query: filter, rephrase, add to
    /// Recent, prefetch, score, and add to Trending above the threshold.
    pub fn on_new_query(
        &mut self,
        llm: &LlmClient,
        query: &str,
        author_code: &str,
        author_country: &str,
        now: DateTime<Utc>,
    ) -> QueryCuration {
        let Some(question) = llm.recent_filter(query) else {
            return QueryCuration::default();
        };
        let display = llm.rephrase_question(&question);
        let display = display.trim();
        if display.is_empty() || display.split_whitespace().count() > MAX_DISPLAY_WORDS {
            tracing::info!("rephrased question rejected");
            return QueryCuration::default();
        }
        let norm = normalize(display);
        if norm.is_empty() {
            return QueryCuration::default();
        }
        if let Some(id) = self.find_normalized(&norm) {
            if let Some(e) = self.entries.get_mut(&id) {
                e.refreshed_at = now;
            }
            self.recent.retain(|x| *x != id);
            self.recent.insert(0, id);
            self.trim_recent();
            return QueryCuration {
                entry_id: Some(id),
                duplicate: true,
                trending: self.trending.contains(&id),
            };
        }

        let id = self.next_id.max(1);
        self.next_id = id + 1;
        let mut entry = CuratedEntry {
            entry_id: id,
            display_text: display.to_string(),
            author_country: author_country.to_string(),
            author_code: author_code.to_string(),
            created_at: now,
            refreshed_at: now,
            scores: None,
            prefetched: BTreeMap::new(),
            times_selected: 0,
            featured_at: None,
            normalized: norm,
        };
        match llm.prefetch_answer(display) {
            Ok(answer) => {
                entry.prefetched.insert(Tier::Standard, answer);
            }
            Err(e) => tracing::warn!(error = %e, entry = id, "prefetch failed; answer will be filled on selection"),
        }
        match llm.trending_rate(display) {
            Ok(scores) => entry.scores = Some(scores),
            Err(e) => tracing::warn!(error = %e, entry = id, "question not rated"),
        }
        self.entries.insert(id, entry);
        self.recent.insert(0, id);
        self.trim_recent();
        let trending = self.consider_trending(id);
        QueryCuration {
            entry_id: Some(id),
            duplicate: false,
            trending,
        }
    }

    /// Adds an already-scored entry to Trending if it clears the threshold.
    fn consider_trending(&mut self, id: u64) -> bool {
        let Some(entry) = self.entries.get(&id) else { return false };
        if entry.scores.is_none() || entry.score() < self.config.trending_threshold {
            return false;
        }
        if !self.trending.contains(&id) {
            self.trending.push(id);
        }
        let entries = &self.entries;
        self.trending.sort_by(|a, b| {
            let (a, b) = (&entries[a], &entries[b]);
            b.score()
                .cmp(&a.score())
                .then(b.created_at.cmp(&a.created_at))
                .then(b.entry_id.cmp(&a.entry_id))
        });
        let dropped: Vec<u64> = self.trending.split_off(self.trending.len().min(self.config.trending_capacity));
        for d in dropped {
            self.prune(d);
        }
        self.trending.contains(&id)
    }

    fn trim_recent(&mut self) {
        let dropped = self.recent.split_off(self.recent.len().min(self.config.recent_capacity));
        for d in dropped {
            self.prune(d);
        }
    }

    /// Forgets an entry no list refers to. Featured entries stay reachable
    /// from old broadcasts.
    fn prune(&mut self, id: u64) {
        let listed = self.recent.contains(&id) || self.trending.contains(&id);
        let featured = self.entries.get(&id).is_some_and(|e| e.featured_at.is_some());
        if !listed && !featured {
            self.entries.remove(&id);
        }
    }

    /// Inserts an entry directly; used to seed lists and by tests.
    pub fn insert_scored(
        &mut self,
        display_text: &str,
        author_code: &str,
        author_country: &str,
        created_at: DateTime<Utc>,
        scores: Option<CriteriaScores>,
        answer: Option<String>,
    ) -> u64 {
        let id = self.next_id.max(1);
        self.next_id = id + 1;
        let mut prefetched = BTreeMap::new();
        if let Some(a) = answer {
            prefetched.insert(Tier::Standard, a);
        }
        self.entries.insert(
            id,
            CuratedEntry {
                entry_id: id,
                display_text: display_text.to_string(),
                author_country: author_country.to_string(),
                author_code: author_code.to_string(),
                created_at,
                refreshed_at: created_at,
                scores,
                prefetched,
                times_selected: 0,
                featured_at: None,
                normalized: normalize(display_text),
            },
        );
        // keep Recent ordered newest first
        let pos = self
            .recent
            .iter()
            .position(|x| self.entries[x].refreshed_at <= created_at)
            .unwrap_or(self.recent.len());
        self.recent.insert(pos, id);
        self.trim_recent();
        self.consider_trending(id);
        id
    }

    /// Up to `limit` entries of a list, in display order.
    pub fn list(&self, kind: ListKind, limit: usize) -> Vec<&CuratedEntry> {
        let ids = match kind {
            ListKind::Recent => &self.recent,
            ListKind::Trending => &self.trending,
        };
        ids.iter().take(limit).filter_map(|id| self.entries.get(id)).collect()
    }

    /// A list as a list message with one row per entry and a Menu row.
    pub fn render_list(&self, kind: ListKind, recipient: &str) -> Result<OutboundMessage, CurationError> {
        let limit = self.config.list_limit.min(9);
        let entries = self.list(kind, limit);
        if entries.is_empty() {
            return Err(CurationError::EmptyList(kind));
        }
        let mut body = format!("{}\n", kind.heading());
        let mut rows = Vec::with_capacity(entries.len() + 1);
        for (i, e) in entries.iter().enumerate() {
            let flag = e.flag();
            body.push_str(&format!("\n{}. {} {}", i + 1, flag, preview(&e.display_text, BODY_PREVIEW)));
            rows.push(
                ListRow::new(
                    format!("{}:{}", kind.row_prefix(), e.entry_id),
                    preview(&format!("{}. {}", i + 1, e.display_text), MAX_ROW_TITLE),
                )
                .with_description(preview(&format!("{flag} {}", e.display_text), MAX_ROW_DESCRIPTION)),
            );
        }
        body.push_str("\n\nPick a question to see its answer.");
        rows.push(ListRow::new("menu:main", "⬅️ Back to Menu"));
        let section = match kind {
            ListKind::Recent => "Recent",
            ListKind::Trending => "Trending",
        };
        Ok(OutboundMessage::text(recipient, body, Origin::CuratedList)
            .with_list(ListMenu::single("Choose question", section, rows)))
    }

    /// Counts a selection and returns the cached answer, if any.
    pub fn record_selection(&mut self, id: u64) -> Option<&CuratedEntry> {
        let e = self.entries.get_mut(&id)?;
        e.times_selected += 1;
        Some(e)
    }

    pub fn store_answer(&mut self, id: u64, answer: String) {
        if let Some(e) = self.entries.get_mut(&id) {
            e.prefetched.insert(Tier::Standard, answer);
        }
    }

    /// Picks the question of the day: the best trending entry not yet
    /// featured, else the newest recent entry not yet featured.
    pub fn select_topq(&mut self, now: DateTime<Utc>) -> Result<CuratedEntry, CurationError> {
        let unfeatured = |id: &&u64| self.entries.get(id).is_some_and(|e| e.featured_at.is_none());
        let pick = self
            .trending
            .iter()
            .find(unfeatured)
            .or_else(|| self.recent.iter().find(unfeatured))
            .copied()
            .ok_or(CurationError::NothingToFeature)?;
        let e = self.entries.get_mut(&pick).expect("listed entry exists");
        e.featured_at = Some(now);
        Ok(e.clone())
    }
}

/// One day's top-question broadcast.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopQBroadcast {
    pub sent_at: DateTime<Utc>,
    pub day: NaiveDate,
    pub entry_id: u64,
    /// User codes the message was addressed to.
    pub recipients: Vec<String>,
    pub message_id: String,
    /// Recipients whose delivery failed twice.
    pub failed: Vec<String>,
}

/// Builds the daily broadcast message for one recipient.
pub fn topq_message(entry: &CuratedEntry, recipient: &str) -> OutboundMessage {
    let text = format!(
        "🌟 Top Question of the Day\n\n{} {}\n\nTap See Answer to read the answer.",
        entry.flag(),
        entry.display_text
    );
    OutboundMessage::text(recipient, text, Origin::Topq).with_buttons(vec![
        Button::new(format!("topq:answer:{}", entry.entry_id), "See Answer"),
        Button::new("menu:main", "Menu"),
        Button::new("topq:optout", "Stop Daily Question"),
    ])
}

/// Fires once per calendar day at a local send time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopqScheduler {
    pub send_at: NaiveTime,
    pub timezone: Tz,
    pub last_day: Option<NaiveDate>,
}

impl TopqScheduler {
    pub fn new(send_at: NaiveTime, timezone: Tz) -> Self {
        Self {
            send_at,
            timezone,
            last_day: None,
        }
    }

    pub fn local_day(&self, now: DateTime<Utc>) -> NaiveDate {
        now.with_timezone(&self.timezone).date_naive()
    }

    /// The local day to broadcast for, if the send time has passed and
    /// nothing went out that day yet.
    pub fn due(&self, now: DateTime<Utc>) -> Option<NaiveDate> {
        let local = now.with_timezone(&self.timezone);
        let day = local.date_naive();
        (local.time() >= self.send_at && self.last_day.is_none_or(|d| d < day)).then_some(day)
    }

    pub fn mark_sent(&mut self, day: NaiveDate) {
        self.last_day = Some(day);
    }

    /// UTC instant of the send time on a local day.
    pub fn send_instant(&self, day: NaiveDate) -> DateTime<Utc> {
        let naive = day.and_time(self.send_at);
        self.timezone
            .from_local_datetime(&naive)
            .earliest()
            .map(|t| t.with_timezone(&Utc))
            .unwrap_or_else(|| Utc.from_utc_datetime(&naive))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{MockProvider, TierSet};
    use std::sync::Arc;

    fn t(h: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_700_000_000 + h * 3600, 0).unwrap()
    }

    fn llm(seed: u64) -> (Arc<MockProvider>, LlmClient) {
        let m = Arc::new(MockProvider::new(seed));
        (m.clone(), LlmClient::new(m, TierSet::offline()))
    }

    fn scores(total: usize) -> CriteriaScores {
        let mut bits = [false; 10];
        for b in bits.iter_mut().take(total) {
            *b = true;
        }
        CriteriaScores::from_bits(bits)
    }

    #[test]
    fn statements_stay_off_recent() {
        let (_, llm) = llm(7);
        let mut c = CurationStore::new(CurationConfig::default());
        let r = c.on_new_query(&llm, "I love you", "ua", "PK", t(0));
        assert_eq!(r, QueryCuration::default());
        assert!(c.recent_ids().is_empty());
    }

    #[test]
    fn emotional_care_question_trends() {
        let (_, llm) = llm(7);
        let mut c = CurationStore::new(CurationConfig::default());
        let q = "How can we provide emotional care for our parents in their old age?";
        let r = c.on_new_query(&llm, q, "ua", "SD", t(0));
        let id = r.entry_id.unwrap();
        assert!(r.trending);
        let e = c.entry(id).unwrap();
        assert!(e.score() >= 8);
        assert!(e.answer().is_some());
        assert_eq!(c.trending_ids(), &[id]);
    }

    #[test]
    fn duplicates_refresh_recency() {
        let (_, llm) = llm(7);
        let mut c = CurationStore::new(CurationConfig::default());
        let a = c.on_new_query(&llm, "what is excise duty?", "ua", "PK", t(0)).entry_id.unwrap();
        c.on_new_query(&llm, "why is the sky blue?", "ub", "US", t(1));
        let again = c.on_new_query(&llm, "What is excise duty?", "uc", "US", t(2));
        assert!(again.duplicate);
        assert_eq!(again.entry_id, Some(a));
        assert_eq!(c.recent_ids()[0], a);
        assert_eq!(c.recent_ids().len(), 2);
        assert_eq!(c.entry(a).unwrap().author_country, "PK");
    }

    #[test]
    fn recent_render_caps_at_nine() {
        let mut c = CurationStore::new(CurationConfig::default());
        for i in 0..12 {
            c.insert_scored(&format!("Question number {i}?"), "ua", "PK", t(i), None, Some("a".into()));
        }
        let msg = c.render_list(ListKind::Recent, "1").unwrap();
        let rows: Vec<_> = msg.list().unwrap().rows().collect();
        assert_eq!(rows.len(), 10);
        assert_eq!(rows[0].id, format!("recent:{}", 12));
        assert_eq!(rows[9].id, "menu:main");
        assert!(msg.text.contains("🇵🇰"));
        crate::gateway::validate(&msg, Default::default()).unwrap();
    }

    #[test]
    fn empty_trending_is_an_error() {
        let c = CurationStore::new(CurationConfig::default());
        assert_eq!(
            c.render_list(ListKind::Trending, "1"),
            Err(CurationError::EmptyList(ListKind::Trending))
        );
    }

    #[test]
    fn topq_prefers_top_trending_then_recent() {
        let mut c = CurationStore::new(CurationConfig::default());
        assert_eq!(c.select_topq(t(0)), Err(CurationError::NothingToFeature));
        let nine = c.insert_scored("Nine?", "ua", "PK", t(0), Some(scores(9)), None);
        let eight = c.insert_scored("Eight?", "ua", "PK", t(1), Some(scores(8)), None);
        let low = c.insert_scored("Low?", "ua", "PK", t(2), Some(scores(3)), None);
        assert_eq!(c.select_topq(t(3)).unwrap().entry_id, nine);
        assert_eq!(c.select_topq(t(4)).unwrap().entry_id, eight);
        assert_eq!(c.select_topq(t(5)).unwrap().entry_id, low);
        assert_eq!(c.select_topq(t(6)), Err(CurationError::NothingToFeature));
    }

    #[test]
    fn trending_order_and_capacity() {
        let mut c = CurationStore::new(CurationConfig {
            trending_capacity: 2,
            ..Default::default()
        });
        let a = c.insert_scored("A?", "u", "PK", t(0), Some(scores(8)), None);
        let b = c.insert_scored("B?", "u", "PK", t(1), Some(scores(8)), None);
        let top = c.insert_scored("C?", "u", "PK", t(2), Some(scores(10)), None);
        assert_eq!(c.trending_ids(), &[top, b]);
        assert!(c.entry(a).is_some(), "still on Recent");
    }

    #[test]
    fn topq_message_has_opt_out() {
        let mut c = CurationStore::new(CurationConfig::default());
        let id = c.insert_scored("Nine?", "ua", "SD", t(0), Some(scores(9)), None);
        let msg = topq_message(c.entry(id).unwrap(), "1");
        assert!(msg.action_ids().contains(&"topq:optout"));
        assert!(msg.text.contains("🇸🇩"));
        crate::gateway::validate(&msg, Default::default()).unwrap();
    }

    #[test]
    fn scheduler_once_per_local_day() {
        let tz: Tz = "Asia/Karachi".parse().unwrap();
        let mut s = TopqScheduler::new(NaiveTime::from_hms_opt(9, 0, 0).unwrap(), tz);
        let day = NaiveDate::from_ymd_opt(2026, 3, 1).unwrap();
        let at = s.send_instant(day);
        assert_eq!(at.to_rfc3339(), "2026-03-01T04:00:00+00:00");
        assert_eq!(s.due(at - chrono::Duration::seconds(1)), None);
        assert_eq!(s.due(at), Some(day));
        s.mark_sent(day);
        assert_eq!(s.due(at + chrono::Duration::hours(3)), None);
        assert_eq!(s.due(at + chrono::Duration::hours(24)), day.succ_opt());
    }

    #[test]
    fn normalize_ignores_case_punctuation_and_emoji() {
        assert_eq!(normalize("What is up? 🤔"), normalize("what  is UP"));
    }

    proptest::proptest! {
        #[test]
        fn raising_threshold_never_adds(totals in proptest::collection::vec(0usize..=10, 0..40), lo in 0u8..=10, bump in 0u8..=5) {
            let hi = lo.saturating_add(bump).min(11);
            let build = |th: u8| {
                let mut c = CurationStore::new(CurationConfig { trending_threshold: th, trending_capacity: 1000, recent_capacity: 1000, ..Default::default() });
                for (i, s) in totals.iter().enumerate() {
                    c.insert_scored(&format!("q{i}?"), "u", "PK", t(i as i64), Some(scores(*s)), None);
                }
                c.trending_ids().to_vec()
            };
            let low = build(lo);
            let high = build(hi);
            proptest::prop_assert!(high.iter().all(|id| low.contains(id)));
        }
    }
}
