//! Per-conversation orchestration: registration, answering, chunked
//! delivery, escalation, follow-ups, curated selections, rewards views,
//! opt-out and the daily broadcast.

mod chunk;
pub mod views;

use std::collections::{BTreeMap, VecDeque};

use chrono::{DateTime, NaiveTime, Utc};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chunk::{chunk_text, ChunkPlan, DEFAULT_CHUNK_LIMIT, MIN_CHUNK_LIMIT};

use crate::curation::{topq_message, CurationConfig, CurationError, CurationStore, ListKind, TopQBroadcast, TopqScheduler};
use crate::gateway::{render_outbound, validate, GatewayError, InboundKind, InboundMessage, OutboundMessage, Outbox, RenderLimits};
use crate::geo;
use crate::llm::{Exchange, LlmClient, LlmError, Tier};
use crate::rewards::{EarnKind, Ledger, LedgerEntry, PointValues};
use crate::store::{Action, Direction, Draft, EventRecord, EventStore, Pseudonymizer, StoreError};

pub const USERS_SNAPSHOT: &str = "users.json";
pub const CURATION_SNAPSHOT: &str = "curation.json";
pub const DIRECTORY_SNAPSHOT: &str = "directory.json";
pub const SCHEDULER_SNAPSHOT: &str = "scheduler.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub chunk_limit: usize,
    /// Messages that start registration, compared case-insensitively.
    pub intro_keywords: Vec<String>,
    pub text_limit: usize,
    pub points: PointValues,
    pub curation: CurationConfig,
    pub topq_send_at: NaiveTime,
    pub timezone: Tz,
    pub salt: String,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            chunk_limit: DEFAULT_CHUNK_LIMIT,
            intro_keywords: ["hi", "hello", "start", "join"].map(String::from).to_vec(),
            text_limit: crate::gateway::DEFAULT_TEXT_LIMIT,
            points: PointValues::default(),
            curation: CurationConfig::default(),
            topq_send_at: NaiveTime::from_hms_opt(9, 0, 0).expect("valid time"),
            timezone: Tz::UTC,
            salt: "local".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationState {
    pub user_code: String,
    pub registered: bool,
    pub country: String,
    pub pending_chunks: VecDeque<String>,
    pub last_exchange: Option<Exchange>,
    pub followups: Option<crate::llm::FollowupSet>,
    /// Answers generated for the follow-ups when they were suggested.
    pub followup_answers: BTreeMap<usize, String>,
    pub opted_out: bool,
}

impl ConversationState {
    pub fn fresh(user_code: &str, country: &str) -> Self {
        Self {
            user_code: user_code.to_string(),
            registered: false,
            country: country.to_string(),
            pending_chunks: VecDeque::new(),
            last_exchange: None,
            followups: None,
            followup_answers: BTreeMap::new(),
            opted_out: false,
        }
    }

    pub fn record(&self) -> UserRecord {
        UserRecord {
            registered: self.registered,
            country: self.country.clone(),
            opted_out: self.opted_out,
        }
    }
}

/// The durable part of a user's state, recoverable from the log alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub registered: bool,
    pub country: String,
    pub opted_out: bool,
}

/// Why a turn answered with a notice instead of doing what was asked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Notice {
    UnregisteredUser,
    UnknownActionId,
    ProviderFailure,
    NothingPending,
    NoPriorQuery,
    NoFollowups,
    FollowupsUnavailable,
    EmptyList,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnOutcome {
    pub user_code: String,
    pub action: Action,
    pub outbound: Vec<OutboundMessage>,
    pub notice: Option<Notice>,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("turn not persisted: {0}")]
    Storage(#[from] StoreError),
    #[error("turn produced an invalid message: {0}")]
    Render(GatewayError),
    #[error("inbound message is malformed")]
    MalformedInbound,
}

/// Staged effects of one turn, applied only after the log append succeeds.
struct Turn<'a> {
    now: DateTime<Utc>,
    recipient: String,
    base_curation: &'a CurationStore,
    curation: Option<CurationStore>,
    awards: Vec<LedgerEntry>,
    notice: Option<Notice>,
}

impl Turn<'_> {
    fn curation(&self) -> &CurationStore {
        self.curation.as_ref().unwrap_or(self.base_curation)
    }

    fn curation_mut(&mut self) -> &mut CurationStore {
        self.curation.get_or_insert_with(|| self.base_curation.clone())
    }
}

struct Reply {
    action: Action,
    feature: Option<String>,
    outbound: Vec<OutboundMessage>,
}

impl Reply {
    fn new(action: Action, outbound: Vec<OutboundMessage>) -> Self {
        Self {
            action,
            feature: None,
            outbound,
        }
    }

    fn feature(mut self, id: impl Into<String>) -> Self {
        self.feature = Some(id.into());
        self
    }
}

pub struct Engine {
    config: EngineConfig,
    llm: LlmClient,
    pseudo: Pseudonymizer,
    store: EventStore,
    users: BTreeMap<String, ConversationState>,
    directory: BTreeMap<String, String>,
    curation: CurationStore,
    ledger: Ledger,
    scheduler: TopqScheduler,
    broadcasts: Vec<TopQBroadcast>,
}

impl Engine {
    pub fn new(config: EngineConfig, llm: LlmClient, store: EventStore) -> Self {
        let curation = CurationStore::new(config.curation);
        let scheduler = TopqScheduler::new(config.topq_send_at, config.timezone);
        let pseudo = Pseudonymizer::new(config.salt.clone());
        Self {
            config,
            llm,
            pseudo,
            store,
            users: BTreeMap::new(),
            directory: BTreeMap::new(),
            curation,
            ledger: Ledger::new(),
            scheduler,
            broadcasts: Vec::new(),
        }
    }

    /// Restores an engine from a store directory: snapshots for
    /// conversation state and curation, the log for the ledger.
    pub fn restore(config: EngineConfig, llm: LlmClient, store: EventStore) -> Result<Self, StoreError> {
        let mut engine = Self::new(config, llm, store);
        if let Some(users) = engine.store.load_snapshot(USERS_SNAPSHOT)? {
            engine.users = users;
        }
        if let Some(dir) = engine.store.load_snapshot(DIRECTORY_SNAPSHOT)? {
            engine.directory = dir;
        }
        if let Some(cur) = engine.store.load_snapshot(CURATION_SNAPSHOT)? {
            engine.curation = cur;
        }
        if let Some(s) = engine.store.load_snapshot::<TopqScheduler>(SCHEDULER_SNAPSHOT)? {
            engine.scheduler.last_day = s.last_day;
        }
        let (users, ledger) = rebuild(engine.store.records(), &engine.config.points);
        engine.ledger = ledger;
        // the log wins over a stale snapshot for the durable fields
        for (code, rec) in users {
            let st = engine
                .users
                .entry(code.clone())
                .or_insert_with(|| ConversationState::fresh(&code, &rec.country));
            st.registered = rec.registered;
            st.opted_out = rec.opted_out;
            st.country = rec.country;
        }
        Ok(engine)
    }

    /// Writes the snapshots next to the log.
    pub fn flush(&self) -> Result<(), StoreError> {
        self.store.save_snapshot(USERS_SNAPSHOT, &self.users)?;
        self.store.save_snapshot(DIRECTORY_SNAPSHOT, &self.directory)?;
        self.store.save_snapshot(CURATION_SNAPSHOT, &self.curation)?;
        self.store.save_snapshot(SCHEDULER_SNAPSHOT, &self.scheduler)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn llm(&self) -> &LlmClient {
        &self.llm
    }

    pub fn store(&self) -> &EventStore {
        &self.store
    }

    pub fn records(&self) -> &[EventRecord] {
        self.store.records()
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn curation(&self) -> &CurationStore {
        &self.curation
    }

    pub fn curation_mut(&mut self) -> &mut CurationStore {
        &mut self.curation
    }

    pub fn directory(&self) -> &BTreeMap<String, String> {
        &self.directory
    }

    pub fn broadcasts(&self) -> &[TopQBroadcast] {
        &self.broadcasts
    }

    pub fn scheduler(&self) -> &TopqScheduler {
        &self.scheduler
    }

    pub fn code_of(&self, address: &str) -> String {
        self.pseudo.code(address)
    }

    pub fn state(&self, address: &str) -> Option<&ConversationState> {
        self.users.get(&self.pseudo.code(address))
    }

    pub fn users(&self) -> &BTreeMap<String, ConversationState> {
        &self.users
    }

    /// Durable projection of live state, comparable with [`rebuild`].
    pub fn user_records(&self) -> BTreeMap<String, UserRecord> {
        self.users
            .iter()
            .filter(|(_, s)| s.registered)
            .map(|(c, s)| (c.clone(), s.record()))
            .collect()
    }

    pub fn limits(&self) -> RenderLimits {
        RenderLimits {
            text_limit: self.config.text_limit,
        }
    }

    /// Processes one inbound message. Either the whole turn (state, log
    /// records, points, curation) is applied, or none of it is.
    pub fn handle_inbound(&mut self, msg: &InboundMessage) -> Result<TurnOutcome, EngineError> {
        if !msg.is_well_formed() {
            return Err(EngineError::MalformedInbound);
        }
        let code = self.pseudo.code(&msg.sender);
        let mut state = self
            .users
            .get(&code)
            .cloned()
            .unwrap_or_else(|| ConversationState::fresh(&code, &geo::country_of(&msg.sender)));
        let mut turn = Turn {
            now: msg.received_at,
            recipient: msg.sender.clone(),
            base_curation: &self.curation,
            curation: None,
            awards: Vec::new(),
            notice: None,
        };
        let reply = self.dispatch(&mut state, &mut turn, msg);
        let limits = self.limits();
        for out in &reply.outbound {
            validate(out, limits).map_err(EngineError::Render)?;
        }

        let inbound_payload = match msg.kind {
            InboundKind::Text => Some(msg.body.clone()),
            InboundKind::ButtonReply | InboundKind::ListReply => msg.reply_id.clone(),
            InboundKind::System => msg.raw_type.clone(),
        };
        let mut drafts = Vec::with_capacity(1 + reply.outbound.len());
        let mut inbound = Draft::new(turn.now, &code, Direction::Inbound, reply.action);
        inbound.feature_id = reply.feature.clone();
        inbound.payload = inbound_payload;
        drafts.push(inbound);
        for out in &reply.outbound {
            let mut d = Draft::new(turn.now, &code, Direction::Outbound, reply.action).payload(out.text.clone());
            d.feature_id = reply.feature.clone();
            drafts.push(d);
        }
        if let Some(kind) = EarnKind::of_action(reply.action) {
            turn.awards.push(LedgerEntry {
                user_code: code.clone(),
                at: turn.now,
                kind,
                points: self.config.points.of(kind),
            });
        }

        let Turn {
            curation, awards, notice, ..
        } = turn;
        self.store.append_turn(drafts)?;

        if let Some(c) = curation {
            self.curation = c;
        }
        for a in awards {
            self.ledger.push(a);
        }
        self.directory.insert(code.clone(), msg.sender.clone());
        self.users.insert(code.clone(), state);
        Ok(TurnOutcome {
            user_code: code,
            action: reply.action,
            outbound: reply.outbound,
            notice,
        })
    }

    fn is_intro(&self, text: &str) -> bool {
        let t = text.trim().trim_end_matches(['!', '.']);
        self.config.intro_keywords.iter().any(|k| k.eq_ignore_ascii_case(t))
    }

    fn dispatch(&self, state: &mut ConversationState, turn: &mut Turn, msg: &InboundMessage) -> Reply {
        let to = turn.recipient.clone();
        let reply_id = msg.reply_id.as_deref().unwrap_or("");

        if !state.registered {
            if msg.kind.is_reply() && reply_id == views::TERMS_ACCEPT {
                state.registered = true;
                let country = state.country.clone();
                return Reply::new(Action::Register, vec![views::welcome(&to, state.opted_out)]).feature(country);
            }
            if !(msg.kind == InboundKind::Text && self.is_intro(&msg.body)) {
                turn.notice = Some(Notice::UnregisteredUser);
            }
            return Reply::new(Action::Intro, vec![views::terms(&to)]);
        }

        match msg.kind {
            InboundKind::System => {
                turn.notice = Some(Notice::Unsupported);
                Reply::new(Action::Unsupported, vec![views::unsupported(&to)])
            }
            InboundKind::Text => self.freeform(state, turn, &msg.body),
            InboundKind::ButtonReply | InboundKind::ListReply => self.on_reply(state, turn, reply_id),
        }
    }

    fn on_reply(&self, state: &mut ConversationState, turn: &mut Turn, id: &str) -> Reply {
        let to = turn.recipient.clone();
        match id {
            views::MENU => Reply::new(Action::Menu, vec![views::menu(&to, state.opted_out)]),
            views::TERMS_ACCEPT => Reply::new(
                Action::Menu,
                vec![views::menu_with(
                    &to,
                    "You're already registered. Type a question or pick an option below.",
                    state.opted_out,
                    crate::gateway::Origin::Menu,
                )],
            ),
            "menu:trending" => self.show_list(turn, ListKind::Trending),
            "menu:recent" => self.show_list(turn, ListKind::Recent),
            "menu:rewards" => Reply::new(Action::Menu, vec![views::rewards_menu(&to)]).feature("rewards"),
            "menu:about" => Reply::new(Action::Menu, vec![views::about(&to)]).feature("about"),
            "menu:optout" | "topq:optout" => {
                state.opted_out = true;
                Reply::new(Action::OptOut, vec![views::opted_out(&to)])
            }
            "menu:optin" => {
                state.opted_out = false;
                Reply::new(Action::OptIn, vec![views::opted_in(&to)])
            }
            views::CONTINUE => self.continue_reading(state, turn),
            views::BETTER => self.better_answer(state, turn),
            views::FOLLOWUPS => self.suggest_followups(state, turn),
            views::FOLLOWUPS_ALL => match &state.followups {
                Some(set) => Reply::new(Action::FollowupFullList, vec![views::followups_full(&to, set)]),
                None => {
                    turn.notice = Some(Notice::NoFollowups);
                    Reply::new(
                        Action::FollowupFullList,
                        vec![views::notice(&to, "Ask a question first, then tap Suggest Follow-ups under the answer.")],
                    )
                }
            },
            "rewards:leaderboard" => {
                let view = self.ledger.leaderboard(turn.now, Some(&state.user_code), &self.directory);
                Reply::new(Action::LeaderboardView, vec![views::leaderboard(&to, view.render())])
            }
            "rewards:mypoints" => {
                let summary = self.ledger.my_points(&state.user_code, turn.now);
                Reply::new(Action::MypointsView, vec![views::my_points(&to, summary.render())])
            }
            _ => {
                if let Some(n) = id.strip_prefix("fu:").and_then(|n| n.parse::<usize>().ok()) {
                    if (1..=6).contains(&n) {
                        return self.select_followup(state, turn, n);
                    }
                }
                let curated = [
                    ("trend:", Action::TrendingSelect),
                    ("recent:", Action::RecentSelect),
                    ("topq:answer:", Action::TopqAnswerView),
                ];
                for (prefix, action) in curated {
                    if let Some(eid) = id.strip_prefix(prefix).and_then(|n| n.parse::<u64>().ok()) {
                        if turn.curation().entry(eid).is_some() {
                            return self.select_curated(state, turn, eid, action);
                        }
                    }
                }
                turn.notice = Some(Notice::UnknownActionId);
                Reply::new(
                    Action::Unsupported,
                    vec![views::menu_with(
                        &to,
                        "Sorry, that option is no longer available. Here is the menu.",
                        state.opted_out,
                        crate::gateway::Origin::Apology,
                    )],
                )
                .feature(id.chars().take(64).collect::<String>())
            }
        }
    }

    fn provider_apology(turn: &mut Turn, err: &LlmError) -> OutboundMessage {
        tracing::warn!(error = %err, "provider call failed");
        turn.notice = Some(Notice::ProviderFailure);
        views::apology(
            &turn.recipient,
            "Sorry, I couldn't get an answer right now. Please try again in a moment.",
        )
    }

    /// Chunks an answer, sends the first piece and queues the rest.
    fn deliver_answer(&self, state: &mut ConversationState, to: &str, full: &str) -> OutboundMessage {
        let plan = chunk_text(full, self.config.chunk_limit);
        let mut chunks: VecDeque<String> = plan.chunks.into();
        let first = chunks.pop_front().unwrap_or_default();
        state.pending_chunks = chunks;
        views::answer_chunk(to, &first, !state.pending_chunks.is_empty())
    }

    fn start_exchange(&self, state: &mut ConversationState, to: &str, query: &str, answer: String, tier: Tier, header: bool) -> OutboundMessage {
        let full = if header { format!("❓ {query}\n\n{answer}") } else { answer.clone() };
        state.last_exchange = Some(Exchange {
            query: query.to_string(),
            answer,
            tier,
        });
        state.followups = None;
        state.followup_answers.clear();
        self.deliver_answer(state, to, &full)
    }

    fn freeform(&self, state: &mut ConversationState, turn: &mut Turn, text: &str) -> Reply {
        let to = turn.recipient.clone();
        match self.llm.answer_query(text, state.last_exchange.as_ref(), Tier::Standard) {
            Ok(answer) => {
                let out = self.start_exchange(state, &to, text, answer, Tier::Standard, false);
                let (code, country, now) = (state.user_code.clone(), state.country.clone(), turn.now);
                let llm = &self.llm;
                turn.curation_mut().on_new_query(llm, text, &code, &country, now);
                Reply::new(Action::Freeform, vec![out])
            }
            Err(e) => Reply::new(Action::Freeform, vec![Self::provider_apology(turn, &e)]),
        }
    }

    fn continue_reading(&self, state: &mut ConversationState, turn: &mut Turn) -> Reply {
        let to = turn.recipient.clone();
        match state.pending_chunks.pop_front() {
            Some(chunk) => Reply::new(
                Action::ContinueReading,
                vec![views::answer_chunk(&to, &chunk, !state.pending_chunks.is_empty())],
            ),
            None => {
                turn.notice = Some(Notice::NothingPending);
                Reply::new(
                    Action::ContinueReading,
                    vec![views::notice(&to, "You're all caught up. There is nothing more to read for this answer.")],
                )
            }
        }
    }

    fn better_answer(&self, state: &mut ConversationState, turn: &mut Turn) -> Reply {
        let to = turn.recipient.clone();
        let Some(query) = state.last_exchange.as_ref().map(|e| e.query.clone()) else {
            turn.notice = Some(Notice::NoPriorQuery);
            return Reply::new(
                Action::BetterAnswer,
                vec![views::notice(&to, "Ask me a question first, then I can look for a better answer.")],
            );
        };
        match self.llm.answer_query(&query, None, Tier::Premium) {
            Ok(answer) => {
                let out = self.start_exchange(state, &to, &query, answer, Tier::Premium, false);
                Reply::new(Action::BetterAnswer, vec![out])
            }
            Err(e) => Reply::new(Action::BetterAnswer, vec![Self::provider_apology(turn, &e)]),
        }
    }

    /// Generates the six suggestions on first request and prefetches their
    /// answers, so picking one needs no further model call.
    fn suggest_followups(&self, state: &mut ConversationState, turn: &mut Turn) -> Reply {
        let to = turn.recipient.clone();
        let Some(ex) = state.last_exchange.clone() else {
            turn.notice = Some(Notice::NoPriorQuery);
            return Reply::new(
                Action::FollowupView,
                vec![views::notice(&to, "Ask me a question first, then I can suggest follow-ups.")],
            );
        };
        if state.followups.is_none() {
            match self.llm.suggest_followups(&ex.query, &ex.answer) {
                Ok(set) => {
                    state.followup_answers.clear();
                    for (i, q) in set.questions().iter().enumerate() {
                        match self.llm.prefetch_answer(q) {
                            Ok(a) => {
                                state.followup_answers.insert(i + 1, a);
                            }
                            Err(e) => tracing::warn!(error = %e, position = i + 1, "follow-up prefetch failed"),
                        }
                    }
                    state.followups = Some(set);
                }
                Err(e) => {
                    tracing::warn!(error = %e, "follow-ups unavailable");
                    turn.notice = Some(Notice::FollowupsUnavailable);
                    return Reply::new(
                        Action::FollowupView,
                        vec![views::notice(&to, "Sorry, I couldn't suggest follow-up questions this time. Try asking another question.")],
                    );
                }
            }
        }
        let set = state.followups.as_ref().expect("set above");
        Reply::new(Action::FollowupView, vec![views::followups_up_front(&to, set)])
    }

    fn select_followup(&self, state: &mut ConversationState, turn: &mut Turn, n: usize) -> Reply {
        let to = turn.recipient.clone();
        let Some(question) = state.followups.as_ref().and_then(|s| s.get(n)).map(str::to_string) else {
            turn.notice = Some(Notice::NoFollowups);
            return Reply::new(
                Action::Unsupported,
                vec![views::notice(&to, "Those suggestions have expired. Ask a question to get new ones.")],
            )
            .feature(n.to_string());
        };
        let answer = match state.followup_answers.get(&n) {
            Some(a) => a.clone(),
            None => match self.llm.prefetch_answer(&question) {
                Ok(a) => a,
                Err(e) => {
                    return Reply::new(Action::FollowupSelect, vec![Self::provider_apology(turn, &e)]).feature(n.to_string());
                }
            },
        };
        let out = self.start_exchange(state, &to, &question, answer, Tier::Standard, true);
        Reply::new(Action::FollowupSelect, vec![out]).feature(n.to_string())
    }

    fn show_list(&self, turn: &mut Turn, kind: ListKind) -> Reply {
        let to = turn.recipient.clone();
        let action = match kind {
            ListKind::Recent => Action::RecentView,
            ListKind::Trending => Action::TrendingView,
        };
        match turn.curation().render_list(kind, &to) {
            Ok(msg) => Reply::new(action, vec![msg]),
            Err(CurationError::EmptyList(_)) | Err(CurationError::NothingToFeature) => {
                turn.notice = Some(Notice::EmptyList);
                let text = match kind {
                    ListKind::Trending => "🔥 No trending questions yet. Ask a question and it may show up here!",
                    ListKind::Recent => "🕒 No recent questions yet. Be the first to ask one!",
                };
                Reply::new(action, vec![views::notice(&to, text)])
            }
        }
    }

    fn select_curated(&self, state: &mut ConversationState, turn: &mut Turn, id: u64, action: Action) -> Reply {
        let to = turn.recipient.clone();
        let entry = turn.curation().entry(id).expect("checked by caller").clone();
        let answer = match entry.answer() {
            Some(a) => a.to_string(),
            None => match self.llm.prefetch_answer(&entry.display_text) {
                Ok(a) => {
                    turn.curation_mut().store_answer(id, a.clone());
                    a
                }
                Err(e) => return Reply::new(action, vec![Self::provider_apology(turn, &e)]).feature(id.to_string()),
            },
        };
        turn.curation_mut().record_selection(id);
        let out = self.start_exchange(state, &to, &entry.display_text, answer, Tier::Standard, true);
        Reply::new(action, vec![out]).feature(id.to_string())
    }

    /// Runs the daily broadcast if it is due. Returns `None` when it is not
    /// due or nothing can be featured today.
    pub fn run_scheduler(&mut self, now: DateTime<Utc>, outbox: Option<&dyn Outbox>) -> Result<Option<TopQBroadcast>, EngineError> {
        if self.scheduler.due(now).is_none() {
            return Ok(None);
        }
        self.broadcast_topq(now, outbox)
    }

    /// Sends today's top question to every registered user who has not
    /// opted out. Marks the local day as done on success.
    pub fn broadcast_topq(&mut self, now: DateTime<Utc>, outbox: Option<&dyn Outbox>) -> Result<Option<TopQBroadcast>, EngineError> {
        let day = self.scheduler.local_day(now);
        let mut curation = self.curation.clone();
        let entry = match curation.select_topq(now) {
            Ok(e) => e,
            Err(e) => {
                tracing::info!(%day, reason = %e, "no top question today");
                return Ok(None);
            }
        };
        let recipients: Vec<(String, String)> = self
            .users
            .iter()
            .filter(|(_, s)| s.registered && !s.opted_out)
            .filter_map(|(c, _)| self.directory.get(c).map(|a| (c.clone(), a.clone())))
            .collect();
        let limits = self.limits();
        let mut messages = Vec::with_capacity(recipients.len());
        let mut drafts = Vec::with_capacity(recipients.len());
        for (code, address) in &recipients {
            let msg = topq_message(&entry, address);
            validate(&msg, limits).map_err(EngineError::Render)?;
            drafts.push(
                Draft::new(now, code, Direction::Outbound, Action::TopqSent)
                    .feature(entry.entry_id.to_string())
                    .payload(msg.text.clone()),
            );
            messages.push(msg);
        }
        self.store.append_turn(drafts)?;
        self.curation = curation;
        self.scheduler.mark_sent(day);

        let mut failed = Vec::new();
        if let Some(outbox) = outbox {
            for ((code, _), msg) in recipients.iter().zip(&messages) {
                let body = render_outbound(msg, limits).map_err(EngineError::Render)?;
                let first = outbox.deliver(&body);
                if first.is_err() && outbox.deliver(&body).is_err() {
                    tracing::warn!(user = %code, "top question delivery failed twice");
                    failed.push(code.clone());
                }
            }
        }
        let b = TopQBroadcast {
            sent_at: now,
            day,
            entry_id: entry.entry_id,
            recipients: recipients.into_iter().map(|(c, _)| c).collect(),
            message_id: format!("topq-{day}"),
            failed,
        };
        self.broadcasts.push(b.clone());
        Ok(Some(b))
    }
}

/// Rebuilds durable user records and the points ledger from the log.
pub fn rebuild(records: &[EventRecord], points: &PointValues) -> (BTreeMap<String, UserRecord>, Ledger) {
    let mut users: BTreeMap<String, UserRecord> = BTreeMap::new();
    let mut ledger = Ledger::new();
    for r in records.iter().filter(|r| r.direction == Direction::Inbound) {
        match r.action {
            Action::Register => {
                users.insert(
                    r.user_code.clone(),
                    UserRecord {
                        registered: true,
                        country: r.feature_id.clone().unwrap_or_else(|| geo::UNKNOWN_COUNTRY.into()),
                        opted_out: false,
                    },
                );
            }
            Action::OptOut | Action::OptIn => {
                if let Some(u) = users.get_mut(&r.user_code) {
                    u.opted_out = r.action == Action::OptOut;
                }
            }
            _ => {}
        }
        if let Some(kind) = EarnKind::of_action(r.action) {
            ledger.award(&r.user_code, kind, r.at, points);
        }
    }
    (users, ledger)
}

#[cfg(test)]
mod tests;
