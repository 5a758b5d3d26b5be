use std::sync::{Arc, Mutex};

use chrono::{Duration, TimeZone};

use super::*;
use crate::gateway::{Interactive, Origin};
use crate::llm::{MockProvider, Task, TierSet};
use crate::store::state_digest;

const ALICE: &str = "+923001234567";
const BOB: &str = "+15551234567";

struct Rig {
    mock: Arc<MockProvider>,
    engine: Engine,
    clock: DateTime<Utc>,
}

impl Rig {
    fn new() -> Self {
        Self::with_store(EventStore::in_memory())
    }

    fn with_store(store: EventStore) -> Self {
        let mock = Arc::new(MockProvider::new(7));
        let llm = LlmClient::new(mock.clone(), TierSet::offline());
        Self {
            mock,
            engine: Engine::new(EngineConfig::default(), llm, store),
            clock: Utc.with_ymd_and_hms(2026, 3, 1, 8, 0, 0).unwrap(),
        }
    }

    fn tick(&mut self) -> DateTime<Utc> {
        self.clock += Duration::seconds(30);
        self.clock
    }

    fn text(&mut self, who: &str, body: &str) -> TurnOutcome {
        let at = self.tick();
        self.engine.handle_inbound(&InboundMessage::text(who, at, body)).unwrap()
    }

    fn tap(&mut self, who: &str, id: &str) -> TurnOutcome {
        let at = self.tick();
        self.engine.handle_inbound(&InboundMessage::button(who, at, id)).unwrap()
    }

    fn register(&mut self, who: &str) {
        self.text(who, "hi");
        self.tap(who, "terms:accept");
    }
}

fn bar_ids(out: &OutboundMessage) -> Vec<&str> {
    out.buttons().iter().map(|b| b.id.as_str()).collect()
}

#[test]
fn unregistered_text_gets_terms_only() {
    let mut r = Rig::new();
    let o = r.text(ALICE, "What is excise duty?");
    assert_eq!(o.notice, Some(Notice::UnregisteredUser));
    assert_eq!(o.outbound.len(), 1);
    assert_eq!(o.outbound[0].origin, Origin::Terms);
    assert_eq!(bar_ids(&o.outbound[0]), vec!["terms:accept"]);
    assert_eq!(r.mock.total_calls(), 0);
}

#[test]
fn intro_keyword_then_accept_registers() {
    let mut r = Rig::new();
    let o = r.text(ALICE, "Hello!");
    assert_eq!(o.notice, None);
    assert_eq!(o.action, Action::Intro);
    let o = r.tap(ALICE, "terms:accept");
    assert_eq!(o.action, Action::Register);
    assert!(o.outbound[0].list().is_some());
    let st = r.engine.state(ALICE).unwrap();
    assert!(st.registered);
    assert_eq!(st.country, "PK");
}

#[test]
fn short_answer_has_final_bar() {
    let mut r = Rig::new();
    r.register(ALICE);
    let o = r.text(ALICE, "Is General anesthesia safe for kids?");
    assert_eq!(o.outbound.len(), 1);
    assert_eq!(bar_ids(&o.outbound[0]), vec!["nav:better", "nav:followups", "menu:main"]);
    assert_eq!(r.mock.calls_for(Tier::Standard), 2, "answer plus curation prefetch");
    assert_eq!(r.mock.calls_for(Tier::Premium), 0);
}

#[test]
fn long_answer_continues_on_tap() {
    let mut r = Rig::new();
    r.register(ALICE);
    let o = r.text(ALICE, "Please explain in detail the history of excise duty");
    assert_eq!(bar_ids(&o.outbound[0])[0], "nav:continue");
    let pending = r.engine.state(ALICE).unwrap().pending_chunks.len();
    assert!(pending >= 1);
    let full = r.engine.state(ALICE).unwrap().last_exchange.clone().unwrap().answer;
    let mut seen = o.outbound[0].text.clone();
    for i in 0..pending {
        let o = r.tap(ALICE, "nav:continue");
        let last = i + 1 == pending;
        assert_eq!(bar_ids(&o.outbound[0])[0], if last { "nav:better" } else { "nav:continue" });
        seen.push_str(&o.outbound[0].text);
    }
    let squash = |s: &str| s.split_whitespace().collect::<String>();
    assert_eq!(squash(&seen), squash(&full));
    let o = r.tap(ALICE, "nav:continue");
    assert_eq!(o.notice, Some(Notice::NothingPending));
    assert_eq!(bar_ids(&o.outbound[0]), vec!["menu:main"]);
}

#[test]
fn better_answer_uses_premium_each_tap() {
    let mut r = Rig::new();
    r.register(ALICE);
    let o = r.tap(ALICE, "nav:better");
    assert_eq!(o.notice, Some(Notice::NoPriorQuery));
    r.text(ALICE, "What is excise duty?");
    r.tap(ALICE, "nav:better");
    assert_eq!(r.mock.calls_for(Tier::Premium), 1);
    assert_eq!(r.mock.calls_for_task(Task::BetterAnswer), 1);
    r.tap(ALICE, "nav:better");
    assert_eq!(r.mock.calls_for(Tier::Premium), 2);
    let ex = r.engine.state(ALICE).unwrap().last_exchange.clone().unwrap();
    assert_eq!(ex.query, "What is excise duty?");
    assert_eq!(ex.tier, Tier::Premium);
}

#[test]
fn provider_failure_keeps_prior_answer() {
    let mut r = Rig::new();
    r.register(ALICE);
    r.text(ALICE, "What is excise duty?");
    let before = r.engine.state(ALICE).unwrap().clone();
    r.mock.set_failing(true);
    let o = r.tap(ALICE, "nav:better");
    assert_eq!(o.notice, Some(Notice::ProviderFailure));
    assert_eq!(o.outbound[0].origin, Origin::Apology);
    assert_eq!(r.engine.state(ALICE).unwrap(), &before);
    let o = r.text(ALICE, "Another question?");
    assert_eq!(o.notice, Some(Notice::ProviderFailure));
    assert_eq!(r.engine.state(ALICE).unwrap().last_exchange, before.last_exchange);
}

#[test]
fn followups_two_up_front_then_full_list_then_select_without_calls() {
    let mut r = Rig::new();
    r.register(ALICE);
    r.text(ALICE, "banana stem for diabetics");
    let o = r.tap(ALICE, "nav:followups");
    let ids = o.outbound[0].action_ids();
    assert_eq!(ids, vec!["fu:1", "fu:2", "fu:all"]);
    let set = r.engine.state(ALICE).unwrap().followups.clone().unwrap();
    assert!(o.outbound[0].text.contains(set.questions()[0].as_str()));
    assert!(o.outbound[0].text.contains(set.questions()[1].as_str()));
    assert!(!o.outbound[0].text.contains(set.questions()[2].as_str()));

    let o = r.tap(ALICE, "fu:all");
    let rows: Vec<&str> = o.outbound[0].action_ids();
    assert_eq!(rows, vec!["fu:1", "fu:2", "fu:3", "fu:4", "fu:5", "fu:6", "menu:main"]);

    let calls = r.mock.total_calls();
    let o = r.tap(ALICE, "fu:5");
    assert_eq!(r.mock.total_calls(), calls);
    assert_eq!(o.action, Action::FollowupSelect);
    assert!(o.outbound[0].text.starts_with(&format!("❓ {}", set.questions()[4])));
    assert_eq!(bar_ids(&o.outbound[0]).last(), Some(&"menu:main"));
    let rec = r.engine.records().iter().rev().find(|x| x.direction == Direction::Inbound).unwrap();
    assert_eq!(rec.feature_id.as_deref(), Some("5"));
}

#[test]
fn selections_of_stale_followups_are_refused() {
    let mut r = Rig::new();
    r.register(ALICE);
    let o = r.tap(ALICE, "fu:1");
    assert_eq!(o.notice, Some(Notice::NoFollowups));
    assert!(r.engine.ledger().entries().is_empty());
}

#[test]
fn trending_selection_is_prefetched() {
    let mut r = Rig::new();
    r.register(BOB);
    r.text(BOB, "How can we provide emotional care for our parents in their old age?");
    let id = r.engine.curation().trending_ids()[0];
    r.register(ALICE);
    let o = r.tap(ALICE, "menu:trending");
    assert!(o.outbound[0].action_ids().contains(&format!("trend:{id}").as_str()));
    assert!(o.outbound[0].text.contains("🇺🇸"));
    let calls = r.mock.total_calls();
    let o = r.tap(ALICE, &format!("trend:{id}"));
    assert_eq!(r.mock.total_calls(), calls);
    assert_eq!(o.action, Action::TrendingSelect);
    assert_eq!(r.engine.curation().entry(id).unwrap().times_selected, 1);
}

#[test]
fn empty_lists_get_placeholder() {
    let mut r = Rig::new();
    r.register(ALICE);
    let o = r.tap(ALICE, "menu:trending");
    assert_eq!(o.notice, Some(Notice::EmptyList));
    assert_eq!(bar_ids(&o.outbound[0]), vec!["menu:main"]);
}

#[test]
fn unknown_ids_apologize_with_menu() {
    let mut r = Rig::new();
    r.register(ALICE);
    for id in ["trend:999", "bogus", "fu:7"] {
        let o = r.tap(ALICE, id);
        assert_eq!(o.notice, Some(Notice::UnknownActionId), "{id}");
        assert!(matches!(o.outbound[0].interactive, Some(Interactive::List(_))));
    }
}

#[test]
fn menu_lists_features() {
    let mut r = Rig::new();
    r.register(ALICE);
    let o = r.tap(ALICE, "menu:main");
    assert_eq!(
        o.outbound[0].action_ids(),
        vec!["menu:trending", "menu:recent", "menu:rewards", "menu:about", "menu:optout"]
    );
}

#[test]
fn opt_out_is_idempotent_and_queries_still_work() {
    let mut r = Rig::new();
    r.register(ALICE);
    let a = r.tap(ALICE, "menu:optout");
    let b = r.tap(ALICE, "topq:optout");
    assert_eq!(a.outbound[0].text, b.outbound[0].text);
    assert!(r.engine.state(ALICE).unwrap().opted_out);
    let o = r.text(ALICE, "What is excise duty?");
    assert_eq!(o.outbound[0].origin, Origin::AnswerChunk);
    let o = r.tap(ALICE, "menu:main");
    assert!(o.outbound[0].action_ids().contains(&"menu:optin"));
}

#[test]
fn media_gets_text_only_notice() {
    let mut r = Rig::new();
    r.register(ALICE);
    let mut m = InboundMessage::text(ALICE, r.tick(), "");
    m.kind = InboundKind::System;
    m.raw_type = Some("image".into());
    let o = r.engine.handle_inbound(&m).unwrap();
    assert_eq!(o.notice, Some(Notice::Unsupported));
    assert!(o.outbound[0].interactive.is_none());
}

#[test]
fn points_and_views() {
    let mut r = Rig::new();
    r.register(ALICE);
    r.text(ALICE, "What is excise duty?");
    r.tap(ALICE, "rewards:leaderboard");
    let o = r.tap(ALICE, "rewards:mypoints");
    assert!(o.outbound[0].text.contains("Total: 1 pts"));
    assert_eq!(r.engine.ledger().entries().len(), 1);
    let o = r.tap(ALICE, "rewards:leaderboard");
    assert!(o.outbound[0].text.contains("+92•••••4567"));
    assert!(!o.outbound[0].text.contains("3001234567"));
}

#[test]
fn every_turn_is_logged_with_pseudonyms() {
    let mut r = Rig::new();
    r.register(ALICE);
    r.text(ALICE, "What is excise duty?");
    let recs = r.engine.records();
    assert_eq!(recs.len(), 6);
    assert!(recs.windows(2).all(|w| w[0].seq < w[1].seq));
    for rec in recs {
        assert!(!rec.user_code.contains("3001234567"));
    }
}

#[test]
fn storage_failure_applies_nothing() {
    let mut r = Rig::with_store(EventStore::in_memory().with_capacity_limit(4));
    r.register(ALICE);
    let before = r.engine.state(ALICE).unwrap().clone();
    let at = r.tick();
    let err = r.engine.handle_inbound(&InboundMessage::text(ALICE, at, "What is excise duty?"));
    assert!(matches!(err, Err(EngineError::Storage(StoreError::StorageFull(4)))));
    assert_eq!(r.engine.state(ALICE).unwrap(), &before);
    assert!(r.engine.ledger().entries().is_empty());
    assert!(r.engine.curation().recent_ids().is_empty());
}

#[test]
fn rebuild_matches_live_state() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = Rig::with_store(EventStore::open(dir.path()).unwrap());
    r.register(ALICE);
    r.register(BOB);
    r.text(ALICE, "What is excise duty?");
    r.text(BOB, "How can we provide emotional care for our parents in their old age?");
    r.tap(ALICE, "menu:optout");
    r.tap(ALICE, &format!("trend:{}", r.engine.curation().trending_ids()[0]));
    r.tap(BOB, "menu:optout");
    r.tap(BOB, "menu:optin");
    r.engine.flush().unwrap();

    let live = state_digest(&(r.engine.user_records(), r.engine.ledger()));
    let from_log = |recs: &[EventRecord]| {
        let (u, l) = rebuild(recs, &PointValues::default());
        state_digest(&(u, l))
    };
    let reopened = EventStore::open(dir.path()).unwrap();
    assert_eq!(from_log(reopened.records()), live);
    assert_eq!(from_log(reopened.records()), from_log(reopened.records()));

    let mock = Arc::new(MockProvider::new(7));
    let restored = Engine::restore(EngineConfig::default(), LlmClient::new(mock, TierSet::offline()), reopened).unwrap();
    assert_eq!(restored.users(), r.engine.users());
    assert_eq!(restored.curation(), r.engine.curation());
    assert_eq!(restored.ledger(), r.engine.ledger());
}

#[derive(Default)]
struct FlakyOutbox {
    sent: Mutex<Vec<String>>,
    fail_first: Mutex<u32>,
}

impl Outbox for FlakyOutbox {
    fn deliver(&self, body: &str) -> Result<(), GatewayError> {
        let mut f = self.fail_first.lock().unwrap();
        if *f > 0 {
            *f -= 1;
            return Err(GatewayError::Delivery("flaky".into()));
        }
        self.sent.lock().unwrap().push(body.to_string());
        Ok(())
    }
}

#[test]
fn broadcast_skips_opted_out_and_retries_once() {
    let mut r = Rig::new();
    r.register(ALICE);
    r.register(BOB);
    r.text(BOB, "How can we provide emotional care for our parents in their old age?");
    r.tap(ALICE, "topq:optout");
    let outbox = FlakyOutbox {
        fail_first: Mutex::new(1),
        ..Default::default()
    };
    let at = Utc.with_ymd_and_hms(2026, 3, 1, 9, 0, 0).unwrap();
    let b = r.engine.run_scheduler(at, Some(&outbox)).unwrap().unwrap();
    assert_eq!(b.recipients, vec![r.engine.code_of(BOB)]);
    assert!(b.failed.is_empty());
    assert_eq!(outbox.sent.lock().unwrap().len(), 1);
    assert!(outbox.sent.lock().unwrap()[0].contains("topq:optout"));
    assert!(r.engine.run_scheduler(at + Duration::hours(2), None).unwrap().is_none());
    let sent = r.engine.records().iter().filter(|x| x.action == Action::TopqSent).count();
    assert_eq!(sent, 1);

    let o = r.tap(BOB, &format!("topq:answer:{}", b.entry_id));
    assert_eq!(o.action, Action::TopqAnswerView);
}

#[test]
fn replay_is_deterministic() {
    let run = || {
        let mut r = Rig::new();
        r.register(ALICE);
        let mut outs = Vec::new();
        for q in ["What is excise duty?", "Explain in detail how vaccines work", "I love you"] {
            outs.extend(r.text(ALICE, q).outbound);
        }
        outs.extend(r.tap(ALICE, "nav:followups").outbound);
        outs.iter()
            .map(|m| render_outbound(m, RenderLimits::default()).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}
