//! Seeded workload generators shared by the benchmarks.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use qabot_core::analytics::sorted_interactions;
use qabot_core::analytics::synth::LogBuilder;
use qabot_core::gateway::{Button, ListMenu, ListRow, OutboundMessage, Origin};
use qabot_core::rewards::{EarnKind, Ledger, PointValues};
use qabot_core::store::{Action, EventRecord};

pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, 0).unwrap()
}

/// A long multi-paragraph answer of roughly `chars` characters.
pub fn long_answer(chars: usize) -> String {
    let para = "Most experts would point out that this topic has both practical and personal sides worth thinking about. ";
    let mut s = String::with_capacity(chars + para.len());
    let mut i = 0;
    while s.len() < chars {
        s.push_str(para);
        i += 1;
        if i % 4 == 0 {
            s.push_str("\n\n");
        }
    }
    s
}

/// Inbound events for `users` users over `days` days, sorted for sessionizing.
pub fn event_log(seed: u64, events: usize, users: usize, days: i64) -> Vec<EventRecord> {
    let mut rng = StdRng::seed_from_u64(seed);
    let actions = [Action::Freeform, Action::ContinueReading, Action::LeaderboardView, Action::FollowupSelect];
    let mut b = LogBuilder::new();
    for _ in 0..events {
        let at = epoch() + Duration::seconds(rng.random_range(0..days * 86_400));
        let user = format!("u{:04}", rng.random_range(0..users));
        b.inbound(at, &user, actions[rng.random_range(0..actions.len())]);
    }
    sorted_interactions(&b.build())
}

pub fn ledger(seed: u64, users: usize, entries: usize) -> Ledger {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut l = Ledger::new();
    let values = PointValues::default();
    for _ in 0..entries {
        let user = format!("u{:04}", rng.random_range(0..users));
        let kind = EarnKind::ALL[rng.random_range(0..EarnKind::ALL.len())];
        l.award(&user, kind, epoch() + Duration::minutes(rng.random_range(0..60 * 24 * 30)), &values);
    }
    l
}

/// A list message at the platform limits and a three-button answer.
pub fn messages() -> (OutboundMessage, OutboundMessage) {
    let rows = (1..=9)
        .map(|i| ListRow::new(format!("trend:{i}"), format!("{i}. Question title here")).with_description("🇵🇰 A fairly long description that fits in the row"))
        .chain(std::iter::once(ListRow::new("menu:main", "⬅️ Back to Menu")))
        .collect();
    let list = OutboundMessage::text("+923001234567", "🔥 Trending Questions", Origin::CuratedList)
        .with_list(ListMenu::single("Choose question", "Trending", rows));
    let buttons = OutboundMessage::text("+923001234567", long_answer(900), Origin::AnswerChunk).with_buttons(vec![
        Button::new("nav:continue", "Continue Reading"),
        Button::new("nav:followups", "Suggest Follow-ups"),
        Button::new("menu:main", "Menu"),
    ]);
    (list, buttons)
}
