//! Message builders for every screen the bot sends.

use crate::gateway::{preview, Button, ListMenu, ListRow, Origin, OutboundMessage, MAX_ROW_DESCRIPTION, MAX_ROW_TITLE};
use crate::llm::FollowupSet;

pub const CONTINUE: &str = "nav:continue";
pub const BETTER: &str = "nav:better";
pub const FOLLOWUPS: &str = "nav:followups";
pub const MENU: &str = "menu:main";
pub const TERMS_ACCEPT: &str = "terms:accept";
pub const FOLLOWUPS_ALL: &str = "fu:all";

pub fn menu_button() -> Button {
    Button::new(MENU, "Menu")
}

/// The three-button bar under an answer. While chunks remain the first
/// button continues the answer, afterwards it escalates to a better one.
pub fn answer_bar(more_pending: bool) -> Vec<Button> {
    let first = if more_pending {
        Button::new(CONTINUE, "Continue Reading")
    } else {
        Button::new(BETTER, "Get Better Answer")
    };
    vec![first, Button::new(FOLLOWUPS, "Suggest Follow-ups"), menu_button()]
}

pub fn answer_chunk(recipient: &str, chunk: &str, more_pending: bool) -> OutboundMessage {
    let body = chunk.trim();
    let body = if body.is_empty() { "…" } else { body };
    OutboundMessage::text(recipient, body, Origin::AnswerChunk).with_buttons(answer_bar(more_pending))
}

pub fn terms(recipient: &str) -> OutboundMessage {
    let text = "👋 Welcome! I am an AI assistant that answers your questions. \
Answers can be wrong, so please double-check important advice with a professional.\n\n\
Your messages are stored under a pseudonymous code and used to improve the service. \
You can stop the daily question at any time from the menu.\n\n\
Tap I Accept to agree to these terms and start.";
    OutboundMessage::text(recipient, text, Origin::Terms).with_buttons(vec![Button::new(TERMS_ACCEPT, "I Accept")])
}

fn menu_rows(opted_out: bool) -> Vec<ListRow> {
    let daily = if opted_out {
        ListRow::new("menu:optin", "🔔 Daily Question On").with_description("Get the top question every morning again")
    } else {
        ListRow::new("menu:optout", "🔕 Stop Daily Question").with_description("No more daily question messages")
    };
    vec![
        ListRow::new("menu:trending", "🔥 Trending Questions").with_description("Popular questions from the community"),
        ListRow::new("menu:recent", "🕒 Recent Questions").with_description("The newest questions people asked"),
        ListRow::new("menu:rewards", "🏆 Rewards").with_description("Leaderboard and your points"),
        ListRow::new("menu:about", "ℹ️ About").with_description("How this assistant works"),
        daily,
    ]
}

pub fn menu_with(recipient: &str, body: &str, opted_out: bool, origin: Origin) -> OutboundMessage {
    OutboundMessage::text(recipient, body, origin).with_list(ListMenu::single("Open Menu", "Menu", menu_rows(opted_out)))
}

pub fn menu(recipient: &str, opted_out: bool) -> OutboundMessage {
    menu_with(
        recipient,
        "📋 Menu\n\nType any question to get an answer, or pick an option below.",
        opted_out,
        Origin::Menu,
    )
}

pub fn welcome(recipient: &str, opted_out: bool) -> OutboundMessage {
    menu_with(
        recipient,
        "✅ You're all set! Ask me anything by typing your question, or open the menu to explore.",
        opted_out,
        Origin::Welcome,
    )
}

pub fn notice(recipient: &str, text: &str) -> OutboundMessage {
    OutboundMessage::text(recipient, text, Origin::Notice).with_buttons(vec![menu_button()])
}

pub fn apology(recipient: &str, text: &str) -> OutboundMessage {
    OutboundMessage::text(recipient, text, Origin::Apology).with_buttons(vec![menu_button()])
}

pub fn unsupported(recipient: &str) -> OutboundMessage {
    OutboundMessage::text(
        recipient,
        "Sorry, I can only read text messages. Please type your question.",
        Origin::Notice,
    )
}

pub fn about(recipient: &str) -> OutboundMessage {
    notice(
        recipient,
        "ℹ️ About\n\nType a question in any words you like and I will answer it. \
Under each answer you can read on, ask for a more detailed answer, or get suggested follow-up questions. \
Every morning a top question from the community is shared with everyone who has not switched it off.",
    )
}

pub fn rewards_menu(recipient: &str) -> OutboundMessage {
    OutboundMessage::text(
        recipient,
        "🏆 Rewards\n\nYou earn a point every time you ask a question, open a Trending or Recent question, or ask a suggested follow-up.",
        Origin::Menu,
    )
    .with_buttons(vec![
        Button::new("rewards:leaderboard", "Leaderboard"),
        Button::new("rewards:mypoints", "My Points"),
        menu_button(),
    ])
}

pub fn leaderboard(recipient: &str, body: String) -> OutboundMessage {
    OutboundMessage::text(recipient, body, Origin::Leaderboard)
        .with_buttons(vec![Button::new("rewards:mypoints", "My Points"), menu_button()])
}

pub fn my_points(recipient: &str, body: String) -> OutboundMessage {
    OutboundMessage::text(recipient, body, Origin::MyPoints)
        .with_buttons(vec![Button::new("rewards:leaderboard", "Leaderboard"), menu_button()])
}

pub fn opted_out(recipient: &str) -> OutboundMessage {
    OutboundMessage::text(
        recipient,
        "🔕 Done. You will not receive the daily question anymore. You can still ask me anything at any time.",
        Origin::Notice,
    )
    .with_buttons(vec![Button::new("menu:optin", "Daily Question On"), menu_button()])
}

pub fn opted_in(recipient: &str) -> OutboundMessage {
    notice(recipient, "🔔 The daily question is back on. See you tomorrow morning!")
}

/// Two suggestions up front with a way to open all six.
pub fn followups_up_front(recipient: &str, set: &FollowupSet) -> OutboundMessage {
    let [q1, q2] = set.up_front();
    let text = format!("💡 Suggested follow-ups\n\n1. {q1}\n2. {q2}\n\nTap a question to ask it, or see all 6 suggestions.");
    OutboundMessage::text(recipient, text, Origin::Followups).with_buttons(vec![
        Button::new("fu:1", "Ask question 1"),
        Button::new("fu:2", "Ask question 2"),
        Button::new(FOLLOWUPS_ALL, "See all 6"),
    ])
}

pub fn followups_full(recipient: &str, set: &FollowupSet) -> OutboundMessage {
    let mut text = String::from("💡 All suggested follow-ups\n");
    let mut rows = Vec::with_capacity(7);
    for (i, q) in set.questions().iter().enumerate() {
        let n = i + 1;
        text.push_str(&format!("\n{n}. {q}"));
        rows.push(
            ListRow::new(format!("fu:{n}"), preview(&format!("{n}. {q}"), MAX_ROW_TITLE))
                .with_description(preview(q, MAX_ROW_DESCRIPTION)),
        );
    }
    rows.push(ListRow::new(MENU, "⬅️ Back to Menu"));
    OutboundMessage::text(recipient, text, Origin::Followups).with_list(ListMenu::single("See questions", "Follow-ups", rows))
}
