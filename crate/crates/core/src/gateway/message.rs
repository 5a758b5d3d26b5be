use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// Default character cap for a single outbound text body.
pub const DEFAULT_TEXT_LIMIT: usize = 4096;
pub const MAX_BUTTONS: usize = 3;
pub const MAX_BUTTON_TITLE: usize = 20;
pub const MAX_LIST_ROWS: usize = 10;
pub const MAX_ROW_TITLE: usize = 24;
pub const MAX_ROW_DESCRIPTION: usize = 72;
pub const MAX_SECTION_TITLE: usize = 24;
pub const MAX_ACTION_ID: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InboundKind {
    Text,
    ButtonReply,
    ListReply,
    System,
}

impl InboundKind {
    pub fn is_reply(self) -> bool {
        matches!(self, InboundKind::ButtonReply | InboundKind::ListReply)
    }
}

/// A message received from a user, independent of the transport it came in on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InboundMessage {
    /// Phone number (digits, as sent by the platform) or sandbox id.
    pub sender: String,
    /// Platform message id, used for de-duplication.
    pub message_id: String,
    pub received_at: DateTime<Utc>,
    pub kind: InboundKind,
    /// Query text for `Text`, empty for replies.
    pub body: String,
    /// Action id of the tapped button or row.
    pub reply_id: Option<String>,
    /// Original platform type for `System` messages (e.g. "image").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_type: Option<String>,
}

impl InboundMessage {
    pub fn text(sender: &str, at: DateTime<Utc>, body: &str) -> Self {
        Self {
            sender: sender.to_string(),
            message_id: String::new(),
            received_at: at,
            kind: InboundKind::Text,
            body: body.to_string(),
            reply_id: None,
            raw_type: None,
        }
    }

    pub fn button(sender: &str, at: DateTime<Utc>, id: &str) -> Self {
        Self {
            sender: sender.to_string(),
            message_id: String::new(),
            received_at: at,
            kind: InboundKind::ButtonReply,
            body: String::new(),
            reply_id: Some(id.to_string()),
            raw_type: None,
        }
    }

    pub fn list(sender: &str, at: DateTime<Utc>, id: &str) -> Self {
        Self {
            kind: InboundKind::ListReply,
            ..Self::button(sender, at, id)
        }
    }

    /// Checks the structural invariants between `kind`, `body` and `reply_id`.
    pub fn is_well_formed(&self) -> bool {
        let has_reply = self.reply_id.as_deref().is_some_and(|id| !id.is_empty());
        match self.kind {
            InboundKind::Text => !has_reply && !self.body.is_empty(),
            InboundKind::ButtonReply | InboundKind::ListReply => has_reply,
            InboundKind::System => !has_reply,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Button {
    pub id: String,
    pub title: String,
}

impl Button {
    pub fn new(id: impl Into<String>, title: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListRow {
    pub id: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl ListRow {
    pub fn new(id: impl Into<String>, title: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            description: None,
        }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = Some(description.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListSection {
    pub title: String,
    pub rows: Vec<ListRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListMenu {
    /// Label of the button that opens the list.
    pub button: String,
    pub sections: Vec<ListSection>,
}

impl ListMenu {
    pub fn single(button: impl Into<String>, section: impl Into<String>, rows: Vec<ListRow>) -> Self {
        Self {
            button: button.into(),
            sections: vec![ListSection {
                title: section.into(),
                rows,
            }],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &ListRow> {
        self.sections.iter().flat_map(|s| s.rows.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interactive {
    Buttons(Vec<Button>),
    List(ListMenu),
}

impl Interactive {
    /// Every action id carried by the affordance, in display order.
    pub fn action_ids(&self) -> Vec<&str> {
        match self {
            Interactive::Buttons(b) => b.iter().map(|b| b.id.as_str()).collect(),
            Interactive::List(l) => l.rows().map(|r| r.id.as_str()).collect(),
        }
    }
}

/// What produced an outbound message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    AnswerChunk,
    Menu,
    Terms,
    Welcome,
    Topq,
    Leaderboard,
    MyPoints,
    Followups,
    CuratedList,
    Notice,
    Apology,
}

impl Origin {
    /// Messages the service sends without a user action prompting them.
    pub fn is_bot_initiated(self) -> bool {
        matches!(self, Origin::Topq)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutboundMessage {
    pub recipient: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interactive: Option<Interactive>,
    pub origin: Origin,
}

impl OutboundMessage {
    pub fn text(recipient: &str, text: impl Into<String>, origin: Origin) -> Self {
        Self {
            recipient: recipient.to_string(),
            text: text.into(),
            interactive: None,
            origin,
        }
    }

    pub fn with_buttons(mut self, buttons: Vec<Button>) -> Self {
        self.interactive = Some(Interactive::Buttons(buttons));
        self
    }

    pub fn with_list(mut self, list: ListMenu) -> Self {
        self.interactive = Some(Interactive::List(list));
        self
    }

    pub fn buttons(&self) -> &[Button] {
        match &self.interactive {
            Some(Interactive::Buttons(b)) => b,
            _ => &[],
        }
    }

    pub fn list(&self) -> Option<&ListMenu> {
        match &self.interactive {
            Some(Interactive::List(l)) => Some(l),
            _ => None,
        }
    }

    pub fn action_ids(&self) -> Vec<&str> {
        self.interactive
            .as_ref()
            .map(|i| i.action_ids())
            .unwrap_or_default()
    }
}

/// Shortens `text` to at most `max_chars` characters for row titles and
/// descriptions, marking the cut with an ellipsis.
pub fn preview(text: &str, max_chars: usize) -> String {
    let flat: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if flat.chars().count() <= max_chars {
        return flat;
    }
    let cut: String = flat.chars().take(max_chars.saturating_sub(1)).collect();
    format!("{}…", cut.trim_end())
}
