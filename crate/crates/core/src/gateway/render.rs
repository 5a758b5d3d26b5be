//! Egress: [`OutboundMessage`] to a platform send-request body.

use std::collections::HashSet;

use serde::Serialize;

use super::message::*;
use super::GatewayError;

/// Limits applied when rendering. Only the text cap is configurable; the
/// interactive limits are fixed by the platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderLimits {
    pub text_limit: usize,
}

impl Default for RenderLimits {
    fn default() -> Self {
        Self {
            text_limit: DEFAULT_TEXT_LIMIT,
        }
    }
}

#[derive(Serialize)]
struct SendRequest<'a> {
    messaging_product: &'static str,
    recipient_type: &'static str,
    to: &'a str,
    #[serde(rename = "type")]
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<TextBody<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    interactive: Option<InteractiveBody<'a>>,
}

#[derive(Serialize)]
struct TextBody<'a> {
    preview_url: bool,
    body: &'a str,
}

#[derive(Serialize)]
struct InteractiveBody<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    body: BodyText<'a>,
    action: Action<'a>,
}

#[derive(Serialize)]
struct BodyText<'a> {
    text: &'a str,
}

#[derive(Serialize)]
#[serde(untagged)]
enum Action<'a> {
    Buttons { buttons: Vec<ReplyButton<'a>> },
    List {
        button: &'a str,
        sections: Vec<Section<'a>>,
    },
}

#[derive(Serialize)]
struct ReplyButton<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    reply: ButtonRef<'a>,
}

#[derive(Serialize)]
struct ButtonRef<'a> {
    id: &'a str,
    title: &'a str,
}

#[derive(Serialize)]
struct Section<'a> {
    title: &'a str,
    rows: Vec<Row<'a>>,
}

#[derive(Serialize)]
struct Row<'a> {
    id: &'a str,
    title: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    description: Option<&'a str>,
}

fn violation(msg: String) -> GatewayError {
    GatewayError::ConstraintViolation(msg)
}

fn check_len(what: &str, value: &str, max: usize) -> Result<(), GatewayError> {
    let n = value.chars().count();
    if n == 0 {
        return Err(violation(format!("{what} is empty")));
    }
    if n > max {
        return Err(violation(format!("{what} has {n} characters (max {max})")));
    }
    Ok(())
}

fn check_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Result<(), GatewayError> {
    let mut seen = HashSet::new();
    for id in ids {
        check_len("action id", id, MAX_ACTION_ID)?;
        if !seen.insert(id) {
            return Err(violation(format!("duplicate action id {id:?}")));
        }
    }
    Ok(())
}

/// Checks every [`OutboundMessage`] invariant without rendering.
pub fn validate(msg: &OutboundMessage, limits: RenderLimits) -> Result<(), GatewayError> {
    if msg.recipient.is_empty() {
        return Err(violation("recipient is empty".into()));
    }
    check_len("text", &msg.text, limits.text_limit)?;
    match &msg.interactive {
        None => {}
        Some(Interactive::Buttons(buttons)) => {
            if buttons.is_empty() || buttons.len() > MAX_BUTTONS {
                return Err(violation(format!(
                    "{} buttons (allowed 1..={MAX_BUTTONS})",
                    buttons.len()
                )));
            }
            for b in buttons {
                check_len("button title", &b.title, MAX_BUTTON_TITLE)?;
            }
            check_ids(buttons.iter().map(|b| b.id.as_str()))?;
        }
        Some(Interactive::List(list)) => {
            check_len("list button", &list.button, MAX_BUTTON_TITLE)?;
            if list.sections.is_empty() {
                return Err(violation("list without sections".into()));
            }
            let total: usize = list.sections.iter().map(|s| s.rows.len()).sum();
            if total == 0 || total > MAX_LIST_ROWS {
                return Err(violation(format!(
                    "{total} list rows (allowed 1..={MAX_LIST_ROWS})"
                )));
            }
            for section in &list.sections {
                if section.rows.is_empty() {
                    return Err(violation("empty list section".into()));
                }
                if list.sections.len() > 1 || !section.title.is_empty() {
                    check_len("section title", &section.title, MAX_SECTION_TITLE)?;
                }
                for row in &section.rows {
                    check_len("row title", &row.title, MAX_ROW_TITLE)?;
                    if let Some(d) = &row.description {
                        let n = d.chars().count();
                        if n > MAX_ROW_DESCRIPTION {
                            return Err(violation(format!(
                                "row description has {n} characters (max {MAX_ROW_DESCRIPTION})"
                            )));
                        }
                    }
                }
            }
            check_ids(list.rows().map(|r| r.id.as_str()))?;
        }
    }
    Ok(())
}

/// Serializes an outbound message as a send-request body.
///
/// Output is deterministic: fields are emitted in a fixed order. Messages that
/// break a platform limit are refused, never truncated.
pub fn render_outbound(msg: &OutboundMessage, limits: RenderLimits) -> Result<String, GatewayError> {
    validate(msg, limits)?;
    let req = match &msg.interactive {
        None => SendRequest {
            messaging_product: "whatsapp",
            recipient_type: "individual",
            to: &msg.recipient,
            kind: "text",
            text: Some(TextBody {
                preview_url: false,
                body: &msg.text,
            }),
            interactive: None,
        },
        Some(interactive) => {
            let (kind, action) = match interactive {
                Interactive::Buttons(buttons) => (
                    "button",
                    Action::Buttons {
                        buttons: buttons
                            .iter()
                            .map(|b| ReplyButton {
                                kind: "reply",
                                reply: ButtonRef {
                                    id: &b.id,
                                    title: &b.title,
                                },
                            })
                            .collect(),
                    },
                ),
                Interactive::List(list) => (
                    "list",
                    Action::List {
                        button: &list.button,
                        sections: list
                            .sections
                            .iter()
                            .map(|s| Section {
                                title: &s.title,
                                rows: s
                                    .rows
                                    .iter()
                                    .map(|r| Row {
                                        id: &r.id,
                                        title: &r.title,
                                        description: r.description.as_deref(),
                                    })
                                    .collect(),
                            })
                            .collect(),
                    },
                ),
            };
            SendRequest {
                messaging_product: "whatsapp",
                recipient_type: "individual",
                to: &msg.recipient,
                kind: "interactive",
                text: None,
                interactive: Some(InteractiveBody {
                    kind,
                    body: BodyText { text: &msg.text },
                    action,
                }),
            }
        }
    };
    serde_json::to_string(&req).map_err(|e| violation(e.to_string()))
}
