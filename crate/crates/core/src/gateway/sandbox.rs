//! Local twin of the platform channel.
//!
//! Inbound sandbox frames are ordinary webhook notifications whose `object`
//! is `"sandbox"`; outbound frames wrap rendered send-request bodies in
//! `{"object":"sandbox","messages":[...]}`. The web chat client and the
//! integration tests speak this schema, so the engine runs without
//! platform credentials.

use chrono::{DateTime, Utc};
use serde_json::{json, Value};

use super::webhook::{PLATFORM_OBJECT, SANDBOX_OBJECT};
use super::GatewayError;

fn notification(object: &str, product: &str, message: Value) -> String {
    json!({
        "object": object,
        "entry": [{
            "id": "0",
            "changes": [{
                "field": "messages",
                "value": {
                    "messaging_product": product,
                    "messages": [message],
                }
            }]
        }]
    })
    .to_string()
}

/// A typed query from a sandbox persona.
pub fn inbound_text(from: &str, id: &str, at: DateTime<Utc>, text: &str) -> String {
    notification(
        SANDBOX_OBJECT,
        SANDBOX_OBJECT,
        json!({
            "from": from,
            "id": id,
            "timestamp": at.timestamp_millis(),
            "type": "text",
            "text": {"body": text},
        }),
    )
}

fn reply_message(from: &str, id: &str, at: Value, kind: &str, reply_id: &str, title: &str) -> Value {
    json!({
        "from": from,
        "id": id,
        "timestamp": at,
        "type": "interactive",
        "interactive": {
            "type": kind,
            kind: {"id": reply_id, "title": title},
        },
    })
}

/// A tap on a button (`list = false`) or list row (`list = true`) from a sandbox persona.
pub fn inbound_tap(from: &str, id: &str, at: DateTime<Utc>, reply_id: &str, list: bool) -> String {
    let kind = if list { "list_reply" } else { "button_reply" };
    notification(
        SANDBOX_OBJECT,
        SANDBOX_OBJECT,
        reply_message(from, id, json!(at.timestamp_millis()), kind, reply_id, ""),
    )
}

/// Wraps rendered send-request bodies into one outbound sandbox frame.
pub fn outbound_frame(bodies: &[String]) -> Result<String, GatewayError> {
    let parsed = bodies
        .iter()
        .map(|b| serde_json::from_str::<Value>(b))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| GatewayError::MalformedPayload(e.to_string()))?;
    Ok(json!({"object": SANDBOX_OBJECT, "messages": parsed}).to_string())
}

/// Builds the webhook notification the platform delivers when the recipient
/// of `send_body` taps the affordance carrying `action_id`.
pub fn echo_tap(
    send_body: &str,
    action_id: &str,
    message_id: &str,
    at: DateTime<Utc>,
) -> Result<String, GatewayError> {
    let v: Value = serde_json::from_str(send_body)
        .map_err(|e| GatewayError::MalformedPayload(e.to_string()))?;
    let to = v["to"]
        .as_str()
        .ok_or_else(|| GatewayError::MalformedPayload("send body without \"to\"".into()))?;
    let interactive = &v["interactive"];
    let (kind, title) = match interactive["type"].as_str() {
        Some("button") => {
            let hit = interactive["action"]["buttons"]
                .as_array()
                .into_iter()
                .flatten()
                .find(|b| b["reply"]["id"] == action_id);
            ("button_reply", hit.and_then(|b| b["reply"]["title"].as_str()))
        }
        Some("list") => {
            let hit = interactive["action"]["sections"]
                .as_array()
                .into_iter()
                .flatten()
                .flat_map(|s| s["rows"].as_array().into_iter().flatten())
                .find(|r| r["id"] == action_id);
            ("list_reply", hit.and_then(|r| r["title"].as_str()))
        }
        _ => ("", None),
    };
    let title = title.ok_or_else(|| {
        GatewayError::ConstraintViolation(format!("no affordance with id {action_id:?}"))
    })?;
    Ok(notification(
        PLATFORM_OBJECT,
        "whatsapp",
        reply_message(to, message_id, json!(at.timestamp().to_string()), kind, action_id, title),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{parse_webhook, InboundKind};
    use chrono::TimeZone;

    #[test]
    fn sandbox_text_parses() {
        let at = Utc.timestamp_millis_opt(1_700_000_000_123).unwrap();
        let frame = inbound_text("sandbox-alice", "s1", at, "banana stem for diabetics");
        let msgs = parse_webhook(&frame).unwrap();
        assert_eq!(msgs[0].kind, InboundKind::Text);
        assert_eq!(msgs[0].received_at, at);
        assert_eq!(msgs[0].sender, "sandbox-alice");
    }

    #[test]
    fn sandbox_tap_parses() {
        let at = Utc.timestamp_millis_opt(1_700_000_000_000).unwrap();
        let frame = inbound_tap("p", "s2", at, "trend:3", true);
        let msgs = parse_webhook(&frame).unwrap();
        assert_eq!(msgs[0].kind, InboundKind::ListReply);
        assert_eq!(msgs[0].reply_id.as_deref(), Some("trend:3"));
    }

    #[test]
    fn echo_tap_rejects_unknown_id() {
        let body = r#"{"to":"1","type":"interactive","interactive":{"type":"button","body":{"text":"x"},"action":{"buttons":[{"type":"reply","reply":{"id":"a","title":"A"}}]}}}"#;
        let at = Utc.timestamp_opt(1_700_000_000, 0).unwrap();
        assert!(echo_tap(body, "a", "w1", at).is_ok());
        assert!(echo_tap(body, "b", "w1", at).is_err());
    }
}
