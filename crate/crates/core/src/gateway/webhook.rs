//! Ingress: platform webhook notifications to [`InboundMessage`]s.
//!
//! The accepted shape is the Cloud API notification
//! `object → entry[] → changes[] → value → messages[]`. Status-only
//! notifications (delivery and read receipts) carry no `messages` and parse to
//! an empty batch.

use std::collections::{HashSet, VecDeque};

use chrono::{DateTime, TimeZone, Utc};
use serde::Deserialize;

use super::message::{InboundKind, InboundMessage};
use super::GatewayError;

pub const PLATFORM_OBJECT: &str = "whatsapp_business_account";
pub const SANDBOX_OBJECT: &str = "sandbox";

#[derive(Debug, Deserialize)]
struct Notification {
    object: Option<String>,
    #[serde(default)]
    entry: Vec<Entry>,
}

#[derive(Debug, Deserialize)]
struct Entry {
    #[serde(default)]
    changes: Vec<Change>,
}

#[derive(Debug, Deserialize)]
struct Change {
    #[serde(default)]
    value: Option<Value>,
}

#[derive(Debug, Deserialize)]
struct Value {
    #[serde(default)]
    messaging_product: Option<String>,
    #[serde(default)]
    messages: Vec<WireMessage>,
}

#[derive(Debug, Deserialize)]
struct WireMessage {
    from: String,
    #[serde(default)]
    id: String,
    timestamp: WireTimestamp,
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    text: Option<WireText>,
    #[serde(default)]
    interactive: Option<WireInteractive>,
}

/// Seconds since the epoch as sent by the platform (a string), or
/// milliseconds as sent by the sandbox channel (a number).
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum WireTimestamp {
    Seconds(String),
    Millis(i64),
}

#[derive(Debug, Deserialize)]
struct WireText {
    body: String,
}

#[derive(Debug, Deserialize)]
struct WireInteractive {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    button_reply: Option<WireReply>,
    #[serde(default)]
    list_reply: Option<WireReply>,
}

#[derive(Debug, Deserialize)]
struct WireReply {
    id: String,
}

fn parse_timestamp(ts: &WireTimestamp) -> Result<DateTime<Utc>, GatewayError> {
    let millis = match ts {
        WireTimestamp::Seconds(s) => s
            .trim()
            .parse::<i64>()
            .ok()
            .and_then(|s| s.checked_mul(1000))
            .ok_or_else(|| GatewayError::MalformedPayload(format!("bad timestamp {s:?}")))?,
        WireTimestamp::Millis(ms) => *ms,
    };
    Utc.timestamp_millis_opt(millis)
        .single()
        .ok_or_else(|| GatewayError::MalformedPayload(format!("timestamp out of range: {millis}")))
}

fn convert(msg: WireMessage) -> Result<InboundMessage, GatewayError> {
    let received_at = parse_timestamp(&msg.timestamp)?;
    let mut out = InboundMessage {
        sender: msg.from,
        message_id: msg.id,
        received_at,
        kind: InboundKind::System,
        body: String::new(),
        reply_id: None,
        raw_type: None,
    };
    match msg.kind.as_str() {
        "text" => {
            let body = msg.text.map(|t| t.body).unwrap_or_default();
            if body.is_empty() {
                // an empty text body cannot be a query
                out.raw_type = Some("empty_text".to_string());
            } else {
                out.kind = InboundKind::Text;
                out.body = body;
            }
        }
        "interactive" => {
            let interactive = msg.interactive.ok_or_else(|| {
                GatewayError::MalformedPayload("interactive message without body".into())
            })?;
            let (kind, reply) = match interactive.kind.as_str() {
                "button_reply" => (InboundKind::ButtonReply, interactive.button_reply),
                "list_reply" => (InboundKind::ListReply, interactive.list_reply),
                other => {
                    out.raw_type = Some(format!("interactive/{other}"));
                    return Ok(out);
                }
            };
            let reply = reply.filter(|r| !r.id.is_empty()).ok_or_else(|| {
                GatewayError::MalformedPayload(format!("{} without an id", interactive.kind))
            })?;
            out.kind = kind;
            out.reply_id = Some(reply.id);
        }
        other => out.raw_type = Some(other.to_string()),
    }
    Ok(out)
}

/// Decodes one webhook notification body into inbound messages, in payload order.
///
/// Messages repeated within the batch (same platform id) are kept once.
pub fn parse_webhook(payload: &str) -> Result<Vec<InboundMessage>, GatewayError> {
    let note: Notification = serde_json::from_str(payload)
        .map_err(|e| GatewayError::MalformedPayload(e.to_string()))?;
    match note.object.as_deref() {
        Some(PLATFORM_OBJECT) | Some(SANDBOX_OBJECT) => {}
        Some(other) => {
            return Err(GatewayError::UnknownSchemaVersion(format!(
                "unexpected object {other:?}"
            )))
        }
        None => {
            return Err(GatewayError::UnknownSchemaVersion(
                "missing \"object\" field".into(),
            ))
        }
    }

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for value in note
        .entry
        .into_iter()
        .flat_map(|e| e.changes)
        .filter_map(|c| c.value)
    {
        if let Some(product) = value.messaging_product.as_deref() {
            if product != "whatsapp" && product != SANDBOX_OBJECT {
                return Err(GatewayError::UnknownSchemaVersion(format!(
                    "unexpected messaging_product {product:?}"
                )));
            }
        }
        for msg in value.messages {
            if !msg.id.is_empty() && !seen.insert(msg.id.clone()) {
                continue;
            }
            out.push(convert(msg)?);
        }
    }
    Ok(out)
}

/// Remembers recently processed platform message ids across batches, since
/// the platform retries deliveries it considers unacknowledged.
#[derive(Debug)]
pub struct Deduper {
    capacity: usize,
    order: VecDeque<String>,
    seen: HashSet<String>,
}

impl Deduper {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            order: VecDeque::new(),
            seen: HashSet::new(),
        }
    }

    /// Returns `true` the first time an id is offered. Empty ids always pass.
    pub fn first_sighting(&mut self, id: &str) -> bool {
        if id.is_empty() {
            return true;
        }
        if self.seen.contains(id) {
            return false;
        }
        if self.order.len() == self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.seen.remove(&old);
            }
        }
        self.order.push_back(id.to_string());
        self.seen.insert(id.to_string());
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wrap(messages: &str) -> String {
        format!(
            r#"{{"object":"whatsapp_business_account","entry":[{{"id":"1","changes":[{{"field":"messages","value":{{"messaging_product":"whatsapp","metadata":{{"phone_number_id":"99"}},"messages":[{messages}]}}}}]}}]}}"#
        )
    }

    #[test]
    fn text_message() {
        let body = wrap(
            r#"{"from":"923001234567","id":"wamid.1","timestamp":"1700000000","type":"text","text":{"body":"What is excise duty?"}}"#,
        );
        let msgs = parse_webhook(&body).unwrap();
        assert_eq!(msgs.len(), 1);
        assert_eq!(msgs[0].kind, InboundKind::Text);
        assert_eq!(msgs[0].body, "What is excise duty?");
        assert_eq!(msgs[0].sender, "923001234567");
        assert_eq!(msgs[0].received_at.timestamp_millis(), 1_700_000_000_000);
        assert!(msgs[0].is_well_formed());
    }

    #[test]
    fn status_only_is_empty() {
        let body = r#"{"object":"whatsapp_business_account","entry":[{"changes":[{"value":{"messaging_product":"whatsapp","statuses":[{"id":"wamid.9","status":"read"}]}}]}]}"#;
        assert!(parse_webhook(body).unwrap().is_empty());
    }

    #[test]
    fn list_reply() {
        let body = wrap(
            r#"{"from":"15551234567","id":"wamid.2","timestamp":"1700000001","type":"interactive","interactive":{"type":"list_reply","list_reply":{"id":"recent:7","title":"Is it safe?"}}}"#,
        );
        let msgs = parse_webhook(&body).unwrap();
        assert_eq!(msgs[0].kind, InboundKind::ListReply);
        assert_eq!(msgs[0].reply_id.as_deref(), Some("recent:7"));
        assert!(msgs[0].body.is_empty());
    }

    #[test]
    fn media_maps_to_system() {
        let body = wrap(
            r#"{"from":"15551234567","id":"wamid.3","timestamp":"1700000001","type":"image","image":{"id":"m1"}}"#,
        );
        let msgs = parse_webhook(&body).unwrap();
        assert_eq!(msgs[0].kind, InboundKind::System);
        assert_eq!(msgs[0].raw_type.as_deref(), Some("image"));
    }

    #[test]
    fn duplicate_ids_in_batch_kept_once() {
        let m = r#"{"from":"1555","id":"wamid.4","timestamp":"1700000001","type":"text","text":{"body":"hi"}}"#;
        let msgs = parse_webhook(&wrap(&format!("{m},{m}"))).unwrap();
        assert_eq!(msgs.len(), 1);
    }

    #[test]
    fn payload_order_preserved() {
        let a = r#"{"from":"1","id":"a","timestamp":"5","type":"text","text":{"body":"first"}}"#;
        let b = r#"{"from":"2","id":"b","timestamp":"3","type":"text","text":{"body":"second"}}"#;
        let msgs = parse_webhook(&wrap(&format!("{a},{b}"))).unwrap();
        assert_eq!(msgs[0].body, "first");
        assert_eq!(msgs[1].body, "second");
    }

    #[test]
    fn malformed_and_unknown_schema() {
        assert!(matches!(
            parse_webhook("{not json"),
            Err(GatewayError::MalformedPayload(_))
        ));
        assert!(matches!(
            parse_webhook(r#"{"object":"page","entry":[]}"#),
            Err(GatewayError::UnknownSchemaVersion(_))
        ));
        assert!(matches!(
            parse_webhook(r#"{"entry":[]}"#),
            Err(GatewayError::UnknownSchemaVersion(_))
        ));
        let bad_ts = wrap(r#"{"from":"1","id":"x","timestamp":"soon","type":"text","text":{"body":"q"}}"#);
        assert!(matches!(
            parse_webhook(&bad_ts),
            Err(GatewayError::MalformedPayload(_))
        ));
    }

    #[test]
    fn deduper_forgets_oldest() {
        let mut d = Deduper::new(2);
        assert!(d.first_sighting("a"));
        assert!(!d.first_sighting("a"));
        assert!(d.first_sighting("b"));
        assert!(d.first_sighting("c"));
        assert!(d.first_sighting("a"));
        assert!(d.first_sighting(""));
        assert!(d.first_sighting(""));
    }
}
