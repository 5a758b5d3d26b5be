//! Platform codec: webhook ingress, send-request egress, the subscription
//! handshake and the offline sandbox channel.

mod message;
mod render;
pub mod sandbox;
mod webhook;

use std::time::Duration;

use thiserror::Error;

pub use message::*;
pub use render::{render_outbound, validate, RenderLimits};
pub use webhook::{parse_webhook, Deduper, PLATFORM_OBJECT, SANDBOX_OBJECT};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("unknown webhook schema: {0}")]
    UnknownSchemaVersion(String),
    #[error("message violates platform constraints: {0}")]
    ConstraintViolation(String),
    #[error("webhook verification failed")]
    VerificationFailed,
    #[error("delivery failed: {0}")]
    Delivery(String),
}

/// Answers the platform's subscription handshake.
pub fn verify_subscription(
    mode: &str,
    token: &str,
    challenge: &str,
    expected_token: &str,
) -> Result<String, GatewayError> {
    if mode == "subscribe" && !expected_token.is_empty() && token == expected_token {
        Ok(challenge.to_string())
    } else {
        Err(GatewayError::VerificationFailed)
    }
}

/// Delivers rendered send-request bodies to a recipient.
pub trait Outbox: Send + Sync {
    fn deliver(&self, body: &str) -> Result<(), GatewayError>;
}

/// Posts send-requests to `{base_url}/messages` with bearer auth.
pub struct PlatformClient {
    agent: ureq::Agent,
    url: String,
    token: String,
}

impl PlatformClient {
    pub fn new(base_url: &str, token: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(20)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            url: format!("{}/messages", base_url.trim_end_matches('/')),
            token: token.into(),
        }
    }
}

impl Outbox for PlatformClient {
    fn deliver(&self, body: &str) -> Result<(), GatewayError> {
        let resp = self
            .agent
            .post(&self.url)
            .header("Authorization", &format!("Bearer {}", self.token))
            .header("Content-Type", "application/json")
            .send(body)
            .map_err(|e| GatewayError::Delivery(e.to_string()))?;
        let status = resp.status();
        if status.is_success() {
            Ok(())
        } else {
            Err(GatewayError::Delivery(format!("platform returned {status}")))
        }
    }
}
