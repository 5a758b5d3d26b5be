use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use serde_json::Value;

use qabot_core::gateway::{GatewayError, Outbox, PlatformClient};
use qabot_core::llm::{ChatMessage, CompletionRequest, HttpProvider, ModelTier, Provider, ProviderError, Task, Tier};

struct Captured {
    request_line: String,
    headers: Vec<String>,
    body: String,
}

/// Serves one request with a canned response and hands back what it saw.
fn one_shot(status: &str, body: &'static str) -> (String, thread::JoinHandle<Captured>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let status = status.to_string();
    let handle = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut request_line = String::new();
        reader.read_line(&mut request_line).unwrap();
        let mut headers = Vec::new();
        let mut len = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let line = line.trim_end().to_string();
            if line.is_empty() {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                len = v.trim().parse().unwrap();
            }
            headers.push(line);
        }
        let mut buf = vec![0; len];
        reader.read_exact(&mut buf).unwrap();
        let mut stream = stream;
        write!(
            stream,
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        Captured {
            request_line: request_line.trim_end().to_string(),
            headers,
            body: String::from_utf8(buf).unwrap(),
        }
    });
    (base, handle)
}

fn tier(base_url: &str, key_env: Option<&str>) -> ModelTier {
    ModelTier {
        tier: Tier::Standard,
        base_url: format!("{base_url}/v1/"),
        model: "small-model".into(),
        api_key_env: key_env.map(String::from),
    }
}

fn request() -> CompletionRequest {
    CompletionRequest {
        task: Task::Answer,
        tier: Tier::Standard,
        messages: vec![ChatMessage::system("be brief"), ChatMessage::user("why is the sky blue?")],
    }
}

#[test]
fn provider_posts_chat_completion() {
    let (base, server) = one_shot("200 OK", r#"{"choices":[{"message":{"role":"assistant","content":"Scattering."}}]}"#);
    std::env::set_var("QABOT_TEST_PROVIDER_KEY", "sk-test");
    let p = HttpProvider::new(Duration::from_secs(5));
    let out = p.complete(&tier(&base, Some("QABOT_TEST_PROVIDER_KEY")), &request()).unwrap();
    assert_eq!(out, "Scattering.");

    let seen = server.join().unwrap();
    assert_eq!(seen.request_line, "POST /v1/chat/completions HTTP/1.1");
    assert!(seen.headers.iter().any(|h| h.eq_ignore_ascii_case("authorization: Bearer sk-test")));
    let v: Value = serde_json::from_str(&seen.body).unwrap();
    assert_eq!(v["model"], "small-model");
    assert_eq!(v["messages"][0]["role"], "system");
    assert_eq!(v["messages"][1]["content"], "why is the sky blue?");
    // decoding parameters stay at provider defaults
    assert!(v.get("temperature").is_none());
}

#[test]
fn provider_error_status_is_rejection() {
    let (base, server) = one_shot("429 Too Many Requests", "{}");
    let p = HttpProvider::new(Duration::from_secs(5));
    let err = p.complete(&tier(&base, None), &request()).unwrap_err();
    assert!(matches!(err, ProviderError::Rejection(m) if m.contains("429")));
    server.join().unwrap();
}

#[test]
fn provider_without_choices_is_rejection() {
    let (base, server) = one_shot("200 OK", r#"{"choices":[]}"#);
    let p = HttpProvider::new(Duration::from_secs(5));
    assert!(p.complete(&tier(&base, None), &request()).is_err());
    server.join().unwrap();
}

#[test]
fn platform_client_posts_with_bearer() {
    let (base, server) = one_shot("200 OK", r#"{"messages":[{"id":"wamid.x"}]}"#);
    let c = PlatformClient::new(&format!("{base}/v19.0/123/"), "tok");
    c.deliver(r#"{"messaging_product":"whatsapp","to":"+1555"}"#).unwrap();
    let seen = server.join().unwrap();
    assert_eq!(seen.request_line, "POST /v19.0/123/messages HTTP/1.1");
    assert!(seen.headers.iter().any(|h| h.eq_ignore_ascii_case("authorization: Bearer tok")));
    assert_eq!(seen.body, r#"{"messaging_product":"whatsapp","to":"+1555"}"#);
}

#[test]
fn platform_client_reports_failure_status() {
    let (base, server) = one_shot("500 Internal Server Error", "{}");
    let c = PlatformClient::new(&base, "tok");
    assert!(matches!(c.deliver("{}"), Err(GatewayError::Delivery(m)) if m.contains("500")));
    server.join().unwrap();
}
