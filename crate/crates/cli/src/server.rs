//! HTTP surface: platform webhook, health, sandbox channel and the daily
//! scheduler.

use std::collections::HashSet;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::{bail, Context};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::Utc;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::broadcast;

use qabot_core::config::Config;
use qabot_core::engine::Engine;
use qabot_core::gateway::{
    parse_webhook, render_outbound, sandbox, verify_subscription, Deduper, GatewayError, Outbox, PlatformClient,
};
use qabot_core::llm::{HttpProvider, LlmClient, MockProvider, Provider};
use qabot_core::store::EventStore;

const INDEX_HTML: &str = include_str!("../assets/sandbox/index.html");
const APP_JS: &str = include_str!("../assets/sandbox/app.js");
const STYLE_CSS: &str = include_str!("../assets/sandbox/style.css");

/// Routes send-requests to sandbox personas over the hub and everything
/// else to the platform.
pub struct DeliveryRouter {
    platform: Option<PlatformClient>,
    personas: Mutex<HashSet<String>>,
    hub: broadcast::Sender<(String, String)>,
}

impl DeliveryRouter {
    pub fn new(platform: Option<PlatformClient>) -> Self {
        let (hub, _) = broadcast::channel(256);
        Self {
            platform,
            personas: Mutex::new(HashSet::new()),
            hub,
        }
    }

    fn add_persona(&self, address: &str) {
        self.personas.lock().expect("persona lock").insert(address.to_string());
    }

    fn is_persona(&self, address: &str) -> bool {
        self.personas.lock().expect("persona lock").contains(address)
    }

    pub fn subscribe(&self) -> broadcast::Receiver<(String, String)> {
        self.hub.subscribe()
    }
}

impl Outbox for DeliveryRouter {
    fn deliver(&self, body: &str) -> Result<(), GatewayError> {
        let v: Value = serde_json::from_str(body).map_err(|e| GatewayError::MalformedPayload(e.to_string()))?;
        let to = v["to"].as_str().unwrap_or_default();
        if self.is_persona(to) {
            let frame = sandbox::outbound_frame(&[body.to_string()])?;
            // no listener is fine: the persona may be offline
            let _ = self.hub.send((to.to_string(), frame));
            return Ok(());
        }
        match &self.platform {
            Some(p) => p.deliver(body),
            None => Err(GatewayError::Delivery("no platform credentials configured".into())),
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Mutex<Engine>>,
    pub outbox: Arc<DeliveryRouter>,
    pub verify_token: String,
    pub mock: bool,
    dedupe: Arc<Mutex<Deduper>>,
}

impl AppState {
    pub fn new(engine: Engine, outbox: DeliveryRouter, verify_token: String, mock: bool) -> Self {
        Self {
            engine: Arc::new(Mutex::new(engine)),
            outbox: Arc::new(outbox),
            verify_token,
            mock,
            dedupe: Arc::new(Mutex::new(Deduper::new(4096))),
        }
    }

    /// Runs one inbound payload through the engine. Returns the rendered
    /// replies per recipient in emission order.
    fn process(&self, payload: &str, from_sandbox: bool) -> Result<Vec<String>, GatewayError> {
        let messages = parse_webhook(payload)?;
        let mut bodies = Vec::new();
        let mut engine = self.engine.lock().expect("engine lock");
        for msg in messages {
            if !self.dedupe.lock().expect("dedupe lock").first_sighting(&msg.message_id) {
                continue;
            }
            if from_sandbox {
                self.outbox.add_persona(&msg.sender);
            }
            match engine.handle_inbound(&msg) {
                Ok(outcome) => {
                    let limits = engine.limits();
                    for m in &outcome.outbound {
                        bodies.push(render_outbound(m, limits)?);
                    }
                }
                Err(e) => tracing::error!(error = %e, "turn failed"),
            }
        }
        Ok(bodies)
    }
}

/// Assembles the engine and state from a configuration file.
pub fn build_state(config: &Config, force_mock: bool) -> anyhow::Result<AppState> {
    let mock = force_mock || config.mock.enabled;
    let missing = config.missing_credentials();
    if !mock && !missing.is_empty() {
        bail!("missing provider credentials: {} (use --mock to run offline)", missing.join(", "));
    }
    let provider: Arc<dyn Provider> = if mock {
        tracing::info!(seed = config.mock.seed, "starting with the mock provider");
        Arc::new(MockProvider::new(config.mock.seed))
    } else {
        Arc::new(HttpProvider::new(Duration::from_secs(60)))
    };
    let llm = LlmClient::new(provider, config.tier_set());
    let engine = open_engine(config, llm, &config.store.dir)?;
    let platform = std::env::var(&config.gateway.token_env)
        .ok()
        .map(|t| PlatformClient::new(&config.gateway.platform_base_url, t));
    if platform.is_none() {
        tracing::warn!(var = %config.gateway.token_env, "no platform token; only sandbox personas are reachable");
    }
    let verify = std::env::var(&config.gateway.verify_token_env).unwrap_or_default();
    Ok(AppState::new(engine, DeliveryRouter::new(platform), verify, mock))
}

pub fn open_engine(config: &Config, llm: LlmClient, dir: &Path) -> anyhow::Result<Engine> {
    let store = EventStore::open(dir).with_context(|| format!("opening store at {}", dir.display()))?;
    Engine::restore(config.engine_config(), llm, store).context("restoring engine state")
}

#[derive(Deserialize)]
struct VerifyQuery {
    #[serde(rename = "hub.mode", default)]
    mode: String,
    #[serde(rename = "hub.verify_token", default)]
    token: String,
    #[serde(rename = "hub.challenge", default)]
    challenge: String,
}

async fn verify(State(st): State<AppState>, Query(q): Query<VerifyQuery>) -> Response {
    match verify_subscription(&q.mode, &q.token, &q.challenge, &st.verify_token) {
        Ok(c) => (StatusCode::OK, c).into_response(),
        Err(_) => (StatusCode::FORBIDDEN, "verification failed").into_response(),
    }
}

async fn run_blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("blocking task panicked")
}

async fn webhook(State(st): State<AppState>, body: String) -> Response {
    let s = st.clone();
    let result = run_blocking(move || {
        let bodies = s.process(&body, false)?;
        for b in &bodies {
            if let Err(e) = s.outbox.deliver(b) {
                tracing::warn!(error = %e, "reply delivery failed");
            }
        }
        Ok::<_, GatewayError>(bodies.len())
    })
    .await;
    match result {
        Ok(n) => (StatusCode::OK, Json(json!({"replies": n}))).into_response(),
        Err(e) => (StatusCode::BAD_REQUEST, e.to_string()).into_response(),
    }
}

async fn health(State(st): State<AppState>) -> Json<Value> {
    Json(json!({
        "status": "ready",
        "mode": if st.mock { "mock" } else { "live" },
    }))
}

async fn sandbox_post(State(st): State<AppState>, body: String) -> Response {
    let s = st.clone();
    let result = run_blocking(move || s.process(&body, true).and_then(|b| sandbox::outbound_frame(&b))).await;
    match result {
        Ok(frame) => ([(header::CONTENT_TYPE, "application/json")], frame).into_response(),
        Err(e) => (StatusCode::BAD_REQUEST, e.to_string()).into_response(),
    }
}

#[derive(Deserialize)]
struct WsQuery {
    persona: String,
}

async fn sandbox_ws(State(st): State<AppState>, Query(q): Query<WsQuery>, ws: WebSocketUpgrade) -> Response {
    st.outbox.add_persona(&q.persona);
    ws.on_upgrade(move |socket| ws_session(st, q.persona, socket))
}

async fn ws_session(st: AppState, persona: String, mut socket: WebSocket) {
    let mut pushes = st.outbox.subscribe();
    loop {
        tokio::select! {
            incoming = socket.recv() => {
                let Some(Ok(msg)) = incoming else { break };
                let Message::Text(text) = msg else { continue };
                let s = st.clone();
                let payload = text.to_string();
                let reply = run_blocking(move || s.process(&payload, true).and_then(|b| sandbox::outbound_frame(&b))).await;
                let out = match reply {
                    Ok(frame) => frame,
                    Err(e) => json!({"object": "sandbox", "error": e.to_string()}).to_string(),
                };
                if socket.send(Message::Text(out.into())).await.is_err() {
                    break;
                }
            }
            pushed = pushes.recv() => {
                match pushed {
                    Ok((to, frame)) if to == persona => {
                        if socket.send(Message::Text(frame.into())).await.is_err() {
                            break;
                        }
                    }
                    Ok(_) | Err(broadcast::error::RecvError::Lagged(_)) => {}
                    Err(broadcast::error::RecvError::Closed) => break,
                }
            }
        }
    }
}

fn asset(content_type: &'static str, body: &'static str) -> Response {
    ([(header::CONTENT_TYPE, content_type)], body).into_response()
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/webhook", get(verify).post(webhook))
        .route("/health", get(health))
        .route("/sandbox", get(|| async { Html(INDEX_HTML) }))
        .route("/sandbox/", get(|| async { Html(INDEX_HTML) }))
        .route("/sandbox/app.js", get(|| async { asset("text/javascript; charset=utf-8", APP_JS) }))
        .route("/sandbox/style.css", get(|| async { asset("text/css; charset=utf-8", STYLE_CSS) }))
        .route("/sandbox/messages", axum::routing::post(sandbox_post))
        .route("/sandbox/ws", get(sandbox_ws))
        .with_state(state)
}

/// One scheduler pass: sends the daily question if it is due.
pub async fn scheduler_tick(st: &AppState) {
    let s = st.clone();
    let result = run_blocking(move || {
        let mut engine = s.engine.lock().expect("engine lock");
        let outbox: &dyn Outbox = s.outbox.as_ref();
        engine.run_scheduler(Utc::now(), Some(outbox))
    })
    .await;
    match result {
        Ok(Some(b)) => tracing::info!(day = %b.day, recipients = b.recipients.len(), failed = b.failed.len(), "daily question sent"),
        Ok(None) => {}
        Err(e) => tracing::error!(error = %e, "daily question failed"),
    }
}

/// Serves until ctrl-c, then flushes snapshots.
pub async fn serve(state: AppState, listen: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen)
        .await
        .with_context(|| format!("binding {listen}"))?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    let ticker = {
        let st = state.clone();
        tokio::spawn(async move {
            let mut every = tokio::time::interval(Duration::from_secs(30));
            loop {
                every.tick().await;
                scheduler_tick(&st).await;
            }
        })
    };
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    ticker.abort();
    let engine = state.engine.lock().expect("engine lock");
    engine.flush().context("flushing snapshots")?;
    tracing::info!("store flushed");
    Ok(())
}
