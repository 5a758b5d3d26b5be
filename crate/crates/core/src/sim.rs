//! Scripted conversations replayed against a fresh in-memory deployment
//! with a virtual clock and the seeded mock provider.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, Utc};
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::engine::{Engine, EngineConfig, EngineError};
use crate::gateway::{parse_webhook, render_outbound, sandbox, GatewayError, Outbox};
use crate::llm::{LlmClient, MockProvider, TierSet};
use crate::store::EventStore;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("script invalid at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("script invalid at step {step}: {message}")]
    ScriptInvalid { step: usize, message: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sender {
    pub name: String,
    pub address: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    /// Seconds since the script start.
    pub at: i64,
    #[serde(default)]
    pub from: Option<String>,
    #[serde(default)]
    pub text: Option<String>,
    /// Action id of a button or list row offered earlier to the sender.
    #[serde(default)]
    pub tap: Option<String>,
    /// Send the daily top question now.
    #[serde(default)]
    pub topq: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptScript {
    pub seed: u64,
    pub start: DateTime<Utc>,
    pub senders: Vec<Sender>,
    pub steps: Vec<Step>,
}

impl TranscriptScript {
    pub fn parse(src: &str) -> Result<Self, SimError> {
        let script: Self = toml::from_str(src).map_err(|e| {
            let offset = e.span().map_or(0, |s| s.start);
            let before = &src[..offset.min(src.len())];
            SimError::Parse {
                line: before.matches('\n').count() + 1,
                column: before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1,
                message: e.message().to_string(),
            }
        })?;
        script.check()?;
        Ok(script)
    }

    fn check(&self) -> Result<(), SimError> {
        let bad = |step: usize, message: String| Err(SimError::ScriptInvalid { step, message });
        let names: Vec<&str> = self.senders.iter().map(|s| s.name.as_str()).collect();
        for (i, s) in self.senders.iter().enumerate() {
            if names[..i].contains(&s.name.as_str()) {
                return bad(0, format!("sender {:?} declared twice", s.name));
            }
        }
        let mut prev = 0;
        for (i, step) in self.steps.iter().enumerate() {
            let n = i + 1;
            if step.at < prev {
                return bad(n, format!("offset {} is before the previous step's {}", step.at, prev));
            }
            prev = step.at;
            let parts = usize::from(step.text.is_some()) + usize::from(step.tap.is_some()) + usize::from(step.topq);
            if parts != 1 {
                return bad(n, "a step needs exactly one of text, tap or topq".into());
            }
            match (&step.from, step.topq) {
                (Some(f), false) if !names.contains(&f.as_str()) => {
                    return bad(n, format!("undeclared sender {f:?}"));
                }
                (None, false) => return bad(n, "text and tap steps need a sender".into()),
                (Some(_), true) => return bad(n, "topq steps have no sender".into()),
                _ => {}
            }
        }
        Ok(())
    }
}

/// Collects delivered bodies in order.
#[derive(Default)]
pub struct RecordingOutbox {
    pub bodies: Mutex<Vec<String>>,
}

impl Outbox for RecordingOutbox {
    fn deliver(&self, body: &str) -> Result<(), GatewayError> {
        self.bodies.lock().expect("outbox lock").push(body.to_string());
        Ok(())
    }
}

pub struct SimRun {
    pub transcript: String,
    pub engine: Engine,
    pub mock: Arc<MockProvider>,
}

/// Affordances a sender has been shown, with whether each came from a list.
type Offered = BTreeMap<String, BTreeMap<String, bool>>;

fn offered_ids(body: &Value) -> Vec<(String, bool)> {
    let action = &body["interactive"]["action"];
    let buttons = action["buttons"].as_array().into_iter().flatten();
    let rows = action["sections"]
        .as_array()
        .into_iter()
        .flatten()
        .flat_map(|s| s["rows"].as_array().into_iter().flatten());
    buttons
        .filter_map(|b| b["reply"]["id"].as_str().map(|id| (id.to_string(), false)))
        .chain(rows.filter_map(|r| r["id"].as_str().map(|id| (id.to_string(), true))))
        .collect()
}

fn write_body(out: &mut String, body: &Value, names: &BTreeMap<&str, &str>) {
    let to = body["to"].as_str().unwrap_or("?");
    let _ = writeln!(out, "bot > {}", names.get(to).copied().unwrap_or(to));
    let text = body["text"]["body"]
        .as_str()
        .or_else(|| body["interactive"]["body"]["text"].as_str())
        .unwrap_or("");
    for line in text.split('\n') {
        let _ = writeln!(out, "  | {line}");
    }
    let action = &body["interactive"]["action"];
    for b in action["buttons"].as_array().into_iter().flatten() {
        let _ = writeln!(
            out,
            "  [{}] {}",
            b["reply"]["id"].as_str().unwrap_or(""),
            b["reply"]["title"].as_str().unwrap_or("")
        );
    }
    if let Some(button) = action["button"].as_str() {
        let _ = writeln!(out, "  list: {button}");
        for s in action["sections"].as_array().into_iter().flatten() {
            let _ = writeln!(out, "  section: {}", s["title"].as_str().unwrap_or(""));
            for r in s["rows"].as_array().into_iter().flatten() {
                let _ = write!(
                    out,
                    "  - [{}] {}",
                    r["id"].as_str().unwrap_or(""),
                    r["title"].as_str().unwrap_or("")
                );
                if let Some(d) = r["description"].as_str() {
                    let _ = write!(out, " / {d}");
                }
                out.push('\n');
            }
        }
    }
}

/// Replays `script` and returns the outbound transcript. `seed` overrides
/// the script's seed.
pub fn run_script(script: &TranscriptScript, config: EngineConfig, seed: Option<u64>) -> Result<SimRun, SimError> {
    script.check()?;
    let seed = seed.unwrap_or(script.seed);
    let mock = Arc::new(MockProvider::new(seed));
    let llm = LlmClient::new(mock.clone(), TierSet::offline());
    let mut engine = Engine::new(config, llm, EventStore::in_memory());
    let limits = engine.limits();

    let names: BTreeMap<&str, &str> = script
        .senders
        .iter()
        .map(|s| (s.address.as_str(), s.name.as_str()))
        .collect();
    let address: BTreeMap<&str, &str> = script
        .senders
        .iter()
        .map(|s| (s.name.as_str(), s.address.as_str()))
        .collect();
    let mut offered: Offered = BTreeMap::new();
    let mut out = String::new();

    for (i, step) in script.steps.iter().enumerate() {
        let n = i + 1;
        let at = script.start + Duration::seconds(step.at);
        let mut bodies: Vec<String> = Vec::new();
        if step.topq {
            let _ = writeln!(out, "#{n} +{}s topq", step.at);
            let outbox = RecordingOutbox::default();
            engine.broadcast_topq(at, Some(&outbox))?;
            bodies = outbox.bodies.into_inner().expect("outbox lock");
        } else {
            let from = step.from.as_deref().expect("checked");
            let addr = address[from];
            let message_id = format!("sim-{n}");
            let frame = if let Some(text) = &step.text {
                let _ = writeln!(out, "#{n} +{}s {from} > {text}", step.at);
                sandbox::inbound_text(addr, &message_id, at, text)
            } else {
                let id = step.tap.as_deref().expect("checked");
                let Some(&list) = offered.get(addr).and_then(|m| m.get(id)) else {
                    return Err(SimError::ScriptInvalid {
                        step: n,
                        message: format!("{from} was never offered {id:?}"),
                    });
                };
                let _ = writeln!(out, "#{n} +{}s {from} tap {id}", step.at);
                sandbox::inbound_tap(addr, &message_id, at, id, list)
            };
            for msg in parse_webhook(&frame)? {
                let outcome = engine.handle_inbound(&msg)?;
                for m in &outcome.outbound {
                    bodies.push(render_outbound(m, limits)?);
                }
            }
        }
        for b in &bodies {
            let v: Value = serde_json::from_str(b).map_err(|e| GatewayError::MalformedPayload(e.to_string()))?;
            let to = v["to"].as_str().unwrap_or_default().to_string();
            let slot = offered.entry(to).or_default();
            for (id, list) in offered_ids(&v) {
                slot.insert(id, list);
            }
            write_body(&mut out, &v, &names);
        }
        out.push('\n');
    }
    Ok(SimRun {
        transcript: out,
        engine,
        mock,
    })
}

/// The bundled demo: a second user seeds the curated lists, then the main
/// user registers, asks, pages through a long answer, escalates, asks for
/// follow-ups, opens a trending question and checks the leaderboard.
pub const DEMO_SCRIPT: &str = include_str!("../scripts/demo.toml");
