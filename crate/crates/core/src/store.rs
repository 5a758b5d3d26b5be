//! Append-only event log (JSON Lines), content table, snapshots and the
//! phone-number pseudonymizer.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const EVENTS_FILE: &str = "events.jsonl";
pub const CONTENT_FILE: &str = "content.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Inbound,
    Outbound,
}

/// Feature tag of a logged event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Freeform,
    ContinueReading,
    BetterAnswer,
    Menu,
    TrendingView,
    TrendingSelect,
    RecentView,
    RecentSelect,
    FollowupView,
    FollowupFullList,
    FollowupSelect,
    LeaderboardView,
    MypointsView,
    TopqSent,
    TopqAnswerView,
    Register,
    OptOut,
    OptIn,
    /// Introductory message or any message before terms were accepted.
    Intro,
    /// Media, stale buttons and anything else the bot cannot act on.
    Unsupported,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Freeform => "freeform",
            Action::ContinueReading => "continue_reading",
            Action::BetterAnswer => "better_answer",
            Action::Menu => "menu",
            Action::TrendingView => "trending_view",
            Action::TrendingSelect => "trending_select",
            Action::RecentView => "recent_view",
            Action::RecentSelect => "recent_select",
            Action::FollowupView => "followup_view",
            Action::FollowupFullList => "followup_full_list",
            Action::FollowupSelect => "followup_select",
            Action::LeaderboardView => "leaderboard_view",
            Action::MypointsView => "mypoints_view",
            Action::TopqSent => "topq_sent",
            Action::TopqAnswerView => "topq_answer_view",
            Action::Register => "register",
            Action::OptOut => "opt_out",
            Action::OptIn => "opt_in",
            Action::Intro => "intro",
            Action::Unsupported => "unsupported",
        }
    }
}

/// One row of the event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    #[serde(with = "chrono::serde::ts_milliseconds")]
    pub at: DateTime<Utc>,
    pub user_code: String,
    pub direction: Direction,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_id: Option<String>,
}

/// A record before the store assigns its sequence number. The payload text
/// goes to the content table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Draft {
    pub at: DateTime<Utc>,
    pub user_code: String,
    pub direction: Direction,
    pub action: Action,
    pub feature_id: Option<String>,
    pub payload: Option<String>,
}

impl Draft {
    pub fn new(at: DateTime<Utc>, user_code: &str, direction: Direction, action: Action) -> Self {
        Self {
            at,
            user_code: user_code.to_string(),
            direction,
            action,
            feature_id: None,
            payload: None,
        }
    }

    pub fn feature(mut self, id: impl Into<String>) -> Self {
        self.feature_id = Some(id.into());
        self
    }

    pub fn payload(mut self, text: impl Into<String>) -> Self {
        self.payload = Some(text.into());
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ContentRow {
    #[serde(rename = "ref")]
    payload_ref: String,
    text: String,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage full ({0} records)")]
    StorageFull(usize),
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
    #[error("invalid record: {0}")]
    Invalid(String),
    #[error("corrupt log line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
}

/// True for strings that look like a raw user address (phone number or
/// sandbox id) rather than a pseudonymous code.
pub fn looks_like_address(code: &str) -> bool {
    let digits = code.strip_prefix('+').unwrap_or(code);
    let phone = digits.len() >= 5 && digits.bytes().all(|b| b.is_ascii_digit() || b == b' ' || b == b'-');
    phone || code.starts_with("sandbox-")
}

fn validate(draft: &Draft) -> Result<(), StoreError> {
    if draft.user_code.trim().is_empty() {
        return Err(StoreError::Invalid("empty user_code".into()));
    }
    if looks_like_address(&draft.user_code) {
        return Err(StoreError::Invalid("user_code is a raw address".into()));
    }
    Ok(())
}

/// The event log: kept in memory, mirrored to `events.jsonl` and
/// `content.jsonl` when opened on a directory.
#[derive(Debug)]
pub struct EventStore {
    dir: Option<PathBuf>,
    records: Vec<EventRecord>,
    capacity: Option<usize>,
}

impl EventStore {
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            records: Vec::new(),
            capacity: None,
        }
    }

    /// Opens (or creates) a store directory and loads the existing log.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let path = dir.join(EVENTS_FILE);
        let records = if path.exists() { read_log(&path)? } else { Vec::new() };
        Ok(Self {
            dir: Some(dir),
            records,
            capacity: None,
        })
    }

    pub fn with_capacity_limit(mut self, max_records: usize) -> Self {
        self.capacity = Some(max_records);
        self
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_seq(&self) -> u64 {
        self.records.last().map_or(0, |r| r.seq)
    }

    pub fn append(&mut self, draft: Draft) -> Result<u64, StoreError> {
        self.append_turn(vec![draft]).map(|seqs| seqs[0])
    }

    /// Appends all records of one turn, or none of them.
    pub fn append_turn(&mut self, drafts: Vec<Draft>) -> Result<Vec<u64>, StoreError> {
        for d in &drafts {
            validate(d)?;
        }
        if let Some(cap) = self.capacity {
            if self.records.len() + drafts.len() > cap {
                return Err(StoreError::StorageFull(cap));
            }
        }
        let mut next = self.last_seq();
        let mut rows = Vec::with_capacity(drafts.len());
        let mut contents = Vec::new();
        for d in drafts {
            next += 1;
            let payload_ref = d.payload.map(|text| {
                let r = format!("p{next}");
                contents.push(ContentRow {
                    payload_ref: r.clone(),
                    text,
                });
                r
            });
            rows.push(EventRecord {
                seq: next,
                at: d.at,
                user_code: d.user_code,
                direction: d.direction,
                action: d.action,
                payload_ref,
                feature_id: d.feature_id,
            });
        }
        if let Some(dir) = &self.dir {
            let content_path = dir.join(CONTENT_FILE);
            let events_path = dir.join(EVENTS_FILE);
            let content_mark = file_len(&content_path)?;
            if let Err(e) = append_lines(&content_path, &contents) {
                let _ = truncate(&content_path, content_mark);
                return Err(e);
            }
            let events_mark = file_len(&events_path)?;
            if let Err(e) = append_lines(&events_path, &rows) {
                let _ = truncate(&events_path, events_mark);
                let _ = truncate(&content_path, content_mark);
                return Err(e);
            }
        }
        let seqs = rows.iter().map(|r| r.seq).collect();
        self.records.extend(rows);
        Ok(seqs)
    }

    /// Records with `from <= at < to`, in sequence order.
    pub fn load_range(&self, from: DateTime<Utc>, to: DateTime<Utc>) -> Vec<EventRecord> {
        self.records
            .iter()
            .filter(|r| r.at >= from && r.at < to)
            .cloned()
            .collect()
    }

    /// Text behind a payload reference, read from the content table.
    pub fn content(&self, payload_ref: &str) -> Result<Option<String>, StoreError> {
        let Some(dir) = &self.dir else { return Ok(None) };
        let path = dir.join(CONTENT_FILE);
        if !path.exists() {
            return Ok(None);
        }
        for line in BufReader::new(File::open(path)?).lines() {
            let row: ContentRow = match serde_json::from_str(&line?) {
                Ok(r) => r,
                Err(_) => continue,
            };
            if row.payload_ref == payload_ref {
                return Ok(Some(row.text));
            }
        }
        Ok(None)
    }

    pub fn save_snapshot<T: Serialize>(&self, name: &str, value: &T) -> Result<(), StoreError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        write_snapshot(&dir.join(name), value)
    }

    pub fn load_snapshot<T: DeserializeOwned>(&self, name: &str) -> Result<Option<T>, StoreError> {
        let Some(dir) = &self.dir else { return Ok(None) };
        let path = dir.join(name);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| StoreError::Corrupt {
                line: e.line(),
                reason: e.to_string(),
            })
    }
}

/// Reads a JSON Lines event log. Blank lines are skipped.
pub fn read_log(path: &Path) -> Result<Vec<EventRecord>, StoreError> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EventRecord = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Serializes records as JSON Lines.
pub fn to_jsonl(records: &[EventRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("event record serializes"));
        s.push('\n');
    }
    s
}

fn file_len(path: &Path) -> Result<u64, StoreError> {
    match fs::metadata(path) {
        Ok(m) => Ok(m.len()),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(0),
        Err(e) => Err(e.into()),
    }
}

fn truncate(path: &Path, len: u64) -> io::Result<()> {
    OpenOptions::new().write(true).open(path)?.set_len(len)
}

fn append_lines<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), StoreError> {
    if rows.is_empty() {
        return Ok(());
    }
    let mut buf = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut buf, r).map_err(|e| StoreError::Invalid(e.to_string()))?;
        buf.push(b'\n');
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(&buf)?;
    f.flush()?;
    f.sync_data()?;
    Ok(())
}

fn write_snapshot<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    let body = serde_json::to_vec_pretty(value).map_err(|e| StoreError::Invalid(e.to_string()))?;
    fs::write(&tmp, body)?;
    fs::rename(tmp, path)?;
    Ok(())
}

/// Maps user addresses to stable opaque codes.
#[derive(Debug, Clone)]
pub struct Pseudonymizer {
    salt: String,
}

impl Pseudonymizer {
    pub fn new(salt: impl Into<String>) -> Self {
        Self { salt: salt.into() }
    }

    pub fn code(&self, address: &str) -> String {
        let mut h = Sha256::new();
        h.update(self.salt.as_bytes());
        h.update([0u8]);
        h.update(address.as_bytes());
        let digest = hex::encode(h.finalize());
        format!("u{}", &digest[..16])
    }
}

/// SHA-256 over the JSON form of a value; used to compare rebuilt state.
pub fn state_digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("state serializes");
    hex::encode(Sha256::digest(bytes))
}
