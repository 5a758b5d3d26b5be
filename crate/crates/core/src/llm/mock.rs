//! Deterministic offline provider.
//!
//! Every completion is a pure function of `(task, prompt, seed)`: the inputs
//! are hashed with SHA-256 over `seed (u64 little-endian) ‖ task name ‖ 0x00 ‖
//! prompt` and the digest bytes drive fixed per-task templates. Output shapes
//! match what each prompt asks for, except when malformed-output injection
//! fires.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::prompts::Task;
use super::provider::{CompletionRequest, ModelTier, Provider, ProviderError, Tier};

pub fn mock_digest(task: Task, prompt: &str, seed: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(task.name().as_bytes());
    h.update([0u8]);
    h.update(prompt.as_bytes());
    h.finalize().into()
}

/// Fault-injection settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MockOptions {
    /// Seeds for which every structured completion is malformed.
    pub inject_seeds: BTreeSet<u64>,
    /// Fraction (0..=1) of structured completions made malformed.
    pub malformed_rate: f64,
}

fn malformed(task: Task, digest: &[u8; 32], seed: u64, opts: &MockOptions) -> bool {
    if !matches!(
        task,
        Task::Followups | Task::TrendingRate | Task::Rephrase | Task::RecentFilter
    ) {
        return false;
    }
    opts.inject_seeds.contains(&seed) || f64::from(digest[31]) / 256.0 < opts.malformed_rate
}

/// Byte threshold under which a criterion scores 1. Questions on themes with
/// broad appeal score high; everything else mostly low.
pub const BROAD_THEME_THRESHOLD: u8 = 243;
pub const NARROW_THRESHOLD: u8 = 90;

const BROAD_THEMES: &[&str] = &[
    "parent", "child", "kid", "family", "marri", "divorce", "career", "job", "retire",
    "friend", "relationship", "love", "health", "stress", "sleep", "happ", "learn",
    "school", "study", "phd", "money", "save", "habit", "resilien", "fulfil", "memor",
    "advice", "life", "old age", "emotional", "patience", "doctor",
];

pub fn is_broad_theme(question: &str) -> bool {
    let q = question.to_lowercase();
    BROAD_THEMES.iter().any(|t| q.contains(t))
}

const INTERROGATIVES: &[&str] = &[
    "what", "why", "how", "when", "where", "who", "whom", "whose", "which", "is", "are", "am",
    "can", "could", "should", "would", "will", "do", "does", "did", "may", "might", "shall",
    "has", "have", "was", "were",
];

const TYPOS: &[(&str, &str)] = &[
    ("teh", "the"),
    ("wat", "what"),
    ("wht", "what"),
    ("hw", "how"),
    ("u", "you"),
    ("ur", "your"),
    ("r", "are"),
    ("y", "why"),
    ("pls", "please"),
    ("plz", "please"),
    ("recieve", "receive"),
    ("becuase", "because"),
    ("definately", "definitely"),
    ("thier", "their"),
    ("dont", "don't"),
    ("cant", "can't"),
    ("whats", "what's"),
    ("im", "I'm"),
    ("i", "I"),
    ("shud", "should"),
    ("abt", "about"),
    ("wich", "which"),
    ("seperate", "separate"),
];

const EMOJI_BY_TOPIC: &[(&str, &str)] = &[
    ("health", "🩺"),
    ("doctor", "🩺"),
    ("diabet", "🩺"),
    ("food", "🍲"),
    ("eat", "🍲"),
    ("money", "💰"),
    ("financ", "💰"),
    ("duty", "💰"),
    ("tax", "💰"),
    ("marri", "💍"),
    ("love", "💞"),
    ("parent", "👨‍👩‍👧"),
    ("child", "👨‍👩‍👧"),
    ("kid", "👨‍👩‍👧"),
    ("career", "💼"),
    ("job", "💼"),
    ("school", "🎓"),
    ("phd", "🎓"),
    ("learn", "🎓"),
    ("travel", "✈️"),
    ("phone", "💻"),
    ("computer", "💻"),
];

fn topic_emoji(text: &str) -> &'static str {
    let t = text.to_lowercase();
    EMOJI_BY_TOPIC
        .iter()
        .find(|(k, _)| t.contains(k))
        .map(|(_, e)| *e)
        .unwrap_or("🤔")
}

pub fn has_emoji(text: &str) -> bool {
    text.chars().any(|c| {
        let u = c as u32;
        (0x1F300..=0x1FAFF).contains(&u) || (0x2600..=0x27BF).contains(&u)
    })
}

/// Letters outside the Latin script mark a statement as non-English.
fn non_latin(text: &str) -> bool {
    text.chars()
        .any(|c| c.is_alphabetic() && !c.is_ascii_alphabetic() && !('\u{C0}'..='\u{24F}').contains(&c))
}

fn looks_like_question(text: &str) -> bool {
    let t = text.trim();
    if t.ends_with('?') {
        return true;
    }
    let first = t
        .split_whitespace()
        .next()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .unwrap_or_default();
    INTERROGATIVES.contains(&first.as_str())
}

fn refers_outside(text: &str) -> bool {
    let words: Vec<String> = text
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .collect();
    words.iter().any(|w| w == "above")
        || (words.len() <= 4 && words.iter().any(|w| matches!(w.as_str(), "this" | "that" | "it")))
}

fn fix_typos(text: &str) -> String {
    text.split_whitespace()
        .map(|w| {
            let core = w.trim_end_matches(|c: char| c.is_ascii_punctuation());
            let tail = &w[core.len()..];
            let lower = core.to_lowercase();
            match TYPOS.iter().find(|(bad, _)| *bad == lower) {
                Some((_, good)) => format!("{good}{tail}"),
                None => w.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Cleans a question: typo table, capitalisation, a closing question mark,
/// a word cap, and one emoji.
pub fn tidy_question(text: &str, max_words: usize) -> String {
    let mut q = fix_typos(text);
    let words: Vec<&str> = q.split_whitespace().collect();
    if words.len() > max_words {
        q = words[..max_words].join(" ");
    }
    let mut q = q.trim_end_matches(['.', '!', ' ']).to_string();
    if let Some(first) = q.chars().next() {
        let upper: String = first.to_uppercase().collect();
        q.replace_range(..first.len_utf8(), &upper);
    }
    if !has_emoji(&q) {
        if !q.ends_with('?') {
            q.push('?');
        }
        q.push(' ');
        q.push_str(topic_emoji(&q));
    }
    q
}

fn topic_of(query: &str) -> String {
    let t = query.trim().trim_end_matches(['?', '.', '!']);
    let mut out = String::new();
    for w in t.split_whitespace() {
        if out.chars().count() + w.chars().count() > 48 {
            break;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(w);
    }
    if out.is_empty() {
        t.chars().take(48).collect()
    } else {
        out
    }
}

const OPENERS: &[&str] = &[
    "Great question! 🌟",
    "Ah, a classic one! 😄",
    "Happy to help with this! 🙌",
    "Let's dig in! 🔎",
];

const SENTENCES: &[&str] = &[
    "When it comes to {t}, the short version is that context matters a lot, and a few simple ideas go a long way.",
    "Most experts would point out that {t} has both practical and personal sides worth thinking about.",
    "A useful way to think about {t} is to start from what you already know and build up step by step.",
    "People often overlook how much small, consistent habits shape outcomes around {t}.",
    "If you are unsure, it is always a good idea to check with a trusted local source or professional. 🧭",
    "There is no single right answer, but there are some tried-and-tested tips that help most people.",
    "History offers plenty of interesting examples here, and many of them still hold true today. 📜",
    "On the practical side, keep things simple, write down what matters, and revisit it every so often. 📝",
    "And yes, a little humour helps: even the experts had to google this once! 😅",
    "Different regions handle this differently, so local customs and rules can change the details. 🌍",
];

fn paragraph(digest: &[u8; 32], offset: usize, topic: &str) -> String {
    let n = 2 + usize::from(digest[offset % 32] % 2);
    (0..n)
        .map(|k| {
            let idx = usize::from(digest[(offset + k * 7 + 3) % 32]) % SENTENCES.len();
            SENTENCES[idx].replace("{t}", topic)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn wants_depth(query: &str) -> bool {
    let q = query.to_lowercase();
    ["in detail", "explain", "history of", "step by step", "everything about"]
        .iter()
        .any(|k| q.contains(k))
}

fn answer_text(task: Task, query: &str, digest: &[u8; 32], with_context: bool) -> String {
    let topic = topic_of(query);
    let paragraphs = match task {
        Task::PrefetchAnswer => 1,
        Task::BetterAnswer => 4 + usize::from(digest[1] % 3),
        _ if wants_depth(query) => 8,
        _ => 1 + usize::from(digest[1] % 2),
    };
    let mut parts = Vec::with_capacity(paragraphs + 1);
    let opener = OPENERS[usize::from(digest[0]) % OPENERS.len()];
    if with_context {
        parts.push(format!("{opener} Building on what we just discussed, here is my take on *{topic}*."));
    } else {
        parts.push(format!("{opener} Here is my take on *{topic}*."));
    }
    for p in 0..paragraphs {
        parts.push(paragraph(digest, 2 + p * 5, &topic));
    }
    if task == Task::BetterAnswer {
        parts.push("✅ Bottom line: take it one step at a time, and feel free to ask me for more detail on any part.".into());
    }
    parts.join("\n\n")
}

const DEEP: &[&str] = &[
    "🔍 What is the most important detail to know about {t}?",
    "🧠 How does {t} actually work behind the scenes?",
    "📊 What do the numbers say about {t}?",
    "🧩 Which part of {t} do people most often get wrong?",
];
const NEAR: &[&str] = &[
    "🔗 What related topics are worth exploring alongside {t}?",
    "📚 Which common myths surround this topic?",
    "🗺️ How is this handled in different countries?",
    "👥 Who benefits most from understanding this?",
];
const FAR: &[&str] = &[
    "🌍 How do different cultures approach everyday problems?",
    "💡 What is a surprising fact most people don't know about history?",
    "🎨 How has technology changed the way we learn new things?",
    "🌱 What small habit can make a big difference in daily life?",
];

fn followups_json(query: &str, d: &[u8; 32]) -> Vec<String> {
    let t = topic_of(query).to_lowercase();
    let pick = |bank: &[&str], a: u8, b: u8| -> (String, String) {
        let i = usize::from(a) % bank.len();
        let mut j = usize::from(b) % bank.len();
        if j == i {
            j = (j + 1) % bank.len();
        }
        (bank[i].replace("{t}", &t), bank[j].replace("{t}", &t))
    };
    let (q1, q2) = pick(DEEP, d[4], d[5]);
    let (q3, q4) = pick(NEAR, d[6], d[7]);
    let (q5, q6) = pick(FAR, d[8], d[9]);
    vec![q1, q2, q3, q4, q5, q6]
}

fn render_followups(qs: &[String]) -> String {
    let pairs: Vec<String> = qs
        .iter()
        .enumerate()
        .map(|(i, q)| format!("\"q{}\": {}", i + 1, serde_json::Value::String(q.clone())))
        .collect();
    format!("{{{}}}", pairs.join(", "))
}

fn score_line(question: &str, d: &[u8; 32]) -> String {
    let threshold = if is_broad_theme(question) {
        BROAD_THEME_THRESHOLD
    } else {
        NARROW_THRESHOLD
    };
    (0..10)
        .map(|i| if d[i] < threshold { "1" } else { "0" })
        .collect::<Vec<_>>()
        .join(",")
}

/// The completion the mock returns for a task, prompt and seed.
///
/// `prompt` is the flattened request; `slot` is the text that was
/// substituted into the task's template.
pub fn mock_complete(task: Task, prompt: &str, slot: &str, seed: u64, opts: &MockOptions) -> String {
    let d = mock_digest(task, prompt, seed);
    if malformed(task, &d, seed, opts) {
        return match task {
            Task::Followups => {
                let qs = followups_json(slot, &d);
                match d[30] % 4 {
                    0 => format!("```json\n{}\n```", render_followups(&qs)),
                    1 => {
                        let s = render_followups(&qs);
                        format!("{},}}", &s[..s.len() - 1])
                    }
                    2 => render_followups(&qs[..5]),
                    _ => "Sure! Here are some questions you might like.".to_string(),
                }
            }
            Task::TrendingRate => match d[30] % 4 {
                0 => "1,0,1,0,1,0,1,0,1".to_string(),
                1 => "1,1,1,1,1,1,1,1,1,1,1".to_string(),
                2 => "1,1,2,1,1,1,1,1,1,1".to_string(),
                _ => "I would rate this question highly.".to_string(),
            },
            _ => String::new(),
        };
    }
    match task {
        Task::Answer | Task::BetterAnswer | Task::PrefetchAnswer => {
            let with_context = prompt.contains("\nassistant: ");
            answer_text(task, slot, &d, with_context && task != Task::PrefetchAnswer)
        }
        Task::Followups => render_followups(&followups_json(slot, &d)),
        Task::RecentFilter => {
            let s = slot.trim();
            if non_latin(s) || !looks_like_question(s) || refers_outside(s) {
                "None".to_string()
            } else {
                tidy_question(s, 120)
            }
        }
        Task::TrendingRate => score_line(slot, &d),
        Task::Rephrase => tidy_question(slot.trim(), 150),
    }
}

/// Provider backed by [`mock_complete`], with call probes and a failure switch.
#[derive(Debug, Default)]
pub struct MockProvider {
    seed: u64,
    opts: MockOptions,
    failing: AtomicBool,
    calls: Mutex<BTreeMap<(Tier, Task), u64>>,
}

impl MockProvider {
    pub fn new(seed: u64) -> Self {
        Self::with_options(seed, MockOptions::default())
    }

    pub fn with_options(seed: u64, opts: MockOptions) -> Self {
        Self {
            seed,
            opts,
            failing: AtomicBool::new(false),
            calls: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// While set, every call fails with a rejection.
    pub fn set_failing(&self, failing: bool) {
        self.failing.store(failing, Ordering::SeqCst);
    }

    pub fn total_calls(&self) -> u64 {
        self.calls.lock().expect("probe lock").values().sum()
    }

    pub fn calls_for(&self, tier: Tier) -> u64 {
        self.calls
            .lock()
            .expect("probe lock")
            .iter()
            .filter(|((t, _), _)| *t == tier)
            .map(|(_, n)| n)
            .sum()
    }

    pub fn calls_for_task(&self, task: Task) -> u64 {
        self.calls
            .lock()
            .expect("probe lock")
            .iter()
            .filter(|((_, t), _)| *t == task)
            .map(|(_, n)| n)
            .sum()
    }
}

impl Provider for MockProvider {
    fn complete(&self, _model: &ModelTier, request: &CompletionRequest) -> Result<String, ProviderError> {
        *self
            .calls
            .lock()
            .expect("probe lock")
            .entry((request.tier, request.task))
            .or_default() += 1;
        if self.failing.load(Ordering::SeqCst) {
            return Err(ProviderError::Rejection("mock provider is down".into()));
        }
        let template = request.task.template();
        let last = request.last_user();
        let slot = template.extract(last).unwrap_or_else(|| last.to_string());
        Ok(mock_complete(
            request.task,
            &request.transcript(),
            &slot,
            self.seed,
            &self.opts,
        ))
    }
}
