//! Parsers for the structured completions (follow-up JSON, score lines).

use serde::{Deserialize, Serialize};

/// Six suggested follow-up questions. The first two dig into the asked
/// topic, the middle two move to a neighbouring topic, the last two wander.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowupSet {
    questions: [String; 6],
}

impl FollowupSet {
    pub fn new(questions: [String; 6]) -> Option<Self> {
        questions
            .iter()
            .all(|q| !q.trim().is_empty())
            .then_some(Self { questions })
    }

    pub fn questions(&self) -> &[String; 6] {
        &self.questions
    }

    /// 1-based access, matching the `q1`..`q6` keys.
    pub fn get(&self, position: usize) -> Option<&str> {
        position
            .checked_sub(1)
            .and_then(|i| self.questions.get(i))
            .map(String::as_str)
    }

    /// The pair shown without opening the full list.
    pub fn up_front(&self) -> [&str; 2] {
        [&self.questions[0], &self.questions[1]]
    }
}

/// Binary scores against the ten broad-appeal criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CriteriaScores {
    bits: [bool; 10],
}

impl CriteriaScores {
    pub fn from_bits(bits: [bool; 10]) -> Self {
        Self { bits }
    }

    pub fn bits(&self) -> &[bool; 10] {
        &self.bits
    }

    pub fn total(&self) -> u8 {
        self.bits.iter().filter(|b| **b).count() as u8
    }

    /// Renders as the comma-separated line the rating prompt asks for.
    pub fn to_line(&self) -> String {
        self.bits
            .iter()
            .map(|b| if *b { "1" } else { "0" })
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Removes a surrounding Markdown code fence, if any.
fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(inner) = t.strip_prefix("```") else {
        return t;
    };
    // drop the info string ("json") on the opening line
    let inner = inner.split_once('\n').map(|(_, rest)| rest).unwrap_or("");
    inner.trim_end().strip_suffix("```").unwrap_or(inner).trim()
}

fn strip_trailing_commas(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        if c == '"' {
            in_string = true;
        } else if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

/// Parses a follow-up completion after light repair (code fences, text
/// around the object, trailing commas). Returns a description of the
/// failure when no valid six-question object can be recovered.
pub fn parse_followups(text: &str) -> Result<FollowupSet, String> {
    let body = strip_fences(text);
    let (start, end) = match (body.find('{'), body.rfind('}')) {
        (Some(s), Some(e)) if s < e => (s, e),
        _ => return Err("no JSON object in completion".into()),
    };
    let repaired = strip_trailing_commas(&body[start..=end]);
    let value: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&repaired).map_err(|e| format!("invalid JSON: {e}"))?;
    let mut questions: [String; 6] = Default::default();
    for (i, slot) in questions.iter_mut().enumerate() {
        let key = format!("q{}", i + 1);
        let q = value
            .get(&key)
            .and_then(|v| v.as_str())
            .map(str::trim)
            .filter(|q| !q.is_empty())
            .ok_or_else(|| format!("missing or empty {key}"))?;
        *slot = q.to_string();
    }
    FollowupSet::new(questions).ok_or_else(|| "empty question".into())
}

/// Parses `b1,b2,...,b10` with each token 0 or 1.
pub fn parse_scores(text: &str) -> Result<CriteriaScores, String> {
    let line = strip_fences(text);
    let tokens: Vec<&str> = line.split(',').map(str::trim).collect();
    if tokens.len() != 10 {
        return Err(format!("expected 10 scores, got {}", tokens.len()));
    }
    let mut bits = [false; 10];
    for (bit, tok) in bits.iter_mut().zip(&tokens) {
        *bit = match *tok {
            "1" => true,
            "0" => false,
            other => return Err(format!("score {other:?} is not 0 or 1")),
        };
    }
    Ok(CriteriaScores::from_bits(bits))
}

/// The recent-list filter answers `None` for statements it rejects.
pub fn is_none_marker(text: &str) -> bool {
    text.trim().eq_ignore_ascii_case("none")
}
