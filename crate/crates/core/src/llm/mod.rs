//! Model tiers, prompt pipelines and structured-output handling.

pub mod mock;
mod parse;
pub mod prompts;
mod provider;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mock::{MockOptions, MockProvider};
pub use parse::{is_none_marker, parse_followups, parse_scores, CriteriaScores, FollowupSet};
pub use prompts::{PromptTemplate, Task, TEMPLATES};
pub use provider::*;

/// Word cap the recent-list filter asks for.
pub const RECENT_MAX_WORDS: usize = 125;
/// Word cap the rephrasing prompt asks for.
pub const REPHRASE_MAX_WORDS: usize = 150;

const REASK: &str = "Your previous response could not be parsed. Strictly respond in the required format.";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("empty input")]
    EmptyInput,
    #[error("tier {0:?} cannot answer queries")]
    WrongTier(Tier),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("malformed follow-ups: {0}")]
    MalformedFollowups(String),
    #[error("malformed scores: {0}")]
    MalformedScores(String),
}

/// A query and the answer given to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub query: String,
    pub answer: String,
    pub tier: Tier,
}

/// The three configured tiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierSet {
    pub standard: ModelTier,
    pub premium: ModelTier,
    pub curation: ModelTier,
}

impl TierSet {
    pub fn get(&self, tier: Tier) -> &ModelTier {
        match tier {
            Tier::Standard => &self.standard,
            Tier::Premium => &self.premium,
            Tier::Curation => &self.curation,
        }
    }

    /// Standard and premium must name different models.
    pub fn is_valid(&self) -> bool {
        (&self.standard.base_url, &self.standard.model) != (&self.premium.base_url, &self.premium.model)
    }

    /// Placeholder tiers for offline use.
    pub fn offline() -> Self {
        let t = |tier, model: &str| ModelTier {
            tier,
            base_url: "mock://".into(),
            model: model.into(),
            api_key_env: None,
        };
        Self {
            standard: t(Tier::Standard, "mock-standard"),
            premium: t(Tier::Premium, "mock-premium"),
            curation: t(Tier::Curation, "mock-curation"),
        }
    }
}

/// Runs the prompt pipelines against a provider.
#[derive(Clone)]
pub struct LlmClient {
    provider: Arc<dyn Provider>,
    tiers: TierSet,
}

impl LlmClient {
    pub fn new(provider: Arc<dyn Provider>, tiers: TierSet) -> Self {
        Self { provider, tiers }
    }

    fn call(&self, task: Task, tier: Tier, messages: Vec<ChatMessage>) -> Result<String, ProviderError> {
        let request = CompletionRequest { task, tier, messages };
        self.provider.complete(self.tiers.get(tier), &request)
    }

    fn base(task: Task, context: Option<&Exchange>, input: &str) -> Vec<ChatMessage> {
        let template = task.template();
        let mut messages = vec![ChatMessage::system(template.system_text)];
        if let Some(ctx) = context {
            messages.push(ChatMessage::user(ctx.query.clone()));
            messages.push(ChatMessage::assistant(ctx.answer.clone()));
        }
        messages.push(ChatMessage::user(template.fill(input)));
        messages
    }

    /// Calls once, and once more with a correction if `parse` rejects the output.
    fn structured<T>(
        &self,
        task: Task,
        tier: Tier,
        messages: Vec<ChatMessage>,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, (Option<ProviderError>, String)> {
        let first = self.call(task, tier, messages.clone()).map_err(|e| (Some(e), String::new()))?;
        match parse(&first) {
            Ok(v) => Ok(v),
            Err(why) => {
                tracing::warn!(task = task.name(), %why, "malformed completion, asking again");
                let mut retry = messages;
                retry.push(ChatMessage::assistant(first));
                retry.push(ChatMessage::user(REASK));
                let second = self.call(task, tier, retry).map_err(|e| (Some(e), String::new()))?;
                parse(&second).map_err(|why| (None, why))
            }
        }
    }

    /// Answers a query at the standard tier (everyday prompt) or the premium
    /// tier (detailed prompt). Only the last exchange is sent as context.
    pub fn answer_query(&self, query: &str, context: Option<&Exchange>, tier: Tier) -> Result<String, LlmError> {
        if query.trim().is_empty() {
            return Err(LlmError::EmptyInput);
        }
        let task = match tier {
            Tier::Standard => Task::Answer,
            Tier::Premium => Task::BetterAnswer,
            Tier::Curation => return Err(LlmError::WrongTier(tier)),
        };
        Ok(self.call(task, tier, Self::base(task, context, query))?)
    }

    /// Six follow-up questions for an exchange.
    pub fn suggest_followups(&self, query: &str, answer: &str) -> Result<FollowupSet, LlmError> {
        if query.trim().is_empty() || answer.trim().is_empty() {
            return Err(LlmError::EmptyInput);
        }
        let ctx = Exchange {
            query: query.to_string(),
            answer: answer.to_string(),
            tier: Tier::Standard,
        };
        let messages = Self::base(Task::Followups, Some(&ctx), query);
        self.structured(Task::Followups, Tier::Curation, messages, parse_followups)
            .map_err(|(provider, why)| match provider {
                Some(e) => LlmError::Provider(e),
                None => LlmError::MalformedFollowups(why),
            })
    }

    /// The statement rephrased as a single English question, or `None` when
    /// it should stay off the recent list. Provider errors count as `None`.
    pub fn recent_filter(&self, statement: &str) -> Option<String> {
        if statement.trim().is_empty() {
            return None;
        }
        let out = match self.call(Task::RecentFilter, Tier::Curation, Self::base(Task::RecentFilter, None, statement)) {
            Ok(out) => out,
            Err(e) => {
                tracing::warn!(error = %e, "recent filter unavailable");
                return None;
            }
        };
        let out = out.trim();
        if out.is_empty() || is_none_marker(out) || out.split_whitespace().count() > RECENT_MAX_WORDS {
            None
        } else {
            Some(out.to_string())
        }
    }

    /// Scores a question against the broad-appeal rubric.
    pub fn trending_rate(&self, question: &str) -> Result<CriteriaScores, LlmError> {
        if question.trim().is_empty() {
            return Err(LlmError::EmptyInput);
        }
        let messages = Self::base(Task::TrendingRate, None, question);
        self.structured(Task::TrendingRate, Tier::Curation, messages, parse_scores)
            .map_err(|(provider, why)| match provider {
                Some(e) => LlmError::Provider(e),
                None => LlmError::MalformedScores(why),
            })
    }

    /// Tidies a question for display. Falls back to the original text when
    /// the provider fails or returns something unusable.
    pub fn rephrase_question(&self, question: &str) -> String {
        if question.trim().is_empty() {
            return question.to_string();
        }
        match self.call(Task::Rephrase, Tier::Curation, Self::base(Task::Rephrase, None, question)) {
            Ok(out) => {
                let out = out.trim();
                let words = out.split_whitespace().count();
                if words == 0 || words > REPHRASE_MAX_WORDS {
                    question.to_string()
                } else {
                    out.to_string()
                }
            }
            Err(e) => {
                tracing::warn!(error = %e, "rephrase unavailable");
                question.to_string()
            }
        }
    }

    /// Concise answer generated ahead of any user selecting the question.
    pub fn prefetch_answer(&self, question: &str) -> Result<String, LlmError> {
        if question.trim().is_empty() {
            return Err(LlmError::EmptyInput);
        }
        Ok(self.call(
            Task::PrefetchAnswer,
            Tier::Standard,
            Self::base(Task::PrefetchAnswer, None, question),
        )?)
    }
}
