//! The service configuration file.
//!
//! Every tunable constant lives here with its default, so a deployment's
//! behaviour can be read off one file.

use std::ops::Range;
use std::path::{Path, PathBuf};

use chrono::NaiveTime;
use chrono_tz::Tz;
use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

use crate::curation::CurationConfig;
use crate::engine::{EngineConfig, DEFAULT_CHUNK_LIMIT, MIN_CHUNK_LIMIT};
use crate::gateway::DEFAULT_TEXT_LIMIT;
use crate::llm::{ModelTier, Tier, TierSet};
use crate::rewards::PointValues;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config invalid at line {line}, column {column}: {message}")]
    Invalid { line: usize, column: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub listen: String,
    /// Platform send-request endpoint, without the trailing `/messages`.
    pub platform_base_url: String,
    /// Environment variable holding the platform bearer token.
    pub token_env: String,
    /// Environment variable holding the webhook verify token.
    pub verify_token_env: String,
    pub text_limit: usize,
    pub sandbox: bool,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            platform_base_url: "https://graph.facebook.com/v19.0/PHONE_NUMBER_ID".into(),
            token_env: "PLATFORM_TOKEN".into(),
            verify_token_env: "WEBHOOK_VERIFY_TOKEN".into(),
            text_limit: DEFAULT_TEXT_LIMIT,
            sandbox: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default)]
    pub api_key_env: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiersConfig {
    pub standard: Spanned<TierConfig>,
    pub premium: Spanned<TierConfig>,
    pub curation: Spanned<TierConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConversationConfig {
    pub chunk_limit: Spanned<usize>,
    pub intro_keywords: Vec<String>,
}

impl Default for ConversationConfig {
    fn default() -> Self {
        Self {
            chunk_limit: Spanned::new(0..0, DEFAULT_CHUNK_LIMIT),
            intro_keywords: EngineConfig::default().intro_keywords,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    /// Local send time, `HH:MM` or `HH:MM:SS`.
    pub send_at: Spanned<String>,
    /// IANA zone name.
    pub timezone: Spanned<String>,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            send_at: Spanned::new(0..0, "09:00".into()),
            timezone: Spanned::new(0..0, "UTC".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreConfig {
    pub dir: PathBuf,
    /// Pseudonymization salt.
    pub salt: String,
    /// Environment variable that overrides `salt` when set.
    pub salt_env: Option<String>,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            dir: "data".into(),
            salt: "local".into(),
            salt_env: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockConfig {
    /// Use the deterministic offline provider instead of the tiers.
    pub enabled: bool,
    pub seed: u64,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self { enabled: false, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub gateway: GatewayConfig,
    pub tiers: TiersConfig,
    #[serde(default)]
    pub conversation: ConversationConfig,
    #[serde(default)]
    pub curation: CurationConfig,
    #[serde(default)]
    pub points: PointValues,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub store: StoreConfig,
    #[serde(default)]
    pub mock: MockConfig,
    #[serde(skip)]
    send_at: Option<NaiveTime>,
    #[serde(skip)]
    timezone: Option<Tz>,
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn invalid(src: &str, span: Option<Range<usize>>, message: impl Into<String>) -> ConfigError {
    let (line, column) = line_col(src, span.map_or(0, |s| s.start));
    ConfigError::Invalid {
        line,
        column,
        message: message.into(),
    }
}

fn parse_time(s: &str) -> Option<NaiveTime> {
    NaiveTime::parse_from_str(s, "%H:%M:%S")
        .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M"))
        .ok()
}

impl Config {
    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        let mut cfg: Config = toml::from_str(src).map_err(|e| invalid(src, e.span(), e.message()))?;
        let sched = &cfg.scheduler;
        cfg.send_at = Some(parse_time(sched.send_at.get_ref()).ok_or_else(|| {
            invalid(src, Some(sched.send_at.span()), format!("bad send time {:?}", sched.send_at.get_ref()))
        })?);
        cfg.timezone = Some(sched.timezone.get_ref().parse::<Tz>().map_err(|_| {
            invalid(src, Some(sched.timezone.span()), format!("unknown timezone {:?}", sched.timezone.get_ref()))
        })?);
        let chunk = &cfg.conversation.chunk_limit;
        if *chunk.get_ref() < MIN_CHUNK_LIMIT {
            return Err(invalid(
                src,
                Some(chunk.span()),
                format!("chunk_limit must be at least {MIN_CHUNK_LIMIT}"),
            ));
        }
        if !cfg.tier_set().is_valid() {
            return Err(invalid(
                src,
                Some(cfg.tiers.premium.span()),
                "premium tier must use a different model from the standard tier",
            ));
        }
        if !cfg.points.all_positive() {
            return Err(invalid(src, None, "point values must be positive"));
        }
        if cfg.curation.trending_threshold > 10 {
            return Err(invalid(src, None, "trending_threshold is out of 10"));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&src)
    }

    pub fn tier_set(&self) -> TierSet {
        let t = |tier, c: &Spanned<TierConfig>| {
            let c = c.get_ref();
            ModelTier {
                tier,
                base_url: c.base_url.clone(),
                model: c.model.clone(),
                api_key_env: c.api_key_env.clone(),
            }
        };
        TierSet {
            standard: t(Tier::Standard, &self.tiers.standard),
            premium: t(Tier::Premium, &self.tiers.premium),
            curation: t(Tier::Curation, &self.tiers.curation),
        }
    }

    pub fn salt(&self) -> String {
        self.store
            .salt_env
            .as_deref()
            .and_then(|v| std::env::var(v).ok())
            .unwrap_or_else(|| self.store.salt.clone())
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            chunk_limit: *self.conversation.chunk_limit.get_ref(),
            intro_keywords: self.conversation.intro_keywords.clone(),
            text_limit: self.gateway.text_limit,
            points: self.points,
            curation: self.curation,
            topq_send_at: self.send_at.unwrap_or_else(|| EngineConfig::default().topq_send_at),
            timezone: self.timezone.unwrap_or(Tz::UTC),
            salt: self.salt(),
        }
    }

    /// Any tier key variable missing from the environment.
    pub fn missing_credentials(&self) -> Vec<String> {
        let ts = self.tier_set();
        [ts.standard, ts.premium, ts.curation]
            .into_iter()
            .filter_map(|t| t.api_key_env)
            .filter(|v| std::env::var(v).is_err())
            .collect()
    }
}


#[cfg(test)]
mod example_file {
    use super::*;

    #[test]
    fn shipped_example_parses() {
        let src = include_str!("../../../qabot.example.toml");
        let cfg = Config::parse(src).unwrap();
        assert_eq!(cfg.engine_config().timezone, chrono_tz::Asia::Karachi);
        assert_eq!(cfg.missing_credentials().is_empty(), std::env::var("OPENAI_API_KEY").is_ok());
    }
}
