//! Core of a question-answer chatbot served over interactive messaging:
//! platform codec, conversation engine, model pipelines, curated lists,
//! rewards, the event log and log analytics.

pub mod gateway;
pub mod geo;
pub mod llm;
pub mod curation;
pub mod rewards;
pub mod store;
pub mod engine;
pub mod analytics;
pub mod config;
pub mod sim;
