//! Operator entry points for the Q&A bot: the HTTP service, transcript
//! replay, broadcasts and log reports.

pub mod report;
pub mod server;
