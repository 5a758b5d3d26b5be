use std::collections::BTreeSet;

use serde::Serialize;

use super::{is_interactive, sorted_interactions, table};
use crate::store::{Action, EventRecord};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunnelReport {
    pub suggest_taps: usize,
    pub full_list_views: usize,
    pub selections: usize,
    pub suggest_users: usize,
    pub full_list_users: usize,
    pub selecting_users: usize,
    /// Selections of suggestion 1 or 2 over all selections.
    pub first_two_share: Option<f64>,
    /// Requests followed by at least one selection before the user's next
    /// request, over all requests.
    pub select_after_request: Option<f64>,
    pub share_of_interactions: Option<f64>,
    pub share_of_interactive: Option<f64>,
}

fn share(n: usize, d: usize) -> Option<f64> {
    (d > 0).then(|| n as f64 / d as f64)
}

fn is_followup(a: Action) -> bool {
    matches!(a, Action::FollowupView | Action::FollowupFullList | Action::FollowupSelect)
}

pub fn followup_funnel(records: &[EventRecord]) -> FunnelReport {
    let events = sorted_interactions(records);
    let stage = |a: Action| events.iter().filter(|e| e.action == a).count();
    let users = |a: Action| {
        events
            .iter()
            .filter(|e| e.action == a)
            .map(|e| e.user_code.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    };
    let selections = stage(Action::FollowupSelect);
    let first_two = events
        .iter()
        .filter(|e| e.action == Action::FollowupSelect)
        .filter(|e| matches!(e.feature_id.as_deref(), Some("1") | Some("2")))
        .count();

    // Events are grouped by user, so an episode ends at the user's next
    // request or at the first event of another user.
    let (mut requests, mut converted) = (0, 0);
    let mut open: Option<(&str, bool)> = None;
    for e in &events {
        if open.is_some_and(|(u, _)| u != e.user_code) {
            converted += usize::from(open.take().is_some_and(|(_, c)| c));
        }
        match e.action {
            Action::FollowupView => {
                converted += usize::from(open.take().is_some_and(|(_, c)| c));
                requests += 1;
                open = Some((&e.user_code, false));
            }
            Action::FollowupSelect => {
                if let Some((_, c)) = open.as_mut() {
                    *c = true;
                }
            }
            _ => {}
        }
    }
    converted += usize::from(open.is_some_and(|(_, c)| c));

    let fu = events.iter().filter(|e| is_followup(e.action)).count();
    let interactive = events.iter().filter(|e| is_interactive(e.action)).count();
    FunnelReport {
        suggest_taps: stage(Action::FollowupView),
        full_list_views: stage(Action::FollowupFullList),
        selections,
        suggest_users: users(Action::FollowupView),
        full_list_users: users(Action::FollowupFullList),
        selecting_users: users(Action::FollowupSelect),
        first_two_share: share(first_two, selections),
        select_after_request: share(converted, requests),
        share_of_interactions: share(fu, events.len()),
        share_of_interactive: share(fu, interactive),
    }
}

impl FunnelReport {
    pub fn render(&self) -> String {
        let header = vec!["Stage".to_string(), "Events".to_string(), "Users".to_string()];
        let mut rows = vec![
            vec!["Suggest follow-ups".into(), self.suggest_taps.to_string(), self.suggest_users.to_string()],
            vec!["Full list".into(), self.full_list_views.to_string(), self.full_list_users.to_string()],
            vec!["Selection".into(), self.selections.to_string(), self.selecting_users.to_string()],
        ];
        for (name, v) in [
            ("Selection after request", self.select_after_request),
            ("Selections from first two", self.first_two_share),
            ("Share of interactions", self.share_of_interactions),
            ("Share of interactive queries", self.share_of_interactive),
        ] {
            rows.push(vec![name.into(), table::pct(v), String::new()]);
        }
        table::render(&header, &rows)
    }
}
