use std::collections::BTreeMap;

use chrono::TimeZone;
use proptest::prelude::*;

use super::synth::LogBuilder;
use super::*;

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 1, 5, 6, 0, 0).unwrap()
}

fn mins(n: i64) -> Duration {
    Duration::minutes(n)
}

/// Session start flags by pairwise comparison: an event starts a session
/// unless some earlier event of the same user lies less than `gap` before it.
fn oracle_starts(events: &[EventRecord], gap: i64) -> Vec<bool> {
    (0..events.len())
        .map(|i| {
            !(0..i).any(|j| {
                events[j].user_code == events[i].user_code && events[i].at - events[j].at < Duration::minutes(gap)
            })
        })
        .collect()
}

fn oracle_partition(events: &[EventRecord], gap: i64) -> Vec<Vec<u64>> {
    let mut out: Vec<Vec<u64>> = Vec::new();
    for (e, start) in events.iter().zip(oracle_starts(events, gap)) {
        if start {
            out.push(vec![e.seq]);
        } else {
            out.last_mut().unwrap().push(e.seq);
        }
    }
    out
}

fn seqs(sessions: &[Session]) -> Vec<Vec<u64>> {
    sessions.iter().map(|s| s.events.iter().map(|e| e.seq).collect()).collect()
}

fn random_log(plan: &[(u8, u32, u8)]) -> Vec<EventRecord> {
    const ACTIONS: [Action; 6] = [
        Action::Freeform,
        Action::ContinueReading,
        Action::LeaderboardView,
        Action::FollowupView,
        Action::FollowupSelect,
        Action::TrendingSelect,
    ];
    let mut b = LogBuilder::new();
    for (user, offset_s, act) in plan {
        let at = t0() + Duration::seconds(*offset_s as i64);
        b.inbound(at, &format!("u{user:02}"), ACTIONS[*act as usize % ACTIONS.len()]);
    }
    b.build()
}

#[test]
fn fourteen_minutes_is_one_session() {
    let mut b = LogBuilder::new();
    b.inbound(t0(), "ua", Action::Freeform).inbound(t0() + mins(14), "ua", Action::Freeform);
    let s = sessionize(&sorted_interactions(&b.build()), 15).unwrap();
    assert_eq!(s.len(), 1);
}

#[test]
fn fifteen_minutes_is_two_sessions() {
    let mut b = LogBuilder::new();
    b.inbound(t0(), "ua", Action::Freeform).inbound(t0() + mins(15), "ua", Action::Freeform);
    let s = sessionize(&sorted_interactions(&b.build()), 15).unwrap();
    assert_eq!(s.len(), 2);
}

#[test]
fn unsorted_input_is_an_error() {
    let mut b = LogBuilder::new();
    b.inbound(t0() + mins(5), "ua", Action::Freeform).inbound(t0(), "ua", Action::Freeform);
    assert_eq!(sessionize(b.records(), 15), Err(AnalyticsError::UnsortedInput(1)));
}

#[test]
fn outbound_records_are_not_interactions() {
    let mut b = LogBuilder::new();
    b.inbound(t0(), "ua", Action::Freeform)
        .outbound(t0() + mins(20), "ua", Action::Freeform)
        .broadcast(t0() + mins(40), &["ua"], 3);
    let s = sessionize(&sorted_interactions(&b.build()), 15).unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].len(), 1);
}

#[test]
fn group_boundaries() {
    assert_eq!(Group::of(1), Group::OneTime);
    assert_eq!(Group::of(2), Group::Casual);
    assert_eq!(Group::of(100), Group::Casual);
    assert_eq!(Group::of(101), Group::Regular);
}

/// 17 one-time, 74 casual and 6 regular users.
fn grouped_fixture() -> Vec<EventRecord> {
    let mut b = LogBuilder::new();
    for i in 0..17 {
        b.inbound(t0() + mins(i), &format!("one{i:02}"), Action::Freeform);
    }
    for i in 0..74 {
        let n = 2 + (i as i64 * 7) % 99;
        for k in 0..n {
            b.inbound(t0() + Duration::hours(k * 5) + mins(i as i64), &format!("cas{i:02}"), Action::Freeform);
        }
    }
    for i in 0..6 {
        for k in 0..101 {
            b.inbound(t0() + mins(k * 20 + i), &format!("reg{i}"), Action::LeaderboardView);
        }
    }
    b.build()
}

#[test]
fn segmentation_fixture_counts() {
    let r = usage_report(&grouped_fixture(), DEFAULT_GAP_MINUTES, Tz::UTC);
    let users: Vec<usize> = r.rows.iter().map(|r| r.users).collect();
    assert_eq!(users, vec![17, 74, 6]);
    assert_eq!(r.total.users, 97);
}

#[test]
fn segmentation_single_and_regular_user() {
    let mut b = LogBuilder::new();
    b.inbound(t0(), "solo", Action::Freeform);
    for k in 0..101 {
        b.inbound(t0() + mins(k * 15), "busy", Action::Freeform);
    }
    let s = sessionize(&sorted_interactions(&b.build()), 15).unwrap();
    let p = segment_users(&s, Tz::UTC);
    let by: BTreeMap<&str, Group> = p.iter().map(|p| (p.user_code.as_str(), p.group)).collect();
    assert_eq!(by["solo"], Group::OneTime);
    assert_eq!(by["busy"], Group::Regular);
    let busy = p.iter().find(|p| p.user_code == "busy").unwrap();
    assert_eq!(busy.session_count, 101);
    assert_eq!(busy.avg_idle_hours, Some(0.25));
    assert_eq!(busy.avg_session_minutes, 0.0);
}

#[test]
fn empty_log_gives_zero_table() {
    let r = usage_report(&[], 15, Tz::UTC);
    for row in r.rows.iter().chain([&r.total]) {
        assert_eq!((row.users, row.sessions, row.interactions), (0, 0, 0));
        assert_eq!(row.avg_idle_hours, None);
    }
    assert!(r.render().contains("Users"));
}

#[test]
fn active_days_follow_service_timezone() {
    // 20:00 and 23:00 UTC are the same UTC day but different Karachi days.
    let tz: Tz = "Asia/Karachi".parse().unwrap();
    let mut b = LogBuilder::new();
    let d = Utc.with_ymd_and_hms(2026, 1, 5, 18, 0, 0).unwrap();
    b.inbound(d, "ua", Action::Freeform).inbound(d + Duration::hours(3), "ua", Action::Freeform);
    let s = sessionize(&sorted_interactions(&b.build()), 15).unwrap();
    assert_eq!(segment_users(&s, Tz::UTC)[0].active_days, 1);
    assert_eq!(segment_users(&s, tz)[0].active_days, 2);
}

#[test]
fn usage_matches_recount() {
    let log = grouped_fixture();
    let r = usage_report(&log, 15, Tz::UTC);
    let inbound: Vec<&EventRecord> = log.iter().filter(|r| r.direction == Direction::Inbound).collect();
    assert_eq!(r.total.interactions, inbound.len());
    assert_eq!(
        r.total.freeform,
        inbound.iter().filter(|r| r.action == Action::Freeform).count()
    );
    let sorted = sorted_interactions(&log);
    assert_eq!(r.total.sessions, oracle_starts(&sorted, 15).iter().filter(|s| **s).count());
    // regular users were built with 101 sessions of one leaderboard view each
    assert_eq!(r.rows[2].sessions, 606);
    assert_eq!(r.rows[2].interactive, 606);
}

#[test]
fn usage_render_has_group_columns() {
    let out = usage_report(&grouped_fixture(), 15, Tz::UTC).render();
    let head = out.lines().next().unwrap();
    for g in ["One-time", "Casual", "Regular", "All"] {
        assert!(head.contains(g));
    }
    assert!(out.contains("Average session duration (minutes)"));
}

proptest! {
    #[test]
    fn sessionize_matches_pairwise_oracle(
        plan in prop::collection::vec((0u8..20, 0u32..(3 * 24 * 3600), 0u8..6), 0..300),
        gap in 1i64..60,
    ) {
        let events = sorted_interactions(&random_log(&plan));
        let s = sessionize(&events, gap).unwrap();
        prop_assert_eq!(seqs(&s), oracle_partition(&events, gap));
        for sess in &s {
            for w in sess.events.windows(2) {
                prop_assert!(w[1].at - w[0].at < Duration::minutes(gap));
            }
        }
    }

    #[test]
    fn larger_gap_never_adds_sessions(
        plan in prop::collection::vec((0u8..5, 0u32..(24 * 3600), 0u8..6), 0..200),
        gap in 1i64..60,
        extra in 0i64..60,
    ) {
        let events = sorted_interactions(&random_log(&plan));
        let a = sessionize(&events, gap).unwrap().len();
        let b = sessionize(&events, gap + extra).unwrap().len();
        prop_assert!(b <= a);
    }

    #[test]
    fn usage_columns_sum_to_total(plan in prop::collection::vec((0u8..20, 0u32..(7 * 24 * 3600), 0u8..6), 0..300)) {
        let log = random_log(&plan);
        let r = usage_report(&log, 15, Tz::UTC);
        let sum = |f: fn(&UsageRow) -> usize| r.rows.iter().map(f).sum::<usize>();
        prop_assert_eq!(sum(|x| x.users), r.total.users);
        prop_assert_eq!(sum(|x| x.sessions), r.total.sessions);
        prop_assert_eq!(sum(|x| x.interactions), r.total.interactions);
        prop_assert_eq!(sum(|x| x.freeform), r.total.freeform);
        prop_assert_eq!(sum(|x| x.interactive), r.total.interactive);
        prop_assert_eq!(r.total.interactions, log.len());
    }
}

// top question impact

fn day(n: i64) -> DateTime<Utc> {
    t0() + Duration::days(n)
}

/// Four days; broadcasts on days 0 and 2 reach four active users, the
/// other days see two.
fn topq_fixture() -> Vec<EventRecord> {
    let users = ["ua", "ub", "uc", "ud"];
    let mut b = LogBuilder::new();
    for d in 0..4 {
        let active = if d % 2 == 0 { &users[..] } else { &users[..2] };
        if d % 2 == 0 {
            b.broadcast(day(d) + Duration::hours(3), &users, d as u64 + 1);
        }
        for (i, u) in active.iter().enumerate() {
            let action = if i % 2 == 0 { Action::TopqAnswerView } else { Action::Freeform };
            b.inbound(day(d) + Duration::hours(4) + mins(i as i64), u, action);
        }
    }
    b.build()
}

#[test]
fn topq_ratio_fixture_is_two() {
    let r = topq_impact(&topq_fixture(), 15, Tz::UTC).unwrap();
    assert_eq!((r.broadcast_days, r.other_days), (2, 2));
    assert_eq!(r.mean_active_broadcast_days, 4.0);
    assert_eq!(r.mean_active_other_days, Some(2.0));
    assert_eq!(r.active_ratio, Some(2.0));
}

#[test]
fn topq_window_shares_and_hours() {
    let r = topq_impact(&topq_fixture(), 15, Tz::UTC).unwrap();
    // day-1 and day-3 events fall 25 hours after the previous broadcast
    assert_eq!(r.within_window_share["uc"], 1.0);
    assert_eq!(r.within_window_share["ua"], 0.5);
    assert_eq!(r.hourly[1], 8);
    assert_eq!(r.hourly.iter().sum::<usize>(), 8);
    assert_eq!(r.inside_window.sessions, 8);
    assert_eq!(r.inside_window.interactive_share, Some(0.5));
    assert_eq!(r.outside_window.sessions, 4);
    assert_eq!(r.outside_window.freeform_share, Some(0.5));
}

#[test]
fn all_activity_near_broadcasts_is_full_share() {
    let mut b = LogBuilder::new();
    for d in 0..3 {
        b.broadcast(day(d), &["ua"], 1);
        b.inbound(day(d) + mins(30), "ua", Action::Freeform);
    }
    let r = topq_impact(&b.build(), 15, Tz::UTC).unwrap();
    assert_eq!(r.mean_within_window_share, Some(1.0));
}

#[test]
fn no_broadcast_day_activity_gives_zero_ratio() {
    let mut b = LogBuilder::new();
    b.broadcast(day(0), &["ua"], 1);
    b.inbound(day(1), "ua", Action::Freeform);
    let r = topq_impact(&b.build(), 15, Tz::UTC).unwrap();
    assert_eq!(r.active_ratio, Some(0.0));
}

#[test]
fn no_broadcasts_is_an_error() {
    let mut b = LogBuilder::new();
    b.inbound(day(0), "ua", Action::Freeform);
    assert_eq!(topq_impact(&b.build(), 15, Tz::UTC), Err(AnalyticsError::NoBroadcasts));
}

#[test]
fn topq_render_lists_ratio() {
    let out = topq_impact(&topq_fixture(), 15, Tz::UTC).unwrap().render();
    assert!(out.lines().any(|l| l.starts_with("Active-user ratio") && l.ends_with("2.00")));
}

// leaderboard cohorts

/// Frequent user: leaderboard in every other session. Occasional user:
/// one view in 20 sessions. Sessions with a view have 6 interactions,
/// sessions without have 2.
fn cohort_fixture() -> Vec<EventRecord> {
    let with = [
        Action::LeaderboardView,
        Action::Freeform,
        Action::ContinueReading,
        Action::Freeform,
        Action::MypointsView,
        Action::Freeform,
    ];
    let without = [Action::Freeform, Action::ContinueReading];
    let mut b = LogBuilder::new();
    for k in 0..10 {
        let acts: &[Action] = if k % 2 == 0 { &with } else { &without };
        b.run(day(k), "freq", acts, Duration::minutes(1));
    }
    for k in 0..20 {
        let acts: &[Action] = if k == 7 { &with } else { &without };
        b.run(day(k) + Duration::hours(2), "occ", acts, Duration::minutes(1));
    }
    b.run(day(0), "never", &without, Duration::minutes(1));
    b.build()
}

#[test]
fn cohort_fixture_has_three_to_one_ratio() {
    let r = leaderboard_cohorts(&cohort_fixture(), 15, Tz::UTC);
    assert_eq!(r.leaderboard_users, 2);
    assert_eq!(r.membership["freq"], Cohort::Frequent);
    assert_eq!(r.membership["occ"], Cohort::Occasional);
    assert!(!r.membership.contains_key("never"));
    assert_eq!(r.with_without_ratio, Some(3.0));
    for c in &r.cohorts {
        assert_eq!(c.with_without_ratio, Some(3.0));
        assert_eq!(c.users, 1);
    }
    let f = &r.cohorts[0];
    assert_eq!(f.share_sessions_with, Some(0.5));
    assert_eq!(f.share_started_with, Some(0.5));
    assert_eq!(f.share_ended_with, Some(0.0));
    assert_eq!(f.avg_sessions, 10.0);
    assert_eq!(f.avg_leaderboard_views, 5.0);
    assert_eq!(f.avg_days_since_start, 19.0);
}

#[test]
fn two_views_in_one_session_is_frequent() {
    let mut b = LogBuilder::new();
    b.run(day(0), "ua", &[Action::LeaderboardView, Action::LeaderboardView], mins(1));
    for k in 1..30 {
        b.inbound(day(k), "ua", Action::Freeform);
    }
    let r = leaderboard_cohorts(&b.build(), 15, Tz::UTC);
    assert_eq!(r.membership["ua"], Cohort::Frequent);
}

#[test]
fn one_view_in_twenty_sessions_is_occasional() {
    let mut b = LogBuilder::new();
    b.inbound(day(0), "ua", Action::LeaderboardView);
    for k in 1..20 {
        b.inbound(day(k), "ua", Action::Freeform);
    }
    let r = leaderboard_cohorts(&b.build(), 15, Tz::UTC);
    assert_eq!(r.membership["ua"], Cohort::Occasional);
}

#[test]
fn cohort_render_has_columns() {
    let out = leaderboard_cohorts(&cohort_fixture(), 15, Tz::UTC).render();
    assert!(out.lines().next().unwrap().contains("Frequent"));
    assert!(out.contains("With/without ratio"));
}

// follow-up funnel

#[test]
fn single_suggest_tap() {
    let mut b = LogBuilder::new();
    b.inbound(day(0), "ua", Action::FollowupView);
    let f = followup_funnel(&b.build());
    assert_eq!((f.suggest_taps, f.full_list_views, f.selections), (1, 0, 0));
    assert_eq!(f.select_after_request, Some(0.0));
    assert_eq!(f.first_two_share, None);
}

#[test]
fn first_two_positions_only() {
    let mut b = LogBuilder::new();
    b.inbound(day(0), "ua", Action::FollowupView)
        .inbound_feature(day(0) + mins(1), "ua", Action::FollowupSelect, "1")
        .inbound_feature(day(0) + mins(2), "ua", Action::FollowupSelect, "2");
    assert_eq!(followup_funnel(&b.build()).first_two_share, Some(1.0));
}

/// 100 requests spread over 10 users, 58 of them followed by a selection.
fn funnel_fixture() -> Vec<EventRecord> {
    let mut b = LogBuilder::new();
    for i in 0..100i64 {
        let user = format!("u{}", i % 10);
        let at = day(i / 10) + mins(i % 10);
        b.inbound(at, &user, Action::FollowupView);
        if i < 58 {
            b.inbound(at + Duration::seconds(20), &user, Action::FollowupFullList);
            b.inbound_feature(at + Duration::seconds(40), &user, Action::FollowupSelect, &format!("{}", 1 + i % 6));
        }
        b.inbound(at + Duration::hours(1), &user, Action::Freeform);
    }
    b.build()
}

#[test]
fn funnel_fixture_reports_58_percent() {
    let f = followup_funnel(&funnel_fixture());
    assert_eq!(f.suggest_taps, 100);
    assert_eq!(f.selections, 58);
    assert_eq!(f.select_after_request, Some(0.58));
    assert_eq!(f.suggest_users, 10);
    // 216 follow-up events among 316 interactions
    assert_eq!(f.share_of_interactions, Some(216.0 / 316.0));
    assert_eq!(f.share_of_interactive, Some(1.0));
}

#[test]
fn funnel_render_shows_rate() {
    let out = followup_funnel(&funnel_fixture()).render();
    assert!(out.contains("58.0%"));
}
