use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate};

use super::events::Event;
use super::store::{ItemIndex, Session, SessionStore, UserIndex};
use super::vocab::Vocab;
use crate::Error;

const DAY: i64 = 86_400;
const WEEK: i64 = 7 * DAY;
// 1970-01-05, the first Monday after the epoch.
const FIRST_MONDAY: i64 = 4 * DAY;

/// How a user's event stream is cut into sessions. Calendar intervals are
/// UTC-aligned; weeks start Monday 00:00.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interval {
    Day,
    Week,
    Month,
    /// Events of one user sharing a timestamp, i.e. the tags applied to one
    /// bookmark in a single action.
    TagBundle,
}

impl FromStr for Interval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "day" => Ok(Self::Day),
            "week" => Ok(Self::Week),
            "month" => Ok(Self::Month),
            "tag-bundle" => Ok(Self::TagBundle),
            other => Err(Error::Config(format!(
                "unknown interval {other:?} (expected day, week, month or tag-bundle)"
            ))),
        }
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Day => "day",
            Self::Week => "week",
            Self::Month => "month",
            Self::TagBundle => "tag-bundle",
        })
    }
}

/// Start of the interval containing `ts`.
pub fn bucket_start(ts: i64, interval: Interval) -> i64 {
    match interval {
        Interval::Day => ts.div_euclid(DAY) * DAY,
        Interval::Week => (ts - FIRST_MONDAY).div_euclid(WEEK) * WEEK + FIRST_MONDAY,
        Interval::Month => {
            let dt = DateTime::from_timestamp(ts, 0).expect("timestamp in chrono range");
            NaiveDate::from_ymd_opt(dt.year(), dt.month(), 1)
                .and_then(|d| d.and_hms_opt(0, 0, 0))
                .expect("first of month is valid")
                .and_utc()
                .timestamp()
        }
        Interval::TagBundle => ts,
    }
}

/// Sessions plus the vocabularies their indices refer to.
#[derive(Clone, Debug)]
pub struct Segmented {
    pub store: SessionStore,
    pub items: Vocab,
    pub users: Vocab,
}

/// Buckets each user's events into intervals; every non-empty bucket is one
/// session. Sessions longer than `max_len` keep their most recent `max_len`
/// items. Vocabularies are assigned in order of first appearance in the input.
pub fn segment_sessions(events: &[Event], interval: Interval, max_len: usize) -> Segmented {
    let mut items = Vocab::new();
    let mut users = Vocab::new();
    let mut keyed: Vec<(u32, i64, u32)> = events
        .iter()
        .map(|e| (users.insert(&e.user_id), e.timestamp, items.insert(&e.item_id)))
        .collect();
    // Stable: equal timestamps keep file order.
    keyed.sort_by_key(|&(u, ts, _)| (u, ts));

    let mut store = SessionStore::new();
    store.set_max_timestamp(events.iter().map(|e| e.timestamp).max());
    for user_events in keyed.chunk_by(|a, b| a.0 == b.0) {
        let user = UserIndex(user_events[0].0);
        let mut time_index = 0;
        for bucket in user_events.chunk_by(|a, b| bucket_start(a.1, interval) == bucket_start(b.1, interval)) {
            time_index += 1;
            let skip = bucket.len().saturating_sub(max_len.max(1));
            store.push(Session {
                user,
                time_index,
                start: bucket_start(bucket[0].1, interval),
                items: bucket[skip..].iter().map(|&(_, _, i)| ItemIndex(i)).collect(),
            });
        }
    }
    Segmented { store, items, users }
}
