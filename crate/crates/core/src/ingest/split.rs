use std::collections::HashSet;

use rand::seq::SliceRandom;

use super::segment::Interval;
use super::store::{Session, SessionStore};
use crate::{rng, Error, Result};

const DAY: i64 = 86_400;

#[derive(Clone, Debug, PartialEq)]
pub struct SplitConfig {
    /// Sessions starting within the final `holdout_days` days are held out.
    pub holdout_days: u32,
    pub interval: Interval,
    pub seed: u64,
    pub max_session_len: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            holdout_days: 7,
            interval: Interval::Week,
            seed: 0,
            max_session_len: 20,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplitReport {
    pub holdout_sessions: usize,
    /// Holdout item occurrences removed because the item never occurs in train.
    pub filtered_items: usize,
    /// Holdout sessions dropped after filtering left them empty.
    pub dropped_sessions: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Split {
    pub train: SessionStore,
    pub valid: SessionStore,
    pub test: SessionStore,
    pub report: SplitReport,
}

/// Holds out sessions whose start lies within the last `holdout_days` days
/// before the latest timestamp in the data, shuffles them with the seeded
/// generator and splits them evenly into validation and test. Holdout items
/// never seen in train are removed.
pub fn split_holdout(store: &SessionStore, cfg: &SplitConfig) -> Result<Split> {
    if cfg.holdout_days == 0 {
        return Err(Error::Config("holdout_days must be at least 1".into()));
    }
    let mut report = SplitReport::default();
    let Some(max_ts) = store
        .max_timestamp()
        .or_else(|| store.iter().map(|s| s.start).max())
    else {
        report.warnings.push("no sessions to split".into());
        return Ok(Split {
            train: SessionStore::new(),
            valid: SessionStore::new(),
            test: SessionStore::new(),
            report,
        });
    };
    let cutoff = max_ts - i64::from(cfg.holdout_days) * DAY;

    let mut train = SessionStore::new();
    let mut holdout: Vec<&Session> = Vec::new();
    for s in store.iter() {
        if s.start > cutoff {
            holdout.push(s);
        } else {
            train.push(s.clone());
        }
    }
    train.set_max_timestamp(store.max_timestamp());
    report.holdout_sessions = holdout.len();
    if holdout.is_empty() {
        report
            .warnings
            .push(format!("holdout of the last {} days is empty", cfg.holdout_days));
    }

    let mut r = rng::stream(cfg.seed, rng::streams::SPLIT);
    holdout.shuffle(&mut r);
    let n_valid = holdout.len() / 2;

    let known: HashSet<_> = train.iter().flat_map(|s| s.items.iter().copied()).collect();
    let mut parts = [Vec::new(), Vec::new()];
    for (k, s) in holdout.into_iter().enumerate() {
        let items: Vec<_> = s.items.iter().copied().filter(|i| known.contains(i)).collect();
        report.filtered_items += s.items.len() - items.len();
        if items.is_empty() {
            report.dropped_sessions += 1;
            continue;
        }
        parts[usize::from(k >= n_valid)].push(Session { items, ..s.clone() });
    }
    let [valid, test] = parts.map(|mut sessions| {
        sessions.sort_by_key(|s| (s.user, s.time_index));
        let mut out = SessionStore::new();
        for s in sessions {
            out.push(s);
        }
        out.set_max_timestamp(store.max_timestamp());
        out
    });
    Ok(Split {
        train,
        valid,
        test,
        report,
    })
}
