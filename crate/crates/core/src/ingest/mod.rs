//! Event-log ingestion: parsing, session segmentation, holdout splitting and
//! vocabulary construction.
//!
//! The pipeline is
//! [`parse_events`] → [`segment_sessions`] → [`split_holdout`] →
//! [`build_vocabs`] → [`SessionStore::remap`]; [`prepare_dataset`] runs all of
//! it.

mod events;
mod format;
mod segment;
mod split;
mod stats;
mod store;
mod vocab;

pub use events::{parse_events, Event, ParsedEvents, RowError};
pub use format::{read_store, write_store, STORE_MAGIC};
pub use segment::{bucket_start, segment_sessions, Interval, Segmented};
pub use split::{split_holdout, Split, SplitConfig, SplitReport};
pub use stats::DatasetStats;
pub use store::{ItemIndex, Session, SessionStore, UserIndex};
pub use vocab::{build_vocabs, ItemVocab, UserVocab, Vocab};

use crate::{Error, Result};

/// Vocabularies plus the three splits, all indexed against the training
/// vocabularies.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub items: ItemVocab,
    pub users: UserVocab,
    pub train: SessionStore,
    pub valid: SessionStore,
    pub test: SessionStore,
}

impl Dataset {
    /// All sessions of all splits, for looking up friends' recent sessions.
    pub fn all_sessions(&self) -> SessionStore {
        let mut all = self.train.clone();
        all.merge(&self.valid);
        all.merge(&self.test);
        all
    }
}

/// Runs segmentation, the holdout split and vocabulary construction.
pub fn prepare_dataset(events: &[Event], cfg: &SplitConfig) -> Result<(Dataset, SplitReport)> {
    let seg = segment_sessions(events, cfg.interval, cfg.max_session_len);
    let split = split_holdout(&seg.store, cfg)?;
    let (items, users) = build_vocabs(&split.train, &seg.items, &seg.users)?;
    let remap = |s: &SessionStore| s.remap(&seg.items, &seg.users, &items, &users);
    let dataset = Dataset {
        train: remap(&split.train),
        valid: remap(&split.valid),
        test: remap(&split.test),
        items,
        users,
    };
    if dataset.train.is_empty() {
        return Err(Error::EmptyTrain);
    }
    Ok((dataset, split.report))
}
