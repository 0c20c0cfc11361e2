use std::collections::BTreeMap;
use std::fmt;

use super::vocab::Vocab;

/// Dense user index into a [`Vocab`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UserIndex(pub u32);

/// Dense item index into a [`Vocab`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemIndex(pub u32);

impl UserIndex {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl ItemIndex {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for UserIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ItemIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The `time_index`-th session of one user.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Session {
    pub user: UserIndex,
    /// 1-based position among the user's sessions.
    pub time_index: u32,
    /// Start of the session's interval (or of the bundle), seconds since epoch.
    pub start: i64,
    pub items: Vec<ItemIndex>,
}

impl Session {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Per-user chronologically ordered sessions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SessionStore {
    users: BTreeMap<UserIndex, Vec<Session>>,
    max_timestamp: Option<i64>,
}

impl SessionStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a session; its `time_index` and `start` must exceed those of
    /// the user's previous session.
    pub fn push(&mut self, session: Session) {
        let list = self.users.entry(session.user).or_default();
        if let Some(last) = list.last() {
            assert!(
                session.time_index > last.time_index && session.start >= last.start,
                "sessions must be pushed in chronological order"
            );
        }
        list.push(session);
    }

    /// Latest event timestamp seen during segmentation, if known.
    pub fn max_timestamp(&self) -> Option<i64> {
        self.max_timestamp
    }

    pub(crate) fn set_max_timestamp(&mut self, ts: Option<i64>) {
        self.max_timestamp = ts;
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_sessions(&self) -> usize {
        self.users.values().map(Vec::len).sum()
    }

    pub fn num_events(&self) -> usize {
        self.iter().map(Session::len).sum()
    }

    /// Mean items per session; 0 for an empty store.
    pub fn avg_session_length(&self) -> f64 {
        let n = self.num_sessions();
        if n == 0 {
            0.0
        } else {
            self.num_events() as f64 / n as f64
        }
    }

    pub fn users(&self) -> impl Iterator<Item = UserIndex> + '_ {
        self.users.keys().copied()
    }

    pub fn sessions(&self, user: UserIndex) -> &[Session] {
        self.users.get(&user).map_or(&[], Vec::as_slice)
    }

    /// Sessions in (user, time) order.
    pub fn iter(&self) -> impl Iterator<Item = &Session> {
        self.users.values().flatten()
    }

    /// The user's latest session starting strictly before `before`.
    pub fn most_recent_before(&self, user: UserIndex, before: i64) -> Option<&Session> {
        let list = self.sessions(user);
        let n = list.partition_point(|s| s.start < before);
        n.checked_sub(1).map(|i| &list[i])
    }

    /// Adds `other`'s sessions, keeping each user's list ordered by time.
    pub fn merge(&mut self, other: &SessionStore) {
        for (user, sessions) in &other.users {
            let list = self.users.entry(*user).or_default();
            list.extend(sessions.iter().cloned());
            list.sort_by_key(|s| (s.start, s.time_index));
            list.dedup_by_key(|s| s.time_index);
        }
        self.max_timestamp = match (self.max_timestamp, other.max_timestamp) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
    }

    /// Translates indices from one vocabulary pair to another. Items and
    /// users unknown to the target vocabularies are dropped, as are sessions
    /// left empty.
    pub fn remap(&self, from_items: &Vocab, from_users: &Vocab, to_items: &Vocab, to_users: &Vocab) -> SessionStore {
        let mut out = SessionStore::new();
        for s in self.iter() {
            let Some(user) = to_users.index(from_users.id(s.user.0)) else {
                continue;
            };
            let items: Vec<ItemIndex> = s
                .items
                .iter()
                .filter_map(|i| to_items.index(from_items.id(i.0)).map(ItemIndex))
                .collect();
            if items.is_empty() {
                continue;
            }
            out.push(Session {
                user: UserIndex(user),
                time_index: s.time_index,
                start: s.start,
                items,
            });
        }
        out.max_timestamp = self.max_timestamp;
        out
    }

    /// Largest item index used, if any.
    pub fn max_item(&self) -> Option<ItemIndex> {
        self.iter().flat_map(|s| s.items.iter().copied()).max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session(user: u32, t: u32, start: i64) -> Session {
        Session {
            user: UserIndex(user),
            time_index: t,
            start,
            items: vec![ItemIndex(0)],
        }
    }

    #[test]
    fn most_recent_before_is_strict() {
        let mut store = SessionStore::new();
        store.push(session(0, 1, 10));
        store.push(session(0, 2, 20));
        store.push(session(0, 3, 30));
        assert_eq!(store.most_recent_before(UserIndex(0), 30).unwrap().time_index, 2);
        assert_eq!(store.most_recent_before(UserIndex(0), 31).unwrap().time_index, 3);
        assert!(store.most_recent_before(UserIndex(0), 10).is_none());
        assert!(store.most_recent_before(UserIndex(9), 100).is_none());
    }

    #[test]
    #[should_panic]
    fn out_of_order_push_panics() {
        let mut store = SessionStore::new();
        store.push(session(0, 2, 20));
        store.push(session(0, 1, 10));
    }

    #[test]
    fn merge_interleaves_by_time() {
        let mut a = SessionStore::new();
        a.push(session(0, 1, 10));
        a.push(session(0, 3, 30));
        let mut b = SessionStore::new();
        b.push(session(0, 2, 20));
        a.merge(&b);
        let ts: Vec<u32> = a.sessions(UserIndex(0)).iter().map(|s| s.time_index).collect();
        assert_eq!(ts, vec![1, 2, 3]);
    }
}
