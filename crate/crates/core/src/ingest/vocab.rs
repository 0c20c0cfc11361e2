use std::collections::HashMap;

use super::store::SessionStore;
use crate::{Error, Result};

/// Bijection between opaque string ids and contiguous indices `0..len`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    ids: Vec<String>,
    index: HashMap<String, u32>,
}

pub type ItemVocab = Vocab;
pub type UserVocab = Vocab;

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Index of `id`, inserting it at the end if new.
    pub fn insert(&mut self, id: &str) -> u32 {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = u32::try_from(self.ids.len()).expect("vocabulary exceeds u32 range");
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), i);
        i
    }

    pub fn index(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    /// Panics if `i` is out of range.
    pub fn id(&self, i: u32) -> &str {
        &self.ids[i as usize]
    }

    pub fn get_id(&self, i: u32) -> Option<&str> {
        self.ids.get(i as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn from_ids<I: IntoIterator<Item = String>>(ids: I) -> Result<Self> {
        let mut v = Vocab::new();
        for id in ids {
            if v.index.contains_key(&id) {
                return Err(Error::Format(format!("duplicate vocabulary id {id:?}")));
            }
            v.insert(&id);
        }
        Ok(v)
    }
}

/// Item and user vocabularies covering exactly what appears in `train`,
/// indexed by first appearance in (user, time, position) order. The
/// store's indices are resolved through `items` / `users`.
pub fn build_vocabs(train: &SessionStore, items: &Vocab, users: &Vocab) -> Result<(ItemVocab, UserVocab)> {
    if train.num_sessions() == 0 {
        return Err(Error::EmptyTrain);
    }
    let mut item_vocab = Vocab::new();
    let mut user_vocab = Vocab::new();
    for s in train.iter() {
        user_vocab.insert(users.id(s.user.0));
        for i in &s.items {
            item_vocab.insert(items.id(i.0));
        }
    }
    Ok((item_vocab, user_vocab))
}
