//! Binary layout of a processed session store. All integers little-endian.
//!
//! ```text
//! magic      b"DGRS1"
//! items      u64 count, then per id: u64 byte length, UTF-8 bytes
//! users      same layout as items
//! max_ts     i64 (i64::MIN when unknown)
//! n_users    u64
//! per user   u32 user index, u64 session count, then per session:
//!            u32 time_index, i64 start, u64 length, length × u32 item index
//! ```

use std::io::{self, Read, Write};

use super::store::{ItemIndex, Session, SessionStore, UserIndex};
use super::vocab::Vocab;
use crate::{Error, Result};

pub const STORE_MAGIC: &[u8; 5] = b"DGRS1";

pub fn write_store<W: Write>(mut w: W, items: &Vocab, users: &Vocab, store: &SessionStore) -> io::Result<()> {
    w.write_all(STORE_MAGIC)?;
    for vocab in [items, users] {
        w.write_all(&(vocab.len() as u64).to_le_bytes())?;
        for id in vocab.ids() {
            w.write_all(&(id.len() as u64).to_le_bytes())?;
            w.write_all(id.as_bytes())?;
        }
    }
    w.write_all(&store.max_timestamp().unwrap_or(i64::MIN).to_le_bytes())?;
    w.write_all(&(store.num_users() as u64).to_le_bytes())?;
    for user in store.users() {
        let sessions = store.sessions(user);
        w.write_all(&user.0.to_le_bytes())?;
        w.write_all(&(sessions.len() as u64).to_le_bytes())?;
        for s in sessions {
            w.write_all(&s.time_index.to_le_bytes())?;
            w.write_all(&s.start.to_le_bytes())?;
            w.write_all(&(s.items.len() as u64).to_le_bytes())?;
            for i in &s.items {
                w.write_all(&i.0.to_le_bytes())?;
            }
        }
    }
    w.flush()
}

/// Reads a store written by [`write_store`], validating that every index
/// lies inside its vocabulary.
pub fn read_store<R: Read>(mut r: R) -> Result<(Vocab, Vocab, SessionStore)> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != STORE_MAGIC {
        return Err(Error::Format("not a session store (bad magic)".into()));
    }
    let items = read_vocab(&mut r)?;
    let users = read_vocab(&mut r)?;
    let max_ts = read_i64(&mut r)?;
    let mut store = SessionStore::new();
    let n_users = read_u64(&mut r)?;
    for _ in 0..n_users {
        let user = read_u32(&mut r)?;
        if user as usize >= users.len() {
            return Err(Error::Format(format!("user index {user} outside vocabulary of {}", users.len())));
        }
        let n_sessions = read_u64(&mut r)?;
        let mut last_t = 0;
        for _ in 0..n_sessions {
            let time_index = read_u32(&mut r)?;
            let start = read_i64(&mut r)?;
            let len = read_u64(&mut r)?;
            if time_index <= last_t || len == 0 {
                return Err(Error::Format(format!("corrupt session record for user {user}")));
            }
            last_t = time_index;
            let mut session_items = Vec::with_capacity(len.min(1 << 16) as usize);
            for _ in 0..len {
                let i = read_u32(&mut r)?;
                if i as usize >= items.len() {
                    return Err(Error::Format(format!("item index {i} outside vocabulary of {}", items.len())));
                }
                session_items.push(ItemIndex(i));
            }
            store.push(Session {
                user: UserIndex(user),
                time_index,
                start,
                items: session_items,
            });
        }
    }
    store.set_max_timestamp((max_ts != i64::MIN).then_some(max_ts));
    Ok((items, users, store))
}

fn read_vocab<R: Read>(r: &mut R) -> Result<Vocab> {
    let n = read_u64(r)?;
    let mut ids = Vec::new();
    for _ in 0..n {
        let len = read_u64(r)?;
        if len > 1 << 20 {
            return Err(Error::Format(format!("vocabulary id of {len} bytes")));
        }
        let mut buf = vec![0u8; len as usize];
        r.read_exact(&mut buf)?;
        ids.push(String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))?);
    }
    Vocab::from_ids(ids)
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_i64<R: Read>(r: &mut R) -> io::Result<i64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(i64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{segment_sessions, Event, Interval};

    #[test]
    fn roundtrip() {
        let events = vec![
            Event::new("u1", "a", 10),
            Event::new("u1", "b", 20),
            Event::new("u2", "a", 900_000),
        ];
        let seg = segment_sessions(&events, Interval::Day, 20);
        let mut buf = Vec::new();
        write_store(&mut buf, &seg.items, &seg.users, &seg.store).unwrap();
        assert_eq!(&buf[..5], b"DGRS1");
        let (items, users, store) = read_store(buf.as_slice()).unwrap();
        assert_eq!(items, seg.items);
        assert_eq!(users, seg.users);
        assert_eq!(store, seg.store);
    }

    #[test]
    fn rejects_out_of_vocab_item() {
        let mut buf = Vec::new();
        let items = Vocab::from_ids(["a".to_string()]).unwrap();
        let users = Vocab::from_ids(["u".to_string()]).unwrap();
        let mut store = SessionStore::new();
        store.push(Session {
            user: UserIndex(0),
            time_index: 1,
            start: 0,
            items: vec![ItemIndex(3)],
        });
        write_store(&mut buf, &items, &users, &store).unwrap();
        assert!(matches!(read_store(buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_bad_magic() {
        assert!(read_store(&b"DGRS0aaaaaaaa"[..]).is_err());
    }
}
