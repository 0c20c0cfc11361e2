use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graphstore::SocialGraph;
use crate::ingest::{prepare_dataset, Dataset, Event, SplitConfig, UserIndex};
use crate::rng::{self, streams};
use crate::Result;

// 2024-01-01 00:00 UTC, a Monday.
const EPOCH: i64 = 1_704_067_200;
const WEEK: i64 = 7 * 86_400;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub sessions_per_user: usize,
    /// Probability that an item is copied from friends' previous sessions.
    pub influence_prob: f64,
    pub seed: u64,
    pub mean_degree: f64,
    pub min_session_len: usize,
    pub max_session_len: usize,
    /// Items per topic. Topics partition the catalogue into consecutive
    /// blocks and each user draws own-interest items from one of them.
    pub topic_size: usize,
}

impl SynthConfig {
    pub fn new(num_users: usize, num_items: usize, sessions_per_user: usize, influence_prob: f64, seed: u64) -> Self {
        Self {
            num_users,
            num_items,
            sessions_per_user,
            influence_prob,
            seed,
            mean_degree: 8.0,
            min_session_len: 3,
            max_session_len: 5,
            topic_size: 15,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    pub events: Vec<Event>,
    /// Undirected friendships as `(user_id, friend_id)` with the smaller
    /// index first.
    pub edges: Vec<(String, String)>,
}

impl SynthData {
    pub fn write_events<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "user_id,item_id,timestamp")?;
        for e in &self.events {
            writeln!(w, "{},{},{}", e.user_id, e.item_id, e.timestamp)?;
        }
        w.flush()
    }

    /// Segments, splits and indexes the events and builds the friendship
    /// graph over the resulting user vocabulary.
    pub fn prepare(&self, split: &SplitConfig) -> Result<(Dataset, SocialGraph)> {
        let (data, _) = prepare_dataset(&self.events, split)?;
        let edges = self.edges.iter().filter_map(|(a, b)| {
            Some((UserIndex(data.users.index(a)?), UserIndex(data.users.index(b)?)))
        });
        let graph = SocialGraph::from_edges(data.users.len(), edges)?;
        Ok((data, graph))
    }

    pub fn write_edges<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "user_id,friend_id")?;
        for (a, b) in &self.edges {
            writeln!(w, "{a},{b}")?;
        }
        w.flush()
    }
}

/// Weekly sessions over an Erdős–Rényi friendship graph with mean degree 8.
/// Each item of a user's week-`t` session is, with probability
/// `influence_prob`, drawn uniformly from the union of the friends' week
/// `t-1` items, and otherwise uniformly from the user's topic.
pub fn synth_social_data(
    num_users: usize,
    num_items: usize,
    sessions_per_user: usize,
    influence_prob: f64,
    seed: u64,
) -> SynthData {
    generate(&SynthConfig::new(num_users, num_items, sessions_per_user, influence_prob, seed))
}

pub fn generate(cfg: &SynthConfig) -> SynthData {
    let n = cfg.num_users;
    let m = cfg.num_items.max(1);
    let mut graph_rng = rng::derive(cfg.seed, streams::SYNTH, &[0]);
    let mut topic_rng = rng::derive(cfg.seed, streams::SYNTH, &[1]);
    let mut item_rng = rng::derive(cfg.seed, streams::SYNTH, &[2]);

    let p = if n > 1 { (cfg.mean_degree / (n - 1) as f64).min(1.0) } else { 0.0 };
    let mut friends = vec![Vec::new(); n];
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if graph_rng.gen_bool(p) {
                friends[a].push(b);
                friends[b].push(a);
                edges.push((format!("u{a}"), format!("u{b}")));
            }
        }
    }

    let topic_size = cfg.topic_size.clamp(1, m);
    let blocks: Vec<Vec<usize>> = (0..m).collect::<Vec<_>>().chunks(topic_size).map(<[usize]>::to_vec).collect();
    let topics: Vec<&Vec<usize>> = (0..n).map(|_| &blocks[topic_rng.gen_range(0..blocks.len())]).collect();
    let offsets: Vec<i64> = (0..n).map(|_| topic_rng.gen_range(0..5 * 86_400)).collect();

    let mut events = Vec::new();
    let mut prev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in 0..cfg.sessions_per_user {
        let mut current = Vec::with_capacity(n);
        for u in 0..n {
            let mut pool: Vec<usize> = friends[u].iter().flat_map(|&f| prev[f].iter().copied()).collect();
            pool.sort_unstable();
            pool.dedup();
            let len = item_rng.gen_range(cfg.min_session_len..=cfg.max_session_len.max(cfg.min_session_len));
            let items: Vec<usize> = (0..len)
                .map(|_| {
                    let social = !pool.is_empty() && item_rng.gen_bool(cfg.influence_prob.clamp(0.0, 1.0));
                    let source = if social { &pool } else { topics[u] };
                    *source.choose(&mut item_rng).expect("non-empty source")
                })
                .collect();
            let start = EPOCH + t as i64 * WEEK + offsets[u];
            for (k, &i) in items.iter().enumerate() {
                events.push(Event::new(format!("u{u}"), format!("i{i}"), start + 600 * k as i64));
            }
            current.push(items);
        }
        prev = current;
    }
    SynthData { events, edges }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{segment_sessions, Interval};

    fn bytes(d: &SynthData) -> (Vec<u8>, Vec<u8>) {
        let (mut e, mut g) = (Vec::new(), Vec::new());
        d.write_events(&mut e).unwrap();
        d.write_edges(&mut g).unwrap();
        (e, g)
    }

    #[test]
    fn same_seed_byte_identical() {
        let a = synth_social_data(30, 40, 4, 0.5, 9);
        let b = synth_social_data(30, 40, 4, 0.5, 9);
        assert_eq!(bytes(&a), bytes(&b));
        assert_ne!(bytes(&a), bytes(&synth_social_data(30, 40, 4, 0.5, 10)));
    }

    #[test]
    fn mean_degree_near_eight() {
        let d = synth_social_data(400, 50, 1, 0.0, 3);
        let mean = 2.0 * d.edges.len() as f64 / 400.0;
        assert!((mean - 8.0).abs() < 1.0, "{mean}");
    }

    #[test]
    fn one_session_per_week() {
        let d = synth_social_data(20, 50, 5, 0.9, 1);
        let seg = segment_sessions(&d.events, Interval::Week, 20);
        assert_eq!(seg.store.num_sessions(), 100);
    }

    #[test]
    fn no_influence_stays_on_topic() {
        let cfg = SynthConfig::new(20, 100, 3, 0.0, 4);
        let d = generate(&cfg);
        for u in 0..20 {
            let mut seen: Vec<&str> = d
                .events
                .iter()
                .filter(|e| e.user_id == format!("u{u}"))
                .map(|e| e.item_id.as_str())
                .collect();
            seen.sort_unstable();
            seen.dedup();
            assert!(seen.len() <= cfg.topic_size);
        }
    }

    #[test]
    fn full_influence_copies_friends() {
        let d = synth_social_data(40, 200, 2, 1.0, 5);
        let friends_of = |u: &str| -> Vec<String> {
            d.edges
                .iter()
                .filter_map(|(a, b)| {
                    if a == u {
                        Some(b.clone())
                    } else if b == u {
                        Some(a.clone())
                    } else {
                        None
                    }
                })
                .collect()
        };
        let week1 = EPOCH + WEEK;
        for e in d.events.iter().filter(|e| e.timestamp >= week1) {
            let fs = friends_of(&e.user_id);
            if fs.is_empty() {
                continue;
            }
            let found = d
                .events
                .iter()
                .any(|p| p.timestamp < week1 && fs.contains(&p.user_id) && p.item_id == e.item_id);
            assert!(found, "{e:?}");
        }
    }
}
