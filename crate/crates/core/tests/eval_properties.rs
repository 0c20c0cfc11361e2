use dgrec::eval::{evaluate, ndcg, recall_at_k, NextItemScorer};
use dgrec::ingest::ItemIndex;
use dgrec::rng::{self, streams};
use dgrec::{Session, SessionStore, UserIndex};
use proptest::prelude::*;
use rand::Rng;

struct RandomScorer {
    items: usize,
}

impl NextItemScorer for RandomScorer {
    fn score_session(&self, s: &Session, session_id: usize) -> dgrec::Result<Vec<Vec<f64>>> {
        let mut r = rng::derive(11, streams::EVAL, &[session_id as u64]);
        Ok((1..s.len())
            .map(|_| (0..self.items).map(|_| r.gen::<f64>()).collect())
            .collect())
    }
}

#[test]
fn uninformed_scorer_recall_is_k_over_items() {
    let items = 1000;
    let mut r = rng::stream(3, streams::SYNTH);
    let mut store = SessionStore::new();
    for u in 0..500u32 {
        store.push(Session {
            user: UserIndex(u),
            time_index: 1,
            start: 0,
            items: (0..11).map(|_| ItemIndex(r.gen_range(0..items as u32))).collect(),
        });
    }
    let s = evaluate(&RandomScorer { items }, &store).unwrap();
    let n = s.positions as f64;
    assert_eq!(s.positions, 5000);
    let sigma = (0.02 * 0.98 / n).sqrt();
    assert!((s.recall - 0.02).abs() <= 3.0 * sigma, "recall {}", s.recall);
}

proptest! {
    #[test]
    fn metrics_are_bounded_and_monotone(ranks in prop::collection::vec(1usize..500, 1..60), bump in 0usize..50) {
        let r = recall_at_k(&ranks, 20).unwrap();
        let n = ndcg(&ranks).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert!(n > 0.0 && n <= 1.0);
        let worse: Vec<usize> = ranks.iter().map(|x| x + bump).collect();
        prop_assert!(recall_at_k(&worse, 20).unwrap() <= r);
        prop_assert!(ndcg(&worse).unwrap() <= n);
    }
}
