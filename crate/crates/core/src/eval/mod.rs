//! Ranking evaluation, attention analysis, a popularity baseline and a
//! synthetic socially driven data generator.

mod attention;
mod metrics;
mod synth;

pub use attention::{
    collect_attention, population_variance, select_case_users, variance_report, write_attention_csv, HistogramBin,
    PairVariance, SessionAttention, VarianceReport, ATTENTION_HEADER, HISTOGRAM_BINS, HISTOGRAM_HEADER,
};
pub use metrics::{ndcg, rank_items, rank_of, recall_at_k, RankResult};
pub use synth::{generate as generate_synth, synth_social_data, SynthConfig, SynthData};

use rayon::prelude::*;

use crate::ingest::{Session, SessionStore};
use crate::model::{DgRec, SocialContext};
use crate::rng::{self, streams};
use crate::tensor::Real;
use crate::{Error, Result};

/// Cutoff for the headline recall metric.
pub const RECALL_K: usize = 20;

/// Anything that assigns log-probabilities over all items at each
/// prediction position of a session.
pub trait NextItemScorer: Sync {
    /// One row per position `n = 1..len-1`, scoring the item at `n + 1`.
    /// `session_id` identifies the session within its split.
    fn score_session(&self, session: &Session, session_id: usize) -> Result<Vec<Vec<f64>>>;
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalSummary {
    pub positions: usize,
    /// Mean negative log-likelihood per position.
    pub loss: f64,
    pub recall: f64,
    pub ndcg: f64,
    /// Rank of the true next item at every position, in store order.
    pub ranks: Vec<usize>,
}

impl EvalSummary {
    pub fn recall_at(&self, k: usize) -> f64 {
        recall_at_k(&self.ranks, k).unwrap_or(0.0)
    }
}

/// Ranks the true next item at every position of every session in
/// `store`. Sessions are scored in parallel; results are combined in store
/// order.
pub fn evaluate<S: NextItemScorer + ?Sized>(scorer: &S, store: &SessionStore) -> Result<EvalSummary> {
    let sessions: Vec<&Session> = store.iter().collect();
    let per_session: Vec<(Vec<usize>, f64)> = sessions
        .par_iter()
        .enumerate()
        .map(|(sid, s)| {
            let rows = scorer.score_session(s, sid)?;
            if rows.len() != s.len().saturating_sub(1) {
                return Err(Error::Config(format!(
                    "scorer returned {} rows for a session of length {}",
                    rows.len(),
                    s.len()
                )));
            }
            let mut ranks = Vec::with_capacity(rows.len());
            let mut nll = 0.0;
            for (row, target) in rows.iter().zip(&s.items[1..]) {
                ranks.push(rank_of(row, target.idx())?);
                nll -= row[target.idx()];
            }
            Ok((ranks, nll))
        })
        .collect::<Result<_>>()?;
    let mut ranks = Vec::new();
    let mut nll = 0.0;
    for (r, l) in per_session {
        ranks.extend(r);
        nll += l;
    }
    if ranks.is_empty() {
        return Err(Error::Empty("evaluation positions"));
    }
    Ok(EvalSummary {
        positions: ranks.len(),
        loss: nll / ranks.len() as f64,
        recall: recall_at_k(&ranks, RECALL_K)?,
        ndcg: ndcg(&ranks)?,
        ranks,
    })
}

/// Scores with a trained model. Friend trees are sampled from a generator
/// keyed by `seed` and the session id, so results do not depend on thread
/// scheduling.
pub struct ModelScorer<'a, T: Real> {
    pub model: &'a DgRec<T>,
    pub ctx: SocialContext<'a>,
    pub seed: u64,
}

impl<T: Real> NextItemScorer for ModelScorer<'_, T> {
    fn score_session(&self, session: &Session, session_id: usize) -> Result<Vec<Vec<f64>>> {
        let mut r = rng::derive(self.seed, streams::EVAL, &[session_id as u64]);
        Ok(self.model.predict_session(session, self.ctx, &mut r)?.0)
    }
}

/// Recall@20 and NDCG of `model` on `store`.
pub fn evaluate_model<T: Real>(
    model: &DgRec<T>,
    store: &SessionStore,
    ctx: SocialContext<'_>,
    seed: u64,
) -> Result<EvalSummary> {
    evaluate(&ModelScorer { model, ctx, seed }, store)
}

/// Item probabilities proportional to training frequency.
pub fn popularity_baseline(train: &SessionStore, num_items: usize) -> Vec<f64> {
    let mut counts = vec![0.0; num_items];
    for s in train.iter() {
        for i in &s.items {
            if let Some(c) = counts.get_mut(i.idx()) {
                *c += 1.0;
            }
        }
    }
    let total: f64 = counts.iter().sum();
    if total > 0.0 {
        for c in &mut counts {
            *c /= total;
        }
    }
    counts
}

/// Scores every position with the same fixed distribution.
pub struct StaticScorer {
    log_probs: Vec<f64>,
}

impl StaticScorer {
    pub fn new(probs: &[f64]) -> Self {
        Self {
            log_probs: probs.iter().map(|p| p.ln()).collect(),
        }
    }
}

impl NextItemScorer for StaticScorer {
    fn score_session(&self, session: &Session, _: usize) -> Result<Vec<Vec<f64>>> {
        Ok(vec![self.log_probs.clone(); session.len().saturating_sub(1)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{ItemIndex, UserIndex};

    fn store_of(sessions: &[&[u32]]) -> SessionStore {
        let mut store = SessionStore::new();
        for (t, items) in sessions.iter().enumerate() {
            store.push(Session {
                user: UserIndex(0),
                time_index: t as u32 + 1,
                start: t as i64,
                items: items.iter().map(|&i| ItemIndex(i)).collect(),
            });
        }
        store
    }

    struct Oracle(usize);

    impl NextItemScorer for Oracle {
        fn score_session(&self, s: &Session, _: usize) -> Result<Vec<Vec<f64>>> {
            Ok(s.items[1..]
                .iter()
                .map(|t| (0..self.0).map(|j| if j == t.idx() { 0.0 } else { -10.0 }).collect())
                .collect())
        }
    }

    #[test]
    fn rigged_model_is_perfect() {
        let store = store_of(&[&[0, 1, 2], &[3, 4]]);
        let s = evaluate(&Oracle(5), &store).unwrap();
        assert_eq!((s.recall, s.ndcg), (1.0, 1.0));
        assert_eq!(s.positions, 3);
    }

    #[test]
    fn popularity_counts() {
        let store = store_of(&[&[0, 0, 0, 1]]);
        let p = popularity_baseline(&store, 3);
        assert_eq!(p, vec![0.75, 0.25, 0.0]);
    }

    #[test]
    fn top_item_everywhere_is_recalled() {
        let store = store_of(&[&[0, 0, 0], &[0, 0]]);
        let p = popularity_baseline(&store, 30);
        let s = evaluate(&StaticScorer::new(&p), &store).unwrap();
        assert_eq!(s.recall, 1.0);
    }
}
