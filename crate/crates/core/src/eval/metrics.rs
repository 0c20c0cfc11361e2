use crate::{Error, Result};

/// Rank of the true item plus the top of the ranking.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankResult {
    /// 1-based; tied items count as ranked above the true item.
    pub rank: usize,
    pub top_k: Vec<usize>,
}

/// `1 +` the number of other items scoring at least as high as
/// `true_item`. Scores may be probabilities or any increasing transform of
/// them, such as log-probabilities.
pub fn rank_of(scores: &[f64], true_item: usize) -> Result<usize> {
    let Some(&target) = scores.get(true_item) else {
        return Err(Error::OutOfRange {
            what: "item",
            index: true_item,
            len: scores.len(),
        });
    };
    let above = scores
        .iter()
        .enumerate()
        .filter(|&(j, &s)| j != true_item && s >= target)
        .count();
    Ok(1 + above)
}

/// Rank of `true_item` and the `k` highest-scoring items (ties by index).
pub fn rank_items(scores: &[f64], true_item: usize, k: usize) -> Result<RankResult> {
    let rank = rank_of(scores, true_item)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(RankResult { rank, top_k: order })
}

/// Fraction of ranks within the top `k`.
pub fn recall_at_k(ranks: &[usize], k: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::Empty("rank list"));
    }
    let hits = ranks.iter().filter(|&&r| r <= k).count();
    Ok(hits as f64 / ranks.len() as f64)
}

/// Mean of `1 / log2(1 + rank)`, without a cutoff.
pub fn ndcg(ranks: &[usize]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::Empty("rank list"));
    }
    let total: f64 = ranks.iter().map(|&r| 1.0 / (1.0 + r as f64).log2()).sum();
    Ok(total / ranks.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unique_max_ranks_first() {
        assert_eq!(rank_of(&[0.1, 0.7, 0.2], 1).unwrap(), 1);
    }

    #[test]
    fn uniform_scores_rank_last() {
        let p = vec![0.01; 100];
        assert_eq!(rank_of(&p, 37).unwrap(), 100);
    }

    #[test]
    fn hand_rank() {
        let r = rank_items(&[0.5, 0.3, 0.2], 1, 2).unwrap();
        assert_eq!(r.rank, 2);
        assert_eq!(r.top_k, vec![0, 1]);
        assert!(rank_of(&[0.5], 1).is_err());
    }

    #[test]
    fn recall_cases() {
        assert_eq!(recall_at_k(&[1, 1, 1], 20).unwrap(), 1.0);
        assert_eq!(recall_at_k(&[5, 25], 20).unwrap(), 0.5);
        assert!(recall_at_k(&[], 20).is_err());
    }

    #[test]
    fn ndcg_cases() {
        assert_eq!(ndcg(&[1]).unwrap(), 1.0);
        assert_eq!(ndcg(&[3]).unwrap(), 0.5);
        assert_eq!(ndcg(&[1, 3]).unwrap(), 0.75);
        assert!(ndcg(&[]).is_err());
    }

    proptest! {
        #[test]
        fn metrics_are_bounded_and_monotone(ranks in proptest::collection::vec(1usize..500, 1..50), bump in 0usize..50) {
            let worse: Vec<usize> = ranks.iter().map(|r| r + bump).collect();
            let (r, n) = (recall_at_k(&ranks, 20).unwrap(), ndcg(&ranks).unwrap());
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert!(n > 0.0 && n <= 1.0);
            prop_assert!(recall_at_k(&worse, 20).unwrap() <= r);
            prop_assert!(ndcg(&worse).unwrap() <= n);
        }

        #[test]
        fn rank_is_within_vocabulary(scores in proptest::collection::vec(-5.0f64..5.0, 1..60), pick in 0usize..60) {
            let t = pick % scores.len();
            let r = rank_of(&scores, t).unwrap();
            prop_assert!(r >= 1 && r <= scores.len());
        }
    }
}
