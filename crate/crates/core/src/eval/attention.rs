use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::gat::AttentionTrace;
use crate::graphstore::SocialGraph;
use crate::ingest::{Session, SessionStore, UserIndex, UserVocab};
use crate::model::{DgRec, SocialContext};
use crate::rng::{self, streams};
use crate::tensor::Real;
use crate::Result;

pub const ATTENTION_HEADER: &str = "target_user,session_id,step,layer,friend_id,weight";
pub const HISTOGRAM_HEADER: &str = "bin_lo,bin_hi,intra_count,inter_count";
pub const HISTOGRAM_BINS: usize = 20;

/// Attention recorded at every prediction step of one session.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionAttention {
    pub user: UserIndex,
    /// Position of the session in store order, as used for evaluation.
    pub session_id: usize,
    pub steps: Vec<AttentionTrace>,
}

/// Users with at least `min_sessions` sessions in `store` and at least
/// `min_friends` friends.
pub fn select_case_users(
    store: &SessionStore,
    graph: &SocialGraph,
    min_sessions: usize,
    min_friends: usize,
) -> Vec<UserIndex> {
    store
        .users()
        .filter(|&u| store.sessions(u).len() >= min_sessions && graph.degree(u) >= min_friends)
        .collect()
}

/// Runs the model over every session of `store` (restricted to `users` when
/// given) and keeps the per-step attention. Friend sampling matches
/// evaluation with the same `seed`.
pub fn collect_attention<T: Real>(
    model: &DgRec<T>,
    store: &SessionStore,
    ctx: SocialContext<'_>,
    seed: u64,
    users: Option<&[UserIndex]>,
) -> Result<Vec<SessionAttention>> {
    let selected: Vec<(usize, &Session)> = store
        .iter()
        .enumerate()
        .filter(|(_, s)| users.is_none_or(|us| us.contains(&s.user)))
        .collect();
    selected
        .par_iter()
        .map(|&(sid, s)| {
            let mut r = rng::derive(seed, streams::EVAL, &[sid as u64]);
            let (_, steps) = model.predict_session(s, ctx, &mut r)?;
            Ok(SessionAttention {
                user: s.user,
                session_id: sid,
                steps,
            })
        })
        .collect()
}

/// One row per (session, step, layer, distinct participant); the self row
/// comes first and uses the target as `friend_id`.
pub fn write_attention_csv<W: Write>(mut w: W, sessions: &[SessionAttention], users: &UserVocab) -> std::io::Result<()> {
    writeln!(w, "{ATTENTION_HEADER}")?;
    for s in sessions {
        let target = users.id(s.user.0);
        for (step, trace) in s.steps.iter().enumerate() {
            for (layer, alpha) in trace.layers.iter().enumerate() {
                writeln!(w, "{target},{},{step},{layer},{target},{}", s.session_id, alpha[0])?;
                for (f, a) in trace.friend_weights(layer) {
                    writeln!(w, "{target},{},{step},{layer},{},{a}", s.session_id, users.id(f.0))?;
                }
            }
        }
    }
    w.flush()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairVariance {
    pub user: UserIndex,
    pub friend: UserIndex,
    /// Variance across positions, one entry per session with at least two
    /// positions.
    pub intra: Vec<f64>,
    /// Variance of the per-session mean weight across sessions; `None` with
    /// fewer than two sessions.
    pub inter: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub intra_count: usize,
    pub inter_count: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VarianceReport {
    pub pairs: Vec<PairVariance>,
    pub histogram: Vec<HistogramBin>,
}

impl VarianceReport {
    pub fn intra_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs.iter().flat_map(|p| p.intra.iter().copied())
    }

    pub fn inter_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs.iter().filter_map(|p| p.inter)
    }

    pub fn mean_intra(&self) -> Option<f64> {
        mean_of(self.intra_values())
    }

    pub fn mean_inter(&self) -> Option<f64> {
        mean_of(self.inter_values())
    }

    pub fn write_histogram<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{HISTOGRAM_HEADER}")?;
        for b in &self.histogram {
            writeln!(w, "{},{},{},{}", b.lo, b.hi, b.intra_count, b.inter_count)?;
        }
        w.flush()
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, sum) = values.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    (n > 0).then(|| sum / n as f64)
}

/// Population variance; exactly zero when all values are equal.
pub fn population_variance(values: &[f64]) -> f64 {
    if values.windows(2).all(|w| w[0] == w[1]) {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64
}

/// Intra- and inter-session variance of each friend's final-layer weight,
/// with a 20-bin histogram over `[0, max]`.
pub fn variance_report(sessions: &[SessionAttention]) -> VarianceReport {
    // (user, friend) → per-session weight series
    let mut series: BTreeMap<(UserIndex, UserIndex), Vec<Vec<f64>>> = BTreeMap::new();
    for s in sessions {
        let mut per_friend: BTreeMap<UserIndex, Vec<f64>> = BTreeMap::new();
        for trace in &s.steps {
            let Some(last) = trace.layers.len().checked_sub(1) else {
                continue;
            };
            for (f, w) in trace.friend_weights(last) {
                per_friend.entry(f).or_default().push(w);
            }
        }
        for (f, ws) in per_friend {
            series.entry((s.user, f)).or_default().push(ws);
        }
    }

    let pairs: Vec<PairVariance> = series
        .into_iter()
        .map(|((user, friend), sessions)| {
            let intra = sessions
                .iter()
                .filter(|ws| ws.len() >= 2)
                .map(|ws| population_variance(ws))
                .collect();
            let means: Vec<f64> = sessions
                .iter()
                .map(|ws| ws.iter().sum::<f64>() / ws.len() as f64)
                .collect();
            let inter = (means.len() >= 2).then(|| population_variance(&means));
            PairVariance {
                user,
                friend,
                intra,
                inter,
            }
        })
        .collect();

    let mut report = VarianceReport {
        pairs,
        histogram: Vec::new(),
    };
    let max = report
        .intra_values()
        .chain(report.inter_values())
        .fold(0.0f64, f64::max);
    let width = max / HISTOGRAM_BINS as f64;
    let bin = |v: f64| {
        if width > 0.0 {
            ((v / width) as usize).min(HISTOGRAM_BINS - 1)
        } else {
            0
        }
    };
    let mut intra = [0usize; HISTOGRAM_BINS];
    let mut inter = [0usize; HISTOGRAM_BINS];
    for v in report.intra_values() {
        intra[bin(v)] += 1;
    }
    for v in report.inter_values() {
        inter[bin(v)] += 1;
    }
    report.histogram = (0..HISTOGRAM_BINS)
        .map(|b| HistogramBin {
            lo: width * b as f64,
            hi: if b + 1 == HISTOGRAM_BINS { max } else { width * (b + 1) as f64 },
            intra_count: intra[b],
            inter_count: inter[b],
        })
        .collect();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn trace(friends: &[u32], alpha: &[f64]) -> AttentionTrace {
        AttentionTrace {
            root: UserIndex(0),
            friends: friends.iter().map(|&f| UserIndex(f)).collect(),
            layers: vec![alpha.to_vec()],
        }
    }

    fn session(sid: usize, steps: Vec<AttentionTrace>) -> SessionAttention {
        SessionAttention {
            user: UserIndex(0),
            session_id: sid,
            steps,
        }
    }

    #[test]
    fn constant_trace_has_zero_intra() {
        let t = trace(&[1], &[0.7, 0.3]);
        let r = variance_report(&[session(0, vec![t.clone(), t.clone(), t])]);
        assert_eq!(r.pairs[0].intra, vec![0.0]);
        assert_eq!(r.pairs[0].inter, None);
    }

    #[test]
    fn two_session_means_give_one_hundredth() {
        let s0 = session(0, vec![trace(&[1], &[0.9, 0.1]), trace(&[1], &[0.7, 0.3])]);
        let s1 = session(1, vec![trace(&[1], &[0.6, 0.4])]);
        let r = variance_report(&[s0, s1]);
        assert_abs_diff_eq!(r.pairs[0].inter.unwrap(), 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(r.pairs[0].intra[0], 0.01, epsilon = 1e-12);
        assert_eq!(r.pairs[0].intra.len(), 1);
    }

    #[test]
    fn duplicate_samples_are_summed() {
        let t = trace(&[1, 1, 2], &[0.4, 0.2, 0.2, 0.2]);
        let r = variance_report(&[session(0, vec![t.clone(), t])]);
        assert_eq!(r.pairs.len(), 2);
    }

    #[test]
    fn histogram_spans_zero_to_max() {
        let s0 = session(0, vec![trace(&[1], &[0.9, 0.1]), trace(&[1], &[0.5, 0.5])]);
        let s1 = session(1, vec![trace(&[1], &[1.0, 0.0])]);
        let r = variance_report(&[s0, s1]);
        assert_eq!(r.histogram.len(), HISTOGRAM_BINS);
        assert_eq!(r.histogram[0].lo, 0.0);
        let max = r.intra_values().chain(r.inter_values()).fold(0.0, f64::max);
        assert_eq!(r.histogram[HISTOGRAM_BINS - 1].hi, max);
        let total: usize = r.histogram.iter().map(|b| b.intra_count + b.inter_count).sum();
        assert_eq!(total, 2);
        let mut buf = Vec::new();
        r.write_histogram(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 21);
    }

    #[test]
    fn attention_rows_self_first() {
        let users = crate::ingest::Vocab::from_ids(["a".to_string(), "b".to_string()]).unwrap();
        let s = session(3, vec![trace(&[1], &[0.25, 0.75])]);
        let mut buf = Vec::new();
        write_attention_csv(&mut buf, &[s], &users).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines, vec![ATTENTION_HEADER, "a,3,0,0,a,0.25", "a,3,0,0,b,0.75"]);
    }
}
