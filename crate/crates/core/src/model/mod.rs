//! The full recommender: session encoder, friend features, attention over
//! the sampled friend tree, prediction head and training loop.

mod config;
mod toy;
mod train;

pub use config::{Mode, ModelConfig, CONFIG_KEYS};
pub use toy::{toy_config, toy_gradient_check, toy_world, TOY_ITEMS, TOY_USERS};
pub use train::{train, EpochLog, TrainData, TrainOptions, TrainReport, METRIC_LOG_HEADER};

use std::collections::HashSet;

use rand::Rng;

use crate::encoder::{combine_friend, encode_final_states, encode_session, FriendCache, LstmParams};
use crate::gat::{gat_forward, AttentionTrace, FeatureGraph};
use crate::graphstore::{build_neighborhood, SocialGraph};
use crate::ingest::{Session, SessionStore, UserIndex};
use crate::rng::{self, streams};
use crate::tensor::{glorot_uniform, uniform, ParamId, ParamStore, Real, Tape, Var};
use crate::{Error, Result};

/// Where parameters live in the store.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamIds {
    pub item_embed: ParamId,
    pub user_embed: ParamId,
    pub lstm: LstmParams,
    pub fusion: ParamId,
    pub gat: Vec<ParamId>,
    pub head: ParamId,
    /// Output item table; the input table when embeddings are tied.
    pub output: ParamId,
}

/// Everything about the model except its parameter values. Forward passes
/// read parameters through the tape, so the same architecture can run
/// against perturbed copies of the store.
#[derive(Clone, Debug)]
pub struct Arch {
    pub config: ModelConfig,
    pub num_users: usize,
    pub num_items: usize,
    pub ids: ParamIds,
}

/// Friend graph and the session history friends' recent sessions are
/// looked up in.
#[derive(Clone, Copy, Debug)]
pub struct SocialContext<'a> {
    pub graph: &'a SocialGraph,
    pub history: &'a SessionStore,
}

/// Tape nodes of one session's forward pass.
#[derive(Debug)]
pub struct SessionPass {
    /// `P×|I|` scores for the `P = len - 1` prediction positions.
    pub logits: Var,
    /// `P×hidden` final representations.
    pub h_hat: Var,
    /// Next item at each position.
    pub targets: Vec<usize>,
    /// Root attention per position; empty when the graph is unused.
    pub traces: Vec<AttentionTrace>,
    pub cache: FriendCache,
    pub nodes_touched: usize,
}

impl SessionPass {
    pub fn positions(&self) -> usize {
        self.targets.len()
    }
}

#[derive(Clone, Debug)]
pub struct DgRec<T: Real> {
    pub arch: Arch,
    pub params: ParamStore<T>,
}

impl<T: Real> DgRec<T> {
    /// Fresh parameters drawn from the config seed.
    pub fn new(config: ModelConfig, num_users: usize, num_items: usize) -> Result<Self> {
        config.validate()?;
        if num_users == 0 || num_items == 0 {
            return Err(Error::Config("model needs at least one user and one item".into()));
        }
        let mut r = rng::stream(config.seed, streams::INIT);
        let mut p = ParamStore::new();
        let (h, e) = (config.hidden, config.embed);
        let item_embed = p.add("item_embed", uniform(num_items, e, 1.0 / (e as f64).sqrt(), &mut r));
        let user_embed = p.add("user_embed", uniform(num_users, e, 1.0 / (e as f64).sqrt(), &mut r));
        let lstm = LstmParams::register(&mut p, "lstm", h, e, &mut r);
        let fusion = p.add("fusion/w1", glorot_uniform(h, h + e, &mut r));
        let gat = (1..=config.layers)
            .map(|l| p.add(format!("gat/w{l}"), glorot_uniform(h, h, &mut r)))
            .collect();
        let head = p.add("head/w2", glorot_uniform(h, 2 * h, &mut r));
        let output = if config.tie_embeddings {
            item_embed
        } else {
            p.add("head/z", uniform(num_items, h, 1.0 / (h as f64).sqrt(), &mut r))
        };
        let ids = ParamIds {
            item_embed,
            user_embed,
            lstm,
            fusion,
            gat,
            head,
            output,
        };
        Ok(Self {
            arch: Arch {
                config,
                num_users,
                num_items,
                ids,
            },
            params: p,
        })
    }

    /// Wraps loaded parameters, checking every shape against `config` and
    /// the vocabulary sizes.
    pub fn from_params(config: ModelConfig, num_users: usize, num_items: usize, params: ParamStore<T>) -> Result<Self> {
        config.validate()?;
        let (h, e) = (config.hidden, config.embed);
        let get = |name: &str, shape: [usize; 2]| -> Result<ParamId> {
            let id = params
                .id(name)
                .ok_or_else(|| Error::Mismatch(format!("checkpoint lacks parameter {name}")))?;
            if params.get(id).shape() != shape {
                return Err(Error::Mismatch(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    params.get(id).shape(),
                    shape
                )));
            }
            Ok(id)
        };
        let item_embed = get("item_embed", [num_items, e])?;
        let user_embed = get("user_embed", [num_users, e])?;
        for name in ["w_x", "w_f", "w_o", "w_c"] {
            get(&format!("lstm/{name}"), [h, h + e])?;
        }
        for name in ["b_x", "b_f", "b_o", "b_c"] {
            get(&format!("lstm/{name}"), [1, h])?;
        }
        let lstm = LstmParams::find(&params, "lstm")?;
        let fusion = get("fusion/w1", [h, h + e])?;
        let gat = (1..=config.layers)
            .map(|l| get(&format!("gat/w{l}"), [h, h]))
            .collect::<Result<Vec<_>>>()?;
        let head = get("head/w2", [h, 2 * h])?;
        let output = if config.tie_embeddings {
            item_embed
        } else {
            get("head/z", [num_items, h])?
        };
        Ok(Self {
            arch: Arch {
                ids: ParamIds {
                    item_embed,
                    user_embed,
                    lstm,
                    fusion,
                    gat,
                    head,
                    output,
                },
                config,
                num_users,
                num_items,
            },
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.arch.config
    }

    /// Log-probabilities over all items at every prediction position of
    /// `session`, without dropout, plus the root attention per position.
    pub fn predict_session<R: Rng>(
        &self,
        session: &Session,
        ctx: SocialContext<'_>,
        sample_rng: &mut R,
    ) -> Result<(Vec<Vec<f64>>, Vec<AttentionTrace>)> {
        let mut tape = Tape::with_params(&self.params);
        let mut no_dropout = rng::stream(0, streams::DROPOUT);
        let Some(pass) = self
            .arch
            .session_pass(&mut tape, session, ctx, sample_rng, &mut no_dropout, false)?
        else {
            return Ok((Vec::new(), Vec::new()));
        };
        let logits = tape.value(pass.logits);
        let rows = (0..pass.positions())
            .map(|i| log_softmax(logits.row_slice(i)))
            .collect();
        Ok((rows, pass.traces))
    }
}

fn log_softmax<T: Real>(row: &[T]) -> Vec<f64> {
    let max = row.iter().map(|x| x.f64()).fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|x| (x.f64() - max).exp()).sum::<f64>().ln();
    row.iter().map(|x| x.f64() - lse).collect()
}

impl Arch {
    /// `W_2 [h_n; h_L]` row-wise, with the slot excluded by the mode zeroed.
    pub fn final_representation<T: Real>(&self, tape: &mut Tape<'_, T>, h_n: Var, h_l: Var) -> Result<Var> {
        let w2 = tape.param(self.ids.head)?;
        let (rows, cols) = tape.value(h_n).dims2("final_representation")?;
        let h_n = if self.config.mode == Mode::SocialOnly { tape.zeros(rows, cols) } else { h_n };
        let (rows, cols) = tape.value(h_l).dims2("final_representation")?;
        let h_l = if self.config.mode == Mode::SelfOnly { tape.zeros(rows, cols) } else { h_l };
        let joined = tape.concat_cols(&[h_n, h_l])?;
        Ok(tape.matmul_nt(joined, w2)?)
    }

    /// Item scores `ĥ · z_y` for every item, one row per row of `h_hat`.
    pub fn item_logits<T: Real>(&self, tape: &mut Tape<'_, T>, h_hat: Var) -> Result<Var> {
        let z = tape.param(self.ids.output)?;
        Ok(tape.matmul_nt(h_hat, z)?)
    }

    /// Forward pass over every prediction position of `session`. Returns
    /// `None` for sessions with a single item.
    pub fn session_pass<T: Real, R: Rng + ?Sized, D: Rng + ?Sized>(
        &self,
        tape: &mut Tape<'_, T>,
        session: &Session,
        ctx: SocialContext<'_>,
        sample_rng: &mut R,
        dropout_rng: &mut D,
        train: bool,
    ) -> Result<Option<SessionPass>> {
        let cfg = &self.config;
        let positions = session.len().saturating_sub(1);
        if positions == 0 {
            return Ok(None);
        }
        for item in &session.items {
            if item.idx() >= self.num_items {
                return Err(Error::OutOfRange {
                    what: "item",
                    index: item.idx(),
                    len: self.num_items,
                });
            }
        }
        if session.user.idx() >= self.num_users {
            return Err(Error::OutOfRange {
                what: "user",
                index: session.user.idx(),
                len: self.num_users,
            });
        }
        let item_table = tape.param(self.ids.item_embed)?;
        let lstm = self.ids.lstm.vars(tape)?;
        let states = encode_session(tape, item_table, &session.items[..positions], &lstm)?;
        let h_n = tape.concat_rows(&states)?;

        let mut cache = FriendCache::new();
        let mut traces = Vec::new();
        let mut nodes_touched = 0;
        let h_l = if cfg.mode.uses_graph() {
            let root = session.user;
            let tree = build_neighborhood(ctx.graph, root, &cfg.fanouts, sample_rng);
            let mut seen = HashSet::new();
            let friends: Vec<UserIndex> = tree
                .all_users()
                .filter(|&v| v != root && seen.insert(v))
                .collect();
            let user_table = tape.param(self.ids.user_embed)?;
            let w1 = tape.param(self.ids.fusion)?;
            let gat_w = self
                .ids
                .gat
                .iter()
                .map(|&id| tape.param(id))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let friend_mode = cfg.mode.friend_mode();

            let mut outputs = Vec::with_capacity(positions);
            for &state in &states {
                let rows = cache.lookup(tape, &friends, |tape, missing| {
                    let recent: Vec<Option<&Session>> = missing
                        .iter()
                        .map(|&v| ctx.history.most_recent_before(v, session.start))
                        .collect();
                    let present: Vec<&[crate::ingest::ItemIndex]> =
                        recent.iter().flatten().map(|s| s.items.as_slice()).collect();
                    let zero_row = present.len();
                    let mut next = 0;
                    let short_idx: Vec<usize> = recent
                        .iter()
                        .map(|s| match s {
                            Some(_) => {
                                next += 1;
                                next - 1
                            }
                            None => zero_row,
                        })
                        .collect();
                    let zeros = tape.zeros(1, cfg.hidden);
                    let short_src = if present.is_empty() {
                        zeros
                    } else {
                        let enc = encode_final_states(tape, item_table, &present, &lstm)?;
                        tape.concat_rows(&[enc, zeros])?
                    };
                    let short = tape.gather_rows(short_src, &short_idx)?;
                    let long_idx: Vec<usize> = missing.iter().map(|v| v.idx()).collect();
                    let long = tape.embedding_lookup(user_table, &long_idx)?;
                    combine_friend(tape, short, long, w1, friend_mode)
                })?;
                let features = match cache.table() {
                    Some(table) => tape.concat_rows(&[state, table])?,
                    None => state,
                };
                let slots: Vec<usize> = tree
                    .all_users()
                    .map(|v| {
                        if v == root {
                            0
                        } else {
                            1 + rows[friends.iter().position(|&f| f == v).expect("friend listed")]
                        }
                    })
                    .collect();
                let fg = FeatureGraph::new(&tree, slots)?;
                let out = gat_forward(tape, features, &fg, &gat_w, cfg.dropout, dropout_rng, train)?;
                nodes_touched += out.nodes_touched;
                traces.push(out.trace);
                outputs.push(out.root);
            }
            tape.concat_rows(&outputs)?
        } else {
            tape.zeros(positions, cfg.hidden)
        };

        let h_n = tape.dropout(h_n, cfg.dropout, dropout_rng, train)?;
        let h_l = tape.dropout(h_l, cfg.dropout, dropout_rng, train)?;
        let h_hat = self.final_representation(tape, h_n, h_l)?;
        let logits = self.item_logits(tape, h_hat)?;
        Ok(Some(SessionPass {
            logits,
            h_hat,
            targets: session.items[1..].iter().map(|i| i.idx()).collect(),
            traces,
            cache,
            nodes_touched,
        }))
    }

    /// Summed negative log-likelihood of every next item in `session`, with
    /// the number of positions; `None` for single-item sessions.
    pub fn session_loss<T: Real, R: Rng + ?Sized, D: Rng + ?Sized>(
        &self,
        tape: &mut Tape<'_, T>,
        session: &Session,
        ctx: SocialContext<'_>,
        sample_rng: &mut R,
        dropout_rng: &mut D,
        train: bool,
    ) -> Result<Option<(Var, usize)>> {
        let Some(pass) = self.session_pass(tape, session, ctx, sample_rng, dropout_rng, train)? else {
            return Ok(None);
        };
        let log_probs = tape.log_softmax_rows(pass.logits)?;
        let picked = tape.pick(log_probs, &pass.targets)?;
        let total = tape.sum(picked)?;
        Ok(Some((tape.neg(total)?, pass.positions())))
    }
}

/// Whether `session` yields training targets: it is not the user's first
/// session and has a next item to predict.
pub fn is_training_session(session: &Session) -> bool {
    session.time_index >= 2 && session.len() >= 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ItemIndex;
    use crate::tensor::{Adam, AdamConfig, Tensor};
    use approx::assert_abs_diff_eq;

    fn toy_config() -> ModelConfig {
        ModelConfig {
            hidden: 5,
            embed: 5,
            layers: 2,
            fanouts: vec![2, 2],
            dropout: 0.0,
            ..ModelConfig::default()
        }
    }

    fn session(user: u32, t: u32, start: i64, items: &[u32]) -> Session {
        Session {
            user: UserIndex(user),
            time_index: t,
            start,
            items: items.iter().map(|&i| ItemIndex(i)).collect(),
        }
    }

    fn toy_world() -> (SocialGraph, SessionStore) {
        let graph = SocialGraph::from_edges(
            4,
            [(UserIndex(0), UserIndex(1)), (UserIndex(0), UserIndex(2)), (UserIndex(2), UserIndex(3))],
        )
        .unwrap();
        let mut store = SessionStore::new();
        store.push(session(0, 1, 0, &[0, 1]));
        store.push(session(0, 2, 100, &[2, 3, 4]));
        store.push(session(1, 1, 10, &[5, 1, 2]));
        store.push(session(2, 1, 20, &[3, 3]));
        store.push(session(3, 1, 30, &[4]));
        (graph, store)
    }

    fn zero_all(model: &mut DgRec<f64>) {
        let ids: Vec<_> = model.params.ids().collect();
        for id in ids {
            let shape = model.params.get(id).shape().to_vec();
            model.params.set(id, Tensor::zeros(&shape)).unwrap();
        }
    }

    #[test]
    fn untrained_uniform_model_loss_is_log_items() {
        let (graph, _) = toy_world();
        let mut store = SessionStore::new();
        store.push(session(1, 1, 10, &[3, 1, 2]));
        store.push(session(2, 1, 20, &[3, 3]));
        let mut cfg = toy_config();
        cfg.hidden = 4;
        cfg.embed = 4;
        let mut model = DgRec::<f64>::new(cfg, 4, 4).unwrap();
        zero_all(&mut model);
        let s = session(0, 2, 100, &[0, 1, 2, 3]);
        let ctx = SocialContext { graph: &graph, history: &store };
        let mut tape = Tape::with_params(&model.params);
        let mut r = rng::stream(0, 0);
        let mut d = rng::stream(0, 1);
        let (loss, n) = model.arch.session_loss(&mut tape, &s, ctx, &mut r, &mut d, false).unwrap().unwrap();
        assert_eq!(n, 3);
        assert_abs_diff_eq!(tape.value(loss).item() / n as f64, 4f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(4f64.ln(), 1.3863, epsilon = 1e-4);
    }

    #[test]
    fn raising_target_logit_lowers_loss() {
        let (graph, store) = toy_world();
        let mut model = DgRec::<f64>::new(toy_config(), 4, 6).unwrap();
        let s = session(0, 2, 100, &[2, 3]);
        let ctx = SocialContext { graph: &graph, history: &store };
        let pass_of = |m: &DgRec<f64>| {
            let mut tape = Tape::with_params(&m.params);
            let pass = m
                .arch
                .session_pass(&mut tape, &s, ctx, &mut rng::stream(1, 4), &mut rng::stream(1, 5), false)
                .unwrap()
                .unwrap();
            let logits = tape.value(pass.logits).clone();
            let h_hat = tape.value(pass.h_hat).clone();
            (logits, h_hat)
        };
        let nll = |logits: &Tensor<f64>| -log_softmax(logits.row_slice(0))[3];
        let (before, h_hat) = pass_of(&model);
        // z_3 += ĥ/|ĥ|² raises the target logit by exactly one.
        let norm2: f64 = h_hat.data().iter().map(|x| x * x).sum();
        let z = model.arch.ids.output;
        let mut zt = model.params.get(z).clone();
        for c in 0..zt.cols() {
            zt.set(3, c, zt.get(3, c) + h_hat.get(0, c) / norm2);
        }
        model.params.set(z, zt).unwrap();
        let (after, _) = pass_of(&model);
        assert_abs_diff_eq!(after.get(0, 3) - before.get(0, 3), 1.0, epsilon = 1e-9);
        assert!(nll(&after) < nll(&before));
    }

    #[test]
    fn block_identity_head_returns_session_state() {
        let mut model = DgRec::<f64>::new(toy_config(), 4, 6).unwrap();
        let mut w2 = Tensor::zeros(&[5, 10]);
        for i in 0..5 {
            w2.set(i, i, 1.0);
        }
        model.params.set(model.arch.ids.head, w2).unwrap();
        let mut tape = Tape::with_params(&model.params);
        let h_n = tape.constant(Tensor::from_rows(&[&[1.0, -2.0, 3.0, 0.5, 0.0]]).unwrap());
        let h_l = tape.constant(Tensor::from_rows(&[&[9.0, 9.0, 9.0, 9.0, 9.0]]).unwrap());
        let out = model.arch.final_representation(&mut tape, h_n, h_l).unwrap();
        assert_eq!(tape.value(out), tape.value(h_n));
    }

    #[test]
    fn ablation_modes_zero_their_slot() {
        let mut cfg = toy_config();
        cfg.mode = Mode::SelfOnly;
        let model = DgRec::<f64>::new(cfg.clone(), 4, 6).unwrap();
        let mut tape = Tape::with_params(&model.params);
        let h_n = tape.constant(Tensor::from_rows(&[&[1.0, -2.0, 3.0, 0.5, 0.0]]).unwrap());
        let a = tape.constant(Tensor::from_rows(&[&[9.0, 1.0, 9.0, 9.0, 9.0]]).unwrap());
        let b = tape.constant(Tensor::from_rows(&[&[-4.0, 0.0, 2.0, 1.0, 7.0]]).unwrap());
        let oa = model.arch.final_representation(&mut tape, h_n, a).unwrap();
        let ob = model.arch.final_representation(&mut tape, h_n, b).unwrap();
        assert_eq!(tape.value(oa), tape.value(ob));

        cfg.mode = Mode::SocialOnly;
        let model = DgRec::<f64>::new(cfg, 4, 6).unwrap();
        let mut tape = Tape::with_params(&model.params);
        let x = tape.constant(Tensor::from_rows(&[&[1.0, -2.0, 3.0, 0.5, 0.0]]).unwrap());
        let y = tape.constant(Tensor::from_rows(&[&[0.0, 5.0, -3.0, 0.5, 2.0]]).unwrap());
        let h_l = tape.constant(Tensor::from_rows(&[&[9.0, 1.0, 9.0, 9.0, 9.0]]).unwrap());
        let ox = model.arch.final_representation(&mut tape, x, h_l).unwrap();
        let oy = model.arch.final_representation(&mut tape, y, h_l).unwrap();
        assert_eq!(tape.value(ox), tape.value(oy));
    }

    #[test]
    fn zero_head_gives_uniform_probabilities() {
        let (graph, store) = toy_world();
        let mut model = DgRec::<f64>::new(toy_config(), 4, 6).unwrap();
        let w2 = model.arch.ids.head;
        model.params.set(w2, Tensor::zeros(&[5, 10])).unwrap();
        let ctx = SocialContext { graph: &graph, history: &store };
        let (rows, traces) = model.predict_session(&session(0, 2, 100, &[2, 3, 4]), ctx, &mut rng::stream(3, 4)).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(traces.len(), 2);
        for row in rows {
            let total: f64 = row.iter().map(|x| x.exp()).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            for x in row {
                assert_abs_diff_eq!(x.exp(), 1.0 / 6.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn friend_features_are_cached_per_session() {
        let (graph, store) = toy_world();
        let model = DgRec::<f64>::new(toy_config(), 4, 6).unwrap();
        let ctx = SocialContext { graph: &graph, history: &store };
        let s = session(0, 2, 100, &[2, 3, 4, 5, 1]);
        let mut tape = Tape::with_params(&model.params);
        let pass = model
            .arch
            .session_pass(&mut tape, &s, ctx, &mut rng::stream(2, 4), &mut rng::stream(2, 5), false)
            .unwrap()
            .unwrap();
        assert_eq!(pass.positions(), 4);
        assert!(!pass.cache.is_empty());
        for u in 1..4 {
            let u = UserIndex(u);
            if pass.cache.misses(u) > 0 {
                assert_eq!(pass.cache.misses(u), 1);
                assert_eq!(pass.cache.hits(u), pass.positions() - 1);
            }
        }
        // 1 + 2 + 4 tree nodes per position.
        assert_eq!(pass.nodes_touched, 4 * 7);
    }

    #[test]
    fn self_only_ignores_the_graph() {
        let (graph, store) = toy_world();
        let mut cfg = toy_config();
        cfg.mode = Mode::SelfOnly;
        let model = DgRec::<f64>::new(cfg, 4, 6).unwrap();
        let other = SocialGraph::from_edges(4, [(UserIndex(0), UserIndex(3)), (UserIndex(1), UserIndex(2))]).unwrap();
        let s = session(0, 2, 100, &[2, 3, 4]);
        let a = model.predict_session(&s, SocialContext { graph: &graph, history: &store }, &mut rng::stream(1, 4)).unwrap();
        let b = model.predict_session(&s, SocialContext { graph: &other, history: &store }, &mut rng::stream(1, 4)).unwrap();
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn two_item_vocab_is_memorised() {
        let (graph, store) = toy_world();
        let mut cfg = toy_config();
        cfg.fanouts = vec![2, 2];
        let mut model = DgRec::<f64>::new(cfg, 4, 2).unwrap();
        let s = session(0, 2, 100, &[0, 1]);
        let ctx = SocialContext { graph: &graph, history: &SessionStore::new() };
        let _ = store;
        let mut adam = Adam::new(AdamConfig::default(), &model.params);
        let mut last = f64::INFINITY;
        for step in 0..300u64 {
            let grads = {
                let mut tape = Tape::with_params(&model.params);
                let (loss, _) = model
                    .arch
                    .session_loss(&mut tape, &s, ctx, &mut rng::stream(step, 4), &mut rng::stream(step, 5), true)
                    .unwrap()
                    .unwrap();
                last = tape.value(loss).item();
                tape.backward(loss).unwrap().param_grads(&model.params)
            };
            adam.step(&mut model.params, &grads).unwrap();
        }
        assert!(last < 0.05, "loss after 300 steps: {last}");
    }

    #[test]
    fn checkpoint_shapes_are_validated() {
        let model = DgRec::<f64>::new(toy_config(), 4, 6).unwrap();
        let again = DgRec::from_params(toy_config(), 4, 6, model.params.clone()).unwrap();
        assert_eq!(again.arch.ids, model.arch.ids);
        assert!(matches!(
            DgRec::from_params(toy_config(), 4, 7, model.params.clone()),
            Err(Error::Mismatch(_))
        ));
    }
}
