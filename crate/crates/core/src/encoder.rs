//! Shared LSTM session encoder and friend representations.
//!
//! Vectors are `1×n` rows, so a weight `W` of shape `out×in` applied to a
//! stack of inputs `X` (one per row) is `X·Wᵀ`, recorded as
//! [`Tape::matmul_nt`].

use std::collections::HashMap;

use rand::Rng;

use crate::ingest::{ItemIndex, UserIndex};
use crate::tensor::{glorot_uniform, ParamId, ParamStore, Real, Tape, Tensor, TensorError, Var};
use crate::{Error, Result};

/// Gate weights `hidden×(hidden+embed)` acting on `[h_{n-1}, i_n]`, plus
/// `1×hidden` biases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmParams {
    pub w_x: ParamId,
    pub w_f: ParamId,
    pub w_o: ParamId,
    pub w_c: ParamId,
    pub b_x: ParamId,
    pub b_f: ParamId,
    pub b_o: ParamId,
    pub b_c: ParamId,
    pub hidden: usize,
    pub embed: usize,
}

impl LstmParams {
    /// Registers Glorot-initialised weights and zero biases under `prefix/`.
    pub fn register<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        prefix: &str,
        hidden: usize,
        embed: usize,
        rng: &mut R,
    ) -> Self {
        let mut w = |name: &str| store.add(format!("{prefix}/{name}"), glorot_uniform(hidden, hidden + embed, rng));
        let (w_x, w_f, w_o, w_c) = (w("w_x"), w("w_f"), w("w_o"), w("w_c"));
        let mut b = |name: &str| store.add(format!("{prefix}/{name}"), Tensor::zeros(&[1, hidden]));
        let (b_x, b_f, b_o, b_c) = (b("b_x"), b("b_f"), b("b_o"), b("b_c"));
        Self {
            w_x,
            w_f,
            w_o,
            w_c,
            b_x,
            b_f,
            b_o,
            b_c,
            hidden,
            embed,
        }
    }

    /// Looks the parameters up by name under `prefix/`.
    pub fn find<T: Real>(store: &ParamStore<T>, prefix: &str) -> Result<Self> {
        let get = |name: &str| {
            store
                .id(&format!("{prefix}/{name}"))
                .ok_or_else(|| Error::Mismatch(format!("missing parameter {prefix}/{name}")))
        };
        let w_x = get("w_x")?;
        let shape = store.get(w_x).shape().to_vec();
        let hidden = shape[0];
        let embed = shape.get(1).copied().unwrap_or(0).saturating_sub(hidden);
        Ok(Self {
            w_x,
            w_f: get("w_f")?,
            w_o: get("w_o")?,
            w_c: get("w_c")?,
            b_x: get("b_x")?,
            b_f: get("b_f")?,
            b_o: get("b_o")?,
            b_c: get("b_c")?,
            hidden,
            embed,
        })
    }

    /// Records the parameter leaves on `tape`.
    pub fn vars<T: Real>(&self, tape: &mut Tape<'_, T>) -> Result<LstmVars> {
        Ok(LstmVars {
            w: [
                tape.param(self.w_x)?,
                tape.param(self.w_f)?,
                tape.param(self.w_o)?,
                tape.param(self.w_c)?,
            ],
            b: [
                tape.param(self.b_x)?,
                tape.param(self.b_f)?,
                tape.param(self.b_o)?,
                tape.param(self.b_c)?,
            ],
            hidden: self.hidden,
        })
    }
}

/// LSTM parameters as tape nodes, in gate order input, forget, output,
/// candidate.
#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    pub w: [Var; 4],
    pub b: [Var; 4],
    pub hidden: usize,
}

/// One recurrence step for a stack of `B` sequences: `x` is `B×embed`,
/// `h_prev` and `c_prev` are `B×hidden`.
///
/// ```text
/// x_n = σ(W_x[h_{n-1}, i_n] + b_x)
/// f_n = σ(W_f[h_{n-1}, i_n] + b_f)
/// o_n = σ(W_o[h_{n-1}, i_n] + b_o)
/// c̃_n = tanh(W_c[h_{n-1}, i_n] + b_c)
/// c_n = f_n ⊙ c_{n-1} + x_n ⊙ c̃_n
/// h_n = o_n ⊙ tanh(c_n)
/// ```
pub fn lstm_step<T: Real>(
    tape: &mut Tape<'_, T>,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    p: &LstmVars,
) -> Result<(Var, Var)> {
    let z = tape.concat_cols(&[h_prev, x])?;
    let mut pre = [z; 4];
    for g in 0..4 {
        let lin = tape.matmul_nt(z, p.w[g])?;
        pre[g] = tape.add_row(lin, p.b[g])?;
    }
    let input = tape.sigmoid(pre[0])?;
    let forget = tape.sigmoid(pre[1])?;
    let output = tape.sigmoid(pre[2])?;
    let candidate = tape.tanh(pre[3])?;
    let kept = tape.mul(forget, c_prev)?;
    let written = tape.mul(input, candidate)?;
    let c = tape.add(kept, written)?;
    let tc = tape.tanh(c)?;
    let h = tape.mul(output, tc)?;
    Ok((h, c))
}

/// Every prefix state `h_1..h_n` of one session, each `1×hidden`, starting
/// from `h_0 = c_0 = 0`.
pub fn encode_session<T: Real>(
    tape: &mut Tape<'_, T>,
    item_table: Var,
    items: &[ItemIndex],
    p: &LstmVars,
) -> Result<Vec<Var>> {
    if items.is_empty() {
        return Err(Error::Empty("session to encode"));
    }
    let mut h = tape.zeros(1, p.hidden);
    let mut c = h;
    let mut states = Vec::with_capacity(items.len());
    for item in items {
        let x = tape.embedding_lookup(item_table, &[item.idx()])?;
        (h, c) = lstm_step(tape, x, h, c, p)?;
        states.push(h);
    }
    Ok(states)
}

/// Final states of several sessions as a `B×hidden` matrix, row `j` for
/// `sessions[j]`. Sessions of equal length are stepped together.
pub fn encode_final_states<T: Real>(
    tape: &mut Tape<'_, T>,
    item_table: Var,
    sessions: &[&[ItemIndex]],
    p: &LstmVars,
) -> Result<Var> {
    if sessions.is_empty() {
        return Err(Error::Empty("sessions to encode"));
    }
    if sessions.iter().any(|s| s.is_empty()) {
        return Err(Error::Empty("session to encode"));
    }
    let mut by_len: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut order: Vec<usize> = (0..sessions.len()).collect();
    order.sort_by_key(|&j| sessions[j].len());
    for j in order {
        match by_len.last_mut() {
            Some((len, group)) if *len == sessions[j].len() => group.push(j),
            _ => by_len.push((sessions[j].len(), vec![j])),
        }
    }

    let mut blocks = Vec::with_capacity(by_len.len());
    let mut row_of = vec![0; sessions.len()];
    let mut next_row = 0;
    for (len, group) in &by_len {
        let mut h = tape.zeros(group.len(), p.hidden);
        let mut c = h;
        for pos in 0..*len {
            let idx: Vec<usize> = group.iter().map(|&j| sessions[j][pos].idx()).collect();
            let x = tape.embedding_lookup(item_table, &idx)?;
            (h, c) = lstm_step(tape, x, h, c, p)?;
        }
        for &j in group {
            row_of[j] = next_row;
            next_row += 1;
        }
        blocks.push(h);
    }
    let stacked = if blocks.len() == 1 { blocks[0] } else { tape.concat_rows(&blocks)? };
    if row_of.iter().enumerate().all(|(j, &r)| j == r) {
        Ok(stacked)
    } else {
        Ok(tape.gather_rows(stacked, &row_of)?)
    }
}

/// Long-term representation of user `k`: row `k` of the user table.
pub fn friend_long_term<T: Real>(tape: &mut Tape<'_, T>, user_table: Var, k: UserIndex) -> Result<Var> {
    let rows = tape.shape(user_table)[0];
    if k.idx() >= rows {
        return Err(Error::OutOfRange {
            what: "user",
            index: k.idx(),
            len: rows,
        });
    }
    Ok(tape.embedding_lookup(user_table, &[k.idx()])?)
}

/// Short-term representation of a friend: the final state of `session`,
/// or zeros when the friend has no earlier session.
pub fn friend_short_term<T: Real>(
    tape: &mut Tape<'_, T>,
    item_table: Var,
    session: Option<&[ItemIndex]>,
    p: &LstmVars,
) -> Result<Var> {
    match session {
        Some(items) => Ok(*encode_session(tape, item_table, items, p)?.last().expect("non-empty")),
        None => Ok(tape.zeros(1, p.hidden)),
    }
}

/// Which friend signals reach the fusion layer. Excluded signals are
/// replaced by zeros so the fusion weight keeps its shape.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FriendMode {
    #[default]
    Both,
    ShortOnly,
    LongOnly,
}

/// `ReLU(W_1 [s_s; s_l])` row-wise for stacks of short- and long-term rows.
pub fn combine_friend<T: Real>(
    tape: &mut Tape<'_, T>,
    short: Var,
    long: Var,
    w1: Var,
    mode: FriendMode,
) -> Result<Var> {
    let (rs, cs) = tape.value(short).dims2("combine_friend")?;
    let (rl, cl) = tape.value(long).dims2("combine_friend")?;
    if rs != rl {
        return Err(TensorError::ShapeMismatch {
            op: "combine_friend",
            lhs: vec![rs, cs],
            rhs: vec![rl, cl],
        }
        .into());
    }
    let short = if mode == FriendMode::LongOnly { tape.zeros(rs, cs) } else { short };
    let long = if mode == FriendMode::ShortOnly { tape.zeros(rl, cl) } else { long };
    let joined = tape.concat_cols(&[short, long])?;
    let lin = tape.matmul_nt(joined, w1)?;
    Ok(tape.relu(lin)?)
}

/// Friend representations computed once and reused for every position of
/// one session.
#[derive(Debug, Default)]
pub struct FriendCache {
    table: Option<Var>,
    rows: HashMap<UserIndex, usize>,
    hits: HashMap<UserIndex, usize>,
    misses: HashMap<UserIndex, usize>,
}

impl FriendCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Row indices of `users` in the cached feature table, computing the
    /// missing ones with `compute`, which receives the distinct missing
    /// users and must return one row per user.
    pub fn lookup<T: Real>(
        &mut self,
        tape: &mut Tape<'_, T>,
        users: &[UserIndex],
        compute: impl FnOnce(&mut Tape<'_, T>, &[UserIndex]) -> Result<Var>,
    ) -> Result<Vec<usize>> {
        let mut missing = Vec::new();
        for &u in users {
            if self.rows.contains_key(&u) || missing.contains(&u) {
                continue;
            }
            missing.push(u);
        }
        let mut seen = std::collections::HashSet::new();
        for &u in users {
            if seen.insert(u) && !missing.contains(&u) {
                *self.hits.entry(u).or_default() += 1;
            }
        }
        if !missing.is_empty() {
            let block = compute(tape, &missing)?;
            let start = self.table.map_or(0, |t| tape.shape(t)[0]);
            self.table = Some(match self.table {
                Some(t) => tape.concat_rows(&[t, block])?,
                None => block,
            });
            for (j, &u) in missing.iter().enumerate() {
                self.rows.insert(u, start + j);
                *self.misses.entry(u).or_default() += 1;
            }
        }
        Ok(users.iter().map(|u| self.rows[u]).collect())
    }

    /// The feature table (`rows × hidden`), once anything is cached.
    pub fn table(&self) -> Option<Var> {
        self.table
    }

    pub fn hits(&self, u: UserIndex) -> usize {
        self.hits.get(&u).copied().unwrap_or(0)
    }

    pub fn misses(&self, u: UserIndex) -> usize {
        self.misses.get(&u).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;

    fn setup(hidden: usize, embed: usize, items: usize, seed: u64) -> (ParamStore<f64>, LstmParams, ParamId) {
        let mut r = rng::stream(seed, rng::streams::INIT);
        let mut store = ParamStore::new();
        let table = store.add("items", glorot_uniform(items, embed, &mut r));
        let p = LstmParams::register(&mut store, "lstm", hidden, embed, &mut r);
        (store, p, table)
    }

    fn zero_params(store: &mut ParamStore<f64>) {
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let shape = store.get(id).shape().to_vec();
            if store.name(id).starts_with("lstm") {
                store.set(id, Tensor::zeros(&shape)).unwrap();
            }
        }
    }

    #[test]
    fn zero_weights_zero_state_gives_zero() {
        let (mut store, p, _) = setup(3, 2, 1, 0);
        zero_params(&mut store);
        let mut tape = Tape::with_params(&store);
        let v = p.vars(&mut tape).unwrap();
        let x = tape.constant(Tensor::row(vec![0.7, -2.0]));
        let h0 = tape.zeros(1, 3);
        let (h, c) = lstm_step(&mut tape, x, h0, h0, &v).unwrap();
        assert!(tape.value(h).data().iter().all(|&x| x == 0.0));
        assert!(tape.value(c).data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_weights_unit_cell_hand_value() {
        // Gates are all σ(0) = 1/2, candidate tanh(0) = 0:
        // c = 0.5·1 + 0.5·0 = 0.5, h = 0.5·tanh(0.5).
        let (mut store, p, _) = setup(1, 1, 1, 0);
        zero_params(&mut store);
        let mut tape = Tape::with_params(&store);
        let v = p.vars(&mut tape).unwrap();
        let x = tape.constant(Tensor::row(vec![3.0]));
        let h0 = tape.zeros(1, 1);
        let c0 = tape.constant(Tensor::row(vec![1.0]));
        let (h, c) = lstm_step(&mut tape, x, h0, c0, &v).unwrap();
        assert_abs_diff_eq!(tape.value(c).item(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(tape.value(h).item(), 0.5 * 0.5f64.tanh(), epsilon = 1e-15);
        assert_abs_diff_eq!(tape.value(h).item(), 0.23105, epsilon = 1e-5);
    }

    #[test]
    fn gates_lie_in_unit_interval() {
        let (store, p, table) = setup(4, 3, 5, 7);
        let mut tape = Tape::with_params(&store);
        let v = p.vars(&mut tape).unwrap();
        let t = tape.param(table).unwrap();
        let x = tape.embedding_lookup(t, &[2]).unwrap();
        let h0 = tape.constant(Tensor::row(vec![0.3, -0.9, 1.2, 0.0]));
        let z = tape.concat_cols(&[h0, x]).unwrap();
        for g in 0..3 {
            let lin = tape.matmul_nt(z, v.w[g]).unwrap();
            let pre = tape.add_row(lin, v.b[g]).unwrap();
            let gate = tape.sigmoid(pre).unwrap();
            assert!(tape.value(gate).data().iter().all(|&x| x > 0.0 && x < 1.0));
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let (store, p, _) = setup(3, 2, 1, 0);
        let mut tape = Tape::with_params(&store);
        let v = p.vars(&mut tape).unwrap();
        let x = tape.constant(Tensor::row(vec![1.0, 2.0, 3.0]));
        let h0 = tape.zeros(1, 3);
        assert!(lstm_step(&mut tape, x, h0, h0, &v).is_err());
    }

    #[test]
    fn single_item_session_is_one_step() {
        let (store, p, table) = setup(4, 3, 5, 1);
        let mut tape = Tape::with_params(&store);
        let v = p.vars(&mut tape).unwrap();
        let t = tape.param(table).unwrap();
        let states = encode_session(&mut tape, t, &[ItemIndex(3)], &v).unwrap();
        let x = tape.embedding_lookup(t, &[3]).unwrap();
        let h0 = tape.zeros(1, 4);
        let (h, _) = lstm_step(&mut tape, x, h0, h0, &v).unwrap();
        assert_eq!(states.len(), 1);
        assert_eq!(tape.value(states[0]), tape.value(h));
    }

    #[test]
    fn prefix_property_and_order_sensitivity() {
        let (store, p, table) = setup(4, 3, 6, 2);
        let mut tape = Tape::with_params(&store);
        let v = p.vars(&mut tape).unwrap();
        let t = tape.param(table).unwrap();
        let s: Vec<ItemIndex> = [0, 4, 2, 5, 1].map(ItemIndex).to_vec();
        let full = encode_session(&mut tape, t, &s, &v).unwrap();
        for k in 1..=s.len() {
            let pre = encode_session(&mut tape, t, &s[..k], &v).unwrap();
            assert_eq!(tape.value(pre[k - 1]), tape.value(full[k - 1]));
        }
        let mut rev = s.clone();
        rev.reverse();
        let back = encode_session(&mut tape, t, &rev, &v).unwrap();
        assert!(tape.value(back[4]).max_abs_diff(tape.value(full[4])) > 1e-6);
        assert!(encode_session(&mut tape, t, &[], &v).is_err());
    }

    #[test]
    fn batched_final_states_match_single_encoding() {
        let (store, p, table) = setup(4, 3, 6, 3);
        let mut tape = Tape::with_params(&store);
        let v = p.vars(&mut tape).unwrap();
        let t = tape.param(table).unwrap();
        let sessions: Vec<Vec<ItemIndex>> = vec![
            [1, 2, 3].map(ItemIndex).to_vec(),
            vec![ItemIndex(5)],
            [0, 4, 2].map(ItemIndex).to_vec(),
            [3, 3].map(ItemIndex).to_vec(),
        ];
        let refs: Vec<&[ItemIndex]> = sessions.iter().map(Vec::as_slice).collect();
        let batch = encode_final_states(&mut tape, t, &refs, &v).unwrap();
        for (j, s) in sessions.iter().enumerate() {
            let single = *encode_session(&mut tape, t, s, &v).unwrap().last().unwrap();
            let a = tape.value(batch).row_slice(j).to_vec();
            let b = tape.value(single).row_slice(0).to_vec();
            for (x, y) in a.iter().zip(&b) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn friend_without_prior_session_is_zero() {
        let (store, p, table) = setup(4, 3, 6, 4);
        let mut tape = Tape::with_params(&store);
        let v = p.vars(&mut tape).unwrap();
        let t = tape.param(table).unwrap();
        let z = friend_short_term(&mut tape, t, None, &v).unwrap();
        assert!(tape.value(z).data().iter().all(|&x| x == 0.0));
        let s = [ItemIndex(1), ItemIndex(2)];
        let a = friend_short_term(&mut tape, t, Some(&s), &v).unwrap();
        let b = friend_short_term(&mut tape, t, Some(&s), &v).unwrap();
        let direct = encode_session(&mut tape, t, &s, &v).unwrap();
        assert_eq!(tape.value(a), tape.value(b));
        assert_eq!(tape.value(a), tape.value(direct[1]));
    }

    #[test]
    fn long_term_lookup_gradient_is_one_hot() {
        let mut store = ParamStore::<f64>::new();
        let users = store.add("users", Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]).unwrap());
        let mut tape = Tape::with_params(&store);
        let table = tape.param(users).unwrap();
        let a = friend_long_term(&mut tape, table, UserIndex(1)).unwrap();
        let b = friend_long_term(&mut tape, table, UserIndex(1)).unwrap();
        assert_eq!(tape.value(a), tape.value(b));
        assert!(matches!(
            friend_long_term(&mut tape, table, UserIndex(3)),
            Err(Error::OutOfRange { .. })
        ));
        let loss = tape.sum(a).unwrap();
        let g = tape.backward(loss).unwrap().param_grads(&store);
        assert_eq!(g.get(users).data(), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn fusion_block_identity_and_modes() {
        let mut tape = Tape::<f64>::new();
        let short = tape.constant(Tensor::from_rows(&[&[1.0, -2.0]]).unwrap());
        let long = tape.constant(Tensor::from_rows(&[&[5.0, 7.0]]).unwrap());
        let w1 = tape.constant(Tensor::from_rows(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]]).unwrap());
        let s = combine_friend(&mut tape, short, long, w1, FriendMode::Both).unwrap();
        assert_eq!(tape.value(s).data(), &[1.0, 0.0]);
        let zero = tape.zeros(1, 2);
        let s0 = combine_friend(&mut tape, zero, zero, w1, FriendMode::Both).unwrap();
        assert_eq!(tape.value(s0).data(), &[0.0, 0.0]);

        let w_long = tape.constant(Tensor::from_rows(&[&[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]).unwrap());
        let short_only = combine_friend(&mut tape, short, long, w_long, FriendMode::ShortOnly).unwrap();
        let long_only = combine_friend(&mut tape, short, long, w_long, FriendMode::LongOnly).unwrap();
        assert_eq!(tape.value(short_only).data(), &[0.0, 0.0]);
        assert_eq!(tape.value(long_only).data(), &[5.0, 7.0]);
        assert_eq!(tape.shape(short_only), tape.shape(s));
    }

    #[test]
    fn cache_counts_hits_after_first_lookup() {
        let mut tape = Tape::<f64>::new();
        let mut cache = FriendCache::new();
        let users = [UserIndex(2), UserIndex(5), UserIndex(2)];
        for _ in 0..4 {
            let rows = cache
                .lookup(&mut tape, &users, |tape, missing| Ok(tape.zeros(missing.len(), 3)))
                .unwrap();
            assert_eq!(rows, vec![0, 1, 0]);
        }
        assert_eq!(cache.misses(UserIndex(2)), 1);
        assert_eq!(cache.hits(UserIndex(2)), 3);
        assert_eq!(cache.hits(UserIndex(5)), 3);
        assert_eq!(cache.len(), 2);
    }
}
