//! Append-only computation tape.
//!
//! Every forward op pushes one node holding its output value and the ids of
//! its inputs. Because a node can only reference nodes created before it, the
//! node list is already in topological order and [`Tape::backward`] simply
//! walks it in reverse, accumulating gradients additively.

use rand::Rng;

use super::params::{ParamGrads, ParamId, ParamStore};
use super::{Real, Tensor, TensorError};

type Result<T> = std::result::Result<T, TensorError>;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Neg(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRow(Var, usize),
    GatherRows(Var, Vec<usize>),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Log(Var),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    Pick(Var, Vec<usize>),
    Sum(Var),
    Dropout(Var, Vec<T>),
}

struct Node<T> {
    // `None` for parameter leaves, whose value lives in the store.
    value: Option<Tensor<T>>,
    op: Op<T>,
}

/// Recording tape for one forward/backward pass.
pub struct Tape<'p, T: Real> {
    params: Option<&'p ParamStore<T>>,
    param_vars: Vec<Option<Var>>,
    nodes: Vec<Node<T>>,
    backward_done: bool,
    check_finite: bool,
}

impl<T: Real> Default for Tape<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p, T: Real> Tape<'p, T> {
    /// A tape without parameters; only constants can be recorded.
    pub fn new() -> Self {
        Self {
            params: None,
            param_vars: Vec::new(),
            nodes: Vec::new(),
            backward_done: false,
            check_finite: cfg!(debug_assertions),
        }
    }

    /// A tape whose parameter leaves read from `params`.
    pub fn with_params(params: &'p ParamStore<T>) -> Self {
        Self {
            params: Some(params),
            param_vars: vec![None; params.len()],
            ..Self::new()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self
                .params
                .expect("param node without store")
                .get(*id),
            _ => unreachable!("node without value"),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    /// Number of distinct parameter leaves recorded so far.
    pub fn param_leaf_count(&self) -> usize {
        self.param_vars.iter().filter(|v| v.is_some()).count()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, name: &'static str) -> Result<Var> {
        if self.check_finite && !value.all_finite() {
            return Err(TensorError::NonFinite(name));
        }
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn matrix(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        self.value(v).dims2(op)
    }

    fn mismatch(&self, op: &'static str, a: Var, b: Var) -> TensorError {
        TensorError::ShapeMismatch {
            op,
            lhs: self.shape(a).to_vec(),
            rhs: self.shape(b).to_vec(),
        }
    }

    // ---- leaves ----

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    /// A `rows × cols` constant of zeros.
    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.constant(Tensor::zeros(&[rows, cols]))
    }

    /// The leaf for parameter `id`; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Result<Var> {
        let store = self.params.ok_or(TensorError::NoParams)?;
        if id.0 >= store.len() {
            return Err(TensorError::IndexOutOfRange {
                op: "param",
                index: id.0,
                len: store.len(),
            });
        }
        if let Some(v) = self.param_vars[id.0] {
            return Ok(v);
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        Ok(v)
    }

    // ---- linear algebra ----

    /// `a · b` for `a: m×k`, `b: k×n`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.matrix(a, "matmul")?;
        let (k2, n) = self.matrix(b, "matmul")?;
        if k != k2 {
            return Err(self.mismatch("matmul", a, b));
        }
        let mut out = vec![T::zero(); m * n];
        gemm_nn(self.value(a).data(), self.value(b).data(), m, k, n, &mut out);
        self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), "matmul")
    }

    /// `a · bᵀ` for `a: m×k`, `b: n×k`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.matrix(a, "matmul_nt")?;
        let (n, k2) = self.matrix(b, "matmul_nt")?;
        if k != k2 {
            return Err(self.mismatch("matmul_nt", a, b));
        }
        let mut out = vec![T::zero(); m * n];
        gemm_nt(self.value(a).data(), self.value(b).data(), m, k, n, &mut out);
        self.push(Tensor::matrix(m, n, out)?, Op::MatMulNt(a, b), "matmul_nt")
    }

    /// `Σ_j w_j · v_j` for weights `1×m` and vectors stacked as `m×d`.
    pub fn weighted_sum(&mut self, weights: Var, vectors: Var) -> Result<Var> {
        let (r, m) = self.matrix(weights, "weighted_sum")?;
        let (m2, _) = self.matrix(vectors, "weighted_sum")?;
        if r != 1 || m != m2 {
            return Err(self.mismatch("weighted_sum", weights, vectors));
        }
        self.matmul(weights, vectors)
    }

    // ---- elementwise ----

    fn zip_with(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(T, T) -> T,
        op: Op<T>,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(self.mismatch(name, a, b));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(out, op, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds the `1×n` row `b` to every row of `a: m×n`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, n) = self.matrix(a, "add_row")?;
        let (r, n2) = self.matrix(b, "add_row")?;
        if r != 1 || n != n2 {
            return Err(self.mismatch("add_row", a, b));
        }
        let bias = self.value(b).data();
        let mut data = self.value(a).data().to_vec();
        for row in data.chunks_mut(n) {
            for (x, &y) in row.iter_mut().zip(bias) {
                *x += y;
            }
        }
        self.push(Tensor::matrix(m, n, data)?, Op::AddRow(a, b), "add_row")
    }

    fn unary(&mut self, a: Var, name: &'static str, f: impl Fn(T) -> T, op: Op<T>) -> Result<Var> {
        let out = self.value(a).map(f);
        self.push(out, op, name)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let s = T::of(s);
        self.unary(a, "scale", |x| x * s, Op::Scale(a, s))
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.unary(a, "neg", |x| -x, Op::Neg(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, "sigmoid", sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, "tanh", |x| x.tanh(), Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, "relu", |x| x.max(T::zero()), Op::Relu(a))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary(a, "log", |x| x.ln(), Op::Log(a))
    }

    /// Inverted dropout: in training mode each entry is zeroed with
    /// probability `rate` and survivors are scaled by `1/(1-rate)`.
    /// Outside training, or at rate 0, this is the identity and records
    /// nothing.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        a: Var,
        rate: f64,
        rng: &mut R,
        train: bool,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::Invalid {
                op: "dropout",
                msg: format!("rate {rate} outside [0, 1)"),
            });
        }
        if !train || rate == 0.0 {
            return Ok(a);
        }
        let keep = T::of(1.0 / (1.0 - rate));
        let mask: Vec<T> = (0..self.value(a).numel())
            .map(|_| {
                if rng.gen::<f64>() < rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        let src = self.value(a);
        let data = src.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        let out = Tensor::new(src.shape().to_vec(), data)?;
        self.push(out, Op::Dropout(a, mask), "dropout")
    }

    // ---- structure ----

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(TensorError::Empty { op: "concat_cols" })?;
        let (m, _) = self.matrix(first, "concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.matrix(p, "concat_cols")?;
            if r != m {
                return Err(self.mismatch("concat_cols", first, p));
            }
            widths.push(c);
        }
        let n: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * n);
        for i in 0..m {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(i));
            }
        }
        self.push(
            Tensor::matrix(m, n, data)?,
            Op::ConcatCols(parts.to_vec()),
            "concat_cols",
        )
    }

    /// Vertical concatenation of matrices with equal column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(TensorError::Empty { op: "concat_rows" })?;
        let (_, n) = self.matrix(first, "concat_rows")?;
        let mut m = 0;
        for &p in parts {
            let (r, c) = self.matrix(p, "concat_rows")?;
            if c != n {
                return Err(self.mismatch("concat_rows", first, p));
            }
            m += r;
        }
        let mut data = Vec::with_capacity(m * n);
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        self.push(
            Tensor::matrix(m, n, data)?,
            Op::ConcatRows(parts.to_vec()),
            "concat_rows",
        )
    }

    /// Row `i` of `a` as a `1×n` matrix.
    pub fn slice_row(&mut self, a: Var, i: usize) -> Result<Var> {
        let (m, n) = self.matrix(a, "slice_row")?;
        if i >= m {
            return Err(TensorError::IndexOutOfRange {
                op: "slice_row",
                index: i,
                len: m,
            });
        }
        let row = self.value(a).row_slice(i).to_vec();
        self.push(Tensor::matrix(1, n, row)?, Op::SliceRow(a, i), "slice_row")
    }

    /// Rows `idx` of `a`, in order, duplicates allowed.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let (m, n) = self.matrix(a, "gather_rows")?;
        let src = self.value(a);
        let mut data = Vec::with_capacity(idx.len() * n);
        for &i in idx {
            if i >= m {
                return Err(TensorError::IndexOutOfRange {
                    op: "gather_rows",
                    index: i,
                    len: m,
                });
            }
            data.extend_from_slice(src.row_slice(i));
        }
        self.push(
            Tensor::matrix(idx.len(), n, data)?,
            Op::GatherRows(a, idx.to_vec()),
            "gather_rows",
        )
    }

    /// Embedding lookup: rows of a table, one per index.
    pub fn embedding_lookup(&mut self, table: Var, idx: &[usize]) -> Result<Var> {
        self.gather_rows(table, idx)
    }

    // ---- reductions ----

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.matrix(a, "softmax_rows")?;
        let mut data = self.value(a).data().to_vec();
        for row in data.chunks_mut(n.max(1)) {
            softmax_in_place(row);
        }
        self.push(Tensor::matrix(m, n, data)?, Op::SoftmaxRows(a), "softmax_rows")
    }

    /// Row-wise `log softmax`, stabilized by max subtraction.
    pub fn log_softmax_rows(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.matrix(a, "log_softmax_rows")?;
        let mut data = self.value(a).data().to_vec();
        for row in data.chunks_mut(n.max(1)) {
            let lse = log_sum_exp(row);
            for x in row.iter_mut() {
                *x -= lse;
            }
        }
        self.push(
            Tensor::matrix(m, n, data)?,
            Op::LogSoftmaxRows(a),
            "log_softmax_rows",
        )
    }

    /// Picks column `cols[i]` from row `i`, giving an `m×1` column.
    pub fn pick(&mut self, a: Var, cols: &[usize]) -> Result<Var> {
        let (m, n) = self.matrix(a, "pick")?;
        if cols.len() != m {
            return Err(TensorError::ShapeMismatch {
                op: "pick",
                lhs: vec![m, n],
                rhs: vec![cols.len()],
            });
        }
        let src = self.value(a);
        let mut data = Vec::with_capacity(m);
        for (i, &c) in cols.iter().enumerate() {
            if c >= n {
                return Err(TensorError::IndexOutOfRange {
                    op: "pick",
                    index: c,
                    len: n,
                });
            }
            data.push(src.get(i, c));
        }
        self.push(Tensor::matrix(m, 1, data)?, Op::Pick(a, cols.to_vec()), "pick")
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s: T = self.value(a).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(a), "sum")
    }

    /// Sign pattern of every ReLU input on the tape. Two forward passes with
    /// equal signatures lie on the same linear piece of every ReLU.
    pub fn relu_signature(&self) -> Vec<bool> {
        let mut sig = Vec::new();
        for node in &self.nodes {
            if let Op::Relu(a) = node.op {
                sig.extend(self.value(a).data().iter().map(|&x| x > T::zero()));
            }
        }
        sig
    }

    // ---- backward ----

    /// Reverse sweep from a scalar `loss`. May run once per tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        if self.backward_done {
            return Err(TensorError::BackwardTwice);
        }
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(TensorError::NonScalarLoss(lv.shape().to_vec()));
        }
        let seed = Tensor::full(lv.shape(), T::one());
        self.backward_done = true;

        let mut grads: Vec<Option<Tensor<T>>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(seed);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }

        Ok(Gradients {
            node_grads: grads,
            param_vars: self.param_vars.clone(),
        })
    }

    fn backprop_node(&self, i: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let out = self.nodes[i].value.as_ref();
        match &self.nodes[i].op {
            Op::Leaf | Op::Param(_) => {}
            &Op::MatMul(a, b) => {
                let (m, k) = dims(self.value(a));
                let n = self.value(b).cols();
                let ga = slot(grads, a, self.value(a));
                gemm_nt(g.data(), self.value(b).data(), m, n, k, ga.data_mut());
                let gb = slot(grads, b, self.value(b));
                gemm_tn(self.value(a).data(), g.data(), m, k, n, gb.data_mut());
            }
            &Op::MatMulNt(a, b) => {
                let (m, k) = dims(self.value(a));
                let n = self.value(b).rows();
                let ga = slot(grads, a, self.value(a));
                gemm_nn(g.data(), self.value(b).data(), m, n, k, ga.data_mut());
                let gb = slot(grads, b, self.value(b));
                gemm_tn(g.data(), self.value(a).data(), m, n, k, gb.data_mut());
            }
            &Op::Add(a, b) => {
                slot(grads, a, self.value(a)).add_assign(g);
                slot(grads, b, self.value(b)).add_assign(g);
            }
            &Op::AddRow(a, b) => {
                slot(grads, a, self.value(a)).add_assign(g);
                let n = g.cols();
                let gb = slot(grads, b, self.value(b)).data_mut();
                for row in g.data().chunks(n) {
                    for (acc, &x) in gb.iter_mut().zip(row) {
                        *acc += x;
                    }
                }
            }
            &Op::Mul(a, b) => {
                let (va, vb) = (self.value(a), self.value(b));
                let ga = slot(grads, a, va).data_mut();
                for ((acc, &d), &y) in ga.iter_mut().zip(g.data()).zip(vb.data()) {
                    *acc += d * y;
                }
                let gb = slot(grads, b, vb).data_mut();
                for ((acc, &d), &x) in gb.iter_mut().zip(g.data()).zip(va.data()) {
                    *acc += d * x;
                }
            }
            &Op::Scale(a, s) => {
                for (acc, &d) in slot(grads, a, self.value(a)).data_mut().iter_mut().zip(g.data()) {
                    *acc += d * s;
                }
            }
            &Op::Neg(a) => {
                for (acc, &d) in slot(grads, a, self.value(a)).data_mut().iter_mut().zip(g.data()) {
                    *acc -= d;
                }
            }
            Op::ConcatCols(parts) => {
                let n = g.cols();
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    let gp = slot(grads, p, self.value(p)).data_mut();
                    for (r, grow) in g.data().chunks(n).enumerate() {
                        for (acc, &d) in gp[r * w..(r + 1) * w].iter_mut().zip(&grow[offset..offset + w]) {
                            *acc += d;
                        }
                    }
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).numel();
                    let gp = slot(grads, p, self.value(p)).data_mut();
                    for (acc, &d) in gp.iter_mut().zip(&g.data()[offset..offset + len]) {
                        *acc += d;
                    }
                    offset += len;
                }
            }
            &Op::SliceRow(a, r) => {
                let n = g.cols();
                let ga = slot(grads, a, self.value(a)).data_mut();
                for (acc, &d) in ga[r * n..(r + 1) * n].iter_mut().zip(g.data()) {
                    *acc += d;
                }
            }
            Op::GatherRows(a, idx) => {
                let n = g.cols();
                let ga = slot(grads, *a, self.value(*a)).data_mut();
                for (j, &r) in idx.iter().enumerate() {
                    for (acc, &d) in ga[r * n..(r + 1) * n].iter_mut().zip(&g.data()[j * n..(j + 1) * n]) {
                        *acc += d;
                    }
                }
            }
            &Op::Sigmoid(a) => {
                let y = out.expect("value");
                let ga = slot(grads, a, self.value(a)).data_mut();
                for ((acc, &d), &s) in ga.iter_mut().zip(g.data()).zip(y.data()) {
                    *acc += d * s * (T::one() - s);
                }
            }
            &Op::Tanh(a) => {
                let y = out.expect("value");
                let ga = slot(grads, a, self.value(a)).data_mut();
                for ((acc, &d), &t) in ga.iter_mut().zip(g.data()).zip(y.data()) {
                    *acc += d * (T::one() - t * t);
                }
            }
            &Op::Relu(a) => {
                let va = self.value(a);
                let ga = slot(grads, a, va).data_mut();
                for ((acc, &d), &x) in ga.iter_mut().zip(g.data()).zip(va.data()) {
                    if x > T::zero() {
                        *acc += d;
                    }
                }
            }
            &Op::Log(a) => {
                let va = self.value(a);
                let ga = slot(grads, a, va).data_mut();
                for ((acc, &d), &x) in ga.iter_mut().zip(g.data()).zip(va.data()) {
                    *acc += d / x;
                }
            }
            &Op::SoftmaxRows(a) => {
                let y = out.expect("value");
                let n = y.cols().max(1);
                let ga = slot(grads, a, self.value(a)).data_mut();
                for ((grow, yrow), arow) in g.data().chunks(n).zip(y.data().chunks(n)).zip(ga.chunks_mut(n)) {
                    let dot: T = grow.iter().zip(yrow).map(|(&d, &s)| d * s).sum();
                    for ((acc, &d), &s) in arow.iter_mut().zip(grow).zip(yrow) {
                        *acc += s * (d - dot);
                    }
                }
            }
            &Op::LogSoftmaxRows(a) => {
                let y = out.expect("value");
                let n = y.cols().max(1);
                let ga = slot(grads, a, self.value(a)).data_mut();
                for ((grow, yrow), arow) in g.data().chunks(n).zip(y.data().chunks(n)).zip(ga.chunks_mut(n)) {
                    let total: T = grow.iter().copied().sum();
                    for ((acc, &d), &ls) in arow.iter_mut().zip(grow).zip(yrow) {
                        *acc += d - ls.exp() * total;
                    }
                }
            }
            Op::Pick(a, cols) => {
                let n = self.value(*a).cols();
                let ga = slot(grads, *a, self.value(*a)).data_mut();
                for (r, &c) in cols.iter().enumerate() {
                    ga[r * n + c] += g.data()[r];
                }
            }
            &Op::Sum(a) => {
                let d = g.item();
                for acc in slot(grads, a, self.value(a)).data_mut() {
                    *acc += d;
                }
            }
            Op::Dropout(a, mask) => {
                let ga = slot(grads, *a, self.value(*a)).data_mut();
                for ((acc, &d), &m) in ga.iter_mut().zip(g.data()).zip(mask) {
                    *acc += d * m;
                }
            }
        }
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients<T> {
    node_grads: Vec<Option<Tensor<T>>>,
    param_vars: Vec<Option<Var>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of the loss with respect to `v`, if `v` was reachable.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.node_grads.get(v.0).and_then(Option::as_ref)
    }

    /// Dense gradients for every parameter in `store`; parameters that were
    /// never recorded or are unreachable from the loss get zeros.
    pub fn param_grads(&self, store: &ParamStore<T>) -> ParamGrads<T> {
        let grads = store
            .iter()
            .map(|(id, _, value)| {
                self.param_vars
                    .get(id.index())
                    .copied()
                    .flatten()
                    .and_then(|v| self.wrt(v).cloned())
                    .unwrap_or_else(|| Tensor::zeros(value.shape()))
            })
            .collect();
        ParamGrads::from_vec(grads)
    }
}

fn slot<'g, T: Real>(
    grads: &'g mut [Option<Tensor<T>>],
    v: Var,
    value: &Tensor<T>,
) -> &'g mut Tensor<T> {
    grads[v.0].get_or_insert_with(|| Tensor::zeros(value.shape()))
}

fn dims<T: Real>(t: &Tensor<T>) -> (usize, usize) {
    (t.rows(), t.cols())
}

pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn log_sum_exp<T: Real>(row: &[T]) -> T {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    let s: T = row.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

pub(crate) fn softmax_in_place<T: Real>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in row.iter_mut() {
        *x = *x / total;
    }
}

/// `out += a · b`, `a: m×k`, `b: k×n`.
fn gemm_nn<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize, out: &mut [T]) {
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let x = a[i * k + p];
            if x == T::zero() {
                continue;
            }
            for (o, &y) in orow.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += x * y;
            }
        }
    }
}

/// `out += a · bᵀ`, `a: m×k`, `b: n×k`.
fn gemm_nt<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize, out: &mut [T]) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = T::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                acc += x * y;
            }
            out[i * n + j] += acc;
        }
    }
}

/// `out += aᵀ · b`, `a: m×k`, `b: m×n`, `out: k×n`.
fn gemm_tn<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize, out: &mut [T]) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let x = a[i * k + p];
            if x == T::zero() {
                continue;
            }
            for (o, &y) in out[p * n..(p + 1) * n].iter_mut().zip(brow) {
                *o += x * y;
            }
        }
    }
}
