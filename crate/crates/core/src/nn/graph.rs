//! Tape-based reverse-mode differentiation over [`Tensor`] values.

use std::collections::BTreeMap;

use super::{NnError, ParamId, ParamStore, Tensor};

/// Floor applied inside logarithms of probabilities.
pub const LOG_EPS: f64 = 1e-12;

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Sigmoid(Var),
    Abs(Var),
    Sin(Var),
    Cos(Var),
    Minimum(Var, Var),
    SmoothL1(Var, f64),
    Sum(Var),
    Mean(Var),
    SumCols(Var),
    MaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    PickCols(Var, Vec<usize>),
    SegmentMean {
        x: Var,
        seg: Vec<usize>,
        counts: Vec<usize>,
    },
    Bce {
        x: Var,
        labels: Tensor,
        pos_w: Tensor,
        neg_w: Tensor,
    },
    SoftmaxCe {
        x: Var,
        targets: Vec<usize>,
        probs: Tensor,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Parameter gradients produced by [`Graph::backward`].
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    grads: BTreeMap<ParamId, Tensor>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    /// Accumulates `other` into `self`, for gradients summed over several scenes.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (id, g) in other.iter() {
            match self.grads.get_mut(&id) {
                Some(t) => t.add_assign(g),
                None => {
                    self.grads.insert(id, g.clone());
                }
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.grads.values_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn shape_eq(&self, op: &'static str, a: Var, b: Var) -> Result<(), NnError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(NnError::shape(op, format!("{sa:?}"), format!("{sb:?}")));
        }
        Ok(())
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let v = self.value(x).map(f);
        self.push(v, op)
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var, NnError> {
        self.shape_eq(name, a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let t = Tensor::new(ta.rows(), ta.cols(), data)?;
        Ok(self.push(t, op))
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.rows() {
            return Err(NnError::shape(
                "matmul",
                format!("{} rows", ta.cols()),
                format!("{:?}", tb.shape()),
            ));
        }
        let v = ta.matmul(tb);
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    /// Adds a `1 x m` row to every row of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var, NnError> {
        let (tx, tb) = (self.value(x), self.value(b));
        if tb.rows() != 1 || tb.cols() != tx.cols() {
            return Err(NnError::shape(
                "add_bias",
                format!("[1, {}]", tx.cols()),
                format!("{:?}", tb.shape()),
            ));
        }
        let mut v = tx.clone();
        let m = tx.cols();
        if m > 0 {
            for row in v.data_mut().chunks_mut(m) {
                for (o, bb) in row.iter_mut().zip(tb.data()) {
                    *o += bb;
                }
            }
        }
        Ok(self.push(v, Op::AddBias(x, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary("minimum", a, b, f64::min, Op::Minimum(a, b))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        self.unary(x, |v| v * s, Op::Scale(x, s))
    }

    pub fn add_scalar(&mut self, x: Var, s: f64) -> Var {
        self.unary(x, |v| v + s, Op::AddScalar(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(x, f64::abs, Op::Abs(x))
    }

    pub fn sin(&mut self, x: Var) -> Var {
        self.unary(x, f64::sin, Op::Sin(x))
    }

    pub fn cos(&mut self, x: Var) -> Var {
        self.unary(x, f64::cos, Op::Cos(x))
    }

    pub fn smooth_l1(&mut self, x: Var, beta: f64) -> Var {
        self.unary(
            x,
            |v| {
                if v.abs() < beta {
                    0.5 * v * v / beta
                } else {
                    v.abs() - 0.5 * beta
                }
            },
            Op::SmoothL1(x, beta),
        )
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Mean of all entries; zero for an empty tensor.
    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let m = if t.is_empty() {
            0.0
        } else {
            t.data().iter().sum::<f64>() / t.len() as f64
        };
        self.push(Tensor::scalar(m), Op::Mean(x))
    }

    /// Row sums as an `n x 1` column.
    pub fn sum_cols(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let v = (0..t.rows()).map(|r| t.row(r).iter().sum()).collect();
        self.push(Tensor::column(v), Op::SumCols(x))
    }

    /// Max over consecutive blocks of `group` rows: `(m * group) x c` to `m x c`.
    pub fn max_pool(&mut self, x: Var, group: usize) -> Result<Var, NnError> {
        let t = self.value(x);
        if group == 0 || t.rows() % group != 0 {
            return Err(NnError::shape(
                "max_pool",
                format!("rows divisible by {group}"),
                format!("{:?}", t.shape()),
            ));
        }
        let (m, c) = (t.rows() / group, t.cols());
        let mut out = Tensor::zeros(m, c);
        let mut argmax = vec![0; m * c];
        for i in 0..m {
            for j in 0..c {
                let mut best = i * group;
                for r in i * group + 1..(i + 1) * group {
                    if t.get(r, j) > t.get(best, j) {
                        best = r;
                    }
                }
                out.set(i, j, t.get(best, j));
                argmax[i * c + j] = best;
            }
        }
        Ok(self.push(out, Op::MaxPool { x, argmax }))
    }

    pub fn concat_cols(&mut self, xs: &[Var]) -> Result<Var, NnError> {
        let Some(&first) = xs.first() else {
            return Err(NnError::shape(
                "concat_cols",
                "at least one input".into(),
                "none".into(),
            ));
        };
        let rows = self.value(first).rows();
        if let Some(bad) = xs.iter().find(|&&v| self.value(v).rows() != rows) {
            return Err(NnError::shape(
                "concat_cols",
                format!("{rows} rows"),
                format!("{:?}", self.value(*bad).shape()),
            ));
        }
        let cols: usize = xs.iter().map(|&v| self.value(v).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &v in xs {
                data.extend_from_slice(self.value(v).row(r));
            }
        }
        let t = Tensor::new(rows, cols, data)?;
        Ok(self.push(t, Op::ConcatCols(xs.to_vec())))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var, NnError> {
        let t = self.value(x);
        if start > end || end > t.cols() {
            return Err(NnError::shape(
                "slice_cols",
                format!("range within {} columns", t.cols()),
                format!("{start}..{end}"),
            ));
        }
        let mut data = Vec::with_capacity(t.rows() * (end - start));
        for r in 0..t.rows() {
            data.extend_from_slice(&t.row(r)[start..end]);
        }
        let v = Tensor::new(t.rows(), end - start, data)?;
        Ok(self.push(v, Op::SliceCols(x, start)))
    }

    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var, NnError> {
        let t = self.value(x);
        if let Some(&bad) = idx.iter().find(|&&i| i >= t.rows()) {
            return Err(NnError::shape(
                "gather_rows",
                format!("index < {}", t.rows()),
                bad.to_string(),
            ));
        }
        let mut data = Vec::with_capacity(idx.len() * t.cols());
        for &i in idx {
            data.extend_from_slice(t.row(i));
        }
        let v = Tensor::new(idx.len(), t.cols(), data)?;
        Ok(self.push(v, Op::GatherRows(x, idx.to_vec())))
    }

    /// Entry `idx[r]` of each row `r`, as an `n x 1` column.
    pub fn pick_cols(&mut self, x: Var, idx: &[usize]) -> Result<Var, NnError> {
        let t = self.value(x);
        if idx.len() != t.rows() || idx.iter().any(|&c| c >= t.cols()) {
            return Err(NnError::shape(
                "pick_cols",
                format!("{} indices < {}", t.rows(), t.cols()),
                format!("{idx:?}"),
            ));
        }
        let v = idx.iter().enumerate().map(|(r, &c)| t.get(r, c)).collect();
        Ok(self.push(Tensor::column(v), Op::PickCols(x, idx.to_vec())))
    }

    /// Mean of the rows sharing each segment id; empty segments yield zeros.
    pub fn segment_mean(
        &mut self,
        x: Var,
        seg: &[usize],
        n_segments: usize,
    ) -> Result<Var, NnError> {
        let t = self.value(x);
        if seg.len() != t.rows() || seg.iter().any(|&s| s >= n_segments) {
            return Err(NnError::shape(
                "segment_mean",
                format!("{} ids < {n_segments}", t.rows()),
                format!("{} ids", seg.len()),
            ));
        }
        let mut counts = vec![0usize; n_segments];
        let mut out = Tensor::zeros(n_segments, t.cols());
        for (r, &s) in seg.iter().enumerate() {
            counts[s] += 1;
            for (c, v) in t.row(r).iter().enumerate() {
                out.set(s, c, out.get(s, c) + v);
            }
        }
        for (s, &n) in counts.iter().enumerate() {
            if n > 0 {
                for c in 0..t.cols() {
                    out.set(s, c, out.get(s, c) / n as f64);
                }
            }
        }
        Ok(self.push(
            out,
            Op::SegmentMean {
                x,
                seg: seg.to_vec(),
                counts,
            },
        ))
    }

    /// Elementwise weighted binary cross-entropy on logits:
    /// `-(pos_w * s * ln p + neg_w * (1 - s) * ln(1 - p))` with `p = sigmoid(x)`
    /// and both logarithms floored at [`LOG_EPS`].
    pub fn bce_with_logits(
        &mut self,
        x: Var,
        labels: Tensor,
        pos_w: Tensor,
        neg_w: Tensor,
    ) -> Result<Var, NnError> {
        let t = self.value(x);
        for (name, other) in [("labels", &labels), ("pos_w", &pos_w), ("neg_w", &neg_w)] {
            if other.shape() != t.shape() {
                return Err(NnError::shape(
                    name,
                    format!("{:?}", t.shape()),
                    format!("{:?}", other.shape()),
                ));
            }
        }
        let mut out = Tensor::zeros(t.rows(), t.cols());
        for i in 0..t.len() {
            let z = t.data()[i];
            let s = labels.data()[i];
            let p = sigmoid(z);
            let q = sigmoid(-z);
            let v = -(pos_w.data()[i] * s * p.max(LOG_EPS).ln()
                + neg_w.data()[i] * (1.0 - s) * q.max(LOG_EPS).ln());
            out.data_mut()[i] = v;
        }
        Ok(self.push(
            out,
            Op::Bce {
                x,
                labels,
                pos_w,
                neg_w,
            },
        ))
    }

    /// Per-row softmax cross-entropy against class indices, as an `n x 1` column.
    pub fn softmax_ce(&mut self, x: Var, targets: &[usize]) -> Result<Var, NnError> {
        let t = self.value(x);
        if targets.len() != t.rows() || targets.iter().any(|&c| c >= t.cols()) {
            return Err(NnError::shape(
                "softmax_ce",
                format!("{} targets < {}", t.rows(), t.cols()),
                format!("{targets:?}"),
            ));
        }
        let mut probs = Tensor::zeros(t.rows(), t.cols());
        let mut loss = Vec::with_capacity(t.rows());
        for r in 0..t.rows() {
            let row = t.row(r);
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - mx).exp()).sum();
            for (c, v) in row.iter().enumerate() {
                probs.set(r, c, (v - mx).exp() / z);
            }
            loss.push(z.ln() + mx - row[targets[r]]);
        }
        Ok(self.push(
            Tensor::column(loss),
            Op::SoftmaxCe {
                x,
                targets: targets.to_vec(),
                probs,
            },
        ))
    }

    /// Reverse-mode pass from a `1 x 1` output.
    pub fn backward(&self, out: Var) -> Result<Gradients, NnError> {
        if out.0 >= self.nodes.len() {
            return Err(NnError::NoForward);
        }
        if self.value(out).shape() != [1, 1] {
            return Err(NnError::shape(
                "backward",
                "[1, 1]".into(),
                format!("{:?}", self.value(out).shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; out.0 + 1];
        grads[out.0] = Some(Tensor::scalar(1.0));
        let mut result = Gradients::default();

        fn acc(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut grads[v.0] {
                Some(t) => t.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let val = &node.value;
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    if !g.is_finite() {
                        return Err(NnError::NonFiniteGradient(*id));
                    }
                    match result.grads.get_mut(id) {
                        Some(t) => t.add_assign(&g),
                        None => {
                            result.grads.insert(*id, g);
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    acc(&mut grads, *a, g.matmul_t(self.value(*b)));
                    acc(&mut grads, *b, self.value(*a).t_matmul(&g));
                }
                Op::AddBias(x, b) => {
                    let mut gb = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, v) in gb.data_mut().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    acc(&mut grads, *b, gb);
                    acc(&mut grads, *x, g);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, g.map(|v| -v));
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let ga = zip_map(&g, tb, |gv, y| gv * y);
                    let gb = zip_map(&g, ta, |gv, x| gv * x);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Minimum(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let mut ga = g.clone();
                    let mut gb = g;
                    for k in 0..ga.len() {
                        if ta.data()[k] <= tb.data()[k] {
                            gb.data_mut()[k] = 0.0;
                        } else {
                            ga.data_mut()[k] = 0.0;
                        }
                    }
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Scale(x, s) => acc(&mut grads, *x, g.map(|v| v * s)),
                Op::AddScalar(x) => acc(&mut grads, *x, g),
                Op::Relu(x) => acc(
                    &mut grads,
                    *x,
                    zip_map(&g, val, |gv, y| if y > 0.0 { gv } else { 0.0 }),
                ),
                Op::Sigmoid(x) => acc(&mut grads, *x, zip_map(&g, val, |gv, y| gv * y * (1.0 - y))),
                Op::Abs(x) => acc(
                    &mut grads,
                    *x,
                    zip_map(&g, self.value(*x), |gv, v| gv * sign(v)),
                ),
                Op::Sin(x) => acc(
                    &mut grads,
                    *x,
                    zip_map(&g, self.value(*x), |gv, v| gv * v.cos()),
                ),
                Op::Cos(x) => acc(
                    &mut grads,
                    *x,
                    zip_map(&g, self.value(*x), |gv, v| -gv * v.sin()),
                ),
                Op::SmoothL1(x, beta) => {
                    let b = *beta;
                    acc(
                        &mut grads,
                        *x,
                        zip_map(&g, self.value(*x), |gv, v| {
                            if v.abs() < b {
                                gv * v / b
                            } else {
                                gv * sign(v)
                            }
                        }),
                    )
                }
                Op::Sum(x) => {
                    let t = self.value(*x);
                    acc(&mut grads, *x, Tensor::filled(t.rows(), t.cols(), g.item()));
                }
                Op::Mean(x) => {
                    let t = self.value(*x);
                    if !t.is_empty() {
                        acc(
                            &mut grads,
                            *x,
                            Tensor::filled(t.rows(), t.cols(), g.item() / t.len() as f64),
                        );
                    }
                }
                Op::SumCols(x) => {
                    let t = self.value(*x);
                    let mut gx = Tensor::zeros(t.rows(), t.cols());
                    for r in 0..t.rows() {
                        for c in 0..t.cols() {
                            gx.set(r, c, g.get(r, 0));
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::MaxPool { x, argmax } => {
                    let t = self.value(*x);
                    let c = t.cols();
                    let mut gx = Tensor::zeros(t.rows(), c);
                    for (k, &r) in argmax.iter().enumerate() {
                        let j = k % c;
                        gx.set(r, j, gx.get(r, j) + g.data()[k]);
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::ConcatCols(xs) => {
                    let mut offset = 0;
                    for &x in xs {
                        let t = self.value(x);
                        let mut gx = Tensor::zeros(t.rows(), t.cols());
                        for r in 0..t.rows() {
                            for c in 0..t.cols() {
                                gx.set(r, c, g.get(r, offset + c));
                            }
                        }
                        offset += t.cols();
                        acc(&mut grads, x, gx);
                    }
                }
                Op::SliceCols(x, start) => {
                    let t = self.value(*x);
                    let mut gx = Tensor::zeros(t.rows(), t.cols());
                    for r in 0..g.rows() {
                        for c in 0..g.cols() {
                            gx.set(r, start + c, g.get(r, c));
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::GatherRows(x, idx) => {
                    let t = self.value(*x);
                    let mut gx = Tensor::zeros(t.rows(), t.cols());
                    for (k, &r) in idx.iter().enumerate() {
                        for c in 0..t.cols() {
                            gx.set(r, c, gx.get(r, c) + g.get(k, c));
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::PickCols(x, idx) => {
                    let t = self.value(*x);
                    let mut gx = Tensor::zeros(t.rows(), t.cols());
                    for (r, &c) in idx.iter().enumerate() {
                        gx.set(r, c, g.get(r, 0));
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::SegmentMean { x, seg, counts } => {
                    let t = self.value(*x);
                    let mut gx = Tensor::zeros(t.rows(), t.cols());
                    for (r, &s) in seg.iter().enumerate() {
                        let n = counts[s] as f64;
                        for c in 0..t.cols() {
                            gx.set(r, c, g.get(s, c) / n);
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::Bce {
                    x,
                    labels,
                    pos_w,
                    neg_w,
                } => {
                    let t = self.value(*x);
                    let mut gx = Tensor::zeros(t.rows(), t.cols());
                    for k in 0..t.len() {
                        let z = t.data()[k];
                        let (p, q) = (sigmoid(z), sigmoid(-z));
                        let s = labels.data()[k];
                        let dpos = if p > LOG_EPS {
                            -pos_w.data()[k] * s * q
                        } else {
                            0.0
                        };
                        let dneg = if q > LOG_EPS {
                            neg_w.data()[k] * (1.0 - s) * p
                        } else {
                            0.0
                        };
                        gx.data_mut()[k] = g.data()[k] * (dpos + dneg);
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::SoftmaxCe { x, targets, probs } => {
                    let mut gx = probs.clone();
                    for (r, &c) in targets.iter().enumerate() {
                        gx.set(r, c, gx.get(r, c) - 1.0);
                        let gr = g.get(r, 0);
                        for v in &mut gx.data_mut()[r * probs.cols()..(r + 1) * probs.cols()] {
                            *v *= gr;
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
            }
        }
        Ok(result)
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::new(a.rows(), a.cols(), data).expect("matching shapes")
}
