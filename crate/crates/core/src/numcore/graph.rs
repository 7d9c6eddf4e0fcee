//! Tape-based reverse-mode differentiation over dense `f64` tensors.
//!
//! A [`Graph`] borrows a [`ParamStore`] immutably while operations are
//! recorded; parameter leaves read their values from the store without
//! copying. [`Graph::backward`] returns [`Gradients`] that the caller
//! accumulates into the store once the graph is dropped.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numcore::{Gradients, ParamId, ParamStore, Tensor};

/// A node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MatVec(Var, Var),
    VecMat(Var, Var),
    MatMulT(Var, Var),
    AddRows(Var, Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Row(Var, usize),
    StackRows(Vec<Var>),
    Sigmoid(Var),
    Tanh(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Pick(Var, usize),
    Sum(Var),
    Dot(Var, Var),
    MaxElementwise(Vec<Var>),
}

#[derive(Debug)]
struct Node {
    op: Op,
    // `None` for parameter leaves, whose value lives in the store.
    value: Option<Tensor>,
}

pub struct Graph<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
    consumed: bool,
}

impl<'s> Graph<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            param_vars: vec![None; store.len()],
            consumed: false,
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.op, &node.value) {
            (Op::Param(id), _) => self.store.value(*id),
            (_, Some(t)) => t,
            _ => unreachable!("non-parameter node without value"),
        }
    }

    pub fn data(&self, v: Var) -> &[f64] {
        self.value(v).data()
    }

    /// Value of a single-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.data(v)[0]
    }

    fn numel(&self, v: Var) -> usize {
        self.value(v).len()
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, data: Vec<f64>, what: &str) -> Result<Var> {
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(alloc::format!("`{what}`")));
        }
        let value = Tensor::new(shape, data)?;
        self.nodes.push(Node {
            op,
            value: Some(value),
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            op: Op::Constant,
            value: Some(t),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant_vec(&mut self, data: Vec<f64>) -> Result<Var> {
        Ok(self.constant(Tensor::vector(data)?))
    }

    /// Leaf for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    fn same_len(&self, a: Var, b: Var, what: &str) -> Result<usize> {
        let (la, lb) = (self.numel(a), self.numel(b));
        if la != lb {
            return Err(Error::shape(what, la, lb));
        }
        Ok(la)
    }

    fn zip(
        &mut self,
        a: Var,
        b: Var,
        op: Op,
        what: &str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var> {
        self.same_len(a, b, what)?;
        let shape = self.value(a).shape().to_vec();
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        self.push(op, shape, data, what)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, Op::Add(a, b), "add", |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, Op::Sub(a, b), "sub", |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, Op::Mul(a, b), "mul", |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var> {
        let shape = self.value(a).shape().to_vec();
        let data = self.data(a).iter().map(|x| x * k).collect();
        self.push(Op::Scale(a, k), shape, data, "scale")
    }

    /// `m · x` for `m: [rows × cols]`, `x: [cols]`.
    pub fn matvec(&mut self, m: Var, x: Var) -> Result<Var> {
        let (rows, cols) = self.value(m).dims2();
        if self.numel(x) != cols {
            return Err(Error::shape("matvec input", cols, self.numel(x)));
        }
        let md = self.data(m);
        let xd = self.data(x);
        let data: Vec<f64> = (0..rows)
            .map(|r| {
                md[r * cols..(r + 1) * cols]
                    .iter()
                    .zip(xd)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        self.push(Op::MatVec(m, x), vec![rows], data, "matvec")
    }

    /// `xᵀ · m` for `x: [rows]`, `m: [rows × cols]`.
    pub fn vecmat(&mut self, x: Var, m: Var) -> Result<Var> {
        let (rows, cols) = self.value(m).dims2();
        if self.numel(x) != rows {
            return Err(Error::shape("vecmat input", rows, self.numel(x)));
        }
        let md = self.data(m);
        let xd = self.data(x);
        let mut data = vec![0.0; cols];
        for (r, &w) in xd.iter().enumerate() {
            for (acc, &v) in data.iter_mut().zip(&md[r * cols..(r + 1) * cols]) {
                *acc += w * v;
            }
        }
        self.push(Op::VecMat(x, m), vec![cols], data, "vecmat")
    }

    /// `a · bᵀ` for `a: [m × k]`, `b: [n × k]`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2();
        let (n, kb) = self.value(b).dims2();
        if k != kb {
            return Err(Error::shape("matmul_t inner dimension", k, kb));
        }
        let ad = self.data(a);
        let bd = self.data(b);
        let mut data = Vec::with_capacity(m * n);
        for i in 0..m {
            let ar = &ad[i * k..(i + 1) * k];
            for j in 0..n {
                data.push(
                    ar.iter()
                        .zip(&bd[j * k..(j + 1) * k])
                        .map(|(x, y)| x * y)
                        .sum(),
                );
            }
        }
        self.push(Op::MatMulT(a, b), vec![m, n], data, "matmul_t")
    }

    /// Adds `v: [cols]` to every row of `m: [rows × cols]`.
    pub fn add_rows(&mut self, m: Var, v: Var) -> Result<Var> {
        let (rows, cols) = self.value(m).dims2();
        if self.numel(v) != cols {
            return Err(Error::shape("add_rows bias", cols, self.numel(v)));
        }
        let vd = self.data(v);
        let data = self
            .data(m)
            .iter()
            .enumerate()
            .map(|(i, x)| x + vd[i % cols])
            .collect();
        self.push(Op::AddRows(m, v), vec![rows, cols], data, "add_rows")
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::invalid("concat of zero tensors"));
        }
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.data(p));
        }
        let n = data.len();
        self.push(Op::Concat(parts.to_vec()), vec![n], data, "concat")
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let n = self.numel(a);
        if len == 0 || start + len > n {
            return Err(Error::shape("slice range", n, start + len));
        }
        let data = self.data(a)[start..start + len].to_vec();
        self.push(Op::Slice(a, start), vec![len], data, "slice")
    }

    /// Row `i` of a matrix (embedding lookup).
    pub fn row(&mut self, m: Var, i: usize) -> Result<Var> {
        let (rows, cols) = self.value(m).dims2();
        if i >= rows {
            return Err(Error::invalid(alloc::format!(
                "row {i} out of range for {rows} rows"
            )));
        }
        let data = self.data(m)[i * cols..(i + 1) * cols].to_vec();
        self.push(Op::Row(m, i), vec![cols], data, "row")
    }

    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var> {
        let Some(&first) = rows.first() else {
            return Err(Error::invalid("stack of zero rows"));
        };
        let cols = self.numel(first);
        let mut data = Vec::with_capacity(cols * rows.len());
        for &r in rows {
            if self.numel(r) != cols {
                return Err(Error::shape("stack_rows row", cols, self.numel(r)));
            }
            data.extend_from_slice(self.data(r));
        }
        self.push(
            Op::StackRows(rows.to_vec()),
            vec![rows.len(), cols],
            data,
            "stack_rows",
        )
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let shape = self.value(a).shape().to_vec();
        let data = self.data(a).iter().map(|&x| sigmoid(x)).collect();
        self.push(Op::Sigmoid(a), shape, data, "sigmoid")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let shape = self.value(a).shape().to_vec();
        let data = self.data(a).iter().map(|&x| libm::tanh(x)).collect();
        self.push(Op::Tanh(a), shape, data, "tanh")
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let data = softmax(self.data(a))?;
        let n = data.len();
        self.push(Op::Softmax(a), vec![n], data, "softmax")
    }

    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let data = log_softmax(self.data(a))?;
        let n = data.len();
        self.push(Op::LogSoftmax(a), vec![n], data, "log_softmax")
    }

    /// Single element `a[i]` as a scalar node.
    pub fn pick(&mut self, a: Var, i: usize) -> Result<Var> {
        let n = self.numel(a);
        if i >= n {
            return Err(Error::invalid(alloc::format!(
                "index {i} out of range for length {n}"
            )));
        }
        let x = self.data(a)[i];
        self.push(Op::Pick(a, i), vec![1], vec![x], "pick")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.data(a).iter().sum();
        self.push(Op::Sum(a), vec![1], vec![s], "sum")
    }

    /// Sum of several scalar (or same-shaped) nodes.
    pub fn add_all(&mut self, terms: &[Var]) -> Result<Var> {
        let Some((&first, rest)) = terms.split_first() else {
            return Err(Error::invalid("sum of zero terms"));
        };
        let mut acc = first;
        for &t in rest {
            acc = self.add(acc, t)?;
        }
        Ok(acc)
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "dot")?;
        let s = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| x * y)
            .sum();
        self.push(Op::Dot(a, b), vec![1], vec![s], "dot")
    }

    /// Elementwise maximum across equally sized inputs (max-pooling).
    pub fn max_elementwise(&mut self, inputs: &[Var]) -> Result<Var> {
        let Some(&first) = inputs.first() else {
            return Err(Error::invalid("max over zero tensors"));
        };
        let n = self.numel(first);
        let mut data = self.data(first).to_vec();
        for &v in &inputs[1..] {
            if self.numel(v) != n {
                return Err(Error::shape("max_elementwise input", n, self.numel(v)));
            }
            for (acc, &x) in data.iter_mut().zip(self.data(v)) {
                if x > *acc {
                    *acc = x;
                }
            }
        }
        self.push(
            Op::MaxElementwise(inputs.to_vec()),
            vec![n],
            data,
            "max_elementwise",
        )
    }

    /// `-log softmax(logits)[target]` as a scalar node.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let n = self.numel(logits);
        if target >= n {
            return Err(Error::invalid(alloc::format!(
                "target {target} out of range for {n} classes"
            )));
        }
        let lp = self.log_softmax(logits)?;
        let picked = self.pick(lp, target)?;
        self.scale(picked, -1.0)
    }

    /// Reverse pass from a scalar `loss`. May be called once per graph.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::state(
                "backward already run on this graph; record a new forward pass",
            ));
        }
        if self.numel(loss) != 1 {
            return Err(Error::shape("loss", 1, self.numel(loss)));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients {
            grads: vec![None; self.store.len()],
        };

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    out.grads[id.0] = Some(g);
                }
                Op::Add(a, b) => {
                    self.acc(&mut grads, *a, |d| add_into(d, &g));
                    self.acc(&mut grads, *b, |d| add_into(d, &g));
                }
                Op::Sub(a, b) => {
                    self.acc(&mut grads, *a, |d| add_into(d, &g));
                    self.acc(&mut grads, *b, |d| {
                        d.iter_mut().zip(&g).for_each(|(x, y)| *x -= y)
                    });
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.data(*a), self.data(*b));
                    self.acc(&mut grads, *a, |d| {
                        for k in 0..d.len() {
                            d[k] += g[k] * bv[k];
                        }
                    });
                    self.acc(&mut grads, *b, |d| {
                        for k in 0..d.len() {
                            d[k] += g[k] * av[k];
                        }
                    });
                }
                Op::Scale(a, k) => {
                    let k = *k;
                    self.acc(&mut grads, *a, |d| {
                        d.iter_mut().zip(&g).for_each(|(x, y)| *x += k * y)
                    });
                }
                Op::MatVec(m, x) => {
                    let (rows, cols) = self.value(*m).dims2();
                    let (md, xd) = (self.data(*m), self.data(*x));
                    self.acc(&mut grads, *m, |d| {
                        for r in 0..rows {
                            let gr = g[r];
                            if gr != 0.0 {
                                for (dv, &xv) in d[r * cols..(r + 1) * cols].iter_mut().zip(xd) {
                                    *dv += gr * xv;
                                }
                            }
                        }
                    });
                    self.acc(&mut grads, *x, |d| {
                        for r in 0..rows {
                            let gr = g[r];
                            if gr != 0.0 {
                                for (dv, &mv) in d.iter_mut().zip(&md[r * cols..(r + 1) * cols]) {
                                    *dv += gr * mv;
                                }
                            }
                        }
                    });
                }
                Op::VecMat(x, m) => {
                    let (rows, cols) = self.value(*m).dims2();
                    let (md, xd) = (self.data(*m), self.data(*x));
                    self.acc(&mut grads, *x, |d| {
                        for r in 0..rows {
                            d[r] += md[r * cols..(r + 1) * cols]
                                .iter()
                                .zip(&g)
                                .map(|(a, b)| a * b)
                                .sum::<f64>();
                        }
                    });
                    self.acc(&mut grads, *m, |d| {
                        for r in 0..rows {
                            let xr = xd[r];
                            for (dv, &gv) in d[r * cols..(r + 1) * cols].iter_mut().zip(&g) {
                                *dv += xr * gv;
                            }
                        }
                    });
                }
                Op::MatMulT(a, b) => {
                    let (m, k) = self.value(*a).dims2();
                    let (n, _) = self.value(*b).dims2();
                    let (ad, bd) = (self.data(*a), self.data(*b));
                    self.acc(&mut grads, *a, |d| {
                        for i in 0..m {
                            for j in 0..n {
                                let gij = g[i * n + j];
                                for t in 0..k {
                                    d[i * k + t] += gij * bd[j * k + t];
                                }
                            }
                        }
                    });
                    self.acc(&mut grads, *b, |d| {
                        for i in 0..m {
                            for j in 0..n {
                                let gij = g[i * n + j];
                                for t in 0..k {
                                    d[j * k + t] += gij * ad[i * k + t];
                                }
                            }
                        }
                    });
                }
                Op::AddRows(m, v) => {
                    let cols = self.numel(*v);
                    self.acc(&mut grads, *m, |d| add_into(d, &g));
                    self.acc(&mut grads, *v, |d| {
                        for (i, gv) in g.iter().enumerate() {
                            d[i % cols] += gv;
                        }
                    });
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.numel(p);
                        self.acc(&mut grads, p, |d| add_into(d, &g[offset..offset + n]));
                        offset += n;
                    }
                }
                Op::Slice(a, start) => {
                    let start = *start;
                    self.acc(&mut grads, *a, |d| {
                        add_into(&mut d[start..start + g.len()], &g)
                    });
                }
                Op::Row(m, r) => {
                    let cols = g.len();
                    let r = *r;
                    self.acc(&mut grads, *m, |d| {
                        add_into(&mut d[r * cols..(r + 1) * cols], &g)
                    });
                }
                Op::StackRows(rows) => {
                    let cols = g.len() / rows.len();
                    for (r, &v) in rows.iter().enumerate() {
                        self.acc(&mut grads, v, |d| add_into(d, &g[r * cols..(r + 1) * cols]));
                    }
                }
                Op::Sigmoid(a) => {
                    let y = node.value.as_ref().map(|t| t.data()).unwrap_or(&[]);
                    self.acc(&mut grads, *a, |d| {
                        for k in 0..d.len() {
                            d[k] += g[k] * y[k] * (1.0 - y[k]);
                        }
                    });
                }
                Op::Tanh(a) => {
                    let y = node.value.as_ref().map(|t| t.data()).unwrap_or(&[]);
                    self.acc(&mut grads, *a, |d| {
                        for k in 0..d.len() {
                            d[k] += g[k] * (1.0 - y[k] * y[k]);
                        }
                    });
                }
                Op::Softmax(a) => {
                    let y = node.value.as_ref().map(|t| t.data()).unwrap_or(&[]);
                    let inner: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                    self.acc(&mut grads, *a, |d| {
                        for k in 0..d.len() {
                            d[k] += y[k] * (g[k] - inner);
                        }
                    });
                }
                Op::LogSoftmax(a) => {
                    let y = node.value.as_ref().map(|t| t.data()).unwrap_or(&[]);
                    let total: f64 = g.iter().sum();
                    self.acc(&mut grads, *a, |d| {
                        for k in 0..d.len() {
                            d[k] += g[k] - libm::exp(y[k]) * total;
                        }
                    });
                }
                Op::Pick(a, idx) => {
                    let idx = *idx;
                    self.acc(&mut grads, *a, |d| d[idx] += g[0]);
                }
                Op::Sum(a) => {
                    self.acc(&mut grads, *a, |d| d.iter_mut().for_each(|x| *x += g[0]));
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (self.data(*a), self.data(*b));
                    self.acc(&mut grads, *a, |d| {
                        for k in 0..d.len() {
                            d[k] += g[0] * bv[k];
                        }
                    });
                    self.acc(&mut grads, *b, |d| {
                        for k in 0..d.len() {
                            d[k] += g[0] * av[k];
                        }
                    });
                }
                Op::MaxElementwise(inputs) => {
                    let n = g.len();
                    for k in 0..n {
                        let mut best = 0;
                        let mut best_val = self.data(inputs[0])[k];
                        for (j, &v) in inputs.iter().enumerate().skip(1) {
                            let x = self.data(v)[k];
                            if x > best_val {
                                best = j;
                                best_val = x;
                            }
                        }
                        let gk = g[k];
                        self.acc(&mut grads, inputs[best], |d| d[k] += gk);
                    }
                }
            }
        }
        Ok(out)
    }

    fn acc(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        let n = self.numel(v);
        let slot = grads[v.0].get_or_insert_with(|| vec![0.0; n]);
        f(slot);
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Max-shifted softmax of a non-empty finite vector.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::invalid("softmax of an empty vector"));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("softmax input".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| libm::exp(x - max)).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

pub fn log_softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::invalid("log_softmax of an empty vector"));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("log_softmax input".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + libm::log(logits.iter().map(|&x| libm::exp(x - max)).sum::<f64>());
    Ok(logits.iter().map(|&x| x - lse).collect())
}

/// `-log softmax(logits)[target]`.
pub fn cross_entropy(logits: &[f64], target: usize) -> Result<f64> {
    if target >= logits.len() {
        return Err(Error::invalid(alloc::format!(
            "target {target} out of range for {} classes",
            logits.len()
        )));
    }
    Ok(-log_softmax(logits)?[target])
}
