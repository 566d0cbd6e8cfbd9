//! Reverse-mode differentiation over a linear tape of matrix operations.
//!
//! Every operation appends one node holding its value; `backward` walks the
//! tape once in reverse. Parameters are borrowed leaves, so building a tape
//! never copies weights.

use std::sync::Arc;

use crate::scalar::Scalar;
use crate::tensor::{gelu, gelu_grad, layer_norm_row, matmul, softmax, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

/// Which keys a query row may attend to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mask {
    Full,
    /// Row `i` sees keys `0..=i`.
    Causal,
}

/// Neighbor lists `(j, label)` per query row.
pub type Neighbors = Arc<Vec<Vec<(usize, usize)>>>;

/// One supervised softmax row of a loss node.
#[derive(Debug, Clone)]
pub struct LossRow<T> {
    pub row: usize,
    /// Number of leading columns that are real candidates.
    pub len: usize,
    pub gold: usize,
    /// Detached teacher distribution over the `len` candidates.
    pub teacher: Option<Vec<T>>,
    pub weight: T,
    /// Weight of the divergence term relative to cross-entropy.
    pub kl_weight: T,
}

/// Cross-entropy and divergence parts of a loss node.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub ce: f64,
    pub kl: f64,
}

pub const PROB_FLOOR: f64 = 1e-12;

enum Op<T> {
    Leaf,
    Gather { src: usize, ids: Vec<usize> },
    Add(usize, usize),
    AddRow(usize, usize),
    Scale(usize, T),
    MatMul { a: usize, b: usize, tb: bool },
    Gelu(usize),
    LayerNorm { x: usize, g: usize, b: usize, stats: Vec<(T, T)> },
    Dropout { x: usize, mask: Vec<T> },
    Attention { q: usize, k: usize, v: usize, heads: usize, mask: Mask, probs: Vec<T> },
    Asg { q: usize, k: usize, v: usize, e: usize, nbrs: Neighbors, heads: usize, probs: Vec<Vec<T>> },
    Loss { logits: usize, rows: Vec<LossRow<T>>, probs: Vec<Vec<T>>, parts: LossParts },
}

struct Node<T> {
    value: Option<Tensor<T>>,
    param: Option<usize>,
    needs_grad: bool,
    op: Op<T>,
}

pub struct Tape<'p, T: Scalar> {
    params: &'p [Tensor<T>],
    nodes: Vec<Node<T>>,
    param_vars: Vec<Option<Var>>,
}

fn ids(op: &Op<impl Scalar>) -> Vec<usize> {
    match op {
        Op::Leaf => vec![],
        Op::Gather { src, .. } => vec![*src],
        Op::Add(a, b) | Op::AddRow(a, b) => vec![*a, *b],
        Op::Scale(a, _) | Op::Gelu(a) => vec![*a],
        Op::MatMul { a, b, .. } => vec![*a, *b],
        Op::LayerNorm { x, g, b, .. } => vec![*x, *g, *b],
        Op::Dropout { x, .. } => vec![*x],
        Op::Attention { q, k, v, .. } => vec![*q, *k, *v],
        Op::Asg { q, k, v, e, .. } => vec![*q, *k, *v, *e],
        Op::Loss { logits, .. } => vec![*logits],
    }
}

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new(params: &'p [Tensor<T>]) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_vars: vec![None; params.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        let n = &self.nodes[v.0];
        match n.param {
            Some(p) => &self.params[p],
            None => n.value.as_ref().expect("non-parameter node holds a value"),
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        let needs_grad = ids(&op).iter().any(|&i| self.nodes[i].needs_grad);
        self.nodes.push(Node {
            value: Some(value),
            param: None,
            needs_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf for parameter `id`; repeated calls return the same variable.
    pub fn param(&mut self, id: usize) -> Var {
        if let Some(v) = self.param_vars[id] {
            return v;
        }
        self.nodes.push(Node {
            value: None,
            param: Some(id),
            needs_grad: true,
            op: Op::Leaf,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id] = Some(v);
        v
    }

    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value: Some(t),
            param: None,
            needs_grad: false,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    /// Rows `ids` of `src`.
    pub fn gather(&mut self, src: Var, ids: &[usize]) -> Var {
        let s = self.value(src);
        let mut out = Tensor::zeros(ids.len(), s.cols);
        for (r, &i) in ids.iter().enumerate() {
            out.row_mut(r).copy_from_slice(s.row(i));
        }
        self.push(out, Op::Gather { src: src.0, ids: ids.to_vec() })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "add shapes");
        let data = x.data.iter().zip(&y.data).map(|(p, q)| *p + *q).collect();
        let out = Tensor::from_vec(x.rows, x.cols, data);
        self.push(out, Op::Add(a.0, b.0))
    }

    /// Add a `1 × c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!((1, x.cols), y.shape(), "bias shape");
        let mut out = x.clone();
        for r in 0..out.rows {
            for (o, bv) in out.row_mut(r).iter_mut().zip(&y.data) {
                *o += *bv;
            }
        }
        self.push(out, Op::AddRow(a.0, b.0))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let x = self.value(a);
        let out = Tensor::from_vec(x.rows, x.cols, x.data.iter().map(|v| *v * s).collect());
        self.push(out, Op::Scale(a.0, s))
    }

    /// `a · b`, or `a · bᵀ` when `tb`.
    pub fn matmul(&mut self, a: Var, b: Var, tb: bool) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        let n = if tb { y.rows } else { y.cols };
        let mut out = Tensor::zeros(x.rows, n);
        matmul(&x.data, x.rows, x.cols, false, &y.data, y.rows, y.cols, tb, &mut out.data, false);
        self.push(out, Op::MatMul { a: a.0, b: b.0, tb })
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let out = Tensor::from_vec(x.rows, x.cols, x.data.iter().map(|v| gelu(*v)).collect());
        self.push(out, Op::Gelu(a.0))
    }

    pub fn layer_norm(&mut self, x: Var, g: Var, b: Var) -> Var {
        let (xv, gv, bv) = (self.value(x), self.value(g), self.value(b));
        let mut out = Tensor::zeros(xv.rows, xv.cols);
        let mut stats = Vec::with_capacity(xv.rows);
        for r in 0..xv.rows {
            stats.push(layer_norm_row(xv.row(r), &gv.data, &bv.data, out.row_mut(r)));
        }
        self.push(out, Op::LayerNorm { x: x.0, g: g.0, b: b.0, stats })
    }

    /// Multiply by a precomputed (already rescaled) keep mask.
    pub fn dropout(&mut self, x: Var, mask: Vec<T>) -> Var {
        let xv = self.value(x);
        assert_eq!(mask.len(), xv.data.len());
        let data = xv.data.iter().zip(&mask).map(|(a, m)| *a * *m).collect();
        let out = Tensor::from_vec(xv.rows, xv.cols, data);
        self.push(out, Op::Dropout { x: x.0, mask })
    }

    /// Multi-head scaled dot-product attention of `q` rows over `k`/`v` rows.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize, mask: Mask) -> Var {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let (n, m, d) = (qv.rows, kv.rows, qv.cols);
        assert_eq!(d % heads, 0);
        let dh = d / heads;
        let scale = T::of(1.0 / (dh as f64).sqrt());
        let mut probs = vec![T::zero(); heads * n * m];
        let mut out = Tensor::zeros(n, d);
        for h in 0..heads {
            let hs = h * dh..(h + 1) * dh;
            for i in 0..n {
                let visible = match mask {
                    Mask::Full => m,
                    Mask::Causal => (i + 1).min(m),
                };
                let p = &mut probs[(h * n + i) * m..(h * n + i) * m + visible];
                let qi = &qv.row(i)[hs.clone()];
                for (j, pj) in p.iter_mut().enumerate() {
                    let kj = &kv.row(j)[hs.clone()];
                    *pj = qi.iter().zip(kj).map(|(a, b)| *a * *b).sum::<T>() * scale;
                }
                softmax(p);
                let o = &mut out.row_mut(i)[hs.clone()];
                for (j, pj) in p.iter().enumerate() {
                    let vj = &vv.row(j)[hs.clone()];
                    for (ov, vvj) in o.iter_mut().zip(vj) {
                        *ov += *pj * *vvj;
                    }
                }
            }
        }
        self.push(out, Op::Attention { q: q.0, k: k.0, v: v.0, heads, mask, probs })
    }

    /// Attention restricted to graph neighbors. Edge embeddings (rows of `e`
    /// indexed by neighbor label) are added to keys, and their weighted sum is
    /// concatenated after the weighted neighbor values: output is `n × 2d`.
    /// Rows without neighbors are zero.
    pub fn asg_attention(&mut self, q: Var, k: Var, v: Var, e: Var, nbrs: Neighbors, heads: usize) -> Var {
        let (qv, kv, vv, ev) = (self.value(q), self.value(k), self.value(v), self.value(e));
        let (n, d) = (qv.rows, qv.cols);
        assert_eq!(nbrs.len(), n);
        let dh = d / heads;
        let scale = T::of(1.0 / (dh as f64).sqrt());
        let mut out = Tensor::zeros(n, 2 * d);
        let mut probs = Vec::with_capacity(n);
        for (i, nb) in nbrs.iter().enumerate() {
            let mut pi = vec![T::zero(); heads * nb.len()];
            for h in 0..heads {
                let hs = h * dh..(h + 1) * dh;
                let p = &mut pi[h * nb.len()..(h + 1) * nb.len()];
                let qi = &qv.row(i)[hs.clone()];
                for (pj, &(j, l)) in p.iter_mut().zip(nb.iter()) {
                    let kj = &kv.row(j)[hs.clone()];
                    let el = &ev.row(l)[hs.clone()];
                    *pj = (0..dh).map(|t| qi[t] * (kj[t] + el[t])).sum::<T>() * scale;
                }
                softmax(p);
                let row = out.row_mut(i);
                for (pj, &(j, l)) in p.iter().zip(nb.iter()) {
                    let vj = &vv.row(j)[hs.clone()];
                    let el = &ev.row(l)[hs.clone()];
                    for t in 0..dh {
                        row[hs.start + t] += *pj * vj[t];
                        row[d + hs.start + t] += *pj * el[t];
                    }
                }
            }
            probs.push(pi);
        }
        self.push(out, Op::Asg { q: q.0, k: k.0, v: v.0, e: e.0, nbrs, heads, probs })
    }

    /// Weighted sum of per-row cross-entropy and teacher divergence over the
    /// softmax of `logits` rows. Produces a `1 × 1` scalar.
    pub fn softmax_loss(&mut self, logits: Var, rows: Vec<LossRow<T>>) -> Var {
        let lv = self.value(logits);
        let mut total = 0.0;
        let mut parts = LossParts::default();
        let mut probs = Vec::with_capacity(rows.len());
        for r in &rows {
            let mut s = lv.row(r.row)[..r.len].to_vec();
            softmax(&mut s);
            let w = r.weight.f64();
            let ce = -s[r.gold].f64().max(PROB_FLOOR).ln();
            let kl = r.teacher.as_ref().map_or(0.0, |t| kl_divergence(&s, t));
            parts.ce += w * ce;
            let kw = r.kl_weight.f64();
            parts.kl += w * kl;
            total += w * (ce + kw * kl);
            probs.push(s);
        }
        let out = Tensor::from_vec(1, 1, vec![T::of(total)]);
        self.push(out, Op::Loss { logits: logits.0, rows, probs, parts })
    }

    pub fn loss_parts(&self, v: Var) -> LossParts {
        match &self.nodes[v.0].op {
            Op::Loss { parts, .. } => *parts,
            _ => LossParts::default(),
        }
    }

    /// Gradients of the `1 × 1` variable `root` for every parameter used on
    /// the tape (`None` for unused parameters).
    pub fn backward(&self, root: Var) -> Vec<Option<Vec<T>>> {
        assert_eq!(self.value(root).shape(), (1, 1), "backward from a scalar");
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(vec![T::one()]);
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if let Some(p) = node.param {
                grads[i] = Some(g);
                let _ = p;
                continue;
            }
            self.propagate(i, &g, &mut grads);
        }
        let mut out: Vec<Option<Vec<T>>> = (0..self.params.len()).map(|_| None).collect();
        for (p, v) in self.param_vars.iter().enumerate() {
            if let Some(v) = v {
                out[p] = grads[v.0].take();
            }
        }
        out
    }

    fn acc<'g>(&self, grads: &'g mut [Option<Vec<T>>], i: usize) -> Option<&'g mut Vec<T>> {
        if !self.nodes[i].needs_grad {
            return None;
        }
        let len = self.value(Var(i)).data.len();
        Some(grads[i].get_or_insert_with(|| vec![T::zero(); len]))
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Gather { src, ids } => {
                let cols = self.value(Var(*src)).cols;
                if let Some(ga) = self.acc(grads, *src) {
                    for (r, &id) in ids.iter().enumerate() {
                        for c in 0..cols {
                            ga[id * cols + c] += g[r * cols + c];
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for x in [*a, *b] {
                    if let Some(ga) = self.acc(grads, x) {
                        ga.iter_mut().zip(g).for_each(|(p, q)| *p += *q);
                    }
                }
            }
            Op::AddRow(a, b) => {
                if let Some(ga) = self.acc(grads, *a) {
                    ga.iter_mut().zip(g).for_each(|(p, q)| *p += *q);
                }
                let cols = self.value(Var(*b)).cols;
                if let Some(gb) = self.acc(grads, *b) {
                    for (k, q) in g.iter().enumerate() {
                        gb[k % cols] += *q;
                    }
                }
            }
            Op::Scale(a, s) => {
                if let Some(ga) = self.acc(grads, *a) {
                    ga.iter_mut().zip(g).for_each(|(p, q)| *p += *q * *s);
                }
            }
            Op::MatMul { a, b, tb } => {
                let (av, bv) = (self.value(Var(*a)), self.value(Var(*b)));
                let out = self.value(Var(i));
                if let Some(ga) = self.acc(grads, *a) {
                    // dA = dC · op(B)ᵀ
                    matmul(g, out.rows, out.cols, false, &bv.data, bv.rows, bv.cols, !*tb, ga, true);
                }
                if let Some(gb) = self.acc(grads, *b) {
                    if *tb {
                        // B is m×k: dB = dCᵀ · A
                        matmul(g, out.rows, out.cols, true, &av.data, av.rows, av.cols, false, gb, true);
                    } else {
                        // dB = Aᵀ · dC
                        matmul(&av.data, av.rows, av.cols, true, g, out.rows, out.cols, false, gb, true);
                    }
                }
            }
            Op::Gelu(a) => {
                let x = &self.value(Var(*a)).data;
                if let Some(ga) = self.acc(grads, *a) {
                    for k in 0..g.len() {
                        ga[k] += g[k] * gelu_grad(x[k]);
                    }
                }
            }
            Op::LayerNorm { x, g: gi, b, stats } => {
                let xv = self.value(Var(*x));
                let gv = self.value(Var(*gi)).data.clone();
                let cols = xv.cols;
                let nf = T::of(cols as f64);
                let mut dx = vec![T::zero(); xv.data.len()];
                let mut dg = vec![T::zero(); cols];
                let mut db = vec![T::zero(); cols];
                for (r, &(mean, inv)) in stats.iter().enumerate() {
                    let xr = xv.row(r);
                    let gr = &g[r * cols..(r + 1) * cols];
                    let xhat: Vec<T> = xr.iter().map(|v| (*v - mean) * inv).collect();
                    let dxhat: Vec<T> = (0..cols).map(|c| gr[c] * gv[c]).collect();
                    let m1 = dxhat.iter().copied().sum::<T>() / nf;
                    let m2 = (0..cols).map(|c| dxhat[c] * xhat[c]).sum::<T>() / nf;
                    for c in 0..cols {
                        dg[c] += gr[c] * xhat[c];
                        db[c] += gr[c];
                        dx[r * cols + c] = inv * (dxhat[c] - m1 - xhat[c] * m2);
                    }
                }
                for (t, d) in [(*x, dx), (*gi, dg), (*b, db)] {
                    if let Some(gt) = self.acc(grads, t) {
                        gt.iter_mut().zip(&d).for_each(|(p, q)| *p += *q);
                    }
                }
            }
            Op::Dropout { x, mask } => {
                if let Some(gx) = self.acc(grads, *x) {
                    for k in 0..g.len() {
                        gx[k] += g[k] * mask[k];
                    }
                }
            }
            Op::Attention { q, k, v, heads, mask, probs } => {
                let (qv, kv, vv) = (self.value(Var(*q)), self.value(Var(*k)), self.value(Var(*v)));
                let (n, m, d) = (qv.rows, kv.rows, qv.cols);
                let dh = d / heads;
                let scale = T::of(1.0 / (dh as f64).sqrt());
                let mut dq = vec![T::zero(); n * d];
                let mut dk = vec![T::zero(); m * d];
                let mut dv = vec![T::zero(); m * d];
                let mut dp = vec![T::zero(); m];
                for h in 0..*heads {
                    let off = h * dh;
                    for i in 0..n {
                        let visible = match mask {
                            Mask::Full => m,
                            Mask::Causal => (i + 1).min(m),
                        };
                        let p = &probs[(h * n + i) * m..(h * n + i) * m + visible];
                        let go = &g[i * d + off..i * d + off + dh];
                        let mut dot = T::zero();
                        for j in 0..visible {
                            let vj = &vv.data[j * d + off..j * d + off + dh];
                            dp[j] = go.iter().zip(vj).map(|(a, b)| *a * *b).sum();
                            dot += p[j] * dp[j];
                            for t in 0..dh {
                                dv[j * d + off + t] += p[j] * go[t];
                            }
                        }
                        let qi = &qv.data[i * d + off..i * d + off + dh];
                        for j in 0..visible {
                            let ds = p[j] * (dp[j] - dot) * scale;
                            if ds == T::zero() {
                                continue;
                            }
                            let kj = &kv.data[j * d + off..j * d + off + dh];
                            for t in 0..dh {
                                dq[i * d + off + t] += ds * kj[t];
                                dk[j * d + off + t] += ds * qi[t];
                            }
                        }
                    }
                }
                for (t, dt) in [(*q, dq), (*k, dk), (*v, dv)] {
                    if let Some(gt) = self.acc(grads, t) {
                        gt.iter_mut().zip(&dt).for_each(|(p, q)| *p += *q);
                    }
                }
            }
            Op::Asg { q, k, v, e, nbrs, heads, probs } => {
                let (qv, kv, vv, ev) = (
                    self.value(Var(*q)),
                    self.value(Var(*k)),
                    self.value(Var(*v)),
                    self.value(Var(*e)),
                );
                let d = qv.cols;
                let dh = d / heads;
                let scale = T::of(1.0 / (dh as f64).sqrt());
                let mut dq = vec![T::zero(); qv.data.len()];
                let mut dk = vec![T::zero(); kv.data.len()];
                let mut dv = vec![T::zero(); vv.data.len()];
                let mut de = vec![T::zero(); ev.data.len()];
                for (i, nb) in nbrs.iter().enumerate() {
                    let mut dp = vec![T::zero(); nb.len()];
                    for h in 0..*heads {
                        let off = h * dh;
                        let p = &probs[i][h * nb.len()..(h + 1) * nb.len()];
                        let gv_ = &g[i * 2 * d + off..i * 2 * d + off + dh];
                        let ge = &g[i * 2 * d + d + off..i * 2 * d + d + off + dh];
                        let mut dot = T::zero();
                        for (idx, &(j, l)) in nb.iter().enumerate() {
                            let vj = &vv.data[j * d + off..j * d + off + dh];
                            let el = &ev.data[l * d + off..l * d + off + dh];
                            dp[idx] = (0..dh).map(|t| gv_[t] * vj[t] + ge[t] * el[t]).sum();
                            dot += p[idx] * dp[idx];
                            for t in 0..dh {
                                dv[j * d + off + t] += p[idx] * gv_[t];
                                de[l * d + off + t] += p[idx] * ge[t];
                            }
                        }
                        let qi = &qv.data[i * d + off..i * d + off + dh];
                        for (idx, &(j, l)) in nb.iter().enumerate() {
                            let ds = p[idx] * (dp[idx] - dot) * scale;
                            for t in 0..dh {
                                let kj = kv.data[j * d + off + t];
                                let el = ev.data[l * d + off + t];
                                dq[i * d + off + t] += ds * (kj + el);
                                dk[j * d + off + t] += ds * qi[t];
                                de[l * d + off + t] += ds * qi[t];
                            }
                        }
                    }
                }
                for (t, dt) in [(*q, dq), (*k, dk), (*v, dv), (*e, de)] {
                    if let Some(gt) = self.acc(grads, t) {
                        gt.iter_mut().zip(&dt).for_each(|(p, q)| *p += *q);
                    }
                }
            }
            Op::Loss { logits, rows, probs, .. } => {
                let cols = self.value(Var(*logits)).cols;
                let up = g[0];
                if let Some(gl) = self.acc(grads, *logits) {
                    for (r, s) in rows.iter().zip(probs) {
                        let w = r.weight * up;
                        let base = r.row * cols;
                        for c in 0..r.len {
                            let mut d = s[c];
                            if c == r.gold {
                                d -= T::one();
                            }
                            if let Some(t) = &r.teacher {
                                d += r.kl_weight * (s[c] - t[c]);
                            }
                            gl[base + c] += w * d;
                        }
                    }
                }
            }
        }
    }
}

/// `−log p[gold]` with the probability floored.
pub fn cross_entropy<T: Scalar>(p: &[T], gold: usize) -> f64 {
    assert!(gold < p.len(), "gold index {gold} out of range");
    -p[gold].f64().max(PROB_FLOOR).ln()
}

/// `Σ t log(t / s)` with `0 · log 0 = 0` and floored probabilities.
pub fn kl_divergence<T: Scalar>(student: &[T], teacher: &[T]) -> f64 {
    student
        .iter()
        .zip(teacher)
        .filter(|(_, t)| t.f64() > 0.0)
        .map(|(s, t)| {
            let (s, t) = (s.f64().max(PROB_FLOOR), t.f64().max(PROB_FLOOR));
            t * (t / s).ln()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor<f64> {
        Tensor::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    /// Finite-difference check of a scalar function of the parameters.
    fn check(params: Vec<Tensor<f64>>, f: impl Fn(&mut Tape<f64>) -> Var) {
        let tape_grads = {
            let mut t = Tape::new(&params);
            let out = f(&mut t);
            t.backward(out)
        };
        let h = 1e-6;
        for (p, g) in tape_grads.iter().enumerate() {
            let g = g.as_ref().expect("parameter used");
            for k in 0..params[p].data.len() {
                let mut plus = params.clone();
                plus[p].data[k] += h;
                let mut minus = params.clone();
                minus[p].data[k] -= h;
                let fp = {
                    let mut t = Tape::new(&plus);
                    let o = f(&mut t);
                    t.value(o).data[0]
                };
                let fm = {
                    let mut t = Tape::new(&minus);
                    let o = f(&mut t);
                    t.value(o).data[0]
                };
                let fd = (fp - fm) / (2.0 * h);
                let err = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-6);
                assert!(err < 1e-5, "param {p}[{k}]: fd {fd} vs {}", g[k]);
            }
        }
    }

    fn rows(n: usize, cols: usize) -> Vec<LossRow<f64>> {
        (0..n)
            .map(|r| LossRow {
                row: r,
                len: cols - r % 2,
                gold: r % (cols - 1),
                teacher: None,
                weight: 1.0,
                kl_weight: 1.0,
            })
            .collect()
    }

    #[test]
    fn dense_ops_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = vec![
            rand_tensor(&mut rng, 3, 4),
            rand_tensor(&mut rng, 4, 5),
            rand_tensor(&mut rng, 1, 5),
            rand_tensor(&mut rng, 1, 5),
            rand_tensor(&mut rng, 6, 5),
        ];
        check(params, |t| {
            let x = t.param(0);
            let w = t.param(1);
            let h = t.matmul(x, w, false);
            let b = t.param(2);
            let h = t.add_row(h, b);
            let h = t.gelu(h);
            let g = t.param(3);
            let h = t.layer_norm(h, g, b);
            let e = t.param(4);
            let h2 = t.gather(e, &[0, 5, 2]);
            let h = t.add(h, h2);
            let h = t.scale(h, 0.7);
            let z = t.matmul(h, e, true);
            t.softmax_loss(z, rows(3, 6))
        });
    }

    #[test]
    fn attention_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = vec![
            rand_tensor(&mut rng, 4, 6),
            rand_tensor(&mut rng, 5, 6),
            rand_tensor(&mut rng, 5, 6),
            rand_tensor(&mut rng, 6, 4),
        ];
        for mask in [Mask::Full, Mask::Causal] {
            check(params.clone(), |t| {
                let (q, k, v, w) = (t.param(0), t.param(1), t.param(2), t.param(3));
                let a = t.attention(q, k, v, 2, mask);
                let z = t.matmul(a, w, false);
                t.softmax_loss(z, rows(4, 4))
            });
        }
        let nbrs: Neighbors = Arc::new(vec![vec![(1, 0), (2, 2)], vec![], vec![(0, 1)], vec![(3, 1), (0, 0), (1, 2)]]);
        let params2 = vec![
            rand_tensor(&mut rng, 4, 6),
            rand_tensor(&mut rng, 4, 6),
            rand_tensor(&mut rng, 4, 6),
            rand_tensor(&mut rng, 3, 6),
            rand_tensor(&mut rng, 12, 4),
        ];
        check(params2, |t| {
            let (q, k, v, e, w) = (t.param(0), t.param(1), t.param(2), t.param(3), t.param(4));
            let a = t.asg_attention(q, k, v, e, nbrs.clone(), 3);
            let z = t.matmul(a, w, false);
            t.softmax_loss(z, rows(4, 4))
        });
    }

    #[test]
    fn loss_with_teacher_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = vec![rand_tensor(&mut rng, 2, 5)];
        let teacher = vec![0.5, 0.0, 0.25, 0.25, 0.0];
        check(params, |t| {
            let z = t.param(0);
            t.softmax_loss(
                z,
                vec![
                    LossRow { row: 0, len: 5, gold: 2, teacher: Some(teacher.clone()), weight: 0.5, kl_weight: 0.7 },
                    LossRow { row: 1, len: 3, gold: 0, teacher: Some(vec![0.2, 0.3, 0.5]), weight: 0.5, kl_weight: 0.7 },
                ],
            )
        });
    }

    #[test]
    fn loss_scalars() {
        assert!((cross_entropy(&[0.25f64; 4], 1) - 4f64.ln()).abs() < 1e-12);
        assert_eq!(cross_entropy(&[0.0f64, 1.0], 1), 0.0);
        assert_eq!(kl_divergence(&[0.2f64, 0.8], &[0.2, 0.8]), 0.0);
        assert!((kl_divergence(&[0.3f64, 0.7], &[1.0, 0.0]) + 0.3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn isolated_rows_are_zero() {
        let params = vec![Tensor::from_vec(2, 2, vec![1.0f64, 2.0, 3.0, 4.0]), Tensor::zeros(1, 2)];
        let mut t = Tape::new(&params);
        let (x, e) = (t.param(0), t.param(1));
        let a = t.asg_attention(x, x, x, e, Arc::new(vec![vec![], vec![(0, 0)]]), 1);
        assert_eq!(t.value(a).row(0), &[0.0; 4]);
        assert_eq!(t.value(a).row(1), &[1.0, 2.0, 0.0, 0.0]);
    }
}
