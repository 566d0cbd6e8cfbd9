//! Incremental decoding for search. Each decoder position is computed once
//! and cached; hypotheses share cached positions through `Arc`.

use std::sync::Arc;

use treemend_core::graph::{Asg, EOT_EDGE};

use crate::model::{tree_neighbors, Forward, Model};
use crate::params::{AttnIds, DecLayer, FfnIds, NormIds};
use crate::scalar::Scalar;
use crate::tape::Tape;
use crate::tensor::{gelu, layer_norm_row, matmul, softmax, Tensor};
use crate::NeuralError;

/// Cross-attention keys and values of one decoder layer.
#[derive(Debug, Clone)]
struct CrossKv<T> {
    k: Tensor<T>,
    v: Tensor<T>,
}

/// Encoder output of one bug, projected for every decoder layer.
#[derive(Debug, Clone)]
pub struct Memory<T> {
    pub enc: Tensor<T>,
    parent: Vec<CrossKv<T>>,
    edge: Vec<CrossKv<T>>,
    node: Vec<CrossKv<T>>,
}

/// Cached keys and values of one position in one decoder layer.
#[derive(Debug, Clone)]
struct LayerCache<T> {
    sa_k: Vec<T>,
    sa_v: Vec<T>,
    asg_k: Vec<T>,
    asg_v: Vec<T>,
}

/// One position of one decoder stack.
#[derive(Debug, Clone)]
pub struct StackPos<T> {
    layers: Vec<LayerCache<T>>,
    pub out: Vec<T>,
    /// Pointer key (parent stack only).
    ptr_k: Vec<T>,
}

/// Decoder state of one hypothesis. Positions `0..=i` exist for the parent
/// stack once [`DecState::parent_step`] ran; edge and node stacks hold
/// committed positions only.
#[derive(Debug, Clone)]
pub struct DecState<T> {
    pub labels: Vec<usize>,
    pub in_edges: Vec<usize>,
    pub pos_parents: Vec<usize>,
    nbrs: Vec<Arc<Vec<(usize, usize)>>>,
    parent: Vec<Arc<StackPos<T>>>,
    edge: Vec<Arc<StackPos<T>>>,
    node: Vec<Arc<StackPos<T>>>,
}

fn vecmat<T: Scalar>(x: &[T], w: &Tensor<T>) -> Vec<T> {
    let mut out = vec![T::zero(); w.cols];
    matmul(x, 1, x.len(), false, &w.data, w.rows, w.cols, false, &mut out, false);
    out
}

fn add<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| *x + *y).collect()
}

impl<T: Scalar> Model<T> {
    fn w(&self, id: usize) -> &Tensor<T> {
        &self.params.tensors[id]
    }

    fn norm_row(&self, x: &[T], n: NormIds) -> Vec<T> {
        let mut out = vec![T::zero(); x.len()];
        layer_norm_row(x, &self.w(n.g).data, &self.w(n.b).data, &mut out);
        out
    }

    fn ffn_row(&self, x: &[T], f: FfnIds) -> Vec<T> {
        let h: Vec<T> = add(&vecmat(x, self.w(f.w1)), &self.w(f.b1).data).into_iter().map(gelu).collect();
        add(&vecmat(&h, self.w(f.w2)), &self.w(f.b2).data)
    }

    /// Multi-head attention of one query over key/value rows.
    fn attend_row<'a>(&self, q: &[T], kv: impl Iterator<Item = (&'a [T], &'a [T])> + Clone) -> Vec<T>
    where
        T: 'a,
    {
        let d = q.len();
        let heads = self.cfg.heads;
        let dh = d / heads;
        let scale = T::of(1.0 / (dh as f64).sqrt());
        let mut out = vec![T::zero(); d];
        for h in 0..heads {
            let hs = h * dh..(h + 1) * dh;
            let qi = &q[hs.clone()];
            let mut p: Vec<T> = kv
                .clone()
                .map(|(k, _)| qi.iter().zip(&k[hs.clone()]).map(|(a, b)| *a * *b).sum::<T>() * scale)
                .collect();
            softmax(&mut p);
            for (pj, (_, v)) in p.iter().zip(kv.clone()) {
                for (o, vv) in out[hs.clone()].iter_mut().zip(&v[hs.clone()]) {
                    *o += *pj * *vv;
                }
            }
        }
        out
    }

    /// Graph attention of one query over `(key, value, edge row)` triples;
    /// returns the `2d` concatenation.
    fn graph_row(&self, q: &[T], nb: &[(&[T], &[T], &[T])]) -> Vec<T> {
        let d = q.len();
        let heads = self.cfg.heads;
        let dh = d / heads;
        let scale = T::of(1.0 / (dh as f64).sqrt());
        let mut out = vec![T::zero(); 2 * d];
        for h in 0..heads {
            let off = h * dh;
            let mut p: Vec<T> = nb
                .iter()
                .map(|(k, _, e)| (0..dh).map(|t| q[off + t] * (k[off + t] + e[off + t])).sum::<T>() * scale)
                .collect();
            softmax(&mut p);
            for (pj, (_, v, e)) in p.iter().zip(nb) {
                for t in 0..dh {
                    out[off + t] += *pj * v[off + t];
                    out[d + off + t] += *pj * e[off + t];
                }
            }
        }
        out
    }

    fn project(&self, a: AttnIds, x: &Tensor<T>) -> CrossKv<T> {
        let mut k = Tensor::zeros(x.rows, self.cfg.d);
        let mut v = Tensor::zeros(x.rows, self.cfg.d);
        let (wk, wv) = (self.w(a.wk), self.w(a.wv));
        matmul(&x.data, x.rows, x.cols, false, &wk.data, wk.rows, wk.cols, false, &mut k.data, false);
        matmul(&x.data, x.rows, x.cols, false, &wv.data, wv.rows, wv.cols, false, &mut v.data, false);
        CrossKv { k, v }
    }

    /// Encode a bug and precompute cross-attention keys and values.
    pub fn memory(&self, asg: &Asg) -> Result<Memory<T>, NeuralError> {
        let mut tape = Tape::new(&self.params.tensors);
        let enc = {
            let mut f = Forward::new(&mut tape, self, None);
            let v = f.encode(asg)?;
            f.tape.value(v).clone()
        };
        let proj = |ls: &[DecLayer]| ls.iter().map(|l| self.project(l.ca, &enc)).collect();
        Ok(Memory {
            parent: proj(&self.layout.parent),
            edge: proj(&self.layout.edge),
            node: proj(&self.layout.node),
            enc,
        })
    }

    /// Run one new position `i` through a decoder stack.
    fn stack_row(
        &self,
        layers: &[DecLayer],
        cross: &[CrossKv<T>],
        prev: &[Arc<StackPos<T>>],
        nbrs: &[(usize, usize)],
        x0: Vec<T>,
    ) -> StackPos<T> {
        let adj = self.w(self.layout.emb_adj);
        let mut x = x0;
        let mut caches = Vec::with_capacity(layers.len());
        for (li, l) in layers.iter().enumerate() {
            let sa_k = vecmat(&x, self.w(l.sa.wk));
            let sa_v = vecmat(&x, self.w(l.sa.wv));
            let q = vecmat(&x, self.w(l.sa.wq));
            let kv = prev
                .iter()
                .map(|p| (p.layers[li].sa_k.as_slice(), p.layers[li].sa_v.as_slice()))
                .chain(std::iter::once((sa_k.as_slice(), sa_v.as_slice())));
            let a = vecmat(&self.attend_row(&q, kv), self.w(l.sa.wo));
            x = self.norm_row(&add(&x, &a), l.ln1);

            let asg_k = vecmat(&x, self.w(l.asg.wk));
            let asg_v = vecmat(&x, self.w(l.asg.wv));
            let q = vecmat(&x, self.w(l.asg.wq));
            let nb: Vec<(&[T], &[T], &[T])> = nbrs
                .iter()
                .map(|&(j, lab)| {
                    let c = &prev[j].layers[li];
                    (c.asg_k.as_slice(), c.asg_v.as_slice(), adj.row(lab))
                })
                .collect();
            let g = vecmat(&self.graph_row(&q, &nb), self.w(l.asg.wo));
            x = self.norm_row(&add(&x, &g), l.ln2);

            let q = vecmat(&x, self.w(l.ca.wq));
            let ck = &cross[li];
            let kv = (0..ck.k.rows).map(|j| (ck.k.row(j), ck.v.row(j)));
            let c = vecmat(&self.attend_row(&q, kv), self.w(l.ca.wo));
            x = self.norm_row(&add(&x, &c), l.ln3);

            let f = self.ffn_row(&x, l.ffn);
            x = self.norm_row(&add(&x, &f), l.ln4);
            caches.push(LayerCache { sa_k, sa_v, asg_k, asg_v });
        }
        StackPos {
            layers: caches,
            out: x,
            ptr_k: Vec::new(),
        }
    }
}

fn probs<T: Scalar>(logits: &[T]) -> Vec<f64> {
    let mut p: Vec<f64> = logits.iter().map(|x| x.f64()).collect();
    softmax(&mut p);
    p
}

impl<T: Scalar> DecState<T> {
    pub fn new(root: usize) -> Self {
        Self {
            labels: vec![root],
            in_edges: vec![EOT_EDGE],
            pos_parents: vec![usize::MAX],
            nbrs: vec![Arc::new(Vec::new())],
            parent: Vec::new(),
            edge: Vec::new(),
            node: Vec::new(),
        }
    }

    /// Index of the newest node.
    pub fn current(&self) -> usize {
        self.labels.len() - 1
    }

    /// Number of committed steps.
    pub fn steps(&self) -> usize {
        self.edge.len()
    }

    /// Compute the parent-stack position of the newest node (once) and
    /// return the pointer distribution over nodes `0..=i`.
    pub fn parent_step(&mut self, m: &Model<T>, mem: &Memory<T>) -> Result<Vec<f64>, NeuralError> {
        let i = self.current();
        if i >= m.cfg.max_steps {
            return Err(NeuralError::TooLong { what: "decoder target", len: i + 1, max: m.cfg.max_steps });
        }
        if self.parent.len() == i {
            let ly = &m.layout;
            let x = add(
                &add(m.w(ly.emb_node).row(self.labels[i]), m.w(ly.emb_dec_edge).row(self.in_edges[i])),
                m.w(ly.emb_dec_pos).row(i),
            );
            let mut pos = m.stack_row(&ly.parent, &mem.parent, &self.parent, &self.nbrs[i], x);
            pos.ptr_k = vecmat(&pos.out, m.w(ly.ptr_k));
            self.parent.push(Arc::new(pos));
        }
        let q = vecmat(&self.parent[i].out, m.w(m.layout.ptr_q));
        let scale = T::of(1.0 / (m.cfg.d as f64).sqrt());
        let logits: Vec<T> = self
            .parent
            .iter()
            .map(|p| q.iter().zip(&p.ptr_k).map(|(a, b)| *a * *b).sum::<T>() * scale)
            .collect();
        Ok(probs(&logits))
    }

    /// Edge-stack position for parent `p`; returns it with the edge
    /// distribution.
    pub fn edge_step(&self, m: &Model<T>, mem: &Memory<T>, p: usize) -> (Arc<StackPos<T>>, Vec<f64>) {
        let i = self.current();
        let ly = &m.layout;
        let x = vecmat(&add(&self.parent[i].out, &self.parent[p].out), m.w(ly.fuse_edge));
        let pos = m.stack_row(&ly.edge, &mem.edge, &self.edge, &self.nbrs[i], x);
        let logits = add(&vecmat(&pos.out, m.w(ly.gen_edge_w)), &m.w(ly.gen_edge_b).data);
        (Arc::new(pos), probs(&logits))
    }

    /// Node-stack position for parent `p` and edge `e`; returns it with the
    /// node distribution.
    pub fn node_step(
        &self,
        m: &Model<T>,
        mem: &Memory<T>,
        edge_pos: &StackPos<T>,
        p: usize,
        e: usize,
    ) -> (Arc<StackPos<T>>, Vec<f64>) {
        let i = self.current();
        let ly = &m.layout;
        let hp = if p == i { &edge_pos.out } else { &self.edge[p].out };
        let f = add(&add(&edge_pos.out, hp), m.w(ly.emb_dec_edge).row(e));
        let x = vecmat(&f, m.w(ly.fuse_node));
        let pos = m.stack_row(&ly.node, &mem.node, &self.node, &self.nbrs[i], x);
        let logits = add(&vecmat(&pos.out, m.w(ly.gen_node_w)), &m.w(ly.gen_node_b).data);
        (Arc::new(pos), probs(&logits))
    }

    /// Record step `(p, e, label)`. For the end step no node is added.
    pub fn commit(&mut self, p: usize, e: usize, label: usize, edge_pos: Arc<StackPos<T>>, node_pos: Arc<StackPos<T>>) {
        self.edge.push(edge_pos);
        self.node.push(node_pos);
        if e != EOT_EDGE {
            self.nbrs.push(Arc::new(tree_neighbors(&self.pos_parents, p, e)));
            self.labels.push(label);
            self.in_edges.push(e);
            self.pos_parents.push(p);
        }
    }
}
