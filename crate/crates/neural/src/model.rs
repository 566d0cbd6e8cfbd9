//! Graph-transformer encoder and the three-stage tree decoder, built on the
//! tape for training.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use treemend_core::graph::{reverse_id, Asg, DecEdge, EncodedSteps, EOT_EDGE, SIBLING_ID};
use treemend_core::teacher::StepDistributions;

use crate::config::ModelConfig;
use crate::params::{init_params, AttnIds, DecLayer, EncLayer, FfnIds, Layout, NormIds, ParamStore};
use crate::scalar::Scalar;
use crate::tape::{LossRow, Mask, Neighbors, Tape, Var};
use crate::tensor::softmax;
use crate::NeuralError;

#[derive(Debug, Clone)]
pub struct Model<T> {
    pub cfg: ModelConfig,
    pub layout: Layout,
    pub params: ParamStore<T>,
}

impl<T: Scalar> Model<T> {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self, NeuralError> {
        cfg.validate()?;
        let (layout, shapes) = Layout::build(&cfg);
        let params = init_params(&shapes, seed);
        Ok(Self { cfg, layout, params })
    }

    /// Same architecture with parameters converted to another precision.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            cfg: self.cfg.clone(),
            layout: self.layout.clone(),
            params: self.params.cast(),
        }
    }

    pub fn check_asg(&self, asg: &Asg) -> Result<(), NeuralError> {
        if asg.is_empty() || asg.len() > self.cfg.max_len {
            return Err(NeuralError::TooLong { what: "encoder input", len: asg.len(), max: self.cfg.max_len });
        }
        if let Some(&l) = asg.node_seq.iter().find(|&&l| l >= self.cfg.node_vocab) {
            return Err(NeuralError::Label(l));
        }
        if let Some(&(_, _, a)) = asg.adjacency.iter().find(|t| t.2 >= self.cfg.adjacency_vocab) {
            return Err(NeuralError::Label(a));
        }
        Ok(())
    }
}

/// Decoder-side inputs derived from a (gold or partial) step sequence.
/// Position `i` holds node `i`; node `0` is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct DecInputs {
    /// Node label per position.
    pub labels: Vec<usize>,
    /// Id of the edge entering each position (`EOT_EDGE` for the root).
    pub in_edges: Vec<usize>,
    /// Parent, edge and node chosen at each step.
    pub parents: Vec<usize>,
    pub edges: Vec<usize>,
    pub nodes: Vec<usize>,
    /// Parent and previous-sibling links of each position.
    pub tree_nbrs: Neighbors,
}

/// Structural neighbors of the newest position given the parent and edge
/// that created it and the parents of earlier positions.
pub fn tree_neighbors(pos_parents: &[usize], parent: usize, edge: usize) -> Vec<(usize, usize)> {
    let label = DecEdge::from_id(edge).and_then(DecEdge::label).expect("structural edge");
    let mut nb = vec![(parent, reverse_id(label))];
    let i = pos_parents.len();
    if let Some(sib) = (1..i).rev().find(|&k| pos_parents[k] == parent) {
        nb.push((sib, SIBLING_ID));
    }
    nb.sort_unstable();
    nb
}

impl DecInputs {
    /// Positions `0..T` for `T` steps; the node of the last step is never
    /// fed back.
    pub fn from_steps(steps: &EncodedSteps) -> Self {
        let t = steps.steps.len();
        let mut labels = vec![steps.root];
        let mut in_edges = vec![EOT_EDGE];
        let mut pos_parents = vec![usize::MAX];
        let mut nbrs = vec![Vec::new()];
        for &(p, e, n) in steps.steps.iter().take(t.saturating_sub(1)) {
            nbrs.push(tree_neighbors(&pos_parents, p, e));
            labels.push(n);
            in_edges.push(e);
            pos_parents.push(p);
        }
        Self {
            labels,
            in_edges,
            parents: steps.steps.iter().map(|s| s.0).collect(),
            edges: steps.steps.iter().map(|s| s.1).collect(),
            nodes: steps.steps.iter().map(|s| s.2).collect(),
            tree_nbrs: Arc::new(nbrs),
        }
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }
}

/// Logit variables of the three heads, one row per step.
#[derive(Debug, Clone, Copy)]
pub struct Heads {
    /// `T × T`; row `i` is meaningful on its first `i + 1` columns.
    pub parent: Var,
    pub edge: Var,
    pub node: Var,
}

/// One forward pass on a tape. Dropout is active when `rng` is set.
pub struct Forward<'t, 'p, T: Scalar> {
    pub tape: &'t mut Tape<'p, T>,
    pub model: &'p Model<T>,
    pub rng: Option<&'t mut ChaCha8Rng>,
}

impl<'t, 'p, T: Scalar> Forward<'t, 'p, T> {
    pub fn new(tape: &'t mut Tape<'p, T>, model: &'p Model<T>, rng: Option<&'t mut ChaCha8Rng>) -> Self {
        Self { tape, model, rng }
    }

    fn p(&mut self, id: usize) -> Var {
        self.tape.param(id)
    }

    fn lin(&mut self, x: Var, w: usize) -> Var {
        let w = self.p(w);
        self.tape.matmul(x, w, false)
    }

    fn drop(&mut self, x: Var) -> Var {
        let rate = self.model.cfg.dropout;
        let Some(rng) = self.rng.as_deref_mut() else { return x };
        if rate == 0.0 {
            return x;
        }
        let n = self.tape.value(x).data.len();
        let keep = T::of(1.0 / (1.0 - rate));
        let mask = (0..n).map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep }).collect();
        self.tape.dropout(x, mask)
    }

    fn norm(&mut self, x: Var, n: NormIds) -> Var {
        let (g, b) = (self.p(n.g), self.p(n.b));
        self.tape.layer_norm(x, g, b)
    }

    fn residual(&mut self, x: Var, sub: Var, n: NormIds) -> Var {
        let sub = self.drop(sub);
        let s = self.tape.add(x, sub);
        self.norm(s, n)
    }

    fn attend(&mut self, x: Var, mem: Var, a: AttnIds, mask: Mask) -> Var {
        let q = self.lin(x, a.wq);
        let k = self.lin(mem, a.wk);
        let v = self.lin(mem, a.wv);
        let o = self.tape.attention(q, k, v, self.model.cfg.heads, mask);
        self.lin(o, a.wo)
    }

    fn graph_attend(&mut self, x: Var, a: AttnIds, nbrs: Neighbors) -> Var {
        let q = self.lin(x, a.wq);
        let k = self.lin(x, a.wk);
        let v = self.lin(x, a.wv);
        let e = self.p(self.model.layout.emb_adj);
        let o = self.tape.asg_attention(q, k, v, e, nbrs, self.model.cfg.heads);
        self.lin(o, a.wo)
    }

    fn ffn(&mut self, x: Var, f: FfnIds) -> Var {
        let h = self.lin(x, f.w1);
        let b1 = self.p(f.b1);
        let h = self.tape.add_row(h, b1);
        let h = self.tape.gelu(h);
        let h = self.drop(h);
        let h = self.lin(h, f.w2);
        let b2 = self.p(f.b2);
        self.tape.add_row(h, b2)
    }

    fn enc_layer(&mut self, x: Var, l: &EncLayer, nbrs: &Neighbors) -> Var {
        let a = self.attend(x, x, l.sa, Mask::Full);
        let x = self.residual(x, a, l.ln1);
        let g = self.graph_attend(x, l.asg, nbrs.clone());
        let x = self.residual(x, g, l.ln2);
        let f = self.ffn(x, l.ffn);
        self.residual(x, f, l.ln3)
    }

    fn dec_layer(&mut self, x: Var, enc: Var, l: &DecLayer, nbrs: &Neighbors) -> Var {
        let a = self.attend(x, x, l.sa, Mask::Causal);
        let x = self.residual(x, a, l.ln1);
        let g = self.graph_attend(x, l.asg, nbrs.clone());
        let x = self.residual(x, g, l.ln2);
        let c = self.attend(x, enc, l.ca, Mask::Full);
        let x = self.residual(x, c, l.ln3);
        let f = self.ffn(x, l.ffn);
        self.residual(x, f, l.ln4)
    }

    /// Embeddings `n_i + t_i + p_i` of the graph nodes.
    pub fn embed(&mut self, asg: &Asg) -> Result<Var, NeuralError> {
        let model = self.model;
        model.check_asg(asg)?;
        let ly = &model.layout;
        let (en, ef, ep) = (self.p(ly.emb_node), self.p(ly.emb_flag), self.p(ly.emb_pos));
        let n = self.tape.gather(en, &asg.node_seq);
        let flags: Vec<usize> = asg.buggy_loc.iter().map(|&b| b as usize).collect();
        let t = self.tape.gather(ef, &flags);
        let pos: Vec<usize> = (0..asg.len()).collect();
        let p = self.tape.gather(ep, &pos);
        let x = self.tape.add(n, t);
        Ok(self.tape.add(x, p))
    }

    pub fn encode(&mut self, asg: &Asg) -> Result<Var, NeuralError> {
        let x = self.embed(asg)?;
        let mut x = self.drop(x);
        let nbrs: Neighbors = Arc::new(asg.neighbors());
        let model = self.model;
        for l in &model.layout.enc {
            x = self.enc_layer(x, l, &nbrs);
        }
        Ok(x)
    }

    /// Teacher-forced decoding of all steps.
    pub fn decode(&mut self, enc: Var, inp: &DecInputs) -> Result<Heads, NeuralError> {
        let cfg = &self.model.cfg;
        let t = inp.len();
        if t == 0 || t > cfg.max_steps {
            return Err(NeuralError::TooLong { what: "decoder target", len: t, max: cfg.max_steps });
        }
        if let Some(&l) = inp.labels.iter().chain(&inp.nodes).find(|&&l| l >= cfg.node_vocab) {
            return Err(NeuralError::Label(l));
        }
        if let Some(&e) = inp.edges.iter().find(|&&e| e >= cfg.edge_vocab) {
            return Err(NeuralError::Label(e));
        }
        if let Some((i, _)) = inp.parents.iter().enumerate().find(|(i, &p)| p > *i) {
            return Err(NeuralError::Config(format!("step {i} points past the emitted nodes")));
        }
        let model = self.model;
        let ly = &model.layout;

        let (en, ee, ep) = (self.p(ly.emb_node), self.p(ly.emb_dec_edge), self.p(ly.emb_dec_pos));
        let n = self.tape.gather(en, &inp.labels);
        let e = self.tape.gather(ee, &inp.in_edges);
        let pos: Vec<usize> = (0..t).collect();
        let p = self.tape.gather(ep, &pos);
        let x = self.tape.add(n, e);
        let x = self.tape.add(x, p);
        let mut hp = self.drop(x);
        for l in &ly.parent {
            hp = self.dec_layer(hp, enc, l, &inp.tree_nbrs);
        }

        let parent = self.pointer(hp);
        let mut he = self.edge_fusion(hp, &inp.parents);
        for l in &ly.edge {
            he = self.dec_layer(he, enc, l, &inp.tree_nbrs);
        }
        let z = self.lin(he, ly.gen_edge_w);
        let b = self.p(ly.gen_edge_b);
        let edge = self.tape.add_row(z, b);

        let mut hn = self.node_fusion(he, &inp.parents, &inp.edges);
        for l in &ly.node {
            hn = self.dec_layer(hn, enc, l, &inp.tree_nbrs);
        }
        let z = self.lin(hn, ly.gen_node_w);
        let b = self.p(ly.gen_node_b);
        let node = self.tape.add_row(z, b);
        Ok(Heads { parent, edge, node })
    }

    /// Pointer logits `W_q h_i · W_k h_j / √d` for all pairs.
    pub fn pointer(&mut self, h: Var) -> Var {
        let ly = &self.model.layout;
        let (wq, wk) = (ly.ptr_q, ly.ptr_k);
        let q = self.lin(h, wq);
        let k = self.lin(h, wk);
        let s = self.tape.matmul(q, k, true);
        self.tape.scale(s, T::of(1.0 / (self.model.cfg.d as f64).sqrt()))
    }

    /// Edge-stack input `W_f (h_i + h_{p_i})`.
    pub fn edge_fusion(&mut self, hp: Var, parents: &[usize]) -> Var {
        let hpp = self.tape.gather(hp, parents);
        let f = self.tape.add(hp, hpp);
        self.lin(f, self.model.layout.fuse_edge)
    }

    /// Node-stack input `W_f' (h_i + h_{p_i} + e^d[e_i])`.
    pub fn node_fusion(&mut self, he: Var, parents: &[usize], edges: &[usize]) -> Var {
        let ee = self.p(self.model.layout.emb_dec_edge);
        let hep = self.tape.gather(he, parents);
        let ed = self.tape.gather(ee, edges);
        let f = self.tape.add(he, hep);
        let f = self.tape.add(f, ed);
        self.lin(f, self.model.layout.fuse_node)
    }

    /// Student distributions per step, in f64.
    pub fn distributions(&self, heads: Heads) -> Vec<StepDistributions> {
        let row = |v: Var, r: usize, len: usize| {
            let mut x: Vec<f64> = self.tape.value(v).row(r)[..len].iter().map(|x| x.f64()).collect();
            softmax(&mut x);
            x
        };
        let t = self.tape.value(heads.edge).rows;
        (0..t)
            .map(|i| StepDistributions {
                parent: row(heads.parent, i, i + 1),
                edge: row(heads.edge, i, self.model.cfg.edge_vocab),
                node: row(heads.node, i, self.model.cfg.node_vocab),
            })
            .collect()
    }

    /// Mean over steps of the three cross-entropies plus, when teachers are
    /// given, the three divergences from the (detached) teachers.
    pub fn joint_loss(
        &mut self,
        heads: Heads,
        inp: &DecInputs,
        teachers: Option<&[StepDistributions]>,
        kl_weight: f64,
    ) -> (Var, Var, Var) {
        let t = inp.len();
        let w = T::of(1.0 / t as f64);
        let cvt = |v: &[f64]| v.iter().map(|x| T::of(*x)).collect::<Vec<T>>();
        let mk = |len: usize, gold: &[usize], pick: &dyn Fn(&StepDistributions) -> &Vec<f64>| -> Vec<LossRow<T>> {
            (0..t)
                .map(|i| LossRow {
                    row: i,
                    len: if len == 0 { i + 1 } else { len },
                    gold: gold[i],
                    teacher: teachers.map(|ts| cvt(pick(&ts[i]))),
                    weight: w,
                    kl_weight: T::of(kl_weight),
                })
                .collect()
        };
        let rp = mk(0, &inp.parents, &|s| &s.parent);
        let re = mk(self.model.cfg.edge_vocab, &inp.edges, &|s| &s.edge);
        let rn = mk(self.model.cfg.node_vocab, &inp.nodes, &|s| &s.node);
        let lp = self.tape.softmax_loss(heads.parent, rp);
        let le = self.tape.softmax_loss(heads.edge, re);
        let ln = self.tape.softmax_loss(heads.node, rn);
        (lp, le, ln)
    }

    /// Sum of the three head losses as one scalar.
    pub fn total(&mut self, parts: (Var, Var, Var)) -> Var {
        let s = self.tape.add(parts.0, parts.1);
        self.tape.add(s, parts.2)
    }
}
