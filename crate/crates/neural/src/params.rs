//! Named parameter storage and the fixed parameter layout of a model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Uniform in ±√(6 / (rows + cols)).
    Xavier,
    Zeros,
    Ones,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AttnIds {
    pub wq: usize,
    pub wk: usize,
    pub wv: usize,
    /// Output projection; `2d × d` for graph attention.
    pub wo: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct NormIds {
    pub g: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct FfnIds {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct EncLayer {
    pub sa: AttnIds,
    pub ln1: NormIds,
    pub asg: AttnIds,
    pub ln2: NormIds,
    pub ffn: FfnIds,
    pub ln3: NormIds,
}

#[derive(Debug, Clone, Copy)]
pub struct DecLayer {
    pub sa: AttnIds,
    pub ln1: NormIds,
    pub asg: AttnIds,
    pub ln2: NormIds,
    pub ca: AttnIds,
    pub ln3: NormIds,
    pub ffn: FfnIds,
    pub ln4: NormIds,
}

/// Parameter ids of every component.
#[derive(Debug, Clone)]
pub struct Layout {
    pub emb_node: usize,
    pub emb_flag: usize,
    pub emb_pos: usize,
    pub emb_adj: usize,
    pub emb_dec_edge: usize,
    pub emb_dec_pos: usize,
    pub enc: Vec<EncLayer>,
    pub parent: Vec<DecLayer>,
    pub edge: Vec<DecLayer>,
    pub node: Vec<DecLayer>,
    pub ptr_q: usize,
    pub ptr_k: usize,
    pub fuse_edge: usize,
    pub fuse_node: usize,
    pub gen_edge_w: usize,
    pub gen_edge_b: usize,
    pub gen_node_w: usize,
    pub gen_node_b: usize,
}

/// Parameter names and shapes in layout order.
pub type Shapes = Vec<(String, usize, usize, Init)>;

impl Layout {
    pub fn build(cfg: &ModelConfig) -> (Layout, Shapes) {
        let mut shapes: Shapes = Vec::new();
        let d = cfg.d;
        let mut add = |name: String, r: usize, c: usize, init: Init| {
            shapes.push((name, r, c, init));
            shapes.len() - 1
        };
        let attn = |add: &mut dyn FnMut(String, usize, usize, Init) -> usize, p: &str, out_rows: usize| AttnIds {
            wq: add(format!("{p}.wq"), d, d, Init::Xavier),
            wk: add(format!("{p}.wk"), d, d, Init::Xavier),
            wv: add(format!("{p}.wv"), d, d, Init::Xavier),
            wo: add(format!("{p}.wo"), out_rows, d, Init::Xavier),
        };
        let norm = |add: &mut dyn FnMut(String, usize, usize, Init) -> usize, p: &str| NormIds {
            g: add(format!("{p}.g"), 1, d, Init::Ones),
            b: add(format!("{p}.b"), 1, d, Init::Zeros),
        };
        let ffn = |add: &mut dyn FnMut(String, usize, usize, Init) -> usize, p: &str| FfnIds {
            w1: add(format!("{p}.w1"), d, 4 * d, Init::Xavier),
            b1: add(format!("{p}.b1"), 1, 4 * d, Init::Zeros),
            w2: add(format!("{p}.w2"), 4 * d, d, Init::Xavier),
            b2: add(format!("{p}.b2"), 1, d, Init::Zeros),
        };

        let emb_node = add("emb.node".into(), cfg.node_vocab, d, Init::Xavier);
        let emb_flag = add("emb.flag".into(), 3, d, Init::Xavier);
        let emb_pos = add("emb.pos".into(), cfg.max_len, d, Init::Xavier);
        let emb_adj = add("emb.adj".into(), cfg.adjacency_vocab, d, Init::Xavier);
        let emb_dec_edge = add("emb.dec_edge".into(), cfg.edge_vocab, d, Init::Xavier);
        let emb_dec_pos = add("emb.dec_pos".into(), cfg.max_steps, d, Init::Xavier);

        let enc = (0..cfg.encoder_layers)
            .map(|l| {
                let p = format!("enc.{l}");
                EncLayer {
                    sa: attn(&mut add, &format!("{p}.sa"), d),
                    ln1: norm(&mut add, &format!("{p}.ln1")),
                    asg: attn(&mut add, &format!("{p}.asg"), 2 * d),
                    ln2: norm(&mut add, &format!("{p}.ln2")),
                    ffn: ffn(&mut add, &format!("{p}.ffn")),
                    ln3: norm(&mut add, &format!("{p}.ln3")),
                }
            })
            .collect();
        let dec = |stack: &str, n: usize, add: &mut dyn FnMut(String, usize, usize, Init) -> usize| -> Vec<DecLayer> {
            (0..n)
                .map(|l| {
                    let p = format!("dec.{stack}.{l}");
                    DecLayer {
                        sa: attn(add, &format!("{p}.sa"), d),
                        ln1: norm(add, &format!("{p}.ln1")),
                        asg: attn(add, &format!("{p}.asg"), 2 * d),
                        ln2: norm(add, &format!("{p}.ln2")),
                        ca: attn(add, &format!("{p}.ca"), d),
                        ln3: norm(add, &format!("{p}.ln3")),
                        ffn: ffn(add, &format!("{p}.ffn")),
                        ln4: norm(add, &format!("{p}.ln4")),
                    }
                })
                .collect()
        };
        let parent = dec("parent", cfg.parent_layers, &mut add);
        let edge = dec("edge", cfg.edge_layers, &mut add);
        let node = dec("node", cfg.node_layers, &mut add);
        let layout = Layout {
            emb_node,
            emb_flag,
            emb_pos,
            emb_adj,
            emb_dec_edge,
            emb_dec_pos,
            enc,
            parent,
            edge,
            node,
            ptr_q: add("ptr.q".into(), d, d, Init::Xavier),
            ptr_k: add("ptr.k".into(), d, d, Init::Xavier),
            fuse_edge: add("fuse.edge".into(), d, d, Init::Xavier),
            fuse_node: add("fuse.node".into(), d, d, Init::Xavier),
            gen_edge_w: add("gen.edge.w".into(), d, cfg.edge_vocab, Init::Xavier),
            gen_edge_b: add("gen.edge.b".into(), 1, cfg.edge_vocab, Init::Zeros),
            gen_node_w: add("gen.node.w".into(), d, cfg.node_vocab, Init::Xavier),
            gen_node_b: add("gen.node.b".into(), 1, cfg.node_vocab, Init::Zeros),
        };
        (layout, shapes)
    }
}

/// Fresh parameters for `shapes`, drawn from a seeded generator.
pub fn init_params<T: Scalar>(shapes: &Shapes, seed: u64) -> ParamStore<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore {
        names: Vec::with_capacity(shapes.len()),
        tensors: Vec::with_capacity(shapes.len()),
    };
    for (name, r, c, init) in shapes {
        let data = match init {
            Init::Zeros => vec![T::zero(); r * c],
            Init::Ones => vec![T::one(); r * c],
            Init::Xavier => {
                let a = (6.0 / (r + c) as f64).sqrt();
                (0..r * c).map(|_| T::of(rng.gen_range(-a..a))).collect()
            }
        };
        store.names.push(name.clone());
        store.tensors.push(Tensor::from_vec(*r, *c, data));
    }
    store
}
