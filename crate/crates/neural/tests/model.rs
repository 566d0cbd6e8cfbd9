mod common;

use std::sync::Arc;

use proptest::prelude::*;
use treemend_core::graph::EOT_EDGE;
use treemend_core::teacher::StepDistributions;
use treemend_neural::tape::{Mask, Tape};
use treemend_neural::tensor::Tensor;
use treemend_neural::train::Example;
use treemend_neural::{DecInputs, Forward, Model, ModelConfig};

fn run(m: &Model<f64>, ex: &Example, inp: &DecInputs) -> Vec<StepDistributions> {
    let mut tape = Tape::new(&m.params.tensors);
    let mut f = Forward::new(&mut tape, m, None);
    let enc = f.encode(&ex.asg).unwrap();
    let h = f.decode(enc, inp).unwrap();
    f.distributions(h)
}

fn setup() -> (Model<f64>, Vec<Example>) {
    let (vocab, _, exs) = common::examples(9, 21);
    let mut cfg = ModelConfig::tiny(&vocab);
    cfg.d = 16;
    cfg.heads = 2;
    (Model::new(cfg, 8).unwrap(), exs)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn softmax_rows_normalized_and_first_pointer_is_root() {
    let (m, exs) = setup();
    for ex in &exs {
        let d = run(&m, ex, &ex.inputs);
        assert_eq!(d.len(), ex.inputs.len());
        assert_eq!(d[0].parent, vec![1.0]);
        for (i, s) in d.iter().enumerate() {
            assert_eq!(s.parent.len(), i + 1);
            assert_eq!(s.edge.len(), m.cfg.edge_vocab);
            assert_eq!(s.node.len(), m.cfg.node_vocab);
            for row in [&s.parent, &s.edge, &s.node] {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-5);
                assert!(row.iter().all(|x| *x >= 0.0));
            }
        }
    }
}

#[test]
fn decoder_is_causal() {
    let (m, exs) = setup();
    let ex = exs.iter().max_by_key(|e| e.inputs.len()).unwrap();
    let base = run(&m, ex, &ex.inputs);
    let t = ex.inputs.len();
    for i in 0..t - 1 {
        // Change every input after step i without changing the length.
        let mut inp = ex.inputs.clone();
        for j in i + 1..t {
            inp.nodes[j] = (inp.nodes[j] + 7) % m.cfg.node_vocab;
            inp.edges[j] = (inp.edges[j] + 3) % EOT_EDGE;
            inp.parents[j] = 0;
        }
        for j in i + 2..t {
            inp.labels[j] = (inp.labels[j] + 5) % m.cfg.node_vocab;
            inp.in_edges[j] = (inp.in_edges[j] + 1) % EOT_EDGE;
        }
        let mut nbrs = (*inp.tree_nbrs).clone();
        for nb in nbrs.iter_mut().skip(i + 2) {
            *nb = vec![(0, 1)];
        }
        inp.tree_nbrs = Arc::new(nbrs);
        let d = run(&m, ex, &inp);
        for k in 0..=i {
            assert!(max_diff(&d[k].parent, &base[k].parent) < 1e-12, "parent at {k} after edit past {i}");
            assert!(max_diff(&d[k].edge, &base[k].edge) < 1e-12);
            assert!(max_diff(&d[k].node, &base[k].node) < 1e-12);
        }
    }
}

#[test]
fn zero_edge_fusion_ignores_parent_choice() {
    let (mut m, exs) = setup();
    let ex = &exs[0];
    let last = ex.inputs.len() - 1;
    let mut other = ex.inputs.clone();
    other.parents[last] = last;
    let (a, b) = (run(&m, ex, &ex.inputs), run(&m, ex, &other));
    assert!(max_diff(&a[last].edge, &b[last].edge) > 1e-9);
    let f = m.params.find("fuse.edge").unwrap();
    m.params.tensors[f].data.iter_mut().for_each(|x| *x = 0.0);
    let (a, b) = (run(&m, ex, &ex.inputs), run(&m, ex, &other));
    assert_eq!(a[last].edge, b[last].edge);
}

#[test]
fn selected_edge_changes_node_distribution() {
    let (m, exs) = setup();
    let ex = &exs[0];
    let last = ex.inputs.len() - 1;
    let mut other = ex.inputs.clone();
    other.edges[last] = (other.edges[last] + 1) % m.cfg.edge_vocab;
    let (a, b) = (run(&m, ex, &ex.inputs), run(&m, ex, &other));
    assert!(max_diff(&a[last].node, &b[last].node) > 1e-9);
    assert_eq!(a[last].edge, b[last].edge);
}

#[test]
fn encoder_shape_and_determinism() {
    let (m, exs) = setup();
    let ex = &exs[1];
    let enc = |m: &Model<f64>| {
        let mut tape = Tape::new(&m.params.tensors);
        let mut f = Forward::new(&mut tape, m, None);
        let v = f.encode(&ex.asg).unwrap();
        f.tape.value(v).clone()
    };
    let a = enc(&m);
    assert_eq!(a.shape(), (ex.asg.len(), m.cfg.d));
    assert_eq!(a, enc(&m));
}

#[test]
fn embeddings_are_additive() {
    let (mut m, exs) = setup();
    let ex = &exs[0];
    let embed = |m: &Model<f64>| {
        let mut tape = Tape::new(&m.params.tensors);
        let mut f = Forward::new(&mut tape, m, None);
        let v = f.embed(&ex.asg).unwrap();
        f.tape.value(v).clone()
    };
    let e = embed(&m);
    let pos = &m.params.tensors[m.layout.emb_pos];
    let seq = &ex.asg.node_seq;
    let flags = &ex.asg.buggy_loc;
    let mut pairs = 0;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] == seq[j] && flags[i] == flags[j] {
                pairs += 1;
                for c in 0..m.cfg.d {
                    let lhs = e.row(i)[c] - e.row(j)[c];
                    let rhs = pos.row(i)[c] - pos.row(j)[c];
                    assert!((lhs - rhs).abs() < 1e-12);
                }
            }
        }
    }
    assert!(pairs > 0);
    for id in [m.layout.emb_node, m.layout.emb_flag, m.layout.emb_pos] {
        m.params.tensors[id].data.iter_mut().for_each(|x| *x = 0.0);
    }
    assert!(embed(&m).data.iter().all(|x| *x == 0.0));
}

#[test]
fn attention_trivial_cases() {
    // One key: weight 1, output is its value.
    let params = vec![
        Tensor::from_vec(1, 2, vec![0.3, -1.0]),
        Tensor::from_vec(1, 2, vec![2.0, 0.5]),
        Tensor::from_vec(1, 2, vec![4.0, -3.0]),
    ];
    let mut t = Tape::new(&params);
    let (q, k, v) = (t.param(0), t.param(1), t.param(2));
    let o = t.attention(q, k, v, 1, Mask::Full);
    assert_eq!(t.value(o).data, vec![4.0, -3.0]);

    // Identical keys: equal weights.
    let params = vec![
        Tensor::from_vec(1, 2, vec![0.3, -1.0]),
        Tensor::from_vec(2, 2, vec![2.0, 0.5, 2.0, 0.5]),
        Tensor::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]),
    ];
    let mut t = Tape::new(&params);
    let (q, k, v) = (t.param(0), t.param(1), t.param(2));
    let o = t.attention(q, k, v, 1, Mask::Full);
    assert_eq!(t.value(o).data, vec![0.5, 0.5]);
}

#[test]
fn pointer_symmetric_candidates() {
    let (mut m, _) = setup();
    let d = m.cfg.d;
    for name in ["ptr.q", "ptr.k"] {
        let id = m.params.find(name).unwrap();
        let t = &mut m.params.tensors[id];
        for r in 0..d {
            for c in 0..d {
                t.data[r * d + c] = if r == c { 1.0 } else { 0.0 };
            }
        }
    }
    let h = Tensor::from_vec(2, d, (0..2 * d).map(|k| ((k % d) as f64 * 0.1).sin()).collect());
    let mut tape = Tape::new(&m.params.tensors);
    let mut f = Forward::new(&mut tape, &m, None);
    let hv = f.tape.constant(h);
    let s = f.pointer(hv);
    let mut row = f.tape.value(s).row(1).to_vec();
    treemend_neural::tensor::softmax(&mut row);
    assert!((row[0] - 0.5).abs() < 1e-15 && (row[1] - 0.5).abs() < 1e-15);
}

#[test]
fn graph_attention_cases() {
    let d = 4;
    let rows = |n: usize, s: f64| Tensor::from_vec(n, d, (0..n * d).map(|k| ((k as f64 + s) * 0.37).sin()).collect());
    let mut params = vec![rows(3, 0.0), rows(3, 1.0), rows(3, 2.0), rows(5, 3.0)];
    let nbrs = Arc::new(vec![vec![(1, 2)], vec![(0, 1), (2, 4)], vec![]]);
    let eval = |params: &Vec<Tensor<f64>>| {
        let mut t = Tape::new(params);
        let (q, k, v, e) = (t.param(0), t.param(1), t.param(2), t.param(3));
        let o = t.asg_attention(q, k, v, e, nbrs.clone(), 2);
        t.value(o).clone()
    };
    let out = eval(&params);
    // Single neighbor: weight 1.
    let mut expect = params[2].row(1).to_vec();
    expect.extend_from_slice(params[3].row(2));
    assert_eq!(out.row(0), expect.as_slice());
    // Isolated node.
    assert!(out.row(2).iter().all(|x| *x == 0.0));
    // A non-neighbor (node 2 for node 0) does not matter.
    params[1].row_mut(2).iter_mut().for_each(|x| *x += 1.0);
    params[2].row_mut(2).iter_mut().for_each(|x| *x -= 2.0);
    assert_eq!(eval(&params).row(0), out.row(0));
    // Zero edge table: the edge half vanishes, the value half is plain attention.
    params[3].data.iter_mut().for_each(|x| *x = 0.0);
    let z = eval(&params);
    assert!(z.row(1)[d..].iter().all(|x| *x == 0.0));
    let mut t = Tape::new(&params);
    let (q, k, v) = (t.param(0), t.param(1), t.param(2));
    let qi = t.gather(q, &[1]);
    let kj = t.gather(k, &[0, 2]);
    let vj = t.gather(v, &[0, 2]);
    let plain = t.attention(qi, kj, vj, 2, Mask::Full);
    for c in 0..d {
        assert!((t.value(plain).data[c] - z.row(1)[c]).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attention_rows_sum_to_one(q in prop::collection::vec(-3.0f64..3.0, 6), k in prop::collection::vec(-3.0f64..3.0, 18), causal in any::<bool>()) {
        // With identity values the output row is the weight vector.
        let mut eye = vec![0.0; 9];
        for i in 0..3 { eye[i * 3 + i] = 1.0; }
        let params = vec![Tensor::from_vec(2, 3, q), Tensor::from_vec(3, 3, k[..9].to_vec()), Tensor::from_vec(3, 3, eye)];
        let mut t = Tape::new(&params);
        let (q, k, v) = (t.param(0), t.param(1), t.param(2));
        let o = t.attention(q, k, v, 1, if causal { Mask::Causal } else { Mask::Full });
        for r in 0..2 {
            let row = t.value(o).row(r);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|x| *x >= 0.0));
            if causal {
                prop_assert!(row[r + 1..].iter().all(|x| *x == 0.0));
            }
        }
    }
}
