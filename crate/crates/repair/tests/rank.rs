use proptest::prelude::*;
use treemend_repair::rank::rank_merge;

fn lists() -> impl Strategy<Value = Vec<Vec<(u8, f64)>>> {
    prop::collection::vec(prop::collection::vec((0u8..12, -5.0f64..0.0), 0..10), 1..4).prop_map(|ls| {
        ls.into_iter()
            .map(|mut l| {
                l.sort_by(|a, b| b.1.total_cmp(&a.1));
                l
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn matches_brute_force(ls in lists()) {
        let merged = rank_merge(&ls);
        // Oracle: per item, ranks and scores from first occurrences.
        let mut items: Vec<u8> = ls.iter().flatten().map(|x| x.0).collect();
        items.sort();
        items.dedup();
        let mut oracle: Vec<(usize, f64, u8)> = items
            .iter()
            .map(|&it| {
                let mut best = usize::MAX;
                let mut scores = Vec::new();
                for l in &ls {
                    let mut firsts: Vec<(u8, f64)> = Vec::new();
                    for &(x, s) in l {
                        if !firsts.iter().any(|f| f.0 == x) {
                            firsts.push((x, s));
                        }
                    }
                    if let Some(r) = firsts.iter().position(|f| f.0 == it) {
                        best = best.min(r);
                        scores.push(firsts[r].1);
                    }
                }
                (best, scores.iter().sum::<f64>() / scores.len() as f64, it)
            })
            .collect();
        oracle.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
        prop_assert_eq!(merged.len(), oracle.len());
        for (m, o) in merged.iter().zip(&oracle) {
            prop_assert_eq!(m.item, o.2);
            prop_assert_eq!(m.best_rank, o.0);
            prop_assert!((m.mean_score - o.1).abs() < 1e-12);
        }
    }

    #[test]
    fn invariant_to_model_order(ls in lists()) {
        let mut rev = ls.clone();
        rev.reverse();
        let a: Vec<u8> = rank_merge(&ls).iter().map(|r| r.item).collect();
        let b: Vec<u8> = rank_merge(&rev).iter().map(|r| r.item).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn top_ranked_items_come_first(ls in lists()) {
        let merged = rank_merge(&ls);
        let firsts: Vec<u8> = ls.iter().filter_map(|l| l.first().map(|x| x.0)).collect();
        for (i, r) in merged.iter().enumerate() {
            if r.best_rank > 0 {
                prop_assert!(merged[i..].iter().all(|x| !firsts.contains(&x.item)));
            }
        }
    }
}

#[test]
fn single_model_identity() {
    let l = vec![(3u8, -0.1), (1, -0.2), (7, -0.9)];
    let m = rank_merge(&[l.clone()]);
    assert_eq!(m.iter().map(|r| r.item).collect::<Vec<_>>(), vec![3, 1, 7]);
}
