//! Merging per-model ranked lists.

use std::collections::BTreeMap;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranked<K> {
    pub item: K,
    /// Best zero-based rank over the models that produced the item.
    pub best_rank: usize,
    /// Mean score over those models.
    pub mean_score: f64,
    pub support: usize,
}

/// Deduplicate and order by best rank, then mean score (descending), then
/// the item itself so that the result does not depend on model order.
/// Within one list only the first occurrence of an item counts.
pub fn rank_merge<K: Ord + Clone>(lists: &[Vec<(K, f64)>]) -> Vec<Ranked<K>> {
    let mut acc: BTreeMap<K, (usize, f64, usize)> = BTreeMap::new();
    for list in lists {
        let mut seen = BTreeMap::new();
        for (item, score) in list {
            if seen.insert(item.clone(), ()).is_some() {
                continue;
            }
            let rank = seen.len() - 1;
            let e = acc.entry(item.clone()).or_insert((usize::MAX, 0.0, 0));
            e.0 = e.0.min(rank);
            e.1 += score;
            e.2 += 1;
        }
    }
    let mut out: Vec<Ranked<K>> = acc
        .into_iter()
        .map(|(item, (best_rank, sum, support))| Ranked {
            item,
            best_rank,
            mean_score: sum / support as f64,
            support,
        })
        .collect();
    out.sort_by(|a, b| {
        a.best_rank
            .cmp(&b.best_rank)
            .then(b.mean_score.total_cmp(&a.mean_score))
            .then_with(|| a.item.cmp(&b.item))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_list_is_identity() {
        let l = vec![("a", -0.1), ("b", -0.5), ("c", -0.7)];
        let m = rank_merge(&[l.clone()]);
        assert_eq!(m.iter().map(|r| r.item).collect::<Vec<_>>(), vec!["a", "b", "c"]);
    }

    #[test]
    fn rank_then_score() {
        let a = vec![("x", -1.0), ("y", -2.0)];
        let b = vec![("z", -0.5), ("x", -3.0)];
        let m = rank_merge(&[a, b]);
        let items: Vec<_> = m.iter().map(|r| r.item).collect();
        assert_eq!(items, vec!["z", "x", "y"]);
        assert_eq!(m[1].mean_score, -2.0);
        assert_eq!(m[1].support, 2);
    }
}
