use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pair(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::Empty("metric inputs"));
    }
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            op: "metric",
            left: (pred.len(), 1),
            right: (truth.len(), 1),
        });
    }
    Ok(())
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let sae: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(sae / pred.len() as f64)
}

/// A held-out item with its predicted score and observed rating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub score: f64,
    pub truth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    pub precision: f64,
    /// `None` when no user has a relevant item.
    pub recall: Option<f64>,
    pub users: usize,
    pub users_with_relevant: usize,
}

/// User-averaged Precision@k and Recall@k.
///
/// Each user's candidates are their own held-out items, ranked by score (ties
/// keep input order). The top `min(k, m)` are recommended and an item is
/// relevant when its observed rating is at least `tau`. Precision averages over
/// all users; recall over users with at least one relevant item.
pub fn precision_recall_at_k(per_user: &BTreeMap<String, Vec<Scored>>, k: usize, tau: f64) -> Result<RankingMetrics> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "relevance threshold {tau} outside (0, 1)"
        )));
    }
    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut users = 0;
    let mut with_relevant = 0;
    for items in per_user.values() {
        if items.is_empty() {
            continue;
        }
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.sort_by(|&a, &b| items[b].score.total_cmp(&items[a].score));
        let top = k.min(items.len());
        let hits = order[..top].iter().filter(|&&i| items[i].truth >= tau).count();
        let relevant = items.iter().filter(|s| s.truth >= tau).count();
        precision_sum += hits as f64 / top as f64;
        users += 1;
        if relevant > 0 {
            recall_sum += hits as f64 / relevant as f64;
            with_relevant += 1;
        }
    }
    if users == 0 {
        return Err(Error::Empty("ranking test set"));
    }
    Ok(RankingMetrics {
        precision: precision_sum / users as f64,
        recall: (with_relevant > 0).then(|| recall_sum / with_relevant as f64),
        users,
        users_with_relevant: with_relevant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SeededRng;
    use proptest::prelude::*;

    #[test]
    fn hand_examples() {
        assert_eq!(rmse(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert_eq!(mae(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert!((rmse(&[1.0, 0.0], &[0.0, 0.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(mae(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5);
        assert!(rmse(&[], &[]).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn loop_oracle() {
        let mut rng = SeededRng::new(1);
        let p: Vec<f64> = (0..97).map(|_| rng.uniform(0.0, 1.0)).collect();
        let t: Vec<f64> = (0..97).map(|_| rng.uniform(0.0, 1.0)).collect();
        let mut sse = 0.0;
        let mut sae = 0.0;
        for i in 0..97 {
            sse += (p[i] - t[i]).powi(2);
            sae += (p[i] - t[i]).abs();
        }
        assert!((rmse(&p, &t).unwrap() - (sse / 97.0).sqrt()).abs() <= 1e-12);
        assert!((mae(&p, &t).unwrap() - sae / 97.0).abs() <= 1e-12);
    }

    fn user(items: &[(f64, f64)]) -> Vec<Scored> {
        items.iter().map(|&(score, truth)| Scored { score, truth }).collect()
    }

    #[test]
    fn all_relevant() {
        let mut m = BTreeMap::new();
        m.insert(
            "u".to_string(),
            user(&[
                (0.1, 0.9),
                (0.5, 0.8),
                (0.3, 0.7),
                (0.2, 0.6),
                (0.9, 0.5),
                (0.4, 0.99),
                (0.6, 0.55),
            ]),
        );
        let r = precision_recall_at_k(&m, 5, 0.5).unwrap();
        assert_eq!(r.precision, 1.0);
        assert!((r.recall.unwrap() - 5.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn no_relevant_items_flags_recall() {
        let mut m = BTreeMap::new();
        m.insert("u".to_string(), user(&[(0.1, 0.1), (0.5, 0.2)]));
        m.insert("v".to_string(), user(&[(0.3, 0.4)]));
        let r = precision_recall_at_k(&m, 5, 0.5).unwrap();
        assert_eq!(r.precision, 0.0);
        assert_eq!(r.recall, None);
        assert_eq!(r.users_with_relevant, 0);
    }

    #[test]
    fn six_items_three_relevant_perfect_ranking() {
        let mut m = BTreeMap::new();
        m.insert(
            "u".to_string(),
            user(&[(0.9, 0.9), (0.8, 0.8), (0.7, 0.7), (0.3, 0.3), (0.2, 0.2), (0.1, 0.1)]),
        );
        let r = precision_recall_at_k(&m, 5, 0.5).unwrap();
        assert!((r.precision - 0.6).abs() < 1e-15);
        assert_eq!(r.recall, Some(1.0));
    }

    #[test]
    fn empty_or_bad_arguments() {
        assert!(precision_recall_at_k(&BTreeMap::new(), 5, 0.5).is_err());
        let mut m = BTreeMap::new();
        m.insert("u".to_string(), user(&[(0.9, 0.9)]));
        assert!(precision_recall_at_k(&m, 0, 0.5).is_err());
        assert!(precision_recall_at_k(&m, 5, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(pairs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..100)) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assert!(rmse(&p, &t).unwrap() + 1e-15 >= mae(&p, &t).unwrap());
        }

        #[test]
        fn metrics_ignore_pair_order(pairs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..60), seed in 0u64..100) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
            let perm = SeededRng::new(seed).permutation(p.len());
            let ps: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
            let ts: Vec<f64> = perm.iter().map(|&i| t[i]).collect();
            prop_assert!((rmse(&p, &t).unwrap() - rmse(&ps, &ts).unwrap()).abs() <= 1e-12);
            prop_assert!((mae(&p, &t).unwrap() - mae(&ps, &ts).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn ranking_metrics_in_unit_interval(items in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..30)) {
            let mut m = BTreeMap::new();
            m.insert("u".to_string(), user(&items));
            let r = precision_recall_at_k(&m, 5, 0.5).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.precision));
            if let Some(rec) = r.recall {
                prop_assert!((0.0..=1.0).contains(&rec));
            }
        }
    }
}
