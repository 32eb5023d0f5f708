use serde::{Deserialize, Serialize};

use super::dataset::DomainDataset;
use crate::error::{Error, Result};
use crate::numeric::SeededRng;

/// Assignment of interaction records to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    k: usize,
    assignments: Vec<usize>,
}

impl FoldSplit {
    /// Seeded permutation of the records, dealt round-robin into `k` folds.
    pub fn new(n_records: usize, k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidConfig(format!("k-fold needs k >= 2, got {k}")));
        }
        if k > n_records {
            return Err(Error::InvalidConfig(format!(
                "k = {k} folds exceeds the {n_records} available records"
            )));
        }
        let perm = SeededRng::new(seed).permutation(n_records);
        let mut assignments = vec![0; n_records];
        for (pos, &record) in perm.iter().enumerate() {
            assignments[record] = pos % k;
        }
        Ok(FoldSplit { k, assignments })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        self.indices(|f| f == fold)
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        self.indices(|f| f != fold)
    }

    fn indices(&self, keep: impl Fn(usize) -> bool) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| keep(f))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Record-level k-fold split of a domain's interactions.
pub fn kfold(dataset: &DomainDataset, k: usize, seed: u64) -> Result<FoldSplit> {
    FoldSplit::new(dataset.interactions.len(), k, seed)
}
