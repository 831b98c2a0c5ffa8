use super::{DatasetError, ObservationalDataset};
use crate::rng::stream_rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Assignment of each unit to one of `k` cross-fitting folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    fold_of_unit: Vec<usize>,
    k: usize,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of_unit(&self) -> &[usize] {
        &self.fold_of_unit
    }

    /// Held-out units of `fold`, ascending.
    pub fn held_out(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of_unit.len())
            .filter(|&i| self.fold_of_unit[i] == fold)
            .collect()
    }

    /// Training complement of `fold`, ascending.
    pub fn complement(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of_unit.len())
            .filter(|&i| self.fold_of_unit[i] != fold)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of_unit {
            sizes[f] += 1;
        }
        sizes
    }
}

fn permutation(n: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream_rng(seed, stream));
    perm
}

/// Randomly split `n` units into `k` disjoint folds whose sizes differ by at
/// most one. The assignment depends only on `(n, k, seed)`.
pub fn split_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment, DatasetError> {
    if k < 2 || k > n {
        return Err(DatasetError::InvalidFolds { n, k, min: 2 });
    }
    let mut fold_of_unit = vec![0; n];
    for (pos, unit) in permutation(n, seed, 0xF01D).into_iter().enumerate() {
        fold_of_unit[unit] = pos % k;
    }
    Ok(FoldAssignment { fold_of_unit, k })
}

/// `(train, test)` unit indices, each ascending. The test side holds
/// `round(n * test_fraction)` units.
pub fn train_test_indices(
    n: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DatasetError> {
    let n_test = (n as f64 * test_fraction).round();
    if !(test_fraction > 0.0 && test_fraction < 1.0) || n_test < 1.0 || n_test >= n as f64 {
        return Err(DatasetError::EmptySplit {
            n,
            fraction: test_fraction,
        });
    }
    let perm = permutation(n, seed, 0x5B17);
    let (test, train) = perm.split_at(n_test as usize);
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Partition `data` into train and test datasets.
pub fn train_test_split(
    data: &ObservationalDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(ObservationalDataset, ObservationalDataset), DatasetError> {
    let (train, test) = train_test_indices(data.n(), test_fraction, seed)?;
    Ok((data.subset(&train), data.subset(&test)))
}
