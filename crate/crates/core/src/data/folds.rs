use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// `k` folds with the censored/uncensored ratio preserved in each.
///
/// Each stratum is shuffled and dealt round-robin; the censored stratum picks
/// up where the uncensored one stopped so fold sizes differ by at most one.
pub fn stratified_kfold(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    let n = dataset.len();
    let mut uncensored: Vec<usize> = (0..n).filter(|&i| dataset.samples[i].event).collect();
    let mut censored: Vec<usize> = (0..n).filter(|&i| !dataset.samples[i].event).collect();
    for (name, stratum) in [("uncensored", &uncensored), ("censored", &censored)] {
        if !stratum.is_empty() && stratum.len() < k {
            return Err(Error::invalid(format!(
                "{name} stratum has {} samples, fewer than {k} folds",
                stratum.len()
            )));
        }
    }
    if n < k {
        return Err(Error::invalid(format!("{n} samples cannot fill {k} folds")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    uncensored.shuffle(&mut rng);
    censored.shuffle(&mut rng);

    let mut validation = vec![Vec::new(); k];
    for (pos, &idx) in uncensored.iter().chain(&censored).enumerate() {
        validation[pos % k].push(idx);
    }
    Ok(validation
        .into_iter()
        .map(|mut val| {
            val.sort_unstable();
            let mut in_val = vec![false; n];
            val.iter().for_each(|&i| in_val[i] = true);
            Fold {
                train: (0..n).filter(|&i| !in_val[i]).collect(),
                validation: val,
            }
        })
        .collect())
}

/// Stratified 80/20 split: the first of five stratified folds.
pub fn holdout_split(dataset: &Dataset, seed: u64) -> Result<Fold> {
    Ok(stratified_kfold(dataset, 5, seed)?.swap_remove(0))
}
