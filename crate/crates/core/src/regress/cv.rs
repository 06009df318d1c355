use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ols::{ols_fit, Design};
use crate::error::{Error, Result};

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub fold_rmses: Vec<f64>,
    pub mean_rmse: f64,
    /// Held-out (actual, predicted) pairs, fold by fold.
    #[serde(skip)]
    pub predictions: Vec<(f64, f64)>,
    pub seed: u64,
}

/// Shuffle `0..n` with `seed` and cut it into `k` contiguous folds whose
/// sizes differ by at most one (the first `n % k` folds get the extra row).
pub fn fold_partition(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Contract(format!("k-fold needs k >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::InsufficientData { needed: k, got: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

pub fn kfold_cv(design: &Design, targets: &[f64], k: usize, seed: u64) -> Result<CvReport> {
    let n = targets.len();
    let folds = fold_partition(n, k, seed)?;
    let mut fold_rmses = Vec::with_capacity(k);
    let mut predictions = Vec::with_capacity(n);
    let mut in_fold = vec![usize::MAX; n];
    for (f, fold) in folds.iter().enumerate() {
        for &i in fold {
            in_fold[i] = f;
        }
    }
    for (f, fold) in folds.iter().enumerate() {
        let train: Vec<usize> = (0..n).filter(|&i| in_fold[i] != f).collect();
        let y_train: Vec<f64> = train.iter().map(|&i| targets[i]).collect();
        let fit = ols_fit(&design.take_rows(&train), &y_train)?;
        let mut sse = 0.0;
        for &i in fold {
            let predicted = fit.predict_named(&design.names, &design.row(i))?;
            sse += (targets[i] - predicted).powi(2);
            predictions.push((targets[i], predicted));
        }
        fold_rmses.push((sse / fold.len() as f64).sqrt());
    }
    let mean_rmse = fold_rmses.iter().sum::<f64>() / k as f64;
    Ok(CvReport {
        k,
        fold_rmses,
        mean_rmse,
        predictions,
        seed,
    })
}
