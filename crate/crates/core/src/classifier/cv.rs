//! Stratified k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gbdt::{train, GbdtHyperparams};
use super::metrics::{roc_auc, roc_curve, RocPoint};
use crate::error::{Error, Result};

pub const CV_SCHEMA: &str = "scenewatch-cv/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub schema: String,
    pub k: usize,
    pub seed: u64,
    pub n_samples: usize,
    pub n_positive: usize,
    pub per_fold_auc: Vec<f64>,
    pub mean_auc: f64,
    /// Population standard deviation of `per_fold_auc`.
    pub std_auc: f64,
    pub per_fold_roc: Vec<Vec<RocPoint>>,
}

/// Seeded stratified assignment: each class is shuffled and dealt round-robin
/// over the folds, continuing the count from one class to the next.
fn assign_folds(labels: &[u8], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0usize; labels.len()];
    let mut counter = 0usize;
    for class in [1u8, 0u8] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            folds[i] = counter % k;
            counter += 1;
        }
    }
    folds
}

/// Trains on k-1 folds and scores the held-out fold, for each fold in turn.
/// Fold `f` trains with tree seed `hp.seed + f`; folds run concurrently.
pub fn cross_validate<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    labels: &[u8],
    k: usize,
    hp: &GbdtHyperparams,
    seed: u64,
) -> Result<CvReport> {
    if rows.len() != labels.len() {
        return Err(Error::LengthMismatch(rows.len(), labels.len()));
    }
    if k < 2 {
        return Err(Error::TooFewSamples(format!("k = {k}; at least 2 folds are required")));
    }
    if k > rows.len() {
        return Err(Error::TooFewSamples(format!("{} samples for {k} folds", rows.len())));
    }
    hp.validate()?;
    let folds = assign_folds(labels, k, seed);

    let run_fold = |fold: usize| -> Result<(f64, Vec<RocPoint>)> {
        let (train_idx, test_idx): (Vec<usize>, Vec<usize>) = (0..rows.len()).partition(|&i| folds[i] != fold);
        let classes = |idx: &[usize]| {
            let pos = idx.iter().filter(|&&i| labels[i] == 1).count();
            (pos, idx.len() - pos)
        };
        for (name, idx) in [("training split", &train_idx), ("held-out fold", &test_idx)] {
            let (pos, neg) = classes(idx);
            if pos == 0 || neg == 0 {
                return Err(Error::FoldDegenerate { fold, reason: format!("{name} has {pos} positives and {neg} negatives") });
            }
        }
        let train_rows: Vec<&[f64]> = train_idx.iter().map(|&i| rows[i].as_ref()).collect();
        let train_labels: Vec<u8> = train_idx.iter().map(|&i| labels[i]).collect();
        let fold_hp = GbdtHyperparams { seed: hp.seed.wrapping_add(fold as u64), ..hp.clone() };
        let model = train(&train_rows, &train_labels, &fold_hp)?;
        let scores: Vec<f64> = test_idx.iter().map(|&i| model.predict_proba(rows[i].as_ref())).collect();
        let test_labels: Vec<u8> = test_idx.iter().map(|&i| labels[i]).collect();
        Ok((roc_auc(&scores, &test_labels)?, roc_curve(&scores, &test_labels)?))
    };

    let results: Vec<Result<(f64, Vec<RocPoint>)>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..k).map(|f| s.spawn(move || run_fold(f))).collect();
        handles.into_iter().map(|h| h.join().expect("fold worker panicked")).collect()
    });
    let mut per_fold_auc = Vec::with_capacity(k);
    let mut per_fold_roc = Vec::with_capacity(k);
    for r in results {
        let (auc, roc) = r?;
        per_fold_auc.push(auc);
        per_fold_roc.push(roc);
    }
    let mean_auc = per_fold_auc.iter().sum::<f64>() / k as f64;
    let std_auc = (per_fold_auc.iter().map(|a| (a - mean_auc).powi(2)).sum::<f64>() / k as f64).sqrt();
    Ok(CvReport {
        schema: CV_SCHEMA.into(),
        k,
        seed,
        n_samples: rows.len(),
        n_positive: labels.iter().filter(|&&l| l == 1).count(),
        per_fold_auc,
        mean_auc,
        std_auc,
        per_fold_roc,
    })
}
