use std::path::Path;

use rand::seq::SliceRandom;
use serde::Serialize;

use super::io::read_numeric_csv;
use crate::datagen::{flip_labels, SeededRng};
use crate::error::{Result, RrmError};
use crate::models::{ClassificationData, LogRegParams, LogisticRegression};
use crate::simplex::RobustnessBound;
use crate::solver::{erm_fit, rrm_fit, RrmConfig};

/// Binary confusion matrix with class 1 as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
    pub accuracy: f64,
}

impl ConfusionMatrix {
    pub fn from_predictions(actual: &[u8], predicted: &[u8]) -> Self {
        let (mut tp, mut fn_, mut fp, mut tn) = (0, 0, 0, 0);
        for (&a, &p) in actual.iter().zip(predicted) {
            match (a, p) {
                (1, 1) => tp += 1,
                (1, _) => fn_ += 1,
                (_, 1) => fp += 1,
                _ => tn += 1,
            }
        }
        let total = tp + fn_ + fp + tn;
        let accuracy = if total == 0 {
            f64::NAN
        } else {
            (tp + tn) as f64 / total as f64
        };
        ConfusionMatrix {
            tp,
            fn_,
            fp,
            tn,
            accuracy,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.fp + self.tn
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RealDataOutcome {
    pub erm: ConfusionMatrix,
    pub rrm: ConfusionMatrix,
    pub train_size: usize,
    pub test_size: usize,
    pub flipped: usize,
    pub seed: u64,
}

fn predict(params: &LogRegParams, data: &ClassificationData) -> Vec<u8> {
    data.features()
        .row_iter()
        .map(|row| {
            let x: Vec<f64> = row.iter().copied().collect();
            u8::from(params.score(&x) > 0.0)
        })
        .collect()
}

/// Splits `data` under `seed`, flips `flip_count` class-1 training labels to 0,
/// fits logistic ERM and RRM on the corrupted training split and scores both
/// on the untouched test split.
pub fn evaluate_label_flips(
    data: &ClassificationData,
    train_fraction: f64,
    flip_count: usize,
    bound: RobustnessBound,
    seed: u64,
) -> Result<RealDataOutcome> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(RrmError::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = data.len();
    let train_size = (train_fraction * n as f64).floor() as usize;
    if train_size < 2 || train_size >= n {
        return Err(RrmError::Config(format!(
            "split of {n} samples leaves {train_size} for training"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut train = data.select(&order[..train_size]);
    let test = data.select(&order[train_size..]);
    let mask = flip_labels(&mut rng, &mut train, flip_count, 1, 0)?;

    let family = LogisticRegression::default();
    let erm = erm_fit(&family, &train)?;
    let config = RrmConfig {
        bound,
        ..RrmConfig::new(bound.eps_tilde())?
    };
    let rrm = rrm_fit(&family, &train, &config)?;
    Ok(RealDataOutcome {
        erm: ConfusionMatrix::from_predictions(test.labels(), &predict(&erm, &test)),
        rrm: ConfusionMatrix::from_predictions(test.labels(), &predict(&rrm.params, &test)),
        train_size,
        test_size: test.len(),
        flipped: mask.iter().filter(|&&m| m).count(),
        seed,
    })
}

/// [`evaluate_label_flips`] on a CSV of numeric features with a final 0/1 label column.
pub fn run_real_data(
    csv_path: impl AsRef<Path>,
    train_fraction: f64,
    flip_count: usize,
    bound: RobustnessBound,
    seed: u64,
) -> Result<RealDataOutcome> {
    let data = read_numeric_csv(csv_path)?.to_classification()?;
    evaluate_label_flips(&data, train_fraction, flip_count, bound, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_counts() {
        let cm = ConfusionMatrix::from_predictions(&[1, 1, 0, 0, 1], &[1, 0, 0, 1, 1]);
        assert_eq!((cm.tp, cm.fn_, cm.fp, cm.tn), (2, 1, 1, 1));
        assert!((cm.accuracy - 0.6).abs() < 1e-15);
        assert_eq!(cm.total(), 5);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = run_real_data(
            "/nonexistent/data.csv",
            0.6,
            0,
            RobustnessBound::new(0.1).unwrap(),
            0,
        )
        .unwrap_err();
        assert_eq!(err.kind(), crate::error::ErrorKind::Io);
    }
}
