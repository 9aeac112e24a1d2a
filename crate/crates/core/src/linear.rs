//! The averaging classifier and retraining on its own hard predictions.

use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, Label};
use crate::{Error, Result};

/// Keep fraction used by confidence-based retraining unless told otherwise.
pub const DEFAULT_KEEP_FRACTION: f64 = 0.5;

/// A linear classifier `x -> sign(<x, weights>)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub weights: Vec<f64>,
}

impl LinearClassifier {
    pub fn new(weights: Vec<f64>) -> LinearClassifier {
        LinearClassifier { weights }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|w| *w == 0.0)
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x)
    }

    /// `sign(<x, theta>)`, with a zero score mapped to `+1`.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(Label::from_sign(self.score(x)))
    }

    pub fn scaled(&self, c: f64) -> LinearClassifier {
        LinearClassifier::new(self.weights.iter().map(|w| c * w).collect())
    }

    /// `theta_0,...,theta_{d-1}` as one CSV record.
    pub fn to_csv_record(&self) -> Vec<String> {
        self.weights.iter().map(|w| format!("{w:.16e}")).collect()
    }

    pub fn csv_header(d: usize) -> Vec<String> {
        (0..d).map(|j| format!("theta_{j}")).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Result of one retraining pass.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrainReport {
    pub classifier: LinearClassifier,
    /// Rows used for retraining, strictly increasing.
    pub selected_indices: Vec<usize>,
    /// Hard predictions of the initial classifier on every training row.
    pub predicted_labels: Vec<Label>,
}

/// Averages `label_i * x_i` over the given rows.
fn label_weighted_mean(dataset: &Dataset, labels: &[Label], rows: impl Iterator<Item = usize>) -> (Vec<f64>, usize) {
    let mut acc = vec![0.0; dataset.dim()];
    let mut count = 0usize;
    for i in rows {
        let s = labels[i].sign();
        for (a, x) in acc.iter_mut().zip(dataset.row(i)) {
            *a += s * x;
        }
        count += 1;
    }
    if count > 0 {
        let inv = 1.0 / count as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
    }
    (acc, count)
}

fn check_dim(dataset: &Dataset, classifier: &LinearClassifier) -> Result<()> {
    if dataset.dim() != classifier.dim() {
        return Err(Error::DimensionMismatch {
            expected: dataset.dim(),
            actual: classifier.dim(),
        });
    }
    Ok(())
}

/// `theta_0 = (1/n) sum_i y_hat_i x_i` over the given (noisy) labels.
pub fn fit_initial(dataset: &Dataset) -> Result<LinearClassifier> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (weights, _) = label_weighted_mean(dataset, dataset.noisy_labels(), 0..dataset.len());
    Ok(LinearClassifier::new(weights))
}

pub fn predict(classifier: &LinearClassifier, x: &[f64]) -> Result<Label> {
    classifier.predict(x)
}

fn predict_rows(dataset: &Dataset, initial: &LinearClassifier) -> Result<Vec<Label>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_dim(dataset, initial)?;
    Ok(dataset.rows().map(|x| Label::from_sign(initial.score(x))).collect())
}

/// Retrains on every row using the initial classifier's predicted labels.
pub fn retrain_full(dataset: &Dataset, initial: &LinearClassifier) -> Result<RetrainReport> {
    let predicted_labels = predict_rows(dataset, initial)?;
    let (weights, _) = label_weighted_mean(dataset, &predicted_labels, 0..dataset.len());
    Ok(RetrainReport {
        classifier: LinearClassifier::new(weights),
        selected_indices: (0..dataset.len()).collect(),
        predicted_labels,
    })
}

/// Retrains only on rows where the predicted label agrees with the given
/// noisy label.
///
/// An empty consensus set yields [`Error::EmptyConsensus`] carrying the
/// report (zero classifier, no selected rows) so callers can pick a fallback.
pub fn retrain_consensus(dataset: &Dataset, initial: &LinearClassifier) -> Result<RetrainReport> {
    let predicted_labels = predict_rows(dataset, initial)?;
    let selected_indices: Vec<usize> = predicted_labels
        .iter()
        .zip(dataset.noisy_labels())
        .enumerate()
        .filter(|(_, (pred, given))| pred == given)
        .map(|(i, _)| i)
        .collect();
    let (weights, count) = label_weighted_mean(dataset, &predicted_labels, selected_indices.iter().copied());
    let report = RetrainReport {
        classifier: LinearClassifier::new(weights),
        selected_indices,
        predicted_labels,
    };
    if count == 0 {
        return Err(Error::EmptyConsensus(Box::new(report)));
    }
    Ok(report)
}

/// Retrains on the `ceil(keep_fraction * n)` rows with the largest
/// `|<x_i, theta_0>|`; ties go to the lower index.
pub fn retrain_confidence(dataset: &Dataset, initial: &LinearClassifier, keep_fraction: f64) -> Result<RetrainReport> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep_fraction must lie in (0, 1], got {keep_fraction}"
        )));
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_dim(dataset, initial)?;
    let scores: Vec<f64> = dataset.rows().map(|x| initial.score(x)).collect();
    let predicted_labels: Vec<Label> = scores.iter().map(|s| Label::from_sign(*s)).collect();

    let n = dataset.len();
    let keep = ((keep_fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps lower indices first among equal magnitudes
    order.sort_by(|&a, &b| scores[b].abs().total_cmp(&scores[a].abs()));
    let mut selected_indices = order[..keep].to_vec();
    selected_indices.sort_unstable();

    let (weights, _) = label_weighted_mean(dataset, &predicted_labels, selected_indices.iter().copied());
    Ok(RetrainReport {
        classifier: LinearClassifier::new(weights),
        selected_indices,
        predicted_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{canonical_mu, sample_dataset, NoiseSpec, ProblemSpec};
    use Label::{Neg, Pos};

    // x = (1,1), (-2,0), (1,-3)
    fn hand_dataset(noisy: Vec<Label>) -> Dataset {
        Dataset::new(2, vec![1.0, 1.0, -2.0, 0.0, 1.0, -3.0], vec![Pos, Neg, Pos], noisy).unwrap()
    }

    fn e0() -> LinearClassifier {
        LinearClassifier::new(vec![1.0, 0.0])
    }

    #[test]
    fn single_row_fit_is_signed_row() {
        let data = Dataset::new(3, vec![1.5, -2.0, 0.25], vec![Pos], vec![Neg]).unwrap();
        assert_eq!(fit_initial(&data).unwrap().weights, vec![-1.5, 2.0, -0.25]);
    }

    #[test]
    fn duplicated_dataset_gives_same_fit() {
        let spec = ProblemSpec::figure1(0.5);
        let data = sample_dataset(&spec, &NoiseSpec::flip(0.4), 37, 9).unwrap();
        let mut features = data.features().to_vec();
        features.extend_from_slice(data.features());
        let mut truth = data.true_labels().to_vec();
        truth.extend_from_slice(data.true_labels());
        let mut noisy = data.noisy_labels().to_vec();
        noisy.extend_from_slice(data.noisy_labels());
        let doubled = Dataset::new(data.dim(), features, truth, noisy).unwrap();
        let a = fit_initial(&data).unwrap();
        let b = fit_initial(&doubled).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() <= 1e-15 * x.abs().max(1.0));
        }
    }

    #[test]
    fn predict_examples() {
        assert_eq!(e0().predict(&[3.0, -7.0]).unwrap(), Pos);
        assert_eq!(e0().predict(&[0.0, 5.0]).unwrap(), Pos);
        assert_eq!(e0().predict(&[-0.1, 5.0]).unwrap(), Neg);
        assert!(matches!(
            e0().predict(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { expected: 2, actual: 3 })
        ));
    }

    #[test]
    fn mean_direction_classifies_every_sample() {
        let spec = ProblemSpec::figure1(0.3);
        let data = sample_dataset(&spec, &NoiseSpec::flip(0.2), 500, 2).unwrap();
        let mu = LinearClassifier::new(canonical_mu(&spec));
        for (x, y) in data.rows().zip(data.true_labels()) {
            assert_eq!(mu.predict(x).unwrap(), *y);
        }
    }

    #[test]
    fn full_retrain_hand_example() {
        let data = hand_dataset(vec![Pos, Pos, Pos]);
        let report = retrain_full(&data, &e0()).unwrap();
        assert_eq!(report.predicted_labels, vec![Pos, Neg, Pos]);
        assert_eq!(report.selected_indices, vec![0, 1, 2]);
        let w = &report.classifier.weights;
        assert!((w[0] - 4.0 / 3.0).abs() < 1e-15);
        assert!((w[1] + 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn full_retrain_matches_initial_when_predictions_agree() {
        let data = hand_dataset(vec![Pos, Neg, Pos]);
        let report = retrain_full(&data, &e0()).unwrap();
        assert_eq!(report.classifier, fit_initial(&data).unwrap());
    }

    #[test]
    fn consensus_hand_example() {
        let data = hand_dataset(vec![Pos, Pos, Pos]);
        let report = retrain_consensus(&data, &e0()).unwrap();
        assert_eq!(report.selected_indices, vec![0, 2]);
        assert_eq!(report.classifier.weights, vec![1.0, -1.0]);
    }

    #[test]
    fn consensus_selection_matches_agreement() {
        let spec = ProblemSpec::figure1(0.5);
        let data = sample_dataset(&spec, &NoiseSpec::flip(0.4), 300, 21).unwrap();
        let initial = fit_initial(&data).unwrap();
        let report = retrain_consensus(&data, &initial).unwrap();
        for i in 0..data.len() {
            let agrees = report.predicted_labels[i] == data.noisy_labels()[i];
            assert_eq!(report.selected_indices.binary_search(&i).is_ok(), agrees);
        }
    }

    #[test]
    fn consensus_empty_when_separator_reversed() {
        let spec = ProblemSpec::figure1(0.5);
        let data = sample_dataset(&spec, &NoiseSpec::flip(0.0), 50, 4).unwrap();
        let reversed = LinearClassifier::new(canonical_mu(&spec)).scaled(-1.0);
        match retrain_consensus(&data, &reversed) {
            Err(Error::EmptyConsensus(report)) => {
                assert!(report.selected_indices.is_empty());
                assert_eq!(report.predicted_labels.len(), 50);
                assert!(report.classifier.is_zero());
            }
            other => panic!("expected empty consensus, got {other:?}"),
        }
    }

    #[test]
    fn consensus_equals_full_on_clean_data_with_true_separator() {
        let spec = ProblemSpec::figure1(0.5);
        let data = sample_dataset(&spec, &NoiseSpec::flip(0.0), 80, 6).unwrap();
        let mu = LinearClassifier::new(canonical_mu(&spec));
        let full = retrain_full(&data, &mu).unwrap();
        let cons = retrain_consensus(&data, &mu).unwrap();
        assert_eq!(full, cons);
    }

    #[test]
    fn confidence_hand_examples() {
        // scores under e0 are (1, -2, 1)
        let data = hand_dataset(vec![Pos, Pos, Pos]);
        let report = retrain_confidence(&data, &e0(), 1.0 / 3.0).unwrap();
        assert_eq!(report.selected_indices, vec![1]);
        assert_eq!(report.classifier.weights, vec![2.0, 0.0]);

        // scores (2, 2, -1, 0)
        let data = Dataset::new(1, vec![2.0, 2.0, -1.0, 0.0], vec![Pos, Pos, Neg, Pos], vec![Pos; 4]).unwrap();
        let theta = LinearClassifier::new(vec![1.0]);
        let report = retrain_confidence(&data, &theta, 0.5).unwrap();
        assert_eq!(report.selected_indices, vec![0, 1]);

        let data = Dataset::new(1, vec![1.0, 3.0, -3.0, 0.5], vec![Pos; 4], vec![Pos; 4]).unwrap();
        let report = retrain_confidence(&data, &theta, 0.25).unwrap();
        assert_eq!(report.selected_indices, vec![1]);
    }

    #[test]
    fn confidence_full_fraction_is_full_retrain() {
        let spec = ProblemSpec::figure1(0.5);
        let data = sample_dataset(&spec, &NoiseSpec::flip(0.4), 120, 8).unwrap();
        let initial = fit_initial(&data).unwrap();
        assert_eq!(
            retrain_confidence(&data, &initial, 1.0).unwrap(),
            retrain_full(&data, &initial).unwrap()
        );
        assert!(retrain_confidence(&data, &initial, 0.0).is_err());
        assert!(retrain_confidence(&data, &initial, 1.5).is_err());
    }

    #[test]
    fn csv_record_roundtrips() {
        let theta = LinearClassifier::new(vec![0.1, -2.5e-7, 3.0]);
        assert_eq!(LinearClassifier::csv_header(3), vec!["theta_0", "theta_1", "theta_2"]);
        let back: Vec<f64> = theta.to_csv_record().iter().map(|s| s.parse().unwrap()).collect();
        assert_eq!(back, theta.weights);
    }
}
