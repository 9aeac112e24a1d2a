//! Population error of a fixed classifier, computed exactly or by Monte Carlo.
//!
//! Conditioned on the margin `u`, the signed score of a clean sample is
//! `y <x, theta> = (1 + u) <mu, theta> + N(0, |Sigma^{1/2} theta|^2)`, so the
//! error is the one-dimensional expectation
//! `E_u[ Phi^c((1 + u) <mu, theta> / |Sigma^{1/2} theta|) ]`.
//! Neither the class prior nor the label noise enters.

use libm::erfc;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, Label, MarginDist, ProblemSpec};
use crate::linear::{LinearClassifier, RetrainReport};
use crate::quadrature::{adaptive_integrate, gauss_legendre_64};
use crate::{Error, Result};

/// Standard normal CDF.
pub fn std_normal_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail `1 - Phi(t)`, accurate for large `t`.
pub fn std_normal_ccdf(t: f64) -> f64 {
    0.5 * erfc(t / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimateMethod {
    Exact,
    MonteCarlo { num_samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: EstimateMethod,
}

impl ErrorEstimate {
    pub fn accuracy(&self) -> f64 {
        1.0 - self.value
    }
}

/// Error of a classifier whose signal along `mu` is `signal = <mu, theta>` and
/// whose noise standard deviation is `spread = |Sigma^{1/2} theta|`.
pub fn error_from_projections(margin: &MarginDist, signal: f64, spread: f64) -> Result<f64> {
    if !(signal.is_finite() && spread.is_finite() && spread >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "projections must be finite with nonnegative spread, got ({signal}, {spread})"
        )));
    }
    if spread == 0.0 {
        return if signal > 0.0 {
            Ok(0.0)
        } else if signal < 0.0 {
            Ok(1.0)
        } else {
            Err(Error::DegenerateClassifier)
        };
    }
    let ratio = signal / spread;
    let tail = |u: f64| std_normal_ccdf((1.0 + u) * ratio);
    let value = match *margin {
        MarginDist::PointMass { value } => tail(value),
        MarginDist::Uniform { low, high } => gauss_legendre_64().integrate(tail, low, high) / (high - low),
        MarginDist::HalfNormal { sigma } => {
            let norm = (2.0 / std::f64::consts::PI).sqrt() / sigma;
            let integrand = |u: f64| {
                let z = u / sigma;
                norm * (-0.5 * z * z).exp() * tail(u)
            };
            // density mass beyond 40 sigma is below 1e-300
            adaptive_integrate(&integrand, 0.0, 40.0 * sigma, 1e-13)
        }
    };
    Ok(value.clamp(0.0, 1.0))
}

/// `(<mu, theta>, |Sigma^{1/2} theta|)` in the canonical basis.
pub fn projections(spec: &ProblemSpec, classifier: &LinearClassifier) -> Result<(f64, f64)> {
    if classifier.dim() != spec.d {
        return Err(Error::DimensionMismatch {
            expected: spec.d,
            actual: classifier.dim(),
        });
    }
    let w = &classifier.weights;
    let signal = spec.gamma * w[0];
    let spread_sq: f64 = spec
        .covariance_spectrum
        .iter()
        .zip(&w[1..])
        .map(|(l, t)| l * t * t)
        .sum();
    Ok((signal, spread_sq.sqrt()))
}

/// Exact population error (quadrature over the margin distribution).
pub fn exact_error(spec: &ProblemSpec, classifier: &LinearClassifier) -> Result<ErrorEstimate> {
    let (signal, spread) = projections(spec, classifier)?;
    let value = error_from_projections(&spec.margin_dist, signal, spread)?;
    Ok(ErrorEstimate {
        value,
        stderr: 0.0,
        method: EstimateMethod::Exact,
    })
}

/// Misclassification rate on `num_samples` fresh clean samples.
pub fn monte_carlo_error(
    spec: &ProblemSpec,
    classifier: &LinearClassifier,
    num_samples: usize,
    seed: u64,
) -> Result<ErrorEstimate> {
    if num_samples == 0 {
        return Err(Error::InvalidArgument("num_samples must be positive".into()));
    }
    if classifier.dim() != spec.d {
        return Err(Error::DimensionMismatch {
            expected: spec.d,
            actual: classifier.dim(),
        });
    }
    spec.validate()?;
    let sqrt_spectrum = spec.sqrt_spectrum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut row = vec![0.0; spec.d];
    let mut wrong = 0usize;
    for _ in 0..num_samples {
        let y = spec.draw_row(&mut rng, &sqrt_spectrum, &mut row);
        if Label::from_sign(classifier.score(&row)) != y {
            wrong += 1;
        }
    }
    let m = num_samples as f64;
    let value = wrong as f64 / m;
    Ok(ErrorEstimate {
        value,
        stderr: (value * (1.0 - value) / m).sqrt(),
        method: EstimateMethod::MonteCarlo { num_samples, seed },
    })
}

/// Label-quality diagnostics around the consensus set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusDiagnostics {
    /// Accuracy of the initial model's predictions on the whole training set.
    pub acc_pred_full: f64,
    /// Accuracy of the given noisy labels on the whole training set.
    pub acc_given_full: f64,
    /// Accuracy of the predictions restricted to the consensus set; `None`
    /// when the consensus set is empty.
    pub acc_pred_consensus: Option<f64>,
    pub consensus_fraction: f64,
}

pub fn consensus_diagnostics(dataset: &Dataset, report: &RetrainReport) -> Result<ConsensusDiagnostics> {
    let n = dataset.len();
    if report.predicted_labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: report.predicted_labels.len(),
        });
    }
    let truth = dataset.true_labels();
    let given = dataset.noisy_labels();
    let pred = &report.predicted_labels;

    let mut pred_right = 0usize;
    let mut given_right = 0usize;
    let mut consensus = 0usize;
    let mut consensus_right = 0usize;
    for i in 0..n {
        let p_ok = pred[i] == truth[i];
        pred_right += usize::from(p_ok);
        given_right += usize::from(given[i] == truth[i]);
        if pred[i] == given[i] {
            consensus += 1;
            consensus_right += usize::from(p_ok);
        }
    }
    let nf = n as f64;
    Ok(ConsensusDiagnostics {
        acc_pred_full: pred_right as f64 / nf,
        acc_given_full: given_right as f64 / nf,
        acc_pred_consensus: (consensus > 0).then(|| consensus_right as f64 / consensus as f64),
        consensus_fraction: consensus as f64 / nf,
    })
}
