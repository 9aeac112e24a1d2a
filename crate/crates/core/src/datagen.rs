//! Sampling from the Gaussian mixture with a positive margin, plus the label
//! noise channel.
//!
//! Data lives in the canonical basis: the class mean direction is `e_0` and
//! the covariance is diagonal on coordinates `1..d`. Every statistic used
//! downstream depends on inner products only, so nothing is lost by fixing
//! the basis.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Pos,
    Neg,
}

impl Label {
    pub fn from_sign(value: f64) -> Label {
        if value >= 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }
}

/// Distribution of the margin stretch `u >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginDist {
    Uniform {
        low: f64,
        high: f64,
    },
    /// Deterministic `u = value`. Only meant for closed-form test oracles.
    PointMass {
        value: f64,
    },
    HalfNormal {
        sigma: f64,
    },
}

impl MarginDist {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            MarginDist::Uniform { low, high } => low.is_finite() && high.is_finite() && 0.0 <= low && low < high,
            MarginDist::PointMass { value } => value.is_finite() && value >= 0.0,
            MarginDist::HalfNormal { sigma } => sigma.is_finite() && sigma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!(
                "margin distribution {self:?} must produce nonnegative values \
                 (uniform needs 0 <= low < high, half-normal needs sigma > 0)"
            )))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            MarginDist::Uniform { low, high } => 0.5 * (low + high),
            MarginDist::PointMass { value } => value,
            MarginDist::HalfNormal { sigma } => sigma * (2.0 / std::f64::consts::PI).sqrt(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            MarginDist::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            MarginDist::PointMass { value } => value,
            MarginDist::HalfNormal { sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z.abs()
            }
        }
    }
}

/// Parameters of the generative model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub d: usize,
    /// Norm of the class mean `mu`.
    pub gamma: f64,
    /// Eigenvalues of the covariance on the `d - 1` coordinates orthogonal to `mu`.
    pub covariance_spectrum: Vec<f64>,
    pub margin_dist: MarginDist,
    /// Probability of the positive class.
    pub prior_pos: f64,
}

impl ProblemSpec {
    /// Isotropic covariance on the complement of `mu`, balanced classes.
    pub fn isotropic(d: usize, gamma: f64, margin_dist: MarginDist) -> ProblemSpec {
        ProblemSpec {
            d,
            gamma,
            covariance_spectrum: vec![1.0; d.saturating_sub(1)],
            margin_dist,
            prior_pos: 0.5,
        }
    }

    /// `d = 50`, `u ~ Unif[0, 4]`, identity covariance off `mu`, balanced
    /// classes; `gamma_sq` selects the separation.
    pub fn figure1(gamma_sq: f64) -> ProblemSpec {
        ProblemSpec::isotropic(50, gamma_sq.sqrt(), MarginDist::Uniform { low: 0.0, high: 4.0 })
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidSpec(format!("d must be at least 2, got {}", self.d)));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "gamma must be positive and finite, got {}",
                self.gamma
            )));
        }
        if self.covariance_spectrum.len() != self.d - 1 {
            return Err(Error::InvalidSpec(format!(
                "covariance spectrum needs d - 1 = {} entries, got {}",
                self.d - 1,
                self.covariance_spectrum.len()
            )));
        }
        if let Some(bad) = self.covariance_spectrum.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidSpec(format!(
                "covariance eigenvalues must be positive, got {bad}"
            )));
        }
        if !(self.prior_pos > 0.0 && self.prior_pos < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "prior_pos must lie in (0, 1), got {}",
                self.prior_pos
            )));
        }
        self.margin_dist.validate()
    }

    pub fn lambda_min(&self) -> f64 {
        self.covariance_spectrum.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn lambda_max(&self) -> f64 {
        self.covariance_spectrum
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when the margin is a point mass, which sits outside the
    /// sub-gaussian assumptions of the theory.
    pub fn uses_test_margin(&self) -> bool {
        matches!(self.margin_dist, MarginDist::PointMass { .. })
    }

    /// Draws one clean row into `out` and returns its true label.
    ///
    /// Randomness is consumed in a fixed order: label, margin, then `d`
    /// standard normals (the first is discarded since the covariance has no
    /// mass along `mu`).
    pub(crate) fn draw_row<R: Rng + ?Sized>(&self, rng: &mut R, sqrt_spectrum: &[f64], out: &mut [f64]) -> Label {
        let label = if rng.random::<f64>() < self.prior_pos {
            Label::Pos
        } else {
            Label::Neg
        };
        let u = self.margin_dist.sample(rng);
        let _along_mu: f64 = rng.sample(StandardNormal);
        out[0] = label.sign() * (1.0 + u) * self.gamma;
        for (slot, scale) in out[1..].iter_mut().zip(sqrt_spectrum) {
            let z: f64 = rng.sample(StandardNormal);
            *slot = scale * z;
        }
        label
    }

    pub(crate) fn sqrt_spectrum(&self) -> Vec<f64> {
        self.covariance_spectrum.iter().map(|l| l.sqrt()).collect()
    }
}

/// The class mean `mu = gamma * e_0`.
pub fn canonical_mu(spec: &ProblemSpec) -> Vec<f64> {
    let mut mu = vec![0.0; spec.d];
    mu[0] = spec.gamma;
    mu
}

/// Label noise channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    FlipProbability {
        p: f64,
    },
    /// Randomized response with `num_classes` outputs. For two classes the
    /// flip probability is `1 / (e^eps + 1)`; for more classes any wrong
    /// report counts as a flip, giving `(C - 1) / (e^eps + C - 1)`.
    RandomizedResponse {
        epsilon: f64,
        num_classes: u32,
    },
}

impl NoiseSpec {
    pub fn flip(p: f64) -> NoiseSpec {
        NoiseSpec::FlipProbability { p }
    }

    pub fn randomized_response(epsilon: f64) -> NoiseSpec {
        NoiseSpec::RandomizedResponse {
            epsilon,
            num_classes: 2,
        }
    }

    /// Probability that a given label differs from the true one.
    pub fn flip_probability(&self) -> f64 {
        match *self {
            NoiseSpec::FlipProbability { p } => p,
            NoiseSpec::RandomizedResponse { epsilon, num_classes } => {
                let others = f64::from(num_classes) - 1.0;
                // others / (e^eps + others), written to stay finite for large eps
                others / (epsilon.exp() + others)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::FlipProbability { p } => {
                if !(p.is_finite() && (0.0..0.5).contains(&p)) {
                    return Err(Error::InvalidNoise(format!(
                        "flip probability must satisfy 0 <= p < 1/2, got {p}"
                    )));
                }
            }
            NoiseSpec::RandomizedResponse { epsilon, num_classes } => {
                if !(epsilon.is_finite() && epsilon > 0.0) {
                    return Err(Error::InvalidNoise(format!(
                        "randomized response needs epsilon > 0, got {epsilon}"
                    )));
                }
                if num_classes < 2 {
                    return Err(Error::InvalidNoise(format!(
                        "randomized response needs at least 2 classes, got {num_classes}"
                    )));
                }
                let p = self.flip_probability();
                if p >= 0.5 {
                    return Err(Error::InvalidNoise(format!(
                        "epsilon = {epsilon} with {num_classes} classes gives flip \
                         probability {p}, which violates p < 1/2"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Sampled training data: features with true and noisy label tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    features: Vec<f64>,
    true_labels: Vec<Label>,
    noisy_labels: Vec<Label>,
}

impl Dataset {
    /// Builds a dataset from row-major features.
    pub fn new(d: usize, features: Vec<f64>, true_labels: Vec<Label>, noisy_labels: Vec<Label>) -> Result<Dataset> {
        let n = true_labels.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if noisy_labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: noisy_labels.len(),
            });
        }
        if features.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                actual: features.len(),
            });
        }
        Ok(Dataset {
            d,
            features,
            true_labels,
            noisy_labels,
        })
    }

    pub fn len(&self) -> usize {
        self.true_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.d)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn true_labels(&self) -> &[Label] {
        &self.true_labels
    }

    pub fn noisy_labels(&self) -> &[Label] {
        &self.noisy_labels
    }

    /// Same features and true labels with the noisy track replaced.
    pub fn relabeled(&self, labels: Vec<Label>) -> Result<Dataset> {
        Dataset::new(self.d, self.features.clone(), self.true_labels.clone(), labels)
    }

    /// Writes `row,y_true,y_noisy,x_0,...,x_{d-1}` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec!["row".to_string(), "y_true".into(), "y_noisy".into()];
        header.extend((0..self.d).map(|j| format!("x_{j}")));
        writer.write_record(&header)?;
        for (i, row) in self.rows().enumerate() {
            let mut record = Vec::with_capacity(self.d + 3);
            record.push(i.to_string());
            record.push(self.true_labels[i].as_i8().to_string());
            record.push(self.noisy_labels[i].as_i8().to_string());
            record.extend(row.iter().map(|x| format!("{x:.16e}")));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Draws `n` rows with noisy labels. Deterministic in `(spec, noise, n, seed)`.
///
/// Per row: label, margin, `d` normals, then the flip coin.
pub fn sample_dataset(spec: &ProblemSpec, noise: &NoiseSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    spec.validate()?;
    noise.validate()?;
    let flip_p = noise.flip_probability();
    let sqrt_spectrum = spec.sqrt_spectrum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut features = vec![0.0; n * spec.d];
    let mut true_labels = Vec::with_capacity(n);
    let mut noisy_labels = Vec::with_capacity(n);
    for row in features.chunks_exact_mut(spec.d) {
        let y = spec.draw_row(&mut rng, &sqrt_spectrum, row);
        let flip = rng.random::<f64>() < flip_p;
        true_labels.push(y);
        noisy_labels.push(if flip { y.flipped() } else { y });
    }
    Dataset::new(spec.d, features, true_labels, noisy_labels)
}

/// Fraction of rows whose noisy label differs from the true label.
pub fn flip_fraction(dataset: &Dataset) -> f64 {
    let flips = dataset
        .true_labels
        .iter()
        .zip(&dataset.noisy_labels)
        .filter(|(y, y_hat)| y != y_hat)
        .count();
    flips as f64 / dataset.len() as f64
}
