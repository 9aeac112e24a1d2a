//! Summary statistics and paired significance tests for trial aggregates.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator); 0 for a single value.
    pub std: f64,
    /// Standard error of the mean.
    pub sem: f64,
}

/// Summarises values in the order given. Empty input yields NaN moments.
pub fn summarize(values: &[f64]) -> Summary {
    let count = values.len();
    if count == 0 {
        return Summary {
            count,
            mean: f64::NAN,
            std: f64::NAN,
            sem: f64::NAN,
        };
    }
    let n = count as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if count > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Summary {
        count,
        mean,
        std,
        sem: std / n.sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    /// Number of pairs that entered the test (nonzero differences for the
    /// signed-rank test).
    pub n: usize,
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Sign of the location shift (`+1`, `-1`, or 0 when undetermined).
    pub direction: i8,
}

impl PairedTest {
    /// Two-sided rejection at level `alpha` with a positive shift.
    pub fn significantly_positive(&self, alpha: f64) -> bool {
        self.direction > 0 && self.p_value < alpha
    }

    pub fn significantly_negative(&self, alpha: f64) -> bool {
        self.direction < 0 && self.p_value < alpha
    }
}

/// Wilcoxon signed-rank test on paired differences, normal approximation
/// with tie correction; zero differences are dropped.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> PairedTest {
    let mut nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return PairedTest {
            n,
            statistic: 0.0,
            p_value: 1.0,
            direction: 0,
        };
    }
    nonzero.sort_by(|a, b| a.abs().total_cmp(&b.abs()));

    // average ranks over ties in |d|
    let mut w_plus = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nonzero[j + 1].abs() == nonzero[i].abs() {
            j += 1;
        }
        let rank = 0.5 * ((i + 1) + (j + 1)) as f64;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        w_plus += rank * nonzero[i..=j].iter().filter(|d| **d > 0.0).count() as f64;
        i = j + 1;
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let shift = w_plus - mean;
    let (z, direction) = if var > 0.0 {
        (shift / var.sqrt(), shift.partial_cmp(&0.0).map_or(0, |o| o as i8))
    } else {
        (0.0, 0)
    };
    let standard = Normal::new(0.0, 1.0).expect("unit normal");
    let p_value = (2.0 * standard.cdf(-z.abs())).min(1.0);
    PairedTest {
        n,
        statistic: z,
        p_value,
        direction,
    }
}

/// Paired t-test on differences.
pub fn paired_t_test(diffs: &[f64]) -> PairedTest {
    let s = summarize(diffs);
    if s.count < 2 || s.sem == 0.0 {
        let direction = if s.count == 0 || s.mean == 0.0 {
            0
        } else if s.mean > 0.0 {
            1
        } else {
            -1
        };
        let p_value = if direction == 0 || s.count < 2 { 1.0 } else { 0.0 };
        return PairedTest {
            n: s.count,
            statistic: if direction == 0 {
                0.0
            } else {
                f64::INFINITY * f64::from(direction)
            },
            p_value,
            direction,
        };
    }
    let t = s.mean / s.sem;
    let dist = StudentsT::new(0.0, 1.0, (s.count - 1) as f64).expect("positive dof");
    PairedTest {
        n: s.count,
        statistic: t,
        p_value: (2.0 * dist.cdf(-t.abs())).min(1.0),
        direction: if t > 0.0 { 1 } else { -1 },
    }
}

/// Two-sided normal critical value for confidence `1 - alpha`.
pub fn normal_critical_value(alpha: f64) -> f64 {
    Normal::new(0.0, 1.0)
        .expect("unit normal")
        .inverse_cdf(1.0 - alpha / 2.0)
}
