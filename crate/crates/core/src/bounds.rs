//! Closed-form error and sample-complexity bounds for the averaging
//! classifier before and after retraining.
//!
//! Every evaluator is a pure function of its inputs. Exponentials are formed
//! in log space; a term whose value would fall below [`UNDERFLOW_FLOOR`] is
//! reported as exactly zero and the report carries an underflow flag.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Smallest magnitude kept; anything below is flushed to zero.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: u64,
    pub d: u64,
    /// Flip probability. `p = 1/2` is accepted so the formulas can be probed
    /// at the boundary; sample complexities diverge there.
    pub p: f64,
    pub gamma: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl BoundInputs {
    pub fn new(n: u64, d: u64, p: f64, gamma: f64, lambda_min: f64, lambda_max: f64) -> Result<Self> {
        let inputs = BoundInputs {
            n,
            d,
            p,
            gamma,
            lambda_min,
            lambda_max,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    /// Isotropic covariance, `lambda_min = lambda_max = lambda`.
    pub fn isotropic(n: u64, d: u64, p: f64, gamma: f64, lambda: f64) -> Result<Self> {
        BoundInputs::new(n, d, p, gamma, lambda, lambda)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n == 0 || self.d == 0 {
            return bad(format!("n and d must be positive, got n = {}, d = {}", self.n, self.d));
        }
        if !(self.p.is_finite() && (0.0..=0.5).contains(&self.p)) {
            return bad(format!("p must lie in [0, 1/2], got {}", self.p));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.lambda_min > 0.0 && self.lambda_min.is_finite() && self.lambda_max.is_finite()) {
            return bad(format!(
                "eigenvalues must be positive and finite, got [{}, {}]",
                self.lambda_min, self.lambda_max
            ));
        }
        if self.lambda_min > self.lambda_max {
            return bad(format!(
                "lambda_min = {} exceeds lambda_max = {}",
                self.lambda_min, self.lambda_max
            ));
        }
        Ok(())
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    fn df(&self) -> f64 {
        self.d as f64
    }

    /// `1 - 2p`
    fn gap(&self) -> f64 {
        1.0 - 2.0 * self.p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundSide {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub raw: f64,
    pub clamped: f64,
    pub vacuous: bool,
    /// Some exponential term fell below the underflow floor and was zeroed.
    pub underflow: bool,
    /// The evaluator's stated preconditions do not hold; the value is still
    /// the formula evaluated as written.
    pub precondition_violated: bool,
}

impl BoundReport {
    fn new(side: BoundSide, value: Term) -> BoundReport {
        let raw = value.value;
        let (clamped, vacuous) = match side {
            BoundSide::Upper => (raw.clamp(0.0, 1.0), raw > 1.0),
            BoundSide::Lower => (raw.clamp(0.0, 1.0), raw < 0.0),
        };
        BoundReport {
            raw,
            clamped,
            vacuous,
            underflow: value.underflow,
            precondition_violated: false,
        }
    }

    fn with_preconditions(mut self, met: bool) -> BoundReport {
        self.precondition_violated = !met;
        self
    }
}

/// A nonnegative quantity plus whether any part of it was flushed to zero.
#[derive(Debug, Clone, Copy)]
struct Term {
    value: f64,
    underflow: bool,
}

impl Term {
    fn exp(log_value: f64) -> Term {
        if log_value < UNDERFLOW_FLOOR.ln() {
            Term {
                value: 0.0,
                underflow: true,
            }
        } else {
            Term {
                value: log_value.exp(),
                underflow: false,
            }
        }
    }

    fn sum(terms: &[Term]) -> Term {
        Term {
            value: terms.iter().map(|t| t.value).sum(),
            underflow: terms.iter().any(|t| t.underflow),
        }
    }
}

fn check_sigma_norm(sigma_norm: f64) -> Result<()> {
    if !(sigma_norm.is_finite() && sigma_norm > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma_norm must be positive, got {sigma_norm}"
        )));
    }
    Ok(())
}

/// Lower bound on the probability that `theta_0` misclassifies a fixed point
/// `x` with `inner = <x, mu>` and `sigma_norm = |Sigma^{1/2} x|`.
pub fn alpha0_lower(inputs: &BoundInputs, inner: f64, sigma_norm: f64) -> Result<BoundReport> {
    check_sigma_norm(sigma_norm)?;
    let snr_sq = (inner / sigma_norm).powi(2);
    let scale = 1.0 + inputs.nf().sqrt() * inputs.gap();
    let log = -(2.0 * SQRT_2PI).ln() - 5.0 * scale * scale * snr_sq;
    Ok(BoundReport::new(BoundSide::Lower, Term::exp(log)))
}

/// Upper bound on the same misclassification probability.
pub fn alpha0_upper(inputs: &BoundInputs, inner: f64, sigma_norm: f64) -> Result<BoundReport> {
    check_sigma_norm(sigma_norm)?;
    let snr_sq = (inner / sigma_norm).powi(2);
    let signal = inputs.nf() * inputs.gap().powi(2);
    let terms = [
        Term::exp(0.5f64.ln() - signal * snr_sq / 8.0),
        Term::exp(2f64.ln() - signal / 32.0),
    ];
    Ok(BoundReport::new(BoundSide::Upper, Term::sum(&terms)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Err0Bounds {
    pub lower: BoundReport,
    pub upper: BoundReport,
}

/// Lower and upper bounds on the population error of `theta_0`.
pub fn err0_bounds(inputs: &BoundInputs) -> Err0Bounds {
    let (n, d, gap) = (inputs.nf(), inputs.df(), inputs.gap());
    let gamma4 = inputs.gamma.powi(4);

    let scale = 1.0 + n.sqrt() * gap;
    let log_lower = (1.0 - (-d / 16.0).exp()).ln()
        - (4.0 * SQRT_2PI).ln()
        - 160.0 * scale * scale * gamma4 / (inputs.lambda_min.powi(2) * d);
    let lower = BoundReport::new(BoundSide::Lower, Term::exp(log_lower));

    let signal = n * gap * gap;
    let upper_terms = [
        Term::exp(0.5f64.ln() - signal * gamma4 / (16.0 * inputs.lambda_max.powi(2) * d)),
        Term::exp(-d / 8.0),
        Term::exp(2f64.ln() - signal / 32.0),
    ];
    let upper = BoundReport::new(BoundSide::Upper, Term::sum(&upper_terms));
    Err0Bounds { lower, upper }
}

/// Sample size above which `theta_0` reaches accuracy `1 - delta`.
pub fn sample_complexity_initial(delta: f64, inputs: &BoundInputs) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(
        8.0 * inputs.lambda_max.powi(2) * (1.0 / delta).ln() / inputs.gap().powi(2) * inputs.df()
            / inputs.gamma.powi(4),
    )
}

/// `c (1 - delta) d / (1 - 2p)^2`: the order of the information-theoretic
/// lower bound with a caller-chosen constant.
pub fn sample_complexity_lower_curve(delta: f64, d: u64, p: f64, c: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!("delta must lie in [0, 1), got {delta}")));
    }
    if c.is_nan() || c <= 0.0 {
        return Err(Error::InvalidArgument(format!("constant must be positive, got {c}")));
    }
    Ok(c * (1.0 - delta) * d as f64 / (1.0 - 2.0 * p).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrainAux {
    pub q_prime: f64,
    pub p_prime: f64,
    pub preconditions_met: bool,
    pub q_prime_underflow: bool,
}

/// Auxiliary quantities `q'`, `p'` of the retraining bound and whether its
/// three preconditions hold.
pub fn retrain_aux(inputs: &BoundInputs) -> RetrainAux {
    let (n, d, gap) = (inputs.nf(), inputs.df(), inputs.gap());
    let gamma2 = inputs.gamma.powi(2);
    let lmax = inputs.lambda_max;
    let q = Term::exp(-n * gap * gamma2 / (40.0 * lmax));
    let p_prime = (1.0 + 3.0 * gamma2 * gamma2 / (8.0 * lmax * lmax * n * d)) * inputs.p;
    let preconditions_met =
        n / d > 4.0 * lmax / (gamma2 * gap) && n * d > gamma2 * gamma2 / (lmax * lmax) && inputs.d >= 7;
    RetrainAux {
        q_prime: q.value,
        p_prime,
        preconditions_met,
        q_prime_underflow: q.underflow,
    }
}

/// `(n/2) (exp(-(gamma^4 / (8 lmax^2)) (1 - 2p') n/d) + e^{-d/16}) e^{d/n}`
fn bad_event_term(inputs: &BoundInputs, aux: &RetrainAux) -> Term {
    let (n, d) = (inputs.nf(), inputs.df());
    let a = -inputs.gamma.powi(4) / (8.0 * inputs.lambda_max.powi(2)) * (1.0 - 2.0 * aux.p_prime) * n / d;
    let b = -d / 16.0;
    let hi = a.max(b);
    let log_sum = hi + ((a - hi).exp() + (b - hi).exp()).ln();
    Term::exp((n / 2.0).ln() + log_sum + d / n)
}

/// Upper bound on the probability that the retrained classifier
/// misclassifies a fixed point. Evaluated even when the preconditions fail,
/// in which case the report is flagged.
pub fn alpha1_upper(inputs: &BoundInputs, inner: f64, sigma_norm: f64) -> Result<BoundReport> {
    if !(sigma_norm.is_finite() && sigma_norm >= 0.0 && inner.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need finite inner and nonnegative sigma_norm, got ({inner}, {sigma_norm})"
        )));
    }
    let total_sq = inner * inner + sigma_norm * sigma_norm;
    if total_sq == 0.0 {
        return Err(Error::InvalidArgument(
            "inner and sigma_norm cannot both be zero".into(),
        ));
    }
    let aux = retrain_aux(inputs);
    let n = inputs.nf();
    let terms = [
        Term::exp(2f64.ln() - n * (1.0 - 2.0 * aux.q_prime).powi(2) * inner * inner / (64.0 * total_sq)),
        Term::exp(4f64.ln() - n * inputs.gap().powi(2) / 32.0),
        bad_event_term(inputs, &aux),
    ];
    Ok(BoundReport::new(BoundSide::Upper, Term::sum(&terms)).with_preconditions(aux.preconditions_met))
}

/// The four summands of the retrained population-error bound, in order.
pub fn err1_upper_terms(inputs: &BoundInputs) -> [f64; 4] {
    err1_terms(inputs).map(|t| t.value)
}

fn err1_terms(inputs: &BoundInputs) -> [Term; 4] {
    let aux = retrain_aux(inputs);
    let (n, d) = (inputs.nf(), inputs.df());
    let gamma4 = inputs.gamma.powi(4);
    [
        Term::exp(
            2f64.ln()
                - n * (1.0 - 2.0 * aux.q_prime).powi(2) * gamma4
                    / (64.0 * (gamma4 + 2.0 * inputs.lambda_max.powi(2) * d)),
        ),
        Term::exp(2f64.ln() - d / 8.0),
        Term::exp(4f64.ln() - n * inputs.gap().powi(2) / 32.0),
        bad_event_term(inputs, &aux),
    ]
}

/// Upper bound on the population error of the retrained classifier.
pub fn err1_upper(inputs: &BoundInputs) -> BoundReport {
    let aux = retrain_aux(inputs);
    BoundReport::new(BoundSide::Upper, Term::sum(&err1_terms(inputs))).with_preconditions(aux.preconditions_met)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrainWindow {
    pub n_low: f64,
    pub n_high: f64,
    pub inside: bool,
}

/// Range of `n` where retraining is predicted to beat initial training:
/// `c1 A log(max(A, e)) <= n <= c2 A d` with
/// `A = lambda_min^2 d / (gamma^4 (1 - 2p)^2)`.
pub fn retraining_helps_window(inputs: &BoundInputs, c1: f64, c2: f64) -> RetrainWindow {
    let d = inputs.df();
    let a = inputs.lambda_min.powi(2) * d / (inputs.gamma.powi(4) * inputs.gap().powi(2));
    let n_low = c1 * a * a.max(std::f64::consts::E).ln();
    let n_high = c2 * a * d;
    let n = inputs.nf();
    RetrainWindow {
        n_low,
        n_high,
        inside: inputs.n > 0 && n_low <= n && n <= n_high,
    }
}

/// Axes and constants for a bound table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundGrid {
    pub n_axis: Vec<u64>,
    pub d_axis: Vec<u64>,
    pub p_axis: Vec<f64>,
    pub gamma_axis: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub delta: f64,
    pub lower_curve_c: f64,
    pub window_c1: f64,
    pub window_c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub inputs: BoundInputs,
    pub err0: Err0Bounds,
    pub err1_upper: BoundReport,
    pub aux: RetrainAux,
    pub sample_complexity_initial: f64,
    pub sample_complexity_lower_curve: f64,
    pub window: RetrainWindow,
}

pub const BOUND_TABLE_HEADER: [&str; 23] = [
    "n",
    "d",
    "p",
    "gamma",
    "lambda_min",
    "lambda_max",
    "err0_lower_raw",
    "err0_lower_clamped",
    "err0_lower_vacuous",
    "err0_upper_raw",
    "err0_upper_clamped",
    "err0_upper_vacuous",
    "err1_upper_raw",
    "err1_upper_clamped",
    "err1_upper_vacuous",
    "q_prime",
    "p_prime",
    "preconditions_met",
    "sample_complexity_initial",
    "sample_complexity_lower_curve",
    "window_low",
    "window_high",
    "inside_window",
];

pub fn evaluate_row(grid: &BoundGrid, inputs: BoundInputs) -> Result<BoundRow> {
    inputs.validate()?;
    Ok(BoundRow {
        inputs,
        err0: err0_bounds(&inputs),
        err1_upper: err1_upper(&inputs),
        aux: retrain_aux(&inputs),
        sample_complexity_initial: sample_complexity_initial(grid.delta, &inputs)?,
        sample_complexity_lower_curve: sample_complexity_lower_curve(
            grid.delta,
            inputs.d,
            inputs.p,
            grid.lower_curve_c,
        )?,
        window: retraining_helps_window(&inputs, grid.window_c1, grid.window_c2),
    })
}

/// One row per grid point, in `n`-major order (`n`, then `d`, `p`, `gamma`).
pub fn bound_table(grid: &BoundGrid) -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    for &n in &grid.n_axis {
        for &d in &grid.d_axis {
            for &p in &grid.p_axis {
                for &gamma in &grid.gamma_axis {
                    let inputs = BoundInputs::new(n, d, p, gamma, grid.lambda_min, grid.lambda_max)?;
                    rows.push(evaluate_row(grid, inputs)?);
                }
            }
        }
    }
    Ok(rows)
}

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

pub fn write_bound_table_csv<W: Write>(rows: &[BoundRow], out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    writer.write_record(BOUND_TABLE_HEADER)?;
    for row in rows {
        let i = &row.inputs;
        let report = |r: &BoundReport| [num(r.raw), num(r.clamped), r.vacuous.to_string()];
        let mut record = vec![
            i.n.to_string(),
            i.d.to_string(),
            num(i.p),
            num(i.gamma),
            num(i.lambda_min),
            num(i.lambda_max),
        ];
        record.extend(report(&row.err0.lower));
        record.extend(report(&row.err0.upper));
        record.extend(report(&row.err1_upper));
        record.extend([
            num(row.aux.q_prime),
            num(row.aux.p_prime),
            row.aux.preconditions_met.to_string(),
            num(row.sample_complexity_initial),
            num(row.sample_complexity_lower_curve),
            num(row.window.n_low),
            num(row.window.n_high),
            row.window.inside.to_string(),
        ]);
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    // Golden values below were computed with 50-digit mpmath arithmetic
    // directly from the formulas, independently of this module.

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn iso(n: u64, d: u64, p: f64) -> BoundInputs {
        BoundInputs::isotropic(n, d, p, 1.0, 1.0).unwrap()
    }

    #[test]
    fn alpha0_lower_values() {
        let inputs = iso(100, 10, 0.4);
        let r = alpha0_lower(&inputs, 0.0, 1.0).unwrap();
        assert!(rel(r.raw, 0.199_471_140_200_716_34) < 1e-12);
        let r = alpha0_lower(&inputs, 0.1, 1.0).unwrap();
        assert!(rel(r.raw, 0.127_188_414_428_070_36) < 1e-12);
        assert!(!r.vacuous);
        assert!(alpha0_lower(&inputs, 0.1, 0.0).is_err());

        // increasing p toward 1/2 raises the bound toward 0.19947 e^{-5 snr^2}
        let mut last = 0.0;
        for p in [0.0, 0.2, 0.4, 0.49, 0.5] {
            let r = alpha0_lower(&iso(100, 10, p), 0.1, 1.0).unwrap().raw;
            assert!(r > last);
            last = r;
        }
        assert!(rel(last, 0.199_471_140_200_716_34 * (-0.05f64).exp()) < 1e-12);
    }

    #[test]
    fn alpha0_upper_values() {
        let r = alpha0_upper(&iso(100_000, 100, 0.4), 0.1, 1.0).unwrap();
        assert!(rel(r.raw, 0.003_368_973_499_542_733_5) < 1e-10);
        let r = alpha0_upper(&iso(100, 10, 0.5), 0.3, 1.0).unwrap();
        assert_eq!(r.raw, 2.5);
        assert!(r.vacuous);
        assert_eq!(r.clamped, 1.0);

        let mut last = f64::INFINITY;
        for n in [10, 100, 1000, 10_000] {
            let r = alpha0_upper(&iso(n, 10, 0.3), 0.2, 1.0).unwrap().raw;
            assert!(r < last);
            last = r;
        }
    }

    #[test]
    fn err0_values() {
        let b = err0_bounds(&iso(100_000, 100, 0.4));
        assert!(rel(b.upper.raw, 0.041_046_225_965_121_476) < 1e-10);
        assert_eq!(b.lower.raw, 0.0);
        assert!(b.lower.underflow);

        let b = err0_bounds(&iso(100_000, 100, 0.45));
        assert!(rel(b.upper.raw, 0.267_634_440_912_720_2) < 1e-10);

        // huge d with gamma^4 / (lambda_min^2 d) -> 0
        let b = err0_bounds(&BoundInputs::isotropic(10, 10_000_000_000, 0.3, 1.0, 1.0).unwrap());
        assert!((b.lower.raw - 1.0 / (4.0 * SQRT_2PI)).abs() < 1e-6);
    }

    #[test]
    fn err0_lower_below_upper_in_tight_regime() {
        // n <~ lmax^2 d^2 / ((1 - 2p)^2 gamma^4), gamma <~ (lmax^2 d)^{1/4}
        for (n, d, p) in [(100, 100, 0.4), (1000, 200, 0.3), (50, 50, 0.45), (5000, 1000, 0.1)] {
            let b = err0_bounds(&iso(n, d, p));
            assert!(b.lower.clamped <= b.upper.clamped, "n={n} d={d} p={p}");
        }
    }

    #[test]
    fn sample_complexity_values() {
        let inputs = BoundInputs::isotropic(1, 10, 0.0, 1.0, 1.0).unwrap();
        let v = sample_complexity_initial((-1f64).exp(), &inputs).unwrap();
        assert!(rel(v, 80.0) < 1e-14);
        let doubled = BoundInputs { d: 20, ..inputs };
        assert!(
            rel(
                sample_complexity_initial(0.1, &doubled).unwrap(),
                2.0 * sample_complexity_initial(0.1, &inputs).unwrap()
            ) < 1e-14
        );
        let near_half = BoundInputs { p: 0.5, ..inputs };
        assert!(sample_complexity_initial(0.1, &near_half).unwrap().is_infinite());
        assert!(sample_complexity_initial(0.0, &inputs).is_err());
        assert!(sample_complexity_initial(1.0, &inputs).is_err());

        assert_eq!(sample_complexity_lower_curve(0.0, 100, 0.0, 1.0).unwrap(), 100.0);
        assert!(rel(sample_complexity_lower_curve(0.5, 50, 0.25, 2.0).unwrap(), 200.0) < 1e-14);
    }

    #[test]
    fn complexity_ratio_independent_of_d_and_p() {
        let ratio = |d: u64, p: f64| {
            let inputs = BoundInputs::isotropic(1, d, p, 1.3, 2.0).unwrap();
            sample_complexity_initial(0.2, &inputs).unwrap() / sample_complexity_lower_curve(0.2, d, p, 1.0).unwrap()
        };
        let base = ratio(10, 0.1);
        for (d, p) in [(50, 0.1), (10, 0.4), (1000, 0.3)] {
            assert!(rel(ratio(d, p), base) < 1e-12);
        }
    }

    #[test]
    fn retrain_aux_values() {
        let aux = retrain_aux(&iso(100_000, 100, 0.4));
        assert!(rel(aux.q_prime, 7.124_576_406_741_285_5e-218) < 1e-10);
        assert!(!aux.q_prime_underflow);
        assert!(rel(aux.p_prime, 0.400_000_015) < 1e-12);
        assert!(aux.preconditions_met);

        let aux = retrain_aux(&iso(100, 10, 0.4));
        assert!(rel(aux.q_prime, 0.606_530_659_712_633_42) < 1e-12);
        assert!(rel(aux.p_prime, 0.400_15) < 1e-12);
        assert!(!aux.preconditions_met);

        let aux = retrain_aux(&iso(100, 6, 0.0));
        assert!(!aux.preconditions_met, "d < 7");

        let aux = retrain_aux(&iso(10_000_000, 100, 0.4));
        assert_eq!(aux.q_prime, 0.0);
        assert!(aux.q_prime_underflow);

        let mut last = f64::INFINITY;
        for n in [10, 1000, 100_000, 10_000_000] {
            let p_prime = retrain_aux(&iso(n, 100, 0.3)).p_prime;
            assert!(p_prime >= 0.3 && p_prime < last);
            last = p_prime;
        }
        assert!(last - 0.3 < 1e-9);
    }

    #[test]
    fn alpha1_values() {
        let inputs = iso(100_000, 100, 0.4);
        let r = alpha1_upper(&inputs, 1.0, 200f64.sqrt()).unwrap();
        assert!(rel(r.raw, 96.620_119_856_009_192) < 1e-10);
        assert!(r.vacuous);
        assert!(!r.precondition_violated);

        assert!(alpha1_upper(&inputs, 0.0, 0.0).is_err());
        assert!(alpha1_upper(&inputs, 1.0, 0.0).is_ok());

        let small = iso(100, 10, 0.4);
        assert!(alpha1_upper(&small, 1.0, 1.0).unwrap().precondition_violated);

        let mut last = f64::INFINITY;
        for inner in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let r = alpha1_upper(&iso(2000, 10, 0.2), inner, 1.0).unwrap().raw;
            assert!(r <= last);
            last = r;
        }
    }

    #[test]
    fn err1_values() {
        let inputs = iso(100_000, 100, 0.45);
        let r = err1_upper(&inputs);
        assert!(rel(r.raw, 96.806_646_485_560_076) < 1e-10);
        let terms = err1_upper_terms(&inputs);
        let want = [
            8.413_652_732_541_457e-4,
            7.453_306_344_157_342e-6,
            1.072_401_547_112_721_3e-13,
            96.805_797_666_980_371,
        ];
        for (got, want) in terms.iter().zip(want) {
            assert!(rel(*got, want) < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn err1_dominated_by_bad_event_term() {
        for n in [5_000u64, 20_000, 50_000, 100_000] {
            let t = err1_upper_terms(&iso(n, 100, 0.3));
            assert!(t[3] > t[0] && t[3] > t[1] && t[3] > t[2], "n = {n}: {t:?}");
        }
    }

    #[test]
    fn window_values() {
        let w = retraining_helps_window(&iso(100_000, 100, 0.45), 1.0, 1.0);
        assert!(rel(w.n_low, 92_103.403_719_761_827) < 1e-12);
        assert!(rel(w.n_high, 1.0e6) < 1e-12);
        assert!(w.inside);

        let below = retraining_helps_window(&iso(9_210, 100, 0.45), 1.0, 1.0);
        assert!(!below.inside);

        let wider = retraining_helps_window(&BoundInputs::isotropic(1, 100, 0.45, 1.5, 1.0).unwrap(), 1.0, 1.0);
        assert!(wider.n_low < w.n_low && wider.n_high < w.n_high);

        let zero = BoundInputs {
            n: 0,
            ..iso(1, 100, 0.45)
        };
        assert!(!retraining_helps_window(&zero, 1.0, 1.0).inside);
    }

    #[test]
    fn clamp_flags_are_consistent() {
        for n in [1u64, 10, 1000, 1_000_000] {
            for p in [0.0, 0.3, 0.49] {
                let inputs = iso(n, 20, p);
                let b = err0_bounds(&inputs);
                for r in [b.lower, b.upper, err1_upper(&inputs)] {
                    assert!((0.0..=1.0).contains(&r.clamped));
                    assert!(r.raw >= 0.0);
                }
                assert_eq!(b.upper.vacuous, b.upper.raw > 1.0);
                assert!(!b.lower.vacuous);
            }
        }
    }

    #[test]
    fn table_csv_has_documented_columns() {
        let grid = BoundGrid {
            n_axis: vec![1000, 10_000, 100_000],
            d_axis: vec![100],
            p_axis: vec![0.4],
            gamma_axis: vec![1.0],
            lambda_min: 1.0,
            lambda_max: 1.0,
            delta: 0.1,
            lower_curve_c: 1.0,
            window_c1: 1.0,
            window_c2: 1.0,
        };
        let rows = bound_table(&grid).unwrap();
        assert_eq!(rows.len(), 3);
        let mut buf = Vec::new();
        write_bound_table_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], BOUND_TABLE_HEADER.join(","));
        assert!(lines[1..]
            .iter()
            .all(|l| l.split(',').count() == BOUND_TABLE_HEADER.len()));
    }
}
