//! Seeded trials, parameter sweeps and the canned experiments built on them.
//!
//! Every trial draws from its own substream seed, a 64-bit mix of
//! `(master_seed, cell_index, trial_index)`. Seeds are derived before any
//! work is scheduled, so a sweep produces the same report no matter how many
//! threads run it or in which order cells finish.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    err0_bounds, err1_upper, retraining_helps_window, BoundInputs, BoundReport, Err0Bounds, RetrainWindow,
};
use crate::datagen::{flip_fraction, sample_dataset, MarginDist, NoiseSpec, ProblemSpec};
use crate::evaluation::{consensus_diagnostics, exact_error, monte_carlo_error, ConsensusDiagnostics, ErrorEstimate};
use crate::linear::{
    fit_initial, retrain_confidence, retrain_consensus, retrain_full, LinearClassifier, RetrainReport,
};
use crate::stats::{normal_critical_value, summarize, wilcoxon_signed_rank, PairedTest, Summary};
use crate::{Error, Result};

/// Training procedure evaluated in a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Strategy {
    Initial,
    Full,
    Consensus,
    Confidence { keep_fraction: f64 },
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Initial => f.write_str("initial"),
            Strategy::Full => f.write_str("full"),
            Strategy::Consensus => f.write_str("consensus"),
            Strategy::Confidence { keep_fraction } => write!(f, "confidence:{keep_fraction}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    /// `initial`, `full`, `consensus`, `confidence` or `confidence:<fraction>`.
    fn from_str(s: &str) -> Result<Strategy> {
        let s = s.trim();
        match s {
            "initial" => return Ok(Strategy::Initial),
            "full" => return Ok(Strategy::Full),
            "consensus" => return Ok(Strategy::Consensus),
            "confidence" => {
                return Ok(Strategy::Confidence {
                    keep_fraction: crate::linear::DEFAULT_KEEP_FRACTION,
                })
            }
            _ => {}
        }
        if let Some(frac) = s.strip_prefix("confidence:") {
            let keep_fraction: f64 = frac
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad keep fraction in {s:?}")))?;
            if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "keep fraction must lie in (0, 1], got {keep_fraction}"
                )));
            }
            return Ok(Strategy::Confidence { keep_fraction });
        }
        Err(Error::InvalidArgument(format!(
            "unknown strategy {s:?} (expected initial, full, consensus or confidence[:fraction])"
        )))
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;

    fn try_from(s: String) -> Result<Strategy> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeedPolicy {
    /// Test seed derived from the trial's substream; strategies within a
    /// trial share the same test points.
    PerTrial,
    Fixed {
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestMode {
    Exact,
    MonteCarlo { samples: usize, seeds: SeedPolicy },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub spec: ProblemSpec,
    pub noise: NoiseSpec,
    pub n_train: usize,
    pub test_mode: TestMode,
    /// Requested strategies; `Initial` is always evaluated as well.
    pub strategies: Vec<Strategy>,
    pub master_seed: u64,
    pub trial_index: u64,
    pub cell_index: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(splitmix64(splitmix64(master) ^ cell) ^ trial)`.
pub fn substream_seed(master_seed: u64, cell_index: u64, trial_index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ cell_index) ^ trial_index)
}

const TEST_STREAM_TAG: u64 = 0x7E57_5EED_0000_0001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyOutcome {
    pub strategy: Strategy,
    /// `None` when the strategy could not produce a classifier (empty
    /// consensus set, or a zero classifier).
    pub error: Option<ErrorEstimate>,
    pub rows_used: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub substream_seed: u64,
    pub trial_index: u64,
    pub flip_fraction: f64,
    /// One entry per strategy, `Initial` first, then in request order.
    pub outcomes: Vec<StrategyOutcome>,
    pub consensus: Option<ConsensusDiagnostics>,
    /// Not part of equality: timing is the one nondeterministic field.
    pub wall_time: Duration,
}

impl PartialEq for TrialResult {
    fn eq(&self, other: &Self) -> bool {
        self.substream_seed == other.substream_seed
            && self.trial_index == other.trial_index
            && self.flip_fraction.to_bits() == other.flip_fraction.to_bits()
            && self.outcomes == other.outcomes
            && self.consensus == other.consensus
    }
}

impl TrialResult {
    pub fn outcome(&self, strategy: Strategy) -> Option<&StrategyOutcome> {
        self.outcomes.iter().find(|o| o.strategy == strategy)
    }

    pub fn error(&self, strategy: Strategy) -> Option<f64> {
        self.outcome(strategy).and_then(|o| o.error).map(|e| e.value)
    }

    pub fn accuracy(&self, strategy: Strategy) -> Option<f64> {
        self.error(strategy).map(|e| 1.0 - e)
    }
}

fn requested_strategies(strategies: &[Strategy]) -> Vec<Strategy> {
    let mut out = vec![Strategy::Initial];
    for s in strategies {
        if !out.contains(s) {
            out.push(*s);
        }
    }
    out
}

fn evaluate(config: &TrialConfig, classifier: &LinearClassifier, test_seed: u64) -> Result<Option<ErrorEstimate>> {
    if classifier.is_zero() {
        return Ok(None);
    }
    let estimate = match config.test_mode {
        TestMode::Exact => exact_error(&config.spec, classifier),
        TestMode::MonteCarlo { samples, .. } => monte_carlo_error(&config.spec, classifier, samples, test_seed),
    };
    match estimate {
        Ok(e) => Ok(Some(e)),
        Err(Error::DegenerateClassifier) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Samples a training set, fits the initial classifier, applies each
/// requested retraining strategy and evaluates every resulting classifier.
pub fn run_trial(config: &TrialConfig) -> Result<TrialResult> {
    let started = Instant::now();
    if config.n_train == 0 {
        return Err(Error::EmptyDataset);
    }
    let seed = substream_seed(config.master_seed, config.cell_index, config.trial_index);
    let test_seed = match config.test_mode {
        TestMode::MonteCarlo {
            seeds: SeedPolicy::Fixed { seed },
            ..
        } => seed,
        _ => splitmix64(seed ^ TEST_STREAM_TAG),
    };

    let data = sample_dataset(&config.spec, &config.noise, config.n_train, seed)?;
    let initial = fit_initial(&data)?;
    let strategies = requested_strategies(&config.strategies);

    let mut outcomes = Vec::with_capacity(strategies.len());
    let mut full_report: Option<RetrainReport> = None;
    for strategy in &strategies {
        let (classifier, rows_used) = match *strategy {
            Strategy::Initial => (Some(initial.clone()), data.len()),
            Strategy::Full => {
                let report = retrain_full(&data, &initial)?;
                let out = (Some(report.classifier.clone()), report.selected_indices.len());
                full_report = Some(report);
                out
            }
            Strategy::Consensus => match retrain_consensus(&data, &initial) {
                Ok(report) => (Some(report.classifier), report.selected_indices.len()),
                Err(Error::EmptyConsensus(_)) => (None, 0),
                Err(e) => return Err(e),
            },
            Strategy::Confidence { keep_fraction } => {
                let report = retrain_confidence(&data, &initial, keep_fraction)?;
                (Some(report.classifier), report.selected_indices.len())
            }
        };
        let error = match classifier {
            Some(c) => evaluate(config, &c, test_seed)?,
            None => None,
        };
        outcomes.push(StrategyOutcome {
            strategy: *strategy,
            error,
            rows_used,
        });
    }

    let consensus = if strategies.len() > 1 {
        let report = match full_report {
            Some(r) => r,
            None => retrain_full(&data, &initial)?,
        };
        Some(consensus_diagnostics(&data, &report)?)
    } else {
        None
    };

    Ok(TrialResult {
        substream_seed: seed,
        trial_index: config.trial_index,
        flip_fraction: flip_fraction(&data),
        outcomes,
        consensus,
        wall_time: started.elapsed(),
    })
}

/// Axes of a sweep plus the settings shared by every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub n_axis: Vec<usize>,
    pub d_axis: Vec<usize>,
    pub noise_axis: Vec<NoiseSpec>,
    pub gamma_axis: Vec<f64>,
    pub margin_dist: MarginDist,
    /// Isotropic covariance eigenvalue on the complement of `mu`.
    pub lambda: f64,
    pub prior_pos: f64,
    pub strategies: Vec<Strategy>,
    pub test_mode: TestMode,
    pub master_seed: u64,
    pub window_c1: f64,
    pub window_c2: f64,
}

impl SweepGrid {
    /// Single-cell grid with the default margin `Unif[0, 4]`, identity
    /// covariance and balanced classes.
    pub fn single(
        n: usize,
        d: usize,
        noise: NoiseSpec,
        gamma: f64,
        strategies: Vec<Strategy>,
        master_seed: u64,
    ) -> SweepGrid {
        SweepGrid {
            n_axis: vec![n],
            d_axis: vec![d],
            noise_axis: vec![noise],
            gamma_axis: vec![gamma],
            margin_dist: MarginDist::Uniform { low: 0.0, high: 4.0 },
            lambda: 1.0,
            prior_pos: 0.5,
            strategies,
            test_mode: TestMode::Exact,
            master_seed,
            window_c1: 1.0,
            window_c2: 1.0,
        }
    }

    pub fn cell_count(&self) -> usize {
        self.n_axis.len() * self.d_axis.len() * self.noise_axis.len() * self.gamma_axis.len()
    }

    /// Cells in `n`-major order: `n`, then `d`, noise, `gamma`.
    pub fn cells(&self) -> Vec<CellSpec> {
        let mut cells = Vec::with_capacity(self.cell_count());
        for &n in &self.n_axis {
            for &d in &self.d_axis {
                for noise in &self.noise_axis {
                    for &gamma in &self.gamma_axis {
                        let spec = ProblemSpec {
                            d,
                            gamma,
                            covariance_spectrum: vec![self.lambda; d.saturating_sub(1)],
                            margin_dist: self.margin_dist,
                            prior_pos: self.prior_pos,
                        };
                        cells.push(CellSpec {
                            index: cells.len() as u64,
                            n,
                            noise: *noise,
                            spec,
                        });
                    }
                }
            }
        }
        cells
    }

    fn validate(&self) -> Result<()> {
        if self.cell_count() == 0 {
            return Err(Error::InvalidArgument(
                "every sweep axis needs at least one value".into(),
            ));
        }
        if self.n_axis.contains(&0) {
            return Err(Error::EmptyDataset);
        }
        for cell in self.cells() {
            cell.spec.validate()?;
            cell.noise.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub index: u64,
    pub n: usize,
    pub noise: NoiseSpec,
    pub spec: ProblemSpec,
}

impl CellSpec {
    pub fn bound_inputs(&self) -> Result<BoundInputs> {
        BoundInputs::new(
            self.n as u64,
            self.spec.d as u64,
            self.noise.flip_probability(),
            self.spec.gamma,
            self.spec.lambda_min(),
            self.spec.lambda_max(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyAggregate {
    pub strategy: Strategy,
    /// Trials that produced an error value.
    pub trials: usize,
    pub missing: usize,
    pub error: Summary,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub cell: CellSpec,
    pub trials: Vec<TrialResult>,
    pub aggregates: Vec<StrategyAggregate>,
    pub err0: Err0Bounds,
    pub err1_upper: BoundReport,
    pub window: RetrainWindow,
}

impl CellReport {
    pub fn aggregate(&self, strategy: Strategy) -> Option<&StrategyAggregate> {
        self.aggregates.iter().find(|a| a.strategy == strategy)
    }

    /// Per-trial accuracy differences `acc(later) - acc(earlier)` over trials
    /// where both strategies produced a value.
    ///
    /// Computed as `err(earlier) - err(later)`: for tiny errors the
    /// accuracies both round to 1 and their difference would be lost.
    pub fn paired_accuracy_gaps(&self, later: Strategy, earlier: Strategy) -> Vec<f64> {
        self.trials
            .iter()
            .filter_map(|t| Some(t.error(earlier)? - t.error(later)?))
            .collect()
    }

    /// Diagnostics means over trials: `(acc_pred_consensus, acc_pred_full,
    /// acc_given_full)`; trials with an empty consensus set are skipped for
    /// the first entry.
    pub fn mean_consensus_diagnostics(&self) -> Option<(f64, f64, f64)> {
        let diags: Vec<ConsensusDiagnostics> = self.trials.iter().filter_map(|t| t.consensus).collect();
        if diags.is_empty() {
            return None;
        }
        let consensus: Vec<f64> = diags.iter().filter_map(|d| d.acc_pred_consensus).collect();
        let full: Vec<f64> = diags.iter().map(|d| d.acc_pred_full).collect();
        let given: Vec<f64> = diags.iter().map(|d| d.acc_given_full).collect();
        Some((
            summarize(&consensus).mean,
            summarize(&full).mean,
            summarize(&given).mean,
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub grid: SweepGrid,
    pub trials_per_cell: usize,
    pub cells: Vec<CellReport>,
}

pub const SWEEP_CSV_HEADER: [&str; 15] = [
    "n",
    "d",
    "p",
    "gamma",
    "strategy",
    "trials",
    "mean_err",
    "std_err_of_mean",
    "mean_acc",
    "bound_err0_lower",
    "bound_err0_upper",
    "bound_err1_upper",
    "window_low",
    "window_high",
    "inside_window",
];

fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(k) if k > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(job))
        }
        _ => Ok(job()),
    }
}

/// Runs `trials_per_cell` trials in every cell and aggregates them.
///
/// `threads = None` or `Some(0)` uses rayon's global pool; the report does
/// not depend on the choice.
pub fn run_sweep(grid: &SweepGrid, trials_per_cell: usize, threads: Option<usize>) -> Result<SweepReport> {
    if trials_per_cell == 0 {
        return Err(Error::InvalidArgument("trials_per_cell must be positive".into()));
    }
    grid.validate()?;
    let cells = grid.cells();

    let mut seen: HashMap<u64, (usize, usize)> = HashMap::new();
    for cell in &cells {
        for t in 0..trials_per_cell {
            let seed = substream_seed(grid.master_seed, cell.index, t as u64);
            if let Some(first) = seen.insert(seed, (cell.index as usize, t)) {
                return Err(Error::SeedCollision {
                    first,
                    second: (cell.index as usize, t),
                });
            }
        }
    }

    let jobs: Vec<TrialConfig> = cells
        .iter()
        .flat_map(|cell| {
            (0..trials_per_cell).map(move |t| TrialConfig {
                spec: cell.spec.clone(),
                noise: cell.noise,
                n_train: cell.n,
                test_mode: grid.test_mode,
                strategies: grid.strategies.clone(),
                master_seed: grid.master_seed,
                trial_index: t as u64,
                cell_index: cell.index,
            })
        })
        .collect();

    // collect() keeps job order, so aggregation below is order-independent of scheduling
    let results: Vec<TrialResult> = with_pool(threads, || jobs.par_iter().map(run_trial).collect::<Result<Vec<_>>>())??;

    let mut results = results.into_iter();
    let strategies = requested_strategies(&grid.strategies);
    let mut reports = Vec::with_capacity(cells.len());
    for cell in cells {
        let trials: Vec<TrialResult> = results.by_ref().take(trials_per_cell).collect();
        let aggregates = strategies
            .iter()
            .map(|&strategy| {
                let errors: Vec<f64> = trials.iter().filter_map(|t| t.error(strategy)).collect();
                let error = summarize(&errors);
                StrategyAggregate {
                    strategy,
                    trials: errors.len(),
                    missing: trials.len() - errors.len(),
                    mean_accuracy: 1.0 - error.mean,
                    error,
                }
            })
            .collect();
        let inputs = cell.bound_inputs()?;
        reports.push(CellReport {
            err0: err0_bounds(&inputs),
            err1_upper: err1_upper(&inputs),
            window: retraining_helps_window(&inputs, grid.window_c1, grid.window_c2),
            cell,
            trials,
            aggregates,
        });
    }
    Ok(SweepReport {
        grid: grid.clone(),
        trials_per_cell,
        cells: reports,
    })
}

fn sci(x: f64) -> String {
    format!("{x:.12e}")
}

impl SweepReport {
    /// One row per (cell, strategy) under [`SWEEP_CSV_HEADER`]. Bound
    /// columns hold clamped values.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        writer.write_record(SWEEP_CSV_HEADER)?;
        for cell in &self.cells {
            for agg in &cell.aggregates {
                writer.write_record([
                    cell.cell.n.to_string(),
                    cell.cell.spec.d.to_string(),
                    cell.cell.noise.flip_probability().to_string(),
                    cell.cell.spec.gamma.to_string(),
                    agg.strategy.to_string(),
                    agg.trials.to_string(),
                    sci(agg.error.mean),
                    sci(agg.error.sem),
                    sci(agg.mean_accuracy),
                    sci(cell.err0.lower.clamped),
                    sci(cell.err0.upper.clamped),
                    sci(cell.err1_upper.clamped),
                    sci(cell.window.n_low),
                    sci(cell.window.n_high),
                    cell.window.inside.to_string(),
                ])?;
            }
        }
        writer.flush()?;
        Ok(())
    }
}

/// Single-run accuracies shown for the two separations in the reference
/// figure: (initial, retrained).
pub const FIGURE1_LARGE_SEP_ANCHOR: (f64, f64) = (0.89, 0.9767);
pub const FIGURE1_SMALL_SEP_ANCHOR: (f64, f64) = (0.68, 0.68);

pub const FIGURE1_N: usize = 300;
pub const FIGURE1_P: f64 = 0.4;
pub const DEFAULT_TRIALS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct Figure1Setting {
    pub name: &'static str,
    pub gamma_sq: f64,
    pub report: SweepReport,
    pub initial_acc: Summary,
    pub retrain_acc: Summary,
    /// Per-trial `acc(full) - acc(initial)`.
    pub gap: Summary,
    pub gap_test: PairedTest,
    pub anchor: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure1Report {
    pub large_sep: Figure1Setting,
    pub small_sep: Figure1Setting,
}

pub const FIGURE1_SUMMARY_HEADER: [&str; 13] = [
    "setting",
    "gamma_sq",
    "trials",
    "initial_acc_mean",
    "initial_acc_std",
    "retrain_acc_mean",
    "retrain_acc_std",
    "gap_mean",
    "gap_std",
    "gap_p_value",
    "anchor_initial_acc",
    "anchor_retrain_acc",
    "consensus_fraction_mean",
];

fn figure1_setting(
    name: &'static str,
    gamma_sq: f64,
    anchor: (f64, f64),
    master_seed: u64,
    trials: usize,
    threads: Option<usize>,
) -> Result<Figure1Setting> {
    let grid = SweepGrid::single(
        FIGURE1_N,
        50,
        NoiseSpec::flip(FIGURE1_P),
        gamma_sq.sqrt(),
        vec![Strategy::Initial, Strategy::Full],
        master_seed,
    );
    let report = run_sweep(&grid, trials, threads)?;
    let cell = &report.cells[0];
    let accs = |s: Strategy| -> Vec<f64> { cell.trials.iter().filter_map(|t| t.accuracy(s)).collect() };
    let gaps = cell.paired_accuracy_gaps(Strategy::Full, Strategy::Initial);
    Ok(Figure1Setting {
        name,
        gamma_sq,
        initial_acc: summarize(&accs(Strategy::Initial)),
        retrain_acc: summarize(&accs(Strategy::Full)),
        gap: summarize(&gaps),
        gap_test: wilcoxon_signed_rank(&gaps),
        anchor,
        report,
    })
}

/// Both separations (`gamma^2 = 0.5` and `0.3`) at `d = 50`, `p = 0.4`,
/// `n = 300`, `u ~ Unif[0, 4]`, evaluated with exact error.
pub fn reproduce_figure1(master_seed: u64, trials: usize, threads: Option<usize>) -> Result<Figure1Report> {
    Ok(Figure1Report {
        large_sep: figure1_setting(
            "large_separation",
            0.5,
            FIGURE1_LARGE_SEP_ANCHOR,
            master_seed,
            trials,
            threads,
        )?,
        small_sep: figure1_setting(
            "small_separation",
            0.3,
            FIGURE1_SMALL_SEP_ANCHOR,
            master_seed,
            trials,
            threads,
        )?,
    })
}

impl Figure1Report {
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        writer.write_record(FIGURE1_SUMMARY_HEADER)?;
        for s in [&self.large_sep, &self.small_sep] {
            let consensus: Vec<f64> = s.report.cells[0]
                .trials
                .iter()
                .filter_map(|t| t.consensus.map(|c| c.consensus_fraction))
                .collect();
            writer.write_record([
                s.name.to_string(),
                s.gamma_sq.to_string(),
                s.initial_acc.count.to_string(),
                sci(s.initial_acc.mean),
                sci(s.initial_acc.std),
                sci(s.retrain_acc.mean),
                sci(s.retrain_acc.std),
                sci(s.gap.mean),
                sci(s.gap.std),
                sci(s.gap_test.p_value),
                s.anchor.0.to_string(),
                s.anchor.1.to_string(),
                sci(summarize(&consensus).mean),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub n: usize,
    /// Mean of `acc(full) - acc(initial)` over trials.
    pub mean_gap: f64,
    /// Normal-approximation half-width at the report's confidence level.
    pub half_width: f64,
    pub test: PairedTest,
    pub inside_window: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagram {
    pub report: SweepReport,
    pub points: Vec<PhasePoint>,
    pub window: RetrainWindow,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub d: usize,
    pub p: f64,
    pub gamma: f64,
    pub n_axis: Vec<usize>,
    pub trials: usize,
    pub margin_dist: MarginDist,
    pub lambda: f64,
    pub master_seed: u64,
    pub window_c1: f64,
    pub window_c2: f64,
    /// Significance level for the paired tests and the confidence band.
    pub alpha: f64,
}

impl PhaseConfig {
    pub fn new(d: usize, p: f64, gamma: f64, n_axis: Vec<usize>, trials: usize, master_seed: u64) -> PhaseConfig {
        PhaseConfig {
            d,
            p,
            gamma,
            n_axis,
            trials,
            margin_dist: MarginDist::Uniform { low: 0.0, high: 4.0 },
            lambda: 1.0,
            master_seed,
            window_c1: 1.0,
            window_c2: 1.0,
            alpha: 0.01,
        }
    }
}

/// Accuracy gain of full retraining over initial training along an `n`
/// axis, with the analytic window for overlay.
pub fn phase_diagram(config: &PhaseConfig, threads: Option<usize>) -> Result<PhaseDiagram> {
    if config.n_axis.is_empty() {
        return Err(Error::InvalidArgument("phase diagram needs at least one n".into()));
    }
    let grid = SweepGrid {
        n_axis: config.n_axis.clone(),
        d_axis: vec![config.d],
        noise_axis: vec![NoiseSpec::flip(config.p)],
        gamma_axis: vec![config.gamma],
        margin_dist: config.margin_dist,
        lambda: config.lambda,
        prior_pos: 0.5,
        strategies: vec![Strategy::Initial, Strategy::Full],
        test_mode: TestMode::Exact,
        master_seed: config.master_seed,
        window_c1: config.window_c1,
        window_c2: config.window_c2,
    };
    let report = run_sweep(&grid, config.trials, threads)?;
    let z = normal_critical_value(config.alpha);
    let points = report
        .cells
        .iter()
        .map(|cell| {
            let gaps = cell.paired_accuracy_gaps(Strategy::Full, Strategy::Initial);
            let s = summarize(&gaps);
            PhasePoint {
                n: cell.cell.n,
                mean_gap: s.mean,
                half_width: z * s.sem,
                test: wilcoxon_signed_rank(&gaps),
                inside_window: cell.window.inside,
            }
        })
        .collect();
    let window = report.cells[0].window;
    Ok(PhaseDiagram {
        report,
        points,
        window,
        alpha: config.alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(strategies: Vec<Strategy>, noise: NoiseSpec) -> TrialConfig {
        TrialConfig {
            spec: ProblemSpec::figure1(0.5),
            noise,
            n_train: 300,
            test_mode: TestMode::Exact,
            strategies,
            master_seed: 42,
            trial_index: 3,
            cell_index: 0,
        }
    }

    fn all() -> Vec<Strategy> {
        vec![
            Strategy::Full,
            Strategy::Consensus,
            Strategy::Confidence { keep_fraction: 0.5 },
        ]
    }

    #[test]
    fn strategy_names_roundtrip() {
        for s in [
            Strategy::Initial,
            Strategy::Full,
            Strategy::Consensus,
            Strategy::Confidence { keep_fraction: 0.25 },
        ] {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!(
            "confidence".parse::<Strategy>().unwrap(),
            Strategy::Confidence { keep_fraction: 0.5 }
        );
        assert!("bogus".parse::<Strategy>().is_err());
        assert!("confidence:0".parse::<Strategy>().is_err());
    }

    #[test]
    fn seeds_mix_all_inputs() {
        let base = substream_seed(42, 0, 0);
        assert_ne!(base, substream_seed(43, 0, 0));
        assert_ne!(base, substream_seed(42, 1, 0));
        assert_ne!(base, substream_seed(42, 0, 1));
        assert_ne!(substream_seed(42, 1, 0), substream_seed(42, 0, 1));
    }

    #[test]
    fn trial_has_one_entry_per_strategy() {
        let result = run_trial(&config(all(), NoiseSpec::flip(0.4))).unwrap();
        let names: Vec<Strategy> = result.outcomes.iter().map(|o| o.strategy).collect();
        assert_eq!(names[0], Strategy::Initial);
        assert_eq!(names.len(), 4);
        for o in &result.outcomes {
            let e = o.error.unwrap();
            assert!((0.0..=1.0).contains(&e.value));
        }
        assert!(result.consensus.is_some());
        assert_eq!(
            result
                .outcome(Strategy::Confidence { keep_fraction: 0.5 })
                .unwrap()
                .rows_used,
            150
        );
    }

    #[test]
    fn initial_only_skips_diagnostics() {
        let result = run_trial(&config(vec![Strategy::Initial], NoiseSpec::flip(0.4))).unwrap();
        assert_eq!(result.outcomes.len(), 1);
        assert!(result.consensus.is_none());
    }

    #[test]
    fn clean_labels_retraining_matches_initial() {
        let result = run_trial(&config(all(), NoiseSpec::flip(0.0))).unwrap();
        let diag = result.consensus.unwrap();
        let initial = result.error(Strategy::Initial).unwrap();
        assert!(initial < 0.01);
        if diag.acc_pred_full == 1.0 {
            // predictions equal the given labels, so the averages coincide
            assert_eq!(result.error(Strategy::Full).unwrap(), initial);
        }
    }

    #[test]
    fn trial_is_deterministic() {
        let cfg = config(all(), NoiseSpec::flip(0.4));
        let a = run_trial(&cfg).unwrap();
        let b = run_trial(&cfg).unwrap();
        assert_eq!(a, b);
        let mut other = cfg.clone();
        other.trial_index += 1;
        assert_ne!(run_trial(&other).unwrap(), a);
    }

    #[test]
    fn monte_carlo_test_mode_uses_shared_points() {
        let mut cfg = config(vec![Strategy::Full], NoiseSpec::flip(0.4));
        cfg.test_mode = TestMode::MonteCarlo {
            samples: 2000,
            seeds: SeedPolicy::Fixed { seed: 99 },
        };
        let result = run_trial(&cfg).unwrap();
        for o in &result.outcomes {
            let e = o.error.unwrap();
            assert_eq!(
                e.method,
                crate::evaluation::EstimateMethod::MonteCarlo {
                    num_samples: 2000,
                    seed: 99
                }
            );
        }
    }

    #[test]
    fn single_cell_single_trial_sweep() {
        let grid = SweepGrid::single(300, 50, NoiseSpec::flip(0.4), 0.5f64.sqrt(), vec![Strategy::Full], 7);
        let report = run_sweep(&grid, 1, None).unwrap();
        assert_eq!(report.cells.len(), 1);
        let cell = &report.cells[0];
        assert_eq!(cell.trials.len(), 1);
        let trial = run_trial(&TrialConfig {
            spec: cell.cell.spec.clone(),
            noise: cell.cell.noise,
            n_train: 300,
            test_mode: TestMode::Exact,
            strategies: vec![Strategy::Full],
            master_seed: 7,
            trial_index: 0,
            cell_index: 0,
        })
        .unwrap();
        assert_eq!(cell.trials[0], trial);
        for agg in &cell.aggregates {
            assert_eq!(agg.error.std, 0.0);
            assert_eq!(agg.trials, 1);
        }
    }

    #[test]
    fn sweep_cell_count_is_axis_product() {
        let mut grid = SweepGrid::single(100, 10, NoiseSpec::flip(0.2), 1.0, vec![Strategy::Full], 1);
        grid.n_axis = vec![50, 100];
        grid.noise_axis = vec![
            NoiseSpec::flip(0.1),
            NoiseSpec::flip(0.3),
            NoiseSpec::randomized_response(1.0),
        ];
        let report = run_sweep(&grid, 2, None).unwrap();
        assert_eq!(report.cells.len(), 6);
        assert!(report.cells.iter().all(|c| c.trials.len() == 2));

        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SWEEP_CSV_HEADER.join(","));
        assert_eq!(lines.len(), 1 + 6 * 2);
    }

    #[test]
    fn sweep_rejects_empty_axes_and_bad_cells() {
        let mut grid = SweepGrid::single(100, 10, NoiseSpec::flip(0.2), 1.0, vec![], 1);
        grid.gamma_axis.clear();
        assert!(run_sweep(&grid, 1, None).is_err());
        let grid = SweepGrid::single(100, 10, NoiseSpec::flip(0.7), 1.0, vec![], 1);
        assert!(matches!(run_sweep(&grid, 1, None), Err(Error::InvalidNoise(_))));
        let grid = SweepGrid::single(100, 10, NoiseSpec::flip(0.2), 1.0, vec![], 1);
        assert!(run_sweep(&grid, 0, None).is_err());
    }

    #[test]
    fn phase_window_matches_bound_evaluator() {
        let config = PhaseConfig::new(20, 0.3, 1.0, vec![100, 400], 3, 5);
        let diagram = phase_diagram(&config, None).unwrap();
        assert_eq!(diagram.points.len(), 2);
        for (point, cell) in diagram.points.iter().zip(&diagram.report.cells) {
            let inputs = BoundInputs::isotropic(point.n as u64, 20, 0.3, 1.0, 1.0).unwrap();
            let w = retraining_helps_window(&inputs, 1.0, 1.0);
            assert_eq!(w, cell.window);
            assert_eq!(point.inside_window, w.inside);
            assert_eq!(diagram.window.n_low, w.n_low);
        }
    }
}
