mod config;
mod manifest;

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::Utc;
use clap::{Args, Parser, Subcommand, ValueEnum};

use retrain_core::bounds::{bound_table, write_bound_table_csv};
use retrain_core::datagen::{sample_dataset, MarginDist};
use retrain_core::evaluation::exact_error;
use retrain_core::experiments::{phase_diagram, reproduce_figure1, run_sweep, PhaseDiagram, DEFAULT_TRIALS};
use retrain_core::linear::{
    fit_initial, retrain_confidence, retrain_consensus, retrain_full, LinearClassifier, DEFAULT_KEEP_FRACTION,
};
use retrain_core::svg::phase_diagram_svg;

use config::Config;
use manifest::{timestamp, RunManifest};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration; exit code 1.
    Usage(String),
    /// Failure while running; exit code 2.
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<retrain_core::Error> for CliError {
    fn from(e: retrain_core::Error) -> Self {
        use retrain_core::Error as E;
        match e {
            E::InvalidSpec(_) | E::InvalidNoise(_) | E::InvalidArgument(_) | E::EmptyDataset => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Simulation lab for retraining linear classifiers on their own predicted
/// labels under label noise.
#[derive(Parser, Debug)]
#[command(name = "retrain-sim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config file, or a manifest.json from an earlier run.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file (default 42).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct Parallel {
    /// Trials per cell; overrides the config file.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads, 0 = all cores. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a dataset and write it as CSV.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "dataset.csv", value_name = "FILE")]
        out: PathBuf,
    },
    /// Fit the initial classifier and every retraining strategy on one sample.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "classifiers.csv", value_name = "FILE")]
        out: PathBuf,
    },
    /// Rerun the two reference separations (gamma^2 = 0.5 and 0.3) and write per-setting and summary CSVs.
    Figure1 {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        parallel: Parallel,
        #[arg(long, default_value = "figure1", value_name = "DIR")]
        out: PathBuf,
    },
    /// Run a parameter sweep over the [sweep] axes.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        parallel: Parallel,
        #[arg(long, default_value = "sweep", value_name = "DIR")]
        out: PathBuf,
    },
    /// Tabulate the theoretical bounds over the [bounds] grid.
    Bounds {
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        #[arg(long, default_value = "bounds.csv", value_name = "FILE")]
        out: PathBuf,
    },
    /// Accuracy gain of retraining against n, with the analytic window.
    Phase {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        parallel: Parallel,
        #[arg(long, default_value = "phase", value_name = "DIR")]
        out: PathBuf,
        /// Write only this output (default: both the CSV and the SVG).
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

fn load(path: Option<&Path>) -> Result<Config, CliError> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn threads(k: usize) -> Option<usize> {
    (k > 0).then_some(k)
}

fn create_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e)),
        _ => Ok(()),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out)?;
    out.flush().map_err(|e| io_err(path, e))
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

struct Run {
    command: &'static str,
    started: chrono::DateTime<Utc>,
}

impl Run {
    fn start(command: &'static str) -> Run {
        Run {
            command,
            started: Utc::now(),
        }
    }

    fn finish(
        self,
        config: Config,
        seed: u64,
        trials: Option<usize>,
        outputs: Vec<PathBuf>,
        manifest: &Path,
    ) -> Result<(), CliError> {
        let point_mass_margin = matches!(config.spec.margin, Some(MarginDist::PointMass { .. }));
        if point_mass_margin {
            eprintln!("note: point-mass margin is a testing aid outside the theory's assumptions");
        }
        RunManifest {
            command: self.command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            trials,
            started_at: timestamp(self.started),
            finished_at: timestamp(Utc::now()),
            point_mass_margin,
            outputs,
            config,
        }
        .write(manifest)?;
        eprintln!("manifest: {}", manifest.display());
        Ok(())
    }
}

fn cmd_generate(common: Common, out: PathBuf) -> Result<(), CliError> {
    let run = Run::start("generate");
    let mut config = load(common.config.as_deref())?;
    let seed = config.resolve_seed(common.seed);
    let spec = config.problem_spec()?;
    let noise = config.noise()?;
    let n = config.n()?;
    let data = sample_dataset(&spec, &noise, n, seed)?;
    create_parent(&out)?;
    write_file(&out, |w| data.write_csv(w).map_err(CliError::from))?;
    eprintln!("wrote {} rows to {}", data.len(), out.display());
    let manifest = sidecar(&out);
    run.finish(config, seed, None, vec![out], &manifest)
}

fn cmd_train(common: Common, out: PathBuf) -> Result<(), CliError> {
    let run = Run::start("train");
    let mut config = load(common.config.as_deref())?;
    let seed = config.resolve_seed(common.seed);
    let spec = config.problem_spec()?;
    let data = sample_dataset(&spec, &config.noise()?, config.n()?, seed)?;

    let initial = fit_initial(&data)?;
    let mut rows: Vec<(String, Option<LinearClassifier>, usize)> =
        vec![("initial".into(), Some(initial.clone()), data.len())];
    let full = retrain_full(&data, &initial)?;
    rows.push(("full".into(), Some(full.classifier), full.selected_indices.len()));
    match retrain_consensus(&data, &initial) {
        Ok(r) => rows.push(("consensus".into(), Some(r.classifier), r.selected_indices.len())),
        Err(retrain_core::Error::EmptyConsensus(_)) => rows.push(("consensus".into(), None, 0)),
        Err(e) => return Err(e.into()),
    }
    let conf = retrain_confidence(&data, &initial, DEFAULT_KEEP_FRACTION)?;
    rows.push((
        format!("confidence:{DEFAULT_KEEP_FRACTION}"),
        Some(conf.classifier),
        conf.selected_indices.len(),
    ));

    create_parent(&out)?;
    write_file(&out, |w| {
        let mut header = vec!["strategy".to_string(), "rows_used".into(), "exact_error".into()];
        header.extend(LinearClassifier::csv_header(spec.d));
        writeln!(w, "{}", header.join(",")).map_err(|e| io_err(&out, e))?;
        for (name, clf, used) in &rows {
            let mut record = vec![name.clone(), used.to_string()];
            match clf {
                Some(c) if !c.is_zero() => {
                    record.push(format!("{:.12e}", exact_error(&spec, c)?.value));
                    record.extend(c.to_csv_record());
                }
                _ => record.extend(std::iter::repeat_n(String::new(), spec.d + 1)),
            }
            writeln!(w, "{}", record.join(",")).map_err(|e| io_err(&out, e))?;
        }
        Ok(())
    })?;
    eprintln!("wrote {} classifiers to {}", rows.len(), out.display());
    let manifest = sidecar(&out);
    run.finish(config, seed, None, vec![out], &manifest)
}

fn cmd_figure1(common: Common, parallel: Parallel, out: PathBuf) -> Result<(), CliError> {
    let run = Run::start("figure1");
    let mut config = load(common.config.as_deref())?;
    let seed = config.resolve_seed(common.seed);
    let trials = parallel.trials.or(config.figure1.trials).unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(CliError::Usage("trials must be positive".into()));
    }
    config.figure1.trials = Some(trials);
    let report = reproduce_figure1(seed, trials, threads(parallel.threads))?;

    create_dir(&out)?;
    let mut outputs = Vec::new();
    for setting in [&report.large_sep, &report.small_sep] {
        let path = out.join(format!("figure1_{}.csv", setting.name));
        write_file(&path, |w| setting.report.write_csv(w).map_err(CliError::from))?;
        outputs.push(path);
        println!(
            "{:<17} gamma^2={}  initial {:.4} ± {:.4}  retrained {:.4} ± {:.4}  gap {:+.4} (p = {:.2e})  reference {:.2}/{:.4}",
            setting.name,
            setting.gamma_sq,
            setting.initial_acc.mean,
            setting.initial_acc.std,
            setting.retrain_acc.mean,
            setting.retrain_acc.std,
            setting.gap.mean,
            setting.gap_test.p_value,
            setting.anchor.0,
            setting.anchor.1,
        );
    }
    let summary = out.join("figure1_summary.csv");
    write_file(&summary, |w| report.write_summary_csv(w).map_err(CliError::from))?;
    outputs.push(summary);
    run.finish(config, seed, Some(trials), outputs, &out.join("manifest.json"))
}

fn cmd_sweep(common: Common, parallel: Parallel, out: PathBuf) -> Result<(), CliError> {
    let run = Run::start("sweep");
    let mut config = load(common.config.as_deref())?;
    let seed = config.resolve_seed(common.seed);
    let trials = config.sweep_trials(parallel.trials)?;
    config.sweep.trials = Some(trials);
    let grid = config.sweep_grid(seed)?;
    eprintln!("sweep: {} cells x {trials} trials", grid.cell_count());
    let report = run_sweep(&grid, trials, threads(parallel.threads))?;

    create_dir(&out)?;
    let path = out.join("sweep.csv");
    write_file(&path, |w| report.write_csv(w).map_err(CliError::from))?;
    run.finish(config, seed, Some(trials), vec![path], &out.join("manifest.json"))
}

fn cmd_bounds(config_path: Option<PathBuf>, out: PathBuf) -> Result<(), CliError> {
    let run = Run::start("bounds");
    let config = load(config_path.as_deref())?;
    let grid = config.bound_grid()?;
    let rows = bound_table(&grid)?;
    create_parent(&out)?;
    write_file(&out, |w| write_bound_table_csv(&rows, w).map_err(CliError::from))?;
    eprintln!("wrote {} rows to {}", rows.len(), out.display());
    let seed = config.seed.unwrap_or(config::DEFAULT_SEED);
    let manifest = sidecar(&out);
    run.finish(config, seed, None, vec![out], &manifest)
}

const PHASE_HEADER: [&str; 9] = [
    "n",
    "mean_gap",
    "half_width",
    "p_value",
    "direction",
    "significant",
    "inside_window",
    "window_low",
    "window_high",
];

fn write_phase_csv<W: Write>(diagram: &PhaseDiagram, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{}", PHASE_HEADER.join(","))?;
    for p in &diagram.points {
        writeln!(
            w,
            "{},{:.12e},{:.12e},{:.12e},{},{},{},{:.12e},{:.12e}",
            p.n,
            p.mean_gap,
            p.half_width,
            p.test.p_value,
            p.test.direction,
            p.test.significantly_positive(diagram.alpha) || p.test.significantly_negative(diagram.alpha),
            p.inside_window,
            diagram.window.n_low,
            diagram.window.n_high
        )?;
    }
    Ok(())
}

fn cmd_phase(common: Common, parallel: Parallel, out: PathBuf, format: Option<Format>) -> Result<(), CliError> {
    let run = Run::start("phase");
    let mut config = load(common.config.as_deref())?;
    let seed = config.resolve_seed(common.seed);
    let phase = config.phase_config(seed, parallel.trials)?;
    config.phase.trials = Some(phase.trials);
    let diagram = phase_diagram(&phase, threads(parallel.threads))?;

    create_dir(&out)?;
    let mut outputs = Vec::new();
    if format != Some(Format::Svg) {
        let path = out.join("phase.csv");
        write_file(&path, |w| write_phase_csv(&diagram, w).map_err(|e| io_err(&path, e)))?;
        outputs.push(path);
    }
    if format != Some(Format::Csv) {
        let path = out.join("phase.svg");
        std::fs::write(&path, phase_diagram_svg(&diagram)).map_err(|e| io_err(&path, e))?;
        outputs.push(path);
    }
    for p in &diagram.points {
        println!(
            "n = {:>9}  gap {:+.3e} ± {:.3e}  p = {:.2e}  {}",
            p.n,
            p.mean_gap,
            p.half_width,
            p.test.p_value,
            if p.inside_window { "inside window" } else { "" }
        );
    }
    run.finish(config, seed, Some(phase.trials), outputs, &out.join("manifest.json"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Generate { common, out } => cmd_generate(common, out),
        Command::Train { common, out } => cmd_train(common, out),
        Command::Figure1 { common, parallel, out } => cmd_figure1(common, parallel, out),
        Command::Sweep { common, parallel, out } => cmd_sweep(common, parallel, out),
        Command::Bounds { config, out } => cmd_bounds(config, out),
        Command::Phase {
            common,
            parallel,
            out,
            format,
        } => cmd_phase(common, parallel, out, format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
