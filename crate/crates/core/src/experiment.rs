//! Monte Carlo experiments over channel realizations: baseline comparisons,
//! parameter sweeps, CSI-error robustness, convergence curves and the
//! centralized/decentralized timing comparison.
//!
//! Every experiment writes result CSVs that depend only on the seed and a
//! separate `*_timing.csv` with wall-clock measurements. Result CSV schemas:
//!
//! | file | columns |
//! |------|---------|
//! | `table2.csv` | [`SUMMARY_COLUMNS`] |
//! | `sweep_<param>.csv` | `<param>` followed by [`SWEEP_COLUMNS`] |
//! | `convergence.csv` | [`CONVERGENCE_COLUMNS`] |
//! | `table3.csv` | [`TABLE3_COLUMNS`] |
//! | `runs.csv` | [`RUN_COLUMNS`] |
//! | `failures.csv` | [`FAILURE_COLUMNS`] |
//!
//! Timing CSVs use [`TIMING_COLUMNS`] and [`TABLE3_TIMING_COLUMNS`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{assemble_channels, AntennaLayout, PathGeometry, Position};
use crate::dbp::dec_solve;
use crate::error::{Error, Result};
use crate::objective::{nats_to_bits, wsr, BeamformerSet};
use crate::scenario::{apply_perturbation, build_problem, sample_scenario, stream_rng, Baseline, PerturbationSpec, Purpose, ScenarioSpec};
use crate::solver::{solve, Problem, SolverConfig, SolverReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Centralized,
    Decentralized,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Centralized => "centralized",
            Mode::Decentralized => "decentralized",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c" | "centralized" => Ok(Mode::Centralized),
            "d" | "decentralized" => Ok(Mode::Decentralized),
            _ => Err(Error::invalid(format!("unknown mode '{s}' (expected c or d)"))),
        }
    }
}

/// Solver settings shared by all runs of an experiment.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub centralized: SolverConfig,
    pub decentralized: SolverConfig,
    pub clusters: usize,
    /// Solve realizations on the rayon pool. Timing studies turn this off.
    pub parallel: bool,
}

impl RunOptions {
    pub fn new(spec: &ScenarioSpec) -> Self {
        Self {
            centralized: SolverConfig::default(),
            decentralized: SolverConfig::decentralized_reference(),
            clusters: spec.clusters,
            parallel: true,
        }
    }

    pub fn config(&self, mode: Mode) -> &SolverConfig {
        match mode {
            Mode::Centralized => &self.centralized,
            Mode::Decentralized => &self.decentralized,
        }
    }

    pub fn with_max_outer(mut self, max_outer: usize) -> Self {
        self.centralized.max_outer = max_outer;
        self.decentralized.max_outer = max_outer;
        self
    }
}

/// One solved realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub baseline: Baseline,
    pub mode: Mode,
    pub realization: usize,
    /// WSR of the final design on the true channel.
    pub wsr_bits: f64,
    /// WSR the solver reports on the channel it optimized for.
    pub optimized_wsr_bits: f64,
    pub iterations: usize,
    pub converged: bool,
    /// WSR in bits before the first and after every outer iteration.
    pub trace_bits: Vec<f64>,
    pub total_ms: f64,
    /// CU time plus the slowest DU; `None` for centralized runs.
    pub decentralized_ms: Option<f64>,
    /// Summed wall time of the auxiliary, beamformer, transmit and receive blocks.
    pub block_ms: [f64; 4],
}

impl RunRecord {
    /// Time the mode is charged with: wall time when centralized, CU plus
    /// slowest DU when decentralized.
    pub fn charged_ms(&self) -> f64 {
        self.decentralized_ms.unwrap_or(self.total_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub baseline: Baseline,
    pub mode: Mode,
    pub realization: usize,
    pub error: String,
}

/// Runs of one experiment, ordered by baseline, mode and realization.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub records: Vec<RunRecord>,
    pub failures: Vec<Failure>,
}

/// Mean and standard error of the WSR for one (baseline, mode).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub baseline: Baseline,
    pub mode: Mode,
    pub realizations: usize,
    pub failures: usize,
    pub mean_wsr_bits: f64,
    pub std_err_bits: f64,
    pub mean_iterations: f64,
    pub converged_fraction: f64,
}

/// Sample mean and standard error, summed in slice order.
pub fn mean_and_std_err(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

impl ExperimentResult {
    pub fn runs(&self, baseline: Baseline, mode: Mode) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(move |r| r.baseline == baseline && r.mode == mode)
    }

    /// Distinct (baseline, mode) pairs in first-seen order.
    pub fn groups(&self) -> Vec<(Baseline, Mode)> {
        let mut out: Vec<(Baseline, Mode)> = Vec::new();
        let keys = self
            .records
            .iter()
            .map(|r| (r.baseline, r.mode))
            .chain(self.failures.iter().map(|f| (f.baseline, f.mode)));
        for key in keys {
            if !out.contains(&key) {
                out.push(key);
            }
        }
        out
    }

    pub fn summary(&self, baseline: Baseline, mode: Mode) -> Summary {
        let runs: Vec<&RunRecord> = self.runs(baseline, mode).collect();
        let wsr: Vec<f64> = runs.iter().map(|r| r.wsr_bits).collect();
        let (mean, se) = mean_and_std_err(&wsr);
        let n = runs.len().max(1) as f64;
        Summary {
            baseline,
            mode,
            realizations: runs.len(),
            failures: self.failures.iter().filter(|f| f.baseline == baseline && f.mode == mode).count(),
            mean_wsr_bits: mean,
            std_err_bits: se,
            mean_iterations: runs.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
            converged_fraction: runs.iter().filter(|r| r.converged).count() as f64 / n,
        }
    }

    pub fn summaries(&self) -> Vec<Summary> {
        self.groups().into_iter().map(|(b, m)| self.summary(b, m)).collect()
    }

    pub fn mean_wsr(&self, baseline: Baseline, mode: Mode) -> f64 {
        self.summary(baseline, mode).mean_wsr_bits
    }

    /// Average WSR trace, each run held at its final value after it stops.
    pub fn mean_trace(&self, baseline: Baseline, mode: Mode) -> Vec<f64> {
        let runs: Vec<&RunRecord> = self.runs(baseline, mode).collect();
        let len = runs.iter().map(|r| r.trace_bits.len()).max().unwrap_or(0);
        (0..len)
            .map(|i| {
                runs.iter()
                    .map(|r| r.trace_bits.get(i).or(r.trace_bits.last()).copied().unwrap_or(f64::NAN))
                    .sum::<f64>()
                    / runs.len() as f64
            })
            .collect()
    }

    fn extend(&mut self, other: ExperimentResult) {
        self.records.extend(other.records);
        self.failures.extend(other.failures);
    }
}

fn layout_from_report(template: &AntennaLayout, report: &SolverReport) -> AntennaLayout {
    let pos = |v: &[[f64; 3]]| -> Vec<Position> { v.iter().map(|p| Position::new(p[0], p[1], p[2])).collect() };
    let mut layout = template.clone();
    layout.tx.positions = pos(&report.tx_positions);
    for (arr, rx) in layout.rx.iter_mut().zip(&report.rx_positions) {
        arr.positions = pos(rx);
    }
    layout
}

/// WSR in nats of a solver's final design evaluated on `geometry`.
pub fn evaluate_design(problem: &Problem, report: &SolverReport, geometry: &[PathGeometry]) -> Result<f64> {
    let layout = layout_from_report(&problem.layout, report);
    let channels = assemble_channels(geometry, &layout)?;
    let beams = BeamformerSet {
        w: report.beams()?,
        ..problem.initial_beams()
    };
    wsr(&channels.h, &beams)
}

/// Solves one realization. With a nonzero perturbation the solver sees the
/// estimated geometry and the WSR is evaluated on the true one.
pub fn run_realization(
    spec: &ScenarioSpec,
    baseline: Baseline,
    mode: Mode,
    index: usize,
    perturbation: &PerturbationSpec,
    opts: &RunOptions,
) -> Result<RunRecord> {
    let truth = sample_scenario(spec, index)?.geometry;
    let estimate = if perturbation.is_zero() {
        truth.clone()
    } else {
        let mut rng = stream_rng(spec.seed, index, Purpose::Perturbation);
        apply_perturbation(&truth, perturbation, &mut rng)?
    };
    let problem = build_problem(spec, baseline, index, estimate)?;
    let config = SolverConfig {
        optimize_t: baseline.optimize_t(),
        optimize_r: baseline.optimize_r(),
        ..opts.config(mode).clone()
    };
    let (report, decentralized_ms) = match mode {
        Mode::Centralized => (solve(&problem, &config)?, None),
        Mode::Decentralized => {
            let dec = dec_solve(&problem, &config, opts.clusters)?;
            (dec.report, Some(dec.timing.decentralized_ms))
        }
    };
    let wsr_bits = if perturbation.is_zero() {
        report.final_wsr_bits
    } else {
        nats_to_bits(evaluate_design(&problem, &report, &truth)?)
    };
    let mut block_ms = [0.0; 4];
    for rec in &report.trace {
        for (acc, t) in block_ms.iter_mut().zip(rec.block_times_ms) {
            *acc += t;
        }
    }
    Ok(RunRecord {
        baseline,
        mode,
        realization: index,
        wsr_bits,
        optimized_wsr_bits: report.final_wsr_bits,
        iterations: report.iterations,
        converged: report.converged,
        trace_bits: report.wsr_trace_nats().into_iter().map(nats_to_bits).collect(),
        total_ms: report.total_time_ms,
        decentralized_ms,
        block_ms,
    })
}

/// Runs every (baseline, mode) pair over `spec.realizations` realizations.
/// Failed realizations are recorded and skipped.
pub fn run_experiment(
    spec: &ScenarioSpec,
    baselines: &[Baseline],
    modes: &[Mode],
    perturbation: &PerturbationSpec,
    opts: &RunOptions,
) -> Result<ExperimentResult> {
    spec.validate()?;
    perturbation.validate()?;
    opts.centralized.validate()?;
    opts.decentralized.validate()?;
    let mut out = ExperimentResult::default();
    for &baseline in baselines {
        for &mode in modes {
            let run = |i: usize| run_realization(spec, baseline, mode, i, perturbation, opts);
            let results: Vec<Result<RunRecord>> = if opts.parallel {
                (0..spec.realizations).into_par_iter().map(run).collect()
            } else {
                (0..spec.realizations).map(run).collect()
            };
            for (i, r) in results.into_iter().enumerate() {
                match r {
                    Ok(rec) => out.records.push(rec),
                    Err(e) => out.failures.push(Failure {
                        baseline,
                        mode,
                        realization: i,
                        error: e.to_string(),
                    }),
                }
            }
        }
    }
    Ok(out)
}

/// Quantity varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    PowerDbm,
    Users,
    Rho,
    AngleError,
    PrmError,
}

impl SweepParameter {
    pub fn column(self) -> &'static str {
        match self {
            SweepParameter::PowerDbm => "power_dbm",
            SweepParameter::Users => "users",
            SweepParameter::Rho => "rho",
            SweepParameter::AngleError => "angle_error",
            SweepParameter::PrmError => "prm_error",
        }
    }

    /// Default grid of values.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepParameter::PowerDbm => vec![30.0, 32.0, 34.0, 36.0, 38.0, 40.0],
            SweepParameter::Users => vec![2.0, 4.0, 6.0, 8.0],
            SweepParameter::Rho => vec![0.5, 1.0, 2.0],
            SweepParameter::AngleError => vec![0.0, 0.02, 0.05],
            SweepParameter::PrmError => vec![0.0, 0.5, 1.0],
        }
    }

    fn apply(self, spec: &ScenarioSpec, value: f64) -> Result<(ScenarioSpec, PerturbationSpec)> {
        let mut s = spec.clone();
        let mut p = PerturbationSpec::default();
        match self {
            SweepParameter::PowerDbm => s.power_dbm = value,
            SweepParameter::Users => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::invalid(format!("user count must be a positive integer, got {value}")));
                }
                s.users = value as usize;
                s.weights = s.weights.map(|w| vec![w.first().copied().unwrap_or(1.0); s.users]);
            }
            SweepParameter::Rho => s.rho = value,
            SweepParameter::AngleError => p.angle_error = value,
            SweepParameter::PrmError => p.prm_error = value,
        }
        s.validate()?;
        p.validate()?;
        Ok((s, p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub result: ExperimentResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Mean WSR of one (baseline, mode) at every point.
    pub fn curve(&self, baseline: Baseline, mode: Mode) -> Vec<f64> {
        self.points.iter().map(|p| p.result.mean_wsr(baseline, mode)).collect()
    }

    /// Relative WSR change of each point against the first one.
    pub fn relative_change(&self, baseline: Baseline, mode: Mode) -> Vec<f64> {
        let c = self.curve(baseline, mode);
        c.iter().map(|v| (v - c[0]) / c[0]).collect()
    }

    pub fn flatten(&self) -> ExperimentResult {
        let mut out = ExperimentResult::default();
        for p in &self.points {
            out.extend(p.result.clone());
        }
        out
    }
}

pub fn run_sweep(
    spec: &ScenarioSpec,
    parameter: SweepParameter,
    values: &[f64],
    baselines: &[Baseline],
    modes: &[Mode],
    opts: &RunOptions,
) -> Result<SweepResult> {
    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let (s, p) = parameter.apply(spec, value)?;
        points.push(SweepPoint {
            value,
            result: run_experiment(&s, baselines, modes, &p, opts)?,
        });
    }
    Ok(SweepResult { parameter, points })
}

/// Centralized against decentralized TRFA for each (M, C) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub tx_antennas: usize,
    pub clusters: usize,
    pub result: ExperimentResult,
}

impl TimingRow {
    pub fn mean_ms(&self, mode: Mode) -> f64 {
        let runs: Vec<f64> = self.result.runs(Baseline::Trfa, mode).map(RunRecord::charged_ms).collect();
        runs.iter().sum::<f64>() / runs.len() as f64
    }

    /// `100 (1 − t_D / t_C)`.
    pub fn time_saved_percent(&self) -> f64 {
        100.0 * (1.0 - self.mean_ms(Mode::Decentralized) / self.mean_ms(Mode::Centralized))
    }

    pub fn wsr_loss_percent(&self) -> f64 {
        let c = self.result.mean_wsr(Baseline::Trfa, Mode::Centralized);
        100.0 * (c - self.result.mean_wsr(Baseline::Trfa, Mode::Decentralized)) / c
    }
}

/// Runs realizations one at a time so that the timings are not distorted by
/// concurrent solves.
pub fn run_timing(spec: &ScenarioSpec, antennas: &[usize], clusters: &[usize], opts: &RunOptions) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::new();
    for &m in antennas {
        for &c in clusters {
            let s = ScenarioSpec {
                tx_antennas: m,
                clusters: c,
                ..spec.clone()
            };
            let o = RunOptions {
                clusters: c,
                parallel: false,
                ..opts.clone()
            };
            rows.push(TimingRow {
                tx_antennas: m,
                clusters: c,
                result: run_experiment(&s, &[Baseline::Trfa], &[Mode::Centralized, Mode::Decentralized], &PerturbationSpec::default(), &o)?,
            });
        }
    }
    Ok(rows)
}

pub const SUMMARY_COLUMNS: &[&str] = &[
    "baseline",
    "mode",
    "realizations",
    "failures",
    "mean_wsr_bits",
    "std_err_bits",
    "mean_iterations",
    "converged_fraction",
];
pub const SWEEP_COLUMNS: &[&str] = &[
    "baseline",
    "mode",
    "realizations",
    "failures",
    "mean_wsr_bits",
    "std_err_bits",
    "relative_change",
];
pub const CONVERGENCE_COLUMNS: &[&str] = &["iteration", "baseline", "mode", "mean_wsr_bits"];
pub const RUN_COLUMNS: &[&str] = &["baseline", "mode", "realization", "wsr_bits", "optimized_wsr_bits", "iterations", "converged"];
pub const FAILURE_COLUMNS: &[&str] = &["baseline", "mode", "realization", "error"];
pub const TABLE3_COLUMNS: &[&str] = &[
    "tx_antennas",
    "clusters",
    "realizations",
    "centralized_wsr_bits",
    "decentralized_wsr_bits",
    "wsr_loss_percent",
];
pub const TIMING_COLUMNS: &[&str] = &[
    "baseline",
    "mode",
    "mean_total_ms",
    "mean_charged_ms",
    "mean_aux_ms",
    "mean_w_ms",
    "mean_t_ms",
    "mean_r_ms",
];
pub const TABLE3_TIMING_COLUMNS: &[&str] = &[
    "tx_antennas",
    "clusters",
    "centralized_ms",
    "decentralized_ms",
    "time_saved_percent",
];

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn summary_cells(s: &Summary) -> Vec<String> {
    vec![
        s.baseline.name().to_string(),
        s.mode.name().to_string(),
        s.realizations.to_string(),
        s.failures.to_string(),
        num(s.mean_wsr_bits),
        num(s.std_err_bits),
        num(s.mean_iterations),
        num(s.converged_fraction),
    ]
}

pub fn summary_table(result: &ExperimentResult) -> Table {
    let mut t = Table::new(SUMMARY_COLUMNS);
    for s in result.summaries() {
        t.push(summary_cells(&s));
    }
    t
}

pub fn runs_table(result: &ExperimentResult) -> Table {
    let mut t = Table::new(RUN_COLUMNS);
    for r in &result.records {
        t.push(vec![
            r.baseline.name().to_string(),
            r.mode.name().to_string(),
            r.realization.to_string(),
            num(r.wsr_bits),
            num(r.optimized_wsr_bits),
            r.iterations.to_string(),
            r.converged.to_string(),
        ]);
    }
    t
}

pub fn failures_table(result: &ExperimentResult) -> Table {
    let mut t = Table::new(FAILURE_COLUMNS);
    for f in &result.failures {
        t.push(vec![
            f.baseline.name().to_string(),
            f.mode.name().to_string(),
            f.realization.to_string(),
            csv_text(&f.error),
        ]);
    }
    t
}

pub fn timing_table(result: &ExperimentResult) -> Table {
    let mut t = Table::new(TIMING_COLUMNS);
    for (b, m) in result.groups() {
        let runs: Vec<&RunRecord> = result.runs(b, m).collect();
        let n = runs.len().max(1) as f64;
        let mean = |f: &dyn Fn(&RunRecord) -> f64| num(runs.iter().map(|r| f(r)).sum::<f64>() / n);
        t.push(vec![
            b.name().to_string(),
            m.name().to_string(),
            mean(&|r| r.total_ms),
            mean(&|r| r.charged_ms()),
            mean(&|r| r.block_ms[0]),
            mean(&|r| r.block_ms[1]),
            mean(&|r| r.block_ms[2]),
            mean(&|r| r.block_ms[3]),
        ]);
    }
    t
}

pub fn sweep_table(sweep: &SweepResult) -> Table {
    let mut cols = vec![sweep.parameter.column()];
    cols.extend_from_slice(SWEEP_COLUMNS);
    let mut t = Table::new(&cols);
    let Some(first) = sweep.points.first() else {
        return t;
    };
    for (b, m) in first.result.groups() {
        let base = first.result.mean_wsr(b, m);
        for p in &sweep.points {
            let s = p.result.summary(b, m);
            t.push(vec![
                num(p.value),
                b.name().to_string(),
                m.name().to_string(),
                s.realizations.to_string(),
                s.failures.to_string(),
                num(s.mean_wsr_bits),
                num(s.std_err_bits),
                num((s.mean_wsr_bits - base) / base),
            ]);
        }
    }
    t
}

pub fn convergence_table(result: &ExperimentResult) -> Table {
    let mut t = Table::new(CONVERGENCE_COLUMNS);
    for (b, m) in result.groups() {
        for (i, v) in result.mean_trace(b, m).into_iter().enumerate() {
            t.push(vec![i.to_string(), b.name().to_string(), m.name().to_string(), num(v)]);
        }
    }
    t
}

pub fn table3(rows: &[TimingRow]) -> Table {
    let mut t = Table::new(TABLE3_COLUMNS);
    for r in rows {
        t.push(vec![
            r.tx_antennas.to_string(),
            r.clusters.to_string(),
            r.result.runs(Baseline::Trfa, Mode::Centralized).count().to_string(),
            num(r.result.mean_wsr(Baseline::Trfa, Mode::Centralized)),
            num(r.result.mean_wsr(Baseline::Trfa, Mode::Decentralized)),
            num(r.wsr_loss_percent()),
        ]);
    }
    t
}

pub fn table3_timing(rows: &[TimingRow]) -> Table {
    let mut t = Table::new(TABLE3_TIMING_COLUMNS);
    for r in rows {
        t.push(vec![
            r.tx_antennas.to_string(),
            r.clusters.to_string(),
            num(r.mean_ms(Mode::Centralized)),
            num(r.mean_ms(Mode::Decentralized)),
            num(r.time_saved_percent()),
        ]);
    }
    t
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn prepare(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Serialize)]
struct SummaryFile<'a, T: Serialize> {
    experiment: &'a str,
    scenario: &'a ScenarioSpec,
    rows: T,
}

/// Writes `<name>.csv`, `<name>_timing.csv`, `runs.csv`, `failures.csv` and
/// `summary.json` for a baseline comparison.
pub fn emit_experiment(dir: &Path, name: &str, spec: &ScenarioSpec, result: &ExperimentResult) -> Result<()> {
    prepare(dir)?;
    summary_table(result).write(&dir.join(format!("{name}.csv")))?;
    timing_table(result).write(&dir.join(format!("{name}_timing.csv")))?;
    runs_table(result).write(&dir.join("runs.csv"))?;
    failures_table(result).write(&dir.join("failures.csv"))?;
    write_json(
        &dir.join("summary.json"),
        &SummaryFile {
            experiment: name,
            scenario: spec,
            rows: result.summaries(),
        },
    )
}

/// Writes `sweep_<param>.csv`, its timing file, `runs.csv`, `failures.csv` and
/// `summary.json`.
pub fn emit_sweep(dir: &Path, spec: &ScenarioSpec, sweep: &SweepResult) -> Result<()> {
    prepare(dir)?;
    let name = format!("sweep_{}", sweep.parameter.column());
    sweep_table(sweep).write(&dir.join(format!("{name}.csv")))?;
    let flat = sweep.flatten();
    timing_table(&flat).write(&dir.join(format!("{name}_timing.csv")))?;
    runs_table(&flat).write(&dir.join("runs.csv"))?;
    failures_table(&flat).write(&dir.join("failures.csv"))?;
    let rows: Vec<(f64, Vec<Summary>)> = sweep.points.iter().map(|p| (p.value, p.result.summaries())).collect();
    write_json(
        &dir.join("summary.json"),
        &SummaryFile {
            experiment: &name,
            scenario: spec,
            rows,
        },
    )
}

/// Writes `convergence.csv`, `runs.csv`, `failures.csv` and `summary.json`.
pub fn emit_convergence(dir: &Path, spec: &ScenarioSpec, result: &ExperimentResult) -> Result<()> {
    prepare(dir)?;
    convergence_table(result).write(&dir.join("convergence.csv"))?;
    runs_table(result).write(&dir.join("runs.csv"))?;
    failures_table(result).write(&dir.join("failures.csv"))?;
    write_json(
        &dir.join("summary.json"),
        &SummaryFile {
            experiment: "convergence",
            scenario: spec,
            rows: result.summaries(),
        },
    )
}

/// Writes `table3.csv`, `table3_timing.csv` and `summary.json`.
pub fn emit_table3(dir: &Path, spec: &ScenarioSpec, rows: &[TimingRow]) -> Result<()> {
    prepare(dir)?;
    table3(rows).write(&dir.join("table3.csv"))?;
    table3_timing(rows).write(&dir.join("table3_timing.csv"))?;
    let summaries: Vec<(usize, usize, Vec<Summary>)> =
        rows.iter().map(|r| (r.tx_antennas, r.clusters, r.result.summaries())).collect();
    write_json(
        &dir.join("summary.json"),
        &SummaryFile {
            experiment: "table3",
            scenario: spec,
            rows: summaries,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ScenarioSpec {
        ScenarioSpec {
            tx_antennas: 4,
            rx_antennas: 2,
            users: 2,
            streams: 2,
            clusters: 2,
            realizations: 3,
            ..ScenarioSpec::default()
        }
    }

    fn opts(spec: &ScenarioSpec) -> RunOptions {
        RunOptions::new(spec).with_max_outer(5)
    }

    #[test]
    fn empty_result_gives_header_only_csv() {
        let r = ExperimentResult::default();
        assert_eq!(summary_table(&r).to_csv(), SUMMARY_COLUMNS.join(",") + "\n");
        assert_eq!(runs_table(&r).to_csv(), RUN_COLUMNS.join(",") + "\n");
        assert_eq!(table3(&[]).to_csv(), TABLE3_COLUMNS.join(",") + "\n");
        let sweep = SweepResult {
            parameter: SweepParameter::Rho,
            points: vec![],
        };
        assert_eq!(sweep_table(&sweep).to_csv(), "rho,".to_string() + &SWEEP_COLUMNS.join(",") + "\n");
    }

    #[test]
    fn rows_match_header_width() {
        let spec = tiny();
        let r = run_experiment(&spec, &[Baseline::Fpa, Baseline::Trfa], &[Mode::Centralized, Mode::Decentralized], &PerturbationSpec::default(), &opts(&spec)).unwrap();
        assert!(r.failures.is_empty());
        for t in [summary_table(&r), runs_table(&r), timing_table(&r), convergence_table(&r)] {
            assert!(t.rows.iter().all(|row| row.len() == t.columns.len()));
            assert!(!t.rows.is_empty());
        }
        assert_eq!(r.summaries().len(), 4);
    }

    #[test]
    fn results_are_deterministic_and_order_independent() {
        let spec = tiny();
        let o = opts(&spec);
        let p = PerturbationSpec::default();
        let par = run_experiment(&spec, &[Baseline::Trfa, Baseline::Fpa], &[Mode::Centralized], &p, &o).unwrap();
        let seq = run_experiment(&spec, &[Baseline::Trfa, Baseline::Fpa], &[Mode::Centralized], &p, &RunOptions { parallel: false, ..o.clone() }).unwrap();
        assert_eq!(summary_table(&par).to_csv(), summary_table(&seq).to_csv());
        assert_eq!(runs_table(&par).to_csv(), runs_table(&seq).to_csv());
        let fpa_only = run_experiment(&spec, &[Baseline::Fpa], &[Mode::Centralized], &p, &o).unwrap();
        let a: Vec<_> = par.runs(Baseline::Fpa, Mode::Centralized).cloned().map(|r| r.wsr_bits).collect();
        let b: Vec<_> = fpa_only.runs(Baseline::Fpa, Mode::Centralized).map(|r| r.wsr_bits).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn unperturbed_evaluation_matches_solver() {
        let spec = tiny();
        let tiny_err = PerturbationSpec {
            angle_error: 0.0,
            prm_error: 1e-300,
        };
        let a = run_realization(&spec, Baseline::Trfa, Mode::Centralized, 0, &PerturbationSpec::default(), &opts(&spec)).unwrap();
        let b = run_realization(&spec, Baseline::Trfa, Mode::Centralized, 0, &tiny_err, &opts(&spec)).unwrap();
        assert!((b.wsr_bits - a.wsr_bits).abs() < 1e-9 * a.wsr_bits);
    }

    #[test]
    fn failures_are_counted_not_fatal() {
        let spec = tiny();
        let o = RunOptions {
            clusters: 3,
            ..opts(&spec)
        };
        let r = run_experiment(&spec, &[Baseline::Fpa], &[Mode::Decentralized], &PerturbationSpec::default(), &o).unwrap();
        assert_eq!(r.failures.len(), 3);
        assert!(r.records.is_empty());
        assert_eq!(r.summary(Baseline::Fpa, Mode::Decentralized).failures, 3);
        assert_eq!(failures_table(&r).rows.len(), 3);
    }

    #[test]
    fn sweep_points_follow_values() {
        let spec = tiny();
        let s = run_sweep(&spec, SweepParameter::PowerDbm, &[20.0, 30.0], &[Baseline::Fpa], &[Mode::Centralized], &opts(&spec)).unwrap();
        let curve = s.curve(Baseline::Fpa, Mode::Centralized);
        assert!(curve[1] > curve[0]);
        assert_eq!(s.relative_change(Baseline::Fpa, Mode::Centralized)[0], 0.0);
        assert_eq!(sweep_table(&s).rows.len(), 2);
    }

    #[test]
    fn mean_and_std_err_cases() {
        assert!(mean_and_std_err(&[]).0.is_nan());
        assert_eq!(mean_and_std_err(&[2.0]), (2.0, 0.0));
        let (m, se) = mean_and_std_err(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("c".parse::<Mode>().unwrap(), Mode::Centralized);
        assert_eq!("Decentralized".parse::<Mode>().unwrap(), Mode::Decentralized);
        assert!("x".parse::<Mode>().is_err());
    }
}
