use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use famimo::dbp::dec_solve;
use famimo::error::{Error, Result};
use famimo::experiment::{
    emit_convergence, emit_experiment, emit_sweep, emit_table3, run_experiment, run_sweep, run_timing, Mode, RunOptions, SweepParameter,
};
use famimo::scenario::{build_problem, sample_scenario, Baseline, PerturbationSpec, ScenarioSpec};
use famimo::solver::{solve, SolverConfig};
use famimo::verify::{run_all, run_suite, Suite};

const OUT_ENV: &str = "FAMIMO_OUT_DIR";
const EXIT_MAX_ITER: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "famimo", version, about = "Fluid-antenna MU-MIMO beamforming and position optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one realization of a scenario.
    Solve(SolveArgs),
    /// Run a Monte Carlo experiment and write CSV tables.
    Experiment(ExperimentArgs),
    /// Run the invariant suites.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    C,
    D,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::C => Mode::Centralized,
            ModeArg::D => Mode::Decentralized,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Fpa,
    Rpa,
    Tfa,
    Rfa,
    Trfa,
}

impl From<BaselineArg> for Baseline {
    fn from(b: BaselineArg) -> Self {
        match b {
            BaselineArg::Fpa => Baseline::Fpa,
            BaselineArg::Rpa => Baseline::Rpa,
            BaselineArg::Tfa => Baseline::Tfa,
            BaselineArg::Rfa => Baseline::Rfa,
            BaselineArg::Trfa => Baseline::Trfa,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BeamformerArg {
    Bisection,
    InverseFree,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Figure {
    Power,
    Users,
    Rho,
    RobustAng,
    RobustPrm,
    Convergence,
}

#[derive(Args)]
struct Common {
    /// Output directory [default: $FAMIMO_OUT_DIR or ./famimo-out]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum outer iterations.
    #[arg(long)]
    max_outer: Option<usize>,
    /// Relative WSR change that counts as converged.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct SolveArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum, default_value = "c")]
    mode: ModeArg,
    /// Number of DUs in decentralized mode [default: from the scenario]
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long, value_enum, default_value = "trfa")]
    baseline: BaselineArg,
    /// Realization index.
    #[arg(long, default_value_t = 0)]
    realization: usize,
    /// Centralized update rules; inverse-free mirrors the decentralized solver.
    #[arg(long, value_enum, default_value = "bisection")]
    beamformer: BeamformerArg,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("what").required(true).args(["table2", "fig", "table3"])))]
struct ExperimentArgs {
    /// Average WSR of every baseline.
    #[arg(long)]
    table2: bool,
    /// Parameter sweep, robustness study or convergence curves.
    #[arg(long, value_enum)]
    fig: Option<Figure>,
    /// Centralized against decentralized run time.
    #[arg(long)]
    table3: bool,
    /// Scenario JSON file [default: built-in desk-scale scenario]
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Start from the full-size scenario (M = 64, S = 200).
    #[arg(long)]
    full_scale: bool,
    /// Number of channel realizations.
    #[arg(long)]
    realizations: Option<usize>,
    /// Modes to run [default: both for --table2, c otherwise]
    #[arg(long, value_enum, value_delimiter = ',')]
    mode: Vec<ModeArg>,
    /// Baselines to run [default: all]
    #[arg(long, value_enum, value_delimiter = ',')]
    baselines: Vec<BaselineArg>,
    /// Sweep values replacing the default grid of --fig.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    /// Transmit array sizes for --table3.
    #[arg(long, value_delimiter = ',', default_values_t = [16usize, 64])]
    antennas: Vec<usize>,
    /// DU counts for --table3 [default: from the scenario]
    #[arg(long, value_delimiter = ',')]
    clusters: Vec<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run one suite: grad-tx, grad-rx, majorization, delta, tightness or mul.
    #[arg(long)]
    suite: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn out_dir(common: &Common) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("famimo-out"))
}

fn apply_common(config: &mut SolverConfig, common: &Common) -> std::result::Result<(), Failure> {
    if let Some(n) = common.max_outer {
        config.max_outer = n;
    }
    if let Some(t) = common.tol {
        config.tol_outer = t;
    }
    config.validate().map_err(|e| usage(e.to_string()))
}

fn load_spec(path: Option<&Path>, full_scale: bool) -> std::result::Result<ScenarioSpec, Failure> {
    match path {
        Some(p) if !p.exists() => Err(usage(format!("scenario file {} does not exist", p.display()))),
        Some(p) => Ok(ScenarioSpec::load(p)?),
        None if full_scale => Ok(ScenarioSpec::full_scale()),
        None => Ok(ScenarioSpec::default()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_solve(args: &SolveArgs) -> std::result::Result<u8, Failure> {
    let mut spec = load_spec(Some(&args.scenario), false)?;
    if let Some(seed) = args.common.seed {
        spec.seed = seed;
    }
    let mode = Mode::from(args.mode);
    let baseline = Baseline::from(args.baseline);
    let mut config = match (mode, args.beamformer) {
        (Mode::Decentralized, _) => SolverConfig::decentralized_reference(),
        (Mode::Centralized, BeamformerArg::Bisection) => SolverConfig::default(),
        (Mode::Centralized, BeamformerArg::InverseFree) => SolverConfig::decentralized_reference(),
    };
    config.optimize_t = baseline.optimize_t();
    config.optimize_r = baseline.optimize_r();
    apply_common(&mut config, &args.common)?;
    let realization = sample_scenario(&spec, args.realization)?;
    let problem = build_problem(&spec, baseline, args.realization, realization.geometry)?;
    let out = out_dir(&args.common);
    create_dir(&out)?;
    let (report, clusters) = match mode {
        Mode::Centralized => (solve(&problem, &config)?, None),
        Mode::Decentralized => {
            let clusters = args.clusters.unwrap_or(spec.clusters);
            let dec = dec_solve(&problem, &config, clusters)?;
            dec.log.write_csv(&out.join("messages.csv"))?;
            dec.log.write_summary(&out.join("messages_summary.json"))?;
            let timing = serde_json::to_string_pretty(&dec.timing).map_err(Error::from)?;
            std::fs::write(out.join("timing.json"), timing).map_err(|e| Error::io(out.join("timing.json"), e))?;
            (dec.report, Some(clusters))
        }
    };
    report.write_json(&out.join("report.json"))?;
    report.write_trace_csv(&out.join("trace.csv"))?;
    let status = if report.converged { "converged" } else { "max-iterations" };
    println!(
        "{}",
        json!({
            "command": "solve",
            "status": status,
            "baseline": baseline.name(),
            "mode": mode.name(),
            "clusters": clusters,
            "iterations": report.iterations,
            "wsr_bits": report.final_wsr_bits,
            "out": out,
        })
    );
    Ok(if report.converged { 0 } else { EXIT_MAX_ITER })
}

fn cmd_experiment(args: &ExperimentArgs) -> std::result::Result<u8, Failure> {
    let mut spec = load_spec(args.scenario.as_deref(), args.full_scale)?;
    if let Some(s) = args.realizations {
        if s == 0 {
            return Err(usage("--realizations must be at least 1"));
        }
        spec.realizations = s;
    }
    if let Some(seed) = args.common.seed {
        spec.seed = seed;
    }
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let mut opts = RunOptions::new(&spec);
    apply_common(&mut opts.centralized, &args.common)?;
    apply_common(&mut opts.decentralized, &args.common)?;
    let baselines: Vec<Baseline> = if args.baselines.is_empty() {
        Baseline::ALL.to_vec()
    } else {
        args.baselines.iter().map(|&b| b.into()).collect()
    };
    let modes: Vec<Mode> = match (args.mode.is_empty(), args.table2) {
        (false, _) => args.mode.iter().map(|&m| m.into()).collect(),
        (true, true) => vec![Mode::Centralized, Mode::Decentralized],
        (true, false) => vec![Mode::Centralized],
    };
    let out = out_dir(&args.common);
    let (name, failures, runs) = if args.table2 {
        let r = run_experiment(&spec, &baselines, &modes, &PerturbationSpec::default(), &opts)?;
        emit_experiment(&out, "table2", &spec, &r)?;
        ("table2".to_string(), r.failures.len(), r.records.len())
    } else if args.table3 {
        let clusters = if args.clusters.is_empty() { vec![spec.clusters] } else { args.clusters.clone() };
        let rows = run_timing(&spec, &args.antennas, &clusters, &opts)?;
        emit_table3(&out, &spec, &rows)?;
        let failures = rows.iter().map(|r| r.result.failures.len()).sum();
        let runs = rows.iter().map(|r| r.result.records.len()).sum();
        ("table3".to_string(), failures, runs)
    } else {
        let fig = args.fig.expect("argument group guarantees a selection");
        if fig == Figure::Convergence {
            let r = run_experiment(&spec, &baselines, &modes, &PerturbationSpec::default(), &opts)?;
            emit_convergence(&out, &spec, &r)?;
            ("convergence".to_string(), r.failures.len(), r.records.len())
        } else {
            let parameter = match fig {
                Figure::Power => SweepParameter::PowerDbm,
                Figure::Users => SweepParameter::Users,
                Figure::Rho => SweepParameter::Rho,
                Figure::RobustAng => SweepParameter::AngleError,
                Figure::RobustPrm => SweepParameter::PrmError,
                Figure::Convergence => unreachable!(),
            };
            let values = if args.values.is_empty() { parameter.default_values() } else { args.values.clone() };
            let sweep = run_sweep(&spec, parameter, &values, &baselines, &modes, &opts).map_err(|e| match e {
                Error::InvalidArgument(msg) => usage(msg),
                e => Failure::Run(e),
            })?;
            emit_sweep(&out, &spec, &sweep)?;
            let flat = sweep.flatten();
            (format!("sweep_{}", parameter.column()), flat.failures.len(), flat.records.len())
        }
    };
    let status = if runs == 0 { "failed" } else { "ok" };
    println!(
        "{}",
        json!({"command": "experiment", "status": status, "experiment": name, "runs": runs, "failures": failures, "out": out})
    );
    Ok(if runs == 0 { 1 } else { 0 })
}

fn cmd_verify(args: &VerifyArgs) -> std::result::Result<u8, Failure> {
    let results = match &args.suite {
        Some(name) => vec![run_suite(name.parse::<Suite>().map_err(|e| usage(e.to_string()))?, args.seed)?],
        None => run_all(args.seed)?,
    };
    for r in &results {
        eprintln!("{r}");
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.suite.name()).collect();
    let margins: serde_json::Map<String, serde_json::Value> =
        results.iter().map(|r| (r.suite.name().to_string(), json!(r.margin))).collect();
    println!(
        "{}",
        json!({"command": "verify", "status": if failed.is_empty() { "pass" } else { "fail" }, "failed": failed, "margins": margins})
    );
    Ok(if failed.is_empty() { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nRun 'famimo --help' for usage.");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
