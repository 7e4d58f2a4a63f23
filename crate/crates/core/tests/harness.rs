use famimo::experiment::{run_experiment, run_sweep, Mode, RunOptions, SweepParameter};
use famimo::scenario::{build_problem, sample_scenario, Baseline, PerturbationSpec, ScenarioSpec};
use famimo::solver::{solve, SolverConfig};

#[test]
fn averages_over_s_and_2s_agree() {
    let spec = ScenarioSpec {
        realizations: 40,
        ..ScenarioSpec::default()
    };
    let opts = RunOptions::new(&spec);
    let r = run_experiment(&spec, &[Baseline::Fpa], &[Mode::Centralized], &PerturbationSpec::default(), &opts).unwrap();
    let all: Vec<f64> = r.records.iter().map(|x| x.wsr_bits).collect();
    let (m2, se2) = famimo::experiment::mean_and_std_err(&all);
    let (m1, se1) = famimo::experiment::mean_and_std_err(&all[..20]);
    assert!((m1 - m2).abs() <= 2.0 * (se1 * se1 + se2 * se2).sqrt(), "{m1} vs {m2}");
}

#[test]
fn larger_boxes_do_not_hurt_trfa() {
    let spec = ScenarioSpec {
        realizations: 12,
        ..ScenarioSpec::default()
    };
    let s = run_sweep(&spec, SweepParameter::Rho, &[0.5, 1.0, 2.0], &[Baseline::Trfa], &[Mode::Centralized], &RunOptions::new(&spec)).unwrap();
    let c = s.curve(Baseline::Trfa, Mode::Centralized);
    assert!(c[0] <= c[1] && c[1] <= c[2], "{c:?}");
}

#[test]
fn optimizing_on_estimates_costs_rate_on_average() {
    let spec = ScenarioSpec {
        realizations: 50,
        ..ScenarioSpec::default()
    };
    let s = run_sweep(&spec, SweepParameter::PrmError, &[0.0, 0.5], &[Baseline::Fpa], &[Mode::Centralized], &RunOptions::new(&spec)).unwrap();
    let c = s.curve(Baseline::Fpa, Mode::Centralized);
    assert!(c[1] <= c[0]);
}

#[test]
fn fixed_arrays_reduce_to_beamforming_only() {
    let spec = ScenarioSpec::default();
    let g = sample_scenario(&spec, 3).unwrap().geometry;
    let fpa = build_problem(&spec, Baseline::Fpa, 3, g).unwrap();
    let a = solve(&fpa, &SolverConfig { optimize_t: false, optimize_r: false, ..SolverConfig::default() }).unwrap();
    let b = solve(&fpa, &SolverConfig::default()).unwrap();
    assert_eq!(a.wsr_trace_nats().len(), b.wsr_trace_nats().len());
    for (x, y) in a.wsr_trace_nats().iter().zip(b.wsr_trace_nats()) {
        assert!((x - y).abs() <= 1e-12 * y.abs());
    }
    assert!(a.trace.iter().all(|r| r.mm_steps_t == 0 && r.mm_steps_r == 0));
}

#[test]
fn baselines_do_not_share_random_streams() {
    let spec = ScenarioSpec {
        realizations: 3,
        ..ScenarioSpec::default()
    };
    let opts = RunOptions::new(&spec).with_max_outer(3);
    let none = PerturbationSpec::default();
    let alone = run_experiment(&spec, &[Baseline::Rpa], &[Mode::Centralized], &none, &opts).unwrap();
    let mixed = run_experiment(&spec, &[Baseline::Trfa, Baseline::Rpa], &[Mode::Centralized], &none, &opts).unwrap();
    let w = |r: &famimo::experiment::ExperimentResult| r.runs(Baseline::Rpa, Mode::Centralized).map(|x| x.wsr_bits).collect::<Vec<_>>();
    assert_eq!(w(&alone), w(&mixed));
}
