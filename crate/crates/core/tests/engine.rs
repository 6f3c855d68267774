use mobgo::bench::{
    convergence_rows, read_convergence_csv, read_summary, read_trace, run_experiment, write_convergence_csv,
    write_trace, EngineOverrides, ExperimentSpec, ProblemKind, Stats,
};
use mobgo::{run, EngineConfig, Error, OptimizerBudget, RunLog, Variant};

fn small_config(d: usize, q: usize, variant: Variant, eta: usize, max_evals: usize, seed: u64) -> EngineConfig {
    let mut c = EngineConfig::new(d, q, variant, seed);
    c.eta = eta;
    c.max_evals = max_evals;
    c.optimizer = OptimizerBudget::with_max_evals(1500, seed);
    c.fit.restarts = 3;
    c
}

fn linear_run(seed: u64, concurrent: bool) -> RunLog {
    let problem = ProblemKind::Linear.build(2).unwrap();
    let mut c = small_config(2, 2, Variant::Best, 6, 14, seed);
    c.hv_reference = vec![1.1, 1.1];
    c.concurrent_evaluation = concurrent;
    run(&problem, &c).unwrap()
}

#[test]
fn budget_equal_to_doe_gives_one_record() {
    let problem = ProblemKind::Zdt1.build(3).unwrap();
    let c = small_config(3, 2, Variant::Best, 12, 12, 1);
    let log = run(&problem, &c).unwrap();
    assert_eq!(log.records.len(), 1);
    assert_eq!(log.evaluations(), 12);
    assert!(log.records[0].acq_value.is_none());
}

#[test]
fn single_point_poi_spreads_along_a_linear_front() {
    let problem = ProblemKind::Linear.build(1).unwrap();
    let mut c = small_config(1, 1, Variant::Poi, 4, 20, 5);
    c.hv_reference = vec![1.1, 1.1];
    let log = run(&problem, &c).unwrap();
    assert_eq!(log.evaluations(), 20);
    let front = log.final_archive();
    assert!(front.len() >= 10, "only {} nondominated points", front.len());
}

#[test]
fn evaluation_accounting_and_monotone_hv() {
    let log = linear_run(3, false);
    for (k, r) in log.records.iter().enumerate() {
        assert_eq!(r.iter, k);
        assert_eq!(r.evals, 6 + 2 * k);
    }
    assert_eq!(log.evaluations(), 14);
    assert_eq!(log.x.len(), log.y.len());
    for w in log.hv_trace().windows(2) {
        assert!(w[1] >= w[0] - 1e-12, "{w:?}");
    }
}

#[test]
fn same_seed_same_run_and_concurrency_is_invisible() {
    let a = linear_run(9, false);
    let b = linear_run(9, false);
    let c = linear_run(9, true);
    assert_eq!(a.x, b.x);
    assert_eq!(a.y, b.y);
    assert_eq!(a.x, c.x);
    assert_eq!(a.hv_trace(), c.hv_trace());
}

#[test]
fn unknown_names_are_rejected() {
    assert!(matches!("nope".parse::<Variant>(), Err(Error::Config(_))));
    assert_eq!("qpoi_best".parse::<Variant>().unwrap(), Variant::Best);
    assert!("zdt9".parse::<ProblemKind>().is_err());
}

#[test]
fn invalid_configs_are_rejected_before_any_evaluation() {
    let problem = ProblemKind::Zdt1.build(2).unwrap();
    let mut c = small_config(2, 2, Variant::Best, 10, 5, 1);
    let abort = run(&problem, &c).unwrap_err();
    assert!(abort.log.x.is_empty());
    c.max_evals = 20;
    c.q = 3;
    assert!(run(&problem, &c).is_err(), "exact all needs q = 2");
}

#[test]
fn experiment_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::new(ProblemKind::Zdt1, 2, Variant::Best, 2, 2, 17, dir.path().to_path_buf());
    spec.overrides = EngineOverrides {
        eta: Some(8),
        max_evals: Some(12),
        optimizer_evals: Some(800),
        fit_restarts: Some(2),
        ..EngineOverrides::default()
    };
    let summary = run_experiment(&spec).unwrap();
    assert_eq!(summary.repetitions, 2);
    assert_eq!(summary.evaluations, vec![12, 12]);
    let mean = summary.final_hv.iter().sum::<f64>() / 2.0;
    assert!((summary.hv.mean - mean).abs() < 1e-12);

    let from_disk = read_summary(&spec.summary_path()).unwrap();
    assert_eq!(from_disk.final_hv, summary.final_hv);

    let mut finals = Vec::new();
    for rep in 0..2 {
        let rows = read_convergence_csv(&spec.csv_path(rep)).unwrap();
        let trace = read_trace(&spec.trace_path(rep)).unwrap();
        assert_eq!(rows, convergence_rows(&trace));
        assert_eq!(trace.evaluations(), 12);
        finals.push(rows.last().unwrap().hv);
    }
    let stats = Stats::of(&finals).unwrap();
    assert!((stats.mean - summary.hv.mean).abs() < 1e-9);
    assert!((stats.std - summary.hv.std).abs() < 1e-9);
}

#[test]
fn log_writers_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let log = linear_run(4, false);
    let csv = dir.path().join("conv.csv");
    let jsonl = dir.path().join("trace.jsonl");
    write_convergence_csv(&csv, &log).unwrap();
    write_trace(&jsonl, &log).unwrap();
    assert_eq!(read_convergence_csv(&csv).unwrap(), convergence_rows(&log));
    let back = read_trace(&jsonl).unwrap();
    assert_eq!(back.x, log.x);
    assert_eq!(back.y, log.y);
    assert_eq!(back.hv_trace(), log.hv_trace());
}
