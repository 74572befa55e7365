use std::path::Path;

use adaptred::harness::{
    generate, parse_csv, run_experiment, summary_csv, sweep, ConvergenceTrace, ExperimentConfig,
    Method, OracleKind, SyntheticSpec, Task,
};

fn write_data(dir: &Path, spec: &SyntheticSpec, name: &str) -> std::path::PathBuf {
    let (data, _) = generate(spec).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, data.to_libsvm()).unwrap();
    p
}

fn check_invariants(t: &ConvergenceTrace) {
    assert!(!t.rows.is_empty());
    assert!(t.rows.windows(2).all(|w| w[1].passes > w[0].passes));
    assert!(t.rows.iter().all(|r| r.subopt >= -1e-9), "{t:?}");
}

#[test]
fn lasso_adaptreg_sdca_reaches_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(
        dir.path(),
        &SyntheticSpec::regression(200, 20, 5),
        "lasso.svm",
    );
    let cfg = ExperimentConfig {
        data_path: Some(data),
        task: Task::Lasso,
        l1_weight: 1e-3,
        method: Method::AdaptReg,
        oracle: OracleKind::Sdca,
        sigma0: Some(1e-2),
        epsilon: Some(1e-6),
        pass_budget: 300.0,
        out_dir: Some(dir.path().join("out")),
        ..Default::default()
    };
    let trace = run_experiment(&cfg).unwrap();
    check_invariants(&trace);
    assert!(trace.last().unwrap().subopt <= 1e-6, "{:?}", trace.last());
    let on_disk = parse_csv(&std::fs::read_to_string(cfg.trace_path().unwrap()).unwrap()).unwrap();
    assert!(on_disk.same_bits(&trace));
    for r in &trace.rows {
        assert_eq!(r.sigma_t, Some(1e-2 * 0.5f64.powi(r.epoch as i32)));
    }
}

#[test]
fn classical_reg_plateaus_order_with_sigma() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(
        dir.path(),
        &SyntheticSpec::regression(200, 20, 6),
        "lasso.svm",
    );
    let configs: Vec<ExperimentConfig> = [1.0, 0.1, 0.01]
        .into_iter()
        .map(|s| ExperimentConfig {
            data_path: Some(data.clone()),
            task: Task::Lasso,
            l1_weight: 1e-3,
            method: Method::ClassicalReg,
            oracle: OracleKind::Apg,
            sigma: Some(s),
            pass_budget: 400.0,
            out_dir: Some(dir.path().join("sweep")),
            ..Default::default()
        })
        .collect();
    let entries = sweep(&configs).unwrap();
    assert_eq!(entries.len(), 3);
    assert!(entries.iter().all(|e| e.error.is_none()));
    let plateaus: Vec<f64> = entries.iter().map(|e| e.final_subopt.unwrap()).collect();
    assert!(
        plateaus[0] > plateaus[1] && plateaus[1] > plateaus[2],
        "{plateaus:?}"
    );
    for c in &configs {
        let t = parse_csv(&std::fs::read_to_string(c.trace_path().unwrap()).unwrap()).unwrap();
        check_invariants(&t);
    }
    assert_eq!(summary_csv(&entries).lines().count(), 4);
}

#[test]
fn sweep_records_failures_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(
        dir.path(),
        &SyntheticSpec::classification(60, 5, 1),
        "svm.svm",
    );
    let good = ExperimentConfig {
        data_path: Some(data),
        task: Task::Svm,
        l2_weight: 0.1,
        method: Method::AdaptSmooth,
        oracle: OracleKind::Sdca,
        epochs: Some(3),
        out_dir: Some(dir.path().join("o")),
        ..Default::default()
    };
    let missing = ExperimentConfig {
        data_path: Some(dir.path().join("nope.svm")),
        name: Some("missing".into()),
        ..good.clone()
    };
    let entries = sweep(&[good, missing]).unwrap();
    assert!(entries[0].error.is_none());
    assert!(entries[1].error.as_deref().unwrap().contains("nope.svm"));
}

#[test]
fn every_task_method_oracle_combination_runs() {
    let dir = tempfile::tempdir().unwrap();
    let reg = write_data(dir.path(), &SyntheticSpec::regression(40, 6, 2), "reg.svm");
    let cls = write_data(
        dir.path(),
        &SyntheticSpec::classification(40, 6, 2),
        "cls.svm",
    );
    let tasks = [
        (Task::Ridge, &reg, 0.0, 0.1, Method::Direct),
        (Task::ElasticNet, &reg, 1e-2, 0.1, Method::Direct),
        (Task::Lasso, &reg, 1e-2, 0.0, Method::AdaptReg),
        (Task::Logistic, &cls, 1e-2, 0.0, Method::AdaptReg),
        (Task::Svm, &cls, 0.0, 0.1, Method::AdaptSmooth),
        (Task::L1Svm, &cls, 1e-2, 0.0, Method::Joint),
    ];
    for (task, data, l1, l2, method) in tasks {
        for oracle in OracleKind::ALL {
            let cfg = ExperimentConfig {
                data_path: Some(data.clone()),
                task,
                l1_weight: l1,
                l2_weight: l2,
                method,
                oracle,
                epochs: Some(3),
                pass_budget: 30.0,
                ..Default::default()
            };
            let t = run_experiment(&cfg).unwrap_or_else(|e| panic!("{task}/{oracle}: {e}"));
            check_invariants(&t);
            let first = t.rows[0].subopt;
            let best = t.best_subopt().unwrap();
            assert!(
                best < first || first < 1e-12,
                "{task}/{method}/{oracle}: no progress"
            );
        }
    }
}
