mod common;

use pwc_ident::{
    analyze_regressor, integrate_system, partition_intervals, predict_classes, table_report, theoretical_bounds,
    verify_run, AnalysisOptions, BoundednessClass, ExpectedRow, VerifyOptions,
};

fn reference_table() -> Vec<ExpectedRow<f64>> {
    use BoundednessClass::*;
    let rows = [
        (0.0, 0.25, Ieb),
        (0.25, 0.5, Ib),
        (0.5, 1.0, Ieb),
        (1.0, 1.05, Ieb),
        (1.05, 1.45, Ib),
        (1.45, 1.5, Ib),
        (1.5, 2.0, Ieb),
        (2.0, 2.25, Ieb),
        (2.25, 2.5, Ib),
        (2.5, 2.75, Ieb),
        (2.75, 3.0, Ib),
        (3.0, f64::INFINITY, Ges),
    ];
    rows.iter().map(|&(start, end, class)| ExpectedRow { start, end, class }).collect()
}

#[test]
fn reference_runs_reproduce_the_table() {
    let sched = common::reference_schedule();
    let cfgs: Vec<_> = common::AMPLITUDES.iter().map(|&a| common::config(a, 1.0, 0.5)).collect();
    let trajs: Vec<_> = cfgs.iter().map(|c| integrate_system(c, &sched).unwrap()).collect();
    let reports: Vec<_> = cfgs
        .iter()
        .zip(&trajs)
        .map(|(c, t)| analyze_regressor(c, &sched, t, &AnalysisOptions::default()).unwrap())
        .collect();
    let bounds = theoretical_bounds(&cfgs[0], &reports);
    let opts = VerifyOptions::for_schedule(&sched);
    let expected = reference_table();
    let predicted = predict_classes(&cfgs[0], &sched, &partition_intervals(&cfgs[0], &sched));
    assert_eq!(predicted, expected.iter().map(|r| r.class).collect::<Vec<_>>());
    for ((cfg, traj), report) in cfgs.iter().zip(&trajs).zip(&reports) {
        let verdicts = verify_run(cfg, &sched, traj, report, &bounds, &opts).unwrap();
        let table = table_report(&verdicts, &expected).unwrap();
        assert!(table.all_match(), "\n{table}");
        for v in &verdicts {
            assert!(v.envelope_pass(), "{:?}", v.interval);
            if v.class == BoundednessClass::Ieb {
                assert!(v.kappa > 0.0 && v.rho <= opts.thresholds.rho_max);
            }
        }
    }
}

#[test]
fn shorter_windows_give_more_exponential_intervals() {
    let sched = common::reference_schedule();
    let count = |window: f64| {
        let cfg = common::config(10.0, 1.0, window);
        let traj = integrate_system(&cfg, &sched).unwrap();
        let report = analyze_regressor(&cfg, &sched, &traj, &AnalysisOptions::default()).unwrap();
        let bounds = theoretical_bounds(&cfg, std::slice::from_ref(&report));
        verify_run(&cfg, &sched, &traj, &report, &bounds, &VerifyOptions::for_schedule(&sched))
            .unwrap()
            .iter()
            .filter(|v| v.class == BoundednessClass::Ieb)
            .count()
    };
    assert!(count(0.05) > count(0.5));
}
