use sgd_bands::harness::{
    export_series, import_series_json, run_experiment, AggregateSeries, ExperimentConfig,
    ExportFormat, Metric, RunOptions,
};
use sgd_bands::optimizer::{run, OptimizerConfig, RunKey};
use sgd_bands::problems::{
    estimate_constants, generate_synthetic, solve_optimum, Problem, QuadraticProblem,
    SyntheticKind, SyntheticParams,
};
use sgd_bands::schedules::{make_schedule, ScheduleFamily, ScheduleSpec};
use sgd_bands::Error;

fn logreg(n: usize, d: usize, seed: u64) -> Problem {
    let params = SyntheticParams {
        lambda: 1e-3,
        ..Default::default()
    };
    generate_synthetic(SyntheticKind::LogReg, d, n, seed, &params).unwrap()
}

#[test]
fn synthetic_logreg_is_certified() {
    for (n, d, seed) in [(200, 10, 1), (1000, 20, 7)] {
        let p = logreg(n, d, seed);
        let cert = solve_optimum(&p, 1e-10).unwrap();
        assert!(cert.grad_norm <= 1e-10, "n = {n}: {}", cert.grad_norm);
        let g = p.full_gradient(&cert.x_star).unwrap();
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-10);
        let f = p.full_objective(&cert.x_star).unwrap();
        assert!((f - cert.f_star).abs() <= 1e-14 * f.abs().max(1.0));
        // no nearby point does better
        for j in 0..d {
            let mut x = cert.x_star.clone();
            x[j] += 1e-4;
            assert!(p.full_objective(&x).unwrap() > f);
        }
        let c = estimate_constants(&p, Some(&cert), 1.0).unwrap();
        assert_eq!(c.mu, 1e-3);
        assert!(c.l_f > c.mu && c.sigma2 > 0.0);
    }
}

#[test]
fn logreg_constants_need_a_certificate() {
    let p = logreg(50, 3, 2);
    assert!(matches!(
        estimate_constants(&p, None, 1.0),
        Err(Error::MissingCertificate(_))
    ));
}

#[test]
fn quadratic_optimum_is_closed_form() {
    let p = Problem::Quadratic(QuadraticProblem {
        x_star: vec![1.0, -2.0],
        noise: 0.5,
    });
    let cert = solve_optimum(&p, 1e-10).unwrap();
    assert_eq!(cert.x_star, vec![1.0, -2.0]);
    assert_eq!(cert.grad_norm, 0.0);
    let c = estimate_constants(&p, Some(&cert), 1.0).unwrap();
    assert_eq!((c.mu, c.l_f), (1.0, 1.0));
}

#[test]
fn sgd_reaches_the_logreg_optimum() {
    let p = logreg(200, 5, 3);
    let cert = solve_optimum(&p, 1e-10).unwrap();
    let steps = 20_000;
    let sched = make_schedule(ScheduleSpec::new(
        ScheduleFamily::InverseTime {
            eta0: 2.0,
            shift: Some(50.0),
        },
        steps,
    ))
    .unwrap();
    let tr = run(
        &p,
        &sched,
        &OptimizerConfig::sgd(steps),
        &cert,
        RunKey::new(4, 0),
    )
    .unwrap();
    assert!(tr.f_gap[0] > 0.0);
    assert!(*tr.f_gap.last().unwrap() < 0.1 * tr.f_gap0);
}

#[test]
fn same_key_same_trajectory() {
    let p = logreg(100, 4, 5);
    let cert = solve_optimum(&p, 1e-10).unwrap();
    let sched = make_schedule(ScheduleSpec::new(
        ScheduleFamily::InverseTime {
            eta0: 1.0,
            shift: None,
        },
        500,
    ))
    .unwrap();
    let cfg = OptimizerConfig::sgd(500);
    let a = run(&p, &sched, &cfg, &cert, RunKey::new(1, 2)).unwrap();
    let b = run(&p, &sched, &cfg, &cert, RunKey::new(1, 2)).unwrap();
    let c = run(&p, &sched, &cfg, &cert, RunKey::new(1, 3)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.sq_dist, c.sq_dist);
}

fn small_experiment() -> ExperimentConfig {
    serde_json::from_value(serde_json::json!({
        "problem": {"kind": "quadratic", "d": 2, "noise": 1.0, "x_star": [0.5, -0.5]},
        "schedules": [
            {"name": "inv", "family": "inverse_time", "params": {"eta0": 2.0}, "horizon": 400},
            {"name": "band", "family": "fix_period_band",
             "params": {"eta0": 1.0, "bandwidth": 3.0, "first_node": 30, "period": 30}, "horizon": 400}
        ],
        "seeds": 12,
        "master_seed": 3,
        "optimizer": {"outer_loops": 400, "averaging": {"t0": 0, "power": 1}}
    }))
    .unwrap()
}

#[test]
fn series_survive_json_and_csv() {
    let res = run_experiment(&small_experiment(), &RunOptions::default()).unwrap();
    let series = res.series();
    assert_eq!(series.len(), 2);
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("s.json");
    export_series(&series, ExportFormat::Json, &json).unwrap();
    assert_eq!(import_series_json(&json).unwrap(), series);
    let csv = dir.path().join("s.csv");
    export_series(&series, ExportFormat::Csv, &csv).unwrap();
    let back: Vec<AggregateSeries> = sgd_bands::harness::load_series_csv(&csv).unwrap();
    assert_eq!(back, series);
}

#[test]
fn averaged_columns_are_reported() {
    let res = run_experiment(&small_experiment(), &RunOptions::default()).unwrap();
    for s in res.series() {
        assert_eq!(s.n_seeds, 12);
        assert_eq!(s.t.len(), 400);
        for m in [
            Metric::SqDist,
            Metric::FGap,
            Metric::AvgSqDist,
            Metric::AvgFGap,
        ] {
            let mean = s.mean(m).unwrap();
            assert!(mean.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }
    let (name, v) = res.best_final(Metric::SqDist).unwrap();
    assert!(["inv", "band"].contains(&name) && v < 0.1);
}
