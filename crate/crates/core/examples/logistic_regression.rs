//! Epoch-style mini-batch SGD on synthetic logistic regression, tuning `eta0` for a
//! `1/t` schedule and for an up-down exponential one.

use sgd_bands::harness::presets::{preset_grid, PresetFamily};
use sgd_bands::harness::{run_experiment, ExperimentConfig, Metric, NamedSchedule, RunOptions};

fn main() -> sgd_bands::Result<()> {
    let epochs = 60;
    let mut cfg: ExperimentConfig = serde_json::from_value(serde_json::json!({
        "problem": {"kind": "synthetic_logreg", "n": 2000, "d": 20, "seed": 5, "lambda": 1e-3,
                    "test_fraction": 0.2},
        "schedules": [],
        "seeds": 3,
        "master_seed": 2,
        "optimizer": {"outer_loops": epochs, "inner_loops": 8, "batch_size": 64,
                      "step_mode": "per_epoch", "record": "per_epoch"}
    }))?;
    for fam in [PresetFamily::InverseTime, PresetFamily::UpDownGrowExp] {
        for (name, spec) in preset_grid(fam, epochs, Some(2), Some(1.2)) {
            cfg.schedules.push(NamedSchedule { name, spec });
        }
    }
    let res = run_experiment(&cfg, &RunOptions::default())?;
    println!(
        "optimum: f* = {:.6}, |grad| = {:.1e} ({}, {} iterations)",
        res.certificate.f_star,
        res.certificate.grad_norm,
        res.certificate.method,
        res.certificate.iterations
    );
    for prefix in ["inverse_time", "up_down_grow_exp"] {
        let best = res
            .schedules
            .iter()
            .filter(|o| o.name.starts_with(prefix))
            .map(|o| (o, *o.series.mean(Metric::FGap).unwrap().last().unwrap()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let acc = best
            .0
            .series
            .mean(Metric::TestAccuracy)
            .ok()
            .and_then(|a| a.last().copied());
        println!(
            "best {prefix}: {} with gap {:.3e}, test accuracy {:?}",
            best.0.name, best.1, acc
        );
    }
    Ok(())
}
