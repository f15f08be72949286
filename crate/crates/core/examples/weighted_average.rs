//! Last iterate against the `(t + t0)`-weighted average under `eta = 2/t`: the averaged
//! function gap decays at `1/T` as well, with a smaller constant.

use sgd_bands::harness::{fit_rate, run_experiment, ExperimentConfig, Metric, RunOptions};

fn main() -> sgd_bands::Result<()> {
    let steps = 20_000;
    let cfg: ExperimentConfig = serde_json::from_value(serde_json::json!({
        "problem": {"kind": "quadratic", "d": 1, "noise": 1.0},
        "schedules": [{"name": "inverse", "family": "inverse_time", "params": {"eta0": 2.0}, "horizon": steps}],
        "seeds": 64,
        "master_seed": 4,
        "optimizer": {"outer_loops": steps, "x_init": [1.0], "averaging": {"t0": 1, "power": 1}},
        "bound": {"theorem": "weighted_average", "m": 2.0, "M": 2.0, "t0": 1}
    }))?;
    let res = run_experiment(&cfg, &RunOptions::default())?;
    let out = &res.schedules[0];
    for m in [Metric::FGap, Metric::AvgFGap] {
        let f = fit_rate(&out.series, m, (steps / 100, steps))?;
        let last = *out.series.mean(m)?.last().unwrap();
        println!("{:<10} final {last:.3e}, slope {:.3}", m.name(), f.slope);
    }
    if let Some(c) = &out.comparison {
        println!(
            "averaged gap under the bound at {:.1}% of indices",
            100.0 * c.dominance
        );
    }
    Ok(())
}
