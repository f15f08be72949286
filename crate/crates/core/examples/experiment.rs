//! Load an experiment file, run it and write the same outputs the `run` subcommand does.
//!
//! `cargo run --example experiment -- examples/configs/quadratic.json out/`

use std::path::PathBuf;

use sgd_bands::harness::{run_experiment, write_outputs, ExperimentConfig, RunOptions};

fn main() -> sgd_bands::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = PathBuf::from(args.next().unwrap_or_else(|| {
        concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/examples/configs/quadratic.json"
        )
        .into()
    }));
    let out = args
        .map(PathBuf::from)
        .next()
        .unwrap_or_else(|| std::env::temp_dir().join("sgd-bands-experiment"));
    let cfg = ExperimentConfig::load(&config)?;
    let opts = RunOptions {
        base_dir: config.parent().map(PathBuf::from),
        ..Default::default()
    };
    let res = run_experiment(&cfg, &opts)?;
    write_outputs(&res, &cfg, &out)?;
    for o in &res.schedules {
        let fit = o.fit.as_ref().map(|f| f.slope);
        let dom = o.comparison.as_ref().map(|c| c.dominance);
        println!("{}: slope {:?}, bound dominance {:?}", o.name, fit, dom);
    }
    println!("wrote {}", out.display());
    Ok(())
}
