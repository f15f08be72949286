//! The exact one-step recursion, its unrolled form and the closed-form bound for
//! `eta = 2/t` on a problem with `mu = 1`, `L_f = 2`, `sigma^2 = 1`.

use sgd_bands::bounds::{
    closed_form_bound, delta_terms, gamma_curve, recursion_curve, ProblemConstants, RunPrefixStats,
    Theorem,
};
use sgd_bands::schedules::{make_schedule, ScheduleFamily, ScheduleSpec};

fn main() -> sgd_bands::Result<()> {
    let c = ProblemConstants::new(1.0, 2.0, 1.0, 1.0)?;
    let sched = make_schedule(ScheduleSpec::new(
        ScheduleFamily::InverseTime {
            eta0: 2.0,
            shift: None,
        },
        100_000,
    ))?;
    let prefix = RunPrefixStats {
        dist0: 4.0,
        f_prefix_max: 2.0,
    };
    let th = Theorem::InverseBand { m: 2.0, big_m: 2.0 };
    let terms = delta_terms(&sched, &c, &prefix, 100_000, th.warmup_divisor())?;
    println!(
        "n0 = {}, chi = {:.4}, Delta = {:.4}",
        terms.n0, terms.chi, terms.delta
    );

    let hs = [10, 100, 1_000, 10_000, 100_000];
    let rec = recursion_curve(&sched, &c, &prefix, terms.n0, &hs)?;
    let gamma = gamma_curve(&sched, &c, terms.delta, &hs)?;
    let closed = closed_form_bound(&th, &c, &terms, &hs)?;
    println!(
        "{:>8} {:>14} {:>14} {:>14}",
        "T", "recursion", "gamma", "closed form"
    );
    for (k, t) in hs.iter().enumerate() {
        println!(
            "{t:>8} {:>14.6e} {:>14.6e} {:>14.6e}",
            rec.values()[k],
            gamma.values()[k],
            closed.curve.values()[k]
        );
    }
    Ok(())
}
