//! Closed-form bounds for several step-size regimes, each next to the schedule it covers.

use sgd_bands::bands::BoundaryFn;
use sgd_bands::bounds::{
    closed_form_bound, delta_terms, ProblemConstants, RunPrefixStats, Theorem,
};
use sgd_bands::schedules::{make_schedule, ScheduleFamily, ScheduleSpec};

fn main() -> sgd_bands::Result<()> {
    let c = ProblemConstants::new(1.0, 2.0, 1.0, 1.0)?;
    let prefix = RunPrefixStats {
        dist0: 1.0,
        f_prefix_max: 1.0,
    };
    let h = 10_000;
    let power = |eta0, p| ScheduleFamily::Boundary {
        eta0,
        boundary: BoundaryFn::PowerLaw { p },
    };
    let cases = vec![
        (power(2.0, 1.0), Theorem::InverseBand { m: 2.0, big_m: 2.0 }),
        (
            power(2.0, 1.0),
            Theorem::InverseBandSimplified { m: 2.0, big_m: 2.0 },
        ),
        (
            power(2.0, 1.0),
            Theorem::SuffixSumLower { c: 2.0, big_m: 2.0 },
        ),
        (
            ScheduleFamily::Boundary {
                eta0: 2.0,
                boundary: BoundaryFn::PiecewisePowerThenInverse {
                    r: 0.75,
                    p: 0.5,
                    c1: 1.0,
                    horizon: h,
                },
            },
            Theorem::PowerThenInverse {
                m: 2.0,
                big_m1: 2.0,
                big_m2: 2.0,
                r: 0.75,
                p: 0.5,
                c1: 1.0,
            },
        ),
        (
            power(1.0, 0.5),
            Theorem::SameBoundary {
                boundary: BoundaryFn::PowerLaw { p: 0.5 },
                m: 1.0,
                big_m: 1.0,
                epsilon: None,
                t_epsilon: None,
                t_m: None,
            },
        ),
        (
            ScheduleFamily::Boundary {
                eta0: 3.0,
                boundary: BoundaryFn::LogOverT,
            },
            Theorem::LogUpper {
                m: 3.0 * 2f64.ln(),
                big_m: 3.0,
            },
        ),
        (
            power(2.0, 0.75),
            Theorem::PowerUpper {
                m: 2.0,
                big_m: 2.0,
                alpha: 0.75,
            },
        ),
        (
            power(2.0, 0.75),
            Theorem::LogLower {
                m: 1.0,
                big_m: 2.0,
                alpha: 0.75,
                beta: None,
            },
        ),
    ];
    let hs = [100, 1_000, 10_000];
    for (fam, th) in cases {
        let s = make_schedule(ScheduleSpec::new(fam, h))?;
        let terms = delta_terms(&s, &c, &prefix, h, th.warmup_divisor())?;
        let rep = closed_form_bound(&th, &c, &terms, &hs)?;
        let vals: Vec<String> = rep
            .curve
            .values()
            .iter()
            .map(|v| format!("{v:.3e}"))
            .collect();
        println!("{:<5} n0 = {:<3} {}", th.id(), rep.n0, vals.join("  "));
    }

    // hypotheses are checked, not assumed
    let s = make_schedule(ScheduleSpec::new(power(2.0, 1.0), h))?;
    let th = Theorem::SuffixSumLower { c: 0.5, big_m: 2.0 };
    let terms = delta_terms(&s, &c, &prefix, h, th.warmup_divisor())?;
    if let Err(e) = closed_form_bound(&th, &c, &terms, &hs) {
        println!("rejected: {e}");
    }
    Ok(())
}
