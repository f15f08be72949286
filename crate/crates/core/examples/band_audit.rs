//! Audit schedules against `m/t <= eta <= M/t` and watch the lower constant of an
//! exponential decay collapse as the horizon grows.

use sgd_bands::bands::{audit_band, lower_constant_trend, BandSpec, BoundaryFn};
use sgd_bands::schedules::{make_schedule, ScheduleFamily, ScheduleSpec};

fn main() -> sgd_bands::Result<()> {
    let horizon = 100_000;
    let band = make_schedule(ScheduleSpec::new(
        ScheduleFamily::GrowPeriodBand {
            eta0: 1.0,
            bandwidth: 3.0,
            first_node: 30,
            growth: 2.0,
        },
        horizon,
    ))?;
    let declared = band.declared_band().expect("banded").clone();
    let rep = audit_band(&band, &declared, horizon)?;
    println!(
        "grow_period_band: holds = {}, m_hat = {:.4}, M_hat = {:.4}",
        rep.holds, rep.m_hat, rep.big_m_hat
    );

    let tight = BandSpec::inverse_time(1.0, 2.0);
    let rep = audit_band(&band, &tight, horizon)?;
    println!(
        "against [1/t, 2/t]: {} violations, first at t = {}",
        rep.violation_count,
        rep.violations.first().map_or(0, |v| v.t)
    );

    let hs = [100, 1_000, 10_000, 100_000];
    for fam in [
        ScheduleFamily::GrowExp {
            eta0: 1.0,
            initial_period: 2,
        },
        ScheduleFamily::FixExp {
            eta0: 1.0,
            period: 3,
            decay: 0.1,
        },
    ] {
        let s = make_schedule(ScheduleSpec::new(fam, horizon))?;
        let tr = lower_constant_trend(&s, &BoundaryFn::PowerLaw { p: 1.0 }, &hs)?;
        println!(
            "{}: ln m_hat at {:?} = {:?}, shrinking = {}",
            s.spec().name(),
            hs,
            tr.ln_m_hat
                .iter()
                .map(|v| format!("{v:.2}"))
                .collect::<Vec<_>>(),
            tr.shrinking
        );
    }
    Ok(())
}
