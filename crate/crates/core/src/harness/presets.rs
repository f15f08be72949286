//! Tuning grids for the built-in schedule families.

use crate::schedules::{ScheduleFamily, ScheduleSpec};

pub const ETA0_GRID: [f64; 6] = [0.1, 0.5, 1.0, 5.0, 10.0, 15.0];
pub const BANDWIDTH_GRID: [f64; 4] = [2.0, 3.0, 4.0, 5.0];
pub const RATIO_GRID: [f64; 5] = [1.1, 1.2, 1.3, 1.4, 1.5];
pub const INITIAL_PERIOD_GRID: [u64; 6] = [1, 2, 3, 5, 10, 20];

/// Family whose grid [`preset_grid`] enumerates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetFamily {
    InverseTime,
    GrowExp,
    UpDownGrowExp,
    FixExp,
    UpDownFixExp,
    FixPeriodBand,
    GrowPeriodBand,
}

fn name_of(spec: &ScheduleSpec) -> String {
    let f = &spec.family;
    let tag = spec.name();
    match f {
        ScheduleFamily::InverseTime { eta0, .. } => format!("{tag}_eta{eta0}"),
        ScheduleFamily::GrowExp {
            eta0,
            initial_period,
        } => {
            format!("{tag}_eta{eta0}_T{initial_period}")
        }
        ScheduleFamily::UpDownGrowExp {
            eta0,
            initial_period,
            ratio,
        } => format!("{tag}_eta{eta0}_T{initial_period}_r{ratio}"),
        ScheduleFamily::FixExp { eta0, period, .. } => format!("{tag}_eta{eta0}_T{period}"),
        ScheduleFamily::UpDownFixExp {
            eta0,
            period,
            ratio,
            ..
        } => format!("{tag}_eta{eta0}_T{period}_r{ratio}"),
        ScheduleFamily::FixPeriodBand {
            eta0, bandwidth, ..
        }
        | ScheduleFamily::GrowPeriodBand {
            eta0, bandwidth, ..
        } => {
            format!("{tag}_eta{eta0}_s{bandwidth}")
        }
        _ => tag.to_string(),
    }
}

/// Named candidates over the tuning grid. `fixed_period` pins the cycle length (or first
/// node for band schedules); otherwise the period grid is swept too. `fixed_ratio` does
/// the same for the up-down ratio.
pub fn preset_grid(
    family: PresetFamily,
    horizon: u64,
    fixed_period: Option<u64>,
    fixed_ratio: Option<f64>,
) -> Vec<(String, ScheduleSpec)> {
    let periods: Vec<u64> = fixed_period.map_or(INITIAL_PERIOD_GRID.to_vec(), |p| vec![p]);
    let ratios: Vec<f64> = fixed_ratio.map_or(RATIO_GRID.to_vec(), |r| vec![r]);
    let mut out = Vec::new();
    for &eta0 in &ETA0_GRID {
        let fams: Vec<ScheduleFamily> = match family {
            PresetFamily::InverseTime => vec![ScheduleFamily::InverseTime { eta0, shift: None }],
            PresetFamily::GrowExp => periods
                .iter()
                .map(|&p| ScheduleFamily::GrowExp {
                    eta0,
                    initial_period: p,
                })
                .collect(),
            PresetFamily::UpDownGrowExp => periods
                .iter()
                .flat_map(|&p| {
                    ratios.iter().map(move |&r| ScheduleFamily::UpDownGrowExp {
                        eta0,
                        initial_period: p,
                        ratio: r,
                    })
                })
                .collect(),
            PresetFamily::FixExp => periods
                .iter()
                .map(|&p| ScheduleFamily::FixExp {
                    eta0,
                    period: p,
                    decay: 0.1,
                })
                .collect(),
            PresetFamily::UpDownFixExp => periods
                .iter()
                .flat_map(|&p| {
                    ratios.iter().map(move |&r| ScheduleFamily::UpDownFixExp {
                        eta0,
                        period: p,
                        ratio: r,
                        decay: 0.1,
                    })
                })
                .collect(),
            PresetFamily::FixPeriodBand => BANDWIDTH_GRID
                .iter()
                .map(|&s| ScheduleFamily::FixPeriodBand {
                    eta0,
                    bandwidth: s,
                    first_node: fixed_period.unwrap_or(30),
                    period: fixed_period.unwrap_or(30),
                })
                .collect(),
            PresetFamily::GrowPeriodBand => BANDWIDTH_GRID
                .iter()
                .map(|&s| ScheduleFamily::GrowPeriodBand {
                    eta0,
                    bandwidth: s,
                    first_node: fixed_period.unwrap_or(30),
                    growth: 2.0,
                })
                .collect(),
        };
        for f in fams {
            let spec = ScheduleSpec::new(f, horizon);
            out.push((name_of(&spec), spec));
        }
    }
    out
}
