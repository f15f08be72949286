//! Every built-in schedule family at a few step indices, plus a CSV dump of one of them.

use sgd_bands::schedules::{default_families, make_schedule, ScheduleSpec, StepRule};

fn main() -> sgd_bands::Result<()> {
    let horizon = 1000;
    println!(
        "{:<20} {:>12} {:>12} {:>12} {:>12}",
        "family", "t=1", "t=10", "t=100", "t=1000"
    );
    for fam in default_families() {
        let s = make_schedule(ScheduleSpec::new(fam, horizon))?;
        let row: Vec<String> = [1, 10, 100, 1000]
            .iter()
            .map(|&t| format!("{:>12.4e}", s.eta(t)))
            .collect();
        println!("{:<20} {}", s.spec().name(), row.join(" "));
    }

    let s = make_schedule(ScheduleSpec::new(default_families()[1].clone(), 120))?;
    println!("\nt,eta for {}", s.spec().name());
    for t in (1..=120).step_by(10) {
        println!("{t},{}", s.eta(t));
    }
    Ok(())
}
