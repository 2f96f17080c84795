//! ε-sweep of the pinned classical energy on (0, 1): minimum energy and
//! transition counts as the interface width shrinks.
//!
//! cargo run --example eps_sweep

use tensionlab::experiments::{eps_sweep, EpsSweepConfig};

fn main() -> tensionlab::Result<()> {
    let cfg = EpsSweepConfig::default();
    let record = eps_sweep(&cfg)?;
    println!("{} cells, boundary layers of {} each", cfg.cells, cfg.layer);
    println!("{:>10} {:>12} {:>6} {:>6} {:>6}", "eps", "energy", "inner", "upper", "lower");
    for r in &record.rows {
        println!(
            "{:>10.6} {:>12.8} {:>6} {:>6} {:>6}",
            r.param, r.energy, r.inner_transitions, r.outer_upper, r.outer_lower
        );
    }
    println!("one transition should cost 8/3 = {:.8}", 8.0 / 3.0);
    Ok(())
}
