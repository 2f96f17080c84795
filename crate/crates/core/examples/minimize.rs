//! Low-level use of the library: build a functional, pick a start, run the
//! preconditioned quasi-Newton solver and inspect the trace.
//!
//! cargo run --example minimize

use tensionlab::energy::{DomainMode, Family, FunctionalSpec};
use tensionlab::experiments::count_transitions;
use tensionlab::solver::{init_profile, minimize, ProfileKind, ProfileParams, SolverOptions};
use tensionlab::{FractionalOrder, Potential, ProfileGrid, Tails};

fn main() -> tensionlab::Result<()> {
    let grid = ProfileGrid::new(-20.0, 20.0, 1024)?;
    let spec = FunctionalSpec::new(
        Family::PhaseFractional,
        Potential::quartic(),
        FractionalOrder { k: 1, s: 0.5 },
        1.0,
        grid,
    )
    .with_mode(DomainMode::FullLine);
    let tails = Tails::constant(-1.0, 1.0);
    let start = init_profile(ProfileKind::LinearRamp, grid, tails, &ProfileParams {
        width: Some(4.0),
        ..ProfileParams::default()
    })?;

    let result = minimize(&spec, &start, &SolverOptions::default())?;
    println!(
        "energy {:.10} after {} iterations ({:?}, converged {})",
        result.energy,
        result.iterations(),
        result.reason,
        result.converged
    );
    for t in result.trace.iter().step_by((result.trace.len() / 8).max(1)) {
        println!("  it {:>4}  E {:.10}  |g| {:.2e}", t.iteration, t.energy, t.grad_norm);
    }
    let counts = count_transitions(&result.profile, &Default::default());
    println!("transitions {} (outer {}/{})", counts.inner, counts.outer_upper, counts.outer_lower);
    Ok(())
}
