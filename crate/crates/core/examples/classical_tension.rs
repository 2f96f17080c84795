//! Surface tension of the classical and higher-order phase-field energies,
//! compared with the equipartition value for k = 1.
//!
//! cargo run --example classical_tension

use tensionlab::tension::{equipartition_reference, solve_profile, TensionKind, TensionProblem};
use tensionlab::Potential;

fn main() -> tensionlab::Result<()> {
    let reference = equipartition_reference(&Potential::quartic())?;
    println!("equipartition value 2∫√W = {reference:.8}");
    for k in 1..=3 {
        let r = solve_profile(&TensionProblem::new(TensionKind::MKInteger, k, 0.0))?;
        println!(
            "k={k}: m = {:.8}  (T {}, N {}, converged {})",
            r.value, r.t_final, r.n_final, r.converged
        );
        for step in &r.history {
            println!("    T {:>6} N {:>6} value {:.10}", step.t, step.n, step.value);
        }
    }
    Ok(())
}
