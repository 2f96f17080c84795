//! Jump-energy constants of the free-discontinuity families: the integer
//! orders against the clamped Hermite formula, and the fractional one for
//! a few jump sizes.
//!
//! cargo run --example jump_constants

use tensionlab::tension::{fd_jump_energy, hermite_reference, solve_profile, TensionKind, TensionProblem};

fn main() -> tensionlab::Result<()> {
    println!("{:>3} {:>14} {:>14} {:>10}", "k", "computed", "hermite", "rel");
    for k in 2..=4 {
        let r = solve_profile(&TensionProblem::new(TensionKind::FdMK, k, 0.0))?;
        let h = hermite_reference(k, 1.0)?;
        println!("{k:>3} {:>14.8} {h:>14.8} {:>10.2e}", r.value, (r.value - h).abs() / h);
    }

    let s = 0.5;
    let p = TensionProblem::new(TensionKind::FdM1s, 1, s);
    println!("\nfractional jump energy, s = {s}; expected growth δ^{:.4}", 1.0 / (1.0 + s));
    for delta in [0.25, 1.0, 4.0, 16.0] {
        let e = fd_jump_energy(&p, delta)?;
        println!("δ = {delta:>5}: E = {e:.8}, E/δ^(1/(1+s)) = {:.8}", e / delta.powf(1.0 / (1.0 + s)));
    }
    Ok(())
}
