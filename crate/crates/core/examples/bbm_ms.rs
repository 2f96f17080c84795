//! Continuity of the surface tension at the ends of the fractional range:
//! BBM scaling as s → 1 and MS scaling as s → 0, plus the pointwise
//! seminorm limits behind them.
//!
//! cargo run --example bbm_ms

use tensionlab::experiments::{
    bbm_default_profile, bump, extrapolate, pointwise_bbm_check, pointwise_ms_check, s_sweep, SweepKind,
};
use tensionlab::tension::{TensionKind, TensionProblem};
use tensionlab::ProfileGrid;

fn main() -> tensionlab::Result<()> {
    let template = TensionProblem::new(TensionKind::MKs, 1, 0.75);
    for kind in [SweepKind::BbmLeft, SweepKind::MsRight] {
        let record = s_sweep(kind, 1, &kind.default_s_list(), &template)?;
        println!("{}", kind.name());
        for row in &record.rows {
            println!("  s = {:<6} m = {:.6}", row.param, row.energy);
        }
        let fit = extrapolate(&record)?;
        println!("  extrapolated {:.5} (8/3 = {:.5})", fit.limit, 8.0 / 3.0);
    }

    let tanh = bbm_default_profile(4096, 1.0)?;
    println!("\n(1-s) Q_s(tanh) against ∫|v'|^2");
    for r in pointwise_bbm_check(&tanh, &[0.9, 0.95, 0.99])? {
        println!("  s = {:<5} {:.6} vs {:.6}", r.s, r.scaled, r.target);
    }
    let b = bump(ProfileGrid::new(-2.0, 2.0, 2048)?, &[0.0])?;
    println!("s Q_s(bump) against 2∫|v|^2");
    for r in pointwise_ms_check(&b, &[0.1, 0.05, 0.02])? {
        println!("  s = {:<5} {:.6} vs {:.6}", r.s, r.scaled, r.target);
    }
    Ok(())
}
