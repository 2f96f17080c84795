//! The critical exponent s = 1/2: (2s-1) m_s along s ↓ 1/2 with the
//! available fit models, and optionally the logarithmic ε-sweep route.
//!
//! cargo run --example half_exponent [-- --eps-route]

use tensionlab::experiments::{
    extrapolate_with, half_eps_config, half_eps_route, s_sweep, FitModel, SweepKind,
};
use tensionlab::tension::{TensionKind, TensionProblem};

fn main() -> tensionlab::Result<()> {
    let s_list = SweepKind::ToHalf.default_s_list();
    let template = TensionProblem::new(TensionKind::MKs, 0, 0.75);
    let record = s_sweep(SweepKind::ToHalf, 0, &s_list, &template)?;
    println!("{:>6} {:>12} {:>10}", "s", "(2s-1)m_s", "converged");
    for row in &record.rows {
        println!("{:>6} {:>12.6} {:>10}", row.param, row.energy, row.converged);
    }
    for model in [FitModel::Affine, FitModel::Quadratic, FitModel::GapLog] {
        let fit = extrapolate_with(&record, model, None)?;
        println!("{:>9}: limit {:.4} (residual {:.1e})", model.name(), fit.limit, fit.residual);
    }

    if std::env::args().any(|a| a == "--eps-route") {
        let (eps_record, fit) = half_eps_route(&half_eps_config(), 3)?;
        println!("\nε-route on {} cells", half_eps_config().cells);
        for row in &eps_record.rows {
            println!("ε = {:<12} E = {:.6} transitions {}", row.param, row.energy, row.inner_transitions);
        }
        println!("fit in 1/|log ε| over the last 3 rows: {:.4}", fit.limit);
    }
    Ok(())
}
