//! Discrete Gagliardo seminorm of a Gaussian: kernel coefficients, the
//! FFT product against the direct double sum, and convergence in N.
//!
//! cargo run --example seminorm

use tensionlab::{GridFunction, KernelMatrix, ProfileGrid, Tails};

fn main() -> tensionlab::Result<()> {
    let s = 0.75;
    let gauss = |x: f64| (-x * x).exp();

    let grid = ProfileGrid::new(-8.0, 8.0, 64)?;
    let km = KernelMatrix::new(grid, s)?;
    let coeffs: Vec<String> = (0..6).map(|d| format!("{:.4e}", km.coefficient(d))).collect();
    println!("first coefficients at N = 64: {}", coeffs.join(" "));
    let v = GridFunction::from_fn(grid, Tails::constant(0.0, 0.0), gauss)?;
    println!("fast {:.12}  direct {:.12}", km.seminorm(&v)?, km.seminorm_direct(&v)?);

    // value of the continuous double integral at s = 3/4
    let exact = 7.205_054_146_784_018;
    println!("\n{:>6} {:>16} {:>10}", "N", "Q_s", "error");
    for n in [128, 256, 512, 1024, 2048] {
        let grid = ProfileGrid::new(-8.0, 8.0, n)?;
        let v = GridFunction::from_fn(grid, Tails::constant(0.0, 0.0), gauss)?;
        let q = KernelMatrix::new(grid, s)?.seminorm(&v)?;
        println!("{n:>6} {q:>16.12} {:>10.2e}", (q - exact).abs());
    }
    Ok(())
}
