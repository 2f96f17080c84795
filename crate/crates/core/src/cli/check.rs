//! Invariant suite behind the `check` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{scaling_identity_check, DomainMode, Family, Functional, FunctionalSpec};
use crate::error::Result;
use crate::grid::{GridFunction, ProfileGrid, Tails};
use crate::kernel::{FractionalOrder, KernelMatrix};
use crate::potential::Potential;
use crate::tension::hermite_energy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckRow {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CheckRow {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    fn from_result(name: impl Into<String>, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => CheckRow::new(name, passed, detail),
            Err(e) => CheckRow::new(name, false, e.to_string()),
        }
    }
}

/// Representative functional of each family on `(-3, 3)`.
pub fn sample_spec(family: Family, cells: usize, mode: DomainMode) -> Result<FunctionalSpec> {
    let grid = ProfileGrid::new(-3.0, 3.0, cells)?;
    let (potential, order) = match family {
        Family::PhaseFractional => (Potential::quartic(), FractionalOrder { k: 1, s: 0.6 }),
        Family::PhaseInteger => (Potential::quartic(), FractionalOrder { k: 2, s: 0.0 }),
        Family::PhaseHalf => (Potential::quartic(), FractionalOrder { k: 0, s: 0.5 }),
        Family::FdInteger => (Potential::truncated_quadratic(), FractionalOrder { k: 2, s: 0.0 }),
        Family::FdFractional => (Potential::truncated_quadratic(), FractionalOrder { k: 1, s: 0.4 }),
    };
    Ok(FunctionalSpec::new(family, potential, order, 0.3, grid).with_mode(mode))
}

/// Random admissible profile for [`sample_spec`].
pub fn sample_profile(spec: &FunctionalSpec, seed: u64) -> Result<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tails = match (spec.domain_mode, spec.family) {
        (DomainMode::Bounded, _) => Tails::None,
        // unequal tails cost infinite energy at s = 1/2
        (DomainMode::FullLine, Family::PhaseHalf) => Tails::constant(0.8, 0.8),
        (DomainMode::FullLine, f) if f.is_phase() => Tails::constant(-1.0, 1.0),
        (DomainMode::FullLine, _) => Tails::constant(0.0, 1.0),
    };
    let fd = !spec.family.is_phase();
    let values = spec
        .grid
        .centers()
        .into_iter()
        .map(|x| {
            let base = if fd { 0.5 + 0.2 * x } else { x.tanh() };
            base + 0.3 * rng.gen_range(-1.0..1.0)
        })
        .collect();
    GridFunction::new(spec.grid, values, tails)
}

/// Relative sup error between analytic and central-difference partials at
/// `samples` random coordinates.
pub fn gradient_error(spec: &FunctionalSpec, v: &GridFunction, samples: usize, seed: u64) -> Result<f64> {
    let f = Functional::new(spec.clone())?;
    let (_, g) = f.value_and_gradient(&v.values, v.tails)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for _ in 0..samples {
        let i = rng.gen_range(0..v.values.len());
        let step = 1e-6 * v.values[i].abs().max(1.0);
        let mut plus = v.values.clone();
        plus[i] += step;
        let mut minus = v.values.clone();
        minus[i] -= step;
        let (ep, _) = f.value_and_gradient(&plus, v.tails)?;
        let (em, _) = f.value_and_gradient(&minus, v.tails)?;
        let fd = (ep - em) / (2.0 * step);
        err = err.max((fd - g[i]).abs());
        scale = scale.max(g[i].abs());
    }
    Ok(err / scale.max(f64::MIN_POSITIVE))
}

fn gradient_rows() -> Vec<CheckRow> {
    let mut rows = Vec::new();
    for mode in [DomainMode::Bounded, DomainMode::FullLine] {
        for (j, family) in Family::ALL.into_iter().enumerate() {
            let name = format!("gradient {} ({mode:?})", family.name());
            let r = sample_spec(family, 64, mode).and_then(|spec| {
                let v = sample_profile(&spec, 11 + j as u64)?;
                let e = gradient_error(&spec, &v, 20, 3 + j as u64)?;
                Ok((e <= 1e-6, format!("relative error {e:.2e}")))
            });
            rows.push(CheckRow::from_result(name, r));
        }
    }
    rows
}

fn scaling_rows() -> Vec<CheckRow> {
    let mut rows = Vec::new();
    for (k, s) in [(0usize, 0.75), (1, 0.6)] {
        for eps in [1.0, 0.25] {
            let name = format!("scaling identity k={k} s={s} eps={eps}");
            let r = (|| {
                let grid = ProfileGrid::new(0.0, 1.0, 256)?;
                let spec = FunctionalSpec::new(
                    Family::PhaseFractional,
                    Potential::quartic(),
                    FractionalOrder { k, s },
                    eps,
                    grid,
                );
                let mut rng = ChaCha8Rng::seed_from_u64(7);
                let u = GridFunction::new(grid, (0..256).map(|_| rng.gen_range(-1.5..1.5)).collect(), Tails::None)?;
                let (lhs, rhs) = scaling_identity_check(&spec, &u)?;
                let rel = (lhs - rhs).abs() / lhs.abs();
                Ok((rel <= 1e-12, format!("relative gap {rel:.2e}")))
            })();
            rows.push(CheckRow::from_result(name, r));
        }
    }
    rows
}

fn kernel_rows() -> Vec<CheckRow> {
    let mut rows = Vec::new();
    for s in [0.25, 0.5, 0.75] {
        let r = (|| {
            let grid = ProfileGrid::new(0.0, 1.0, 48)?;
            let km = KernelMatrix::new(grid, s)?;
            let dense = km.to_dense();
            let asym = (&dense - dense.transpose()).amax();
            let coeffs: Vec<f64> = (2..48).map(|d| km.coefficient(d)).collect();
            let positive = coeffs.iter().all(|c| *c > 0.0);
            let decreasing = coeffs.windows(2).all(|w| w[1] < w[0]);
            let v = GridFunction::from_fn(grid, Tails::constant(0.0, 0.0), |x| (std::f64::consts::PI * x).sin().powi(2))?;
            let fast = km.seminorm(&v)?;
            let direct = km.seminorm_direct(&v)?;
            let agree = (fast - direct).abs() <= 1e-10 * direct.abs();
            Ok((
                asym == 0.0 && positive && decreasing && agree,
                format!("asymmetry {asym:.1e}, positive {positive}, decreasing {decreasing}, fast/direct {agree}"),
            ))
        })();
        rows.push(CheckRow::from_result(format!("kernel s={s}"), r));
    }
    rows
}

fn potential_rows() -> Vec<CheckRow> {
    let quartic = Potential::quartic().validate();
    let truncated = Potential::truncated_quadratic().validate();
    vec![
        CheckRow::new(
            "potential quartic",
            quartic.is_double_well(),
            format!("double well {}", quartic.is_double_well()),
        ),
        CheckRow::new(
            "potential truncated-quadratic",
            truncated.nonnegative(),
            format!("nonnegative {}", truncated.nonnegative()),
        ),
    ]
}

fn hermite_rows() -> Vec<CheckRow> {
    [(1usize, 1.0), (2, 12.0), (3, 720.0)]
        .into_iter()
        .map(|(k, c)| {
            let e = hermite_energy(k);
            CheckRow::new(
                format!("hermite c_{k}"),
                (e - c).abs() <= 1e-9 * c,
                format!("{e} vs {c}"),
            )
        })
        .collect()
}

/// Runs every invariant.
pub fn run_checks() -> Vec<CheckRow> {
    let mut rows = gradient_rows();
    rows.extend(scaling_rows());
    rows.extend(kernel_rows());
    rows.extend(potential_rows());
    rows.extend(hermite_rows());
    rows
}

/// Fixed-width pass/fail table.
pub fn format_table(rows: &[CheckRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for r in rows {
        let mark = if r.passed { "PASS" } else { "FAIL" };
        out.push_str(&format!("{mark}  {:width$}  {}\n", r.name, r.detail));
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    out.push_str(&format!("{} checks, {failed} failed\n", rows.len()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_invariants_pass() {
        let rows = run_checks();
        assert!(rows.iter().all(|r| r.passed), "{}", format_table(&rows));
        assert!(rows.len() >= 20);
    }
}
