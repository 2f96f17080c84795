//! Discrete energy families with analytic gradients.
//!
//! Phase families (`v` is the order parameter):
//!
//! ```text
//! phase-fractional  (1/ε) h ΣW(v) + ε^{2(k+s)-1} c_s Q_s(D^k v)
//! phase-integer     (1/ε) h ΣW(v) + ε^{2k-1} h Σ|D^k v|^2
//! phase-half        (1/(ε|log ε|)) h ΣW(v) + Q_{1/2}(v) / |log ε|
//! ```
//!
//! Free-discontinuity families (`u` is the unknown, its slope is the phase):
//!
//! ```text
//! fd-integer        h Σ min{|u'|^2, 1/ε} + ε^{2k-1} h Σ|D^k u|^2
//! fd-fractional     h Σ min{|u'|^2, 1/ε} + ε^{2s+1} c_s Q_s(u')
//! ```
//!
//! `Q_s` is the discrete Gagliardo form of [`crate::kernel`] and `c_s` the
//! chosen [`ScalingVariant`]. In bounded mode the function lives on the grid
//! only; in full-line mode it is extended by its constant tails and the
//! interactions with the tails are included.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    blowup, derivative_grid, differences, differences_adjoint, GridFunction, PinMask,
    ProfileGrid, Tails,
};
use crate::kernel::{scale_factor, FractionalOrder, KernelMatrix, ScalingVariant};
use crate::potential::Potential;
use crate::precond::{BandCholesky, Preconditioner, ToeplitzInverse};

/// Largest free block factored densely for nonlocal families.
const DENSE_LIMIT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    PhaseFractional,
    PhaseInteger,
    PhaseHalf,
    FdInteger,
    FdFractional,
}

impl Family {
    pub fn is_phase(&self) -> bool {
        matches!(
            self,
            Family::PhaseFractional | Family::PhaseInteger | Family::PhaseHalf
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::PhaseFractional => "phase-fractional",
            Family::PhaseInteger => "phase-integer",
            Family::PhaseHalf => "phase-half",
            Family::FdInteger => "fd-integer",
            Family::FdFractional => "fd-fractional",
        }
    }

    pub const ALL: [Family; 5] = [
        Family::PhaseFractional,
        Family::PhaseInteger,
        Family::PhaseHalf,
        Family::FdInteger,
        Family::FdFractional,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DomainMode {
    #[default]
    Bounded,
    FullLine,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSpec {
    pub family: Family,
    pub potential: Potential,
    pub order: FractionalOrder,
    pub eps: f64,
    pub grid: ProfileGrid,
    #[serde(default)]
    pub domain_mode: DomainMode,
    #[serde(default)]
    pub scaling: ScalingVariant,
    #[serde(default)]
    pub pins: PinMask,
    /// When false the fd families keep only the perturbation term; this is
    /// the inner problem of the jump-energy constants.
    #[serde(default = "yes")]
    pub include_bulk: bool,
}

impl FunctionalSpec {
    /// Bounded mode, no pins, bulk included; log scaling for `phase-half`.
    pub fn new(
        family: Family,
        potential: Potential,
        order: FractionalOrder,
        eps: f64,
        grid: ProfileGrid,
    ) -> Self {
        let scaling = if family == Family::PhaseHalf {
            ScalingVariant::Log
        } else {
            ScalingVariant::None
        };
        FunctionalSpec {
            family,
            potential,
            order,
            eps,
            grid,
            domain_mode: DomainMode::Bounded,
            scaling,
            pins: PinMask::none(),
            include_bulk: true,
        }
    }

    pub fn with_mode(mut self, mode: DomainMode) -> Self {
        self.domain_mode = mode;
        self
    }

    pub fn with_scaling(mut self, scaling: ScalingVariant) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn with_pins(mut self, pins: PinMask) -> Self {
        self.pins = pins;
        self
    }

    pub fn without_bulk(mut self) -> Self {
        self.include_bulk = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let FractionalOrder { k, s } = self.order;
        let spec_err = |m: String| Err(Error::Spec(m));
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Domain(format!("ε must be positive, got {}", self.eps)));
        }
        if !(0.0..1.0).contains(&s) {
            return Err(Error::Domain(format!("s must lie in [0, 1), got {s}")));
        }
        match self.family {
            Family::PhaseFractional => {
                if s == 0.0 {
                    return spec_err("phase-fractional needs s in (0, 1)".into());
                }
                if self.scaling == ScalingVariant::Log {
                    return spec_err("log scaling belongs to phase-half".into());
                }
            }
            Family::PhaseInteger => {
                if s != 0.0 || k == 0 {
                    return spec_err(format!("phase-integer needs s = 0 and k >= 1, got ({k}, {s})"));
                }
            }
            Family::PhaseHalf => {
                if k != 0 || s != 0.5 || self.scaling != ScalingVariant::Log {
                    return spec_err("phase-half needs k = 0, s = 1/2 and log scaling".into());
                }
                if self.eps >= 1.0 {
                    return Err(Error::Domain("phase-half needs ε < 1".into()));
                }
            }
            Family::FdInteger => {
                if s != 0.0 || k < 2 {
                    return spec_err(format!("fd-integer needs s = 0 and k >= 2, got ({k}, {s})"));
                }
                if !matches!(self.potential, Potential::TruncatedQuadratic { .. }) {
                    return spec_err("fd-integer uses the truncated-quadratic potential".into());
                }
            }
            Family::FdFractional => {
                if k != 1 || s == 0.0 {
                    return spec_err(format!("fd-fractional needs k = 1 and s in (0, 1), got ({k}, {s})"));
                }
                if self.scaling == ScalingVariant::Log {
                    return spec_err("log scaling belongs to phase-half".into());
                }
            }
        }
        let order = self.perturbation_order();
        let needed = match self.domain_mode {
            DomainMode::Bounded => order + 1,
            DomainMode::FullLine => 1,
        };
        if self.grid.n < needed.max(2) {
            return Err(Error::GridTooCoarse {
                cells: self.grid.n,
                order,
            });
        }
        for &(i, _) in self.pins.pins() {
            if i >= self.grid.n {
                return Err(Error::Grid(format!("pin {i} outside the grid")));
            }
        }
        Ok(())
    }

    /// Order of the derivative entering the perturbation term.
    pub fn perturbation_order(&self) -> usize {
        match self.family {
            Family::PhaseHalf => 0,
            Family::FdFractional => 1,
            _ => self.order.k,
        }
    }

    fn is_nonlocal(&self) -> bool {
        matches!(
            self.family,
            Family::PhaseFractional | Family::PhaseHalf | Family::FdFractional
        )
    }
}

#[derive(Debug, Clone)]
enum Bulk {
    Potential { coeff: f64 },
    /// `h Σ min{u'^2, cap}`.
    Truncated { cap: f64 },
    Off,
}

/// A [`FunctionalSpec`] with its kernel and coefficients assembled, ready for
/// repeated evaluation.
#[derive(Debug, Clone)]
pub struct Functional {
    spec: FunctionalSpec,
    bulk: Bulk,
    order: usize,
    coeff: f64,
    kernel: Option<KernelMatrix>,
}

impl Functional {
    pub fn new(spec: FunctionalSpec) -> Result<Self> {
        spec.validate()?;
        let FractionalOrder { k, s } = spec.order;
        let eps = spec.eps;
        let bulk = match spec.family {
            _ if !spec.family.is_phase() && !spec.include_bulk => Bulk::Off,
            Family::PhaseHalf => Bulk::Potential {
                coeff: 1.0 / (eps * eps.ln().abs()),
            },
            Family::PhaseFractional | Family::PhaseInteger => Bulk::Potential { coeff: 1.0 / eps },
            Family::FdInteger | Family::FdFractional => Bulk::Truncated { cap: 1.0 / eps },
        };
        let coeff = match spec.family {
            Family::PhaseFractional => {
                eps.powf(2.0 * (k as f64 + s) - 1.0) * scale_factor(spec.scaling, s, eps)?
            }
            Family::PhaseInteger | Family::FdInteger => eps.powi(2 * k as i32 - 1),
            Family::PhaseHalf => scale_factor(ScalingVariant::Log, s, eps)?,
            Family::FdFractional => eps.powf(2.0 * s + 1.0) * scale_factor(spec.scaling, s, eps)?,
        };
        let order = spec.perturbation_order();
        let kernel = if spec.is_nonlocal() {
            let marker = match spec.domain_mode {
                DomainMode::FullLine => Tails::constant(0.0, 0.0),
                DomainMode::Bounded => Tails::None,
            };
            let grid = derivative_grid(&spec.grid, marker, order)?;
            Some(KernelMatrix::new(grid, s)?)
        } else {
            None
        };
        Ok(Functional {
            spec,
            bulk,
            order,
            coeff,
            kernel,
        })
    }

    pub fn spec(&self) -> &FunctionalSpec {
        &self.spec
    }

    pub fn kernel(&self) -> Option<&KernelMatrix> {
        self.kernel.as_ref()
    }

    /// Multiplier of the perturbation term.
    pub fn perturbation_coefficient(&self) -> f64 {
        self.coeff
    }

    fn effective_tails(&self, tails: Tails) -> Result<Tails> {
        match self.spec.domain_mode {
            DomainMode::Bounded => Ok(Tails::None),
            DomainMode::FullLine if tails.is_constant() => Ok(tails),
            DomainMode::FullLine => Err(Error::Spec(
                "full-line mode needs constant tails on the candidate".into(),
            )),
        }
    }

    fn check_grid(&self, v: &GridFunction) -> Result<()> {
        let (g, s) = (&v.grid, &self.spec.grid);
        let tol = 1e-12 * (s.b - s.a);
        if g.n != s.n || (g.a - s.a).abs() > tol || (g.b - s.b).abs() > tol {
            return Err(Error::Grid(format!(
                "function grid ({}, {}; {}) does not match the functional ({}, {}; {})",
                g.a, g.b, g.n, s.a, s.b, s.n
            )));
        }
        Ok(())
    }

    /// Energy and its unprojected gradient at raw core values.
    pub fn value_and_gradient(&self, values: &[f64], tails: Tails) -> Result<(f64, Vec<f64>)> {
        let n = self.spec.grid.n;
        if values.len() != n {
            return Err(Error::Grid(format!("{} values for {n} cells", values.len())));
        }
        let tails = self.effective_tails(tails)?;
        let h = self.spec.grid.h();
        let mut energy = 0.0;
        let mut grad = vec![0.0; n];

        match self.bulk {
            Bulk::Potential { coeff } => {
                let w = &self.spec.potential;
                for (g, &v) in grad.iter_mut().zip(values) {
                    energy += coeff * h * w.value(v);
                    *g += coeff * h * w.slope(v);
                }
            }
            Bulk::Truncated { cap } => {
                let d = differences(values, tails, 1);
                let mut gd = vec![0.0; d.len()];
                for (g, &dj) in gd.iter_mut().zip(&d) {
                    let slope = dj / h;
                    let sq = slope * slope;
                    // tie at the kink goes to the plateau
                    if sq < cap {
                        energy += h * sq;
                        *g = 2.0 * slope;
                    } else {
                        energy += h * cap;
                    }
                }
                for (g, a) in grad.iter_mut().zip(differences_adjoint(&gd, tails, 1, n)) {
                    *g += a;
                }
            }
            Bulk::Off => {}
        }

        let k = self.order;
        let inv = h.powi(-(k as i32));
        let w: Vec<f64> = differences(values, tails, k).iter().map(|d| d * inv).collect();
        let gw: Vec<f64> = match &self.kernel {
            None => {
                energy += self.coeff * h * w.iter().map(|x| x * x).sum::<f64>();
                w.iter().map(|x| 2.0 * self.coeff * h * x * inv).collect()
            }
            Some(kernel) => {
                let wt = match tails {
                    Tails::Constant { .. } if k >= 1 => Tails::constant(0.0, 0.0),
                    t => t,
                };
                let (q, gq) = kernel.evaluate(&w, wt)?;
                energy += self.coeff * q;
                gq.iter().map(|x| self.coeff * x * inv).collect()
            }
        };
        for (g, a) in grad.iter_mut().zip(differences_adjoint(&gw, tails, k, n)) {
            *g += a;
        }
        if !energy.is_finite() {
            return Err(Error::InfiniteEnergy(format!("energy evaluated to {energy}")));
        }
        Ok((energy, grad))
    }

    pub fn energy(&self, v: &GridFunction) -> Result<f64> {
        self.check_grid(v)?;
        self.value_and_gradient(&v.values, v.tails).map(|(e, _)| e)
    }

    /// Gradient with respect to the unpinned values; pinned entries are 0.
    pub fn gradient(&self, v: &GridFunction) -> Result<GridFunction> {
        self.check_grid(v)?;
        let (_, mut g) = self.value_and_gradient(&v.values, v.tails)?;
        for &(i, _) in self.spec.pins.pins() {
            g[i] = 0.0;
        }
        Ok(GridFunction {
            grid: v.grid,
            values: g,
            tails: Tails::None,
        })
    }

    /// Curvature used for the potential part of the preconditioner.
    fn bulk_curvature(&self) -> f64 {
        match self.bulk {
            Bulk::Potential { coeff } => {
                let c = self
                    .spec
                    .potential
                    .well_curvature()
                    .map(|(l, r)| l.max(r))
                    .unwrap_or(2.0);
                coeff * self.spec.grid.h() * c.max(1e-3)
            }
            _ => 0.0,
        }
    }

    /// SPD approximation of the Hessian restricted to `free`, factored.
    /// Exact for the quadratic fd inner problems.
    pub fn preconditioner(&self, free: &[usize]) -> Preconditioner {
        let n = self.spec.grid.n;
        if free.is_empty() {
            return Preconditioner::Identity;
        }
        let h = self.spec.grid.h();
        let full_line = self.spec.domain_mode == DomainMode::FullLine;
        let shift = self.bulk_curvature();
        let truncated = matches!(self.bulk, Bulk::Truncated { .. });
        let k = self.order;
        match &self.kernel {
            None => {
                let pert = 2.0 * self.coeff * h * h.powi(-2 * k as i32);
                let w = k.max(truncated as usize);
                let entry = |i: usize, j: usize| -> f64 {
                    let mut a = pert * gram(i, j, k, n, full_line);
                    if truncated {
                        a += 2.0 / h * gram(i, j, 1, n, full_line);
                    }
                    if i == j {
                        a += shift;
                    }
                    a
                };
                let lower = |a: usize, b: usize| {
                    let (i, j) = (free[a], free[b]);
                    if i - j <= w {
                        entry(i, j)
                    } else {
                        0.0
                    }
                };
                BandCholesky::new(free.len(), w, lower)
                    .map(Preconditioner::Band)
                    .unwrap_or(Preconditioner::Identity)
            }
            Some(kernel) => {
                let contiguous = free.windows(2).all(|w| w[1] == w[0] + 1);
                let small = free.len() <= DENSE_LIMIT;
                if small && (!full_line || !contiguous) {
                    self.dense_preconditioner(kernel, free)
                } else if contiguous {
                    self.toeplitz_preconditioner(free.len())
                } else {
                    Preconditioner::Identity
                }
            }
        }
    }

    /// Dense Hessian of the quadratic part plus the bulk shift.
    fn dense_preconditioner(&self, kernel: &KernelMatrix, free: &[usize]) -> Preconditioner {
        let n = self.spec.grid.n;
        let h = self.spec.grid.h();
        let full_line = self.spec.domain_mode == DomainMode::FullLine;
        let shift = self.bulk_curvature();
        let truncated = matches!(self.bulk, Bulk::Truncated { .. });
        let k = self.order;
        let hw = kernel.hessian(full_line) * self.coeff;
        let m = hw.nrows();
        // A = D^T H D / h^{2k} with D the difference operator (m x n)
        let tails = if full_line {
            Tails::constant(0.0, 0.0)
        } else {
            Tails::None
        };
        let mut hd = DMatrix::zeros(m, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = differences(&e, tails, k);
            for (r, &c) in col.iter().enumerate() {
                if c != 0.0 {
                    for i in 0..m {
                        hd[(i, j)] += hw[(i, r)] * c;
                    }
                }
            }
        }
        let scale = h.powi(-2 * k as i32);
        let mut a = DMatrix::zeros(free.len(), free.len());
        for (b, &j) in free.iter().enumerate() {
            let col: Vec<f64> = hd.column(j).iter().copied().collect();
            let back = differences_adjoint(&col, tails, k, n);
            for (a_row, &i) in free.iter().enumerate() {
                a[(a_row, b)] = back[i] * scale;
            }
        }
        for (ia, &i) in free.iter().enumerate() {
            a[(ia, ia)] += shift;
            if truncated {
                for (jb, &j) in free.iter().enumerate() {
                    if i.abs_diff(j) <= 1 {
                        a[(ia, jb)] += 2.0 / h * gram(i.max(j), i.min(j), 1, n, full_line);
                    }
                }
            }
        }
        a = (&a + a.transpose()) * 0.5;
        Preconditioner::dense(a).unwrap_or(Preconditioner::Identity)
    }

    /// Toeplitz operator of the quadratic part with zero exterior, plus the
    /// bulk shift. Exact on a contiguous free block in full-line mode.
    fn toeplitz_preconditioner(&self, m: usize) -> Preconditioner {
        let n = self.spec.grid.n;
        let h = self.spec.grid.h();
        let k = self.order;
        let zero = Tails::constant(0.0, 0.0);
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        let inv = h.powi(-(k as i32));
        let w: Vec<f64> = differences(&e, zero, k).iter().map(|d| d * inv).collect();
        let Some(kernel) = &self.kernel else {
            return Preconditioner::Identity;
        };
        let Ok((_, gq)) = kernel.evaluate(&w, zero) else {
            return Preconditioner::Identity;
        };
        let gw: Vec<f64> = gq.iter().map(|x| self.coeff * x * inv).collect();
        let mut col = differences_adjoint(&gw, zero, k, n);
        col.truncate(m);
        col[0] += self.bulk_curvature();
        if matches!(self.bulk, Bulk::Truncated { .. }) {
            col[0] += 4.0 / h;
            if m > 1 {
                col[1] -= 2.0 / h;
            }
        }
        ToeplitzInverse::new(&col)
            .map(|t| Preconditioner::Toeplitz(std::sync::Arc::new(t)))
            .unwrap_or(Preconditioner::Identity)
    }
}

/// `(D^T D)_{ij}` for the `k`-th difference operator on `n` core values, with
/// tail padding in full-line mode. Requires `i >= j`.
fn gram(i: usize, j: usize, k: usize, n: usize, full_line: bool) -> f64 {
    if k == 0 {
        return if i == j { 1.0 } else { 0.0 };
    }
    let c = |t: i64| -> f64 {
        if !(0..=k as i64).contains(&t) {
            return 0.0;
        }
        let t = t as usize;
        let b = (0..t).fold(1.0, |acc, q| acc * (k - q) as f64 / (q + 1) as f64);
        if (k - t) % 2 == 0 {
            b
        } else {
            -b
        }
    };
    let (pad, rows) = if full_line { (k as i64, n + k) } else { (0, n - k) };
    // row r of D touches padded positions r..=r+k
    let (pi, pj) = (i as i64 + pad, j as i64 + pad);
    let lo = (pi - k as i64).max(0);
    let hi = pj.min(rows as i64 - 1);
    (lo..=hi).map(|r| c(pi - r) * c(pj - r)).sum()
}

/// Builds the functional and evaluates it once.
pub fn energy(spec: &FunctionalSpec, v: &GridFunction) -> Result<f64> {
    Functional::new(spec.clone())?.energy(v)
}

/// Builds the functional and returns the projected gradient.
pub fn gradient(spec: &FunctionalSpec, v: &GridFunction) -> Result<GridFunction> {
    Functional::new(spec.clone())?.gradient(v)
}

/// Energy of `u` under the ε-functional on its grid and energy of the
/// blow-up `u(ε ·)` under the unit functional on the dilated grid.
pub fn scaling_identity_check(spec: &FunctionalSpec, u: &GridFunction) -> Result<(f64, f64)> {
    if spec.family != Family::PhaseFractional || spec.domain_mode != DomainMode::Bounded {
        return Err(Error::Spec(
            "the scaling identity is checked for bounded phase-fractional functionals".into(),
        ));
    }
    if spec.scaling == ScalingVariant::Log {
        return Err(Error::Spec("log scaling depends on ε and is not blow-up invariant".into()));
    }
    if !(spec.eps > 0.0 && spec.eps <= 1.0) {
        return Err(Error::Domain(format!("ε must lie in (0, 1], got {}", spec.eps)));
    }
    let lhs = energy(spec, u)?;
    let v = blowup(u, spec.eps)?;
    let mut unit = spec.clone();
    unit.eps = 1.0;
    unit.grid = v.grid;
    let rhs = energy(&unit, &v)?;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn order(k: usize, s: f64) -> FractionalOrder {
        FractionalOrder { k, s }
    }

    fn spec_for(family: Family, n: usize, mode: DomainMode) -> FunctionalSpec {
        let grid = ProfileGrid::new(-3.0, 3.0, n).unwrap();
        let (pot, ord) = match family {
            Family::PhaseFractional => (Potential::quartic(), order(1, 0.6)),
            Family::PhaseInteger => (Potential::quartic(), order(2, 0.0)),
            Family::PhaseHalf => (Potential::quartic(), order(0, 0.5)),
            Family::FdInteger => (Potential::truncated_quadratic(), order(2, 0.0)),
            Family::FdFractional => (Potential::truncated_quadratic(), order(1, 0.4)),
        };
        FunctionalSpec::new(family, pot, ord, 0.3, grid).with_mode(mode)
    }

    fn random_profile(spec: &FunctionalSpec, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tails = match spec.domain_mode {
            DomainMode::FullLine if spec.family.is_phase() => {
                if spec.family == Family::PhaseHalf {
                    Tails::constant(0.8, 0.8)
                } else {
                    Tails::constant(-1.0, 1.0)
                }
            }
            DomainMode::FullLine => Tails::constant(0.0, 1.0),
            DomainMode::Bounded => Tails::None,
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
        GridFunction::new(spec.grid, values, tails).unwrap()
    }

    fn check_gradient(spec: &FunctionalSpec, seed: u64) {
        let f = Functional::new(spec.clone()).unwrap();
        let v = random_profile(spec, seed);
        let g = f.gradient(&v).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let step = 1e-5;
        let mut worst: f64 = 0.0;
        let scale = g.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for _ in 0..20 {
            let i = rng.gen_range(0..v.len());
            let mut plus = v.clone();
            plus.values[i] += step;
            let mut minus = v.clone();
            minus.values[i] -= step;
            let fd = (f.energy(&plus).unwrap() - f.energy(&minus).unwrap()) / (2.0 * step);
            worst = worst.max((fd - g.values[i]).abs());
        }
        assert!(
            worst <= 1e-6 * scale,
            "{:?} {:?}: {worst} vs scale {scale}",
            spec.family,
            spec.domain_mode
        );
    }

    #[test]
    fn gradients_match_finite_differences() {
        for family in Family::ALL {
            for mode in [DomainMode::Bounded, DomainMode::FullLine] {
                check_gradient(&spec_for(family, 64, mode), 7);
            }
        }
    }

    #[test]
    fn pinned_gradient_entries_are_zero() {
        let spec = spec_for(Family::PhaseInteger, 32, DomainMode::Bounded)
            .with_pins(PinMask::boundary_layers(32, 3, -1.0, 1.0).unwrap());
        let v = random_profile(&spec, 3);
        let g = gradient(&spec, &v).unwrap();
        assert!(g.values[..3].iter().chain(&g.values[29..]).all(|&x| x == 0.0));
        assert!(g.values[10] != 0.0);
    }

    #[test]
    fn constant_profiles() {
        let grid = ProfileGrid::new(-4.0, 4.0, 64).unwrap();
        let spec = FunctionalSpec::new(
            Family::PhaseFractional,
            Potential::quartic(),
            order(0, 0.75),
            1.0,
            grid,
        )
        .with_mode(DomainMode::FullLine);
        let one = GridFunction::from_fn(grid, Tails::constant(1.0, 1.0), |_| 1.0).unwrap();
        assert_eq!(energy(&spec, &one).unwrap(), 0.0);
        // at other constants only the potential contributes to the gradient
        let c = 0.3;
        let v = GridFunction::from_fn(grid, Tails::constant(c, c), |_| c).unwrap();
        let g = gradient(&spec, &v).unwrap();
        let expected = grid.h() * Potential::quartic().slope(c);
        assert!(g.values.iter().all(|x| (x - expected).abs() < 1e-12));
    }

    #[test]
    fn tanh_energy_is_classical_constant() {
        let grid = ProfileGrid::new(-20.0, 20.0, 2048).unwrap();
        let spec = FunctionalSpec::new(
            Family::PhaseInteger,
            Potential::quartic(),
            order(1, 0.0),
            1.0,
            grid,
        );
        let v = GridFunction::from_fn(grid, Tails::None, f64::tanh).unwrap();
        let e = energy(&spec, &v).unwrap();
        assert!((e - 8.0 / 3.0).abs() < 0.02 * 8.0 / 3.0, "{e}");
    }

    #[test]
    fn affine_fd_profile_has_no_second_term() {
        let grid = ProfileGrid::new(0.0, 1.0, 50).unwrap();
        let spec = FunctionalSpec::new(
            Family::FdInteger,
            Potential::truncated_quadratic(),
            order(2, 0.0),
            0.5,
            grid,
        );
        let v = GridFunction::from_fn(grid, Tails::None, |x| 0.4 * x + 1.0).unwrap();
        let e = energy(&spec, &v).unwrap();
        let expected = 49.0 * grid.h() * 0.16;
        assert!((e - expected).abs() < 1e-13, "{e} vs {expected}");
    }

    #[test]
    fn spec_validation() {
        let grid = ProfileGrid::new(0.0, 1.0, 16).unwrap();
        let q = Potential::quartic;
        let bad = [
            FunctionalSpec::new(Family::PhaseInteger, q(), order(1, 0.5), 1.0, grid),
            FunctionalSpec::new(Family::PhaseHalf, q(), order(0, 0.6), 0.1, grid),
            FunctionalSpec::new(Family::PhaseHalf, q(), order(0, 0.5), 0.1, grid)
                .with_scaling(ScalingVariant::None),
            FunctionalSpec::new(Family::FdInteger, q(), order(2, 0.0), 0.1, grid),
            FunctionalSpec::new(Family::FdInteger, Potential::truncated_quadratic(), order(1, 0.0), 0.1, grid),
            FunctionalSpec::new(Family::FdFractional, q(), order(2, 0.5), 0.1, grid),
            FunctionalSpec::new(Family::PhaseFractional, q(), order(0, 0.0), 0.1, grid),
        ];
        for spec in bad {
            assert!(matches!(Functional::new(spec), Err(Error::Spec(_))));
        }
        let neg = FunctionalSpec::new(Family::PhaseInteger, q(), order(1, 0.0), -1.0, grid);
        assert!(matches!(Functional::new(neg), Err(Error::Domain(_))));
        // full-line needs constant tails
        let spec = FunctionalSpec::new(Family::PhaseInteger, q(), order(1, 0.0), 1.0, grid)
            .with_mode(DomainMode::FullLine);
        let v = GridFunction::from_fn(grid, Tails::None, |x| x).unwrap();
        assert!(matches!(energy(&spec, &v), Err(Error::Spec(_))));
    }

    #[test]
    fn infinite_tail_energy_propagates() {
        let grid = ProfileGrid::new(-2.0, 2.0, 32).unwrap();
        let spec = FunctionalSpec::new(
            Family::PhaseFractional,
            Potential::quartic(),
            order(0, 0.4),
            1.0,
            grid,
        )
        .with_mode(DomainMode::FullLine);
        let v = GridFunction::from_fn(grid, Tails::constant(-1.0, 1.0), f64::tanh).unwrap();
        assert!(matches!(energy(&spec, &v), Err(Error::InfiniteEnergy(_))));
    }

    #[test]
    fn scaling_identity() {
        let grid = ProfileGrid::new(0.0, 1.0, 256).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = GridFunction::new(
            grid,
            (0..256).map(|_| rng.gen_range(-1.5..1.5)).collect(),
            Tails::None,
        )
        .unwrap();
        for (k, s) in [(0, 0.75), (1, 0.6)] {
            for eps in [1.0, 0.25] {
                let spec = FunctionalSpec::new(
                    Family::PhaseFractional,
                    Potential::quartic(),
                    order(k, s),
                    eps,
                    grid,
                );
                let (a, b) = scaling_identity_check(&spec, &u).unwrap();
                if eps == 1.0 {
                    assert_eq!(a, b);
                }
                assert!((a - b).abs() <= 1e-12 * a.abs(), "k={k} s={s} ε={eps}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn gram_matches_explicit_product() {
        for full_line in [false, true] {
            for k in 1..=3 {
                let n = 12;
                let tails = if full_line { Tails::constant(0.0, 0.0) } else { Tails::None };
                for i in 0..n {
                    let mut ei = vec![0.0; n];
                    ei[i] = 1.0;
                    let di = differences(&ei, tails, k);
                    for j in 0..=i {
                        let mut ej = vec![0.0; n];
                        ej[j] = 1.0;
                        let dj = differences(&ej, tails, k);
                        let direct: f64 = di.iter().zip(&dj).map(|(a, b)| a * b).sum();
                        assert_eq!(gram(i, j, k, n, full_line), direct, "k={k} i={i} j={j}");
                    }
                }
            }
        }
    }

    #[test]
    fn preconditioner_is_exact_on_quadratic_problems() {
        // fd inner problems are quadratic; one preconditioned step solves them
        for (family, ord) in [(Family::FdInteger, order(3, 0.0)), (Family::FdFractional, order(1, 0.5))] {
            let grid = ProfileGrid::new(0.0, 2.0, 40).unwrap();
            let spec = FunctionalSpec::new(family, Potential::truncated_quadratic(), ord, 1.0, grid)
                .with_mode(DomainMode::FullLine)
                .without_bulk();
            let f = Functional::new(spec).unwrap();
            let free: Vec<usize> = (2..38).collect();
            let p = f.preconditioner(&free);
            let v = GridFunction::from_fn(grid, Tails::constant(0.0, 1.0), |x| x / 2.0).unwrap();
            let (_, g) = f.value_and_gradient(&v.values, v.tails).unwrap();
            let gf: Vec<f64> = free.iter().map(|&i| g[i]).collect();
            let step = p.solve(&gf);
            let mut x = v.values.clone();
            for (&i, d) in free.iter().zip(&step) {
                x[i] -= d;
            }
            let (_, g2) = f.value_and_gradient(&x, v.tails).unwrap();
            let res = free.iter().map(|&i| g2[i].abs()).fold(0.0, f64::max);
            let before = gf.iter().map(|x| x.abs()).fold(0.0, f64::max);
            assert!(res < 1e-8 * before, "{family:?}: {res} vs {before}");
        }
    }

    #[test]
    fn toeplitz_preconditioner_is_spd_like() {
        let grid = ProfileGrid::new(-10.0, 10.0, 1500).unwrap();
        let spec = FunctionalSpec::new(
            Family::PhaseFractional,
            Potential::quartic(),
            order(0, 0.7),
            1.0,
            grid,
        )
        .with_mode(DomainMode::FullLine);
        let f = Functional::new(spec).unwrap();
        let free: Vec<usize> = (0..1500).collect();
        let p = f.preconditioner(&free);
        assert!(matches!(p, Preconditioner::Toeplitz(_)));
        let g: Vec<f64> = (0..1500).map(|i| ((i as f64) * 0.01).sin()).collect();
        let d = p.solve(&g);
        let inner: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        assert!(inner > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn energies_are_nonnegative(seed in 0u64..1000, fam in 0usize..5, full in any::<bool>()) {
            let mode = if full { DomainMode::FullLine } else { DomainMode::Bounded };
            let spec = spec_for(Family::ALL[fam], 32, mode);
            let v = random_profile(&spec, seed);
            prop_assert!(energy(&spec, &v).unwrap() >= 0.0);
        }

        #[test]
        fn sign_flip_invariance(seed in 0u64..1000, fam in 0usize..3, full in any::<bool>()) {
            let mode = if full { DomainMode::FullLine } else { DomainMode::Bounded };
            let spec = spec_for(Family::ALL[fam], 32, mode);
            let v = random_profile(&spec, seed);
            let a = energy(&spec, &v).unwrap();
            let b = energy(&spec, &v.negated()).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn whole_cell_shift_in_full_line_mode() {
        // Shifting by one cell moves one core value into the left tail and
        // pulls one tail value into the core. The change is bounded by the
        // energy carried by those two cells.
        let grid = ProfileGrid::new(-15.0, 15.0, 300).unwrap();
        let spec = FunctionalSpec::new(
            Family::PhaseFractional,
            Potential::quartic(),
            order(0, 0.75),
            1.0,
            grid,
        )
        .with_mode(DomainMode::FullLine);
        let f = Functional::new(spec).unwrap();
        let v = GridFunction::from_fn(grid, Tails::constant(-1.0, 1.0), |x| (x + 0.3).tanh()).unwrap();
        let mut shifted = v.clone();
        shifted.values.rotate_left(1);
        *shifted.values.last_mut().unwrap() = 1.0;
        let kernel = f.kernel().unwrap();
        let h = grid.h();
        let w = Potential::quartic();
        let (first, last) = (v.values[0], v.values[299]);
        let bound = h * (w.value(first) + w.value(last))
            + 4.0 * kernel.tail_left(0) * ((first + 1.0).powi(2) + (last - 1.0).powi(2))
            + 4.0 * kernel.tail_left(0) * 4.0 * ((first + 1.0).abs() + (last - 1.0).abs());
        let diff = (f.energy(&v).unwrap() - f.energy(&shifted).unwrap()).abs();
        assert!(diff <= bound, "{diff} > {bound}");
    }
}
