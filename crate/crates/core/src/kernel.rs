//! Exact quadrature of the Gagliardo double integral
//! `∬ (w(x) - w(y))^2 / |x - y|^{1+2s} dx dy` on uniform grids.
//!
//! Cell values are read as the nodal values of the continuous piecewise-linear
//! interpolant through the cell centers (extended by the constant tails on the
//! whole line). For that interpolant the double integral is exactly
//!
//! ```text
//! Σ_{i≠j} K_{|i-j|} (w_i - w_j)^2,     K_d = h^{1-2s} κ_d(s),
//! ```
//!
//! summed over ordered pairs of all nodes, tails included. The coefficients
//! are the Hadamard finite parts of `∫ β₃(τ - d) |τ|^{-1-2s} dτ` with `β₃` the
//! centered cubic B-spline (the autocorrelation of a hat function), i.e. fourth
//! differences of the regularized antiderivative `|τ|^{3-2s} / D(s)`,
//! `D(s) = (3-2s)(2-2s)(1-2s)(-2s)`. Tail sums telescope into third
//! differences and the tail-tail interaction into a second difference, so
//! every quantity is closed form. For large arguments the differences are
//! summed from their binomial series to avoid cancellation.
//!
//! The matrix is Toeplitz, so only the generating coefficients are stored and
//! products are done by circulant embedding and FFT.

use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, ProfileGrid, Tails};

/// `|2s - 1|` below which the logarithmic branch is used.
pub const HALF_BRANCH_TOL: f64 = 1e-9;
/// Arguments at or beyond this use the series form of the differences.
const SERIES_START: i64 = 6;
/// Below this size the Toeplitz product is done directly.
const FFT_MIN: usize = 64;

/// Differentiation order `k` and fractional order `s`; `s = 0` means local.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionalOrder {
    pub k: usize,
    pub s: f64,
}

impl FractionalOrder {
    pub fn new(k: usize, s: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&s) {
            return Err(Error::Domain(format!("s must lie in [0, 1), got {s}")));
        }
        if s == 0.0 && k == 0 {
            return Err(Error::Domain("a local order needs k >= 1".into()));
        }
        Ok(FractionalOrder { k, s })
    }

    pub fn local(k: usize) -> Result<Self> {
        Self::new(k, 0.0)
    }

    pub fn is_local(&self) -> bool {
        self.s == 0.0
    }

    /// Total order `k + s`.
    pub fn total(&self) -> f64 {
        self.k as f64 + self.s
    }
}

/// Multiplicative normalizations of the nonlocal term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingVariant {
    #[default]
    None,
    /// `1 - s`.
    Bbm,
    /// `s / 2`.
    Ms,
    /// `s (1 - s) 2^{s-1}`.
    Alpha,
    /// `1 / |log ε|`.
    Log,
}

/// Factor applied to the nonlocal term.
pub fn scale_factor(variant: ScalingVariant, s: f64, eps: f64) -> Result<f64> {
    let open_unit = |x: f64| x > 0.0 && x < 1.0;
    match variant {
        ScalingVariant::None => Ok(1.0),
        ScalingVariant::Log => {
            if !open_unit(eps) {
                return Err(Error::Domain(format!("log scaling needs ε in (0, 1), got {eps}")));
            }
            Ok(1.0 / eps.ln().abs())
        }
        _ if !open_unit(s) => Err(Error::Domain(format!("scaling needs s in (0, 1), got {s}"))),
        ScalingVariant::Bbm => Ok(1.0 - s),
        ScalingVariant::Ms => Ok(0.5 * s),
        ScalingVariant::Alpha => Ok(s * (1.0 - s) * 2f64.powf(s - 1.0)),
    }
}

fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("kernel exponent needs s in (0, 1), got {s}")))
    }
}

fn is_half(s: f64) -> bool {
    (2.0 * s - 1.0).abs() < HALF_BRANCH_TOL
}

/// `(t^{1-2s} - 1) / (1 - 2s)`, continued by `ln t` at `s = 1/2`.
fn power_log(t: f64, s: f64) -> f64 {
    let e = 1.0 - 2.0 * s;
    if is_half(s) {
        t.ln()
    } else {
        (e * t.ln()).exp_m1() / e
    }
}

/// `∫_{a1}^{b1} ∫_{a2}^{b2} (y - x)^{-1-2s} dy dx` for `b1 <= a2`.
///
/// Returns `+∞` for touching cells when `s >= 1/2`, where the integral diverges.
pub fn cell_kernel(a1: f64, b1: f64, a2: f64, b2: f64, s: f64) -> Result<f64> {
    check_s(s)?;
    if !(a1 < b1 && a2 < b2) {
        return Err(Error::Domain("cells must have positive length".into()));
    }
    if b1 > a2 {
        return Err(Error::Domain(format!(
            "cells [{a1}, {b1}] and [{a2}, {b2}] overlap"
        )));
    }
    if b1 == a2 && s >= 0.5 - 0.5 * HALF_BRANCH_TOL {
        return Ok(f64::INFINITY);
    }
    // Second antiderivative of t^{-1-2s}, shifted by a constant that the
    // alternating corner sum annihilates.
    let anti = |t: f64| {
        if t == 0.0 {
            // limit of (t^{1-2s} - 1)/(1-2s) for s < 1/2
            -1.0 / (1.0 - 2.0 * s) / (-2.0 * s)
        } else {
            power_log(t, s) / (-2.0 * s)
        }
    };
    Ok(anti(a2 - b1) - anti(a2 - a1) - anti(b2 - b1) + anti(b2 - a1))
}

/// `∫_{x<0} ∫_{y>ℓ} |x - y|^{-1-2s} dy dx = ℓ^{1-2s} / (2s(2s-1))`, one
/// ordering only; infinite for `s <= 1/2`.
pub fn tail_tail_constant(s: f64, length: f64) -> Result<f64> {
    check_s(s)?;
    if !(length > 0.0) {
        return Err(Error::Domain(format!("length must be positive, got {length}")));
    }
    if s <= 0.5 || is_half(s) {
        return Ok(f64::INFINITY);
    }
    Ok(length.powf(1.0 - 2.0 * s) / (2.0 * s * (2.0 * s - 1.0)))
}

/// Regularized antiderivative `(|τ|^{3-2s} - τ^2) / D(s)`; its fourth
/// derivative is `|τ|^{-1-2s}` away from 0.
fn antiderivative(tau: f64, s: f64) -> f64 {
    if tau == 0.0 {
        return 0.0;
    }
    let p = 3.0 - 2.0 * s;
    tau * tau * power_log(tau.abs(), s) / (p * (p - 1.0) * (p - 3.0))
}

fn binomial(m: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
}

/// Forward difference `Δ^m F(n)` of `F(τ) = |τ|^{3-2s} / D(s)` for `m` in 2..=4.
fn power_difference(m: usize, n: i64, s: f64) -> f64 {
    debug_assert!((2..=4).contains(&m));
    let p = 3.0 - 2.0 * s;
    if n >= SERIES_START {
        // Σ_q a_q μ_q c^{p-q} with a_q = binom(p, q) / D(s) and μ_q the q-th
        // moment of the stencil about its center c.
        let c = n as f64 + 0.5 * m as f64;
        let moment = |q: i32| -> f64 {
            (0..=m)
                .map(|j| {
                    let sign = if (m - j) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * binomial(m, j) * (j as f64 - 0.5 * m as f64).powi(q)
                })
                .sum()
        };
        let mut a = match m {
            2 => 1.0 / (2.0 * (p - 2.0) * (p - 3.0)),
            3 => 1.0 / (6.0 * (p - 3.0)),
            _ => 1.0 / 24.0,
        };
        let mut total = 0.0;
        for q in m..120 {
            let scale = a * c.powf(p - q as f64);
            total += scale * moment(q as i32);
            // |μ_q| <= 2^m (m/2)^q bounds every later term
            let bound = (scale * 2f64.powi(m as i32) * (0.5 * m as f64).powi(q as i32)).abs();
            if q > m + 2 && bound <= 1e-17 * total.abs() {
                break;
            }
            // a_{q+1} = a_q (p - q) / (q + 1); a_2 -> a_3 -> a_4 also follow it.
            a *= (p - q as f64) / (q as f64 + 1.0);
        }
        total
    } else {
        let direct: f64 = (0..=m)
            .map(|j| {
                let sign = if (m - j) % 2 == 0 { 1.0 } else { -1.0 };
                sign * binomial(m, j) * antiderivative((n + j as i64) as f64, s)
            })
            .sum();
        if m == 2 {
            // Δ^2 τ^2 = 2
            direct + 2.0 / (p * (p - 1.0) * (p - 2.0) * (p - 3.0))
        } else {
            direct
        }
    }
}

/// Unit-spacing coefficient `κ_d`, `d >= 1`.
pub fn unit_coefficient(d: usize, s: f64) -> f64 {
    power_difference(4, d as i64 - 2, s)
}

/// `Σ_{d >= from} κ_d` for `from >= 1`.
pub fn unit_tail_sum(from: usize, s: f64) -> f64 {
    -power_difference(3, from as i64 - 2, s)
}

/// `Σ_{d > n} (d - n) κ_d`: interaction of the two tails across `n` core cells.
pub fn unit_tail_tail(n: usize, s: f64) -> f64 {
    if s <= 0.5 || is_half(s) {
        f64::INFINITY
    } else {
        power_difference(2, n as i64 - 1, s)
    }
}

/// Kernel of the discrete Gagliardo form on one uniform grid.
#[derive(Clone)]
pub struct KernelMatrix {
    grid: ProfileGrid,
    s: f64,
    /// `K_d`, index 0 unused.
    coeffs: Vec<f64>,
    /// `tails[D] = Σ_{d >= D} K_d` for `D` in `1..=n`.
    tails: Vec<f64>,
    tail_tail: f64,
    fft: Option<Arc<CirculantProduct>>,
}

impl std::fmt::Debug for KernelMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelMatrix")
            .field("grid", &self.grid)
            .field("s", &self.s)
            .field("tail_tail", &self.tail_tail)
            .finish_non_exhaustive()
    }
}

struct CirculantProduct {
    size: usize,
    spectrum: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl CirculantProduct {
    fn new(coeffs: &[f64]) -> Self {
        let n = coeffs.len();
        let size = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut spectrum = vec![Complex::new(0.0, 0.0); size];
        for d in 1..n {
            spectrum[d].re = coeffs[d];
            spectrum[size - d].re = coeffs[d];
        }
        forward.process(&mut spectrum);
        CirculantProduct {
            size,
            spectrum,
            forward,
            inverse,
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.size];
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.spectrum) {
            *b *= k;
        }
        self.inverse.process(&mut buf);
        let norm = 1.0 / self.size as f64;
        buf[..x.len()].iter().map(|c| c.re * norm).collect()
    }
}

impl KernelMatrix {
    pub fn new(grid: ProfileGrid, s: f64) -> Result<Self> {
        check_s(s)?;
        let n = grid.n;
        let scale = grid.h().powf(1.0 - 2.0 * s);
        let mut coeffs = vec![0.0; n];
        for (d, c) in coeffs.iter_mut().enumerate().skip(1) {
            *c = scale * unit_coefficient(d, s);
        }
        let mut tails = vec![0.0; n + 1];
        for (d, t) in tails.iter_mut().enumerate().skip(1) {
            *t = scale * unit_tail_sum(d, s);
        }
        let tail_tail = scale * unit_tail_tail(n, s);
        let fft = (n >= FFT_MIN).then(|| Arc::new(CirculantProduct::new(&coeffs)));
        Ok(KernelMatrix {
            grid,
            s,
            coeffs,
            tails,
            tail_tail,
            fft,
        })
    }

    pub fn grid(&self) -> &ProfileGrid {
        &self.grid
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    /// `K_d` for `1 <= d < n`.
    pub fn coefficient(&self, d: usize) -> f64 {
        self.coeffs[d]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.coeffs[i.abs_diff(j)]
        }
    }

    /// Interaction weight of core cell `i` with the whole left tail.
    pub fn tail_left(&self, i: usize) -> f64 {
        self.tails[i + 1]
    }

    /// Interaction weight of core cell `i` with the whole right tail.
    pub fn tail_right(&self, i: usize) -> f64 {
        self.tails[self.grid.n - i]
    }

    /// Interaction weight of the two tails; infinite for `s <= 1/2`.
    pub fn tail_tail(&self) -> f64 {
        self.tail_tail
    }

    /// Dense `K` (zero diagonal).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.grid.n;
        DMatrix::from_fn(n, n, |i, j| self.entry(i, j))
    }

    /// `Σ_{j ≠ i, j in core} K_{ij}`.
    fn row_sum(&self, i: usize) -> f64 {
        let prefix = |m: usize| self.tails[1] - self.tails[m + 1];
        prefix(i) + prefix(self.grid.n - 1 - i)
    }

    /// `Σ_{j ≠ i} K_{ij} x_j` over the core.
    pub fn product(&self, x: &[f64]) -> Vec<f64> {
        match &self.fft {
            Some(fft) => fft.apply(x),
            None => (0..x.len())
                .map(|i| (0..x.len()).map(|j| self.entry(i, j) * x[j]).sum())
                .collect(),
        }
    }

    fn check_compatible(&self, w: &GridFunction) -> Result<()> {
        let g = &w.grid;
        let same = g.n == self.grid.n
            && (g.h() - self.grid.h()).abs() <= 1e-12 * self.grid.h();
        if same {
            Ok(())
        } else {
            Err(Error::Grid(format!(
                "function on {} cells of width {} does not match kernel on {} cells of width {}",
                g.n,
                g.h(),
                self.grid.n,
                self.grid.h()
            )))
        }
    }

    /// Value and gradient (with respect to the core values) of the discrete
    /// seminorm. Tails contribute when constant.
    pub fn seminorm_with_gradient(&self, w: &GridFunction) -> Result<(f64, Vec<f64>)> {
        self.check_compatible(w)?;
        self.evaluate(&w.values, w.tails)
    }

    /// [`KernelMatrix::seminorm_with_gradient`] on raw core values.
    pub fn evaluate(&self, x: &[f64], tails: Tails) -> Result<(f64, Vec<f64>)> {
        let n = self.grid.n;
        if x.len() != n {
            return Err(Error::Grid(format!("{} values for a kernel on {n} cells", x.len())));
        }
        // The form only sees differences; shifting by a reference value keeps
        // constants exactly in the kernel.
        let mu = match tails {
            Tails::Constant { left, .. } => left,
            Tails::None => x.first().copied().unwrap_or(0.0),
        };
        let shifted: Vec<f64> = x.iter().map(|v| v - mu).collect();
        let x = &shifted[..];
        let tails = match tails {
            Tails::Constant { left, right } => Tails::constant(left - mu, right - mu),
            t => t,
        };
        let kx = self.product(x);
        let mut core = 0.0;
        let mut grad = vec![0.0; n];
        for i in 0..n {
            let r = self.row_sum(i);
            core += x[i] * (x[i] * r - kx[i]);
            grad[i] = 4.0 * (x[i] * r - kx[i]);
        }
        let mut value = 2.0 * core;
        if let Tails::Constant { left, right } = tails {
            let mut cross = 0.0;
            for i in 0..n {
                let (tl, tr) = (self.tail_left(i), self.tail_right(i));
                let (dl, dr) = (x[i] - left, x[i] - right);
                cross += dl * dl * tl + dr * dr * tr;
                grad[i] += 4.0 * (dl * tl + dr * tr);
            }
            value += 2.0 * cross;
            if left != right {
                if !self.tail_tail.is_finite() {
                    return Err(Error::InfiniteEnergy(format!(
                        "tails {left} and {right} differ and s = {} <= 1/2",
                        self.s
                    )));
                }
                value += 2.0 * (right - left).powi(2) * self.tail_tail;
            }
        }
        Ok((value, grad))
    }

    /// Discrete seminorm of `w` (ordered pairs, tails included when constant).
    pub fn seminorm(&self, w: &GridFunction) -> Result<f64> {
        self.seminorm_with_gradient(w).map(|(v, _)| v)
    }

    /// Same quantity by direct pairwise summation; `O(N^2)`, used as a
    /// reference for the fast path.
    pub fn seminorm_direct(&self, w: &GridFunction) -> Result<f64> {
        self.check_compatible(w)?;
        let n = self.grid.n;
        let x = &w.values;
        let mut value = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    value += self.entry(i, j) * (x[i] - x[j]).powi(2);
                }
            }
        }
        if let Tails::Constant { left, right } = w.tails {
            for i in 0..n {
                value += 2.0 * (x[i] - left).powi(2) * self.tail_left(i);
                value += 2.0 * (x[i] - right).powi(2) * self.tail_right(i);
            }
            if left != right {
                if !self.tail_tail.is_finite() {
                    return Err(Error::InfiniteEnergy("tails differ and s <= 1/2".into()));
                }
                value += 2.0 * (right - left).powi(2) * self.tail_tail;
            }
        }
        Ok(value)
    }

    /// Hessian of the seminorm with respect to the core values (dense).
    pub fn hessian(&self, constant_tails: bool) -> DMatrix<f64> {
        let n = self.grid.n;
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                let mut d = self.row_sum(i);
                if constant_tails {
                    d += self.tail_left(i) + self.tail_right(i);
                }
                4.0 * d
            } else {
                -4.0 * self.entry(i, j)
            }
        })
    }
}

/// Convenience wrapper: builds the kernel for `w.grid` and evaluates.
pub fn seminorm(w: &GridFunction, k: &KernelMatrix) -> Result<f64> {
    k.seminorm(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        quadrature::double_exponential::integrate(&f, a, b, tol).integral
    }

    fn beta3(t: f64) -> f64 {
        let t = t.abs();
        if t >= 2.0 {
            0.0
        } else if t >= 1.0 {
            (2.0 - t).powi(3) / 6.0
        } else {
            2.0 / 3.0 - t * t + 0.5 * t.powi(3)
        }
    }

    /// κ_d by direct quadrature of the symmetrized, subtracted integrand.
    fn kappa_oracle(d: usize, s: f64) -> f64 {
        let df = d as f64;
        let sub = beta3(df);
        let f = |t: f64| t.powf(-1.0 - 2.0 * s) * (0.5 * (beta3(t - df) + beta3(t + df)) - sub);
        let mut breaks: Vec<f64> = [df - 2.0, df - 1.0, df, df + 1.0, df + 2.0]
            .into_iter()
            .filter(|&b| b > 0.0)
            .collect();
        breaks.insert(0, 0.0);
        let mut total = 0.0;
        for w in breaks.windows(2) {
            total += if d == 1 && w[0] == 0.0 {
                // the bracket is t^2/2 - t^3/3 here; integrate exactly to
                // avoid cancellation at tiny t
                1.0 / (2.0 * (2.0 - 2.0 * s)) - 1.0 / (3.0 * (3.0 - 2.0 * s))
            } else {
                integrate(&f, w[0], w[1], 1e-13)
            };
        }
        let last = *breaks.last().unwrap();
        // ∫_{last}^∞ -sub t^{-1-2s} dt in closed form
        total += -sub * last.powf(-2.0 * s) / (2.0 * s);
        2.0 * total
    }

    #[test]
    fn coefficients_match_quadrature() {
        for &s in &[0.1, 0.25, 0.5, 0.6, 0.75, 0.9] {
            for d in [1usize, 2, 3, 4, 7, 12] {
                let exact = unit_coefficient(d, s);
                let oracle = kappa_oracle(d, s);
                assert!(
                    (exact - oracle).abs() <= 1e-6 * oracle.abs().max(1e-3),
                    "s={s} d={d}: {exact} vs {oracle}"
                );
            }
        }
    }

    /// Frozen from 30-digit quadrature.
    #[test]
    fn coefficients_match_high_precision_reference() {
        let table = [
            (0.25, 1, 0.041557045172933481),
            (0.25, 2, 0.44021714722698816),
            (0.25, 12, 0.024161538261206539),
            (0.6, 2, 0.34794510365121366),
            (0.6, 12, 0.0042595734021345233),
            (0.1, 1, -1.0124059301218452),
            (0.1, 2, 0.50437934469024845),
            (0.1, 12, 0.050853031487734640),
        ];
        for (s, d, reference) in table {
            let got = unit_coefficient(d, s);
            assert!((got - reference).abs() < 1e-12 * reference.abs(), "s={s} d={d}: {got}");
        }
        // unit hat, s = 0.6: Q = 4 Σ κ_d
        let q = 4.0 * unit_tail_sum(1, 0.6);
        assert!((q - 5.9930294770312846).abs() < 1e-12 * q);
    }

    #[test]
    fn series_and_direct_agree_at_switch() {
        for &s in &[0.05, 0.3, 0.5, 0.7, 0.97] {
            for m in 2..=4usize {
                if m == 2 && s <= 0.5 {
                    continue;
                }
                let n = SERIES_START;
                let series = power_difference(m, n, s);
                let direct: f64 = {
                    let mut total: f64 = (0..=m)
                        .map(|j| {
                            let sign = if (m - j) % 2 == 0 { 1.0 } else { -1.0 };
                            sign * binomial(m, j) * antiderivative((n + j as i64) as f64, s)
                        })
                        .sum();
                    if m == 2 {
                        let p = 3.0 - 2.0 * s;
                        total += 2.0 / (p * (p - 1.0) * (p - 2.0) * (p - 3.0));
                    }
                    total
                };
                assert!(
                    (series - direct).abs() <= 1e-9 * series.abs(),
                    "m={m} s={s}: {series} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn half_branch_is_continuous() {
        for d in [1usize, 2, 5, 40] {
            let at = unit_coefficient(d, 0.5);
            let below = unit_coefficient(d, 0.5 - 1e-7);
            let above = unit_coefficient(d, 0.5 + 1e-7);
            assert!((at - below).abs() < 1e-5 * at.abs());
            assert!((at - above).abs() < 1e-5 * at.abs());
        }
    }

    #[test]
    fn tail_sums_telescope() {
        for &s in &[0.2, 0.5, 0.8] {
            let from = 3;
            let partial: f64 = (from..20000).map(|d| unit_coefficient(d, s)).sum();
            let rest = unit_tail_sum(20000, s);
            let total = unit_tail_sum(from, s);
            assert!((partial + rest - total).abs() < 1e-10 * total, "s={s}");
        }
        let s = 0.8;
        let n = 5;
        let direct: f64 = (n + 1..200000).map(|d| (d - n) as f64 * unit_coefficient(d, s)).sum();
        let closed = unit_tail_tail(n, s);
        // truncated remainder ~ Σ_{d>M} d^{-2s} ≈ M^{1-2s}/(2s-1)
        assert!((direct - closed).abs() < 2e-2 * closed, "{direct} vs {closed}");
        assert!(unit_tail_tail(n, 0.4).is_infinite());
    }

    #[test]
    fn cell_kernel_examples() {
        let far = cell_kernel(0.0, 1.0, 2.0, 3.0, 0.75).unwrap();
        assert!((far - 0.21751).abs() < 1e-5, "{far}");
        let touching = cell_kernel(0.0, 1.0, 1.0, 2.0, 0.25).unwrap();
        assert!((touching - 2.34315).abs() < 1e-5, "{touching}");
        assert!(cell_kernel(0.0, 1.0, 1.0, 2.0, 0.75).unwrap().is_infinite());
        assert!(cell_kernel(0.0, 1.5, 1.0, 2.0, 0.25).is_err());
        assert!(cell_kernel(0.0, 1.0, 2.0, 3.0, 1.0).is_err());
    }

    #[test]
    fn cell_kernel_matches_quadrature() {
        for &s in &[0.2, 0.5, 0.75] {
            for (a1, b1, a2, b2) in [(0.0, 1.0, 2.0, 3.0), (-1.0, 0.5, 0.7, 4.0)] {
                let exact = cell_kernel(a1, b1, a2, b2, s).unwrap();
                let inner = |x: f64| {
                    // ∫_{a2}^{b2} (y - x)^{-1-2s} dy
                    ((a2 - x).powf(-2.0 * s) - (b2 - x).powf(-2.0 * s)) / (2.0 * s)
                };
                let oracle = integrate(&inner, a1, b1, 1e-12);
                assert!((exact - oracle).abs() < 1e-9 * oracle, "s={s}: {exact} vs {oracle}");
            }
        }
    }

    #[test]
    fn cell_kernel_reflection() {
        let (a1, b1, a2, b2) = (0.2, 0.9, 1.3, 2.6);
        for &s in &[0.3, 0.5, 0.8] {
            let x = cell_kernel(a1, b1, a2, b2, s).unwrap();
            let y = cell_kernel(-b2, -a2, -b1, -a1, s).unwrap();
            assert!((x - y).abs() < 1e-14 * x);
        }
    }

    #[test]
    fn tail_tail_constant_example() {
        let g = tail_tail_constant(0.75, 2.0).unwrap();
        assert!((g - 0.94281).abs() < 1e-5);
        assert!((4.0 * g - 3.77124).abs() < 1e-5);
        // oracle: ∫_ℓ^∞ (u - ℓ) u^{-1-2s} du
        let f = |u: f64| (u - 2.0) * u.powf(-2.5);
        let oracle = integrate(&f, 2.0, 1e3, 1e-12) + 2.0 * 1e3f64.powf(-0.5);
        assert!((g - oracle).abs() < 1e-3, "{g} vs {oracle}");
        assert!(tail_tail_constant(0.25, 2.0).unwrap().is_infinite());
    }

    #[test]
    fn scale_factors() {
        let a = scale_factor(ScalingVariant::Alpha, 0.5, 0.1).unwrap();
        assert!((a - 0.176777).abs() < 1e-6);
        assert!((scale_factor(ScalingVariant::Bbm, 0.9, 0.1).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(scale_factor(ScalingVariant::Ms, 0.4, 0.1).unwrap(), 0.2);
        let l = scale_factor(ScalingVariant::Log, 0.5, (-2.0f64).exp()).unwrap();
        assert!((l - 0.5).abs() < 1e-15);
        let s0 = 1e-3;
        let r0 = scale_factor(ScalingVariant::Alpha, s0, 0.1).unwrap() / (s0 / 2.0);
        assert!((r0 - 1.0).abs() < 0.01);
        let s1 = 1.0 - 1e-3;
        let r1 = scale_factor(ScalingVariant::Alpha, s1, 0.1).unwrap() / (1.0 - s1);
        assert!((r1 - 1.0).abs() < 0.01);
        assert!(scale_factor(ScalingVariant::Bbm, 1.0, 0.1).is_err());
        assert!(scale_factor(ScalingVariant::Log, 0.5, 1.0).is_err());
    }

    fn smooth(grid: ProfileGrid, tails: Tails) -> GridFunction {
        GridFunction::from_fn(grid, tails, |x| (0.7 * x).tanh() + 0.3 * (-x * x).exp()).unwrap()
    }

    #[test]
    fn fast_and_direct_paths_agree() {
        for &s in &[0.2, 0.5, 0.8] {
            let grid = ProfileGrid::new(-6.0, 6.0, 150).unwrap();
            let k = KernelMatrix::new(grid, s).unwrap();
            let tails = if s > 0.5 {
                Tails::constant(-1.0, 1.0)
            } else {
                Tails::constant(0.0, 0.0)
            };
            let mut w = smooth(grid, tails);
            if s <= 0.5 {
                w.values.iter_mut().zip(grid.centers()).for_each(|(v, x)| *v = (-x * x).exp());
            }
            let fast = k.seminorm(&w).unwrap();
            let direct = k.seminorm_direct(&w).unwrap();
            assert!((fast - direct).abs() < 1e-10 * direct, "s={s}: {fast} vs {direct}");
        }
    }

    #[test]
    fn symmetric_positive_and_decreasing_away_from_diagonal() {
        let grid = ProfileGrid::new(-1.0, 1.0, 40).unwrap();
        for &s in &[0.25, 0.5, 0.75, 0.95] {
            let k = KernelMatrix::new(grid, s).unwrap();
            let dense = k.to_dense();
            assert_eq!(dense, dense.transpose());
            for d in 2..39 {
                assert!(k.coefficient(d) > 0.0);
                if d > 2 {
                    assert!(k.coefficient(d) < k.coefficient(d - 1), "s={s} d={d}");
                }
            }
            assert!(k.coefficient(1).is_finite());
        }
        // Nearest neighbors are positive and dominant once s is not small.
        for &s in &[0.5, 0.75, 0.95] {
            let k = KernelMatrix::new(grid, s).unwrap();
            assert!(k.coefficient(1) > k.coefficient(2));
        }
    }

    #[test]
    fn constants_have_zero_seminorm() {
        let grid = ProfileGrid::new(0.0, 3.0, 100).unwrap();
        let k = KernelMatrix::new(grid, 0.3).unwrap();
        let w = GridFunction::from_fn(grid, Tails::constant(2.0, 2.0), |_| 2.0).unwrap();
        assert!(k.seminorm(&w).unwrap().abs() < 1e-10);
        let w = GridFunction::from_fn(grid, Tails::None, |_| 2.0).unwrap();
        assert!(k.seminorm(&w).unwrap().abs() < 1e-10);
    }

    #[test]
    fn infinite_tail_energy_is_an_error() {
        let grid = ProfileGrid::new(0.0, 3.0, 16).unwrap();
        let k = KernelMatrix::new(grid, 0.4).unwrap();
        let w = GridFunction::from_fn(grid, Tails::constant(-1.0, 1.0), |x| x - 1.5).unwrap();
        assert!(matches!(k.seminorm(&w), Err(Error::InfiniteEnergy(_))));
    }

    #[test]
    fn reflection_invariance() {
        let grid = ProfileGrid::new(-3.0, 5.0, 90).unwrap();
        let k = KernelMatrix::new(grid, 0.7).unwrap();
        let w = GridFunction::from_fn(grid, Tails::constant(-1.0, 0.5), |x| (x * 0.9).sin()).unwrap();
        let a = k.seminorm(&w).unwrap();
        let b = k.seminorm(&w.reflected()).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn grid_scaling_covariance() {
        let grid = ProfileGrid::new(-2.0, 2.0, 64).unwrap();
        for &s in &[0.3, 0.5, 0.8] {
            let k = KernelMatrix::new(grid, s).unwrap();
            for &lambda in &[0.5, 2.0] {
                let ks = KernelMatrix::new(grid.scaled(lambda).unwrap(), s).unwrap();
                let factor = lambda.powf(1.0 - 2.0 * s);
                for d in 1..64 {
                    let rel = (ks.coefficient(d) - factor * k.coefficient(d)).abs()
                        / (factor * k.coefficient(d)).abs();
                    assert!(rel < 1e-12, "s={s} λ={lambda} d={d}: {rel}");
                }
            }
        }
    }

    #[test]
    fn single_hat_matches_closed_form() {
        // Unit hat: Q = 2 ∫ t^{-1-2s} 2 (β₃(0) - β₃(t)) dt over t > 0.
        for &s in &[0.3, 0.6, 0.9] {
            let grid = ProfileGrid::derived(-0.5, 0.5, 1).unwrap();
            let k = KernelMatrix::new(grid, s).unwrap();
            let w = GridFunction::new(grid, vec![1.0], Tails::constant(0.0, 0.0)).unwrap();
            let q = k.seminorm(&w).unwrap();
            let f = |t: f64| t.powf(-1.0 - 2.0 * s) * 2.0 * (2.0 / 3.0 - beta3(t));
            // on (0, 1) the bracket is 2 (t^2 - t^3 / 2)
            let near = 2.0 * (1.0 / (2.0 - 2.0 * s) - 0.5 / (3.0 - 2.0 * s));
            let oracle = 2.0
                * (near
                    + integrate(&f, 1.0, 2.0, 1e-13)
                    + 4.0 / 3.0 * 2f64.powf(-2.0 * s) / (2.0 * s));
            assert!((q - oracle).abs() < 1e-6 * oracle, "s={s}: {q} vs {oracle}");
        }
    }
}
