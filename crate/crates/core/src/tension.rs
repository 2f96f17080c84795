//! Surface tensions and jump-energy constants from optimal-profile problems.
//!
//! Phase kinds minimize the full-line energy (ε = 1) over profiles on
//! `(-T, T)` with tails `∓1`, growing `T` at fixed cell width and then
//! refining the grid until both stall. Free-discontinuity kinds minimize
//! `T + inner(T)`, where `inner(T)` is the perturbation term of a profile
//! rising from 0 (for `t <= 0`) to `δ` (for `t >= T`), by golden-section
//! search in `log T`, again followed by grid refinement.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{DomainMode, Family, Functional, FunctionalSpec};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, PinMask, ProfileGrid, Tails};
use crate::kernel::{FractionalOrder, ScalingVariant};
use crate::potential::Potential;
use crate::solver::{
    init_profile, minimize_with, multi_start_with, ProfileKind, ProfileParams, SolverOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TensionKind {
    #[serde(rename = "m_ks")]
    MKs,
    #[serde(rename = "m_k_integer")]
    MKInteger,
    #[serde(rename = "m_bbm")]
    MBbm,
    #[serde(rename = "m_ms")]
    MMs,
    #[serde(rename = "m_half")]
    MHalf,
    #[serde(rename = "fd_m_k")]
    FdMK,
    #[serde(rename = "fd_m_1s")]
    FdM1s,
}

impl TensionKind {
    pub fn name(&self) -> &'static str {
        match self {
            TensionKind::MKs => "m_ks",
            TensionKind::MKInteger => "m_k_integer",
            TensionKind::MBbm => "m_bbm",
            TensionKind::MMs => "m_ms",
            TensionKind::MHalf => "m_half",
            TensionKind::FdMK => "fd_m_k",
            TensionKind::FdM1s => "fd_m_1s",
        }
    }

    pub fn is_fd(&self) -> bool {
        matches!(self, TensionKind::FdMK | TensionKind::FdM1s)
    }

    pub const ALL: [TensionKind; 7] = [
        TensionKind::MKs,
        TensionKind::MKInteger,
        TensionKind::MBbm,
        TensionKind::MMs,
        TensionKind::MHalf,
        TensionKind::FdMK,
        TensionKind::FdM1s,
    ];
}

impl std::str::FromStr for TensionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TensionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown tension kind {s:?}")))
    }
}

fn default_delta() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensionProblem {
    pub kind: TensionKind,
    #[serde(default)]
    pub potential: Potential,
    /// For `m_bbm` this is the limiting integer order; the functional uses
    /// `k - 1` derivatives plus a fractional `s`.
    pub k: usize,
    #[serde(default)]
    pub s: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub t_initial: f64,
    pub t_growth: f64,
    pub t_max: f64,
    pub n_initial: usize,
    pub n_growth: usize,
    pub n_max: usize,
    pub t_tol: f64,
    pub n_tol: f64,
    /// Relative width of the final golden-section bracket in `log T`.
    pub golden_tol: f64,
    /// Random restarts added to the Hermite start for fd kinds.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            t_initial: 5.0,
            t_growth: 2.0,
            t_max: 160.0,
            n_initial: 256,
            n_growth: 2,
            n_max: 16384,
            t_tol: 1e-3,
            n_tol: 1e-3,
            golden_tol: 1e-4,
            restarts: 3,
            seed: 0,
        }
    }
}

impl TensionProblem {
    pub fn new(kind: TensionKind, k: usize, s: f64) -> Self {
        let potential = if kind.is_fd() {
            Potential::truncated_quadratic()
        } else {
            Potential::quartic()
        };
        TensionProblem {
            kind,
            potential,
            k,
            s,
            delta: 1.0,
            schedule: Schedule::default(),
            solver: SolverOptions::default(),
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (k, s) = (self.k, self.s);
        let bad = |m: String| Err(Error::Spec(m));
        let open = s > 0.0 && s < 1.0;
        match self.kind {
            TensionKind::MKs if !(open && k as f64 + s > 0.5) => {
                bad(format!("m_ks needs s in (0, 1) and k + s > 1/2, got ({k}, {s})"))
            }
            TensionKind::MKInteger if !(s == 0.0 && k >= 1) => {
                bad(format!("m_k_integer needs s = 0 and k >= 1, got ({k}, {s})"))
            }
            TensionKind::MBbm if !(open && k >= 1 && (k >= 2 || s > 0.5)) => {
                bad(format!("m_bbm needs k >= 1 and s in (0, 1) (s > 1/2 for k = 1), got ({k}, {s})"))
            }
            TensionKind::MMs if !(open && k >= 1) => {
                bad(format!("m_ms needs k >= 1 and s in (0, 1), got ({k}, {s})"))
            }
            TensionKind::FdMK if !(k >= 2 && s == 0.0) => {
                bad(format!("fd_m_k needs k >= 2 and s = 0, got ({k}, {s})"))
            }
            TensionKind::FdM1s if !(k == 1 && open) => {
                bad(format!("fd_m_1s needs k = 1 and s in (0, 1), got ({k}, {s})"))
            }
            _ => Ok(()),
        }?;
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Domain(format!("jump δ must be positive, got {}", self.delta)));
        }
        let sc = &self.schedule;
        if !(sc.t_initial > 0.0 && sc.t_growth > 1.0 && sc.t_max >= sc.t_initial) {
            return Err(Error::Config("T schedule needs T0 > 0, growth > 1, max >= T0".into()));
        }
        if !(sc.n_initial >= 16 && sc.n_growth >= 2 && sc.n_max >= sc.n_initial) {
            return Err(Error::Config("N schedule needs N0 >= 16, growth >= 2, max >= N0".into()));
        }
        if !(sc.t_tol > 0.0 && sc.n_tol > 0.0 && sc.golden_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        self.solver.validate()
    }

    /// Family, functional order and scaling of the phase kinds.
    fn phase_setup(&self) -> (Family, FractionalOrder, ScalingVariant) {
        let (k, s) = (self.k, self.s);
        match self.kind {
            TensionKind::MKInteger => (Family::PhaseInteger, FractionalOrder { k, s: 0.0 }, ScalingVariant::None),
            TensionKind::MBbm => (Family::PhaseFractional, FractionalOrder { k: k - 1, s }, ScalingVariant::Bbm),
            TensionKind::MMs => (Family::PhaseFractional, FractionalOrder { k, s }, ScalingVariant::Ms),
            _ => (Family::PhaseFractional, FractionalOrder { k, s }, ScalingVariant::None),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementStep {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub value: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensionResult {
    pub kind: TensionKind,
    pub k: usize,
    pub s: f64,
    pub delta: f64,
    pub value: f64,
    #[serde(rename = "T_final")]
    pub t_final: f64,
    #[serde(rename = "N_final")]
    pub n_final: usize,
    pub profile: Option<GridFunction>,
    pub history: Vec<RefinementStep>,
    pub converged: bool,
    pub notes: Vec<String>,
}

fn relative_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn solve_profile(p: &TensionProblem) -> Result<TensionResult> {
    p.validate()?;
    match p.kind {
        TensionKind::MHalf => crate::experiments::half_constant(p),
        TensionKind::FdMK | TensionKind::FdM1s => solve_fd(p),
        _ => solve_phase(p),
    }
}

/// Solves independent problems concurrently; results keep the input order.
pub fn solve_many(problems: &[TensionProblem]) -> Vec<Result<TensionResult>> {
    problems.par_iter().map(solve_profile).collect()
}

fn solve_phase(p: &TensionProblem) -> Result<TensionResult> {
    let sc = &p.schedule;
    let (family, order, scaling) = p.phase_setup();
    let tails = Tails::constant(-1.0, 1.0);
    let h0 = 2.0 * sc.t_initial / sc.n_initial as f64;
    let mut notes = Vec::new();
    let mut history = Vec::new();
    let mut all_converged = true;

    let solve = |grid: ProfileGrid, prev: Option<&GridFunction>| -> Result<(f64, GridFunction, bool)> {
        let spec = FunctionalSpec::new(family, p.potential.clone(), order, 1.0, grid)
            .with_mode(DomainMode::FullLine)
            .with_scaling(scaling);
        let f = Functional::new(spec)?;
        let start = match prev {
            Some(v) => v.resample(grid)?,
            None => init_profile(ProfileKind::Tanh, grid, tails, &ProfileParams::default())?,
        };
        let r = minimize_with(&f, &start, &p.solver, None)?;
        Ok((r.energy, r.profile, r.converged))
    };

    let mut t = sc.t_initial;
    let mut n = sc.n_initial;
    let mut profile: Option<GridFunction> = None;
    let mut value = f64::NAN;
    let mut t_stalled = false;
    loop {
        n = ((2.0 * t / h0).round() as usize).min(sc.n_max).max(n);
        let (v, prof, ok) = solve(ProfileGrid::new(-t, t, n)?, profile.as_ref())?;
        all_converged &= ok;
        history.push(RefinementStep { t, n, value: v, converged: ok });
        let stalled = value.is_finite() && relative_change(v, value) < sc.t_tol;
        value = v;
        profile = Some(prof);
        if stalled {
            t_stalled = true;
            break;
        }
        if t * sc.t_growth > sc.t_max * (1.0 + 1e-12) {
            break;
        }
        t *= sc.t_growth;
    }
    if !t_stalled {
        notes.push(format!("T cap {} reached before the value stalled", sc.t_max));
    }

    let mut n_stalled = false;
    while n * sc.n_growth <= sc.n_max {
        n *= sc.n_growth;
        let (v, prof, ok) = solve(ProfileGrid::new(-t, t, n)?, profile.as_ref())?;
        all_converged &= ok;
        history.push(RefinementStep { t, n, value: v, converged: ok });
        let stalled = relative_change(v, value) < sc.n_tol;
        value = v;
        profile = Some(prof);
        if stalled {
            n_stalled = true;
            break;
        }
    }
    if !n_stalled {
        notes.push(format!("N cap {} reached before the value stalled", sc.n_max));
    }
    if !all_converged {
        notes.push("an inner minimization did not converge".into());
    }
    Ok(TensionResult {
        kind: p.kind,
        k: p.k,
        s: p.s,
        delta: p.delta,
        value,
        t_final: t,
        n_final: n,
        profile,
        history,
        converged: all_converged && t_stalled && n_stalled,
        notes,
    })
}

/// Homogeneity exponent of the jump energy in `δ`.
fn jump_exponent(p: &TensionProblem) -> f64 {
    match p.kind {
        TensionKind::FdM1s => 1.0 / (1.0 + p.s),
        _ => 1.0 / p.k as f64,
    }
}

struct FdEval {
    objective: f64,
    profile: GridFunction,
    converged: bool,
}

/// `T + min inner` on `n` cells of `(0, T)`.
fn fd_objective(p: &TensionProblem, t: f64, n: usize) -> Result<FdEval> {
    let grid = ProfileGrid::new(0.0, t, n)?;
    let tails = Tails::constant(0.0, p.delta);
    let (family, order, potential) = match p.kind {
        TensionKind::FdMK => (
            Family::FdInteger,
            FractionalOrder { k: p.k, s: 0.0 },
            p.potential.clone(),
        ),
        _ => (
            Family::FdFractional,
            FractionalOrder { k: 1, s: p.s },
            p.potential.clone(),
        ),
    };
    let layer = p.k.saturating_sub(1);
    let pins = if layer > 0 {
        PinMask::boundary_layers(n, layer, 0.0, p.delta)?
    } else {
        PinMask::none()
    };
    let spec = FunctionalSpec::new(family, potential, order, 1.0, grid)
        .with_mode(DomainMode::FullLine)
        .with_pins(pins)
        .without_bulk();
    let f = Functional::new(spec)?;
    let base = ProfileParams {
        k: p.k.max(1),
        low: Some(0.0),
        high: Some(p.delta),
        ..ProfileParams::default()
    };
    let mut starts = vec![init_profile(ProfileKind::Hermite, grid, tails, &base)?];
    for r in 0..p.schedule.restarts {
        let params = ProfileParams {
            base: ProfileKind::Hermite,
            seed: p.schedule.seed.wrapping_add(r as u64 + 1),
            ..base.clone()
        };
        starts.push(init_profile(ProfileKind::RandomPerturbed, grid, tails, &params)?);
    }
    let ms = multi_start_with(&f, &starts, &p.solver)?;
    Ok(FdEval {
        objective: t + ms.best.energy,
        profile: ms.best.profile,
        converged: ms.best.converged,
    })
}

/// Golden-section search of `T + inner(T)` in `log T` at fixed `n`.
fn fd_golden(p: &TensionProblem, n: usize, guess: f64) -> Result<(f64, FdEval)> {
    let eval = |u: f64| fd_objective(p, u.exp(), n);
    let step = std::f64::consts::LN_2;
    let mut m = guess.ln();
    let mut fm = eval(m)?;
    let right = eval(m + step)?;
    if right.objective < fm.objective {
        // march right
        fm = right;
        m += step;
        loop {
            let next = eval(m + step)?;
            if next.objective >= fm.objective {
                break;
            }
            m += step;
            fm = next;
            if m > 60.0 {
                return Err(Error::Divergence { iterations: 0, reason: "no bracket for T".into() });
            }
        }
    } else {
        loop {
            let next = eval(m - step)?;
            if next.objective >= fm.objective {
                break;
            }
            m -= step;
            fm = next;
            if m < -60.0 {
                return Err(Error::Divergence { iterations: 0, reason: "no bracket for T".into() });
            }
        }
    }
    let (mut a, mut b) = (m - step, m + step);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    while b - a > p.schedule.golden_tol {
        if f1.objective <= f2.objective {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = eval(x2)?;
        }
    }
    let (x, fx) = if f1.objective <= f2.objective { (x1, f1) } else { (x2, f2) };
    let (x, fx) = if fm.objective < fx.objective { (m, fm) } else { (x, fx) };
    Ok((x.exp(), fx))
}

fn solve_fd(p: &TensionProblem) -> Result<TensionResult> {
    let sc = &p.schedule;
    let mut history = Vec::new();
    let mut notes = Vec::new();
    let mut all_converged = true;
    let mut guess = p.delta.powf(jump_exponent(p));
    let mut value = f64::NAN;
    let mut n = sc.n_initial;
    let mut best;
    let mut stalled = false;
    loop {
        let (t, eval) = fd_golden(p, n, guess)?;
        all_converged &= eval.converged;
        history.push(RefinementStep {
            t,
            n,
            value: eval.objective,
            converged: eval.converged,
        });
        let done = value.is_finite() && relative_change(eval.objective, value) < sc.n_tol;
        value = eval.objective;
        guess = t;
        best = Some((t, n, eval.profile));
        if done {
            stalled = true;
            break;
        }
        if n * sc.n_growth > sc.n_max {
            break;
        }
        n *= sc.n_growth;
    }
    if !stalled {
        notes.push(format!("N cap {} reached before the value stalled", sc.n_max));
    }
    if !all_converged {
        notes.push("an inner minimization did not converge".into());
    }
    let (t_final, n_final, profile) = best.expect("at least one refinement level");
    Ok(TensionResult {
        kind: p.kind,
        k: p.k,
        s: p.s,
        delta: p.delta,
        value,
        t_final,
        n_final,
        profile: Some(profile),
        history,
        converged: all_converged && stalled,
        notes,
    })
}

/// `c_k = ∫_0^1 |H_k^{(k)}|^2` for the clamped Hermite interpolant.
pub fn hermite_energy(k: usize) -> f64 {
    // monomial coefficients of Σ_{j>=k} C(m, j) t^j (1 - t)^{m-j}
    let m = 2 * k - 1;
    let binom = |n: usize, r: usize| (0..r).fold(1.0, |acc, q| acc * (n - q) as f64 / (q + 1) as f64);
    let mut coeffs = vec![0.0; m + 1];
    for j in k..=m {
        for i in 0..=m - j {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            coeffs[j + i] += binom(m, j) * binom(m - j, i) * sign;
        }
    }
    // k-th derivative
    let deriv: Vec<f64> = (k..=m)
        .map(|j| coeffs[j] * (0..k).fold(1.0, |acc, q| acc * (j - q) as f64))
        .collect();
    let mut total = 0.0;
    for (a, ca) in deriv.iter().enumerate() {
        for (b, cb) in deriv.iter().enumerate() {
            total += ca * cb / (a + b + 1) as f64;
        }
    }
    total
}

/// Exact fd constant: `min_T T + δ² c_k T^{1-2k}`.
pub fn hermite_reference(k: usize, delta: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("hermite reference needs k >= 1".into()));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("jump δ must be positive, got {delta}")));
    }
    let kf = k as f64;
    let ck = hermite_energy(k);
    Ok(delta.powf(1.0 / kf) * (2.0 * kf / (2.0 * kf - 1.0)) * ((2.0 * kf - 1.0) * ck).powf(0.5 / kf))
}

/// Jump energy for a jump of size `delta`; `problem` provides the kind,
/// order and schedules.
pub fn fd_jump_energy(problem: &TensionProblem, delta: f64) -> Result<f64> {
    if !problem.kind.is_fd() {
        return Err(Error::Spec(format!("{} is not a jump-energy kind", problem.kind.name())));
    }
    solve_profile(&problem.clone().with_delta(delta)).map(|r| r.value)
}

/// `2 ∫_{-1}^{1} √W`.
pub fn equipartition_reference(p: &Potential) -> Result<f64> {
    let report = p.validate();
    if !p.is_double_well_kind() || !report.checks.iter().all(|c| c.passed) {
        return Err(Error::Unsupported(format!(
            "{} is not a double-well potential with wells at ±1",
            p.name()
        )));
    }
    let f = |z: f64| p.value(z).max(0.0).sqrt();
    Ok(2.0 * quadrature::double_exponential::integrate(f, -1.0, 1.0, 1e-14).integral)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_constants() {
        assert!((hermite_energy(1) - 1.0).abs() < 1e-12);
        assert!((hermite_energy(2) - 12.0).abs() < 1e-10);
        assert!((hermite_energy(3) - 720.0).abs() < 1e-7);
        assert!((hermite_reference(1, 1.0).unwrap() - 2.0).abs() < 1e-12);
        let r2 = hermite_reference(2, 1.0).unwrap();
        assert!((r2 - 4.0 * 6f64.sqrt() / 3.0).abs() < 1e-12);
        assert!((hermite_reference(2, 4.0).unwrap() - 2.0 * r2).abs() < 1e-12);
        assert!(hermite_reference(0, 1.0).is_err());
    }

    #[test]
    fn hermite_energy_matches_quadrature() {
        // c_2 = ∫ (6 - 12 t)^2
        let q = quadrature::double_exponential::integrate(|t: f64| (6.0 - 12.0 * t).powi(2), 0.0, 1.0, 1e-12);
        assert!((q.integral - hermite_energy(2)).abs() < 1e-9);
        let q = quadrature::double_exponential::integrate(
            |t: f64| (60.0 - 360.0 * t + 360.0 * t * t).powi(2),
            0.0,
            1.0,
            1e-12,
        );
        assert!((q.integral - hermite_energy(3)).abs() < 1e-7);
    }

    #[test]
    fn hermite_reference_matches_scan() {
        let scan = (1..200000)
            .map(|i| {
                let t = i as f64 * 1e-4;
                t + 1.0 / t
            })
            .fold(f64::INFINITY, f64::min);
        assert!((scan - hermite_reference(1, 1.0).unwrap()).abs() < 1e-7);
    }

    #[test]
    fn equipartition() {
        let q = equipartition_reference(&Potential::quartic()).unwrap();
        assert!((q - 8.0 / 3.0).abs() < 1e-12);
        let q4 = equipartition_reference(&Potential::quartic().scaled(4.0)).unwrap();
        assert!((q4 - 16.0 / 3.0).abs() < 1e-12);
        let moved = Potential::polynomial(vec![4.0, 0.0, -5.0, 0.0, 1.0]);
        assert!(matches!(equipartition_reference(&moved), Err(Error::Unsupported(_))));
        assert!(equipartition_reference(&Potential::truncated_quadratic()).is_err());
    }

    #[test]
    fn problem_validation() {
        assert!(TensionProblem::new(TensionKind::MKs, 0, 0.4).validate().is_err());
        assert!(TensionProblem::new(TensionKind::MKs, 0, 0.6).validate().is_ok());
        assert!(TensionProblem::new(TensionKind::MKInteger, 0, 0.0).validate().is_err());
        assert!(TensionProblem::new(TensionKind::FdMK, 1, 0.0).validate().is_err());
        assert!(TensionProblem::new(TensionKind::FdM1s, 2, 0.5).validate().is_err());
        assert!(TensionProblem::new(TensionKind::MBbm, 1, 0.3).validate().is_err());
        assert!(TensionProblem::new(TensionKind::FdMK, 2, 0.0).with_delta(-1.0).validate().is_err());
        assert_eq!("fd_m_1s".parse::<TensionKind>().unwrap(), TensionKind::FdM1s);
        assert!("m_x".parse::<TensionKind>().is_err());
    }

    #[test]
    fn fd_k2_matches_reference() {
        let p = TensionProblem::new(TensionKind::FdMK, 2, 0.0);
        let r = solve_profile(&p).unwrap();
        let reference = hermite_reference(2, 1.0).unwrap();
        assert!(r.converged, "{:?}", r.notes);
        assert!((r.value - reference).abs() < 5e-3 * reference, "{} vs {reference}", r.value);
    }

    #[test]
    fn classical_tension_on_coarse_schedule() {
        let p = TensionProblem::new(TensionKind::MKInteger, 1, 0.0);
        let r = solve_profile(&p).unwrap();
        assert!(r.converged, "{:?}", r.notes);
        assert!((r.value - 8.0 / 3.0).abs() < 0.01 * 8.0 / 3.0, "{}", r.value);
    }
}
