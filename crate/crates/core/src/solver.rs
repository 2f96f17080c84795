//! Limited-memory quasi-Newton minimization over the unpinned values.
//!
//! The initial inverse metric of the two-loop recursion is the factored
//! approximate Hessian from [`Functional::preconditioner`]; for the quadratic
//! fd inner problems that makes the first step exact. Besides the gradient
//! test a run also stops as converged once the predicted decrease
//! `-g·d / 2` falls below the round-off level of the energy, which is what
//! happens first for the stiff high-order families on fine grids.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{Functional, FunctionalSpec};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, ProfileGrid, Tails};
use crate::precond::Preconditioner;

const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Sup-norm gradient tolerance, multiplied by the cell width.
    pub gradient_tolerance: f64,
    /// Relative energy level below which a predicted decrease counts as
    /// round-off.
    pub decrement_tolerance: f64,
    pub memory: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub seed: u64,
    pub precondition: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 5000,
            gradient_tolerance: 1e-8,
            decrement_tolerance: 1e-14,
            memory: 10,
            armijo: 1e-4,
            backtrack: 0.5,
            seed: 0,
            precondition: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        if !(self.gradient_tolerance > 0.0 && self.gradient_tolerance < 1.0) {
            return bad("gradient_tolerance must lie in (0, 1)");
        }
        if !(self.decrement_tolerance > 0.0 && self.decrement_tolerance < 1.0) {
            return bad("decrement_tolerance must lie in (0, 1)");
        }
        if self.memory == 0 {
            return bad("memory must be positive");
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad("armijo must lie in (0, 1)");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub energy: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Gradient,
    /// Predicted decrease below the round-off level of the energy.
    Stationary,
    IterationCap,
    LineSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeResult {
    pub profile: GridFunction,
    pub energy: f64,
    pub converged: bool,
    pub reason: StopReason,
    pub trace: Vec<TracePoint>,
}

impl MinimizeResult {
    pub fn iterations(&self) -> usize {
        self.trace.last().map_or(0, |t| t.iteration)
    }

    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,energy,grad_norm\n");
        for t in &self.trace {
            s.push_str(&format!(
                "{},{},{}\n",
                t.iteration,
                crate::cli::export::fmt_float(t.energy),
                crate::cli::export::fmt_float(t.grad_norm)
            ));
        }
        s
    }

    pub fn write_trace(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.trace_csv().as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `spec` from `v0`. Pinned entries of `v0` are overwritten.
pub fn minimize(spec: &FunctionalSpec, v0: &GridFunction, opts: &SolverOptions) -> Result<MinimizeResult> {
    let f = Functional::new(spec.clone())?;
    minimize_with(&f, v0, opts, None)
}

/// [`minimize`] on an assembled functional, optionally reusing a
/// preconditioner built for the same free set.
pub fn minimize_with(
    f: &Functional,
    v0: &GridFunction,
    opts: &SolverOptions,
    precond: Option<&Preconditioner>,
) -> Result<MinimizeResult> {
    opts.validate()?;
    let spec = f.spec();
    let n = spec.grid.n;
    let tails = v0.tails;
    let mut x = v0.values.clone();
    if x.len() != n {
        return Err(Error::Grid(format!("{} start values for {n} cells", x.len())));
    }
    spec.pins.apply(&mut x);
    let free = spec.pins.free_indices(n);
    let h = spec.grid.h();
    let tol = opts.gradient_tolerance * h;

    let (mut e, g) = f.value_and_gradient(&x, tails).map_err(|err| Error::Divergence {
        iterations: 0,
        reason: format!("start is not admissible: {err}"),
    })?;
    let built;
    let p = match precond {
        Some(p) => p,
        None => {
            built = if opts.precondition {
                f.preconditioner(&free)
            } else {
                Preconditioner::Identity
            };
            &built
        }
    };
    let restrict = |g: &[f64]| -> Vec<f64> { free.iter().map(|&i| g[i]).collect() };
    let mut gf = restrict(&g);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut trace = Vec::new();
    let mut reason = StopReason::IterationCap;

    let mut iter = 0;
    loop {
        let gnorm = sup(&gf);
        trace.push(TracePoint {
            iteration: iter,
            energy: e,
            grad_norm: gnorm,
        });
        if gnorm <= tol {
            reason = StopReason::Gradient;
            break;
        }
        if iter >= opts.max_iterations {
            break;
        }

        let mut d = two_loop(&gf, &hist, p);
        let mut slope = dot(&gf, &d);
        if !(slope < 0.0) {
            hist.clear();
            d = p.solve(&gf).iter().map(|v| -v).collect();
            slope = dot(&gf, &d);
            if !(slope < 0.0) {
                d = gf.iter().map(|v| -v).collect();
                slope = dot(&gf, &d);
            }
        }
        let noise = opts.decrement_tolerance * e.abs().max(f64::MIN_POSITIVE);
        if !p.is_identity() && -0.5 * slope <= noise {
            reason = StopReason::Stationary;
            break;
        }

        let mut t = 1.0;
        let mut accepted = None;
        let mut saw_finite = false;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial = x.clone();
            for (&i, di) in free.iter().zip(&d) {
                trial[i] += t * di;
            }
            if let Ok((et, gt)) = f.value_and_gradient(&trial, tails) {
                saw_finite = true;
                if et <= e + opts.armijo * t * slope {
                    accepted = Some((trial, et, gt));
                    break;
                }
            }
            t *= opts.backtrack;
        }
        // an accepted step that does not lower the energy is round-off
        let accepted = accepted.filter(|(_, et, _)| *et < e);
        let Some((xn, en, gn)) = accepted else {
            if !saw_finite {
                return Err(Error::Divergence {
                    iterations: iter,
                    reason: "no finite energy along the search direction".into(),
                });
            }
            if !hist.is_empty() {
                hist.clear();
                continue;
            }
            // Armijo cannot resolve a decrease this small.
            reason = if -slope <= 1e3 * noise {
                StopReason::Stationary
            } else {
                StopReason::LineSearch
            };
            break;
        };
        let gfn = restrict(&gn);
        let s: Vec<f64> = d.iter().map(|v| t * v).collect();
        let y: Vec<f64> = gfn.iter().zip(&gf).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        e = en;
        gf = gfn;
        iter += 1;
    }

    let converged = matches!(reason, StopReason::Gradient | StopReason::Stationary);
    Ok(MinimizeResult {
        profile: GridFunction {
            grid: spec.grid,
            values: x,
            tails,
        },
        energy: e,
        converged,
        reason,
        trace,
    })
}

/// `-H g` with the L-BFGS inverse Hessian built on `P^{-1}` (or a scaled
/// identity when unpreconditioned).
fn two_loop(g: &[f64], hist: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, p: &Preconditioner) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let mut r = if p.is_identity() {
        let gamma = hist
            .back()
            .map_or(1.0, |(s, y, _)| dot(s, y) / dot(y, y));
        q.iter().map(|v| gamma * v).collect()
    } else {
        p.solve(&q)
    };
    for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &r);
        for (ri, si) in r.iter_mut().zip(s) {
            *ri += (a - b) * si;
        }
    }
    r.iter().map(|v| -v).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStartResult {
    pub best: MinimizeResult,
    pub best_index: usize,
    /// Per-start outcome; `None` where the start diverged.
    pub runs: Vec<Option<MinimizeResult>>,
}

/// Runs [`minimize`] from each start (concurrently) and keeps the lowest
/// converged energy, or the lowest overall if none converged. Ties go to
/// the earliest start.
pub fn multi_start(spec: &FunctionalSpec, starts: &[GridFunction], opts: &SolverOptions) -> Result<MultiStartResult> {
    let f = Functional::new(spec.clone())?;
    multi_start_with(&f, starts, opts)
}

pub fn multi_start_with(f: &Functional, starts: &[GridFunction], opts: &SolverOptions) -> Result<MultiStartResult> {
    if starts.is_empty() {
        return Err(Error::Config("multi-start needs at least one start".into()));
    }
    opts.validate()?;
    let free = f.spec().pins.free_indices(f.spec().grid.n);
    let p = if opts.precondition {
        f.preconditioner(&free)
    } else {
        Preconditioner::Identity
    };
    let runs: Vec<Option<MinimizeResult>> = starts
        .par_iter()
        .map(|v0| minimize_with(f, v0, opts, Some(&p)))
        .collect::<Vec<_>>()
        .into_iter()
        .map(|r| match r {
            Ok(r) => Ok(Some(r)),
            Err(Error::Divergence { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let pick = |need_converged: bool| {
        runs.iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_ref().map(|r| (i, r)))
            .filter(|(_, r)| r.converged || !need_converged)
            .min_by(|a, b| a.1.energy.total_cmp(&b.1.energy).then(a.0.cmp(&b.0)))
            .map(|(i, r)| (i, r.clone()))
    };
    let (best_index, best) = pick(true)
        .or_else(|| pick(false))
        .ok_or(Error::AllStartsDiverged(starts.len()))?;
    Ok(MultiStartResult {
        best,
        best_index,
        runs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Tanh,
    LinearRamp,
    Step,
    Hermite,
    RandomPerturbed,
}

/// Shape parameters. Unset fields default from the grid and tails: the
/// center is the grid midpoint, the levels are the tail values (or `∓1`),
/// the width is 1 for `tanh` and the grid length for `linear-ramp` and
/// `hermite`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileParams {
    pub center: Option<f64>,
    pub width: Option<f64>,
    pub low: Option<f64>,
    pub high: Option<f64>,
    /// Clamped derivatives of the `hermite` kind.
    pub k: usize,
    /// Shape perturbed by `random-perturbed`.
    pub base: ProfileKind,
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for ProfileParams {
    fn default() -> Self {
        ProfileParams {
            center: None,
            width: None,
            low: None,
            high: None,
            k: 2,
            base: ProfileKind::Tanh,
            amplitude: 0.1,
            seed: 0,
        }
    }
}

/// `I_t(k, k)`: degree `2k - 1`, 0 at 0, 1 at 1, derivatives of order
/// `1..k` vanishing at both ends.
pub fn hermite_shape(k: usize, t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    let m = 2 * k - 1;
    (k..=m)
        .map(|j| {
            let c = (0..j).fold(1.0, |acc, q| acc * (m - q) as f64 / (q + 1) as f64);
            c * t.powi(j as i32) * (1.0 - t).powi((m - j) as i32)
        })
        .sum()
}

pub fn init_profile(
    kind: ProfileKind,
    grid: ProfileGrid,
    tails: Tails,
    params: &ProfileParams,
) -> Result<GridFunction> {
    let (tail_low, tail_high) = match tails {
        Tails::Constant { left, right } => (left, right),
        Tails::None => (-1.0, 1.0),
    };
    let low = params.low.unwrap_or(tail_low);
    let high = params.high.unwrap_or(tail_high);
    let center = params.center.unwrap_or(0.5 * (grid.a + grid.b));
    let default_width = match kind {
        ProfileKind::Tanh => 1.0,
        ProfileKind::RandomPerturbed if params.base == ProfileKind::Tanh => 1.0,
        _ => grid.length(),
    };
    let width = params.width.unwrap_or(default_width);
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::Config(format!("profile width must be positive, got {width}")));
    }
    if ![low, high, center].iter().all(|v| v.is_finite()) {
        return Err(Error::Config("profile levels and center must be finite".into()));
    }
    let lerp = |t: f64| low + (high - low) * t;
    match kind {
        ProfileKind::Tanh => GridFunction::from_fn(grid, tails, |x| {
            lerp(0.5 * (1.0 + ((x - center) / width).tanh()))
        }),
        ProfileKind::LinearRamp => GridFunction::from_fn(grid, tails, |x| {
            lerp(((x - center) / width + 0.5).clamp(0.0, 1.0))
        }),
        ProfileKind::Step => {
            GridFunction::from_fn(grid, tails, |x| if x < center { low } else { high })
        }
        ProfileKind::Hermite => {
            if params.k == 0 {
                return Err(Error::Config("hermite profile needs k >= 1".into()));
            }
            GridFunction::from_fn(grid, tails, |x| {
                lerp(hermite_shape(params.k, (x - center) / width + 0.5))
            })
        }
        ProfileKind::RandomPerturbed => {
            if params.base == ProfileKind::RandomPerturbed {
                return Err(Error::Config("random-perturbed needs a deterministic base".into()));
            }
            if !(params.amplitude >= 0.0 && params.amplitude.is_finite()) {
                return Err(Error::Config("amplitude must be nonnegative".into()));
            }
            let mut v = init_profile(params.base, grid, tails, params)?;
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            let spread = params.amplitude * (high - low).abs().max(f64::MIN_POSITIVE);
            for x in v.values.iter_mut() {
                *x += spread * rng.gen_range(-1.0..1.0);
            }
            Ok(v)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{DomainMode, Family};
    use crate::grid::PinMask;
    use crate::kernel::FractionalOrder;
    use crate::potential::Potential;
    use nalgebra::{DMatrix, DVector};

    fn cg(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(b.len());
        let mut r = b.clone();
        let mut p = r.clone();
        let mut rr = r.dot(&r);
        for _ in 0..10 * b.len() {
            let ap = a * &p;
            let alpha = rr / p.dot(&ap);
            x += alpha * &p;
            r -= alpha * ap;
            let next = r.dot(&r);
            if next.sqrt() < 1e-15 * b.norm() {
                break;
            }
            p = &r + (next / rr) * p;
            rr = next;
        }
        x
    }

    #[test]
    fn quadratic_matches_linear_solve() {
        // seminorm only (zero potential), ends pinned
        let n = 60;
        let grid = ProfileGrid::new(0.0, 3.0, n).unwrap();
        let pins = PinMask::new(vec![(0, -1.0), (n - 1, 1.0)], n).unwrap();
        let spec = FunctionalSpec::new(
            Family::PhaseFractional,
            Potential::polynomial(vec![0.0]),
            FractionalOrder { k: 0, s: 0.4 },
            1.0,
            grid,
        )
        .with_pins(pins);
        let f = Functional::new(spec.clone()).unwrap();
        let v0 = GridFunction::from_fn(grid, Tails::None, |x| (x - 1.5) / 1.5).unwrap();
        let res = minimize(&spec, &v0, &SolverOptions::default()).unwrap();
        assert!(res.converged);

        // oracle: Q(x) = x^T A x with A = H/2, free block solve
        let a = f.kernel().unwrap().hessian(false) * 0.5;
        let free: Vec<usize> = (1..n - 1).collect();
        let fixed = [(0usize, -1.0), (n - 1, 1.0)];
        let af = DMatrix::from_fn(free.len(), free.len(), |i, j| a[(free[i], free[j])]);
        let b = DVector::from_fn(free.len(), |i, _| {
            -fixed.iter().map(|&(j, v)| a[(free[i], j)] * v).sum::<f64>()
        });
        let xf = cg(&af, &b);
        let mut x = DVector::zeros(n);
        for (i, &fi) in free.iter().enumerate() {
            x[fi] = xf[i];
        }
        for (j, v) in fixed {
            x[j] = v;
        }
        let oracle = x.dot(&(&a * &x));
        assert!((res.energy - oracle).abs() <= 1e-8 * oracle, "{} vs {oracle}", res.energy);
    }

    #[test]
    fn unpreconditioned_run_also_converges() {
        let grid = ProfileGrid::new(-6.0, 6.0, 96).unwrap();
        let spec = FunctionalSpec::new(
            Family::PhaseInteger,
            Potential::quartic(),
            FractionalOrder { k: 1, s: 0.0 },
            1.0,
            grid,
        )
        .with_pins(PinMask::new(vec![(0, -1.0), (95, 1.0)], 96).unwrap());
        let v0 = init_profile(ProfileKind::LinearRamp, grid, Tails::None, &ProfileParams::default()).unwrap();
        let opts = SolverOptions {
            precondition: false,
            gradient_tolerance: 1e-7,
            ..SolverOptions::default()
        };
        let res = minimize(&spec, &v0, &opts).unwrap();
        assert!(res.converged, "{:?}", res.reason);
        let with = minimize(&spec, &v0, &SolverOptions::default()).unwrap();
        assert!((res.energy - with.energy).abs() < 1e-9);
        // energy monotone along the accepted iterates
        assert!(res.trace.windows(2).all(|w| w[1].energy <= w[0].energy));
    }

    #[test]
    fn start_at_minimizer_stops_immediately() {
        let grid = ProfileGrid::new(-8.0, 8.0, 128).unwrap();
        let spec = FunctionalSpec::new(
            Family::PhaseInteger,
            Potential::quartic(),
            FractionalOrder { k: 1, s: 0.0 },
            1.0,
            grid,
        );
        let v0 = init_profile(ProfileKind::Tanh, grid, Tails::None, &ProfileParams::default()).unwrap();
        let first = minimize(&spec, &v0, &SolverOptions::default()).unwrap();
        let again = minimize(&spec, &first.profile, &SolverOptions::default()).unwrap();
        assert!(again.iterations() <= 2);
        assert!(again.energy <= first.energy);
    }

    #[test]
    fn deterministic_traces_and_multi_start() {
        let grid = ProfileGrid::new(0.0, 1.0, 64).unwrap();
        let spec = FunctionalSpec::new(
            Family::FdInteger,
            Potential::truncated_quadratic(),
            FractionalOrder { k: 2, s: 0.0 },
            0.05,
            grid,
        )
        .with_pins(PinMask::boundary_layers(64, 4, 0.0, 1.0).unwrap());
        let tails = Tails::None;
        let params = ProfileParams::default();
        let ramp = init_profile(ProfileKind::LinearRamp, grid, tails, &ProfileParams {
            low: Some(0.0),
            ..params.clone()
        })
        .unwrap();
        let step = init_profile(ProfileKind::Step, grid, tails, &ProfileParams {
            low: Some(0.0),
            ..params.clone()
        })
        .unwrap();
        let opts = SolverOptions::default();
        let a = minimize(&spec, &ramp, &opts).unwrap();
        let b = minimize(&spec, &ramp, &opts).unwrap();
        assert_eq!(a, b);
        let single = multi_start(&spec, std::slice::from_ref(&ramp), &opts).unwrap();
        assert_eq!(single.best, a);
        let both = multi_start(&spec, &[ramp.clone(), step, ramp], &opts).unwrap();
        for r in both.runs.iter().flatten() {
            assert!(both.best.energy <= r.energy);
        }
        assert_eq!(both.runs[0], both.runs[2]);
        assert!(multi_start(&spec, &[], &opts).is_err());
    }

    #[test]
    fn profiles() {
        let grid = ProfileGrid::new(-5.0, 5.0, 101).unwrap();
        let tails = Tails::constant(-1.0, 1.0);
        let p = ProfileParams::default();
        let t = init_profile(ProfileKind::Tanh, grid, tails, &p).unwrap();
        assert!(t.values[50].abs() < 1e-12);
        let s = init_profile(ProfileKind::Step, grid, tails, &p).unwrap();
        let jumps = s.values.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(jumps, 1);

        let unit = ProfileGrid::new(0.0, 1.0, 20).unwrap();
        let hp = init_profile(ProfileKind::Hermite, unit, Tails::constant(0.0, 1.0), &p).unwrap();
        for (x, v) in unit.centers().iter().zip(&hp.values) {
            assert!((v - (3.0 * x * x - 2.0 * x * x * x)).abs() < 1e-14);
        }
        let r1 = init_profile(ProfileKind::RandomPerturbed, grid, tails, &ProfileParams { seed: 4, ..p.clone() }).unwrap();
        let r2 = init_profile(ProfileKind::RandomPerturbed, grid, tails, &ProfileParams { seed: 4, ..p.clone() }).unwrap();
        assert_eq!(r1, r2);
        assert!(init_profile(ProfileKind::Tanh, grid, tails, &ProfileParams { width: Some(0.0), ..p.clone() }).is_err());
        assert!(init_profile(ProfileKind::Hermite, grid, tails, &ProfileParams { k: 0, ..p }).is_err());
    }

    #[test]
    fn hermite_shape_boundary_derivatives() {
        for k in 1..=4 {
            let h = 1e-4;
            assert_eq!(hermite_shape(k, 0.0), 0.0);
            assert!((hermite_shape(k, 1.0) - 1.0).abs() < 1e-14);
            if k >= 2 {
                // first derivative vanishes at the ends
                assert!(hermite_shape(k, h) < 10.0 * h * h);
                assert!(1.0 - hermite_shape(k, 1.0 - h) < 10.0 * h * h);
            }
        }
    }

    #[test]
    fn full_line_profile_problem() {
        let grid = ProfileGrid::new(-10.0, 10.0, 400).unwrap();
        let spec = FunctionalSpec::new(
            Family::PhaseFractional,
            Potential::quartic(),
            FractionalOrder { k: 0, s: 0.75 },
            1.0,
            grid,
        )
        .with_mode(DomainMode::FullLine);
        let v0 = init_profile(ProfileKind::Tanh, grid, Tails::constant(-1.0, 1.0), &ProfileParams::default()).unwrap();
        let res = minimize(&spec, &v0, &SolverOptions::default()).unwrap();
        assert!(res.converged, "{:?} after {}", res.reason, res.iterations());
        assert!(res.energy < res.trace[0].energy);
    }
}
