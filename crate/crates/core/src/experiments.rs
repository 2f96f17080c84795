//! ε-sweeps with transition counting, s-sweeps towards the critical
//! exponents, affine extrapolation in the gap, and pointwise checks of the
//! BBM and MS limits on fixed functions.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::energy::{DomainMode, Family, Functional, FunctionalSpec};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, PinMask, ProfileGrid, Tails};
use crate::kernel::{FractionalOrder, KernelMatrix, ScalingVariant};
use crate::potential::Potential;
use crate::solver::{init_profile, multi_start_with, ProfileKind, ProfileParams, SolverOptions};
use crate::tension::{solve_profile, RefinementStep, TensionKind, TensionProblem, TensionResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionConfig {
    pub eta: f64,
    pub r: f64,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        TransitionConfig { eta: 0.25, r: 0.1 }
    }
}

impl TransitionConfig {
    pub fn new(eta: f64, r: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 0.5) {
            return Err(Error::Domain(format!("η must lie in (0, 1/2), got {eta}")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Domain(format!("r must be positive, got {r}")));
        }
        Ok(TransitionConfig { eta, r })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionCounts {
    pub inner: usize,
    pub outer_upper: usize,
    pub outer_lower: usize,
}

/// Completed passages from below `lo` to above `hi` or back.
fn crossings(values: &[f64], lo: f64, hi: f64) -> usize {
    #[derive(PartialEq)]
    enum Side {
        Below,
        Above,
    }
    let mut side = None;
    let mut count = 0;
    for &x in values {
        if x < lo {
            if side == Some(Side::Above) {
                count += 1;
            }
            side = Some(Side::Below);
        } else if x > hi {
            if side == Some(Side::Below) {
                count += 1;
            }
            side = Some(Side::Above);
        }
    }
    count
}

pub fn count_transitions(v: &GridFunction, cfg: &TransitionConfig) -> TransitionCounts {
    let (eta, r) = (cfg.eta, cfg.r);
    TransitionCounts {
        inner: crossings(&v.values, -1.0 + eta, 1.0 - eta),
        outer_upper: crossings(&v.values, 1.0 + r, 1.0 + 2.0 * r),
        outer_lower: crossings(&v.values, -1.0 - 2.0 * r, -1.0 - r),
    }
}

/// Hex SHA-256 of the little-endian bytes of the values.
pub fn checksum(values: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for v in values {
        hasher.update(v.to_le_bytes());
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Eps,
    ToHalf,
    BbmLeft,
    MsRight,
}

impl SweepKind {
    /// Distance of a sweep parameter to its limit.
    pub fn gap(&self, param: f64) -> f64 {
        match self {
            SweepKind::Eps => 1.0 / param.ln().abs(),
            SweepKind::ToHalf => 2.0 * param - 1.0,
            SweepKind::BbmLeft => 1.0 - param,
            SweepKind::MsRight => param,
        }
    }

    pub fn default_s_list(&self) -> Vec<f64> {
        match self {
            SweepKind::Eps => vec![],
            SweepKind::ToHalf => vec![0.75, 0.7, 0.65, 0.6, 0.55],
            SweepKind::BbmLeft => vec![0.8, 0.9, 0.95, 0.99],
            SweepKind::MsRight => vec![0.2, 0.1, 0.05, 0.02],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepKind::Eps => "eps",
            SweepKind::ToHalf => "to_half",
            SweepKind::BbmLeft => "bbm_left",
            SweepKind::MsRight => "ms_right",
        }
    }
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SweepKind::Eps, SweepKind::ToHalf, SweepKind::BbmLeft, SweepKind::MsRight]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown sweep kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub energy: f64,
    pub inner_transitions: usize,
    pub outer_upper: usize,
    pub outer_lower: usize,
    pub converged: bool,
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep: SweepKind,
    pub family: String,
    pub fixed: BTreeMap<String, serde_json::Value>,
    pub rows: Vec<SweepRow>,
}

impl SweepRecord {
    fn check_monotone(&self) -> Result<()> {
        let p: Vec<f64> = self.rows.iter().map(|r| r.param).collect();
        let up = p.windows(2).all(|w| w[1] > w[0]);
        let down = p.windows(2).all(|w| w[1] < w[0]);
        if up || down {
            Ok(())
        } else {
            Err(Error::Config("sweep parameters must be strictly monotone".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsSweepConfig {
    pub family: Family,
    pub k: usize,
    pub s: f64,
    pub potential: Potential,
    pub eps: Vec<f64>,
    pub cells: usize,
    /// Fraction of the cells pinned at each end.
    pub layer: f64,
    pub transitions: TransitionConfig,
    pub solver: SolverOptions,
}

impl Default for EpsSweepConfig {
    fn default() -> Self {
        EpsSweepConfig {
            family: Family::PhaseInteger,
            k: 1,
            s: 0.0,
            potential: Potential::quartic(),
            eps: (2..=7).map(|j| 0.5f64.powi(j)).collect(),
            cells: 4096,
            layer: 0.1,
            transitions: TransitionConfig::default(),
            solver: SolverOptions::default(),
        }
    }
}

impl EpsSweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps.is_empty() {
            return Err(Error::Config("eps list is empty".into()));
        }
        if !self.eps.windows(2).all(|w| w[1] < w[0]) {
            return Err(Error::Config("eps list must be strictly decreasing".into()));
        }
        if !self.eps.iter().all(|&e| e > 0.0 && e <= 1.0) {
            return Err(Error::Config("eps values must lie in (0, 1]".into()));
        }
        if !(self.layer > 0.0 && self.layer < 0.5) {
            return Err(Error::Config("layer fraction must lie in (0, 1/2)".into()));
        }
        TransitionConfig::new(self.transitions.eta, self.transitions.r)?;
        self.solver.validate()
    }

    fn spec(&self, eps: f64) -> Result<FunctionalSpec> {
        let grid = ProfileGrid::new(0.0, 1.0, self.cells)?;
        let width = ((self.layer * self.cells as f64).round() as usize).max(1);
        let (low, high) = if self.family.is_phase() { (-1.0, 1.0) } else { (0.0, 1.0) };
        let pins = PinMask::boundary_layers(self.cells, width, low, high)?;
        Ok(FunctionalSpec::new(
            self.family,
            self.potential.clone(),
            FractionalOrder { k: self.k, s: self.s },
            eps,
            grid,
        )
        .with_pins(pins))
    }
}

/// One row of an ε-sweep: best of a transplanted-tanh, a ramp and a step
/// start on `(0, 1)` with pinned boundary layers.
pub fn eps_row(cfg: &EpsSweepConfig, eps: f64) -> Result<SweepRow> {
    let spec = cfg.spec(eps)?;
    let grid = spec.grid;
    let f = Functional::new(spec)?;
    let (low, high) = if cfg.family.is_phase() { (-1.0, 1.0) } else { (0.0, 1.0) };
    let base = ProfileParams {
        center: Some(0.5),
        low: Some(low),
        high: Some(high),
        ..ProfileParams::default()
    };
    let starts = vec![
        init_profile(ProfileKind::Tanh, grid, Tails::None, &ProfileParams {
            width: Some(eps),
            ..base.clone()
        })?,
        init_profile(ProfileKind::LinearRamp, grid, Tails::None, &ProfileParams {
            width: Some(1.0 - 2.0 * cfg.layer),
            ..base.clone()
        })?,
        init_profile(ProfileKind::Step, grid, Tails::None, &base)?,
    ];
    let ms = multi_start_with(&f, &starts, &cfg.solver)?;
    let counts = count_transitions(&ms.best.profile, &cfg.transitions);
    Ok(SweepRow {
        param: eps,
        energy: ms.best.energy,
        inner_transitions: counts.inner,
        outer_upper: counts.outer_upper,
        outer_lower: counts.outer_lower,
        converged: ms.best.converged,
        checksum: checksum(&ms.best.profile.values),
    })
}

pub fn eps_sweep(cfg: &EpsSweepConfig) -> Result<SweepRecord> {
    cfg.validate()?;
    let rows = cfg
        .eps
        .par_iter()
        .map(|&eps| eps_row(cfg, eps))
        .collect::<Result<Vec<_>>>()?;
    let mut fixed = BTreeMap::new();
    fixed.insert("k".into(), cfg.k.into());
    fixed.insert("s".into(), cfg.s.into());
    fixed.insert("cells".into(), cfg.cells.into());
    fixed.insert("potential".into(), cfg.potential.name().into());
    Ok(SweepRecord {
        sweep: SweepKind::Eps,
        family: cfg.family.name().into(),
        fixed,
        rows,
    })
}

/// Tension problem solved at one `s` of an s-sweep.
pub fn s_problem(kind: SweepKind, k: usize, s: f64, template: &TensionProblem) -> Result<TensionProblem> {
    let tension = match kind {
        SweepKind::ToHalf => TensionKind::MKs,
        SweepKind::BbmLeft => TensionKind::MBbm,
        SweepKind::MsRight => TensionKind::MMs,
        SweepKind::Eps => return Err(Error::Config("eps is not an s-sweep".into())),
    };
    let mut p = template.clone();
    p.kind = tension;
    p.k = k;
    p.s = s;
    p.validate()?;
    Ok(p)
}

/// Tension results along an s-sweep, in input order.
pub fn s_sweep_results(
    kind: SweepKind,
    k: usize,
    s_list: &[f64],
    template: &TensionProblem,
) -> Result<Vec<TensionResult>> {
    let problems = s_list
        .iter()
        .map(|&s| s_problem(kind, k, s, template))
        .collect::<Result<Vec<_>>>()?;
    problems.par_iter().map(solve_profile).collect()
}

/// Row reported for one s: `(2s-1) m_s` for `to_half`, the scaled tension
/// otherwise.
pub fn s_row(kind: SweepKind, r: &TensionResult, transitions: &TransitionConfig) -> SweepRow {
    let factor = if kind == SweepKind::ToHalf { 2.0 * r.s - 1.0 } else { 1.0 };
    let (counts, sum) = match &r.profile {
        Some(p) => (count_transitions(p, transitions), checksum(&p.values)),
        None => (
            TransitionCounts {
                inner: 0,
                outer_upper: 0,
                outer_lower: 0,
            },
            checksum(&[]),
        ),
    };
    SweepRow {
        param: r.s,
        energy: factor * r.value,
        inner_transitions: counts.inner,
        outer_upper: counts.outer_upper,
        outer_lower: counts.outer_lower,
        converged: r.converged,
        checksum: sum,
    }
}

pub fn s_sweep(kind: SweepKind, k: usize, s_list: &[f64], template: &TensionProblem) -> Result<SweepRecord> {
    let results = s_sweep_results(kind, k, s_list, template)?;
    let cfg = TransitionConfig::default();
    let mut fixed = BTreeMap::new();
    fixed.insert("k".into(), k.into());
    fixed.insert("potential".into(), template.potential.name().into());
    let record = SweepRecord {
        sweep: kind,
        family: kind.name().into(),
        fixed,
        rows: results.iter().map(|r| s_row(kind, r, &cfg)).collect(),
    };
    record.check_monotone()?;
    Ok(record)
}

/// Fit model in the gap `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `limit + a g`
    #[default]
    Affine,
    /// `limit + a g + b g^2`
    Quadratic,
    /// `limit + a g + b g ln g`
    GapLog,
}

impl FitModel {
    fn basis(&self, g: f64) -> Vec<f64> {
        match self {
            FitModel::Affine => vec![1.0, g],
            FitModel::Quadratic => vec![1.0, g, g * g],
            FitModel::GapLog => vec![1.0, g, g * g.ln()],
        }
    }

    fn min_rows(&self) -> usize {
        match self {
            FitModel::Affine => 3,
            _ => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FitModel::Affine => "affine",
            FitModel::Quadratic => "quadratic",
            FitModel::GapLog => "gap_log",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub model: FitModel,
    pub limit: f64,
    /// Coefficient of the linear term.
    pub slope: f64,
    /// Largest relative deviation of the data from the fit.
    pub residual: f64,
    pub rows_used: usize,
}

/// Least-squares fit `energy = limit + slope * gap` over the converged rows.
pub fn extrapolate(record: &SweepRecord) -> Result<Extrapolation> {
    extrapolate_with(record, FitModel::Affine, None)
}

/// Fit over the converged rows, optionally only the last `tail` of them
/// (the ones closest to the limit).
pub fn extrapolate_with(record: &SweepRecord, model: FitModel, tail: Option<usize>) -> Result<Extrapolation> {
    let mut pts: Vec<(f64, f64)> = record
        .rows
        .iter()
        .filter(|r| r.converged)
        .map(|r| (record.sweep.gap(r.param), r.energy))
        .collect();
    if let Some(t) = tail {
        let skip = pts.len().saturating_sub(t);
        pts.drain(..skip);
    }
    fit(&pts, model)
}

pub fn fit_affine(pts: &[(f64, f64)]) -> Result<Extrapolation> {
    fit(pts, FitModel::Affine)
}

pub fn fit(pts: &[(f64, f64)], model: FitModel) -> Result<Extrapolation> {
    if pts.len() < model.min_rows() {
        return Err(Error::InsufficientData(format!(
            "{} extrapolation needs {} converged rows, got {}",
            model.name(),
            model.min_rows(),
            pts.len()
        )));
    }
    let cols = model.basis(1.0).len();
    let a = DMatrix::from_fn(pts.len(), cols, |i, j| model.basis(pts[i].0)[j]);
    let b = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-12 * smax {
        return Err(Error::InsufficientData("gaps too degenerate for the fit".into()));
    }
    let c = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::InsufficientData(e.to_string()))?;
    let fitted = &a * &c;
    let residual = fitted
        .iter()
        .zip(b.iter())
        .map(|(f, y)| (f - y).abs() / y.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok(Extrapolation {
        model,
        limit: c[0],
        slope: c[1],
        residual,
        rows_used: pts.len(),
    })
}

/// The s = 1/2 constant by extrapolating `(2s-1) m_s` over the default
/// `to_half` list.
pub(crate) fn half_constant(p: &TensionProblem) -> Result<TensionResult> {
    let kind = SweepKind::ToHalf;
    let s_list = kind.default_s_list();
    let results = s_sweep_results(kind, 0, &s_list, p)?;
    let cfg = TransitionConfig::default();
    let record = SweepRecord {
        sweep: kind,
        family: kind.name().into(),
        fixed: BTreeMap::new(),
        rows: results.iter().map(|r| s_row(kind, r, &cfg)).collect(),
    };
    let fit = extrapolate(&record)?;
    let history = results
        .iter()
        .zip(&record.rows)
        .map(|(r, row)| RefinementStep {
            t: r.t_final,
            n: r.n_final,
            value: row.energy,
            converged: r.converged,
        })
        .collect();
    let converged = results.iter().all(|r| r.converged);
    let last = results.last().expect("nonempty default list");
    Ok(TensionResult {
        kind: TensionKind::MHalf,
        k: 0,
        s: 0.5,
        delta: p.delta,
        value: fit.limit,
        t_final: last.t_final,
        n_final: last.n_final,
        profile: None,
        history,
        converged,
        notes: vec![format!(
            "extrapolated from (2s-1) m_s over s = {s_list:?}; slope {:.6}, residual {:.3e}",
            fit.slope, fit.residual
        )],
    })
}

/// Defaults of the phase-half ε-sweep: ε from 1/16 down to 1/1024 on
/// 16384 cells.
pub fn half_eps_config() -> EpsSweepConfig {
    EpsSweepConfig {
        family: Family::PhaseHalf,
        k: 0,
        s: 0.5,
        eps: (4..=10).map(|j| 0.5f64.powi(j)).collect(),
        cells: 16384,
        ..EpsSweepConfig::default()
    }
}

/// Phase-half ε-sweep plus a Richardson step: affine fit in `1 / |log ε|`
/// over the last `tail` rows.
pub fn half_eps_route(cfg: &EpsSweepConfig, tail: usize) -> Result<(SweepRecord, Extrapolation)> {
    let mut cfg = cfg.clone();
    cfg.family = Family::PhaseHalf;
    cfg.k = 0;
    cfg.s = 0.5;
    let record = eps_sweep(&cfg)?;
    let fit = extrapolate_with(&record, FitModel::Affine, Some(tail))?;
    Ok((record, fit))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseRow {
    pub s: f64,
    pub scaled: f64,
    pub target: f64,
}

fn constant_tails(v: &GridFunction) -> Result<(f64, f64)> {
    match v.tails {
        Tails::Constant { left, right } => Ok((left, right)),
        Tails::None => Err(Error::Spec("pointwise checks need constant tails".into())),
    }
}

/// Dirichlet integral of the piecewise-linear interpolant, tail faces included.
pub fn dirichlet_integral(v: &GridFunction) -> Result<f64> {
    let (l, r) = constant_tails(v)?;
    let h = v.grid.h();
    let seq: Vec<f64> = std::iter::once(l).chain(v.values.iter().copied()).chain(std::iter::once(r)).collect();
    Ok(seq.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / h)
}

/// `∫ v^2` of the piecewise-linear interpolant (zero tails).
pub fn l2_squared(v: &GridFunction) -> Result<f64> {
    let (l, r) = constant_tails(v)?;
    if l != 0.0 || r != 0.0 {
        return Err(Error::Spec("L2 norm needs zero tails".into()));
    }
    let h = v.grid.h();
    let seq: Vec<f64> = std::iter::once(0.0).chain(v.values.iter().copied()).chain(std::iter::once(0.0)).collect();
    Ok(h * seq
        .windows(2)
        .map(|w| (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]) / 3.0)
        .sum::<f64>())
}

fn seminorm_at(v: &GridFunction, s: f64) -> Result<f64> {
    KernelMatrix::new(v.grid, s)?.seminorm(v)
}

/// Rows `((1-s) Q_s(v), ∫|v'|^2)`.
pub fn pointwise_bbm_check(v: &GridFunction, s_list: &[f64]) -> Result<Vec<PointwiseRow>> {
    let target = dirichlet_integral(v)?;
    s_list
        .par_iter()
        .map(|&s| {
            Ok(PointwiseRow {
                s,
                scaled: (1.0 - s) * seminorm_at(v, s)?,
                target,
            })
        })
        .collect()
}

/// Rows `(s Q_s(v), 2 ∫|v|^2)` for a zero-tailed `v`.
pub fn pointwise_ms_check(v: &GridFunction, s_list: &[f64]) -> Result<Vec<PointwiseRow>> {
    let target = 2.0 * l2_squared(v)?;
    s_list
        .par_iter()
        .map(|&s| {
            Ok(PointwiseRow {
                s,
                scaled: s * seminorm_at(v, s)?,
                target,
            })
        })
        .collect()
}

/// Default smooth function of the BBM check: `tanh(x / λ)` on `(-20, 20)`.
pub fn bbm_default_profile(cells: usize, lambda: f64) -> Result<GridFunction> {
    let grid = ProfileGrid::new(-20.0, 20.0, cells)?;
    GridFunction::from_fn(grid, Tails::constant(-1.0, 1.0), |x| (x / lambda).tanh())
}

/// Smooth bump `exp(1 - 1/(1 - x^2))` supported in `(-1, 1)`, sampled on
/// `(-2, 2)` with zero tails, shifted by `center`.
pub fn bump(grid: ProfileGrid, centers: &[f64]) -> Result<GridFunction> {
    let b = |x: f64| {
        if x.abs() < 1.0 {
            (1.0 - 1.0 / (1.0 - x * x)).exp()
        } else {
            0.0
        }
    };
    GridFunction::from_fn(grid, Tails::constant(0.0, 0.0), |x| centers.iter().map(|c| b(x - c)).sum())
}

/// Full-line profile used as the domain-mode default for fd-fractional
/// tensions; bounded mode is used for ε-sweeps.
pub fn fd_fractional_mode(for_tension: bool) -> DomainMode {
    if for_tension {
        DomainMode::FullLine
    } else {
        DomainMode::Bounded
    }
}

/// Scaling used by each s-sweep kind.
pub fn sweep_scaling(kind: SweepKind) -> ScalingVariant {
    match kind {
        SweepKind::BbmLeft => ScalingVariant::Bbm,
        SweepKind::MsRight => ScalingVariant::Ms,
        _ => ScalingVariant::None,
    }
}
