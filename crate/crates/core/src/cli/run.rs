//! Command dispatch and artifact writing.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cache::Cache;
use super::check::{format_table, run_checks};
use super::config::{Command, RunConfig};
use super::export::{
    atlas_csv, history_csv, json_text, pointwise_csv, profile_dat, sweep_csv, sweep_dat, trace_csv, write_file,
};
use crate::energy::{DomainMode, Family, Functional, FunctionalSpec};
use crate::error::{Error, Result};
use crate::experiments::{
    eps_row, extrapolate_with, s_problem, s_row, EpsSweepConfig, Extrapolation, FitModel, SweepKind, SweepRecord,
    SweepRow,
};
use crate::grid::{GridFunction, ProfileGrid, Tails};
use crate::kernel::FractionalOrder;
use crate::potential::Potential;
use crate::solver::{init_profile, minimize_with, ProfileKind, ProfileParams, StopReason};
use crate::tension::{solve_profile, TensionKind, TensionProblem, TensionResult};

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// False when a result is flagged non-converged or a check failed.
    pub converged: bool,
    pub artifacts: Vec<PathBuf>,
    /// Cache hits out of lookups.
    pub cache_hits: usize,
    pub cache_lookups: usize,
    pub summary: String,
}

/// Exit status: 0 converged, 2 flagged non-converged, 1 error.
pub fn exit_code(outcome: &Result<RunOutcome>) -> i32 {
    match outcome {
        Ok(o) if o.converged => 0,
        Ok(_) => 2,
        Err(_) => 1,
    }
}

struct Ctx<'a> {
    config: &'a RunConfig,
    cache: Option<Cache>,
    out: PathBuf,
    artifacts: Vec<PathBuf>,
    hits: usize,
    lookups: usize,
}

impl Ctx<'_> {
    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.out.join(name);
        write_file(&path, text)?;
        self.artifacts.push(path);
        Ok(())
    }

    /// Cached computation of each item, evaluated in parallel, in order.
    fn cached<P, T, F>(&mut self, namespace: &str, items: &[P], compute: F) -> Result<Vec<T>>
    where
        P: Serialize + Sync,
        T: Serialize + serde::de::DeserializeOwned + Send,
        F: Fn(&P) -> Result<T> + Sync,
    {
        let cache = self.cache.as_ref();
        let results: Vec<Result<(T, bool)>> = items
            .par_iter()
            .map(|p| match cache {
                Some(c) => {
                    let key = c.key(namespace, p)?;
                    c.get_or_compute(&key, || compute(p))
                }
                None => compute(p).map(|v| (v, false)),
            })
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for r in results {
            let (v, hit) = r?;
            if cache.is_some() {
                self.lookups += 1;
                self.hits += hit as usize;
            }
            out.push(v);
        }
        Ok(out)
    }
}

/// Runs a validated config, writing artifacts under its output directory.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(config))
}

fn run_inner(config: &RunConfig) -> Result<RunOutcome> {
    let cache = config.cache.then(|| match &config.cache_dir {
        Some(dir) => Cache::new(dir.clone()),
        None => Cache::from_env(config.output_dir.join(".cache")),
    });
    let mut ctx = Ctx {
        config,
        cache,
        out: config.output_dir.clone(),
        artifacts: Vec::new(),
        hits: 0,
        lookups: 0,
    };
    let (converged, summary) = match config.command {
        Command::Tension => run_tension(&mut ctx)?,
        Command::SweepS => run_sweep_s(&mut ctx)?,
        Command::SweepEps => run_sweep_eps(&mut ctx)?,
        Command::Profile => run_profile(&mut ctx)?,
        Command::Check => run_check(&mut ctx)?,
        Command::Export => run_export(&mut ctx)?,
    };
    Ok(RunOutcome {
        converged,
        artifacts: ctx.artifacts,
        cache_hits: ctx.hits,
        cache_lookups: ctx.lookups,
        summary,
    })
}

fn default_k(kind: TensionKind) -> usize {
    match kind {
        TensionKind::MKs | TensionKind::MHalf => 0,
        TensionKind::FdMK => 2,
        _ => 1,
    }
}

fn default_s(kind: TensionKind) -> f64 {
    match kind {
        TensionKind::MKs | TensionKind::MBbm => 0.75,
        TensionKind::MMs => 0.25,
        TensionKind::FdM1s => 0.5,
        _ => 0.0,
    }
}

/// Tension problem described by the config.
pub fn tension_problem(config: &RunConfig) -> Result<TensionProblem> {
    let kind = config.tension_kind()?;
    let mut p = TensionProblem::new(
        kind,
        config.k.unwrap_or(default_k(kind)),
        config.s.unwrap_or(default_s(kind)),
    );
    if let Some(pot) = config.potential()? {
        p.potential = pot;
    }
    if let Some(d) = config.delta {
        p.delta = d;
    }
    p.schedule = config.schedule.clone();
    p.schedule.seed = config.seed;
    p.solver = config.solver.clone();
    p.solver.seed = config.seed;
    p.validate()?;
    Ok(p)
}

fn summarize(r: &TensionResult) -> String {
    format!(
        "{} k={} s={} delta={}: value {} (T {}, N {}), converged {}",
        r.kind.name(),
        r.k,
        r.s,
        r.delta,
        r.value,
        r.t_final,
        r.n_final,
        r.converged
    )
}

fn write_tension(ctx: &mut Ctx, r: &TensionResult) -> Result<()> {
    ctx.write("result.json", &json_text(r)?)?;
    ctx.write("atlas.csv", &atlas_csv(std::slice::from_ref(r))?)?;
    ctx.write("history.csv", &history_csv(r))?;
    if let Some(p) = &r.profile {
        ctx.write("profile.csv", &p.to_csv())?;
        ctx.write("profile.dat", &profile_dat(p))?;
    }
    Ok(())
}

fn run_tension(ctx: &mut Ctx) -> Result<(bool, String)> {
    let problem = tension_problem(ctx.config)?;
    let mut results = ctx.cached("tension", &[problem], solve_profile)?;
    let r = results.pop().expect("one problem");
    write_tension(ctx, &r)?;
    Ok((r.converged, summarize(&r)))
}

fn sweep_default_k(kind: SweepKind) -> usize {
    match kind {
        SweepKind::ToHalf => 0,
        _ => 1,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FitReport {
    fit: Option<Extrapolation>,
    error: Option<String>,
}

fn write_sweep(ctx: &mut Ctx, record: &SweepRecord, model: FitModel, tail: Option<usize>) -> Result<Option<Extrapolation>> {
    ctx.write("sweep.json", &json_text(record)?)?;
    ctx.write("sweep.csv", &sweep_csv(record)?)?;
    ctx.write("sweep.dat", &sweep_dat(record))?;
    let report = match extrapolate_with(record, model, tail) {
        Ok(fit) => FitReport {
            fit: Some(fit),
            error: None,
        },
        Err(e) => FitReport {
            fit: None,
            error: Some(e.to_string()),
        },
    };
    ctx.write("extrapolation.json", &json_text(&report)?)?;
    Ok(report.fit)
}

fn fit_summary(fit: Option<Extrapolation>) -> String {
    match fit {
        Some(f) => format!(
            "{} limit {} (slope {}, residual {:.3e}, {} rows)",
            f.model.name(),
            f.limit,
            f.slope,
            f.residual,
            f.rows_used
        ),
        None => "no extrapolation".into(),
    }
}

fn run_sweep_s(ctx: &mut Ctx) -> Result<(bool, String)> {
    let config = ctx.config;
    let kind = config.sweep_kind()?;
    let k = config.k.unwrap_or(sweep_default_k(kind));
    let s_list = config.s_list.clone().unwrap_or_else(|| kind.default_s_list());
    let mut template = TensionProblem::new(TensionKind::MKs, k, 0.75);
    if let Some(pot) = config.potential()? {
        template.potential = pot;
    }
    template.schedule = config.schedule.clone();
    template.schedule.seed = config.seed;
    template.solver = config.solver.clone();
    template.solver.seed = config.seed;
    let problems = s_list
        .iter()
        .map(|&s| s_problem(kind, k, s, &template))
        .collect::<Result<Vec<_>>>()?;
    let results = ctx.cached("tension", &problems, solve_profile)?;
    let mut fixed = std::collections::BTreeMap::new();
    fixed.insert("k".into(), k.into());
    fixed.insert("potential".into(), template.potential.name().into());
    let record = SweepRecord {
        sweep: kind,
        family: kind.name().into(),
        fixed,
        rows: results.iter().map(|r| s_row(kind, r, &config.transitions)).collect(),
    };
    let p: Vec<f64> = record.rows.iter().map(|r| r.param).collect();
    if !(p.windows(2).all(|w| w[1] > w[0]) || p.windows(2).all(|w| w[1] < w[0])) {
        return Err(Error::Config("field `s_list`: must be strictly monotone".into()));
    }
    ctx.write("atlas.csv", &atlas_csv(&results)?)?;
    let fit = write_sweep(ctx, &record, config.fit_model, config.fit_tail)?;
    let converged = record.rows.iter().all(|r| r.converged);
    Ok((converged, format!("{} sweep: {}", kind.name(), fit_summary(fit))))
}

/// ε-sweep config described by the run config.
pub fn eps_config(config: &RunConfig) -> Result<EpsSweepConfig> {
    let mut cfg = EpsSweepConfig::default();
    if let Some(f) = config.family {
        cfg.family = f;
    }
    if cfg.family == Family::PhaseHalf {
        cfg = EpsSweepConfig {
            transitions: cfg.transitions,
            ..crate::experiments::half_eps_config()
        };
    }
    if let Some(k) = config.k {
        cfg.k = k;
    }
    if let Some(s) = config.s {
        cfg.s = s;
    }
    if let Some(p) = config.potential()? {
        cfg.potential = p;
    } else if !cfg.family.is_phase() {
        cfg.potential = Potential::truncated_quadratic();
    }
    if let Some(eps) = &config.eps {
        cfg.eps = eps.to_vec();
    }
    if let Some(n) = config.cells {
        cfg.cells = n;
    }
    cfg.transitions = config.transitions;
    cfg.solver = config.solver.clone();
    cfg.solver.seed = config.seed;
    cfg.validate()?;
    Ok(cfg)
}

fn run_sweep_eps(ctx: &mut Ctx) -> Result<(bool, String)> {
    let cfg = eps_config(ctx.config)?;
    let items: Vec<(EpsSweepConfig, f64)> = cfg
        .eps
        .iter()
        .map(|&e| {
            let mut c = cfg.clone();
            c.eps = vec![e];
            (c, e)
        })
        .collect();
    let rows: Vec<SweepRow> = ctx.cached("eps-row", &items, |(c, e)| eps_row(c, *e))?;
    let mut fixed = std::collections::BTreeMap::new();
    fixed.insert("k".into(), cfg.k.into());
    fixed.insert("s".into(), cfg.s.into());
    fixed.insert("cells".into(), cfg.cells.into());
    fixed.insert("potential".into(), cfg.potential.name().into());
    let record = SweepRecord {
        sweep: SweepKind::Eps,
        family: cfg.family.name().into(),
        fixed,
        rows,
    };
    let tail = ctx
        .config
        .fit_tail
        .or((cfg.family == Family::PhaseHalf).then_some(3));
    let fit = write_sweep(ctx, &record, ctx.config.fit_model, tail)?;
    let converged = record.rows.iter().all(|r| r.converged);
    let last = record.rows.last().expect("nonempty sweep");
    Ok((
        converged,
        format!(
            "{} eps sweep: energy {} at eps {}, transitions {}/{}/{}; {}",
            record.family,
            last.energy,
            last.param,
            last.inner_transitions,
            last.outer_upper,
            last.outer_lower,
            fit_summary(fit)
        ),
    ))
}

/// Contents of `profile.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileReport {
    pub family: Family,
    pub k: usize,
    pub s: f64,
    pub eps: f64,
    pub energy: f64,
    pub converged: bool,
    pub reason: StopReason,
    pub iterations: usize,
    pub profile: GridFunction,
}

fn run_profile(ctx: &mut Ctx) -> Result<(bool, String)> {
    let config = ctx.config;
    let family = match (config.family, &config.kind) {
        (Some(f), _) => f,
        (None, Some(k)) => serde_json::from_value(serde_json::Value::String(k.clone()))
            .map_err(|_| Error::Config(format!("field `kind`: unknown family {k:?}")))?,
        (None, None) => return Err(Error::Config("field `family`: required".into())),
    };
    let k = config.k.unwrap_or(1);
    let s = config.s.unwrap_or(if family == Family::PhaseHalf { 0.5 } else { 0.0 });
    let eps = config.eps.as_ref().map(|e| e.to_vec()[0]).unwrap_or(1.0);
    let cells = config.cells.unwrap_or(512);
    let full = config.domain_mode == DomainMode::FullLine;
    let [a, b] = config.interval.unwrap_or(if full { [-10.0, 10.0] } else { [0.0, 1.0] });
    let grid = ProfileGrid::new(a, b, cells)?;
    let potential = match config.potential()? {
        Some(p) => p,
        None if family.is_phase() => Potential::quartic(),
        None => Potential::truncated_quadratic(),
    };
    let mut spec = FunctionalSpec::new(family, potential, FractionalOrder { k, s }, eps, grid)
        .with_mode(config.domain_mode);
    if let Some(sc) = config.scaling {
        spec = spec.with_scaling(sc);
    }
    let f = Functional::new(spec)?;
    let delta = config.delta.unwrap_or(1.0);
    let tails = match (full, family.is_phase()) {
        (false, _) => Tails::None,
        (true, true) if family == Family::PhaseHalf => {
            return Err(Error::Unsupported(
                "full-line phase-half profiles have infinite energy; use a bounded domain".into(),
            ))
        }
        (true, true) => Tails::constant(-1.0, 1.0),
        (true, false) => Tails::constant(0.0, delta),
    };
    let (low, high) = if family.is_phase() { (-1.0, 1.0) } else { (0.0, delta) };
    let params = ProfileParams {
        low: Some(low),
        high: Some(high),
        width: (config.start.unwrap_or(ProfileKind::Tanh) == ProfileKind::Tanh).then_some(eps),
        k: k.max(1),
        seed: config.seed,
        ..ProfileParams::default()
    };
    let v0 = init_profile(config.start.unwrap_or(ProfileKind::Tanh), grid, tails, &params)?;
    let mut solver = config.solver.clone();
    solver.seed = config.seed;
    let r = minimize_with(&f, &v0, &solver, None)?;
    let report = ProfileReport {
        family,
        k,
        s,
        eps,
        energy: r.energy,
        converged: r.converged,
        reason: r.reason,
        iterations: r.iterations(),
        profile: r.profile.clone(),
    };
    ctx.write("profile.json", &json_text(&report)?)?;
    ctx.write("profile.csv", &r.profile.to_csv())?;
    ctx.write("profile.dat", &profile_dat(&r.profile))?;
    ctx.write("trace.csv", &trace_csv(&r.trace))?;
    Ok((
        r.converged,
        format!(
            "{} profile: energy {} after {} iterations ({:?})",
            family.name(),
            r.energy,
            r.iterations(),
            r.reason
        ),
    ))
}

fn run_check(ctx: &mut Ctx) -> Result<(bool, String)> {
    let rows = run_checks();
    let table = format_table(&rows);
    let mut csv = String::from("name,passed,detail\n");
    for r in &rows {
        csv.push_str(&format!("\"{}\",{},\"{}\"\n", r.name, r.passed, r.detail.replace('"', "'")));
    }
    ctx.write("check.csv", &csv)?;
    Ok((rows.iter().all(|r| r.passed), table.trim_end().to_string()))
}

/// Result files `export` understands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exportable {
    Many(Vec<TensionResult>),
    One(Box<TensionResult>),
    Profile(Box<ProfileReport>),
    Sweep(SweepRecord),
    Pointwise(Vec<crate::experiments::PointwiseRow>),
}

pub fn read_exportable(path: &Path) -> Result<Exportable> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: not a result file: {e}", path.display())))
}

fn run_export(ctx: &mut Ctx) -> Result<(bool, String)> {
    let path = ctx.config.input.clone().expect("validated");
    match read_exportable(&path)? {
        Exportable::Many(rs) => {
            ctx.write("atlas.csv", &atlas_csv(&rs)?)?;
            Ok((rs.iter().all(|r| r.converged), format!("exported {} results", rs.len())))
        }
        Exportable::One(r) => {
            write_tension(ctx, &r)?;
            Ok((r.converged, summarize(&r)))
        }
        Exportable::Profile(p) => {
            ctx.write("profile.csv", &p.profile.to_csv())?;
            ctx.write("profile.dat", &profile_dat(&p.profile))?;
            Ok((p.converged, format!("exported {} profile values", p.profile.len())))
        }
        Exportable::Sweep(rec) => {
            ctx.write("sweep.csv", &sweep_csv(&rec)?)?;
            ctx.write("sweep.dat", &sweep_dat(&rec))?;
            Ok((
                rec.rows.iter().all(|r| r.converged),
                format!("exported {} sweep rows", rec.rows.len()),
            ))
        }
        Exportable::Pointwise(rows) => {
            ctx.write("pointwise.csv", &pointwise_csv(&rows)?)?;
            Ok((true, format!("exported {} pointwise rows", rows.len())))
        }
    }
}
