use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use tensionlab::cli::{config::config_from_value, exit_code, run};

#[derive(Parser)]
#[command(name = "tensionlab", version, about = "Surface tensions and sharp-interface checks for 1D singular perturbations")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args, Default)]
struct Common {
    /// JSON config; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// m_ks, m_k_integer, m_half, m_bbm, m_ms, fd_m_k, fd_m_1s; or the
    /// sweep kind (to_half, bbm_left, ms_right)
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    s: Option<f64>,
    /// Jump size for fd kinds
    #[arg(long)]
    delta: Option<f64>,
    /// quartic or truncated-quadratic
    #[arg(long)]
    potential: Option<String>,
    /// phase-fractional, phase-integer, phase-half, fd-integer, fd-fractional
    #[arg(long)]
    family: Option<String>,
    /// Comma-separated, decreasing
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    cells: Option<usize>,
    /// Comma-separated s values
    #[arg(long, value_delimiter = ',')]
    s_list: Option<Vec<f64>>,
    /// Output directory [default: out]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Defaults to $TENSIONLAB_CACHE, then <out>/.cache
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    no_cache: bool,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Result JSON for `export`
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Surface tension or jump constant of one problem
    Tension(Common),
    /// ε-sweep with transition counting
    SweepEps(Common),
    /// s-sweep towards a critical exponent, with extrapolation
    SweepS(Common),
    /// One minimization of a discrete functional
    Profile(Common),
    /// Invariant suite
    Check(Common),
    /// CSV and plot data from a result JSON
    Export(Common),
}

fn merged(name: &str, c: Common) -> Result<Value, String> {
    let mut map = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            match serde_json::from_str::<Value>(&text)
                .map_err(|e| format!("{}: parse error at line {}, column {}: {e}", path.display(), e.line(), e.column()))?
            {
                Value::Object(m) => m,
                _ => return Err("config must be a JSON object".into()),
            }
        }
        None => Map::new(),
    };
    let mut set = |key: &str, v: Option<Value>| {
        if let Some(v) = v {
            map.insert(key.to_string(), v);
        }
    };
    set("command", Some(json!(name)));
    set("kind", c.kind.map(Value::from));
    set("k", c.k.map(Value::from));
    set("s", c.s.map(Value::from));
    set("delta", c.delta.map(Value::from));
    set("potential", c.potential.map(Value::from));
    set("family", c.family.map(Value::from));
    set("eps", c.eps.map(Value::from));
    set("cells", c.cells.map(Value::from));
    set("s_list", c.s_list.map(Value::from));
    set("output_dir", c.out.map(|p| Value::from(p.display().to_string())));
    set("cache_dir", c.cache_dir.map(|p| Value::from(p.display().to_string())));
    set("cache", c.no_cache.then_some(Value::Bool(false)));
    set("threads", c.threads.map(Value::from));
    set("seed", c.seed.map(Value::from));
    set("input", c.input.map(|p| Value::from(p.display().to_string())));
    Ok(Value::Object(map))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (name, common) = match cli.command {
        Cmd::Tension(c) => ("tension", c),
        Cmd::SweepEps(c) => ("sweep-eps", c),
        Cmd::SweepS(c) => ("sweep-s", c),
        Cmd::Profile(c) => ("profile", c),
        Cmd::Check(c) => ("check", c),
        Cmd::Export(c) => ("export", c),
    };
    let config = match merged(name, common).map_err(tensionlab::Error::Config).and_then(config_from_value) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let outcome = run(&config);
    match &outcome {
        Ok(o) => {
            println!("{}", o.summary);
            if o.cache_lookups > 0 {
                println!("cache: {}/{} hits", o.cache_hits, o.cache_lookups);
            }
            for a in &o.artifacts {
                println!("wrote {}", a.display());
            }
            if !o.converged {
                eprintln!("warning: flagged as not converged");
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&outcome) as u8)
}
