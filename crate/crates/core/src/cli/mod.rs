//! Configuration, caching, exporters and the command dispatcher behind the
//! `tensionlab` binary.

pub mod cache;
pub mod check;
pub mod config;
pub mod export;
pub mod run;

pub use cache::{cache_key, Cache, CacheEntry};
pub use config::{load_config, parse_config, Command, RunConfig};
pub use export::{export_csv, fmt_float};
pub use run::{exit_code, run, RunOutcome};
