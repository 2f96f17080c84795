//! Driving the command layer from a JSON config: the second run is served
//! from the cache and rewrites byte-identical artifacts.
//!
//! cargo run --example cli_config

use tensionlab::cli::{parse_config, run};

fn main() -> tensionlab::Result<()> {
    let out = std::env::temp_dir().join("tensionlab-example");
    let mut config = parse_config(r#"{"command": "sweep-s", "kind": "ms_right", "k": 1, "s_list": [0.2, 0.1, 0.05]}"#)?;
    config.output_dir = out.clone();
    config.cache_dir = Some(out.join("cache"));

    for pass in 1..=2 {
        let outcome = run(&config)?;
        println!("pass {pass}: {}", outcome.summary);
        println!("  cache hits {}/{}", outcome.cache_hits, outcome.cache_lookups);
        for a in &outcome.artifacts {
            println!("  {}", a.display());
        }
    }

    match parse_config(r#"{"command": "tension", "kind": "m_ks", "epslion": 0.1}"#) {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("\nrejected config: {e}"),
    }
    Ok(())
}
