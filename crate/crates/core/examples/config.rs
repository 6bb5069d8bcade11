//! Prints the built-in experiment configuration as TOML, optionally with a
//! different master seed.
//!
//! ```text
//! cargo run --example config -- [seed] > my.toml
//! ```

use triage_fusion::experiment::ExperimentConfig;

fn main() -> triage_fusion::Result<()> {
    let mut cfg = ExperimentConfig::default();
    if let Some(s) = std::env::args().nth(1) {
        cfg.seed = s.parse().map_err(|_| triage_fusion::Error::Config(format!("bad seed `{s}`")))?;
    }
    print!("{}", cfg.to_toml_string()?);
    Ok(())
}
