//! Multi-seed run of the default synthetic benchmark: fusion against the
//! unimodal baselines on adults, and pediatric QWK across symmetric dropout
//! rates.
//!
//! ```text
//! cargo run --release --example directional_benchmark -- [config.toml] [n_seeds] [first_seed]
//! ```

use std::time::Instant;

use triage_fusion::experiment::{run_pipeline, run_symmetric_sweep, ExperimentConfig, MULTIMODAL};

fn main() -> triage_fusion::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = match args.first().filter(|a| a.ends_with(".toml")) {
        Some(p) => ExperimentConfig::load(p.as_ref())?,
        None => ExperimentConfig::default(),
    };
    let nums: Vec<u64> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let n_seeds = nums.first().copied().unwrap_or(10);
    let first = nums.get(1).copied().unwrap_or(0);
    let start = Instant::now();
    let (mut a_wins, mut b_wins, mut c_wins) = (0, 0, 0);
    for s in first..first + n_seeds {
        cfg.seed = s;
        let run = run_pipeline(&cfg)?;
        let art = &run.artifacts;
        let qwk = |name: &str| art.adult_rows.iter().find(|r| r.model == name).map(|r| r.metrics.qwk);
        let fused = qwk(MULTIMODAL).unwrap();
        let best_uni = art
            .adult_rows
            .iter()
            .filter(|r| r.model != MULTIMODAL)
            .map(|r| r.metrics.qwk)
            .fold(f64::NEG_INFINITY, f64::max);
        let sweep = run_symmetric_sweep(art, &cfg)?;
        let ped = |p: f64| {
            sweep
                .iter()
                .find(|c| (c.p_tab - p).abs() < 1e-9)
                .and_then(|c| c.pediatric)
                .map(|m| m.qwk)
        };
        let (q0, q3, q4) = (ped(0.0).unwrap(), ped(0.3).unwrap(), ped(0.4).unwrap());
        let peak = q3.max(q4);
        let high = sweep
            .iter()
            .filter(|c| c.p_tab >= 0.5 - 1e-9)
            .filter_map(|c| c.pediatric.map(|m| m.qwk))
            .fold(f64::NEG_INFINITY, f64::max);
        let (a, b, c) = (fused > best_uni, peak > q0, high < peak);
        a_wins += a as u32;
        b_wins += b as u32;
        c_wins += c as u32;
        let curve: Vec<String> = sweep
            .iter()
            .filter_map(|c| c.pediatric.map(|m| format!("{:.4}", m.qwk)))
            .collect();
        let uni: Vec<String> = art.adult_rows.iter().map(|r| format!("{:.3}", r.metrics.qwk)).collect();
        let ped_uni: Vec<String> = art.pediatric_rows.iter().map(|r| format!("{:.3}", r.metrics.qwk)).collect();
        println!(
            "seed {s}: adult [{}] ped [{}] ped sweep [{}] a={a} b={b} c={c}",
            uni.join(" "),
            ped_uni.join(" "),
            curve.join(" ")
        );
    }
    println!(
        "fusion beats unimodal {a_wins}/{n_seeds}; 0.3/0.4 beats 0 {b_wins}/{n_seeds}; >=0.5 below peak {c_wins}/{n_seeds}; {:.1}s",
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
