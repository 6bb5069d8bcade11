//! End-to-end run on a reduced synthetic cohort: base models, fusion,
//! both dropout sweeps and the age strata, written as csv/txt/tex tables.
//!
//! ```text
//! cargo run --release --example report -- [out_dir]
//! ```

use triage_fusion::experiment::{emit_report, render_adult_table, run_experiment, ExperimentConfig, Grid, ReportFormat};

fn main() -> triage_fusion::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "triage-report-example".into());
    let mut cfg = ExperimentConfig::default();
    if let Some(s) = cfg.data.synthetic.as_mut() {
        s.n_records = 6000;
    }
    cfg.dropout.asymmetric = Grid {
        min: 0.0,
        max: 0.8,
        step: 0.4,
    };
    let report = run_experiment(&cfg)?;
    print!("{}", render_adult_table(&report.adult, ReportFormat::Txt));
    let formats = [ReportFormat::Csv, ReportFormat::Txt, ReportFormat::Tex];
    for p in emit_report(&report, out.as_ref(), &formats)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
