//! Experiment runner: base models, fusion, dropout sweeps, age strata and
//! report emission, driven by one [`ExperimentConfig`].

mod config;
mod pipeline;
mod report;
mod strata;
mod sweep;

pub use config::{
    DataConfig, DropoutSettings, ExperimentConfig, Grid, MetaSettings, MetaSource, OutputConfig, ReportFormat,
    TextConfig, TextModelKind, DEFAULT_OUT_DIR, OUT_DIR_ENV,
};
pub use pipeline::{
    artifact_dir, derive_seeds, evaluate_meta, load_artifacts, load_artifacts_for, load_records, run_pipeline,
    save_artifacts, synthetic_csv, train_and_cache, BaseArtifacts, MetaEvaluation, PipelineRun, ScoredSet,
    ARTIFACT_DIR, ATTENTION, EXTERNAL, GBDT_CLASS, GBDT_REGRESS, MULTIMODAL, TFIDF,
};
pub use report::{
    dropout_row_name, emit_report, format_adult_row, format_pediatric_row, render_adult_table, render_long_form,
    render_pediatric_table, render_report, render_strata_table, ConfusionEntry, ExperimentReport, ModelRow,
    SeedRecord, StrataRow, SweepCell, ADULT_COLUMNS, HEATMAP_COLUMNS, PEDIATRIC_COLUMNS, STRATA_COLUMNS,
};
pub use strata::{age_bracket, run_age_strata, strata_table, AGE_BRACKETS};
pub use sweep::{
    asymmetric_policy, base_report, cell_seed, run_asymmetric_sweep, run_symmetric_sweep, sweep_report,
    symmetric_policy, train_cell,
};

/// Full report from cached or freshly computed base artifacts: baselines,
/// multimodal and dropout rows, both sweeps, confusion matrices and strata.
pub fn full_report(art: &BaseArtifacts, cfg: &ExperimentConfig) -> crate::Result<ExperimentReport> {
    let mut report = sweep_report(art, cfg)?;
    if !art.pediatric.is_empty() {
        report.strata = run_age_strata(art, cfg)?;
    }
    Ok(report)
}

/// Runs everything in memory from data to report, without touching disk.
pub fn run_experiment(cfg: &ExperimentConfig) -> crate::Result<ExperimentReport> {
    let run = run_pipeline(cfg)?;
    full_report(&run.artifacts, cfg)
}
