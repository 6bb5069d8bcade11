use super::config::ExperimentConfig;
use super::pipeline::{evaluate_meta, BaseArtifacts, MetaEvaluation};
use super::report::{dropout_row_name, ExperimentReport, SweepCell};
use crate::error::{Error, Result};
use crate::fusion::{train_meta, DropoutPolicy, MetaClassifier};
use crate::seed::derive_seed;

/// Seed of the dropout cell `(p_tab, p_text)`; a symmetric rate `p` uses the
/// `(p, p)` cell seed.
pub fn cell_seed(meta_seed: u64, p_tab: f64, p_text: f64) -> u64 {
    derive_seed(meta_seed, &[p_tab.to_bits(), p_text.to_bits()])
}

pub fn symmetric_policy(art: &BaseArtifacts, p: f64) -> DropoutPolicy {
    DropoutPolicy::symmetric(p, cell_seed(art.seeds.meta, p, p))
}

pub fn asymmetric_policy(art: &BaseArtifacts, p_tab: f64, p_text: f64) -> DropoutPolicy {
    DropoutPolicy::asymmetric(p_tab, p_text, cell_seed(art.seeds.meta, p_tab, p_text))
}

/// Retrains only the meta layer on the cached meta-training probabilities.
pub fn train_cell(art: &BaseArtifacts, cfg: &ExperimentConfig, policy: &DropoutPolicy) -> Result<MetaClassifier> {
    train_meta(
        &art.meta_train.stacked()?,
        &art.meta_train.labels,
        &cfg.meta.meta_config(),
        policy,
    )
    .map_err(|e| e.at("fusion"))
}

fn cell(art: &BaseArtifacts, cfg: &ExperimentConfig, policy: &DropoutPolicy) -> Result<(SweepCell, MetaEvaluation)> {
    let meta = train_cell(art, cfg, policy)?;
    let eval = evaluate_meta(&meta, art)?;
    let (p_tab, p_text) = policy.rates();
    Ok((
        SweepCell {
            p_tab,
            p_text,
            training_error: eval.training_error,
            adult_test_error: eval.adult_test_error,
            adult: eval.adult,
            pediatric: eval.pediatric,
        },
        eval,
    ))
}

pub fn run_symmetric_sweep(art: &BaseArtifacts, cfg: &ExperimentConfig) -> Result<Vec<SweepCell>> {
    if cfg.dropout.symmetric.is_empty() {
        return Err(Error::Config("dropout.symmetric is empty".into()));
    }
    cfg.dropout
        .symmetric
        .iter()
        .map(|&p| cell(art, cfg, &symmetric_policy(art, p)).map(|c| c.0))
        .collect()
}

/// Every `(p_tab, p_text)` cell of the configured grid, p_tab-major.
pub fn run_asymmetric_sweep(art: &BaseArtifacts, cfg: &ExperimentConfig) -> Result<Vec<SweepCell>> {
    let values = cfg.dropout.asymmetric.values();
    if values.is_empty() {
        return Err(Error::Config("dropout.asymmetric grid is empty".into()));
    }
    let mut out = Vec::with_capacity(values.len() * values.len());
    for &pt in &values {
        for &px in &values {
            out.push(cell(art, cfg, &asymmetric_policy(art, pt, px))?.0);
        }
    }
    Ok(out)
}

/// Both sweeps plus the selected-rate model's confusion matrices, folded into
/// a report whose tables also list every non-zero symmetric rate as a row.
pub fn sweep_report(art: &BaseArtifacts, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let symmetric = run_symmetric_sweep(art, cfg)?;
    let asymmetric = run_asymmetric_sweep(art, cfg)?;
    let mut report = base_report(art);
    for c in symmetric.iter().filter(|c| c.p_tab > 0.0) {
        let name = dropout_row_name(c.p_tab);
        report.adult.push(super::report::ModelRow {
            model: name.clone(),
            training_error: Some(c.training_error),
            test_error: Some(c.adult_test_error),
            metrics: c.adult,
        });
        if let (Some(rows), Some(m)) = (report.pediatric.as_mut(), c.pediatric) {
            rows.push(super::report::ModelRow {
                model: name,
                training_error: None,
                test_error: m.mean_log_loss,
                metrics: m,
            });
        }
    }
    let p = cfg.dropout.selected;
    let (_, eval) = cell(art, cfg, &symmetric_policy(art, p))?;
    report.confusion = eval.confusion(&dropout_row_name(p), art)?;
    report.symmetric = symmetric;
    report.asymmetric = asymmetric;
    Ok(report)
}

/// Report holding the cached baseline and multimodal rows only.
pub fn base_report(art: &BaseArtifacts) -> ExperimentReport {
    ExperimentReport {
        seeds: Some(art.seeds),
        adult: art.adult_rows.clone(),
        pediatric: (!art.pediatric.is_empty()).then(|| art.pediatric_rows.clone()),
        notices: art.notices.clone(),
        ..Default::default()
    }
}
