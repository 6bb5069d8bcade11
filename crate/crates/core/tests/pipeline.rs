use triage_fusion::experiment::{
    age_bracket, render_long_form, run_asymmetric_sweep, run_pipeline, strata_table, symmetric_policy, train_cell,
    ExperimentConfig, Grid, ATTENTION, GBDT_CLASS, GBDT_REGRESS, MULTIMODAL, TFIDF,
};
use triage_fusion::fusion::{ablate, predict_meta_level, Ablation};

fn small(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        seed,
        ..ExperimentConfig::default()
    };
    if let Some(s) = cfg.data.synthetic.as_mut() {
        s.n_records = 2500;
    }
    cfg
}

#[test]
fn default_row_structure() {
    let mut cfg = small(0);
    cfg.text.use_attention = true;
    let run = run_pipeline(&cfg).unwrap();
    let names: Vec<&str> = run.artifacts.adult_rows.iter().map(|r| r.model.as_str()).collect();
    assert_eq!(names, [GBDT_CLASS, GBDT_REGRESS, TFIDF, ATTENTION, MULTIMODAL]);
    let ped: Vec<&str> = run.artifacts.pediatric_rows.iter().map(|r| r.model.as_str()).collect();
    assert_eq!(ped, names);
    for r in &run.artifacts.adult_rows {
        assert!(r.training_error.is_some() && r.test_error.is_some());
    }
}

#[test]
fn empty_pediatric_cohort_is_a_notice() {
    let mut cfg = small(1);
    if let Some(s) = cfg.data.synthetic.as_mut() {
        s.adult_fraction = 1.0;
    }
    let run = run_pipeline(&cfg).unwrap();
    assert!(run.artifacts.pediatric.is_empty());
    assert!(run.artifacts.notices.iter().any(|n| n.contains("pediatric")));
    let report = triage_fusion::experiment::base_report(&run.artifacts);
    assert!(report.pediatric.is_none());
}

#[test]
fn default_grid_has_64_cells() {
    let cfg = ExperimentConfig::default();
    assert_eq!(cfg.dropout.asymmetric.values().len(), 8);
    let mut small_cfg = small(2);
    small_cfg.dropout.asymmetric = Grid {
        min: 0.1,
        max: 0.8,
        step: 0.1,
    };
    let run = run_pipeline(&small_cfg).unwrap();
    let cells = run_asymmetric_sweep(&run.artifacts, &small_cfg).unwrap();
    assert_eq!(cells.len(), 64);
    let csv = render_long_form(&cells);
    let adult_qwk = csv.lines().filter(|l| l.contains(",adult,qwk,")).count();
    assert_eq!(adult_qwk, 64);
}

#[test]
fn strata_match_manual_masking() {
    let cfg = small(3);
    let run = run_pipeline(&cfg).unwrap();
    let art = &run.artifacts;
    let meta = train_cell(art, &cfg, &symmetric_policy(art, 0.4)).unwrap();
    let rows = strata_table(&meta, art).unwrap();
    let stacked = art.pediatric.stacked().unwrap();
    for row in &rows {
        let members: Vec<usize> = (0..stacked.len())
            .filter(|&i| age_bracket(art.pediatric.ages[i]) == Some(row.bracket.as_str()))
            .collect();
        assert_eq!(row.n, members.len());
        let Some(acc) = row.accuracy else { continue };
        for (k, mode) in Ablation::ALL.iter().enumerate() {
            let hits = members
                .iter()
                .filter(|&&i| {
                    let mut a = stacked[i];
                    match mode {
                        Ablation::BothIntact => {}
                        Ablation::NoTabular => a.a[..5].fill(0.0),
                        Ablation::NoText => a.a[5..].fill(0.0),
                    }
                    predict_meta_level(&meta, &a) == art.pediatric.labels[i]
                })
                .count();
            assert_eq!(acc[k], hits as f64 / members.len() as f64);
            let via_ablate = members
                .iter()
                .filter(|&&i| predict_meta_level(&meta, &ablate(&stacked[i], *mode)) == art.pediatric.labels[i])
                .count();
            assert_eq!(hits, via_ablate);
        }
    }
    assert_eq!(rows.iter().map(|r| r.n).sum::<usize>(), art.pediatric.len());
}

#[test]
fn shipped_config_is_the_default() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.toml");
    assert_eq!(ExperimentConfig::load(path.as_ref()).unwrap(), ExperimentConfig::default());
}
