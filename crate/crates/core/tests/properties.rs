use proptest::prelude::*;

use triage_fusion::fusion::{
    ablate, apply_modality_dropout, predict_meta, stack_probabilities, Ablation, DropoutPolicy, MetaClassifier,
    STACK_DIM,
};
use triage_fusion::gbdt::{train_multiclass, Dataset, GbdtConfig};
use triage_fusion::ingest::{
    parse_and_clean, stratified_split, write_records, Acuity, PreprocessConfig, SplitRatios, TriageRecord,
};
use triage_fusion::metrics::{classification_report, confusion_matrix, qwk};
use triage_fusion::synthgen::{generate_cohort, CohortSpec};
use triage_fusion::text::{tokenize_ngrams, TfidfConfig, TfidfVectorizer};
use triage_fusion::{ProbVector, NUM_LEVELS};

fn probs() -> impl Strategy<Value = ProbVector> {
    prop::array::uniform5(0.001f64..1.0).prop_map(|p| {
        let s: f64 = p.iter().sum();
        p.map(|v| v / s)
    })
}

fn levels(n: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(1u8..=5, n)
}

fn cohort(seed: u64, n: usize) -> Vec<TriageRecord> {
    let spec = CohortSpec {
        n_records: n,
        seed,
        ..CohortSpec::default()
    };
    generate_cohort(&spec).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn clean_is_idempotent(seed in 0u64..1000) {
        let cfg = PreprocessConfig::default();
        let mut raw = Vec::new();
        write_records(&mut raw, &cohort(seed, 300)).unwrap();
        let first = parse_and_clean(raw.as_slice(), &cfg).unwrap();
        let mut again = Vec::new();
        write_records(&mut again, &first.records).unwrap();
        let second = parse_and_clean(again.as_slice(), &cfg).unwrap();
        prop_assert!(second.rejects.is_empty());
        prop_assert_eq!(second.records, first.records);
    }

    #[test]
    fn accepted_plus_rejected_is_input(seed in 0u64..1000, blank in prop::collection::vec(any::<bool>(), 50)) {
        let records = cohort(seed, 50);
        let mut raw = Vec::new();
        write_records(&mut raw, &records).unwrap();
        let text = String::from_utf8(raw).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        // drop the acuity of some rows so they must be rejected
        for (line, b) in lines.iter_mut().skip(1).zip(&blank) {
            if *b {
                let cut = line.rfind(',').unwrap();
                line.truncate(cut + 1);
                line.push('9');
            }
        }
        let out = parse_and_clean((lines.join("\n") + "\n").as_bytes(), &PreprocessConfig::default()).unwrap();
        prop_assert_eq!(out.records.len() + out.rejects.len(), 50);
        prop_assert_eq!(out.rejects.len(), blank.iter().filter(|b| **b).count());
    }

    #[test]
    fn stratified_split_partitions(seed in 0u64..1000, data_seed in 0u64..50) {
        let records = cohort(data_seed, 400);
        let ratios = SplitRatios::new(0.6, 0.2, 0.2).unwrap();
        let s = stratified_split(&records, ratios, seed).unwrap();
        let mut ids: Vec<&str> = s.train.iter().chain(&s.validation).chain(&s.test).map(|r| r.record_id.as_str()).collect();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), records.len());
        for level in 1..=5u8 {
            let total = records.iter().filter(|r| r.acuity.level() == level).count() as f64;
            let train = s.train.iter().filter(|r| r.acuity.level() == level).count() as f64;
            prop_assert!((train - 0.6 * total).abs() <= 1.0);
        }
        prop_assert_eq!(stratified_split(&records, ratios, seed).unwrap(), s);
    }

    #[test]
    fn synthgen_is_deterministic(seed in 0u64..1000) {
        prop_assert_eq!(cohort(seed, 200), cohort(seed, 200));
    }

    #[test]
    fn gbdt_structure_and_outputs(seed in 0u64..200, depth in 1usize..5) {
        let records = cohort(seed, 300);
        let data = Dataset::from_records(&records);
        let cfg = GbdtConfig { n_estimators: 15, max_depth: depth, subsample: 0.8, seed, ..GbdtConfig::default() };
        let model = train_multiclass(&data, &data, &cfg).unwrap();
        prop_assert!(model.best_iteration() <= model.rounds());
        for t in model.trees() {
            prop_assert!(t.depth() <= depth);
        }
        for i in 0..data.len() {
            let p = model.predict_proba(data.features.row(i)).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn tfidf_vocab_invariants(notes in prop::collection::vec("[a-e]{1,3}( [a-e]{1,3}){0,5}", 1..30)) {
        let cfg = TfidfConfig::default();
        let v = TfidfVectorizer::fit_texts(&notes, &cfg).unwrap();
        prop_assert_eq!(v.terms().len(), v.vocab_size());
        for (i, t) in v.terms().iter().enumerate() {
            prop_assert_eq!(v.term_index(t), Some(i));
            prop_assert!(v.doc_freq()[i] >= 1);
            prop_assert!(v.idf()[i] >= 0.0);
        }
        for n in &notes {
            let x = v.transform(n);
            let norm = x.norm();
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-12);
            prop_assert!(tokenize_ngrams(n, cfg.ngram_range).iter().all(|t| !t.is_empty()));
        }
    }

    #[test]
    fn stacked_blocks_and_masking(t in probs(), x in probs(), seed in any::<u64>(), p_tab in 0.0f64..=1.0, p_text in 0.0f64..=1.0) {
        let s = stack_probabilities(&t, &x).unwrap();
        prop_assert!((s.tab().iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        prop_assert!((s.text().iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        for mode in Ablation::ALL {
            let once = ablate(&s, mode);
            prop_assert_eq!(ablate(&once, mode), once);
        }
        let out = apply_modality_dropout(&[s; 20], &DropoutPolicy::asymmetric(p_tab, p_text, seed));
        for o in &out {
            prop_assert_eq!(o.tab_present, o.tab().iter().any(|&v| v != 0.0));
            prop_assert_eq!(o.text_present, o.text().iter().any(|&v| v != 0.0));
            if o.tab_present { prop_assert_eq!(o.tab(), s.tab()); }
            if o.text_present { prop_assert_eq!(o.text(), s.text()); }
        }
    }

    #[test]
    fn symmetric_and_diagonal_masks_agree(seed in any::<u64>(), p in 0.0f64..=1.0, t in probs(), x in probs()) {
        let batch = vec![stack_probabilities(&t, &x).unwrap(); 64];
        prop_assert_eq!(
            apply_modality_dropout(&batch, &DropoutPolicy::symmetric(p, seed)),
            apply_modality_dropout(&batch, &DropoutPolicy::asymmetric(p, p, seed))
        );
    }

    #[test]
    fn meta_outputs_are_distributions(params in prop::collection::vec(-5.0f64..5.0, NUM_LEVELS * (STACK_DIM + 1)), t in probs(), x in probs()) {
        let meta = MetaClassifier::from_params(&params, 1.0);
        let p = predict_meta(&meta, &stack_probabilities(&t, &x).unwrap());
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn metric_ranges((truth, pred) in (1usize..300).prop_flat_map(|n| (levels(n), levels(n)))) {
        let m = confusion_matrix(&truth, &pred, NUM_LEVELS).unwrap();
        prop_assert_eq!(m.total() as usize, truth.len());
        let b = classification_report(&truth, &pred, NUM_LEVELS);
        if let Ok(b) = b {
            for v in [b.accuracy, b.balanced_accuracy, b.macro_f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&b.qwk));
            // kappa is symmetric in its two raters
            prop_assert!((qwk(&m.transpose()).unwrap() - b.qwk).abs() < 1e-12);
        }
    }
}

#[test]
fn dropout_rate_is_unbiased_across_seeds() {
    let s = stack_probabilities(&[0.2; 5], &[0.2; 5]).unwrap();
    let batch = vec![s; 10_000];
    let mut total = 0.0;
    let seeds = 20;
    for seed in 0..seeds {
        let out = apply_modality_dropout(&batch, &DropoutPolicy::symmetric(0.4, seed));
        let dropped = out.iter().filter(|o| !o.tab_present).count() + out.iter().filter(|o| !o.text_present).count();
        total += dropped as f64 / (2.0 * batch.len() as f64);
    }
    let mean = total / seeds as f64;
    assert!((mean - 0.4).abs() < 0.005, "mean drop rate {mean}");
}

#[test]
fn acuity_round_trips() {
    for level in 1..=5 {
        assert_eq!(Acuity::new(level).unwrap().level(), level);
    }
    assert!(Acuity::new(0).is_err() && Acuity::new(6).is_err());
}
