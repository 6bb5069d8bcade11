//! Train the multiclass and ordinal boosted-tree models on synthetic vitals,
//! inspect the additive margins, and round-trip a model through JSON.
//!
//! ```text
//! cargo run --release --example gbdt
//! ```

use triage_fusion::gbdt::{read_model, train_multiclass, train_ordinal, write_model, Dataset, GbdtConfig};
use triage_fusion::ingest::{split_cohorts, stratified_split, SplitRatios, ADULT_AGE};
use triage_fusion::metrics::classification_report;
use triage_fusion::synthgen::{generate_cohort, CohortSpec};

fn main() -> triage_fusion::Result<()> {
    let spec = CohortSpec {
        n_records: 6000,
        ..Default::default()
    };
    let (adults, _) = split_cohorts(generate_cohort(&spec)?, ADULT_AGE);
    let split = stratified_split(&adults, SplitRatios::default(), 1)?;
    let (train, valid, test) = (
        Dataset::from_records(&split.train),
        Dataset::from_records(&split.validation),
        Dataset::from_records(&split.test),
    );
    let cfg = GbdtConfig::default();

    let class = train_multiclass(&train, &valid, &cfg)?;
    println!("multiclass: {} rounds grown, best iteration {}", class.rounds(), class.best_iteration());
    let x = test.features.row(0);
    let m0 = class.margins_at(x, 0)?;
    let m1 = class.margins_at(x, 1)?;
    println!("  margin[0] base {:.4}, after one round {:.4}", m0[0], m1[0]);

    let truth: Vec<u8> = test.labels.iter().map(|a| a.level()).collect();
    let levels = |m: &triage_fusion::gbdt::GbdtModel| -> triage_fusion::Result<Vec<u8>> {
        (0..test.len())
            .map(|i| m.predict_level(test.features.row(i)).map(|a| a.level()))
            .collect()
    };
    let b = classification_report(&truth, &levels(&class)?, 5)?;
    println!("  test qwk {:.3} accuracy {:.3}", b.qwk, b.accuracy);

    let ordinal = train_ordinal(&train, &valid, &cfg)?;
    let b = classification_report(&truth, &levels(&ordinal)?, 5)?;
    println!("ordinal: best iteration {}, test qwk {:.3}", ordinal.best_iteration(), b.qwk);

    let mut json = Vec::new();
    write_model(&mut json, &class)?;
    let back = read_model(json.as_slice())?;
    println!("json model {} bytes, round trip equal: {}", json.len(), back == class);
    Ok(())
}
