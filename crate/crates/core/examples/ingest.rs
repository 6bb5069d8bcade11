//! Parse and clean a small hand-written triage CSV, then split it into
//! cohorts and a stratified train/validation/test partition.
//!
//! ```text
//! cargo run --example ingest
//! ```

use triage_fusion::ingest::{parse_and_clean, split_cohorts, stratified_split, PreprocessConfig, SplitRatios, ADULT_AGE};

const CSV: &str = "\
record_id,gender,age_at_visit,temperature,heartrate,resp_rate,pain_score,o2_sat,systolic_bp,diastolic_bp,chief_complaint,acuity
r1,1,54,37.1,88,16,7,98,142,88,  Chest   pain ,2
r2,0,31,36.8,999,18,3,99,118,76,ankle injury,4
r3,0,6,38.9,128,26,unable,96,100,62,fever cough,3
r4,1,72,,,,,,,,dizziness,3
r5,0,45,37.0,80,14,2,99,120,80,,4
r6,1,19,36.6,72,12,0,100,110,70,med refill,7
";

fn main() -> triage_fusion::Result<()> {
    let cfg = PreprocessConfig::default();
    let clean = parse_and_clean(CSV.as_bytes(), &cfg)?;
    println!("{} accepted, {} rejected", clean.records.len(), clean.rejects.len());
    for r in &clean.rejects {
        println!("  reject {}: {}", r.row_id, r.reason);
    }
    for r in &clean.records {
        println!(
            "  {} age {} hr {:?} pain {:?} unable {} text {:?}",
            r.record_id, r.age_at_visit, r.heartrate, r.pain_score, r.unable, r.chief_complaint
        );
    }

    let (adults, peds) = split_cohorts(clean.records, ADULT_AGE);
    println!("{} adults, {} pediatric", adults.len(), peds.len());

    // stratification needs a few records per level, so use a synthetic cohort
    let spec = triage_fusion::synthgen::CohortSpec {
        n_records: 1000,
        ..Default::default()
    };
    let records = triage_fusion::synthgen::generate_cohort(&spec)?;
    let split = stratified_split(&records, SplitRatios::default(), 7)?;
    println!(
        "split of {}: train {}, validation {}, test {}",
        records.len(),
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    Ok(())
}
