//! Draw a seeded synthetic cohort and summarise it by age bracket.
//!
//! ```text
//! cargo run --release --example synthgen
//! ```

use triage_fusion::ingest::write_records;
use triage_fusion::synthgen::{generate_cohort, CohortSpec};

fn main() -> triage_fusion::Result<()> {
    let spec = CohortSpec::default();
    let records = generate_cohort(&spec)?;
    let mut counts = [0usize; 5];
    for r in &records {
        counts[r.acuity.index()] += 1;
    }
    println!("{} records; acuity prior {:?}", records.len(), spec.acuity_prior);
    println!(
        "empirical {:?}",
        counts.map(|c| (c as f64 / records.len() as f64 * 1000.0).round() / 1000.0)
    );
    let mean_hr = |peds: bool| {
        let hr: Vec<f64> = records
            .iter()
            .filter(|r| r.is_pediatric() == peds)
            .filter_map(|r| r.heartrate)
            .collect();
        hr.iter().sum::<f64>() / hr.len() as f64
    };
    println!(
        "mean heart rate adult {:.1}, pediatric {:.1} (configured gap {:.1})",
        mean_hr(false),
        mean_hr(true),
        spec.heartrate_gap()
    );
    for b in spec.pediatric_brackets.iter().chain(&spec.adult_brackets) {
        let n = records.iter().filter(|r| (b.min_age..=b.max_age).contains(&r.age_at_visit)).count();
        println!("  {:<20} {:>5} records, text noise {:.2}", b.name, n, b.text_noise);
    }
    let mut out = Vec::new();
    write_records(&mut out, &records[..3])?;
    print!("{}", String::from_utf8_lossy(&out));
    Ok(())
}
