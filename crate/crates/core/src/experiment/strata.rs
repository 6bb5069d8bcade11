use super::config::ExperimentConfig;
use super::pipeline::BaseArtifacts;
use super::report::StrataRow;
use super::sweep::{symmetric_policy, train_cell};
use crate::error::Result;
use crate::fusion::{ablate, predict_meta_level, Ablation, MetaClassifier};

/// Pediatric age brackets, inclusive.
pub const AGE_BRACKETS: [(&str, u32, u32); 4] = [
    ("Infants", 0, 1),
    ("Toddlers/Preschool", 2, 5),
    ("School Age", 6, 12),
    ("Adolescents", 13, 17),
];

pub fn age_bracket(age: u32) -> Option<&'static str> {
    AGE_BRACKETS
        .iter()
        .find(|(_, lo, hi)| (*lo..=*hi).contains(&age))
        .map(|b| b.0)
}

/// Accuracy of `meta` per bracket under each zero-mask ablation.
pub fn strata_table(meta: &MetaClassifier, art: &BaseArtifacts) -> Result<Vec<StrataRow>> {
    let stacked = art.pediatric.stacked()?;
    let mut rows = Vec::with_capacity(AGE_BRACKETS.len());
    for &(name, lo, hi) in &AGE_BRACKETS {
        let members: Vec<usize> = (0..stacked.len())
            .filter(|&i| (lo..=hi).contains(&art.pediatric.ages[i]))
            .collect();
        let accuracy = (!members.is_empty()).then(|| {
            Ablation::ALL.map(|mode| {
                let hits = members
                    .iter()
                    .filter(|&&i| predict_meta_level(meta, &ablate(&stacked[i], mode)) == art.pediatric.labels[i])
                    .count();
                hits as f64 / members.len() as f64
            })
        });
        rows.push(StrataRow {
            bracket: name.into(),
            n: members.len(),
            accuracy,
        });
    }
    Ok(rows)
}

/// Strata table for the configured selected symmetric dropout model.
pub fn run_age_strata(art: &BaseArtifacts, cfg: &ExperimentConfig) -> Result<Vec<StrataRow>> {
    let meta = train_cell(art, cfg, &symmetric_policy(art, cfg.dropout.selected))?;
    strata_table(&meta, art)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_boundaries() {
        assert_eq!(age_bracket(1), Some("Infants"));
        assert_eq!(age_bracket(2), Some("Toddlers/Preschool"));
        assert_eq!(age_bracket(12), Some("School Age"));
        assert_eq!(age_bracket(13), Some("Adolescents"));
        assert_eq!(age_bracket(18), None);
    }
}
