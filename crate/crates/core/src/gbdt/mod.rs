//! Gradient-boosted decision trees for the tabular modality.
//!
//! Each boosting round fits regression trees to the gradient and hessian of
//! the loss at the current margins and adds them with shrinkage:
//! `margin_t(x) = margin_{t-1}(x) + learning_rate * f_t(x)`.
//! Tree complexity is penalised by `gamma * leaves + 0.5 * lambda * sum(w^2)`,
//! which gives leaf weights `-G / (H + lambda)`.
//!
//! Two variants are provided: a five-class softmax classifier (one tree per
//! class per round) and an ordinal regressor on the acuity value with squared
//! error (one tree per round). Both stop early on a validation metric.

mod io;
mod train;
mod tree;

use serde::{Deserialize, Serialize};

pub use io::{load_model, read_model, save_model, write_model, MODEL_FORMAT_VERSION};
pub use train::{train_multiclass, train_ordinal, EarlyStopping};
pub use tree::{Tree, TreeNode};

use crate::error::{Error, Result};
use crate::ingest::{Acuity, TriageRecord, NUM_FEATURES};
use crate::linalg::softmax;
use crate::{ProbVector, NUM_LEVELS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtConfig {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub early_stopping_rounds: usize,
    pub max_depth: usize,
    pub min_child_weight: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Penalty per leaf; also the minimum gain for a split.
    pub gamma: f64,
    /// Fraction of training rows sampled (without replacement) per round.
    pub subsample: f64,
    /// Extra value treated as missing besides NaN.
    pub missing_value: Option<f64>,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            n_estimators: 500,
            learning_rate: 0.05,
            early_stopping_rounds: 25,
            max_depth: 6,
            min_child_weight: 1.0,
            lambda: 1.0,
            gamma: 0.0,
            subsample: 1.0,
            missing_value: None,
            seed: 0,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_estimators < 1 {
            return bad("n_estimators must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate {} outside (0, 1]", self.learning_rate));
        }
        if !(self.lambda >= 0.0 && self.gamma >= 0.0 && self.min_child_weight >= 0.0) {
            return bad("lambda, gamma and min_child_weight must be non-negative".into());
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad(format!("subsample {} outside (0, 1]", self.subsample));
        }
        if self.early_stopping_rounds < 1 {
            return bad("early_stopping_rounds must be at least 1".into());
        }
        if self.missing_value.is_some_and(|v| !v.is_finite()) {
            return bad("missing_value sentinel must be finite".into());
        }
        Ok(())
    }

    pub(crate) fn is_missing(&self) -> impl Fn(f64) -> bool + Copy {
        let sentinel = self.missing_value;
        move |v: f64| v.is_nan() || sentinel == Some(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Multiclass,
    Ordinal,
}

/// Row-major feature matrix with NaN (or the configured sentinel) for missing.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_features: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n_features: usize, values: Vec<f64>) -> Result<Self> {
        if n_features == 0 || !values.len().is_multiple_of(n_features) {
            return Err(Error::InvalidInput(format!(
                "{} values do not form rows of {n_features} features",
                values.len()
            )));
        }
        Ok(FeatureMatrix { n_features, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_features = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * n_features);
        for r in rows {
            if r.as_ref().len() != n_features {
                return Err(Error::InvalidInput("ragged feature rows".into()));
            }
            values.extend_from_slice(r.as_ref());
        }
        FeatureMatrix::new(n_features.max(1), values)
    }

    pub fn from_records(records: &[TriageRecord]) -> Self {
        let values = records.iter().flat_map(|r| r.features()).collect();
        FeatureMatrix {
            n_features: NUM_FEATURES,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.values.len() / self.n_features
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Features plus acuity labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: FeatureMatrix,
    pub labels: Vec<Acuity>,
}

impl Dataset {
    pub fn new(features: FeatureMatrix, labels: Vec<Acuity>) -> Result<Self> {
        if features.n_rows() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} feature rows but {} labels",
                features.n_rows(),
                labels.len()
            )));
        }
        Ok(Dataset { features, labels })
    }

    pub fn from_records(records: &[TriageRecord]) -> Self {
        Dataset {
            features: FeatureMatrix::from_records(records),
            labels: records.iter().map(|r| r.acuity).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// A trained boosted ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    pub(crate) variant: Variant,
    pub(crate) config: GbdtConfig,
    pub(crate) n_features: usize,
    /// Per-class log prior (multiclass) or the label mean (ordinal).
    pub(crate) base_score: Vec<f64>,
    /// Round-major: `trees[round * trees_per_round + class]`.
    pub(crate) trees: Vec<Tree>,
    pub(crate) best_iteration: usize,
}

impl GbdtModel {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn config(&self) -> &GbdtConfig {
        &self.config
    }

    pub fn base_score(&self) -> &[f64] {
        &self.base_score
    }

    pub fn trees_per_round(&self) -> usize {
        match self.variant {
            Variant::Multiclass => NUM_LEVELS,
            Variant::Ordinal => 1,
        }
    }

    /// Number of boosting rounds that were trained.
    pub fn rounds(&self) -> usize {
        self.trees.len() / self.trees_per_round()
    }

    /// Round count with the best validation metric (0 = base score only).
    pub fn best_iteration(&self) -> usize {
        self.best_iteration
    }

    pub fn tree(&self, round: usize, output: usize) -> &Tree {
        &self.trees[round * self.trees_per_round() + output]
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    fn check_arity(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::InvalidInput(format!(
                "expected {} features, got {}",
                self.n_features,
                x.len()
            )));
        }
        Ok(())
    }

    /// Raw tree output of round `round` (0-based) for one output, without shrinkage.
    pub fn tree_output(&self, x: &[f64], round: usize, output: usize) -> f64 {
        self.tree(round, output).predict(x, self.config.is_missing())
    }

    /// Margins after the first `rounds` rounds, accumulated round by round.
    pub fn margins_at(&self, x: &[f64], rounds: usize) -> Result<Vec<f64>> {
        self.check_arity(x)?;
        let rounds = rounds.min(self.rounds());
        let k = self.trees_per_round();
        let eta = self.config.learning_rate;
        let is_missing = self.config.is_missing();
        let mut m = self.base_score.clone();
        for t in 0..rounds {
            for (c, mc) in m.iter_mut().enumerate() {
                *mc += eta * self.trees[t * k + c].predict(x, is_missing);
            }
        }
        Ok(m)
    }

    pub fn margins(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.margins_at(x, self.best_iteration)
    }

    /// Class probabilities from the softmax of the margins at the best iteration.
    pub fn predict_proba(&self, x: &[f64]) -> Result<ProbVector> {
        if self.variant != Variant::Multiclass {
            return Err(Error::InvalidInput("predict_proba needs a multiclass model".into()));
        }
        let m = self.margins(x)?;
        let mut z = [0.0; NUM_LEVELS];
        z.copy_from_slice(&m);
        Ok(softmax(z))
    }

    /// Real-valued acuity estimate from an ordinal model.
    pub fn predict_score(&self, x: &[f64]) -> Result<f64> {
        if self.variant != Variant::Ordinal {
            return Err(Error::InvalidInput("predict_score needs an ordinal model".into()));
        }
        Ok(self.margins(x)?[0])
    }

    /// Predicted acuity level under either variant.
    pub fn predict_level(&self, x: &[f64]) -> Result<Acuity> {
        match self.variant {
            Variant::Multiclass => {
                let p = self.predict_proba(x)?;
                Ok(Acuity::from_index(crate::linalg::argmax(&p)))
            }
            Variant::Ordinal => ordinal_to_level(self.predict_score(x)?),
        }
    }

    pub fn predict_proba_matrix(&self, x: &FeatureMatrix) -> Result<Vec<ProbVector>> {
        (0..x.n_rows()).map(|i| self.predict_proba(x.row(i))).collect()
    }
}

/// Decodes a real-valued ordinal score: round half away from zero, clamp to 1..=5.
pub fn ordinal_to_level(score: f64) -> Result<Acuity> {
    if score.is_nan() {
        return Err(Error::InvalidInput("ordinal score is NaN".into()));
    }
    let level = score.round().clamp(1.0, NUM_LEVELS as f64);
    Ok(Acuity::from_index(level as usize - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordinal_decoding() {
        let lvl = |s| ordinal_to_level(s).unwrap().level();
        assert_eq!(lvl(3.4), 3);
        assert_eq!(lvl(0.2), 1);
        assert_eq!(lvl(3.5), 4);
        assert_eq!(lvl(2.5), 3);
        assert_eq!(lvl(-7.0), 1);
        assert_eq!(lvl(9.9), 5);
        assert_eq!(lvl(f64::INFINITY), 5);
        assert!(ordinal_to_level(f64::NAN).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(GbdtConfig::default().validate().is_ok());
        let bad = [
            GbdtConfig { n_estimators: 0, ..Default::default() },
            GbdtConfig { learning_rate: 0.0, ..Default::default() },
            GbdtConfig { learning_rate: 1.5, ..Default::default() },
            GbdtConfig { lambda: -1.0, ..Default::default() },
            GbdtConfig { gamma: -0.1, ..Default::default() },
            GbdtConfig { subsample: 0.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn zero_round_model_is_uniform() {
        let model = GbdtModel {
            variant: Variant::Multiclass,
            config: GbdtConfig::default(),
            n_features: 2,
            base_score: vec![0.0; 5],
            trees: vec![],
            best_iteration: 0,
        };
        let p = model.predict_proba(&[1.0, f64::NAN]).unwrap();
        for v in p {
            assert!((v - 0.2).abs() < 1e-15);
        }
        assert!(model.predict_proba(&[1.0]).is_err());
        assert!(model.predict_score(&[1.0, 2.0]).is_err());
    }
}
