use rand::seq::index::sample;

use super::tree::{grow, ColumnIndex, GrowParams};
use super::{Dataset, GbdtConfig, GbdtModel, Variant};
use crate::error::{Error, Result};
use crate::linalg::softmax_in_place;
use crate::seed;
use crate::NUM_LEVELS;

/// Tracks the best validation metric (lower is better) and signals a stop once
/// `patience` rounds pass without a strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best_metric: f64,
    best_round: usize,
}

impl EarlyStopping {
    /// `initial` is the metric of the base score alone (round 0).
    pub fn new(patience: usize, initial: f64) -> Self {
        EarlyStopping {
            patience,
            best_metric: initial,
            best_round: 0,
        }
    }

    /// Records the metric after `round` (1-based); returns `true` to stop.
    pub fn record(&mut self, round: usize, metric: f64) -> bool {
        if metric < self.best_metric {
            self.best_metric = metric;
            self.best_round = round;
        }
        round - self.best_round >= self.patience
    }

    pub fn best_round(&self) -> usize {
        self.best_round
    }

    pub fn best_metric(&self) -> f64 {
        self.best_metric
    }
}

fn check_inputs(train: &Dataset, valid: &Dataset, cfg: &GbdtConfig) -> Result<()> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    if valid.is_empty() {
        return Err(Error::Training("validation required for early stopping".into()));
    }
    if train.features.n_features() != valid.features.n_features() {
        return Err(Error::InvalidInput(format!(
            "train has {} features, validation {}",
            train.features.n_features(),
            valid.features.n_features()
        )));
    }
    Ok(())
}

fn row_mask(n: usize, cfg: &GbdtConfig, round: usize) -> Vec<bool> {
    if cfg.subsample >= 1.0 {
        return vec![true; n];
    }
    let k = ((n as f64 * cfg.subsample).round() as usize).clamp(1, n);
    let mut rng = seed::rng(seed::derive_seed(cfg.seed, &[round as u64]));
    let mut mask = vec![false; n];
    for i in sample(&mut rng, n, k) {
        mask[i] = true;
    }
    mask
}

fn grow_params(cfg: &GbdtConfig) -> GrowParams {
    GrowParams {
        max_depth: cfg.max_depth,
        min_child_weight: cfg.min_child_weight,
        lambda: cfg.lambda,
        gamma: cfg.gamma,
    }
}

fn mean_log_loss(margins: &[f64], labels: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut p = [0.0; NUM_LEVELS];
    for (row, &y) in margins.chunks_exact(NUM_LEVELS).zip(labels) {
        p.copy_from_slice(row);
        softmax_in_place(&mut p);
        total -= p[y].clamp(1e-15, 1.0 - 1e-15).ln();
    }
    total / labels.len() as f64
}

/// Softmax boosting with one tree per class per round, early-stopped on the
/// validation multiclass log-loss.
pub fn train_multiclass(train: &Dataset, valid: &Dataset, cfg: &GbdtConfig) -> Result<GbdtModel> {
    check_inputs(train, valid, cfg)?;
    let n = train.len();
    let y: Vec<usize> = train.labels.iter().map(|a| a.index()).collect();
    let y_valid: Vec<usize> = valid.labels.iter().map(|a| a.index()).collect();
    let mut counts = [0usize; NUM_LEVELS];
    for &c in &y {
        counts[c] += 1;
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Training(format!(
            "acuity level {} absent from training data",
            missing + 1
        )));
    }
    let base: Vec<f64> = counts.iter().map(|&c| (c as f64 / n as f64).ln()).collect();

    let is_missing = cfg.is_missing();
    let index = ColumnIndex::new(train.features.values(), train.features.n_features(), is_missing);
    let params = grow_params(cfg);
    let eta = cfg.learning_rate;

    let mut margins: Vec<f64> = base.iter().copied().cycle().take(n * NUM_LEVELS).collect();
    let nv = valid.len();
    let mut valid_margins: Vec<f64> = base.iter().copied().cycle().take(nv * NUM_LEVELS).collect();
    let mut stopper = EarlyStopping::new(cfg.early_stopping_rounds, mean_log_loss(&valid_margins, &y_valid));

    let mut trees = Vec::new();
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut probs = vec![0.0; n * NUM_LEVELS];
    for round in 1..=cfg.n_estimators {
        let mask = row_mask(n, cfg, round);
        probs.copy_from_slice(&margins);
        probs.chunks_exact_mut(NUM_LEVELS).for_each(softmax_in_place);
        for class in 0..NUM_LEVELS {
            for r in 0..n {
                let p = probs[r * NUM_LEVELS + class];
                grad[r] = p - if y[r] == class { 1.0 } else { 0.0 };
                hess[r] = (p * (1.0 - p)).max(1e-16);
            }
            trees.push(grow(&index, &grad, &hess, &mask, params));
        }
        let round_trees = &trees[trees.len() - NUM_LEVELS..];
        for r in 0..n {
            let x = train.features.row(r);
            for (c, tree) in round_trees.iter().enumerate() {
                margins[r * NUM_LEVELS + c] += eta * tree.predict(x, is_missing);
            }
        }
        for r in 0..nv {
            let x = valid.features.row(r);
            for (c, tree) in round_trees.iter().enumerate() {
                valid_margins[r * NUM_LEVELS + c] += eta * tree.predict(x, is_missing);
            }
        }
        if stopper.record(round, mean_log_loss(&valid_margins, &y_valid)) {
            break;
        }
    }

    Ok(GbdtModel {
        variant: Variant::Multiclass,
        config: cfg.clone(),
        n_features: train.features.n_features(),
        base_score: base,
        trees,
        best_iteration: stopper.best_round(),
    })
}

/// Squared-error boosting on the acuity value, early-stopped on validation MSE.
pub fn train_ordinal(train: &Dataset, valid: &Dataset, cfg: &GbdtConfig) -> Result<GbdtModel> {
    check_inputs(train, valid, cfg)?;
    let n = train.len();
    let y: Vec<f64> = train.labels.iter().map(|a| a.level() as f64).collect();
    let y_valid: Vec<f64> = valid.labels.iter().map(|a| a.level() as f64).collect();
    let base = y.iter().sum::<f64>() / n as f64;

    let is_missing = cfg.is_missing();
    let index = ColumnIndex::new(train.features.values(), train.features.n_features(), is_missing);
    let params = grow_params(cfg);
    let eta = cfg.learning_rate;

    let mse = |pred: &[f64], truth: &[f64]| {
        pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / truth.len() as f64
    };
    let mut pred = vec![base; n];
    let mut valid_pred = vec![base; valid.len()];
    let mut stopper = EarlyStopping::new(cfg.early_stopping_rounds, mse(&valid_pred, &y_valid));
    let mut trees = Vec::new();
    let hess = vec![1.0; n];
    let mut grad = vec![0.0; n];
    for round in 1..=cfg.n_estimators {
        let mask = row_mask(n, cfg, round);
        for r in 0..n {
            grad[r] = pred[r] - y[r];
        }
        let tree = grow(&index, &grad, &hess, &mask, params);
        for (r, p) in pred.iter_mut().enumerate() {
            *p += eta * tree.predict(train.features.row(r), is_missing);
        }
        for (r, p) in valid_pred.iter_mut().enumerate() {
            *p += eta * tree.predict(valid.features.row(r), is_missing);
        }
        trees.push(tree);
        if stopper.record(round, mse(&valid_pred, &y_valid)) {
            break;
        }
    }

    Ok(GbdtModel {
        variant: Variant::Ordinal,
        config: cfg.clone(),
        n_features: train.features.n_features(),
        base_score: vec![base],
        trees,
        best_iteration: stopper.best_round(),
    })
}
