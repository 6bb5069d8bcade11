use serde::{Deserialize, Serialize};

use super::tfidf::SparseVec;
use crate::error::{Error, Result};
use crate::ingest::Acuity;
use crate::linalg::{softmax_in_place, Lbfgs};
use crate::{ProbVector, NUM_LEVELS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearConfig {
    /// Inverse regularisation strength.
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            c: 0.1,
            max_iter: 1000,
            tol: 1e-5,
        }
    }
}

impl LinearConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("linear C must be positive, got {}", self.c)));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::Config("linear max_iter and tol must be positive".into()));
        }
        Ok(())
    }
}

/// Multinomial logistic regression over sparse inputs. Parameters are stored
/// as one flat vector: the 5×V weight matrix row-major, then 5 biases.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTextModel {
    dim: usize,
    c: f64,
    params: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn logits(params: &[f64], dim: usize, x: &SparseVec) -> ProbVector {
    let bias = &params[NUM_LEVELS * dim..];
    let mut z = [0.0; NUM_LEVELS];
    for (k, zk) in z.iter_mut().enumerate() {
        let w = &params[k * dim..(k + 1) * dim];
        *zk = bias[k] + x.iter().map(|(i, v)| w[i] * v).sum::<f64>();
    }
    z
}

/// `(1/n) [ Σ cross-entropy + ‖W‖² / (2C) ]` (biases unpenalised); writes the
/// gradient into `grad`.
pub fn linear_objective(
    params: &[f64],
    dim: usize,
    c: f64,
    xs: &[SparseVec],
    ys: &[Acuity],
    grad: &mut [f64],
) -> f64 {
    let n = xs.len() as f64;
    let nw = NUM_LEVELS * dim;
    let mut loss = 0.0;
    grad.iter_mut().for_each(|g| *g = 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let mut p = logits(params, dim, x);
        let zy = p[y.index()];
        let m = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + p.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        loss += lse - zy;
        softmax_in_place(&mut p);
        p[y.index()] -= 1.0;
        for (k, &r) in p.iter().enumerate() {
            let row = &mut grad[k * dim..(k + 1) * dim];
            for (i, v) in x.iter() {
                row[i] += r * v;
            }
            grad[nw + k] += r;
        }
    }
    let mut reg = 0.0;
    for (g, w) in grad[..nw].iter_mut().zip(&params[..nw]) {
        reg += w * w;
        *g += w / c;
    }
    grad.iter_mut().for_each(|g| *g /= n);
    (loss + reg / (2.0 * c)) / n
}

impl LinearTextModel {
    pub fn zeros(dim: usize, c: f64) -> Self {
        LinearTextModel {
            dim,
            c,
            params: vec![0.0; NUM_LEVELS * (dim + 1)],
            iterations: 0,
            converged: false,
        }
    }

    /// L-BFGS from zero initialisation.
    pub fn train(xs: &[SparseVec], ys: &[Acuity], dim: usize, cfg: &LinearConfig) -> Result<Self> {
        cfg.validate()?;
        if xs.len() != ys.len() {
            return Err(Error::InvalidInput("feature and label counts differ".into()));
        }
        let mut present = [false; NUM_LEVELS];
        ys.iter().for_each(|y| present[y.index()] = true);
        if let Some(k) = present.iter().position(|p| !p) {
            return Err(Error::Training(format!("acuity level {} absent from text training data", k + 1)));
        }
        if let Some(bad) = xs.iter().flat_map(|x| x.indices.iter()).find(|&&i| i >= dim) {
            return Err(Error::InvalidInput(format!("feature index {bad} exceeds dimension {dim}")));
        }
        let mut model = Self::zeros(dim, cfg.c);
        let opt = Lbfgs {
            memory: 10,
            max_iter: cfg.max_iter,
            tol: cfg.tol,
        };
        let outcome = opt.minimize(&mut model.params, |p, g| linear_objective(p, dim, cfg.c, xs, ys, g));
        if model.params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Training("linear text model diverged".into()));
        }
        model.iterations = outcome.iterations;
        model.converged = outcome.converged;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn weights(&self, class: usize) -> &[f64] {
        &self.params[class * self.dim..(class + 1) * self.dim]
    }

    pub fn bias(&self) -> &[f64] {
        &self.params[NUM_LEVELS * self.dim..]
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn predict_proba(&self, x: &SparseVec) -> ProbVector {
        let mut z = logits(&self.params, self.dim, x);
        softmax_in_place(&mut z);
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(i: usize) -> SparseVec {
        SparseVec {
            indices: vec![i],
            values: vec![1.0],
        }
    }

    #[test]
    fn separable_axes_reach_full_accuracy() {
        let xs: Vec<SparseVec> = (0..25).map(|i| axis(i % 5)).collect();
        let ys: Vec<Acuity> = (0..25).map(|i| Acuity::from_index(i % 5)).collect();
        let cfg = LinearConfig { c: 100.0, ..Default::default() };
        let m = LinearTextModel::train(&xs, &ys, 5, &cfg).unwrap();
        assert!(m.converged());
        for (x, y) in xs.iter().zip(&ys) {
            let p = m.predict_proba(x);
            assert_eq!(crate::linalg::argmax(&p), y.index());
        }
    }

    #[test]
    fn tiny_c_gives_priors() {
        let ys: Vec<Acuity> = [0, 1, 2, 2, 2, 3, 4, 4].iter().map(|&i| Acuity::from_index(i)).collect();
        let xs: Vec<SparseVec> = (0..ys.len()).map(|i| axis(i % 3)).collect();
        let cfg = LinearConfig { c: 1e-9, ..Default::default() };
        let m = LinearTextModel::train(&xs, &ys, 3, &cfg).unwrap();
        let p = m.predict_proba(&axis(1));
        let prior = [1.0, 1.0, 3.0, 1.0, 2.0].map(|c| c / 8.0);
        for k in 0..NUM_LEVELS {
            assert!((p[k] - prior[k]).abs() < 1e-4, "{p:?}");
        }
        assert!(m.params()[..15].iter().all(|w| w.abs() < 1e-6));
    }

    #[test]
    fn missing_class_is_rejected() {
        let xs = vec![axis(0), axis(1)];
        let ys = vec![Acuity::from_index(0), Acuity::from_index(1)];
        assert!(LinearTextModel::train(&xs, &ys, 2, &LinearConfig::default()).is_err());
    }
}
