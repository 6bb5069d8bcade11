//! Late fusion: stacked base-model probabilities, modality dropout and a
//! multinomial logistic-regression meta-classifier.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Acuity;
use crate::linalg::{argmax, cholesky_solve, max_abs, softmax_in_place, Lbfgs};
use crate::seed;
use crate::text::check_normalized;
use crate::{ProbVector, NUM_LEVELS};

pub const STACK_DIM: usize = 2 * NUM_LEVELS;
const N_PARAMS: usize = NUM_LEVELS * (STACK_DIM + 1);

/// `[p_tab, p_text]` with presence flags. A missing block is all zeros.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackedFeatures {
    pub a: [f64; STACK_DIM],
    pub tab_present: bool,
    pub text_present: bool,
}

impl StackedFeatures {
    pub fn tab(&self) -> &[f64] {
        &self.a[..NUM_LEVELS]
    }

    pub fn text(&self) -> &[f64] {
        &self.a[NUM_LEVELS..]
    }

    fn drop_tab(&mut self) {
        self.a[..NUM_LEVELS].iter_mut().for_each(|v| *v = 0.0);
        self.tab_present = false;
    }

    fn drop_text(&mut self) {
        self.a[NUM_LEVELS..].iter_mut().for_each(|v| *v = 0.0);
        self.text_present = false;
    }
}

pub fn stack_probabilities(p_tab: &ProbVector, p_text: &ProbVector) -> Result<StackedFeatures> {
    check_normalized(p_tab).map_err(|r| Error::InvalidInput(format!("tabular block {r}")))?;
    check_normalized(p_text).map_err(|r| Error::InvalidInput(format!("text block {r}")))?;
    let mut a = [0.0; STACK_DIM];
    a[..NUM_LEVELS].copy_from_slice(p_tab);
    a[NUM_LEVELS..].copy_from_slice(p_text);
    Ok(StackedFeatures {
        a,
        tab_present: true,
        text_present: true,
    })
}

pub fn stack_all(p_tab: &[ProbVector], p_text: &[ProbVector]) -> Result<Vec<StackedFeatures>> {
    if p_tab.len() != p_text.len() {
        return Err(Error::InvalidInput(format!(
            "{} tabular rows but {} text rows",
            p_tab.len(),
            p_text.len()
        )));
    }
    p_tab.iter().zip(p_text).map(|(t, x)| stack_probabilities(t, x)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum DropoutMode {
    None,
    Symmetric { p: f64 },
    Asymmetric { p_tab: f64, p_text: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutPolicy {
    pub mode: DropoutMode,
    pub seed: u64,
}

impl DropoutPolicy {
    pub fn none() -> Self {
        DropoutPolicy {
            mode: DropoutMode::None,
            seed: 0,
        }
    }

    pub fn symmetric(p: f64, seed: u64) -> Self {
        DropoutPolicy {
            mode: DropoutMode::Symmetric { p },
            seed,
        }
    }

    pub fn asymmetric(p_tab: f64, p_text: f64, seed: u64) -> Self {
        DropoutPolicy {
            mode: DropoutMode::Asymmetric { p_tab, p_text },
            seed,
        }
    }

    /// `(p_tab, p_text)`.
    pub fn rates(&self) -> (f64, f64) {
        match self.mode {
            DropoutMode::None => (0.0, 0.0),
            DropoutMode::Symmetric { p } => (p, p),
            DropoutMode::Asymmetric { p_tab, p_text } => (p_tab, p_text),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.rates();
        for p in [a, b] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("dropout probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn is_noop(&self) -> bool {
        self.rates() == (0.0, 0.0)
    }
}

/// Masks for one pass: two uniforms per sample are always drawn (tabular
/// first), so a symmetric `p` and an asymmetric `(p, p)` policy with the same
/// seed drop exactly the same blocks.
fn masks(n: usize, policy: &DropoutPolicy, pass: u64) -> Vec<(bool, bool)> {
    let (p_tab, p_text) = policy.rates();
    let mut rng = seed::rng(seed::derive_seed(policy.seed, &[seed::tag("dropout"), pass]));
    (0..n)
        .map(|_| {
            let u_tab: f64 = rng.random();
            let u_text: f64 = rng.random();
            (u_tab < p_tab, u_text < p_text)
        })
        .collect()
}

/// Masked copy of `batch` for dropout pass `pass`.
pub fn apply_modality_dropout_pass(batch: &[StackedFeatures], policy: &DropoutPolicy, pass: u64) -> Vec<StackedFeatures> {
    let mut out = batch.to_vec();
    for (s, (dt, dx)) in out.iter_mut().zip(masks(batch.len(), policy, pass)) {
        if dt {
            s.drop_tab();
        }
        if dx {
            s.drop_text();
        }
    }
    out
}

/// Masked copy of `batch` for the first pass.
pub fn apply_modality_dropout(batch: &[StackedFeatures], policy: &DropoutPolicy) -> Vec<StackedFeatures> {
    apply_modality_dropout_pass(batch, policy, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    BothIntact,
    NoTabular,
    NoText,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::BothIntact, Ablation::NoTabular, Ablation::NoText];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::BothIntact => "both_intact",
            Ablation::NoTabular => "no_tabular",
            Ablation::NoText => "no_text",
        }
    }
}

pub fn ablate(a: &StackedFeatures, mode: Ablation) -> StackedFeatures {
    let mut out = *a;
    match mode {
        Ablation::BothIntact => {}
        Ablation::NoTabular => out.drop_tab(),
        Ablation::NoText => out.drop_text(),
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaConfig {
    /// Inverse L2 strength on the weights; biases are unpenalised.
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            c: 1.0,
            max_iter: 1000,
            tol: 1e-5,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("meta C must be positive, got {}", self.c)));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::Config("meta max_iter and tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaClassifier {
    pub weights: [[f64; STACK_DIM]; NUM_LEVELS],
    pub bias: [f64; NUM_LEVELS],
    pub c: f64,
    pub iterations: usize,
}

impl MetaClassifier {
    pub fn zeros(c: f64) -> Self {
        MetaClassifier {
            weights: [[0.0; STACK_DIM]; NUM_LEVELS],
            bias: [0.0; NUM_LEVELS],
            c,
            iterations: 0,
        }
    }

    /// Flat layout used by [`meta_objective`]: weights row-major, then biases.
    pub fn to_params(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.weights.iter().flatten().copied().collect();
        p.extend_from_slice(&self.bias);
        p
    }

    pub fn from_params(params: &[f64], c: f64) -> Self {
        let mut m = Self::zeros(c);
        for k in 0..NUM_LEVELS {
            m.weights[k].copy_from_slice(&params[k * STACK_DIM..(k + 1) * STACK_DIM]);
        }
        m.bias.copy_from_slice(&params[NUM_LEVELS * STACK_DIM..]);
        m
    }

    pub fn logits(&self, a: &[f64; STACK_DIM]) -> ProbVector {
        let mut z = self.bias;
        for (zk, w) in z.iter_mut().zip(&self.weights) {
            *zk += w.iter().zip(a).map(|(w, x)| w * x).sum::<f64>();
        }
        z
    }
}

pub fn predict_meta(meta: &MetaClassifier, a: &StackedFeatures) -> ProbVector {
    let mut z = meta.logits(&a.a);
    softmax_in_place(&mut z);
    z
}

pub fn predict_meta_level(meta: &MetaClassifier, a: &StackedFeatures) -> Acuity {
    Acuity::from_index(argmax(&predict_meta(meta, a)))
}

/// `(1/n) [ Σ cross-entropy + ‖W‖² / (2C) ]`; writes the gradient in the
/// flat layout of [`MetaClassifier::to_params`].
pub fn meta_objective(params: &[f64], xs: &[[f64; STACK_DIM]], ys: &[Acuity], c: f64, grad: &mut [f64]) -> f64 {
    let n = xs.len() as f64;
    let nw = NUM_LEVELS * STACK_DIM;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let mut z = [0.0; NUM_LEVELS];
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = params[nw + k] + x.iter().zip(&params[k * STACK_DIM..]).map(|(a, w)| a * w).sum::<f64>();
        }
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        loss += m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln() - z[y.index()];
        softmax_in_place(&mut z);
        z[y.index()] -= 1.0;
        for (k, &r) in z.iter().enumerate() {
            for (g, a) in grad[k * STACK_DIM..(k + 1) * STACK_DIM].iter_mut().zip(x) {
                *g += r * a;
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

fn check_training(stacked: &[StackedFeatures], labels: &[Acuity]) -> Result<()> {
    if stacked.len() != labels.len() {
        return Err(Error::InvalidInput("stacked features and labels differ in length".into()));
    }
    if stacked.iter().any(|s| s.a.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidInput("non-finite stacked feature".into()));
    }
    let mut present = [false; NUM_LEVELS];
    labels.iter().for_each(|y| present[y.index()] = true);
    if let Some(k) = present.iter().position(|p| !p) {
        return Err(Error::Training(format!("acuity level {} absent from meta training data", k + 1)));
    }
    Ok(())
}

/// Curvature bound for one class: ½·E[x̃ x̃ᵀ]/n plus the ridge term, where x̃
/// is the stacked vector with a trailing 1 and the expectation is over the
/// dropout masks.
fn bound_matrix(stacked: &[StackedFeatures], policy: &DropoutPolicy, c: f64) -> Vec<f64> {
    let d = STACK_DIM + 1;
    let n = stacked.len() as f64;
    let (p_tab, p_text) = policy.rates();
    let keep = |i: usize| match i {
        i if i < NUM_LEVELS => 1.0 - p_tab,
        i if i < STACK_DIM => 1.0 - p_text,
        _ => 1.0,
    };
    let block = |i: usize| i / NUM_LEVELS;
    let mut s = vec![0.0; d * d];
    for row in stacked {
        let x: Vec<f64> = row.a.iter().copied().chain([1.0]).collect();
        for i in 0..d {
            for j in 0..d {
                s[i * d + j] += x[i] * x[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..d {
            let w = if i == j || (block(i) == block(j) && i < STACK_DIM && j < STACK_DIM) {
                keep(i)
            } else {
                keep(i) * keep(j)
            };
            s[i * d + j] *= 0.5 * w / n;
        }
        if i < STACK_DIM {
            s[i * d + i] += 1.0 / (c * n);
        }
    }
    s
}

/// Trains from zero initialisation. Without dropout the deterministic objective
/// is minimised by L-BFGS. With dropout, masks are redrawn every pass and each
/// pass takes one bound-preconditioned gradient step; the returned parameters
/// are the average of the second half of the passes.
pub fn train_meta(
    stacked: &[StackedFeatures],
    labels: &[Acuity],
    cfg: &MetaConfig,
    policy: &DropoutPolicy,
) -> Result<MetaClassifier> {
    cfg.validate()?;
    policy.validate()?;
    check_training(stacked, labels)?;
    let mut params = vec![0.0; N_PARAMS];

    if policy.is_noop() {
        let xs: Vec<[f64; STACK_DIM]> = stacked.iter().map(|s| s.a).collect();
        let opt = Lbfgs {
            memory: 10,
            max_iter: cfg.max_iter,
            tol: cfg.tol,
        };
        let out = opt.minimize(&mut params, |p, g| meta_objective(p, &xs, labels, cfg.c, g));
        let mut m = MetaClassifier::from_params(&params, cfg.c);
        m.iterations = out.iterations;
        return finite(m);
    }

    let d = STACK_DIM + 1;
    let bound = bound_matrix(stacked, policy, cfg.c);
    let mut grad = vec![0.0; N_PARAMS];
    let mut avg = vec![0.0; N_PARAMS];
    let tail_start = cfg.max_iter / 2;
    let mut averaged = 0usize;
    let mut passes = 0;
    for pass in 0..cfg.max_iter {
        passes = pass + 1;
        let masked = apply_modality_dropout_pass(stacked, policy, pass as u64);
        let xs: Vec<[f64; STACK_DIM]> = masked.iter().map(|s| s.a).collect();
        meta_objective(&params, &xs, labels, cfg.c, &mut grad);
        if max_abs(&grad) < cfg.tol {
            break;
        }
        for k in 0..NUM_LEVELS {
            let mut g = vec![0.0; d];
            g[..STACK_DIM].copy_from_slice(&grad[k * STACK_DIM..(k + 1) * STACK_DIM]);
            g[STACK_DIM] = grad[NUM_LEVELS * STACK_DIM + k];
            let step = cholesky_solve(&bound, &g, d)
                .ok_or_else(|| Error::Training("meta curvature bound is not positive definite".into()))?;
            for (w, s) in params[k * STACK_DIM..(k + 1) * STACK_DIM].iter_mut().zip(&step) {
                *w -= s;
            }
            params[NUM_LEVELS * STACK_DIM + k] -= step[STACK_DIM];
        }
        if pass >= tail_start {
            averaged += 1;
            let t = averaged as f64;
            for (a, p) in avg.iter_mut().zip(&params) {
                *a += (p - *a) / t;
            }
        }
    }
    let final_params = if averaged > 0 { avg } else { params };
    let mut m = MetaClassifier::from_params(&final_params, cfg.c);
    m.iterations = passes;
    finite(m)
}

fn finite(m: MetaClassifier) -> Result<MetaClassifier> {
    if m.to_params().iter().all(|v| v.is_finite()) {
        Ok(m)
    } else {
        Err(Error::Training("meta-classifier diverged".into()))
    }
}

pub const PREDICTION_HEADER: [&str; 7] = ["record_id", "pred_level", "p1", "p2", "p3", "p4", "p5"];

/// Writes `record_id,pred_level,p1..p5`, with the level taken as the argmax.
pub fn write_predictions<W: Write>(out: W, ids: &[String], probs: &[ProbVector]) -> Result<()> {
    if ids.len() != probs.len() {
        return Err(Error::InvalidInput("id and probability counts differ".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PREDICTION_HEADER)?;
    for (id, p) in ids.iter().zip(probs) {
        let mut rec = vec![id.clone(), (argmax(p) + 1).to_string()];
        rec.extend(p.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
