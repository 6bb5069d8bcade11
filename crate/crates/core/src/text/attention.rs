//! Single-layer scaled dot-product attention classifier with mean pooling.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use crate::error::{Error, Result};
use crate::ingest::Acuity;
use crate::linalg::softmax_in_place;
use crate::seed;
use crate::{ProbVector, NUM_LEVELS};

pub const UNK: &str = "<unk>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttentionConfig {
    pub d_model: usize,
    pub d_k: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Tokens seen fewer times than this map to the unknown embedding.
    pub min_count: usize,
    pub seed: u64,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig {
            d_model: 16,
            d_k: 16,
            epochs: 20,
            batch_size: 32,
            learning_rate: 0.5,
            min_count: 2,
            seed: 7,
        }
    }
}

impl AttentionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_k == 0 || self.d_model == 0 {
            return Err(Error::Config("attention d_model and d_k must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("attention batch_size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("attention learning_rate must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Token vocabulary with the unknown token at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenVocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl TokenVocab {
    pub fn build<S: AsRef<str>>(texts: &[S], min_count: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in texts {
            for tok in tokenize(t.as_ref()) {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
        let mut tokens = vec![UNK.to_string()];
        tokens.extend(counts.into_iter().filter(|(_, c)| *c >= min_count.max(1)).map(|(t, _)| t));
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        TokenVocab { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        tokenize(text).iter().map(|t| self.id(t)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    vocab: usize,
    d_model: usize,
    d_k: usize,
}

impl Layout {
    fn emb(&self) -> usize {
        0
    }
    fn wq(&self) -> usize {
        self.vocab * self.d_model
    }
    fn wk(&self) -> usize {
        self.wq() + self.d_model * self.d_k
    }
    fn wv(&self) -> usize {
        self.wk() + self.d_model * self.d_k
    }
    fn head(&self) -> usize {
        self.wv() + self.d_model * self.d_k
    }
    fn bias(&self) -> usize {
        self.head() + NUM_LEVELS * self.d_k
    }
    fn len(&self) -> usize {
        self.bias() + NUM_LEVELS
    }
}

/// Result of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub probabilities: ProbVector,
    /// n×n row-stochastic attention weights.
    pub attention: Vec<Vec<f64>>,
    /// n×d_k rows of `attention · V`.
    pub outputs: Vec<Vec<f64>>,
}

/// Parameters live in one flat vector: embeddings (V×d_model), W_Q, W_K, W_V
/// (each d_model×d_k), head (5×d_k), head bias (5). All row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTextModel {
    vocab: TokenVocab,
    layout: Layout,
    params: Vec<f64>,
}

struct Cache {
    x: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    h: Vec<f64>,
    p: ProbVector,
}

fn project(x: &[f64], w: &[f64], d_k: usize) -> Vec<f64> {
    let mut out = vec![0.0; d_k];
    for (i, &xi) in x.iter().enumerate() {
        let row = &w[i * d_k..(i + 1) * d_k];
        for (o, &wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
    out
}

impl AttentionTextModel {
    /// Random N(0, 1/d) initialisation of every matrix, zero head bias.
    pub fn init(vocab: TokenVocab, d_model: usize, d_k: usize, seed_value: u64) -> Result<Self> {
        if d_k == 0 || d_model == 0 {
            return Err(Error::Config("attention d_model and d_k must be positive".into()));
        }
        let layout = Layout {
            vocab: vocab.len(),
            d_model,
            d_k,
        };
        let mut rng = seed::rng(seed_value);
        let mut params = vec![0.0; layout.len()];
        let emb = Normal::new(0.0, 1.0 / (d_model as f64).sqrt()).expect("valid sd");
        let proj = Normal::new(0.0, 1.0 / (d_model as f64).sqrt()).expect("valid sd");
        let head = Normal::new(0.0, 1.0 / (d_k as f64).sqrt()).expect("valid sd");
        for (i, p) in params[..layout.bias()].iter_mut().enumerate() {
            let d = if i < layout.wq() {
                &emb
            } else if i < layout.head() {
                &proj
            } else {
                &head
            };
            *p = d.sample(&mut rng);
        }
        Ok(AttentionTextModel { vocab, layout, params })
    }

    pub fn vocab(&self) -> &TokenVocab {
        &self.vocab
    }

    pub fn d_k(&self) -> usize {
        self.layout.d_k
    }

    pub fn d_model(&self) -> usize {
        self.layout.d_model
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn embedding(&self, id: usize) -> &[f64] {
        let d = self.layout.d_model;
        &self.params[id * d..(id + 1) * d]
    }

    pub fn w_q(&self) -> &[f64] {
        &self.params[self.layout.wq()..self.layout.wk()]
    }

    pub fn w_k(&self) -> &[f64] {
        &self.params[self.layout.wk()..self.layout.wv()]
    }

    pub fn w_v(&self) -> &[f64] {
        &self.params[self.layout.wv()..self.layout.head()]
    }

    pub fn head(&self) -> &[f64] {
        &self.params[self.layout.head()..self.layout.bias()]
    }

    pub fn head_bias(&self) -> &[f64] {
        &self.params[self.layout.bias()..]
    }

    fn run(&self, ids: &[usize]) -> Result<Cache> {
        if ids.is_empty() {
            return Err(Error::InvalidInput("attention forward on an empty token list".into()));
        }
        let Layout { vocab, d_model, d_k } = self.layout;
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
            return Err(Error::InvalidInput(format!("token id {bad} outside vocabulary of {vocab}")));
        }
        let n = ids.len();
        let x: Vec<Vec<f64>> = ids.iter().map(|&i| self.params[i * d_model..(i + 1) * d_model].to_vec()).collect();
        let q: Vec<Vec<f64>> = x.iter().map(|r| project(r, self.w_q(), d_k)).collect();
        let k: Vec<Vec<f64>> = x.iter().map(|r| project(r, self.w_k(), d_k)).collect();
        let v: Vec<Vec<f64>> = x.iter().map(|r| project(r, self.w_v(), d_k)).collect();
        let scale = 1.0 / (d_k as f64).sqrt();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = crate::linalg::dot(&q[i], &k[j]) * scale;
            }
            softmax_in_place(&mut a[i]);
        }
        let mut h = vec![0.0; d_k];
        for row in &a {
            for (j, &aij) in row.iter().enumerate() {
                for (hd, &vd) in h.iter_mut().zip(&v[j]) {
                    *hd += aij * vd;
                }
            }
        }
        h.iter_mut().for_each(|e| *e /= n as f64);
        let head = self.head();
        let bias = self.head_bias();
        let mut p = [0.0; NUM_LEVELS];
        for (c, pc) in p.iter_mut().enumerate() {
            *pc = bias[c] + crate::linalg::dot(&head[c * d_k..(c + 1) * d_k], &h);
        }
        softmax_in_place(&mut p);
        Ok(Cache { x, q, k, v, a, h, p })
    }

    pub fn forward_ids(&self, ids: &[usize]) -> Result<AttentionOutput> {
        let c = self.run(ids)?;
        let outputs = c
            .a
            .iter()
            .map(|row| {
                let mut o = vec![0.0; self.layout.d_k];
                for (j, &aij) in row.iter().enumerate() {
                    for (od, &vd) in o.iter_mut().zip(&c.v[j]) {
                        *od += aij * vd;
                    }
                }
                o
            })
            .collect();
        Ok(AttentionOutput {
            probabilities: c.p,
            attention: c.a,
            outputs,
        })
    }

    pub fn forward(&self, text: &str) -> Result<AttentionOutput> {
        self.forward_ids(&self.vocab.encode(text))
    }

    pub fn predict_proba(&self, text: &str) -> Result<ProbVector> {
        Ok(self.run(&self.vocab.encode(text))?.p)
    }

    /// Cross-entropy of one example; accumulates its gradient into `grad`.
    fn backward(&self, ids: &[usize], y: Acuity, grad: &mut [f64]) -> Result<f64> {
        let Layout { d_model, d_k, .. } = self.layout;
        let c = self.run(ids)?;
        let n = ids.len();
        let lo = self.layout;
        let loss = -c.p[y.index()].max(f64::MIN_POSITIVE).ln();

        let mut dz = c.p;
        dz[y.index()] -= 1.0;
        let mut dh = vec![0.0; d_k];
        let head = self.head();
        for (cl, &g) in dz.iter().enumerate() {
            grad[lo.bias() + cl] += g;
            for d in 0..d_k {
                grad[lo.head() + cl * d_k + d] += g * c.h[d];
                dh[d] += g * head[cl * d_k + d];
            }
        }
        // every output row receives dh / n
        let d_out: Vec<f64> = dh.iter().map(|g| g / n as f64).collect();
        let mut dv = vec![vec![0.0; d_k]; n];
        let mut ds = vec![vec![0.0; n]; n];
        for i in 0..n {
            let da: Vec<f64> = (0..n).map(|j| crate::linalg::dot(&d_out, &c.v[j])).collect();
            let inner: f64 = (0..n).map(|j| c.a[i][j] * da[j]).sum();
            for j in 0..n {
                ds[i][j] = c.a[i][j] * (da[j] - inner);
                for d in 0..d_k {
                    dv[j][d] += c.a[i][j] * d_out[d];
                }
            }
        }
        let scale = 1.0 / (d_k as f64).sqrt();
        let mut dq = vec![vec![0.0; d_k]; n];
        let mut dk = vec![vec![0.0; d_k]; n];
        for i in 0..n {
            for j in 0..n {
                let s = ds[i][j] * scale;
                for d in 0..d_k {
                    dq[i][d] += s * c.k[j][d];
                    dk[j][d] += s * c.q[i][d];
                }
            }
        }
        let (wq, wk, wv) = (self.w_q(), self.w_k(), self.w_v());
        for t in 0..n {
            let tok = ids[t];
            for m in 0..d_model {
                let xm = c.x[t][m];
                let mut dx = 0.0;
                for d in 0..d_k {
                    let w = m * d_k + d;
                    grad[lo.wq() + w] += xm * dq[t][d];
                    grad[lo.wk() + w] += xm * dk[t][d];
                    grad[lo.wv() + w] += xm * dv[t][d];
                    dx += dq[t][d] * wq[w] + dk[t][d] * wk[w] + dv[t][d] * wv[w];
                }
                grad[lo.emb() + tok * d_model + m] += dx;
            }
        }
        Ok(loss)
    }

    /// Mean cross-entropy over `batch` and its gradient in the flat parameter layout.
    pub fn loss_and_gradient(&self, batch: &[(Vec<usize>, Acuity)]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for (ids, y) in batch {
            loss += self.backward(ids, *y, &mut grad)?;
        }
        let n = batch.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((loss / n, grad))
    }

    /// Minibatch gradient descent on mean cross-entropy with a seeded shuffle per epoch.
    pub fn train<S: AsRef<str>>(texts: &[S], labels: &[Acuity], cfg: &AttentionConfig) -> Result<Self> {
        cfg.validate()?;
        if texts.is_empty() {
            return Err(Error::Training("empty attention training set".into()));
        }
        if texts.len() != labels.len() {
            return Err(Error::InvalidInput("text and label counts differ".into()));
        }
        let vocab = TokenVocab::build(texts, cfg.min_count);
        let data: Vec<(Vec<usize>, Acuity)> = texts
            .iter()
            .zip(labels)
            .map(|(t, &y)| (vocab.encode(t.as_ref()), y))
            .filter(|(ids, _)| !ids.is_empty())
            .collect();
        if data.is_empty() {
            return Err(Error::Training("no attention training note has a token".into()));
        }
        let mut model = Self::init(vocab, cfg.d_model, cfg.d_k, seed::derive_seed(cfg.seed, &[seed::tag("init")]))?;
        model.fit(&data, cfg)?;
        Ok(model)
    }

    /// Continues training on pre-encoded data.
    pub fn fit(&mut self, data: &[(Vec<usize>, Acuity)], cfg: &AttentionConfig) -> Result<()> {
        cfg.validate()?;
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut batch = Vec::with_capacity(cfg.batch_size);
        for epoch in 0..cfg.epochs {
            let mut rng = seed::rng(seed::derive_seed(cfg.seed, &[seed::tag("epoch"), epoch as u64]));
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.batch_size) {
                batch.clear();
                batch.extend(chunk.iter().map(|&i| data[i].clone()));
                let (_, grad) = self.loss_and_gradient(&batch)?;
                for (p, g) in self.params.iter_mut().zip(&grad) {
                    *p -= cfg.learning_rate * g;
                }
            }
            if self.params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Training(format!("attention model diverged in epoch {}", epoch + 1)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(words: &[&str]) -> TokenVocab {
        TokenVocab::build(words, 1)
    }

    #[test]
    fn vocab_reserves_unknown() {
        let v = vocab(&["b a", "a"]);
        assert_eq!(v.id("zzz"), 0);
        assert_eq!(v.encode("A b zzz"), vec![1, 2, 0]);
    }

    #[test]
    fn single_token_attends_to_itself() {
        let m = AttentionTextModel::init(vocab(&["x y"]), 4, 3, 1).unwrap();
        let out = m.forward_ids(&[2]).unwrap();
        assert_eq!(out.attention, vec![vec![1.0]]);
        let v = project(m.embedding(2), m.w_v(), 3);
        for (a, b) in out.outputs[0].iter().zip(&v) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_query_gives_uniform_attention() {
        let mut m = AttentionTextModel::init(vocab(&["x y z"]), 4, 4, 2).unwrap();
        let lo = m.layout;
        m.params[lo.wq()..lo.wk()].iter_mut().for_each(|w| *w = 0.0);
        let out = m.forward_ids(&[1, 2, 3]).unwrap();
        for row in &out.attention {
            for &a in row {
                assert!((a - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        assert!(matches!(m.forward_ids(&[]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let texts = ["chest pain", "fever", "cough cough", "rash", "arrest"];
        let labels: Vec<Acuity> = (0..5).map(Acuity::from_index).collect();
        let cfg = AttentionConfig {
            learning_rate: 0.0,
            epochs: 5,
            min_count: 1,
            ..Default::default()
        };
        let trained = AttentionTextModel::train(&texts, &labels, &cfg).unwrap();
        let init = AttentionTextModel::init(
            TokenVocab::build(&texts, 1),
            cfg.d_model,
            cfg.d_k,
            seed::derive_seed(cfg.seed, &[seed::tag("init")]),
        )
        .unwrap();
        assert_eq!(trained.params(), init.params());
    }

    #[test]
    fn rejects_zero_key_dimension() {
        assert!(AttentionTextModel::init(vocab(&["a"]), 4, 0, 0).is_err());
    }
}
