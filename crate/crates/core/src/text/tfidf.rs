use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize_ngrams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TfidfConfig {
    pub ngram_range: (usize, usize),
    /// Terms seen in fewer notes than this are dropped from the vocabulary.
    pub min_df: usize,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig {
            ngram_range: (1, 3),
            min_df: 1,
        }
    }
}

impl TfidfConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.ngram_range;
        if lo == 0 || hi < lo {
            return Err(Error::Config(format!("invalid n-gram range ({lo}, {hi})")));
        }
        if self.min_df == 0 {
            return Err(Error::Config("min_df must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut d = vec![0.0; dim];
        for (i, v) in self.iter() {
            d[i] = v;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfVectorizer {
    config: TfidfConfig,
    terms: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
    idf: Vec<f64>,
    n_docs: usize,
}

impl TfidfVectorizer {
    /// Builds the vocabulary (sorted term order) and idf = ln(N / df) from
    /// notes that are already split into terms.
    pub fn fit<D: AsRef<[String]>>(corpus: &[D], config: &TfidfConfig) -> Result<Self> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(Error::InvalidInput("cannot fit tf-idf on an empty corpus".into()));
        }
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        let mut seen: Vec<&str> = Vec::new();
        for doc in corpus {
            seen.clear();
            seen.extend(doc.as_ref().iter().map(String::as_str));
            seen.sort_unstable();
            seen.dedup();
            for t in &seen {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let n_docs = corpus.len();
        let mut terms = Vec::new();
        let mut doc_freq = Vec::new();
        for (t, d) in df {
            if d >= config.min_df {
                terms.push(t.to_string());
                doc_freq.push(d);
            }
        }
        let idf = doc_freq.iter().map(|&d| (n_docs as f64 / d as f64).ln()).collect();
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(TfidfVectorizer {
            config: config.clone(),
            terms,
            index,
            doc_freq,
            idf,
            n_docs,
        })
    }

    pub fn fit_texts<S: AsRef<str>>(texts: &[S], config: &TfidfConfig) -> Result<Self> {
        config.validate()?;
        let corpus: Vec<Vec<String>> = texts
            .iter()
            .map(|t| tokenize_ngrams(t.as_ref(), config.ngram_range))
            .collect();
        Self::fit(&corpus, config)
    }

    pub fn config(&self) -> &TfidfConfig {
        &self.config
    }

    pub fn vocab_size(&self) -> usize {
        self.terms.len()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn doc_freq(&self) -> &[usize] {
        &self.doc_freq
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    /// Copy with every idf weight multiplied by `factor`.
    pub fn with_scaled_idf(&self, factor: f64) -> Self {
        let mut v = self.clone();
        v.idf.iter_mut().for_each(|w| *w *= factor);
        v
    }

    /// Raw count × idf for in-vocabulary terms; unseen terms are ignored.
    pub fn transform_terms_raw(&self, terms: &[String]) -> SparseVec {
        let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
        for t in terms {
            if let Some(&i) = self.index.get(t) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        let mut out = SparseVec::default();
        for (i, c) in counts {
            out.indices.push(i);
            out.values.push(c as f64 * self.idf[i]);
        }
        out
    }

    pub fn transform_terms(&self, terms: &[String]) -> SparseVec {
        let mut v = self.transform_terms_raw(terms);
        let norm = v.norm();
        if norm > 0.0 {
            v.values.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }

    pub fn transform_raw(&self, text: &str) -> SparseVec {
        self.transform_terms_raw(&tokenize_ngrams(text, self.config.ngram_range))
    }

    /// L2-normalised tf-idf vector; all-zero when no term is in the vocabulary.
    pub fn transform(&self, text: &str) -> SparseVec {
        self.transform_terms(&tokenize_ngrams(text, self.config.ngram_range))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn terms(s: &str) -> Vec<String> {
        s.split(' ').map(String::from).collect()
    }

    #[test]
    fn idf_is_unsmoothed_log_ratio() {
        let corpus = vec![terms("a b"), terms("b c"), terms("b")];
        let v = TfidfVectorizer::fit(&corpus, &TfidfConfig::default()).unwrap();
        assert_eq!(v.terms(), ["a", "b", "c"]);
        assert_eq!(v.idf()[0], 3f64.ln());
        assert_eq!(v.idf()[1], 0.0);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let corpus: Vec<Vec<String>> = vec![];
        assert!(TfidfVectorizer::fit(&corpus, &TfidfConfig::default()).is_err());
    }

    #[test]
    fn min_df_prunes() {
        let corpus = vec![terms("a b"), terms("b c"), terms("b")];
        let cfg = TfidfConfig { min_df: 2, ..Default::default() };
        let v = TfidfVectorizer::fit(&corpus, &cfg).unwrap();
        assert_eq!(v.terms(), ["b"]);
    }

    #[test]
    fn oov_note_is_zero_and_repeats_align_to_axis() {
        let v = TfidfVectorizer::fit_texts(&["chest pain", "fever", "cough"], &TfidfConfig::default()).unwrap();
        assert_eq!(v.transform("headache").nnz(), 0);
        let x = v.transform("fever fever");
        let i = v.term_index("fever").unwrap();
        // "fever fever" bigram is unseen, so only the unigram axis remains
        assert_eq!(x.indices, vec![i]);
        assert_eq!(x.values, vec![1.0]);
        let raw = v.transform_raw("fever fever");
        assert_eq!(raw.values, vec![2.0 * 3f64.ln()]);
    }
}
