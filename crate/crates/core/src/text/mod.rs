//! Chief-complaint models: n-gram tf-idf with a linear softmax classifier, a
//! toy attention classifier, and a plug point for externally computed
//! probabilities.

mod attention;
mod external;
mod linear;
mod tfidf;
mod tokenize;

pub use attention::{AttentionConfig, AttentionOutput, AttentionTextModel, TokenVocab, UNK};
pub(crate) use external::prob_path;
pub use external::{
    align_probs, check_normalized, load_external_probs, read_probs, save_probs, write_probs, NORMALIZATION_TOLERANCE,
    PROB_HEADER,
};
pub use linear::{linear_objective, LinearConfig, LinearTextModel};
pub use tfidf::{SparseVec, TfidfConfig, TfidfVectorizer};
pub use tokenize::{ngrams, tokenize, tokenize_ngrams};

use crate::error::Result;
use crate::ingest::Acuity;
use crate::ProbVector;

/// Fitted tf-idf vectorizer plus linear classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfClassifier {
    pub vectorizer: TfidfVectorizer,
    pub model: LinearTextModel,
}

impl TfidfClassifier {
    pub fn train<S: AsRef<str>>(texts: &[S], labels: &[Acuity], tfidf: &TfidfConfig, linear: &LinearConfig) -> Result<Self> {
        let vectorizer = TfidfVectorizer::fit_texts(texts, tfidf)?;
        let xs: Vec<SparseVec> = texts.iter().map(|t| vectorizer.transform(t.as_ref())).collect();
        let model = LinearTextModel::train(&xs, labels, vectorizer.vocab_size(), linear)?;
        Ok(TfidfClassifier { vectorizer, model })
    }

    pub fn predict_proba(&self, text: &str) -> ProbVector {
        self.model.predict_proba(&self.vectorizer.transform(text))
    }
}
