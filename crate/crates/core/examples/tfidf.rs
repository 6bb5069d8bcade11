//! Fit the n-gram TF-IDF vectorizer, look at idf weights, and train the
//! linear softmax text classifier on a tiny labelled corpus.
//!
//! ```text
//! cargo run --example tfidf
//! ```

use triage_fusion::ingest::Acuity;
use triage_fusion::text::{tokenize_ngrams, LinearConfig, TfidfClassifier, TfidfConfig, TfidfVectorizer};

fn main() -> triage_fusion::Result<()> {
    let notes = [
        "cardiac arrest",
        "chest pain radiating arm",
        "chest pain",
        "abd pain x3 days",
        "ankle pain",
        "med refill",
    ];
    let levels = [1u8, 2, 2, 3, 4, 5];
    let labels: Vec<Acuity> = levels.iter().map(|&l| Acuity::new(l)).collect::<Result<_, _>>()?;

    println!("{:?}", tokenize_ngrams("abd pain x3 days", (1, 3)));
    let cfg = TfidfConfig::default();
    let v = TfidfVectorizer::fit_texts(&notes, &cfg)?;
    println!("vocabulary of {} terms over {} notes", v.vocab_size(), v.n_docs());
    for t in ["pain", "chest pain", "med refill"] {
        let i = v.term_index(t).expect("term in vocabulary");
        println!("  idf({t:?}) = {:.4} (df {})", v.idf()[i], v.doc_freq()[i]);
    }
    let x = v.transform("chest pain chest pain");
    println!("transform has {} non-zeros, norm {:.3}", x.nnz(), x.norm());

    let linear = LinearConfig {
        c: 10.0,
        ..LinearConfig::default()
    };
    let clf = TfidfClassifier::train(&notes, &labels, &cfg, &linear)?;
    for n in ["chest pain at rest", "refill"] {
        let p = clf.predict_proba(n);
        println!("  {n:?} -> {:?}", p.map(|v| (v * 1000.0).round() / 1000.0));
    }
    Ok(())
}
