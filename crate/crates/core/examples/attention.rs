//! The single-layer scaled dot-product attention classifier: one forward
//! pass with its attention matrix, then a short training run on keyword data.
//!
//! ```text
//! cargo run --release --example attention
//! ```

use triage_fusion::ingest::Acuity;
use triage_fusion::text::{AttentionConfig, AttentionTextModel, TokenVocab};

fn main() -> triage_fusion::Result<()> {
    let keywords = [
        ["arrest", "unresponsive"],
        ["chest", "stroke"],
        ["abdominal", "fever"],
        ["ankle", "laceration"],
        ["refill", "rash"],
    ];
    let mut texts = Vec::new();
    let mut labels = Vec::new();
    for (level, words) in keywords.iter().enumerate() {
        for i in 0..20 {
            texts.push(format!("{} {}", words[i % 2], words[(i / 2) % 2]));
            labels.push(Acuity::from_index(level));
        }
    }

    let vocab = TokenVocab::build(&texts, 1);
    let untrained = AttentionTextModel::init(vocab, 8, 4, 3)?;
    let out = untrained.forward("chest stroke pain")?;
    println!("attention rows for 3 tokens (unknown 'pain' maps to id 0):");
    for row in &out.attention {
        println!("  {:?}", row.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());
    }

    let cfg = AttentionConfig {
        epochs: 60,
        ..AttentionConfig::default()
    };
    let model = AttentionTextModel::train(&texts, &labels, &cfg)?;
    let hits = texts
        .iter()
        .zip(&labels)
        .filter(|(t, y)| {
            let p = model.predict_proba(t).unwrap();
            let best = (0..5).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
            best == y.index()
        })
        .count();
    println!("training accuracy after {} epochs: {hits}/{}", cfg.epochs, texts.len());
    Ok(())
}
