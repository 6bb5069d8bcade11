//! Stack per-modality probabilities, train the meta-classifier with and
//! without modality dropout, and compare zero-masked ablations.
//!
//! ```text
//! cargo run --release --example fusion
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use triage_fusion::fusion::{
    ablate, apply_modality_dropout, predict_meta_level, stack_probabilities, train_meta, Ablation, DropoutPolicy,
    MetaConfig, StackedFeatures,
};
use triage_fusion::ingest::Acuity;
use triage_fusion::ProbVector;

/// A noisy probability vector that peaks at `level` with the given sharpness.
fn noisy(rng: &mut ChaCha8Rng, level: usize, sharp: f64) -> ProbVector {
    let mut p = [0.0; 5];
    for (i, v) in p.iter_mut().enumerate() {
        *v = rng.random::<f64>() + if i == level { sharp } else { 0.0 };
    }
    let s: f64 = p.iter().sum();
    p.map(|v| v / s)
}

fn accuracy(meta: &triage_fusion::fusion::MetaClassifier, xs: &[StackedFeatures], ys: &[Acuity], mode: Ablation) -> f64 {
    let hits = xs.iter().zip(ys).filter(|(a, y)| predict_meta_level(meta, &ablate(a, mode)) == **y).count();
    hits as f64 / xs.len() as f64
}

fn main() -> triage_fusion::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for _ in 0..3000 {
        let y = rng.random_range(0..5);
        // text is the stronger modality here
        xs.push(stack_probabilities(&noisy(&mut rng, y, 0.8), &noisy(&mut rng, y, 1.5))?);
        ys.push(Acuity::from_index(y));
    }
    let masked = apply_modality_dropout(&xs, &DropoutPolicy::symmetric(0.4, 1));
    let dropped = masked.iter().filter(|s| !s.tab_present).count();
    println!("symmetric 0.4 masks {dropped} of {} tabular blocks on the first pass", xs.len());

    let cfg = MetaConfig::default();
    for (name, policy) in [
        ("no dropout", DropoutPolicy::none()),
        ("symmetric 0.4", DropoutPolicy::symmetric(0.4, 1)),
        ("text only dropped", DropoutPolicy::asymmetric(0.0, 1.0, 1)),
    ] {
        let meta = train_meta(&xs, &ys, &cfg, &policy)?;
        println!(
            "{name:>18}: both {:.3}  no tabular {:.3}  no text {:.3}",
            accuracy(&meta, &xs, &ys, Ablation::BothIntact),
            accuracy(&meta, &xs, &ys, Ablation::NoTabular),
            accuracy(&meta, &xs, &ys, Ablation::NoText)
        );
    }
    Ok(())
}
