//! Confusion matrix, quadratic weighted kappa and the other summary scores.
//!
//! ```text
//! cargo run --example metrics
//! ```

use triage_fusion::metrics::{classification_report, confusion_matrix, mean_multiclass_log_loss, qwk};

fn main() -> triage_fusion::Result<()> {
    let truth = [1u8, 2, 2, 3, 3, 3, 4, 4, 5, 5];
    let pred = [1u8, 2, 3, 3, 3, 2, 4, 5, 5, 3];
    let m = confusion_matrix(&truth, &pred, 5)?;
    for i in 0..5 {
        println!("{:?}", (0..5).map(|j| m.get(i, j)).collect::<Vec<_>>());
    }
    println!("qwk {:.4}", qwk(&m)?);
    let b = classification_report(&truth, &pred, 5)?;
    println!(
        "accuracy {:.3}, balanced accuracy {:.3}, macro F1 {:.3}",
        b.accuracy, b.balanced_accuracy, b.macro_f1
    );
    // one step off costs far less than four steps off
    let near = confusion_matrix(&[1, 5], &[2, 4], 5)?;
    let far = confusion_matrix(&[1, 5], &[5, 1], 5)?;
    println!("near misses {:.3}, opposite ends {:.3}", qwk(&near)?, qwk(&far)?);

    let uniform = vec![[0.2; 5]; 3];
    println!("log loss of uniform predictions {:.4}", mean_multiclass_log_loss(&uniform, &[1, 4, 5])?);
    Ok(())
}
