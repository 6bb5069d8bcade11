//! Plug externally computed text probabilities (for example from a
//! fine-tuned transformer) into the pipeline through the probability file.
//!
//! ```text
//! cargo run --example external_probs
//! ```

use triage_fusion::text::{load_external_probs, read_probs, save_probs};

fn main() -> triage_fusion::Result<()> {
    let dir = std::env::temp_dir().join("triage-external-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("text_probs.csv");

    let ids: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let probs = [
        [0.1, 0.6, 0.2, 0.05, 0.05],
        [0.0, 0.0, 0.1, 0.7, 0.2],
        [0.2, 0.2, 0.2, 0.2, 0.2],
    ];
    save_probs(&path, &ids, &probs)?;
    print!("{}", std::fs::read_to_string(&path)?);

    // rows come back aligned to whatever order the caller expects
    let wanted: Vec<String> = ["c", "a", "b"].map(String::from).to_vec();
    let aligned = load_external_probs(&path, &wanted)?;
    println!("aligned to {wanted:?}: first row {:?}", aligned[0]);

    let bad = "record_id,p1,p2,p3,p4,p5\nx,0.3,0.3,0.3,0.3,0.3\n";
    match read_probs(bad.as_bytes(), "inline.csv".as_ref()) {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("rejected: {e}"),
    }
    println!("point text.external_probs at such a file to add an External row to the tables");
    Ok(())
}
