//! Probability-exchange CSV: `record_id,p1,p2,p3,p4,p5`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::{ProbVector, NUM_LEVELS};

pub const PROB_HEADER: [&str; 6] = ["record_id", "p1", "p2", "p3", "p4", "p5"];
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

fn fail(path: &Path, reason: impl Into<String>) -> Error {
    Error::ProbFile {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Checks that `p` is a finite probability vector summing to 1 within tolerance.
pub fn check_normalized(p: &[f64]) -> std::result::Result<(), String> {
    if p.len() != NUM_LEVELS {
        return Err(format!("expected {NUM_LEVELS} probabilities, got {}", p.len()));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err("probabilities must be finite and non-negative".into());
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(format!("not normalized (sum {sum})"));
    }
    Ok(())
}

/// Reads every row, validating arity, normalisation and id uniqueness.
/// `path` is only used in error messages.
pub fn read_probs<R: Read>(input: R, path: &Path) -> Result<Vec<(String, ProbVector)>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header = rdr.headers().map_err(|e| fail(path, e.to_string()))?.clone();
    if header.iter().ne(PROB_HEADER) {
        return Err(fail(path, format!("header must be `{}`", PROB_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    let mut seen = HashMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| fail(path, e.to_string()))?;
        let row = line + 2;
        if rec.len() != NUM_LEVELS + 1 {
            return Err(fail(path, format!("row {row}: expected {NUM_LEVELS} probabilities, got {}", rec.len().saturating_sub(1))));
        }
        let id = rec[0].trim().to_string();
        let mut p = [0.0; NUM_LEVELS];
        for (k, field) in rec.iter().skip(1).enumerate() {
            p[k] = field
                .trim()
                .parse()
                .map_err(|_| fail(path, format!("row {row}: `{field}` is not a number")))?;
        }
        check_normalized(&p).map_err(|r| fail(path, format!("row {row} ({id}): {r}")))?;
        if seen.insert(id.clone(), row).is_some() {
            return Err(fail(path, format!("duplicate id `{id}`")));
        }
        rows.push((id, p));
    }
    Ok(rows)
}

/// Orders `rows` to match `expected_ids`; every expected id must be present.
/// Extra ids in the file are ignored.
pub fn align_probs(rows: Vec<(String, ProbVector)>, expected_ids: &[String], path: &Path) -> Result<Vec<ProbVector>> {
    let by_id: HashMap<String, ProbVector> = rows.into_iter().collect();
    expected_ids
        .iter()
        .map(|id| by_id.get(id).copied().ok_or_else(|| fail(path, format!("missing id `{id}`"))))
        .collect()
}

pub fn load_external_probs(path: &Path, expected_ids: &[String]) -> Result<Vec<ProbVector>> {
    let file = std::fs::File::open(path).map_err(|e| fail(path, e.to_string()))?;
    let rows = read_probs(std::io::BufReader::new(file), path)?;
    align_probs(rows, expected_ids, path)
}

pub fn write_probs<W: Write>(out: W, ids: &[String], probs: &[ProbVector]) -> Result<()> {
    if ids.len() != probs.len() {
        return Err(Error::InvalidInput("id and probability counts differ".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PROB_HEADER)?;
    for (id, p) in ids.iter().zip(probs) {
        let mut rec = vec![id.clone()];
        rec.extend(p.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_probs(path: &Path, ids: &[String], probs: &[ProbVector]) -> Result<()> {
    write_probs(std::io::BufWriter::new(std::fs::File::create(path)?), ids, probs)
}

pub(crate) fn prob_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.probs.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Vec<(String, ProbVector)>> {
        read_probs(s.as_bytes(), Path::new("mem.csv"))
    }

    #[test]
    fn shuffled_ids_align() {
        let text = "record_id,p1,p2,p3,p4,p5\nb,0,1,0,0,0\na,0.2,0.2,0.2,0.2,0.2\n";
        let ids = vec!["a".to_string(), "b".to_string()];
        let out = align_probs(parse(text).unwrap(), &ids, Path::new("x")).unwrap();
        assert_eq!(out[0], [0.2; 5]);
        assert_eq!(out[1], [0.0, 1.0, 0.0, 0.0, 0.0]);
        let err = align_probs(parse(text).unwrap(), &["c".into()], Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("missing id"));
    }

    #[test]
    fn rejects_bad_rows() {
        let unnorm = "record_id,p1,p2,p3,p4,p5\na,0.3,0.3,0.3,0.3,0.3\n";
        assert!(parse(unnorm).unwrap_err().to_string().contains("not normalized"));
        let dup = "record_id,p1,p2,p3,p4,p5\na,1,0,0,0,0\na,1,0,0,0,0\n";
        assert!(parse(dup).unwrap_err().to_string().contains("duplicate id"));
        let short = "record_id,p1,p2,p3,p4,p5\na,0.5,0.5,0,0\n";
        assert!(parse(short).unwrap_err().to_string().contains("expected 5"));
    }

    #[test]
    fn write_read_round_trip_is_exact() {
        let ids = vec!["r1".to_string(), "r2".to_string()];
        let p1 = [0.1, 0.2, 0.30000000000000004, 0.25, 0.15];
        let probs = vec![p1, [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 0.0]];
        let mut buf = Vec::new();
        write_probs(&mut buf, &ids, &probs).unwrap();
        let back = parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back[0].1, probs[0]);
        assert_eq!(back[1].1, probs[1]);
    }
}
