//! Encounter records: CSV parsing, cleaning, cohort separation and
//! stratified train/validation/test splitting.
//!
//! Cleaning never drops a row for a bad vital sign. Out-of-range or
//! unparseable vitals become missing values, which the tree learner routes
//! natively. Rows are rejected only when they cannot be labelled or have no
//! chief complaint.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::NUM_LEVELS;

/// Input column names, in canonical order.
pub const COLUMNS: [&str; 12] = [
    "record_id",
    "gender",
    "age_at_visit",
    "temperature",
    "heartrate",
    "resp_rate",
    "pain_score",
    "o2_sat",
    "systolic_bp",
    "diastolic_bp",
    "chief_complaint",
    "acuity",
];

/// Tabular feature names in the order produced by [`TriageRecord::features`].
pub const FEATURE_NAMES: [&str; 10] = [
    "gender",
    "age_at_visit",
    "temperature",
    "heartrate",
    "resp_rate",
    "pain_score",
    "o2_sat",
    "systolic_bp",
    "diastolic_bp",
    "unable",
];

pub const NUM_FEATURES: usize = FEATURE_NAMES.len();

/// Youngest age (years) counted as adult.
pub const ADULT_AGE: u32 = 18;

/// Triage acuity level, 1 (most urgent) to 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Acuity(u8);

impl Acuity {
    pub fn new(level: u8) -> Result<Self> {
        if (1..=NUM_LEVELS as u8).contains(&level) {
            Ok(Acuity(level))
        } else {
            Err(Error::InvalidInput(format!("acuity {level} outside 1..=5")))
        }
    }

    /// Level from a zero-based class index.
    pub fn from_index(index: usize) -> Self {
        assert!(index < NUM_LEVELS, "class index {index} out of range");
        Acuity(index as u8 + 1)
    }

    pub fn level(self) -> u8 {
        self.0
    }

    /// Zero-based class index.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

/// One emergency-department encounter after cleaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageRecord {
    pub record_id: String,
    /// 1 = female, 0 = male.
    pub gender: u8,
    pub age_at_visit: u32,
    pub temperature: Option<f64>,
    pub heartrate: Option<f64>,
    pub resp_rate: Option<f64>,
    pub pain_score: Option<u8>,
    pub o2_sat: Option<f64>,
    pub systolic_bp: Option<f64>,
    pub diastolic_bp: Option<f64>,
    /// Patient could not provide a pain rating.
    pub unable: bool,
    pub chief_complaint: String,
    pub acuity: Acuity,
}

impl TriageRecord {
    /// Tabular feature vector in [`FEATURE_NAMES`] order; missing values are NaN.
    pub fn features(&self) -> [f64; NUM_FEATURES] {
        let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
        [
            self.gender as f64,
            self.age_at_visit as f64,
            opt(self.temperature),
            opt(self.heartrate),
            opt(self.resp_rate),
            opt(self.pain_score.map(f64::from)),
            opt(self.o2_sat),
            opt(self.systolic_bp),
            opt(self.diastolic_bp),
            if self.unable { 1.0 } else { 0.0 },
        ]
    }

    pub fn is_pediatric(&self) -> bool {
        self.age_at_visit < ADULT_AGE
    }
}

/// Inclusive physiological range for one measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub const fn new(min: f64, max: f64) -> Self {
        Bounds { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VitalBounds {
    pub temperature: Bounds,
    pub heartrate: Bounds,
    pub resp_rate: Bounds,
    pub o2_sat: Bounds,
    pub systolic_bp: Bounds,
    pub diastolic_bp: Bounds,
    pub pain_score: Bounds,
}

impl Default for VitalBounds {
    fn default() -> Self {
        VitalBounds {
            temperature: Bounds::new(80.0, 110.0),
            heartrate: Bounds::new(20.0, 300.0),
            resp_rate: Bounds::new(4.0, 80.0),
            o2_sat: Bounds::new(50.0, 100.0),
            systolic_bp: Bounds::new(40.0, 300.0),
            diastolic_bp: Bounds::new(20.0, 200.0),
            pain_score: Bounds::new(0.0, 10.0),
        }
    }
}

impl VitalBounds {
    fn named(&self) -> [(&'static str, Bounds); 7] {
        [
            ("temperature", self.temperature),
            ("heartrate", self.heartrate),
            ("resp_rate", self.resp_rate),
            ("o2_sat", self.o2_sat),
            ("systolic_bp", self.systolic_bp),
            ("diastolic_bp", self.diastolic_bp),
            ("pain_score", self.pain_score),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub bounds: VitalBounds,
    /// Pain-field tokens (case-insensitive) meaning the patient was unable to rate pain.
    pub unable_tokens: Vec<String>,
    pub adult_age: u32,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            bounds: VitalBounds::default(),
            unable_tokens: vec!["unable".into(), "uta".into(), "u/a".into()],
            adult_age: ADULT_AGE,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, b) in self.bounds.named() {
            if !(b.min < b.max) {
                return Err(Error::Config(format!(
                    "bounds for {name}: min {} must be below max {}",
                    b.min, b.max
                )));
            }
        }
        if self.adult_age < 1 {
            return Err(Error::Config("adult age threshold must be at least 1".into()));
        }
        Ok(())
    }
}

/// A row that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub row_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CleanOutput {
    pub records: Vec<TriageRecord>,
    pub rejects: Vec<Reject>,
}

fn normalize_text(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn parse_vital(raw: &str, bounds: Bounds) -> Option<f64> {
    let v: f64 = raw.trim().parse().ok()?;
    (v.is_finite() && bounds.contains(v)).then_some(v)
}

fn parse_gender(raw: &str) -> Option<u8> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "f" | "female" => Some(1),
        "0" | "m" | "male" => Some(0),
        _ => None,
    }
}

fn parse_age(raw: &str) -> Option<u32> {
    let s = raw.trim().to_ascii_lowercase();
    match s.as_str() {
        "<1" | "under 1" | "under 1 year" | "under one year" => return Some(0),
        _ => {}
    }
    let v: f64 = s.parse().ok()?;
    (0.0..150.0).contains(&v).then(|| v.floor() as u32)
}

fn parse_acuity(raw: &str) -> Option<Acuity> {
    let v: f64 = raw.trim().parse().ok()?;
    if v.fract() != 0.0 {
        return None;
    }
    Acuity::new(v as u8).ok().filter(|_| (1.0..=5.0).contains(&v))
}

/// (pain_score, unable)
fn parse_pain(raw: &str, cfg: &PreprocessConfig) -> (Option<u8>, bool) {
    let s = raw.trim();
    if s.is_empty() {
        return (None, false);
    }
    if let Ok(v) = s.parse::<f64>() {
        let ok = v.is_finite() && cfg.bounds.pain_score.contains(v);
        return (ok.then(|| v.round() as u8), false);
    }
    let lower = s.to_ascii_lowercase();
    if cfg.unable_tokens.iter().any(|t| t.eq_ignore_ascii_case(&lower)) {
        (None, true)
    } else {
        (None, false)
    }
}

/// Parses and cleans an ingest CSV.
///
/// Every input row ends up either in `records` or in `rejects`; both keep
/// input order.
pub fn parse_and_clean<R: Read>(input: R, cfg: &PreprocessConfig) -> Result<CleanOutput> {
    cfg.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let mut col = [0usize; COLUMNS.len()];
    for (slot, name) in col.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }

    let mut out = CleanOutput::default();
    let mut seen = HashSet::new();
    for (row_index, row) in reader.records().enumerate() {
        let row = row?;
        let field = |c: usize| row.get(col[c]).unwrap_or("");
        let record_id = field(0).trim().to_string();
        let row_id = if record_id.is_empty() {
            format!("row:{}", row_index + 1)
        } else {
            record_id.clone()
        };
        let mut reject = |reason: &str| {
            out.rejects.push(Reject {
                row_id: row_id.clone(),
                reason: reason.to_string(),
            })
        };

        if record_id.is_empty() {
            reject("missing record_id");
            continue;
        }
        let chief_complaint = normalize_text(field(10));
        if chief_complaint.is_empty() {
            reject("missing text");
            continue;
        }
        let Some(acuity) = parse_acuity(field(11)) else {
            reject("invalid acuity");
            continue;
        };
        let Some(gender) = parse_gender(field(1)) else {
            reject("invalid gender");
            continue;
        };
        let Some(age_at_visit) = parse_age(field(2)) else {
            reject("invalid age");
            continue;
        };
        if !seen.insert(record_id.clone()) {
            reject("duplicate record_id");
            continue;
        }
        let b = &cfg.bounds;
        let (pain_score, unable) = parse_pain(field(6), cfg);
        out.records.push(TriageRecord {
            record_id,
            gender,
            age_at_visit,
            temperature: parse_vital(field(3), b.temperature),
            heartrate: parse_vital(field(4), b.heartrate),
            resp_rate: parse_vital(field(5), b.resp_rate),
            pain_score,
            o2_sat: parse_vital(field(7), b.o2_sat),
            systolic_bp: parse_vital(field(8), b.systolic_bp),
            diastolic_bp: parse_vital(field(9), b.diastolic_bp),
            unable,
            chief_complaint,
            acuity,
        });
    }
    Ok(out)
}

pub fn parse_and_clean_file(path: &Path, cfg: &PreprocessConfig) -> Result<CleanOutput> {
    parse_and_clean(std::fs::File::open(path)?, cfg)
}

/// Writes records in the ingest schema. A record flagged `unable` writes the
/// first unable token in the pain column, so re-parsing restores the flag.
pub fn write_records<W: Write>(out: W, records: &[TriageRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        let pain = if r.unable {
            "unable".to_string()
        } else {
            r.pain_score.map(|p| p.to_string()).unwrap_or_default()
        };
        w.write_record([
            r.record_id.clone(),
            r.gender.to_string(),
            r.age_at_visit.to_string(),
            opt(r.temperature),
            opt(r.heartrate),
            opt(r.resp_rate),
            pain,
            opt(r.o2_sat),
            opt(r.systolic_bp),
            opt(r.diastolic_bp),
            r.chief_complaint.clone(),
            r.acuity.level().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rejects<W: Write>(out: W, rejects: &[Reject]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row_id", "reason"])?;
    for r in rejects {
        w.write_record([&r.row_id, &r.reason])?;
    }
    w.flush()?;
    Ok(())
}

/// Separates adults (age ≥ `adult_age`) from pediatric encounters, keeping order.
pub fn split_cohorts(
    records: Vec<TriageRecord>,
    adult_age: u32,
) -> (Vec<TriageRecord>, Vec<TriageRecord>) {
    records.into_iter().partition(|r| r.age_at_visit >= adult_age)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let r = SplitRatios {
            train,
            validation,
            test,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = self.as_array();
        if parts.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::Config(format!(
                "split fractions must all be > 0, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions sum to {sum}, not 1")));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
}

/// Largest-remainder apportionment of `n` items over `ratios`.
pub(crate) fn apportion(n: usize, ratios: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Stratified split over arbitrary items keyed by a class label.
///
/// Each class is shuffled with its own seeded stream and sliced contiguously;
/// outputs are returned in input order.
pub fn stratified_split_by<T: Clone>(
    items: &[T],
    label: impl Fn(&T) -> u8,
    ratios: SplitRatios,
    seed: u64,
) -> Result<Split<T>> {
    ratios.validate()?;
    let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        by_class.entry(label(item)).or_default().push(i);
    }
    for level in 1..=NUM_LEVELS as u8 {
        let n = by_class.get(&level).map_or(0, Vec::len);
        if n < 3 {
            return Err(Error::SparseClass(level, n, 3));
        }
    }
    let mut assignment = vec![0u8; items.len()];
    for (&class, indices) in by_class.iter_mut() {
        let mut rng = seed::rng(seed::derive_seed(seed, &[class as u64]));
        indices.shuffle(&mut rng);
        let counts = apportion(indices.len(), &ratios.as_array());
        let mut pos = 0;
        for (split, &count) in counts.iter().enumerate() {
            for &i in &indices[pos..pos + count] {
                assignment[i] = split as u8;
            }
            pos += count;
        }
    }
    let mut out = Split {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (item, &a) in items.iter().zip(&assignment) {
        match a {
            0 => out.train.push(item.clone()),
            1 => out.validation.push(item.clone()),
            _ => out.test.push(item.clone()),
        }
    }
    Ok(out)
}

pub fn stratified_split(
    records: &[TriageRecord],
    ratios: SplitRatios,
    seed: u64,
) -> Result<Split<TriageRecord>> {
    stratified_split_by(records, |r| r.acuity.level(), ratios, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "record_id,gender,age_at_visit,temperature,heartrate,resp_rate,pain_score,o2_sat,systolic_bp,diastolic_bp,chief_complaint,acuity\n";

    fn clean(body: &str) -> CleanOutput {
        parse_and_clean(format!("{HEADER}{body}").as_bytes(), &PreprocessConfig::default()).unwrap()
    }

    #[test]
    fn unable_pain_token_sets_flag() {
        let out = clean("a,F,40,98.6,80,16,unable,98,120,80,chest pain,2\n");
        let r = &out.records[0];
        assert!(r.unable);
        assert_eq!(r.pain_score, None);
        for tok in ["UTA", "u/a", " Unable "] {
            let out = clean(&format!("b,M,40,,,,{tok},,,,cough,4\n"));
            assert!(out.records[0].unable, "{tok}");
        }
        let out = clean("c,M,40,,,,severe,,,,cough,4\n");
        assert!(!out.records[0].unable);
        assert_eq!(out.records[0].pain_score, None);
    }

    #[test]
    fn out_of_range_vital_becomes_missing() {
        let out = clean("a,0,40,98.6,999,16,3,98,120,80,palpitations,2\n");
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].heartrate, None);
        assert_eq!(out.records[0].temperature, Some(98.6));
        assert!(out.rejects.is_empty());
    }

    #[test]
    fn missing_text_rows_are_rejected() {
        let mut body = String::new();
        for i in 0..10 {
            let text = if i % 3 == 0 && i < 9 { "  " } else { "fever" };
            body.push_str(&format!("r{i},1,30,,,,,,,,{text},3\n"));
        }
        let out = clean(&body);
        assert_eq!(out.records.len(), 7);
        assert_eq!(out.rejects.len(), 3);
        assert!(out.rejects.iter().all(|r| r.reason == "missing text"));
    }

    #[test]
    fn bad_acuity_rejects_row_without_aborting() {
        let out = clean("a,1,30,,,,,,,,fever,six\nb,1,30,,,,,,,,fever,0\nc,1,30,,,,,,,,fever,2.5\nd,1,30,,,,,,,,fever,5\n");
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.rejects.len(), 3);
        assert!(out.rejects.iter().all(|r| r.reason == "invalid acuity"));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let out = clean("a,1,30,,,,,,,,fever,3\na,1,31,,,,,,,,cough,4\n");
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.rejects[0].reason, "duplicate record_id");
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let err = parse_and_clean(
            "record_id,gender,age_at_visit\n".as_bytes(),
            &PreprocessConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "temperature"), "{err}");
    }

    #[test]
    fn invalid_bounds_are_rejected() {
        let mut cfg = PreprocessConfig::default();
        cfg.bounds.heartrate = Bounds::new(300.0, 20.0);
        assert!(cfg.validate().is_err());
        cfg = PreprocessConfig::default();
        cfg.adult_age = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn cohort_boundary_is_seventeen() {
        let out = clean("a,1,17,,,,,,,,fever,3\nb,1,18,,,,,,,,fever,3\nc,1,0,,,,,,,,fever,3\n");
        let (adult, peds) = split_cohorts(out.records, ADULT_AGE);
        assert_eq!(adult.iter().map(|r| r.record_id.as_str()).collect::<Vec<_>>(), ["b"]);
        assert_eq!(peds.len(), 2);
        assert!(peds.iter().all(TriageRecord::is_pediatric));
    }

    #[test]
    fn zero_ratio_is_rejected() {
        assert!(SplitRatios::new(1.0, 0.0, 0.0).is_err());
        assert!(SplitRatios::new(0.5, 0.3, 0.3).is_err());
        assert!(SplitRatios::new(0.6, 0.2, 0.2).is_ok());
    }

    #[test]
    fn apportion_is_exact() {
        assert_eq!(apportion(10, &[0.6, 0.2, 0.2]), vec![6, 2, 2]);
        assert_eq!(apportion(7, &[0.6, 0.2, 0.2]), vec![4, 2, 1]);
        assert_eq!(apportion(3, &[0.6, 0.2, 0.2]).iter().sum::<usize>(), 3);
    }

    #[test]
    fn sparse_class_names_the_class() {
        let items: Vec<u8> = [1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4, 5, 5].to_vec();
        let err = stratified_split_by(&items, |x| *x, SplitRatios::default(), 0).unwrap_err();
        assert!(matches!(err, Error::SparseClass(5, 2, 3)), "{err}");
        let items: Vec<u8> = [1, 1, 1, 2, 2, 2, 3, 3, 3, 5, 5, 5].to_vec();
        let err = stratified_split_by(&items, |x| *x, SplitRatios::default(), 0).unwrap_err();
        assert!(matches!(err, Error::SparseClass(4, 0, 3)), "{err}");
    }
}
