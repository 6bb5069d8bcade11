//! Seeded synthetic encounters with age-dependent vitals and templated
//! chief complaints.
//!
//! Each record draws an acuity label and a "presentation" level that equals
//! the label or is one level off. Vitals follow the presentation level, while
//! the complaint template follows the label, with noisy token substitutions
//! that lean towards the presentation level's vocabulary. Pediatric brackets
//! use their own vital baselines, so adult-fit vital thresholds transfer badly
//! while the complaint vocabulary is shared across cohorts.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Acuity, Bounds, TriageRecord, VitalBounds, ADULT_AGE};
use crate::seed;
use crate::NUM_LEVELS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VitalDist {
    pub mean: f64,
    pub sd: f64,
}

const fn vd(mean: f64, sd: f64) -> VitalDist {
    VitalDist { mean, sd }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VitalBaselines {
    pub temperature: VitalDist,
    pub heartrate: VitalDist,
    pub resp_rate: VitalDist,
    pub o2_sat: VitalDist,
    pub systolic_bp: VitalDist,
    pub diastolic_bp: VitalDist,
    pub pain_score: VitalDist,
}

impl VitalBaselines {
    fn all(&self) -> [VitalDist; 7] {
        [
            self.temperature,
            self.heartrate,
            self.resp_rate,
            self.o2_sat,
            self.systolic_bp,
            self.diastolic_bp,
            self.pain_score,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeBracket {
    pub name: String,
    pub min_age: u32,
    pub max_age: u32,
    /// Relative sampling weight within its cohort.
    pub weight: f64,
    pub vitals: VitalBaselines,
    /// Multiplier on the acuity effects.
    pub effect_scale: f64,
    /// Chance the pain score is recorded as "unable".
    pub unable_rate: f64,
    /// Per-token substitution probability in complaints.
    pub text_noise: f64,
}

/// Additive shift on each vital per presentation level (index 0 = level 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcuityEffects {
    pub temperature: [f64; NUM_LEVELS],
    pub heartrate: [f64; NUM_LEVELS],
    pub resp_rate: [f64; NUM_LEVELS],
    pub o2_sat: [f64; NUM_LEVELS],
    pub systolic_bp: [f64; NUM_LEVELS],
    pub diastolic_bp: [f64; NUM_LEVELS],
    pub pain_score: [f64; NUM_LEVELS],
}

impl AcuityEffects {
    fn all(&self) -> [[f64; NUM_LEVELS]; 7] {
        [
            self.temperature,
            self.heartrate,
            self.resp_rate,
            self.o2_sat,
            self.systolic_bp,
            self.diastolic_bp,
            self.pain_score,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissingRates {
    pub temperature: f64,
    pub heartrate: f64,
    pub resp_rate: f64,
    pub o2_sat: f64,
    pub systolic_bp: f64,
    pub diastolic_bp: f64,
    pub pain_score: f64,
}

impl MissingRates {
    pub fn uniform(rate: f64) -> Self {
        MissingRates {
            temperature: rate,
            heartrate: rate,
            resp_rate: rate,
            o2_sat: rate,
            systolic_bp: rate,
            diastolic_bp: rate,
            pain_score: rate,
        }
    }

    fn all(&self) -> [f64; 7] {
        [
            self.temperature,
            self.heartrate,
            self.resp_rate,
            self.o2_sat,
            self.systolic_bp,
            self.diastolic_bp,
            self.pain_score,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    pub n_records: usize,
    pub adult_fraction: f64,
    pub acuity_prior: [f64; NUM_LEVELS],
    pub adult_brackets: Vec<AgeBracket>,
    pub pediatric_brackets: Vec<AgeBracket>,
    pub acuity_effects: AcuityEffects,
    /// Complaint templates per acuity level (index 0 = level 1).
    pub templates: [Vec<String>; NUM_LEVELS],
    /// Generic tokens used for substitutions.
    pub filler: Vec<String>,
    pub missing: MissingRates,
    /// Chance the presentation level is one step away from the label.
    pub presentation_jitter: f64,
    /// Chance a substituted token comes from the presentation level's vocabulary
    /// rather than the filler pool.
    pub presentation_text: f64,
    pub seed: u64,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn base_vitals() -> VitalBaselines {
    VitalBaselines {
        temperature: vd(98.3, 0.5),
        heartrate: vd(80.0, 5.0),
        resp_rate: vd(17.0, 1.0),
        o2_sat: vd(98.0, 0.6),
        systolic_bp: vd(130.0, 6.0),
        diastolic_bp: vd(78.0, 4.0),
        pain_score: vd(4.0, 1.0),
    }
}

fn scale_sd(v: VitalBaselines, k: f64) -> VitalBaselines {
    let s = |d: VitalDist| vd(d.mean, d.sd * k);
    VitalBaselines {
        temperature: s(v.temperature),
        heartrate: s(v.heartrate),
        resp_rate: s(v.resp_rate),
        o2_sat: s(v.o2_sat),
        systolic_bp: s(v.systolic_bp),
        diastolic_bp: s(v.diastolic_bp),
        pain_score: s(v.pain_score),
    }
}

const ADULT_SD_SCALE: f64 = 0.97;
/// Children are both shifted and more spread out than adults.
const PEDIATRIC_SD_SCALE: f64 = 1.41;

fn adult_vitals() -> VitalBaselines {
    scale_sd(base_vitals(), ADULT_SD_SCALE)
}

fn pediatric_bracket(name: &str, min_age: u32, max_age: u32, weight: f64, hr: f64, rr: f64, sbp: f64, unable: f64) -> AgeBracket {
    let base = base_vitals();
    let vitals = VitalBaselines {
        heartrate: vd(hr, 9.0),
        resp_rate: vd(rr, 2.5),
        systolic_bp: vd(sbp, 8.0),
        diastolic_bp: vd(base.diastolic_bp.mean - (130.0 - sbp) * 0.5, 5.0),
        ..base
    };
    AgeBracket {
        name: name.into(),
        min_age,
        max_age,
        weight,
        vitals: scale_sd(vitals, PEDIATRIC_SD_SCALE),
        effect_scale: 1.21,
        unable_rate: unable,
        text_noise: 0.69,
    }
}

impl Default for CohortSpec {
    fn default() -> Self {
        let templates = [
            strings(&[
                "cardiac arrest",
                "unresponsive",
                "respiratory distress",
                "stroke symptoms",
                "major trauma",
                "anaphylaxis",
                "active seizure",
            ]),
            strings(&[
                "chest pain",
                "shortness of breath",
                "altered mental status",
                "syncope",
                "gi bleed",
                "overdose",
                "severe headache",
            ]),
            strings(&[
                "abdominal pain",
                "fever",
                "vomiting",
                "back pain",
                "dizziness",
                "fall",
                "weakness",
            ]),
            strings(&[
                "laceration",
                "ankle injury",
                "ear pain",
                "urinary symptoms",
                "sore throat",
                "wrist pain",
                "cough",
            ]),
            strings(&[
                "medication refill",
                "rash",
                "suture removal",
                "dental pain",
                "insect bite",
                "cold symptoms",
                "wound check",
            ]),
        ];
        CohortSpec {
            n_records: 23_000,
            adult_fraction: 20_000.0 / 23_000.0,
            acuity_prior: [0.04, 0.20, 0.45, 0.23, 0.08],
            adult_brackets: vec![
                AgeBracket {
                    name: "Adults".into(),
                    min_age: 18,
                    max_age: 64,
                    weight: 0.75,
                    vitals: adult_vitals(),
                    effect_scale: 1.0,
                    unable_rate: 0.01,
                    text_noise: 0.31,
                },
                AgeBracket {
                    name: "Older Adults".into(),
                    min_age: 65,
                    max_age: 90,
                    weight: 0.25,
                    vitals: VitalBaselines {
                        systolic_bp: vd(138.0, 7.0 * ADULT_SD_SCALE),
                        ..adult_vitals()
                    },
                    effect_scale: 1.0,
                    unable_rate: 0.03,
                    text_noise: 0.31,
                },
            ],
            pediatric_brackets: vec![
                pediatric_bracket("Infants", 0, 1, 0.2, 93.44, 30.0, 90.0, 0.9),
                pediatric_bracket("Toddlers/Preschool", 2, 5, 0.3, 88.96, 24.0, 98.0, 0.4),
                pediatric_bracket("School Age", 6, 12, 0.3, 84.48, 20.0, 106.0, 0.05),
                pediatric_bracket("Adolescents", 13, 17, 0.2, 81.28, 17.0, 116.0, 0.02),
            ],
            acuity_effects: AcuityEffects {
                temperature: [0.333, 0.222, 0.666, 0.0, -0.111],
                heartrate: [33.3, 19.98, 7.77, 0.0, -3.33],
                resp_rate: [11.1, 5.55, 2.22, 0.0, 0.0],
                o2_sat: [-9.99, -4.44, -1.11, 0.0, 0.0],
                systolic_bp: [-27.75, 13.32, 4.44, 0.0, -2.22],
                diastolic_bp: [-13.32, 6.66, 2.22, 0.0, -1.11],
                pain_score: [1.11, 3.33, 2.22, 0.0, -2.22],
            },
            templates,
            filler: strings(&["x2", "days", "pt", "states", "since", "yesterday", "hx", "c/o", "per", "family", "worse", "onset"]),
            missing: MissingRates::uniform(0.25),
            presentation_jitter: 0.27,
            presentation_text: 0.25,
            seed: 20_240_601,
        }
    }
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.acuity_prior.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.acuity_prior.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Config(format!("acuity prior must be non-negative and sum to 1, sums to {sum}")));
        }
        check_rate("adult_fraction", self.adult_fraction)?;
        check_rate("presentation_jitter", self.presentation_jitter)?;
        check_rate("presentation_text", self.presentation_text)?;
        for r in self.missing.all() {
            check_rate("missing rate", r)?;
        }
        for (cohort, brackets, adult) in [
            ("adult", &self.adult_brackets, true),
            ("pediatric", &self.pediatric_brackets, false),
        ] {
            let needed = if adult { self.adult_fraction > 0.0 } else { self.adult_fraction < 1.0 };
            if needed && brackets.is_empty() {
                return Err(Error::Config(format!("no {cohort} age brackets")));
            }
            for b in brackets.iter() {
                if b.min_age > b.max_age || (b.min_age >= ADULT_AGE) != adult || (b.max_age >= ADULT_AGE) != adult {
                    return Err(Error::Config(format!("bracket `{}` has ages outside the {cohort} range", b.name)));
                }
                if !(b.weight > 0.0) || !b.effect_scale.is_finite() {
                    return Err(Error::Config(format!("bracket `{}` needs a positive weight", b.name)));
                }
                check_rate("unable_rate", b.unable_rate)?;
                check_rate("text_noise", b.text_noise)?;
                if b.vitals.all().iter().any(|d| !(d.sd > 0.0) || !d.mean.is_finite()) {
                    return Err(Error::Config(format!("bracket `{}` needs finite means and sd > 0", b.name)));
                }
            }
        }
        if self.templates.iter().any(|t| t.is_empty() || t.iter().any(|s| s.trim().is_empty())) {
            return Err(Error::Config("every acuity level needs non-empty templates".into()));
        }
        let noisy = self.adult_brackets.iter().chain(&self.pediatric_brackets).any(|b| b.text_noise > 0.0);
        if noisy && self.presentation_text < 1.0 && self.filler.is_empty() {
            return Err(Error::Config("filler tokens required when text noise draws from the pool".into()));
        }
        Ok(())
    }

    pub fn n_adult(&self) -> usize {
        (self.n_records as f64 * self.adult_fraction).round() as usize
    }

    fn level_vocab(&self) -> Vec<Vec<String>> {
        self.templates
            .iter()
            .map(|ts| {
                let mut words: Vec<String> = ts.iter().flat_map(|t| t.split_whitespace().map(String::from)).collect();
                words.sort();
                words.dedup();
                words
            })
            .collect()
    }

    /// Expected heart rate (before clamping) of a cohort's brackets.
    fn expected_heartrate(&self, brackets: &[AgeBracket]) -> f64 {
        let total: f64 = brackets.iter().map(|b| b.weight).sum();
        let effect: f64 = self
            .presentation_marginal()
            .iter()
            .zip(self.acuity_effects.heartrate)
            .map(|(q, e)| q * e)
            .sum();
        brackets
            .iter()
            .map(|b| b.weight / total * (b.vitals.heartrate.mean + b.effect_scale * effect))
            .sum()
    }

    /// Distribution of the presentation level implied by the prior and jitter.
    fn presentation_marginal(&self) -> [f64; NUM_LEVELS] {
        let mut q = [0.0; NUM_LEVELS];
        for (y, &p) in self.acuity_prior.iter().enumerate() {
            q[y] += p * (1.0 - self.presentation_jitter);
            q[y.saturating_sub(1)] += p * self.presentation_jitter / 2.0;
            q[(y + 1).min(NUM_LEVELS - 1)] += p * self.presentation_jitter / 2.0;
        }
        q
    }

    /// Expected pediatric minus adult mean heart rate, before clamping.
    pub fn heartrate_gap(&self) -> f64 {
        self.expected_heartrate(&self.pediatric_brackets) - self.expected_heartrate(&self.adult_brackets)
    }
}

fn pick<'a, T>(rng: &mut impl Rng, items: &'a [T]) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

fn pick_weighted(rng: &mut impl Rng, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let total: f64 = weights.clone().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last = i;
            if u < w {
                return i;
            }
            u -= w;
        }
    }
    last
}

fn clamp_round(v: f64, b: Bounds, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    ((v.clamp(b.min, b.max) * s).round() / s).clamp(b.min, b.max)
}

/// Generates `spec.n_records` encounters: adults first, then pediatric.
/// Record `i` uses its own derived random stream.
pub fn generate_cohort(spec: &CohortSpec) -> Result<Vec<TriageRecord>> {
    spec.validate()?;
    let bounds = VitalBounds::default();
    let vocab = spec.level_vocab();
    let n_adult = spec.n_adult();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::with_capacity(spec.n_records);
    for i in 0..spec.n_records {
        let mut rng = seed::rng(seed::derive_seed(spec.seed, &[i as u64]));
        let brackets = if i < n_adult { &spec.adult_brackets } else { &spec.pediatric_brackets };
        let y = pick_weighted(&mut rng, spec.acuity_prior.iter().copied());
        let bracket = &brackets[pick_weighted(&mut rng, brackets.iter().map(|b| b.weight))];
        let age = rng.random_range(bracket.min_age..=bracket.max_age);
        let level = if rng.random::<f64>() < spec.presentation_jitter {
            if rng.random::<bool>() {
                y.saturating_sub(1)
            } else {
                (y + 1).min(NUM_LEVELS - 1)
            }
        } else {
            y
        };

        let effects = spec.acuity_effects.all();
        let dists = bracket.vitals.all();
        let mut vitals = [0.0; 7];
        for k in 0..7 {
            let mean = dists[k].mean + bracket.effect_scale * effects[k][level];
            vitals[k] = mean + dists[k].sd * unit.sample(&mut rng);
        }
        let missing = spec.missing.all();
        let mut present = [true; 7];
        for (k, p) in present.iter_mut().enumerate() {
            *p = rng.random::<f64>() >= missing[k];
        }
        let unable = rng.random::<f64>() < bracket.unable_rate;
        let gender = rng.random_range(0..2u8);

        let template = pick(&mut rng, &spec.templates[y]);
        let words: Vec<String> = template
            .split_whitespace()
            .map(|w| {
                if rng.random::<f64>() < bracket.text_noise {
                    let pool = if rng.random::<f64>() < spec.presentation_text { &vocab[level] } else { &spec.filler };
                    pick(&mut rng, pool).clone()
                } else {
                    w.to_string()
                }
            })
            .collect();

        let v = |k: usize, b: Bounds, d: i32| present[k].then(|| clamp_round(vitals[k], b, d));
        out.push(TriageRecord {
            record_id: format!("{}{:06}", if i < n_adult { "A" } else { "P" }, i),
            gender,
            age_at_visit: age,
            temperature: v(0, bounds.temperature, 1),
            heartrate: v(1, bounds.heartrate, 0),
            resp_rate: v(2, bounds.resp_rate, 0),
            o2_sat: v(3, bounds.o2_sat, 0),
            systolic_bp: v(4, bounds.systolic_bp, 0),
            diastolic_bp: v(5, bounds.diastolic_bp, 0),
            pain_score: if unable { None } else { v(6, bounds.pain_score, 0).map(|p| p as u8) },
            unable,
            chief_complaint: words.join(" "),
            acuity: Acuity::from_index(y),
        });
    }
    Ok(out)
}
