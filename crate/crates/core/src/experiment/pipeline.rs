use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, MetaSource, TextModelKind};
use super::report::{ConfusionEntry, ModelRow, SeedRecord};
use crate::error::{Error, Result};
use crate::fusion::{predict_meta, stack_all, train_meta, DropoutPolicy, MetaClassifier, StackedFeatures};
use crate::gbdt::{ordinal_to_level, save_model, train_multiclass, train_ordinal, Dataset, GbdtModel};
use crate::ingest::{
    parse_and_clean, parse_and_clean_file, split_cohorts, stratified_split, write_records, Acuity,
    CleanOutput, TriageRecord, ADULT_AGE,
};
use crate::linalg::argmax;
use crate::metrics::{classification_report, confusion_matrix, mean_multiclass_log_loss, mean_squared_error, MetricBundle};
use crate::seed::{derive_seed, tag};
use crate::synthgen::generate_cohort;
use crate::text::{load_external_probs, prob_path, read_probs, save_probs, AttentionTextModel, TfidfClassifier};
use crate::{ProbVector, NUM_LEVELS};

pub const ARTIFACT_DIR: &str = "artifacts";
const MANIFEST: &str = "manifest.json";
const SETS: [&str; 3] = ["meta_train", "adult_test", "pediatric"];

pub const GBDT_CLASS: &str = "GBDT Class";
pub const GBDT_REGRESS: &str = "GBDT Regress";
pub const TFIDF: &str = "TF-IDF";
pub const ATTENTION: &str = "Attention";
pub const EXTERNAL: &str = "External";
pub const MULTIMODAL: &str = "Multimodal";

/// Component seeds derived from the master seed.
pub fn derive_seeds(cfg: &ExperimentConfig) -> SeedRecord {
    let m = cfg.seed;
    let data_base = cfg.data.synthetic.as_ref().map_or(0, |s| s.seed);
    SeedRecord {
        master: m,
        data: derive_seed(m, &[tag("data"), data_base]),
        split: derive_seed(m, &[tag("split")]),
        gbdt: derive_seed(m, &[tag("gbdt"), cfg.gbdt.seed]),
        attention: derive_seed(m, &[tag("attention"), cfg.text.attention.seed]),
        folds: derive_seed(m, &[tag("folds")]),
        meta: derive_seed(m, &[tag("meta")]),
    }
}

/// Records from the configured source after cleaning. A synthetic cohort is
/// serialised to the ingest CSV schema first and cleaned like any file.
pub fn load_records(cfg: &ExperimentConfig) -> Result<CleanOutput> {
    let seeds = derive_seeds(cfg);
    if let Some(path) = &cfg.data.csv {
        return parse_and_clean_file(path, &cfg.preprocess);
    }
    let csv = synthetic_csv(cfg, seeds.data)?;
    parse_and_clean(csv.as_slice(), &cfg.preprocess)
}

/// Synthetic cohort in ingest CSV form, generated with the derived data seed.
pub fn synthetic_csv(cfg: &ExperimentConfig, data_seed: u64) -> Result<Vec<u8>> {
    let mut spec = cfg
        .data
        .synthetic
        .clone()
        .ok_or_else(|| Error::Config("no synthetic cohort configured".into()))?;
    spec.seed = data_seed;
    let records = generate_cohort(&spec)?;
    let mut buf = Vec::new();
    write_records(&mut buf, &records)?;
    Ok(buf)
}

/// Base-model probabilities for one evaluation set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoredSet {
    pub ids: Vec<String>,
    pub labels: Vec<Acuity>,
    pub ages: Vec<u32>,
    pub tab: Vec<ProbVector>,
    pub text: Vec<ProbVector>,
}

impl ScoredSet {
    fn from_records(records: &[TriageRecord]) -> Self {
        ScoredSet {
            ids: records.iter().map(|r| r.record_id.clone()).collect(),
            labels: records.iter().map(|r| r.acuity).collect(),
            ages: records.iter().map(|r| r.age_at_visit).collect(),
            tab: Vec::new(),
            text: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn levels(&self) -> Vec<u8> {
        self.labels.iter().map(|a| a.level()).collect()
    }

    pub fn stacked(&self) -> Result<Vec<StackedFeatures>> {
        stack_all(&self.tab, &self.text)
    }
}

/// Everything later stages need from the base models, cached on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseArtifacts {
    pub seeds: SeedRecord,
    pub meta_train: ScoredSet,
    pub adult_test: ScoredSet,
    pub pediatric: ScoredSet,
    /// Baseline and multimodal rows, adult test set.
    pub adult_rows: Vec<ModelRow>,
    /// Same models on the pediatric cohort; empty without pediatric data.
    pub pediatric_rows: Vec<ModelRow>,
    pub notices: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    seeds: SeedRecord,
    adult_rows: Vec<ModelRow>,
    pediatric_rows: Vec<ModelRow>,
    notices: Vec<String>,
    sizes: [usize; 3],
}

/// Output of [`run_pipeline`]: cached artifacts plus the fitted tabular models.
pub struct PipelineRun {
    pub artifacts: BaseArtifacts,
    pub gbdt_class: GbdtModel,
    pub gbdt_regress: GbdtModel,
}

fn levels(records: &[TriageRecord]) -> Vec<u8> {
    records.iter().map(|r| r.acuity.level()).collect()
}

fn argmax_levels(probs: &[ProbVector]) -> Vec<u8> {
    probs.iter().map(|p| argmax(p) as u8 + 1).collect()
}

fn bundle(probs: &[ProbVector], truth: &[u8]) -> Result<MetricBundle> {
    let mut b = classification_report(truth, &argmax_levels(probs), NUM_LEVELS)?;
    b.mean_log_loss = Some(mean_multiclass_log_loss(probs, truth)?);
    Ok(b)
}

/// Scores of one probabilistic model over train / adult test / pediatric.
struct ModelScores {
    name: &'static str,
    train: Option<Vec<ProbVector>>,
    adult: Vec<ProbVector>,
    pediatric: Vec<ProbVector>,
}

fn prob_rows(s: &ModelScores, train_y: &[u8], adult_y: &[u8], ped_y: &[u8], rows: &mut Rows) -> Result<()> {
    let training_error = s
        .train
        .as_ref()
        .map(|p| mean_multiclass_log_loss(p, train_y))
        .transpose()?;
    let adult = bundle(&s.adult, adult_y)?;
    rows.adult.push(ModelRow {
        model: s.name.into(),
        training_error,
        test_error: adult.mean_log_loss,
        metrics: adult,
    });
    if !ped_y.is_empty() {
        let ped = bundle(&s.pediatric, ped_y)?;
        rows.pediatric.push(ModelRow {
            model: s.name.into(),
            training_error: None,
            test_error: ped.mean_log_loss,
            metrics: ped,
        });
    }
    Ok(())
}

#[derive(Default)]
struct Rows {
    adult: Vec<ModelRow>,
    pediatric: Vec<ModelRow>,
}

fn gbdt_probs(model: &GbdtModel, records: &[TriageRecord]) -> Result<Vec<ProbVector>> {
    records.iter().map(|r| model.predict_proba(&r.features())).collect()
}

fn gbdt_scores(model: &GbdtModel, records: &[TriageRecord]) -> Result<Vec<f64>> {
    records.iter().map(|r| model.predict_score(&r.features())).collect()
}

fn regress_row(model: &GbdtModel, train: &[TriageRecord], eval: &[TriageRecord], with_train: bool) -> Result<ModelRow> {
    let truth = |rs: &[TriageRecord]| rs.iter().map(|r| r.acuity.level() as f64).collect::<Vec<_>>();
    let scores = gbdt_scores(model, eval)?;
    let pred: Vec<u8> = scores
        .iter()
        .map(|&s| ordinal_to_level(s).map(|a| a.level()))
        .collect::<Result<_>>()?;
    let mut metrics = classification_report(&levels(eval), &pred, NUM_LEVELS)?;
    let test_mse = mean_squared_error(&scores, &truth(eval))?;
    metrics.mse = Some(test_mse);
    let training_error = if with_train {
        Some(mean_squared_error(&gbdt_scores(model, train)?, &truth(train))?)
    } else {
        None
    };
    Ok(ModelRow {
        model: GBDT_REGRESS.into(),
        training_error,
        test_error: Some(test_mse),
        metrics,
    })
}

fn texts(records: &[TriageRecord]) -> Vec<&str> {
    records.iter().map(|r| r.chief_complaint.as_str()).collect()
}

fn labels(records: &[TriageRecord]) -> Vec<Acuity> {
    records.iter().map(|r| r.acuity).collect()
}

fn attention_probs(model: &AttentionTextModel, records: &[TriageRecord]) -> Result<Vec<ProbVector>> {
    records
        .iter()
        .map(|r| {
            let mut ids = model.vocab().encode(&r.chief_complaint);
            if ids.is_empty() {
                ids.push(0); // <unk>
            }
            Ok(model.forward_ids(&ids)?.probabilities)
        })
        .collect()
}

struct TextModels {
    tfidf: TfidfClassifier,
    attention: Option<AttentionTextModel>,
}

fn train_text(train: &[TriageRecord], cfg: &ExperimentConfig, seeds: &SeedRecord, need_attention: bool) -> Result<TextModels> {
    let t = &cfg.text;
    let tfidf = TfidfClassifier::train(&texts(train), &labels(train), &t.tfidf, &t.linear)?;
    let attention = if need_attention {
        let mut acfg = t.attention.clone();
        acfg.seed = seeds.attention;
        Some(AttentionTextModel::train(&texts(train), &labels(train), &acfg)?)
    } else {
        None
    };
    Ok(TextModels { tfidf, attention })
}

fn fusion_text_probs(
    models: &TextModels,
    records: &[TriageRecord],
    cfg: &ExperimentConfig,
) -> Result<Vec<ProbVector>> {
    match cfg.text.fusion_model {
        TextModelKind::Tfidf => Ok(records.iter().map(|r| models.tfidf.predict_proba(&r.chief_complaint)).collect()),
        TextModelKind::Attention => attention_probs(models.attention.as_ref().expect("attention trained"), records),
        TextModelKind::External => {
            let path = cfg.text.external_probs.as_ref().expect("validated");
            let ids: Vec<String> = records.iter().map(|r| r.record_id.clone()).collect();
            load_external_probs(path, &ids)
        }
    }
}

fn gbdt_config(cfg: &ExperimentConfig, seeds: &SeedRecord) -> crate::gbdt::GbdtConfig {
    let mut g = cfg.gbdt.clone();
    g.seed = seeds.gbdt;
    g
}

/// Fold id per training record: each class is shuffled with its own stream
/// and dealt round-robin.
fn fold_assignment(train: &[TriageRecord], folds: usize, seed: u64) -> Vec<usize> {
    let mut fold = vec![0; train.len()];
    for level in 1..=NUM_LEVELS as u8 {
        let mut idx: Vec<usize> = (0..train.len()).filter(|&i| train[i].acuity.level() == level).collect();
        idx.shuffle(&mut crate::seed::rng(derive_seed(seed, &[level as u64])));
        for (j, i) in idx.into_iter().enumerate() {
            fold[i] = j % folds;
        }
    }
    fold
}

/// Out-of-fold base probabilities over the training split.
fn out_of_fold(
    train: &[TriageRecord],
    valid: &[TriageRecord],
    cfg: &ExperimentConfig,
    seeds: &SeedRecord,
) -> Result<(Vec<ProbVector>, Vec<ProbVector>)> {
    let k = cfg.meta.folds;
    let fold = fold_assignment(train, k, seeds.folds);
    let mut tab = vec![[0.0; NUM_LEVELS]; train.len()];
    let mut text = vec![[0.0; NUM_LEVELS]; train.len()];
    let valid_ds = Dataset::from_records(valid);
    for f in 0..k {
        let (held, fit): (Vec<usize>, Vec<usize>) = (0..train.len()).partition(|&i| fold[i] == f);
        let fit_records: Vec<TriageRecord> = fit.iter().map(|&i| train[i].clone()).collect();
        let held_records: Vec<TriageRecord> = held.iter().map(|&i| train[i].clone()).collect();
        let gb = train_multiclass(&Dataset::from_records(&fit_records), &valid_ds, &gbdt_config(cfg, seeds))
            .map_err(|e| e.at("gbdt"))?;
        let need_attention = cfg.text.fusion_model == TextModelKind::Attention;
        let tm = train_text(&fit_records, cfg, seeds, need_attention).map_err(|e| e.at("text"))?;
        let p_tab = gbdt_probs(&gb, &held_records)?;
        let p_text = fusion_text_probs(&tm, &held_records, cfg).map_err(|e| e.at("text"))?;
        for (j, &i) in held.iter().enumerate() {
            tab[i] = p_tab[j];
            text[i] = p_text[j];
        }
    }
    Ok((tab, text))
}

/// Bases fit on the adult training split, the meta-classifier (no dropout)
/// on the configured stacking source, and every model scored on the adult
/// test split and the full pediatric cohort.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineRun> {
    cfg.validate()?;
    let seeds = derive_seeds(cfg);
    let clean = load_records(cfg).map_err(|e| e.at("ingest"))?;
    let (adults, pediatric) = split_cohorts(clean.records, ADULT_AGE);
    let mut notices = Vec::new();
    if !clean.rejects.is_empty() {
        notices.push(format!("{} input rows rejected during cleaning", clean.rejects.len()));
    }
    if pediatric.is_empty() {
        notices.push("pediatric cohort is empty; pediatric table omitted".into());
    }
    let split = stratified_split(&adults, cfg.split, seeds.split).map_err(|e| e.at("split"))?;
    let (train, valid, test) = (&split.train, &split.validation, &split.test);

    let gcfg = gbdt_config(cfg, &seeds);
    let train_ds = Dataset::from_records(train);
    let valid_ds = Dataset::from_records(valid);
    let gbdt_class = train_multiclass(&train_ds, &valid_ds, &gcfg).map_err(|e| e.at("gbdt"))?;
    let gbdt_regress = train_ordinal(&train_ds, &valid_ds, &gcfg).map_err(|e| e.at("gbdt"))?;

    let need_attention = cfg.text.use_attention;
    let tm = train_text(train, cfg, &seeds, need_attention).map_err(|e| e.at("text"))?;

    let (train_y, test_y, ped_y) = (levels(train), levels(test), levels(&pediatric));
    let mut rows = Rows::default();
    let class_scores = ModelScores {
        name: GBDT_CLASS,
        train: Some(gbdt_probs(&gbdt_class, train)?),
        adult: gbdt_probs(&gbdt_class, test)?,
        pediatric: gbdt_probs(&gbdt_class, &pediatric)?,
    };
    prob_rows(&class_scores, &train_y, &test_y, &ped_y, &mut rows).map_err(|e| e.at("evaluate"))?;
    rows.adult.push(regress_row(&gbdt_regress, train, test, true).map_err(|e| e.at("evaluate"))?);
    if !pediatric.is_empty() {
        rows.pediatric
            .push(regress_row(&gbdt_regress, train, &pediatric, false).map_err(|e| e.at("evaluate"))?);
    }
    let tfidf_probs = |rs: &[TriageRecord]| -> Vec<ProbVector> {
        rs.iter().map(|r| tm.tfidf.predict_proba(&r.chief_complaint)).collect()
    };
    let tfidf_scores = ModelScores {
        name: TFIDF,
        train: Some(tfidf_probs(train)),
        adult: tfidf_probs(test),
        pediatric: tfidf_probs(&pediatric),
    };
    prob_rows(&tfidf_scores, &train_y, &test_y, &ped_y, &mut rows).map_err(|e| e.at("evaluate"))?;
    if let Some(att) = &tm.attention {
        let s = ModelScores {
            name: ATTENTION,
            train: Some(attention_probs(att, train)?),
            adult: attention_probs(att, test)?,
            pediatric: attention_probs(att, &pediatric)?,
        };
        prob_rows(&s, &train_y, &test_y, &ped_y, &mut rows).map_err(|e| e.at("evaluate"))?;
    }
    if let Some(path) = &cfg.text.external_probs {
        let ids = |rs: &[TriageRecord]| rs.iter().map(|r| r.record_id.clone()).collect::<Vec<_>>();
        let s = ModelScores {
            name: EXTERNAL,
            train: None,
            adult: load_external_probs(path, &ids(test)).map_err(|e| e.at("text"))?,
            pediatric: load_external_probs(path, &ids(&pediatric)).map_err(|e| e.at("text"))?,
        };
        prob_rows(&s, &train_y, &test_y, &ped_y, &mut rows).map_err(|e| e.at("evaluate"))?;
    }

    let (meta_records, meta_tab, meta_text) = match cfg.meta.source {
        MetaSource::Validation => (
            valid.as_slice(),
            gbdt_probs(&gbdt_class, valid)?,
            fusion_text_probs(&tm, valid, cfg).map_err(|e| e.at("text"))?,
        ),
        MetaSource::OutOfFold => {
            let (t, x) = out_of_fold(train, valid, cfg, &seeds)?;
            (train.as_slice(), t, x)
        }
    };
    let mut meta_train = ScoredSet::from_records(meta_records);
    meta_train.tab = meta_tab;
    meta_train.text = meta_text;
    let mut adult_test = ScoredSet::from_records(test);
    adult_test.tab = class_scores.adult.clone();
    adult_test.text = fusion_text_probs(&tm, test, cfg).map_err(|e| e.at("text"))?;
    let mut ped = ScoredSet::from_records(&pediatric);
    ped.tab = class_scores.pediatric.clone();
    ped.text = fusion_text_probs(&tm, &pediatric, cfg).map_err(|e| e.at("text"))?;

    let mut artifacts = BaseArtifacts {
        seeds,
        meta_train,
        adult_test,
        pediatric: ped,
        adult_rows: rows.adult,
        pediatric_rows: rows.pediatric,
        notices,
    };
    let meta = train_meta(
        &artifacts.meta_train.stacked()?,
        &artifacts.meta_train.labels,
        &cfg.meta.meta_config(),
        &DropoutPolicy::none(),
    )
    .map_err(|e| e.at("fusion"))?;
    let eval = evaluate_meta(&meta, &artifacts).map_err(|e| e.at("evaluate"))?;
    let (a, p) = eval.rows(MULTIMODAL);
    artifacts.adult_rows.push(a);
    if let Some(p) = p {
        artifacts.pediatric_rows.push(p);
    }
    Ok(PipelineRun {
        artifacts,
        gbdt_class,
        gbdt_regress,
    })
}

/// Meta-classifier scored on every cached set.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaEvaluation {
    pub training_error: f64,
    pub adult_test_error: f64,
    pub adult: MetricBundle,
    pub pediatric: Option<MetricBundle>,
    pub adult_probs: Vec<ProbVector>,
    pub pediatric_probs: Vec<ProbVector>,
}

impl MetaEvaluation {
    pub fn rows(&self, name: &str) -> (ModelRow, Option<ModelRow>) {
        let adult = ModelRow {
            model: name.into(),
            training_error: Some(self.training_error),
            test_error: Some(self.adult_test_error),
            metrics: self.adult,
        };
        let ped = self.pediatric.map(|m| ModelRow {
            model: name.into(),
            training_error: None,
            test_error: m.mean_log_loss,
            metrics: m,
        });
        (adult, ped)
    }

    pub fn confusion(&self, name: &str, art: &BaseArtifacts) -> Result<Vec<ConfusionEntry>> {
        let mut out = vec![ConfusionEntry {
            model: name.into(),
            cohort: "adult".into(),
            matrix: confusion_matrix(&art.adult_test.levels(), &argmax_levels(&self.adult_probs), NUM_LEVELS)?,
        }];
        if !art.pediatric.is_empty() {
            out.push(ConfusionEntry {
                model: name.into(),
                cohort: "pediatric".into(),
                matrix: confusion_matrix(&art.pediatric.levels(), &argmax_levels(&self.pediatric_probs), NUM_LEVELS)?,
            });
        }
        Ok(out)
    }
}

fn meta_probs(meta: &MetaClassifier, set: &ScoredSet) -> Result<Vec<ProbVector>> {
    Ok(set.stacked()?.iter().map(|s| predict_meta(meta, s)).collect())
}

pub fn evaluate_meta(meta: &MetaClassifier, art: &BaseArtifacts) -> Result<MetaEvaluation> {
    let train_probs = meta_probs(meta, &art.meta_train)?;
    let adult_probs = meta_probs(meta, &art.adult_test)?;
    let adult = bundle(&adult_probs, &art.adult_test.levels())?;
    let (pediatric, pediatric_probs) = if art.pediatric.is_empty() {
        (None, Vec::new())
    } else {
        let p = meta_probs(meta, &art.pediatric)?;
        (Some(bundle(&p, &art.pediatric.levels())?), p)
    };
    Ok(MetaEvaluation {
        training_error: mean_multiclass_log_loss(&train_probs, &art.meta_train.levels())?,
        adult_test_error: adult.mean_log_loss.expect("set by bundle"),
        adult,
        pediatric,
        adult_probs,
        pediatric_probs,
    })
}

pub fn artifact_dir(out: &Path) -> PathBuf {
    out.join(ARTIFACT_DIR)
}

fn write_labels(path: &Path, set: &ScoredSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["record_id", "acuity", "age_at_visit"])?;
    for ((id, y), age) in set.ids.iter().zip(&set.labels).zip(&set.ages) {
        w.write_record([id.clone(), y.level().to_string(), age.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn read_labels(path: &Path) -> Result<ScoredSet> {
    let mut set = ScoredSet::default();
    let mut r = csv::Reader::from_path(path).map_err(|e| missing_artifact(path, e))?;
    for rec in r.records() {
        let rec = rec?;
        let bad = || Error::InvalidInput(format!("{}: malformed label row", path.display()));
        if rec.len() != 3 {
            return Err(bad());
        }
        set.ids.push(rec[0].to_string());
        set.labels.push(Acuity::new(rec[1].parse().map_err(|_| bad())?)?);
        set.ages.push(rec[2].parse().map_err(|_| bad())?);
    }
    Ok(set)
}

fn missing_artifact(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!(
        "missing base artifact {} ({e}); run `triage train` first",
        path.display()
    ))
}

fn read_aligned(path: &Path, ids: &[String]) -> Result<Vec<ProbVector>> {
    let file = std::fs::File::open(path).map_err(|e| missing_artifact(path, e))?;
    let rows = read_probs(std::io::BufReader::new(file), path)?;
    if rows.len() != ids.len() {
        return Err(Error::InvalidInput(format!("{}: row count differs from labels", path.display())));
    }
    crate::text::align_probs(rows, ids, path)
}

/// Writes labels, probability-exchange files and the manifest under `dir`.
pub fn save_artifacts(dir: &Path, art: &BaseArtifacts) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, set) in SETS.iter().zip([&art.meta_train, &art.adult_test, &art.pediatric]) {
        write_labels(&dir.join(format!("{name}.labels.csv")), set)?;
        save_probs(&prob_path(dir, &format!("{name}.tabular")), &set.ids, &set.tab)?;
        save_probs(&prob_path(dir, &format!("{name}.text")), &set.ids, &set.text)?;
    }
    let manifest = Manifest {
        seeds: art.seeds,
        adult_rows: art.adult_rows.clone(),
        pediatric_rows: art.pediatric_rows.clone(),
        notices: art.notices.clone(),
        sizes: [art.meta_train.len(), art.adult_test.len(), art.pediatric.len()],
    };
    std::fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

pub fn load_artifacts(dir: &Path) -> Result<BaseArtifacts> {
    let mpath = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&mpath).map_err(|e| missing_artifact(&mpath, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let mut sets = Vec::new();
    for (name, &size) in SETS.iter().zip(&manifest.sizes) {
        let mut set = read_labels(&dir.join(format!("{name}.labels.csv")))?;
        if set.len() != size {
            return Err(Error::InvalidInput(format!("artifact set {name} has {} rows, manifest says {size}", set.len())));
        }
        set.tab = read_aligned(&prob_path(dir, &format!("{name}.tabular")), &set.ids)?;
        set.text = read_aligned(&prob_path(dir, &format!("{name}.text")), &set.ids)?;
        sets.push(set);
    }
    let pediatric = sets.pop().expect("three sets");
    let adult_test = sets.pop().expect("three sets");
    let meta_train = sets.pop().expect("three sets");
    Ok(BaseArtifacts {
        seeds: manifest.seeds,
        meta_train,
        adult_test,
        pediatric,
        adult_rows: manifest.adult_rows,
        pediatric_rows: manifest.pediatric_rows,
        notices: manifest.notices,
    })
}

/// Cached artifacts for `cfg`, refusing ones produced under another master seed.
pub fn load_artifacts_for(cfg: &ExperimentConfig) -> Result<BaseArtifacts> {
    let art = load_artifacts(&artifact_dir(&cfg.out_dir()))?;
    if art.seeds != derive_seeds(cfg) {
        return Err(Error::InvalidInput(format!(
            "cached artifacts were produced with master seed {}; rerun `triage train`",
            art.seeds.master
        )));
    }
    Ok(art)
}

/// Runs the pipeline and stores artifacts and tabular models under the output directory.
pub fn train_and_cache(cfg: &ExperimentConfig) -> Result<BaseArtifacts> {
    let run = run_pipeline(cfg)?;
    let out = cfg.out_dir();
    let dir = artifact_dir(&out);
    save_artifacts(&dir, &run.artifacts).map_err(|e| e.at("artifacts"))?;
    let models = out.join("models");
    std::fs::create_dir_all(&models)?;
    save_model(&models.join("gbdt_class.json"), &run.gbdt_class)?;
    save_model(&models.join("gbdt_regress.json"), &run.gbdt_regress)?;
    Ok(run.artifacts)
}
