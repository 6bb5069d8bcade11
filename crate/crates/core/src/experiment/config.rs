use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::MetaConfig;
use crate::gbdt::GbdtConfig;
use crate::ingest::{PreprocessConfig, SplitRatios};
use crate::synthgen::CohortSpec;
use crate::text::{AttentionConfig, LinearConfig, TfidfConfig};

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "TRIAGE_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "triage-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<CohortSpec>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            csv: None,
            synthetic: Some(CohortSpec::default()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextModelKind {
    Tfidf,
    Attention,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextConfig {
    pub tfidf: TfidfConfig,
    pub linear: LinearConfig,
    /// Train the attention classifier as an extra baseline.
    pub use_attention: bool,
    pub attention: AttentionConfig,
    /// Probability-exchange file with one row per scored record.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub external_probs: Option<PathBuf>,
    /// Which text model feeds the fusion layer.
    pub fusion_model: TextModelKind,
}

impl Default for TextConfig {
    fn default() -> Self {
        TextConfig {
            tfidf: TfidfConfig::default(),
            linear: LinearConfig::default(),
            use_attention: true,
            attention: AttentionConfig::default(),
            external_probs: None,
            fusion_model: TextModelKind::Tfidf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaSource {
    /// Base models fit on the training split score the validation split.
    Validation,
    /// Out-of-fold base predictions over the training split.
    OutOfFold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaSettings {
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub source: MetaSource,
    pub folds: usize,
}

impl Default for MetaSettings {
    fn default() -> Self {
        let m = MetaConfig::default();
        MetaSettings {
            c: m.c,
            max_iter: m.max_iter,
            tol: m.tol,
            source: MetaSource::Validation,
            folds: 5,
        }
    }
}

impl MetaSettings {
    pub fn meta_config(&self) -> MetaConfig {
        MetaConfig {
            c: self.c,
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }
}

/// Inclusive arithmetic grid `min, min + step, ..., max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Grid {
    /// Grid values rounded to 10 decimals so that 0.1 + 0.2 style drift does
    /// not leak into seeds or output.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| round10(self.min + i as f64 * self.step))
            .collect()
    }
}

pub(crate) fn round10(v: f64) -> f64 {
    (v * 1e10).round() / 1e10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DropoutSettings {
    pub symmetric: Vec<f64>,
    pub asymmetric: Grid,
    /// Symmetric rate of the fusion model used for the age-strata ablation.
    pub selected: f64,
}

impl Default for DropoutSettings {
    fn default() -> Self {
        DropoutSettings {
            symmetric: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            asymmetric: Grid {
                min: 0.1,
                max: 0.8,
                step: 0.1,
            },
            selected: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Txt,
    Tex,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Txt => "txt",
            ReportFormat::Tex => "tex",
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<ReportFormat>> {
        s.split(',')
            .map(|f| match f.trim().to_ascii_lowercase().as_str() {
                "csv" => Ok(ReportFormat::Csv),
                "txt" | "text" => Ok(ReportFormat::Txt),
                "tex" | "latex" => Ok(ReportFormat::Tex),
                other => Err(Error::Config(format!("unknown report format `{other}`"))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    pub formats: Vec<ReportFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            formats: vec![ReportFormat::Csv, ReportFormat::Txt],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every component seed is derived from it.
    pub seed: u64,
    pub data: DataConfig,
    pub preprocess: PreprocessConfig,
    pub split: SplitRatios,
    pub gbdt: GbdtConfig,
    pub text: TextConfig,
    pub meta: MetaSettings,
    pub dropout: DropoutSettings,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            data: DataConfig::default(),
            preprocess: PreprocessConfig::default(),
            split: SplitRatios::default(),
            gbdt: GbdtConfig::default(),
            text: TextConfig::default(),
            meta: MetaSettings::default(),
            dropout: DropoutSettings::default(),
            output: OutputConfig::default(),
        }
    }
}

fn check_rate(v: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} {v} outside [0, 1]")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative data paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.data.csv.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.text.external_probs.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data.csv, &self.data.synthetic) {
            (Some(_), Some(_)) => return Err(Error::Config("data: set either `csv` or `synthetic`, not both".into())),
            (None, None) => return Err(Error::Config("data: no source configured".into())),
            (None, Some(spec)) => spec.validate()?,
            _ => {}
        }
        self.preprocess.validate()?;
        self.split.validate()?;
        self.gbdt.validate()?;
        self.text.tfidf.validate()?;
        self.text.linear.validate()?;
        if self.text.use_attention {
            self.text.attention.validate()?;
        }
        match self.text.fusion_model {
            TextModelKind::Attention if !self.text.use_attention => {
                return Err(Error::Config("fusion_model = attention requires the attention model to be enabled".into()))
            }
            TextModelKind::External if self.text.external_probs.is_none() => {
                return Err(Error::Config("fusion_model = external requires text.external_probs".into()))
            }
            _ => {}
        }
        self.meta.meta_config().validate()?;
        if self.meta.source == MetaSource::OutOfFold && self.meta.folds < 2 {
            return Err(Error::Config("out-of-fold meta training needs at least 2 folds".into()));
        }
        for &p in &self.dropout.symmetric {
            check_rate(p, "symmetric dropout rate")?;
        }
        let g = self.dropout.asymmetric;
        if !(g.step > 0.0) || g.min > g.max {
            return Err(Error::Config("asymmetric grid needs step > 0 and min <= max".into()));
        }
        check_rate(g.min, "asymmetric grid min")?;
        check_rate(g.max, "asymmetric grid max")?;
        check_rate(self.dropout.selected, "selected dropout rate")?;
        if self.output.formats.is_empty() {
            return Err(Error::Config("output.formats is empty".into()));
        }
        Ok(())
    }

    /// Output directory: explicit config value, else the environment variable,
    /// else a fixed default.
    pub fn out_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}
