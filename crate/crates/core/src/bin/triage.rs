use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use triage_fusion::experiment::{
    base_report, derive_seeds, emit_report, full_report, load_artifacts_for, load_records, run_age_strata,
    sweep_report, synthetic_csv, train_and_cache, ExperimentConfig, ExperimentReport, ReportFormat,
};
use triage_fusion::ingest::{split_cohorts, write_records, write_rejects, ADULT_AGE};
use triage_fusion::Error;

#[derive(Parser)]
#[command(name = "triage", about = "Late-fusion triage acuity experiments", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured synthetic cohort as an ingest CSV.
    Synth(Common),
    /// Clean the configured data source and split it into cohorts.
    Preprocess(Common),
    /// Train base models and the fusion model; cache base probabilities.
    Train(Common),
    /// Retrain the fusion layer over the symmetric and asymmetric dropout grids.
    Sweep(Common),
    /// Zero-masked modality ablation by pediatric age bracket.
    Strata(Common),
    /// Every table and figure file, training first if nothing is cached.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config file; built-in defaults when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated report formats: csv, txt, tex.
    #[arg(long)]
    format: Option<String>,
}

impl Common {
    fn load(&self) -> triage_fusion::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = Some(o.clone());
        }
        if let Some(f) = &self.format {
            cfg.output.formats = ReportFormat::parse_list(f)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) => 2,
        Error::Training(_) => 4,
        _ => 3,
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> triage_fusion::Result<()>) -> triage_fusion::Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    std::fs::write(path, buf)?;
    println!("{}", path.display());
    Ok(())
}

fn emit(report: &ExperimentReport, cfg: &ExperimentConfig) -> triage_fusion::Result<()> {
    for n in &report.notices {
        eprintln!("note: {n}");
    }
    for p in emit_report(report, &cfg.out_dir(), &cfg.output.formats)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn run(cmd: &Command) -> triage_fusion::Result<()> {
    match cmd {
        Command::Synth(c) => {
            let cfg = c.load()?;
            let csv = synthetic_csv(&cfg, derive_seeds(&cfg).data)?;
            let out = cfg.out_dir();
            std::fs::create_dir_all(&out)?;
            write_file(&out.join("synthetic.csv"), |b| {
                b.extend_from_slice(&csv);
                Ok(())
            })
        }
        Command::Preprocess(c) => {
            let cfg = c.load()?;
            let clean = load_records(&cfg).map_err(|e| e.at("ingest"))?;
            let out = cfg.out_dir();
            std::fs::create_dir_all(&out)?;
            write_file(&out.join("rejects.csv"), |b| write_rejects(b, &clean.rejects))?;
            let (adults, peds) = split_cohorts(clean.records, ADULT_AGE);
            write_file(&out.join("adult.csv"), |b| write_records(b, &adults))?;
            write_file(&out.join("pediatric.csv"), |b| write_records(b, &peds))
        }
        Command::Train(c) => {
            let cfg = c.load()?;
            let art = train_and_cache(&cfg)?;
            emit(&base_report(&art), &cfg)
        }
        Command::Sweep(c) => {
            let cfg = c.load()?;
            let art = load_artifacts_for(&cfg)?;
            emit(&sweep_report(&art, &cfg)?, &cfg)
        }
        Command::Strata(c) => {
            let cfg = c.load()?;
            let art = load_artifacts_for(&cfg)?;
            if art.pediatric.is_empty() {
                return Err(Error::InvalidInput("no pediatric records to stratify".into()));
            }
            let report = ExperimentReport {
                seeds: Some(art.seeds),
                strata: run_age_strata(&art, &cfg)?,
                ..Default::default()
            };
            emit(&report, &cfg)
        }
        Command::Report(c) => {
            let cfg = c.load()?;
            let art = match load_artifacts_for(&cfg) {
                Ok(a) => a,
                Err(_) => train_and_cache(&cfg)?,
            };
            emit(&full_report(&art, &cfg)?, &cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
