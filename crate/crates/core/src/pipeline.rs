//! End-to-end wiring: load the corpus, reconcile, obtain benchmarks.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use thiserror::Error;

use crate::benchmarks::{BenchmarkError, Benchmarks, RateTable, TopJournalSet};
use crate::corpus::{read_file, Corpus, CorpusError, CorpusPaths, Diagnostic};
use crate::reconcile::{
    compile_rules, reconcile_corpus, AttributionStats, RuleError, RuleSet, UnmatchedReport,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error("slice needs organizations but no rule file was given")]
    RulesRequired,
}

/// Where world benchmarks come from.
#[derive(Debug, Clone, PartialEq)]
pub enum BenchmarkSource {
    /// Compute from a benchmark publication file (sharing the national
    /// journal, organization and field files), or from the national corpus
    /// itself when `None`.
    Compute { world_publications: Option<PathBuf> },
    Import {
        xcr: PathBuf,
        jxcr: PathBuf,
        top_journals: PathBuf,
    },
}

#[derive(Debug, Clone)]
pub struct PipelineInputs {
    pub corpus: CorpusPaths,
    pub rules: Option<PathBuf>,
    pub benchmarks: BenchmarkSource,
    pub census_date: NaiveDate,
    pub top_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub corpus: Corpus,
    pub benchmarks: Benchmarks,
    pub rules: Option<RuleSet>,
    pub unmatched: Option<UnmatchedReport>,
    pub attribution: Option<AttributionStats>,
    pub warnings: Vec<Diagnostic>,
}

pub fn load_rules(path: &Path, corpus: &Corpus) -> Result<RuleSet, PipelineError> {
    Ok(compile_rules(&read_file(path)?, corpus.organizations())?)
}

pub fn load_benchmarks(
    source: &BenchmarkSource,
    national: &Corpus,
    paths: &CorpusPaths,
    census_date: NaiveDate,
    top_fraction: f64,
) -> Result<(Benchmarks, Vec<Diagnostic>), PipelineError> {
    match source {
        BenchmarkSource::Compute {
            world_publications: None,
        } => Ok((Benchmarks::compute(national, top_fraction)?, Vec::new())),
        BenchmarkSource::Compute {
            world_publications: Some(world),
        } => {
            let world_paths = CorpusPaths {
                publications: world.clone(),
                ..paths.clone()
            };
            let ingest = world_paths.load(census_date)?;
            Ok((
                Benchmarks::compute(&ingest.corpus, top_fraction)?,
                ingest.warnings,
            ))
        }
        BenchmarkSource::Import {
            xcr,
            jxcr,
            top_journals,
        } => Ok((
            Benchmarks {
                xcr: RateTable::from_csv(&read_file(xcr)?, "xcr", "field_id", "xcr")?,
                jxcr: RateTable::from_csv(&read_file(jxcr)?, "jxcr", "journal_id", "jxcr")?,
                top: TopJournalSet::from_csv(&read_file(top_journals)?, top_fraction)?,
            },
            Vec::new(),
        )),
    }
}

/// Ingest, then reconcile when a rule file is given, then benchmarks.
pub fn prepare(inputs: &PipelineInputs) -> Result<Prepared, PipelineError> {
    let ingest = inputs.corpus.load(inputs.census_date)?;
    let mut warnings = ingest.warnings;
    let (corpus, rules, unmatched, attribution) = match &inputs.rules {
        None => (ingest.corpus, None, None, None),
        Some(path) => {
            let rules = load_rules(path, &ingest.corpus)?;
            let rec = reconcile_corpus(ingest.corpus, &rules);
            (
                rec.corpus,
                Some(rules),
                Some(rec.unmatched),
                Some(rec.stats),
            )
        }
    };
    let (benchmarks, world_warnings) = load_benchmarks(
        &inputs.benchmarks,
        &corpus,
        &inputs.corpus,
        inputs.census_date,
        inputs.top_fraction,
    )?;
    warnings.extend(world_warnings);
    Ok(Prepared {
        corpus,
        benchmarks,
        rules,
        unmatched,
        attribution,
        warnings,
    })
}
