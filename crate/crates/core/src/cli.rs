//! Command-line entry point. Data goes to files (or stdout with `--stdout`),
//! diagnostics to stderr.
//!
//! Exit codes: 0 success, 1 validation or runtime failure, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::Deserialize;

use crate::benchmarks::{Benchmarks, DEFAULT_TOP_FRACTION};
use crate::corpus::{default_census_date, CorpusError, CorpusPaths};
use crate::indicators::{aggregate, AggregateOptions, SliceSpec};
use crate::pipeline::{self, BenchmarkSource, PipelineError, PipelineInputs, Prepared};
use crate::reporting::{
    self, indicator_table, rank, ranking_table, trend_table, Format, RankMetric, RankingSpec,
    Table, DEFAULT_LIMIT, DEFAULT_MIN_WEIGHT,
};
use crate::synth::{self, DistortionSpec, SynthSpec};
use crate::trends::{annual_series, growth, GrowthOptions, Metric};

pub const OUT_DIR_ENV: &str = "CITIMPACT_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "citimpact",
    version,
    about = "Field-standardized citation impact indicators"
)]
struct Cli {
    /// Cap on worker threads (outputs do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default, Clone)]
struct CorpusArgs {
    #[arg(long)]
    pubs: Option<PathBuf>,
    #[arg(long)]
    journals: Option<PathBuf>,
    #[arg(long)]
    orgs: Option<PathBuf>,
    #[arg(long)]
    fields: Option<PathBuf>,
    /// Citation census date (YYYY-MM-DD), applied to dated citation events.
    #[arg(long)]
    census_date: Option<NaiveDate>,
}

#[derive(Debug, Args, Default, Clone)]
struct BenchArgs {
    /// World publication file used as the benchmark population.
    #[arg(long)]
    benchmark_pubs: Option<PathBuf>,
    /// Import benchmark tables instead of computing them.
    #[arg(long, requires_all = ["jxcr", "top_journals"])]
    xcr: Option<PathBuf>,
    #[arg(long, requires_all = ["xcr", "top_journals"])]
    jxcr: Option<PathBuf>,
    #[arg(long, requires_all = ["xcr", "jxcr"])]
    top_journals: Option<PathBuf>,
    #[arg(long)]
    top_fraction: Option<f64>,
}

#[derive(Debug, Args, Default, Clone)]
struct OutArgs {
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: String,
    /// Write the table to stdout instead of a file.
    #[arg(long)]
    stdout: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate the corpus files.
    Validate {
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Attribute publications to organizations; writes attributions and unmatched addresses.
    Reconcile {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Compute XCR, JXCR and top-journal tables.
    Benchmark {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        top_fraction: Option<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Aggregate indicators over a slice.
    Indicators {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        bench: BenchArgs,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, default_value = "nation")]
        slice: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Threshold-gated ranking of entities.
    Rank {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        bench: BenchArgs,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, default_value = "org")]
        slice: String,
        #[arg(long, default_value = "mean_cx")]
        metric: String,
        #[arg(long)]
        min_weight: Option<f64>,
        #[arg(long)]
        limit: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Average annual increase per entity and metric.
    Trend {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        bench: BenchArgs,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, default_value = "nation")]
        slice: String,
        /// One metric; all four when omitted.
        #[arg(long)]
        metric: Option<String>,
        /// First-value floor below which percent-metric growth is flagged.
        #[arg(long, default_value_t = 1.0)]
        unstable_floor: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Generate a synthetic corpus from a JSON spec.
    Synth {
        #[arg(long, required_unless_present = "print_example")]
        spec: Option<PathBuf>,
        /// Print an example spec to stdout and exit.
        #[arg(long)]
        print_example: bool,
        #[arg(long, env = OUT_DIR_ENV)]
        out_dir: Option<PathBuf>,
    },
    /// Raw vs standardized ranking of two organizations with different field mixes.
    DemoDistortion {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        volume: Option<usize>,
        /// Print the report as JSON instead of Markdown.
        #[arg(long)]
        json: bool,
    },
}

/// Values accepted from `--config`; relative paths resolve against the file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    pubs: Option<PathBuf>,
    journals: Option<PathBuf>,
    orgs: Option<PathBuf>,
    fields: Option<PathBuf>,
    rules: Option<PathBuf>,
    benchmark_pubs: Option<PathBuf>,
    xcr: Option<PathBuf>,
    jxcr: Option<PathBuf>,
    top_journals: Option<PathBuf>,
    top_fraction: Option<f64>,
    min_weight: Option<f64>,
    limit: Option<usize>,
    out_dir: Option<PathBuf>,
    census_date: Option<NaiveDate>,
    threads: Option<usize>,
}

impl RunConfig {
    fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        for p in [
            &mut cfg.pubs,
            &mut cfg.journals,
            &mut cfg.orgs,
            &mut cfg.fields,
            &mut cfg.rules,
            &mut cfg.benchmark_pubs,
            &mut cfg.xcr,
            &mut cfg.jxcr,
            &mut cfg.top_journals,
            &mut cfg.out_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

enum Failure {
    Usage(String),
    Validation(String),
    Runtime(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Corpus(CorpusError::Validation(d)) => {
                let msgs: Vec<String> = d.iter().map(ToString::to_string).collect();
                Failure::Validation(msgs.join("\n"))
            }
            PipelineError::RulesRequired => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

struct Context {
    cfg: RunConfig,
}

impl Context {
    fn need(
        &self,
        flag: Option<&PathBuf>,
        cfg: Option<&PathBuf>,
        name: &str,
    ) -> Result<PathBuf, Failure> {
        flag.or(cfg)
            .cloned()
            .ok_or_else(|| Failure::Usage(format!("missing required --{name} (flag or config)")))
    }

    fn corpus_paths(&self, a: &CorpusArgs) -> Result<CorpusPaths, Failure> {
        Ok(CorpusPaths {
            publications: self.need(a.pubs.as_ref(), self.cfg.pubs.as_ref(), "pubs")?,
            journals: self.need(a.journals.as_ref(), self.cfg.journals.as_ref(), "journals")?,
            orgs: self.need(a.orgs.as_ref(), self.cfg.orgs.as_ref(), "orgs")?,
            field_scheme: self.need(a.fields.as_ref(), self.cfg.fields.as_ref(), "fields")?,
        })
    }

    fn census(&self, a: &CorpusArgs) -> NaiveDate {
        a.census_date
            .or(self.cfg.census_date)
            .unwrap_or_else(default_census_date)
    }

    fn fraction(&self, flag: Option<f64>) -> Result<f64, Failure> {
        let f = flag
            .or(self.cfg.top_fraction)
            .unwrap_or(DEFAULT_TOP_FRACTION);
        if f > 0.0 && f < 1.0 {
            Ok(f)
        } else {
            Err(Failure::Usage(format!(
                "--top-fraction must lie in (0, 1), got {f}"
            )))
        }
    }

    fn rules(&self, flag: Option<&PathBuf>) -> Option<PathBuf> {
        flag.or(self.cfg.rules.as_ref()).cloned()
    }

    fn out_dir(&self, flag: Option<&PathBuf>) -> PathBuf {
        flag.or(self.cfg.out_dir.as_ref())
            .cloned()
            .unwrap_or_else(|| PathBuf::from("."))
    }

    fn bench_source(&self, b: &BenchArgs) -> BenchmarkSource {
        let xcr = b.xcr.as_ref().or(self.cfg.xcr.as_ref());
        let jxcr = b.jxcr.as_ref().or(self.cfg.jxcr.as_ref());
        let top = b.top_journals.as_ref().or(self.cfg.top_journals.as_ref());
        match (xcr, jxcr, top) {
            (Some(x), Some(j), Some(t)) => BenchmarkSource::Import {
                xcr: x.clone(),
                jxcr: j.clone(),
                top_journals: t.clone(),
            },
            _ => BenchmarkSource::Compute {
                world_publications: b
                    .benchmark_pubs
                    .as_ref()
                    .or(self.cfg.benchmark_pubs.as_ref())
                    .cloned(),
            },
        }
    }

    fn prepare(
        &self,
        c: &CorpusArgs,
        b: &BenchArgs,
        rules: Option<&PathBuf>,
        slice: &SliceSpec,
    ) -> Result<Prepared, Failure> {
        let rules = self.rules(rules);
        if slice.is_organizational() && rules.is_none() {
            return Err(PipelineError::RulesRequired.into());
        }
        let inputs = PipelineInputs {
            corpus: self.corpus_paths(c)?,
            rules,
            benchmarks: self.bench_source(b),
            census_date: self.census(c),
            top_fraction: self.fraction(b.top_fraction)?,
        };
        let prepared = pipeline::prepare(&inputs)?;
        report_warnings(&prepared.warnings);
        if let Some(rs) = &prepared.rules {
            for c in rs.conflicts() {
                eprintln!(
                    "warning: rule conflict: line {} '{}' contains line {} '{}' with a different target",
                    c.outer_line, c.outer_pattern, c.inner_line, c.inner_pattern
                );
            }
        }
        Ok(prepared)
    }
}

fn report_warnings(w: &[crate::corpus::Diagnostic]) {
    for d in w {
        eprintln!("{d}");
    }
}

fn write_output(table: &Table, out: &OutArgs, dir: &Path, file_name: &str) -> Result<(), Failure> {
    let format: Format = out.format.parse().map_err(usage)?;
    if out.stdout {
        std::io::stdout()
            .write_all(table.render(format).as_bytes())
            .map_err(runtime)?;
        return Ok(());
    }
    let path = dir.join(format!("{file_name}.{}", format.extension()));
    reporting::emit(table, format, &path).map_err(runtime)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn write_text(dir: &Path, name: &str, body: &str) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(runtime)?;
    let path = dir.join(name);
    std::fs::write(&path, body)
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn stem(slice: &SliceSpec, what: &str, date: NaiveDate) -> String {
    let name = reporting::output_file_name(slice, what, date, Format::Csv);
    name.trim_end_matches(".csv").to_string()
}

fn run(cli: Cli, ctx: &Context) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { corpus } => {
            let paths = ctx.corpus_paths(&corpus)?;
            match paths.load(ctx.census(&corpus)) {
                Ok(ingest) => {
                    report_warnings(&ingest.warnings);
                    let s = ingest.corpus.summary();
                    println!(
                        "{} records, {} diagnostics",
                        s.records,
                        ingest.warnings.len()
                    );
                    println!(
                        "articles {}, proceedings {}, reviews {}; {} journals, {} organizations, {} fields",
                        s.by_doc_type.articles,
                        s.by_doc_type.proceedings,
                        s.by_doc_type.reviews,
                        s.journals,
                        s.organizations,
                        s.fields
                    );
                    Ok(())
                }
                Err(CorpusError::Validation(d)) => {
                    report_warnings(&d);
                    let lines = std::fs::read_to_string(&paths.publications)
                        .map(|t| t.lines().filter(|l| !l.trim().is_empty()).count())
                        .unwrap_or(0);
                    println!("{lines} records, {} diagnostics", d.len());
                    Err(Failure::Validation(String::new()))
                }
                Err(e) => Err(runtime(e)),
            }
        }
        Command::Reconcile { corpus, rules, out } => {
            let paths = ctx.corpus_paths(&corpus)?;
            let rules = ctx.rules(rules.as_ref()).ok_or_else(|| {
                Failure::Usage("missing required --rules (flag or config)".into())
            })?;
            let ingest = paths
                .load(ctx.census(&corpus))
                .map_err(PipelineError::from)?;
            report_warnings(&ingest.warnings);
            let rs = pipeline::load_rules(&rules, &ingest.corpus)?;
            for w in rs.warnings() {
                eprintln!("warning: {w}");
            }
            for c in rs.conflicts() {
                eprintln!(
                    "warning: rule conflict: line {} '{}' contains line {} '{}' with a different target",
                    c.outer_line, c.outer_pattern, c.inner_line, c.inner_pattern
                );
            }
            let rec = crate::reconcile::reconcile_corpus(ingest.corpus, &rs);
            let dir = ctx.out_dir(out.out_dir.as_ref());
            let mut attributions = String::from("publication_id,org_id,subunit_id,weight\n");
            for r in rec.corpus.records() {
                for a in &r.attributions {
                    attributions.push_str(&format!(
                        "{},{},{},{}\n",
                        r.id,
                        a.org_id,
                        a.subunit_id.as_deref().unwrap_or(""),
                        a.weight
                    ));
                }
            }
            write_text(&dir, "attributions.csv", &attributions)?;
            write_text(&dir, "unmatched.csv", &rec.unmatched.to_csv())?;
            println!(
                "{} of {} records matched ({:.2}%), {} of {} addresses matched, {} rules, {} conflicts",
                rec.stats.records_matched,
                rec.stats.records,
                100.0 * rec.stats.record_match_rate(),
                rec.stats.addresses_matched,
                rec.stats.address_instances,
                rs.len(),
                rs.conflicts().len()
            );
            Ok(())
        }
        Command::Benchmark {
            corpus,
            top_fraction,
            out,
        } => {
            let paths = ctx.corpus_paths(&corpus)?;
            let ingest = paths
                .load(ctx.census(&corpus))
                .map_err(PipelineError::from)?;
            report_warnings(&ingest.warnings);
            let b = Benchmarks::compute(&ingest.corpus, ctx.fraction(top_fraction)?)
                .map_err(runtime)?;
            for (y, k) in b.xcr.degenerate_cells() {
                eprintln!("warning: degenerate XCR cell ({y}, {k}): every publication uncited");
            }
            let dir = ctx.out_dir(out.out_dir.as_ref());
            write_text(&dir, "xcr.csv", &b.xcr.to_csv("field_id", "xcr"))?;
            write_text(&dir, "jxcr.csv", &b.jxcr.to_csv("journal_id", "jxcr"))?;
            write_text(&dir, "top_journals.csv", &b.top.to_csv())?;
            println!("{} xcr cells, {} jxcr cells", b.xcr.len(), b.jxcr.len());
            Ok(())
        }
        Command::Indicators {
            corpus,
            bench,
            rules,
            slice,
            out,
        } => {
            let slice: SliceSpec = slice.parse().map_err(usage)?;
            let p = ctx.prepare(&corpus, &bench, rules.as_ref(), &slice)?;
            let agg = aggregate(
                &p.corpus,
                &slice,
                &p.benchmarks,
                AggregateOptions::default(),
            )
            .map_err(runtime)?;
            if agg.exclusions.publications > 0 {
                eprintln!(
                    "warning: {} publications excluded: {:?}",
                    agg.exclusions.publications, agg.exclusions.by_reason
                );
            }
            let dir = ctx.out_dir(out.out_dir.as_ref());
            write_output(
                &indicator_table(&agg),
                &out,
                &dir,
                &stem(&slice, "indicators", p.corpus.census_date()),
            )
        }
        Command::Rank {
            corpus,
            bench,
            rules,
            slice,
            metric,
            min_weight,
            limit,
            out,
        } => {
            let slice: SliceSpec = slice.parse().map_err(usage)?;
            let metric: RankMetric = metric.parse().map_err(usage)?;
            let spec = RankingSpec::new(
                metric,
                min_weight
                    .or(ctx.cfg.min_weight)
                    .unwrap_or(DEFAULT_MIN_WEIGHT),
                limit.or(ctx.cfg.limit).unwrap_or(DEFAULT_LIMIT),
            )
            .map_err(usage)?;
            let p = ctx.prepare(&corpus, &bench, rules.as_ref(), &slice)?;
            let agg = aggregate(
                &p.corpus,
                &slice,
                &p.benchmarks,
                AggregateOptions::default(),
            )
            .map_err(runtime)?;
            let ranked = rank(&agg, spec);
            let dir = ctx.out_dir(out.out_dir.as_ref());
            write_output(
                &ranking_table(&ranked),
                &out,
                &dir,
                &stem(&slice, metric.as_str(), p.corpus.census_date()),
            )
        }
        Command::Trend {
            corpus,
            bench,
            rules,
            slice,
            metric,
            unstable_floor,
            out,
        } => {
            let slice: SliceSpec = slice.parse().map_err(usage)?;
            let metrics: Vec<Metric> = match metric {
                Some(m) => vec![m.parse().map_err(usage)?],
                None => Metric::ALL.to_vec(),
            };
            let p = ctx.prepare(&corpus, &bench, rules.as_ref(), &slice)?;
            let series = annual_series(
                &p.corpus,
                &slice,
                &p.benchmarks,
                AggregateOptions::default(),
            )
            .map_err(runtime)?;
            let options = GrowthOptions {
                percent_floor: unstable_floor,
                ..Default::default()
            };
            let mut stats = Vec::new();
            for s in &series {
                if s.insufficient_for_growth() {
                    eprintln!(
                        "note: {} has a single year, insufficient for growth",
                        s.key.join("|")
                    );
                }
                if !s.gaps.is_empty() {
                    eprintln!("note: {} has gaps in years {:?}", s.key.join("|"), s.gaps);
                }
                stats.extend(metrics.iter().map(|m| growth(s, *m, options)));
            }
            let dir = ctx.out_dir(out.out_dir.as_ref());
            write_output(
                &trend_table(&slice, &stats),
                &out,
                &dir,
                &stem(&slice, "trend", p.corpus.census_date()),
            )
        }
        Command::Synth {
            spec,
            print_example,
            out_dir,
        } => {
            let Some(spec) = spec.filter(|_| !print_example) else {
                let example = SynthSpec::example(1, 8, 6, 1000);
                println!(
                    "{}",
                    serde_json::to_string_pretty(&example).expect("serializable")
                );
                return Ok(());
            };
            let text = std::fs::read_to_string(&spec)
                .map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", spec.display())))?;
            let spec =
                SynthSpec::from_json(&text).map_err(|e| Failure::Validation(e.to_string()))?;
            let files = synth::generate_corpus(&spec).map_err(runtime)?;
            let dir = ctx.out_dir(out_dir.as_ref());
            files.write_to(&dir).map_err(runtime)?;
            println!(
                "{} records written to {}",
                files.publications.lines().count(),
                dir.display()
            );
            Ok(())
        }
        Command::DemoDistortion { seed, volume, json } => {
            let defaults = DistortionSpec::default();
            let spec = DistortionSpec {
                seed: seed.unwrap_or(defaults.seed),
                annual_volume: volume.unwrap_or(defaults.annual_volume),
                ..defaults
            };
            let report = synth::distortion_demo(&spec).map_err(runtime)?;
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("serializable")
                );
            } else {
                print!("{}", report.to_markdown());
            }
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Validation(format!(
                    "distortion demo failed: raw ratio {:.3}, standardized relative difference {:.4}",
                    report.raw_ratio, report.standardized_rel_diff
                )))
            }
        }
    }
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(msg) => {
                eprintln!("error: {msg}");
                return 2;
            }
        },
        None => RunConfig::default(),
    };
    let threads = cli.threads.or(cfg.threads);
    let ctx = Context { cfg };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return 1;
        }
    };
    match pool.install(|| run(cli, &ctx)) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n");
            eprintln!("{}", Cli::command().render_usage());
            2
        }
        Err(Failure::Validation(msg)) => {
            if !msg.is_empty() {
                eprintln!("{msg}");
            }
            1
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}
