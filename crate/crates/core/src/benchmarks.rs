//! World benchmark tables: expected citation rate per (year, field), per
//! (year, journal), and the top-decile journal set of each field.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Corpus, FieldScheme, Journal};
use crate::numeric::ceil_fraction;

pub const DEFAULT_TOP_FRACTION: f64 = 0.10;

#[derive(Debug, Error, PartialEq)]
pub enum BenchmarkError {
    #[error("no benchmark data")]
    Empty,
    #[error("top-journal fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("{file} line {line}: {message}")]
    Parse {
        file: &'static str,
        line: usize,
        message: String,
    },
}

/// Mean citation count of one benchmark cell, kept as an exact integer sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub citation_sum: u64,
    pub n: u64,
}

impl Cell {
    pub fn mean(&self) -> f64 {
        self.citation_sum as f64 / self.n as f64
    }

    /// Every publication in the cell is uncited.
    pub fn is_degenerate(&self) -> bool {
        self.citation_sum == 0
    }
}

/// Stored value when a table is imported from CSV: the mean is all we have.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellValue {
    pub mean: f64,
    pub n: u64,
}

impl From<Cell> for CellValue {
    fn from(c: Cell) -> Self {
        Self {
            mean: c.mean(),
            n: c.n,
        }
    }
}

/// Benchmark table keyed by `(year, key)` where key is a field or journal id.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RateTable {
    cells: BTreeMap<(i32, String), CellValue>,
}

pub type XcrTable = RateTable;
pub type JxcrTable = RateTable;

/// Why a lookup could not produce a usable denominator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum LookupFailure {
    Missing { year: i32, key: String },
    Degenerate { year: i32, key: String },
}

impl fmt::Display for LookupFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LookupFailure::Missing { year, key } => write!(f, "missing benchmark ({year}, {key})"),
            LookupFailure::Degenerate { year, key } => {
                write!(
                    f,
                    "degenerate benchmark ({year}, {key}): expected rate is 0"
                )
            }
        }
    }
}

impl std::error::Error for LookupFailure {}

impl RateTable {
    fn from_cells(cells: BTreeMap<(i32, String), Cell>) -> Self {
        Self {
            cells: cells.into_iter().map(|(k, c)| (k, c.into())).collect(),
        }
    }

    pub fn get(&self, year: i32, key: &str) -> Option<CellValue> {
        self.cells.get(&(year, key.to_string())).copied()
    }

    /// Positive expected rate for the cell, or why there is none.
    pub fn rate(&self, year: i32, key: &str) -> Result<f64, LookupFailure> {
        match self.get(year, key) {
            None => Err(LookupFailure::Missing {
                year,
                key: key.to_string(),
            }),
            Some(c) if c.mean <= 0.0 => Err(LookupFailure::Degenerate {
                year,
                key: key.to_string(),
            }),
            Some(c) => Ok(c.mean),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, &str, CellValue)> {
        self.cells.iter().map(|((y, k), c)| (*y, k.as_str(), *c))
    }

    /// Cells whose expected rate is zero.
    pub fn degenerate_cells(&self) -> Vec<(i32, &str)> {
        self.iter()
            .filter(|(_, _, c)| c.mean <= 0.0)
            .map(|(y, k, _)| (y, k))
            .collect()
    }

    /// CSV with header `year,<key_column>,n,<value_column>`; means are written
    /// in shortest round-trip form.
    pub fn to_csv(&self, key_column: &str, value_column: &str) -> String {
        let mut out = format!("year,{key_column},n,{value_column}\n");
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        for (y, k, c) in self.iter() {
            w.write_record([
                y.to_string(),
                k.to_string(),
                c.n.to_string(),
                c.mean.to_string(),
            ])
            .expect("in-memory");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory")).expect("utf8"));
        out
    }

    pub fn from_csv(
        text: &str,
        file: &'static str,
        key_column: &str,
        value_column: &str,
    ) -> Result<Self, BenchmarkError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let perr = |line: usize, message: String| BenchmarkError::Parse {
            file,
            line,
            message,
        };
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| perr(1, e.to_string()))?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        let expected = ["year", key_column, "n", value_column];
        if header != expected {
            return Err(perr(1, format!("expected header '{}'", expected.join(","))));
        }
        let mut cells = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| perr(line, e.to_string()))?;
            let year: i32 = rec[0]
                .trim()
                .parse()
                .map_err(|_| perr(line, "bad year".into()))?;
            let n: u64 = rec[2]
                .trim()
                .parse()
                .map_err(|_| perr(line, "bad n".into()))?;
            let mean: f64 = rec[3]
                .trim()
                .parse()
                .map_err(|_| perr(line, "bad rate".into()))?;
            if n == 0 || !(mean >= 0.0 && mean.is_finite()) {
                return Err(perr(line, "n must be >= 1 and rate non-negative".into()));
            }
            if cells
                .insert((year, rec[1].trim().to_string()), CellValue { mean, n })
                .is_some()
            {
                return Err(perr(line, "duplicate cell".into()));
            }
        }
        Ok(Self { cells })
    }
}

/// Exact per-cell citation sums, the basis of both rate tables.
pub fn xcr_cells(benchmark: &Corpus) -> BTreeMap<(i32, String), Cell> {
    let mut cells: BTreeMap<(i32, String), Cell> = BTreeMap::new();
    for r in benchmark.records() {
        for f in &r.field_ids {
            let c = cells.entry((r.year, f.clone())).or_insert(Cell {
                citation_sum: 0,
                n: 0,
            });
            c.citation_sum += r.citations;
            c.n += 1;
        }
    }
    cells
}

pub fn jxcr_cells(benchmark: &Corpus) -> BTreeMap<(i32, String), Cell> {
    let mut cells: BTreeMap<(i32, String), Cell> = BTreeMap::new();
    for r in benchmark.records() {
        let c = cells.entry((r.year, r.journal_id.clone())).or_insert(Cell {
            citation_sum: 0,
            n: 0,
        });
        c.citation_sum += r.citations;
        c.n += 1;
    }
    cells
}

/// Mean citations of all benchmark publications per (year, field). A
/// multi-field publication counts fully in every one of its fields.
pub fn compute_xcr(benchmark: &Corpus) -> Result<XcrTable, BenchmarkError> {
    if benchmark.records().is_empty() {
        return Err(BenchmarkError::Empty);
    }
    Ok(RateTable::from_cells(xcr_cells(benchmark)))
}

/// Mean citations of all benchmark publications per (year, journal).
pub fn compute_jxcr(benchmark: &Corpus) -> Result<JxcrTable, BenchmarkError> {
    if benchmark.records().is_empty() {
        return Err(BenchmarkError::Empty);
    }
    Ok(RateTable::from_cells(jxcr_cells(benchmark)))
}

/// Journals whose impact factor is in the top `fraction` of each field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopJournalSet {
    fraction: f64,
    by_field: BTreeMap<String, BTreeSet<String>>,
}

impl TopJournalSet {
    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn field(&self, field: &str) -> Option<&BTreeSet<String>> {
        self.by_field.get(field)
    }

    pub fn is_top_in(&self, field: &str, journal: &str) -> bool {
        self.by_field
            .get(field)
            .is_some_and(|s| s.contains(journal))
    }

    /// Top in any of the given fields.
    pub fn is_top_for<S: AsRef<str>>(&self, fields: &[S], journal: &str) -> bool {
        fields.iter().any(|f| self.is_top_in(f.as_ref(), journal))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeSet<String>)> {
        self.by_field.iter().map(|(f, s)| (f.as_str(), s))
    }

    /// CSV `field_id,journal_id`, one pair per line.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(["field_id", "journal_id"])
            .expect("in-memory");
        for (f, js) in &self.by_field {
            for j in js {
                w.write_record([f, j]).expect("in-memory");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory")).expect("utf8")
    }

    /// Imports pairs; the fraction is not recoverable from the file and is
    /// recorded as given by the caller.
    pub fn from_csv(text: &str, fraction: f64) -> Result<Self, BenchmarkError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let perr = |line: usize, message: String| BenchmarkError::Parse {
            file: "top_journals",
            line,
            message,
        };
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| perr(1, e.to_string()))?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        if header != ["field_id", "journal_id"] {
            return Err(perr(1, "expected header 'field_id,journal_id'".into()));
        }
        let mut by_field: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| perr(i + 2, e.to_string()))?;
            by_field
                .entry(rec[0].trim().to_string())
                .or_default()
                .insert(rec[1].trim().to_string());
        }
        Ok(Self { fraction, by_field })
    }
}

/// Per field: sort journals by impact factor descending, take
/// `k = ceil(fraction * n)`, and keep every journal whose impact factor is at
/// least the k-th one.
pub fn classify_top_journals<'a, I>(
    journals: I,
    scheme: &FieldScheme,
    fraction: f64,
) -> Result<TopJournalSet, BenchmarkError>
where
    I: IntoIterator<Item = &'a Journal>,
{
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(BenchmarkError::BadFraction(fraction));
    }
    let mut per_field: BTreeMap<&str, Vec<(f64, &str)>> =
        scheme.fields().map(|f| (f, Vec::new())).collect();
    for j in journals {
        for f in &j.field_ids {
            per_field
                .entry(f.as_str())
                .or_default()
                .push((j.impact_factor, j.id.as_str()));
        }
    }
    let mut by_field = BTreeMap::new();
    for (field, mut list) in per_field {
        list.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        let mut set = BTreeSet::new();
        let k = ceil_fraction(fraction, list.len());
        if k > 0 {
            let boundary = list[k - 1].0;
            set.extend(
                list.iter()
                    .take_while(|(impact, _)| *impact >= boundary)
                    .map(|(_, id)| id.to_string()),
            );
        }
        by_field.insert(field.to_string(), set);
    }
    Ok(TopJournalSet { fraction, by_field })
}

/// Everything indicator computation needs from the benchmark side.
#[derive(Debug, Clone)]
pub struct Benchmarks {
    pub xcr: XcrTable,
    pub jxcr: JxcrTable,
    pub top: TopJournalSet,
}

impl Benchmarks {
    /// Computes all three tables from a benchmark ("world") corpus; top
    /// journals come from that corpus's journal list.
    pub fn compute(benchmark: &Corpus, fraction: f64) -> Result<Self, BenchmarkError> {
        Ok(Self {
            xcr: compute_xcr(benchmark)?,
            jxcr: compute_jxcr(benchmark)?,
            top: classify_top_journals(
                benchmark.journals().values(),
                benchmark.fields(),
                fraction,
            )?,
        })
    }
}
