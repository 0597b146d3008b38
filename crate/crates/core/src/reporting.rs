//! Threshold-gated rankings and deterministic CSV / JSON / Markdown output.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::Serialize;
use serde_json::{Map, Value as Json};
use thiserror::Error;

use crate::indicators::{Aggregation, IndicatorRow, SliceSpec};
use crate::trends::GrowthStat;

pub const DEFAULT_MIN_WEIGHT: f64 = 50.0;
pub const DEFAULT_LIMIT: usize = 10;
/// Decimals for ratio columns in ranked tables.
pub const DISPLAY_DECIMALS: usize = 2;
/// Decimals for the indicator dump.
pub const INDICATOR_DECIMALS: usize = 4;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown ranking metric '{0}'")]
    UnknownMetric(String),
    #[error("unknown output format '{0}' (expected csv, json or markdown)")]
    UnknownFormat(String),
    #[error("min_weight must be >= 0 and limit >= 1")]
    BadSpec,
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMetric {
    MeanCx,
    TopSharePct,
    MeanCjx,
    Weight,
    TopDecileMeanCx,
}

impl RankMetric {
    pub const ALL: [RankMetric; 5] = [
        RankMetric::MeanCx,
        RankMetric::TopSharePct,
        RankMetric::MeanCjx,
        RankMetric::Weight,
        RankMetric::TopDecileMeanCx,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RankMetric::MeanCx => "mean_cx",
            RankMetric::TopSharePct => "top_share_pct",
            RankMetric::MeanCjx => "mean_cjx",
            RankMetric::Weight => "weight",
            RankMetric::TopDecileMeanCx => "top_decile_mean_cx",
        }
    }

    pub fn value(self, row: &IndicatorRow) -> Option<f64> {
        match self {
            RankMetric::MeanCx => Some(row.mean_cx),
            RankMetric::TopSharePct => Some(row.top_share_pct),
            RankMetric::MeanCjx => row.mean_cjx,
            RankMetric::Weight => Some(row.weight),
            RankMetric::TopDecileMeanCx => Some(row.top_decile_mean_cx).filter(|v| v.is_finite()),
        }
    }
}

impl fmt::Display for RankMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RankMetric {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RankMetric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| ReportError::UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankingSpec {
    pub metric: RankMetric,
    pub min_weight: f64,
    pub limit: usize,
}

impl RankingSpec {
    pub fn new(metric: RankMetric, min_weight: f64, limit: usize) -> Result<Self, ReportError> {
        if !(min_weight >= 0.0) || limit == 0 {
            return Err(ReportError::BadSpec);
        }
        Ok(Self {
            metric,
            min_weight,
            limit,
        })
    }
}

impl Default for RankingSpec {
    fn default() -> Self {
        Self {
            metric: RankMetric::MeanCx,
            min_weight: DEFAULT_MIN_WEIGHT,
            limit: DEFAULT_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedTable {
    pub slice: SliceSpec,
    pub spec: RankingSpec,
    pub rows: Vec<IndicatorRow>,
}

/// Filters by `weight >= min_weight`, sorts by the metric descending (ties:
/// weight descending, then entity id ascending) and keeps the first `limit`.
/// Rows without a value for the metric sort after every row that has one.
pub fn rank(aggregation: &Aggregation, spec: RankingSpec) -> RankedTable {
    RankedTable {
        slice: aggregation.slice.clone(),
        spec,
        rows: rank_rows(&aggregation.rows, spec),
    }
}

pub fn rank_rows(rows: &[IndicatorRow], spec: RankingSpec) -> Vec<IndicatorRow> {
    let mut kept: Vec<(Option<f64>, String, &IndicatorRow)> = rows
        .iter()
        .filter(|r| r.weight >= spec.min_weight)
        .map(|r| (spec.metric.value(r), r.entity_id(), r))
        .collect();
    kept.sort_by(|a, b| {
        let by_metric = match (a.0, b.0) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        };
        by_metric
            .then_with(|| b.2.weight.total_cmp(&a.2.weight))
            .then_with(|| a.1.cmp(&b.1))
    });
    kept.into_iter()
        .take(spec.limit)
        .map(|(_, _, r)| r.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Markdown => "md",
        }
    }
}

impl FromStr for Format {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Cell {
    Text(String),
    Int(i64),
    Real(f64),
    Flag(bool),
    Missing,
}

/// A rectangular table with named columns; the unit that gets emitted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Decimals used for `Real` cells in CSV and Markdown.
    pub decimals: usize,
}

fn fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

impl Table {
    fn display(&self, cell: &Cell) -> String {
        match cell {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Real(v) if v.is_finite() => fixed(*v, self.decimals),
            Cell::Real(_) | Cell::Missing => String::new(),
            Cell::Flag(b) => if *b { "1" } else { "0" }.to_string(),
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
            Format::Markdown => self.to_markdown(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory");
        for row in &self.rows {
            w.write_record(row.iter().map(|c| self.display(c)))
                .expect("in-memory");
        }
        String::from_utf8(w.into_inner().expect("in-memory")).expect("utf8")
    }

    /// Array of objects, keys in column order, reals at full precision.
    pub fn to_json(&self) -> String {
        let rows: Vec<Json> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (name, cell) in self.columns.iter().zip(row) {
                    let v = match cell {
                        Cell::Text(s) => Json::String(s.clone()),
                        Cell::Int(i) => Json::from(*i),
                        Cell::Real(v) => serde_json::Number::from_f64(*v)
                            .map(Json::Number)
                            .unwrap_or(Json::Null),
                        Cell::Flag(b) => Json::Bool(*b),
                        Cell::Missing => Json::Null,
                    };
                    obj.insert(name.clone(), v);
                }
                Json::Object(obj)
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&rows).expect("serializable");
        s.push('\n');
        s
    }

    pub fn to_markdown(&self) -> String {
        let escape = |s: String| s.replace('|', "\\|");
        let mut out = String::new();
        out.push_str(&format!(
            "| {} |\n",
            self.columns
                .iter()
                .cloned()
                .map(escape)
                .collect::<Vec<_>>()
                .join(" | ")
        ));
        out.push_str(&format!("|{}\n", "---|".repeat(self.columns.len())));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| escape(self.display(c))).collect();
            out.push_str(&format!("| {} |\n", cells.join(" | ")));
        }
        out
    }
}

fn opt(v: Option<f64>) -> Cell {
    v.map(Cell::Real).unwrap_or(Cell::Missing)
}

fn key_columns(slice: &SliceSpec) -> Vec<String> {
    slice
        .dims()
        .iter()
        .map(|d| d.as_str().to_string())
        .collect()
}

/// `slice_keys…,weight,n_excluded,mean_cx,top_share_pct,mean_cjx`.
pub fn indicator_table(agg: &Aggregation) -> Table {
    let mut columns = key_columns(&agg.slice);
    columns.extend(
        [
            "weight",
            "n_excluded",
            "mean_cx",
            "top_share_pct",
            "mean_cjx",
        ]
        .map(String::from),
    );
    let rows = agg
        .rows
        .iter()
        .map(|r| {
            let mut cells: Vec<Cell> = r.key.iter().cloned().map(Cell::Text).collect();
            cells.extend([
                Cell::Real(r.weight),
                Cell::Int(r.n_excluded as i64),
                Cell::Real(r.mean_cx),
                Cell::Real(r.top_share_pct),
                opt(r.mean_cjx),
            ]);
            cells
        })
        .collect();
    Table {
        columns,
        rows,
        decimals: INDICATOR_DECIMALS,
    }
}

/// `rank,slice_keys…,weight,mean_cx,top_share_pct,mean_cjx`, plus
/// `top_decile_mean_cx` when that is the ranking metric.
pub fn ranking_table(ranked: &RankedTable) -> Table {
    let with_decile = ranked.spec.metric == RankMetric::TopDecileMeanCx;
    let mut columns = vec!["rank".to_string()];
    columns.extend(key_columns(&ranked.slice));
    columns.extend(["weight", "mean_cx", "top_share_pct", "mean_cjx"].map(String::from));
    if with_decile {
        columns.push("top_decile_mean_cx".into());
    }
    let rows = ranked
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut cells = vec![Cell::Int(i as i64 + 1)];
            cells.extend(r.key.iter().cloned().map(Cell::Text));
            cells.extend([
                Cell::Real(r.weight),
                Cell::Real(r.mean_cx),
                Cell::Real(r.top_share_pct),
                opt(r.mean_cjx),
            ]);
            if with_decile {
                cells.push(Cell::Real(r.top_decile_mean_cx));
            }
            cells
        })
        .collect();
    Table {
        columns,
        rows,
        decimals: DISPLAY_DECIMALS,
    }
}

/// `slice_keys…,metric,first_year,last_year,avg_annual_increase_pct,unstable_base_flag`.
pub fn trend_table(slice: &SliceSpec, stats: &[GrowthStat]) -> Table {
    let mut columns = key_columns(slice);
    columns.retain(|c| c != "year");
    columns.extend(
        [
            "metric",
            "first_year",
            "last_year",
            "avg_annual_increase_pct",
            "unstable_base_flag",
        ]
        .map(String::from),
    );
    let rows = stats
        .iter()
        .map(|g| {
            let mut cells: Vec<Cell> = g.key.iter().cloned().map(Cell::Text).collect();
            let year = |y: Option<i32>| y.map(|y| Cell::Int(y as i64)).unwrap_or(Cell::Missing);
            cells.extend([
                Cell::Text(g.metric.as_str().to_string()),
                year(g.first_year),
                year(g.last_year),
                opt(g.avg_annual_increase_pct),
                Cell::Flag(g.unstable_base),
            ]);
            cells
        })
        .collect();
    Table {
        columns,
        rows,
        decimals: DISPLAY_DECIMALS,
    }
}

/// `{slice}_{metric}_{date}.{ext}`.
pub fn output_file_name(
    slice: &SliceSpec,
    metric: &str,
    date: NaiveDate,
    format: Format,
) -> String {
    format!(
        "{}_{}_{}.{}",
        slice.name(),
        metric,
        date.format("%Y-%m-%d"),
        format.extension()
    )
}

/// Writes the rendered table; identical inputs give identical bytes.
pub fn emit(table: &Table, format: Format, destination: &Path) -> Result<(), ReportError> {
    if let Some(parent) = destination.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| ReportError::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    std::fs::write(destination, table.render(format)).map_err(|source| ReportError::Io {
        path: destination.display().to_string(),
        source,
    })
}
