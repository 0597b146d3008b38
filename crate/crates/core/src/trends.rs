//! Per-year indicator series and compound average annual increase.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::benchmarks::Benchmarks;
use crate::corpus::Corpus;
use crate::indicators::{
    aggregate, AggregateOptions, IndicatorError, IndicatorRow, SliceDim, SliceSpec,
};

#[derive(Debug, Error, PartialEq)]
pub enum TrendError {
    #[error("undefined growth: series contains a non-positive value")]
    NonPositive,
    #[error("undefined growth: need at least two points")]
    TooShort,
    #[error("unknown metric '{0}'")]
    UnknownMetric(String),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MeanCx,
    TopSharePct,
    MeanCjx,
    Weight,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::MeanCx,
        Metric::TopSharePct,
        Metric::MeanCjx,
        Metric::Weight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::MeanCx => "mean_cx",
            Metric::TopSharePct => "top_share_pct",
            Metric::MeanCjx => "mean_cjx",
            Metric::Weight => "weight",
        }
    }

    pub fn value(self, row: &IndicatorRow) -> Option<f64> {
        match self {
            Metric::MeanCx => Some(row.mean_cx),
            Metric::TopSharePct => Some(row.top_share_pct),
            Metric::MeanCjx => row.mean_cjx,
            Metric::Weight => Some(row.weight),
        }
    }

    fn is_percent(self) -> bool {
        matches!(self, Metric::TopSharePct)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = TrendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| TrendError::UnknownMetric(s.to_string()))
    }
}

/// Compound annual growth in percent: `((last/first)^(1/(T-1)) - 1) * 100`.
pub fn avg_annual_increase(values: &[f64]) -> Result<f64, TrendError> {
    if values.len() < 2 {
        return Err(TrendError::TooShort);
    }
    growth_over(
        values[0],
        values[values.len() - 1],
        (values.len() - 1) as f64,
        values,
    )
}

fn growth_over(first: f64, last: f64, periods: f64, all: &[f64]) -> Result<f64, TrendError> {
    if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(TrendError::NonPositive);
    }
    Ok(((last / first).powf(1.0 / periods) - 1.0) * 100.0)
}

/// Total relative change between the first and last value, in percent.
pub fn total_increase(values: &[f64]) -> Result<f64, TrendError> {
    match values {
        [] | [_] => Err(TrendError::TooShort),
        [first, .., last] if *first > 0.0 => Ok((last / first - 1.0) * 100.0),
        _ => Err(TrendError::NonPositive),
    }
}

/// One entity's indicators by year, ascending.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnualSeries {
    pub key: Vec<String>,
    pub points: Vec<(i32, IndicatorRow)>,
    /// Years missing between the first and last point.
    pub gaps: Vec<i32>,
}

impl AnnualSeries {
    pub fn insufficient_for_growth(&self) -> bool {
        self.points.len() < 2
    }

    pub fn first_year(&self) -> Option<i32> {
        self.points.first().map(|p| p.0)
    }

    pub fn last_year(&self) -> Option<i32> {
        self.points.last().map(|p| p.0)
    }

    pub fn values(&self, metric: Metric) -> Vec<Option<f64>> {
        self.points.iter().map(|(_, r)| metric.value(r)).collect()
    }
}

/// Rows of `slice × year`, regrouped into one series per entity.
pub fn annual_series(
    corpus: &Corpus,
    slice: &SliceSpec,
    benchmarks: &Benchmarks,
    options: AggregateOptions,
) -> Result<Vec<AnnualSeries>, TrendError> {
    let spec = slice.with(SliceDim::Year);
    let year_pos = spec
        .dims()
        .iter()
        .position(|d| *d == SliceDim::Year)
        .expect("year dim");
    let agg = aggregate(corpus, &spec, benchmarks, options)?;
    let mut by_entity: BTreeMap<Vec<String>, Vec<(i32, IndicatorRow)>> = BTreeMap::new();
    for mut row in agg.rows {
        let year: i32 = row.key[year_pos].parse().expect("year key");
        let mut entity = row.key.clone();
        if slice.dims().contains(&SliceDim::Year) {
            // Year is part of the entity itself; every series has one point.
        } else {
            entity.remove(year_pos);
            row.key = entity.clone();
        }
        by_entity.entry(entity).or_default().push((year, row));
    }
    Ok(by_entity
        .into_iter()
        .map(|(key, mut points)| {
            points.sort_by_key(|p| p.0);
            let gaps = match (points.first(), points.last()) {
                (Some(f), Some(l)) => (f.0..=l.0)
                    .filter(|y| !points.iter().any(|p| p.0 == *y))
                    .collect(),
                _ => Vec::new(),
            };
            AnnualSeries { key, points, gaps }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthStat {
    pub key: Vec<String>,
    pub metric: Metric,
    pub first_year: Option<i32>,
    pub last_year: Option<i32>,
    /// `None` when the series is too short or has non-positive values.
    pub avg_annual_increase_pct: Option<f64>,
    pub unstable_base: bool,
    pub insufficient: bool,
}

/// Floor below which a first value is considered an unstable growth base.
#[derive(Debug, Clone, Copy)]
pub struct GrowthOptions {
    pub percent_floor: f64,
    pub ratio_floor: f64,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        Self {
            percent_floor: 1.0,
            ratio_floor: 0.0,
        }
    }
}

/// Growth of `metric` over the series. The exponent is the year span, which
/// equals `T - 1` for a gap-free series.
pub fn growth(series: &AnnualSeries, metric: Metric, options: GrowthOptions) -> GrowthStat {
    let pts: Vec<(i32, Option<f64>)> = series
        .points
        .iter()
        .map(|(y, r)| (*y, metric.value(r)))
        .collect();
    let first = pts.first().copied();
    let last = pts.last().copied();
    let insufficient = pts.len() < 2;
    let values: Option<Vec<f64>> = pts.iter().map(|p| p.1).collect();
    let avg = match (values, first, last) {
        (Some(vals), Some((fy, Some(fv))), Some((ly, Some(lv)))) if !insufficient && ly > fy => {
            growth_over(fv, lv, (ly - fy) as f64, &vals).ok()
        }
        _ => None,
    };
    let floor = if metric.is_percent() {
        options.percent_floor
    } else {
        options.ratio_floor
    };
    let unstable_base = matches!(first, Some((_, Some(v))) if v < floor);
    GrowthStat {
        key: series.key.clone(),
        metric,
        first_year: first.map(|p| p.0),
        last_year: last.map(|p| p.0),
        avg_annual_increase_pct: avg,
        unstable_base,
        insufficient,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_points() {
        assert!((avg_annual_increase(&[1.0, 1.3]).unwrap() - 30.0).abs() < 1e-9);
    }

    #[test]
    fn constant_series() {
        assert_eq!(avg_annual_increase(&[2.5, 2.5, 2.5]).unwrap(), 0.0);
    }

    #[test]
    fn publication_totals_growth() {
        let series = [37_353.0, 38_282.0, 41_869.0, 43_669.0, 45_507.0, 47_164.0];
        let oracle = ((47_164.0f64 / 37_353.0).powf(1.0 / 5.0) - 1.0) * 100.0;
        assert!((avg_annual_increase(&series).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 4.78).abs() < 0.01);
        assert!((total_increase(&series).unwrap() - 26.3).abs() < 0.05);
    }

    #[test]
    fn errors() {
        assert_eq!(avg_annual_increase(&[1.0]), Err(TrendError::TooShort));
        assert_eq!(avg_annual_increase(&[]), Err(TrendError::TooShort));
        assert_eq!(
            avg_annual_increase(&[1.0, 0.0, 2.0]),
            Err(TrendError::NonPositive)
        );
        assert_eq!(
            avg_annual_increase(&[0.0, 2.0]),
            Err(TrendError::NonPositive)
        );
    }

    proptest! {
        #[test]
        fn scale_invariant(vals in prop::collection::vec(0.01f64..100.0, 2..10), k in 0.01f64..100.0) {
            let a = avg_annual_increase(&vals).unwrap();
            let scaled: Vec<f64> = vals.iter().map(|v| v * k).collect();
            let b = avg_annual_increase(&scaled).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }

        #[test]
        fn sign_follows_endpoints(vals in prop::collection::vec(0.01f64..100.0, 2..10)) {
            let g = avg_annual_increase(&vals).unwrap();
            let (f, l) = (vals[0], vals[vals.len() - 1]);
            if l > f { prop_assert!(g > 0.0); }
            if l < f { prop_assert!(g < 0.0); }
        }

        #[test]
        fn segments_compose(a in prop::collection::vec(0.01f64..100.0, 2..6), b in prop::collection::vec(0.01f64..100.0, 1..6)) {
            let whole: Vec<f64> = a.iter().chain(&b).copied().collect();
            let mut second = vec![*a.last().unwrap()];
            second.extend(&b);
            let (n1, n2) = ((a.len() - 1) as f64, (second.len() - 1) as f64);
            let g1 = (1.0 + avg_annual_increase(&a).unwrap() / 100.0).ln();
            let g2 = (1.0 + avg_annual_increase(&second).unwrap() / 100.0).ln();
            let g = (1.0 + avg_annual_increase(&whole).unwrap() / 100.0).ln();
            prop_assert!((g - (n1 * g1 + n2 * g2) / (n1 + n2)).abs() < 1e-9);
        }
    }
}
