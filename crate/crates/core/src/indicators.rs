//! Per-publication standardized impact and its aggregation over slices.
//!
//! A slice is any combination of grouping dimensions. Organizational
//! dimensions (`org_type`, `org`, `subunit`) weight each publication by its
//! fractional attribution; all others give weight 1. A multi-field publication
//! joins every field and discipline it is assigned to. Its Cites/XCR uses the
//! mean XCR of all its fields, except inside field or discipline slices where
//! only the fields belonging to that slice enter the mean.
//!
//! Weights are accumulated as exact integers over a common denominator and
//! ratio sums are compensated and fed in ascending publication-id order, so
//! results do not depend on the thread count.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::benchmarks::{Benchmarks, JxcrTable, LookupFailure, XcrTable};
use crate::corpus::{Corpus, OrgType, PublicationRecord};
use crate::numeric::{ceil_fraction, CompensatedSum};

/// Label used for the single group of a nation-level slice.
pub const NATION_LABEL: &str = "all";

#[derive(Debug, Error, PartialEq)]
pub enum IndicatorError {
    #[error("unknown slice dimension '{0}'")]
    UnknownDimension(String),
    #[error("slice dimension '{0}' given twice")]
    DuplicateDimension(SliceDim),
    #[error("empty slice specification")]
    EmptySlice,
    #[error("discipline '{0}' has zero attributed weight")]
    ZeroDisciplineWeight(String),
    #[error("organization type '{0}' has zero overall weight")]
    ZeroOrgTypeWeight(OrgType),
    #[error("attribution denominators overflow the common weight unit")]
    WeightOverflow,
    #[error("share must be a positive finite percentage, got {0}")]
    BadShare(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceDim {
    Nation,
    Discipline,
    Field,
    OrgType,
    Org,
    Subunit,
    Year,
    DocType,
}

impl SliceDim {
    pub fn as_str(self) -> &'static str {
        match self {
            SliceDim::Nation => "nation",
            SliceDim::Discipline => "discipline",
            SliceDim::Field => "field",
            SliceDim::OrgType => "org_type",
            SliceDim::Org => "org",
            SliceDim::Subunit => "subunit",
            SliceDim::Year => "year",
            SliceDim::DocType => "doc_type",
        }
    }

    pub fn is_organizational(self) -> bool {
        matches!(self, SliceDim::OrgType | SliceDim::Org | SliceDim::Subunit)
    }
}

impl fmt::Display for SliceDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SliceDim {
    type Err = IndicatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim() {
            "nation" => SliceDim::Nation,
            "discipline" => SliceDim::Discipline,
            "field" => SliceDim::Field,
            "org_type" => SliceDim::OrgType,
            "org" => SliceDim::Org,
            "subunit" => SliceDim::Subunit,
            "year" => SliceDim::Year,
            "doc_type" => SliceDim::DocType,
            other => return Err(IndicatorError::UnknownDimension(other.to_string())),
        })
    }
}

/// Ordered list of grouping dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SliceSpec {
    dims: Vec<SliceDim>,
}

impl SliceSpec {
    pub fn new(dims: Vec<SliceDim>) -> Result<Self, IndicatorError> {
        if dims.is_empty() {
            return Err(IndicatorError::EmptySlice);
        }
        let mut seen = BTreeSet::new();
        for d in &dims {
            if !seen.insert(*d) {
                return Err(IndicatorError::DuplicateDimension(*d));
            }
        }
        Ok(Self { dims })
    }

    pub fn nation() -> Self {
        Self {
            dims: vec![SliceDim::Nation],
        }
    }

    pub fn dims(&self) -> &[SliceDim] {
        &self.dims
    }

    pub fn is_organizational(&self) -> bool {
        self.dims.iter().any(|d| d.is_organizational())
    }

    /// Same spec with `dim` appended unless already present.
    pub fn with(&self, dim: SliceDim) -> Self {
        let mut dims = self.dims.clone();
        if !dims.contains(&dim) {
            dims.push(dim);
        }
        Self { dims }
    }

    /// Name used in output file names, e.g. `org_type-discipline`.
    pub fn name(&self) -> String {
        self.dims
            .iter()
            .map(|d| d.as_str())
            .collect::<Vec<_>>()
            .join("-")
    }
}

impl FromStr for SliceSpec {
    type Err = IndicatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let dims = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(dims)
    }
}

/// Standardized scores of one publication at the national level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StandardizedImpact {
    pub publication_id: String,
    pub cites_over_xcr: f64,
    pub cites_over_jxcr: Option<f64>,
    pub is_top_journal: bool,
}

/// Citations over the mean XCR of all the publication's fields.
pub fn standardized_impact(
    record: &PublicationRecord,
    xcr: &XcrTable,
) -> Result<f64, LookupFailure> {
    standardized_impact_over(record, &record.field_ids, xcr)
}

/// Citations over the mean XCR of `fields` (a subset of the record's fields).
pub fn standardized_impact_over<S: AsRef<str>>(
    record: &PublicationRecord,
    fields: &[S],
    xcr: &XcrTable,
) -> Result<f64, LookupFailure> {
    let mut sum = 0.0;
    for f in fields {
        sum += xcr.rate(record.year, f.as_ref())?;
    }
    let mean = sum / fields.len() as f64;
    Ok(record.citations as f64 / mean)
}

/// Citations over the JXCR of the record's (year, journal) cell.
pub fn journal_standardized_impact(
    record: &PublicationRecord,
    jxcr: &JxcrTable,
) -> Result<f64, LookupFailure> {
    Ok(record.citations as f64 / jxcr.rate(record.year, &record.journal_id)?)
}

pub fn score(
    record: &PublicationRecord,
    benchmarks: &Benchmarks,
) -> Result<StandardizedImpact, LookupFailure> {
    Ok(StandardizedImpact {
        publication_id: record.id.clone(),
        cites_over_xcr: standardized_impact(record, &benchmarks.xcr)?,
        cites_over_jxcr: journal_standardized_impact(record, &benchmarks.jxcr).ok(),
        is_top_journal: benchmarks
            .top
            .is_top_for(&record.field_ids, &record.journal_id),
    })
}

/// National-level scores for every record, in corpus order.
pub fn score_corpus(
    corpus: &Corpus,
    benchmarks: &Benchmarks,
) -> Vec<Result<StandardizedImpact, LookupFailure>> {
    corpus
        .records()
        .par_iter()
        .map(|r| score(r, benchmarks))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatorRow {
    pub key: Vec<String>,
    /// Sum of member weights (fractional at organizational slices).
    pub weight: f64,
    /// Distinct scored publications in the group.
    pub n_publications: u64,
    /// Members dropped for a missing or degenerate benchmark.
    pub n_excluded: u64,
    pub mean_cx: f64,
    pub top_share_pct: f64,
    /// Mean Cites/JXCR of top-journal members; absent without any.
    pub mean_cjx: Option<f64>,
    /// Unweighted mean Cites/XCR of the group's top-decile publications.
    pub top_decile_mean_cx: f64,
}

impl IndicatorRow {
    pub fn entity_id(&self) -> String {
        self.key.join("|")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExclusionSummary {
    /// Distinct publications with at least one excluded membership.
    pub publications: u64,
    pub by_reason: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregation {
    pub slice: SliceSpec,
    pub rows: Vec<IndicatorRow>,
    pub exclusions: ExclusionSummary,
}

#[derive(Debug, Clone, Copy)]
pub struct AggregateOptions {
    pub top_decile_fraction: f64,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        Self {
            top_decile_fraction: 0.10,
        }
    }
}

/// Least common multiple of every attribution denominator in the corpus.
pub(crate) fn weight_unit(corpus: &Corpus) -> Result<u128, IndicatorError> {
    let dens: BTreeSet<u64> = corpus
        .records()
        .iter()
        .flat_map(|r| r.attributions.iter().map(|a| *a.weight.denom()))
        .collect();
    let mut l: u128 = 1;
    for d in dens {
        let d = d as u128;
        let g = l.gcd(&d);
        l = (l / g)
            .checked_mul(d)
            .ok_or(IndicatorError::WeightOverflow)?;
    }
    Ok(l)
}

/// Units of the common denominator for one attribution weight.
fn units_of(weight: &crate::corpus::Weight, unit: u128) -> u128 {
    unit / *weight.denom() as u128 * *weight.numer() as u128
}

struct Contribution {
    key: Vec<String>,
    units: u128,
    ratio: Result<f64, LookupFailure>,
}

/// Group memberships of one record with their weight and field restriction.
fn memberships(
    record: &PublicationRecord,
    corpus: &Corpus,
    dims: &[SliceDim],
    unit: u128,
) -> Vec<(Vec<String>, u128, Option<BTreeSet<String>>)> {
    // Organizational dimensions come jointly from the attribution list.
    let org_dims: Vec<(usize, SliceDim)> = dims
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, d)| d.is_organizational())
        .collect();
    let mut org_groups: Vec<(Vec<String>, u128)> = vec![(Vec::new(), unit)];
    if !org_dims.is_empty() {
        let mut acc: BTreeMap<Vec<String>, u128> = BTreeMap::new();
        for a in &record.attributions {
            let mut vals = Vec::with_capacity(org_dims.len());
            for (_, d) in &org_dims {
                let v = match d {
                    SliceDim::Org => Some(a.org_id.clone()),
                    SliceDim::Subunit => a.subunit_id.clone(),
                    SliceDim::OrgType => corpus
                        .organizations()
                        .org_type_of(&a.org_id)
                        .map(|t| t.code().to_string()),
                    _ => unreachable!(),
                };
                match v {
                    Some(v) => vals.push(v),
                    None => break,
                }
            }
            if vals.len() == org_dims.len() {
                *acc.entry(vals).or_default() += units_of(&a.weight, unit);
            }
        }
        org_groups = acc.into_iter().collect();
    }

    // Cartesian product over the remaining dimensions.
    type Partial = (Vec<Option<String>>, Option<BTreeSet<String>>);
    let mut partials: Vec<Partial> = vec![(vec![None; dims.len()], None)];
    for (pos, d) in dims.iter().enumerate() {
        if d.is_organizational() {
            continue;
        }
        let options: Vec<(String, Option<BTreeSet<String>>)> = match d {
            SliceDim::Nation => vec![(NATION_LABEL.to_string(), None)],
            SliceDim::Year => vec![(record.year.to_string(), None)],
            SliceDim::DocType => vec![(record.doc_type.as_str().to_string(), None)],
            SliceDim::Field => record
                .field_ids
                .iter()
                .map(|f| (f.clone(), Some(BTreeSet::from([f.clone()]))))
                .collect(),
            SliceDim::Discipline => {
                let mut by_disc: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
                for f in &record.field_ids {
                    if let Some(disc) = corpus.fields().discipline_of(f) {
                        by_disc.entry(disc).or_default().insert(f.clone());
                    }
                }
                by_disc
                    .into_iter()
                    .map(|(d, fs)| (d.to_string(), Some(fs)))
                    .collect()
            }
            _ => unreachable!(),
        };
        let mut next = Vec::with_capacity(partials.len() * options.len());
        for (vals, restriction) in &partials {
            for (v, r) in &options {
                let combined = match (restriction, r) {
                    (None, r) => r.clone(),
                    (Some(a), None) => Some(a.clone()),
                    (Some(a), Some(b)) => {
                        let i: BTreeSet<String> = a.intersection(b).cloned().collect();
                        if i.is_empty() {
                            continue;
                        }
                        Some(i)
                    }
                };
                let mut vals = vals.clone();
                vals[pos] = Some(v.clone());
                next.push((vals, combined));
            }
        }
        partials = next;
    }

    let mut out = Vec::new();
    for (vals, restriction) in &partials {
        for (org_vals, units) in &org_groups {
            let mut key = Vec::with_capacity(dims.len());
            let mut org_iter = org_vals.iter();
            for v in vals {
                match v {
                    Some(v) => key.push(v.clone()),
                    None => key.push(org_iter.next().expect("org value").clone()),
                }
            }
            out.push((key, *units, restriction.clone()));
        }
    }
    out
}

#[derive(Default)]
struct Accumulator {
    units: u128,
    n: u64,
    n_excluded: u64,
    weighted_ratio: CompensatedSum,
    top_units: u128,
    cjx_units: u128,
    weighted_cjx: CompensatedSum,
    members: Vec<(f64, usize)>,
}

/// Aggregates standardized indicators over the groups of `slice`.
///
/// Empty groups are omitted. Publications without attributions never enter
/// organizational slices.
pub fn aggregate(
    corpus: &Corpus,
    slice: &SliceSpec,
    benchmarks: &Benchmarks,
    options: AggregateOptions,
) -> Result<Aggregation, IndicatorError> {
    let unit = weight_unit(corpus)?;
    let dims = slice.dims();
    let records = corpus.records();

    let per_record: Vec<(Vec<Contribution>, bool, Option<f64>)> = records
        .par_iter()
        .map(|r| {
            let is_top = benchmarks.top.is_top_for(&r.field_ids, &r.journal_id);
            let cjx = if is_top {
                journal_standardized_impact(r, &benchmarks.jxcr).ok()
            } else {
                None
            };
            let contribs = memberships(r, corpus, dims, unit)
                .into_iter()
                .map(|(key, units, restriction)| {
                    let ratio = match &restriction {
                        None => standardized_impact(r, &benchmarks.xcr),
                        Some(fs) => {
                            let fs: Vec<&String> = fs.iter().collect();
                            standardized_impact_over(r, &fs, &benchmarks.xcr)
                        }
                    };
                    Contribution { key, units, ratio }
                })
                .collect();
            (contribs, is_top, cjx)
        })
        .collect();

    let mut groups: BTreeMap<Vec<String>, Accumulator> = BTreeMap::new();
    let mut exclusions = ExclusionSummary::default();
    let w_of = |units: u128| units as f64 / unit as f64;
    for (idx, (contribs, is_top, cjx)) in per_record.into_iter().enumerate() {
        let mut excluded_here = false;
        for c in contribs {
            let acc = groups.entry(c.key).or_default();
            match c.ratio {
                Err(reason) => {
                    acc.n_excluded += 1;
                    excluded_here = true;
                    let reason = match reason {
                        LookupFailure::Missing { .. } => "missing benchmark",
                        LookupFailure::Degenerate { .. } => "degenerate benchmark",
                    };
                    *exclusions.by_reason.entry(reason.to_string()).or_default() += 1;
                }
                Ok(ratio) => {
                    let w = w_of(c.units);
                    acc.units += c.units;
                    acc.n += 1;
                    acc.weighted_ratio.add(w * ratio);
                    if is_top {
                        acc.top_units += c.units;
                        if let Some(cjx) = cjx {
                            acc.cjx_units += c.units;
                            acc.weighted_cjx.add(w * cjx);
                        }
                    }
                    acc.members.push((ratio, idx));
                }
            }
        }
        if excluded_here {
            exclusions.publications += 1;
        }
    }

    let rows = groups
        .into_iter()
        .filter(|(_, a)| a.units > 0)
        .map(|(key, a)| {
            let weight = w_of(a.units);
            let decile: Vec<(&str, f64)> = a
                .members
                .iter()
                .map(|(r, i)| (records[*i].id.as_str(), *r))
                .collect();
            let (_, top_decile_mean_cx) =
                top_decile_publications(&decile, options.top_decile_fraction);
            IndicatorRow {
                key,
                weight,
                n_publications: a.n,
                n_excluded: a.n_excluded,
                mean_cx: a.weighted_ratio.value() / weight,
                top_share_pct: 100.0 * (a.top_units as f64 / a.units as f64),
                mean_cjx: (a.cjx_units > 0).then(|| a.weighted_cjx.value() / w_of(a.cjx_units)),
                top_decile_mean_cx,
            }
        })
        .collect();

    Ok(Aggregation {
        slice: slice.clone(),
        rows,
        exclusions,
    })
}

/// Highest-scoring `ceil(fraction * n)` publications (ties broken by id
/// ascending) and their unweighted mean. Input is `(publication id, Cites/XCR)`.
pub fn top_decile_publications<'a>(
    entries: &[(&'a str, f64)],
    fraction: f64,
) -> (Vec<(&'a str, f64)>, f64) {
    let mut sorted = entries.to_vec();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let k = ceil_fraction(fraction, sorted.len());
    sorted.truncate(k);
    if sorted.is_empty() {
        return (sorted, f64::NAN);
    }
    let mut s = CompensatedSum::new();
    s.extend(sorted.iter().map(|e| e.1));
    let mean = s.value() / sorted.len() as f64;
    (sorted, mean)
}

/// Concentration index from published shares: discipline share over overall share.
pub fn concentration_from_shares(
    discipline_share: f64,
    overall_share: f64,
) -> Result<f64, IndicatorError> {
    if !(discipline_share >= 0.0 && discipline_share.is_finite()) {
        return Err(IndicatorError::BadShare(discipline_share));
    }
    if !(overall_share > 0.0 && overall_share.is_finite()) {
        return Err(IndicatorError::BadShare(overall_share));
    }
    Ok(discipline_share / overall_share)
}

/// Attributed output per organization type, overall and per discipline, in
/// exact weight units. Unattributed publications are left out entirely.
#[derive(Debug, Clone, PartialEq)]
pub struct OrgTypeShares {
    by_discipline: BTreeMap<String, BTreeMap<OrgType, u128>>,
    overall: BTreeMap<OrgType, u128>,
}

impl OrgTypeShares {
    pub fn compute(corpus: &Corpus) -> Result<Self, IndicatorError> {
        let unit = weight_unit(corpus)?;
        let mut by_discipline: BTreeMap<String, BTreeMap<OrgType, u128>> = BTreeMap::new();
        let mut overall: BTreeMap<OrgType, u128> = BTreeMap::new();
        for r in corpus.records() {
            if r.attributions.is_empty() {
                continue;
            }
            let mut per_type: BTreeMap<OrgType, u128> = BTreeMap::new();
            for a in &r.attributions {
                if let Some(t) = corpus.organizations().org_type_of(&a.org_id) {
                    *per_type.entry(t).or_default() += units_of(&a.weight, unit);
                }
            }
            let disciplines: BTreeSet<&str> = r
                .field_ids
                .iter()
                .filter_map(|f| corpus.fields().discipline_of(f))
                .collect();
            for (t, u) in &per_type {
                *overall.entry(*t).or_default() += u;
                for d in &disciplines {
                    *by_discipline
                        .entry(d.to_string())
                        .or_default()
                        .entry(*t)
                        .or_default() += u;
                }
            }
        }
        Ok(Self {
            by_discipline,
            overall,
        })
    }

    pub fn disciplines(&self) -> impl Iterator<Item = &str> {
        self.by_discipline.keys().map(String::as_str)
    }

    fn discipline_total(&self, discipline: &str) -> u128 {
        self.by_discipline
            .get(discipline)
            .map(|m| m.values().sum())
            .unwrap_or(0)
    }

    fn overall_total(&self) -> u128 {
        self.overall.values().sum()
    }

    /// Fraction (0..=1) of the discipline's attributed weight from `org_type`.
    pub fn discipline_share(
        &self,
        org_type: OrgType,
        discipline: &str,
    ) -> Result<f64, IndicatorError> {
        let total = self.discipline_total(discipline);
        if total == 0 {
            return Err(IndicatorError::ZeroDisciplineWeight(discipline.to_string()));
        }
        let part = self
            .by_discipline
            .get(discipline)
            .and_then(|m| m.get(&org_type))
            .copied()
            .unwrap_or(0);
        Ok(part as f64 / total as f64)
    }

    /// Fraction (0..=1) of all attributed weight from `org_type`.
    pub fn overall_share(&self, org_type: OrgType) -> Result<f64, IndicatorError> {
        let total = self.overall_total();
        let part = self.overall.get(&org_type).copied().unwrap_or(0);
        if part == 0 || total == 0 {
            return Err(IndicatorError::ZeroOrgTypeWeight(org_type));
        }
        Ok(part as f64 / total as f64)
    }

    pub fn concentration_index(
        &self,
        org_type: OrgType,
        discipline: &str,
    ) -> Result<f64, IndicatorError> {
        let d = self.discipline_share(org_type, discipline)?;
        let o = self.overall_share(org_type)?;
        Ok(d / o)
    }
}

/// Share of `org_type` within `discipline` divided by its overall share.
pub fn concentration_index(
    corpus: &Corpus,
    org_type: OrgType,
    discipline: &str,
) -> Result<f64, IndicatorError> {
    OrgTypeShares::compute(corpus)?.concentration_index(org_type, discipline)
}
