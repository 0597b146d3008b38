//! Domain model and ingest of publication, journal, organization and field
//! files into an immutable [`Corpus`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fraction of one publication credited to an organization.
pub type Weight = Ratio<u64>;

/// Census instant used when no other date is configured: 30 June 2009.
pub fn default_census_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2009, 6, 30).expect("valid date")
}

/// The eight hard-science disciplines used as the default grouping.
pub const HARD_SCIENCES: [&str; 8] = [
    "Mathematics",
    "Physics",
    "Chemistry",
    "Earth and space sciences",
    "Biology",
    "Biomedical research",
    "Clinical medicine",
    "Engineering",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocType {
    Article,
    Proceedings,
    Review,
}

impl DocType {
    pub const ALL: [DocType; 3] = [DocType::Article, DocType::Proceedings, DocType::Review];

    pub fn as_str(self) -> &'static str {
        match self {
            DocType::Article => "article",
            DocType::Proceedings => "proceedings",
            DocType::Review => "review",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "article" => Some(DocType::Article),
            "proceedings" => Some(DocType::Proceedings),
            "review" => Some(DocType::Review),
            _ => None,
        }
    }
}

impl fmt::Display for DocType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OrgType {
    #[serde(rename = "U")]
    University,
    #[serde(rename = "RI")]
    ResearchInstitution,
    #[serde(rename = "H")]
    HospitalHcro,
}

impl OrgType {
    pub const ALL: [OrgType; 3] = [
        OrgType::University,
        OrgType::ResearchInstitution,
        OrgType::HospitalHcro,
    ];

    /// Short code used in `orgs.csv`.
    pub fn code(self) -> &'static str {
        match self {
            OrgType::University => "U",
            OrgType::ResearchInstitution => "RI",
            OrgType::HospitalHcro => "H",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s {
            "U" => Some(OrgType::University),
            "RI" => Some(OrgType::ResearchInstitution),
            "H" => Some(OrgType::HospitalHcro),
            _ => None,
        }
    }
}

impl fmt::Display for OrgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribution {
    pub org_id: String,
    pub subunit_id: Option<String>,
    pub weight: Weight,
}

/// One indexed document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicationRecord {
    pub id: String,
    pub year: i32,
    pub doc_type: DocType,
    pub journal_id: String,
    pub field_ids: Vec<String>,
    /// Citation count at the census date.
    pub citations: u64,
    pub addresses: Vec<String>,
    /// Empty until reconciliation.
    pub attributions: Vec<Attribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Journal {
    pub id: String,
    pub name: String,
    pub impact_factor: f64,
    pub field_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Organization {
    pub id: String,
    pub name: String,
    pub org_type: OrgType,
    pub parent_id: Option<String>,
}

/// Canonical organizations, keyed by id. Sub-units point at a top-level parent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OrganizationRegistry {
    orgs: BTreeMap<String, Organization>,
}

impl OrganizationRegistry {
    /// Builds a registry, rejecting duplicate ids, dangling parents and
    /// hierarchies deeper than institution → institute.
    pub fn new(orgs: Vec<Organization>) -> Result<Self, Vec<Diagnostic>> {
        let mut diags = Vec::new();
        let mut map = BTreeMap::new();
        for org in orgs {
            if map.contains_key(&org.id) {
                diags.push(Diagnostic::error(format!(
                    "duplicate organization id '{}'",
                    org.id
                )));
                continue;
            }
            map.insert(org.id.clone(), org);
        }
        for org in map.values() {
            let Some(parent) = &org.parent_id else {
                continue;
            };
            match map.get(parent) {
                None => diags.push(Diagnostic::error(format!(
                    "organization '{}' references unknown parent '{}'",
                    org.id, parent
                ))),
                Some(p) if p.id == org.id => diags.push(Diagnostic::error(format!(
                    "organization '{}' is its own parent",
                    org.id
                ))),
                Some(p) if p.parent_id.is_some() => diags.push(Diagnostic::error(format!(
                    "organization '{}' nests below sub-unit '{}' (maximum depth is 2)",
                    org.id, p.id
                ))),
                Some(_) => {}
            }
        }
        if diags.is_empty() {
            Ok(Self { orgs: map })
        } else {
            Err(diags)
        }
    }

    pub fn get(&self, id: &str) -> Option<&Organization> {
        self.orgs.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.orgs.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.orgs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orgs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Organization> {
        self.orgs.values()
    }

    /// Type of the organization; sub-units inherit their parent's type.
    pub fn org_type_of(&self, id: &str) -> Option<OrgType> {
        let org = self.orgs.get(id)?;
        match &org.parent_id {
            Some(p) => self.orgs.get(p).map(|p| p.org_type),
            None => Some(org.org_type),
        }
    }
}

/// Maps each subject category to exactly one discipline.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FieldScheme {
    field_to_discipline: BTreeMap<String, String>,
}

impl FieldScheme {
    pub fn new<I, F, D>(pairs: I) -> Result<Self, Vec<Diagnostic>>
    where
        I: IntoIterator<Item = (F, D)>,
        F: Into<String>,
        D: Into<String>,
    {
        let mut map = BTreeMap::new();
        let mut diags = Vec::new();
        for (f, d) in pairs {
            let (f, d) = (f.into(), d.into());
            if f.is_empty() || d.is_empty() {
                diags.push(Diagnostic::error(
                    "empty field or discipline id".to_string(),
                ));
                continue;
            }
            if let Some(prev) = map.get(&f) {
                if prev != &d {
                    diags.push(Diagnostic::error(format!(
                        "field '{f}' mapped to both '{prev}' and '{d}'"
                    )));
                }
                continue;
            }
            map.insert(f, d);
        }
        if diags.is_empty() {
            Ok(Self {
                field_to_discipline: map,
            })
        } else {
            Err(diags)
        }
    }

    pub fn discipline_of(&self, field: &str) -> Option<&str> {
        self.field_to_discipline.get(field).map(String::as_str)
    }

    pub fn contains(&self, field: &str) -> bool {
        self.field_to_discipline.contains_key(field)
    }

    pub fn fields(&self) -> impl Iterator<Item = &str> {
        self.field_to_discipline.keys().map(String::as_str)
    }

    pub fn disciplines(&self) -> BTreeSet<&str> {
        self.field_to_discipline
            .values()
            .map(String::as_str)
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.field_to_discipline
            .iter()
            .map(|(f, d)| (f.as_str(), d.as_str()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Severity {
    Error,
    Warning,
}

/// One validation finding. `line` is 1-based within the file it came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Diagnostic {
    pub file: Option<String>,
    pub line: Option<usize>,
    pub record_id: Option<String>,
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    pub fn error(message: String) -> Self {
        Self {
            file: None,
            line: None,
            record_id: None,
            severity: Severity::Error,
            message,
        }
    }

    pub fn warning(message: String) -> Self {
        Self {
            severity: Severity::Warning,
            ..Self::error(message)
        }
    }

    fn in_file(mut self, file: &str) -> Self {
        self.file = Some(file.to_string());
        self
    }

    fn at_line(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }

    fn for_record(mut self, id: &str) -> Self {
        if !id.is_empty() {
            self.record_id = Some(id.to_string());
        }
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}")?;
        match (&self.file, self.line) {
            (Some(file), Some(line)) => write!(f, " [{file}:{line}]")?,
            (Some(file), None) => write!(f, " [{file}]")?,
            (None, Some(line)) => write!(f, " [line {line}]")?,
            (None, None) => {}
        }
        if let Some(id) = &self.record_id {
            write!(f, " record '{id}'")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{} validation error(s); first: {}", count_errors(.0), first_error(.0))]
    Validation(Vec<Diagnostic>),
}

fn count_errors(d: &[Diagnostic]) -> usize {
    d.iter().filter(|d| d.is_error()).count()
}

fn first_error(d: &[Diagnostic]) -> String {
    d.iter()
        .find(|d| d.is_error())
        .map(ToString::to_string)
        .unwrap_or_default()
}

/// Citation input for one publication: a precomputed census count or dated events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CitationInput {
    Count(u64),
    Events(Vec<NaiveDate>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensusCount {
    pub count: u64,
    pub warnings: Vec<String>,
}

/// Number of citations counted at `census` (inclusive). Events dated before
/// the publication year are kept but reported.
pub fn census_citations(input: &CitationInput, census: NaiveDate, pub_year: i32) -> CensusCount {
    match input {
        CitationInput::Count(n) => CensusCount {
            count: *n,
            warnings: Vec::new(),
        },
        CitationInput::Events(events) => {
            let mut warnings = Vec::new();
            let mut count = 0;
            for ev in events {
                if ev.year() < pub_year {
                    warnings.push(format!(
                        "citation event {ev} precedes publication year {pub_year}"
                    ));
                }
                if *ev <= census {
                    count += 1;
                }
            }
            CensusCount { count, warnings }
        }
    }
}

/// A publication line as it appears in `publications.jsonl`, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub year: i64,
    pub doc_type: String,
    pub journal: String,
    pub fields: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citations: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citation_events: Option<Vec<String>>,
    #[serde(default)]
    pub addresses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Validation {
    pub record: Option<PublicationRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Checks every record-local constraint and reports all violations at once.
pub fn validate_record(raw: &RawRecord, census: NaiveDate) -> Validation {
    let mut diags = Vec::new();
    let mut err = |m: String| diags.push(Diagnostic::error(m).for_record(&raw.id));

    if raw.id.trim().is_empty() {
        err("id must be non-empty".into());
    }
    let year = i32::try_from(raw.year)
        .ok()
        .filter(|y| (1..=9999).contains(y));
    if year.is_none() {
        err(format!("year {} out of range", raw.year));
    }
    let doc_type = DocType::parse(&raw.doc_type);
    if doc_type.is_none() {
        err(format!(
            "unknown doc_type '{}' (expected article, review or proceedings)",
            raw.doc_type
        ));
    }
    if raw.journal.trim().is_empty() {
        err("journal must be non-empty".into());
    }
    if raw.fields.is_empty() {
        err("field list is empty".into());
    }
    let mut seen = BTreeSet::new();
    for f in &raw.fields {
        if f.is_empty() {
            err("empty field id".into());
        } else if !seen.insert(f.as_str()) {
            err(format!("duplicate field '{f}'"));
        }
    }

    let citation_input = match (&raw.citations, &raw.citation_events) {
        (Some(_), Some(_)) => {
            err("give either citations or citation_events, not both".into());
            None
        }
        (None, None) => {
            err("missing citations".into());
            None
        }
        (Some(c), None) if *c < 0 => {
            err("citations must be non-negative".into());
            None
        }
        (Some(c), None) => Some(CitationInput::Count(*c as u64)),
        (None, Some(events)) => {
            let mut dates = Vec::with_capacity(events.len());
            let mut ok = true;
            for e in events {
                match NaiveDate::parse_from_str(e, "%Y-%m-%d") {
                    Ok(d) => dates.push(d),
                    Err(_) => {
                        err(format!("bad citation event date '{e}'"));
                        ok = false;
                    }
                }
            }
            ok.then_some(CitationInput::Events(dates))
        }
    };

    let mut citations = None;
    if let (Some(input), Some(y)) = (&citation_input, year) {
        let census_count = census_citations(input, census, y);
        for w in census_count.warnings {
            diags.push(Diagnostic::warning(w).for_record(&raw.id));
        }
        citations = Some(census_count.count);
    }

    let record = if diags.iter().any(Diagnostic::is_error) {
        None
    } else {
        Some(PublicationRecord {
            id: raw.id.clone(),
            year: year.expect("checked"),
            doc_type: doc_type.expect("checked"),
            journal_id: raw.journal.clone(),
            field_ids: raw.fields.clone(),
            citations: citations.expect("checked"),
            addresses: raw.addresses.clone(),
            attributions: Vec::new(),
        })
    };
    Validation {
        record,
        diagnostics: diags,
    }
}

/// Per-document-type publication counts for one row (a year or a total).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocTypeCounts {
    pub articles: u64,
    pub proceedings: u64,
    pub reviews: u64,
}

impl DocTypeCounts {
    pub fn total(&self) -> u64 {
        self.articles + self.proceedings + self.reviews
    }

    pub fn add(&mut self, doc_type: DocType) {
        match doc_type {
            DocType::Article => self.articles += 1,
            DocType::Proceedings => self.proceedings += 1,
            DocType::Review => self.reviews += 1,
        }
    }

    pub fn get(&self, doc_type: DocType) -> u64 {
        match doc_type {
            DocType::Article => self.articles,
            DocType::Proceedings => self.proceedings,
            DocType::Review => self.reviews,
        }
    }

    /// Percent shares of the total, `None` when the row is empty.
    pub fn shares_pct(&self) -> Option<DocTypeShares> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        let pct = |n: u64| 100.0 * n as f64 / total as f64;
        Some(DocTypeShares {
            articles: pct(self.articles),
            proceedings: pct(self.proceedings),
            reviews: pct(self.reviews),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DocTypeShares {
    pub articles: f64,
    pub proceedings: f64,
    pub reviews: f64,
}

/// Reads a `label,articles,proceedings,reviews` counts table (one row per year
/// or a `Total` row) into ordered rows.
pub fn parse_doc_type_counts(text: &str) -> Result<Vec<(String, DocTypeCounts)>, CorpusError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    expect_header(
        &mut rdr,
        "counts",
        &["label", "articles", "proceedings", "reviews"],
    )?;
    let mut out = Vec::new();
    let mut diags = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                diags.push(
                    Diagnostic::error(e.to_string())
                        .in_file("counts")
                        .at_line(line),
                );
                continue;
            }
        };
        let num = |j: usize| {
            rec.get(j)
                .and_then(|s| s.trim().replace(',', "").parse::<u64>().ok())
        };
        match (num(1), num(2), num(3)) {
            (Some(a), Some(p), Some(r)) => out.push((
                rec.get(0).unwrap_or_default().to_string(),
                DocTypeCounts {
                    articles: a,
                    proceedings: p,
                    reviews: r,
                },
            )),
            _ => diags.push(
                Diagnostic::error("counts must be non-negative integers".into())
                    .in_file("counts")
                    .at_line(line),
            ),
        }
    }
    if diags.is_empty() {
        Ok(out)
    } else {
        Err(CorpusError::Validation(diags))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusSummary {
    pub records: usize,
    pub journals: usize,
    pub organizations: usize,
    pub fields: usize,
    pub by_doc_type: DocTypeCounts,
}

/// Validated, immutable publication corpus. Records are sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    records: Vec<PublicationRecord>,
    journals: BTreeMap<String, Journal>,
    organizations: OrganizationRegistry,
    fields: FieldScheme,
    census_date: NaiveDate,
}

impl Corpus {
    /// Assembles a corpus from already-typed parts, re-checking every reference.
    pub fn from_parts(
        mut records: Vec<PublicationRecord>,
        journals: Vec<Journal>,
        organizations: OrganizationRegistry,
        fields: FieldScheme,
        census_date: NaiveDate,
    ) -> Result<Self, CorpusError> {
        let mut diags = Vec::new();
        let mut jmap = BTreeMap::new();
        for j in journals {
            diags.extend(check_journal(&j, &fields));
            if jmap.contains_key(&j.id) {
                diags.push(Diagnostic::error(format!(
                    "duplicate journal id '{}'",
                    j.id
                )));
                continue;
            }
            jmap.insert(j.id.clone(), j);
        }
        records.par_sort_unstable_by(|a, b| a.id.cmp(&b.id));
        for pair in records.windows(2) {
            if pair[0].id == pair[1].id {
                diags.push(
                    Diagnostic::error("duplicate publication id".into()).for_record(&pair[0].id),
                );
            }
        }
        for r in &records {
            diags.extend(check_references(r, &jmap, &fields, &organizations));
        }
        if diags.iter().any(Diagnostic::is_error) {
            diags.sort();
            return Err(CorpusError::Validation(diags));
        }
        Ok(Self {
            records,
            journals: jmap,
            organizations,
            fields,
            census_date,
        })
    }

    pub fn records(&self) -> &[PublicationRecord] {
        &self.records
    }

    pub fn journals(&self) -> &BTreeMap<String, Journal> {
        &self.journals
    }

    pub fn journal(&self, id: &str) -> Option<&Journal> {
        self.journals.get(id)
    }

    pub fn organizations(&self) -> &OrganizationRegistry {
        &self.organizations
    }

    pub fn fields(&self) -> &FieldScheme {
        &self.fields
    }

    pub fn census_date(&self) -> NaiveDate {
        self.census_date
    }

    pub fn summary(&self) -> CorpusSummary {
        let mut by_doc_type = DocTypeCounts::default();
        for r in &self.records {
            by_doc_type.add(r.doc_type);
        }
        CorpusSummary {
            records: self.records.len(),
            journals: self.journals.len(),
            organizations: self.organizations.len(),
            fields: self.fields.field_to_discipline.len(),
            by_doc_type,
        }
    }

    /// Per-year document-type counts, ascending by year.
    pub fn doc_type_counts_by_year(&self) -> BTreeMap<i32, DocTypeCounts> {
        let mut out: BTreeMap<i32, DocTypeCounts> = BTreeMap::new();
        for r in &self.records {
            out.entry(r.year).or_default().add(r.doc_type);
        }
        out
    }

    /// Replaces every record's attributions; `attributions[i]` belongs to `records()[i]`.
    pub(crate) fn with_attributions(mut self, attributions: Vec<Vec<Attribution>>) -> Self {
        assert_eq!(attributions.len(), self.records.len());
        for (r, a) in self.records.iter_mut().zip(attributions) {
            r.attributions = a;
        }
        self
    }
}

fn check_journal(j: &Journal, fields: &FieldScheme) -> Vec<Diagnostic> {
    let mut d = Vec::new();
    if !(j.impact_factor >= 0.0 && j.impact_factor.is_finite()) {
        d.push(Diagnostic::error(format!(
            "journal '{}' impact factor must be a non-negative number",
            j.id
        )));
    }
    if j.field_ids.is_empty() {
        d.push(Diagnostic::error(format!(
            "journal '{}' has no fields",
            j.id
        )));
    }
    for f in &j.field_ids {
        if !fields.contains(f) {
            d.push(Diagnostic::error(format!(
                "journal '{}' references unknown field '{f}'",
                j.id
            )));
        }
    }
    d
}

fn check_references(
    r: &PublicationRecord,
    journals: &BTreeMap<String, Journal>,
    fields: &FieldScheme,
    orgs: &OrganizationRegistry,
) -> Vec<Diagnostic> {
    let mut d = Vec::new();
    if !journals.contains_key(&r.journal_id) {
        d.push(Diagnostic::error(format!("unknown journal '{}'", r.journal_id)).for_record(&r.id));
    }
    if r.field_ids.is_empty() {
        d.push(Diagnostic::error("field list is empty".into()).for_record(&r.id));
    }
    for f in &r.field_ids {
        if !fields.contains(f) {
            d.push(Diagnostic::error(format!("unknown field '{f}'")).for_record(&r.id));
        }
    }
    for a in &r.attributions {
        if !orgs.contains(&a.org_id) {
            d.push(
                Diagnostic::error(format!("unknown organization '{}'", a.org_id)).for_record(&r.id),
            );
        }
        if let Some(s) = &a.subunit_id {
            if !orgs.contains(s) {
                d.push(Diagnostic::error(format!("unknown organization '{s}'")).for_record(&r.id));
            }
        }
    }
    if !r.attributions.is_empty() {
        let total: Weight = r.attributions.iter().map(|a| a.weight).sum();
        if total != Weight::from_integer(1) {
            d.push(
                Diagnostic::error(format!("attribution weights sum to {total}, not 1"))
                    .for_record(&r.id),
            );
        }
    }
    d
}

/// Text contents of the four corpus input files.
#[derive(Debug, Clone, Copy)]
pub struct CorpusSources<'a> {
    pub publications: &'a str,
    pub journals: &'a str,
    pub orgs: &'a str,
    pub field_scheme: &'a str,
}

/// A parsed corpus together with the non-fatal diagnostics seen on the way.
#[derive(Debug, Clone)]
pub struct Ingest {
    pub corpus: Corpus,
    pub warnings: Vec<Diagnostic>,
}

/// Parses and validates the four input files. All errors across all files are
/// collected before failing.
pub fn parse_corpus(src: CorpusSources<'_>, census: NaiveDate) -> Result<Ingest, CorpusError> {
    let mut diags = Vec::new();

    let fields = match parse_field_scheme(src.field_scheme) {
        Ok(f) => Some(f),
        Err(d) => {
            diags.extend(d);
            None
        }
    };
    let journals = parse_journals(src.journals).unwrap_or_else(|d| {
        diags.extend(d);
        Vec::new()
    });
    let orgs = match parse_orgs(src.orgs) {
        Ok(o) => Some(o),
        Err(d) => {
            diags.extend(d);
            None
        }
    };

    let lines: Vec<(usize, &str)> = src
        .publications
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();
    let validated: Vec<(Option<PublicationRecord>, Vec<Diagnostic>)> = lines
        .par_iter()
        .map(
            |&(line, text)| match serde_json::from_str::<RawRecord>(text) {
                Err(e) => (
                    None,
                    vec![Diagnostic::error(format!("malformed record: {e}"))
                        .in_file("publications")
                        .at_line(line)],
                ),
                Ok(raw) => {
                    let v = validate_record(&raw, census);
                    let d = v
                        .diagnostics
                        .into_iter()
                        .map(|d| d.in_file("publications").at_line(line))
                        .collect();
                    (v.record, d)
                }
            },
        )
        .collect();
    let mut records = Vec::with_capacity(validated.len());
    let mut line_of = BTreeMap::new();
    for ((rec, d), &(line, _)) in validated.into_iter().zip(&lines) {
        diags.extend(d);
        if let Some(r) = rec {
            if let Some(prev) = line_of.insert(r.id.clone(), line) {
                diags.push(
                    Diagnostic::error(format!(
                        "duplicate publication id (first seen at line {prev})"
                    ))
                    .in_file("publications")
                    .at_line(line)
                    .for_record(&r.id),
                );
                continue;
            }
            records.push(r);
        }
    }

    let (Some(fields), Some(orgs)) = (fields, orgs) else {
        diags.sort();
        return Err(CorpusError::Validation(diags));
    };
    if diags.iter().any(Diagnostic::is_error) {
        diags.sort();
        return Err(CorpusError::Validation(diags));
    }
    let (warnings, _): (Vec<_>, Vec<_>) = diags.into_iter().partition(|d| !d.is_error());
    let corpus =
        Corpus::from_parts(records, journals, orgs, fields, census).map_err(|e| match e {
            CorpusError::Validation(d) => CorpusError::Validation(
                d.into_iter()
                    .map(|d| {
                        let line = d.record_id.as_ref().and_then(|id| line_of.get(id)).copied();
                        match line {
                            Some(l) if d.line.is_none() => d.in_file("publications").at_line(l),
                            _ => d,
                        }
                    })
                    .collect(),
            ),
            other => other,
        })?;
    Ok(Ingest { corpus, warnings })
}

/// Paths of the four corpus input files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusPaths {
    pub publications: PathBuf,
    pub journals: PathBuf,
    pub orgs: PathBuf,
    pub field_scheme: PathBuf,
}

impl CorpusPaths {
    /// Standard file names inside one directory.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            publications: dir.join("publications.jsonl"),
            journals: dir.join("journals.csv"),
            orgs: dir.join("orgs.csv"),
            field_scheme: dir.join("fieldscheme.csv"),
        }
    }

    pub fn load(&self, census: NaiveDate) -> Result<Ingest, CorpusError> {
        let pubs = read_file(&self.publications)?;
        let journals = read_file(&self.journals)?;
        let orgs = read_file(&self.orgs)?;
        let fields = read_file(&self.field_scheme)?;
        parse_corpus(
            CorpusSources {
                publications: &pubs,
                journals: &journals,
                orgs: &orgs,
                field_scheme: &fields,
            },
            census,
        )
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn expect_header<R: std::io::Read>(
    rdr: &mut csv::Reader<R>,
    file: &str,
    expected: &[&str],
) -> Result<(), CorpusError> {
    let got: Vec<String> = match rdr.headers() {
        Ok(h) => h.iter().map(|s| s.trim().to_string()).collect(),
        Err(e) => {
            return Err(CorpusError::Validation(vec![Diagnostic::error(
                e.to_string(),
            )
            .in_file(file)
            .at_line(1)]))
        }
    };
    if got != expected {
        return Err(CorpusError::Validation(vec![Diagnostic::error(format!(
            "expected header '{}', found '{}'",
            expected.join(","),
            got.join(",")
        ))
        .in_file(file)
        .at_line(1)]));
    }
    Ok(())
}

fn csv_rows(
    text: &str,
    file: &'static str,
    header: &[&str],
) -> Result<Vec<(usize, csv::StringRecord)>, Vec<Diagnostic>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(false)
        .from_reader(text.as_bytes());
    if let Err(CorpusError::Validation(d)) = expect_header(&mut rdr, file, header) {
        return Err(d);
    }
    let mut rows = Vec::new();
    let mut diags = Vec::new();
    for rec in rdr.records() {
        match rec {
            Ok(r) => {
                let line = r.position().map(|p| p.line() as usize).unwrap_or(0);
                rows.push((line, r));
            }
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                diags.push(
                    Diagnostic::error(format!("malformed row: {e}"))
                        .in_file(file)
                        .at_line(line),
                );
            }
        }
    }
    if diags.is_empty() {
        Ok(rows)
    } else {
        Err(diags)
    }
}

pub fn parse_field_scheme(text: &str) -> Result<FieldScheme, Vec<Diagnostic>> {
    let rows = csv_rows(text, "fieldscheme", &["field_id", "discipline_id"])?;
    FieldScheme::new(
        rows.iter()
            .map(|(_, r)| (r[0].trim().to_string(), r[1].trim().to_string())),
    )
    .map_err(|d| d.into_iter().map(|d| d.in_file("fieldscheme")).collect())
}

pub fn parse_journals(text: &str) -> Result<Vec<Journal>, Vec<Diagnostic>> {
    let rows = csv_rows(
        text,
        "journals",
        &["journal_id", "name", "impact_factor", "fields"],
    )?;
    let mut out = Vec::with_capacity(rows.len());
    let mut diags = Vec::new();
    for (line, r) in rows {
        let id = r[0].trim().to_string();
        let Ok(impact_factor) = r[2].trim().parse::<f64>() else {
            diags.push(
                Diagnostic::error(format!("journal '{id}': bad impact factor '{}'", &r[2]))
                    .in_file("journals")
                    .at_line(line),
            );
            continue;
        };
        let field_ids: Vec<String> = r[3]
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        if id.is_empty() {
            diags.push(
                Diagnostic::error("empty journal id".into())
                    .in_file("journals")
                    .at_line(line),
            );
            continue;
        }
        let j = Journal {
            id,
            name: r[1].to_string(),
            impact_factor,
            field_ids,
        };
        // Field resolution needs the scheme and happens in Corpus::from_parts.
        for d in check_journal(&j, &FieldScheme::default()) {
            if !d.message.contains("unknown field") {
                diags.push(d.in_file("journals").at_line(line));
            }
        }
        out.push(j);
    }
    if diags.is_empty() {
        Ok(out)
    } else {
        Err(diags)
    }
}

pub fn parse_orgs(text: &str) -> Result<OrganizationRegistry, Vec<Diagnostic>> {
    let rows = csv_rows(text, "orgs", &["org_id", "name", "org_type", "parent_id"])?;
    let mut orgs = Vec::with_capacity(rows.len());
    let mut diags = Vec::new();
    for (line, r) in rows {
        let id = r[0].trim().to_string();
        let Some(org_type) = OrgType::from_code(r[2].trim()) else {
            diags.push(
                Diagnostic::error(format!("organization '{id}': unknown org_type '{}'", &r[2]))
                    .in_file("orgs")
                    .at_line(line),
            );
            continue;
        };
        if id.is_empty() {
            diags.push(
                Diagnostic::error("empty org id".into())
                    .in_file("orgs")
                    .at_line(line),
            );
            continue;
        }
        let parent = r[3].trim();
        orgs.push(Organization {
            id,
            name: r[1].to_string(),
            org_type,
            parent_id: (!parent.is_empty()).then(|| parent.to_string()),
        });
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    OrganizationRegistry::new(orgs).map_err(|d| d.into_iter().map(|d| d.in_file("orgs")).collect())
}

#[derive(Serialize)]
struct PublicationLine<'a> {
    id: &'a str,
    year: i32,
    doc_type: DocType,
    journal: &'a str,
    fields: &'a [String],
    citations: u64,
    addresses: &'a [String],
}

/// One JSON object per line, LF-terminated, keys in the documented order.
pub fn write_publications_jsonl(records: &[PublicationRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let line = PublicationLine {
            id: &r.id,
            year: r.year,
            doc_type: r.doc_type,
            journal: &r.journal_id,
            fields: &r.field_ids,
            citations: r.citations,
            addresses: &r.addresses,
        };
        out.push_str(&serde_json::to_string(&line).expect("serializable"));
        out.push('\n');
    }
    out
}

pub fn write_journals_csv<'a>(journals: impl IntoIterator<Item = &'a Journal>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["journal_id", "name", "impact_factor", "fields"])
        .expect("in-memory");
    for j in journals {
        w.write_record([
            j.id.as_str(),
            j.name.as_str(),
            &j.impact_factor.to_string(),
            &j.field_ids.join(";"),
        ])
        .expect("in-memory");
    }
    String::from_utf8(w.into_inner().expect("in-memory")).expect("utf8")
}

pub fn write_orgs_csv(orgs: &OrganizationRegistry) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["org_id", "name", "org_type", "parent_id"])
        .expect("in-memory");
    for o in orgs.iter() {
        w.write_record([
            o.id.as_str(),
            o.name.as_str(),
            o.org_type.code(),
            o.parent_id.as_deref().unwrap_or(""),
        ])
        .expect("in-memory");
    }
    String::from_utf8(w.into_inner().expect("in-memory")).expect("utf8")
}

pub fn write_field_scheme_csv(scheme: &FieldScheme) -> String {
    let mut out = String::from("field_id,discipline_id\n");
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for (f, d) in scheme.iter() {
        w.write_record([f, d]).expect("in-memory");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("in-memory")).expect("utf8"));
    out
}
