//! Seeded synthetic corpora with field-dependent citation behavior.
//!
//! Citation counts are negative binomial (gamma-Poisson mixture) with a
//! per-field mean and dispersion. The random stream is ChaCha8 seeded from the
//! spec, so the same spec always yields the same bytes.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmarks::{Benchmarks, DEFAULT_TOP_FRACTION};
use crate::corpus::{
    self, default_census_date, CorpusError, DocType, FieldScheme, Journal, OrgType, Organization,
    OrganizationRegistry, PublicationRecord,
};
use crate::indicators::{aggregate, AggregateOptions, SliceDim, SliceSpec};
use crate::reconcile::{self, compile_rules, reconcile_corpus};

pub const GENERATOR_NAME: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    Spec(String),
    #[error("cannot read spec {path}: {message}")]
    Read { path: String, message: String },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Rules(#[from] reconcile::RuleError),
    #[error("pipeline failed: {0}")]
    Pipeline(String),
}

/// Negative binomial with mean/dispersion parameterization:
/// variance = mean + mean² / dispersion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegBinomial {
    mean: f64,
    dispersion: f64,
}

impl NegBinomial {
    pub fn new(mean: f64, dispersion: f64) -> Result<Self, SynthError> {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(SynthError::Spec(format!("mean must be > 0, got {mean}")));
        }
        if !(dispersion > 0.0 && dispersion.is_finite()) {
            return Err(SynthError::Spec(format!(
                "dispersion must be > 0, got {dispersion}"
            )));
        }
        Ok(Self { mean, dispersion })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.mean + self.mean * self.mean / self.dispersion
    }
}

impl Distribution<u64> for NegBinomial {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let gamma = Gamma::new(self.dispersion, self.mean / self.dispersion).expect("validated");
        let lambda: f64 = gamma.sample(rng);
        if !(lambda > 0.0) {
            return 0;
        }
        match Poisson::new(lambda) {
            Ok(p) => {
                let draw: f64 = p.sample(rng);
                draw as u64
            }
            Err(_) => 0,
        }
    }
}

fn default_if_sd() -> f64 {
    0.6
}

fn default_size() -> f64 {
    1.0
}

fn default_doc_mix() -> [f64; 3] {
    [0.686, 0.274, 0.040]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldProfile {
    pub id: String,
    pub discipline: String,
    pub mean_citations: f64,
    pub dispersion: f64,
    pub journals: usize,
    /// Impact factors are log-normal with these parameters.
    #[serde(default)]
    pub if_log_mean: f64,
    #[serde(default = "default_if_sd")]
    pub if_log_sd: f64,
    pub annual_volume: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOrg {
    pub id: String,
    /// Appears verbatim in generated addresses and rules; keep names free of
    /// each other as substrings after normalization.
    pub name: String,
    pub org_type: OrgType,
    /// Weight per field id; must sum to 1.
    pub field_mix: BTreeMap<String, f64>,
    #[serde(default = "default_size")]
    pub size: f64,
    #[serde(default)]
    pub subunits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub first_year: i32,
    pub last_year: i32,
    pub fields: Vec<FieldProfile>,
    pub organizations: Vec<SynthOrg>,
    /// Probability that a publication gets a second (independently drawn) organization.
    #[serde(default)]
    pub coauthor_prob: f64,
    /// Probability that a journal is also listed in a second field.
    #[serde(default)]
    pub cross_field_prob: f64,
    /// Probability of an extra address that no rule matches.
    #[serde(default)]
    pub unmatched_address_prob: f64,
    /// Article / proceedings / review proportions.
    #[serde(default = "default_doc_mix")]
    pub doc_type_mix: [f64; 3],
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Spec(m));
        if self.first_year > self.last_year {
            return bad("first_year after last_year".into());
        }
        if self.fields.is_empty() {
            return bad("no fields".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for f in &self.fields {
            NegBinomial::new(f.mean_citations, f.dispersion)?;
            if f.journals == 0 {
                return bad(format!("field {} needs at least one journal", f.id));
            }
            if !(f.if_log_sd >= 0.0) {
                return bad(format!("field {} if_log_sd must be >= 0", f.id));
            }
            if !ids.insert(f.id.as_str()) {
                return bad(format!("duplicate field {}", f.id));
            }
        }
        for o in &self.organizations {
            let sum: f64 = o.field_mix.values().sum();
            if (sum - 1.0).abs() > 1e-9 || o.field_mix.values().any(|w| *w < 0.0) {
                return bad(format!(
                    "organization {} field mix must be non-negative and sum to 1 (got {sum})",
                    o.id
                ));
            }
            if let Some(f) = o.field_mix.keys().find(|f| !ids.contains(f.as_str())) {
                return bad(format!("organization {} mixes unknown field {f}", o.id));
            }
            if !(o.size > 0.0) {
                return bad(format!("organization {} size must be > 0", o.id));
            }
        }
        for (name, p) in [
            ("coauthor_prob", self.coauthor_prob),
            ("cross_field_prob", self.cross_field_prob),
            ("unmatched_address_prob", self.unmatched_address_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.doc_type_mix.iter().any(|w| *w < 0.0)
            || self.doc_type_mix.iter().sum::<f64>() <= 0.0
        {
            return bad("doc_type_mix must be non-negative with positive sum".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let spec: SynthSpec =
            serde_json::from_str(text).map_err(|e| SynthError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// A medium-sized spec over `n_fields` fields in the eight hard-science
    /// disciplines and `n_orgs` organizations of all three types.
    pub fn example(seed: u64, n_fields: usize, n_orgs: usize, annual_volume: usize) -> Self {
        let fields: Vec<FieldProfile> = (0..n_fields)
            .map(|i| FieldProfile {
                id: format!("F{i:02}"),
                discipline: corpus::HARD_SCIENCES[i % corpus::HARD_SCIENCES.len()].to_string(),
                mean_citations: 1.0 + 3.0 * (i % 5) as f64,
                dispersion: 0.8 + 0.4 * (i % 3) as f64,
                journals: 10 + 7 * (i % 4),
                if_log_mean: 0.2 * (i % 4) as f64,
                if_log_sd: 0.6,
                annual_volume,
            })
            .collect();
        let org_types = [
            OrgType::University,
            OrgType::ResearchInstitution,
            OrgType::HospitalHcro,
        ];
        let organizations = (0..n_orgs)
            .map(|k| {
                // Each org leans toward a few fields.
                let mut raw: Vec<f64> = (0..n_fields)
                    .map(|i| 1.0 + ((i * 7 + k * 3) % 5) as f64)
                    .collect();
                let total: f64 = raw.iter().sum();
                raw.iter_mut().for_each(|w| *w /= total);
                let mut mix: BTreeMap<String, f64> =
                    fields.iter().map(|f| f.id.clone()).zip(raw).collect();
                // absorb rounding so the mix sums to exactly 1
                let sum: f64 = mix.values().sum();
                if let Some(last) = mix.values_mut().last() {
                    *last += 1.0 - sum;
                }
                SynthOrg {
                    id: format!("O{k:03}"),
                    name: format!("Organization {k} Campus"),
                    org_type: org_types[k % 3],
                    field_mix: mix,
                    size: 1.0 + (k % 4) as f64,
                    subunits: if k % 3 == 1 { 3 } else { 0 },
                }
            })
            .collect();
        SynthSpec {
            seed,
            first_year: 2001,
            last_year: 2006,
            fields,
            organizations,
            coauthor_prob: 0.25,
            cross_field_prob: 0.15,
            unmatched_address_prob: 0.05,
            doc_type_mix: default_doc_mix(),
        }
    }
}

/// Typed generated data: everything needed to build a corpus and its rules.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub records: Vec<PublicationRecord>,
    pub journals: Vec<Journal>,
    pub organizations: OrganizationRegistry,
    pub field_scheme: FieldScheme,
    pub rules: String,
}

/// Rendered output files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthFiles {
    pub publications: String,
    pub journals: String,
    pub orgs: String,
    pub field_scheme: String,
    pub rules: String,
    pub meta: String,
}

impl SynthFiles {
    pub const NAMES: [&'static str; 6] = [
        "publications.jsonl",
        "journals.csv",
        "orgs.csv",
        "fieldscheme.csv",
        "rules.tsv",
        "synth.meta.json",
    ];

    pub fn write_to(&self, dir: &Path) -> Result<(), SynthError> {
        std::fs::create_dir_all(dir).map_err(|source| SynthError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let contents = [
            &self.publications,
            &self.journals,
            &self.orgs,
            &self.field_scheme,
            &self.rules,
            &self.meta,
        ];
        for (name, body) in Self::NAMES.iter().zip(contents) {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|source| SynthError::Io {
                path: path.display().to_string(),
                source,
            })?;
        }
        Ok(())
    }
}

fn subunit_id(org: &str, k: usize) -> String {
    format!("{org}-S{k:02}")
}

fn subunit_name(org_name: &str, k: usize) -> String {
    format!("{org_name} Institute {k} Unit")
}

fn pick_weighted<R: Rng>(rng: &mut R, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut x = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return Some(i);
        }
        x -= w;
    }
    weights.iter().rposition(|w| *w > 0.0)
}

/// Deterministic generation; single-threaded by design of the random stream.
pub fn generate(spec: &SynthSpec) -> Result<SynthData, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let field_scheme = FieldScheme::new(
        spec.fields
            .iter()
            .map(|f| (f.id.clone(), f.discipline.clone())),
    )
    .map_err(|d| SynthError::Spec(d[0].message.clone()))?;
    let profile: BTreeMap<&str, &FieldProfile> =
        spec.fields.iter().map(|f| (f.id.as_str(), f)).collect();

    let mut journals = Vec::new();
    let mut journals_of_field: Vec<Vec<usize>> = Vec::new();
    for (fi, f) in spec.fields.iter().enumerate() {
        let ln =
            Normal::new(f.if_log_mean, f.if_log_sd).map_err(|e| SynthError::Spec(e.to_string()))?;
        let mut own = Vec::with_capacity(f.journals);
        for j in 0..f.journals {
            let impact: f64 = ln.sample(&mut rng).exp();
            let mut field_ids = vec![f.id.clone()];
            if spec.fields.len() > 1 && rng.random::<f64>() < spec.cross_field_prob {
                let mut other = rng.random_range(0..spec.fields.len() - 1);
                if other >= fi {
                    other += 1;
                }
                field_ids.push(spec.fields[other].id.clone());
            }
            own.push(journals.len());
            journals.push(Journal {
                id: format!("{}-J{j:03}", f.id),
                name: format!("Journal {j} of {}", f.id),
                impact_factor: (impact * 1000.0).round() / 1000.0,
                field_ids,
            });
        }
        journals_of_field.push(own);
    }

    let mut orgs = Vec::new();
    let mut rules = String::from("# generated rules: sub-units precede their parent\n");
    for o in &spec.organizations {
        orgs.push(Organization {
            id: o.id.clone(),
            name: o.name.clone(),
            org_type: o.org_type,
            parent_id: None,
        });
        for k in 1..=o.subunits {
            orgs.push(Organization {
                id: subunit_id(&o.id, k),
                name: subunit_name(&o.name, k),
                org_type: o.org_type,
                parent_id: Some(o.id.clone()),
            });
            rules.push_str(&format!(
                "{}\t{}\t{}\n",
                subunit_name(&o.name, k),
                o.id,
                subunit_id(&o.id, k)
            ));
        }
        rules.push_str(&format!("{}\t{}\n", o.name, o.id));
    }
    let organizations =
        OrganizationRegistry::new(orgs).map_err(|d| SynthError::Spec(d[0].message.clone()))?;

    let mut records = Vec::new();
    let mut counter = 0u64;
    for year in spec.first_year..=spec.last_year {
        for (fi, f) in spec.fields.iter().enumerate() {
            let org_weights: Vec<f64> = spec
                .organizations
                .iter()
                .map(|o| o.size * o.field_mix.get(&f.id).copied().unwrap_or(0.0))
                .collect();
            for _ in 0..f.annual_volume {
                counter += 1;
                let journal = &journals
                    [journals_of_field[fi][rng.random_range(0..journals_of_field[fi].len())]];
                let doc_type =
                    DocType::ALL[pick_weighted(&mut rng, &spec.doc_type_mix).unwrap_or(0)];
                let (mut mu, mut disp) = (0.0, 0.0);
                for fid in &journal.field_ids {
                    mu += profile[fid.as_str()].mean_citations;
                    disp += profile[fid.as_str()].dispersion;
                }
                let n = journal.field_ids.len() as f64;
                let citations = NegBinomial::new(mu / n, disp / n)?.sample(&mut rng);

                let mut addresses = Vec::new();
                let n_orgs = if rng.random::<f64>() < spec.coauthor_prob {
                    2
                } else {
                    1
                };
                for _ in 0..n_orgs {
                    let Some(oi) = pick_weighted(&mut rng, &org_weights) else {
                        break;
                    };
                    let o = &spec.organizations[oi];
                    let dept = rng.random_range(1..=40);
                    if o.subunits > 0 && rng.random::<f64>() < 0.5 {
                        let k = rng.random_range(1..=o.subunits);
                        addresses.push(format!("Lab {dept}, {}, Italy", subunit_name(&o.name, k)));
                    } else {
                        addresses.push(format!(
                            "Dept. {dept} ({}), {}, Italy",
                            f.discipline, o.name
                        ));
                    }
                }
                if rng.random::<f64>() < spec.unmatched_address_prob {
                    addresses.push(format!(
                        "Private Studio {}, Nowhere",
                        rng.random_range(1..=500)
                    ));
                }
                records.push(PublicationRecord {
                    id: format!("P{counter:09}"),
                    year,
                    doc_type,
                    journal_id: journal.id.clone(),
                    field_ids: journal.field_ids.clone(),
                    citations,
                    addresses,
                    attributions: Vec::new(),
                });
            }
        }
    }

    Ok(SynthData {
        records,
        journals,
        organizations,
        field_scheme,
        rules,
    })
}

#[derive(Serialize)]
struct Meta<'a> {
    seed: u64,
    generator: &'a str,
    citation_sampler: &'a str,
    records: usize,
    spec: &'a SynthSpec,
}

/// Generates and renders all output files.
pub fn generate_corpus(spec: &SynthSpec) -> Result<SynthFiles, SynthError> {
    let data = generate(spec)?;
    let meta = Meta {
        seed: spec.seed,
        generator: GENERATOR_NAME,
        citation_sampler:
            "negative binomial as gamma(shape=dispersion, scale=mean/dispersion) then poisson",
        records: data.records.len(),
        spec,
    };
    let mut meta = serde_json::to_string_pretty(&meta).expect("serializable");
    meta.push('\n');
    Ok(SynthFiles {
        publications: corpus::write_publications_jsonl(&data.records),
        journals: corpus::write_journals_csv(&data.journals),
        orgs: corpus::write_orgs_csv(&data.organizations),
        field_scheme: corpus::write_field_scheme_csv(&data.field_scheme),
        rules: data.rules,
        meta,
    })
}

impl SynthData {
    /// Validated in-memory corpus built from the generated parts.
    pub fn corpus(&self) -> Result<corpus::Corpus, CorpusError> {
        corpus::Corpus::from_parts(
            self.records.clone(),
            self.journals.clone(),
            self.organizations.clone(),
            self.field_scheme.clone(),
            default_census_date(),
        )
    }
}

/// Two organizations with identical within-field behavior but different field mixes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionSpec {
    pub seed: u64,
    pub low_mean: f64,
    pub high_mean: f64,
    pub dispersion: f64,
    /// Publications per field per year.
    pub annual_volume: usize,
    /// Share of each organization's output in the high-citation field.
    pub high_share_a: f64,
    pub high_share_b: f64,
    /// Use only the high-citation field (both orgs then have the same mix).
    pub single_field: bool,
    pub first_year: i32,
    pub last_year: i32,
}

impl Default for DistortionSpec {
    fn default() -> Self {
        Self {
            seed: 20_090_630,
            low_mean: 2.0,
            high_mean: 20.0,
            dispersion: 2.0,
            annual_volume: 3000,
            high_share_a: 0.9,
            high_share_b: 0.1,
            single_field: false,
            first_year: 2001,
            last_year: 2006,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// Relative difference below the tie tolerance.
    Tie,
    AFirst,
    BFirst,
}

fn verdict(a: f64, b: f64, tolerance: f64) -> Verdict {
    if (a - b).abs() < tolerance * a.min(b) {
        Verdict::Tie
    } else if a > b {
        Verdict::AFirst
    } else {
        Verdict::BFirst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionOrg {
    pub org_id: String,
    pub weight: f64,
    pub raw_mean_citations: f64,
    pub mean_cx: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionReport {
    pub spec: DistortionSpec,
    pub orgs: [DistortionOrg; 2],
    /// Larger over smaller raw citations per publication.
    pub raw_ratio: f64,
    /// |a - b| / min(a, b) of the standardized means.
    pub standardized_rel_diff: f64,
    pub raw_verdict: Verdict,
    pub standardized_verdict: Verdict,
}

/// Minimum raw separation and maximum standardized disagreement of the demo.
pub const DEMO_MIN_RAW_RATIO: f64 = 2.0;
pub const DEMO_MAX_STANDARDIZED_REL_DIFF: f64 = 0.05;

impl DistortionReport {
    pub fn raw_separates(&self) -> bool {
        self.raw_ratio >= DEMO_MIN_RAW_RATIO
    }

    pub fn standardized_agree(&self) -> bool {
        self.standardized_rel_diff < DEMO_MAX_STANDARDIZED_REL_DIFF
    }

    pub fn rankings_agree(&self) -> bool {
        self.raw_verdict == self.standardized_verdict
    }

    pub fn passed(&self) -> bool {
        self.raw_separates() && self.standardized_agree()
    }

    pub fn to_markdown(&self) -> String {
        let mut s =
            String::from("| org | weight | raw_cites_per_pub | mean_cx |\n|---|---|---|---|\n");
        for o in &self.orgs {
            s.push_str(&format!(
                "| {} | {:.0} | {:.2} | {:.4} |\n",
                o.org_id, o.weight, o.raw_mean_citations, o.mean_cx
            ));
        }
        s.push_str(&format!(
            "\nraw ratio {:.3} (need >= {}) | standardized relative difference {:.4} (need < {}) | {}\n",
            self.raw_ratio,
            DEMO_MIN_RAW_RATIO,
            self.standardized_rel_diff,
            DEMO_MAX_STANDARDIZED_REL_DIFF,
            if self.passed() { "PASS" } else { "FAIL" }
        ));
        s
    }
}

pub fn distortion_spec(d: &DistortionSpec) -> SynthSpec {
    let mut fields = vec![FieldProfile {
        id: "HIGH".into(),
        discipline: "Biomedical research".into(),
        mean_citations: d.high_mean,
        dispersion: d.dispersion,
        journals: 20,
        if_log_mean: 1.0,
        if_log_sd: 0.5,
        annual_volume: d.annual_volume,
    }];
    if !d.single_field {
        fields.push(FieldProfile {
            id: "LOW".into(),
            discipline: "Mathematics".into(),
            mean_citations: d.low_mean,
            dispersion: d.dispersion,
            journals: 20,
            if_log_mean: 0.0,
            if_log_sd: 0.5,
            annual_volume: d.annual_volume,
        });
    }
    let mix = |high: f64| -> BTreeMap<String, f64> {
        if d.single_field {
            BTreeMap::from([("HIGH".to_string(), 1.0)])
        } else {
            BTreeMap::from([("HIGH".to_string(), high), ("LOW".to_string(), 1.0 - high)])
        }
    };
    SynthSpec {
        seed: d.seed,
        first_year: d.first_year,
        last_year: d.last_year,
        fields,
        organizations: vec![
            SynthOrg {
                id: "ORG_A".into(),
                name: "Alpha Life Sciences Campus".into(),
                org_type: OrgType::University,
                field_mix: mix(d.high_share_a),
                size: 1.0,
                subunits: 0,
            },
            SynthOrg {
                id: "ORG_B".into(),
                name: "Beta Polytechnic Campus".into(),
                org_type: OrgType::University,
                field_mix: mix(d.high_share_b),
                size: 1.0,
                subunits: 0,
            },
        ],
        coauthor_prob: 0.0,
        cross_field_prob: 0.0,
        unmatched_address_prob: 0.0,
        doc_type_mix: default_doc_mix(),
    }
}

/// Ranks the two organizations by raw citations per publication and by mean
/// Cites/XCR over a corpus that is its own world benchmark.
pub fn distortion_demo(d: &DistortionSpec) -> Result<DistortionReport, SynthError> {
    let data = generate(&distortion_spec(d))?;
    let corpus = data.corpus()?;
    let rules = compile_rules(&data.rules, corpus.organizations())?;
    let corpus = reconcile_corpus(corpus, &rules).corpus;
    let benchmarks = Benchmarks::compute(&corpus, DEFAULT_TOP_FRACTION)
        .map_err(|e| SynthError::Pipeline(e.to_string()))?;
    let agg = aggregate(
        &corpus,
        &SliceSpec::new(vec![SliceDim::Org]).expect("valid"),
        &benchmarks,
        AggregateOptions::default(),
    )
    .map_err(|e| SynthError::Pipeline(e.to_string()))?;

    let mut raw: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for r in corpus.records() {
        for a in &r.attributions {
            let w = *a.weight.numer() as f64 / *a.weight.denom() as f64;
            let e = raw.entry(a.org_id.as_str()).or_default();
            e.0 += w * r.citations as f64;
            e.1 += w;
        }
    }
    let org = |id: &str| -> Result<DistortionOrg, SynthError> {
        let row = agg
            .rows
            .iter()
            .find(|r| r.key[0] == id)
            .ok_or_else(|| SynthError::Pipeline(format!("{id} has no scored publications")))?;
        let (c, w) = raw[id];
        Ok(DistortionOrg {
            org_id: id.to_string(),
            weight: row.weight,
            raw_mean_citations: c / w,
            mean_cx: row.mean_cx,
        })
    };
    let (a, b) = (org("ORG_A")?, org("ORG_B")?);
    let raw_ratio = a.raw_mean_citations.max(b.raw_mean_citations)
        / a.raw_mean_citations.min(b.raw_mean_citations);
    let standardized_rel_diff = (a.mean_cx - b.mean_cx).abs() / a.mean_cx.min(b.mean_cx);
    let tol = DEMO_MAX_STANDARDIZED_REL_DIFF;
    Ok(DistortionReport {
        spec: d.clone(),
        raw_verdict: verdict(a.raw_mean_citations, b.raw_mean_citations, tol),
        standardized_verdict: verdict(a.mean_cx, b.mean_cx, tol),
        orgs: [a, b],
        raw_ratio,
        standardized_rel_diff,
    })
}
