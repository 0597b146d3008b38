use std::collections::BTreeMap;

use num_rational::Ratio;
use proptest::prelude::*;

use citimpact::benchmarks::{Benchmarks, DEFAULT_TOP_FRACTION};
use citimpact::corpus::{
    default_census_date, DocType, Journal, OrgType, Organization, OrganizationRegistry,
};
use citimpact::corpus::{Corpus, FieldScheme, PublicationRecord};
use citimpact::indicators::{aggregate, AggregateOptions, OrgTypeShares, SliceSpec};
use citimpact::reconcile::{compile_rules, reconcile_corpus};
use citimpact::reporting::{rank, RankMetric, RankingSpec};
use citimpact::synth::{self, SynthSpec};

const FIELDS: [(&str, &str); 4] = [
    ("F1", "Physics"),
    ("F2", "Physics"),
    ("F3", "Chemistry"),
    ("F4", "Mathematics"),
];
const ORG_NAMES: [(&str, &str, OrgType); 4] = [
    ("A", "alpha univ", OrgType::University),
    ("B", "beta inst", OrgType::ResearchInstitution),
    ("C", "gamma hosp", OrgType::HospitalHcro),
    ("D", "delta univ", OrgType::University),
];

#[derive(Debug, Clone)]
struct Pub {
    year: i32,
    fields: Vec<usize>,
    journal: usize,
    citations: u64,
    orgs: Vec<usize>,
}

fn arb_pub() -> impl Strategy<Value = Pub> {
    (
        2001..2004i32,
        prop::collection::btree_set(0..FIELDS.len(), 1..3),
        0..6usize,
        0..40u64,
        prop::collection::vec(0..ORG_NAMES.len(), 0..4),
    )
        .prop_map(|(year, fields, journal, citations, orgs)| Pub {
            year,
            fields: fields.into_iter().collect(),
            journal,
            citations,
            orgs,
        })
}

fn build(pubs: &[Pub]) -> Corpus {
    let scheme = FieldScheme::new(FIELDS).unwrap();
    let journals: Vec<Journal> = (0..6)
        .map(|j| Journal {
            id: format!("J{j}"),
            name: String::new(),
            impact_factor: 1.0 + (j % 4) as f64,
            field_ids: FIELDS.iter().map(|f| f.0.to_string()).collect(),
        })
        .collect();
    let registry = OrganizationRegistry::new(
        ORG_NAMES
            .iter()
            .map(|(id, name, t)| Organization {
                id: id.to_string(),
                name: name.to_string(),
                org_type: *t,
                parent_id: None,
            })
            .collect(),
    )
    .unwrap();
    let records = pubs
        .iter()
        .enumerate()
        .map(|(i, p)| PublicationRecord {
            id: format!("P{i:04}"),
            year: p.year,
            doc_type: DocType::Article,
            journal_id: format!("J{}", p.journal),
            field_ids: p.fields.iter().map(|f| FIELDS[*f].0.to_string()).collect(),
            citations: p.citations,
            addresses: p
                .orgs
                .iter()
                .map(|o| format!("Dept X, {}, Town", ORG_NAMES[*o].1))
                .collect(),
            attributions: Vec::new(),
        })
        .collect();
    let corpus =
        Corpus::from_parts(records, journals, registry, scheme, default_census_date()).unwrap();
    let rules_text: String = ORG_NAMES
        .iter()
        .map(|(id, name, _)| format!("{name}\t{id}\n"))
        .collect();
    let rules = compile_rules(&rules_text, corpus.organizations()).unwrap();
    reconcile_corpus(corpus, &rules).corpus
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attributed_weights_sum_to_one(pubs in prop::collection::vec(arb_pub(), 1..60)) {
        let corpus = build(&pubs);
        for (r, p) in corpus.records().iter().zip(&pubs) {
            let sum: Ratio<u64> = r.attributions.iter().map(|a| a.weight).sum();
            if p.orgs.is_empty() {
                prop_assert!(r.attributions.is_empty());
            } else {
                prop_assert_eq!(sum, Ratio::from_integer(1));
                let distinct: std::collections::BTreeSet<_> = p.orgs.iter().collect();
                prop_assert_eq!(r.attributions.len(), distinct.len());
            }
        }
    }

    #[test]
    fn field_cells_close_and_org_weights_add_up(pubs in prop::collection::vec(arb_pub(), 1..80)) {
        prop_assume!(pubs.iter().any(|p| p.citations > 0));
        let corpus = build(&pubs);
        let b = Benchmarks::compute(&corpus, DEFAULT_TOP_FRACTION).unwrap();
        let agg = aggregate(&corpus, &"field,year".parse().unwrap(), &b, AggregateOptions::default()).unwrap();
        for row in &agg.rows {
            prop_assert!((row.mean_cx - 1.0).abs() < 1e-9, "{:?}", row);
        }
        // Organization weights add up to the number of attributed publications.
        let attributed = pubs.iter().filter(|p| !p.orgs.is_empty()).count() as f64;
        let by_org = aggregate(&corpus, &"org".parse().unwrap(), &b, AggregateOptions::default()).unwrap();
        let excluded: u64 = by_org.rows.iter().map(|r| r.n_excluded).sum();
        if excluded == 0 {
            let total: f64 = by_org.rows.iter().map(|r| r.weight).sum();
            prop_assert!((total - attributed).abs() < 1e-9);
        }
    }

    #[test]
    fn concentration_closes_per_discipline(pubs in prop::collection::vec(arb_pub(), 1..80)) {
        prop_assume!(pubs.iter().any(|p| !p.orgs.is_empty()));
        let corpus = build(&pubs);
        let shares = OrgTypeShares::compute(&corpus).unwrap();
        for d in shares.disciplines() {
            let total: f64 = OrgType::ALL
                .iter()
                .filter_map(|t| Some(shares.overall_share(*t).ok()? * shares.concentration_index(*t, d).ok()?))
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn higher_threshold_never_adds_entities(pubs in prop::collection::vec(arb_pub(), 1..80), t1 in 0.0f64..20.0, dt in 0.0f64..20.0) {
        prop_assume!(pubs.iter().any(|p| p.citations > 0));
        let corpus = build(&pubs);
        let b = Benchmarks::compute(&corpus, DEFAULT_TOP_FRACTION).unwrap();
        let agg = aggregate(&corpus, &"org".parse().unwrap(), &b, AggregateOptions::default()).unwrap();
        let ids = |t: f64| -> Vec<String> {
            let mut v: Vec<String> = rank(&agg, RankingSpec::new(RankMetric::MeanCx, t, usize::MAX).unwrap())
                .rows
                .iter()
                .map(|r| r.entity_id())
                .collect();
            v.sort();
            v
        };
        let (low, high) = (ids(t1), ids(t1 + dt));
        prop_assert!(high.iter().all(|h| low.contains(h)));
    }
}

#[test]
fn aggregation_is_thread_invariant() {
    let spec = SynthSpec::example(9, 8, 12, 400);
    let data = synth::generate(&spec).unwrap();
    let corpus = data.corpus().unwrap();
    let rules = compile_rules(&data.rules, corpus.organizations()).unwrap();
    let corpus = reconcile_corpus(corpus, &rules).corpus;
    let b = Benchmarks::compute(&corpus, DEFAULT_TOP_FRACTION).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let mut out = BTreeMap::new();
            for s in [
                "org",
                "subunit",
                "org_type,discipline,year",
                "field",
                "nation,doc_type",
            ] {
                let slice: SliceSpec = s.parse().unwrap();
                let agg = aggregate(&corpus, &slice, &b, AggregateOptions::default()).unwrap();
                out.insert(s, serde_json::to_string(&agg.rows).unwrap());
            }
            out
        })
    };
    assert_eq!(run(1), run(5));
}
