//! Affiliation reconciliation: normalize raw address strings and attribute
//! publications to canonical organizations through an ordered rule list.
//!
//! Matching is plain substring search on normalized text and the first rule
//! in file order wins. All patterns are compiled into one Aho-Corasick
//! automaton; the smallest matching rule index is the winner.

use std::collections::{BTreeMap, BTreeSet};

use aho_corasick::{AhoCorasick, AhoCorasickBuilder, MatchKind};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{Attribution, Corpus, OrganizationRegistry, Weight};

/// Lowercases, strips diacritics, turns every non-alphanumeric character into
/// a space and collapses whitespace.
pub fn normalize_address(raw: &str) -> String {
    let mut current = normalize_once(raw);
    // Compatibility decompositions can surface uppercase letters (e.g. U+210C),
    // so iterate to the fixed point.
    for _ in 0..4 {
        let next = normalize_once(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn normalize_once(raw: &str) -> String {
    let folded: String = raw
        .nfkd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .collect::<String>()
        .nfkd()
        .filter(|c| !is_combining_mark(*c))
        .collect();
    let mut out = String::with_capacity(folded.len());
    let mut pending_space = false;
    for c in folded.chars() {
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else {
            pending_space = true;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rule {
    pub pattern: String,
    pub org_id: String,
    pub subunit_id: Option<String>,
    pub source_line: usize,
}

impl Rule {
    pub fn target(&self) -> Target {
        Target {
            org_id: self.org_id.clone(),
            subunit_id: self.subunit_id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Target {
    pub org_id: String,
    pub subunit_id: Option<String>,
}

/// Two rules where one pattern contains the other but the targets differ.
/// `outer` is the longer (containing) pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleConflict {
    pub outer_line: usize,
    pub inner_line: usize,
    pub outer_pattern: String,
    pub inner_pattern: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleError {
    #[error("rule file line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("cannot build matcher: {0}")]
    Automaton(String),
}

/// Compiled, ordered rule list. Read-only once built.
#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<Rule>,
    conflicts: Vec<RuleConflict>,
    warnings: Vec<String>,
    automaton: AhoCorasick,
}

impl RuleSet {
    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn conflicts(&self) -> &[RuleConflict] {
        &self.conflicts
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// Parses a tab-separated rule file (`PATTERN<TAB>ORG_ID[<TAB>SUBUNIT_ID]`)
/// and validates every target against the registry.
pub fn compile_rules(text: &str, registry: &OrganizationRegistry) -> Result<RuleSet, RuleError> {
    let mut rules: Vec<Rule> = Vec::new();
    let mut warnings = Vec::new();
    let mut seen: BTreeMap<(String, Target), usize> = BTreeMap::new();

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let invalid = |message: String| RuleError::Invalid {
            line: line_no,
            message,
        };
        let cols: Vec<&str> = trimmed.split('\t').collect();
        if cols.len() < 2 || cols.len() > 3 {
            return Err(invalid(format!(
                "expected PATTERN<TAB>ORG_ID[<TAB>SUBUNIT_ID], found {} column(s)",
                cols.len()
            )));
        }
        let pattern = normalize_address(cols[0]);
        if pattern.is_empty() {
            return Err(invalid("pattern is empty after normalization".into()));
        }
        let org_id = cols[1].trim().to_string();
        let Some(org) = registry.get(&org_id) else {
            return Err(invalid(format!("unknown organization '{org_id}'")));
        };
        if org.parent_id.is_some() {
            return Err(invalid(format!(
                "'{org_id}' is a sub-unit; give its parent as ORG_ID and it as SUBUNIT_ID"
            )));
        }
        let subunit_id = match cols.get(2).map(|s| s.trim()).filter(|s| !s.is_empty()) {
            None => None,
            Some(s) => match registry.get(s) {
                None => return Err(invalid(format!("unknown sub-unit '{s}'"))),
                Some(sub) if sub.parent_id.as_deref() != Some(org_id.as_str()) => {
                    return Err(invalid(format!(
                        "sub-unit '{s}' does not belong to '{org_id}'"
                    )))
                }
                Some(_) => Some(s.to_string()),
            },
        };
        let rule = Rule {
            pattern,
            org_id,
            subunit_id,
            source_line: line_no,
        };
        let key = (rule.pattern.clone(), rule.target());
        if let Some(first) = seen.get(&key) {
            warnings.push(format!(
                "line {line_no}: duplicate of rule at line {first} ('{}'), dropped",
                rule.pattern
            ));
            continue;
        }
        seen.insert(key, line_no);
        rules.push(rule);
    }

    let automaton = build_automaton(&rules)?;
    let conflicts = find_conflicts(&rules, &automaton);
    Ok(RuleSet {
        rules,
        conflicts,
        warnings,
        automaton,
    })
}

fn build_automaton(rules: &[Rule]) -> Result<AhoCorasick, RuleError> {
    AhoCorasickBuilder::new()
        .match_kind(MatchKind::Standard)
        .build(rules.iter().map(|r| r.pattern.as_str()))
        .map_err(|e| RuleError::Automaton(e.to_string()))
}

fn find_conflicts(rules: &[Rule], automaton: &AhoCorasick) -> Vec<RuleConflict> {
    let mut pairs = BTreeSet::new();
    for (outer_idx, outer) in rules.iter().enumerate() {
        for m in automaton.find_overlapping_iter(&outer.pattern) {
            let inner_idx = m.pattern().as_usize();
            if inner_idx == outer_idx {
                continue;
            }
            let inner = &rules[inner_idx];
            if inner.target() == outer.target() {
                continue;
            }
            // A subunit pattern naming its own parent is hierarchy, not a clash:
            // the bare org match is dropped whenever a subunit of it matches.
            if inner.org_id == outer.org_id
                && inner.subunit_id.is_none()
                && outer.subunit_id.is_some()
            {
                continue;
            }
            // Identical patterns contain each other; report that pair once.
            if inner.pattern == outer.pattern && inner_idx < outer_idx {
                continue;
            }
            pairs.insert((outer_idx, inner_idx));
        }
    }
    pairs
        .into_iter()
        .map(|(o, i)| RuleConflict {
            outer_line: rules[o].source_line,
            inner_line: rules[i].source_line,
            outer_pattern: rules[o].pattern.clone(),
            inner_pattern: rules[i].pattern.clone(),
        })
        .collect()
}

/// First rule (file order) whose pattern occurs in `normalized`.
pub fn match_address<'r>(normalized: &str, rules: &'r RuleSet) -> Option<&'r Rule> {
    rules
        .automaton
        .find_overlapping_iter(normalized)
        .map(|m| m.pattern().as_usize())
        .min()
        .map(|i| &rules.rules[i])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnmatchedAddress {
    pub address: String,
    pub count: u64,
    /// Up to three smallest publication ids carrying this address.
    pub sample_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct UnmatchedReport {
    pub entries: Vec<UnmatchedAddress>,
}

impl UnmatchedReport {
    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }

    /// CSV `address,count,sample_ids`, most frequent first.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(["address", "count", "sample_ids"])
            .expect("in-memory");
        for e in &self.entries {
            w.write_record([
                e.address.as_str(),
                &e.count.to_string(),
                &e.sample_ids.join(";"),
            ])
            .expect("in-memory");
        }
        String::from_utf8(w.into_inner().expect("in-memory")).expect("utf8")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct AttributionStats {
    pub records: usize,
    pub records_matched: usize,
    pub address_instances: u64,
    pub addresses_matched: u64,
}

impl AttributionStats {
    /// Share of records with at least one matched address.
    pub fn record_match_rate(&self) -> f64 {
        if self.records == 0 {
            0.0
        } else {
            self.records_matched as f64 / self.records as f64
        }
    }

    pub fn address_match_rate(&self) -> f64 {
        if self.address_instances == 0 {
            0.0
        } else {
            self.addresses_matched as f64 / self.address_instances as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct Reconciled {
    pub corpus: Corpus,
    pub unmatched: UnmatchedReport,
    pub stats: AttributionStats,
}

/// Fractional attribution of one record from its matched targets.
///
/// Each distinct organization gets `1/m`. An organization matched through
/// several distinct sub-units splits its share equally among them; a bare
/// organization match is dropped when a sub-unit of that organization also
/// matched.
pub fn attribute(targets: &[Target]) -> Vec<Attribution> {
    let mut by_org: BTreeMap<&str, BTreeSet<Option<&str>>> = BTreeMap::new();
    for t in targets {
        by_org
            .entry(t.org_id.as_str())
            .or_default()
            .insert(t.subunit_id.as_deref());
    }
    let m = by_org.len() as u64;
    let mut out = Vec::new();
    for (org, mut subs) in by_org {
        if subs.len() > 1 {
            subs.remove(&None);
        }
        let k = subs.len() as u64;
        for sub in subs {
            out.push(Attribution {
                org_id: org.to_string(),
                subunit_id: sub.map(String::from),
                weight: Weight::new(1, m * k),
            });
        }
    }
    out
}

/// Attributes every record of the corpus. Records without any match keep
/// empty attributions.
pub fn reconcile_corpus(corpus: Corpus, rules: &RuleSet) -> Reconciled {
    let per_record: Vec<(Vec<Attribution>, Vec<Option<String>>)> = corpus
        .records()
        .par_iter()
        .map(|r| {
            let mut targets = Vec::new();
            let mut misses = Vec::new();
            for a in &r.addresses {
                let norm = normalize_address(a);
                match match_address(&norm, rules) {
                    Some(rule) => {
                        targets.push(rule.target());
                        misses.push(None);
                    }
                    None => misses.push(Some(norm)),
                }
            }
            (attribute(&targets), misses)
        })
        .collect();

    let mut stats = AttributionStats {
        records: corpus.records().len(),
        ..Default::default()
    };
    let mut unmatched: BTreeMap<String, (u64, BTreeSet<&str>)> = BTreeMap::new();
    for (record, (attr, misses)) in corpus.records().iter().zip(&per_record) {
        if !attr.is_empty() {
            stats.records_matched += 1;
        }
        for miss in misses {
            stats.address_instances += 1;
            match miss {
                None => stats.addresses_matched += 1,
                Some(addr) => {
                    let e = unmatched.entry(addr.clone()).or_default();
                    e.0 += 1;
                    e.1.insert(record.id.as_str());
                    if e.1.len() > 3 {
                        let last = *e.1.iter().next_back().expect("non-empty");
                        e.1.remove(last);
                    }
                }
            }
        }
    }
    let mut entries: Vec<UnmatchedAddress> = unmatched
        .into_iter()
        .map(|(address, (count, ids))| UnmatchedAddress {
            address,
            count,
            sample_ids: ids.into_iter().map(String::from).collect(),
        })
        .collect();
    entries.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.address.cmp(&b.address))
    });

    let attributions = per_record.into_iter().map(|(a, _)| a).collect();
    Reconciled {
        corpus: corpus.with_attributions(attributions),
        unmatched: UnmatchedReport { entries },
        stats,
    }
}
