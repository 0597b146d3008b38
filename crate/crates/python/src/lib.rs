//! Python bindings. Structured results come back as plain dicts and lists.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use citimpact::benchmarks::{self as bench, DEFAULT_TOP_FRACTION};
use citimpact::corpus::{self, CorpusPaths, FieldScheme, OrgType};
use citimpact::indicators::{self, AggregateOptions, OrgTypeShares, SliceSpec};
use citimpact::reconcile::{self, compile_rules, reconcile_corpus};
use citimpact::reporting::{rank, RankMetric, RankingSpec, DEFAULT_LIMIT, DEFAULT_MIN_WEIGHT};
use citimpact::synth::{self, DistortionSpec, SynthSpec};
use citimpact::trends;

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.into_pyobject(py)?.into_any().unbind(),
            (None, Some(i)) => i.into_pyobject(py)?.into_any().unbind(),
            _ => n
                .as_f64()
                .unwrap_or(f64::NAN)
                .into_pyobject(py)?
                .into_any()
                .unbind(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

fn serialize<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &v)
}

fn parse_date(s: Option<&str>) -> PyResult<chrono::NaiveDate> {
    match s {
        None => Ok(corpus::default_census_date()),
        Some(s) => chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(value_err),
    }
}

/// Lowercased, accent-free, punctuation-free form used for rule matching.
#[pyfunction]
fn normalize_address(raw: &str) -> String {
    reconcile::normalize_address(raw)
}

/// Compound average annual increase of a positive series, in percent.
#[pyfunction]
fn avg_annual_increase(values: Vec<f64>) -> PyResult<f64> {
    trends::avg_annual_increase(&values).map_err(value_err)
}

#[pyfunction]
fn concentration_from_shares(discipline_share: f64, overall_share: f64) -> PyResult<f64> {
    indicators::concentration_from_shares(discipline_share, overall_share).map_err(value_err)
}

/// `journals` is a list of `(journal_id, impact_factor, [field_id, ...])`.
/// Returns `{field_id: [top journal ids]}`.
#[pyfunction]
#[pyo3(signature = (journals, fraction = DEFAULT_TOP_FRACTION))]
fn classify_top_journals(
    py: Python<'_>,
    journals: Vec<(String, f64, Vec<String>)>,
    fraction: f64,
) -> PyResult<Py<PyAny>> {
    let journals: Vec<corpus::Journal> = journals
        .into_iter()
        .map(|(id, impact_factor, field_ids)| corpus::Journal {
            name: id.clone(),
            id,
            impact_factor,
            field_ids,
        })
        .collect();
    let mut fields: Vec<String> = journals.iter().flat_map(|j| j.field_ids.clone()).collect();
    fields.sort();
    fields.dedup();
    let scheme = FieldScheme::new(fields.into_iter().map(|f| (f, "all".to_string())))
        .map_err(|d| value_err(&d[0]))?;
    let top = bench::classify_top_journals(&journals, &scheme, fraction).map_err(value_err)?;
    let dict = PyDict::new(py);
    for (field, set) in top.iter() {
        dict.set_item(field, set.iter().collect::<Vec<_>>())?;
    }
    Ok(dict.into_any().unbind())
}

/// Benchmark tables: expected citation rates and top journals.
#[pyclass(name = "Benchmarks", frozen)]
struct PyBenchmarks {
    inner: bench::Benchmarks,
}

#[pymethods]
impl PyBenchmarks {
    /// Mean citations of the (year, field) cell.
    fn xcr(&self, year: i32, field: &str) -> PyResult<f64> {
        self.inner.xcr.rate(year, field).map_err(value_err)
    }

    /// Mean citations of the (year, journal) cell.
    fn jxcr(&self, year: i32, journal: &str) -> PyResult<f64> {
        self.inner.jxcr.rate(year, journal).map_err(value_err)
    }

    fn is_top(&self, field: &str, journal: &str) -> bool {
        self.inner.top.is_top_in(field, journal)
    }

    /// `{"xcr": csv, "jxcr": csv, "top_journals": csv}`
    fn to_csv(&self) -> std::collections::BTreeMap<&'static str, String> {
        [
            ("xcr", self.inner.xcr.to_csv("field_id", "xcr")),
            ("jxcr", self.inner.jxcr.to_csv("journal_id", "jxcr")),
            ("top_journals", self.inner.top.to_csv()),
        ]
        .into_iter()
        .collect()
    }
}

/// A validated corpus; `reconcile` attaches organization attributions.
#[pyclass(name = "Corpus")]
struct PyCorpus {
    inner: Option<corpus::Corpus>,
}

impl PyCorpus {
    fn get(&self) -> &corpus::Corpus {
        self.inner.as_ref().expect("corpus present")
    }
}

#[pymethods]
impl PyCorpus {
    #[staticmethod]
    #[pyo3(signature = (publications, journals, orgs, fields, census_date = None))]
    fn load(
        publications: PathBuf,
        journals: PathBuf,
        orgs: PathBuf,
        fields: PathBuf,
        census_date: Option<&str>,
    ) -> PyResult<Self> {
        let paths = CorpusPaths {
            publications,
            journals,
            orgs,
            field_scheme: fields,
        };
        let ingest = paths.load(parse_date(census_date)?).map_err(value_err)?;
        Ok(Self {
            inner: Some(ingest.corpus),
        })
    }

    /// Loads the standard file names from one directory (as written by `generate_synthetic`).
    #[staticmethod]
    #[pyo3(signature = (dir, census_date = None))]
    fn from_dir(dir: PathBuf, census_date: Option<&str>) -> PyResult<Self> {
        let ingest = CorpusPaths::in_dir(&dir)
            .load(parse_date(census_date)?)
            .map_err(value_err)?;
        Ok(Self {
            inner: Some(ingest.corpus),
        })
    }

    fn __len__(&self) -> usize {
        self.get().records().len()
    }

    fn summary(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        serialize(py, &self.get().summary())
    }

    /// Applies a tab-separated rule file; returns match statistics plus the
    /// number of distinct unmatched addresses.
    fn reconcile(&mut self, py: Python<'_>, rules_path: PathBuf) -> PyResult<Py<PyAny>> {
        let text = std::fs::read_to_string(&rules_path).map_err(value_err)?;
        let rules = compile_rules(&text, self.get().organizations()).map_err(value_err)?;
        let corpus = self.inner.take().expect("corpus present");
        let rec = reconcile_corpus(corpus, &rules);
        self.inner = Some(rec.corpus);
        let mut v = serde_json::to_value(rec.stats).map_err(value_err)?;
        v["distinct_unmatched"] = rec.unmatched.entries.len().into();
        v["conflicts"] = rules.conflicts().len().into();
        to_py(py, &v)
    }

    #[pyo3(signature = (fraction = DEFAULT_TOP_FRACTION))]
    fn benchmarks(&self, fraction: f64) -> PyResult<PyBenchmarks> {
        let inner = bench::Benchmarks::compute(self.get(), fraction).map_err(value_err)?;
        Ok(PyBenchmarks { inner })
    }

    /// Indicator rows for a comma-separated slice, e.g. `"org_type,discipline"`.
    #[pyo3(signature = (slice = "nation", benchmarks = None))]
    fn aggregate(
        &self,
        py: Python<'_>,
        slice: &str,
        benchmarks: Option<&PyBenchmarks>,
    ) -> PyResult<Py<PyAny>> {
        let rows = self.rows(slice, benchmarks)?;
        serialize(py, &rows)
    }

    #[pyo3(signature = (slice = "org", metric = "mean_cx", min_weight = DEFAULT_MIN_WEIGHT, limit = DEFAULT_LIMIT, benchmarks = None))]
    fn rank(
        &self,
        py: Python<'_>,
        slice: &str,
        metric: &str,
        min_weight: f64,
        limit: usize,
        benchmarks: Option<&PyBenchmarks>,
    ) -> PyResult<Py<PyAny>> {
        let metric: RankMetric = metric.parse().map_err(value_err)?;
        let spec = RankingSpec::new(metric, min_weight, limit).map_err(value_err)?;
        let agg = self.aggregation(slice, benchmarks)?;
        serialize(py, &rank(&agg, spec).rows)
    }

    /// Discipline share over overall share of one organization type ("U", "RI", "H").
    fn concentration_index(&self, org_type: &str, discipline: &str) -> PyResult<f64> {
        let t = OrgType::from_code(org_type)
            .ok_or_else(|| value_err(format!("unknown org type '{org_type}'")))?;
        OrgTypeShares::compute(self.get())
            .and_then(|s| s.concentration_index(t, discipline))
            .map_err(value_err)
    }
}

impl PyCorpus {
    fn aggregation(
        &self,
        slice: &str,
        benchmarks: Option<&PyBenchmarks>,
    ) -> PyResult<indicators::Aggregation> {
        let slice: SliceSpec = slice.parse().map_err(value_err)?;
        let computed;
        let b = match benchmarks {
            Some(b) => &b.inner,
            None => {
                computed = bench::Benchmarks::compute(self.get(), DEFAULT_TOP_FRACTION)
                    .map_err(value_err)?;
                &computed
            }
        };
        indicators::aggregate(self.get(), &slice, b, AggregateOptions::default()).map_err(value_err)
    }

    fn rows(
        &self,
        slice: &str,
        benchmarks: Option<&PyBenchmarks>,
    ) -> PyResult<Vec<indicators::IndicatorRow>> {
        Ok(self.aggregation(slice, benchmarks)?.rows)
    }
}

/// A ready-made generator spec as a JSON string.
#[pyfunction]
#[pyo3(signature = (seed, n_fields = 8, n_orgs = 6, annual_volume = 500))]
fn example_spec(seed: u64, n_fields: usize, n_orgs: usize, annual_volume: usize) -> String {
    serde_json::to_string_pretty(&SynthSpec::example(seed, n_fields, n_orgs, annual_volume))
        .expect("serializable")
}

/// Writes a synthetic corpus from a JSON spec into `out_dir`; returns the record count.
#[pyfunction]
fn generate_synthetic(spec_json: &str, out_dir: PathBuf) -> PyResult<usize> {
    let spec = SynthSpec::from_json(spec_json).map_err(value_err)?;
    let files = synth::generate_corpus(&spec).map_err(value_err)?;
    files.write_to(&out_dir).map_err(value_err)?;
    Ok(files.publications.lines().count())
}

#[pyfunction]
#[pyo3(signature = (seed = None))]
fn demo_distortion(py: Python<'_>, seed: Option<u64>) -> PyResult<Py<PyAny>> {
    let defaults = DistortionSpec::default();
    let spec = DistortionSpec {
        seed: seed.unwrap_or(defaults.seed),
        ..defaults
    };
    let report = synth::distortion_demo(&spec).map_err(value_err)?;
    let mut v = serde_json::to_value(&report).map_err(value_err)?;
    v["passed"] = report.passed().into();
    to_py(py, &v)
}

#[pymodule]
#[pyo3(name = "citimpact")]
fn citimpact_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(normalize_address, m)?)?;
    m.add_function(wrap_pyfunction!(avg_annual_increase, m)?)?;
    m.add_function(wrap_pyfunction!(concentration_from_shares, m)?)?;
    m.add_function(wrap_pyfunction!(classify_top_journals, m)?)?;
    m.add_function(wrap_pyfunction!(example_spec, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(demo_distortion, m)?)?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyBenchmarks>()?;
    Ok(())
}
