"""Smoke test for the citimpact Python module.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/citimpact-*.whl
"""

import json
import math
import tempfile

import citimpact


def main():
    assert citimpact.normalize_address("Univ. Roma  'Tor Vergatà'") == "univ roma tor vergata"

    cagr = citimpact.avg_annual_increase([37353, 38282, 41869, 43669, 45507, 47164])
    assert abs(cagr - 4.78) < 0.01, cagr
    try:
        citimpact.avg_annual_increase([1.0])
    except ValueError:
        pass
    else:
        raise AssertionError("a single point has no growth")

    assert abs(citimpact.concentration_from_shares(29.5, 11.1) - 2.66) < 0.01

    # Ten journals with a tie at the cut-off: both 9.0 journals are top.
    journals = [(f"J{i}", float(i), ["F"]) for i in range(8)] + [("A", 9.0, ["F"]), ("B", 9.0, ["F"])]
    assert sorted(citimpact.classify_top_journals(journals)["F"]) == ["A", "B"]

    with tempfile.TemporaryDirectory() as tmp:
        spec = json.loads(citimpact.example_spec(7, n_fields=6, n_orgs=6, annual_volume=200))
        n = citimpact.generate_synthetic(json.dumps(spec), tmp)
        assert n == 6 * 6 * 200, n

        corpus = citimpact.Corpus.from_dir(tmp)
        assert len(corpus) == n
        assert corpus.summary()["records"] == n

        stats = corpus.reconcile(f"{tmp}/rules.tsv")
        assert stats["records_matched"] == n, stats

        bench = corpus.benchmarks()
        by_field_year = corpus.aggregate("field,year", benchmarks=bench)
        assert by_field_year and all(abs(r["mean_cx"] - 1.0) < 1e-9 for r in by_field_year)

        ranked = corpus.rank("org", min_weight=0.0, limit=3, benchmarks=bench)
        assert len(ranked) == 3
        values = [r["mean_cx"] for r in ranked]
        assert values == sorted(values, reverse=True)

        total = 0.0
        for code in ("U", "RI", "H"):
            overall = sum(r["weight"] for r in corpus.aggregate("org_type") if r["key"] == [code])
            share = overall / sum(r["weight"] for r in corpus.aggregate("org_type"))
            total += share * corpus.concentration_index(code, "Physics")
        assert math.isclose(total, 1.0, abs_tol=1e-9), total

    report = citimpact.demo_distortion()
    assert report["passed"], report
    assert report == citimpact.demo_distortion()

    print("python smoke test ok")


if __name__ == "__main__":
    main()
