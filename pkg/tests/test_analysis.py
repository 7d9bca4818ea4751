import itertools
import math

import numpy as np
import pytest
from scipy import stats

from gblgp.analysis import (
    AggregationError,
    aggregate,
    descriptive_stats,
    format_table,
    summaries_from_csv,
    summaries_to_csv,
    wilcoxon_rank_sum,
    write_tables,
)
from gblgp import analysis
from gblgp.evolution import RunRecord


def record(benchmark, algorithm, seed, mae):
    return RunRecord(config={"algorithm": algorithm, "seed": seed}, benchmark=benchmark,
                     best_program={}, best_program_text="", best_expression="", train_mae=mae,
                     test_mae=mae, success=mae < 1e-5, effective_size=3, total_size=4, telemetry=[])


def test_descriptive_examples():
    assert descriptive_stats([1, 1, 1])[:2] == (1.0, 0.0)
    assert descriptive_stats([1, 2, 4])[:2] == (2.0, 1.0)
    assert descriptive_stats([1e-6, 0.3, 0.5]).success_rate == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        descriptive_stats([])


def test_wilcoxon_examples():
    assert wilcoxon_rank_sum([1, 2, 3], [1, 2, 3]).p_value == 1.0
    assert wilcoxon_rank_sum([4, 4], [4, 4, 4]).p_value == 1.0
    res = wilcoxon_rank_sum([1, 2, 3], [10, 11, 12])
    assert res.exact and res.p_value == pytest.approx(0.1)
    assert res.statistic == 0.0
    assert wilcoxon_rank_sum([10, 11, 12], [1, 2, 3]).statistic == 0.0


def _brute_force_p(a, b):
    """Two-sided exact p by enumerating every relabelling of the pooled ranks."""
    ranks = stats.rankdata(np.concatenate([a, b]))
    n1 = len(a)
    mean = n1 * (len(ranks) + 1) / 2
    observed = abs(ranks[:n1].sum() - mean)
    hits = total = 0
    for idx in itertools.combinations(range(len(ranks)), n1):
        total += 1
        hits += abs(ranks[list(idx)].sum() - mean) >= observed - 1e-9
    return hits / total


@pytest.mark.parametrize("seed", range(8))
def test_exact_branch_matches_enumeration_with_ties(seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 5, int(rng.integers(2, 7))).astype(float)
    b = rng.integers(0, 5, int(rng.integers(2, 7))).astype(float)
    res = wilcoxon_rank_sum(a, b)
    if np.ptp(np.concatenate([a, b])) == 0:
        assert res.p_value == 1.0
    else:
        assert res.p_value == pytest.approx(_brute_force_p(a, b), abs=1e-12)


def test_exact_branch_matches_scipy_without_ties():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a, b = rng.normal(size=7), rng.normal(size=9)
        ref = stats.mannwhitneyu(a, b, alternative="two-sided", method="exact").pvalue
        assert wilcoxon_rank_sum(a, b).p_value == pytest.approx(ref, abs=1e-9)


def test_normal_branch_matches_scipy_with_ties():
    rng = np.random.default_rng(2)
    a = np.round(rng.normal(size=30), 1)
    b = np.round(rng.normal(0.5, size=30), 1)
    ref = stats.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic",
                             use_continuity=True).pvalue
    res = wilcoxon_rank_sum(a, b)
    assert not res.exact
    assert res.p_value == pytest.approx(ref, rel=1e-9)


def test_normal_branch_matches_permutation_oracle_with_ties():
    rng = np.random.default_rng(3)
    a = np.round(rng.normal(size=30), 1)
    b = np.round(rng.normal(0.4, size=30), 1)
    res = wilcoxon_rank_sum(a, b)
    ranks = stats.rankdata(np.concatenate([a, b]))
    mean = 30 * 61 / 2
    observed = abs(ranks[:30].sum() - mean)
    perm = np.random.default_rng(4)
    hits = 0
    draws = 200_000
    for chunk in range(draws // 20_000):
        idx = perm.permuted(np.tile(np.arange(60), (20_000, 1)), axis=1)[:, :30]
        hits += int((np.abs(ranks[idx].sum(axis=1) - mean) >= observed - 1e-9).sum())
    assert res.p_value == pytest.approx(hits / draws, abs=0.01)


def test_method_switch():
    a, b = [1.0, 2.5, 3.0], [2.0, 4.0, 5.0]
    assert wilcoxon_rank_sum(a, b, method="normal").exact is False
    assert wilcoxon_rank_sum(a, b, method="exact").exact is True
    with pytest.raises(ValueError):
        wilcoxon_rank_sum([], [1.0])


def test_aggregate_single_method():
    summaries, tests = aggregate({"gblgp": [record("nguyen1", "gblgp", s, 0.1 * s) for s in range(3)]})
    assert len(summaries) == 1 and tests == []
    assert summaries[0].mmae == pytest.approx(0.1)


def test_aggregate_disjoint_distributions_significant():
    recs = {
        "gblgp": [record("nguyen1", "gblgp", s, 1e-7 * (s + 1)) for s in range(6)],
        "effmut": [record("nguyen1", "effmut", s, 0.1 * (s + 1)) for s in range(6)],
    }
    summaries, tests = aggregate(recs)
    assert [s.success_rate for s in summaries] == [1.0, 0.0]
    assert len(tests) == 1 and tests[0].significant
    assert tests[0].p_value == pytest.approx(2 / math.comb(12, 6))


def test_aggregate_mixed_benchmarks_rejected():
    with pytest.raises(AggregationError):
        aggregate({"a": [record("nguyen1", "a", 0, 1.0)], "b": [record("nguyen2", "b", 0, 1.0)]})


def test_table_round_trips(tmp_path):
    recs = {m: [record("nguyen1", m, s, s + i) for s in range(5)]
            for i, m in enumerate(["effmut", "gblgp", "hybrid1", "hybrid2"])}
    summaries, tests = aggregate(recs)
    assert len(tests) == 6
    assert summaries_from_csv(summaries_to_csv(summaries)) == summaries
    assert analysis.tests_from_csv(analysis.tests_to_csv(tests)) == tests
    text = format_table(summaries, tests)
    assert "GB-LGP" in text and "Hybrid v2" in text
    write_tables(tmp_path, summaries, tests)
    assert {p.name for p in tmp_path.iterdir()} == {"summary.csv", "pvalues.csv", "summary.txt"}
