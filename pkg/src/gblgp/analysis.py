"""Run statistics: median error, median absolute deviation, success rate,
and the two-sided Wilcoxon rank-sum test used for pairwise comparisons."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.stats import norm, rankdata

SUCCESS_THRESHOLD = 1e-5
SIGNIFICANCE = 0.05
EXACT_MAX_N = 20

DISPLAY_NAMES = {"effmut": "effmut", "gblgp": "GB-LGP", "hybrid1": "Hybrid v1", "hybrid2": "Hybrid v2"}


class AggregationError(ValueError):
    """Run records that cannot be summarized together."""


class Descriptive(NamedTuple):
    mmae: float
    mad: float
    success_rate: float
    runs: int


@dataclass(frozen=True)
class MethodSummary:
    benchmark: str
    method: str
    mmae: float
    mad: float
    success_rate: float
    runs: int
    mean_effective_size: float
    mean_total_size: float


@dataclass(frozen=True)
class PairwiseTestResult:
    benchmark: str
    method_a: str
    method_b: str
    statistic: float
    p_value: float
    significant: bool
    exact: bool


def median(values: Sequence[float]) -> float:
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("median of an empty sample")
    mid = v.size // 2
    return float(v[mid]) if v.size % 2 else float((v[mid - 1] + v[mid]) / 2)


def mad(values: Sequence[float]) -> float:
    """Median absolute deviation from the median (unscaled)."""
    m = median(values)
    return median(np.abs(np.asarray(values, dtype=float) - m))


def descriptive_stats(values: Sequence[float], threshold: float = SUCCESS_THRESHOLD) -> Descriptive:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("no values to summarize")
    return Descriptive(median(values), mad(values), float(np.mean(values < threshold)), int(values.size))


# --- rank-sum test ---------------------------------------------------------------

def _exact_two_sided(ranks: np.ndarray, n1: int, observed: float) -> float:
    """P(|R - E[R]| >= |observed - E[R]|) over all size-n1 subsets of ``ranks``.

    Midranks are doubled to integers and the subset-sum distribution is
    counted by dynamic programming.
    """
    doubled = np.rint(2 * ranks).astype(int)
    total = int(doubled.sum())
    # counts[k][s]: number of k-subsets with doubled rank sum s
    counts = np.zeros((n1 + 1, total + 1), dtype=object)
    counts[0][0] = 1
    for r in doubled:
        for k in range(n1, 0, -1):
            counts[k][r:] = counts[k][r:] + counts[k - 1][: total + 1 - r]
    dist = counts[n1]
    n_subsets = math.comb(len(ranks), n1)
    centre = n1 * total / len(ranks)
    dev = abs(2 * observed - centre)
    sums = np.arange(total + 1)
    extreme = np.abs(sums - centre) >= dev - 1e-9
    return min(1.0, float(sum(dist[extreme])) / n_subsets)


def _normal_two_sided(ranks: np.ndarray, n1: int, n2: int, u1: float) -> float:
    n = n1 + n2
    _, ties = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(ties ** 3 - ties)) / (n * (n - 1))
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return 1.0
    z = max(0.0, abs(u1 - n1 * n2 / 2.0) - 0.5) / math.sqrt(var)
    return float(min(1.0, 2.0 * norm.sf(z)))


def wilcoxon_rank_sum(sample_a: Sequence[float], sample_b: Sequence[float],
                      exact_max_n: int = EXACT_MAX_N, alpha: float = SIGNIFICANCE,
                      method: str = "auto") -> PairwiseTestResult:
    """Two-sided rank-sum test with midranks for ties.

    ``method="auto"`` enumerates the exact null distribution when the
    combined size is at most ``exact_max_n`` and otherwise uses the normal
    approximation with tie-corrected variance and a 0.5 continuity
    correction. ``"exact"`` and ``"normal"`` force one branch. The reported
    statistic is ``min(U_a, U_b)``, so it does not depend on sample order.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    n1, n2 = a.size, b.size
    ranks = rankdata(np.concatenate([a, b]))
    r1 = float(ranks[:n1].sum())
    u1 = r1 - n1 * (n1 + 1) / 2.0
    statistic = min(u1, n1 * n2 - u1)
    exact = method == "exact" or (method == "auto" and n1 + n2 <= exact_max_n)
    if np.all(ranks == ranks[0]):
        p = 1.0
    elif exact:
        p = _exact_two_sided(ranks, n1, r1)
    else:
        p = _normal_two_sided(ranks, n1, n2, u1)
    return PairwiseTestResult("", "a", "b", statistic, p, p < alpha, exact)


# --- aggregation -----------------------------------------------------------------

def _records_benchmark(records_by_method: Mapping[str, Sequence]) -> str:
    names = {r.benchmark for recs in records_by_method.values() for r in recs}
    if len(names) != 1:
        raise AggregationError(f"records span several benchmarks: {sorted(names)}")
    return names.pop()


def aggregate(records_by_method: Mapping[str, Sequence], alpha: float = SIGNIFICANCE,
              threshold: float = SUCCESS_THRESHOLD) -> tuple[list[MethodSummary], list[PairwiseTestResult]]:
    """Per-method summaries and all pairwise rank-sum tests on test MAE.

    The success rate is computed from the records' own success flags.
    """
    if not records_by_method:
        raise AggregationError("no records")
    benchmark = _records_benchmark(records_by_method)
    summaries = []
    for method, records in records_by_method.items():
        if not records:
            raise AggregationError(f"method {method} has no runs")
        errors = [r.test_mae for r in records]
        stats = descriptive_stats(errors, threshold)
        summaries.append(MethodSummary(
            benchmark=benchmark,
            method=method,
            mmae=stats.mmae,
            mad=stats.mad,
            success_rate=sum(bool(r.success) for r in records) / len(records),
            runs=len(records),
            mean_effective_size=float(np.mean([r.effective_size for r in records])),
            mean_total_size=float(np.mean([r.total_size for r in records])),
        ))
    tests = []
    for m_a, m_b in itertools.combinations(records_by_method, 2):
        res = wilcoxon_rank_sum([r.test_mae for r in records_by_method[m_a]],
                                [r.test_mae for r in records_by_method[m_b]], alpha=alpha)
        tests.append(PairwiseTestResult(benchmark, m_a, m_b, res.statistic, res.p_value,
                                        res.significant, res.exact))
    return summaries, tests


# --- tables ----------------------------------------------------------------------

def _to_csv(rows, cls) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = [f.name for f in fields(cls)]
    writer.writerow(names)
    for row in rows:
        d = asdict(row)
        writer.writerow([repr(d[n]) if isinstance(d[n], float) else d[n] for n in names])
    return buf.getvalue()


def _from_csv(text: str, cls):
    types = {f.name: f.type for f in fields(cls)}
    out = []
    for d in csv.DictReader(io.StringIO(text)):
        kw = {}
        for k, v in d.items():
            t = types[k]
            if t in ("float", float):
                kw[k] = float(v)
            elif t in ("int", int):
                kw[k] = int(v)
            elif t in ("bool", bool):
                kw[k] = v == "True"
            else:
                kw[k] = v
        out.append(cls(**kw))
    return out


def summaries_to_csv(summaries: Sequence[MethodSummary]) -> str:
    return _to_csv(summaries, MethodSummary)


def summaries_from_csv(text: str) -> list[MethodSummary]:
    return _from_csv(text, MethodSummary)


def tests_to_csv(tests: Sequence[PairwiseTestResult]) -> str:
    return _to_csv(tests, PairwiseTestResult)


def tests_from_csv(text: str) -> list[PairwiseTestResult]:
    return _from_csv(text, PairwiseTestResult)


def _fmt(x: float) -> str:
    if x == 0:
        return "0"
    return f"{x:.2e}" if abs(x) < 1e-2 or abs(x) >= 1e4 else f"{x:.3f}".rstrip("0").rstrip(".")


def format_table(summaries: Sequence[MethodSummary], tests: Sequence[PairwiseTestResult] = ()) -> str:
    """Aligned-text tables: MMAE (MAD), success, sizes; then pairwise p-values."""
    lines = []
    for bench in dict.fromkeys(s.benchmark for s in summaries):
        rows = [("Method", "MMAE (MAD)", "Success", "Eff/Total size")]
        for s in (s for s in summaries if s.benchmark == bench):
            rows.append((DISPLAY_NAMES.get(s.method, s.method), f"{_fmt(s.mmae)} ({_fmt(s.mad)})",
                         f"{s.success_rate:.2f}", f"{s.mean_effective_size:.1f} / {s.mean_total_size:.1f}"))
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines.append(f"[{bench}]")
        lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
        pair_rows = [(f"{DISPLAY_NAMES.get(t.method_b, t.method_b)} x {DISPLAY_NAMES.get(t.method_a, t.method_a)}",
                      _fmt(t.p_value)) for t in tests if t.benchmark == bench]
        if pair_rows:
            w = max(len(r[0]) for r in pair_rows)
            lines.append("")
            lines.append("p-values (two-sided rank-sum):")
            lines += [f"{a.ljust(w)}  {p}" for a, p in pair_rows]
        lines.append("")
    return "\n".join(lines)


def write_tables(directory: str | Path, summaries, tests) -> None:
    directory = Path(directory)
    (directory / "summary.csv").write_text(summaries_to_csv(summaries))
    (directory / "pvalues.csv").write_text(tests_to_csv(tests))
    (directory / "summary.txt").write_text(format_table(summaries, tests))
