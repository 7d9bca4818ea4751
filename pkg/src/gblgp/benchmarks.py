"""Symbolic-regression target functions and their train/test samplers.

Sampling specs follow the usual notation: ``U[a, b, c]`` draws ``c`` uniform
points in ``[a, b]`` per variable, ``E[a, b, c]`` is the evenly spaced grid
``a, a + c, ..., b``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

KORNS5_MIN_W = 1e-6


class DomainError(ValueError):
    """Input outside the natural domain of a benchmark function."""


@dataclass(frozen=True)
class Sampling:
    kind: str  # "U" or "E"
    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.kind not in ("U", "E"):
            raise ValueError(f"sampling kind must be U or E, got {self.kind!r}")
        if self.c <= 0:
            raise ValueError("sampling parameter c must be positive")
        if self.b < self.a:
            raise ValueError("sampling range is empty")

    @property
    def count(self) -> int:
        if self.kind == "U":
            return int(self.c)
        return int(np.floor((self.b - self.a) / self.c + 1e-9)) + 1

    def __str__(self):
        return f"{self.kind}[{self.a:g},{self.b:g},{self.c:g}]"


def U(a, b, c) -> Sampling:
    return Sampling("U", a, b, c)


def E(a, b, c) -> Sampling:
    return Sampling("E", a, b, c)


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    variables: tuple[str, ...]
    formula: str
    function: Callable[[Mapping[str, np.ndarray]], np.ndarray] = field(repr=False)
    train: Mapping[str, Sampling]
    test: Mapping[str, Sampling]
    domain: Callable[[Mapping[str, np.ndarray]], np.ndarray] | None = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return len(self.variables)

    def columns(self, inputs: np.ndarray) -> dict[str, np.ndarray]:
        X = np.atleast_2d(np.asarray(inputs, dtype=float))
        if X.shape[1] != self.dimension:
            raise ValueError(f"{self.name} takes {self.dimension} input(s), got {X.shape[1]}")
        return {v: X[:, i] for i, v in enumerate(self.variables)}

    def valid(self, inputs: np.ndarray) -> np.ndarray:
        cols = self.columns(inputs)
        if self.domain is None:
            return np.ones(len(next(iter(cols.values()))), dtype=bool)
        return self.domain(cols)

    def evaluate(self, inputs: np.ndarray) -> np.ndarray:
        cols = self.columns(inputs)
        if not self.valid(inputs).all():
            raise DomainError(f"{self.name}: input outside the function's domain")
        return np.asarray(self.function(cols), dtype=float)

    def with_variable_order(self, order: Sequence[str]) -> "BenchmarkSpec":
        """Same benchmark with inputs ``x1..xD`` bound to ``order``."""
        if sorted(order) != sorted(self.variables):
            raise ValueError(f"order must permute {self.variables}")
        return BenchmarkSpec(self.name, tuple(order), self.formula, self.function,
                             self.train, self.test, self.domain)


@dataclass(frozen=True)
class Dataset:
    name: str
    inputs: np.ndarray
    targets: np.ndarray
    which: str = "train"
    seed: int | None = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.asarray(self.targets, dtype=float).reshape(-1)
        if X.shape[0] != y.shape[0]:
            raise ValueError("inputs and targets differ in length")
        if y.size == 0:
            raise ValueError("dataset is empty")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ValueError("dataset contains non-finite values")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", y)

    @property
    def dimension(self) -> int:
        return self.inputs.shape[1]

    def __len__(self):
        return len(self.targets)

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"x{i + 1}" for i in range(self.dimension)] + ["y"])
        for row, y in zip(self.inputs, self.targets):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(y))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source: str | Path, name: str = "csv", which: str = "train") -> "Dataset":
        text = Path(source).read_text() if isinstance(source, Path) or "\n" not in str(source) else source
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], [r for r in rows[1:] if r]
        if header[-1] != "y" or header[:-1] != [f"x{i + 1}" for i in range(len(header) - 1)]:
            raise ValueError("CSV header must be x1,...,xD,y")
        data = np.array([[float(v) for v in r] for r in body])
        return cls(name, data[:, :-1], data[:, -1], which)


def _poly(degree: int):
    return lambda c: sum(c["x"] ** k for k in range(1, degree + 1))


def _keijzer4(c):
    x = c["x"]
    return x ** 3 * np.exp(-x) * np.cos(x) * np.sin(x) * (np.sin(x) ** 2 * np.cos(x) - 1)


_NGUYEN = {"x": U(-1, 1, 20)}
KORNS_VARIABLES = ("x", "y", "z", "v", "w")

BENCHMARKS: dict[str, BenchmarkSpec] = {
    "nguyen1": BenchmarkSpec("nguyen1", ("x",), "x^3+x^2+x", _poly(3), _NGUYEN, _NGUYEN),
    "nguyen2": BenchmarkSpec("nguyen2", ("x",), "x^4+x^3+x^2+x", _poly(4), _NGUYEN, _NGUYEN),
    "nguyen3": BenchmarkSpec("nguyen3", ("x",), "x^5+x^4+x^3+x^2+x", _poly(5), _NGUYEN, _NGUYEN),
    "nguyen4": BenchmarkSpec("nguyen4", ("x",), "x^6+x^5+x^4+x^3+x^2+x", _poly(6), _NGUYEN, _NGUYEN),
    "nguyen6": BenchmarkSpec(
        "nguyen6", ("x",), "sin(x)*sin(x+x^2)",
        lambda c: np.sin(c["x"]) * np.sin(c["x"] + c["x"] ** 2), _NGUYEN, _NGUYEN,
    ),
    "keijzer4": BenchmarkSpec(
        "keijzer4", ("x",), "x^3*e^-x*cos(x)*sin(x)*(sin(x)^2*cos(x)-1)", _keijzer4,
        {"x": E(0, 10, 0.05)}, {"x": E(0.05, 10.05, 0.05)},
    ),
    "keijzer5": BenchmarkSpec(
        "keijzer5", ("x", "y", "z"), "30*x*z/((x-10)*y^2)",
        lambda c: 30 * c["x"] * c["z"] / ((c["x"] - 10) * c["y"] ** 2),
        {"x": U(-1, 1, 500), "y": U(1, 2, 500), "z": U(-1, 1, 500)},
        {"x": U(-1, 1, 10000), "y": U(1, 2, 10000), "z": U(-1, 1, 10000)},
    ),
    "korns3": BenchmarkSpec(
        "korns3", KORNS_VARIABLES, "-5.41+4.9*(v-x+y/w)/(3*w)",
        lambda c: -5.41 + 4.9 * (c["v"] - c["x"] + c["y"] / c["w"]) / (3 * c["w"]),
        {v: U(-50, 50, 500) for v in KORNS_VARIABLES},
        {v: U(-50, 50, 10000) for v in KORNS_VARIABLES},
        domain=lambda c: c["w"] != 0,
    ),
    "korns5": BenchmarkSpec(
        "korns5", KORNS_VARIABLES, "3+2.13*ln(w)",
        lambda c: 3 + 2.13 * np.log(c["w"]),
        {v: U(0, 50, 500) for v in KORNS_VARIABLES},
        {v: U(0, 50, 10000) for v in KORNS_VARIABLES},
        domain=lambda c: c["w"] >= KORNS5_MIN_W,
    ),
}


def get_benchmark(name: str) -> BenchmarkSpec:
    try:
        return BENCHMARKS[name]
    except KeyError:
        raise KeyError(f"unknown benchmark {name!r}; known: {sorted(BENCHMARKS)}") from None


def target_value(name: str, inputs: Sequence[float]) -> float:
    """Exact target for one input vector (variables in the benchmark's order)."""
    spec = get_benchmark(name)
    return float(spec.evaluate(np.asarray(inputs, dtype=float).reshape(1, -1))[0])


def _draw(sampling: Sampling, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    if sampling.kind == "U":
        return rng.uniform(sampling.a, sampling.b, size=n if n is not None else sampling.count)
    return sampling.a + sampling.c * np.arange(sampling.count)


def generate_dataset(spec: BenchmarkSpec | str, which: str = "train", seed: int = 0) -> Dataset:
    """Sample a dataset; train and test streams for the same seed are independent."""
    if isinstance(spec, str):
        spec = get_benchmark(spec)
    if which not in ("train", "test"):
        raise ValueError("which must be 'train' or 'test'")
    plan = spec.train if which == "train" else spec.test
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0 if which == "train" else 1]))
    counts = {plan[v].count for v in spec.variables}
    if len(counts) != 1:
        raise ValueError(f"{spec.name}: variables sample different numbers of points")
    X = np.column_stack([_draw(plan[v], rng) for v in spec.variables])
    bad = ~spec.valid(X)
    while bad.any():
        grid = [v for v in spec.variables if plan[v].kind == "E"]
        if grid:
            raise DomainError(f"{spec.name}: grid sampling hits the function's domain boundary")
        idx = np.flatnonzero(bad)
        X[idx] = np.column_stack([_draw(plan[v], rng, len(idx)) for v in spec.variables])
        bad = ~spec.valid(X)
    return Dataset(spec.name, X, spec.evaluate(X), which, seed)
