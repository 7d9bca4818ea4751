"""Algorithm drivers: steady-state effmut, GB-LGP, and the two hybrids.

Fitness is the training mean absolute error (minimized). Every driver keeps
the best individual (elitism), so the best training error never increases.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Callable

import numpy as np

from .benchmarks import Dataset
from .program import (
    Program,
    effective_size,
    decode_expression,
    mean_absolute_error,
    strip_introns,
)
from .scfg import (
    Grammar,
    SamplerBudget,
    sample_program,
    update_probabilities,
    usage_proportions,
)
from .variation import MutationConfig, random_program, vary

ALGORITHMS = ("effmut", "gblgp", "hybrid1", "hybrid2")
DEFAULT_REGISTERS = {"effmut": 8, "gblgp": 13, "hybrid1": 13, "hybrid2": 13}


class ConfigError(ValueError):
    """Inconsistent run configuration."""


@dataclass(frozen=True)
class AlgorithmConfig:
    algorithm: str = "gblgp"
    population_size: int = 100
    generations: int = 100
    elite: int = 1
    tournament_size: int = 2
    registers: int | None = None  # None: 8 for effmut, 13 for the grammar-based algorithms
    initial_size: int = 20
    top_n: int = 3
    resample_period: int = 2
    alpha: float = 0.1
    steps_per_generation: int | None = None  # None: ceil(population_size / 2)
    sample_max_instructions: int = 200
    sample_max_depth: int | None = 13
    success_threshold: float = 1e-5
    success_on: str = "test"
    mutation: MutationConfig = field(default_factory=MutationConfig)
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        for name in ("population_size", "generations", "elite", "tournament_size",
                     "initial_size", "top_n", "resample_period", "sample_max_instructions"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.top_n > self.population_size:
            raise ConfigError("top_n cannot exceed population_size")
        if self.elite >= self.population_size:
            raise ConfigError("elite must be smaller than population_size")
        if 2 * self.tournament_size > self.population_size:
            raise ConfigError("population too small for two disjoint tournaments")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        if self.success_on not in ("train", "test"):
            raise ConfigError("success_on must be 'train' or 'test'")
        if self.registers is not None and self.registers < 2:
            raise ConfigError("registers must be at least 2")

    @property
    def register_count(self) -> int:
        return self.registers if self.registers is not None else DEFAULT_REGISTERS[self.algorithm]

    @property
    def steps(self) -> int:
        if self.steps_per_generation is not None:
            return self.steps_per_generation
        return math.ceil(self.population_size / 2)

    @property
    def grammar_based(self) -> bool:
        return self.algorithm != "effmut"

    def budget(self) -> SamplerBudget:
        return SamplerBudget(self.register_count, self.sample_max_instructions, self.sample_max_depth)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "mutation"}
        d["mutation"] = self.mutation.to_dict()
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "AlgorithmConfig":
        data = dict(data)
        mutation = data.pop("mutation", None)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        if mutation is not None:
            mutation = {k: tuple(v) if isinstance(v, list) else v for k, v in mutation.items()}
            data["mutation"] = MutationConfig(**mutation)
        return cls(**data)


@dataclass
class Population:
    programs: list[Program]
    fitness: np.ndarray

    def __len__(self):
        return len(self.programs)

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.fitness))

    def ranking(self) -> np.ndarray:
        """Indices sorted by fitness, ties by index."""
        return np.argsort(self.fitness, kind="stable")


@dataclass
class GenerationTelemetry:
    generation: int
    best_train_mae: float
    best_test_mae: float
    mean_effective_pct: float
    mean_effective_size: float
    mean_total_size: float
    probabilities: list[list[float]] | None = None


@dataclass
class RunRecord:
    config: dict
    benchmark: str
    best_program: dict
    best_program_text: str
    best_expression: str
    train_mae: float
    test_mae: float
    success: bool
    effective_size: int
    total_size: int
    telemetry: list[GenerationTelemetry]
    final_probabilities: list[list[float]] | None = None
    grammar_labels: list | None = None  # [[lhs, [production, ...]], ...]
    wall_seconds: float = 0.0

    @property
    def algorithm(self) -> str:
        return self.config["algorithm"]

    @property
    def seed(self) -> int:
        return self.config["seed"]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        data = dict(data)
        data["telemetry"] = [GenerationTelemetry(**t) for t in data["telemetry"]]
        return cls(**data)


FitnessFn = Callable[[Program], float]


# --- selection ------------------------------------------------------------------

def _rank(indices, fitness) -> tuple[int, int]:
    order = sorted(indices, key=lambda i: (fitness[i], i))
    return int(order[0]), int(order[-1])


def tournament(fitness, size: int, rng: np.random.Generator) -> tuple[int, int]:
    """(winner, loser) among ``size`` distinct uniformly drawn individuals.

    Lower fitness wins; ties go to the lower index.
    """
    n = len(fitness)
    if n == 0:
        raise ValueError("empty population")
    if not 1 <= size <= n:
        raise ValueError(f"tournament size {size} invalid for population of {n}")
    return _rank(rng.choice(n, size=size, replace=False), fitness)


# --- generation steps ---------------------------------------------------------------

def effmut_generation(state: Population, config: AlgorithmConfig, rng: np.random.Generator,
                      fitness_fn: FitnessFn, mutation: MutationConfig,
                      grammar: Grammar | None = None) -> Population:
    """Steady-state steps: two disjoint tournaments each; winners overwrite losers, then mutate.

    The current best individual is never overwritten. With ``grammar`` given,
    mutated instructions are re-tagged.
    """
    programs = list(state.programs)
    fitness = state.fitness.copy()
    n, size = len(programs), config.tournament_size
    for _ in range(config.steps):
        drawn = rng.choice(n, size=2 * size, replace=False)
        pairs = [_rank(drawn[:size], fitness), _rank(drawn[size:], fitness)]
        for winner, loser in pairs:
            if loser != int(np.argmin(fitness)):
                programs[loser] = programs[winner]
                fitness[loser] = fitness[winner]
            child = vary(programs[winner], mutation, rng, grammar)
            if child is not programs[winner]:
                programs[winner] = child
                fitness[winner] = fitness_fn(child)
    return Population(programs, fitness)


def _elites(state: Population, count: int) -> list[int]:
    return [int(i) for i in state.ranking()[:count]]


def _sample(grammar: Grammar, config: AlgorithmConfig, count: int,
            rng: np.random.Generator) -> list[Program]:
    budget = config.budget()
    return [sample_program(grammar, budget, rng) for _ in range(count)]


def learn(state: Population, grammar: Grammar, config: AlgorithmConfig) -> Grammar:
    """Move the grammar towards the production usage of the ``top_n`` best programs."""
    top = [state.programs[i] for i in state.ranking()[:config.top_n]]
    return update_probabilities(grammar, usage_proportions(top, grammar), config.alpha)


def gblgp_generation(state: Population, grammar: Grammar, config: AlgorithmConfig,
                     rng: np.random.Generator, fitness_fn: FitnessFn) -> tuple[Population, Grammar]:
    """Update the grammar from the best programs, then resample all but the elite."""
    grammar = learn(state, grammar, config)
    keep = [strip_introns(state.programs[i]) for i in _elites(state, config.elite)]
    keep_fit = [state.fitness[i] for i in _elites(state, config.elite)]
    fresh = _sample(grammar, config, config.population_size - len(keep), rng)
    programs = keep + fresh
    fitness = np.array(keep_fit + [fitness_fn(p) for p in fresh])
    return Population(programs, fitness), grammar


def hybrid1_generation(state: Population, grammar: Grammar, config: AlgorithmConfig,
                       generation: int, rng: np.random.Generator, fitness_fn: FitnessFn,
                       mutation: MutationConfig) -> tuple[Population, Grammar]:
    """Full resample every ``resample_period`` generations, steady-state mutation otherwise."""
    if generation % config.resample_period == 0:
        return gblgp_generation(state, grammar, config, rng, fitness_fn)
    return effmut_generation(state, config, rng, fitness_fn, mutation, grammar), grammar


def hybrid2_generation(state: Population, grammar: Grammar, config: AlgorithmConfig,
                       rng: np.random.Generator, fitness_fn: FitnessFn,
                       mutation: MutationConfig) -> tuple[Population, Grammar]:
    """Half the population resampled, half from tournament winners and their mutants."""
    grammar = learn(state, grammar, config)
    elite_idx = _elites(state, config.elite)
    programs = [state.programs[i] for i in elite_idx]
    fitness = [state.fitness[i] for i in elite_idx]
    rest = config.population_size - len(programs)
    fresh = _sample(grammar, config, math.ceil(rest / 2), rng)
    programs += fresh
    fitness += [fitness_fn(p) for p in fresh]
    while len(programs) < config.population_size:
        winner, _ = tournament(state.fitness, config.tournament_size, rng)
        programs.append(state.programs[winner])
        fitness.append(state.fitness[winner])
        if len(programs) < config.population_size:
            child = vary(state.programs[winner], mutation, rng, grammar)
            programs.append(child)
            fitness.append(fitness_fn(child))
    return Population(programs, np.array(fitness)), grammar


# --- runs -----------------------------------------------------------------------

def _telemetry(generation: int, state: Population, test: Dataset,
               grammar: Grammar | None) -> GenerationTelemetry:
    best = state.programs[state.best_index]
    sizes = np.array([effective_size(p) for p in state.programs], dtype=float)
    return GenerationTelemetry(
        generation=generation,
        best_train_mae=float(state.fitness[state.best_index]),
        best_test_mae=mean_absolute_error(best, test.inputs, test.targets),
        mean_effective_pct=float(np.mean(100.0 * sizes[:, 0] / sizes[:, 1])),
        mean_effective_size=float(sizes[:, 0].mean()),
        mean_total_size=float(sizes[:, 1].mean()),
        probabilities=[list(map(float, r.probs)) for r in grammar.rules] if grammar is not None else None,
    )


def run(config: AlgorithmConfig, grammar: Grammar, train: Dataset, test: Dataset) -> RunRecord:
    """One seeded run of the configured algorithm, with per-generation telemetry."""
    if grammar.input_dimension != train.dimension:
        raise ConfigError(
            f"grammar emits {grammar.input_dimension} input(s) but the dataset has {train.dimension}"
        )
    if test.dimension != train.dimension:
        raise ConfigError("train and test datasets differ in dimension")
    started = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    registers = config.register_count
    mutation = replace(
        MutationConfig.for_grammar(grammar),
        **{k: getattr(config.mutation, k) for k in
           ("macro_rate", "insertion_prob", "deletion_prob", "micro_rate", "min_size", "max_size",
            "register_operand_prob", "constant_operand_prob")},
    )

    def fitness_fn(program: Program) -> float:
        return mean_absolute_error(program, train.inputs, train.targets)

    if config.grammar_based:
        programs = _sample(grammar, config, config.population_size, rng)
    else:
        programs = [random_program(mutation, registers, config.initial_size, rng)
                    for _ in range(config.population_size)]
    state = Population(programs, np.array([fitness_fn(p) for p in programs]))

    telemetry = []
    for g in range(config.generations):
        if config.algorithm == "effmut":
            state = effmut_generation(state, config, rng, fitness_fn, mutation)
        elif config.algorithm == "gblgp":
            state, grammar = gblgp_generation(state, grammar, config, rng, fitness_fn)
        elif config.algorithm == "hybrid1":
            state, grammar = hybrid1_generation(state, grammar, config, g, rng, fitness_fn, mutation)
        else:
            state, grammar = hybrid2_generation(state, grammar, config, rng, fitness_fn, mutation)
        telemetry.append(_telemetry(g, state, test, grammar if config.grammar_based else None))

    best = state.programs[state.best_index]
    train_mae = float(state.fitness[state.best_index])
    test_mae = mean_absolute_error(best, test.inputs, test.targets)
    judged = test_mae if config.success_on == "test" else train_mae
    eff, total = effective_size(best)
    return RunRecord(
        config=config.to_dict(),
        benchmark=train.name,
        best_program=best.to_dict(),
        best_program_text=best.to_text(),
        best_expression=decode_expression(best),
        train_mae=train_mae,
        test_mae=test_mae,
        success=bool(judged < config.success_threshold),
        effective_size=eff,
        total_size=total,
        telemetry=telemetry,
        final_probabilities=[list(map(float, r.probs)) for r in grammar.rules]
        if config.grammar_based else None,
        grammar_labels=[[r.lhs, [str(p) for p in r.productions]] for r in grammar.rules],
        wall_seconds=time.perf_counter() - started,
    )
