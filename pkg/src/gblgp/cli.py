"""Command-line entry point: batch experiments, reports, grammar utilities.

    gblgp run --manifest experiment.json [--jobs N]
    gblgp report results/
    gblgp grammar-check grammar.scfg [--dimension D]
    gblgp sample --grammar grammar.scfg --seed S

The output directory defaults to ``$GBLGP_OUTPUT_DIR`` (or ``results``) when
the manifest does not name one.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis
from .benchmarks import BENCHMARKS, generate_dataset, get_benchmark
from .evolution import ALGORITHMS, AlgorithmConfig, ConfigError, RunRecord, run
from .program import decode_expression
from .scfg import GrammarError, SamplerBudget, load_grammar, sample_program

OUTPUT_ENV = "GBLGP_OUTPUT_DIR"
RECORDS = "records"
EFFECTIVE_PLOT = "plot_effective_code.csv"
PROBABILITY_PLOT = "plot_probabilities.csv"


@dataclass
class ExperimentManifest:
    benchmarks: list[str]
    algorithms: list[str]
    grammar: str | dict[str, str] = "nguyen"
    runs: int = 1
    base_seed: int = 0
    parameters: dict = field(default_factory=dict)
    output_dir: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentManifest":
        data = dict(data)
        for key in ("benchmark", "algorithm"):
            if key in data:
                value = data.pop(key)
                data[key + "s"] = [value] if isinstance(value, str) else list(value)
        if "seed" in data:
            data["base_seed"] = data.pop("seed")
        known = set(cls.__dataclass_fields__)
        if set(data) - known:
            raise ValueError(f"unknown manifest keys: {sorted(set(data) - known)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def grammar_for(self, benchmark: str) -> str:
        if isinstance(self.grammar, dict):
            return self.grammar[benchmark]
        return self.grammar

    def validate(self) -> None:
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        for b in self.benchmarks:
            get_benchmark(b)
            load_grammar(self.grammar_for(b), get_benchmark(b).dimension)
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}")
        for a in self.algorithms:
            AlgorithmConfig.from_dict({**self.parameters, "algorithm": a})

    def jobs(self):
        for b in self.benchmarks:
            for a in self.algorithms:
                for k in range(self.runs):
                    yield b, a, self.base_seed + k


def record_path(directory: Path, benchmark: str, algorithm: str, seed: int) -> Path:
    return directory / RECORDS / f"{benchmark}__{algorithm}__seed{seed}.json"


def execute_run(benchmark: str, algorithm: str, seed: int, grammar_ref: str,
                parameters: dict) -> RunRecord:
    """One run; the datasets depend only on the benchmark and the seed."""
    spec = get_benchmark(benchmark)
    grammar = load_grammar(grammar_ref, spec.dimension)
    config = AlgorithmConfig.from_dict({**parameters, "algorithm": algorithm, "seed": seed})
    train = generate_dataset(spec, "train", seed)
    test = generate_dataset(spec, "test", seed)
    return run(config, grammar, train, test)


def _job(args) -> tuple[tuple, dict]:
    benchmark, algorithm, seed, grammar_ref, parameters = args
    return (benchmark, algorithm, seed), execute_run(benchmark, algorithm, seed, grammar_ref, parameters).to_dict()


def write_record(path: Path, record: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record, indent=1, sort_keys=True) + "\n")


def load_records(directory: str | Path) -> tuple[list[RunRecord], list[str]]:
    """Parse every record in ``directory/records``; returns (records, problems)."""
    records, problems = [], []
    for path in sorted((Path(directory) / RECORDS).glob("*.json")):
        try:
            records.append(RunRecord.from_dict(json.loads(path.read_text())))
        except (ValueError, KeyError, TypeError) as exc:
            problems.append(f"{path.name}: {exc}")
    return records, problems


# --- plot data ------------------------------------------------------------------

def effective_code_rows(records) -> list[dict]:
    """Mean effective-code percentage per generation, averaged over runs."""
    groups = defaultdict(list)
    for r in records:
        groups[(r.benchmark, r.algorithm)].append([t.mean_effective_pct for t in r.telemetry])
    rows = []
    for (bench, alg), curves in sorted(groups.items()):
        mean = np.mean(np.array(curves), axis=0)
        rows += [{"benchmark": bench, "algorithm": alg, "generation": g,
                  "mean_effective_pct": float(v), "runs": len(curves)} for g, v in enumerate(mean)]
    return rows


def probability_rows(records) -> list[dict]:
    """Production probabilities per generation, averaged over runs."""
    groups = defaultdict(list)
    labels = {}
    for r in records:
        if r.telemetry and r.telemetry[0].probabilities is not None:
            groups[(r.benchmark, r.algorithm)].append([t.probabilities for t in r.telemetry])
            labels[(r.benchmark, r.algorithm)] = r.grammar_labels
    rows = []
    for key, traces in sorted(groups.items()):
        bench, alg = key
        names = labels[key]
        for g in range(len(traces[0])):
            for i, (lhs, prods) in enumerate(names):
                for j, prod in enumerate(prods):
                    value = float(np.mean([t[g][i][j] for t in traces]))
                    rows.append({"benchmark": bench, "algorithm": alg, "generation": g, "rule": i,
                                 "lhs": lhs, "production": j, "label": prod, "probability": value})
    return rows


def rows_to_csv(rows: list[dict], header: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def read_plot_csv(path: str | Path) -> list[dict]:
    numeric = {"generation": int, "runs": int, "rule": int, "production": int,
               "mean_effective_pct": float, "probability": float}
    with open(path, newline="") as fh:
        return [{k: numeric[k](v) if k in numeric else v for k, v in row.items()}
                for row in csv.DictReader(fh)]


def write_outputs(directory: Path, records: list[RunRecord]) -> None:
    by_bench = defaultdict(lambda: defaultdict(list))
    for r in records:
        by_bench[r.benchmark][r.algorithm].append(r)
    summaries, tests = [], []
    for bench in sorted(by_bench):
        methods = {a: sorted(rs, key=lambda r: r.seed)
                   for a, rs in sorted(by_bench[bench].items(), key=lambda kv: ALGORITHMS.index(kv[0]))}
        s, t = analysis.aggregate(methods)
        summaries += s
        tests += t
    analysis.write_tables(directory, summaries, tests)
    (directory / EFFECTIVE_PLOT).write_text(rows_to_csv(
        effective_code_rows(records), ["benchmark", "algorithm", "generation", "mean_effective_pct", "runs"]))
    (directory / PROBABILITY_PLOT).write_text(rows_to_csv(
        probability_rows(records),
        ["benchmark", "algorithm", "generation", "rule", "lhs", "production", "label", "probability"]))


# --- subcommands ------------------------------------------------------------------

def cmd_run(manifest: ExperimentManifest, jobs: int = 1, output: str | None = None) -> int:
    try:
        manifest.validate()
    except (ValueError, KeyError, GrammarError, ConfigError, OSError) as exc:
        print(f"error: invalid manifest: {exc}", file=sys.stderr)
        return 2
    directory = Path(output or manifest.output_dir or os.environ.get(OUTPUT_ENV, "results"))
    (directory / RECORDS).mkdir(parents=True, exist_ok=True)
    work = [(b, a, s, manifest.grammar_for(b), manifest.parameters) for b, a, s in manifest.jobs()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for key, record in pool.map(_job, work):
                write_record(record_path(directory, *key), record)
    else:
        for item in work:
            key, record = _job(item)
            write_record(record_path(directory, *key), record)
    records, _ = load_records(directory)
    wanted = {record_path(directory, b, a, s).name for b, a, s in manifest.jobs()}
    write_outputs(directory, [r for r in records
                              if record_path(directory, r.benchmark, r.algorithm, r.seed).name in wanted])
    print(f"wrote {len(work)} run record(s) and summaries to {directory}")
    return 0


def cmd_report(directory: str | Path) -> int:
    directory = Path(directory)
    records, problems = load_records(directory)
    for problem in problems:
        print(f"warning: skipped {problem}", file=sys.stderr)
    if not records:
        print(f"error: no run records under {directory / RECORDS}", file=sys.stderr)
        return 1
    try:
        write_outputs(directory, records)
    except analysis.AggregationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print((directory / "summary.txt").read_text())
    return 3 if problems else 0


def cmd_grammar_check(path: str, dimension: int | None = None) -> int:
    try:
        grammar = load_grammar(path, dimension)
    except (GrammarError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(grammar.to_text(), end="")
    print(f"# {len(grammar)} rules, start {grammar.rules[grammar.start].lhs}, "
          f"{grammar.input_dimension} input(s), operators {', '.join(grammar.operators) or 'none'}")
    return 0


def cmd_sample(path: str, seed: int, dimension: int = 1, registers: int = 13,
               max_instructions: int = 200, max_depth: int | None = 13) -> int:
    try:
        grammar = load_grammar(path, dimension)
    except (GrammarError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    program = sample_program(grammar, SamplerBudget(registers, max_instructions, max_depth),
                             np.random.default_rng(seed))
    print(program.to_text())
    print(f"# f = {decode_expression(program)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gblgp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute the runs listed in a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output", help="override the manifest's output directory")

    p = sub.add_parser("report", help="rebuild summaries and plot data from stored records")
    p.add_argument("directory")

    p = sub.add_parser("grammar-check", help="parse and validate a grammar file")
    p.add_argument("grammar")
    p.add_argument("--dimension", type=int)

    p = sub.add_parser("sample", help="print one sampled program with production tags")
    p.add_argument("--grammar", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dimension", type=int, default=1)
    p.add_argument("--registers", type=int, default=13)
    p.add_argument("--max-instructions", type=int, default=200)
    p.add_argument("--max-depth", type=int, default=13)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        try:
            manifest = ExperimentManifest.load(args.manifest)
        except (OSError, ValueError, TypeError) as exc:
            print(f"error: cannot read manifest: {exc}", file=sys.stderr)
            return 2
        return cmd_run(manifest, args.jobs, args.output)
    if args.command == "report":
        return cmd_report(args.directory)
    if args.command == "grammar-check":
        return cmd_grammar_check(args.grammar, args.dimension)
    return cmd_sample(args.grammar, args.seed, args.dimension, args.registers,
                      args.max_instructions, args.max_depth)


if __name__ == "__main__":
    sys.exit(main())
