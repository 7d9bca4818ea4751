"""
Comparing the four algorithms
=============================

A reduced version of the nguyen1 experiment: a handful of seeds and fewer
generations, so it finishes in under a minute. The full-size comparison
lives in the acceptance tests and in ``gblgp run``.
"""

from gblgp import analysis
from gblgp.benchmarks import generate_dataset
from gblgp.evolution import ALGORITHMS, AlgorithmConfig, run
from gblgp.scfg import load_grammar

SEEDS = range(4)
grammar = load_grammar("nguyen", 1)

records = {}
for algorithm in ALGORITHMS:
    records[algorithm] = []
    for seed in SEEDS:
        train = generate_dataset("nguyen1", "train", seed)
        test = generate_dataset("nguyen1", "test", seed)
        config = AlgorithmConfig(algorithm=algorithm, generations=30, seed=seed)
        records[algorithm].append(run(config, grammar, train, test))

summaries, tests = analysis.aggregate(records)
print(analysis.format_table(summaries, tests))

# Effective-code share of the population, averaged over seeds, every 5th generation.
print("\nmean effective code (%)")
for algorithm, recs in records.items():
    curve = [sum(r.telemetry[g].mean_effective_pct for r in recs) / len(recs) for g in range(0, 30, 5)]
    print(f"{algorithm:>8}: " + " ".join(f"{v:5.1f}" for v in curve))
