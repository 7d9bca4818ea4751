"""Grammar-based linear genetic programming for symbolic regression.

Programs are register-machine instruction lists; a stochastic context-free
grammar is sampled into such programs and re-estimated from the best ones.
"""

from .analysis import aggregate, descriptive_stats, wilcoxon_rank_sum
from .benchmarks import BENCHMARKS, Dataset, generate_dataset, get_benchmark, target_value
from .evolution import AlgorithmConfig, RunRecord, run
from .program import (
    Instruction,
    Operand,
    Program,
    decode_expression,
    effective_mask,
    evaluate,
    evaluate_dataset,
    parse_program,
)
from .scfg import (
    Grammar,
    SamplerBudget,
    derive_program,
    load_grammar,
    parse_grammar,
    sample_program,
    update_probabilities,
    usage_proportions,
)
from .variation import MutationConfig, macro_mutate, micro_mutate, random_program, reassociate

__version__ = "0.1.0"

__all__ = [
    "AlgorithmConfig", "BENCHMARKS", "Dataset", "Grammar", "Instruction", "MutationConfig",
    "Operand", "Program", "RunRecord", "SamplerBudget", "aggregate", "decode_expression",
    "derive_program", "descriptive_stats", "effective_mask", "evaluate", "evaluate_dataset",
    "generate_dataset", "get_benchmark", "load_grammar", "macro_mutate", "micro_mutate",
    "parse_grammar", "parse_program", "random_program", "reassociate", "run", "sample_program",
    "target_value", "update_probabilities", "usage_proportions", "wilcoxon_rank_sum",
]
