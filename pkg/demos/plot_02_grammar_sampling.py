"""
Sampling programs from a stochastic grammar
===========================================

Each derivation step becomes one instruction, tagged with the production
that produced it. The tags alone are enough to rebuild the expression.
"""

import numpy as np

from gblgp.program import decode_expression
from gblgp.scfg import SamplerBudget, derive_program, load_grammar, replay_expression, sample_program

grammar = load_grammar("nguyen", dimension=1)
print(grammar.to_text())

# Forcing the leftmost choices Exp -> Exp + Term -> ... gives x1 + 1.
# Pass-through steps such as Term -> Factor show up as identity copies.
program = derive_program(grammar, [0, 2, 2, 2, 0, 2, 1, 0])
print(program.to_text())
print("decoded:", decode_expression(program))

# Random samples. The budget caps registers, length and derivation depth.
rng = np.random.default_rng(1)
budget = SamplerBudget(register_count=13, max_instructions=200, max_depth=13)
sizes = []
for _ in range(200):
    p = sample_program(grammar, budget, rng)
    assert replay_expression(p, grammar) == decode_expression(p)
    sizes.append(len(p))
print(f"200 samples: mean length {np.mean(sizes):.1f}, max {max(sizes)}")
print("one of them:", decode_expression(sample_program(grammar, budget, rng)))
