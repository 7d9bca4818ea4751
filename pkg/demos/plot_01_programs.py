"""
Linear programs and effective code
==================================

A program is a list of register instructions. The output is whatever the
last instruction writes; anything that cannot reach it is an intron.
"""

import numpy as np

from gblgp.program import decode_expression, effective_mask, evaluate, execute, parse_program

# The four-instruction program for x^2 + x. Instruction 2 writes r[0],
# which nothing reads afterwards.
program = parse_program("""
0: r[1] = x1 * 1
1: r[2] = x1 * r[1]
2: r[0] = r[2] + 3
3: r[4] = r[2] + r[1]
""")
print(program.to_text())
print("f(2) =", evaluate(program, [2.0]))
print("effective:", effective_mask(program))
print("decoded: ", decode_expression(program))

# Evaluation is vectorised over cases; introns are skipped.
x = np.linspace(-1, 1, 5).reshape(-1, 1)
print("outputs:", execute(program, x))

# Protected operators keep everything finite: division by ~0 gives 1,
# ln works on |x| and ln(0) is 0, exp is capped.
for text in ("r[0] = x1 / 0", "r[0] = ln(x1)", "r[0] = exp(x1)"):
    print(text, "->", evaluate(parse_program(text), [0.0 if "exp" not in text else 500.0]))
