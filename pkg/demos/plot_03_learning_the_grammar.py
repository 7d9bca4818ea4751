"""
Learning production probabilities
=================================

Every generation the grammar moves a step of size alpha towards the
production usage of the best few programs. Here we watch the Term rule
while GB-LGP works on x^3 + x^2 + x.
"""

from gblgp.benchmarks import generate_dataset
from gblgp.evolution import AlgorithmConfig, run
from gblgp.scfg import load_grammar

grammar = load_grammar("nguyen", 1)
train = generate_dataset("nguyen1", "train", seed=0)
test = generate_dataset("nguyen1", "test", seed=0)

config = AlgorithmConfig(algorithm="gblgp", generations=30, seed=0)
record = run(config, grammar, train, test)

term = grammar.rule_index("Term")
labels = [str(p) for p in grammar.rules[term].productions]
print("generation  " + "  ".join(f"{label:>15}" for label in labels) + "   best train MAE")
for t in record.telemetry[::5]:
    probs = t.probabilities[term]
    print(f"{t.generation:>10}  " + "  ".join(f"{p:15.3f}" for p in probs) + f"   {t.best_train_mae:.3g}")

print("\nbest program:", record.best_expression)
print("test MAE:", record.test_mae, "success:", record.success)
