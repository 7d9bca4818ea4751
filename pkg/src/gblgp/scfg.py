"""Stochastic context-free grammars that derive linear register programs.

Each rule carries a probability vector over its productions. Sampling walks a
leftmost derivation from the start rule and emits one instruction per
derivation step, after the instructions of its sub-derivations, so every
sampled program is pure effective code. Every instruction remembers the
(rule, production) pair that produced it, which is what the probability update
counts.

Grammar DSL, one rule per line::

    Exp := Exp + Term | Exp - Term | Term | probs 0.33 0.33 0.33
    Factor := sin(Arg) | (Exp) | Num | probs 0.2 0.4 0.4
    X := x1 | ... | xD | probs ...

``#`` starts a comment. ``x1 | ... | xD`` expands to the input variables of the
problem at parse time, with a uniform distribution.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .program import (
    BINARY_OPS,
    OPS_BY_SYMBOL,
    UNARY_OPS,
    Instruction,
    Operand,
    Program,
    ProductionId,
    operand_expr,
    render,
)

GRAMMAR_DIR = Path(__file__).parent / "grammars"
BUILTIN_GRAMMARS = {
    "nguyen": "nguyen.scfg",
    "extended": "extended.scfg",
    "example": "example.scfg",
}

SUM_TOL = 1e-9
MAX_SAMPLE_RETRIES = 25


class GrammarError(ValueError):
    """Malformed grammar text or inconsistent grammar structure."""


class SamplingError(RuntimeError):
    """No admissible production left under the sampling budget."""


@dataclass(frozen=True)
class Production:
    """One right-hand side, pre-classified into the instruction it emits.

    ``slots`` holds one entry per operand of the emitted instruction: a rule
    index for a non-terminal or an :class:`Operand` for an inline terminal.
    """

    symbols: tuple[str, ...]
    kind: str  # binary | unary | passthrough | bracket | terminal
    op: str
    slots: tuple

    @property
    def children(self) -> tuple[int, ...]:
        return tuple(s for s in self.slots if isinstance(s, int))

    @property
    def splits(self) -> bool:
        """True when the right operand needs a fresh register."""
        return len(self.children) == 2

    @property
    def recursive(self) -> bool:
        return bool(self.children)

    def __str__(self):
        return " ".join(self.symbols)


@dataclass(frozen=True)
class Rule:
    lhs: str
    productions: tuple[Production, ...]
    probs: tuple[float, ...]


@dataclass(frozen=True)
class Grammar:
    rules: tuple[Rule, ...]
    start: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        for rule in self.rules:
            if len(rule.probs) != len(rule.productions):
                raise GrammarError(f"rule {rule.lhs}: {len(rule.productions)} productions, "
                                   f"{len(rule.probs)} probabilities")
            if any(p < 0 for p in rule.probs):
                raise GrammarError(f"rule {rule.lhs}: negative probability")
            if abs(sum(rule.probs) - 1.0) > SUM_TOL:
                raise GrammarError(f"rule {rule.lhs}: probabilities sum to {sum(rule.probs)}")
            for prod in rule.productions:
                if any(c >= len(self.rules) for c in prod.children):
                    raise GrammarError(f"rule {rule.lhs}: production refers to a missing rule")

    # -- structure ---------------------------------------------------------

    def __len__(self):
        return len(self.rules)

    def rule_index(self, lhs: str) -> int:
        for i, rule in enumerate(self.rules):
            if rule.lhs == lhs:
                return i
        raise KeyError(lhs)

    def production(self, pid) -> Production:
        return self.rules[pid[0]].productions[pid[1]]

    @property
    def probabilities(self) -> list[np.ndarray]:
        return [np.array(r.probs) for r in self.rules]

    def with_probabilities(self, probs: Sequence[Sequence[float]]) -> "Grammar":
        rules = tuple(
            Rule(r.lhs, r.productions, tuple(float(p) for p in ps))
            for r, ps in zip(self.rules, probs, strict=True)
        )
        return Grammar(rules, self.start)

    @property
    def input_dimension(self) -> int:
        """Number of input variables the grammar can emit (highest ``xd`` index)."""
        return 1 + max(
            (s.value for r in self.rules for p in r.productions for s in p.slots
             if isinstance(s, Operand) and s.kind == "input"),
            default=-1,
        )

    @property
    def operators(self) -> tuple[str, ...]:
        """Binary and unary operators some production emits, in grammar order."""
        seen = []
        for r in self.rules:
            for p in r.productions:
                if p.op in BINARY_OPS + UNARY_OPS and p.op not in seen:
                    seen.append(p.op)
        return tuple(seen)

    @property
    def constants(self) -> tuple[float, ...]:
        return tuple(
            s.value for r in self.rules for p in r.productions for s in p.slots
            if isinstance(s, Operand) and s.kind == "constant"
        )

    @cached_property
    def min_depth(self) -> tuple[float, ...]:
        """Fewest derivation levels any complete derivation of each rule needs."""
        depth = [math.inf] * len(self.rules)
        changed = True
        while changed:
            changed = False
            for i, rule in enumerate(self.rules):
                for prod in rule.productions:
                    d = 1 + max((depth[k] for k in prod.children), default=0)
                    if d < depth[i]:
                        depth[i] = d
                        changed = True
        return tuple(depth)

    @cached_property
    def min_cost(self) -> tuple[float, ...]:
        """Fewest instructions any complete derivation of each rule needs."""
        cost = [math.inf] * len(self.rules)
        changed = True
        while changed:
            changed = False
            for i, rule in enumerate(self.rules):
                for prod in rule.productions:
                    c = 1 + sum(cost[k] for k in prod.children)
                    if c < cost[i]:
                        cost[i] = c
                        changed = True
        return tuple(cost)

    def to_text(self) -> str:
        lines = []
        for r in self.rules:
            prods = " | ".join(str(p) for p in r.productions)
            probs = " ".join(repr(float(p)) for p in r.probs)
            lines.append(f"{r.lhs} := {prods} | probs {probs}")
        return "\n".join(lines) + "\n"

    # -- production lookup used when mutation rewrites instructions ----------

    @cached_property
    def _plan(self) -> tuple:
        # per production: (instructions reserved, depth needed, needs a fresh register)
        cost, depth = self.min_cost, self.min_depth
        return tuple(
            tuple((1 + sum(cost[c] for c in p.children),
                   1 + max((depth[c] for c in p.children), default=0),
                   p.splits) for p in r.productions)
            for r in self.rules
        )

    @cached_property
    def _lookup(self) -> dict:
        table: dict = {}
        for i, rule in enumerate(self.rules):
            for j, prod in enumerate(rule.productions):
                pid = ProductionId(i, j)
                if prod.kind == "terminal":
                    table.setdefault(("load", prod.slots[0]), pid)
                elif prod.kind in ("passthrough", "bracket"):
                    table.setdefault(("identity", prod.slots[0]), pid)
                else:
                    shape = tuple("nt" if isinstance(s, int) else s for s in prod.slots)
                    table.setdefault((prod.op, shape), pid)
                    table.setdefault((prod.op,), pid)
        return table

    def lookup_operator(self, ins: Instruction) -> ProductionId | None:
        """Production emitting the operator of a non-identity instruction."""
        if ins.op == "load":
            return self._lookup.get(("load", ins.args[0]))
        shape = tuple("nt" if a.kind == "register" else a for a in ins.args)
        return self._lookup.get((ins.op, shape)) or self._lookup.get((ins.op,))

    def lookup_passthrough(self, child_rule: int) -> ProductionId | None:
        """First pass-through (or bracket) production whose body is ``child_rule``."""
        return self._lookup.get(("identity", child_rule))


# --- parsing ----------------------------------------------------------------

_TOKEN = re.compile(r"\.\.\.|[A-Za-z_][A-Za-z_0-9]*|\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+|[-+*/()]|\S")
_NUMBER = re.compile(r"\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+")
_INPUT = re.compile(r"x(\d+)")


def _terminal(token: str) -> Operand | None:
    if _NUMBER.fullmatch(token):
        return Operand.const(float(token))
    if m := _INPUT.fullmatch(token):
        if int(m.group(1)) < 1:
            raise ValueError("input names start at x1")
        return Operand.inp(int(m.group(1)) - 1)
    return None


def _classify(tokens: list[str], names: dict[str, int]) -> Production:
    def slot(tok):
        if tok in names:
            return names[tok]
        term = _terminal(tok)
        if term is None:
            raise ValueError(f"unknown non-terminal {tok!r}")
        return term

    sym = tuple(tokens)
    if len(tokens) == 1:
        s = slot(tokens[0])
        if isinstance(s, int):
            return Production(sym, "passthrough", "identity", (s,))
        return Production(sym, "terminal", "load", (s,))
    if len(tokens) == 3 and tokens[1] in OPS_BY_SYMBOL:
        return Production(sym, "binary", OPS_BY_SYMBOL[tokens[1]], (slot(tokens[0]), slot(tokens[2])))
    if len(tokens) == 3 and tokens[0] == "(" and tokens[2] == ")":
        s = slot(tokens[1])
        if not isinstance(s, int):
            raise ValueError("brackets must enclose a non-terminal")
        return Production(sym, "bracket", "identity", (s,))
    if len(tokens) == 4 and tokens[0] in UNARY_OPS and tokens[1] == "(" and tokens[3] == ")":
        return Production(sym, "unary", tokens[0], (slot(tokens[2]),))
    raise ValueError(f"unsupported production shape {' '.join(tokens)!r}")


def _parse_probs(tokens: list[str], n: int, lineno: int) -> list[float]:
    if tokens in ([], ["..."], ["uniform"]):
        return [1.0 / n] * n
    try:
        values = [float(t) for t in tokens]
    except ValueError:
        raise GrammarError(f"line {lineno}: probabilities must be numbers") from None
    if len(values) != n:
        raise GrammarError(f"line {lineno}: {n} productions but {len(values)} probabilities")
    if any(v < 0 for v in values):
        raise GrammarError(f"line {lineno}: negative probability")
    total = sum(values)
    if total <= 0:
        raise GrammarError(f"line {lineno}: probabilities sum to zero")
    if abs(total - 1.0) <= SUM_TOL:
        return values
    return [v / total for v in values]


def parse_grammar(text: str, dimension: int | None = None) -> Grammar:
    """Parse grammar DSL text; rules keep file order and the first rule is the start.

    Probabilities are renormalized to sum to one unless they already do
    within :data:`SUM_TOL`, which keeps text round trips exact. ``dimension`` is required
    when the text uses the ``x1 | ... | xD`` input shorthand.
    """
    raw_rules = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.match(r"^([A-Za-z_][A-Za-z_0-9]*)\s*(?::=|=:)\s*(.*)$", line)
        if not m:
            raise GrammarError(f"line {lineno}: expected 'LHS := ...'")
        lhs, body = m.groups()
        parts = [p.strip() for p in body.split("|")]
        probs_tokens = None
        if parts and parts[-1].startswith("probs"):
            probs_tokens = parts.pop()[len("probs"):].split()
        alternatives = [_TOKEN.findall(p) for p in parts if p]
        if not alternatives:
            raise GrammarError(f"line {lineno}: rule {lhs} has no productions")
        if ["..."] in alternatives:
            if dimension is None:
                raise GrammarError(f"line {lineno}: input shorthand '...' needs a problem dimension")
            alternatives = [[f"x{d}"] for d in range(1, dimension + 1)]
            probs_tokens = []
        if any(r[0] == lhs for r in raw_rules):
            raise GrammarError(f"line {lineno}: duplicate rule {lhs}")
        probs = _parse_probs(probs_tokens or [], len(alternatives), lineno) if probs_tokens is not None \
            else [1.0 / len(alternatives)] * len(alternatives)
        raw_rules.append((lhs, alternatives, probs, lineno))

    if not raw_rules:
        raise GrammarError("grammar has no rules")
    names = {lhs: i for i, (lhs, *_rest) in enumerate(raw_rules)}
    rules = []
    for lhs, alternatives, probs, lineno in raw_rules:
        try:
            prods = tuple(_classify(tokens, names) for tokens in alternatives)
        except ValueError as exc:
            raise GrammarError(f"line {lineno}: {exc}") from None
        rules.append(Rule(lhs, prods, tuple(probs)))
    grammar = Grammar(tuple(rules), 0)
    if math.isinf(grammar.min_cost[grammar.start]):
        raise GrammarError("start rule has no terminating derivation")
    return grammar


def load_grammar(path_or_name: str | Path, dimension: int | None = None) -> Grammar:
    """Load a grammar file, or one of the bundled grammars by name."""
    name = str(path_or_name)
    path = GRAMMAR_DIR / BUILTIN_GRAMMARS[name] if name in BUILTIN_GRAMMARS else Path(name)
    return parse_grammar(path.read_text(), dimension)


# --- sampling ---------------------------------------------------------------

@dataclass(frozen=True)
class SamplerBudget:
    """Limits applied while sampling.

    ``max_depth`` optionally bounds the derivation-tree depth (pass-through
    steps included); ``None`` leaves depth bounded only by the registers and
    the instruction budget.
    """

    register_count: int = 13
    max_instructions: int = 200
    max_depth: int | None = None

    def __post_init__(self):
        if self.register_count < 1:
            raise ValueError("register_count must be positive")
        if self.max_instructions < 1:
            raise ValueError("max_instructions must be positive")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive")


class _Derivation:
    def __init__(self, grammar: Grammar, budget: SamplerBudget, choose):
        self.grammar = grammar
        self.budget = budget
        self.choose = choose
        self.out: list[Instruction] = []
        self.reserved = 0
        self.cost = grammar.min_cost
        self.plan = grammar._plan

    def admissible(self, rule: int, k: int, depth: int) -> list[bool]:
        avail = self.budget.max_instructions - len(self.out) - self.reserved
        levels = math.inf if self.budget.max_depth is None else self.budget.max_depth - depth
        no_split = k + 1 >= self.budget.register_count
        return [need <= avail and deep <= levels and not (splits and no_split)
                for need, deep, splits in self.plan[rule]]

    def derive(self, rule: int, k: int, depth: int = 0):
        # the caller reserved min_cost[rule] for this call
        self.reserved -= self.cost[rule]
        mask = self.admissible(rule, k, depth)
        if not any(mask):
            raise SamplingError(f"no admissible production for {self.grammar.rules[rule].lhs}")
        j = self.choose(rule, mask)
        prod = self.grammar.rules[rule].productions[j]
        pid = ProductionId(rule, j)
        self.reserved += self.plan[rule][j][0]

        args = []
        nt_seen = 0
        for s in prod.slots:
            if isinstance(s, int):
                reg = k + nt_seen
                self.derive(s, reg, depth + 1)
                args.append(Operand.reg(reg))
                nt_seen += 1
            else:
                args.append(s)
        self.reserved -= 1
        if prod.kind == "terminal":
            self.out.append(Instruction(k, "load", (args[0],), pid))
        elif prod.kind in ("passthrough", "bracket"):
            self.out.append(Instruction(k, "identity", (Operand.reg(k),), pid))
        else:
            self.out.append(Instruction(k, prod.op, tuple(args), pid))

    def run(self) -> Program:
        start = self.grammar.start
        self.reserved = self.cost[start]
        self.derive(start, 0)
        return Program(tuple(self.out), self.budget.register_count)


class _Chooser:
    """Draws masked, renormalized production choices from a block-buffered stream."""

    BLOCK = 64

    def __init__(self, grammar: Grammar, rng: np.random.Generator):
        self.probs = [r.probs for r in grammar.rules]
        self.rng = rng
        self.buf: list[float] = []

    def __call__(self, rule: int, mask: list[bool]) -> int:
        w = [p if ok else 0.0 for p, ok in zip(self.probs[rule], mask)]
        total = sum(w)
        if total <= 0:
            # every admissible production has zero probability: uniform over them
            w = [1.0 if ok else 0.0 for ok in mask]
            total = sum(w)
        if not self.buf:
            self.buf = self.rng.random(self.BLOCK).tolist()
        u = self.buf.pop() * total
        last = 0
        for j, wj in enumerate(w):
            if wj > 0:
                last = j
                u -= wj
                if u < 0:
                    return j
        return last


def try_sample_program(grammar: Grammar, budget: SamplerBudget, rng: np.random.Generator) -> Program:
    """One sampling attempt; raises :class:`SamplingError` when the budget runs dry."""
    return _Derivation(grammar, budget, _Chooser(grammar, rng)).run()


def sample_program(grammar: Grammar, budget: SamplerBudget, rng: np.random.Generator) -> Program:
    """Sample a tagged program, retrying on budget exhaustion.

    After :data:`MAX_SAMPLE_RETRIES` failed attempts a single load of a random
    terminal is returned.
    """
    for _ in range(MAX_SAMPLE_RETRIES):
        try:
            return try_sample_program(grammar, budget, rng)
        except SamplingError:
            continue
    terminals = [ProductionId(i, j) for i, r in enumerate(grammar.rules)
                 for j, p in enumerate(r.productions) if p.kind == "terminal"]
    pid = terminals[int(rng.integers(len(terminals)))]
    operand = grammar.production(pid).slots[0]
    return Program((Instruction(0, "load", (operand,), pid),), budget.register_count)


def derive_program(grammar: Grammar, choices: Iterable[int], budget: SamplerBudget | None = None) -> Program:
    """Build the program for a fixed sequence of production choices (leftmost order)."""
    it = iter(choices)
    budget = budget or SamplerBudget(register_count=64, max_instructions=1 << 20)

    def choose(rule, mask):
        j = next(it)
        if not mask[j]:
            raise SamplingError(f"forced production ({rule},{j}) is not admissible")
        return j

    return _Derivation(grammar, budget, choose).run()


def replay_derivation(program: Program, grammar: Grammar):
    """Rebuild the expression tree from the production tags alone.

    The tags are read as a postorder walk of the derivation tree; register
    contents are never consulted.
    """
    stack: list = []
    for ins in program.instructions:
        if ins.production is None:
            raise ValueError("program has untracked instructions")
        prod = grammar.production(ins.production)
        n = len(prod.children)
        kids = stack[len(stack) - n:] if n else []
        del stack[len(stack) - n:]
        it = iter(kids)
        parts = [next(it) if isinstance(s, int) else operand_expr(s) for s in prod.slots]
        if prod.kind == "binary":
            stack.append(("bin", prod.symbols[1], parts[0], parts[1]))
        elif prod.kind == "unary":
            stack.append(("call", prod.op, parts[0]))
        else:
            stack.append(parts[0])
    if len(stack) != 1:
        raise ValueError("tags do not form a single derivation")
    return stack[0]


def replay_expression(program: Program, grammar: Grammar) -> str:
    return render(replay_derivation(program, grammar))


# --- learning ---------------------------------------------------------------

@dataclass(frozen=True)
class ProportionTable:
    proportions: tuple[np.ndarray, ...]
    counts: tuple[np.ndarray, ...]

    @property
    def used(self) -> tuple[bool, ...]:
        return tuple(bool(c.sum() > 0) for c in self.counts)


def usage_proportions(programs: Iterable[Program], grammar: Grammar) -> ProportionTable:
    """Pooled production-usage frequencies over all tagged instructions."""
    counts = [np.zeros(len(r.productions)) for r in grammar.rules]
    for program in programs:
        for ins in program.instructions:
            if ins.production is None:
                continue
            i, j = ins.production
            if not (0 <= i < len(counts) and 0 <= j < len(counts[i])):
                raise ValueError(f"production tag {tuple(ins.production)} is outside the grammar")
            counts[i][j] += 1
    props = tuple(c / c.sum() if c.sum() > 0 else np.zeros_like(c) for c in counts)
    return ProportionTable(props, tuple(counts))


def update_probabilities(grammar: Grammar, prop: ProportionTable, alpha: float) -> Grammar:
    """PBIL-style blend of each used rule's distribution towards its usage proportions."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if len(prop.proportions) != len(grammar.rules):
        raise ValueError("proportion table does not match the grammar")
    new = []
    for rule, p, used in zip(grammar.rules, prop.proportions, prop.used):
        old = np.array(rule.probs)
        if not used:
            new.append(old)
            continue
        if alpha == 1.0:
            new.append(p.copy())
        elif alpha == 0.0:
            new.append(old)
        else:
            blended = (1.0 - alpha) * old + alpha * p
            new.append(blended / blended.sum())
    return grammar.with_probabilities(new)
