"""Effective macro/micro mutation, random initialization, and production re-association.

Mutations only touch effective code: micro-mutations and deletions pick an
effective instruction, and insertions choose a destination register that is
read later by effective code. When a grammar is supplied, every rewritten
instruction is re-tagged with the production that now describes it; effects on
neighbouring instructions' tags are deliberately not propagated.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .program import (
    BINARY_OPS,
    UNARY_OPS,
    Instruction,
    Operand,
    Program,
    ProductionId,
    effective_mask,
)
from .scfg import Grammar


@dataclass(frozen=True)
class MutationConfig:
    macro_rate: float = 0.75
    insertion_prob: float = 0.66
    deletion_prob: float = 0.33
    micro_rate: float = 0.25
    min_size: int = 1
    max_size: int = 200
    constant_pool: tuple[float, ...] = tuple(float(c) for c in range(1, 10))
    operator_pool: tuple[str, ...] = ("add", "sub", "mul", "div")
    input_count: int = 1
    register_operand_prob: float = 0.5
    constant_operand_prob: float = 0.25

    def __post_init__(self):
        for name in ("macro_rate", "insertion_prob", "deletion_prob", "micro_rate",
                     "register_operand_prob", "constant_operand_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.insertion_prob + self.deletion_prob <= 0:
            raise ValueError("insertion_prob and deletion_prob cannot both be zero")
        if not 1 <= self.min_size <= self.max_size:
            raise ValueError("need 1 <= min_size <= max_size")
        if not self.operator_pool:
            raise ValueError("operator_pool is empty")
        bad = set(self.operator_pool) - set(BINARY_OPS + UNARY_OPS + ("load",))
        if bad:
            raise ValueError(f"unsupported operators in pool: {sorted(bad)}")

    @property
    def insertion_share(self) -> float:
        return self.insertion_prob / (self.insertion_prob + self.deletion_prob)

    @classmethod
    def for_grammar(cls, grammar: Grammar, **overrides) -> "MutationConfig":
        """Operators, constants and inputs taken from what the grammar can emit."""
        params = dict(
            operator_pool=grammar.operators + ("load",),
            constant_pool=tuple(sorted(set(grammar.constants))) or cls.constant_pool,
            input_count=max(grammar.input_dimension, 1),
        )
        params.update(overrides)
        return cls(**params)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in self.__dict__.items()}


# --- random code ------------------------------------------------------------

def random_operand(config: MutationConfig, register_count: int, rng: np.random.Generator) -> Operand:
    u = rng.random()
    if u < config.register_operand_prob:
        return Operand.reg(int(rng.integers(register_count)))
    if u < config.register_operand_prob + config.constant_operand_prob:
        return Operand.const(config.constant_pool[int(rng.integers(len(config.constant_pool)))])
    return Operand.inp(int(rng.integers(config.input_count)))


def random_instruction(config: MutationConfig, register_count: int, rng: np.random.Generator,
                       dest: int | None = None) -> Instruction:
    op = config.operator_pool[int(rng.integers(len(config.operator_pool)))]
    if dest is None:
        dest = int(rng.integers(register_count))
    arity = 2 if op in BINARY_OPS else 1
    args = tuple(random_operand(config, register_count, rng) for _ in range(arity))
    if op == "load" and args[0] == Operand.reg(dest):
        op = "identity"
    return Instruction(dest, op, args)


def random_program(config: MutationConfig, register_count: int, size: int,
                   rng: np.random.Generator) -> Program:
    """``size`` uniformly random, untracked instructions."""
    if not config.min_size <= size <= config.max_size:
        raise ValueError(f"size {size} outside [{config.min_size}, {config.max_size}]")
    return Program(
        tuple(random_instruction(config, register_count, rng) for _ in range(size)),
        register_count,
    )


# --- production re-association ----------------------------------------------

def reassociate(instruction: Instruction, grammar: Grammar,
                context: Sequence[Instruction] = ()) -> ProductionId | None:
    """Production that best explains ``instruction``, or ``None`` when untracked.

    Identities are resolved through the most recent instruction in ``context``
    that wrote the same register: the pass-through production whose body is
    that instruction's rule is chosen.
    """
    if instruction.op != "identity":
        if instruction.op == "load" and instruction.args[0].kind == "register":
            return None
        return grammar.lookup_operator(instruction)
    reg = instruction.dest
    for pos in range(len(context) - 1, -1, -1):
        prev = context[pos]
        if prev.dest != reg:
            continue
        tag = prev.production
        if tag is None:
            tag = reassociate(prev, grammar, context[:pos])
        if tag is None:
            return None
        return grammar.lookup_passthrough(tag.rule)
    return None


def _retag(ins: Instruction, grammar: Grammar | None, context: Sequence[Instruction]) -> Instruction:
    tag = reassociate(ins, grammar, context) if grammar is not None else None
    return ins.replace(production=tag)


# --- macro mutation -----------------------------------------------------------

def _live_in(program: Program) -> list[set[int]]:
    """live[p]: registers read by effective code at or after p before being rewritten."""
    instructions = program.instructions
    live = {instructions[-1].dest}
    out = [set() for _ in instructions]
    for pos in range(len(instructions) - 1, -1, -1):
        ins = instructions[pos]
        if ins.dest in live:
            live.discard(ins.dest)
            live.update(ins.sources)
        out[pos] = set(live)
    return out


def insert_instruction(program: Program, config: MutationConfig, rng: np.random.Generator,
                       grammar: Grammar | None = None) -> Program:
    """Insert one random instruction whose result is used by effective code."""
    register_count = program.register_count
    instructions = list(program.instructions)
    # inserting before position p: the new dest must be live on entry to p
    live = _live_in(program)
    candidates = [p for p in range(len(instructions)) if live[p]]
    if candidates:
        pos = candidates[int(rng.integers(len(candidates)))]
        regs = sorted(live[pos])
        dest = regs[int(rng.integers(len(regs)))]
    else:
        pos = len(instructions)
        dest = program.output_register
    new = random_instruction(config, register_count, rng, dest=dest)
    new = _retag(new, grammar, instructions[:pos])
    instructions.insert(pos, new)
    return Program(tuple(instructions), register_count)


def delete_instruction(program: Program, rng: np.random.Generator) -> Program:
    """Remove one uniformly chosen effective instruction."""
    effective = [p for p, m in enumerate(effective_mask(program)) if m]
    pos = effective[int(rng.integers(len(effective)))]
    return program.replace_instructions(
        ins for p, ins in enumerate(program.instructions) if p != pos
    )


def macro_mutate(program: Program, config: MutationConfig, rng: np.random.Generator,
                 grammar: Grammar | None = None) -> Program:
    insert = rng.random() < config.insertion_share
    if insert and len(program) >= config.max_size:
        insert = False
    if insert:
        return insert_instruction(program, config, rng, grammar)
    if len(program) <= config.min_size:
        return program
    return delete_instruction(program, rng)


# --- micro mutation -----------------------------------------------------------

def _element_kinds(ins: Instruction, config: MutationConfig) -> list[str]:
    kinds = ["dest"]
    if ins.op in BINARY_OPS:
        if any(o in BINARY_OPS and o != ins.op for o in config.operator_pool):
            kinds.append("op")
    elif ins.op in UNARY_OPS:
        if any(o in UNARY_OPS and o != ins.op for o in config.operator_pool):
            kinds.append("op")
    kinds.append("operand")
    return kinds


def _copy_kind(dest: int, operand: Operand, op: str) -> str:
    if op not in ("load", "identity"):
        return op
    return "identity" if operand == Operand.reg(dest) else "load"


def mutate_element(program: Program, position: int, element: str, config: MutationConfig,
                   rng: np.random.Generator, grammar: Grammar | None = None) -> Program:
    """Replace one element of the instruction at ``position`` with a different value.

    ``element`` is ``"dest"``, ``"op"``, or ``"operand"``. The instruction is
    re-tagged afterwards when ``grammar`` is given.
    """
    ins = program.instructions[position]
    register_count = program.register_count
    if element == "dest":
        choices = [r for r in range(register_count) if r != ins.dest]
        dest = choices[int(rng.integers(len(choices)))]
        new = Instruction(dest, _copy_kind(dest, ins.args[0], ins.op), ins.args)
    elif element == "op":
        same = BINARY_OPS if ins.op in BINARY_OPS else UNARY_OPS
        choices = [o for o in config.operator_pool if o in same and o != ins.op]
        new = Instruction(ins.dest, choices[int(rng.integers(len(choices)))], ins.args)
    elif element == "operand":
        slot = int(rng.integers(len(ins.args)))
        current = ins.args[slot]
        operand = random_operand(config, register_count, rng)
        while operand == current:
            operand = random_operand(config, register_count, rng)
        args = list(ins.args)
        args[slot] = operand
        new = Instruction(ins.dest, _copy_kind(ins.dest, operand, ins.op), tuple(args))
    else:
        raise ValueError(f"unknown element {element!r}")
    new = _retag(new, grammar, program.instructions[:position])
    instructions = list(program.instructions)
    instructions[position] = new
    return Program(tuple(instructions), register_count)


def micro_mutate(program: Program, config: MutationConfig, rng: np.random.Generator,
                 grammar: Grammar | None = None) -> Program:
    effective = [p for p, m in enumerate(effective_mask(program)) if m]
    pos = effective[int(rng.integers(len(effective)))]
    kinds = _element_kinds(program.instructions[pos], config)
    return mutate_element(program, pos, kinds[int(rng.integers(len(kinds)))], config, rng, grammar)


def vary(program: Program, config: MutationConfig, rng: np.random.Generator,
         grammar: Grammar | None = None) -> Program:
    """Apply macro and/or micro mutation at the configured rates; at least one fires."""
    macro = rng.random() < config.macro_rate
    micro = rng.random() < config.micro_rate
    if not (macro or micro):
        macro = True
    if macro:
        program = macro_mutate(program, config, rng, grammar)
    if micro:
        program = micro_mutate(program, config, rng, grammar)
    return program
