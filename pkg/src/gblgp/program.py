"""Register-machine programs: representation, protected evaluation, effective code.

A program is an ordered sequence of instructions writing into a small register
file. Registers start at 0.0 and the destination of the final instruction holds
the output. Operands are registers, input variables (``x1`` .. ``xD``) or
constants.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

BINARY_OPS = ("add", "sub", "mul", "div")
UNARY_OPS = ("sin", "cos", "exp", "ln")
ALL_OPS = BINARY_OPS + UNARY_OPS + ("load", "identity")

SYMBOLS = {"add": "+", "sub": "-", "mul": "*", "div": "/"}
OPS_BY_SYMBOL = {v: k for k, v in SYMBOLS.items()}

DIV_EPS = 1e-9
LN_EPS = 1e-9
EXP_CAP = 32.0
WORST_FITNESS = 1e12


class ProgramError(ValueError):
    """Structurally malformed program or instruction."""


class ProductionId(NamedTuple):
    rule: int
    production: int


@dataclass(frozen=True)
class Operand:
    kind: str  # "register" | "input" | "constant"
    value: float

    def __post_init__(self):
        if self.kind not in ("register", "input", "constant"):
            raise ProgramError(f"unknown operand kind {self.kind!r}")
        if self.kind != "constant":
            if self.value != int(self.value) or self.value < 0:
                raise ProgramError(f"{self.kind} index must be a non-negative integer")
            object.__setattr__(self, "value", int(self.value))

    @classmethod
    def reg(cls, index: int) -> "Operand":
        if isinstance(index, int) and 0 <= index < len(_REGISTERS):
            return _REGISTERS[index]
        return cls("register", index)

    @classmethod
    def inp(cls, index: int) -> "Operand":
        return cls("input", index)

    @classmethod
    def const(cls, value: float) -> "Operand":
        return cls("constant", value)

    def __str__(self):
        if self.kind == "register":
            return f"r[{self.value}]"
        if self.kind == "input":
            return f"x{self.value + 1}"
        return format_constant(self.value)


_REGISTERS = [Operand("register", i) for i in range(64)]


def format_constant(value: float) -> str:
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


@dataclass(frozen=True)
class Instruction:
    dest: int
    op: str
    args: tuple[Operand, ...]
    production: ProductionId | None = None

    def __post_init__(self):
        if self.op not in ALL_OPS:
            raise ProgramError(f"unknown operator {self.op!r}")
        object.__setattr__(self, "args", tuple(self.args))
        expected = 2 if self.op in BINARY_OPS else 1
        if len(self.args) != expected:
            raise ProgramError(f"{self.op} takes {expected} operand(s), got {len(self.args)}")
        if self.op == "identity" and self.args[0] != Operand.reg(self.dest):
            raise ProgramError("identity instruction must read its own destination register")
        if self.production is not None:
            object.__setattr__(self, "production", ProductionId(*self.production))

    @property
    def sources(self) -> tuple[int, ...]:
        """Register indices read by this instruction."""
        return tuple(a.value for a in self.args if a.kind == "register")

    def replace(self, **changes) -> "Instruction":
        fields = {"dest": self.dest, "op": self.op, "args": self.args, "production": self.production}
        fields.update(changes)
        return Instruction(**fields)

    def __str__(self):
        a = self.args
        if self.op in BINARY_OPS:
            body = f"{a[0]} {SYMBOLS[self.op]} {a[1]}"
        elif self.op in UNARY_OPS:
            body = f"{self.op}({a[0]})"
        else:
            body = str(a[0])
        text = f"r[{self.dest}] = {body}"
        if self.production is not None:
            text += f"  # prod ({self.production.rule},{self.production.production})"
        return text


@dataclass(frozen=True)
class Program:
    instructions: tuple[Instruction, ...]
    register_count: int
    _mask: tuple[bool, ...] | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))
        if not self.instructions:
            raise ProgramError("program must contain at least one instruction")
        if self.register_count < 1:
            raise ProgramError("register_count must be positive")
        for pos, ins in enumerate(self.instructions):
            regs = (ins.dest,) + ins.sources
            if any(r >= self.register_count for r in regs):
                raise ProgramError(
                    f"instruction {pos} references a register >= {self.register_count}: {ins}"
                )

    def __len__(self):
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    @property
    def output_register(self) -> int:
        return self.instructions[-1].dest

    @property
    def max_input_index(self) -> int:
        """Largest input index referenced, or -1 when no input is read."""
        return max(
            (a.value for ins in self.instructions for a in ins.args if a.kind == "input"),
            default=-1,
        )

    def replace_instructions(self, instructions: Iterable[Instruction]) -> "Program":
        return Program(tuple(instructions), self.register_count)

    def to_text(self) -> str:
        return "\n".join(f"{i}: {ins}" for i, ins in enumerate(self.instructions))

    def to_dict(self) -> dict:
        return {
            "register_count": self.register_count,
            "instructions": [
                {
                    "dest": ins.dest,
                    "op": ins.op,
                    "args": [{"kind": a.kind, "value": a.value} for a in ins.args],
                    "production": list(ins.production) if ins.production is not None else None,
                }
                for ins in self.instructions
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "Program":
        instructions = [
            Instruction(
                dest=d["dest"],
                op=d["op"],
                args=tuple(Operand(a["kind"], a["value"]) for a in d["args"]),
                production=tuple(d["production"]) if d.get("production") is not None else None,
            )
            for d in data["instructions"]
        ]
        return cls(tuple(instructions), data["register_count"])

    @classmethod
    def from_json(cls, text: str) -> "Program":
        return cls.from_dict(json.loads(text))


# --- text form ------------------------------------------------------------

_LINE = re.compile(
    r"^\s*(?:\d+\s*:\s*)?r\[(\d+)\]\s*=\s*(.+?)\s*(?:#\s*prod\s*\(\s*(\d+)\s*,\s*(\d+)\s*\)\s*)?$"
)
_OPERAND = r"(r\[\d+\]|x\d+|[-+]?(?:\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?))"


def _parse_operand(token: str) -> Operand:
    token = token.strip()
    if token.startswith("r["):
        return Operand.reg(int(token[2:-1]))
    if token.startswith("x"):
        index = int(token[1:])
        if index < 1:
            raise ProgramError(f"input names start at x1, got {token!r}")
        return Operand.inp(index - 1)
    return Operand.const(float(token))


def parse_program(text: str, register_count: int | None = None) -> Program:
    """Parse the line-oriented text form produced by :meth:`Program.to_text`.

    When ``register_count`` is omitted it is inferred as one more than the
    highest register referenced.
    """
    instructions = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            continue
        m = _LINE.match(raw)
        if not m:
            raise ProgramError(f"line {lineno}: cannot parse {raw!r}")
        dest, body = int(m.group(1)), m.group(2).strip()
        prod = ProductionId(int(m.group(3)), int(m.group(4))) if m.group(3) else None
        if fm := re.fullmatch(r"(sin|cos|exp|ln)\(\s*" + _OPERAND + r"\s*\)", body):
            ins = Instruction(dest, fm.group(1), (_parse_operand(fm.group(2)),), prod)
        elif bm := re.fullmatch(_OPERAND + r"\s*([-+*/])\s*" + _OPERAND, body):
            op = OPS_BY_SYMBOL[bm.group(2)]
            ins = Instruction(dest, op, (_parse_operand(bm.group(1)), _parse_operand(bm.group(3))), prod)
        elif re.fullmatch(_OPERAND, body):
            operand = _parse_operand(body)
            op = "identity" if operand == Operand.reg(dest) else "load"
            ins = Instruction(dest, op, (operand,), prod)
        else:
            raise ProgramError(f"line {lineno}: cannot parse expression {body!r}")
        instructions.append(ins)
    if register_count is None:
        register_count = 1 + max(r for ins in instructions for r in (ins.dest,) + ins.sources)
    return Program(tuple(instructions), register_count)


# --- effective code -------------------------------------------------------

def effective_mask(program: Program) -> list[bool]:
    """Backward liveness pass marking the instructions that reach the output."""
    if program._mask is not None:
        return list(program._mask)
    instructions = program.instructions
    mask = [False] * len(instructions)
    live = {instructions[-1].dest}
    for pos in range(len(instructions) - 1, -1, -1):
        ins = instructions[pos]
        if ins.dest in live:
            mask[pos] = True
            live.discard(ins.dest)
            live.update(ins.sources)
    object.__setattr__(program, "_mask", tuple(mask))
    return mask


def live_registers_before(program: Program, position: int) -> set[int]:
    """Registers read by effective code at or after ``position`` before being overwritten."""
    instructions = program.instructions
    live = {instructions[-1].dest}
    for pos in range(len(instructions) - 1, position - 1, -1):
        ins = instructions[pos]
        if ins.dest in live:
            live.discard(ins.dest)
            live.update(ins.sources)
    return live


def effective_size(program: Program) -> tuple[int, int]:
    """(effective instruction count, total instruction count)."""
    return sum(effective_mask(program)), len(program)


def effective_percentage(program: Program) -> float:
    eff, total = effective_size(program)
    return 100.0 * eff / total


def strip_introns(program: Program) -> Program:
    """Drop non-effective instructions; the output is unchanged."""
    mask = effective_mask(program)
    if all(mask):
        return program
    return program.replace_instructions(ins for ins, m in zip(program.instructions, mask) if m)


# --- evaluation -----------------------------------------------------------

def _protected(op: str, a, b=None):
    with np.errstate(all="ignore"):
        if op == "add":
            r = a + b
        elif op == "sub":
            r = a - b
        elif op == "mul":
            r = a * b
        elif op == "div":
            b_arr = np.asarray(b, dtype=float)
            small = np.abs(b_arr) < DIV_EPS
            r = np.where(small, 1.0, a / np.where(small, 1.0, b_arr))
        elif op == "sin":
            r = np.sin(a)
        elif op == "cos":
            r = np.cos(a)
        elif op == "exp":
            r = np.exp(np.minimum(a, EXP_CAP))
        elif op == "ln":
            mag = np.abs(np.asarray(a, dtype=float))
            small = mag < LN_EPS
            r = np.where(small, 0.0, np.log(np.where(small, 1.0, mag)))
        else:  # load, identity
            r = a
    return np.where(np.isfinite(r), r, 0.0)


def execute(program: Program, inputs: np.ndarray) -> np.ndarray:
    """Run ``program`` on every row of ``inputs`` (cases x D) and return the outputs.

    Only effective instructions are executed; introns cannot influence the
    output register.
    """
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    if program.max_input_index >= X.shape[1]:
        raise ProgramError(
            f"program reads x{program.max_input_index + 1} but inputs have {X.shape[1]} column(s)"
        )
    n = X.shape[0]
    regs = np.zeros((program.register_count, n))
    mask = effective_mask(program)
    for ins, live in zip(program.instructions, mask):
        if not live:
            continue
        vals = []
        for a in ins.args:
            if a.kind == "register":
                vals.append(regs[a.value])
            elif a.kind == "input":
                vals.append(X[:, a.value])
            else:
                vals.append(a.value)
        regs[ins.dest] = _protected(ins.op, *vals)
    return regs[program.output_register].copy()


def evaluate(program: Program, inputs: Sequence[float]) -> float:
    """Output of ``program`` for a single input vector."""
    return float(execute(program, np.asarray(inputs, dtype=float).reshape(1, -1))[0])


def mean_absolute_error(program: Program, inputs: np.ndarray, targets: np.ndarray) -> float:
    """MAE over a dataset; non-finite accumulations map to :data:`WORST_FITNESS`."""
    targets = np.asarray(targets, dtype=float)
    if targets.size == 0:
        raise ValueError("dataset is empty")
    with np.errstate(all="ignore"):
        mae = float(np.mean(np.abs(execute(program, inputs) - targets)))
    if not math.isfinite(mae) or mae > WORST_FITNESS:
        return WORST_FITNESS
    return mae


def evaluate_dataset(program: Program, dataset) -> float:
    return mean_absolute_error(program, dataset.inputs, dataset.targets)


# --- decoding -------------------------------------------------------------
# Expressions are nested tuples: ("num", text) | ("var", name) |
# ("bin", symbol, left, right) | ("call", fname, arg).

def render(expr) -> str:
    tag = expr[0]
    if tag in ("num", "var"):
        return expr[1]
    if tag == "call":
        return f"{expr[1]}({render(expr[2])})"
    _, sym, left, right = expr

    def wrap(e):
        return f"({render(e)})" if e[0] == "bin" else render(e)

    return f"{wrap(left)}{sym}{wrap(right)}"


def operand_expr(operand: Operand):
    if operand.kind == "input":
        return ("var", f"x{operand.value + 1}")
    return ("num", format_constant(operand.value))


def expression_tree(program: Program):
    """Back-substitute the effective instructions into one expression tree."""
    env: dict[int, tuple] = {}
    for ins, live in zip(program.instructions, effective_mask(program)):
        if not live:
            continue
        args = [env.get(a.value, ("num", "0")) if a.kind == "register" else operand_expr(a)
                for a in ins.args]
        if ins.op in BINARY_OPS:
            env[ins.dest] = ("bin", SYMBOLS[ins.op], args[0], args[1])
        elif ins.op in UNARY_OPS:
            env[ins.dest] = ("call", ins.op, args[0])
        else:
            env[ins.dest] = args[0]
    return env[program.output_register]


def decode_expression(program: Program) -> str:
    """Infix expression computed by ``program``, identities and copies eliminated."""
    return render(expression_tree(program))
