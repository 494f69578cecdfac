"""Litmus-test language: instructions, tests, outcomes, and the text format.

A litmus test is a small multi-threaded straight-line program (forward
branches only) over a set of named memory locations, plus a condition on the
final register/memory values.  The text format is line oriented:

    name: sb
    locations: x=0 y=0
    thread P0:
      St x = 1
      r1 = Ld y
    thread P1:
      St y = 1
      r2 = Ld x
    exists: P0:r1=0 /\\ P1:r2=0

Comments start with ``#``.  Expressions are linear combinations of registers,
integer literals, and location names joined by ``+`` and ``-``; a location
name evaluates to that location's address (locations are numbered in
declaration order).  Register names match ``r<digits>`` and are thread-local,
implicitly 0 until written.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional


class LitmusError(Exception):
    """Parse or validation failure, with a 1-based line number when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# Expression terms are (sign, (tag, payload)) with tag in {"int", "reg", "loc"}.
Term = tuple[int, tuple[str, object]]


@dataclass(frozen=True)
class Expr:
    terms: tuple[Term, ...]

    def regs(self) -> frozenset[str]:
        return frozenset(t[1][1] for t in self.terms if t[1][0] == "reg")

    def evaluate(self, regs: dict, addr_of: dict) -> int:
        total = 0
        for sign, (tag, payload) in self.terms:
            if tag == "int":
                total += sign * payload
            elif tag == "reg":
                total += sign * regs.get(payload, 0)
            else:
                total += sign * addr_of[payload]
        return total

    def __str__(self):
        parts = []
        for i, (sign, (tag, payload)) in enumerate(self.terms):
            if i == 0:
                parts.append(("-" if sign < 0 else "") + str(payload))
            else:
                parts.append(("- " if sign < 0 else "+ ") + str(payload))
        return " ".join(parts)


@dataclass(frozen=True)
class Load:
    dest: str
    addr: Expr
    label: Optional[str] = None


@dataclass(frozen=True)
class Store:
    addr: Expr
    data: Expr
    label: Optional[str] = None


@dataclass(frozen=True)
class Fence:
    name: str = "Fence"
    label: Optional[str] = None


@dataclass(frozen=True)
class RegOp:
    dest: str
    expr: Expr
    label: Optional[str] = None


@dataclass(frozen=True)
class Branch:
    reg: str
    op: str  # "==" or "!="
    value: int
    target: str
    target_index: int = field(compare=False, default=-1)
    label: Optional[str] = None


Instruction = Load | Store | Fence | RegOp | Branch


@dataclass(frozen=True)
class Clause:
    """One equality of the outcome condition: a register or a location."""

    thread: Optional[str]  # None for a location clause
    key: str  # register name or location name
    value: int

    def __str__(self):
        if self.thread is None:
            return f"{self.key}={self.value}"
        return f"{self.thread}:{self.key}={self.value}"


@dataclass(frozen=True)
class OutcomeCondition:
    quantifier: str  # "exists" | "forall" | "forbidden"
    clauses: tuple[Clause, ...]

    def satisfied_by(self, outcome: "Outcome") -> bool:
        values = dict(outcome)
        for c in self.clauses:
            key = c.key if c.thread is None else f"{c.thread}:{c.key}"
            if values.get(key) != c.value:
                return False
        return True


# An Outcome maps every (thread, register) and location of a test to its
# final value.  Canonical form: sorted tuple of ("P0:r1" | "x", value) pairs,
# which is hashable and cheap to build in engine hot loops.
Outcome = tuple[tuple[str, int], ...]
OutcomeSet = frozenset


@dataclass(frozen=True)
class LitmusTest:
    name: str
    locations: tuple[tuple[str, int], ...]
    threads: tuple[tuple[str, tuple[Instruction, ...]], ...]
    condition: OutcomeCondition

    @property
    def addr_of(self) -> dict:
        return {name: i for i, (name, _) in enumerate(self.locations)}

    @property
    def location_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.locations)

    def initial_value(self, addr: int) -> int:
        return self.locations[addr][1]

    def thread_registers(self, thread_index: int) -> tuple[str, ...]:
        """All register names appearing in a thread's text, in first-use order."""
        seen: dict[str, None] = {}
        for instr in self.threads[thread_index][1]:
            for r in registers_of(instr):
                seen.setdefault(r, None)
        return tuple(seen)

    def outcome_keys(self) -> tuple[str, ...]:
        keys = []
        for ti, (tname, _) in enumerate(self.threads):
            keys.extend(f"{tname}:{r}" for r in self.thread_registers(ti))
        keys.extend(self.location_names)
        return tuple(keys)


def registers_of(instr: Instruction) -> frozenset[str]:
    if isinstance(instr, Load):
        return instr.addr.regs() | {instr.dest}
    if isinstance(instr, Store):
        return instr.addr.regs() | instr.data.regs()
    if isinstance(instr, RegOp):
        return instr.expr.regs() | {instr.dest}
    if isinstance(instr, Branch):
        return frozenset((instr.reg,))
    return frozenset()


def make_outcome(test: LitmusTest, reg_values: dict, mem_values: dict) -> Outcome:
    """Assemble a canonical outcome from per-thread registers and memory.

    ``reg_values`` maps (thread_index, register) to a value; missing registers
    default to 0.  ``mem_values`` maps address index to a value; missing
    addresses keep their initial value.
    """
    items = []
    for ti, (tname, _) in enumerate(test.threads):
        for r in test.thread_registers(ti):
            items.append((f"{tname}:{r}", reg_values.get((ti, r), 0)))
    for addr, (lname, init) in enumerate(test.locations):
        items.append((lname, mem_values.get(addr, init)))
    return tuple(sorted(items))


_REG_RE = re.compile(r"^r\d+$")
_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _is_reg(name: str) -> bool:
    return bool(_REG_RE.match(name))


class _Parser:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.name = None
        self.locations: list[tuple[str, int]] = []
        self.threads: list[tuple[str, list]] = []
        self.condition = None
        self.pending_branches: list[tuple[int, int, int, Branch]] = []

    def error(self, msg, lineno):
        raise LitmusError(msg, lineno)

    def parse(self) -> LitmusTest:
        for lineno0, raw in enumerate(self.lines):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            self.parse_line(line, lineno0 + 1)
        if self.name is None:
            self.error("missing 'name:' header", None)
        if self.condition is None:
            self.error("missing condition line (exists:/forall:/forbidden:)", None)
        self.resolve_branches()
        test = LitmusTest(
            name=self.name,
            locations=tuple(self.locations),
            threads=tuple((n, tuple(instrs)) for n, instrs in self.threads),
            condition=self.condition,
        )
        self.validate(test)
        return test

    def parse_line(self, line: str, lineno: int):
        if line.startswith("name:"):
            self.name = line[len("name:"):].strip()
            if not _IDENT_RE.match(self.name.replace("-", "_").replace("+", "_")):
                self.error(f"bad test name {self.name!r}", lineno)
            return
        if line.startswith("locations:"):
            for part in line[len("locations:"):].split():
                m = re.match(r"^([A-Za-z_][A-Za-z0-9_]*)=(-?\d+)$", part)
                if not m:
                    self.error(f"bad location declaration {part!r}", lineno)
                name, val = m.group(1), int(m.group(2))
                if _is_reg(name):
                    self.error(f"location name {name!r} clashes with register syntax", lineno)
                if any(n == name for n, _ in self.locations):
                    self.error(f"duplicate location {name!r}", lineno)
                self.locations.append((name, val))
            return
        m = re.match(r"^thread\s+([A-Za-z_][A-Za-z0-9_]*)\s*:$", line)
        if m:
            tname = m.group(1)
            if any(n == tname for n, _ in self.threads):
                self.error(f"duplicate thread {tname!r}", lineno)
            self.threads.append((tname, []))
            return
        m = re.match(r"^(exists|forall|forbidden)\s*:(.*)$", line)
        if m:
            if self.condition is not None:
                self.error("multiple condition lines", lineno)
            self.condition = self.parse_condition(m.group(1), m.group(2), lineno)
            return
        self.parse_instruction(line, lineno)

    def parse_condition(self, quant: str, rest: str, lineno: int) -> OutcomeCondition:
        clauses = []
        rest = rest.strip()
        if rest:
            for part in rest.split("/\\"):
                part = part.strip()
                m = re.match(
                    r"^(?:([A-Za-z_][A-Za-z0-9_]*)\s*:\s*)?([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(-?\d+)$",
                    part,
                )
                if not m:
                    self.error(f"bad condition clause {part!r}", lineno)
                clauses.append(Clause(m.group(1), m.group(2), int(m.group(3))))
        return OutcomeCondition(quant, tuple(clauses))

    def parse_instruction(self, line: str, lineno: int):
        if not self.threads:
            self.error("instruction outside any thread", lineno)
        label = None
        m = re.match(r"^([A-Za-z_][A-Za-z0-9_]*)\s*:\s*(.+)$", line)
        if m and m.group(1) not in ("St", "Ld", "Fence", "br"):
            label, line = m.group(1), m.group(2).strip()
        instrs = self.threads[-1][1]
        if label is not None and any(i.label == label for i in instrs):
            self.error(f"duplicate label {label!r}", lineno)

        if line.startswith("St "):
            m = re.match(r"^St\s+(.+?)\s*=\s*(.+)$", line)
            if not m:
                self.error("malformed store (expected 'St <addr> = <data>')", lineno)
            instrs.append(Store(self.parse_expr(m.group(1), lineno),
                                self.parse_expr(m.group(2), lineno), label=label))
            return
        if line == "Fence" or line.startswith("Fence "):
            name = line[len("Fence"):].strip() or "Fence"
            if not _IDENT_RE.match(name):
                self.error(f"bad fence name {name!r}", lineno)
            instrs.append(Fence(name, label=label))
            return
        if line.startswith("br "):
            m = re.match(r"^br\s+(r\d+)\s*(==|!=)\s*(-?\d+)\s*,\s*([A-Za-z_][A-Za-z0-9_]*)$", line)
            if not m:
                self.error("malformed branch (expected 'br <reg> ==|!= <int>, <label>')", lineno)
            br = Branch(m.group(1), m.group(2), int(m.group(3)), m.group(4), label=label)
            instrs.append(br)
            self.pending_branches.append((len(self.threads) - 1, len(instrs) - 1, lineno, br))
            return
        m = re.match(r"^(r\d+)\s*=\s*Ld\s+(.+)$", line)
        if m:
            instrs.append(Load(m.group(1), self.parse_expr(m.group(2), lineno), label=label))
            return
        m = re.match(r"^(r\d+)\s*=\s*(.+)$", line)
        if m:
            instrs.append(RegOp(m.group(1), self.parse_expr(m.group(2), lineno), label=label))
            return
        self.error(f"unrecognized instruction {line!r}", lineno)

    def parse_expr(self, text: str, lineno: int) -> Expr:
        tokens = re.findall(r"[+-]|\d+|[A-Za-z_][A-Za-z0-9_]*", text)
        if "".join(tokens).replace("+", " + ").replace("-", " - ").split() != \
                text.replace("+", " + ").replace("-", " - ").split():
            self.error(f"bad expression {text!r}", lineno)
        terms: list[Term] = []
        sign = 1
        expect_term = True
        for tok in tokens:
            if tok in "+-":
                if expect_term and tok == "-":
                    sign = -sign
                    continue
                if expect_term:
                    self.error(f"bad expression {text!r}", lineno)
                sign = 1 if tok == "+" else -1
                expect_term = True
                continue
            if not expect_term:
                self.error(f"bad expression {text!r}", lineno)
            if tok.isdigit():
                terms.append((sign, ("int", int(tok))))
            elif _is_reg(tok):
                terms.append((sign, ("reg", tok)))
            elif any(n == tok for n, _ in self.locations):
                terms.append((sign, ("loc", tok)))
            else:
                self.error(f"undeclared location {tok!r}", lineno)
            sign = 1
            expect_term = False
        if expect_term or not terms:
            self.error(f"bad expression {text!r}", lineno)
        return Expr(tuple(terms))

    def resolve_branches(self):
        for ti, idx, lineno, br in self.pending_branches:
            _, instrs = self.threads[ti]
            target_index = next(
                (j for j, ins in enumerate(instrs) if ins.label == br.target), None)
            if target_index is None:
                self.error(f"branch target {br.target!r} not found", lineno)
            if target_index <= idx:
                self.error(
                    f"branch target {br.target!r} is not strictly later (forward branches only)",
                    lineno)
            instrs[idx] = Branch(br.reg, br.op, br.value, br.target,
                                 target_index=target_index, label=br.label)

    def validate(self, test: LitmusTest):
        thread_names = {n for n, _ in test.threads}
        for c in test.condition.clauses:
            if c.thread is None:
                if c.key not in test.addr_of:
                    self.error(f"condition references undeclared location {c.key!r}", None)
            else:
                if c.thread not in thread_names:
                    self.error(f"condition references unknown thread {c.thread!r}", None)
                ti = next(i for i, (n, _) in enumerate(test.threads) if n == c.thread)
                if c.key not in test.thread_registers(ti):
                    self.error(
                        f"condition references unknown register {c.thread}:{c.key}", None)


def parse_litmus(text: str) -> LitmusTest:
    """Parse litmus text into a LitmusTest, raising LitmusError on bad input."""
    return _Parser(text).parse()


def print_litmus(test: LitmusTest) -> str:
    """Render a test back to text; parse(print(t)) is structurally equal to t."""
    out = [f"name: {test.name}"]
    if test.locations:
        out.append("locations: " + " ".join(f"{n}={v}" for n, v in test.locations))
    for tname, instrs in test.threads:
        out.append(f"thread {tname}:")
        for ins in instrs:
            prefix = f"{ins.label}: " if ins.label else "  "
            if isinstance(ins, Store):
                out.append(f"{prefix}St {ins.addr} = {ins.data}")
            elif isinstance(ins, Load):
                out.append(f"{prefix}{ins.dest} = Ld {ins.addr}")
            elif isinstance(ins, Fence):
                out.append(f"{prefix}Fence {ins.name}" if ins.name != "Fence"
                           else f"{prefix}Fence")
            elif isinstance(ins, RegOp):
                out.append(f"{prefix}{ins.dest} = {ins.expr}")
            else:
                out.append(f"{prefix}br {ins.reg} {ins.op} {ins.value}, {ins.target}")
    clauses = " /\\ ".join(str(c) for c in test.condition.clauses)
    out.append(f"{test.condition.quantifier}: {clauses}".rstrip())
    return "\n".join(out) + "\n"


def eval_condition(cond: OutcomeCondition, outcomes: Iterable[Outcome]) -> str:
    """Judge a condition against the full allowed-outcome set of an engine.

    exists    -> "witnessed" if some outcome satisfies the clauses, else "never"
    forbidden -> "never" if no outcome satisfies, else "witnessed"
    forall    -> "always" if every outcome satisfies, else "witnessed"
                 (a violating outcome was witnessed)
    """
    outcomes = list(outcomes)
    any_sat = any(cond.satisfied_by(o) for o in outcomes)
    if cond.quantifier == "exists":
        return "witnessed" if any_sat else "never"
    if cond.quantifier == "forbidden":
        return "witnessed" if any_sat else "never"
    all_sat = all(cond.satisfied_by(o) for o in outcomes)
    return "always" if all_sat else "witnessed"


def success_verdict(cond: OutcomeCondition) -> str:
    """The verdict that counts as 'condition holds' for CLI exit codes."""
    return {"exists": "witnessed", "forbidden": "never", "forall": "always"}[
        cond.quantifier]
