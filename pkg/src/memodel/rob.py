"""Reorder-buffer abstract machine with speculative loads and exhaustive
exploration.

Each processor owns an unbounded reorder buffer and a program counter;
memory is a single monolithic map.  Loads may execute before older memory
instructions have computed their addresses and are killed (with everything
younger) when an older instruction later resolves to the same address;
mispredicted branches kill the same way.  Fetching a branch predicts its
target nondeterministically (both successors are explored): the abstract
predictor subsumes every concrete one, and correctly-predicted taken
branches are what allow loads behind a taken branch to execute before the
branch resolves - dependency order constrains stores behind a branch, not
loads, so those early loads are required for completeness.

The explorer walks every nondeterministic rule interleaving with
memoization.  Rules whose firing order provably cannot change the final
outcome set (fetch, register ops, fences, store-data computation, and
kill-free address computation - none of them can disable another rule or
touch memory) are fired eagerly to keep the state space small; pass
``reduce=False`` to disable this and explore the raw rule relation.

With ``assert_ghost=True`` the machine additionally tracks per-entry
timestamps (done/address/store-data times and the store each load read) and
verifies the full runtime-invariant family after every rule; ghost
timestamps diverge per path, so this mode explores without memoization under
an explicit step budget.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .config import ModelConfig
from .errors import EngineConfigError, ExecutionError, ResourceLimitError
from .litmus import Fence, LitmusTest, Load, Outcome, RegOp, Store, make_outcome

# Entry tuple layout: (pidx, done, addr_av, addr, sdata, result, pred)
# pred is the predicted next program index (branches only, else pidx + 1).
PIDX, DONE, ADDR_AV, ADDR, SDATA, RESULT, PRED = range(7)

LD, ST, FEN, ROP, BR = range(5)

RULES = ("Fetch", "ExecRegToReg", "ExecBranch", "ExecFence", "ExecLoad",
         "ComputeStoreData", "ExecStore", "ComputeMemAddr")


@dataclass(frozen=True)
class Limits:
    max_steps: int = 1_000_000
    max_states: int = 1_000_000


@dataclass
class ExploreResult:
    outcomes: frozenset
    states: int = 0
    steps: int = 0
    truncated: bool = False
    trace: Optional[list] = None
    ghost_states_checked: int = 0


class GhostInvariantViolation(Exception):
    def __init__(self, item: str, rule=None):
        self.item = item
        self.rule = rule
        super().__init__(f"runtime invariant violated: {item}"
                         + (f" after rule {rule}" if rule else ""))


class _Instr:
    """Per-instruction static metadata precomputed once per (test, cfg)."""

    __slots__ = ("kind", "cls", "instr", "dest", "addr_expr", "data_expr",
                 "expr", "cond", "target")

    def __init__(self, ins, cfg):
        self.instr = ins
        self.dest = None
        self.addr_expr = self.data_expr = self.expr = None
        self.cond = self.target = None
        if isinstance(ins, Load):
            self.kind, self.cls = LD, "Ld"
            self.dest, self.addr_expr = ins.dest, ins.addr
        elif isinstance(ins, Store):
            self.kind, self.cls = ST, "St"
            self.addr_expr, self.data_expr = ins.addr, ins.data
        elif isinstance(ins, Fence):
            self.kind, self.cls = FEN, cfg.resolve_fence(ins.name)
        elif isinstance(ins, RegOp):
            self.kind, self.cls = ROP, None
            self.dest, self.expr = ins.dest, ins.expr
        else:
            self.kind, self.cls = BR, None
            self.cond = (ins.reg, ins.op, ins.value)
            self.target = ins.target_index


class Machine:
    """The rule relation of one test under one model configuration."""

    def __init__(self, test: LitmusTest, cfg: ModelConfig):
        if cfg.dep_mode != "full":
            raise EngineConfigError(
                "the reorder-buffer engine hard-wires dependency ordering "
                f"(model {cfg.name!r} asks for dep_mode={cfg.dep_mode!r}); "
                "dependency-free models run on the in-order engine")
        self.test = test
        self.cfg = cfg
        self.progs = [[_Instr(ins, cfg) for ins in instrs]
                      for _, instrs in test.threads]
        self.naddr = len(test.locations)
        self._ordered = cfg.table.true_pairs
        self.same_addr_ldld = cfg.same_addr_ldld

    # -- state helpers ---------------------------------------------------

    def initial_state(self):
        memory = tuple(v for _, v in self.test.locations)
        return (tuple(((), 0) for _ in self.progs), memory)

    def is_terminal(self, state) -> bool:
        procs, _ = state
        for proc, (entries, pc) in enumerate(procs):
            if pc < len(self.progs[proc]):
                return False
            if any(not e[DONE] for e in entries):
                return False
        return True

    def outcome(self, state) -> Outcome:
        procs, memory = state
        regs = {}
        for proc, (entries, _) in enumerate(procs):
            for e in entries:
                d = self.progs[proc][e[PIDX]].dest
                if d is not None:
                    regs[(proc, d)] = e[RESULT]
        mem = {a: memory[a] for a in range(self.naddr)}
        return make_outcome(self.test, regs, mem)

    def _reg_value(self, proc, entries, idx, reg):
        """Backward search for a register operand: (ready, value)."""
        for j in range(idx - 1, -1, -1):
            meta = self.progs[proc][entries[j][PIDX]]
            if meta.dest == reg:
                if entries[j][DONE]:
                    return True, entries[j][RESULT]
                return False, None
        return True, 0  # registers start as 0

    def _eval(self, proc, entries, idx, expr):
        """(ready, value) of an expression read by entry idx."""
        total = 0
        for sign, (tag, payload) in expr.terms:
            if tag == "int":
                total += sign * payload
            elif tag == "loc":
                total += sign * self.test.addr_of[payload]
            else:
                ok, v = self._reg_value(proc, entries, idx, payload)
                if not ok:
                    return False, None
                total += sign * v
        return True, total

    def _ordered_olders_done(self, proc, entries, idx, new_cls):
        for j in range(idx):
            cls = self.progs[proc][entries[j][PIDX]].cls
            if cls is not None and (cls, new_cls) in self._ordered \
                    and not entries[j][DONE]:
                return False
        return True

    # -- guards ------------------------------------------------------------

    def enabled(self, state):
        """Every rule instance whose guard holds (the raw rule relation).

        Some enabled instances are no-ops when applied (a load whose backward
        search hits a not-done entry it cannot bypass); the explorer skips
        identity transitions.
        """
        eager, normal = self._enabled_split(state)
        return eager + normal

    def _enabled_split(self, state):
        """(eager, normal): eager rules commute with everything outcome-wise
        and are fired as one canonical chain; normal rules branch the search."""
        procs, _ = state
        eager = []
        normal = []
        for proc, (entries, pc) in enumerate(procs):
            prog = self.progs[proc]
            if pc < len(prog):
                # the fetch instance carries the predicted next pc; a branch
                # offers both successors, everything else falls through
                if prog[pc].kind == BR:
                    normal.append(("Fetch", proc, pc + 1))
                    normal.append(("Fetch", proc, prog[pc].target))
                else:
                    eager.append(("Fetch", proc, pc + 1))
            for idx, e in enumerate(entries):
                meta = prog[e[PIDX]]
                kind = meta.kind
                if kind == ROP:
                    if not e[DONE] and self._eval(proc, entries, idx, meta.expr)[0]:
                        eager.append(("ExecRegToReg", proc, idx))
                elif kind == BR:
                    if not e[DONE] and \
                            self._reg_value(proc, entries, idx, meta.cond[0])[0]:
                        normal.append(("ExecBranch", proc, idx))
                elif kind == FEN:
                    if not e[DONE] and \
                            self._ordered_olders_done(proc, entries, idx, meta.cls):
                        eager.append(("ExecFence", proc, idx))
                elif kind == LD:
                    if not e[DONE] and e[ADDR_AV] and \
                            self._ordered_olders_done(proc, entries, idx, "Ld"):
                        normal.append(("ExecLoad", proc, idx))
                    if not e[ADDR_AV]:
                        ok, a = self._eval(proc, entries, idx, meta.addr_expr)
                        if ok:
                            self._classify_addr_compute(
                                proc, entries, idx, a, eager, normal)
                else:  # store
                    if meta.data_expr is not None and e[SDATA] is None and \
                            self._eval(proc, entries, idx, meta.data_expr)[0]:
                        eager.append(("ComputeStoreData", proc, idx))
                    if not e[ADDR_AV]:
                        ok, a = self._eval(proc, entries, idx, meta.addr_expr)
                        if ok:
                            self._classify_addr_compute(
                                proc, entries, idx, a, eager, normal)
                    if not e[DONE] and self._store_guard(proc, entries, idx, e):
                        normal.append(("ExecStore", proc, idx))
        return eager, normal

    def _classify_addr_compute(self, proc, entries, idx, a, eager, normal):
        rule = ("ComputeMemAddr", proc, idx)
        if not 0 <= a < self.naddr:
            # speculative operands may produce garbage addresses; the entry
            # stalls while an older branch or address is unresolved (the
            # wrong path will be killed), and is a genuine error otherwise
            if self._maybe_speculative(proc, entries, idx):
                return  # stall: identity transition, not explored
            normal.append(rule)  # apply() raises the address error
            return
        if self._addr_compute_kills(proc, entries, idx, a) is None:
            eager.append(rule)
        else:
            normal.append(rule)

    def _maybe_speculative(self, proc, entries, idx):
        prog = self.progs[proc]
        for j in range(idx):
            meta = prog[entries[j][PIDX]]
            if meta.kind == BR and not entries[j][DONE]:
                return True
            if meta.kind in (LD, ST) and not entries[j][ADDR_AV]:
                return True
        return False

    def _addr_compute_kills(self, proc, entries, idx, a):
        """Index of the younger done load the forward search would kill.

        A same-address store always shields: any done load behind it read
        that store or something younger.  A not-done load shields only when
        same-address loads execute in order (then a done load cannot sit
        behind it); with that ordering relaxed the search skips not-done
        loads, and a load's own resolution kills nothing at all."""
        prog = self.progs[proc]
        relaxed = not self.same_addr_ldld
        if relaxed and prog[entries[idx][PIDX]].kind == LD:
            return None
        for j in range(idx + 1, len(entries)):
            meta = prog[entries[j][PIDX]]
            if meta.kind not in (LD, ST):
                continue
            if entries[j][ADDR_AV] and entries[j][ADDR] == a:
                if meta.kind == LD:
                    if entries[j][DONE]:
                        return j
                    if relaxed:
                        continue
                return None
        return None

    def _store_guard(self, proc, entries, idx, e):
        if not e[ADDR_AV] or e[SDATA] is None:
            return False
        if not self._ordered_olders_done(proc, entries, idx, "St"):
            return False
        prog = self.progs[proc]
        a = e[ADDR]
        for j in range(idx):
            ej = entries[j]
            meta = prog[ej[PIDX]]
            if meta.kind == BR and not ej[DONE]:
                return False
            if meta.kind in (LD, ST):
                if not ej[ADDR_AV]:
                    return False
                if ej[ADDR] == a and not ej[DONE]:
                    return False
        return True

    # -- actions -----------------------------------------------------------

    def apply(self, state, rule):
        """Fire one rule instance; returns the new state (identical state for
        the no-op load/stall cases)."""
        name, proc, idx = rule
        procs, memory = state
        entries, pc = procs[proc]
        prog = self.progs[proc]

        def put(new_entries, new_pc=pc, new_memory=memory):
            new_procs = list(procs)
            new_procs[proc] = (tuple(new_entries), new_pc)
            return (tuple(new_procs), new_memory)

        if name == "Fetch":
            entry = (pc, False, False, None, None, None, idx)  # idx = predicted pc
            return put(entries + (entry,), idx)

        e = entries[idx]
        meta = prog[e[PIDX]]

        if name == "ExecRegToReg":
            _, v = self._eval(proc, entries, idx, meta.expr)
            return put(_set(entries, idx, done=True, result=v))

        if name == "ExecFence":
            return put(_set(entries, idx, done=True))

        if name == "ComputeStoreData":
            _, v = self._eval(proc, entries, idx, meta.data_expr)
            return put(_set(entries, idx, sdata=v))

        if name == "ExecBranch":
            _, v = self._reg_value(proc, entries, idx, meta.cond[0])
            taken = (v == meta.cond[2]) if meta.cond[1] == "==" else (v != meta.cond[2])
            new_entries = _set(entries, idx, done=True, result=int(taken))
            actual = meta.target if taken else e[PIDX] + 1
            if actual == e[PRED]:  # correctly predicted: nothing to repair
                return put(new_entries)
            return put(new_entries[:idx + 1], actual)

        if name == "ComputeMemAddr":
            _, a = self._eval(proc, entries, idx, meta.addr_expr)
            if not 0 <= a < self.naddr:
                if self._maybe_speculative(proc, entries, idx):
                    return state  # stall until the speculation resolves
                names = ", ".join(self.test.location_names)
                raise ExecutionError(
                    f"test {self.test.name!r}: address expression of "
                    f"T{proc}.{e[PIDX]} resolved to {a}, outside declared "
                    f"locations ({names})")
            new_entries = _set(entries, idx, addr_av=True, addr=a)
            kill = self._addr_compute_kills(proc, new_entries, idx, a)
            if kill is None:
                return put(new_entries)
            return put(new_entries[:kill], new_entries[kill][PIDX])

        if name == "ExecLoad":
            a = e[ADDR]
            j = self._load_search(proc, entries, idx, a)
            if j is None:
                return put(_set(entries, idx, done=True, result=memory[a]))
            ej = entries[j]
            if prog[ej[PIDX]].kind == ST and ej[SDATA] is not None:
                return put(_set(entries, idx, done=True, result=ej[SDATA]))
            return state  # cannot execute yet

        if name == "ExecStore":
            a = e[ADDR]
            new_memory = memory[:a] + (e[SDATA],) + memory[a + 1:]
            return put(_set(entries, idx, done=True), pc, new_memory)

        raise ValueError(f"unknown rule {name!r}")

    def _load_search(self, proc, entries, idx, a):
        """Backward search for the first not-done same-address memory entry
        (loads are skipped entirely when same-address load ordering is
        relaxed).  Returns its index or None."""
        prog = self.progs[proc]
        for j in range(idx - 1, -1, -1):
            ej = entries[j]
            meta = prog[ej[PIDX]]
            if meta.kind not in (LD, ST):
                continue
            if meta.kind == LD and not self.same_addr_ldld:
                continue
            if ej[ADDR_AV] and ej[ADDR] == a and not ej[DONE]:
                return j
        return None


def _set(entries, idx, **kw):
    e = list(entries[idx])
    for key, val in kw.items():
        e[{"done": DONE, "addr_av": ADDR_AV, "addr": ADDR,
           "sdata": SDATA, "result": RESULT}[key]] = val
    return entries[:idx] + (tuple(e),) + entries[idx + 1:]


def enabled(state, cfg: ModelConfig, test: LitmusTest):
    """Rule instances whose guards hold in a state (spec surface)."""
    return Machine(test, cfg).enabled(state)


def apply(state, rule, cfg: ModelConfig, test: LitmusTest):
    """Fire one rule instance (spec surface)."""
    return Machine(test, cfg).apply(state, rule)


def explore(test: LitmusTest, cfg: ModelConfig, limits: Limits = None,
            assert_ghost: bool = False, reduce: bool = True,
            shuffle_seed=None, trace_outcome=None, ghost_paths: int = 200,
            ghost_seed: int = 0) -> ExploreResult:
    """Collect the outcomes of all maximal executions.

    Depth-first over the rule relation with visited-state memoization.  Ghost
    mode instead samples ghost_paths seeded random complete interleavings
    without memoization, asserting the runtime invariants on every state it
    visits.  ``trace_outcome`` asks for one rule sequence reaching the given
    outcome.
    """
    limits = limits or Limits()
    if assert_ghost:
        from . import rob_ghost
        return rob_ghost.explore_ghost(test, cfg, limits, paths=ghost_paths,
                                       seed=ghost_seed)
    m = Machine(test, cfg)
    rng = random.Random(shuffle_seed) if shuffle_seed is not None else None
    outcomes = set()
    init = m.initial_state()
    visited = {init}
    # stack of (state, path) when tracing, else just states
    stack = [(init, ()) if trace_outcome is not None else init]
    steps = 0
    trace = None
    while stack:
        item = stack.pop()
        state, path = item if trace_outcome is not None else (item, None)
        if m.is_terminal(state):
            out = m.outcome(state)
            outcomes.add(out)
            if trace_outcome is not None and out == trace_outcome and trace is None:
                trace = list(path)
            continue
        eager, normal = m._enabled_split(state)
        rules = eager[:1] if (reduce and eager) else (eager + normal)
        if rng is not None:
            rules = rules[:]
            rng.shuffle(rules)
        progressed = False
        for rule in rules:
            steps += 1
            if steps > limits.max_steps:
                raise ResourceLimitError(
                    f"test {test.name!r}: exceeded {limits.max_steps} rule "
                    "applications")
            new_state = m.apply(state, rule)
            if new_state == state:
                continue
            progressed = True
            if new_state in visited:
                continue
            if len(visited) >= limits.max_states:
                raise ResourceLimitError(
                    f"test {test.name!r}: exceeded {limits.max_states} states")
            visited.add(new_state)
            stack.append((new_state, path + (rule,))
                         if trace_outcome is not None else new_state)
        if not progressed:
            raise ExecutionError(
                f"test {test.name!r}: machine is stuck in a non-terminal "
                "state (no applicable rule makes progress)")
    return ExploreResult(frozenset(outcomes), states=len(visited),
                         steps=steps, trace=trace)


def allowed_outcomes(test: LitmusTest, cfg: ModelConfig, limits=None) -> frozenset:
    return explore(test, cfg, limits=limits).outcomes
