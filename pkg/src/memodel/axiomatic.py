"""The witness-search engine: candidate enumeration plus the two axioms.

A program behavior is allowed when some witness - a reads-from choice plus a
global total order of memory events - satisfies:

* instruction order: the total order respects the preserved program order;
* load value: each load reads the order-maximal store among the same-address
  stores that precede it in program order or in the global order.

Candidates are enumerated reads-from first (values drive control flow), then
the total-order search runs per candidate; outcomes are unioned over all
witnesses.  Initial memory is one implicit init store per location, ordered
before every explicit event.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional

from .config import ModelConfig
from .errors import ExecutionError, ResourceLimitError
from .litmus import Branch, LitmusTest, Load, Outcome, RegOp, Store, make_outcome
from .order_search import order_outcomes
from .relations import Event, Execution, Relation, ppo

# Hard cap on explicit memory events per execution for the global-order
# search (worst case n! orders, heavily pruned in practice).
MAX_MEMORY_EVENTS = 9

# Small non-negative integers; programs are expected to stay within this
# range.  The reads-from style of enumeration derives every value from a
# store or an initial value, so the domain never drives a search by itself.
DEFAULT_VALUE_DOMAIN = range(4)


@dataclass(frozen=True)
class Witness:
    """rf maps each load event id to a store event id (None = init store);
    mo is a total order of memory event ids, oldest first."""

    rf: tuple  # sorted tuple of (load_id, store_id_or_None)
    mo: tuple

    def rf_map(self) -> dict:
        return dict(self.rf)


class _Reject(Exception):
    """Candidate is internally inconsistent (address/value mismatch)."""


class _CyclicValues(_Reject):
    """The reads-from choice makes load values depend on themselves.  Every
    such candidate also builds a cycle through dependency order and source
    visibility, so no witness could accept it; it is skipped."""


def _thread_paths(instrs):
    """All control-flow paths of one thread: tuples of (prog_index, taken)."""
    paths = []

    def walk(idx, acc):
        if idx >= len(instrs):
            paths.append(tuple(acc))
            return
        ins = instrs[idx]
        if isinstance(ins, Branch):
            acc.append((idx, False))
            walk(idx + 1, acc)
            acc.pop()
            acc.append((idx, True))
            walk(ins.target_index, acc)
            acc.pop()
        else:
            acc.append((idx, None))
            walk(idx + 1, acc)
            acc.pop()

    walk(0, [])
    return paths


class _Candidate:
    """Value resolution for one (path combo, reads-from) choice."""

    def __init__(self, test, paths, rf_choice):
        self.test = test
        self.paths = paths
        self.rf = rf_choice  # (ti, k) -> (tj, l) or None
        self.naddr = len(test.locations)
        self.vals: dict = {}
        self.in_progress: set = set()

    def instr(self, slot):
        ti, k = slot
        pidx, _taken = self.paths[ti][k]
        return self.test.threads[ti][1][pidx]

    def _binding(self, slot, reg):
        ti, k = slot
        for j in range(k - 1, -1, -1):
            ins = self.test.threads[ti][1][self.paths[ti][j][0]]
            if isinstance(ins, (Load, RegOp)) and ins.dest == reg:
                return (ti, j)
        return None

    def _eval_expr(self, expr, slot):
        total = 0
        for sign, (tag, payload) in expr.terms:
            if tag == "int":
                total += sign * payload
            elif tag == "loc":
                total += sign * self.test.addr_of[payload]
            else:
                src = self._binding(slot, payload)
                total += sign * (self.value(src) if src is not None else 0)
        return total

    def _resolve(self, slot, field):
        key = (slot, field)
        if key in self.vals:
            return self.vals[key]
        if key in self.in_progress:
            raise _CyclicValues()
        self.in_progress.add(key)
        ins = self.instr(slot)
        if field == "addr":
            addr = self._eval_expr(ins.addr, slot)
            if not 0 <= addr < self.naddr:
                names = ", ".join(self.test.location_names)
                raise ExecutionError(
                    f"test {self.test.name!r}: address expression resolved to "
                    f"{addr}, outside declared locations ({names})")
            result = addr
        elif field == "data":
            result = self._eval_expr(ins.data, slot)
        else:  # load value
            src = self.rf[slot]
            addr = self._resolve(slot, "addr")
            if src is None:
                result = self.test.locations[addr][1]
            else:
                if self._resolve(src, "addr") != addr:
                    raise _Reject()
                result = self._resolve(src, "data")
        self.in_progress.discard(key)
        self.vals[key] = result
        return result

    def value(self, slot):
        ins = self.instr(slot)
        if isinstance(ins, Load):
            return self._resolve(slot, "value")
        if isinstance(ins, RegOp):
            key = (slot, "value")
            if key not in self.vals:
                self.vals[key] = self._eval_expr(ins.expr, slot)
            return self.vals[key]
        raise _Reject()  # reading a slot that defines no register

    def build(self):
        """Resolve everything; return (Execution, rf dict) or raise _Reject."""
        events = []
        ids: dict = {}
        next_id = 0
        for ti, path in enumerate(self.paths):
            thread_events = []
            for k, (pidx, taken) in enumerate(path):
                ins = self.test.threads[ti][1][pidx]
                slot = (ti, k)
                addr = data = value = None
                if isinstance(ins, Load):
                    addr = self._resolve(slot, "addr")
                    value = self._resolve(slot, "value")
                elif isinstance(ins, Store):
                    addr = self._resolve(slot, "addr")
                    data = self._resolve(slot, "data")
                elif isinstance(ins, RegOp):
                    value = self.value(slot)
                elif isinstance(ins, Branch):
                    cond_val = self._binding(slot, ins.reg)
                    v = self.value(cond_val) if cond_val is not None else 0
                    holds = (v == ins.value) if ins.op == "==" else (v != ins.value)
                    if holds != taken:
                        raise _Reject()
                ev = Event(id=next_id, thread=ti, index=k, instr=ins,
                           addr=addr, data=data, value=value, taken=taken)
                ids[slot] = next_id
                next_id += 1
                thread_events.append(ev)
            events.append(tuple(thread_events))
        rf = {}
        for slot, src in self.rf.items():
            rf[ids[slot]] = None if src is None else ids[src]
        return Execution(self.test, tuple(events)), rf


def enumerate_executions(test: LitmusTest, domain=None) -> Iterator[tuple]:
    """Yield every consistent (Execution, rf) candidate of a test.

    Consistent means: control flow follows the evaluated branch conditions,
    every load's value equals its source's data (or the initial value), and
    every address lands on a declared location - anything else raises
    ExecutionError.  Candidates whose reads-from choice is value-cyclic are
    skipped; no witness can order them (see _CyclicValues).

    ``domain`` is accepted for interface stability; reads-from chaining makes
    value guessing unnecessary, so it bounds nothing here.
    """
    del domain
    per_thread = [_thread_paths(instrs) for _, instrs in test.threads]
    for paths in itertools.product(*per_thread):
        load_slots = []
        store_slots = []
        for ti, path in enumerate(paths):
            for k, (pidx, _) in enumerate(path):
                ins = test.threads[ti][1][pidx]
                if isinstance(ins, Load):
                    load_slots.append((ti, k))
                elif isinstance(ins, Store):
                    store_slots.append((ti, k))
        # Prefilter reads-from candidates by address where both addresses are
        # register-free (always the case for fuzzed programs).
        static_addr = {}
        for slot in load_slots + store_slots:
            ins = test.threads[slot[0]][1][paths[slot[0]][slot[1]][0]]
            if not ins.addr.regs():
                static_addr[slot] = _static_expr_value(ins.addr, test)
        choices = []
        for ld in load_slots:
            opts = [None]
            for st in store_slots:
                if ld in static_addr and st in static_addr and \
                        static_addr[ld] != static_addr[st]:
                    continue
                opts.append(st)
            choices.append(opts)
        for combo in itertools.product(*choices):
            cand = _Candidate(test, paths, dict(zip(load_slots, combo)))
            try:
                yield cand.build()
            except _Reject:
                continue


def _static_expr_value(expr, test):
    total = 0
    for sign, (tag, payload) in expr.terms:
        if tag == "int":
            total += sign * payload
        elif tag == "loc":
            total += sign * test.addr_of[payload]
    return total


def check_inst_order(ppo_rel: Relation, w: Witness) -> bool:
    """mo must respect ppo (restricted to the memory events mo orders)."""
    pos = {eid: i for i, eid in enumerate(w.mo)}
    for (a, b) in ppo_rel:
        if a in pos and b in pos and pos[a] >= pos[b]:
            return False
    return True


def check_load_value(e: Execution, w: Witness) -> bool:
    """Each load reads the order-maximal visible same-address store.

    Visible = same-address stores earlier in program order, plus those
    earlier in mo; the implicit init store is visible at order minus
    infinity, so it is the source exactly when no explicit store is visible.
    """
    pos = {eid: i for i, eid in enumerate(w.mo)}
    rf = w.rf_map()
    events = {ev.id: ev for ev in e.all_events}
    stores = [ev for ev in e.all_events if ev.kind == "St"]
    for ld in e.all_events:
        if ld.kind != "Ld":
            continue
        visible = []
        for st in stores:
            if st.addr != ld.addr:
                continue
            po_before = st.thread == ld.thread and st.index < ld.index
            mo_before = pos[st.id] < pos[ld.id]
            if po_before or mo_before:
                visible.append(st)
        src = rf.get(ld.id)
        if not visible:
            if src is not None:
                return False
        else:
            best = max(visible, key=lambda st: pos[st.id])
            if src != best.id:
                return False
        if src is not None and events[src].data != ld.value:
            return False
    return True


def _search_inputs(e: Execution, rf: dict, ppo_rel: Relation):
    mem = [ev for ev in e.all_events if ev.is_memory]
    n = len(mem)
    if n > MAX_MEMORY_EVENTS:
        raise ResourceLimitError(
            f"test {e.test.name!r}: {n} memory events exceeds the "
            f"witness-search cap of {MAX_MEMORY_EVENTS}")
    index = {ev.id: i for i, ev in enumerate(mem)}
    preds = [0] * n
    for (a, b) in ppo_rel:
        if a in index and b in index:
            preds[index[b]] |= 1 << index[a]
    is_store = [1 if ev.kind == "St" else 0 for ev in mem]
    addrs = [ev.addr for ev in mem]
    srcs = [-1] * n
    po_vis = [0] * n
    for i, ev in enumerate(mem):
        if ev.kind != "Ld":
            continue
        src = rf.get(ev.id)
        srcs[i] = index[src] if src is not None else -1
        for j, st in enumerate(mem):
            if st.kind == "St" and st.addr == ev.addr and \
                    st.thread == ev.thread and st.index < ev.index:
                po_vis[i] |= 1 << j
    return mem, (n, preds, is_store, addrs, srcs, po_vis)


def candidate_outcomes(e: Execution, rf: dict, cfg: ModelConfig) -> frozenset:
    """All outcomes some witness accepts for one (Execution, rf) candidate."""
    ppo_rel = ppo(e, cfg)
    mem, args = _search_inputs(e, rf, ppo_rel)
    naddr = len(e.test.locations)
    finals = order_outcomes(*args, naddr)
    if not finals:
        return frozenset()
    reg_values = {}
    for ev in e.all_events:
        if isinstance(ev.instr, (Load, RegOp)):
            reg_values[(ev.thread, ev.instr.dest)] = ev.value
    outs = set()
    for fin in finals:
        mem_values = {a: mem[fin[a]].data for a in range(naddr) if fin[a] >= 0}
        outs.add(make_outcome(e.test, reg_values, mem_values))
    return frozenset(outs)


def find_witness(e: Execution, rf: dict, cfg: ModelConfig) -> Optional[Witness]:
    """One accepting witness for a candidate, or None (brute-force; small n)."""
    ppo_rel = ppo(e, cfg)
    mem_ids = [ev.id for ev in e.all_events if ev.is_memory]
    for perm in itertools.permutations(mem_ids):
        w = Witness(tuple(sorted(rf.items())), perm)
        if check_inst_order(ppo_rel, w) and check_load_value(e, w):
            return w
    return None


def allowed_outcomes(test: LitmusTest, cfg: ModelConfig, domain=None) -> frozenset:
    """The allowed-outcome set of the witness-search engine."""
    outs: set[Outcome] = set()
    for e, rf in enumerate_executions(test, domain):
        outs |= candidate_outcomes(e, rf, cfg)
    return frozenset(outs)
