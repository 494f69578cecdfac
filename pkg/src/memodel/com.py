"""The coherence-based engine: derived communication relations and two
acyclicity axioms.

Instead of ordering all memory events globally, a witness here is reads-from
plus a per-address total order of stores (coherence).  An execution is
accepted when

* rf U co U fr U po_loc is acyclic (per-location sequential consistency), and
* rfe U co U fr U ppo is acyclic (causality).

Per-address store permutations are far cheaper to enumerate than global
orders, which is the point of this formulation.  Implicit init stores are
materialized as virtual nodes (id -(addr+1)) so fr and the extended
communication order need no special cases.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .config import ModelConfig
from .errors import EngineConfigError, ResourceLimitError
from .litmus import LitmusTest, Outcome, make_outcome
from .relations import Execution, Relation, ppo
from . import axiomatic

MAX_MEMORY_EVENTS = 12


def init_id(addr: int) -> int:
    """Virtual node id of the init store for an address."""
    return -(addr + 1)


@dataclass(frozen=True)
class ComWitness:
    """rf as in the witness-search engine; co maps each address to its store
    event ids in coherence order (the implicit init store comes first)."""

    rf: tuple  # sorted tuple of (load_id, store_id_or_None)
    co: tuple  # sorted tuple of (addr, tuple_of_store_ids)

    def rf_map(self) -> dict:
        return dict(self.rf)

    def co_map(self) -> dict:
        return dict(self.co)


def com_witness_from_gam(e: Execution, w: "axiomatic.Witness") -> ComWitness:
    """Restrict a global-order witness to per-address coherence orders."""
    events = {ev.id: ev for ev in e.all_events}
    co: dict[int, list] = {}
    for eid in w.mo:
        ev = events[eid]
        if ev.kind == "St":
            co.setdefault(ev.addr, []).append(eid)
    for addr in range(len(e.test.locations)):
        co.setdefault(addr, [])
    return ComWitness(w.rf, tuple(sorted((a, tuple(s)) for a, s in co.items())))


def derive_relations(e: Execution, w: ComWitness) -> dict:
    """rf/co split into the derived relations over event ids.

    Keys: rf, co, rfe, rfi, fr, po_loc, eco.  Init stores appear as virtual
    ids, po-absent and coherence-first.
    """
    events = {ev.id: ev for ev in e.all_events}
    rf_map = w.rf_map()
    co_map = w.co_map()

    rf = set()
    rfi = set()
    rfe = set()
    for ld_id, src in rf_map.items():
        src_id = init_id(events[ld_id].addr) if src is None else src
        rf.add((src_id, ld_id))
        if src is not None and events[src].thread == events[ld_id].thread:
            rfi.add((src_id, ld_id))
        else:
            rfe.add((src_id, ld_id))

    co_order = {addr: [init_id(addr)] + list(stores)
                for addr, stores in co_map.items()}
    co = set()
    for order in co_order.values():
        for i, a in enumerate(order):
            for b in order[i + 1:]:
                co.add((a, b))

    co_pos = {}
    for order in co_order.values():
        for i, sid in enumerate(order):
            co_pos[sid] = i

    fr = set()
    for ld_id, src in rf_map.items():
        addr = events[ld_id].addr
        src_id = init_id(addr) if src is None else src
        for other in co_order[addr]:
            if co_pos[other] > co_pos[src_id]:
                fr.add((ld_id, other))

    po_loc = set()
    for thread in e.events:
        mem = [ev for ev in thread if ev.is_memory]
        for i, a in enumerate(mem):
            for b in mem[i + 1:]:
                if a.addr == b.addr:
                    po_loc.add((a.id, b.id))

    # eco = co U fr U co*;rf U rf^-1;co*;rf
    eco = set(co) | set(fr)
    for (src_id, ld_id) in rf:
        addr = events[ld_id].addr
        for w_id in co_order[addr]:
            if co_pos[w_id] <= co_pos[src_id]:
                eco.add((w_id, ld_id))
    for (s1, l1) in rf:
        for (s2, l2) in rf:
            if l1 != l2 and events[l1].addr == events[l2].addr and \
                    co_pos[s1] <= co_pos[s2]:
                eco.add((l1, l2))

    return {
        "rf": frozenset(rf),
        "co": frozenset(co),
        "rfe": frozenset(rfe),
        "rfi": frozenset(rfi),
        "fr": frozenset(fr),
        "po_loc": frozenset(po_loc),
        "eco": frozenset(eco),
    }


def _acyclic(edges) -> bool:
    succ: dict = {}
    for (a, b) in edges:
        succ.setdefault(a, []).append(b)
        succ.setdefault(b, [])
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {v: WHITE for v in succ}
    for root in succ:
        if color[root] != WHITE:
            continue
        stack = [(root, iter(succ[root]))]
        color[root] = GRAY
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if color[nxt] == GRAY:
                    return False
                if color[nxt] == WHITE:
                    color[nxt] = GRAY
                    stack.append((nxt, iter(succ[nxt])))
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                stack.pop()
    return True


def check_sc_per_location(rels: dict) -> bool:
    return _acyclic(rels["rf"] | rels["co"] | rels["fr"] | rels["po_loc"])


def check_causality(rels: dict, ppo_rel: Relation) -> bool:
    return _acyclic(rels["rfe"] | rels["co"] | rels["fr"] | frozenset(ppo_rel))


def linear_extensions(edges, nodes):
    """All total orders of ``nodes`` compatible with ``edges`` (small n)."""
    preds = {v: set() for v in nodes}
    for (a, b) in edges:
        if a in preds and b in preds:
            preds[b].add(a)
    out = []

    def rec(placed, remaining):
        if not remaining:
            out.append(tuple(placed))
            return
        for v in list(remaining):
            if preds[v] <= set(placed):
                placed.append(v)
                remaining.remove(v)
                rec(placed, remaining)
                remaining.add(v)
                placed.pop()

    rec([], set(nodes))
    return out


def _mem_ppo(e: Execution, cfg: ModelConfig) -> frozenset:
    mem = {ev.id for ev in e.all_events if ev.is_memory}
    return frozenset((a, b) for (a, b) in ppo(e, cfg) if a in mem and b in mem)


def candidate_outcomes(e: Execution, rf: dict, cfg: ModelConfig) -> frozenset:
    """Outcomes accepted for one candidate, enumerating coherence orders."""
    mem = [ev for ev in e.all_events if ev.is_memory]
    if len(mem) > MAX_MEMORY_EVENTS:
        raise ResourceLimitError(
            f"test {e.test.name!r}: {len(mem)} memory events exceeds the "
            f"coherence-search cap of {MAX_MEMORY_EVENTS}")
    ppo_mem = _mem_ppo(e, cfg)
    naddr = len(e.test.locations)
    stores_by_addr = [[] for _ in range(naddr)]
    for ev in mem:
        if ev.kind == "St":
            stores_by_addr[ev.addr].append(ev.id)
    reg_values = {}
    for ev in e.all_events:
        if ev.kind in ("Ld", "RegOp"):
            reg_values[(ev.thread, ev.instr.dest)] = ev.value
    rf_t = tuple(sorted(rf.items()))
    outs: set[Outcome] = set()
    for perm_combo in itertools.product(
            *(itertools.permutations(s) for s in stores_by_addr)):
        w = ComWitness(rf_t, tuple(enumerate(perm_combo)))
        rels = derive_relations(e, w)
        if not check_sc_per_location(rels):
            continue
        if not check_causality(rels, ppo_mem):
            continue
        events = {ev.id: ev for ev in mem}
        mem_values = {a: events[perm[-1]].data
                      for a, perm in enumerate(perm_combo) if perm}
        outs.add(make_outcome(e.test, reg_values, mem_values))
    return frozenset(outs)


def allowed_outcomes(test: LitmusTest, cfg: ModelConfig, domain=None) -> frozenset:
    """The allowed-outcome set of the coherence-axioms engine."""
    if not cfg.same_addr_ldld:
        raise EngineConfigError(
            f"model {cfg.name!r} relaxes same-address load-load ordering, but "
            "the per-location-SC axiom of the coherence engine requires it; "
            "use the witness-search engine for such models")
    outs: set[Outcome] = set()
    for e, rf in axiomatic.enumerate_executions(test, domain):
        outs |= candidate_outcomes(e, rf, cfg)
    return frozenset(outs)
