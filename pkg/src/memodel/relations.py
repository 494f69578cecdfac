"""Resolved executions and the preserved-program-order relations.

An Execution is a per-thread sequence of events with every address, store
value, and load value concrete.  All relations below are intra-thread: they
constrain how far a single processor may locally reorder its instructions.
The preserved program order (``ppo``) is the transitive closure of three
parts:

* memory/fence order - pairs the active ordering table declares ordered;
* dependency order   - register data/address dependencies plus the two
  store-related cases that stop a load from observing its own future store;
* same-address order - Ld->St, St->St, and (optionally) Ld->Ld with no
  intervening same-address store.

Relations are plain frozensets of (event_id, event_id) pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .config import ModelConfig, ordered
from .litmus import Branch, Fence, Instruction, LitmusTest, Load, RegOp, Store

Relation = frozenset


@dataclass(frozen=True)
class Event:
    id: int
    thread: int
    index: int  # position in the thread's executed sequence
    instr: Instruction
    addr: Optional[int] = None   # memory events
    data: Optional[int] = None   # stores
    value: Optional[int] = None  # loads
    taken: Optional[bool] = None  # branches

    @property
    def kind(self) -> str:
        if isinstance(self.instr, Load):
            return "Ld"
        if isinstance(self.instr, Store):
            return "St"
        if isinstance(self.instr, Fence):
            return "Fence"
        if isinstance(self.instr, Branch):
            return "Branch"
        return "RegOp"

    @property
    def is_memory(self) -> bool:
        return self.kind in ("Ld", "St")

    @property
    def is_mem_or_fence(self) -> bool:
        return self.kind in ("Ld", "St", "Fence")

    @property
    def regs_read(self) -> frozenset:
        ins = self.instr
        if isinstance(ins, Load):
            return ins.addr.regs()
        if isinstance(ins, Store):
            return ins.addr.regs() | ins.data.regs()
        if isinstance(ins, RegOp):
            return ins.expr.regs()
        if isinstance(ins, Branch):
            return frozenset((ins.reg,))
        return frozenset()

    @property
    def regs_written(self) -> frozenset:
        ins = self.instr
        if isinstance(ins, (Load, RegOp)):
            return frozenset((ins.dest,))
        return frozenset()

    @property
    def addr_regs(self) -> frozenset:
        if isinstance(self.instr, (Load, Store)):
            return self.instr.addr.regs()
        return frozenset()


@dataclass(frozen=True)
class Execution:
    test: LitmusTest
    events: tuple  # tuple per thread of tuples of Event

    @property
    def all_events(self) -> tuple:
        return tuple(ev for thread in self.events for ev in thread)

    def event(self, eid: int) -> Event:
        for thread in self.events:
            for ev in thread:
                if ev.id == eid:
                    return ev
        raise KeyError(eid)

    def memory_events(self) -> tuple:
        return tuple(ev for ev in self.all_events if ev.is_memory)


def event_class(ev: Event, cfg: ModelConfig) -> str:
    """Instruction class for ordering-table lookups (fence names resolved)."""
    if ev.kind == "Fence":
        return cfg.resolve_fence(ev.instr.name)
    return ev.kind


def po(e: Execution) -> Relation:
    pairs = set()
    for thread in e.events:
        for i, a in enumerate(thread):
            for b in thread[i + 1:]:
                pairs.add((a.id, b.id))
    return frozenset(pairs)


def _last_writer_pairs(e: Execution, read_set) -> frozenset:
    """Pairs (writer, reader) where writer is the last po-earlier event
    writing some register that read_set(reader) contains."""
    pairs = set()
    for thread in e.events:
        last_writer: dict[str, Event] = {}
        for ev in thread:
            for r in read_set(ev):
                w = last_writer.get(r)
                if w is not None:
                    pairs.add((w.id, ev.id))
            for r in ev.regs_written:
                last_writer[r] = ev
    return frozenset(pairs)


def data_dep(e: Execution) -> Relation:
    """Register dependencies: last writer of a register to each reader of it."""
    return _last_writer_pairs(e, lambda ev: ev.regs_read)


def addr_dep(e: Execution) -> Relation:
    """Like data_dep but restricted to registers feeding an address computation."""
    return _last_writer_pairs(e, lambda ev: ev.addr_regs)


def ppo_mf(e: Execution, cfg: ModelConfig) -> Relation:
    pairs = set()
    for thread in e.events:
        classes = [event_class(ev, cfg) if ev.is_mem_or_fence else None
                   for ev in thread]
        for i, a in enumerate(thread):
            if classes[i] is None:
                continue
            for j in range(i + 1, len(thread)):
                if classes[j] is not None and ordered(cfg, classes[i], classes[j]):
                    pairs.add((a.id, thread[j].id))
    return frozenset(pairs)


def ppod(e: Execution) -> Relation:
    """Preserved dependency order (the four-case union)."""
    ddep = data_dep(e)
    adep = addr_dep(e)
    pairs = set(ddep)  # case 1
    for thread in e.events:
        by_id = {ev.id: ev for ev in thread}
        stores = [ev for ev in thread if ev.kind == "St"]
        # case 2: branch before store
        for i, a in enumerate(thread):
            if a.kind != "Branch":
                continue
            for b in thread[i + 1:]:
                if b.kind == "St":
                    pairs.add((a.id, b.id))
        # case 3: I1 addr-dep I, I po-before the store I2
        for (w, m) in adep:
            if w not in by_id or m not in by_id:
                continue
            mpos = by_id[m].index
            for s in stores:
                if s.index > mpos:
                    pairs.add((w, s.id))
        # case 4: I1 data-dep S, S the last same-address store before load I2
        for ld in thread:
            if ld.kind != "Ld":
                continue
            last_store = None
            for ev in thread:
                if ev.index >= ld.index:
                    break
                if ev.kind == "St" and ev.addr == ld.addr:
                    last_store = ev
            if last_store is None:
                continue
            for (w, s) in ddep:
                if s == last_store.id and w in by_id:
                    pairs.add((w, ld.id))
    return frozenset(pairs)


def ppos(e: Execution, cfg: ModelConfig) -> Relation:
    """Preserved same-address order.

    A store followed by a same-address load is deliberately not ordered here
    (local forwarding may satisfy the load early).
    """
    pairs = set()
    for thread in e.events:
        mem = [ev for ev in thread if ev.is_memory]
        for i, a in enumerate(mem):
            for j in range(i + 1, len(mem)):
                b = mem[j]
                if a.addr != b.addr:
                    continue
                if a.kind == "Ld" and b.kind == "St":
                    pairs.add((a.id, b.id))
                elif a.kind == "St" and b.kind == "St":
                    pairs.add((a.id, b.id))
                elif a.kind == "Ld" and b.kind == "Ld" and cfg.same_addr_ldld:
                    if not any(mid.kind == "St" and mid.addr == a.addr
                               for mid in mem[i + 1:j]):
                        pairs.add((a.id, b.id))
    return frozenset(pairs)


def _transitive_closure(pairs, ids_by_thread) -> frozenset:
    closed = set(pairs)
    for ids in ids_by_thread:
        succ = {i: set() for i in ids}
        for (a, b) in pairs:
            if a in succ:
                succ[a].add(b)
        # iterate in reverse program order so successor sets are complete
        for a in reversed(ids):
            acc = set(succ[a])
            for b in list(succ[a]):
                acc |= succ.get(b, set())
            succ[a] = acc
        for a, bs in succ.items():
            for b in bs:
                closed.add((a, b))
    return frozenset(closed)


def ppo(e: Execution, cfg: ModelConfig) -> Relation:
    """Preserved program order: transitive closure of the three parts."""
    base = set(ppo_mf(e, cfg)) | set(ppos(e, cfg))
    if cfg.dep_mode == "full":
        base |= set(ppod(e))
    ids_by_thread = [[ev.id for ev in thread] for thread in e.events]
    return _transitive_closure(base, ids_by_thread)


def ppo_dump(e: Execution, cfg: ModelConfig) -> str:
    """Deterministic edge listing: 'Ti.j -> Tk.l (source: mf|dep|addr|trans)'."""
    mf = ppo_mf(e, cfg)
    dep = ppod(e) if cfg.dep_mode == "full" else frozenset()
    sa = ppos(e, cfg)
    full = ppo(e, cfg)
    where = {ev.id: (ev.thread, ev.index) for ev in e.all_events}
    lines = []
    for (a, b) in sorted(full, key=lambda p: (where[p[0]], where[p[1]])):
        if (a, b) in mf:
            src = "mf"
        elif (a, b) in dep:
            src = "dep"
        elif (a, b) in sa:
            src = "addr"
        else:
            src = "trans"
        (ta, ia), (tb, ib) = where[a], where[b]
        lines.append(f"T{ta}.{ia} -> T{tb}.{ib} (source: {src})")
    return "\n".join(lines)
