"""Runtime-invariant checking for the reorder-buffer machine.

A ghost-instrumented state carries, per live entry, a fetch serial and the
global times at which it became done, computed its address, and computed its
store data, plus - for done loads - which store it read.  After every rule
the full invariant family is checked:

1. the (non-transitive) in-buffer preserved order is respected by done times;
2. address-dependency sources are done before the dependent address computes;
3. pure data sources of a store are done before its data computes;
4. every older memory instruction has its address before a store is done;
5. a done store is never killed;
6. memory holds, per address, the data of the latest-done store;
7. the store a done load read (a) still exists, (b) matches the load's
   address and value, (c/d) was the latest visible store when the source is
   done, and (e) is the nearest older same-address store when bypassed.

Timestamps diverge across interleavings, so ghost exploration runs without
memoization under an explicit step budget; every state it visits is checked.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import ResourceLimitError
from .rob import (ADDR, ADDR_AV, DONE, PIDX, RESULT, SDATA, BR, LD, ROP, ST,
                  ExploreResult, Limits, GhostInvariantViolation, Machine)

# Ghost entry layout: (serial, done_ts, addr_ts, sdata_ts, from_store)
# from_store: None | ("init",) | ("st", serial)
G_SERIAL, G_DONE, G_ADDR, G_SDATA, G_FROM = range(5)


@dataclass
class GhostMachineState:
    machine: Machine
    core: tuple
    ghost: tuple  # per proc: tuple of ghost entries
    time: int = 0
    next_serial: int = 0
    killed_done_store: bool = False


def initial_ghost_state(machine: Machine) -> GhostMachineState:
    return GhostMachineState(machine, machine.initial_state(),
                             tuple(() for _ in machine.progs))


def _gset(gentries, idx, pos, val):
    g = list(gentries[idx])
    g[pos] = val
    return gentries[:idx] + (tuple(g),) + gentries[idx + 1:]


def _latest_done_store(state: GhostMachineState, addr: int):
    """(serial, done_ts, data) of the done store to addr with max done time."""
    best = None
    for proc, (entries, _) in enumerate(state.core[0]):
        prog = state.machine.progs[proc]
        for idx, e in enumerate(entries):
            if prog[e[PIDX]].kind == ST and e[DONE] and e[ADDR] == addr:
                g = state.ghost[proc][idx]
                if best is None or g[G_DONE] > best[1]:
                    best = (g[G_SERIAL], g[G_DONE], e[SDATA])
    return best


def ghost_apply(state: GhostMachineState, rule) -> GhostMachineState:
    """Fire a rule and maintain the ghost instrumentation."""
    m = state.machine
    new_core = m.apply(state.core, rule)
    if new_core == state.core:
        return state
    name, proc, idx = rule
    time = state.time + 1
    old_entries = state.core[0][proc][0]
    new_entries = new_core[0][proc][0]
    gentries = state.ghost[proc]
    next_serial = state.next_serial
    killed = state.killed_done_store

    if name == "Fetch":
        gentries = gentries + ((next_serial, None, None, None, None),)
        next_serial += 1
    elif name in ("ExecRegToReg", "ExecFence", "ExecStore"):
        gentries = _gset(gentries, idx, G_DONE, time)
    elif name == "ComputeStoreData":
        gentries = _gset(gentries, idx, G_SDATA, time)
    elif name == "ExecBranch":
        gentries = _gset(gentries, idx, G_DONE, time)
        killed = killed or _kill_check(m, proc, old_entries, len(new_entries))
        gentries = gentries[:len(new_entries)]
    elif name == "ComputeMemAddr":
        gentries = _gset(gentries, idx, G_ADDR, time)
        killed = killed or _kill_check(m, proc, old_entries, len(new_entries))
        gentries = gentries[:len(new_entries)]
    elif name == "ExecLoad":
        a = old_entries[idx][ADDR]
        j = m._load_search(proc, old_entries, idx, a)
        if j is not None:  # bypassed from a not-done store
            src = ("st", gentries[j][G_SERIAL])
        else:
            best = _latest_done_store(state, a)
            src = ("st", best[0]) if best is not None else ("init",)
        gentries = _gset(_gset(gentries, idx, G_DONE, time), idx, G_FROM, src)

    ghost = state.ghost[:proc] + (gentries,) + state.ghost[proc + 1:]
    return GhostMachineState(m, new_core, ghost, time, next_serial, killed)


def _kill_check(m: Machine, proc, old_entries, new_len) -> bool:
    for e in old_entries[new_len:]:
        if m.progs[proc][e[PIDX]].kind == ST and e[DONE]:
            return True
    return False


def _source_regs(meta):
    ins = meta.instr
    if meta.kind == LD:
        return ins.addr.regs()
    if meta.kind == ST:
        return ins.addr.regs() | ins.data.regs()
    if meta.kind == ROP:
        return ins.expr.regs()
    if meta.kind == BR:
        return frozenset((ins.reg,))
    return frozenset()


def _dep_edges(m: Machine, proc, entries):
    """(data_dep, addr_dep) pairs of entry indices, from the current buffer."""
    prog = m.progs[proc]
    ddep, adep = set(), set()
    for j, ej in enumerate(entries):
        meta = prog[ej[PIDX]]
        for kind, regs in (("d", _source_regs(meta)),
                           ("a", meta.instr.addr.regs()
                            if meta.kind in (LD, ST) else frozenset())):
            for r in regs:
                for i in range(j - 1, -1, -1):
                    if prog[entries[i][PIDX]].dest == r:
                        (ddep if kind == "d" else adep).add((i, j))
                        break
    return ddep, adep


def _ntppo_pairs(m: Machine, proc, entries):
    """The non-transitive preserved order over the current buffer contents.

    Clauses needing an address ignore entries that have not computed one."""
    prog = m.progs[proc]
    ddep, adep = _dep_edges(m, proc, entries)
    metas = [prog[e[PIDX]] for e in entries]
    addr = [e[ADDR] if e[ADDR_AV] else None for e in entries]
    pairs = set(ddep)
    n = len(entries)
    for j in range(n):
        mj = metas[j]
        if mj.kind == ST:
            for i in range(j):
                if metas[i].kind == BR:
                    pairs.add((i, j))
            for (i, k) in adep:
                if k < j and metas[k].kind in (LD, ST):
                    pairs.add((i, j))
        if mj.kind == LD and addr[j] is not None:
            a = addr[j]
            s = None
            for k in range(j - 1, -1, -1):
                if metas[k].kind == ST and addr[k] == a:
                    s = k
                    break
            if s is not None:
                for (i, k) in ddep:
                    if k == s:
                        pairs.add((i, j))
        for i in range(j):
            mi = metas[i]
            if addr[i] is not None and addr[j] is not None and addr[i] == addr[j]:
                if mi.kind == LD and mj.kind == ST:
                    pairs.add((i, j))
                elif mi.kind == ST and mj.kind == ST:
                    pairs.add((i, j))
                elif mi.kind == LD and mj.kind == LD and m.same_addr_ldld:
                    if not any(metas[k].kind == ST and addr[k] == addr[i]
                               for k in range(i + 1, j)):
                        pairs.add((i, j))
            if mi.cls is not None and mj.cls is not None and \
                    (mi.cls, mj.cls) in m._ordered:
                pairs.add((i, j))
    return pairs


def ghost_violation(state: GhostMachineState) -> Optional[str]:
    """The first violated invariant item, or None when all hold."""
    m = state.machine
    if state.killed_done_store:
        return "5: a done store was killed"
    live: dict = {}
    for proc, (entries, _) in enumerate(state.core[0]):
        for idx, e in enumerate(entries):
            g = state.ghost[proc][idx]
            live[g[G_SERIAL]] = (proc, idx, e, m.progs[proc][e[PIDX]], g)

    for proc, (entries, _) in enumerate(state.core[0]):
        prog = m.progs[proc]
        gs = state.ghost[proc]
        metas = [prog[e[PIDX]] for e in entries]
        for (i, j) in _ntppo_pairs(m, proc, entries):
            if gs[j][G_DONE] is not None and \
                    (gs[i][G_DONE] is None or gs[i][G_DONE] >= gs[j][G_DONE]):
                return f"1: T{proc}.{i} not done before T{proc}.{j}"
        ddep, adep = _dep_edges(m, proc, entries)
        for (i, j) in adep:
            if gs[j][G_ADDR] is not None and \
                    (gs[i][G_DONE] is None or gs[i][G_DONE] >= gs[j][G_ADDR]):
                return f"2: address of T{proc}.{j} computed before T{proc}.{i} done"
        for (i, j) in ddep - adep:
            if metas[j].kind == ST and gs[j][G_SDATA] is not None and \
                    (gs[i][G_DONE] is None or gs[i][G_DONE] >= gs[j][G_SDATA]):
                return f"3: data of T{proc}.{j} computed before T{proc}.{i} done"
        for j in range(len(entries)):
            if metas[j].kind == ST and gs[j][G_DONE] is not None:
                for i in range(j):
                    if metas[i].kind in (LD, ST) and \
                            (gs[i][G_ADDR] is None or gs[i][G_ADDR] >= gs[j][G_DONE]):
                        return (f"4: store T{proc}.{j} done before address of "
                                f"T{proc}.{i}")

    memory = state.core[1]
    for a in range(m.naddr):
        best = _latest_done_store(state, a)
        expect = best[2] if best is not None else m.test.locations[a][1]
        if memory[a] != expect:
            return f"6: memory[{a}] = {memory[a]}, latest done store says {expect}"

    for proc, (entries, _) in enumerate(state.core[0]):
        prog = m.progs[proc]
        for idx, e in enumerate(entries):
            if prog[e[PIDX]].kind != LD or not e[DONE]:
                continue
            g = state.ghost[proc][idx]
            a, v = e[ADDR], e[RESULT]
            item = _check_load_source(m, state, live, proc, idx, e, g, a, v)
            if item is not None:
                return item
    return None


def _check_load_source(m, state, live, proc, idx, e, g, a, v):
    src = g[G_FROM]
    entries = state.core[0][proc][0]
    prog = m.progs[proc]
    if src is None:
        return f"7: done load T{proc}.{idx} has no recorded source"
    if src == ("init",):
        if v != m.test.locations[a][1]:
            return f"7b: T{proc}.{idx} read {v}, init value is {m.test.locations[a][1]}"
        s_done, s_ts, s_serial = True, -1, None
    else:
        if src[1] not in live:
            return f"7a: source store of T{proc}.{idx} was killed"
        sproc, sidx, se, smeta, sg = live[src[1]]
        if smeta.kind != ST or se[ADDR] != a or se[SDATA] != v:
            return f"7b: source of T{proc}.{idx} mismatches address or value"
        s_done, s_ts, s_serial = se[DONE], sg[G_DONE], src[1]
        if not s_done:
            # 7e: bypassed store is po-earlier with no same-address store between
            if sproc != proc or sidx >= idx:
                return f"7e: bypass source of T{proc}.{idx} is not an older entry"
            for k in range(sidx + 1, idx):
                ek = entries[k]
                if prog[ek[PIDX]].kind == ST and ek[ADDR_AV] and ek[ADDR] == a:
                    return (f"7e: same-address store between bypass source and "
                            f"T{proc}.{idx}")
            return None
    # source is done (or the init store): 7c and 7d
    for k in range(idx):
        ek = entries[k]
        if prog[ek[PIDX]].kind == ST and not ek[DONE] and \
                ek[ADDR_AV] and ek[ADDR] == a:
            return f"7c: not-done same-address store older than done T{proc}.{idx}"
    for serial, (p2, i2, e2, m2, g2) in live.items():
        if m2.kind != ST or serial == s_serial or not e2[DONE] or e2[ADDR] != a:
            continue
        visible = (p2 == proc and i2 < idx) or g2[G_DONE] < g[G_DONE]
        if visible and g2[G_DONE] >= s_ts:
            return (f"7d: done load T{proc}.{idx} source overshadowed by "
                    f"store serial {serial}")
    return None


def check_ghost_invariants(state: GhostMachineState) -> bool:
    """True when every runtime invariant holds of the instrumented state."""
    return ghost_violation(state) is None


def explore_ghost(test, cfg, limits: Limits, paths: int = 200,
                  seed: int = 0) -> ExploreResult:
    """Walk seeded random maximal executions, asserting every state visited.

    Timestamps make ghost states path-unique, so memoized exhaustion is
    impossible; instead this samples complete rule interleavings uniformly
    (no reductions) and checks the invariant family after every rule.  The
    walk stops early, reporting truncation, if limits.max_steps is reached.
    Raises GhostInvariantViolation on the first failing state."""
    import random

    m = Machine(test, cfg)
    rng = random.Random(seed)
    outcomes = set()
    steps = 0
    checked = 0
    truncated = False
    for _ in range(paths):
        if truncated:
            break
        state = initial_ghost_state(m)
        while not m.is_terminal(state.core):
            if steps >= limits.max_steps:
                truncated = True
                break
            eager, normal = m._enabled_split(state.core)
            rules = eager + normal
            rng.shuffle(rules)
            next_state = None
            for rule in rules:
                steps += 1
                candidate = ghost_apply(state, rule)
                if candidate is not state:
                    next_state = candidate
                    break
            if next_state is None:
                raise ResourceLimitError(
                    f"test {test.name!r}: ghost exploration stuck")
            item = ghost_violation(next_state)
            checked += 1
            if item is not None:
                raise GhostInvariantViolation(item, rule)
            state = next_state
        else:
            outcomes.add(m.outcome(state.core))
    return ExploreResult(frozenset(outcomes), states=checked, steps=steps,
                         truncated=truncated, ghost_states_checked=checked)
