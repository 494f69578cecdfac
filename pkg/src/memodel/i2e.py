"""In-order instantaneous-execution machine with store/fence buffers.

Processors execute instructions in program order and instantaneously, so at
every step all older information (addresses, values) is known and the
preserved program order into the next instruction can be computed exactly as
the axiomatic side computes it - which is what lets this engine be
parameterized by any dependency-order choice, including none.  Weak behavior
comes from two sources of slack:

* executed stores and fences wait in a per-processor buffer and drain when
  nothing preserved-ordered-before them is still buffered;
* an executing load is inserted into the global memory list at any point
  after all its preserved-order predecessors, and reads the youngest
  same-address store that is buffered locally, or failing that the youngest
  one in the list that is its own processor's or older than itself.

The table must order Ld before St; load-store reordering cannot be expressed
in-order.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import ModelConfig, ordered
from .errors import EngineConfigError, ExecutionError, ResourceLimitError
from .litmus import LitmusTest, Outcome, make_outcome
from .relations import Event, Execution, Relation, ppo
from .rob import _Instr, BR, FEN, ROP, ST, ExploreResult, Limits

# proc state: (pc, regs, hist, buffer)
# hist items: (pidx, addr_or_None); buffer items: (hist_idx, kind, addr, data)
# memlist items: (proc, hist_idx, is_store, addr, data)


@dataclass(frozen=True)
class ProcView:
    """One processor's executed prefix plus (optionally) its next instruction,
    with the next instruction's address already resolvable."""

    test: LitmusTest
    thread: int
    hist: tuple  # of (pidx, addr_or_None)
    next_pidx: int = -1
    next_addr: int = None


def _view_events(view: ProcView):
    instrs = view.test.threads[view.thread][1]
    events = [Event(id=k, thread=0, index=k, instr=instrs[pidx], addr=addr)
              for k, (pidx, addr) in enumerate(view.hist)]
    if view.next_pidx >= 0:
        k = len(events)
        events.append(Event(id=k, thread=0, index=k,
                            instr=instrs[view.next_pidx], addr=view.next_addr))
    return events


def ppo_i2e(view: ProcView, cfg: ModelConfig) -> Relation:
    """Preserved program order over a processor's executed prefix (plus next).

    Never consults any load value: the relations only look at kinds,
    registers, and addresses."""
    events = _view_events(view)
    exe = Execution(view.test, (tuple(events),))
    return ppo(exe, cfg)


class I2EMachine:
    def __init__(self, test: LitmusTest, cfg: ModelConfig):
        if not ordered(cfg, "Ld", "St"):
            raise EngineConfigError(
                f"model {cfg.name!r} leaves (Ld, St) unordered; the in-order "
                "engine requires load-to-store ordering (rerun with the "
                "entry forced true, or use another engine)")
        self.test = test
        self.cfg = cfg
        self.progs = [[_Instr(ins, cfg) for ins in instrs]
                      for _, instrs in test.threads]
        self.regnames = [test.thread_registers(ti)
                         for ti in range(len(test.threads))]
        self.regidx = [{r: i for i, r in enumerate(names)}
                       for names in self.regnames]
        self.naddr = len(test.locations)
        self._ppo_cache: dict = {}

    def initial_state(self):
        procs = tuple((0, (0,) * len(names), (), ())
                      for names in self.regnames)
        return (procs, ())

    def is_terminal(self, state):
        procs, _ = state
        return all(pc >= len(self.progs[p]) and not buf
                   for p, (pc, _, _, buf) in enumerate(procs))

    def outcome(self, state) -> Outcome:
        procs, memlist = state
        regs = {}
        for p, (pc, rvals, _, _) in enumerate(procs):
            for r, v in zip(self.regnames[p], rvals):
                regs[(p, r)] = v
        mem = {}
        for (_, _, is_store, addr, data) in memlist:
            if is_store:
                mem[addr] = data  # later entries overwrite: youngest wins
        return make_outcome(self.test, regs, mem)

    # -- preserved-order queries (cached; histories repeat across states) --

    def _ppo_into(self, proc, hist, next_pidx, next_addr):
        """Indices of executed events preserved-ordered before the next
        instruction."""
        key = (proc, hist, next_pidx, next_addr)
        hit = self._ppo_cache.get(key)
        if hit is not None:
            return hit
        view = ProcView(self.test, proc, hist, next_pidx, next_addr)
        rel = ppo_i2e(view, self.cfg)
        target = len(hist)
        result = frozenset(a for (a, b) in rel if b == target)
        self._ppo_cache[key] = result
        return result

    def _ppo_into_executed(self, proc, hist, target_idx):
        """Same, for a target already inside the executed prefix."""
        key = (proc, hist, "x", target_idx)
        hit = self._ppo_cache.get(key)
        if hit is not None:
            return hit
        view = ProcView(self.test, proc, hist)
        rel = ppo_i2e(view, self.cfg)
        result = frozenset(a for (a, b) in rel if b == target_idx)
        self._ppo_cache[key] = result
        return result

    # -- rules -------------------------------------------------------------

    def _eval(self, proc, regs, expr):
        total = 0
        for sign, (tag, payload) in expr.terms:
            if tag == "int":
                total += sign * payload
            elif tag == "loc":
                total += sign * self.test.addr_of[payload]
            else:
                total += sign * regs[self.regidx[proc][payload]]
        return total

    def _addr(self, proc, regs, meta, pidx):
        a = self._eval(proc, regs, meta.addr_expr)
        if not 0 <= a < self.naddr:
            names = ", ".join(self.test.location_names)
            raise ExecutionError(
                f"test {self.test.name!r}: address expression of "
                f"T{proc}.{pidx} resolved to {a}, outside declared "
                f"locations ({names})")
        return a

    def enabled_split(self, state):
        """(eager, normal) rule instances.  Register/branch steps, store and
        fence execution, and fence dequeues touch no globally-ordered state,
        so they are fired eagerly; load insertion points and store dequeues
        branch the search."""
        procs, memlist = state
        eager, normal = [], []
        for p, (pc, regs, hist, buf) in enumerate(procs):
            prog = self.progs[p]
            if pc < len(prog):
                meta = prog[pc]
                if meta.kind in (ROP, BR):
                    eager.append(("ExecRegBranch", p, -1))
                elif meta.kind in (ST, FEN):
                    eager.append(("ExecStoreFence", p, -1))
                else:
                    a = self._addr(p, regs, meta, pc)
                    before = self._ppo_into(p, hist, pc, a)
                    if not any(b[0] in before for b in buf):
                        lo = 0
                        for pos, (mp, mh, _, _, _) in enumerate(memlist):
                            if mp == p and mh in before:
                                lo = pos + 1
                        for pos in range(lo, len(memlist) + 1):
                            normal.append(("ExecLoad", p, pos))
            for k, b in enumerate(buf):
                before = self._ppo_into_executed(p, hist, b[0])
                if any(other[0] in before for other in buf if other is not b):
                    continue
                if b[1] == ST:
                    normal.append(("DequeueStore", p, k))
                else:
                    eager.append(("DequeueFence", p, k))
        return eager, normal

    def enabled(self, state):
        eager, normal = self.enabled_split(state)
        return eager + normal

    def apply(self, state, rule):
        name, p, arg = rule
        procs, memlist = state
        pc, regs, hist, buf = procs[p]
        prog = self.progs[p]

        def put(pc=pc, regs=regs, hist=hist, buf=buf, memlist=memlist):
            new_procs = procs[:p] + ((pc, regs, hist, buf),) + procs[p + 1:]
            return (new_procs, memlist)

        if name == "ExecRegBranch":
            meta = prog[pc]
            if meta.kind == ROP:
                v = self._eval(p, regs, meta.expr)
                i = self.regidx[p][meta.dest]
                return put(pc + 1, regs[:i] + (v,) + regs[i + 1:],
                           hist + ((pc, None),))
            reg, op, cmp = meta.cond
            v = regs[self.regidx[p][reg]]
            taken = (v == cmp) if op == "==" else (v != cmp)
            return put(meta.target if taken else pc + 1,
                       regs, hist + ((pc, None),))

        if name == "ExecStoreFence":
            meta = prog[pc]
            if meta.kind == ST:
                a = self._addr(p, regs, meta, pc)
                data = self._eval(p, regs, meta.data_expr)
                return put(pc + 1, regs, hist + ((pc, a),),
                           buf + ((len(hist), ST, a, data),))
            return put(pc + 1, regs, hist + ((pc, None),),
                       buf + ((len(hist), FEN, None, None),))

        if name == "ExecLoad":
            meta = prog[pc]
            a = self._addr(p, regs, meta, pc)
            new_list = memlist[:arg] + ((p, len(hist), 0, a, None),) + memlist[arg:]
            value = None
            for (_, kind, ba, bd) in reversed(buf):
                if kind == ST and ba == a:
                    value = bd
                    break
            if value is None:
                best = -1
                for pos, (mp, _, is_store, ma, md) in enumerate(new_list):
                    if is_store and ma == a and (mp == p or pos < arg):
                        if pos > best:
                            best, value = pos, md
                if best < 0:
                    value = self.test.initial_value(a)
            i = self.regidx[p][meta.dest]
            return put(pc + 1, regs[:i] + (value,) + regs[i + 1:],
                       hist + ((pc, a),), buf, new_list)

        if name == "DequeueStore":
            hist_idx, _, a, data = buf[arg]
            return put(buf=buf[:arg] + buf[arg + 1:],
                       memlist=memlist + ((p, hist_idx, 1, a, data),))

        if name == "DequeueFence":
            return put(buf=buf[:arg] + buf[arg + 1:])

        raise ValueError(f"unknown rule {name!r}")


def enabled_i2e(state, cfg: ModelConfig, test: LitmusTest):
    return I2EMachine(test, cfg).enabled(state)


def apply_i2e(state, rule, cfg: ModelConfig, test: LitmusTest):
    return I2EMachine(test, cfg).apply(state, rule)


def explore(test: LitmusTest, cfg: ModelConfig, limits: Limits = None,
            reduce: bool = True) -> ExploreResult:
    """Outcomes of all maximal executions (everything executed, buffers
    drained), depth-first with memoization."""
    limits = limits or Limits()
    m = I2EMachine(test, cfg)
    init = m.initial_state()
    visited = {init}
    stack = [init]
    outcomes = set()
    steps = 0
    while stack:
        state = stack.pop()
        if m.is_terminal(state):
            outcomes.add(m.outcome(state))
            continue
        eager, normal = m.enabled_split(state)
        rules = eager[:1] if (reduce and eager) else (eager + normal)
        if not rules:
            raise ExecutionError(
                f"test {test.name!r}: in-order machine is stuck")
        for rule in rules:
            steps += 1
            if steps > limits.max_steps:
                raise ResourceLimitError(
                    f"test {test.name!r}: exceeded {limits.max_steps} rule "
                    "applications")
            new_state = m.apply(state, rule)
            if new_state in visited:
                continue
            if len(visited) >= limits.max_states:
                raise ResourceLimitError(
                    f"test {test.name!r}: exceeded {limits.max_states} states")
            visited.add(new_state)
            stack.append(new_state)
    return ExploreResult(frozenset(outcomes), states=len(visited), steps=steps)


def allowed_outcomes(test: LitmusTest, cfg: ModelConfig, limits=None) -> frozenset:
    return explore(test, cfg, limits=limits).outcomes
