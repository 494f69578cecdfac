"""Independent reference machines used to cross-check the engines.

These deliberately share no code with the engines: the interleaving oracle
is the textbook in-order machine over atomic memory (the sequential
consistency baseline), and the store-buffer oracle is the classic FIFO
write-buffer construction that defines total-store-order behavior.
"""

from __future__ import annotations

from .config import PRESETS
from .errors import ExecutionError
from .litmus import Branch, Fence, LitmusTest, Load, RegOp, Store, make_outcome


def _eval(expr, regs, addr_of):
    total = 0
    for sign, (tag, payload) in expr.terms:
        if tag == "int":
            total += sign * payload
        elif tag == "loc":
            total += sign * addr_of[payload]
        else:
            total += sign * regs.get(payload, 0)
    return total


def _addr(expr, regs, test):
    a = _eval(expr, regs, test.addr_of)
    if not 0 <= a < len(test.locations):
        raise ExecutionError(
            f"test {test.name!r}: address {a} outside declared locations")
    return a


def sc_oracle(test: LitmusTest) -> frozenset:
    """All outcomes of naive interleaving of in-order processors over atomic
    memory.  Fences order nothing an in-order atomic machine does not
    already order, so they are no-ops here."""
    addr_of = test.addr_of
    init = (tuple((0, ()) for _ in test.threads),
            tuple(v for _, v in test.locations))
    outcomes = set()
    seen = {init}
    stack = [init]
    while stack:
        procs, memory = stack.pop()
        terminal = True
        for p, (pc, regs) in enumerate(procs):
            instrs = test.threads[p][1]
            if pc >= len(instrs):
                continue
            terminal = False
            ins = instrs[pc]
            regs_d = dict(regs)
            new_memory = memory
            new_pc = pc + 1
            if isinstance(ins, Load):
                regs_d[ins.dest] = memory[_addr(ins.addr, regs_d, test)]
            elif isinstance(ins, Store):
                a = _addr(ins.addr, regs_d, test)
                v = _eval(ins.data, regs_d, addr_of)
                new_memory = memory[:a] + (v,) + memory[a + 1:]
            elif isinstance(ins, RegOp):
                regs_d[ins.dest] = _eval(ins.expr, regs_d, addr_of)
            elif isinstance(ins, Branch):
                v = regs_d.get(ins.reg, 0)
                taken = (v == ins.value) if ins.op == "==" else (v != ins.value)
                if taken:
                    new_pc = ins.target_index
            new_procs = procs[:p] + ((new_pc, tuple(sorted(regs_d.items()))),) \
                + procs[p + 1:]
            state = (new_procs, new_memory)
            if state not in seen:
                seen.add(state)
                stack.append(state)
        if terminal:
            regs_out = {}
            for p, (_, regs) in enumerate(procs):
                for r, v in regs:
                    regs_out[(p, r)] = v
            mem_out = {a: memory[a] for a in range(len(memory))}
            outcomes.add(make_outcome(test, regs_out, mem_out))
    return frozenset(outcomes)


def tso_oracle(test: LitmusTest) -> frozenset:
    """All outcomes of in-order processors with FIFO store buffers over
    atomic memory: loads forward from the own buffer, the fence waits for
    the buffer to drain, and buffer heads drain to memory at any time."""
    tso = PRESETS["tso"]
    for _, instrs in test.threads:
        for ins in instrs:
            if isinstance(ins, Fence):
                tso.resolve_fence(ins.name)  # raises for non-TSO fences
    addr_of = test.addr_of
    init = (tuple((0, (), ()) for _ in test.threads),
            tuple(v for _, v in test.locations))
    outcomes = set()
    seen = {init}
    stack = [init]
    while stack:
        procs, memory = stack.pop()
        successors = []
        for p, (pc, regs, buf) in enumerate(procs):
            instrs = test.threads[p][1]
            if buf:  # drain the oldest buffered store
                a, v = buf[0]
                successors.append((
                    procs[:p] + ((pc, regs, buf[1:]),) + procs[p + 1:],
                    memory[:a] + (v,) + memory[a + 1:]))
            if pc >= len(instrs):
                continue
            ins = instrs[pc]
            regs_d = dict(regs)
            new_buf = buf
            new_pc = pc + 1
            if isinstance(ins, Fence):
                if buf:
                    continue  # blocks until the buffer has drained
            elif isinstance(ins, Load):
                a = _addr(ins.addr, regs_d, test)
                value = memory[a]
                for (ba, bv) in reversed(buf):  # forward the youngest match
                    if ba == a:
                        value = bv
                        break
                regs_d[ins.dest] = value
            elif isinstance(ins, Store):
                a = _addr(ins.addr, regs_d, test)
                new_buf = buf + ((a, _eval(ins.data, regs_d, addr_of)),)
            elif isinstance(ins, RegOp):
                regs_d[ins.dest] = _eval(ins.expr, regs_d, addr_of)
            elif isinstance(ins, Branch):
                v = regs_d.get(ins.reg, 0)
                taken = (v == ins.value) if ins.op == "==" else (v != ins.value)
                if taken:
                    new_pc = ins.target_index
            successors.append((
                procs[:p] + ((new_pc, tuple(sorted(regs_d.items())), new_buf),)
                + procs[p + 1:], memory))
        if not successors:
            regs_out = {}
            for p, (_, regs, _) in enumerate(procs):
                for r, v in regs:
                    regs_out[(p, r)] = v
            mem_out = {a: memory[a] for a in range(len(memory))}
            outcomes.add(make_outcome(test, regs_out, mem_out))
            continue
        for state in successors:
            if state not in seen:
                seen.add(state)
                stack.append(state)
    return frozenset(outcomes)
