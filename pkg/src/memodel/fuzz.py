"""Program generation and cross-engine differential testing.

Random mode draws small well-formed programs from a seeded generator;
exhaustive mode enumerates every program shape up to a bound, so a clean run
over it is a finite proof of engine agreement at that bound.  Each generated
program is run through every requested engine and the outcome sets are
compared; one report per program is streamed as it is produced.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

from .config import ModelConfig, UnknownFenceError
from .engines import run_engine
from .errors import EngineConfigError, ExecutionError, ResourceLimitError
from .litmus import (Branch, Expr, Fence, LitmusTest, Load,
                     OutcomeCondition, Store)


@dataclass(frozen=True)
class FuzzConfig:
    seed: int = 0
    max_events: int = 4       # memory instructions per program, total
    threads: int = 2
    addresses: int = 2
    values: int = 2           # store data drawn from 0..values-1
    fence_density: float = 0.0
    mode: str = "random"      # "random" | "exhaustive" (ignores seed)


@dataclass
class EquivReport:
    test: str
    model: str
    engines: tuple
    outcomes: dict            # engine -> sorted tuple of outcomes
    agreement: bool
    diffs: list = field(default_factory=list)  # [{outcome, engines}]
    timings: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    def to_json_dict(self, with_timings=False):
        d = {
            "test": self.test,
            "model": self.model,
            "engines": list(self.engines),
            "outcomes": {e: [dict(o) for o in outs]
                         for e, outs in sorted(self.outcomes.items())},
            "agreement": self.agreement,
            "diffs": [{"outcome": dict(o), "engines": sorted(es)}
                      for (o, es) in self.diffs],
            "errors": dict(sorted(self.errors.items())),
        }
        if with_timings:
            d["timings"] = {e: round(t, 6) for e, t in sorted(self.timings.items())}
        return d


_TRIVIAL_CONDITION = OutcomeCondition("forall", ())


def _locations(n):
    names = ["x", "y", "z", "w", "v", "u", "t", "s"]
    return tuple((names[i], 0) for i in range(n))


def _const(v):
    return Expr(((1, ("int", v)),))


def _loc_expr(name):
    return Expr(((1, ("loc", name)),))


def _artificial_dep(name, reg):
    # addr + r - r: resolves to addr but reads the register
    return Expr(((1, ("loc", name)), (1, ("reg", reg)), (-1, ("reg", reg))))


def generate_random_test(fc: FuzzConfig, index: int, fence_names=()) -> LitmusTest:
    """One well-formed random program; deterministic in (fc.seed, index)."""
    rng = random.Random(fc.seed * 1_000_003 + index)
    locs = _locations(fc.addresses)
    loc_names = [n for n, _ in locs]
    threads = []
    n_events = rng.randint(1, fc.max_events)
    split = [0] * fc.threads
    for _ in range(n_events):
        split[rng.randrange(fc.threads)] += 1
    for ti in range(fc.threads):
        instrs = []
        defined = []
        reg_counter = 0
        for _ in range(split[ti]):
            if fence_names and rng.random() < fc.fence_density:
                instrs.append(Fence(rng.choice(fence_names)))
            loc = rng.choice(loc_names)
            if defined and rng.random() < 0.3:
                addr = _artificial_dep(loc, rng.choice(defined))
            else:
                addr = _loc_expr(loc)
            if rng.random() < 0.5:
                reg_counter += 1
                dest = f"r{reg_counter}"
                instrs.append(Load(dest, addr))
                defined.append(dest)
            else:
                if defined and rng.random() < 0.3:
                    data = Expr(((1, ("reg", rng.choice(defined))),))
                else:
                    data = _const(rng.randrange(fc.values))
                instrs.append(Store(addr, data))
        # at most one forward branch, over a nonempty suffix
        if len(instrs) >= 2 and defined and rng.random() < 0.25:
            at = rng.randrange(len(instrs) - 1)
            target_pos = rng.randrange(at + 1, len(instrs))
            labeled = instrs[target_pos]
            label = "L0"
            instrs[target_pos] = replace(labeled, label=label)
            instrs.insert(at, Branch(rng.choice(defined),
                                     rng.choice(("==", "!=")),
                                     rng.randrange(fc.values), label))
        threads.append((f"P{ti}", _relabel(instrs)))
    return LitmusTest(f"fuzz-{fc.seed}-{index}", locs, tuple(threads),
                      _TRIVIAL_CONDITION)


def _relabel(instrs):
    """Fix branch target indices after insertion."""
    out = []
    for ins in instrs:
        if isinstance(ins, Branch):
            target_index = next(i for i, x in enumerate(instrs)
                                if x.label == ins.target)
            out.append(Branch(ins.reg, ins.op, ins.value, ins.target,
                              target_index=target_index, label=ins.label))
        else:
            out.append(ins)
    return tuple(out)


def exhaustive_count(fc: FuzzConfig) -> int:
    """Closed-form size of the exhaustive space: programs are sequences of
    loads and stores split over the threads, so with c = addresses *
    (1 + values) instruction choices there are sum_n binom(n+T-1, T-1) * c^n
    programs of n <= max_events instructions."""
    from math import comb
    c = fc.addresses * (1 + fc.values)
    total = 0
    for n in range(fc.max_events + 1):
        total += comb(n + fc.threads - 1, fc.threads - 1) * c ** n
    return total


def exhaustive_tests(fc: FuzzConfig) -> Iterator[LitmusTest]:
    """Every program shape with up to max_events memory instructions:
    each slot is Ld a or St a v over the configured addresses and values,
    split across the threads in every way.  No fences or branches; those are
    exercised by random mode and the corpus."""
    locs = _locations(fc.addresses)
    loc_names = [n for n, _ in locs]
    choices = []
    for name in loc_names:
        choices.append(("Ld", name, None))
        for v in range(fc.values):
            choices.append(("St", name, v))
    index = 0

    def build_thread(picks):
        instrs = []
        regn = 0
        for (kind, name, v) in picks:
            if kind == "Ld":
                regn += 1
                instrs.append(Load(f"r{regn}", _loc_expr(name)))
            else:
                instrs.append(Store(_loc_expr(name), _const(v)))
        return tuple(instrs)

    def splits(n, parts):
        if parts == 1:
            yield (n,)
            return
        for first in range(n + 1):
            for rest in splits(n - first, parts - 1):
                yield (first,) + rest

    import itertools
    for n in range(fc.max_events + 1):
        for split in splits(n, fc.threads):
            pools = [itertools.product(choices, repeat=k) for k in split]
            for combo in itertools.product(*pools):
                threads = tuple((f"P{ti}", build_thread(picks))
                                for ti, picks in enumerate(combo))
                yield LitmusTest(f"ex-{index:06d}", locs, threads,
                                 _TRIVIAL_CONDITION)
                index += 1


def compare_engines(test: LitmusTest, cfg: ModelConfig, engines,
                    limits=None) -> EquivReport:
    """Run every engine on one test and diff the outcome sets."""
    outcomes = {}
    timings = {}
    errors = {}
    for eng in engines:
        t0 = time.perf_counter()
        try:
            outs = run_engine(eng, test, cfg, limits=limits)
            outcomes[eng] = tuple(sorted(outs))
        except (ResourceLimitError, ExecutionError, EngineConfigError,
                UnknownFenceError) as e:
            errors[eng] = f"{type(e).__name__}: {e}"
        timings[eng] = time.perf_counter() - t0
    ok_sets = {eng: frozenset(v) for eng, v in outcomes.items()}
    agreement = not errors and len(set(ok_sets.values())) <= 1
    diffs = []
    if ok_sets and not agreement:
        union = frozenset().union(*ok_sets.values())
        inter = frozenset.intersection(*ok_sets.values())
        for o in sorted(union - inter):
            diffs.append((o, tuple(e for e, s in sorted(ok_sets.items())
                                   if o in s)))
    return EquivReport(test.name, cfg.name, tuple(engines), outcomes,
                       agreement, diffs, timings, errors)


def fuzz_equiv(fc: FuzzConfig, cfg: ModelConfig, engines,
               count: Optional[int] = None, limits=None) -> Iterator[EquivReport]:
    """Stream one EquivReport per generated program.

    Deterministic for fixed (fc, cfg, engines, count).  Engine resource
    errors are recorded in the report, not raised."""
    if not engines:
        raise ValueError("at least one engine is required")
    if fc.mode == "exhaustive":
        tests = exhaustive_tests(fc)
    else:
        if count is None:
            raise ValueError("random mode needs a program count")
        fence_names = cfg.table.fences
        tests = (generate_random_test(fc, i, fence_names)
                 for i in range(count))
    for i, test in enumerate(tests):
        if fc.mode == "exhaustive" and count is not None and i >= count:
            break
        yield compare_engines(test, cfg, engines, limits=limits)
