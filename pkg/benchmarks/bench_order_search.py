#!/usr/bin/env python3
"""Benchmark the compiled vs pure-Python order-search kernels.

Records every kernel invocation made while the witness-search engine runs a
batch of random programs, then replays the recorded inputs against each
available backend.  Run from the repository root:

    python3 benchmarks/bench_order_search.py [--programs N] [--max-events K]
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from memodel import axiomatic  # noqa: E402
from memodel.config import get_preset  # noqa: E402
from memodel.fuzz import FuzzConfig, generate_random_test  # noqa: E402
from memodel.order_search import available_backends  # noqa: E402


def record_workload(n_programs, max_events, seed=1234):
    cfg = get_preset("gam-rmo-fences")
    fc = FuzzConfig(seed=seed, max_events=max_events, threads=2, addresses=2,
                    values=2, fence_density=0.2)
    calls = []
    real = axiomatic.order_outcomes

    def recorder(*args):
        calls.append(args)
        return real(*args)

    axiomatic.order_outcomes = recorder
    try:
        for i in range(n_programs):
            test = generate_random_test(fc, i, cfg.table.fences)
            axiomatic.allowed_outcomes(test, cfg)
    finally:
        axiomatic.order_outcomes = real
    return calls


def bench(fn, calls, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for args in calls:
            fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--programs", type=int, default=400)
    ap.add_argument("--max-events", type=int, default=7)
    args = ap.parse_args()

    print(f"recording workload: {args.programs} programs, "
          f"<= {args.max_events} memory events ...")
    calls = record_workload(args.programs, args.max_events)
    sizes = [c[0] for c in calls]
    print(f"{len(calls)} kernel calls, mean events "
          f"{sum(sizes) / max(len(sizes), 1):.1f}, max {max(sizes, default=0)}")

    backends = available_backends()
    times = {}
    for name, mod in sorted(backends.items()):
        times[name] = bench(mod.order_outcomes, calls)
        rate = len(calls) / times[name]
        print(f"backend {name:>7}: {times[name]:.3f}s  ({rate:,.0f} calls/s)")
    if "c" in times and "python" in times:
        print(f"speedup (python/c): {times['python'] / times['c']:.1f}x")
    else:
        print("compiled backend not built; run: python3 setup.py build_ext --inplace")


if __name__ == "__main__":
    main()
