"""Command-line interface.

Subcommands:

* ``check``     run one engine on litmus files and judge their conditions
* ``equiv``     run several engines on litmus files and diff the outcome sets
* ``fuzz``      generate programs (random or exhaustive) and diff engines
* ``ppo-dump``  print the preserved-program-order edges of a test

Exit codes: 0 success / verdict as expected; 1 condition failed, engines
disagreed, or an invariant check failed; 2 usage, parse, or configuration
error; 3 resource limit exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import axiomatic, com, relations, rob
from .config import (ConfigError, ModelConfig, PRESETS, UnknownFenceError,
                     get_preset, load_model_config, ordered, with_forced_ldst)
from .engines import ENGINES, run_engine
from .errors import EngineConfigError, ExecutionError, ResourceLimitError
from .fuzz import FuzzConfig, compare_engines, fuzz_equiv
from .litmus import (Fence, LitmusError, eval_condition, parse_litmus,
                     success_verdict)
from .rob_ghost import GhostInvariantViolation

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_LIMIT = 0, 1, 2, 3


class _CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _load_model(spec: str, force_ldst: bool) -> ModelConfig:
    if spec in PRESETS:
        cfg = get_preset(spec)
    elif os.path.exists(spec):
        cfg = load_model_config(spec)
    else:
        raise _CliError(
            f"--model {spec!r} is neither a preset "
            f"({', '.join(sorted(PRESETS))}) nor a readable file")
    return with_forced_ldst(cfg) if force_ldst else cfg


def _load_tests(paths):
    tests = []
    for path in paths:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise _CliError(f"cannot read {path}: {e}")
        tests.append(parse_litmus(text))
    return tests


def _fences_resolve(test, cfg) -> bool:
    try:
        for _, instrs in test.threads:
            for ins in instrs:
                if isinstance(ins, Fence):
                    cfg.resolve_fence(ins.name)
        return True
    except UnknownFenceError:
        return False


def _check_engine_compat(engine, cfg):
    if engine == "i2e" and not ordered(cfg, "Ld", "St"):
        raise _CliError(
            f"model {cfg.name!r} leaves (Ld, St) unordered; the in-order "
            "engine needs it ordered (pass --force-ldst to run the adapted "
            "table on every engine in this invocation)")
    if engine == "com" and not cfg.same_addr_ldld:
        raise _CliError(
            f"model {cfg.name!r} relaxes same-address load-load ordering, "
            "which the coherence engine's per-location-SC axiom requires")
    if engine == "rob" and cfg.dep_mode != "full":
        raise _CliError(
            f"model {cfg.name!r} drops dependency ordering; the "
            "reorder-buffer engine hard-wires it (use the in-order engine)")


def _parse_outcome_spec(spec: str):
    """'P1:r1=1,x=0' -> list of (key, value) the outcome must contain."""
    pairs = []
    for part in spec.split(","):
        part = part.strip()
        if "=" not in part:
            raise _CliError(f"bad outcome spec component {part!r}")
        key, _, val = part.rpartition("=")
        try:
            pairs.append((key.strip(), int(val)))
        except ValueError:
            raise _CliError(f"bad outcome value in {part!r}")
    return pairs


def _outcome_matches(outcome, pairs) -> bool:
    d = dict(outcome)
    return all(d.get(k) == v for k, v in pairs)


def cmd_check(args) -> int:
    cfg = _load_model(args.model, args.force_ldst)
    _check_engine_compat(args.engine, cfg)
    limits = rob.Limits(max_steps=args.max_steps)
    code = EXIT_OK
    for test in _load_tests(args.files):
        if not _fences_resolve(test, cfg):
            raise _CliError(
                f"test {test.name!r} uses a fence that model {cfg.name!r} "
                "does not declare")
        if args.assert_ghost:
            if args.engine != "rob":
                raise _CliError("--assert-ghost applies to the rob engine only")
            try:
                res = rob.explore(test, cfg, limits=limits, assert_ghost=True)
            except GhostInvariantViolation as e:
                print(f"{test.name}: GHOST VIOLATION: {e}")
                return EXIT_FAIL
            note = " (truncated)" if res.truncated else ""
            print(f"{test.name}: ghost invariants hold on "
                  f"{res.ghost_states_checked} states{note}")
            # judge the condition on the complete outcome set, not the sample
            outcomes = run_engine("rob", test, cfg, limits=limits)
        else:
            outcomes = run_engine(args.engine, test, cfg, limits=limits)
        verdict = eval_condition(test.condition, outcomes)
        ok = verdict == success_verdict(test.condition)
        if args.json:
            print(json.dumps({
                "test": test.name, "model": cfg.name, "engine": args.engine,
                "outcomes": [dict(o) for o in sorted(outcomes)],
                "condition_verdict": verdict,
            }, sort_keys=True))
        else:
            print(f"{test.name}: {test.condition.quantifier} -> {verdict}"
                  f" [{'ok' if ok else 'FAIL'}]")
        if not ok:
            code = EXIT_FAIL
        if args.trace is not None:
            code = max(code, _emit_trace(args, test, cfg, outcomes, limits))
        if args.emit_witness is not None:
            code = max(code, _emit_witness(args, test, cfg, outcomes))
    return code


def _emit_trace(args, test, cfg, outcomes, limits) -> int:
    if args.engine != "rob":
        raise _CliError("--trace applies to the rob engine only")
    pairs = _parse_outcome_spec(args.trace)
    target = next((o for o in sorted(outcomes) if _outcome_matches(o, pairs)),
                  None)
    if target is None:
        print(f"{test.name}: no allowed outcome matches {args.trace!r}")
        return EXIT_FAIL
    res = rob.explore(test, cfg, limits=limits, trace_outcome=target)
    print(f"# trace for {dict(target)}")
    for (rule, proc, idx) in res.trace:
        print(f"  {rule} P{proc}" + (f" slot {idx}" if rule != "Fetch" else
                                     f" predict {idx}"))
    return EXIT_OK


def _emit_witness(args, test, cfg, outcomes) -> int:
    if args.engine != "com":
        raise _CliError("--emit-witness applies to the com engine only")
    pairs = _parse_outcome_spec(args.emit_witness)
    target = next((o for o in sorted(outcomes) if _outcome_matches(o, pairs)),
                  None)
    if target is None:
        print(f"{test.name}: no allowed outcome matches {args.emit_witness!r}")
        return EXIT_FAIL
    for e, rf in axiomatic.enumerate_executions(test):
        for w, rels in _accepting_com_witnesses(e, rf, cfg):
            got = com.candidate_outcomes(e, rf, cfg)
            if target in got:
                _print_witness(test, e, w, rels)
                return EXIT_OK
    return EXIT_FAIL


def _accepting_com_witnesses(e, rf, cfg):
    import itertools
    mem = [ev for ev in e.all_events if ev.is_memory]
    stores_by_addr = [[] for _ in range(len(e.test.locations))]
    for ev in mem:
        if ev.kind == "St":
            stores_by_addr[ev.addr].append(ev.id)
    ppo_mem = com._mem_ppo(e, cfg)
    rf_t = tuple(sorted(rf.items()))
    for combo in itertools.product(
            *(itertools.permutations(s) for s in stores_by_addr)):
        w = com.ComWitness(rf_t, tuple(enumerate(combo)))
        rels = com.derive_relations(e, w)
        if com.check_sc_per_location(rels) and com.check_causality(rels, ppo_mem):
            yield w, rels


def _print_witness(test, e, w, rels):
    where = {ev.id: f"T{ev.thread}.{ev.index}" for ev in e.all_events}
    for a in range(len(test.locations)):
        where[com.init_id(a)] = f"init:{test.locations[a][0]}"
    for name in ("rf", "co", "fr"):
        edges = sorted((where[x], where[y]) for (x, y) in rels[name])
        print(f"{name}: " + " ".join(f"{x}->{y}" for x, y in edges))


def cmd_equiv(args) -> int:
    cfg = _load_model(args.model, args.force_ldst)
    engines = args.engines.split(",")
    for eng in engines:
        if eng not in ENGINES:
            raise _CliError(f"unknown engine {eng!r}")
        _check_engine_compat(eng, cfg)
    limits = rob.Limits(max_steps=args.max_steps)
    code = EXIT_OK
    for test in _load_tests(args.files):
        if not _fences_resolve(test, cfg):
            print(json.dumps({"test": test.name, "model": cfg.name,
                              "skipped": "fence not declared by model"})
                  if args.json else f"{test.name}: skipped (fence not in model)")
            continue
        rep = compare_engines(test, cfg, engines, limits=limits)
        if args.json:
            print(json.dumps(rep.to_json_dict(with_timings=args.timings),
                             sort_keys=True))
        else:
            sizes = " ".join(f"{e}={len(rep.outcomes.get(e, ()))}"
                             for e in engines)
            status = "agree" if rep.agreement else "DISAGREE"
            print(f"{test.name}: {status} ({sizes})")
        if rep.errors and any("ResourceLimit" in v for v in rep.errors.values()):
            code = max(code, EXIT_LIMIT)
        elif not rep.agreement:
            code = max(code, EXIT_FAIL)
    return code


def cmd_fuzz(args) -> int:
    cfg = _load_model(args.model, args.force_ldst)
    engines = args.engines.split(",")
    for eng in engines:
        if eng not in ENGINES:
            raise _CliError(f"unknown engine {eng!r}")
        _check_engine_compat(eng, cfg)
    fc = FuzzConfig(seed=args.seed, max_events=args.max_events,
                    threads=args.threads, addresses=args.addrs,
                    values=args.values, fence_density=args.fence_density,
                    mode="exhaustive" if args.exhaustive else "random")
    if not args.exhaustive and args.count is None:
        raise _CliError("random fuzz needs --count")
    limits = rob.Limits(max_steps=args.max_steps)
    code = EXIT_OK
    total = disagreements = 0
    for rep in fuzz_equiv(fc, cfg, engines, count=args.count, limits=limits):
        total += 1
        if args.json:
            print(json.dumps(rep.to_json_dict(with_timings=args.timings),
                             sort_keys=True))
        elif not rep.agreement:
            print(f"{rep.test}: DISAGREE {rep.errors or ''}")
        if not rep.agreement:
            disagreements += 1
            code = max(code, EXIT_FAIL)
    if not args.json:
        print(f"{total} programs, {disagreements} disagreements")
    return code


def cmd_ppo_dump(args) -> int:
    cfg = _load_model(args.model, args.force_ldst)
    (test,) = _load_tests([args.file])
    if not _fences_resolve(test, cfg):
        raise _CliError(
            f"test {test.name!r} uses a fence that model {cfg.name!r} "
            "does not declare")
    try:
        e, _rf = next(axiomatic.enumerate_executions(test))
    except StopIteration:
        raise _CliError(f"test {test.name!r} has no consistent execution")
    print(relations.ppo_dump(e, cfg))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="memodel",
        description="Litmus-test checker for table-parameterized atomic "
                    "memory models")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--model", default="gam-rmo-fences",
                        help="preset name or JSON model file")
        sp.add_argument("--force-ldst", action="store_true",
                        help="force the (Ld, St) table entry true (in-order "
                             "engine adaptation, applied to every engine)")
        sp.add_argument("--max-steps", type=int, default=1_000_000)
        sp.add_argument("--json", action="store_true")
        sp.add_argument("--timings", action="store_true",
                        help="include wall-clock timings in JSON output "
                             "(breaks byte-determinism)")

    sp = sub.add_parser("check", help="judge litmus conditions under one engine")
    common(sp)
    sp.add_argument("--engine", default="axiomatic", choices=ENGINES)
    sp.add_argument("--assert-ghost", action="store_true",
                    help="rob only: check runtime invariants on every "
                         "explored state")
    sp.add_argument("--trace", metavar="OUTCOME",
                    help="rob only: print one rule sequence reaching the "
                         "outcome, e.g. 'P0:r1=0,P1:r2=0'")
    sp.add_argument("--emit-witness", metavar="OUTCOME",
                    help="com only: print rf/co/fr edges accepting the outcome")
    sp.add_argument("files", nargs="+")
    sp.set_defaults(fn=cmd_check)

    sp = sub.add_parser("equiv", help="diff engines on litmus files")
    common(sp)
    sp.add_argument("--engines", default="axiomatic,com")
    sp.add_argument("files", nargs="+")
    sp.set_defaults(fn=cmd_equiv)

    sp = sub.add_parser("fuzz", help="diff engines on generated programs")
    common(sp)
    sp.add_argument("--engines", default="axiomatic,com")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=None,
                    help="number of programs (random mode; cap in exhaustive)")
    sp.add_argument("--exhaustive", action="store_true")
    sp.add_argument("--max-events", type=int, default=4)
    sp.add_argument("--threads", type=int, default=2)
    sp.add_argument("--addrs", type=int, default=2)
    sp.add_argument("--values", type=int, default=2)
    sp.add_argument("--fence-density", type=float, default=0.0)
    sp.set_defaults(fn=cmd_fuzz)

    sp = sub.add_parser("ppo-dump",
                        help="print preserved-program-order edges of the "
                             "first consistent execution")
    common(sp)
    sp.add_argument("file")
    sp.set_defaults(fn=cmd_ppo_dump)
    return p


def run_cli(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except _CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (LitmusError, ConfigError, EngineConfigError, ExecutionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceLimitError as e:
        print(f"resource limit: {e}", file=sys.stderr)
        return EXIT_LIMIT


def main():
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
