"""Ordering tables and model configuration.

A memory model is parameterized by a boolean table over instruction classes
(Ld, St, and the model's fences) saying which older->younger pairs must stay
ordered, plus two variant flags:

* ``same_addr_ldld`` - whether two same-address loads with no intervening
  store are kept in order (True for the default model, False for RMO).
* ``dep_mode`` - "full" keeps the dependency-order component, "none" drops it
  (used by WMM, which runs on the in-order engine).

Tables for the shipped presets are frozen literal data; they are the ground
truth the engines are tested against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace


class ConfigError(Exception):
    pass


class UnknownFenceError(ConfigError):
    pass


# An instruction class is "Ld", "St", or a fence name.
InstClass = str


@dataclass(frozen=True)
class OrderingTable:
    fences: tuple[str, ...]
    true_pairs: frozenset  # of (InstClass, InstClass)

    @property
    def classes(self) -> tuple[str, ...]:
        return ("Ld", "St") + self.fences

    def entry(self, old: InstClass, new: InstClass) -> bool:
        return (old, new) in self.true_pairs


@dataclass(frozen=True)
class ModelConfig:
    name: str
    table: OrderingTable
    same_addr_ldld: bool = True
    dep_mode: str = "full"  # "full" | "none"
    # Maps generic fence names used by litmus files to this model's fences,
    # e.g. the riscv preset binds the generic "Fence" to its Full fence.
    aliases: tuple[tuple[str, str], ...] = ()

    def resolve_fence(self, name: str) -> str:
        if name in self.table.fences:
            return name
        for generic, concrete in self.aliases:
            if name == generic:
                return concrete
        raise UnknownFenceError(
            f"fence {name!r} is not declared by model {self.name!r} "
            f"(declared: {', '.join(self.table.fences) or 'none'})")


def ordered(cfg: ModelConfig, old: InstClass, new: InstClass) -> bool:
    """The model's pairwise ordering function over instruction classes."""
    classes = cfg.table.classes
    if old not in classes or new not in classes:
        bad = old if old not in classes else new
        raise UnknownFenceError(f"unknown instruction class {bad!r} for model {cfg.name!r}")
    return cfg.table.entry(old, new)


def with_forced_ldst(cfg: ModelConfig) -> ModelConfig:
    """A copy of cfg with the (Ld, St) entry forced true.

    The in-order engine requires load-to-store ordering; this is the standard
    adaptation for tables (like riscv's) that leave it relaxed.
    """
    if cfg.table.entry("Ld", "St"):
        return cfg
    table = OrderingTable(cfg.table.fences,
                          cfg.table.true_pairs | {("Ld", "St")})
    return replace(cfg, name=cfg.name + "+ldst", table=table)


def _table(fences, rows) -> OrderingTable:
    classes = ("Ld", "St") + tuple(fences)
    true_pairs = set()
    for old, row in zip(classes, rows):
        assert len(row) == len(classes)
        for new, bit in zip(classes, row):
            if bit:
                true_pairs.add((old, new))
    return OrderingTable(tuple(fences), frozenset(true_pairs))


_SC = _table([], [
    (1, 1),
    (1, 1),
])

_TSO = _table(["Fence"], [
    # Ld St Fence
    (1, 1, 1),   # Ld
    (0, 1, 1),   # St
    (1, 1, 1),   # Fence
])

_RMO = _table(["FenceLL", "FenceLS", "FenceSL", "FenceSS"], [
    # Ld St LL LS SL SS
    (0, 0, 1, 1, 0, 0),  # Ld
    (0, 0, 0, 0, 1, 1),  # St
    (1, 0, 0, 0, 0, 0),  # FenceLL
    (0, 1, 0, 0, 0, 0),  # FenceLS
    (1, 0, 0, 0, 0, 0),  # FenceSL
    (0, 1, 0, 0, 0, 0),  # FenceSS
])

_WMM = _table(["Commit", "Reconcile"], [
    # Ld St Commit Reconcile
    (0, 1, 1, 1),  # Ld
    (0, 0, 1, 0),  # St
    (0, 1, 1, 1),  # Commit
    (1, 1, 1, 1),  # Reconcile
])

_RISCV = _table(["Release", "Acquire", "Full"], [
    # Ld St Rel Acq Full
    (0, 0, 1, 1, 1),  # Ld
    (0, 0, 1, 0, 1),  # St
    (0, 1, 1, 0, 1),  # Release
    (1, 1, 1, 1, 1),  # Acquire
    (1, 1, 1, 1, 1),  # Full
])

PRESETS: dict[str, ModelConfig] = {
    "sc": ModelConfig("sc", _SC),
    "tso": ModelConfig("tso", _TSO),
    # "Corrected" RMO: full dependency ordering, but same-address load-load
    # pairs left unordered.
    "rmo": ModelConfig("rmo", _RMO, same_addr_ldld=False),
    # The default model as usually exercised: RMO's relaxed fence table with
    # full dependency and same-address ordering.
    "gam-rmo-fences": ModelConfig("gam-rmo-fences", _RMO),
    "wmm": ModelConfig("wmm", _WMM, dep_mode="none"),
    "riscv": ModelConfig("riscv", _RISCV, aliases=(("Fence", "Full"),)),
}


def get_preset(name: str) -> ModelConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r} (available: {', '.join(sorted(PRESETS))})")


def load_model_config(path) -> ModelConfig:
    """Load a model from a JSON file, or resolve {"preset": name}.

    File schema: {"name": str, "fences": [str...],
                  "ordered": {"Ld,St": true, ...},   # missing entries false
                  "same_addr_ldld": bool, "dep_mode": "full"|"none",
                  "aliases": {"Fence": "Full"}}
    """
    try:
        with open(path) as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot load model config {path!r}: {e}")
    return model_config_from_dict(data, origin=str(path))


def model_config_from_dict(data: dict, origin: str = "<dict>") -> ModelConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"{origin}: model config must be a JSON object")
    if "preset" in data:
        return get_preset(data["preset"])
    fences = data.get("fences", [])
    if len(set(fences)) != len(fences):
        raise ConfigError(f"{origin}: duplicate fence names")
    if any(f in ("Ld", "St") for f in fences):
        raise ConfigError(f"{origin}: fence may not be named Ld or St")
    classes = ("Ld", "St") + tuple(fences)
    true_pairs = set()
    for key, val in data.get("ordered", {}).items():
        parts = [p.strip() for p in key.split(",")]
        if len(parts) != 2:
            raise ConfigError(f"{origin}: bad ordered key {key!r} (expected 'A,B')")
        old, new = parts
        for cls in (old, new):
            if cls not in classes:
                raise ConfigError(f"{origin}: ordered entry names undeclared class {cls!r}")
        if val:
            true_pairs.add((old, new))
    dep_mode = data.get("dep_mode", "full")
    if dep_mode not in ("full", "none"):
        raise ConfigError(f"{origin}: dep_mode must be 'full' or 'none'")
    aliases = tuple(sorted(data.get("aliases", {}).items()))
    for _, concrete in aliases:
        if concrete not in fences:
            raise ConfigError(f"{origin}: alias target {concrete!r} is not a declared fence")
    return ModelConfig(
        name=data.get("name", "custom"),
        table=OrderingTable(tuple(fences), frozenset(true_pairs)),
        same_addr_ldld=data.get("same_addr_ldld", True),
        dep_mode=dep_mode,
        aliases=aliases,
    )
