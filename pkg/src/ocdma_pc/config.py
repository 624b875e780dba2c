"""YAML configuration for the harness.

Schema (every key optional)::

    scenario: A | B | Custom        # A -> users [8, 16, 32], B -> [48, 64, 128]
    users: [8, 16, 32]
    qos_class: I | II | III
    trials: 1
    base_seed: 0
    solver: all | hopfield | sqp | alm
    max_iters: 10
    output_dir: out
    warm_start: false               # or a list of solver names
    system: {p_max_dbm: 20.0, ...}  # SystemParams fields
    solvers:                        # per-solver option overrides
      sqp: {fd_step: 1.0e-7}
    events:
      - {kind: LoadIncrease, load_factor: 4.0}
      - {kind: Perturbation, perturb_alpha: 0.65, perturb_window: [2, 7]}
"""
from __future__ import annotations

import dataclasses
from pathlib import Path

import yaml

from .errors import ConfigError
from .harness import SCENARIO_USERS, SOLVERS, DynamicEvent, ScenarioConfig
from .netmodel import SystemParams

_TOP = {"scenario", "users", "qos_class", "trials", "base_seed", "solver", "max_iters",
        "output_dir", "warm_start", "system", "solvers", "events"}


def _fields(cls) -> set:
    return {f.name for f in dataclasses.fields(cls)}


def _check_keys(d: dict, allowed: set, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a mapping")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def config_from_dict(d: dict | None) -> ScenarioConfig:
    """Validate a parsed mapping and build a :class:`ScenarioConfig`."""
    d = dict(d or {})
    _check_keys(d, _TOP, "config")
    system = d.pop("system", None) or {}
    _check_keys(system, _fields(SystemParams), "system")
    if "link_length_range" in system:
        system["link_length_range"] = tuple(system["link_length_range"])
    solvers = d.pop("solvers", None) or {}
    _check_keys(solvers, set(SOLVERS), "solvers")
    for name, opts in solvers.items():
        opts = opts or {}
        _check_keys(opts, _fields(SOLVERS[name][1]) - {"criterion", "disturbance"},
                    f"solvers.{name}")
        solvers[name] = opts
    events = d.pop("events", None) or []
    if not isinstance(events, list):
        raise ConfigError("events must be a list")
    scenario = d.get("scenario", "A")
    if "users" not in d and scenario in SCENARIO_USERS:
        d["users"] = SCENARIO_USERS[scenario]
    try:
        evs = []
        for e in events:
            _check_keys(e, _fields(DynamicEvent), "events[]")
            e = dict(e)
            if e.get("perturb_window") is not None:
                e["perturb_window"] = tuple(e["perturb_window"])
            evs.append(DynamicEvent(**e))
        return ScenarioConfig(system=SystemParams(**system), solver_options=solvers,
                              events=evs, **d)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ScenarioConfig:
    """Read a YAML file into a :class:`ScenarioConfig`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(data)
