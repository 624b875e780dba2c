"""Scenario orchestration: Monte-Carlo batches, dynamic load, perturbation
injection, closed-form precision comparison, and file output."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .alm import AlmOptions, solve_alm
from .errors import ConfigError, OcdmaError, SingularOrInfeasible
from .hopfield import HopfieldOptions, solve_hopfield
from .metrics import PERTURBED_MAX_ITERS, ConvergenceCriterion, feasibility
from .netmodel import (SystemParams, extend_instance, generate_feasible_instance,
                       qos_class)
from .problem import matrix_form, oracle, tarhuni_solve
from .report import SolverReport, SolverTrace, Status, failure_report
from .sqp import SqpOptions, solve_sqp

log = logging.getLogger(__name__)

SOLVERS = {
    "hopfield": (solve_hopfield, HopfieldOptions),
    "sqp": (solve_sqp, SqpOptions),
    "alm": (solve_alm, AlmOptions),
}
SCENARIO_USERS = {"A": [8, 16, 32], "B": [48, 64, 128]}
# perturbation windows: the ALM is hit one iteration later
PERTURB_WINDOWS = {"hopfield": (2, 7), "sqp": (2, 7), "alm": (3, 8)}


@dataclass
class DynamicEvent:
    kind: str  # "LoadIncrease" | "Perturbation"
    at_iteration: int = 0
    load_factor: float = 4.0
    perturb_alpha: float = 0.65
    perturb_window: Optional[tuple] = None  # None: per-solver default
    perturb_targets: Optional[list] = None  # None: every user

    def __post_init__(self):
        if self.kind not in ("LoadIncrease", "Perturbation"):
            raise ConfigError(f"unknown event kind {self.kind!r}")
        if self.at_iteration < 0:
            raise ConfigError("at_iteration must be >= 0")
        if not self.load_factor > 0:
            raise ConfigError("load_factor must be positive")
        if not 0 < self.perturb_alpha < 1:
            raise ConfigError("perturb_alpha must lie in (0, 1)")
        if self.perturb_window is not None:
            lo, hi = self.perturb_window
            if not 0 <= lo <= hi:
                raise ConfigError("perturb_window must be an increasing pair")
            self.perturb_window = (int(lo), int(hi))


@dataclass
class ScenarioConfig:
    scenario: str = "A"
    users: list = field(default_factory=lambda: [8, 16, 32])
    qos_class: str = "II"
    trials: int = 1
    base_seed: int = 0
    solver: str = "all"
    events: list = field(default_factory=list)
    output_dir: str = "out"
    max_iters: Optional[int] = None
    # dynamic load: reuse the K1 solution (and multipliers) for the old users;
    # True/False for every solver, or a list of solver names
    warm_start: object = False
    system: SystemParams = field(default_factory=SystemParams)
    solver_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in ("A", "B", "Custom"):
            raise ConfigError(f"scenario must be A, B or Custom, not {self.scenario!r}")
        if not self.users:
            raise ConfigError("users must be nonempty")
        if any(int(k) < 1 for k in self.users):
            raise ConfigError("every user count must be >= 1")
        self.users = [int(k) for k in self.users]
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.solver not in ("all", *SOLVERS):
            raise ConfigError(f"solver must be one of all, {', '.join(SOLVERS)}")
        if self.max_iters is not None and self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        try:
            qos_class(self.qos_class)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if isinstance(self.warm_start, (list, tuple)):
            bad = set(self.warm_start) - set(SOLVERS)
            if bad:
                raise ConfigError(f"warm_start names unknown solvers {sorted(bad)}")
            self.warm_start = list(self.warm_start)
        elif not isinstance(self.warm_start, bool):
            raise ConfigError("warm_start must be a bool or a list of solver names")
        unknown = set(self.solver_options) - set(SOLVERS)
        if unknown:
            raise ConfigError(f"options given for unknown solvers {sorted(unknown)}")

    @property
    def solvers(self) -> list:
        return list(SOLVERS) if self.solver == "all" else [self.solver]

    def warm(self, solver: str) -> bool:
        if isinstance(self.warm_start, bool):
            return self.warm_start
        return solver in self.warm_start


@dataclass
class RunRecord:
    """One solver run on one instance."""

    scenario: str
    K: int
    qos: str
    solver: str
    seed: int
    trace: Optional[SolverTrace]
    report: SolverReport

    @property
    def name(self) -> str:
        return f"{self.scenario}_{self.K}_{self.qos}_{self.solver}_{self.seed}"


def make_options(config: ScenarioConfig, solver: str, max_iters: Optional[int] = None, **kw):
    """Solver options from the config, with ``max_iters`` and extra fields applied."""
    Opt = SOLVERS[solver][1]
    extra = dict(config.solver_options.get(solver, {}))
    crit = ConvergenceCriterion(max_iters=max_iters or config.max_iters or 10)
    try:
        return Opt(criterion=crit, **extra, **kw)
    except TypeError as exc:
        raise ConfigError(f"bad options for {solver}: {exc}") from exc


def random_start(instance, seed: int) -> np.ndarray:
    """``p0 ~ U[p_min, p_max]``, keyed on the trial seed and the number of users."""
    rng = np.random.default_rng([int(seed), instance.K])
    return rng.uniform(instance.p_min, instance.p_max, instance.K)


def run_solver(solver: str, instance, p0, opts, p_star=None, mu0=None):
    """Run one solver; failures come back as a report, never as an exception."""
    fn = SOLVERS[solver][0]
    kw = {} if mu0 is None or solver == "hopfield" else {"mu0": mu0}
    try:
        _, trace, report = fn(instance, p0, opts, p_star, **kw)
    except OcdmaError as exc:
        log.warning("%s failed on K=%d seed=%d: %s", solver, instance.K, instance.seed, exc)
        return None, failure_report(solver, instance, f"{type(exc).__name__}: {exc}")
    return trace, report


def scenario_instance(config: ScenarioConfig, K: int, seed: int):
    """Feasible instance for ``K`` users drawn from ``seed`` (or the next seeds)."""
    return generate_feasible_instance(config.system, config.qos_class, seed, K)


def run_scenario(config: ScenarioConfig) -> list:
    """Every (K, trial, solver) combination; one :class:`RunRecord` each."""
    out = []
    for K in config.users:
        for t in range(config.trials):
            seed = config.base_seed + t
            inst = scenario_instance(config, K, seed)
            p_star, _ = oracle(inst)
            p0 = random_start(inst, seed)
            for s in config.solvers:
                trace, rep = run_solver(s, inst, p0, make_options(config, s), p_star)
                out.append(RunRecord(config.scenario, K, config.qos_class, s, seed, trace, rep))
    return out


def perturb_power(p_nominal, n: int, alpha: float = 0.65, targets=None) -> np.ndarray:
    """``p_i = |alpha^n sin(1.5 pi n)| + p_i_nominal`` for the targeted users."""
    if n < 0:
        raise ValueError("n must be >= 0")
    p = np.array(p_nominal, dtype=float)
    bump = abs(alpha ** n * math.sin(1.5 * math.pi * n))
    idx = slice(None) if targets is None else np.asarray(targets, dtype=int)
    p[idx] += bump
    return p


def perturbation(window, alpha=0.65, targets=None):
    """Disturbance callback adding :func:`perturb_power` inside ``window``."""
    lo, hi = window

    def disturb(n, p):
        if lo <= n <= hi:
            return perturb_power(p, n, alpha, targets)
        return None

    return disturb


def _event(config: ScenarioConfig, kind: str) -> DynamicEvent:
    for ev in config.events:
        if ev.kind == kind:
            return ev
    return DynamicEvent(kind)


def run_perturbation(config: ScenarioConfig) -> list:
    """Runs with the power perturbation injected; convergence is only
    declared once the perturbation window has closed."""
    ev = _event(config, "Perturbation")
    out = []
    for K in config.users:
        for t in range(config.trials):
            seed = config.base_seed + t
            inst = scenario_instance(config, K, seed)
            p_star, _ = oracle(inst)
            p0 = random_start(inst, seed)
            for s in config.solvers:
                window = ev.perturb_window or PERTURB_WINDOWS[s]
                opts = make_options(config, s, config.max_iters or PERTURBED_MAX_ITERS,
                                    disturbance=perturbation(window, ev.perturb_alpha,
                                                             ev.perturb_targets),
                                    settle_after=window[1])
                trace, rep = run_solver(s, inst, p0, opts, p_star)
                out.append(RunRecord("perturb", K, config.qos_class, s, seed, trace, rep))
    return out


def run_dynamic_load(config: ScenarioConfig) -> list:
    """Solve at K1, grow the network by ``load_factor`` keeping the old users'
    gains, and solve again. With ``warm_start`` the old users restart from
    their K1 powers (and multipliers); new users start from random powers."""
    ev = _event(config, "LoadIncrease")
    out = []
    for K1 in config.users:
        K2 = int(round(K1 * ev.load_factor))
        if K2 < K1:
            raise ConfigError("load_factor must not shrink the network")
        for t in range(config.trials):
            seed = config.base_seed + t
            small = scenario_instance(config, K1, seed)
            big = (extend_instance(small, config.system, config.qos_class, K2 - K1)
                   if K2 > K1 else small)
            try:
                p_star2, _ = oracle(big)
            except SingularOrInfeasible as exc:
                log.warning("extended instance has no solution: %s", exc)
                p_star2 = None
            p_star1, _ = oracle(small)
            p0 = random_start(small, seed)
            fresh = random_start(big, seed)
            for s in config.solvers:
                tr1, rep1 = run_solver(s, small, p0, make_options(config, s), p_star1)
                out.append(RunRecord("dynamic", K1, config.qos_class, s, seed, tr1, rep1))
                start, mu0 = fresh, None
                if config.warm(s) and tr1 is not None:
                    start = fresh.copy()
                    start[:K1] = tr1.powers[-1]
                    if tr1.multipliers is not None:
                        mu0 = np.concatenate([tr1.multipliers, np.zeros(K2 - K1)])
                if p_star2 is None:
                    rep2 = failure_report(s, big, "extended instance is infeasible",
                                          Status.BOX_INFEASIBLE)
                    tr2 = None
                else:
                    tr2, rep2 = run_solver(s, big, start, make_options(config, s),
                                           p_star2, mu0)
                out.append(RunRecord("dynamic", K2, config.qos_class, s, seed, tr2, rep2))
    return out


def compare_tarhuni(config: ScenarioConfig) -> list:
    """Feasibility of the closed-form powers in double and emulated single
    precision next to each solver's terminal feasibility."""
    rows = []
    for K in config.users:
        for t in range(config.trials):
            seed = config.base_seed + t
            inst = scenario_instance(config, K, seed)
            mf = matrix_form(inst)
            p64 = tarhuni_solve(mf)
            p32 = tarhuni_solve(mf, np.float32)
            row = {"K": K, "seed": seed, "qos": config.qos_class,
                   "tarhuni_float64": feasibility(inst, p64),
                   "tarhuni_float32": feasibility(inst, p32)}
            p0 = random_start(inst, seed)
            for s in config.solvers:
                _, rep = run_solver(s, inst, p0, make_options(config, s), p64)
                row[s] = rep.feasibility
                row[f"{s}_status"] = rep.status.value
            rows.append(row)
    return rows


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return _jsonable(x.item())
    return x


def write_trace(trace: Optional[SolverTrace], path) -> Path:
    """Trace CSV with a header; an empty-bodied file for a run that failed at once."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if trace is None:
            w.writerow(["iteration"])
        else:
            w.writerow(trace.header())
            w.writerows(trace.rows())
    return path


def write_summary(record: RunRecord, path) -> Path:
    """Summary JSON; wall-clock time is left out so re-runs are byte-identical."""
    path = Path(path)
    d = record.report.to_dict(include_time=False)
    d.update(scenario=record.scenario, qos=record.qos, requested_seed=record.seed,
             instance_seed=d.pop("seed"))
    path.write_text(json.dumps(_jsonable(d), indent=2, sort_keys=True) + "\n")
    return path


def emit_outputs(records, out_dir) -> list:
    """Two files per run: ``{name}.csv`` (trace) and ``{name}.json`` (summary)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for r in records:
        written.append(write_trace(r.trace, out_dir / f"{r.name}.csv"))
        written.append(write_summary(r, out_dir / f"{r.name}.json"))
    return written


def robustness_table(records) -> dict:
    """Percent converged per (K, solver)."""
    from .metrics import robustness

    tally = {}
    for r in records:
        key = (r.K, r.solver)
        ok, n = tally.get(key, (0, 0))
        tally[key] = (ok + int(r.report.converged), n + 1)
    return {k: robustness(ok, n) for k, (ok, n) in sorted(tally.items())}


def with_users(config: ScenarioConfig, users) -> ScenarioConfig:
    return replace(config, users=list(users))
