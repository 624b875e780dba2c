"""Per-iteration traces, terminal reports, and the bookkeeping shared by the solvers."""
from __future__ import annotations

import enum
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import SingularOrInfeasible
from .metrics import (ConvergenceCriterion, FlopCounter, feasibility,
                      is_box_infeasible, nmse, step_norm)
from .problem import oracle, sum_rate


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERATIONS = "MaxIterations"
    NUMERICAL_FAILURE = "NumericalFailure"
    BOX_INFEASIBLE = "BoxInfeasible"


Disturbance = Callable[[int, np.ndarray], Optional[np.ndarray]]


@dataclass
class SolverOptions:
    criterion: ConvergenceCriterion = field(default_factory=ConvergenceCriterion)
    # called after each external iteration n; may return a replacement iterate
    disturbance: Optional[Disturbance] = None
    # convergence is not declared at iterations <= settle_after
    settle_after: int = 0


@dataclass
class SolverTrace:
    """One row per external iteration, row 0 being the starting point."""

    K: int
    iteration: list = field(default_factory=list)
    powers: list = field(default_factory=list)
    sum_power: list = field(default_factory=list)
    sum_rate: list = field(default_factory=list)
    feasibility: list = field(default_factory=list)
    xi: list = field(default_factory=list)
    flops: list = field(default_factory=list)
    time: list = field(default_factory=list)
    extra: list = field(default_factory=list)
    # terminal Lagrange multiplier estimates, for solvers that keep them
    multipliers: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.iteration)

    def record(self, instance, n, p, xi, flops, elapsed, **extra):
        p = np.array(p, dtype=float)
        self.iteration.append(int(n))
        self.powers.append(p)
        self.sum_power.append(float(p.sum()))
        self.sum_rate.append(sum_rate(instance, p))
        self.feasibility.append(feasibility(instance, p))
        self.xi.append(float(xi))
        self.flops.append(int(flops))
        self.time.append(float(elapsed))
        self.extra.append(extra)

    @property
    def P(self) -> np.ndarray:
        return np.array(self.powers)

    def header(self):
        return (["iteration"] + [f"p{i + 1}" for i in range(self.K)]
                + ["sum_power", "sum_rate", "feasibility", "xi", "flops"])

    def rows(self):
        for i in range(len(self)):
            F = self.feasibility[i]
            yield ([self.iteration[i]] + [repr(float(x)) for x in self.powers[i]]
                   + [repr(self.sum_power[i]), repr(self.sum_rate[i]),
                      "box-infeasible" if is_box_infeasible(F) else repr(F),
                      repr(self.xi[i]), self.flops[i]])


@dataclass
class SolverReport:
    solver: str
    status: Status
    iterations: int
    time: float
    sum_power: float
    feasibility: float
    flops: int
    nmse_terminal: float
    nmse_trajectory: float
    sum_rate: float
    K: int = 0
    seed: int = 0
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    def to_dict(self, include_time: bool = True) -> dict:
        d = asdict(self)
        d["status"] = self.status.value
        if is_box_infeasible(self.feasibility):
            d["feasibility"] = "box-infeasible"
        if not include_time:
            d.pop("time")
        return d


def failure_report(solver, instance, message, status=Status.NUMERICAL_FAILURE) -> SolverReport:
    nan = float("nan")
    return SolverReport(solver=solver, status=status, iterations=0, time=0.0,
                        sum_power=nan, feasibility=nan, flops=0, nmse_terminal=nan,
                        nmse_trajectory=nan, sum_rate=nan, K=instance.K,
                        seed=instance.seed, message=message)


class RunBook:
    """Records iterates, applies disturbances and evaluates the stopping rule."""

    def __init__(self, solver: str, instance, p0, opts: SolverOptions, p_star=None):
        self.solver = solver
        self.instance = instance
        self.opts = opts
        self.flops = FlopCounter()
        self.trace = SolverTrace(instance.K)
        self.t0 = time.perf_counter()
        if p_star is None:
            try:
                p_star, _ = oracle(instance)
            except SingularOrInfeasible:
                p_star = None
        self.p_star = p_star
        self.prev = np.array(p0, dtype=float)
        self.status = Status.MAX_ITERATIONS
        self.iterations = 0
        self.trace.record(instance, 0, self.prev, 0.0, 0, 0.0)

    def step(self, n: int, p, **extra):
        """Log iterate ``n``; returns ``(p, converged)`` where ``p`` may be disturbed."""
        p = np.array(p, dtype=float)
        if self.opts.disturbance is not None:
            q = self.opts.disturbance(n, p)
            if q is not None:
                p = np.array(q, dtype=float)
                extra["disturbed"] = True
        xi = step_norm(p, self.prev)
        self.prev = p
        self.iterations = n
        self.trace.record(self.instance, n, p, xi, self.flops.accumulated,
                          time.perf_counter() - self.t0, **extra)
        F = self.trace.feasibility[-1]
        done = n > self.opts.settle_after and self.opts.criterion.converged(xi, F)
        if done:
            self.status = Status.CONVERGED
        return p, done

    def report(self, message: str = "") -> SolverReport:
        tr = self.trace
        p = tr.powers[-1]
        F = tr.feasibility[-1]
        status = self.status
        if status is Status.MAX_ITERATIONS and is_box_infeasible(F):
            status = Status.BOX_INFEASIBLE
        if self.p_star is not None:
            nt = nmse(p, self.p_star)
            nj = nmse(tr.P[1:] if len(tr) > 1 else tr.P, self.p_star)
        else:
            nt = nj = float("nan")
        return SolverReport(solver=self.solver, status=status, iterations=self.iterations,
                            time=tr.time[-1], sum_power=tr.sum_power[-1], feasibility=F,
                            flops=self.flops.accumulated, nmse_terminal=nt,
                            nmse_trajectory=nj, sum_rate=tr.sum_rate[-1],
                            K=self.instance.K, seed=self.instance.seed, message=message)
