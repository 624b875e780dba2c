"""Stopping rule, feasibility, NMSE, robustness and analytic FLOP accounting."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problem import cir, in_box

#: Feasibility marker for iterates outside the power box (never converged).
BOX_INFEASIBLE = math.inf


def is_box_infeasible(F) -> bool:
    return F == BOX_INFEASIBLE


@dataclass(frozen=True)
class ConvergenceCriterion:
    xi_tol: float = 1e-6
    feas_tol: float = 1e-4
    max_iters: int = 10

    def __post_init__(self):
        if not (self.xi_tol > 0 and self.feas_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def converged(self, xi: float, F: float) -> bool:
        return xi < self.xi_tol and F <= self.feas_tol


PERTURBED_MAX_ITERS = 15


def step_norm(p_k, p_prev) -> float:
    p_k = np.asarray(p_k, dtype=float)
    p_prev = np.asarray(p_prev, dtype=float)
    if p_k.shape != p_prev.shape:
        raise ValueError("vectors differ in length")
    return float(np.linalg.norm(p_k - p_prev))


def feasibility(instance, p) -> float:
    """Worst CIR shortfall ``max_i max(0, target_i - CIR_i)``.

    Returns :data:`BOX_INFEASIBLE` when ``p`` leaves ``[p_min, p_max]``.
    """
    if not in_box(instance, p):
        return BOX_INFEASIBLE
    return float(np.max(np.maximum(instance.cir_target - cir(instance, p), 0.0)))


def nmse(p, p_star) -> float:
    """Normalised squared distance to the oracle.

    ``p`` may be one vector (terminal NMSE) or a sequence of vectors, e.g.
    a trajectory or several realisations' terminal points, in which case the
    per-vector ratios are averaged.
    """
    p_star = np.asarray(p_star, dtype=float)
    ref = float(p_star @ p_star)
    if ref == 0.0:
        raise ZeroDivisionError("oracle power vector has zero norm")
    p = np.asarray(p, dtype=float)
    if p.ndim == 1:
        d = p - p_star
        return float(d @ d) / ref
    d = p - p_star[None, :]
    return float(np.mean(np.einsum("ij,ij->i", d, d)) / ref)


def nmse_trajectories(trajectories, oracles) -> float:
    """Mean NMSE over every iteration of every realisation."""
    vals = [nmse(np.atleast_2d(t), ps) for t, ps in zip(trajectories, oracles)]
    counts = [np.atleast_2d(t).shape[0] for t in trajectories]
    return float(np.average(vals, weights=counts))


def robustness(successes: int, trials: int) -> float:
    """Percentage of realisations that met the convergence rule."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    return 100.0 * successes / trials


def _count(kernel: str, d: dict) -> int:
    if kernel == "matvec":
        return 2 * d["m"] * d["n"]
    if kernel == "matmul":
        return 2 * d["m"] * d["n"] * d["p"]
    if kernel == "solve":
        n = d["n"]
        return round(2 * n ** 3 / 3 + 2 * n ** 2)
    if kernel in ("dot", "axpy"):
        return 2 * d["n"]
    if kernel == "vector":
        return d["n"] * d.get("ops", 1)
    if kernel == "cir":
        K = d["K"]
        return 2 * K * K + 2 * K
    if kernel == "jacobian":
        K = d["K"]
        return 2 * K * K + 3 * K * K
    if kernel == "fd_gradient":
        return d["evals"] * d["per_eval"] + 3 * d.get("n", 0)
    raise ValueError(f"unknown kernel tag {kernel!r}")


class FlopCounter:
    """Per-run analytic count of floating-point operations.

    Charges are formula-based (``matvec`` m x n costs ``2mn``, a dense
    ``solve`` of order n costs ``2n^3/3 + 2n^2`` ...), so counts are
    deterministic and independent of the kernel backend.
    """

    def __init__(self):
        self.accumulated = 0

    def charge(self, kernel: str, **dims) -> "FlopCounter":
        self.accumulated += int(_count(kernel, dims))
        return self

    def cost(self, kernel: str, **dims) -> int:
        return int(_count(kernel, dims))

    def __int__(self):
        return self.accumulated

    def __repr__(self):
        return f"FlopCounter({self.accumulated})"


def flops_charge(counter: FlopCounter, kernel: str, **dims) -> FlopCounter:
    return counter.charge(kernel, **dims)
