"""Augmented Lagrangian method with a projected quasi-Newton inner solver.

Outer iteration k minimises

    A(p) = 1'p + sum_i psi(CIR*_i - CIR_i(p); mu_i, rho)

over the power box to tolerance ``eps_k``, then updates the multipliers
``mu <- clip(mu + rho (CIR* - CIR(p)), 0, mu_max)`` and multiplies ``rho`` by
``rho_growth`` when the constraint-violation measure did not shrink by
``improvement_ratio``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NumericalFailure
from .report import RunBook, SolverOptions
from .sqp import fd_step_sizes


@dataclass
class AlmOptions(SolverOptions):
    rho0: float = 10.0
    rho_growth: float = 10.0
    improvement_ratio: float = 0.5
    mu_max: float = 1e8
    eps0: float = 1e-2
    eps_decay: float = 0.1
    # inner tolerances below this sit under the rounding level of the gradient
    eps_floor: float = 1e-12
    # printed form (positive part of the violation, then + mu/rho) instead of
    # the classical max(0, v + mu/rho)
    literal: bool = False
    fd_step: float = 1e-7
    p_floor: float = 1e-5
    inner_max_iters: int = 500
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40
    memory: int = 10


def penalty_terms(v, mu, rho, literal=False):
    """Per-constraint penalty for violations ``v = CIR* - CIR``."""
    m = mu / rho
    if literal:
        return 0.5 * rho * (np.maximum(v, 0.0) + m) ** 2
    return 0.5 * rho * (np.maximum(v + m, 0.0) ** 2 - m * m)


def aug_lagrangian(instance, p, mu, rho, literal=False) -> float:
    """Augmented Lagrangian ``1'p + sum psi``; equals ``1'p`` when inactive and ``mu = 0``."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    p = np.asarray(p, dtype=float)
    v = instance.cir_target - kernels.cir(instance.G, instance.noise, p)
    return float(np.sum(p) + np.sum(penalty_terms(v, np.asarray(mu, dtype=float), rho, literal)))


def aug_gradient(instance, p, mu, rho, literal=False, step=1e-7, floor=1e-5):
    """Central-difference gradient of :func:`aug_lagrangian`."""
    p = np.asarray(p, dtype=float)
    return kernels.fd_penalty_gradient(instance.G, instance.noise, p,
                                       fd_step_sizes(p, step, floor),
                                       instance.cir_target, np.asarray(mu, dtype=float),
                                       rho, literal)


def projected_gradient_norm(p, g, lo, hi) -> float:
    """``||Proj(p - g) - p||``, zero exactly at box-constrained stationary points."""
    return float(np.linalg.norm(np.clip(p - g, lo, hi) - p))


def _two_loop(g, S, Y, gamma):
    """L-BFGS product ``H g`` from the stored pairs (oldest first)."""
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(S), reversed(Y)):
        a = float(s @ q) / float(s @ y)
        alphas.append(a)
        q -= a * y
    r = gamma * q
    for (s, y), a in zip(zip(S, Y), reversed(alphas)):
        r += s * (a - float(y @ r) / float(s @ y))
    return r


def minimize_box(f, grad, x0, lo, hi, tol, max_iters=500, armijo=1e-4, backtrack=0.5,
                 max_backtracks=40, memory=10, stop=None, flops=None, f_cost=0, g_cost=0,
                 f_noise=1e-10):
    """Projected L-BFGS for ``min f`` on ``[lo, hi]``.

    Variables on a bound whose gradient points outward are frozen; the
    limited-memory inverse Hessian acts on the free ones. Steps follow the
    projected path ``clip(x + a d)`` with Armijo backtracking; once trial
    values differ from ``f(x)`` by less than ``f_noise`` relative, the decrease
    is estimated from gradients instead. Stops when
    ``stop(x, g)`` holds (default ``||Proj(x - g) - x|| <= tol``); returns
    ``(x, iterations)``.
    """
    if stop is None:
        def stop(x, g):
            return projected_gradient_norm(x, g, lo, hi) <= tol
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    n = len(x)
    fx, g = f(x), grad(x)
    S, Y = [], []
    for it in range(max_iters + 1):
        if flops is not None and it:
            flops.accumulated += f_cost + g_cost
        if stop(x, g):
            return x, it
        if it == max_iters:
            break
        free = ~(((x <= lo) & (g > 0)) | ((x >= hi) & (g < 0)))
        d = np.zeros(n)
        if S:
            Sf = [s[free] for s in S]
            Yf = [y[free] for y in Y]
            d[free] = -_two_loop(g[free], Sf, Yf, float(S[-1] @ Y[-1]) / float(Y[-1] @ Y[-1]))
            if flops is not None:
                flops.accumulated += 4 * memory * int(free.sum())
        if not S or float(g @ d) >= 0:
            # first step, or curvature pairs unusable on the free set: scaled steepest descent
            S, Y = [], []
            gmax = float(np.max(np.abs(g[free]))) if np.any(free) else 1.0
            d[free] = -g[free] * (1e-2 / max(gmax, 1e-300))
        a = 1.0
        for _ in range(max_backtracks):
            xn = np.clip(x + a * d, lo, hi)
            fn = f(xn)
            gs = float(g @ (xn - x))
            if fn <= fx + armijo * gs:
                gn = grad(xn)
                break
            if abs(fn - fx) <= f_noise * (abs(fx) + 1e-300):
                # f changes are lost in roundoff: judge the decrease by the
                # trapezoidal estimate 1/2 (g + g_new)'s (approximate Armijo)
                gn = grad(xn)
                if 0.5 * float((g + gn) @ (xn - x)) <= armijo * gs:
                    break
            a *= backtrack
        else:
            raise NumericalFailure("inner line search failed")
        s, y = xn - x, gn - g
        if float(s @ y) > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            S.append(s)
            Y.append(y)
            if len(S) > memory:
                S.pop(0)
                Y.pop(0)
        x, fx, g = xn, fn, gn
    raise NumericalFailure(f"inner solver hit its cap of {max_iters} iterations")


def inner_solve(instance, p_start, mu, rho, eps, opts: AlmOptions | None = None, flops=None):
    """Minimise the augmented Lagrangian over the box to tolerance ``eps``.

    The search runs in log-power coordinates ``x = log p``, where the
    curvature spread across users is far smaller; convergence is still
    judged by the projected gradient in power space.
    """
    opts = opts or AlmOptions()
    K = instance.K
    lo, hi = instance.p_min, instance.p_max
    mu = np.asarray(mu, dtype=float)
    cache = {}

    def gp(p):
        key = p.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = aug_gradient(instance, p, mu, rho, opts.literal, opts.fd_step,
                                      opts.p_floor)
        return cache[key]

    def f(x):
        return aug_lagrangian(instance, np.exp(x), mu, rho, opts.literal)

    def grad(x):
        p = np.exp(x)
        return p * gp(p)

    def stop(x, g):
        p = np.exp(x)
        return projected_gradient_norm(p, gp(p), lo, hi) <= eps

    f_cost = 2 * K * K + 9 * K
    g_cost = 2 * K * (4 * K + 6) + 5 * K
    x, it = minimize_box(f, grad, np.log(np.clip(p_start, lo, hi)), np.log(lo), np.log(hi),
                         eps, opts.inner_max_iters, opts.armijo, opts.backtrack,
                         opts.max_backtracks, opts.memory, stop, flops, f_cost, g_cost)
    return np.clip(np.exp(x), lo, hi), it


def update_multipliers(mu, rho, violations, mu_max=1e8):
    """First-order update ``clip(mu + rho * (CIR* - CIR), 0, mu_max)``."""
    return np.clip(np.asarray(mu, dtype=float) + rho * np.asarray(violations, dtype=float),
                   0.0, mu_max)


def violation_measure(v, mu, rho) -> float:
    """``max_i |max(v_i, -mu_i/rho)|``; zero iff feasible and complementary."""
    return float(np.max(np.abs(np.maximum(v, -mu / rho))))


def inner_tolerance(k, opts: AlmOptions) -> float:
    """``eps_k = eps0 * eps_decay^k``, held at ``eps_floor`` once it gets there."""
    return max(opts.eps0 * opts.eps_decay ** k, opts.eps_floor)


def solve_alm(instance, p0, opts: AlmOptions | None = None, p_star=None, mu0=None):
    """Run the ALM from ``p0``; returns ``(p, trace, report)``.

    Multipliers start at zero unless ``mu0`` is given (warm start). An inner
    solve that hands back a feasible point unchanged gives ``xi = 0`` and so
    ends the run through the ordinary stopping rule.
    """
    opts = opts or AlmOptions()
    K = instance.K
    lo, hi = instance.p_min, instance.p_max
    p = np.clip(np.asarray(p0, dtype=float), lo, hi)
    book = RunBook("alm", instance, p, opts, p_star)
    mu = np.zeros(K) if mu0 is None else np.clip(np.asarray(mu0, dtype=float), 0.0, opts.mu_max)
    rho = opts.rho0
    prev_viol = np.inf
    for n in range(1, opts.criterion.max_iters + 1):
        p = np.clip(p, lo, hi)
        eps = inner_tolerance(n, opts)
        p, inner_iters = inner_solve(instance, p, mu, rho, eps, opts, book.flops)
        v = instance.cir_target - kernels.cir(instance.G, instance.noise, p)
        viol = violation_measure(v, mu, rho)
        rho_used = rho
        mu = update_multipliers(mu, rho, v, opts.mu_max)
        book.flops.charge("cir", K=K).charge("axpy", n=K)
        if viol > opts.improvement_ratio * prev_viol:
            rho *= opts.rho_growth
        prev_viol = viol
        p, done = book.step(n, p, inner_iters=inner_iters, eps=eps, rho=rho_used,
                            viol=viol, mu_max=float(np.max(mu)))
        if done:
            break
    book.trace.multipliers = mu
    return book.prev.copy(), book.trace, book.report()
