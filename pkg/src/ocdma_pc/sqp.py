"""Sequential quadratic programming with an interior-point QP subsolver.

Each iteration linearises the CIR constraints at ``p_k``, models the
Lagrangian ``1'p + mu'(CIR* - CIR(p))`` quadratically, and solves

    min_d  1/2 d'B d + 1'd + M 1't
    s.t.   CIR(p_k) + J d + t >= CIR*,   t >= 0

where ``t`` are elastic slacks that keep an inconsistent linearisation
solvable. The new iterate is ``Proj_box(p_k + alpha d)`` with ``alpha`` from
backtracking on the l1 merit function. A rejected trial point gets one
second-order correction (a minimum-norm Newton step back onto the active
CIR constraints, Jacobian taken at the trial point) before ``alpha`` is
halved.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NumericalFailure
from .qp import box_rows, ip_qp_solve
from .report import RunBook, SolverOptions


@dataclass
class SqpOptions(SolverOptions):
    fd_step: float = 1e-7
    p_floor: float = 1e-5
    hessian_step: float = 1e-4
    hessian_reg: float = 1e-8
    # "clip": eigenvalues below hessian_reg are raised to it;
    # "gershgorin": uniform diagonal shift from the Gershgorin discs
    convexify: str = "clip"
    # box as QP rows in addition to the projection
    box_in_qp: bool = False
    qp_gap_tol: float = 1e-8
    qp_res_tol: float = 1e-10
    qp_max_iters: int = 100
    elastic_penalty: float = 1e6
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 30
    second_order_correction: bool = True
    # "reset": rho_k = ||mu_k||_inf + 1 each iteration; "monotone": never decreases
    merit_rho: str = "reset"


def fd_step_sizes(p, step=1e-7, floor=1e-5):
    return step * np.maximum(np.abs(p), floor)


def fd_gradient(f, p, step=1e-7, floor=1e-5):
    """Central-difference gradient of the scalar field ``f`` at ``p``."""
    p = np.asarray(p, dtype=float)
    h = fd_step_sizes(p, step, floor)
    g = np.empty_like(p)
    for i in range(len(p)):
        e = np.zeros_like(p)
        e[i] = h[i]
        g[i] = (f(p + e) - f(p - e)) / (2.0 * h[i])
    return g


def gershgorin_shift(B, floor=1e-8):
    """Smallest uniform diagonal shift making ``B`` diagonally dominant, plus ``floor``."""
    off = np.sum(np.abs(B), axis=1) - np.abs(np.diag(B))
    return max(0.0, float(np.max(off - np.diag(B)))) + floor


def convexify(B, mode="clip", floor=1e-8):
    """Positive-definite stand-in for the symmetric matrix ``B``.

    Returns ``(Bc, shift)`` where ``shift`` is the largest amount any
    eigenvalue was raised by.
    """
    if mode == "gershgorin":
        s = gershgorin_shift(B, floor)
        return B + s * np.eye(len(B)), s
    if mode != "clip":
        raise ValueError(f"unknown convexification {mode!r}")
    w, V = np.linalg.eigh(B)
    wc = np.maximum(w, floor)
    return (V * wc) @ V.T, float(np.max(wc - w))


def lagrangian_hessian(instance, p, mu, opts: SqpOptions):
    """FD Hessian of ``1'p - mu'CIR(p)``; the objective term vanishes identically."""
    if not np.any(mu):
        return np.zeros((instance.K, instance.K))
    h_in = fd_step_sizes(p, opts.fd_step, opts.p_floor)
    h_out = fd_step_sizes(p, opts.hessian_step, opts.p_floor)
    return -kernels.fd_weighted_hessian(instance.G, instance.noise, p, mu, h_in, h_out)


@dataclass
class QPData:
    Q: np.ndarray
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    K: int
    shift: float
    J: np.ndarray  # CIR Jacobian at p_k


def build_qp(instance, p, mu, opts: SqpOptions | None = None, flops=None) -> QPData:
    """Assemble the elastic QP in ``x = (d, t)``."""
    opts = opts or SqpOptions()
    K = instance.K
    p = np.asarray(p, dtype=float)
    mu = np.asarray(mu, dtype=float)
    gam = kernels.cir(instance.G, instance.noise, p)
    J = kernels.fd_cir_jacobian(instance.G, instance.noise, p,
                                fd_step_sizes(p, opts.fd_step, opts.p_floor))
    B, shift = convexify(lagrangian_hessian(instance, p, mu, opts),
                         opts.convexify, opts.hessian_reg)
    if flops is not None:
        flops.charge("cir", K=K).charge("fd_gradient", evals=2 * K, per_eval=4 * K, n=K * K)
        if np.any(mu):
            flops.charge("fd_gradient", evals=2 * K, per_eval=2 * (8 * K * K + 2 * K), n=K * K)
        flops.charge("solve", n=K)

    Q = np.zeros((2 * K, 2 * K))
    Q[:K, :K] = B
    Q[K:, K:] = opts.hessian_reg * np.eye(K)
    # the objective is linear, so its gradient is exactly the ones vector
    c = np.concatenate([np.ones(K), np.full(K, opts.elastic_penalty)])
    I, Z = np.eye(K), np.zeros((K, K))
    A = np.block([[-J, -I], [Z, -I]])
    b = np.concatenate([gam - instance.cir_target, np.zeros(K)])
    if opts.box_in_qp:
        Ab, bb = box_rows(K, instance.p_min - p, instance.p_max - p)
        A = np.vstack([A, np.hstack([Ab, np.zeros((2 * K, K))])])
        b = np.concatenate([b, bb])
    return QPData(Q, c, A, b, K, shift, J)


def merit(instance, p, rho):
    """l1 merit ``1'p + rho * sum(max(0, CIR* - CIR))``."""
    gam = kernels.cir(instance.G, instance.noise, p)
    return float(np.sum(p) + rho * np.sum(np.maximum(instance.cir_target - gam, 0.0)))


def second_order_correction(instance, x, active):
    """Minimum-norm step from ``x`` onto the linearised ``active`` CIR constraints."""
    if not np.any(active):
        return np.zeros(instance.K)
    Ja = kernels.cir_jacobian(instance.G, instance.noise, x)[active]
    r = instance.cir_target[active] - kernels.cir(instance.G, instance.noise, x)[active]
    return Ja.T @ np.linalg.lstsq(Ja @ Ja.T, r, rcond=None)[0]


def _line_search(instance, p, d, rho, phi0, slope, active, opts, flops):
    """Armijo backtracking on the l1 merit; each rejected trial gets one correction."""
    K = instance.K
    lo, hi = instance.p_min, instance.p_max
    alpha = 1.0
    for _ in range(opts.max_backtracks):
        thresh = phi0 + opts.armijo * alpha * min(slope, 0.0)
        cand = np.clip(p + alpha * d, lo, hi)
        phi = merit(instance, cand, rho)
        flops.charge("cir", K=K)
        if phi <= thresh:
            return cand, alpha, phi, False
        if opts.second_order_correction:
            soc = np.clip(cand + second_order_correction(instance, cand, active), lo, hi)
            phi_soc = merit(instance, soc, rho)
            flops.charge("cir", K=K).charge("jacobian", K=K).charge("solve", n=int(active.sum()))
            flops.charge("cir", K=K)
            if phi_soc <= thresh:
                return soc, alpha, phi_soc, True
        alpha *= opts.backtrack
    raise NumericalFailure("line search found no merit decrease")


def solve_sqp(instance, p0, opts: SqpOptions | None = None, p_star=None, mu0=None):
    """Run SQP from ``p0``; returns ``(p, trace, report)``.

    Multipliers start at zero unless ``mu0`` is given (warm start).
    """
    opts = opts or SqpOptions()
    K = instance.K
    lo, hi = instance.p_min, instance.p_max
    p = np.clip(np.asarray(p0, dtype=float), lo, hi)
    book = RunBook("sqp", instance, p, opts, p_star)
    mu = np.zeros(K) if mu0 is None else np.maximum(np.asarray(mu0, dtype=float), 0.0)
    rho = 1.0
    for n in range(1, opts.criterion.max_iters + 1):
        # a disturbed iterate may sit outside the box
        p = np.clip(p, lo, hi)
        qp = build_qp(instance, p, mu, opts, book.flops)
        res = ip_qp_solve(qp.Q, qp.c, qp.A, qp.b, gap_tol=opts.qp_gap_tol,
                          res_tol=opts.qp_res_tol, max_iters=opts.qp_max_iters,
                          flops=book.flops)
        d, t = res.x[:K], res.x[K:]
        mu = np.maximum(res.z[:K], 0.0)
        relaxed = bool(np.max(t) > 1e-9 * np.max(instance.cir_target))

        rho_k = float(np.max(mu)) + 1.0
        rho = max(rho, rho_k) if opts.merit_rho == "monotone" else rho_k
        phi0 = merit(instance, p, rho)
        viol = np.sum(np.maximum(instance.cir_target
                                 - kernels.cir(instance.G, instance.noise, p), 0.0))
        # directional derivative bound of the l1 merit along d
        slope = float(np.sum(d) - rho * (viol - np.sum(t)))
        active = mu > 1e-8 * max(1.0, float(np.max(mu)))
        cand, alpha, phi, soc = _line_search(instance, p, d, rho, phi0, slope, active,
                                             opts, book.flops)
        p, done = book.step(n, cand, alpha=alpha, merit=phi, merit_prev=phi0,
                            qp_iters=res.iterations, relaxed=relaxed, shift=qp.shift,
                            soc=soc)
        if done:
            break
    book.trace.multipliers = mu
    return book.prev.copy(), book.trace, book.report()
