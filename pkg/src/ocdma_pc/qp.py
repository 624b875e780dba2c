"""Primal-dual interior-point solver for small dense convex QPs.

Solves ``min 1/2 x'Qx + c'x  s.t.  A x <= b`` with Mehrotra's
predictor-corrector. Equality constraints are not needed by the SQP
subproblem and are not supported.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalFailure


@dataclass
class QPResult:
    x: np.ndarray
    z: np.ndarray  # inequality multipliers, z >= 0
    iterations: int
    gap: float
    objective: float


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def ip_qp_solve(Q, c, A, b, x0=None, gap_tol=1e-8, res_tol=1e-8, max_iters=100,
                flops=None) -> QPResult:
    """Mehrotra predictor-corrector on the KKT system of a convex QP.

    Stops when the duality gap ``s'z`` is below ``gap_tol`` and the
    primal and dual residuals, relative to ``1 + ||b||`` and ``1 + ||c||``, are
    below ``res_tol``. Raises :class:`NumericalFailure` at the iteration cap
    or when the reduced KKT matrix is not positive definite.
    """
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = len(c), len(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    s = np.maximum(b - A @ x, 1.0)
    z = np.ones(m)
    nb, nc = 1.0 + np.linalg.norm(b), 1.0 + np.linalg.norm(c)

    for it in range(1, max_iters + 1):
        rd = Q @ x + c + A.T @ z
        rp = A @ x + s - b
        gap = float(s @ z)
        mu = gap / m
        if flops is not None:
            flops.charge("matvec", m=n, n=n).charge("matvec", m=m, n=n)
            flops.charge("matvec", m=n, n=m)
        if (gap <= gap_tol and np.linalg.norm(rp) <= res_tol * nb
                and np.linalg.norm(rd) <= res_tol * nc):
            obj = 0.5 * x @ Q @ x + c @ x
            return QPResult(x, z, it - 1, gap, float(obj))

        w = z / s
        M = Q + A.T @ (w[:, None] * A)
        if flops is not None:
            flops.charge("matmul", m=n, n=m, p=n).charge("solve", n=n)
        try:
            fac = scipy.linalg.cho_factor(M)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalFailure(f"QP normal matrix not positive definite: {exc}") from exc

        def direction(rc):
            # ds = -rp - A dx ; dz = (-rc - z*ds)/s
            rhs = -rd - A.T @ ((-rc + z * rp) / s)
            dx = scipy.linalg.cho_solve(fac, rhs)
            ds = -rp - A @ dx
            dz = (-rc - z * ds) / s
            return dx, ds, dz

        # predictor
        dx, ds, dz = direction(s * z)
        a_aff = min(_max_step(s, ds), _max_step(z, dz))
        mu_aff = float((s + a_aff * ds) @ (z + a_aff * dz)) / m
        sigma = (mu_aff / mu) ** 3
        # corrector
        dx, ds, dz = direction(s * z + ds * dz - sigma * mu)
        a = 0.995 * min(_max_step(s, ds), _max_step(z, dz))
        a = min(a, 1.0)
        x = x + a * dx
        s = s + a * ds
        z = z + a * dz
        if flops is not None:
            flops.charge("axpy", n=n).charge("axpy", n=m).charge("axpy", n=m)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            raise NumericalFailure("QP iterates are not finite")
    raise NumericalFailure(f"QP did not converge in {max_iters} interior-point iterations")


def box_rows(n, lb, ub):
    """Rows ``[I; -I] x <= [ub; -lb]``."""
    I = np.eye(n)
    return np.vstack([I, -I]), np.concatenate([ub, -np.asarray(lb)])
