"""Modified Hopfield network with valid-subspace confinement.

The network state is ``v = (p, q)``: K transmit powers followed by K CIR
slacks. The CIR inequality becomes the equality ``h(v) = CIR(p) - CIR* - q = 0``
with ``q >= 0``. Each external iteration alternates three moves:

* optimisation: ``p <- p - dt`` (gradient of the linear objective; slacks
  carry no cost and are left alone),
* activation: saturating ramp onto ``[p_min, p_max] x [0, q_max]``,
* confinement: Newton projection ``v <- v - J^T (J J^T)^-1 h(v)`` onto the
  constraint manifold, alternated with activation until the state stops
  moving.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import kernels
from .errors import NoConvergence, RankDeficient
from .report import RunBook, SolverOptions


@dataclass
class HopfieldOptions(SolverOptions):
    dt: float = 0.1
    confinement_tol: float = 1e-10
    max_confinement_iters: int = 50
    # rounds of (confine, activate) per external iteration
    max_inner_rounds: int = 50
    # "optimize": each external iteration starts with the gradient move, so
    # confinement always approaches the manifold from below; "confine" runs
    # confine -> activate -> optimize instead.
    first_move: str = "optimize"
    q_max_margin: float = 10.0
    cond_limit: float = 1e12
    # True restarts the slacks from zero every external iteration; by default
    # they carry over and are zeroed only after an external disturbance
    reset_slacks: bool = False


def _split(instance, v):
    K = instance.K
    return v[:K], v[K:]


def constraint_map(instance, v):
    """Residual ``h(v)`` (length K) and its analytic Jacobian (K x 2K)."""
    v = np.asarray(v, dtype=float)
    p, q = _split(instance, v)
    K = instance.K
    gam = kernels.cir(instance.G, instance.noise, p)
    J = np.empty((K, 2 * K))
    J[:, :K] = kernels.cir_jacobian(instance.G, instance.noise, p)
    J[:, K:] = -np.eye(K)
    return gam - instance.cir_target - q, J


def project_to_manifold(fun, v, tol=1e-10, max_iters=50, admissible=None,
                        cond_limit=1e12, flops=None):
    """Iterated minimum-norm Newton projection onto ``{v : fun(v)[0] = 0}``.

    ``fun(v)`` returns ``(h, J)``. A step is halved until ``||h||`` strictly
    decreases and ``admissible(v)`` holds. Raises :class:`RankDeficient` if
    ``J J^T`` is numerically singular or no decreasing step exists, and
    :class:`NoConvergence` when ``max_iters`` steps do not reach ``tol``.
    """
    v = np.array(v, dtype=float)
    h, J = fun(v)
    r = np.linalg.norm(h)
    m, n = J.shape
    for _ in range(max_iters):
        if r <= tol:
            return v
        JJt = J @ J.T
        if flops is not None:
            flops.charge("matmul", m=m, n=n, p=m).charge("solve", n=m)
            flops.charge("matvec", m=n, n=m).charge("axpy", n=n)
        if np.linalg.cond(JJt) > cond_limit:
            raise RankDeficient("J J^T is numerically singular")
        step = J.T @ scipy.linalg.cho_solve(scipy.linalg.cho_factor(JJt), h)
        t = 1.0
        for _ in range(40):
            cand = v - t * step
            if admissible is None or admissible(cand):
                h_new, J_new = fun(cand)
                r_new = np.linalg.norm(h_new)
                if r_new < r:
                    break
            t *= 0.5
        else:
            raise RankDeficient(f"no Newton step reduces ||h|| (= {r:.3e})")
        v, h, J, r = cand, h_new, J_new, r_new
    if r <= tol:
        return v
    raise NoConvergence(f"confinement stopped at ||h|| = {r:.3e} after {max_iters} steps")


def confine(instance, v, tol=1e-10, max_iters=50, cond_limit=1e12, flops=None):
    """Project ``v`` onto the CIR-equality manifold of ``instance``."""
    G, noise = instance.G, instance.noise
    diag = np.diag(G)
    K = instance.K

    def fun(x):
        if flops is not None:
            flops.charge("cir", K=K).charge("jacobian", K=K)
        return constraint_map(instance, x)

    def admissible(x):
        p = x[:K]
        return bool(np.all(G @ p - diag * p + noise > 0))

    return project_to_manifold(fun, v, tol, max_iters, admissible, cond_limit, flops)


def q_bound(instance, margin=10.0) -> np.ndarray:
    """Slack ceiling: ``margin`` times the CIR reached with every user at ``p_max``."""
    full = np.full(instance.K, instance.p_max)
    return margin * kernels.cir(instance.G, instance.noise, full)


def activate(v, p_min, p_max, q_max=np.inf):
    """Saturating ramp: clamp powers to the box and slacks to ``[0, q_max]``."""
    v = np.asarray(v, dtype=float)
    K = len(v) // 2
    return np.concatenate([np.clip(v[:K], p_min, p_max), np.clip(v[K:], 0.0, q_max)])


def optimize_step(v, dt=0.1):
    """Descent move for the sum-power objective: powers drop by ``dt``, slacks stay."""
    v = np.array(v, dtype=float)
    K = len(v) // 2
    v[:K] -= dt
    return v


def _settle(instance, v, opts, q_max, flops):
    """Alternate confinement and activation until the state is stationary."""
    for rounds in range(1, opts.max_inner_rounds + 1):
        w = confine(instance, v, opts.confinement_tol, opts.max_confinement_iters,
                    opts.cond_limit, flops)
        a = activate(w, instance.p_min, instance.p_max, q_max)
        flops.charge("vector", n=2 * instance.K, ops=2)
        moved = np.max(np.abs(a - w))
        v = a
        if moved == 0.0:
            break
        h, _ = constraint_map(instance, v)
        if np.linalg.norm(h) <= opts.confinement_tol:
            break
    return v, rounds


def solve_hopfield(instance, p0, opts: HopfieldOptions | None = None, p_star=None):
    """Run the network from ``p0`` (slacks start at zero).

    Returns ``(p, trace, report)``; confinement failures propagate as
    :class:`RankDeficient` / :class:`NoConvergence`.
    """
    opts = opts or HopfieldOptions()
    if opts.first_move not in ("optimize", "confine"):
        raise ValueError("first_move must be 'optimize' or 'confine'")
    K = instance.K
    p0 = np.clip(np.asarray(p0, dtype=float), instance.p_min, instance.p_max)
    book = RunBook("hopfield", instance, p0, opts, p_star)
    q_max = q_bound(instance, opts.q_max_margin)
    v = np.concatenate([p0, np.zeros(K)])
    crit = opts.criterion
    for n in range(1, crit.max_iters + 1):
        if opts.first_move == "optimize":
            v = activate(optimize_step(v, opts.dt), instance.p_min, instance.p_max, q_max)
            book.flops.charge("axpy", n=K).charge("vector", n=2 * K, ops=2)
            v, rounds = _settle(instance, v, opts, q_max, book.flops)
        else:
            v = activate(v, instance.p_min, instance.p_max, q_max)
            v, rounds = _settle(instance, v, opts, q_max, book.flops)
        p, done = book.step(n, v[:K], inner_rounds=rounds)
        # an external disturbance replaces the powers, so the slacks restart
        # from zero as on a fresh start from those powers
        q = np.zeros(K) if (opts.reset_slacks or book.trace.extra[-1].get("disturbed")) else v[K:]
        v = np.concatenate([p, q])
        if opts.first_move == "confine":
            v = optimize_step(v, opts.dt)
            book.flops.charge("axpy", n=K)
        if done:
            break
    return book.prev.copy(), book.trace, book.report()
