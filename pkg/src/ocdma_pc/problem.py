"""The minimum sum-power problem: CIR/SNIR evaluation, rates, and the closed-form oracle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import kernels
from .errors import SingularOrInfeasible
from .netmodel import NetworkInstance


def _check(instance: NetworkInstance, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (instance.K,):
        raise ValueError(f"power vector has shape {p.shape}, expected ({instance.K},)")
    return p


def cir(instance: NetworkInstance, p) -> np.ndarray:
    """Carrier-to-interference ratio of every user at transmit powers ``p``."""
    return kernels.cir(instance.G, instance.noise, _check(instance, p))


def snir(instance: NetworkInstance, p) -> np.ndarray:
    return instance.chip_rate / instance.min_rate * cir(instance, p)


def objective(p) -> float:
    """Total transmitted power."""
    return float(np.sum(p))


def rate(instance: NetworkInstance, p) -> np.ndarray:
    """Per-user rate in bit/s; equals the class minimum when the CIR sits on target."""
    return instance.min_rate * cir(instance, p) / instance.cir_target


def sum_rate(instance: NetworkInstance, p) -> float:
    return float(rate(instance, p).sum())


def in_box(instance: NetworkInstance, p) -> bool:
    p = np.asarray(p)
    return bool(np.all(p >= instance.p_min) and np.all(p <= instance.p_max))


@dataclass(frozen=True, eq=False)
class MatrixForm:
    H: np.ndarray
    u_bar: np.ndarray
    lambda_star: np.ndarray  # diagonal of the target matrix

    @property
    def K(self) -> int:
        return len(self.u_bar)

    def system_matrix(self, dtype=np.float64) -> np.ndarray:
        """``I - diag(lambda_star) @ H`` assembled in ``dtype`` arithmetic."""
        lam = self.lambda_star.astype(dtype)
        return np.eye(self.K, dtype=dtype) - lam[:, None] * self.H.astype(dtype)


def matrix_form(instance: NetworkInstance) -> MatrixForm:
    diag = np.diag(instance.G)
    H = instance.G / diag[:, None]
    np.fill_diagonal(H, 0.0)
    return MatrixForm(H=H, u_bar=instance.cir_target * instance.noise / diag,
                      lambda_star=instance.cir_target.copy())


def spectral_radius_bounds(A, iters: int = 200, tol: float = 1e-10):
    """Collatz-Wielandt bracket on the Perron root of a nonnegative matrix.

    Power iteration from the all-ones vector; after each step
    ``min(Ax/x) <= rho(A) <= max(Ax/x)``. Stops when the bracket is narrower
    than ``tol`` (relative) or after ``iters`` steps.
    """
    A = np.asarray(A, dtype=float)
    x = np.ones(A.shape[0])
    lo, hi = 0.0, np.inf
    for _ in range(iters):
        y = A @ x
        if not np.any(y > 0):
            return 0.0, 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(x > 0, y / x, np.nan)
        lo, hi = np.nanmin(r), np.nanmax(r)
        if hi - lo <= tol * max(hi, 1e-300):
            break
        x = y / np.linalg.norm(y)
        if np.any(x <= 0):
            # reducible pattern: nudge to keep the ratios defined
            x = x + 1e-300
    return float(lo), float(hi)


def spectral_radius(A, iters: int = 200, tol: float = 1e-10) -> float:
    lo, hi = spectral_radius_bounds(A, iters, tol)
    return 0.5 * (lo + hi)


def tarhuni_solve(mf: MatrixForm, dtype=np.float64) -> np.ndarray:
    """Closed-form powers ``(I - Lambda* H)^-1 u_bar`` (all CIR constraints tight).

    ``dtype=np.float32`` assembles and factors the system in single precision;
    the result is returned as float64 either way. Raises
    :class:`SingularOrInfeasible` when the spectral radius of ``Lambda* H`` is
    not below one or the factorisation fails.
    """
    lo, _ = spectral_radius_bounds(mf.lambda_star[:, None] * mf.H)
    if lo >= 1.0:
        raise SingularOrInfeasible(f"spectral radius of Lambda*H is {lo:.6g} >= 1")
    A = mf.system_matrix(dtype)
    try:
        with np.errstate(all="raise"):
            lu = scipy.linalg.lu_factor(A, check_finite=True)
            if np.any(np.abs(np.diag(lu[0])) < np.finfo(A.dtype).tiny):
                raise SingularOrInfeasible("singular system matrix")
            p = scipy.linalg.lu_solve(lu, mf.u_bar.astype(dtype))
    except (FloatingPointError, ValueError, scipy.linalg.LinAlgError) as exc:
        raise SingularOrInfeasible(f"closed-form solve failed: {exc}") from exc
    p = np.asarray(p, dtype=np.float64)
    # decides the case where the bracket straddles one
    if not np.all(p > 0):
        raise SingularOrInfeasible("closed-form powers are not all positive")
    return p


def oracle(instance: NetworkInstance, dtype=np.float64):
    """Closed-form powers for ``instance`` and whether they respect the power box."""
    p = tarhuni_solve(matrix_form(instance), dtype)
    return p, in_box(instance, p)
