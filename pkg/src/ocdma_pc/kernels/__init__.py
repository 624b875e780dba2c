"""Hot numerical kernels for CIR evaluation and its finite-difference derivatives.

The compiled extension ``_ckernels`` is used when it imports; otherwise the
numpy implementation in ``_pykernels`` is selected. Set
``OCDMA_PC_KERNELS=python`` to force the fallback (``cython`` to require the
extension).

All functions take the full K x K gain matrix ``G`` (diagonal included), the
per-user noise powers and a power vector, and return float64 arrays.
"""
import os

import numpy as np

from . import _pykernels

_choice = os.environ.get("OCDMA_PC_KERNELS", "auto").lower()

if _choice == "python":
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        if _choice == "cython":
            raise
        _impl = _pykernels

BACKEND = _impl.BACKEND


def available_backends():
    """Mapping of backend name to module for every importable implementation."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out


def _f(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def cir(G, noise, p):
    return _impl.cir(_f(G), _f(noise), _f(p))


def cir_jacobian(G, noise, p):
    return _impl.cir_jacobian(_f(G), _f(noise), _f(p))


def fd_cir_jacobian(G, noise, p, h):
    return _impl.fd_cir_jacobian(_f(G), _f(noise), _f(p), _f(h))


def fd_penalty_gradient(G, noise, p, h, target, mu, rho, literal=False):
    """Central-difference gradient of ``sum(p) + sum_i psi_i(CIR_i(p))``.

    ``psi`` is the augmented-Lagrangian penalty: the classical form
    ``rho/2 * (max(0, v + mu/rho)^2 - (mu/rho)^2)`` or, with ``literal``,
    ``rho/2 * (max(0, v) + mu/rho)^2``, where ``v = target - CIR``.
    """
    return _impl.fd_penalty_gradient(_f(G), _f(noise), _f(p), _f(h),
                                     _f(target), _f(mu), float(rho),
                                     bool(literal))


def fd_weighted_hessian(G, noise, p, mu, h_inner, h_outer):
    """Symmetrised Hessian of ``mu @ CIR(p)`` by differencing FD gradients."""
    return _impl.fd_weighted_hessian(_f(G), _f(noise), _f(p), _f(mu),
                                     _f(h_inner), _f(h_outer))
