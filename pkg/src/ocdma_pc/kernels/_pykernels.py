"""Vectorised numpy implementations of the CIR kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same
signature and results equal up to floating-point reassociation.
Finite-difference kernels exploit the fact that perturbing ``p_j`` only
shifts the interference denominators by ``G[:, j] * h_j`` and the
numerator of user ``j``, so one perturbed CIR vector costs O(K) rather
than O(K^2).
"""
import numpy as np

BACKEND = "python"


def _parts(G, noise, p):
    diag = np.diag(G).copy()
    num = diag * p
    den = G @ p - num + noise
    return diag, num, den


def cir(G, noise, p):
    diag, num, den = _parts(G, noise, p)
    return num / den


def cir_jacobian(G, noise, p):
    diag, num, den = _parts(G, noise, p)
    gam = num / den
    J = -(gam / den)[:, None] * G
    np.fill_diagonal(J, diag / den)
    return J


def _perturbed_cir(G, diag, num, den, h):
    """CIR of every user (rows) after perturbing each power (columns) by +h and -h.

    Also returns the central difference ``up - dn`` in a cancellation-free
    closed form, so finite-difference slopes carry truncation error only.
    """
    K = len(h)
    idx = np.arange(K)
    Gh = G * h[None, :]
    a = den[:, None] + Gh
    b = den[:, None] - Gh
    up = num[:, None] / a
    dn = num[:, None] / b
    delta = -2.0 * num[:, None] * Gh / (a * b)
    own = diag * h
    up[idx, idx] = (num + own) / den
    dn[idx, idx] = (num - own) / den
    delta[idx, idx] = 2.0 * own / den
    return up, dn, delta


def fd_cir_jacobian(G, noise, p, h):
    diag, num, den = _parts(G, noise, p)
    _, _, delta = _perturbed_cir(G, diag, num, den, h)
    return delta / (2.0 * h[None, :])


def _psi_diff(up, dn, delta, target, mu, rho, literal):
    """``psi(v_up) - psi(v_dn)`` without subtracting nearly equal squares."""
    v_up = target[:, None] - up
    v_dn = target[:, None] - dn
    dv = -delta
    m = (mu / rho)[:, None]
    if literal:
        both = (v_up > 0) & (v_dn > 0)
        direct = (0.5 * rho * ((np.maximum(v_up, 0.0) + m) ** 2
                               - (np.maximum(v_dn, 0.0) + m) ** 2))
        return np.where(both, 0.5 * rho * dv * (v_up + v_dn + 2.0 * m), direct)
    t_up, t_dn = v_up + m, v_dn + m
    both = (t_up > 0) & (t_dn > 0)
    direct = 0.5 * rho * (np.maximum(t_up, 0.0) ** 2 - np.maximum(t_dn, 0.0) ** 2)
    return np.where(both, 0.5 * rho * dv * (t_up + t_dn), direct)


def fd_penalty_gradient(G, noise, p, h, target, mu, rho, literal):
    diag, num, den = _parts(G, noise, p)
    up, dn, delta = _perturbed_cir(G, diag, num, den, h)
    # the sum-power term is linear: its central difference is exactly one
    return 1.0 + _psi_diff(up, dn, delta, target, mu, rho, literal).sum(axis=0) / (2.0 * h)


def fd_weighted_hessian(G, noise, p, mu, h_inner, h_outer):
    K = len(p)
    H = np.empty((K, K))
    for j in range(K):
        e = np.zeros(K)
        e[j] = h_outer[j]
        gp = mu @ fd_cir_jacobian(G, noise, p + e, h_inner)
        gm = mu @ fd_cir_jacobian(G, noise, p - e, h_inner)
        H[:, j] = (gp - gm) / (2.0 * h_outer[j])
    return 0.5 * (H + H.T)
