# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled CIR kernels; mirrors ``_pykernels`` one function at a time."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


cdef void _parts(const double[:, ::1] G, const double[::1] noise,
                 const double[::1] p, double[::1] diag, double[::1] num,
                 double[::1] den) noexcept nogil:
    cdef Py_ssize_t K = p.shape[0]
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(K):
        s = 0.0
        for j in range(K):
            if j != i:
                s += G[i, j] * p[j]
        diag[i] = G[i, i]
        num[i] = G[i, i] * p[i]
        den[i] = s + noise[i]


def cir(const double[:, ::1] G, const double[::1] noise, const double[::1] p):
    cdef Py_ssize_t K = p.shape[0]
    cdef Py_ssize_t i
    diag = np.empty(K)
    num = np.empty(K)
    den = np.empty(K)
    out = np.empty(K)
    cdef double[::1] d = diag, n = num, dn = den, o = out
    with nogil:
        _parts(G, noise, p, d, n, dn)
        for i in range(K):
            o[i] = n[i] / dn[i]
    return out


def cir_jacobian(const double[:, ::1] G, const double[::1] noise,
                 const double[::1] p):
    cdef Py_ssize_t K = p.shape[0]
    cdef Py_ssize_t i, j
    cdef double g
    diag = np.empty(K)
    num = np.empty(K)
    den = np.empty(K)
    J = np.empty((K, K))
    cdef double[::1] d = diag, n = num, dn = den
    cdef double[:, ::1] Jv = J
    with nogil:
        _parts(G, noise, p, d, n, dn)
        for i in range(K):
            g = n[i] / dn[i]
            for j in range(K):
                if j == i:
                    Jv[i, j] = d[i] / dn[i]
                else:
                    Jv[i, j] = -g * G[i, j] / dn[i]
    return J


cdef inline double _gamma_pert(const double[:, ::1] G, double[::1] d,
                               double[::1] n, double[::1] dn,
                               Py_ssize_t i, Py_ssize_t j,
                               double h) noexcept nogil:
    if i == j:
        return (n[i] + d[i] * h) / dn[i]
    return n[i] / (dn[i] + G[i, j] * h)


cdef inline double _gamma_delta(const double[:, ::1] G, double[::1] d,
                                double[::1] n, double[::1] dn,
                                Py_ssize_t i, Py_ssize_t j,
                                double h) noexcept nogil:
    # CIR(p + h e_j) - CIR(p - h e_j) in closed form, free of cancellation
    cdef double gh
    if i == j:
        return 2.0 * d[i] * h / dn[i]
    gh = G[i, j] * h
    return -2.0 * n[i] * gh / ((dn[i] + gh) * (dn[i] - gh))


cdef void _fd_jac(const double[:, ::1] G, double[::1] d, double[::1] n,
                  double[::1] dn, const double[::1] h,
                  double[:, ::1] J) noexcept nogil:
    cdef Py_ssize_t K = d.shape[0]
    cdef Py_ssize_t i, j
    for j in range(K):
        for i in range(K):
            J[i, j] = _gamma_delta(G, d, n, dn, i, j, h[j]) / (2.0 * h[j])


def fd_cir_jacobian(const double[:, ::1] G, const double[::1] noise,
                    const double[::1] p, const double[::1] h):
    cdef Py_ssize_t K = p.shape[0]
    diag = np.empty(K)
    num = np.empty(K)
    den = np.empty(K)
    J = np.empty((K, K))
    cdef double[::1] d = diag, n = num, dn = den
    cdef double[:, ::1] Jv = J
    with nogil:
        _parts(G, noise, p, d, n, dn)
        _fd_jac(G, d, n, dn, h, Jv)
    return J


cdef inline double _psi_diff(double g_up, double g_dn, double delta,
                             double target, double m, double rho,
                             bint literal) noexcept nogil:
    # psi(v_up) - psi(v_dn) without subtracting nearly equal squares
    cdef double v_up = target - g_up
    cdef double v_dn = target - g_dn
    cdef double t_up, t_dn
    if literal:
        if v_up > 0.0 and v_dn > 0.0:
            return -0.5 * rho * delta * (v_up + v_dn + 2.0 * m)
        t_up = (v_up if v_up > 0.0 else 0.0) + m
        t_dn = (v_dn if v_dn > 0.0 else 0.0) + m
        return 0.5 * rho * (t_up * t_up - t_dn * t_dn)
    t_up = v_up + m
    t_dn = v_dn + m
    if t_up > 0.0 and t_dn > 0.0:
        return -0.5 * rho * delta * (t_up + t_dn)
    if t_up < 0.0:
        t_up = 0.0
    if t_dn < 0.0:
        t_dn = 0.0
    return 0.5 * rho * (t_up * t_up - t_dn * t_dn)


def fd_penalty_gradient(const double[:, ::1] G, const double[::1] noise,
                        const double[::1] p, const double[::1] h,
                        const double[::1] target, const double[::1] mu,
                        double rho, bint literal):
    cdef Py_ssize_t K = p.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc
    diag = np.empty(K)
    num = np.empty(K)
    den = np.empty(K)
    out = np.empty(K)
    cdef double[::1] d = diag, n = num, dn = den, o = out
    with nogil:
        _parts(G, noise, p, d, n, dn)
        for j in range(K):
            acc = 0.0
            for i in range(K):
                acc += _psi_diff(_gamma_pert(G, d, n, dn, i, j, h[j]),
                                 _gamma_pert(G, d, n, dn, i, j, -h[j]),
                                 _gamma_delta(G, d, n, dn, i, j, h[j]),
                                 target[i], mu[i] / rho, rho, literal)
            # the sum-power term is linear: its central difference is exactly one
            o[j] = 1.0 + acc / (2.0 * h[j])
    return out


def fd_weighted_hessian(const double[:, ::1] G, const double[::1] noise,
                        const double[::1] p, const double[::1] mu,
                        const double[::1] h_inner, const double[::1] h_outer):
    cdef Py_ssize_t K = p.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double sgn, acc
    diag = np.empty(K)
    num = np.empty(K)
    den = np.empty(K)
    num2 = np.empty(K)
    den2 = np.empty(K)
    Jb = np.empty((K, K))
    H = np.zeros((K, K))
    cdef double[::1] d = diag, n = num, dn = den, n2 = num2, dn2 = den2
    cdef double[:, ::1] Jv = Jb
    cdef double[:, ::1] Hv = H
    cdef int s
    with nogil:
        _parts(G, noise, p, d, n, dn)
        for j in range(K):
            for s in range(2):
                sgn = 1.0 if s == 0 else -1.0
                for i in range(K):
                    if i == j:
                        n2[i] = n[i] + d[i] * sgn * h_outer[j]
                        dn2[i] = dn[i]
                    else:
                        n2[i] = n[i]
                        dn2[i] = dn[i] + G[i, j] * sgn * h_outer[j]
                _fd_jac(G, d, n2, dn2, h_inner, Jv)
                for k in range(K):
                    acc = 0.0
                    for i in range(K):
                        acc += mu[i] * Jv[i, k]
                    Hv[k, j] += sgn * acc / (2.0 * h_outer[j])
        for j in range(K):
            for k in range(j + 1, K):
                acc = 0.5 * (Hv[j, k] + Hv[k, j])
                Hv[j, k] = acc
                Hv[k, j] = acc
    return H
