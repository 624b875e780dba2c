import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_point, toy_instance
from ocdma_pc import alm, kernels
from ocdma_pc.alm import (AlmOptions, aug_lagrangian, inner_solve, inner_tolerance,
                          minimize_box, penalty_terms, projected_gradient_norm,
                          solve_alm, update_multipliers)
from ocdma_pc.errors import NumericalFailure
from ocdma_pc.metrics import nmse
from ocdma_pc.netmodel import SystemParams, generate_feasible_instance
from ocdma_pc.problem import oracle


def kkt_multipliers(inst, p):
    """mu solving J' mu = 1 at the oracle (all constraints active)."""
    J = kernels.cir_jacobian(inst.G, inst.noise, p)
    return np.linalg.solve(J.T, np.ones(inst.K))


def test_inactive_penalty_is_objective(inst8):
    p = np.full(8, 0.09)
    assert aug_lagrangian(inst8, p, np.zeros(8), 10.0) == pytest.approx(p.sum(), rel=1e-15)
    assert aug_lagrangian(inst8, p, np.zeros(8), 10.0, literal=True) == pytest.approx(p.sum())


def test_single_violation_example():
    assert penalty_terms(np.array([0.1]), np.zeros(1), 10.0)[0] == pytest.approx(0.05)
    assert penalty_terms(np.array([0.1]), np.zeros(1), 10.0, True)[0] == pytest.approx(0.05)
    inst = toy_instance([[1.0]], 1e-3, 1.0)
    # CIR = 0.9 at p = 9e-4, so v = 0.1
    assert aug_lagrangian(inst, [9e-4], [0.0], 10.0) == pytest.approx(9e-4 + 0.05)
    with pytest.raises(ValueError):
        aug_lagrangian(inst, [9e-4], [0.0], 0.0)


@given(st.floats(-1, 1), st.floats(0, 10), st.floats(0.1, 100))
def test_penalty_forms(v, mu, rho):
    c = penalty_terms(np.array([v]), np.array([mu]), rho)[0]
    lit = penalty_terms(np.array([v]), np.array([mu]), rho, True)[0]
    if mu == 0:
        assert c == pytest.approx(lit, abs=1e-15)
    # classical form is continuous and bounded below by -mu^2/(2 rho)
    assert c >= -mu * mu / (2 * rho) - 1e-12


def test_minimize_box_1d_face():
    c = 3.0
    x, it = minimize_box(lambda x: float((x[0] - c) ** 2), lambda x: 2 * (x - c),
                         np.array([0.2]), 0.0, 1.0, 1e-10)
    assert x[0] == 1.0
    x, _ = minimize_box(lambda x: float((x[0] + 2) ** 2), lambda x: 2 * (x + 2),
                        np.array([0.7]), 0.0, 1.0, 1e-10)
    assert x[0] == 0.0


def test_minimize_box_rosenbrock_interior():
    def f(x):
        return float(100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2)

    def g(x):
        return np.array([-400 * x[0] * (x[1] - x[0] ** 2) - 2 * (1 - x[0]),
                         200 * (x[1] - x[0] ** 2)])

    x, _ = minimize_box(f, g, np.array([-1.2, 1.0]), -2.0, 2.0, 1e-8)
    assert np.allclose(x, [1.0, 1.0], atol=1e-6)


def test_minimize_box_cap():
    with pytest.raises(NumericalFailure):
        minimize_box(lambda x: float(x @ x), lambda x: 2 * x, np.ones(3), -5.0, 5.0, 0.0,
                     max_iters=2)


def test_projected_gradient_norm():
    assert projected_gradient_norm(np.array([0.0]), np.array([5.0]), 0.0, 1.0) == 0.0
    assert projected_gradient_norm(np.array([0.5]), np.array([0.1]), 0.0, 1.0) == pytest.approx(0.1)


def test_inner_returns_immediately_when_stationary():
    # single user with no interference, target met with margin: A = p near
    # p_min, so the projected gradient vanishes at the lower face
    inst = toy_instance([[1.0]], 1e-3, 1e-9)
    p, it = inner_solve(inst, np.array([1e-10]), np.zeros(1), 10.0, 1e-6)
    assert it == 0 and p[0] == pytest.approx(1e-10)


def test_penalty_path_large_rho(inst4):
    p_star, _ = oracle(inst4)
    p, _ = inner_solve(inst4, random_point(inst4, np.random.default_rng(0)), np.zeros(4), 1e4,
                       1e-10)
    assert np.linalg.norm(p - p_star) / np.linalg.norm(p_star) <= 1e-3


def test_update_examples():
    assert update_multipliers([0.0], 10.0, [0.1])[0] == pytest.approx(1.0)
    assert update_multipliers([0.0], 10.0, [-0.3])[0] == 0.0
    assert update_multipliers([5.0], 10.0, [1.0], mu_max=8.0)[0] == 8.0


def test_inner_tolerance_schedule():
    o = AlmOptions()
    e = [inner_tolerance(k, o) for k in range(1, 10)]
    assert e[0] == pytest.approx(1e-3)
    assert all(b < a for a, b in zip(e, e[1:]))
    assert inner_tolerance(50, o) == o.eps_floor


def test_start_at_oracle_with_optimal_multipliers(inst8):
    p, _ = oracle(inst8)
    _, _, rep = solve_alm(inst8, p, mu0=kkt_multipliers(inst8, p))
    assert rep.converged and rep.iterations <= 2


def test_random_start_k8(inst8):
    p_star, _ = oracle(inst8)
    p, tr, rep = solve_alm(inst8, random_point(inst8, np.random.default_rng(3)))
    assert rep.converged
    assert rep.iterations <= 8 and rep.feasibility <= 1e-4
    assert nmse(p, p_star) <= 1e-3
    assert np.allclose(tr.multipliers, kkt_multipliers(inst8, p_star), rtol=1e-2)


def test_voracity(inst8):
    # early iterates undercut the optimal power while still infeasible
    p_star, _ = oracle(inst8)
    _, tr, _ = solve_alm(inst8, random_point(inst8, np.random.default_rng(3)))
    early = [(s, F) for s, F in zip(tr.sum_power[1:4], tr.feasibility[1:4])]
    assert any(s < p_star.sum() and F > 0 for s, F in early)


@given(st.integers(0, 300))
def test_run_invariants(seed):
    inst = generate_feasible_instance(SystemParams(), "II", seed, 6)
    calls = []
    real = alm.inner_solve

    def spy(instance, p_start, mu, rho, eps, opts=None, flops=None):
        p, it = real(instance, p_start, mu, rho, eps, opts, flops)
        calls.append((p, np.array(mu), rho, eps))
        return p, it

    alm.inner_solve = spy
    try:
        p, tr, rep = solve_alm(inst, random_point(inst, np.random.default_rng(seed)))
    finally:
        alm.inner_solve = real
    rhos = [e["rho"] for e in tr.extra[1:]]
    assert all(b >= a for a, b in zip(rhos, rhos[1:]))
    assert np.all((tr.multipliers >= 0) & (tr.multipliers <= 1e8))
    for q, mu, rho, eps in calls:
        assert np.all(mu >= 0)
        g = alm.aug_gradient(inst, q, mu, rho)
        assert projected_gradient_norm(q, g, inst.p_min, inst.p_max) <= eps
    if rep.converged:
        p_star, _ = oracle(inst)
        assert np.linalg.norm(p - p_star) / np.linalg.norm(p_star) <= 1e-3


def test_literal_form_has_a_kink():
    # the printed placement jumps in slope by mu at v = 0, so once mu > 0 the
    # inner minimiser sits on a kink and the projected-gradient test cannot
    # be met; the classical form is smooth there
    mu, rho, h = np.array([0.3]), 10.0, 1e-7
    lit = [penalty_terms(np.array([v]), mu, rho, True)[0] for v in (-h, 0.0, h)]
    cls = [penalty_terms(np.array([v]), mu, rho)[0] for v in (-h, 0.0, h)]
    assert (lit[2] - lit[1]) / h - (lit[1] - lit[0]) / h == pytest.approx(0.3, rel=1e-4)
    assert abs((cls[2] - cls[1]) / h - (cls[1] - cls[0]) / h) < 1e-4


def test_literal_form_first_iteration_matches_classical(inst8):
    # with mu = 0 both forms coincide, so the first outer iterate agrees
    p0 = random_point(inst8, np.random.default_rng(4))
    a, _ = inner_solve(inst8, p0, np.zeros(8), 10.0, 1e-3)
    b, _ = inner_solve(inst8, p0, np.zeros(8), 10.0, 1e-3, AlmOptions(literal=True))
    assert np.array_equal(a, b)
