import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_point
from ocdma_pc.errors import NoConvergence, RankDeficient
from ocdma_pc.hopfield import (HopfieldOptions, activate, confine, constraint_map,
                               optimize_step, project_to_manifold, q_bound, solve_hopfield)
from ocdma_pc.metrics import nmse
from ocdma_pc.problem import oracle
from ocdma_pc.report import Status


def test_constraint_map_zero_at_oracle(inst4):
    p, _ = oracle(inst4)
    h, _ = constraint_map(inst4, np.concatenate([p, np.zeros(4)]))
    assert np.max(np.abs(h)) <= 1e-14


def test_slack_column_is_linear(inst4):
    rng = np.random.default_rng(0)
    v = np.concatenate([random_point(inst4, rng), rng.uniform(0, 0.1, 4)])
    h0, J = constraint_map(inst4, v)
    w = v.copy()
    w[4 + 2] += 0.01
    h1, _ = constraint_map(inst4, w)
    assert h1[2] == pytest.approx(h0[2] - 0.01, abs=1e-15)
    assert np.array_equal(np.delete(h1, 2), np.delete(h0, 2))
    assert np.array_equal(J[:, 4:], -np.eye(4))


def test_constraint_jacobian_vs_fd(inst4):
    rng = np.random.default_rng(1)
    v = np.concatenate([random_point(inst4, rng), rng.uniform(0, 0.1, 4)])
    _, J = constraint_map(inst4, v)
    Jf = np.empty_like(J)
    for j in range(8):
        e = np.zeros(8)
        # relative step 1e-4: at 1e-6 the roundoff in h(v + e) - h(v - e)
        # already reaches the 1e-5 bound
        e[j] = 1e-4 * (abs(v[j]) if v[j] > 0 else 1.0)
        Jf[:, j] = (constraint_map(inst4, v + e)[0] - constraint_map(inst4, v - e)[0]) / (2 * e[j])
    assert np.max(np.abs(J - Jf)) <= 1e-5


def test_projection_linear_toy_one_step():
    A = np.array([[1.0, 1.0]])
    calls = []

    def fun(x):
        calls.append(x.copy())
        return A @ x - 1.0, A

    out = project_to_manifold(fun, np.array([0.7, 0.7]))
    assert np.allclose(out, [0.5, 0.5], atol=1e-15)
    assert len(calls) == 2  # start and one Newton step


def test_confine_fixed_point_and_random_start(inst4):
    p, _ = oracle(inst4)
    v = np.concatenate([p, np.zeros(4)])
    assert np.array_equal(confine(inst4, v), v)
    rng = np.random.default_rng(2)
    for _ in range(10):
        w = confine(inst4, np.concatenate([random_point(inst4, rng), np.zeros(4)]))
        assert np.linalg.norm(constraint_map(inst4, w)[0]) <= 1e-10


def test_confine_errors():
    def singular(x):
        return np.array([1.0, 1.0]), np.array([[1.0, 0.0], [1.0, 0.0]])

    with pytest.raises(RankDeficient):
        project_to_manifold(singular, np.zeros(2))

    def slow(x):
        # h = x^2 - 1 shrinks but cannot hit 1e-10 in two steps from 10
        return np.array([x[0] ** 2 - 1.0]), np.array([[2 * x[0]]])

    with pytest.raises(NoConvergence):
        project_to_manifold(slow, np.array([10.0]), max_iters=2)


@given(arrays(np.float64, 8, elements=st.floats(-1.0, 1.0)))
def test_activation_clamps_and_is_idempotent(v):
    a = activate(v, 1e-10, 0.1, 5.0)
    assert np.all((a[:4] >= 1e-10) & (a[:4] <= 0.1))
    assert np.all((a[4:] >= 0) & (a[4:] <= 5.0))
    assert np.array_equal(activate(a, 1e-10, 0.1, 5.0), a)
    inside = (v[:4] >= 1e-10) & (v[:4] <= 0.1)
    assert np.array_equal(a[:4][inside], v[:4][inside])


def test_activation_examples():
    assert activate(np.array([0.15, 0.0]), 1e-10, 0.1)[0] == 0.1
    v = np.array([0.05, 0.02, 0.3, 0.1])
    assert np.array_equal(activate(v, 1e-10, 0.1), v)


@given(arrays(np.float64, 6, elements=st.floats(-10, 10)), st.floats(1e-3, 1.0))
def test_optimize_step(v, dt):
    w = optimize_step(v, dt)
    assert np.allclose(w[:3], v[:3] - dt, rtol=0, atol=1e-12)
    assert np.array_equal(w[3:], v[3:])
    assert np.allclose(optimize_step(optimize_step(v, dt), dt), optimize_step(v, 2 * dt),
                       atol=1e-12)


def test_optimize_step_example():
    assert optimize_step(np.array([0.5, 0.0]), 0.1)[0] == pytest.approx(0.4)


def test_q_bound_positive(inst8):
    assert np.all(q_bound(inst8) > 10 * inst8.cir_target)


def test_start_at_oracle(inst8):
    p, _ = oracle(inst8)
    _, tr, rep = solve_hopfield(inst8, p)
    assert rep.converged and rep.iterations <= 2


def test_random_start_k8(inst8):
    p_star, _ = oracle(inst8)
    p0 = random_point(inst8, np.random.default_rng(3))
    p, tr, rep = solve_hopfield(inst8, p0)
    assert rep.status is Status.CONVERGED
    assert rep.iterations <= 3 and rep.feasibility <= 1e-4
    assert nmse(p, p_star) <= 1e-6
    assert len(tr) == rep.iterations + 1


@given(st.integers(0, 500))
def test_trace_properties(seed):
    from ocdma_pc.netmodel import SystemParams, generate_feasible_instance
    inst = generate_feasible_instance(SystemParams(), "II", seed, 6)
    p0 = random_point(inst, np.random.default_rng(seed))
    _, tr, rep = solve_hopfield(inst, p0)
    P = tr.P
    assert np.all((P[1:] >= inst.p_min) & (P[1:] <= inst.p_max))
    s = np.array(tr.sum_power[1:])
    assert np.all(np.diff(s) <= 1e-12)
    assert rep.iterations <= 10


def test_small_dt_stays_near_first_confined_point(inst8):
    # continuity in dt: the drift away from the first confined iterate over a
    # fixed number of iterations shrinks with the step
    p0 = random_point(inst8, np.random.default_rng(4))
    drift = []
    for dt in (0.01, 0.001):
        _, tr, _ = solve_hopfield(inst8, p0, HopfieldOptions(dt=dt))
        P = tr.P
        drift.append(np.linalg.norm(P[-1] - P[1]) / np.linalg.norm(P[1]))
    assert drift[1] < drift[0] < 0.05


def test_confine_first_variant(inst8):
    p_star, _ = oracle(inst8)
    p, _, rep = solve_hopfield(inst8, random_point(inst8, np.random.default_rng(5)),
                               HopfieldOptions(first_move="confine"))
    # ablation ordering: converges, but only to the general oracle-distance bound
    assert rep.converged and nmse(p, p_star) <= 1e-3
    with pytest.raises(ValueError):
        solve_hopfield(inst8, p, HopfieldOptions(first_move="sideways"))
